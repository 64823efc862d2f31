//! Short textual names for systems and group elements, shared by the command
//! line and the test suites.
//!
//! Element names:
//!
//! | name          | element                                           |
//! |---------------|---------------------------------------------------|
//! | `identity`    | identity of `W(Z)`                                |
//! | `shift`       | `j ↦ j + 1`                                       |
//! | `shift:k`     | `j ↦ j + k`                                       |
//! | `tswap:a,b`   | transposition of the integers `a` and `b`         |
//! | `swap:w`      | cylinder swap of the word `w`, read on the orbit  |
//! | `comm:u,v`    | commutator of the cylinder swaps of `u` and `v`   |
//! | `@path.json`  | a serialized [`MapSpec`]                          |

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::fullgroup::{FullGroupError, LocalRuleElement};
use crate::subshift::{SubshiftError, SubshiftSystem, SubstitutionConfig};
use crate::wobbling::{MapSpec, WobblingError, WobblingMap};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("element '{0}' needs a subshift system")]
    NeedsSystem(String),
    #[error("cannot parse '{0}'")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error(transparent)]
    FullGroup(#[from] FullGroupError),
    #[error(transparent)]
    Map(#[from] WobblingError),
}

/// A map together with the name it was built from.
#[derive(Debug, Clone)]
pub struct NamedElement {
    pub id: String,
    pub map: WobblingMap,
    /// The local rule, for elements induced by the subshift.
    pub local: Option<LocalRuleElement>,
}

/// A builtin system name or the path of a JSON [`SubstitutionConfig`].
pub fn load_system(name: &str, horizon: usize) -> Result<SubshiftSystem, CatalogError> {
    let cfg = match SubstitutionConfig::builtin(name) {
        Ok(cfg) => cfg,
        Err(SubshiftError::UnknownBuiltin(_)) if Path::new(name).exists() => read_json(name)?,
        Err(e) => return Err(e.into()),
    };
    Ok(SubshiftSystem::from_config_with_horizon(&cfg, horizon)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CatalogError::Json {
        path: path.into(),
        source,
    })
}

fn integers<const K: usize>(s: &str, whole: &str) -> Result<[i64; K], CatalogError> {
    let parts: Vec<i64> = s
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CatalogError::Parse(whole.into()))?;
    parts
        .try_into()
        .map_err(|_| CatalogError::Parse(whole.into()))
}

pub fn parse_element(
    spec: &str,
    system: Option<&Arc<SubshiftSystem>>,
    horizon: usize,
) -> Result<NamedElement, CatalogError> {
    let named = |map, local| NamedElement {
        id: spec.to_string(),
        map,
        local,
    };
    let need = || system.ok_or_else(|| CatalogError::NeedsSystem(spec.into()));
    if let Some(path) = spec.strip_prefix('@') {
        let ms: MapSpec = read_json(path)?;
        return Ok(named(WobblingMap::from_spec(&ms, horizon)?, None));
    }
    let (head, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match (head, arg) {
        ("identity", "") => Ok(named(WobblingMap::identity(), None)),
        ("shift", "") => Ok(named(WobblingMap::shift(1), None)),
        ("shift", k) => Ok(named(WobblingMap::shift(integers::<1>(k, spec)?[0]), None)),
        ("tswap", ab) => {
            let [a, b] = integers::<2>(ab, spec)?;
            Ok(named(WobblingMap::transposition(a, b), None))
        }
        ("swap", w) if !w.is_empty() => {
            let e = LocalRuleElement::swap(need()?, w)?;
            Ok(named(e.embed()?, Some(e)))
        }
        ("comm", uv) => {
            let (u, v) = uv
                .split_once(',')
                .ok_or_else(|| CatalogError::Parse(spec.into()))?;
            let sys = need()?;
            let e = LocalRuleElement::swap(sys, u)?.commutator(&LocalRuleElement::swap(sys, v)?)?;
            Ok(named(e.embed()?, Some(e)))
        }
        _ => Err(CatalogError::UnknownElement(spec.into())),
    }
}

/// Names of the standard test pool on the Fibonacci system.
pub const FIBONACCI_POOL: [&str; 4] = ["shift", "swap:01", "swap:00", "comm:01,00100"];

pub fn fibonacci_pool(horizon: usize) -> Result<(Arc<SubshiftSystem>, Vec<NamedElement>), CatalogError> {
    let sys = Arc::new(load_system("fibonacci", horizon)?);
    let pool = FIBONACCI_POOL
        .iter()
        .map(|s| parse_element(s, Some(&sys), horizon))
        .collect::<Result<_, _>>()?;
    Ok((sys, pool))
}
