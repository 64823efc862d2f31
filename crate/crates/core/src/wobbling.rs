//! Bounded-displacement bijections of the integers (the wobbling group).
//!
//! A [`WobblingMap`] is an immutable, cheaply clonable description of a
//! bijection `g` of `Z` together with a certified bound on `sup |g(j) - j|`.
//! Four finite descriptions are supported: finitely supported permutation
//! tables, translations, maps induced by a local rule on a subshift orbit, and
//! formal compositions/inverses of these.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fullgroup::{ElementSpec, FullGroupError, LocalRuleElement};
use crate::subshift::{SubshiftError, SubshiftSystem, SubstitutionConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WobblingError {
    #[error("horizon exceeded: evaluation needs orbit window [{lo}, {hi}] (generated radius {horizon})")]
    HorizonExceeded { lo: i64, hi: i64, horizon: usize },
    #[error("bijectivity violation at {at}: {detail}")]
    BijectivityViolation { at: i64, detail: String },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid map description: {0}")]
    InvalidSpec(String),
}

impl From<SubshiftError> for WobblingError {
    fn from(e: SubshiftError) -> Self {
        match e {
            SubshiftError::HorizonExceeded { lo, hi, horizon } => {
                WobblingError::HorizonExceeded { lo, hi, horizon }
            }
            other => WobblingError::InvalidSpec(other.to_string()),
        }
    }
}

impl From<FullGroupError> for WobblingError {
    fn from(e: FullGroupError) -> Self {
        match e {
            FullGroupError::Subshift(s) => s.into(),
            other => WobblingError::InvalidSpec(other.to_string()),
        }
    }
}

#[derive(Debug)]
enum Node {
    Table(BTreeMap<i64, i64>),
    Shift(i64),
    Compose(WobblingMap, WobblingMap),
    Inverse(WobblingMap),
    Subshift(Arc<LocalRuleElement>),
}

/// An element of the wobbling group.
#[derive(Clone)]
pub struct WobblingMap {
    node: Arc<Node>,
    bound: u64,
}

impl fmt::Debug for WobblingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Table(t) => write!(f, "Table({t:?})"),
            Node::Shift(s) => write!(f, "Shift({s})"),
            Node::Compose(a, b) => write!(f, "({a:?} . {b:?})"),
            Node::Inverse(a) => write!(f, "Inv({a:?})"),
            Node::Subshift(e) => write!(f, "Subshift(radius {})", e.radius()),
        }
    }
}

/// `g(t + i) - (t + i)` for `i` in `[-radius, radius]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DisplacementPattern {
    pub center: i64,
    pub radius: usize,
    pub displacements: Vec<i64>,
}

impl DisplacementPattern {
    pub fn at(&self, i: i64) -> i64 {
        self.displacements[(i + self.radius as i64) as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.displacements.iter().all(|&d| d == 0)
    }
}

impl WobblingMap {
    pub fn identity() -> Self {
        WobblingMap {
            node: Arc::new(Node::Table(BTreeMap::new())),
            bound: 0,
        }
    }

    /// `j -> j + by`.
    pub fn shift(by: i64) -> Self {
        WobblingMap {
            node: Arc::new(Node::Shift(by)),
            bound: by.unsigned_abs(),
        }
    }

    /// Finitely supported permutation; pairs are `(j, g(j))` and the values
    /// must be a permutation of the keys. Fixed points may be omitted.
    pub fn table(pairs: impl IntoIterator<Item = (i64, i64)>) -> Result<Self, WobblingError> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k, v).is_some() {
                return Err(WobblingError::InvalidTable(format!("{k} listed twice")));
            }
        }
        let keys: BTreeSet<i64> = map.keys().copied().collect();
        let values: BTreeSet<i64> = map.values().copied().collect();
        if values.len() != map.len() {
            return Err(WobblingError::InvalidTable("two points share an image".into()));
        }
        if keys != values {
            return Err(WobblingError::InvalidTable(
                "image of the table domain differs from the domain".into(),
            ));
        }
        map.retain(|k, v| k != v);
        let bound = map.iter().map(|(k, v)| (v - k).unsigned_abs()).max().unwrap_or(0);
        Ok(WobblingMap {
            node: Arc::new(Node::Table(map)),
            bound,
        })
    }

    /// Exchanges `a` and `b`.
    pub fn transposition(a: i64, b: i64) -> Self {
        Self::table([(a, b), (b, a)]).expect("a transposition is a permutation")
    }

    /// Table that is not checked for bijectivity. Only for exercising the
    /// window checks.
    #[doc(hidden)]
    pub fn unchecked_table(pairs: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let map: BTreeMap<i64, i64> = pairs.into_iter().collect();
        let bound = map.iter().map(|(k, v)| (v - k).unsigned_abs()).max().unwrap_or(0);
        WobblingMap {
            node: Arc::new(Node::Table(map)),
            bound,
        }
    }

    /// The map `j -> j + rule(p[j-R..=j+R])` induced on the orbit of `p`.
    pub(crate) fn from_element(element: Arc<LocalRuleElement>) -> Self {
        let bound = element.exponent_bound();
        WobblingMap {
            node: Arc::new(Node::Subshift(element)),
            bound,
        }
    }

    /// Upper bound on `sup |g(j) - j|`.
    pub fn certified_bound(&self) -> u64 {
        self.bound
    }

    pub fn evaluate(&self, j: i64) -> Result<i64, WobblingError> {
        match &*self.node {
            Node::Table(t) => Ok(*t.get(&j).unwrap_or(&j)),
            Node::Shift(s) => Ok(j + s),
            Node::Compose(outer, inner) => outer.evaluate(inner.evaluate(j)?),
            Node::Inverse(g) => g.preimage(j),
            Node::Subshift(e) => Ok(j + e.exponent_at(j)?),
        }
    }

    /// The unique `i` with `g(i) = j`, searched in `[j - bound, j + bound]`.
    pub fn preimage(&self, j: i64) -> Result<i64, WobblingError> {
        match &*self.node {
            Node::Shift(s) => return Ok(j - s),
            Node::Inverse(g) => return g.evaluate(j),
            _ => {}
        }
        let b = self.bound as i64;
        let mut found = None;
        for i in j - b..=j + b {
            if self.evaluate(i)? == j {
                if let Some(prev) = found {
                    return Err(WobblingError::BijectivityViolation {
                        at: j,
                        detail: format!("both {prev} and {i} map to {j}"),
                    });
                }
                found = Some(i);
            }
        }
        found.ok_or_else(|| WobblingError::BijectivityViolation {
            at: j,
            detail: format!("no preimage of {j} within displacement {b}"),
        })
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &WobblingMap) -> WobblingMap {
        if let (Node::Shift(a), Node::Shift(b)) = (&*self.node, &*inner.node) {
            return WobblingMap::shift(a + b);
        }
        if inner.is_trivial_identity() {
            return self.clone();
        }
        if self.is_trivial_identity() {
            return inner.clone();
        }
        WobblingMap {
            node: Arc::new(Node::Compose(self.clone(), inner.clone())),
            bound: self.bound + inner.bound,
        }
    }

    pub fn invert(&self) -> WobblingMap {
        match &*self.node {
            Node::Shift(s) => WobblingMap::shift(-s),
            Node::Table(t) => WobblingMap {
                node: Arc::new(Node::Table(t.iter().map(|(k, v)| (*v, *k)).collect())),
                bound: self.bound,
            },
            Node::Inverse(g) => g.clone(),
            _ => WobblingMap {
                node: Arc::new(Node::Inverse(self.clone())),
                bound: self.bound,
            },
        }
    }

    /// `g h g^-1 h^-1`.
    pub fn commutator(&self, h: &WobblingMap) -> WobblingMap {
        self.compose(h).compose(&self.invert()).compose(&h.invert())
    }

    fn is_trivial_identity(&self) -> bool {
        matches!(&*self.node, Node::Table(t) if t.is_empty()) || matches!(&*self.node, Node::Shift(0))
    }

    pub fn displacement_pattern(
        &self,
        center: i64,
        radius: usize,
    ) -> Result<DisplacementPattern, WobblingError> {
        let r = radius as i64;
        let displacements = (center - r..=center + r)
            .map(|j| Ok(self.evaluate(j)? - j))
            .collect::<Result<_, WobblingError>>()?;
        Ok(DisplacementPattern {
            center,
            radius,
            displacements,
        })
    }

    /// `g(j) - j` for every `j` in `[lo, hi]`.
    pub fn displacements(&self, lo: i64, hi: i64) -> Result<Vec<i64>, WobblingError> {
        (lo..=hi).map(|j| Ok(self.evaluate(j)? - j)).collect()
    }

    /// True iff `g` is injective on `[lo - bound, hi + bound]` and its image
    /// covers `[lo, hi]`.
    pub fn verify_bijectivity_window(&self, lo: i64, hi: i64) -> Result<bool, WobblingError> {
        assert!(hi >= lo, "empty window");
        let b = self.bound as i64;
        let mut seen = HashSet::new();
        for j in lo - b..=hi + b {
            let img = self.evaluate(j)?;
            if (img - j).unsigned_abs() > self.bound || !seen.insert(img) {
                return Ok(false);
            }
        }
        Ok((lo..=hi).all(|j| seen.contains(&j)))
    }

    /// Largest displacement observed on `[lo, hi]`; never exceeds the
    /// certified bound for a valid map.
    pub fn observed_bound(&self, lo: i64, hi: i64) -> Result<u64, WobblingError> {
        Ok(self
            .displacements(lo, hi)?
            .into_iter()
            .map(i64::unsigned_abs)
            .max()
            .unwrap_or(0))
    }

    /// For table maps, the finite set of moved points.
    pub fn finite_support(&self) -> Option<BTreeSet<i64>> {
        match &*self.node {
            Node::Table(t) => Some(t.keys().copied().collect()),
            Node::Shift(0) => Some(BTreeSet::new()),
            Node::Inverse(g) => g.finite_support(),
            Node::Compose(a, b) => {
                let mut s = a.finite_support()?;
                s.extend(b.finite_support()?);
                Some(s)
            }
            _ => None,
        }
    }

    pub fn to_spec(&self) -> MapSpec {
        match &*self.node {
            Node::Table(t) => MapSpec::Table {
                pairs: t.iter().map(|(k, v)| (*k, *v)).collect(),
            },
            Node::Shift(s) => MapSpec::Shift { by: *s },
            Node::Compose(a, b) => MapSpec::Compose {
                outer: Box::new(a.to_spec()),
                inner: Box::new(b.to_spec()),
            },
            Node::Inverse(a) => MapSpec::Inverse {
                of: Box::new(a.to_spec()),
            },
            Node::Subshift(e) => MapSpec::Subshift {
                system: e.system().config().clone(),
                element: e.to_spec(),
            },
        }
    }

    /// Rebuilds a map from its JSON description. Subshift-induced maps get an
    /// orbit of the given horizon.
    pub fn from_spec(spec: &MapSpec, horizon: usize) -> Result<Self, WobblingError> {
        Ok(match spec {
            MapSpec::Table { pairs } => WobblingMap::table(pairs.iter().copied())?,
            MapSpec::Shift { by } => WobblingMap::shift(*by),
            MapSpec::Compose { outer, inner } => {
                Self::from_spec(outer, horizon)?.compose(&Self::from_spec(inner, horizon)?)
            }
            MapSpec::Inverse { of } => Self::from_spec(of, horizon)?.invert(),
            MapSpec::Subshift { system, element } => {
                let sys = Arc::new(SubshiftSystem::from_config_with_horizon(system, horizon)?);
                let e = LocalRuleElement::from_spec(&sys, element)?;
                e.embed()?
            }
        })
    }
}

/// JSON description of a [`WobblingMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSpec {
    Table {
        pairs: Vec<(i64, i64)>,
    },
    Shift {
        by: i64,
    },
    Compose {
        outer: Box<MapSpec>,
        inner: Box<MapSpec>,
    },
    Inverse {
        of: Box<MapSpec>,
    },
    Subshift {
        system: SubstitutionConfig,
        #[serde(flatten)]
        element: ElementSpec,
    },
}
