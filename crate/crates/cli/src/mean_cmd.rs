use anyhow::Result;
use clap::Subcommand;
use fgl::density::coefficient;
use fgl::meanlab::{affinity_defect, fourier_measure, pushforward_defect, sample_sets, twist, Subset};
use serde::Serialize;

use crate::density_cmd::grid;
use crate::output::Format;
use crate::{Common, ConfigError};

const DEFAULT_COUNT: u64 = 10;

#[derive(Subcommand)]
pub enum MeanCmd {
    /// Coordinate probabilities of the product measure |f̂_n|².
    Fourier,
    /// Sets drawn from the product measure (needs --seed).
    Sample,
    /// Union of --k independent samples (needs --seed).
    Boost,
    /// Bounds on ‖g·μ - μ‖ for each element and n.
    Defect,
    /// ι(g) = (N △ g(N), g) as compact JSON, one line per element.
    Twist,
}

#[derive(Serialize)]
struct FourierRow {
    n: u32,
    j: i64,
    coefficient: f64,
    probability: f64,
}

#[derive(Serialize)]
struct Samples {
    schema: &'static str,
    n: u32,
    window: u64,
    seed: u64,
    sets: Vec<Subset>,
}

#[derive(Serialize)]
struct Boosted {
    schema: &'static str,
    n: u32,
    k: u64,
    window: u64,
    seed: u64,
    p0: f64,
    boosted_p0: f64,
    guaranteed: f64,
    pass: bool,
    sets: Vec<Subset>,
}

#[derive(Serialize)]
pub struct DefectRow {
    pub n: u32,
    pub g_id: String,
    pub window: u64,
    pub coupling: f64,
    pub affinity: f64,
    pub tail_mass_bound: f64,
}

#[derive(Serialize)]
pub struct TwistLine {
    pub set: Subset,
    pub g: String,
}

/// Window wide enough for the Fourier measure at `n` to have negligible mass
/// outside it.
pub fn default_window(n: u32) -> u64 {
    40 * n as u64
}

fn window(c: &Common, n: u32) -> u64 {
    c.window.unwrap_or_else(|| default_window(n))
}

fn single_n(c: &Common) -> Result<u32> {
    match c.n.as_slice() {
        [] => Ok(1),
        [n] => Ok(*n),
        _ => Err(ConfigError("this command takes a single --n".into()).into()),
    }
}

pub fn defect_rows(
    elements: &[(&str, &fgl::wobbling::WobblingMap)],
    ns: &[u32],
    window_of: impl Fn(u32) -> u64,
) -> Result<Vec<DefectRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let w = window_of(n);
        let m = fourier_measure::<f64>(n, w);
        for &(id, g) in elements {
            rows.push(DefectRow {
                n,
                g_id: id.to_string(),
                window: w,
                coupling: pushforward_defect(&m, g)?,
                affinity: affinity_defect(&m, g)?,
                tail_mass_bound: m.tail_mass_bound,
            });
        }
    }
    Ok(rows)
}

pub fn twist_lines(elements: &[fgl::catalog::NamedElement]) -> Result<Vec<TwistLine>> {
    elements
        .iter()
        .map(|e| {
            Ok(TwistLine {
                set: twist(&e.map)?.set,
                g: e.id.clone(),
            })
        })
        .collect()
}

pub fn run(cmd: MeanCmd, c: &Common) -> Result<bool> {
    match cmd {
        MeanCmd::Fourier => {
            let mut rows = Vec::new();
            for n in grid(c) {
                let m = fourier_measure::<f64>(n, window(c, n));
                for j in m.coordinates() {
                    rows.push(FourierRow {
                        n,
                        j,
                        coefficient: coefficient(n, j),
                        probability: m.p(j),
                    });
                }
            }
            c.emitter(Format::Csv).rows("fgl.mean.fourier/1", &rows)?;
            Ok(true)
        }
        MeanCmd::Sample => {
            let seed = c.require_seed()?;
            let n = single_n(c)?;
            let w = window(c, n);
            let count = c.count.unwrap_or(DEFAULT_COUNT) as usize;
            let m = fourier_measure::<f64>(n, w);
            c.emitter(Format::Json).document(&Samples {
                schema: "fgl.mean.sample/1",
                n,
                window: w,
                seed,
                sets: sample_sets(&m, seed, count),
            })?;
            Ok(true)
        }
        MeanCmd::Boost => {
            let seed = c.require_seed()?;
            let k = c.require(c.k, "k")?;
            let n = single_n(c)?;
            let w = window(c, n);
            let count = c.count.unwrap_or(DEFAULT_COUNT) as usize;
            let m = fourier_measure::<f64>(n, w);
            let b = m.boost_union(k as usize)?;
            let guaranteed = 1.0 - 0.5f64.powi(k as i32);
            let pass = m.p(0) < 0.5 || b.p(0) >= guaranteed;
            c.emitter(Format::Json).document(&Boosted {
                schema: "fgl.mean.boost/1",
                n,
                k,
                window: w,
                seed,
                p0: m.p(0),
                boosted_p0: b.p(0),
                guaranteed,
                pass,
                sets: sample_sets(&b, seed, count),
            })?;
            Ok(pass)
        }
        MeanCmd::Defect => {
            let elements = c.elements()?;
            let pairs: Vec<_> = elements.iter().map(|e| (e.id.as_str(), &e.map)).collect();
            let rows = defect_rows(&pairs, &grid(c), |n| window(c, n))?;
            c.emitter(Format::Csv).rows("fgl.mean.defect/1", &rows)?;
            Ok(true)
        }
        MeanCmd::Twist => {
            let lines = twist_lines(&c.elements()?)?;
            c.emitter(Format::Json).lines(&lines)?;
            Ok(true)
        }
    }
}
