use anyhow::Result;
use clap::Subcommand;
use fgl::density::{
    abel_check, check_lemma_b, check_lemma_sum, check_log_inequality, correlation_ratio,
    displacement_functional, eta_theta, vanishing_integrals,
};
use serde::Serialize;

use crate::output::Format;
use crate::Common;

pub const DEFAULT_GRID: [u32; 4] = [1, 4, 16, 64];

#[derive(Subcommand)]
pub enum DensityCmd {
    /// Certified ⟨g·f_n, f_n⟩ / ‖f_n‖² for each element and n.
    Correlate,
    /// The displacement functional F_n(g).
    #[command(name = "fn")]
    Functional,
    /// Pass/fail table of the estimates behind the convergence of f_n.
    Lemmas,
}

/// One row of `correlate` / `fn` output.
#[derive(Debug, Clone, Serialize)]
pub struct ValueRow {
    pub n: u32,
    pub g_id: String,
    pub value: f64,
    pub error_bound: f64,
    pub pass: bool,
}

/// One row of the `lemmas` table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub n: u32,
    pub g_id: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn grid(c: &Common) -> Vec<u32> {
    if c.n.is_empty() {
        DEFAULT_GRID.to_vec()
    } else {
        c.n.clone()
    }
}

pub fn run(cmd: DensityCmd, c: &Common) -> Result<bool> {
    c.check_eps()?;
    let elements = c.elements()?;
    let ids_maps: Vec<_> = elements.iter().map(|e| (e.id.as_str(), &e.map)).collect();
    let ns = grid(c);
    let emit = c.emitter(Format::Csv);
    match cmd {
        DensityCmd::Correlate => {
            let rows = correlate_rows(&ids_maps, &ns, c.eps)?;
            emit.rows("fgl.density.correlate/1", &rows)?;
            Ok(rows.iter().all(|r| r.pass))
        }
        DensityCmd::Functional => {
            let rows = functional_rows(&ids_maps, &ns, c.eps)?;
            emit.rows("fgl.density.fn/1", &rows)?;
            Ok(rows.iter().all(|r| r.pass))
        }
        DensityCmd::Lemmas => {
            let rows = lemma_rows(&ids_maps, &ns, c.eps)?;
            emit.rows("fgl.density.lemmas/1", &rows)?;
            Ok(rows.iter().all(|r| r.pass))
        }
    }
}

pub fn correlate_rows(
    elements: &[(&str, &fgl::wobbling::WobblingMap)],
    ns: &[u32],
    eps: f64,
) -> Result<Vec<ValueRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &(id, g) in elements {
            let v = correlation_ratio(n, g, eps)?;
            rows.push(ValueRow {
                n,
                g_id: id.to_string(),
                value: v.value,
                error_bound: v.error_bound,
                pass: v.value > 0.0 && v.value <= 1.0 && v.error_bound <= eps,
            });
        }
    }
    Ok(rows)
}

pub fn functional_rows(
    elements: &[(&str, &fgl::wobbling::WobblingMap)],
    ns: &[u32],
    eps: f64,
) -> Result<Vec<ValueRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &(id, g) in elements {
            let v = displacement_functional(n, g, eps)?;
            rows.push(ValueRow {
                n,
                g_id: id.to_string(),
                value: v.value,
                error_bound: v.error_bound,
                pass: v.error_bound <= eps,
            });
        }
    }
    Ok(rows)
}

/// Half-width of the index range used by the pointwise remainder bounds.
const ETA_RANGE: i64 = 200;
const LOG_GRID: usize = 10_000;

pub fn lemma_rows(
    elements: &[(&str, &fgl::wobbling::WobblingMap)],
    ns: &[u32],
    eps: f64,
) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let grid: Vec<f64> = (0..LOG_GRID)
        .map(|i| -0.5 + 10.5 * i as f64 / (LOG_GRID - 1) as f64)
        .collect();
    let log = check_log_inequality(&grid)?;
    rows.push(CheckRow {
        check: "log_inequality",
        n: 0,
        g_id: String::new(),
        value: log.min_lower_margin.min(log.min_upper_margin),
        bound: 0.0,
        pass: log.pass(),
    });
    for &n in ns {
        let s = check_lemma_sum::<f64>(n)?;
        rows.push(CheckRow {
            check: "sum_first",
            n,
            g_id: String::new(),
            value: s.s1.value,
            bound: 3.0,
            pass: s.pass(),
        });
        rows.push(CheckRow {
            check: "sum_second",
            n,
            g_id: String::new(),
            value: s.s2.value,
            bound: 1.0 / n as f64,
            pass: s.pass(),
        });
    }
    for &(id, g) in elements {
        let m = g.certified_bound() as usize;
        let u_grid: Vec<usize> = (m + 1..=m + 400).collect();
        let b = check_lemma_b(g, &u_grid)?;
        rows.push(CheckRow {
            check: "b_bounds",
            n: 0,
            g_id: id.to_string(),
            value: b.min_margin as f64,
            bound: 0.0,
            pass: b.pass(),
        });
        for &n in ns {
            let mut worst = 0.0f64;
            let mut ok = true;
            for j in -ETA_RANGE..=ETA_RANGE {
                let et = eta_theta::<f64>(g, n, j)?;
                ok &= et.bounds_pass;
                worst = worst.max(et.eta.abs() / et.eta_bound.max(f64::MIN_POSITIVE));
            }
            rows.push(CheckRow {
                check: "eta_theta",
                n,
                g_id: id.to_string(),
                value: worst,
                bound: 1.0,
                pass: ok,
            });
            let abel = abel_check::<f64>(g, n, 4 * n as usize + 4 * m + 8)?;
            rows.push(CheckRow {
                check: "abel",
                n,
                g_id: id.to_string(),
                value: (abel.lhs - abel.rhs).abs(),
                bound: abel.tolerance,
                pass: abel.pass(),
            });
            let form = vanishing_integrals(g, n, eps)?;
            rows.push(CheckRow {
                check: "integral_first",
                n,
                g_id: id.to_string(),
                value: form.first.value,
                bound: form.first_bound,
                pass: form.bounds_pass() && form.consistent(),
            });
            rows.push(CheckRow {
                check: "integral_second",
                n,
                g_id: id.to_string(),
                value: form.second.value,
                bound: form.second_bound,
                pass: form.bounds_pass() && form.consistent(),
            });
        }
    }
    Ok(rows)
}
