//! Probability measures on finite subsets of `Z` that are almost invariant
//! under the wobbling group, built from the Fourier transform of the density
//! family, together with the union boost, the density attached to an
//! explicit measure, and the twist into `P_f(Z) ⋊ W(Z)`.
//!
//! The half-line `N` is `{0, 1, 2, ...}` throughout.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{pow, Num};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::density::coefficient;
use crate::scalar::{two_sided_geometric_tail, CompensatedSum, Real};
use crate::wobbling::{WobblingError, WobblingMap};

/// Largest window (in coordinates) for which configuration tables are built.
pub const MAX_TABLE_COORDINATES: usize = 22;

pub type Subset = BTreeSet<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Map(#[from] WobblingError),
    #[error("probability at coordinate {coordinate} is outside [0, 1]")]
    InvalidProbability { coordinate: i64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("supported sets have different cardinalities {0} and {1}")]
    MixedCardinality(usize, usize),
    #[error("set {set:?} is not contained in the window [-{window}, {window}]")]
    OutsideWindow { set: Vec<i64>, window: u64 },
    #[error("map does not preserve the window [-{window}, {window}]")]
    WindowNotPreserved { window: u64 },
    #[error("window of {coordinates} coordinates is too large for a configuration table")]
    WindowTooLarge { coordinates: usize },
    #[error("union boost needs k >= 1")]
    ZeroBoost,
}

/// Independent inclusion of each coordinate `j` with probability `p_j`, for
/// `|j| <= window`; coordinates outside the window are never included.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure<T> {
    window: u64,
    probs: Vec<T>,
    /// Bound on `Σ_{|j| > window} p_j` for the untruncated measure.
    pub tail_mass_bound: T,
}

impl<T: Num + PartialOrd + Clone> ProductMeasure<T> {
    /// `probs[i]` is the probability of coordinate `i - window`.
    pub fn from_probabilities(window: u64, probs: Vec<T>) -> Result<Self, MeasureError> {
        if probs.len() as u64 != 2 * window + 1 {
            return Err(MeasureError::InvalidWeights(format!(
                "expected {} probabilities, got {}",
                2 * window + 1,
                probs.len()
            )));
        }
        if let Some(i) = probs
            .iter()
            .position(|p| !(*p >= T::zero() && *p <= T::one()))
        {
            return Err(MeasureError::InvalidProbability {
                coordinate: i as i64 - window as i64,
            });
        }
        Ok(ProductMeasure {
            window,
            probs,
            tail_mass_bound: T::zero(),
        })
    }
}

impl<T: Num + Clone> ProductMeasure<T> {
    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn coordinates(&self) -> impl Iterator<Item = i64> {
        let w = self.window as i64;
        -w..=w
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probs
    }

    /// `P(j ∈ E)`.
    pub fn p(&self, j: i64) -> T {
        if j.unsigned_abs() > self.window {
            T::zero()
        } else {
            self.probs[(j + self.window as i64) as usize].clone()
        }
    }

    /// Law of the union of `k` independent samples: `p'_j = 1 - (1 - p_j)^k`.
    pub fn boost_union(&self, k: usize) -> Result<Self, MeasureError> {
        if k == 0 {
            return Err(MeasureError::ZeroBoost);
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let probs = self
            .probs
            .iter()
            .map(|p| T::one() - pow(T::one() - p.clone(), k))
            .collect();
        Ok(ProductMeasure {
            window: self.window,
            probs,
            tail_mass_bound: self.tail_mass_bound.clone() * count(k),
        })
    }
}

fn count<T: Num>(k: usize) -> T {
    (0..k).fold(T::zero(), |acc, _| acc + T::one())
}

/// `(1 - a_{n,j})² / ((1 - a_{n,j})² + (1 + a_{n,j})²)`.
pub fn fourier_probability<T: Real>(n: u32, j: i64) -> T {
    let a = coefficient::<T>(n, j);
    let lo = (T::one() - a) * (T::one() - a);
    let hi = (T::one() + a) * (T::one() + a);
    lo / (lo + hi)
}

/// The measure `E ↦ |f̂_n(E)|² / ‖f_n‖²`, which is a product measure.
///
/// Outside the window `p_j <= n² e^{-2|j|/n} / 2`, which gives the reported
/// tail mass bound.
pub fn fourier_measure<T: Real>(n: u32, window: u64) -> ProductMeasure<T> {
    let w = window as i64;
    let probs = (-w..=w).map(|j| fourier_probability::<T>(n, j)).collect();
    let nt = T::from_u32(n).unwrap();
    ProductMeasure {
        window,
        probs,
        tail_mass_bound: nt * nt * T::lit(0.5) * two_sided_geometric_tail(T::lit(2.0) / nt, window),
    }
}

/// `f̂_n(E) = ∏_{j∈E} (1 - a_j)/2 · ∏_{j∉E} (1 + a_j)/2` over the window
/// coordinates.
pub fn fourier_coefficient<T: Real>(n: u32, set: &Subset, window: u64) -> Result<T, MeasureError> {
    check_inside(set, window)?;
    let w = window as i64;
    let half = T::lit(0.5);
    let log: CompensatedSum<T> = (-w..=w)
        .map(|j| {
            let a = coefficient::<T>(n, j);
            if set.contains(&j) {
                ((T::one() - a) * half).ln()
            } else {
                ((T::one() + a) * half).ln()
            }
        })
        .collect();
    Ok(log.value().exp())
}

fn check_inside(set: &Subset, window: u64) -> Result<(), MeasureError> {
    if set.iter().any(|j| j.unsigned_abs() > window) {
        return Err(MeasureError::OutsideWindow {
            set: set.iter().copied().collect(),
            window,
        });
    }
    Ok(())
}

/// Draws one set, including each coordinate independently.
pub fn sample_set<T: Real>(m: &ProductMeasure<T>, rng: &mut impl Rng) -> Subset {
    m.coordinates()
        .filter(|&j| {
            let p = m.p(j).to_f64().unwrap();
            rng.gen_bool(p.clamp(0.0, 1.0))
        })
        .collect()
}

/// `count` sets drawn from a ChaCha8 stream seeded with `seed`.
pub fn sample_sets<T: Real>(m: &ProductMeasure<T>, seed: u64, count: usize) -> Vec<Subset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_set(m, &mut rng)).collect()
}

/// Coordinates where `m` or `g·m` can put mass: the window and its image.
fn support_union<T: Num + Clone>(m: &ProductMeasure<T>, g: &WobblingMap) -> Result<Subset, MeasureError> {
    let mut s: Subset = m.coordinates().collect();
    for j in m.coordinates() {
        s.insert(g.evaluate(j)?);
    }
    Ok(s)
}

/// `Σ_j |p_j - p_{g⁻¹(j)}|`, the coordinatewise coupling bound on the total
/// variation distance between `m` and `g·m`.
///
/// For the shift this is the total variation of `j ↦ p_j`, which equals
/// `2 p_0` for the Fourier measures and so tends to 1 rather than 0; see
/// [`affinity_defect`] for a bound that does go to 0.
pub fn pushforward_defect<T: Real>(m: &ProductMeasure<T>, g: &WobblingMap) -> Result<T, MeasureError> {
    let mut acc = CompensatedSum::new();
    for j in support_union(m, g)? {
        acc.add((m.p(j) - m.p(g.preimage(j)?)).abs());
    }
    Ok(acc.value())
}

/// `sqrt(1 - BC²)` with `BC = ∏_j (sqrt(p_j q_j) + sqrt((1-p_j)(1-q_j)))` and
/// `q_j = p_{g⁻¹(j)}`: the Bhattacharyya bound on the total variation
/// distance between `m` and `g·m`.
pub fn affinity_defect<T: Real>(m: &ProductMeasure<T>, g: &WobblingMap) -> Result<T, MeasureError> {
    let mut log_bc = CompensatedSum::new();
    for j in support_union(m, g)? {
        let p = m.p(j);
        let q = m.p(g.preimage(j)?);
        let bc = (p * q).sqrt() + ((T::one() - p) * (T::one() - q)).sqrt();
        log_bc.add(bc.min(T::one()).ln());
    }
    let one_minus_bc2 = -(T::lit(2.0) * log_bc.value()).exp_m1();
    Ok(one_minus_bc2.max(T::zero()).sqrt())
}

/// Monte Carlo estimate of the total variation distance between `m` and `g·m`
/// with its standard error, from `E_μ[(1 - (g·μ)(E)/μ(E))_+]`.
pub fn monte_carlo_tv<T: Real>(
    m: &ProductMeasure<T>,
    g: &WobblingMap,
    samples: usize,
    seed: u64,
) -> Result<(T, T), MeasureError> {
    let coords: Vec<(i64, T, T)> = support_union(m, g)?
        .into_iter()
        .map(|j| Ok((j, m.p(j), m.p(g.preimage(j)?))))
        .collect::<Result<_, MeasureError>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (CompensatedSum::new(), CompensatedSum::new());
    for _ in 0..samples {
        let set = sample_set(m, &mut rng);
        let mut log_ratio = T::zero();
        for &(j, p, q) in &coords {
            let factor = if set.contains(&j) {
                q / p
            } else {
                (T::one() - q) / (T::one() - p)
            };
            log_ratio = log_ratio + factor.ln();
        }
        let x = (T::one() - log_ratio.exp()).max(T::zero());
        sum.add(x);
        sum_sq.add(x * x);
    }
    let k = T::from_usize(samples.max(1)).unwrap();
    let mean = sum.value() / k;
    let var = (sum_sq.value() / k - mean * mean).max(T::zero());
    Ok((mean, (var / k).sqrt()))
}

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMeasure<T> {
    atoms: BTreeMap<Subset, T>,
}

impl<T: Real> ExplicitMeasure<T> {
    /// Merges repeated sets; weights must be nonnegative and sum to one.
    pub fn new(atoms: impl IntoIterator<Item = (Subset, T)>) -> Result<Self, MeasureError> {
        let mut merged: BTreeMap<Subset, T> = BTreeMap::new();
        for (set, w) in atoms {
            if w.is_nan() || w < T::zero() {
                return Err(MeasureError::InvalidWeights(format!("negative weight {w}")));
            }
            let slot = merged.entry(set).or_insert(T::zero());
            *slot = *slot + w;
        }
        let total: CompensatedSum<T> = merged.values().copied().collect();
        if (total.value() - T::one()).abs() > T::lit(1e3) * T::epsilon() {
            return Err(MeasureError::InvalidWeights(format!(
                "total mass {} is not 1",
                total.value()
            )));
        }
        merged.retain(|_, w| *w > T::zero());
        Ok(ExplicitMeasure { atoms: merged })
    }

    pub fn point_mass(set: Subset) -> Self {
        ExplicitMeasure {
            atoms: BTreeMap::from([(set, T::one())]),
        }
    }

    pub fn atoms(&self) -> &BTreeMap<Subset, T> {
        &self.atoms
    }

    pub fn mass(&self, set: &Subset) -> T {
        self.atoms.get(set).copied().unwrap_or(T::zero())
    }

    /// The common cardinality of the supported sets.
    pub fn cardinality(&self) -> Result<usize, MeasureError> {
        let mut sizes = self.atoms.keys().map(|s| s.len());
        let first = sizes.next().unwrap_or(0);
        match sizes.find(|&s| s != first) {
            Some(other) => Err(MeasureError::MixedCardinality(first, other)),
            None => Ok(first),
        }
    }

    pub fn pushforward(&self, g: &WobblingMap) -> Result<Self, MeasureError> {
        let mut atoms: BTreeMap<Subset, T> = BTreeMap::new();
        for (set, &w) in &self.atoms {
            let image = set.iter().map(|&j| g.evaluate(j)).collect::<Result<Subset, _>>()?;
            let slot = atoms.entry(image).or_insert(T::zero());
            *slot = *slot + w;
        }
        Ok(ExplicitMeasure { atoms })
    }

    /// `‖g·μ - μ‖₁`.
    pub fn defect(&self, g: &WobblingMap) -> Result<T, MeasureError> {
        let pushed = self.pushforward(g)?;
        let sets: BTreeSet<&Subset> = self.atoms.keys().chain(pushed.atoms.keys()).collect();
        Ok(sets
            .into_iter()
            .map(|s| (pushed.mass(s) - self.mass(s)).abs())
            .collect::<CompensatedSum<T>>()
            .value())
    }
}

/// A function on `{0,1}^W` for the window `W = [-window, window]`; bit `i` of
/// the index is the coordinate `i - window`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationTable<T> {
    pub window: u64,
    pub values: Vec<T>,
}

impl<T: Real> ConfigurationTable<T> {
    fn coordinates(window: u64) -> Result<usize, MeasureError> {
        let c = 2 * window as usize + 1;
        if c > MAX_TABLE_COORDINATES {
            return Err(MeasureError::WindowTooLarge { coordinates: c });
        }
        Ok(c)
    }

    /// Integral against the uniform Bernoulli measure.
    pub fn mean(&self) -> T {
        let s: CompensatedSum<T> = self.values.iter().copied().collect();
        s.value() / T::from_usize(self.values.len()).unwrap()
    }

    /// `(g·f)(ω) = f(ω ∘ g)`; `g` must map the window onto itself.
    pub fn act(&self, g: &WobblingMap) -> Result<Self, MeasureError> {
        let c = Self::coordinates(self.window)?;
        let w = self.window as i64;
        let mut image = Vec::with_capacity(c);
        for i in 0..c as i64 {
            let gj = g.evaluate(i - w)?;
            if gj.abs() > w {
                return Err(MeasureError::WindowNotPreserved { window: self.window });
            }
            image.push((gj + w) as usize);
        }
        let values = (0..self.values.len())
            .map(|omega| {
                let pulled = image
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &b)| acc | (((omega >> b) & 1) << i));
                self.values[pulled]
            })
            .collect();
        Ok(ConfigurationTable {
            window: self.window,
            values,
        })
    }

    /// `‖f - h‖₂` under the uniform Bernoulli measure.
    pub fn l2_distance(&self, other: &Self) -> T {
        let s: CompensatedSum<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .collect();
        (s.value() / T::from_usize(self.values.len()).unwrap()).sqrt()
    }

    pub fn sqrt(&self) -> Self {
        ConfigurationTable {
            window: self.window,
            values: self.values.iter().map(|v| v.sqrt()).collect(),
        }
    }
}

/// `f_μ = 2^{n(μ)} Σ_E μ(E) 1_{C_E}` where `C_E` is the set of configurations
/// vanishing on `E`.
pub fn density_from_measure<T: Real>(
    m: &ExplicitMeasure<T>,
    window: u64,
) -> Result<ConfigurationTable<T>, MeasureError> {
    let c = ConfigurationTable::<T>::coordinates(window)?;
    let card = m.cardinality()?;
    let w = window as i64;
    let scale = T::lit(2.0).powi(card as i32);
    let masks = m
        .atoms
        .iter()
        .map(|(set, &weight)| {
            check_inside(set, window)?;
            let mask = set.iter().fold(0usize, |acc, &j| acc | 1 << (j + w));
            Ok((mask, weight * scale))
        })
        .collect::<Result<Vec<_>, MeasureError>>()?;
    let values = (0..1usize << c)
        .map(|omega| {
            masks
                .iter()
                .filter(|(mask, _)| omega & mask == 0)
                .map(|&(_, v)| v)
                .collect::<CompensatedSum<T>>()
                .value()
        })
        .collect();
    Ok(ConfigurationTable { window, values })
}

/// Both sides of `‖g·f_μ^{1/2} - f_μ^{1/2}‖₂ <= ‖g·μ - μ‖₁^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceCheck<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> InvarianceCheck<T> {
    pub fn slack(&self) -> T {
        self.rhs - self.lhs
    }

    pub fn pass(&self) -> bool {
        self.lhs <= self.rhs + T::lit(64.0) * T::epsilon()
    }
}

pub fn check_density_invariance<T: Real>(
    m: &ExplicitMeasure<T>,
    g: &WobblingMap,
    window: u64,
) -> Result<InvarianceCheck<T>, MeasureError> {
    let root = density_from_measure(m, window)?.sqrt();
    let moved = root.act(g)?;
    Ok(InvarianceCheck {
        lhs: moved.l2_distance(&root),
        rhs: m.defect(g)?.sqrt(),
    })
}

/// An element `(A, g)` of `P_f(Z) ⋊ W(Z)` with product
/// `(A, g)(B, h) = (A △ g(B), gh)`.
#[derive(Debug, Clone)]
pub struct TwistedElement {
    pub set: Subset,
    pub map: WobblingMap,
}

impl TwistedElement {
    pub fn product(&self, other: &TwistedElement) -> Result<TwistedElement, MeasureError> {
        let moved = other
            .set
            .iter()
            .map(|&j| self.map.evaluate(j))
            .collect::<Result<Subset, _>>()?;
        Ok(TwistedElement {
            set: self.set.symmetric_difference(&moved).copied().collect(),
            map: self.map.compose(&other.map),
        })
    }

    /// Equal sets and maps agreeing on `[lo, hi)`.
    pub fn agrees_with(&self, other: &TwistedElement, lo: i64, hi: i64) -> Result<bool, MeasureError> {
        if self.set != other.set {
            return Ok(false);
        }
        for j in lo..hi {
            if self.map.evaluate(j)? != other.map.evaluate(j)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `ι(g) = (N △ g(N), g)`. Only `j ∈ [-‖g‖, ‖g‖)` can change side.
pub fn twist(g: &WobblingMap) -> Result<TwistedElement, MeasureError> {
    let m = g.certified_bound() as i64;
    let mut set = Subset::new();
    for j in -m..m {
        if (j >= 0) != (g.preimage(j)? >= 0) {
            set.insert(j);
        }
    }
    Ok(TwistedElement {
        set,
        map: g.clone(),
    })
}
