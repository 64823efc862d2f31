//! The density family `f_n(x) = exp(-n Σ_j x_j e^{-|j|/n})` on the Bernoulli
//! space `{0,1}^Z` and certified evaluation of the quantities controlling its
//! almost invariance under the wobbling group.
//!
//! Write `a_j = a_{n,j} = exp(-n e^{-|j|/n})` and `w_j = a_j² / (1 + a_j²)`.
//! Everything here reduces to one-dimensional series in `j`; infinite series
//! are truncated at a radius `J` chosen from explicit tail bounds that depend
//! only on the displacement bound `m` of the map:
//!
//! * `C   = e^m`
//! * `C'  = exp(m + e^m)`
//! * `C'' = A e^A` with `A = m + e^m`
//!
//! These are sound (not tight). Tail bounds are recomputed after the
//! truncation radius is chosen and the radius is doubled until they fit.

use thiserror::Error;

use crate::scalar::{expm1_minus_id, two_sided_geometric_tail, CompensatedSum, Real};
use crate::wobbling::{WobblingError, WobblingMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Map(#[from] WobblingError),
    #[error("accuracy {eps:e} cannot be certified at this floating point precision")]
    Precision { eps: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A value with a rigorous bound on the error made by truncating its series
/// (plus a floating point rounding allowance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedValue<T> {
    pub value: T,
    pub error_bound: T,
    pub truncation_radius: u64,
}

impl<T: Real> TruncatedValue<T> {
    pub fn exact(value: T, truncation_radius: u64) -> Self {
        TruncatedValue {
            value,
            error_bound: T::zero(),
            truncation_radius,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        (self.value - x).abs() <= self.error_bound
    }
}

/// Constants controlling the ratio `a_{g(j)} / a_j` for maps with displacement
/// at most `bound`, stored as logarithms so large bounds do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementConstants<T> {
    pub bound: u64,
    pub ln_c: T,
    pub ln_c_prime: T,
    pub ln_c_double_prime: T,
}

impl<T: Real> DisplacementConstants<T> {
    pub fn for_bound(bound: u64) -> Self {
        let m = T::from_u64(bound).unwrap();
        let a = m + m.exp();
        DisplacementConstants {
            bound,
            ln_c: m,
            ln_c_prime: a,
            ln_c_double_prime: a.ln() + a,
        }
    }

    pub fn c(&self) -> T {
        self.ln_c.exp()
    }

    pub fn c_prime(&self) -> T {
        self.ln_c_prime.exp()
    }

    pub fn c_double_prime(&self) -> T {
        self.ln_c_double_prime.exp()
    }
}

fn order<T: Real>(n: u32) -> T {
    T::from_u32(n).unwrap()
}

fn check_order(n: u32) -> Result<(), DensityError> {
    if n == 0 {
        return Err(DensityError::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

fn check_eps<T: Real>(eps: T) -> Result<(), DensityError> {
    if eps.is_nan() || eps <= T::zero() {
        return Err(DensityError::InvalidArgument("eps must be positive".into()));
    }
    if eps < T::epsilon() * T::lit(64.0) {
        return Err(DensityError::Precision {
            eps: eps.to_f64().unwrap_or(0.0),
        });
    }
    Ok(())
}

/// `e^{-|j|/n}`.
pub fn decay<T: Real>(n: u32, j: i64) -> T {
    (-T::from_int(j.abs()) / order::<T>(n)).exp()
}

/// `a_{n,j} = exp(-n e^{-|j|/n})`, in `(0, 1]` and even in `j`.
pub fn coefficient<T: Real>(n: u32, j: i64) -> T {
    assert!(n >= 1, "n must be at least 1");
    (-order::<T>(n) * decay::<T>(n, j)).exp()
}

/// `a² / (1 + a²)` for `a = a_{n,j}`.
pub fn weight<T: Real>(n: u32, j: i64) -> T {
    let two_n = T::lit(2.0) * order::<T>(n);
    T::one() / (T::one() + (two_n * decay::<T>(n, j)).exp())
}

/// `a_{n,k} / a_{n,j} - 1`, without cancellation for `|k|` close to `|j|`.
pub fn coefficient_ratio_minus_one<T: Real>(n: u32, j: i64, k: i64) -> T {
    let nt = order::<T>(n);
    let d = T::from_int(k.abs() - j.abs());
    let log_ratio = -nt * decay::<T>(n, j) * (-d / nt).exp_m1();
    log_ratio.exp_m1()
}

/// `‖f_n|_{x_0 = 0}‖² / ‖f_n‖² = 1 / (1 + a_{n,0}²)`.
pub fn conditioned_norm_ratio<T: Real>(n: u32) -> T {
    let a0 = coefficient::<T>(n, 0);
    T::one() / (T::one() + a0 * a0)
}

/// `∏_{|j| <= radius} (1 + a_j²) / 2`: the squared norm of `f_n` restricted to
/// the coordinates in the window.
pub fn window_norm_squared<T: Real>(n: u32, radius: u64) -> T {
    let r = radius as i64;
    let half = T::lit(0.5);
    let log: CompensatedSum<T> = (-r..=r)
        .map(|j| {
            let a = coefficient::<T>(n, j);
            (half + half * a * a).ln()
        })
        .collect();
    log.value().exp()
}

fn support_radius(g: &WobblingMap) -> Option<u64> {
    g.finite_support()
        .map(|s| s.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0))
}

/// Starting radius `⌈n (ln n + ln(1/eps) + ln_c + 2)⌉`.
fn initial_radius<T: Real>(n: u32, eps: T, ln_c: T) -> u64 {
    let nt = order::<T>(n);
    let r = nt * (nt.ln() - eps.ln() + ln_c.max(T::zero()) + T::lit(2.0));
    r.ceil().to_u64().unwrap_or(u64::MAX / 4).max(1)
}

/// Smallest radius of the form `initial · 2^k` whose tail bound is at most
/// `eps / 2`.
fn select_radius<T: Real>(n: u32, eps: T, ln_c: T, tail: impl Fn(u64) -> T) -> u64 {
    let mut r = initial_radius(n, eps, ln_c);
    while tail(r) > eps * T::lit(0.5) && r < (1 << 40) {
        r *= 2;
    }
    r
}

/// `ln` of each factor `(1 + a_j a_{g(j)}) / (1 + a_j²)` for `|j| <= radius`,
/// summed. Returns the sum and the sum of absolute values.
fn correlation_log_sum<T: Real>(
    n: u32,
    g: &WobblingMap,
    radius: u64,
) -> Result<(T, T), DensityError> {
    let r = radius as i64;
    let mut sum = CompensatedSum::new();
    let mut abs = CompensatedSum::new();
    for j in -r..=r {
        let gj = g.evaluate(j)?;
        if gj.abs() == j.abs() {
            continue;
        }
        let z = weight::<T>(n, j) * coefficient_ratio_minus_one::<T>(n, j, gj);
        let term = z.ln_1p();
        sum.add(term);
        abs.add(term.abs());
    }
    Ok((sum.value(), abs.value()))
}

/// The window-truncated product `∏_{|j| <= radius} (1 + a_j a_{g(j)}) / (1 + a_j²)`.
pub fn correlation_truncated<T: Real>(
    n: u32,
    g: &WobblingMap,
    radius: u64,
) -> Result<T, DensityError> {
    check_order(n)?;
    Ok(correlation_log_sum::<T>(n, g, radius)?.0.exp())
}

/// Bound on `Σ_{|j|>r} |ln(1 + z_j)|` for `z_j = w_j (a_{g(j)}/a_j - 1)`.
///
/// Two estimates, both from `w_j <= 1/2` and a geometric tail: the uniform
/// one `|z_j| <= C''/2 · e^{-|j|/n}`, and one that is sharper once
/// `s = e^{-r/n}` is small, `|z_j| <= K/2 · e^{-|j|/n}` with
/// `K = D e^{D s}` and `D = n (e^{m/n} - 1)`, combined with
/// `|ln(1 + z)| <= |z| / (1 - |z|)`.
fn correlation_log_tail<T: Real>(n: u32, consts: &DisplacementConstants<T>, r: u64) -> T {
    if consts.bound == 0 {
        return T::zero();
    }
    let nt = order::<T>(n);
    let rate = T::one() / nt;
    let geometric = two_sided_geometric_tail(rate, r);
    let uniform = (consts.ln_c_double_prime + geometric.ln()).exp();
    let d = nt * (T::from_u64(consts.bound).unwrap() / nt).exp_m1();
    let s = (-T::from_u64(r).unwrap() * rate).exp();
    let half_k = T::lit(0.5) * d * (d * s).exp();
    let z_max = half_k * s;
    if z_max < T::one() {
        uniform.min(half_k * geometric / (T::one() - z_max))
    } else {
        uniform
    }
}

fn correlation_radius<T: Real>(n: u32, eps: T, consts: &DisplacementConstants<T>) -> u64 {
    let d = order::<T>(n) * (T::from_u64(consts.bound).unwrap() / order::<T>(n)).exp_m1();
    let ln_c = consts.ln_c_double_prime.min(d.max(T::one()).ln());
    select_radius(n, eps, ln_c, |r| correlation_log_tail(n, consts, r).exp_m1())
}

/// `⟨g f_n, f_n⟩ / ‖f_n‖²` with error at most `eps`.
///
/// The product is evaluated as `exp Σ ln(1 + z_j)` over `|j| <= J`; the
/// neglected factors change it by at most a factor `exp(±τ)` where `τ`
/// bounds the log-tail.
pub fn correlation_ratio<T: Real>(
    n: u32,
    g: &WobblingMap,
    eps: T,
) -> Result<TruncatedValue<T>, DensityError> {
    check_order(n)?;
    check_eps(eps)?;
    let consts = DisplacementConstants::<T>::for_bound(g.certified_bound());
    let (mut radius, exact_tail) = match support_radius(g) {
        Some(r) => (r, true),
        None => (correlation_radius(n, eps, &consts), false),
    };
    for _ in 0..8 {
        let (log_sum, abs_sum) = correlation_log_sum::<T>(n, g, radius)?;
        let value = log_sum.exp();
        let tail = if exact_tail {
            T::zero()
        } else {
            correlation_log_tail(n, &consts, radius)
        };
        let mut rounding = value * T::epsilon() * (T::lit(4.0) * abs_sum + T::lit(2.0) * log_sum.abs());
        if log_sum != T::zero() {
            rounding = rounding + value * T::epsilon();
        }
        let error_bound = value * tail.exp_m1() + rounding;
        if error_bound <= eps {
            return Ok(TruncatedValue {
                value,
                error_bound,
                truncation_radius: radius,
            });
        }
        if rounding > eps * T::lit(0.5) {
            break;
        }
        radius *= 2;
    }
    Err(DensityError::Precision {
        eps: eps.to_f64().unwrap_or(0.0),
    })
}

/// `b_0 = |g(0)|` and `b_j = |g(j)| + |g(-j)| - 2j` for `1 <= j <= u_max`,
/// with running sums `B(u) = Σ_{j <= u} b_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BProfile {
    pub b: Vec<i64>,
    pub cumulative: Vec<i64>,
}

impl BProfile {
    /// `B(t)` for real `t >= 0`.
    pub fn at(&self, t: usize) -> i64 {
        self.cumulative[t]
    }
}

pub fn b_profile(g: &WobblingMap, u_max: usize) -> Result<BProfile, DensityError> {
    let mut b = Vec::with_capacity(u_max + 1);
    b.push(g.evaluate(0)?.abs());
    for j in 1..=u_max as i64 {
        b.push(g.evaluate(j)?.abs() + g.evaluate(-j)?.abs() - 2 * j);
    }
    let cumulative = b
        .iter()
        .scan(0i64, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(BProfile { b, cumulative })
}

/// `Σ_{j=0}^{radius} w_j e^{-j/n} b_j` (the folded form of the functional).
fn folded_functional<T: Real>(n: u32, g: &WobblingMap, radius: u64) -> Result<(T, T), DensityError> {
    let profile = b_profile(g, radius as usize)?;
    let mut sum = CompensatedSum::new();
    let mut abs = CompensatedSum::new();
    for (j, &bj) in profile.b.iter().enumerate() {
        if bj == 0 {
            continue;
        }
        let term = psi_at_integer::<T>(n, j as i64) * T::from_int(bj);
        sum.add(term);
        abs.add(term.abs());
    }
    Ok((sum.value(), abs.value()))
}

/// `F_n(g) = Σ_j w_j e^{-|j|/n} (|g(j)| - |j|)` with error at most `eps`.
///
/// Each folded term is at most `m e^{-j/n}` in absolute value, which gives
/// the tail bound.
pub fn displacement_functional<T: Real>(
    n: u32,
    g: &WobblingMap,
    eps: T,
) -> Result<TruncatedValue<T>, DensityError> {
    check_order(n)?;
    check_eps(eps)?;
    let m = T::from_u64(g.certified_bound()).unwrap();
    let rate = T::one() / order::<T>(n);
    let tail = |r: u64| m * T::lit(0.5) * two_sided_geometric_tail(rate, r);
    let (radius, exact_tail) = match support_radius(g) {
        Some(r) => (r, true),
        None if g.certified_bound() == 0 => (0, true),
        None => (select_radius(n, eps, m.ln(), tail), false),
    };
    let (value, abs) = folded_functional::<T>(n, g, radius)?;
    let t = if exact_tail { T::zero() } else { tail(radius) };
    Ok(TruncatedValue {
        value,
        error_bound: t + T::lit(4.0) * T::epsilon() * abs,
        truncation_radius: radius,
    })
}

/// `ψ(t) = q/(1+q) · e^{-t/n}` with `q = exp(-2n e^{-t/n})`.
pub fn psi<T: Real>(n: u32, t: T) -> T {
    let nt = order::<T>(n);
    let s = (-t / nt).exp();
    let q = (-T::lit(2.0) * nt * s).exp();
    q / (T::one() + q) * s
}

fn psi_at_integer<T: Real>(n: u32, j: i64) -> T {
    weight::<T>(n, j) * decay::<T>(n, j)
}

/// Antiderivative of `ψ`: `P(t) = ln(1 + exp(-2n e^{-t/n})) / 2`.
fn psi_antiderivative<T: Real>(n: u32, t: T) -> T {
    let nt = order::<T>(n);
    let q = (-T::lit(2.0) * nt * (-t / nt).exp()).exp();
    q.ln_1p() * T::lit(0.5)
}

/// Outcome of the two-sided bound on `B(u)` for `u > ‖g‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaBReport {
    pub bound: u64,
    pub lower: i64,
    pub upper: i64,
    pub values: Vec<(usize, i64)>,
    pub violations: Vec<(usize, i64)>,
    pub min_margin: i64,
}

impl LemmaBReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `-2‖g‖² <= B(u) <= 4‖g‖²` at every grid point (all must exceed `‖g‖`).
pub fn check_lemma_b(g: &WobblingMap, u_grid: &[usize]) -> Result<LemmaBReport, DensityError> {
    let m = g.certified_bound();
    if let Some(&u) = u_grid.iter().find(|&&u| u as u64 <= m) {
        return Err(DensityError::InvalidArgument(format!(
            "grid point {u} does not exceed the displacement bound {m}"
        )));
    }
    let u_max = u_grid.iter().copied().max().unwrap_or(0);
    let profile = b_profile(g, u_max)?;
    let m = m as i64;
    let (lower, upper) = (-2 * m * m, 4 * m * m);
    let values: Vec<_> = u_grid.iter().map(|&u| (u, profile.at(u))).collect();
    let violations = values
        .iter()
        .copied()
        .filter(|&(_, b)| b < lower || b > upper)
        .collect();
    let min_margin = values
        .iter()
        .map(|&(_, b)| (b - lower).min(upper - b))
        .min()
        .unwrap_or(0);
    Ok(LemmaBReport {
        bound: m as u64,
        lower,
        upper,
        values,
        violations,
        min_margin,
    })
}

/// The two series bounds `Σ a_j e^{-|j|/n} <= 3`, `Σ a_j² e^{-2|j|/n} <= 1/n`,
/// and the integral comparison `Σ_{j>=0} φ(j) <= φ(t0) + ∫ φ` behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSumReport<T> {
    pub n: u32,
    pub s1: TruncatedValue<T>,
    pub s2: TruncatedValue<T>,
    /// `Σ_{j>=0} φ_1(j)` and `φ_1(t0) + ∫_0^∞ φ_1`.
    pub half_sum1: T,
    pub comparison1: T,
    pub half_sum2: T,
    pub comparison2: T,
    /// `φ_1`, `φ_2` increase on `[0, t0]` and decrease after, on a grid.
    pub unimodal: bool,
}

impl<T: Real> LemmaSumReport<T> {
    pub fn pass(&self) -> bool {
        self.s1.value + self.s1.error_bound <= T::lit(3.0)
            && self.s2.value + self.s2.error_bound <= T::one() / order::<T>(self.n)
            && self.half_sum1 <= self.comparison1
            && self.half_sum2 <= self.comparison2
            && self.unimodal
    }
}

fn phi1<T: Real>(n: u32, t: T) -> T {
    let nt = order::<T>(n);
    let s = (-t / nt).exp();
    (-nt * s).exp() * s
}

fn phi2<T: Real>(n: u32, t: T) -> T {
    let nt = order::<T>(n);
    let s = (-t / nt).exp();
    (-T::lit(2.0) * nt * s).exp() * s * s
}

fn unimodal_on_grid<T: Real>(n: u32, t0: T, phi: impl Fn(T) -> T) -> bool {
    let nt = order::<T>(n);
    let slack = T::one() + T::lit(8.0) * T::epsilon();
    let rising = (0..=64).map(|k| t0 * T::lit(k as f64 / 64.0));
    let falling = (0..=400).map(|k| t0 + nt * T::lit(k as f64 / 8.0));
    let mono = |pts: Vec<T>, up: bool| {
        pts.windows(2).all(|w| {
            let (x, y) = (phi(w[0]), phi(w[1]));
            if up {
                x <= y * slack
            } else {
                y <= x * slack
            }
        })
    };
    mono(rising.collect(), true) && mono(falling.collect(), false)
}

pub fn check_lemma_sum<T: Real>(n: u32) -> Result<LemmaSumReport<T>, DensityError> {
    check_order(n)?;
    let nt = order::<T>(n);
    let rate = T::one() / nt;
    let target = T::lit(1e-13).max(T::epsilon() * T::lit(64.0));
    let r1 = select_radius(n, target, T::zero(), |r| two_sided_geometric_tail(rate, r));
    let r2 = select_radius(n, target, T::zero(), |r| {
        two_sided_geometric_tail(rate * T::lit(2.0), r)
    });
    let series = |radius: u64, f: &dyn Fn(i64) -> T| -> (T, T) {
        let half: CompensatedSum<T> = (1..=radius as i64).map(f).collect();
        let full = T::lit(2.0) * half.value() + f(0);
        (full, half.value() + f(0))
    };
    let t1 = |j: i64| coefficient::<T>(n, j) * decay::<T>(n, j);
    let t2 = |j: i64| {
        let a = coefficient::<T>(n, j);
        let d = decay::<T>(n, j);
        a * a * d * d
    };
    let (s1, h1) = series(r1, &t1);
    let (s2, h2) = series(r2, &t2);
    let round = |x: T, r: u64| x * T::epsilon() * T::from_u64(4 + r).unwrap();
    let t0 = nt * nt.ln();
    let e = T::one().exp();
    let integral1 = -(-nt).exp_m1();
    let integral2 =
        (T::one() - (T::one() + T::lit(2.0) * nt) * (-T::lit(2.0) * nt).exp()) / (T::lit(4.0) * nt);
    Ok(LemmaSumReport {
        n,
        s1: TruncatedValue {
            value: s1,
            error_bound: two_sided_geometric_tail(rate, r1) + round(s1, r1),
            truncation_radius: r1,
        },
        s2: TruncatedValue {
            value: s2,
            error_bound: two_sided_geometric_tail(rate * T::lit(2.0), r2) + round(s2, r2),
            truncation_radius: r2,
        },
        half_sum1: h1,
        comparison1: T::one() / (e * nt) + integral1,
        half_sum2: h2,
        comparison2: T::one() / (e * e * nt * nt) + integral2,
        unimodal: unimodal_on_grid(n, t0, |t| phi1(n, t)) && unimodal_on_grid(n, t0, |t| phi2(n, t)),
    })
}

/// `C = 4 ln 2 - 2`, the constant in `z - C z² <= ln(1 + z) <= z` for `z >= -1/2`.
pub fn log_inequality_constant<T: Real>() -> T {
    T::lit(4.0) * T::LN_2() - T::lit(2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogInequalityReport<T> {
    pub checked: usize,
    /// `(z, z - C z², ln(1 + z), z)` for every failing point.
    pub violations: Vec<(T, T, T, T)>,
    pub min_lower_margin: T,
    pub min_upper_margin: T,
}

impl<T> LogInequalityReport<T> {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Pointwise check of `z - C z² <= ln(1+z) <= z`. Both sides meet with equality
/// at `z = 0` and the lower one again at `z = -1/2`, so comparisons allow four
/// ulps of rounding.
pub fn check_log_inequality<T: Real>(z_grid: &[T]) -> Result<LogInequalityReport<T>, DensityError> {
    let c = log_inequality_constant::<T>();
    let half = T::lit(-0.5);
    let mut report = LogInequalityReport {
        checked: 0,
        violations: Vec::new(),
        min_lower_margin: T::infinity(),
        min_upper_margin: T::infinity(),
    };
    for &z in z_grid {
        if z < half {
            return Err(DensityError::InvalidArgument(format!(
                "z = {z} is below -1/2"
            )));
        }
        let lower = z - c * z * z;
        let mid = z.ln_1p();
        let tol = T::lit(4.0) * T::epsilon() * T::one().max(mid.abs());
        report.checked += 1;
        report.min_lower_margin = report.min_lower_margin.min(mid - lower);
        report.min_upper_margin = report.min_upper_margin.min(z - mid);
        if lower > mid + tol || mid > z + tol {
            report.violations.push((z, lower, mid, z));
        }
    }
    Ok(report)
}

/// The second-order remainders in the expansion of `a_{g(j)} / a_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaTheta<T> {
    /// `η = n(1 - e^{(|j| - |g(j)|)/n}) - (|g(j)| - |j|)`.
    pub eta: T,
    /// `ϑ = Σ_{k>=2} x^k / k!` with `x = e^{-|j|/n}(|g(j)| - |j| + η)`.
    pub theta: T,
    /// `(a_{g(j)}/a_j - 1) - e^{-|j|/n}(|g(j)| - |j|) - η e^{-|j|/n}`, from
    /// the coefficients directly.
    pub residual: T,
    /// `e^{‖g‖} / n`.
    pub eta_bound: T,
    /// `C' e^{-2|j|/n}`.
    pub theta_bound: T,
    pub bounds_pass: bool,
}

fn eta_theta_at<T: Real>(n: u32, j: i64, gj: i64, consts: &DisplacementConstants<T>) -> EtaTheta<T> {
    let nt = order::<T>(n);
    let d = T::from_int(gj.abs() - j.abs());
    let eta = -nt * expm1_minus_id(-d / nt);
    let dec = decay::<T>(n, j);
    let theta = expm1_minus_id(dec * (d + eta));
    let residual = coefficient_ratio_minus_one::<T>(n, j, gj) - dec * d - eta * dec;
    let eta_bound = consts.c() / nt;
    let theta_bound = (consts.ln_c_prime - T::lit(2.0) * T::from_int(j.abs()) / nt).exp();
    EtaTheta {
        eta,
        theta,
        residual,
        eta_bound,
        theta_bound,
        bounds_pass: eta.abs() <= eta_bound && theta.abs() <= theta_bound,
    }
}

pub fn eta_theta<T: Real>(g: &WobblingMap, n: u32, j: i64) -> Result<EtaTheta<T>, DensityError> {
    check_order(n)?;
    let consts = DisplacementConstants::for_bound(g.certified_bound());
    Ok(eta_theta_at(n, j, g.evaluate(j)?, &consts))
}

/// The split of `Σ_j w_j (a_{g(j)}/a_j - 1)` into the functional, the
/// `η` term and the `ϑ` term.
#[derive(Debug, Clone, PartialEq)]
pub struct Sum2Decomposition<T> {
    pub main: T,
    pub eta_term: T,
    pub theta_term: T,
    /// The same series summed from the coefficients.
    pub direct: T,
    pub functional: TruncatedValue<T>,
    /// `3C/n` and `C'/n`.
    pub eta_bound: T,
    pub theta_bound: T,
    pub truncation_radius: u64,
}

impl<T: Real> Sum2Decomposition<T> {
    pub fn bounds_pass(&self) -> bool {
        self.eta_term.abs() <= self.eta_bound && self.theta_term.abs() <= self.theta_bound
    }

    pub fn split_error(&self) -> T {
        (self.main + self.eta_term + self.theta_term - self.direct).abs()
    }
}

pub fn decompose_sum2<T: Real>(
    n: u32,
    g: &WobblingMap,
    eps: T,
) -> Result<Sum2Decomposition<T>, DensityError> {
    check_order(n)?;
    check_eps(eps)?;
    let consts = DisplacementConstants::<T>::for_bound(g.certified_bound());
    let nt = order::<T>(n);
    let radius = match support_radius(g) {
        Some(r) => r,
        None if g.certified_bound() == 0 => 0,
        None => correlation_radius(n, eps, &consts),
    };
    let r = radius as i64;
    let (mut main, mut eta_s, mut theta_s, mut direct) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for j in -r..=r {
        let gj = g.evaluate(j)?;
        if gj.abs() == j.abs() {
            continue;
        }
        let w = weight::<T>(n, j);
        let dec = decay::<T>(n, j);
        let et = eta_theta_at(n, j, gj, &consts);
        main.add(w * dec * T::from_int(gj.abs() - j.abs()));
        eta_s.add(w * dec * et.eta);
        theta_s.add(w * et.theta);
        direct.add(w * coefficient_ratio_minus_one::<T>(n, j, gj));
    }
    Ok(Sum2Decomposition {
        main: main.value(),
        eta_term: eta_s.value(),
        theta_term: theta_s.value(),
        direct: direct.value(),
        functional: displacement_functional(n, g, eps)?,
        eta_bound: T::lit(3.0) * consts.c() / nt,
        theta_bound: consts.c_prime() / nt,
        truncation_radius: radius,
    })
}

/// Both sides of the summation-by-parts identity
/// `Σ_{j<=N} ψ(j) b_j = ψ(N) B(N) - ∫_0^N B dψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbelReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub tolerance: T,
}

impl<T: Real> AbelReport<T> {
    pub fn pass(&self) -> bool {
        (self.lhs - self.rhs).abs() <= self.tolerance
    }
}

/// `B` is constant on each `[j, j+1)`, so the Stieltjes integral is the exact
/// finite sum `Σ_{j<N} B(j) (ψ(j+1) - ψ(j))`.
pub fn abel_check<T: Real>(g: &WobblingMap, n: u32, big_n: usize) -> Result<AbelReport<T>, DensityError> {
    check_order(n)?;
    if big_n == 0 {
        return Err(DensityError::InvalidArgument("N must be at least 1".into()));
    }
    let profile = b_profile(g, big_n)?;
    let psi_j = |j: usize| psi_at_integer::<T>(n, j as i64);
    let mut lhs = CompensatedSum::new();
    let mut scale = T::zero();
    for (j, &bj) in profile.b.iter().enumerate() {
        let t = psi_j(j) * T::from_int(bj);
        lhs.add(t);
        scale = scale + t.abs();
    }
    let mut integral = CompensatedSum::new();
    for j in 0..big_n {
        let t = T::from_int(profile.at(j)) * (psi_j(j + 1) - psi_j(j));
        integral.add(t);
        scale = scale + t.abs();
    }
    let rhs = psi_j(big_n) * T::from_int(profile.at(big_n)) - integral.value();
    Ok(AbelReport {
        lhs: lhs.value(),
        rhs,
        tolerance: T::lit(1e-10).max(T::lit(64.0) * T::epsilon() * scale),
    })
}

/// `F_n(g) = (1/n) ∫ B ψ dt - ∫ B h dt` with
/// `h = 2 exp(-2n e^{-t/n}) e^{-2t/n} / (1 + exp(-2n e^{-t/n}))²`,
/// each integral evaluated in closed form on the unit intervals where `B` is
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralForm<T> {
    pub first: TruncatedValue<T>,
    pub second: TruncatedValue<T>,
    pub functional: TruncatedValue<T>,
    /// `4‖g‖² (1 - e^{-n}) / n` and `2‖g‖² / n`.
    pub first_bound: T,
    pub second_bound: T,
}

impl<T: Real> IntegralForm<T> {
    pub fn bounds_pass(&self) -> bool {
        self.first.value.abs() <= self.first_bound + self.first.error_bound
            && self.second.value.abs() <= self.second_bound + self.second.error_bound
    }

    /// `|F_n - (first - second)|` against the combined error bounds.
    pub fn consistent(&self) -> bool {
        let diff = (self.functional.value - (self.first.value - self.second.value)).abs();
        diff <= self.functional.error_bound
            + self.first.error_bound
            + self.second.error_bound
            + T::lit(1e-12)
    }
}

pub fn vanishing_integrals<T: Real>(
    g: &WobblingMap,
    n: u32,
    eps: T,
) -> Result<IntegralForm<T>, DensityError> {
    check_order(n)?;
    check_eps(eps)?;
    let functional = displacement_functional(n, g, eps)?;
    let nt = order::<T>(n);
    let m = g.certified_bound();
    let mt = T::from_u64(m).unwrap();
    let b_max = T::lit(4.0) * mt * mt;
    // Past the radius B is bounded by 4m² and the tails of ∫ψ and ∫h are
    // controlled by P(∞) - P(N).
    let p_inf = T::LN_2() * T::lit(0.5);
    let mut radius = functional.truncation_radius.max(m + 1) as usize;
    while b_max * (p_inf - psi_antiderivative(n, T::from_usize(radius).unwrap())) > eps * nt
        && radius < (1 << 30)
    {
        radius *= 2;
    }
    let profile = b_profile(g, radius)?;
    let (mut first, mut second) = (CompensatedSum::new(), CompensatedSum::new());
    let mut p_prev = psi_antiderivative::<T>(n, T::zero());
    let mut psi_prev = psi::<T>(n, T::zero());
    for j in 0..radius {
        let t_next = T::from_usize(j + 1).unwrap();
        let p_next = psi_antiderivative::<T>(n, t_next);
        let psi_next = psi::<T>(n, t_next);
        let b = T::from_int(profile.at(j));
        let dp = p_next - p_prev;
        first.add(b * dp / nt);
        second.add(b * (psi_next - psi_prev + dp / nt));
        p_prev = p_next;
        psi_prev = psi_next;
    }
    let dp_tail = p_inf - p_prev;
    let rounding = T::lit(1e-13);
    Ok(IntegralForm {
        first: TruncatedValue {
            value: first.value(),
            error_bound: b_max * dp_tail / nt + rounding,
            truncation_radius: radius as u64,
        },
        second: TruncatedValue {
            value: second.value(),
            error_bound: b_max * (psi_prev + dp_tail / nt) + rounding,
            truncation_radius: radius as u64,
        },
        functional,
        first_bound: b_max * (-(-nt).exp_m1()) / nt,
        second_bound: T::lit(2.0) * mt * mt / nt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap(a: i64, b: i64) -> WobblingMap {
        WobblingMap::transposition(a, b)
    }

    #[test]
    fn coefficient_values() {
        assert!((coefficient::<f64>(1, 0) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((coefficient::<f64>(2, 0) - 0.135_335_283_236_612_7).abs() < 1e-15);
        for j in 0..50 {
            assert_eq!(coefficient::<f64>(3, j), coefficient::<f64>(3, -j));
            let a = coefficient::<f64>(3, j);
            assert!(a > 0.0 && a <= 1.0);
        }
        assert!((coefficient::<f32>(1, 0) - 0.367_879_44).abs() < 1e-6);
    }

    #[test]
    fn conditioned_ratio_values() {
        assert!((conditioned_norm_ratio::<f64>(1) - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!(conditioned_norm_ratio::<f64>(10) > 1.0 - 1e-8);
        for k in [1, 2, 4, 8] {
            assert!(conditioned_norm_ratio::<f64>(2 * k) > conditioned_norm_ratio::<f64>(k));
        }
    }

    #[test]
    fn identity_correlation_is_exactly_one() {
        for n in [1, 5, 40] {
            let v = correlation_ratio::<f64>(n, &WobblingMap::identity(), 1e-9).unwrap();
            assert_eq!(v.value, 1.0);
            assert_eq!(v.error_bound, 0.0);
        }
    }

    #[test]
    fn correlation_matches_direct_product() {
        let g = swap(0, 5);
        let v = correlation_ratio::<f64>(2, &g, 1e-12).unwrap();
        let direct: f64 = (-10i64..=10)
            .map(|j| {
                let a = coefficient::<f64>(2, j);
                let b = coefficient::<f64>(2, g.evaluate(j).unwrap());
                (1.0 + a * b) / (1.0 + a * a)
            })
            .product();
        assert!((v.value - direct).abs() < 1e-13);
    }

    #[test]
    fn correlation_rejects_tiny_eps() {
        let s = WobblingMap::shift(1);
        assert!(matches!(
            correlation_ratio::<f64>(1, &s, 1e-17),
            Err(DensityError::Precision { .. })
        ));
        assert!(matches!(
            correlation_ratio::<f32>(1, &s, 1e-9),
            Err(DensityError::Precision { .. })
        ));
        assert!(correlation_ratio::<f32>(1, &s, 1e-3).is_ok());
    }

    #[test]
    fn functional_examples() {
        assert_eq!(
            displacement_functional::<f64>(3, &WobblingMap::identity(), 1e-9)
                .unwrap()
                .value,
            0.0
        );
        let f = displacement_functional::<f64>(1, &WobblingMap::shift(1), 1e-12).unwrap();
        let closed = (-2.0f64).exp() / (1.0 + (-2.0f64).exp());
        assert!((f.value - closed).abs() < 1e-15);
        assert!((f.value - 0.119_202_922_022_118).abs() < 1e-12);
        // two-sided direct sum
        let g = swap(0, 5);
        let f = displacement_functional::<f64>(1, &g, 1e-12).unwrap();
        let direct: f64 = (-5i64..=5)
            .map(|j| {
                weight::<f64>(1, j)
                    * decay::<f64>(1, j)
                    * (g.evaluate(j).unwrap().abs() - j.abs()) as f64
            })
            .sum();
        assert!((f.value - direct).abs() < 1e-12);
    }

    #[test]
    fn b_profiles() {
        let p = b_profile(&WobblingMap::shift(1), 20).unwrap();
        assert_eq!(p.b[0], 1);
        assert!(p.b[1..].iter().all(|&b| b == 0));
        assert!(p.cumulative.iter().all(|&c| c == 1));
        let p = b_profile(&WobblingMap::identity(), 10).unwrap();
        assert!(p.b.iter().chain(&p.cumulative).all(|&x| x == 0));
        let p = b_profile(&swap(0, 5), 12).unwrap();
        assert_eq!(p.b[0], 5);
        assert_eq!(p.b[5], -5);
        assert_eq!(p.b.iter().filter(|&&b| b != 0).count(), 2);
        assert!((0..5).all(|u| p.at(u) == 5));
        assert!((5..=12).all(|u| p.at(u) == 0));
    }

    #[test]
    fn lemma_b_examples() {
        let grid: Vec<usize> = (2..=50).collect();
        let r = check_lemma_b(&WobblingMap::shift(1), &grid).unwrap();
        assert!(r.pass());
        assert_eq!((r.lower, r.upper), (-2, 4));
        assert!(r.values.iter().all(|&(_, b)| b == 1));
        let grid: Vec<usize> = (6..=50).collect();
        let r = check_lemma_b(&swap(0, 5), &grid).unwrap();
        assert!(r.pass());
        assert_eq!((r.lower, r.upper), (-50, 100));
        let r = check_lemma_b(&WobblingMap::identity(), &[1, 2, 3]).unwrap();
        assert!(r.pass() && r.values.iter().all(|&(_, b)| b == 0));
        assert!(check_lemma_b(&swap(0, 5), &[5]).is_err());
    }

    #[test]
    fn lemma_sum_small_n() {
        let r = check_lemma_sum::<f64>(1).unwrap();
        assert!(r.pass(), "{r:?}");
        assert!(r.s2.value <= 1.0);
        let r = check_lemma_sum::<f64>(64).unwrap();
        assert!(r.pass() && r.s2.value <= 1.0 / 64.0);
    }

    #[test]
    fn log_inequality_endpoints() {
        let r = check_log_inequality(&[0.0f64, -0.5]).unwrap();
        assert!(r.pass());
        let c = log_inequality_constant::<f64>();
        assert!((-0.5 - c / 4.0 - 0.5f64.ln()).abs() < 1e-15);
        assert!(check_log_inequality(&[-0.6f64]).is_err());
    }

    #[test]
    fn eta_theta_identity_and_shift() {
        let e = eta_theta::<f64>(&WobblingMap::identity(), 3, 7).unwrap();
        assert_eq!((e.eta, e.theta), (0.0, 0.0));
        let e = eta_theta::<f64>(&WobblingMap::shift(1), 4, 10).unwrap();
        // d = 1: η = 4(1 - e^{-1/4}) - 1
        let closed = 4.0 * (1.0 - (-0.25f64).exp()) - 1.0;
        assert!((e.eta - closed).abs() < 1e-15);
        assert!(e.eta.abs() <= 1f64.exp() / 4.0 && e.bounds_pass);
        assert!((e.residual - e.theta).abs() < 1e-15);
        let e = eta_theta::<f64>(&swap(0, 5), 2, 0).unwrap();
        assert!(e.bounds_pass);
    }

    #[test]
    fn sum2_split() {
        let z = decompose_sum2::<f64>(4, &WobblingMap::identity(), 1e-10).unwrap();
        assert_eq!((z.main, z.eta_term, z.theta_term), (0.0, 0.0, 0.0));
        let z = decompose_sum2::<f64>(8, &WobblingMap::shift(1), 1e-10).unwrap();
        let closed = (-16.0f64).exp() / (1.0 + (-16.0f64).exp());
        assert!((z.main - closed).abs() < 1e-12);
        assert!(z.bounds_pass());
        assert!(z.split_error() < 1e-9);
    }

    #[test]
    fn abel_identity() {
        let r = abel_check::<f64>(&WobblingMap::identity(), 3, 10).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let r = abel_check::<f64>(&WobblingMap::shift(1), 2, 100).unwrap();
        assert!(r.pass());
        assert!((r.lhs - psi::<f64>(2, 0.0)).abs() < 1e-15);
        assert!(abel_check::<f64>(&swap(0, 5), 1, 50).unwrap().pass());
    }

    #[test]
    fn psi_antiderivative_matches_quadrature() {
        for n in [1u32, 3, 10] {
            let (a, b) = (0.5f64, 7.25f64);
            let steps = 20_000;
            let h = (b - a) / steps as f64;
            let simpson: f64 = (0..=steps)
                .map(|k| {
                    let w = if k == 0 || k == steps {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * psi::<f64>(n, a + k as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            let closed = psi_antiderivative::<f64>(n, b) - psi_antiderivative::<f64>(n, a);
            assert!((simpson - closed).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn integral_form_reproduces_functional() {
        for g in [WobblingMap::shift(1), swap(0, 5), swap(-3, 2)] {
            for n in [1, 4, 16] {
                let r = vanishing_integrals::<f64>(&g, n, 1e-11).unwrap();
                assert!(r.consistent(), "{g:?} n={n} {r:?}");
            }
        }
    }

    #[test]
    fn constants_do_not_overflow_in_log_form() {
        let k = DisplacementConstants::<f64>::for_bound(12);
        assert!(k.ln_c_double_prime.is_finite());
        assert!(k.c_double_prime().is_infinite());
    }
}
