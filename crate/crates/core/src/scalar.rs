//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every constant in the crate goes through here.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_int(x: i64) -> Self {
        Self::from_i64(x).expect("integer representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        CompensatedSum {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `exp(x) - 1 - x`, accurate in relative terms near zero.
pub fn expm1_minus_id<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x.abs() >= half {
        return x.exp_m1() - x;
    }
    // x^2/2! + x^3/3! + ...
    let mut term = x * x * half;
    let mut acc = CompensatedSum::new();
    let mut k = 2.0;
    while term != T::zero() {
        acc.add(term);
        k += 1.0;
        let next = term * x / T::lit(k);
        if next.abs() <= acc.value().abs() * T::epsilon() * T::lit(0.25) {
            break;
        }
        term = next;
    }
    acc.value()
}

/// `sum_{|j| > radius} exp(-rate |j|)` in closed form, for `rate > 0`.
pub fn two_sided_geometric_tail<T: Real>(rate: T, radius: u64) -> T {
    let r = T::from_u64(radius + 1).unwrap();
    T::lit(2.0) * (-(r * rate)).exp() / -(-rate).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::<f64>::new();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn expm1_minus_id_matches_series_and_direct() {
        for &x in &[-1e-2f64, 0.3, -0.49, 0.7, -2.0, 5.0] {
            let direct = x.exp_m1() - x;
            let got = expm1_minus_id(x);
            assert!((got - direct).abs() <= 1e-12 * direct.abs(), "x={x}");
        }
        let x = 1e-20f64;
        assert_eq!(expm1_minus_id(x), x * x / 2.0);
        assert_eq!(expm1_minus_id(0.0f64), 0.0);
        let x = 1e-10f64;
        assert!((expm1_minus_id(x) / (x * x / 2.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_tail_matches_partial_sums() {
        for &(n, r) in &[(1u32, 0u64), (3, 5), (10, 40)] {
            let direct: f64 = (r as i64 + 1..20_000)
                .map(|j| 2.0 * (-(j as f64) / n as f64).exp())
                .sum();
            let closed = two_sided_geometric_tail(1.0 / n as f64, r);
            assert!((direct - closed).abs() < 1e-12 * closed, "n={n} r={r}");
        }
    }
}
