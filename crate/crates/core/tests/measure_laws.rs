use std::collections::BTreeSet;

use fgl::catalog::fibonacci_pool;
use fgl::density::{coefficient, window_norm_squared};
use fgl::meanlab::*;
use fgl::wobbling::WobblingMap;
use num_bigint::BigInt;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fast Walsh–Hadamard transform, normalised so that the output at `E` is
/// `E_x[f(x) (-1)^{Σ_{j∈E} x_j}]`.
fn walsh(mut v: Vec<f64>) -> Vec<f64> {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for i in (0..len).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    v.iter().map(|x| x / len as f64).collect()
}

fn subset_of_mask(mask: usize, window: i64) -> Subset {
    (0..2 * window + 1)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i - window)
        .collect()
}

#[test]
fn parseval_on_window() {
    let (n, w) = (3u32, 5i64);
    let coords = 2 * w as usize + 1;
    let f: Vec<f64> = (0..1usize << coords)
        .map(|x| {
            (0..coords)
                .filter(|i| x >> i & 1 == 1)
                .map(|i| coefficient::<f64>(n, i as i64 - w))
                .product()
        })
        .collect();
    let hat = walsh(f);
    let mut total = 0.0;
    for (mask, &h) in hat.iter().enumerate() {
        let e = subset_of_mask(mask, w);
        let formula = fourier_coefficient::<f64>(n, &e, w as u64).unwrap();
        assert!((formula - h).abs() < 1e-14, "{e:?}");
        total += h * h;
    }
    assert!((total - window_norm_squared::<f64>(n, w as u64)).abs() < 1e-10);
    // normalised squares are the product measure
    let m = fourier_measure::<f64>(n, w as u64);
    for mask in [0usize, 1, 0b10101, 0b11111111111] {
        let e = subset_of_mask(mask, w);
        let product: f64 = m
            .coordinates()
            .map(|j| if e.contains(&j) { m.p(j) } else { 1.0 - m.p(j) })
            .product();
        assert!((hat[mask] * hat[mask] / total - product).abs() < 1e-14);
    }
}

#[test]
fn fourier_probability_at_origin_tends_to_half() {
    let p: Vec<f64> = (1..=40).map(|n| fourier_probability::<f64>(n, 0)).collect();
    assert!(p.windows(2).all(|w| w[1] >= w[0]));
    assert!((p[39] - 0.5).abs() < 1e-15);
}

#[test]
fn sampler_frequencies_within_three_sigma() {
    let m = fourier_measure::<f64>(2, 5);
    let samples = 100_000;
    let sets = sample_sets(&m, 11, samples);
    for j in m.coordinates() {
        let count = sets.iter().filter(|s| s.contains(&j)).count() as f64;
        let p = m.p(j);
        let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
        assert!((count - samples as f64 * p).abs() <= 3.0 * sigma, "j={j}");
    }
}

#[test]
fn shift_defects() {
    let shift = WobblingMap::shift(1);
    let mut coupling = Vec::new();
    let mut affinity = Vec::new();
    for n in [1u32, 4, 16, 64] {
        let m = fourier_measure::<f64>(n, 40 * n as u64);
        let a = (-(n as f64)).exp();
        // the coordinatewise bound telescopes to 2 p_0
        let closed = (1.0 - a).powi(2) / (1.0 + a * a);
        let d = pushforward_defect(&m, &shift).unwrap();
        assert!((d - closed).abs() < 1e-12, "n={n}");
        coupling.push(d);
        affinity.push(affinity_defect(&m, &shift).unwrap());
    }
    assert!(coupling.windows(2).all(|w| w[1] > w[0]), "{coupling:?}");
    assert!(affinity.windows(2).all(|w| w[1] < w[0]), "{affinity:?}");
    assert!((affinity[3] - 0.073488).abs() < 1e-5, "{}", affinity[3]);
}

#[test]
fn boosted_defect_is_at_most_k_times() {
    let shift = WobblingMap::shift(1);
    for n in [1u32, 4] {
        let m = fourier_measure::<f64>(n, 30);
        let d = pushforward_defect(&m, &shift).unwrap();
        for k in [2, 4, 8] {
            let b = m.boost_union(k).unwrap();
            assert!(pushforward_defect(&b, &shift).unwrap() <= k as f64 * d + 1e-12);
            assert_eq!(b.p(0), 1.0 - (1.0 - m.p(0)).powi(k as i32));
        }
    }
}

#[test]
fn boost_of_half_reaches_guaranteed_probability() {
    let half = Ratio::new(BigInt::from(1), BigInt::from(2));
    let m = ProductMeasure::from_probabilities(0, vec![half]).unwrap();
    let b = m.boost_union(5).unwrap();
    assert_eq!(b.p(0), Ratio::new(BigInt::from(31), BigInt::from(32)));
}

#[test]
fn monte_carlo_tv_below_bounds() {
    let m = fourier_measure::<f64>(2, 8);
    let (_, pool) = fibonacci_pool(4096).unwrap();
    for e in &pool {
        let (tv, se) = monte_carlo_tv(&m, &e.map, 20_000, 3).unwrap();
        let coupling = pushforward_defect(&m, &e.map).unwrap();
        let affinity = affinity_defect(&m, &e.map).unwrap();
        assert!(tv <= coupling + 3.0 * se, "{} {tv} {coupling}", e.id);
        assert!(tv <= affinity + 3.0 * se, "{} {tv} {affinity}", e.id);
    }
}

fn random_explicit(rng: &mut ChaCha8Rng) -> ExplicitMeasure<f64> {
    let atoms = rng.gen_range(1..6);
    let mut sets = Vec::new();
    let mut weights = Vec::new();
    for _ in 0..atoms {
        let mut points: Vec<i64> = (-4..=4).collect();
        points.shuffle(rng);
        sets.push(points[..3].iter().copied().collect::<BTreeSet<i64>>());
        weights.push(rng.gen_range(0.01..1.0));
    }
    let total: f64 = weights.iter().sum();
    ExplicitMeasure::new(sets.into_iter().zip(weights.into_iter().map(|w| w / total))).unwrap()
}

fn random_window_permutation(rng: &mut ChaCha8Rng) -> WobblingMap {
    let points: Vec<i64> = (-4..=4).collect();
    let mut image = points.clone();
    image.shuffle(rng);
    WobblingMap::table(points.into_iter().zip(image)).unwrap()
}

#[test]
fn density_invariance_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let swap = WobblingMap::transposition(0, 1);
    for _ in 0..50 {
        let mu = random_explicit(&mut rng);
        let f = density_from_measure(&mu, 4).unwrap();
        assert!((f.mean() - 1.0).abs() < 1e-12);
        assert!(f.values.iter().all(|&v| v >= 0.0));
        let g = random_window_permutation(&mut rng);
        for map in [&swap, &g] {
            let c = check_density_invariance(&mu, map, 4).unwrap();
            assert!(c.pass(), "{c:?}");
        }
        // g·f_μ = f_{g·μ}
        let pushed = density_from_measure(&mu.pushforward(&g).unwrap(), 4).unwrap();
        let acted = f.act(&g).unwrap();
        assert!(pushed
            .values
            .iter()
            .zip(&acted.values)
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

fn ratio(num: i64, den: i64) -> Ratio<BigInt> {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

proptest! {
    #[test]
    fn boost_composes_exactly(
        nums in prop::collection::vec(0i64..=16, 5),
        j in 1usize..5,
        k in 1usize..5,
    ) {
        let m = ProductMeasure::from_probabilities(2, nums.iter().map(|&a| ratio(a, 16)).collect()).unwrap();
        let once = m.boost_union(j * k).unwrap();
        let twice = m.boost_union(k).unwrap().boost_union(j).unwrap();
        prop_assert_eq!(once.probabilities(), twice.probabilities());
        let q = ratio(1, 1) - m.p(0);
        prop_assert_eq!(m.boost_union(5).unwrap().p(0), ratio(1, 1) - q.pow(5));
    }

    #[test]
    fn twist_is_a_homomorphism(i in 0usize..6, j in 0usize..6) {
        let (_, pool) = fibonacci_pool(2048).unwrap();
        let mut maps: Vec<WobblingMap> = pool.into_iter().map(|e| e.map).collect();
        maps.push(WobblingMap::transposition(-2, 3));
        maps.push(WobblingMap::shift(-2));
        let (g, h) = (&maps[i], &maps[j]);
        let lhs = twist(g).unwrap().product(&twist(h).unwrap()).unwrap();
        let rhs = twist(&g.compose(h)).unwrap();
        prop_assert!(lhs.agrees_with(&rhs, -100, 100).unwrap());
        prop_assert_eq!(&rhs.set, &brute_force_twist_set(&g.compose(h)));
    }
}

/// `N △ g(N)` on `[-50, 50)`, read off from the images of `0..200`.
fn brute_force_twist_set(g: &WobblingMap) -> Subset {
    let image: BTreeSet<i64> = (0..200).map(|j| g.evaluate(j).unwrap()).collect();
    (-50..50)
        .filter(|&j| (j >= 0) != image.contains(&j))
        .collect()
}
