//! Acceptance criteria, one pass/fail line each. The target has its own
//! `main` and exits nonzero if any criterion fails:
//! `cargo test -p fgl-cli --test acceptance`.

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fgl::catalog::{fibonacci_pool, load_system, parse_element};
use fgl::density::*;
use fgl::meanlab::*;
use fgl::stabilizer::*;
use fgl::wobbling::WobblingMap;
use num_bigint::BigInt;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_norm_ratio() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=64u32 {
        let v = conditioned_norm_ratio::<f64>(n);
        let closed = 1.0 / (1.0 + (-2.0 * n as f64).exp());
        worst = worst.max((v - closed).abs());
        ensure((v - closed).abs() <= 1e-12, || format!("n={n}: {v} vs {closed}"))?;
        ensure(n < 10 || v > 1.0 - 1e-8, || format!("n={n}: {v} not above 1-1e-8"))?;
    }
    Ok(format!("max deviation {worst:.1e}"))
}

/// `E[f(g⁻¹x) f(x)] / E[f²]` over all configurations of `[-r, r]`.
fn enumerated_correlation(n: u32, g: &WobblingMap, r: i64) -> f64 {
    let coords: Vec<i64> = (-r..=r).collect();
    let a: Vec<f64> = coords.iter().map(|&j| coefficient::<f64>(n, j)).collect();
    let image: Vec<usize> = coords
        .iter()
        .map(|&j| (g.evaluate(j).unwrap() + r) as usize)
        .collect();
    let f = |x: usize| -> f64 {
        (0..coords.len())
            .filter(|i| x >> i & 1 == 1)
            .map(|i| a[i])
            .product()
    };
    let (mut cross, mut norm) = (0.0, 0.0);
    for x in 0..1usize << coords.len() {
        let pulled = (0..coords.len()).fold(0, |acc, i| acc | ((x >> image[i]) & 1) << i);
        let fx = f(x);
        cross += f(pulled) * fx;
        norm += fx * fx;
    }
    cross / norm
}

fn c2_oracle() -> Outcome {
    let g = WobblingMap::transposition(0, 1);
    let product = correlation_truncated::<f64>(1, &g, 6).map_err(|e| e.to_string())?;
    let oracle = enumerated_correlation(1, &g, 6);
    let diff = (product - oracle).abs();
    ensure(diff <= 1e-10, || format!("{product} vs {oracle}"))?;
    Ok(format!("|product - enumeration| = {diff:.1e}"))
}

fn c3_functional() -> Outcome {
    let shift = WobblingMap::shift(1);
    let mut worst = 0.0f64;
    for n in [1u32, 2, 4, 8, 16] {
        let v = displacement_functional::<f64>(n, &shift, 1e-12).map_err(|e| e.to_string())?;
        let q = (-2.0 * n as f64).exp();
        let closed = q / (1.0 + q);
        worst = worst.max((v.value - closed).abs());
        ensure((v.value - closed).abs() <= 1e-10, || format!("n={n}: {} vs {closed}", v.value))?;
    }
    for n in [1u32, 16, 64] {
        let id = displacement_functional::<f64>(n, &WobblingMap::identity(), 1e-12).map_err(|e| e.to_string())?;
        ensure(id.value == 0.0, || format!("F_{n}(identity) = {}", id.value))?;
    }
    Ok(format!("max deviation {worst:.1e}; identity exactly 0"))
}

fn random_table(rng: &mut ChaCha8Rng) -> WobblingMap {
    let size = rng.gen_range(2..8);
    let mut points: Vec<i64> = (-12..12).collect();
    points.shuffle(rng);
    points.truncate(size);
    let mut image = points.clone();
    image.shuffle(rng);
    WobblingMap::table(points.into_iter().zip(image)).unwrap()
}

fn c4_lemmas() -> Outcome {
    let err = |e: DensityError| e.to_string();
    for n in 1..=64 {
        let r = check_lemma_sum::<f64>(n).map_err(err)?;
        ensure(r.pass(), || format!("sum bounds fail at n={n}: {r:?}"))?;
    }
    let grid: Vec<f64> = (0..10_000).map(|i| -0.5 + 10.5 * i as f64 / 9_999.0).collect();
    let log = check_log_inequality(&grid).map_err(err)?;
    ensure(log.pass() && log.checked == 10_000, || format!("{:?}", log.violations.first()))?;
    ensure((log_inequality_constant::<f64>() - (4.0 * 2f64.ln() - 2.0)).abs() < 1e-15, || "C".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_abel = 0.0f64;
    for _ in 0..20 {
        let g = random_table(&mut rng);
        let m = g.certified_bound() as usize;
        let grid: Vec<usize> = (m + 1..=m + 200).collect();
        let b = check_lemma_b(&g, &grid).map_err(err)?;
        ensure(b.pass(), || format!("B bounds fail for {g:?}: {:?}", b.violations))?;
        let n = rng.gen_range(1..20);
        let abel = abel_check::<f64>(&g, n, m + 60).map_err(err)?;
        worst_abel = worst_abel.max((abel.lhs - abel.rhs).abs());
    }

    let (_, pool) = fibonacci_pool(1 << 12).map_err(|e| e.to_string())?;
    let mut points = 0;
    for e in &pool {
        for n in 1..=16 {
            for j in -200..=200 {
                let r = eta_theta::<f64>(&e.map, n, j).map_err(err)?;
                ensure(r.bounds_pass, || format!("{} n={n} j={j}: {r:?}", e.id))?;
                points += 1;
            }
            let abel = abel_check::<f64>(&e.map, n, 4 * n as usize + 40).map_err(err)?;
            worst_abel = worst_abel.max((abel.lhs - abel.rhs).abs());
        }
    }
    ensure(worst_abel <= 1e-10, || format!("summation by parts off by {worst_abel:e}"))?;
    Ok(format!(
        "sums n=1..64, 10^4 log points, 20 tables, {points} remainder points, abel {worst_abel:.1e}"
    ))
}

fn c5_trend() -> Outcome {
    let (_, pool) = fibonacci_pool(1 << 16).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for e in &pool {
        let mut gaps = Vec::new();
        let mut funcs = Vec::new();
        for n in [4u32, 16, 64] {
            let c = correlation_ratio::<f64>(n, &e.map, 1e-10).map_err(|e| e.to_string())?;
            let f = displacement_functional::<f64>(n, &e.map, 1e-10).map_err(|e| e.to_string())?;
            gaps.push((1.0 - c.value).abs());
            funcs.push(f.value.abs());
        }
        let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        ensure(down(&gaps) && down(&funcs), || format!("{}: gaps {gaps:?} F {funcs:?}", e.id))?;
        ensure(gaps[2] < 0.05, || format!("{}: gap at 64 is {}", e.id, gaps[2]))?;
        worst = worst.max(gaps[2]);
    }
    Ok(format!("{} elements, largest gap at n=64 {worst:.3e}", pool.len()))
}

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

fn ratio(a: i64, b: i64) -> Ratio<BigInt> {
    Ratio::new(BigInt::from(a), BigInt::from(b))
}

fn random_explicit(rng: &mut ChaCha8Rng) -> ExplicitMeasure<f64> {
    let atoms = rng.gen_range(1..6);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for _ in 0..atoms {
        let mut points: Vec<i64> = (-4..=4).collect();
        points.shuffle(rng);
        let w: f64 = rng.gen_range(0.01..1.0);
        total += w;
        pairs.push((points[..3].iter().copied().collect::<Subset>(), w));
    }
    ExplicitMeasure::new(pairs.into_iter().map(|(s, w)| (s, w / total))).unwrap()
}

fn c6_measures() -> Outcome {
    let err = |e: MeasureError| e.to_string();
    // Parseval on [-5, 5]
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
    let mut energy = 0.0;
    for (mask, &h) in hat.iter().enumerate() {
        let e: Subset = (0..coords as i64).filter(|i| mask >> i & 1 == 1).map(|i| i - w).collect();
        let formula = fourier_coefficient::<f64>(n, &e, w as u64).map_err(err)?;
        ensure((formula - h).abs() <= 1e-10, || format!("coefficient at {e:?}"))?;
        energy += h * h;
    }
    let norm = window_norm_squared::<f64>(n, w as u64);
    ensure((energy - norm).abs() <= 1e-10, || format!("Parseval {energy} vs {norm}"))?;

    // exact boost
    let probs = vec![ratio(1, 3), ratio(1, 2), ratio(5, 7)];
    let m = ProductMeasure::from_probabilities(1, probs.clone()).map_err(err)?;
    let b = m.boost_union(5).map_err(err)?;
    for (j, p) in (-1..=1).zip(&probs) {
        let expected = ratio(1, 1) - (ratio(1, 1) - p.clone()).pow(5);
        ensure(b.p(j) == expected, || format!("boost at {j}: {} vs {expected}", b.p(j)))?;
        if *p >= ratio(1, 2) {
            ensure(b.p(j) >= ratio(31, 32), || format!("boost at {j} below 1 - 2^-5"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut least = f64::INFINITY;
    for _ in 0..50 {
        let mu = random_explicit(&mut rng);
        let mut points: Vec<i64> = (-4..=4).collect();
        let image = {
            points.shuffle(&mut rng);
            points.clone()
        };
        let g = WobblingMap::table((-4..=4).zip(image)).unwrap();
        for map in [&g, &WobblingMap::transposition(0, 1)] {
            let c = check_density_invariance(&mu, map, 4).map_err(err)?;
            ensure(c.pass(), || format!("{c:?}"))?;
            least = least.min(c.slack());
        }
    }
    Ok(format!("Parseval |Δ| {:.1e}, boost exact, 50 measures (min slack {least:.2e})", (energy - norm).abs()))
}

fn c7_twist() -> Outcome {
    let err = |e: MeasureError| e.to_string();
    let (_, pool) = fibonacci_pool(1 << 12).map_err(|e| e.to_string())?;
    let maps: Vec<&WobblingMap> = pool.iter().map(|e| &e.map).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let g = *maps.choose(&mut rng).unwrap();
        let h = *maps.choose(&mut rng).unwrap();
        let lhs = twist(g).map_err(err)?.product(&twist(h).map_err(err)?).map_err(err)?;
        let rhs = twist(&g.compose(h)).map_err(err)?;
        ensure(lhs.set == rhs.set, || format!("{:?} vs {:?}", lhs.set, rhs.set))?;
        ensure(lhs.agrees_with(&rhs, -200, 200).map_err(err)?, || "maps differ".into())?;
    }
    let s = twist(&WobblingMap::shift(1)).map_err(err)?;
    ensure(s.set == Subset::from([0]), || format!("ι(shift) set {:?}", s.set))?;
    ensure((-50..50).all(|j| s.map.evaluate(j).unwrap() == j + 1), || "ι(shift) map".into())?;
    Ok("100 pairs, ι(shift) = ({0}, shift)".into())
}

fn c8_blocks() -> Outcome {
    let horizon = 1usize << 17;
    let sys = Arc::new(load_system("fibonacci", horizon).map_err(|e| e.to_string())?);
    let maps: Vec<WobblingMap> = ["swap:01", "comm:01,00100"]
        .iter()
        .map(|s| parse_element(s, Some(&sys), horizon).map(|e| e.map))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let err = |e: StabilizerError| e.to_string();
    let mut summary = Vec::new();
    for e in [BTreeSet::new(), BTreeSet::from([2])] {
        let c = e.iter().map(|x: &i64| x.unsigned_abs()).max().unwrap_or(0);
        let m = maps.iter().map(WobblingMap::certified_bound).max().unwrap();
        let pc = pattern_constant(&maps, (c + 2 * m).max(c + 1), 100_000).map_err(err)?;
        let mut orders = Vec::new();
        for window in [600, 1200] {
            let dec = block_decomposition(&maps, &e, window).map_err(err)?;
            dec.verify(&maps).map_err(err)?;
            ensure(dec.block_sizes().iter().all(|&s| s as u64 <= dec.size_bound()), || "size".into())?;
            let covered: BTreeSet<i64> = dec.blocks.iter().flatten().copied().collect();
            ensure((dec.interior.0..=dec.interior.1).all(|x| covered.contains(&x)), || "coverage".into())?;
            let o = finite_order(&maps, &dec, DEFAULT_ORDER_CAP).map_err(err)?;
            ensure(o.divides_factorial_product, || format!("{} does not divide", o.order))?;
            orders.push(o.order);
        }
        ensure(orders[0] == orders[1], || format!("E={e:?}: orders {orders:?}"))?;
        summary.push(format!("E={e:?}: k={} order {}", pc.k, orders[0]));
    }
    Ok(summary.join("; "))
}

fn c9_determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_fgl"))
            .args(["report", "all", "--seed", "7"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(a.status.success(), || String::from_utf8_lossy(&a.stderr).into_owned())?;
    ensure(a.stdout == b.stdout, || "outputs differ".into())?;
    Ok(format!("{} identical bytes", a.stdout.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 conditioned-norm ratio", c1_norm_ratio, Duration::from_secs(1)),
        ("2 oracle equivalence", c2_oracle, Duration::from_secs(10)),
        ("3 displacement functional", c3_functional, Duration::from_secs(10)),
        ("4 estimate suite", c4_lemmas, Duration::from_secs(30)),
        ("5 convergence trend", c5_trend, Duration::from_secs(30)),
        ("6 measure laws", c6_measures, Duration::from_secs(30)),
        ("7 twist homomorphism", c7_twist, Duration::from_secs(30)),
        ("8 block certificate", c8_blocks, Duration::from_secs(60)),
        ("9 determinism", c9_determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {name}: {} ({:.2}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
