//! Stabilisers of sets `E △ N` (with `N = {0, 1, 2, ...}`) in groups with
//! ubiquitous displacement patterns: pattern constants, the decomposition of
//! a window of `Z` into small blocks invariant under a finite set of maps,
//! and the order of the finite group those maps generate on the blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::wobbling::{WobblingError, WobblingMap};

pub const DEFAULT_ORDER_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilizerError {
    #[error(transparent)]
    Map(#[from] WobblingError),
    #[error("map #{index} does not stabilise E △ N")]
    NotStabilizing { index: usize },
    #[error("no pattern constant for radius {radius} within horizon {horizon}")]
    PatternNotWitnessed { radius: u64, horizon: u64 },
    #[error("no pattern copy inside interval [{lo}, {hi}]")]
    PatternMissing { lo: i64, hi: i64 },
    #[error("window {window} holds fewer than four intervals of length {length}")]
    WindowTooSmall { window: u64, length: u64 },
    #[error("blocks {a} and {b} overlap at {point}")]
    Overlap { a: usize, b: usize, point: i64 },
    #[error("blocks do not cover the interior: {detail}")]
    Coverage { detail: String },
    #[error("block {block} has {size} points, more than {bound}")]
    BlockTooLarge { block: usize, size: usize, bound: u64 },
    #[error("map #{map} sends {point} out of block {block}")]
    NotInvariant { map: usize, block: usize, point: i64 },
    #[error("group closure exceeded {cap} elements")]
    CapExceeded { cap: usize },
}

/// Membership in `E △ N`.
pub fn in_twisted_half(e: &BTreeSet<i64>, j: i64) -> bool {
    (j >= 0) != e.contains(&j)
}

fn set_radius(e: &BTreeSet<i64>) -> i64 {
    e.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Whether `g(E △ N) = E △ N`. Away from `[-c-m, c+m]` membership is decided
/// by sign, which `g` cannot change there.
pub fn stabilizes(g: &WobblingMap, e: &BTreeSet<i64>) -> Result<bool, StabilizerError> {
    let reach = set_radius(e) + g.certified_bound() as i64;
    for j in -reach..=reach {
        if in_twisted_half(e, j) != in_twisted_half(e, g.evaluate(j)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every `j` in `[-horizon, horizon]` is within `k - radius` of a centre `t`
/// whose displacement pattern on `[t - radius, t + radius]` equals the one on
/// `[-radius, radius]` for every map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternConstant {
    pub radius: u64,
    pub k: u64,
    pub horizon: u64,
    pub maps: usize,
}

impl PatternConstant {
    /// Leftmost matching centre with `[t - radius, t + radius] ⊆ [j - k, j + k]`.
    pub fn witness(&self, maps: &[WobblingMap], j: i64) -> Result<Option<i64>, StabilizerError> {
        let slack = (self.k - self.radius) as i64;
        for t in j - slack..=j + slack {
            if matches_at(maps, self.radius as i64, t)? {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }
}

fn matches_at(maps: &[WobblingMap], n: i64, t: i64) -> Result<bool, StabilizerError> {
    for g in maps {
        for i in -n..=n {
            if g.evaluate(t + i)? - (t + i) != g.evaluate(i)? - i {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Least `k` with the ubiquitous pattern property on `[-horizon, horizon]`.
pub fn pattern_constant(
    maps: &[WobblingMap],
    radius: u64,
    horizon: u64,
) -> Result<PatternConstant, StabilizerError> {
    let n = radius as i64;
    let h = horizon as i64;
    let pad_cap = h.max(64);
    let mut pad = (4 * n + 64).min(pad_cap);
    loop {
        let lo = -h - pad - n;
        let hi = h + pad + n;
        let disp = maps
            .iter()
            .map(|g| g.displacements(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        let at = |d: &Vec<i64>, x: i64| d[(x - lo) as usize];
        let centres: Vec<i64> = (-h - pad..=h + pad)
            .filter(|&t| {
                disp.iter()
                    .all(|d| (-n..=n).all(|i| at(d, t + i) == at(d, i)))
            })
            .collect();
        let not_witnessed = StabilizerError::PatternNotWitnessed { radius, horizon };
        match max_gap(&centres, -h, h) {
            // A larger pad cannot shrink a gap already seen in full.
            Some(reach) if reach <= pad => {
                let k = radius + reach as u64;
                if k > horizon.max(radius) {
                    return Err(not_witnessed);
                }
                return Ok(PatternConstant {
                    radius,
                    k,
                    horizon,
                    maps: maps.len(),
                });
            }
            _ if pad >= pad_cap => return Err(not_witnessed),
            _ => {}
        }
        pad = (pad * 2).min(pad_cap);
    }
}

/// `max_{lo <= j <= hi}` of the distance from `j` to the nearest centre,
/// or `None` if some `j` has no centre on either side.
fn max_gap(centres: &[i64], lo: i64, hi: i64) -> Option<i64> {
    let mut worst = 0;
    let mut idx = 0;
    for j in lo..=hi {
        while idx < centres.len() && centres[idx] < j {
            idx += 1;
        }
        let right = centres.get(idx).map(|&c| c - j);
        let left = idx.checked_sub(1).map(|i| j - centres[i]);
        let d = match (left, right) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return None,
        };
        worst = worst.max(d);
    }
    Some(worst)
}

/// Pairwise disjoint blocks, each mapped onto itself by every map, covering
/// `[interior.0, interior.1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    pub blocks: Vec<Vec<i64>>,
    pub k: u64,
    pub radius: u64,
    pub set: BTreeSet<i64>,
    pub window: u64,
    pub interior: (i64, i64),
    /// Translation of the pattern copy used in each kept interval.
    pub translations: Vec<i64>,
}

impl BlockDecomposition {
    /// Decomposition from explicit blocks; `k` is set so that the size bound
    /// `4k + 2` holds.
    pub fn from_blocks(blocks: Vec<Vec<i64>>) -> Self {
        let mut blocks: Vec<Vec<i64>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        blocks.retain(|b| !b.is_empty());
        let largest = blocks.iter().map(Vec::len).max().unwrap_or(0) as u64;
        let lo = blocks.iter().filter_map(|b| b.first()).min().copied().unwrap_or(0);
        let hi = blocks.iter().filter_map(|b| b.last()).max().copied().unwrap_or(0);
        BlockDecomposition {
            blocks,
            k: largest.saturating_sub(2).div_ceil(4),
            radius: 0,
            set: BTreeSet::new(),
            window: lo.unsigned_abs().max(hi.unsigned_abs()),
            interior: (lo, hi),
            translations: Vec::new(),
        }
    }

    pub fn size_bound(&self) -> u64 {
        4 * self.k + 2
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Disjointness, the size bound and invariance under every map.
    pub fn verify(&self, maps: &[WobblingMap]) -> Result<(), StabilizerError> {
        let mut owner: HashMap<i64, usize> = HashMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.len() as u64 > self.size_bound() {
                return Err(StabilizerError::BlockTooLarge {
                    block: i,
                    size: b.len(),
                    bound: self.size_bound(),
                });
            }
            for &x in b {
                if let Some(a) = owner.insert(x, i) {
                    return Err(StabilizerError::Overlap { a, b: i, point: x });
                }
            }
        }
        for (mi, g) in maps.iter().enumerate() {
            for (bi, b) in self.blocks.iter().enumerate() {
                for &x in b {
                    if owner.get(&g.evaluate(x)?) != Some(&bi) {
                        return Err(StabilizerError::NotInvariant {
                            map: mi,
                            block: bi,
                            point: x,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cuts `[-window, window]` into intervals of length `2k + 1`, places a copy
/// `E_i` of `E_0 = (E △ N) ∩ [-r, r]` in each, and takes
/// `B_i = (E_i ∪ [max E_i + 1, max E_{i+1}]) \ E_{i+1}`. The two outermost
/// blocks are dropped.
pub fn block_decomposition(
    maps: &[WobblingMap],
    e: &BTreeSet<i64>,
    window: u64,
) -> Result<BlockDecomposition, StabilizerError> {
    for (index, g) in maps.iter().enumerate() {
        if !stabilizes(g, e)? {
            return Err(StabilizerError::NotStabilizing { index });
        }
    }
    let c = set_radius(e);
    let m = maps.iter().map(|g| g.certified_bound()).max().unwrap_or(0) as i64;
    // With no displacement at all `c + 1` keeps E_0 nonempty.
    let r = (c + 2 * m).max(c + 1);
    let pc = pattern_constant(maps, r as u64, window)?;
    let k = pc.k as i64;
    let len = 2 * k + 1;
    let q = (window as i64 - k).div_euclid(len);
    if q < 2 {
        return Err(StabilizerError::WindowTooSmall {
            window,
            length: len as u64,
        });
    }
    let e0: Vec<i64> = (-r..=r).filter(|&j| in_twisted_half(e, j)).collect();
    let mut copies = Vec::new();
    let mut translations = Vec::new();
    for i in -q..=q {
        let (lo, hi) = (i * len - k, i * len + k);
        let mut found = None;
        for t in lo + r..=hi - r {
            if matches_at(maps, r, t)? {
                found = Some(t);
                break;
            }
        }
        let t = found.ok_or(StabilizerError::PatternMissing { lo, hi })?;
        translations.push(t);
        copies.push(e0.iter().map(|x| x + t).collect::<BTreeSet<i64>>());
    }
    let top = |s: &BTreeSet<i64>| *s.last().unwrap();
    let mut blocks = Vec::new();
    for i in 1..copies.len() - 2 {
        let (cur, next) = (&copies[i], &copies[i + 1]);
        let block: Vec<i64> = cur
            .iter()
            .copied()
            .chain(top(cur) + 1..=top(next))
            .filter(|x| !next.contains(x))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        blocks.push(block);
    }
    let first = &copies[1];
    let last = &copies[copies.len() - 2];
    let interior = (top(first) + 1, *last.first().unwrap() - 1);
    let dec = BlockDecomposition {
        blocks,
        k: k as u64,
        radius: r as u64,
        set: e.clone(),
        window,
        interior,
        translations: translations[1..translations.len() - 1].to_vec(),
    };
    dec.verify(maps)?;
    let covered: HashSet<i64> = dec.blocks.iter().flatten().copied().collect();
    if let Some(x) = (interior.0..=interior.1).find(|x| !covered.contains(x)) {
        return Err(StabilizerError::Coverage {
            detail: format!("{x} lies in no block"),
        });
    }
    Ok(dec)
}

/// Order of the group generated by `maps` acting on the blocks, with the
/// check that it divides `∏ |B_i|!`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupOrder {
    pub order: u64,
    /// Blocks on which the generators act in pairwise different ways.
    pub distinct_block_actions: usize,
    pub divides_factorial_product: bool,
}

type Permutation = Vec<u32>;

fn compose(a: &Permutation, b: &Permutation) -> Permutation {
    b.iter().map(|&x| a[x as usize]).collect()
}

pub fn finite_order(
    maps: &[WobblingMap],
    dec: &BlockDecomposition,
    cap: usize,
) -> Result<GroupOrder, StabilizerError> {
    dec.verify(maps)?;
    // Blocks with the same local action contribute identical factors; keep one.
    let mut actions: BTreeMap<Vec<Permutation>, usize> = BTreeMap::new();
    for b in &dec.blocks {
        let index: HashMap<i64, u32> = b.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
        let sig = maps
            .iter()
            .map(|g| b.iter().map(|&x| Ok(index[&g.evaluate(x)?])).collect())
            .collect::<Result<Vec<Permutation>, WobblingError>>()?;
        *actions.entry(sig).or_insert(0) += 1;
    }
    let mut generators: Vec<Permutation> = vec![Vec::new(); maps.len()];
    for sig in actions.keys() {
        for (gen, local) in generators.iter_mut().zip(sig) {
            let offset = gen.len() as u32;
            gen.extend(local.iter().map(|x| x + offset));
        }
    }
    let degree = generators.first().map_or(0, Vec::len) as u32;
    let identity: Permutation = (0..degree).collect();
    let mut seen: HashSet<Permutation> = HashSet::from([identity.clone()]);
    let mut queue = VecDeque::from([identity]);
    while let Some(p) = queue.pop_front() {
        for g in &generators {
            let q = compose(g, &p);
            if !seen.contains(&q) {
                if seen.len() >= cap {
                    return Err(StabilizerError::CapExceeded { cap });
                }
                seen.insert(q.clone());
                queue.push_back(q);
            }
        }
    }
    let order = seen.len() as u64;
    Ok(GroupOrder {
        order,
        distinct_block_actions: actions.len(),
        divides_factorial_product: divides_factorial_product(order, &dec.block_sizes()),
    })
}

/// Whether `order` divides `∏ sizes[i]!`, compared prime by prime.
pub fn divides_factorial_product(order: u64, sizes: &[usize]) -> bool {
    let mut rest = order;
    let mut p = 2u64;
    while rest > 1 {
        if p * p > rest {
            p = rest;
        }
        let mut need = 0u64;
        while rest.is_multiple_of(p) {
            rest /= p;
            need += 1;
        }
        if need > 0 {
            let have: u64 = sizes.iter().map(|&s| legendre(s as u64, p)).sum();
            if have < need {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Exponent of `p` in `s!`.
fn legendre(s: u64, p: u64) -> u64 {
    let mut total = 0;
    let mut q = p;
    while q <= s {
        total += s / q;
        match q.checked_mul(p) {
            Some(next) => q = next,
            None => break,
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[i64]) -> BTreeSet<i64> {
        xs.iter().copied().collect()
    }

    #[test]
    fn stabilizer_membership() {
        assert!(stabilizes(&WobblingMap::identity(), &set(&[1, -4])).unwrap());
        assert!(!stabilizes(&WobblingMap::shift(1), &BTreeSet::new()).unwrap());
        assert!(stabilizes(&WobblingMap::transposition(-3, -7), &BTreeSet::new()).unwrap());
        assert!(!stabilizes(&WobblingMap::transposition(-1, 0), &BTreeSet::new()).unwrap());
        assert!(stabilizes(&WobblingMap::transposition(-1, 0), &set(&[0])).unwrap());
        // E △ N = {1, 2, ...} is moved onto {2, 3, ...}
        assert!(!stabilizes(&WobblingMap::shift(1), &set(&[0])).unwrap());
    }

    #[test]
    fn pattern_constants_for_constant_patterns() {
        let pc = pattern_constant(&[WobblingMap::identity()], 4, 100).unwrap();
        assert_eq!(pc.k, 4);
        let pc = pattern_constant(&[WobblingMap::shift(1)], 3, 100).unwrap();
        assert_eq!(pc.k, 3);
        let far = WobblingMap::transposition(-3, -7);
        assert!(matches!(
            pattern_constant(&[far], 8, 200),
            Err(StabilizerError::PatternNotWitnessed { .. })
        ));
    }

    #[test]
    fn periodic_swaps_have_small_constant() {
        // g swaps 3i and 3i+1 for every i: period 3
        let g = WobblingMap::unchecked_table(
            (-400i64..400).flat_map(|i| [(3 * i, 3 * i + 1), (3 * i + 1, 3 * i)]),
        );
        let pc = pattern_constant(std::slice::from_ref(&g), 2, 300).unwrap();
        assert_eq!(pc.k, 3);
        assert_eq!(pc.witness(&[g], 5).unwrap(), Some(6));
    }

    #[test]
    fn max_gap_cases() {
        assert_eq!(max_gap(&[0, 10], 0, 10), Some(5));
        assert_eq!(max_gap(&[3], 0, 5), Some(3));
        assert_eq!(max_gap(&[], 0, 5), None);
    }

    #[test]
    fn identity_blocks() {
        let dec = block_decomposition(&[WobblingMap::identity()], &BTreeSet::new(), 40).unwrap();
        assert!(dec.blocks.iter().all(|b| b.len() as u64 <= dec.size_bound()));
        let o = finite_order(&[WobblingMap::identity()], &dec, 10).unwrap();
        assert_eq!(o.order, 1);
    }

    #[test]
    fn orders_from_explicit_blocks() {
        let inv = WobblingMap::transposition(0, 1);
        let dec = BlockDecomposition::from_blocks(vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(finite_order(std::slice::from_ref(&inv), &dec, 100).unwrap().order, 2);
        let other = WobblingMap::transposition(2, 3);
        let o = finite_order(&[inv.clone(), other], &dec, 100).unwrap();
        assert_eq!(o.order, 4);
        assert!(o.divides_factorial_product);
        let bad = BlockDecomposition::from_blocks(vec![vec![0, 2], vec![1, 3]]);
        assert!(matches!(
            finite_order(&[inv], &bad, 100),
            Err(StabilizerError::NotInvariant { .. })
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let a = WobblingMap::transposition(0, 1);
        let b = WobblingMap::unchecked_table([(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let dec = BlockDecomposition::from_blocks(vec![(0..5).collect()]);
        assert_eq!(finite_order(&[a.clone(), b.clone()], &dec, 1000).unwrap().order, 120);
        assert_eq!(
            finite_order(&[a, b], &dec, 50),
            Err(StabilizerError::CapExceeded { cap: 50 })
        );
    }

    #[test]
    fn factorial_divisibility() {
        assert!(divides_factorial_product(6, &[3]));
        assert!(!divides_factorial_product(5, &[4, 4]));
        assert!(divides_factorial_product(8, &[2, 2, 2]));
        assert!(!divides_factorial_product(16, &[2, 2, 2]));
        assert_eq!(legendre(10, 2), 8);
    }
}
