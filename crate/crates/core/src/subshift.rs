//! Primitive substitution subshifts.
//!
//! Substitutions are the only source of minimal Cantor systems in this crate:
//! a primitive, aperiodic substitution generates a minimal subshift, and its
//! two-sided fixed point `p` supplies the dense orbit used to identify the
//! system with the integers. Aperiodicity is checked on the generated window
//! only (no period up to [`APERIODICITY_BOUND`]); it is a desk-scale check and
//! not a proof.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a letter in the alphabet.
pub type Symbol = u8;
pub type Word = Vec<Symbol>;

/// Symbols generated on each side of the origin unless configured otherwise.
pub const DEFAULT_ORBIT_HORIZON: usize = 1 << 16;
/// Longest factor length accepted by [`SubshiftSystem::language`].
pub const MAX_LANGUAGE_LENGTH: usize = 4096;
/// Periods up to this value are ruled out on the generated window.
pub const APERIODICITY_BOUND: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubshiftError {
    #[error("invalid substitution: {0}")]
    InvalidSubstitution(String),
    #[error("invalid seed: {reason}; valid seeds (right, left): {suggestions}")]
    InvalidSeed { reason: String, suggestions: String },
    #[error("no aperiodic point: generated window has period {period}")]
    Periodic { period: usize },
    #[error("horizon exceeded: need orbit window [{lo}, {hi}] but only [-{horizon}, {}] is generated", *horizon as i64 - 1)]
    HorizonExceeded { lo: i64, hi: i64, horizon: usize },
    #[error("word length {0} outside the supported range 1..={MAX_LANGUAGE_LENGTH}")]
    LengthOutOfRange(usize),
    #[error("recurrence not witnessed: some window of length {horizon_len} misses a word of length {length}")]
    RecurrenceNotWitnessed { length: usize, horizon_len: usize },
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(char),
    #[error("unknown built-in system '{0}' (expected fibonacci or thue-morse)")]
    UnknownBuiltin(String),
}

/// JSON description of a substitution system.
///
/// `seed` is `[right, left]`: the point satisfies `p[0] = right` and
/// `p[-1] = left`, so the admissible seed factor is `left right`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionConfig {
    pub alphabet: Vec<String>,
    pub rules: BTreeMap<String, String>,
    pub seed: [String; 2],
}

impl SubstitutionConfig {
    pub fn builtin(name: &str) -> Result<Self, SubshiftError> {
        let (rules, seed): (&[(&str, &str)], [&str; 2]) = match name {
            "fibonacci" => (&[("0", "01"), ("1", "0")], ["0", "1"]),
            "thue-morse" => (&[("0", "01"), ("1", "10")], ["0", "1"]),
            other => return Err(SubshiftError::UnknownBuiltin(other.to_string())),
        };
        Ok(SubstitutionConfig {
            alphabet: vec!["0".into(), "1".into()],
            rules: rules
                .iter()
                .map(|(a, w)| (a.to_string(), w.to_string()))
                .collect(),
            seed: seed.map(String::from),
        })
    }
}

/// A substitution on a finite alphabet of single-character letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    letters: Vec<char>,
    images: Vec<Word>,
}

impl Substitution {
    /// Builds and validates a substitution (primitive and expanding).
    pub fn new(letters: Vec<char>, images: Vec<Word>) -> Result<Self, SubshiftError> {
        if letters.is_empty() {
            return Err(SubshiftError::InvalidSubstitution("empty alphabet".into()));
        }
        if letters.len() > usize::from(Symbol::MAX) {
            return Err(SubshiftError::InvalidSubstitution("alphabet too large".into()));
        }
        let distinct: BTreeSet<_> = letters.iter().collect();
        if distinct.len() != letters.len() {
            return Err(SubshiftError::InvalidSubstitution("repeated letter".into()));
        }
        if images.len() != letters.len() {
            return Err(SubshiftError::InvalidSubstitution(
                "every letter needs exactly one rule".into(),
            ));
        }
        for (a, img) in letters.iter().zip(&images) {
            if img.is_empty() {
                return Err(SubshiftError::InvalidSubstitution(format!(
                    "rule for '{a}' is empty"
                )));
            }
            if img.iter().any(|&s| usize::from(s) >= letters.len()) {
                return Err(SubshiftError::InvalidSubstitution(format!(
                    "rule for '{a}' uses a letter outside the alphabet"
                )));
            }
        }
        if images.iter().all(|w| w.len() < 2) {
            return Err(SubshiftError::InvalidSubstitution(
                "not expanding: every rule has length 1".into(),
            ));
        }
        let sub = Substitution { letters, images };
        if !sub.is_primitive() {
            return Err(SubshiftError::InvalidSubstitution("not primitive".into()));
        }
        Ok(sub)
    }

    pub fn from_config(cfg: &SubstitutionConfig) -> Result<Self, SubshiftError> {
        let mut letters = Vec::with_capacity(cfg.alphabet.len());
        for name in &cfg.alphabet {
            let mut chars = name.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => letters.push(c),
                _ => {
                    return Err(SubshiftError::InvalidSubstitution(format!(
                        "letter names must be single characters, got {name:?}"
                    )))
                }
            }
        }
        let partial = Substitution {
            letters: letters.clone(),
            images: Vec::new(),
        };
        let mut images = Vec::with_capacity(letters.len());
        for name in &cfg.alphabet {
            let rule = cfg.rules.get(name).ok_or_else(|| {
                SubshiftError::InvalidSubstitution(format!("no rule for '{name}'"))
            })?;
            images.push(partial.parse_word(rule)?);
        }
        if cfg.rules.len() != cfg.alphabet.len() {
            return Err(SubshiftError::InvalidSubstitution(
                "rule for a letter outside the alphabet".into(),
            ));
        }
        Substitution::new(letters, images)
    }

    pub fn alphabet_size(&self) -> usize {
        self.letters.len()
    }

    pub fn image(&self, a: Symbol) -> &[Symbol] {
        &self.images[usize::from(a)]
    }

    pub fn apply(&self, word: &[Symbol]) -> Word {
        word.iter()
            .flat_map(|&a| self.images[usize::from(a)].iter().copied())
            .collect()
    }

    pub fn iterate(&self, word: &[Symbol], times: u32) -> Word {
        let mut w = word.to_vec();
        for _ in 0..times {
            w = self.apply(&w);
        }
        w
    }

    pub fn parse_word(&self, s: &str) -> Result<Word, SubshiftError> {
        s.chars()
            .map(|c| {
                self.letters
                    .iter()
                    .position(|&l| l == c)
                    .map(|i| i as Symbol)
                    .ok_or(SubshiftError::UnknownSymbol(c))
            })
            .collect()
    }

    pub fn format_word(&self, word: &[Symbol]) -> String {
        word.iter().map(|&s| self.letters[usize::from(s)]).collect()
    }

    pub fn letter(&self, a: Symbol) -> char {
        self.letters[usize::from(a)]
    }

    fn is_primitive(&self) -> bool {
        let k = self.letters.len();
        let base: Vec<Vec<bool>> = (0..k)
            .map(|a| {
                let mut row = vec![false; k];
                for &b in &self.images[a] {
                    row[usize::from(b)] = true;
                }
                row
            })
            .collect();
        // Wielandt: a primitive k x k matrix has a positive power at most (k-1)^2 + 1.
        let mut power = base.clone();
        for _ in 0..((k - 1) * (k - 1) + 1) {
            if power.iter().all(|row| row.iter().all(|&x| x)) {
                return true;
            }
            power = (0..k)
                .map(|a| {
                    (0..k)
                        .map(|c| (0..k).any(|b| power[a][b] && base[b][c]))
                        .collect()
                })
                .collect();
        }
        power.iter().all(|row| row.iter().all(|&x| x))
    }

    /// Two-letter factors of the language, by closure under the substitution.
    fn two_letter_factors(&self) -> BTreeSet<Word> {
        let mut found = BTreeSet::new();
        let mut frontier: Vec<Word> = Vec::new();
        let push = |w: &[Symbol], found: &mut BTreeSet<Word>, frontier: &mut Vec<Word>| {
            for f in w.windows(2) {
                if found.insert(f.to_vec()) {
                    frontier.push(f.to_vec());
                }
            }
        };
        for a in 0..self.letters.len() {
            push(&self.images[a], &mut found, &mut frontier);
        }
        while let Some(pair) = frontier.pop() {
            let img = self.apply(&pair);
            push(&img, &mut found, &mut frontier);
        }
        found
    }

    /// Exactly the admissible words of length `len`.
    ///
    /// Every factor of length `len` sits inside `σ^m(ab)` for some admissible
    /// pair `ab` once every `σ^m(c)` has length at least `len - 1`.
    pub fn factors(&self, len: usize) -> Result<BTreeSet<Word>, SubshiftError> {
        if len == 0 || len > MAX_LANGUAGE_LENGTH {
            return Err(SubshiftError::LengthOutOfRange(len));
        }
        if len == 1 {
            return Ok((0..self.letters.len()).map(|a| vec![a as Symbol]).collect());
        }
        let pairs = self.two_letter_factors();
        if len == 2 {
            return Ok(pairs);
        }
        let mut blocks: Vec<Word> = (0..self.letters.len()).map(|a| vec![a as Symbol]).collect();
        while blocks.iter().map(Vec::len).min().unwrap_or(0) < len - 1 {
            blocks = blocks.iter().map(|w| self.apply(w)).collect();
        }
        let mut out = BTreeSet::new();
        for pair in &pairs {
            let mut w = blocks[usize::from(pair[0])].clone();
            w.extend_from_slice(&blocks[usize::from(pair[1])]);
            for f in w.windows(len) {
                out.insert(f.to_vec());
            }
        }
        Ok(out)
    }
}

/// The admissible words of one length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageTable {
    pub length: usize,
    pub words: BTreeSet<Word>,
}

impl LanguageTable {
    pub fn contains(&self, w: &[Symbol]) -> bool {
        self.words.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A substitution together with its two-sided fixed point `p`, generated on
/// `[-horizon, horizon)`. The shift acts by `(Tq)_i = q_{i+1}`.
#[derive(Clone)]
pub struct SubshiftSystem {
    substitution: Substitution,
    config: SubstitutionConfig,
    right_seed: Symbol,
    left_seed: Symbol,
    power: u32,
    horizon: usize,
    buf: Vec<Symbol>,
}

impl fmt::Debug for SubshiftSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubshiftSystem")
            .field("config", &self.config)
            .field("power", &self.power)
            .field("horizon", &self.horizon)
            .finish()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn return_time(start: Symbol, step: impl Fn(Symbol) -> Symbol, bound: usize) -> Option<u32> {
    let mut x = start;
    for k in 1..=bound {
        x = step(x);
        if x == start {
            return Some(k as u32);
        }
    }
    None
}

impl SubshiftSystem {
    pub fn from_config(cfg: &SubstitutionConfig) -> Result<Self, SubshiftError> {
        Self::from_config_with_horizon(cfg, DEFAULT_ORBIT_HORIZON)
    }

    pub fn from_config_with_horizon(
        cfg: &SubstitutionConfig,
        horizon: usize,
    ) -> Result<Self, SubshiftError> {
        let sub = Substitution::from_config(cfg)?;
        let right = sub.parse_word(&cfg.seed[0])?;
        let left = sub.parse_word(&cfg.seed[1])?;
        if right.len() != 1 || left.len() != 1 {
            return Err(SubshiftError::InvalidSeed {
                reason: "seed entries must be single letters".into(),
                suggestions: suggest_seeds(&sub),
            });
        }
        Self::build(sub, cfg.clone(), (right[0], left[0]), horizon)
    }

    pub fn builtin(name: &str) -> Result<Self, SubshiftError> {
        Self::from_config(&SubstitutionConfig::builtin(name)?)
    }

    /// Two-sided fixed point from a `(right, left)` seed with the default horizon.
    pub fn fixed_point(sub: Substitution, seed: (Symbol, Symbol)) -> Result<Self, SubshiftError> {
        Self::fixed_point_with_horizon(sub, seed, DEFAULT_ORBIT_HORIZON)
    }

    pub fn fixed_point_with_horizon(
        sub: Substitution,
        seed: (Symbol, Symbol),
        horizon: usize,
    ) -> Result<Self, SubshiftError> {
        let config = SubstitutionConfig {
            alphabet: sub.letters.iter().map(|c| c.to_string()).collect(),
            rules: sub
                .letters
                .iter()
                .zip(&sub.images)
                .map(|(c, w)| (c.to_string(), sub.format_word(w)))
                .collect(),
            seed: [
                sub.letter(seed.0).to_string(),
                sub.letter(seed.1).to_string(),
            ],
        };
        Self::build(sub, config, seed, horizon)
    }

    fn build(
        sub: Substitution,
        config: SubstitutionConfig,
        (right, left): (Symbol, Symbol),
        horizon: usize,
    ) -> Result<Self, SubshiftError> {
        if sub.alphabet_size() < 2 {
            return Err(SubshiftError::Periodic { period: 1 });
        }
        let k = sub.alphabet_size();
        if usize::from(right) >= k || usize::from(left) >= k {
            return Err(SubshiftError::InvalidSeed {
                reason: "seed letter outside the alphabet".into(),
                suggestions: suggest_seeds(&sub),
            });
        }
        let power = seed_power(&sub, right, left).map_err(|reason| SubshiftError::InvalidSeed {
            reason,
            suggestions: suggest_seeds(&sub),
        })?;
        let mut sys = SubshiftSystem {
            substitution: sub,
            config,
            right_seed: right,
            left_seed: left,
            power,
            horizon: 0,
            buf: Vec::new(),
        };
        sys.extend_horizon(horizon.max(1))?;
        sys.check_aperiodic()?;
        Ok(sys)
    }

    /// Regenerates the point on a larger window. Symbols already generated
    /// never change.
    pub fn extend_horizon(&mut self, horizon: usize) -> Result<(), SubshiftError> {
        if horizon <= self.horizon {
            return Ok(());
        }
        let grow = |seed: Symbol| -> Result<Word, SubshiftError> {
            let mut w = vec![seed];
            let mut rounds = 0;
            while w.len() < horizon {
                let next = self.substitution.iterate(&w, self.power);
                if next.len() <= w.len() {
                    return Err(SubshiftError::InvalidSeed {
                        reason: format!(
                            "iterating on '{}' does not grow",
                            self.substitution.letter(seed)
                        ),
                        suggestions: suggest_seeds(&self.substitution),
                    });
                }
                w = next;
                rounds += 1;
                if rounds > 4096 {
                    return Err(SubshiftError::InvalidSeed {
                        reason: "seed does not stabilise".into(),
                        suggestions: suggest_seeds(&self.substitution),
                    });
                }
            }
            Ok(w)
        };
        let right = grow(self.right_seed)?;
        let left = grow(self.left_seed)?;
        let mut buf = Vec::with_capacity(2 * horizon);
        buf.extend_from_slice(&left[left.len() - horizon..]);
        buf.extend_from_slice(&right[..horizon]);
        if self.horizon > 0 {
            let old = &self.buf;
            let start = horizon - self.horizon;
            debug_assert_eq!(&buf[start..start + old.len()], &old[..]);
        }
        self.buf = buf;
        self.horizon = horizon;
        Ok(())
    }

    fn check_aperiodic(&self) -> Result<(), SubshiftError> {
        let span = self.horizon.min(4 * APERIODICITY_BOUND + 1024);
        let right = &self.buf[self.horizon..self.horizon + span];
        let left = &self.buf[self.horizon - span..self.horizon];
        for half in [right, left] {
            for q in 1..=APERIODICITY_BOUND.min(span / 2) {
                if (0..span - q).all(|i| half[i] == half[i + q]) {
                    return Err(SubshiftError::Periodic { period: q });
                }
            }
        }
        Ok(())
    }

    pub fn substitution(&self) -> &Substitution {
        &self.substitution
    }

    pub fn config(&self) -> &SubstitutionConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Power of the substitution whose fixed point is `p`.
    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn symbol(&self, j: i64) -> Result<Symbol, SubshiftError> {
        Ok(self.factor(j, 1)?[0])
    }

    /// `p[start .. start + len)`.
    pub fn factor(&self, start: i64, len: usize) -> Result<&[Symbol], SubshiftError> {
        let h = self.horizon as i64;
        let end = start + len as i64;
        if start < -h || end > h {
            return Err(SubshiftError::HorizonExceeded {
                lo: start,
                hi: end - 1,
                horizon: self.horizon,
            });
        }
        let s = (start + h) as usize;
        Ok(&self.buf[s..s + len])
    }

    pub fn language(&self, len: usize) -> Result<LanguageTable, SubshiftError> {
        Ok(LanguageTable {
            length: len,
            words: self.substitution.factors(len)?,
        })
    }

    /// Least `R` such that every window of length `R` inside `p[-horizon, horizon)`
    /// contains every admissible word of length `len`.
    pub fn recurrence_bound(&self, len: usize, horizon: usize) -> Result<usize, SubshiftError> {
        let lang = self.language(len)?;
        let region = self.factor(-(horizon as i64), 2 * horizon)?;
        recurrence_in(region, &lang).ok_or(SubshiftError::RecurrenceNotWitnessed {
            length: len,
            horizon_len: region.len(),
        })
    }
}

fn recurrence_in(region: &[Symbol], lang: &LanguageTable) -> Option<usize> {
    let len = lang.length;
    let ids: HashMap<&[Symbol], usize> = lang
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_slice(), i))
        .collect();
    if region.len() < len {
        return None;
    }
    let occ: Vec<usize> = region
        .windows(len)
        .map(|w| *ids.get(w).expect("factor of p outside the language"))
        .collect();
    let need = ids.len();
    // cover[s]: shortest window starting at s containing every word, if any.
    let mut cover = vec![usize::MAX; occ.len()];
    let mut counts = vec![0usize; need];
    let mut have = 0;
    let mut r = 0;
    for s in 0..occ.len() {
        while have < need && r < occ.len() {
            if counts[occ[r]] == 0 {
                have += 1;
            }
            counts[occ[r]] += 1;
            r += 1;
        }
        if have == need {
            cover[s] = r - s + len - 1;
        }
        counts[occ[s]] -= 1;
        if counts[occ[s]] == 0 {
            have -= 1;
        }
    }
    // Window [s, s+R) fits iff s + R <= region.len().
    let mut prefix_max = Vec::with_capacity(cover.len());
    let mut m = 0usize;
    for &c in &cover {
        m = m.max(c);
        prefix_max.push(m);
    }
    (len..=region.len()).find(|&r| {
        let last_start = region.len() - r;
        prefix_max[last_start.min(prefix_max.len() - 1)] <= r
    })
}

fn seed_power(sub: &Substitution, right: Symbol, left: Symbol) -> Result<u32, String> {
    let k = sub.alphabet_size();
    let first = |a: Symbol| sub.image(a)[0];
    let last = |a: Symbol| *sub.image(a).last().unwrap();
    let kr = return_time(right, first, k).ok_or_else(|| {
        format!(
            "no power of the substitution maps '{}' to a word starting with it",
            sub.letter(right)
        )
    })?;
    let kl = return_time(left, last, k).ok_or_else(|| {
        format!(
            "no power of the substitution maps '{}' to a word ending with it",
            sub.letter(left)
        )
    })?;
    let pair = [left, right];
    if !sub.two_letter_factors().contains(&pair[..]) {
        return Err(format!(
            "'{}' is not an admissible factor",
            sub.format_word(&pair)
        ));
    }
    Ok(kr / gcd(kr, kl) * kl)
}

fn suggest_seeds(sub: &Substitution) -> String {
    let k = sub.alphabet_size() as Symbol;
    let mut valid = Vec::new();
    for r in 0..k {
        for l in 0..k {
            if seed_power(sub, r, l).is_ok() {
                valid.push(format!("[{},{}]", sub.letter(r), sub.letter(l)));
            }
        }
    }
    if valid.is_empty() {
        "none".into()
    } else {
        valid.join(" ")
    }
}
