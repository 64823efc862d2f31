//! Elements of the topological full group of a substitution subshift.
//!
//! An element is stored as a locally constant cocycle: a radius `R` and an
//! exponent for every admissible word of length `2R + 1`, so that the element
//! sends `q` to `T^{rule(q[-R..=R])} q`. Bijectivity is certified only at desk
//! scale, on finite windows of the orbit of `p` and by construction for
//! cylinder swaps and their products.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subshift::{SubshiftError, SubshiftSystem, Symbol, Word};
use crate::wobbling::WobblingMap;

/// Window on which [`LocalRuleElement::embed`] re-checks injectivity.
pub const EMBED_CHECK_WINDOW: i64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FullGroupError {
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error("cylinder swap needs a nonempty word")]
    EmptyWord,
    #[error("cylinders [{word}] and T[{word}] overlap: '{overlap}' is admissible")]
    CylindersOverlap { word: String, overlap: String },
    #[error("word '{0}' is not admissible")]
    NotAdmissible(String),
    #[error("rule has no exponent for admissible word '{0}'")]
    IncompleteRule(String),
    #[error("elements act on different systems")]
    SystemMismatch,
    #[error("rule is not a bijection: {0}")]
    NotBijective(String),
}

/// JSON form of an element: `{"radius": R, "rule": {"word": exponent, ...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSpec {
    pub radius: usize,
    pub rule: BTreeMap<String, i64>,
}

#[derive(Debug, Clone)]
pub struct LocalRuleElement {
    system: Arc<SubshiftSystem>,
    radius: usize,
    rule: BTreeMap<Word, i64>,
    exponent_bound: u64,
}

impl LocalRuleElement {
    fn from_parts(system: Arc<SubshiftSystem>, radius: usize, rule: BTreeMap<Word, i64>) -> Self {
        let exponent_bound = rule.values().map(|e| e.unsigned_abs()).max().unwrap_or(0);
        LocalRuleElement {
            system,
            radius,
            rule,
            exponent_bound,
        }
    }

    /// `T^e` everywhere.
    pub fn shift_power(system: &Arc<SubshiftSystem>, e: i64) -> Self {
        let rule = (0..system.substitution().alphabet_size())
            .map(|a| (vec![a as Symbol], e))
            .collect();
        Self::from_parts(system.clone(), 0, rule)
    }

    pub fn identity(system: &Arc<SubshiftSystem>) -> Self {
        Self::shift_power(system, 0)
    }

    /// The involution acting as `T` on the cylinder `[w]` (at position 0), as
    /// `T^-1` on `T[w]`, and trivially elsewhere. Radius `|w|`.
    pub fn cylinder_swap(system: &Arc<SubshiftSystem>, w: &[Symbol]) -> Result<Self, FullGroupError> {
        if w.is_empty() {
            return Err(FullGroupError::EmptyWord);
        }
        let sub = system.substitution();
        let len = w.len();
        if !system.language(len)?.contains(w) {
            return Err(FullGroupError::NotAdmissible(sub.format_word(w)));
        }
        // q in [w] ∩ T[w] iff q[-1..len) has w at offsets 0 and 1.
        for u in &system.language(len + 1)?.words {
            if &u[..len] == w && &u[1..] == w {
                return Err(FullGroupError::CylindersOverlap {
                    word: sub.format_word(w),
                    overlap: sub.format_word(u),
                });
            }
        }
        let radius = len;
        let rule = system
            .language(2 * radius + 1)?
            .words
            .into_iter()
            .map(|u| {
                // u[radius] is position 0.
                let e = if u[radius..radius + len] == *w {
                    1
                } else if u[radius - 1..radius - 1 + len] == *w {
                    -1
                } else {
                    0
                };
                (u, e)
            })
            .collect();
        Ok(Self::from_parts(system.clone(), radius, rule))
    }

    /// Cylinder swap from the word's textual form.
    pub fn swap(system: &Arc<SubshiftSystem>, word: &str) -> Result<Self, FullGroupError> {
        let w = system.substitution().parse_word(word)?;
        Self::cylinder_swap(system, &w)
    }

    /// Builds an element from an explicit rule; every admissible word of
    /// length `2R + 1` needs an exponent and no other word may appear.
    pub fn from_rule(
        system: &Arc<SubshiftSystem>,
        radius: usize,
        rule: BTreeMap<Word, i64>,
    ) -> Result<Self, FullGroupError> {
        let lang = system.language(2 * radius + 1)?;
        let sub = system.substitution();
        if let Some(w) = rule.keys().find(|w| !lang.contains(w)) {
            return Err(FullGroupError::NotAdmissible(sub.format_word(w)));
        }
        if let Some(w) = lang.words.iter().find(|w| !rule.contains_key(*w)) {
            return Err(FullGroupError::IncompleteRule(sub.format_word(w)));
        }
        Ok(Self::from_parts(system.clone(), radius, rule))
    }

    pub fn from_spec(system: &Arc<SubshiftSystem>, spec: &ElementSpec) -> Result<Self, FullGroupError> {
        let sub = system.substitution();
        let rule = spec
            .rule
            .iter()
            .map(|(w, e)| Ok((sub.parse_word(w)?, *e)))
            .collect::<Result<_, SubshiftError>>()?;
        Self::from_rule(system, spec.radius, rule)
    }

    pub fn to_spec(&self) -> ElementSpec {
        let sub = self.system.substitution();
        ElementSpec {
            radius: self.radius,
            rule: self
                .rule
                .iter()
                .map(|(w, e)| (sub.format_word(w), *e))
                .collect(),
        }
    }

    pub fn system(&self) -> &Arc<SubshiftSystem> {
        &self.system
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn exponent_bound(&self) -> u64 {
        self.exponent_bound
    }

    pub fn rule(&self) -> &BTreeMap<Word, i64> {
        &self.rule
    }

    pub fn is_identity(&self) -> bool {
        self.rule.values().all(|&e| e == 0)
    }

    /// Exponent for the word `word` read around its centre.
    fn exponent_of(&self, word: &[Symbol]) -> Option<i64> {
        self.rule.get(word).copied()
    }

    /// Exponent applied at orbit position `j`, read from `p[j-R..=j+R]`.
    pub fn exponent_at(&self, j: i64) -> Result<i64, SubshiftError> {
        let r = self.radius as i64;
        let w = self.system.factor(j - r, 2 * self.radius + 1)?;
        Ok(self
            .exponent_of(w)
            .expect("factor of p outside the language of its subshift"))
    }

    /// Exponent read at offset `center` inside a longer admissible word.
    fn exponent_in(&self, word: &[Symbol], center: usize) -> i64 {
        let w = &word[center - self.radius..=center + self.radius];
        self.exponent_of(w).expect("subword of an admissible word")
    }

    /// Same action, written with a larger radius.
    pub fn expand_to(&self, radius: usize) -> Result<Self, FullGroupError> {
        if radius <= self.radius {
            return Ok(self.clone());
        }
        let rule = self
            .system
            .language(2 * radius + 1)?
            .words
            .into_iter()
            .map(|u| {
                let e = self.exponent_in(&u, radius);
                (u, e)
            })
            .collect();
        Ok(Self::from_parts(self.system.clone(), radius, rule))
    }

    /// Shrinks the radius while the rule ignores its outermost letters.
    pub fn simplify(mut self) -> Result<Self, FullGroupError> {
        while self.radius > 0 {
            let mut inner: BTreeMap<Word, i64> = BTreeMap::new();
            let consistent = self.rule.iter().all(|(w, &e)| {
                let core = w[1..w.len() - 1].to_vec();
                *inner.entry(core).or_insert(e) == e
            });
            if !consistent {
                break;
            }
            self = Self::from_parts(self.system.clone(), self.radius - 1, inner);
        }
        Ok(self)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &LocalRuleElement) -> Result<Self, FullGroupError> {
        if !Arc::ptr_eq(&self.system, &other.system) {
            return Err(FullGroupError::SystemMismatch);
        }
        let kb = other.exponent_bound as usize;
        let radius = other.radius.max(self.radius + kb);
        let rule = self
            .system
            .language(2 * radius + 1)?
            .words
            .into_iter()
            .map(|u| {
                let eb = other.exponent_in(&u, radius);
                let ea = self.exponent_in(&u, (radius as i64 + eb) as usize);
                (u, ea + eb)
            })
            .collect();
        Self::from_parts(self.system.clone(), radius, rule).simplify()
    }

    pub fn invert(&self) -> Result<Self, FullGroupError> {
        let k = self.exponent_bound as i64;
        let radius = self.radius + self.exponent_bound as usize;
        let sub = self.system.substitution();
        let mut rule = BTreeMap::new();
        for u in self.system.language(2 * radius + 1)?.words {
            let c = radius as i64;
            let mut hits = (-k..=k).filter(|&e| self.exponent_in(&u, (c - e) as usize) == e);
            let e = hits.next().ok_or_else(|| {
                FullGroupError::NotBijective(format!("no preimage for '{}'", sub.format_word(&u)))
            })?;
            if hits.next().is_some() {
                return Err(FullGroupError::NotBijective(format!(
                    "two preimages for '{}'",
                    sub.format_word(&u)
                )));
            }
            rule.insert(u, -e);
        }
        Self::from_parts(self.system.clone(), radius, rule).simplify()
    }

    /// `a b a^-1 b^-1`.
    pub fn commutator(&self, other: &LocalRuleElement) -> Result<Self, FullGroupError> {
        self.compose(other)?
            .compose(&self.invert()?)?
            .compose(&other.invert()?)
    }

    /// Same action as `other` on the whole subshift.
    pub fn same_action(&self, other: &LocalRuleElement) -> Result<bool, FullGroupError> {
        let r = self.radius.max(other.radius);
        Ok(self.expand_to(r)?.rule == other.expand_to(r)?.rule)
    }

    /// True iff `j -> j + rule(p[j-R..=j+R])` is well defined and injective on
    /// `[-window, window]`.
    pub fn verify(&self, window: i64) -> Result<bool, SubshiftError> {
        let r = self.radius as i64;
        let mut images = HashSet::with_capacity((2 * window + 1) as usize);
        for j in -window..=window {
            let w = self.system.factor(j - r, 2 * self.radius + 1)?;
            let Some(e) = self.exponent_of(w) else {
                return Ok(false);
            };
            if !images.insert(j + e) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The image under `π_p`: `j -> j + rule(p[j-R..=j+R])`, so that
    /// `g(T^j p) = T^{π_p(g)(j)} p`. Checked with [`Self::verify`] first.
    pub fn embed(&self) -> Result<WobblingMap, FullGroupError> {
        let slack = (self.radius as i64) + 1;
        let window = EMBED_CHECK_WINDOW.min(self.system.horizon() as i64 - slack);
        if !self.verify(window)? {
            return Err(FullGroupError::NotBijective(format!(
                "not injective on [-{window}, {window}]"
            )));
        }
        Ok(WobblingMap::from_element(Arc::new(self.clone())))
    }
}
