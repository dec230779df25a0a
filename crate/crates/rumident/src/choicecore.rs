//! Core domain types of stochastic choice and the elementary maps on them.
//!
//! The objects here are deliberately small and string-keyed:
//!
//! * a [`Universe`] is a sorted set of single-character alternative labels;
//! * a [`Preference`] is a strict linear order, stored as its descending
//!   ranking string (`"abcd"` means `a ≻ b ≻ c ≻ d`);
//! * a [`Menu`] is a nonempty subset, keyed by its sorted member string;
//! * a [`SignedMeasure`] assigns exact rational mass to preferences, with a
//!   [`Distribution`] being the validated nonnegative/unit-mass sub-type;
//! * a [`ChoiceRule`] holds exact choice probabilities per (alternative,
//!   menu) pair, for every menu it covers.
//!
//! On top of these sit the choice-probability map [`phi`], observational
//! equivalence [`obs_equiv`], the compatibility predicates
//! [`k_compatible`] / [`nontrivially_k_compatible`], and segment exchange
//! [`conjugates`]. Two preferences are `k`-compatible when they agree on the
//! *set* of their `k` best alternatives; their conjugates swap everything
//! below rank `k`. These four operations carry the entire identification
//! theory implemented by the rest of the crate.
//!
//! Canonical key order (lexicographic over ranking/menu strings) is used by
//! every iterator, so all outputs are deterministic and JSON goldens are
//! byte-stable.

use crate::linalg::Rational;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Default upper bound on universe size; `|L| = |X|!` growth makes larger
/// universes impractical for the exhaustive operations, so anything bigger
/// must be requested explicitly via [`Universe::with_cap`].
pub const DEFAULT_UNIVERSE_CAP: usize = 8;

/// A single alternative, identified by its one-character label.
pub type Alternative = char;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceError {
    /// An alternative label is not a single ASCII alphanumeric character.
    #[error("bad alternative label {0:?}: labels are single ASCII alphanumeric characters")]
    BadLabel(String),
    /// The same label appeared twice in a universe.
    #[error("duplicate alternative {0:?} in universe")]
    DuplicateLabel(char),
    /// The universe is empty.
    #[error("universe must contain at least one alternative")]
    EmptyUniverse,
    /// The universe exceeds the size cap.
    #[error("universe size {size} exceeds cap {cap}; raise the cap explicitly to proceed")]
    UniverseTooLarge {
        /// Requested size.
        size: usize,
        /// Effective cap.
        cap: usize,
    },
    /// A ranking string is not a permutation of the universe.
    #[error("ranking {0:?} is not a permutation of the universe")]
    NotAPermutation(String),
    /// A menu was empty.
    #[error("menus must be nonempty")]
    EmptyMenu,
    /// A label does not belong to the universe.
    #[error("alternative {0:?} is not in the universe")]
    NotInUniverse(char),
    /// Mixed-universe operation.
    #[error("operands are defined over different universes")]
    UniverseMismatch,
    /// A distribution had a negative mass entry.
    #[error("negative mass {mass} on preference {pref:?} in a probability distribution")]
    NegativeMass {
        /// The offending preference key.
        pref: String,
        /// Its mass.
        mass: Rational,
    },
    /// A distribution's total mass was not one.
    #[error("distribution mass sums to {0}, expected 1")]
    BadTotalMass(Rational),
    /// A choice probability was outside `[0, 1]`.
    #[error("probability {prob} for alternative {alt:?} in menu {menu:?} is outside [0, 1]")]
    BadProbability {
        /// The menu key.
        menu: String,
        /// The alternative.
        alt: char,
        /// The offending value.
        prob: Rational,
    },
    /// A menu's probabilities did not sum to one.
    #[error("probabilities for menu {menu:?} sum to {total}, expected 1")]
    BadMenuSum {
        /// The menu key.
        menu: String,
        /// The row sum.
        total: Rational,
    },
    /// A rule row mentions an alternative outside its menu.
    #[error("menu {menu:?} row assigns probability to non-member {alt:?}")]
    EntryOutsideMenu {
        /// The menu key.
        menu: String,
        /// The offending alternative.
        alt: char,
    },
    /// A rule is missing a row for some alternative in a covered menu.
    #[error("menu {menu:?} row is missing an entry for member {alt:?}")]
    MissingEntry {
        /// The menu key.
        menu: String,
        /// The missing alternative.
        alt: char,
    },
    /// A rule does not cover a required menu.
    #[error("choice rule does not cover menu {0:?}")]
    MissingMenu(String),
    /// Conjugation of a non-compatible pair was requested.
    #[error("preferences {p:?} and {q:?} are not {k}-compatible")]
    NotCompatible {
        /// First preference key.
        p: String,
        /// Second preference key.
        q: String,
        /// The level at which compatibility failed.
        k: usize,
    },
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

// ---------------------------------------------------------------------------
// Universe
// ---------------------------------------------------------------------------

/// The fixed, finite set of alternatives, stored sorted by label.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Universe {
    alts: Vec<char>,
}

impl Universe {
    /// Builds a universe from labels, enforcing the default size cap.
    pub fn new(labels: &[char]) -> Result<Self, ChoiceError> {
        Self::with_cap(labels, DEFAULT_UNIVERSE_CAP)
    }

    /// Builds a universe with an explicit size cap (for callers that
    /// knowingly accept factorial blow-up).
    pub fn with_cap(labels: &[char], cap: usize) -> Result<Self, ChoiceError> {
        if labels.is_empty() {
            return Err(ChoiceError::EmptyUniverse);
        }
        if labels.len() > cap {
            return Err(ChoiceError::UniverseTooLarge {
                size: labels.len(),
                cap,
            });
        }
        let mut alts: Vec<char> = Vec::with_capacity(labels.len());
        for &c in labels {
            if !c.is_ascii_alphanumeric() {
                return Err(ChoiceError::BadLabel(c.to_string()));
            }
            alts.push(c);
        }
        alts.sort_unstable();
        if let Some(w) = alts.windows(2).find(|w| w[0] == w[1]) {
            return Err(ChoiceError::DuplicateLabel(w[0]));
        }
        Ok(Universe { alts })
    }

    /// Parses the `"alternatives"` list of a JSON document (each entry a
    /// one-character string).
    pub fn from_labels(labels: &[String], cap: usize) -> Result<Self, ChoiceError> {
        let chars: Vec<char> = labels
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(ChoiceError::BadLabel(s.clone())),
                }
            })
            .collect::<Result<_, _>>()?;
        Self::with_cap(&chars, cap)
    }

    /// Number of alternatives.
    pub fn size(&self) -> usize {
        self.alts.len()
    }

    /// The alternatives in sorted label order.
    pub fn alts(&self) -> &[char] {
        &self.alts
    }

    /// Membership test.
    pub fn contains(&self, a: char) -> bool {
        self.alts.binary_search(&a).is_ok()
    }

    /// Position of `a` in sorted label order.
    pub fn index_of(&self, a: char) -> Option<usize> {
        self.alts.binary_search(&a).ok()
    }

    /// The label list as JSON-ready strings.
    pub fn labels(&self) -> Vec<String> {
        self.alts.iter().map(char::to_string).collect()
    }

    /// The grand menu `X`.
    pub fn full_menu(&self) -> Menu {
        Menu {
            key: self.alts.iter().collect(),
        }
    }

    /// Every nonempty menu, in lexicographic key order.
    pub fn all_menus(&self) -> Vec<Menu> {
        let n = self.alts.len();
        let mut menus = Vec::with_capacity((1usize << n) - 1);
        for mask in 1u32..(1u32 << n) {
            let key: String = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| self.alts[i])
                .collect();
            menus.push(Menu { key });
        }
        menus.sort();
        menus
    }

    /// Every preference (all `|X|!` rankings), in lexicographic key order.
    pub fn all_preferences(&self) -> Vec<Preference> {
        let mut out = Vec::new();
        let mut current = String::with_capacity(self.alts.len());
        let mut used = vec![false; self.alts.len()];
        fn rec(
            alts: &[char],
            used: &mut [bool],
            current: &mut String,
            out: &mut Vec<Preference>,
        ) {
            if current.len() == alts.len() {
                out.push(Preference {
                    key: current.clone(),
                });
                return;
            }
            for i in 0..alts.len() {
                if !used[i] {
                    used[i] = true;
                    current.push(alts[i]);
                    rec(alts, used, current, out);
                    current.pop();
                    used[i] = false;
                }
            }
        }
        rec(&self.alts, &mut used, &mut current, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Preference
// ---------------------------------------------------------------------------

/// A strict linear order over a universe, keyed by its descending ranking
/// string: `"abdc"` ranks `a` first and `c` last.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Preference {
    key: String,
}

impl Preference {
    /// Validates a ranking string against a universe.
    pub fn new(ranking: &str, universe: &Universe) -> Result<Self, ChoiceError> {
        let mut sorted: Vec<char> = ranking.chars().collect();
        sorted.sort_unstable();
        if sorted != universe.alts() {
            return Err(ChoiceError::NotAPermutation(ranking.to_owned()));
        }
        Ok(Preference {
            key: ranking.to_owned(),
        })
    }

    /// The canonical descending ranking string.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Number of alternatives ranked.
    pub fn len(&self) -> usize {
        self.key.len()
    }

    /// True iff the ranking is empty (never holds for validated values).
    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }

    /// The alternative at 0-based rank `i` (rank 0 is the most preferred).
    pub fn alt_at_rank(&self, i: usize) -> char {
        self.key.as_bytes()[i] as char
    }

    /// 0-based rank of `a`.
    ///
    /// # Panics
    /// Panics when `a` is not ranked; preferences are full orders over
    /// their universe, so this indicates mixed universes.
    pub fn rank_of(&self, a: char) -> usize {
        self.key
            .find(a)
            .unwrap_or_else(|| panic!("alternative {a:?} not ranked by {:?}", self.key))
    }

    /// The `k` best alternatives in ranking order (the initial segment).
    pub fn top_segment(&self, k: usize) -> &str {
        &self.key[..k]
    }

    /// Everything below rank `k`, in ranking order (the terminal segment).
    pub fn bottom_segment(&self, k: usize) -> &str {
        &self.key[k..]
    }

    /// The *set* of the `k` best alternatives.
    pub fn top_set(&self, k: usize) -> BTreeSet<char> {
        self.key[..k].chars().collect()
    }

    /// True iff `x` is ranked strictly above `y`.
    pub fn prefers(&self, x: char, y: char) -> bool {
        self.rank_of(x) < self.rank_of(y)
    }

    /// The most preferred member of `menu`.
    pub fn best_in(&self, menu: &Menu) -> char {
        self.key
            .chars()
            .find(|&c| menu.contains(c))
            .expect("menu is a nonempty subset of the preference's universe")
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

impl fmt::Debug for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "≻{}", self.key)
    }
}

// ---------------------------------------------------------------------------
// Menu
// ---------------------------------------------------------------------------

/// A nonempty subset of the universe, keyed by its sorted member string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Menu {
    key: String,
}

impl Menu {
    /// Validates a member string (any order, duplicates rejected) against a
    /// universe and canonicalizes it to sorted form.
    pub fn new(members: &str, universe: &Universe) -> Result<Self, ChoiceError> {
        if members.is_empty() {
            return Err(ChoiceError::EmptyMenu);
        }
        let mut chars: Vec<char> = members.chars().collect();
        chars.sort_unstable();
        if let Some(w) = chars.windows(2).find(|w| w[0] == w[1]) {
            return Err(ChoiceError::DuplicateLabel(w[0]));
        }
        for &c in &chars {
            if !universe.contains(c) {
                return Err(ChoiceError::NotInUniverse(c));
            }
        }
        Ok(Menu {
            key: chars.into_iter().collect(),
        })
    }

    /// The canonical sorted member string.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.key.len()
    }

    /// True iff the menu is empty (never holds for validated values).
    pub fn is_empty(&self) -> bool {
        self.key.is_empty()
    }

    /// Membership test.
    pub fn contains(&self, a: char) -> bool {
        self.key.contains(a)
    }

    /// Members in sorted order.
    pub fn members(&self) -> impl Iterator<Item = char> + '_ {
        self.key.chars()
    }
}

impl fmt::Display for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

impl fmt::Debug for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key)
    }
}

// ---------------------------------------------------------------------------
// Measures and distributions
// ---------------------------------------------------------------------------

/// JSON document shape shared by signed measures and distributions.
#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    alternatives: Vec<String>,
    mass: BTreeMap<String, Rational>,
}

/// An exact-rational mass function over preferences with finite support.
/// Masses may be negative; zero entries are pruned so equality and JSON
/// output are canonical.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignedMeasure {
    universe: Universe,
    mass: BTreeMap<Preference, Rational>,
}

impl SignedMeasure {
    /// The zero measure.
    pub fn zero(universe: Universe) -> Self {
        SignedMeasure {
            universe,
            mass: BTreeMap::new(),
        }
    }

    /// Builds a measure from `(ranking, mass)` pairs; repeated rankings
    /// accumulate.
    pub fn from_entries<I>(universe: Universe, entries: I) -> Result<Self, ChoiceError>
    where
        I: IntoIterator<Item = (String, Rational)>,
    {
        let mut m = SignedMeasure::zero(universe);
        for (key, mass) in entries {
            let pref = Preference::new(&key, &m.universe)?;
            m.add_mass(&pref, mass);
        }
        Ok(m)
    }

    /// The universe this measure lives on.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The mass of `p` (zero when unsupported).
    pub fn mass(&self, p: &Preference) -> Rational {
        self.mass.get(p).cloned().unwrap_or_else(Rational::zero)
    }

    /// Adds `delta` to the mass of `p`, pruning the entry if it cancels.
    pub fn add_mass(&mut self, p: &Preference, delta: Rational) {
        let new = self.mass(p) + delta;
        if new.is_zero() {
            self.mass.remove(p);
        } else {
            self.mass.insert(p.clone(), new);
        }
    }

    /// Support entries in lexicographic key order.
    pub fn entries(&self) -> impl Iterator<Item = (&Preference, &Rational)> {
        self.mass.iter()
    }

    /// The supported preferences in lexicographic key order.
    pub fn support(&self) -> Vec<Preference> {
        self.mass.keys().cloned().collect()
    }

    /// Total mass.
    pub fn total(&self) -> Rational {
        self.mass.values().sum()
    }

    /// True iff the measure is identically zero.
    pub fn is_zero(&self) -> bool {
        self.mass.is_empty()
    }

    /// Entrywise difference `self − other`.
    ///
    /// # Panics
    /// Panics on mixed universes.
    pub fn sub(&self, other: &SignedMeasure) -> SignedMeasure {
        assert_eq!(
            self.universe, other.universe,
            "measure subtraction across universes"
        );
        let mut out = self.clone();
        for (p, v) in other.entries() {
            out.add_mass(p, -v);
        }
        out
    }

    /// Entrywise sum `self + scale · other`.
    ///
    /// # Panics
    /// Panics on mixed universes.
    pub fn add_scaled(&self, other: &SignedMeasure, scale: &Rational) -> SignedMeasure {
        assert_eq!(
            self.universe, other.universe,
            "measure addition across universes"
        );
        let mut out = self.clone();
        for (p, v) in other.entries() {
            out.add_mass(p, scale * v);
        }
        out
    }

    /// Serializes to the measure document shape.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = MeasureDoc {
            alternatives: self.universe.labels(),
            mass: self
                .mass
                .iter()
                .map(|(p, v)| (p.key().to_owned(), v.clone()))
                .collect(),
        };
        serde_json::to_value(doc).expect("measure docs always serialize")
    }

    /// Parses the measure document shape.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ChoiceError> {
        let doc: MeasureDoc = serde_json::from_value(value.clone())
            .map_err(|e| ChoiceError::BadDocument(e.to_string()))?;
        let universe = Universe::from_labels(&doc.alternatives, cap)?;
        SignedMeasure::from_entries(universe, doc.mass)
    }
}

/// A probability distribution over preferences: a [`SignedMeasure`] with
/// nonnegative masses summing to exactly one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Distribution {
    measure: SignedMeasure,
}

impl Distribution {
    /// Validates a signed measure as a distribution.
    pub fn from_measure(measure: SignedMeasure) -> Result<Self, ChoiceError> {
        for (p, v) in measure.entries() {
            if v.is_negative() {
                return Err(ChoiceError::NegativeMass {
                    pref: p.key().to_owned(),
                    mass: v.clone(),
                });
            }
        }
        let total = measure.total();
        if total != Rational::one() {
            return Err(ChoiceError::BadTotalMass(total));
        }
        Ok(Distribution { measure })
    }

    /// Builds a distribution from `(ranking, mass)` pairs.
    pub fn from_entries<I>(universe: Universe, entries: I) -> Result<Self, ChoiceError>
    where
        I: IntoIterator<Item = (String, Rational)>,
    {
        Self::from_measure(SignedMeasure::from_entries(universe, entries)?)
    }

    /// The uniform distribution over a nonempty preference list (repeats
    /// accumulate, as with sequences elsewhere).
    pub fn uniform(universe: Universe, prefs: &[Preference]) -> Result<Self, ChoiceError> {
        assert!(!prefs.is_empty(), "uniform distribution over empty list");
        let share = Rational::one() / Rational::from_int(prefs.len() as i64);
        let mut m = SignedMeasure::zero(universe);
        for p in prefs {
            m.add_mass(p, share.clone());
        }
        Self::from_measure(m)
    }

    /// Point mass on a single preference.
    pub fn degenerate(universe: Universe, pref: Preference) -> Result<Self, ChoiceError> {
        let mut m = SignedMeasure::zero(universe);
        m.add_mass(&pref, Rational::one());
        Self::from_measure(m)
    }

    /// Read-only view of the underlying measure.
    pub fn as_measure(&self) -> &SignedMeasure {
        &self.measure
    }

    /// The universe this distribution lives on.
    pub fn universe(&self) -> &Universe {
        self.measure.universe()
    }

    /// The mass of `p` (zero when unsupported).
    pub fn mass(&self, p: &Preference) -> Rational {
        self.measure.mass(p)
    }

    /// Support entries in lexicographic key order.
    pub fn entries(&self) -> impl Iterator<Item = (&Preference, &Rational)> {
        self.measure.entries()
    }

    /// The supported preferences in lexicographic key order.
    pub fn support(&self) -> Vec<Preference> {
        self.measure.support()
    }

    /// Serializes to the measure document shape.
    pub fn to_json(&self) -> serde_json::Value {
        self.measure.to_json()
    }

    /// Parses and validates the measure document shape.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ChoiceError> {
        Self::from_measure(SignedMeasure::from_json(value, cap)?)
    }
}

// ---------------------------------------------------------------------------
// Choice rules
// ---------------------------------------------------------------------------

/// JSON document shape for choice rules.
#[derive(Serialize, Deserialize)]
struct RuleDoc {
    alternatives: Vec<String>,
    probabilities: BTreeMap<String, BTreeMap<String, Rational>>,
}

/// Exact choice probabilities indexed by (alternative, menu), for every menu
/// the rule covers.
///
/// A rule over the full menu lattice is *complete*; rules over a declared
/// menu collection (the limited-observability setting) cover only those
/// menus. Each covered menu stores a probability for every member (zeros
/// included), the row sums to exactly one, and no entry may reference a
/// non-member.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChoiceRule {
    universe: Universe,
    probs: BTreeMap<Menu, BTreeMap<char, Rational>>,
}

impl ChoiceRule {
    /// Builds a rule from per-menu rows, validating every invariant.
    pub fn from_rows(
        universe: Universe,
        rows: BTreeMap<Menu, BTreeMap<char, Rational>>,
    ) -> Result<Self, ChoiceError> {
        for (menu, row) in &rows {
            for (&alt, prob) in row {
                if !menu.contains(alt) {
                    return Err(ChoiceError::EntryOutsideMenu {
                        menu: menu.key().to_owned(),
                        alt,
                    });
                }
                if prob.is_negative() || *prob > Rational::one() {
                    return Err(ChoiceError::BadProbability {
                        menu: menu.key().to_owned(),
                        alt,
                        prob: prob.clone(),
                    });
                }
            }
            for alt in menu.members() {
                if !row.contains_key(&alt) {
                    return Err(ChoiceError::MissingEntry {
                        menu: menu.key().to_owned(),
                        alt,
                    });
                }
            }
            let total: Rational = row.values().sum();
            if total != Rational::one() {
                return Err(ChoiceError::BadMenuSum {
                    menu: menu.key().to_owned(),
                    total,
                });
            }
        }
        Ok(ChoiceRule { universe, probs: rows })
    }

    /// The universe this rule lives on.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The covered menus in lexicographic key order.
    pub fn menus(&self) -> impl Iterator<Item = &Menu> {
        self.probs.keys()
    }

    /// The probability of choosing `a` from `menu`, or `None` when the menu
    /// is not covered. Non-members have probability zero by convention.
    pub fn get(&self, a: char, menu: &Menu) -> Option<Rational> {
        let row = self.probs.get(menu)?;
        Some(if menu.contains(a) {
            row[&a].clone()
        } else {
            Rational::zero()
        })
    }

    /// The probability of choosing `a` from `menu`.
    ///
    /// # Panics
    /// Panics when the menu is not covered; use [`ChoiceRule::get`] for
    /// possibly-partial rules.
    pub fn prob(&self, a: char, menu: &Menu) -> Rational {
        self.get(a, menu)
            .unwrap_or_else(|| panic!("choice rule does not cover menu {:?}", menu.key()))
    }

    /// Checks the rule covers every nonempty menu of its universe, returning
    /// the first missing menu otherwise.
    pub fn check_complete(&self) -> Result<(), ChoiceError> {
        for menu in self.universe.all_menus() {
            if !self.probs.contains_key(&menu) {
                return Err(ChoiceError::MissingMenu(menu.key().to_owned()));
            }
        }
        Ok(())
    }

    /// Serializes to the rule document shape.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = RuleDoc {
            alternatives: self.universe.labels(),
            probabilities: self
                .probs
                .iter()
                .map(|(menu, row)| {
                    (
                        menu.key().to_owned(),
                        row.iter()
                            .map(|(a, v)| (a.to_string(), v.clone()))
                            .collect(),
                    )
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("rule docs always serialize")
    }

    /// Parses and validates the rule document shape.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ChoiceError> {
        let doc: RuleDoc = serde_json::from_value(value.clone())
            .map_err(|e| ChoiceError::BadDocument(e.to_string()))?;
        let universe = Universe::from_labels(&doc.alternatives, cap)?;
        let mut rows = BTreeMap::new();
        for (menu_key, row) in doc.probabilities {
            let menu = Menu::new(&menu_key, &universe)?;
            let mut parsed = BTreeMap::new();
            for (alt_key, prob) in row {
                let mut it = alt_key.chars();
                let alt = match (it.next(), it.next()) {
                    (Some(c), None) => c,
                    _ => return Err(ChoiceError::BadLabel(alt_key)),
                };
                parsed.insert(alt, prob);
            }
            rows.insert(menu, parsed);
        }
        ChoiceRule::from_rows(universe, rows)
    }
}

// ---------------------------------------------------------------------------
// The choice-probability map and its relatives
// ---------------------------------------------------------------------------

/// Raw per-menu table produced by the linear extension of the choice-probability
/// map to signed measures; not necessarily a valid [`ChoiceRule`].
pub type MenuTable = BTreeMap<Menu, BTreeMap<char, Rational>>;

/// Linear extension of the choice-probability map to signed measures: for
/// each menu `A` and member `x`, sums the mass of every preference ranking
/// `x` above the rest of `A`. The result is a valid choice rule exactly when
/// the input is a distribution.
pub fn phi_table(m: &SignedMeasure) -> MenuTable {
    let mut table: MenuTable = BTreeMap::new();
    for menu in m.universe().all_menus() {
        let mut row: BTreeMap<char, Rational> =
            menu.members().map(|a| (a, Rational::zero())).collect();
        for (pref, mass) in m.entries() {
            let best = pref.best_in(&menu);
            let cell = row.get_mut(&best).expect("best_in returns a member");
            *cell = &*cell + mass;
        }
        table.insert(menu, row);
    }
    table
}

/// The choice-probability map: the complete choice rule generated by a
/// distribution over preferences, `ρ(x, A) = Σ_≻ μ(≻)·1{x best in A}`.
pub fn phi(mu: &Distribution) -> ChoiceRule {
    let table = phi_table(mu.as_measure());
    ChoiceRule::from_rows(mu.universe().clone(), table)
        .expect("phi of a distribution is always a valid rule")
}

/// Observational equivalence: exact entrywise equality of the generated
/// choice rules on every menu. Distributions over different universes are
/// never equivalent.
pub fn obs_equiv(mu: &Distribution, nu: &Distribution) -> bool {
    mu.universe() == nu.universe() && phi(mu) == phi(nu)
}

/// True iff `p` and `q` agree on the *set* of their `k` best alternatives.
/// Every pair is vacuously 0-compatible and, being full rankings of the same
/// universe, `|X|`- and `(|X|−1)`-compatible.
///
/// # Panics
/// Panics when `k` exceeds the ranking length (a programming error, not an
/// input condition).
pub fn k_compatible(p: &Preference, q: &Preference, k: usize) -> bool {
    assert!(
        k <= p.len() && k <= q.len(),
        "compatibility level {k} exceeds ranking length"
    );
    p.top_set(k) == q.top_set(k)
}

/// True iff `p` and `q` are `k`-compatible *and* the exchange below rank `k`
/// actually produces new preferences: the pair must disagree both on the
/// ranking of the top-`k` set and on the ranking of the rest. (This forces
/// `2 ≤ k ≤ |X| − 2`, so universes with three or fewer alternatives admit no
/// nontrivial compatibility.)
pub fn nontrivially_k_compatible(p: &Preference, q: &Preference, k: usize) -> bool {
    k_compatible(p, q, k) && p.top_segment(k) != q.top_segment(k)
        && p.bottom_segment(k) != q.bottom_segment(k)
}

/// The `k`-conjugates of a `k`-compatible pair: each keeps its own top-`k`
/// ranking and adopts the other's ranking of everything below,
/// `(s↑k(p)·s↓k(q), s↑k(q)·s↓k(p))`.
pub fn conjugates(
    p: &Preference,
    q: &Preference,
    k: usize,
) -> Result<(Preference, Preference), ChoiceError> {
    if !k_compatible(p, q, k) {
        return Err(ChoiceError::NotCompatible {
            p: p.key().to_owned(),
            q: q.key().to_owned(),
            k,
        });
    }
    let first = format!("{}{}", p.top_segment(k), q.bottom_segment(k));
    let second = format!("{}{}", q.top_segment(k), p.bottom_segment(k));
    Ok((Preference { key: first }, Preference { key: second }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    pub(crate) fn abcd_universe() -> Universe {
        Universe::new(&['a', 'b', 'c', 'd']).unwrap()
    }

    fn pref(u: &Universe, key: &str) -> Preference {
        Preference::new(key, u).unwrap()
    }

    /// The running four-preference example: masses 1/4, 1/4, 3/8, 1/8 on
    /// abcd, badc, abdc, bacd.
    fn running_example(u: &Universe) -> Distribution {
        Distribution::from_entries(
            u.clone(),
            vec![
                ("abcd".into(), r(1, 4)),
                ("badc".into(), r(1, 4)),
                ("abdc".into(), r(3, 8)),
                ("bacd".into(), r(1, 8)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn universe_sorts_validates_and_caps() {
        let u = Universe::new(&['d', 'b', 'a', 'c']).unwrap();
        assert_eq!(u.alts(), &['a', 'b', 'c', 'd']);
        assert!(Universe::new(&['a', 'a']).is_err());
        assert!(Universe::new(&[]).is_err());
        assert!(Universe::new(&['a', '!']).is_err());
        let nine: Vec<char> = "abcdefghi".chars().collect();
        assert!(matches!(
            Universe::new(&nine),
            Err(ChoiceError::UniverseTooLarge { size: 9, cap: 8 })
        ));
        assert!(Universe::with_cap(&nine, 9).is_ok());
    }

    #[test]
    fn preference_requires_permutation() {
        let u = abcd_universe();
        assert!(Preference::new("abcd", &u).is_ok());
        assert!(Preference::new("abca", &u).is_err());
        assert!(Preference::new("abc", &u).is_err());
        assert!(Preference::new("abce", &u).is_err());
    }

    #[test]
    fn preference_segments_and_queries() {
        let u = abcd_universe();
        let p = pref(&u, "badc");
        assert_eq!(p.top_segment(2), "ba");
        assert_eq!(p.bottom_segment(2), "dc");
        assert_eq!(p.top_set(2), ['a', 'b'].into_iter().collect());
        assert!(p.prefers('b', 'a'));
        assert!(!p.prefers('c', 'd'));
        assert_eq!(p.best_in(&Menu::new("cd", &u).unwrap()), 'd');
        assert_eq!(p.alt_at_rank(0), 'b');
        assert_eq!(p.rank_of('c'), 3);
    }

    #[test]
    fn menu_canonicalizes_and_validates() {
        let u = abcd_universe();
        assert_eq!(Menu::new("dca", &u).unwrap().key(), "acd");
        assert!(Menu::new("", &u).is_err());
        assert!(Menu::new("ax", &u).is_err());
        assert!(Menu::new("aa", &u).is_err());
    }

    #[test]
    fn universe_enumerations_have_expected_sizes() {
        let u = abcd_universe();
        assert_eq!(u.all_menus().len(), 15);
        assert_eq!(u.all_preferences().len(), 24);
        let prefs = u.all_preferences();
        let keys: Vec<&str> = prefs.iter().map(|p| p.key()).take(3).collect();
        assert_eq!(keys, vec!["abcd", "abdc", "acbd"]);
    }

    #[test]
    fn distribution_validation() {
        let u = abcd_universe();
        assert!(Distribution::from_entries(
            u.clone(),
            vec![("abcd".into(), r(1, 2))],
        )
        .is_err());
        assert!(Distribution::from_entries(
            u.clone(),
            vec![("abcd".into(), r(3, 2)), ("abdc".into(), r(-1, 2))],
        )
        .is_err());
        let ok = Distribution::from_entries(
            u.clone(),
            vec![("abcd".into(), r(1, 2)), ("abdc".into(), r(1, 2))],
        )
        .unwrap();
        assert_eq!(ok.mass(&pref(&u, "abcd")), r(1, 2));
        assert_eq!(ok.mass(&pref(&u, "dcba")), Rational::zero());
    }

    #[test]
    fn phi_of_degenerate_mass_picks_the_top() {
        let u = abcd_universe();
        let mu = Distribution::degenerate(u.clone(), pref(&u, "abcd")).unwrap();
        let rho = phi(&mu);
        for menu in u.all_menus() {
            if menu.contains('a') {
                assert_eq!(rho.prob('a', &menu), Rational::one());
            }
        }
        assert_eq!(rho.prob('b', &Menu::new("bcd", &u).unwrap()), Rational::one());
    }

    #[test]
    fn phi_matches_running_example_goldens() {
        let u = abcd_universe();
        let rho = phi(&running_example(&u));
        let menu = |k: &str| Menu::new(k, &u).unwrap();
        assert_eq!(rho.prob('a', &menu("ab")), r(5, 8));
        assert_eq!(rho.prob('b', &menu("ab")), r(3, 8));
        assert_eq!(rho.prob('c', &menu("cd")), r(3, 8));
        assert_eq!(rho.prob('d', &menu("cd")), r(5, 8));
        assert_eq!(rho.prob('a', &menu("abcd")), r(5, 8));
        assert_eq!(rho.prob('a', &menu("acd")), Rational::one());
        assert_eq!(rho.prob('b', &menu("bcd")), Rational::one());
        rho.check_complete().unwrap();
    }

    #[test]
    fn phi_rows_always_sum_to_one() {
        let u = abcd_universe();
        let rho = phi(&running_example(&u));
        for menu in u.all_menus() {
            let total: Rational = menu.members().map(|a| rho.prob(a, &menu)).sum();
            assert_eq!(total, Rational::one(), "menu {menu}");
        }
    }

    #[test]
    fn obs_equiv_on_the_uniform_pairs() {
        let u = abcd_universe();
        let mu12 = Distribution::uniform(
            u.clone(),
            &[pref(&u, "abcd"), pref(&u, "badc")],
        )
        .unwrap();
        let mu34 = Distribution::uniform(
            u.clone(),
            &[pref(&u, "abdc"), pref(&u, "bacd")],
        )
        .unwrap();
        assert!(obs_equiv(&mu12, &mu34));
        assert!(obs_equiv(&mu12, &mu12));
        let point1 = Distribution::degenerate(u.clone(), pref(&u, "abcd")).unwrap();
        let point2 = Distribution::degenerate(u.clone(), pref(&u, "abdc")).unwrap();
        assert!(!obs_equiv(&point1, &point2));
    }

    #[test]
    fn compatibility_goldens() {
        let u = abcd_universe();
        let p1 = pref(&u, "abcd");
        let p2 = pref(&u, "badc");
        let p3 = pref(&u, "abdc");
        assert!(k_compatible(&p1, &p2, 2));
        assert!(nontrivially_k_compatible(&p1, &p2, 2));
        assert!(k_compatible(&p1, &p2, 0));
        assert!(k_compatible(&p1, &p3, 2));
        assert!(!nontrivially_k_compatible(&p1, &p3, 2));
        assert!(!k_compatible(&p1, &p2, 1));
        assert!(k_compatible(&p1, &p2, 4));
    }

    #[test]
    fn conjugates_goldens_and_involution() {
        let u = abcd_universe();
        let p1 = pref(&u, "abcd");
        let p2 = pref(&u, "badc");
        let (c1, c2) = conjugates(&p1, &p2, 2).unwrap();
        assert_eq!((c1.key(), c2.key()), ("abdc", "bacd"));
        // Applying conjugation again returns the original unordered pair.
        let (d1, d2) = conjugates(&c1, &c2, 2).unwrap();
        assert_eq!((d1.key(), d2.key()), ("abcd", "badc"));
        // k = 0 swaps the pair outright.
        let (e1, e2) = conjugates(&p1, &p2, 0).unwrap();
        assert_eq!((e1.key(), e2.key()), ("badc", "abcd"));
        assert!(conjugates(&p1, &p2, 1).is_err());
    }

    #[test]
    fn conjugates_on_six_alternatives() {
        let u = Universe::new(&['a', 'b', 'c', 'd', 'e', 'f']).unwrap();
        let p = pref(&u, "abcdef");
        let q = pref(&u, "badcfe");
        let (c1, c2) = conjugates(&p, &q, 2).unwrap();
        assert_eq!((c1.key(), c2.key()), ("abdcfe", "bacdef"));
    }

    #[test]
    fn proposition_pairs_stay_equivalent_on_a_small_universe() {
        // Every k-compatible pair on |X| = 3: uniform-pair vs
        // uniform-conjugates must generate identical rules (the |X| = 4
        // exhaustive version runs in the acceptance suite).
        let u = Universe::new(&['a', 'b', 'c']).unwrap();
        let prefs = u.all_preferences();
        for p in &prefs {
            for q in &prefs {
                for k in 0..=3 {
                    if !k_compatible(p, q, k) {
                        continue;
                    }
                    let (c1, c2) = conjugates(p, q, k).unwrap();
                    let orig =
                        Distribution::uniform(u.clone(), &[p.clone(), q.clone()]).unwrap();
                    let swapped = Distribution::uniform(u.clone(), &[c1, c2]).unwrap();
                    assert!(obs_equiv(&orig, &swapped), "pair {p:?},{q:?} at k={k}");
                }
            }
        }
    }

    #[test]
    fn measure_arithmetic_and_pruning() {
        let u = abcd_universe();
        let mut m = SignedMeasure::zero(u.clone());
        let p = pref(&u, "abcd");
        m.add_mass(&p, r(1, 2));
        m.add_mass(&p, r(-1, 2));
        assert!(m.is_zero());
        let mu12 = Distribution::uniform(
            u.clone(),
            &[pref(&u, "abcd"), pref(&u, "badc")],
        )
        .unwrap();
        let mu34 = Distribution::uniform(
            u.clone(),
            &[pref(&u, "abdc"), pref(&u, "bacd")],
        )
        .unwrap();
        let diff = mu34.as_measure().sub(mu12.as_measure());
        assert_eq!(diff.total(), Rational::zero());
        assert_eq!(diff.support().len(), 4);
    }

    #[test]
    fn measure_json_round_trip() {
        let u = abcd_universe();
        let mu = running_example(&u);
        let doc = mu.to_json();
        assert_eq!(doc["mass"]["abdc"], serde_json::json!("3/8"));
        let back = Distribution::from_json(&doc, DEFAULT_UNIVERSE_CAP).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn rule_json_round_trip_and_validation() {
        let u = abcd_universe();
        let rho = phi(&running_example(&u));
        let doc = rho.to_json();
        assert_eq!(doc["probabilities"]["ab"]["a"], serde_json::json!("5/8"));
        let back = ChoiceRule::from_json(&doc, DEFAULT_UNIVERSE_CAP).unwrap();
        assert_eq!(back, rho);
        // A row that does not sum to one is rejected.
        let mut bad = doc.clone();
        bad["probabilities"]["ab"]["a"] = serde_json::json!("1/2");
        assert!(matches!(
            ChoiceRule::from_json(&bad, DEFAULT_UNIVERSE_CAP),
            Err(ChoiceError::BadMenuSum { .. })
        ));
    }
}
