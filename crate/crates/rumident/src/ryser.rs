//! The swap algebra: the combinatorial objects whose span decides
//! observational equivalence.
//!
//! A *swap* takes a pair of preferences that agree on their `k` best
//! alternatives as a set, and exchanges everything below rank `k`,
//! realized as the signed measure `+1{conjugates} − 1{pair}`. Adding such a
//! measure to a distribution (whenever nonnegativity allows) leaves every
//! choice probability unchanged, and the converse holds too: two
//! distributions generate the same choice rule exactly when their
//! difference lies in the span of the swaps. This module enumerates swaps,
//! extracts an exact basis of their span, and decides membership.
//!
//! Two constructive layers sit on top:
//!
//! * [`zipper_transform`] turns the abstract equivalence into an explicit
//!   *sequence* of weighted path-level swaps carrying one decomposition of
//!   a flow into another, with every intermediate step a valid nonnegative
//!   decomposition — the algorithmic content of the zipper lemmas;
//! * [`apply_rearrangement`] braids a finite sequence of preferences level
//!   by level, permuting within the blocks that share the same better-than
//!   sets, and [`rearrangement_equivalent`] decides whether two sequences
//!   differ by such a braiding via the computable edge-mass criterion.

use crate::choicecore::{
    conjugates, k_compatible, ChoiceError, Preference, SignedMeasure, Universe,
};
use crate::dagcore::{
    path_conjugates, recompose, Dag, DagError, Path, PathDecomposition, QuasiFlow,
};
use crate::linalg::{RatMatrix, Rational, SolveOutcome};
use crate::rumgraph::build_rum_graph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Full-universe swap enumeration beyond this size needs an explicit
/// opt-in; the candidate count grows like `(|X|!)²`.
pub const GATED_UNIVERSE_SIZE: usize = 5;

/// Hard ceiling for full-universe swap enumeration.
pub const MAX_ENUMERATION_SIZE: usize = 6;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RyserError {
    /// A domain-type error from the core module.
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    /// A graph error from the DAG substrate.
    #[error(transparent)]
    Dag(#[from] DagError),
    /// Full-universe enumeration on a large universe without the opt-in.
    #[error("full swap enumeration over {size} alternatives must be requested explicitly (allow_large)")]
    EnumerationGated {
        /// The universe size.
        size: usize,
    },
    /// Full-universe enumeration beyond the hard ceiling.
    #[error("swap enumeration over {size} alternatives is unsupported (limit {limit})")]
    EnumerationTooLarge {
        /// The universe size.
        size: usize,
        /// The ceiling.
        limit: usize,
    },
    /// Zipper inputs decompose different flows.
    #[error("decompositions carry different edge masses; no swap sequence can connect them")]
    FlowMismatch,
    /// Applying a swap would drive a path mass negative.
    #[error("swap of weight {weight} exceeds available mass {available} on path {path:?}")]
    SwapExceedsMass {
        /// The offending path (edge-id sequence).
        path: String,
        /// Mass available on it.
        available: Rational,
        /// Weight requested.
        weight: Rational,
    },
    /// Sequences of different lengths were compared.
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// A level permutation has the wrong size or repeats an index.
    #[error("level-{level} permutation is not a permutation of 0..{len}")]
    NotAPermutation {
        /// The level (1-based).
        level: usize,
        /// Expected length.
        len: usize,
    },
    /// A level permutation moves an index across compatibility blocks.
    #[error("level-{level} permutation moves index {from} to {to}, which lies in a different block")]
    BlockViolation {
        /// The level (1-based).
        level: usize,
        /// Source index (0-based).
        from: usize,
        /// Target index (0-based).
        to: usize,
    },
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

// ---------------------------------------------------------------------------
// Swaps
// ---------------------------------------------------------------------------

/// A swap: a `k`-compatible preference pair together with its conjugates,
/// realized as the signed measure `+1{plus} − 1{minus}`. Trivial swaps
/// (conjugates equal to the pair) realize the zero measure.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RyserSwap {
    minus: (Preference, Preference),
    plus: (Preference, Preference),
    k: usize,
}

/// JSON document shape for swaps.
#[derive(Serialize, Deserialize)]
struct SwapDoc {
    plus: Vec<String>,
    minus: Vec<String>,
    k: usize,
}

impl RyserSwap {
    /// Builds the swap exchanging the below-rank-`k` tails of `p` and `q`.
    /// The pair is stored sorted; fails unless `p` and `q` agree on their
    /// top-`k` set.
    pub fn new(p: &Preference, q: &Preference, k: usize) -> Result<Self, RyserError> {
        let (c1, c2) = conjugates(p, q, k)?;
        let mut minus = (p.clone(), q.clone());
        if minus.1 < minus.0 {
            minus = (minus.1, minus.0);
        }
        let mut plus = (c1, c2);
        if plus.1 < plus.0 {
            plus = (plus.1, plus.0);
        }
        Ok(RyserSwap { minus, plus, k })
    }

    /// The pair the swap subtracts mass from, sorted.
    pub fn minus(&self) -> (&Preference, &Preference) {
        (&self.minus.0, &self.minus.1)
    }

    /// The conjugate pair the swap adds mass to, sorted.
    pub fn plus(&self) -> (&Preference, &Preference) {
        (&self.plus.0, &self.plus.1)
    }

    /// The compatibility level the tails are exchanged at.
    pub fn k(&self) -> usize {
        self.k
    }

    /// True iff the swap realizes the zero measure (the conjugates coincide
    /// with the pair).
    pub fn is_trivial(&self) -> bool {
        self.minus == self.plus
    }

    /// The swap with orientation reversed (pair and conjugates exchanged).
    pub fn negated(&self) -> RyserSwap {
        RyserSwap {
            minus: self.plus.clone(),
            plus: self.minus.clone(),
            k: self.k,
        }
    }

    /// The realized signed measure `+1{plus} − 1{minus}` over `universe`.
    pub fn measure(&self, universe: &Universe) -> SignedMeasure {
        let mut m = SignedMeasure::zero(universe.clone());
        m.add_mass(&self.plus.0, Rational::one());
        m.add_mass(&self.plus.1, Rational::one());
        m.add_mass(&self.minus.0, -Rational::one());
        m.add_mass(&self.minus.1, -Rational::one());
        m
    }

    /// Serializes to `{"plus": [...], "minus": [...], "k": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = SwapDoc {
            plus: vec![self.plus.0.key().to_owned(), self.plus.1.key().to_owned()],
            minus: vec![
                self.minus.0.key().to_owned(),
                self.minus.1.key().to_owned(),
            ],
            k: self.k,
        };
        serde_json::to_value(doc).expect("swap docs always serialize")
    }

    /// Parses and re-derives the swap from its document shape, validating
    /// the stored conjugates against the stored pair.
    pub fn from_json(value: &serde_json::Value, universe: &Universe) -> Result<Self, RyserError> {
        let doc: SwapDoc = serde_json::from_value(value.clone())
            .map_err(|e| RyserError::BadDocument(e.to_string()))?;
        if doc.minus.len() != 2 || doc.plus.len() != 2 {
            return Err(RyserError::BadDocument(
                "plus and minus must each list two preferences".to_owned(),
            ));
        }
        let p = Preference::new(&doc.minus[0], universe)?;
        let q = Preference::new(&doc.minus[1], universe)?;
        let swap = RyserSwap::new(&p, &q, doc.k)?;
        let mut claimed: Vec<&String> = doc.plus.iter().collect();
        claimed.sort();
        let derived = [swap.plus.0.key().to_owned(), swap.plus.1.key().to_owned()];
        if claimed[0] != &derived[0] || claimed[1] != &derived[1] {
            return Err(RyserError::BadDocument(format!(
                "stated conjugates {claimed:?} do not match the derived {derived:?}"
            )));
        }
        Ok(swap)
    }
}

/// Options for [`enumerate_swaps`].
#[derive(Clone, Debug, Default)]
pub struct SwapOptions {
    /// Keep only swaps whose pair disagrees both on the top-`k` ranking and
    /// on the bottom ranking. (Trivial swaps realize the zero measure and
    /// are always filtered, so this flag does not change the output; it is
    /// kept for callers that want the intent explicit.)
    pub nontrivial_only: bool,
    /// Restrict enumeration to pairs — and conjugates — inside this
    /// support.
    pub support: Option<Vec<Preference>>,
    /// Permit full-universe enumeration for five or six alternatives.
    pub allow_large: bool,
}

/// Enumerates every swap over the universe (or the declared support), for
/// every unordered pair and level, deduplicated up to sign and pair order
/// and with zero measures filtered. Output is sorted by (pair, conjugates)
/// keys, hence deterministic.
pub fn enumerate_swaps(
    universe: &Universe,
    options: &SwapOptions,
) -> Result<Vec<RyserSwap>, RyserError> {
    let n = universe.size();
    let pool: Vec<Preference> = match &options.support {
        Some(s) => {
            let mut sorted = s.clone();
            sorted.sort();
            sorted.dedup();
            sorted
        }
        None => {
            if n > MAX_ENUMERATION_SIZE {
                return Err(RyserError::EnumerationTooLarge {
                    size: n,
                    limit: MAX_ENUMERATION_SIZE,
                });
            }
            if n >= GATED_UNIVERSE_SIZE && !options.allow_large {
                return Err(RyserError::EnumerationGated { size: n });
            }
            universe.all_preferences()
        }
    };
    let in_pool = |p: &Preference| pool.binary_search(p).is_ok();
    let mut canonical: BTreeMap<(String, String, String, String), RyserSwap> = BTreeMap::new();
    for i in 0..pool.len() {
        for j in (i + 1)..pool.len() {
            for k in 0..=n {
                if !k_compatible(&pool[i], &pool[j], k) {
                    continue;
                }
                let swap = RyserSwap::new(&pool[i], &pool[j], k)?;
                if swap.is_trivial() {
                    continue;
                }
                if options.nontrivial_only
                    && pool[i].top_segment(k) == pool[j].top_segment(k)
                {
                    continue; // unreachable post zero-filter; kept for intent
                }
                if options.support.is_some()
                    && !(in_pool(&swap.plus.0) && in_pool(&swap.plus.1))
                {
                    continue;
                }
                // Canonical orientation: the sign with the smaller pair on
                // the minus side.
                let oriented = if swap.plus < swap.minus {
                    swap.negated()
                } else {
                    swap
                };
                let key = (
                    oriented.minus.0.key().to_owned(),
                    oriented.minus.1.key().to_owned(),
                    oriented.plus.0.key().to_owned(),
                    oriented.plus.1.key().to_owned(),
                );
                canonical.entry(key).or_insert(oriented);
            }
        }
    }
    Ok(canonical.into_values().collect())
}

// ---------------------------------------------------------------------------
// The swap span
// ---------------------------------------------------------------------------

/// An exact basis of the span of all swaps over a universe, extracted by
/// rational elimination over the enumerated swap measures.
#[derive(Clone, Debug)]
pub struct RyserBasis {
    universe: Universe,
    elements: Vec<SignedMeasure>,
}

impl RyserBasis {
    /// The universe the basis is for.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The basis measures, in enumeration order.
    pub fn elements(&self) -> &[SignedMeasure] {
        &self.elements
    }

    /// The dimension of the span.
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Exact membership test: does `m` lie in the span?
    pub fn contains(&self, m: &SignedMeasure) -> Result<bool, RyserError> {
        if m.universe() != &self.universe {
            return Err(RyserError::Choice(ChoiceError::UniverseMismatch));
        }
        if self.elements.is_empty() {
            return Ok(m.is_zero());
        }
        let prefs = self.universe.all_preferences();
        let rows: Vec<Vec<Rational>> = prefs
            .iter()
            .map(|p| self.elements.iter().map(|e| e.mass(p)).collect())
            .collect();
        let a = RatMatrix::from_rows(rows).expect("basis columns share a length");
        let rhs: Vec<Rational> = prefs.iter().map(|p| m.mass(p)).collect();
        Ok(!matches!(a.solve(&rhs), SolveOutcome::Infeasible))
    }
}

fn measure_coords(m: &SignedMeasure, prefs: &[Preference]) -> Vec<Rational> {
    prefs.iter().map(|p| m.mass(p)).collect()
}

/// Reduces `v` against reduced rows with known pivot columns; returns the
/// remainder.
fn reduce_against(rows: &[(usize, Vec<Rational>)], v: &mut Vec<Rational>) {
    for (pivot, row) in rows {
        if !v[*pivot].is_zero() {
            let factor = v[*pivot].clone();
            for (x, r) in v.iter_mut().zip(row) {
                *x = &*x - &(&factor * r);
            }
        }
    }
}

/// Computes an exact basis of the swap span by greedy elimination over the
/// enumerated swaps, keeping each swap measure whose coordinates are
/// independent of those already kept.
pub fn ryser_basis(universe: &Universe) -> Result<RyserBasis, RyserError> {
    ryser_basis_with(universe, false)
}

/// [`ryser_basis`] with the large-universe enumeration opt-in.
pub fn ryser_basis_with(universe: &Universe, allow_large: bool) -> Result<RyserBasis, RyserError> {
    let swaps = enumerate_swaps(
        universe,
        &SwapOptions {
            nontrivial_only: false,
            support: None,
            allow_large,
        },
    )?;
    let prefs = universe.all_preferences();
    let mut reduced: Vec<(usize, Vec<Rational>)> = Vec::new();
    let mut elements = Vec::new();
    for swap in &swaps {
        let m = swap.measure(universe);
        let mut v = measure_coords(&m, &prefs);
        reduce_against(&reduced, &mut v);
        if let Some(pivot) = v.iter().position(|x| !x.is_zero()) {
            let lead = v[pivot].clone();
            for x in v.iter_mut() {
                *x = &*x / &lead;
            }
            // Back-substitute so earlier rows are clean at this pivot.
            for (_, row) in reduced.iter_mut() {
                if !row[pivot].is_zero() {
                    let factor = row[pivot].clone();
                    for (x, r) in row.iter_mut().zip(&v) {
                        *x = &*x - &(&factor * r);
                    }
                }
            }
            reduced.push((pivot, v));
            elements.push(m);
        }
    }
    Ok(RyserBasis {
        universe: universe.clone(),
        elements,
    })
}

/// Decides observational-equivalence membership: is `m` a span of swaps
/// over its own universe? Zero-sum is necessary but not sufficient; the
/// test is exact.
pub fn in_ryser_span(m: &SignedMeasure) -> Result<bool, RyserError> {
    ryser_basis(m.universe())?.contains(m)
}

// ---------------------------------------------------------------------------
// Zipper transform
// ---------------------------------------------------------------------------

/// A weighted path-level swap: subtract `coefficient` from the two `minus`
/// paths and add it to their conjugates at `node`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightedPathSwap {
    /// The exchanged mass.
    pub coefficient: Rational,
    /// The donor pair.
    pub minus: (Path, Path),
    /// The recipient pair (conjugates of the donors at `node`).
    pub plus: (Path, Path),
    /// The shared node the tails are exchanged at.
    pub node: String,
}

impl WeightedPathSwap {
    /// Serializes as a record of edge-id sequences.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "coefficient": self.coefficient,
            "minus": [self.minus.0.edge_ids(), self.minus.1.edge_ids()],
            "plus": [self.plus.0.edge_ids(), self.plus.1.edge_ids()],
            "node": self.node,
        })
    }
}

/// Applies weighted path swaps in sequence, failing if any step would drive
/// a path mass negative. Conjugacy of each swap's paths is re-derived from
/// the graph, so ill-formed swaps are rejected.
pub fn apply_path_swaps(
    g: &Dag,
    pi: &PathDecomposition,
    swaps: &[WeightedPathSwap],
) -> Result<PathDecomposition, RyserError> {
    let mut current = pi.clone();
    for swap in swaps {
        let (c1, c2) = path_conjugates(g, &swap.minus.0, &swap.minus.1, &swap.node)?;
        if (c1.clone(), c2.clone()) != swap.plus && (c2, c1) != swap.plus {
            return Err(RyserError::BadDocument(
                "swap's plus pair is not the conjugate of its minus pair".to_owned(),
            ));
        }
        for donor in [&swap.minus.0, &swap.minus.1] {
            let available = current.get(donor);
            if available < swap.coefficient {
                return Err(RyserError::SwapExceedsMass {
                    path: donor.edge_ids().join(","),
                    available,
                    weight: swap.coefficient.clone(),
                });
            }
        }
        current.add(&swap.minus.0, -&swap.coefficient);
        current.add(&swap.minus.1, -&swap.coefficient);
        current.add(&swap.plus.0, swap.coefficient.clone());
        current.add(&swap.plus.1, swap.coefficient.clone());
    }
    Ok(current)
}

/// Constructs an explicit finite sequence of weighted path swaps carrying
/// `pi_from` into `pi_to`, both exact decompositions of the same quasi-flow
/// (validated first). Every intermediate stage is itself a nonnegative
/// decomposition of that flow.
///
/// The algorithm settles one target path per outer round, in path order:
/// walking the target's edges by depth, it funnels mass onto the target's
/// prefix by pairwise tail exchanges at the current node, always pairing
/// the least available donor inside the prefix pool with the least mass
/// holder of the next edge outside it. Conservation guarantees each depth
/// can be completed, and settled mass is locked away from later rounds.
pub fn zipper_transform(
    g: &Dag,
    pi_from: &PathDecomposition,
    pi_to: &PathDecomposition,
) -> Result<Vec<WeightedPathSwap>, RyserError> {
    let from_flow = recompose(g, pi_from)?;
    let to_flow = recompose(g, pi_to)?;
    if from_flow != to_flow {
        return Err(RyserError::FlowMismatch);
    }
    let mut avail = pi_from.clone();
    let mut swaps: Vec<WeightedPathSwap> = Vec::new();
    let targets: Vec<(Path, Rational)> = pi_to
        .entries()
        .map(|(p, w)| (p.clone(), w.clone()))
        .collect();
    for (target, need) in targets {
        let nodes: Vec<String> = g
            .path_nodes(&target)
            .into_iter()
            .map(str::to_owned)
            .collect();
        for depth in 0..target.len() {
            let prefix_next = target.prefix(depth + 1);
            let pool_mass = |avail: &PathDecomposition, len: usize| -> Rational {
                avail
                    .entries()
                    .filter(|(p, _)| p.len() >= len && p.prefix(len) == target.prefix(len))
                    .map(|(_, w)| w.clone())
                    .sum()
            };
            let mut shortfall = &need - &pool_mass(&avail, depth + 1);
            let next_edge = &prefix_next[depth];
            while shortfall.is_positive() {
                // Donor: least path sharing the depth-prefix but not the
                // next edge, with positive available mass.
                let donor = avail
                    .entries()
                    .find(|(p, w)| {
                        w.is_positive()
                            && p.len() > depth
                            && p.prefix(depth) == target.prefix(depth)
                            && p.edge_ids()[depth] != *next_edge
                    })
                    .map(|(p, w)| (p.clone(), w.clone()))
                    .expect("conservation guarantees a donor while short");
                // Carrier: least path using the next edge from outside the
                // prefix pool, with positive available mass.
                let carrier = avail
                    .entries()
                    .find(|(p, w)| {
                        w.is_positive()
                            && p.edge_ids().contains(next_edge)
                            && !(p.len() > depth && p.prefix(depth) == target.prefix(depth))
                    })
                    .map(|(p, w)| (p.clone(), w.clone()))
                    .expect("conservation guarantees a carrier while short");
                let w = [donor.1.clone(), carrier.1.clone(), shortfall.clone()]
                    .into_iter()
                    .min()
                    .expect("three candidates");
                let node = &nodes[depth];
                let (c1, c2) = path_conjugates(g, &donor.0, &carrier.0, node)?;
                avail.add(&donor.0, -&w);
                avail.add(&carrier.0, -&w);
                avail.add(&c1, w.clone());
                avail.add(&c2, w.clone());
                shortfall = &shortfall - &w;
                swaps.push(WeightedPathSwap {
                    coefficient: w,
                    minus: (donor.0, carrier.0),
                    plus: (c1, c2),
                    node: node.clone(),
                });
            }
        }
        // Lock the settled mass away from later rounds.
        avail.add(&target, -&need);
    }
    debug_assert!(avail.entries().next().is_none(), "all mass settles exactly");
    Ok(swaps)
}

// ---------------------------------------------------------------------------
// Rearrangements
// ---------------------------------------------------------------------------

/// Per-level permutations braiding a preference sequence: the level-`l`
/// permutation may only move indices within blocks of the sequence's
/// `(l−1)`-compatibility partition (equal top-`(l−1)` sets). Validity is
/// checked eagerly at construction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rearrangement {
    sigmas: Vec<Vec<usize>>,
}

impl Rearrangement {
    /// Validates per-level permutations (`sigmas[l−1]` is `σ_l`, 0-based
    /// index maps) against the sequence they will braid.
    pub fn for_sequence(
        seq: &[Preference],
        sigmas: Vec<Vec<usize>>,
    ) -> Result<Self, RyserError> {
        let levels = seq.first().map(Preference::len).unwrap_or(0);
        if sigmas.len() != levels {
            return Err(RyserError::BadDocument(format!(
                "expected {levels} level permutations, got {}",
                sigmas.len()
            )));
        }
        let r = Rearrangement { sigmas };
        r.check_blocks(seq)?;
        Ok(r)
    }

    /// The identity rearrangement for a sequence.
    pub fn identity(seq: &[Preference]) -> Self {
        let levels = seq.first().map(Preference::len).unwrap_or(0);
        Rearrangement {
            sigmas: vec![(0..seq.len()).collect(); levels],
        }
    }

    /// The level permutations, 0-based.
    pub fn sigmas(&self) -> &[Vec<usize>] {
        &self.sigmas
    }

    fn check_blocks(&self, seq: &[Preference]) -> Result<(), RyserError> {
        let n = seq.len();
        for (idx, sigma) in self.sigmas.iter().enumerate() {
            let level = idx + 1;
            let mut seen = vec![false; n];
            if sigma.len() != n {
                return Err(RyserError::NotAPermutation { level, len: n });
            }
            for &v in sigma {
                if v >= n || seen[v] {
                    return Err(RyserError::NotAPermutation { level, len: n });
                }
                seen[v] = true;
            }
            // σ_l must fix each block of the (l−1)-compatibility partition:
            // indices with equal top-(l−1) sets.
            for (i, &j) in sigma.iter().enumerate() {
                if seq[i].top_set(level - 1) != seq[j].top_set(level - 1) {
                    return Err(RyserError::BlockViolation {
                        level,
                        from: j,
                        to: i,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Braids a preference sequence by per-level permutations: writing
/// `c_l = c_{l−1} ∘ σ_l` for the accumulated composite (with `c_0` the
/// identity), the `n`-th output preference ranks at level `l` the level-`l`
/// alternative of input `c_l^{-1}(n)`. Block validity guarantees each
/// output is again a strict ranking.
pub fn apply_rearrangement(
    seq: &[Preference],
    r: &Rearrangement,
) -> Result<Vec<Preference>, RyserError> {
    r.check_blocks(seq)?;
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    let n = seq.len();
    let levels = seq[0].len();
    // Accumulated composites and their inverses, one per level.
    let mut composite: Vec<usize> = (0..n).collect();
    let mut rankings = vec![String::with_capacity(levels); n];
    for l in 0..levels {
        let sigma = &r.sigmas[l];
        composite = (0..n).map(|i| composite[sigma[i]]).collect();
        let mut inverse = vec![0usize; n];
        for (i, &v) in composite.iter().enumerate() {
            inverse[v] = i;
        }
        for (out, slot) in rankings.iter_mut().enumerate() {
            slot.push(seq[inverse[out]].alt_at_rank(l));
        }
    }
    let universe = universe_of(seq)?;
    rankings
        .into_iter()
        .map(|key| Preference::new(&key, &universe).map_err(RyserError::from))
        .collect()
}

fn universe_of(seq: &[Preference]) -> Result<Universe, RyserError> {
    let first = seq.first().expect("nonempty sequence");
    let chars: Vec<char> = first.key().chars().collect();
    Ok(Universe::with_cap(&chars, chars.len().max(8))?)
}

/// Decides whether two equal-length preference sequences differ by a
/// rearrangement, via the computable criterion: they do exactly when their
/// path-indicator sums induce identical edge masses on the menu-lattice
/// graph.
pub fn rearrangement_equivalent(
    seq1: &[Preference],
    seq2: &[Preference],
) -> Result<bool, RyserError> {
    if seq1.len() != seq2.len() {
        return Err(RyserError::LengthMismatch(seq1.len(), seq2.len()));
    }
    if seq1.is_empty() {
        return Ok(true);
    }
    let universe = universe_of(seq1)?;
    if universe_of(seq2)? != universe {
        return Err(RyserError::Choice(ChoiceError::UniverseMismatch));
    }
    let g = build_rum_graph(&universe);
    let edge_masses = |seq: &[Preference]| -> QuasiFlow {
        let mut f = QuasiFlow::zero();
        for p in seq {
            for id in g.pref_to_path(p).edge_ids() {
                f.add(id, Rational::one());
            }
        }
        f
    };
    Ok(edge_masses(seq1) == edge_masses(seq2))
}
