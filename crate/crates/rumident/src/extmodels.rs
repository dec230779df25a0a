//! Instantiations of the swap-and-flow machinery for three further
//! stochastic choice models: random choice over an arbitrary observed menu
//! collection (limited observability), Markovian dynamic discrete choice,
//! and a two-frame recommendation model.
//!
//! Each model follows the recipe the menu lattice does:
//!
//! 1. a DAG whose source-to-sink paths are in bijection with the model's
//!    primitive objects — choice functions on the collection, choice
//!    histories, truncated preferences;
//! 2. a flow computed from the observables, so that path decompositions of
//!    it are exactly the representations of the data; and
//! 3. a family of swaps — signed measures exchanging a compatible pair for
//!    its conjugates — whose linear span characterizes observational
//!    equivalence: two distributions generate the same observables exactly
//!    when their difference lies in the span.
//!
//! The graph substrate ([`crate::dagcore`]), the exact linear algebra
//! ([`crate::linalg`]) and the greedy ordered selection ([`crate::ordered`])
//! apply unchanged; this module only supplies the per-model constructions.
//! Because the collection-indexed choice functions contain the rational
//! ones, the random utility model embeds into the first model as a support
//! restriction: [`rational_functions`] lists the embedded support and
//! [`rc_mass_bounds`] optimizes over it.

use crate::choicecore::{Alternative, ChoiceError, ChoiceRule, Menu, Preference, Universe};
use crate::dagcore::{
    decompose_greedy, validate_quasiflow, Dag, DagError, Path, PathDecomposition, QuasiFlow,
};
use crate::linalg::{
    lp_solve, LinalgError, LpOutcome, LpProblem, RatMatrix, Rational, Sense, SolveOutcome,
};
use crate::ordered::{swap_progressive, AltOrder, EdgeOrder, OrderedError};
use crate::rumgraph::EMPTY_NODE;
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Default ceiling on the number of primitive objects (choice functions,
/// histories, truncated preferences) an enumeration-based operation will
/// materialize. Swap enumeration is quadratic in this count, so the default
/// is deliberately modest; callers may pass a larger cap explicitly.
pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

/// Source node label of the dynamic-choice graph.
const SOURCE_NODE: &str = "src";

/// Sink node label of the dynamic-choice and frame-dependent graphs. The
/// label can never collide with a menu or recommendation-set key, which are
/// sorted member strings.
const SINK_NODE: &str = "snk";

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtError {
    /// A domain-type error from the core module.
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    /// A graph error from the DAG substrate.
    #[error(transparent)]
    Dag(#[from] DagError),
    /// An exact-arithmetic error from the linear algebra module.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// An error from the ordered-selection module.
    #[error(transparent)]
    Ordered(#[from] OrderedError),
    /// A menu collection without menus.
    #[error("a menu collection must list at least one menu")]
    EmptyCollection,
    /// The same menu listed twice in a collection.
    #[error("menu {0:?} appears twice in the collection")]
    DuplicateMenu(String),
    /// A rule is missing a menu the collection observes.
    #[error("the rule does not cover menu {0:?}")]
    UncoveredMenu(String),
    /// A choice function does not fit its collection.
    #[error("bad choice function: {0}")]
    BadFunction(String),
    /// An enumeration would exceed the cap in force.
    #[error("enumerating {size} objects exceeds the cap of {cap}")]
    CapExceeded {
        /// How many objects the enumeration would produce.
        size: usize,
        /// The cap in force.
        cap: usize,
    },
    /// A bounds query whose rule admits no representation on the support.
    #[error("the rule admits no representation supported on the listed functions")]
    NoRepresentation,
    /// A non-positive time horizon.
    #[error("a horizon of {0} is not positive")]
    BadHorizon(usize),
    /// The wrong number of conditional tables for the horizon.
    #[error("expected {expected} conditional tables for the horizon, got {got}")]
    TableCount {
        /// Tables required (horizon minus one).
        expected: usize,
        /// Tables supplied.
        got: usize,
    },
    /// A malformed probability table.
    #[error("bad table at period {period}: {reason}")]
    BadTable {
        /// The period the table conditions (1 for the initial one).
        period: usize,
        /// What is wrong with it.
        reason: String,
    },
    /// A malformed choice history.
    #[error("bad history {0:?}")]
    BadHistory(String),
    /// A swap was requested for a pair that is not compatible at the level.
    #[error("{left:?} and {right:?} are not {level}-compatible")]
    NotCompatible {
        /// Key of the first object.
        left: String,
        /// Key of the second object.
        right: String,
        /// The compatibility level requested.
        level: usize,
    },
    /// A malformed truncated preference.
    #[error("bad truncated preference: {0}")]
    BadTruncated(String),
    /// A measure with a negative mass entry where a distribution is needed.
    #[error("negative mass {mass} on {object:?} in a probability distribution")]
    NegativeMass {
        /// Key of the carrier object.
        object: String,
        /// The offending mass.
        mass: Rational,
    },
    /// A measure whose total is not one where a distribution is needed.
    #[error("distribution mass sums to {0}, expected 1")]
    BadTotal(Rational),
    /// Data outside the model: the canonical flow has a negative edge.
    #[error("the data are not rationalizable: edge {edge:?} carries {mass}")]
    NotRationalizable {
        /// The offending edge id.
        edge: String,
        /// Its (negative) mass.
        mass: Rational,
    },
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

/// A measure over collection-indexed choice functions, signed in general;
/// distributions are the nonnegative ones with total mass one.
pub type FunctionMeasure = BTreeMap<ChoiceFunction, Rational>;

/// A measure over choice histories (strings of one choice per period).
pub type HistoryMeasure = BTreeMap<String, Rational>;

/// A measure over truncated preferences.
pub type TruncatedMeasure = BTreeMap<TruncatedPreference, Rational>;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Adds `delta` to the entry of `key`, creating it at zero if absent.
fn bump<K: Ord + Clone>(m: &mut BTreeMap<K, Rational>, key: &K, delta: Rational) {
    let slot = m.entry(key.clone()).or_insert_with(Rational::zero);
    *slot = &*slot + &delta;
}

/// Exact span membership for sparse vectors over an ordered coordinate set:
/// solves the linear system whose columns are the generators and whose
/// right-hand side is the target, and reports whether it is consistent.
fn span_contains<K: Ord>(vectors: &[BTreeMap<K, Rational>], target: &BTreeMap<K, Rational>) -> bool {
    if vectors.is_empty() {
        return target.values().all(Rational::is_zero);
    }
    let mut coords: BTreeSet<&K> = target.keys().collect();
    for v in vectors {
        coords.extend(v.keys());
    }
    if coords.is_empty() {
        return true;
    }
    let mut rows = Vec::with_capacity(coords.len());
    let mut rhs = Vec::with_capacity(coords.len());
    for &c in &coords {
        rows.push(
            vectors
                .iter()
                .map(|v| v.get(c).cloned().unwrap_or_else(Rational::zero))
                .collect(),
        );
        rhs.push(target.get(c).cloned().unwrap_or_else(Rational::zero));
    }
    let a = RatMatrix::from_rows(rows).expect("span rows are rectangular by construction");
    !matches!(a.solve(&rhs), SolveOutcome::Infeasible)
}

/// Checks that a measure is a probability distribution: every mass
/// nonnegative and the total exactly one.
fn check_distribution<K: Ord>(
    m: &BTreeMap<K, Rational>,
    describe: impl Fn(&K) -> String,
) -> Result<(), ExtError> {
    for (k, v) in m {
        if v.is_negative() {
            return Err(ExtError::NegativeMass {
                object: describe(k),
                mass: v.clone(),
            });
        }
    }
    let total: Rational = m.values().sum();
    if total != Rational::one() {
        return Err(ExtError::BadTotal(total));
    }
    Ok(())
}

/// Zero-padded edge ids `e0000, e0001, …` wide enough for `total` edges.
fn edge_id_width(total: usize) -> usize {
    total.saturating_sub(1).to_string().len().max(4)
}

// ---------------------------------------------------------------------------
// Random choice on a menu collection
// ---------------------------------------------------------------------------

/// An ordered collection of distinct observed menus over one universe. The
/// list order is the layer order of the chain graph; it carries no semantic
/// weight beyond fixing that presentation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MenuCollection {
    universe: Universe,
    menus: Vec<Menu>,
}

/// JSON document shape for menu collections.
#[derive(Serialize, Deserialize)]
struct CollectionDoc {
    alternatives: Vec<String>,
    menus: Vec<String>,
}

impl MenuCollection {
    /// Validates a nonempty list of distinct menus over `universe`.
    pub fn new(universe: Universe, menus: Vec<Menu>) -> Result<Self, ExtError> {
        if menus.is_empty() {
            return Err(ExtError::EmptyCollection);
        }
        let mut seen = BTreeSet::new();
        let mut checked = Vec::with_capacity(menus.len());
        for m in menus {
            let m = Menu::new(m.key(), &universe)?;
            if !seen.insert(m.key().to_owned()) {
                return Err(ExtError::DuplicateMenu(m.key().to_owned()));
            }
            checked.push(m);
        }
        Ok(MenuCollection {
            universe,
            menus: checked,
        })
    }

    /// The full collection: every nonempty menu, in lexicographic key order.
    pub fn full(universe: &Universe) -> Self {
        MenuCollection {
            universe: universe.clone(),
            menus: universe.all_menus(),
        }
    }

    /// The universe the menus live in.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The menus in layer order.
    pub fn menus(&self) -> &[Menu] {
        &self.menus
    }

    /// Number of menus.
    pub fn len(&self) -> usize {
        self.menus.len()
    }

    /// True iff the collection is empty (never holds for validated values).
    pub fn is_empty(&self) -> bool {
        self.menus.is_empty()
    }

    /// The layer index of a menu, if observed.
    pub fn position(&self, menu: &Menu) -> Option<usize> {
        self.menus.iter().position(|m| m == menu)
    }

    /// Serializes to `{"alternatives": [...], "menus": [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = CollectionDoc {
            alternatives: self.universe.labels(),
            menus: self.menus.iter().map(|m| m.key().to_owned()).collect(),
        };
        serde_json::to_value(doc).expect("collection docs always serialize")
    }

    /// Parses the document shape produced by [`MenuCollection::to_json`],
    /// with an explicit universe-size cap.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ExtError> {
        let doc: CollectionDoc = serde_json::from_value(value.clone())
            .map_err(|e| ExtError::BadDocument(e.to_string()))?;
        let universe = Universe::from_labels(&doc.alternatives, cap)?;
        let menus = doc
            .menus
            .iter()
            .map(|k| Menu::new(k, &universe))
            .collect::<Result<Vec<_>, _>>()?;
        MenuCollection::new(universe, menus)
    }
}

/// A choice function on a collection: one member picked from each menu, in
/// layer order. Keyed by the picked characters concatenated in that order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChoiceFunction {
    picks: Vec<Alternative>,
}

impl ChoiceFunction {
    /// Validates a pick string (one character per menu, each a member of its
    /// layer's menu) against a collection.
    pub fn new(picks: &str, sigma: &MenuCollection) -> Result<Self, ExtError> {
        let picks: Vec<char> = picks.chars().collect();
        Self::from_picks(picks, sigma)
    }

    /// Validates an explicit pick vector against a collection.
    pub fn from_picks(picks: Vec<Alternative>, sigma: &MenuCollection) -> Result<Self, ExtError> {
        if picks.len() != sigma.len() {
            return Err(ExtError::BadFunction(format!(
                "expected one pick per menu ({}), got {}",
                sigma.len(),
                picks.len()
            )));
        }
        for (i, (&a, menu)) in picks.iter().zip(sigma.menus()).enumerate() {
            if !menu.contains(a) {
                return Err(ExtError::BadFunction(format!(
                    "pick {a:?} at layer {i} is not a member of menu {:?}",
                    menu.key()
                )));
            }
        }
        Ok(ChoiceFunction { picks })
    }

    /// The rational choice function a preference induces: its best member of
    /// every menu.
    ///
    /// # Panics
    /// Panics if `p` does not rank every member of the collection's menus.
    pub fn induced_by(p: &Preference, sigma: &MenuCollection) -> Self {
        ChoiceFunction {
            picks: sigma.menus().iter().map(|m| p.best_in(m)).collect(),
        }
    }

    /// The pick string, one character per layer.
    pub fn key(&self) -> String {
        self.picks.iter().collect()
    }

    /// The pick at a layer.
    ///
    /// # Panics
    /// Panics when the layer is out of range.
    pub fn pick(&self, layer: usize) -> Alternative {
        self.picks[layer]
    }

    /// All picks, in layer order.
    pub fn picks(&self) -> &[Alternative] {
        &self.picks
    }

    /// The function with a single layer's pick replaced.
    fn with_pick(&self, layer: usize, a: Alternative) -> Self {
        let mut picks = self.picks.clone();
        picks[layer] = a;
        ChoiceFunction { picks }
    }
}

impl fmt::Display for ChoiceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.picks {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ChoiceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{self}⟩")
    }
}

/// The chain graph of a menu collection, with a two-way index between edge
/// ids and (layer, picked alternative) pairs.
#[derive(Clone, Debug)]
pub struct RcGraph {
    sigma: MenuCollection,
    dag: Dag,
    edge_of: BTreeMap<(usize, Alternative), String>,
    slot_of: BTreeMap<String, (usize, Alternative)>,
}

/// Builds the chain: one node per menu in layer order plus a terminal node
/// labeled [`EMPTY_NODE`], and one edge per (layer, member) running from the
/// layer's node to the next — traversing it means "pick that member from
/// that menu". A path therefore makes one pick per menu, so paths and choice
/// functions are in bijection. Edge ids are zero-padded in (layer, member)
/// order.
pub fn build_rc_graph(sigma: &MenuCollection) -> RcGraph {
    let mut nodes: Vec<String> = sigma.menus().iter().map(|m| m.key().to_owned()).collect();
    nodes.push(EMPTY_NODE.to_owned());
    let edge_total: usize = sigma.menus().iter().map(Menu::len).sum();
    let width = edge_id_width(edge_total);
    let mut edges = Vec::with_capacity(edge_total);
    let mut edge_of = BTreeMap::new();
    let mut slot_of = BTreeMap::new();
    let mut next = 0usize;
    for (layer, menu) in sigma.menus().iter().enumerate() {
        let head = match sigma.menus().get(layer + 1) {
            Some(m) => m.key().to_owned(),
            None => EMPTY_NODE.to_owned(),
        };
        for a in menu.members() {
            let id = format!("e{next:0width$}");
            next += 1;
            edges.push((id.clone(), menu.key().to_owned(), head.clone()));
            edge_of.insert((layer, a), id.clone());
            slot_of.insert(id, (layer, a));
        }
    }
    let source = sigma.menus()[0].key().to_owned();
    let dag = Dag::new(nodes, edges, &source, EMPTY_NODE)
        .expect("the menu chain is a valid DAG by construction");
    RcGraph {
        sigma: sigma.clone(),
        dag,
        edge_of,
        slot_of,
    }
}

impl RcGraph {
    /// The collection the chain is built over.
    pub fn collection(&self) -> &MenuCollection {
        &self.sigma
    }

    /// The underlying DAG.
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// The id of the edge "pick `a` from the layer-`layer` menu".
    ///
    /// # Panics
    /// Panics when the layer is out of range or `a` is not a member.
    pub fn edge_id(&self, layer: usize, a: Alternative) -> &str {
        self.edge_of
            .get(&(layer, a))
            .unwrap_or_else(|| panic!("no edge for layer {layer} and pick {a:?}"))
    }

    /// The (layer, picked alternative) pair of an edge id.
    pub fn layer_alt(&self, edge_id: &str) -> Option<(usize, Alternative)> {
        self.slot_of.get(edge_id).copied()
    }

    /// The path of a choice function: its pick edge at every layer.
    ///
    /// # Panics
    /// Panics if the function does not fit this collection.
    pub fn function_to_path(&self, c: &ChoiceFunction) -> Path {
        let ids: Vec<String> = c
            .picks()
            .iter()
            .enumerate()
            .map(|(layer, &a)| self.edge_id(layer, a).to_owned())
            .collect();
        self.dag
            .path_from_edges(ids)
            .expect("function paths are valid by construction")
    }

    /// The choice function of a path: read off the picked alternative of
    /// each edge in order. The path is re-validated against the chain.
    pub fn path_to_function(&self, path: &Path) -> Result<ChoiceFunction, ExtError> {
        self.dag.path_from_edges(path.edge_ids().iter().cloned())?;
        let picks: Vec<Alternative> = path
            .edge_ids()
            .iter()
            .map(|id| {
                self.slot_of
                    .get(id)
                    .expect("validated paths use chain edges")
                    .1
            })
            .collect();
        ChoiceFunction::from_picks(picks, &self.sigma)
    }

    /// Transports a measure over functions to the path decomposition with
    /// the same masses. Zero entries are dropped.
    pub fn measure_to_paths(&self, m: &FunctionMeasure) -> Result<PathDecomposition, ExtError> {
        let mut pi = PathDecomposition::empty();
        for (c, mass) in m {
            let c = ChoiceFunction::from_picks(c.picks().to_vec(), &self.sigma)?;
            if !mass.is_zero() {
                pi.add(&self.function_to_path(&c), mass.clone());
            }
        }
        Ok(pi)
    }

    /// Transports a path decomposition back to a measure over functions.
    /// Zero entries are dropped.
    pub fn paths_to_measure(&self, pi: &PathDecomposition) -> Result<FunctionMeasure, ExtError> {
        let mut m = FunctionMeasure::new();
        for (path, mass) in pi.entries() {
            if !mass.is_zero() {
                bump(&mut m, &self.path_to_function(path)?, mass.clone());
            }
        }
        Ok(m)
    }
}

/// The edge assignment the observables induce on the chain: the edge
/// "pick `a` from `A`" carries `ρ(a, A)`. Because every row sums to one,
/// the assignment conserves and pushes unit mass from the source, so it is
/// a flow, and its path decompositions are exactly the random choice models
/// of the rule restricted to the collection.
pub fn rc_flow(g: &RcGraph, rho: &ChoiceRule) -> Result<QuasiFlow, ExtError> {
    if rho.universe() != g.collection().universe() {
        return Err(ChoiceError::UniverseMismatch.into());
    }
    let mut entries: Vec<(String, Rational)> = Vec::with_capacity(g.dag().edge_count());
    for (layer, menu) in g.collection().menus().iter().enumerate() {
        for a in menu.members() {
            let mass = rho
                .get(a, menu)
                .ok_or_else(|| ExtError::UncoveredMenu(menu.key().to_owned()))?;
            entries.push((g.edge_id(layer, a).to_owned(), mass));
        }
    }
    Ok(QuasiFlow::from_entries(entries))
}

/// The choice probabilities a distribution over functions generates:
/// `ρ(a, A) = Σ_c μ(c) 1{c(A) = a}`, one row per collection menu. The
/// result is a partial rule covering exactly the collection.
pub fn rc_phi(sigma: &MenuCollection, mu: &FunctionMeasure) -> Result<ChoiceRule, ExtError> {
    for c in mu.keys() {
        ChoiceFunction::from_picks(c.picks().to_vec(), sigma)?;
    }
    check_distribution(mu, ChoiceFunction::key)?;
    let mut rows: BTreeMap<Menu, BTreeMap<Alternative, Rational>> = sigma
        .menus()
        .iter()
        .map(|m| {
            (
                m.clone(),
                m.members().map(|a| (a, Rational::zero())).collect(),
            )
        })
        .collect();
    for (c, mass) in mu {
        for (layer, menu) in sigma.menus().iter().enumerate() {
            let row = rows.get_mut(menu).expect("rows cover the collection");
            bump(row, &c.pick(layer), mass.clone());
        }
    }
    Ok(ChoiceRule::from_rows(sigma.universe().clone(), rows)?)
}

/// The rational choice functions of a collection: for every preference, the
/// function picking its best member of each menu. Returned as (preference,
/// induced function) pairs in preference key order; distinct preferences
/// induce distinct functions only when the collection separates them, so
/// coarse collections may repeat functions.
pub fn rational_functions(sigma: &MenuCollection) -> Vec<(Preference, ChoiceFunction)> {
    sigma
        .universe()
        .all_preferences()
        .into_iter()
        .map(|p| {
            let c = ChoiceFunction::induced_by(&p, sigma);
            (p, c)
        })
        .collect()
}

/// A swap for the random choice model: a pair of functions together with
/// the conjugates obtained by exchanging their picks on a single menu,
/// realized as the signed measure `+1{plus} − 1{minus}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RcSwap {
    minus: (ChoiceFunction, ChoiceFunction),
    plus: (ChoiceFunction, ChoiceFunction),
    layer: usize,
}

/// JSON document shape for random-choice swaps.
#[derive(Serialize, Deserialize)]
struct RcSwapDoc {
    plus: Vec<String>,
    minus: Vec<String>,
    layer: usize,
}

impl RcSwap {
    /// Builds the swap exchanging the layer-`layer` picks of `c1` and `c2`.
    /// Both pairs are stored sorted.
    pub fn new(
        c1: &ChoiceFunction,
        c2: &ChoiceFunction,
        layer: usize,
        sigma: &MenuCollection,
    ) -> Result<Self, ExtError> {
        let c1 = ChoiceFunction::from_picks(c1.picks().to_vec(), sigma)?;
        let c2 = ChoiceFunction::from_picks(c2.picks().to_vec(), sigma)?;
        if layer >= sigma.len() {
            return Err(ExtError::BadFunction(format!(
                "layer {layer} is out of range for a collection of {} menus",
                sigma.len()
            )));
        }
        Ok(Self::exchange(&c1, &c2, layer))
    }

    /// The swap of an already-validated pair.
    fn exchange(c1: &ChoiceFunction, c2: &ChoiceFunction, layer: usize) -> Self {
        let plus = sort_pair((
            c1.with_pick(layer, c2.pick(layer)),
            c2.with_pick(layer, c1.pick(layer)),
        ));
        let minus = sort_pair((c1.clone(), c2.clone()));
        RcSwap { minus, plus, layer }
    }

    /// The pair the swap subtracts mass from, sorted.
    pub fn minus(&self) -> (&ChoiceFunction, &ChoiceFunction) {
        (&self.minus.0, &self.minus.1)
    }

    /// The conjugate pair the swap adds mass to, sorted.
    pub fn plus(&self) -> (&ChoiceFunction, &ChoiceFunction) {
        (&self.plus.0, &self.plus.1)
    }

    /// The layer whose picks are exchanged.
    pub fn layer(&self) -> usize {
        self.layer
    }

    /// True iff the swap realizes the zero measure.
    pub fn is_trivial(&self) -> bool {
        self.minus == self.plus
    }

    /// The realized signed measure `+1{plus} − 1{minus}`.
    pub fn measure(&self) -> FunctionMeasure {
        let mut m = FunctionMeasure::new();
        bump(&mut m, &self.plus.0, Rational::one());
        bump(&mut m, &self.plus.1, Rational::one());
        bump(&mut m, &self.minus.0, -Rational::one());
        bump(&mut m, &self.minus.1, -Rational::one());
        m
    }

    /// Serializes to `{"plus": [...], "minus": [...], "layer": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = RcSwapDoc {
            plus: vec![self.plus.0.key(), self.plus.1.key()],
            minus: vec![self.minus.0.key(), self.minus.1.key()],
            layer: self.layer,
        };
        serde_json::to_value(doc).expect("swap docs always serialize")
    }
}

/// Sorts an unordered pair.
fn sort_pair<T: Ord>(pair: (T, T)) -> (T, T) {
    if pair.1 < pair.0 {
        (pair.1, pair.0)
    } else {
        pair
    }
}

/// Enumerates every swap of the collection's function space: all unordered
/// pairs, all layers, deduplicated up to sign and pair order and with zero
/// measures filtered. Output is sorted, hence deterministic. Fails with
/// [`ExtError::CapExceeded`] when the function space itself is larger than
/// `cap` — the count is the product of the menu sizes, so this gate trips
/// quickly on rich collections.
pub fn rc_swaps(sigma: &MenuCollection, cap: usize) -> Result<Vec<RcSwap>, ExtError> {
    let size = sigma
        .menus()
        .iter()
        .map(Menu::len)
        .try_fold(1usize, |acc, n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    if size > cap {
        return Err(ExtError::CapExceeded { size, cap });
    }
    let functions: Vec<ChoiceFunction> = sigma
        .menus()
        .iter()
        .map(|m| m.members().collect::<Vec<_>>())
        .multi_cartesian_product()
        .map(|picks| ChoiceFunction { picks })
        .collect();
    let mut canonical: BTreeMap<_, RcSwap> = BTreeMap::new();
    for (i, c1) in functions.iter().enumerate() {
        for c2 in &functions[i + 1..] {
            for layer in 0..sigma.len() {
                if c1.pick(layer) == c2.pick(layer) {
                    continue;
                }
                let swap = RcSwap::exchange(c1, c2, layer);
                if swap.is_trivial() {
                    continue;
                }
                let key = sort_pair((swap.minus.clone(), swap.plus.clone()));
                canonical.entry(key).or_insert(swap);
            }
        }
    }
    Ok(canonical.into_values().sorted().collect())
}

/// Membership of a signed measure over functions in the swap span — by the
/// equivalence theorem for this model, exactly the test of whether two
/// distributions with this difference generate the same choice
/// probabilities on every collection menu.
pub fn in_rc_span(
    sigma: &MenuCollection,
    diff: &FunctionMeasure,
    cap: usize,
) -> Result<bool, ExtError> {
    for c in diff.keys() {
        ChoiceFunction::from_picks(c.picks().to_vec(), sigma)?;
    }
    let vectors: Vec<FunctionMeasure> = rc_swaps(sigma, cap)?
        .iter()
        .map(RcSwap::measure)
        .collect();
    Ok(span_contains(&vectors, diff))
}

/// Exact bounds on a linear functional of the function masses over a
/// declared support.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RcBoundsReport {
    /// The exact minimum.
    pub min: Rational,
    /// A minimizing distribution over the support (zero masses dropped).
    pub argmin: FunctionMeasure,
    /// The exact maximum.
    pub max: Rational,
    /// A maximizing distribution over the support (zero masses dropped).
    pub argmax: FunctionMeasure,
}

/// Optimizes `Σ_c objective(c)·μ(c)` over the distributions supported on
/// `support` that reproduce `rho` on every collection menu. With the
/// support set to [`rational_functions`], this is the random utility
/// identified set viewed inside the random choice model, so the bounds
/// coincide with the preference-space ones. Fails with
/// [`ExtError::NoRepresentation`] when the support cannot reproduce the
/// rule at all.
pub fn rc_mass_bounds(
    sigma: &MenuCollection,
    rho: &ChoiceRule,
    support: &[ChoiceFunction],
    objective: &FunctionMeasure,
) -> Result<RcBoundsReport, ExtError> {
    if rho.universe() != sigma.universe() {
        return Err(ChoiceError::UniverseMismatch.into());
    }
    let mut seen = BTreeSet::new();
    for c in support {
        ChoiceFunction::from_picks(c.picks().to_vec(), sigma)?;
        if !seen.insert(c.clone()) {
            return Err(ExtError::BadFunction(format!(
                "support lists {:?} twice",
                c.key()
            )));
        }
    }
    for c in objective.keys() {
        if !seen.contains(c) {
            return Err(ExtError::BadFunction(format!(
                "objective weights {:?}, which is not in the support",
                c.key()
            )));
        }
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (layer, menu) in sigma.menus().iter().enumerate() {
        for a in menu.members() {
            rows.push(
                support
                    .iter()
                    .map(|c| {
                        if c.pick(layer) == a {
                            Rational::one()
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect(),
            );
            rhs.push(
                rho.get(a, menu)
                    .ok_or_else(|| ExtError::UncoveredMenu(menu.key().to_owned()))?,
            );
        }
    }
    let problem = LpProblem {
        objective: support
            .iter()
            .map(|c| objective.get(c).cloned().unwrap_or_else(Rational::zero))
            .collect(),
        constraints: RatMatrix::from_rows(rows)?,
        rhs,
        nonneg: vec![true; support.len()],
    };
    let solve = |sense: Sense| -> Result<(Rational, FunctionMeasure), ExtError> {
        match lp_solve(&problem, sense)? {
            LpOutcome::Optimal { optimum, solution } => {
                let mut arg = FunctionMeasure::new();
                for (c, mass) in support.iter().zip(solution) {
                    if !mass.is_zero() {
                        arg.insert(c.clone(), mass);
                    }
                }
                Ok((optimum, arg))
            }
            LpOutcome::Infeasible => Err(ExtError::NoRepresentation),
            LpOutcome::Unbounded => {
                unreachable!("support masses are bounded by the marginal rows")
            }
        }
    };
    let (min, argmin) = solve(Sense::Min)?;
    let (max, argmax) = solve(Sense::Max)?;
    Ok(RcBoundsReport {
        min,
        argmin,
        max,
        argmax,
    })
}

/// Lifts an alternative order to the chain's edges: every edge picking `x`
/// ranks above every edge picking `y` whenever `x ⊵ y`, with ties within an
/// alternative broken lexicographically by menu key (the greedy selection
/// compares only edges leaving a shared node, so the tie-break is inert).
///
/// # Panics
/// Panics if `o` orders a different universe than the collection's.
pub fn lift_rc_order(g: &RcGraph, o: &AltOrder) -> EdgeOrder {
    assert_eq!(
        g.collection().universe(),
        o.universe(),
        "order and chain must share a universe"
    );
    let mut desc = Vec::with_capacity(g.dag().edge_count());
    for &alt in o.alts() {
        let mut chosen: Vec<(String, String)> = g
            .collection()
            .menus()
            .iter()
            .enumerate()
            .filter(|(_, menu)| menu.contains(alt))
            .map(|(layer, menu)| (menu.key().to_owned(), g.edge_id(layer, alt).to_owned()))
            .collect();
        chosen.sort();
        desc.extend(chosen.into_iter().map(|(_, id)| id));
    }
    EdgeOrder::from_descending(g.dag(), desc).expect("the lift covers every edge once")
}

/// The swap-progressive random choice model of a rule under an exogenous
/// order: the greedy selection applied to the chain flow, mapped back to a
/// measure over choice functions. On the chain every path visits every
/// layer, so the selection is the layer-wise comonotone coupling of the
/// menu marginals: the first function picks the best positive-mass member
/// of every menu, and so on down.
pub fn rc_swap_progressive(
    g: &RcGraph,
    rho: &ChoiceRule,
    o: &AltOrder,
) -> Result<FunctionMeasure, ExtError> {
    let f = rc_flow(g, rho)?;
    let eo = lift_rc_order(g, o);
    let pi = swap_progressive(g.dag(), &f, &eo)?;
    g.paths_to_measure(&pi)
}

// ---------------------------------------------------------------------------
// Dynamic discrete choice
// ---------------------------------------------------------------------------

/// A system of conditional choice probabilities over a finite horizon:
/// unconditional first-period probabilities, then one table per later
/// period giving the choice distribution conditional on the previous
/// period's choice.
///
/// Rows are complete (every alternative keyed, zeros included). A row whose
/// conditioning choice is reachable — positive probability under the system
/// itself — must sum to one; a row whose conditioning choice has zero reach
/// carries no information and must be identically zero, which is also how
/// the `0/0` convention of the generating formula is encoded.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DdcData {
    universe: Universe,
    horizon: usize,
    rho1: BTreeMap<Alternative, Rational>,
    cond: Vec<BTreeMap<Alternative, BTreeMap<Alternative, Rational>>>,
}

/// JSON document shape for conditional choice systems.
#[derive(Serialize, Deserialize)]
struct DdcDoc {
    alternatives: Vec<String>,
    #[serde(rename = "T")]
    horizon: usize,
    rho1: BTreeMap<String, Rational>,
    cond: Vec<BTreeMap<String, BTreeMap<String, Rational>>>,
}

/// Checks a complete probability row over the universe: every alternative
/// present, no strangers, no negative entries. Returns the row sum.
fn check_row(
    universe: &Universe,
    row: &BTreeMap<Alternative, Rational>,
    period: usize,
    what: &str,
) -> Result<Rational, ExtError> {
    for (&a, v) in row {
        if !universe.contains(a) {
            return Err(ExtError::BadTable {
                period,
                reason: format!("{what} mentions {a:?}, which is not an alternative"),
            });
        }
        if v.is_negative() {
            return Err(ExtError::BadTable {
                period,
                reason: format!("{what} carries negative probability {v} on {a:?}"),
            });
        }
    }
    for &a in universe.alts() {
        if !row.contains_key(&a) {
            return Err(ExtError::BadTable {
                period,
                reason: format!("{what} is missing an entry for {a:?}"),
            });
        }
    }
    Ok(row.values().sum())
}

impl DdcData {
    /// Validates a conditional choice system: the table count matches the
    /// horizon, every row is complete and nonnegative, the first-period row
    /// and every positive-reach conditional row sum to one, and every
    /// zero-reach row is identically zero.
    pub fn new(
        universe: Universe,
        horizon: usize,
        rho1: BTreeMap<Alternative, Rational>,
        cond: Vec<BTreeMap<Alternative, BTreeMap<Alternative, Rational>>>,
    ) -> Result<Self, ExtError> {
        if horizon == 0 {
            return Err(ExtError::BadHorizon(0));
        }
        if cond.len() != horizon - 1 {
            return Err(ExtError::TableCount {
                expected: horizon - 1,
                got: cond.len(),
            });
        }
        let total = check_row(&universe, &rho1, 1, "the first-period row")?;
        if total != Rational::one() {
            return Err(ExtError::BadTable {
                period: 1,
                reason: format!("the first-period row sums to {total}, expected 1"),
            });
        }
        let mut reach = rho1.clone();
        for (i, table) in cond.iter().enumerate() {
            let period = i + 2;
            for &prev in table.keys() {
                if !universe.contains(prev) {
                    return Err(ExtError::BadTable {
                        period,
                        reason: format!("a row conditions on {prev:?}, which is not an alternative"),
                    });
                }
            }
            let mut next_reach: BTreeMap<Alternative, Rational> = universe
                .alts()
                .iter()
                .map(|&a| (a, Rational::zero()))
                .collect();
            for &prev in universe.alts() {
                let row = table.get(&prev).ok_or_else(|| ExtError::BadTable {
                    period,
                    reason: format!("missing the row conditioned on {prev:?}"),
                })?;
                let total = check_row(&universe, row, period, &format!("the row given {prev:?}"))?;
                let reach_prev = &reach[&prev];
                if reach_prev.is_positive() {
                    if total != Rational::one() {
                        return Err(ExtError::BadTable {
                            period,
                            reason: format!(
                                "the row given {prev:?} sums to {total}, expected 1"
                            ),
                        });
                    }
                } else if !total.is_zero() {
                    return Err(ExtError::BadTable {
                        period,
                        reason: format!(
                            "the row given {prev:?} must be identically zero: its \
                             conditioning choice is unreachable"
                        ),
                    });
                }
                for (&a, v) in row {
                    bump(&mut next_reach, &a, reach_prev * v);
                }
            }
            reach = next_reach;
        }
        Ok(DdcData {
            universe,
            horizon,
            rho1,
            cond,
        })
    }

    /// The universe of alternatives.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The time horizon.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The first-period probability of `a`.
    ///
    /// # Panics
    /// Panics when `a` is not an alternative.
    pub fn rho1(&self, a: Alternative) -> Rational {
        self.rho1[&a].clone()
    }

    /// The period-`t` probability of `next` conditional on `prev` at the
    /// previous period, `t` between 2 and the horizon.
    ///
    /// # Panics
    /// Panics when the period or either alternative is out of range.
    pub fn cond(&self, t: usize, prev: Alternative, next: Alternative) -> Rational {
        assert!(
            (2..=self.horizon).contains(&t),
            "period {t} has no conditional table"
        );
        self.cond[t - 2][&prev][&next].clone()
    }

    /// The probability of choosing `a` at period `t` implied by the system.
    pub fn reach(&self, t: usize, a: Alternative) -> Rational {
        assert!(
            (1..=self.horizon).contains(&t) && self.universe.contains(a),
            "reach of period {t} and alternative {a:?} is undefined"
        );
        let mut reach = self.rho1.clone();
        for table in self.cond.iter().take(t - 1) {
            let mut next: BTreeMap<Alternative, Rational> = self
                .universe
                .alts()
                .iter()
                .map(|&x| (x, Rational::zero()))
                .collect();
            for (&prev, row) in table {
                for (&y, v) in row {
                    bump(&mut next, &y, &reach[&prev] * v);
                }
            }
            reach = next;
        }
        reach[&a].clone()
    }

    /// Serializes to
    /// `{"alternatives": [...], "T": n, "rho1": {...}, "cond": [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = DdcDoc {
            alternatives: self.universe.labels(),
            horizon: self.horizon,
            rho1: self
                .rho1
                .iter()
                .map(|(a, v)| (a.to_string(), v.clone()))
                .collect(),
            cond: self
                .cond
                .iter()
                .map(|table| {
                    table
                        .iter()
                        .map(|(prev, row)| {
                            (
                                prev.to_string(),
                                row.iter().map(|(a, v)| (a.to_string(), v.clone())).collect(),
                            )
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("conditional systems always serialize")
    }

    /// Parses the document shape produced by [`DdcData::to_json`], with an
    /// explicit universe-size cap.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ExtError> {
        let doc: DdcDoc = serde_json::from_value(value.clone())
            .map_err(|e| ExtError::BadDocument(e.to_string()))?;
        let universe = Universe::from_labels(&doc.alternatives, cap)?;
        let key = |s: &str| -> Result<char, ExtError> {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(ExtError::BadDocument(format!(
                    "{s:?} is not a single-character alternative"
                ))),
            }
        };
        let mut rho1 = BTreeMap::new();
        for (a, v) in &doc.rho1 {
            rho1.insert(key(a)?, v.clone());
        }
        let mut cond = Vec::with_capacity(doc.cond.len());
        for table in &doc.cond {
            let mut parsed = BTreeMap::new();
            for (prev, row) in table {
                let mut parsed_row = BTreeMap::new();
                for (a, v) in row {
                    parsed_row.insert(key(a)?, v.clone());
                }
                parsed.insert(key(prev)?, parsed_row);
            }
            cond.push(parsed);
        }
        DdcData::new(universe, doc.horizon, rho1, cond)
    }
}

/// What a dynamic-choice edge encodes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum DdcSlot {
    /// Entering period 1 with this choice.
    Entry(Alternative),
    /// Choosing `next` at period `t` after `prev` at `t − 1`.
    Step {
        t: usize,
        prev: Alternative,
        next: Alternative,
    },
    /// Leaving the final period after this choice.
    Exit(Alternative),
}

/// The layered history graph of a conditional choice system, with a two-way
/// index between edge ids and their (period, choice) meaning.
#[derive(Clone, Debug)]
pub struct DdcGraph {
    universe: Universe,
    horizon: usize,
    dag: Dag,
    entry_ids: BTreeMap<Alternative, String>,
    step_ids: BTreeMap<(usize, Alternative, Alternative), String>,
    exit_ids: BTreeMap<Alternative, String>,
    slot_of: BTreeMap<String, DdcSlot>,
}

/// Builds the history graph for the fixed-menu case: every alternative is
/// available at every period. Nodes are (period, choice) pairs between a
/// source and a sink; a source-to-sink path picks one alternative per
/// period, so paths and choice histories are in bijection.
pub fn build_ddc_graph(d: &DdcData) -> Result<DdcGraph, ExtError> {
    let alts = d.universe().alts().to_vec();
    let first = alts.clone();
    build_ddc_graph_with(d, &first, move |_, _| alts.clone())
}

/// Builds the history graph with menu evolution: `first` is the period-1
/// menu and `menus(t, prev)` the menu offered at period `t` (2-based) after
/// choosing `prev` at `t − 1`. Nodes are the recursively reachable
/// (period, choice) pairs. The data must be supported on the evolved menus:
/// any positive probability on a missing edge is rejected, so the fixed-menu
/// builder is the special case where nothing is ever rejected.
pub fn build_ddc_graph_with<F>(
    d: &DdcData,
    first: &[Alternative],
    menus: F,
) -> Result<DdcGraph, ExtError>
where
    F: Fn(usize, Alternative) -> Vec<Alternative>,
{
    let universe = d.universe().clone();
    let horizon = d.horizon();
    let clean_menu = |raw: Vec<Alternative>, period: usize| -> Result<Vec<Alternative>, ExtError> {
        if raw.is_empty() {
            return Err(ChoiceError::EmptyMenu.into());
        }
        let mut set = BTreeSet::new();
        for a in raw {
            if !universe.contains(a) {
                return Err(ExtError::BadTable {
                    period,
                    reason: format!("the period menu lists {a:?}, which is not an alternative"),
                });
            }
            set.insert(a);
        }
        Ok(set.into_iter().collect())
    };
    let mut period_alts: Vec<Vec<Alternative>> = vec![clean_menu(first.to_vec(), 1)?];
    let mut period_menus: Vec<BTreeMap<Alternative, Vec<Alternative>>> = Vec::new();
    for t in 2..=horizon {
        let mut offered = BTreeMap::new();
        let mut next = BTreeSet::new();
        for &prev in &period_alts[t - 2] {
            let menu = clean_menu(menus(t, prev), t)?;
            next.extend(menu.iter().copied());
            offered.insert(prev, menu);
        }
        period_menus.push(offered);
        period_alts.push(next.into_iter().collect());
    }
    let node = |t: usize, a: Alternative| format!("{t}:{a}");
    let mut nodes = vec![SOURCE_NODE.to_owned(), SINK_NODE.to_owned()];
    for (i, alts) in period_alts.iter().enumerate() {
        nodes.extend(alts.iter().map(|&a| node(i + 1, a)));
    }
    let mut slots: Vec<(DdcSlot, String, String)> = Vec::new();
    for &a in &period_alts[0] {
        slots.push((DdcSlot::Entry(a), SOURCE_NODE.to_owned(), node(1, a)));
    }
    for t in 2..=horizon {
        for (&prev, menu) in &period_menus[t - 2] {
            for &next in menu {
                slots.push((
                    DdcSlot::Step { t, prev, next },
                    node(t - 1, prev),
                    node(t, next),
                ));
            }
        }
    }
    for &a in &period_alts[horizon - 1] {
        slots.push((DdcSlot::Exit(a), node(horizon, a), SINK_NODE.to_owned()));
    }
    let width = edge_id_width(slots.len());
    let mut edges = Vec::with_capacity(slots.len());
    let mut entry_ids = BTreeMap::new();
    let mut step_ids = BTreeMap::new();
    let mut exit_ids = BTreeMap::new();
    let mut slot_of = BTreeMap::new();
    for (i, (slot, tail, head)) in slots.into_iter().enumerate() {
        let id = format!("e{i:0width$}");
        match slot {
            DdcSlot::Entry(a) => {
                entry_ids.insert(a, id.clone());
            }
            DdcSlot::Step { t, prev, next } => {
                step_ids.insert((t, prev, next), id.clone());
            }
            DdcSlot::Exit(a) => {
                exit_ids.insert(a, id.clone());
            }
        }
        slot_of.insert(id.clone(), slot);
        edges.push((id, tail, head));
    }
    let dag = Dag::new(nodes, edges, SOURCE_NODE, SINK_NODE)
        .expect("the history graph is a valid DAG by construction");
    let g = DdcGraph {
        universe,
        horizon,
        dag,
        entry_ids,
        step_ids,
        exit_ids,
        slot_of,
    };
    g.check_support(d)?;
    Ok(g)
}

impl DdcGraph {
    /// The universe of alternatives.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The time horizon.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The underlying DAG.
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Checks that positive probabilities only sit on edges the graph has.
    fn check_support(&self, d: &DdcData) -> Result<(), ExtError> {
        if d.universe() != &self.universe {
            return Err(ChoiceError::UniverseMismatch.into());
        }
        if d.horizon() != self.horizon {
            return Err(ExtError::BadHorizon(d.horizon()));
        }
        for &a in self.universe.alts() {
            if d.rho1(a).is_positive() && !self.entry_ids.contains_key(&a) {
                return Err(ExtError::BadTable {
                    period: 1,
                    reason: format!("positive probability on {a:?}, which is not in the menu"),
                });
            }
        }
        for t in 2..=self.horizon {
            for &prev in self.universe.alts() {
                if !d.reach(t - 1, prev).is_positive() {
                    continue;
                }
                for &next in self.universe.alts() {
                    if d.cond(t, prev, next).is_positive()
                        && !self.step_ids.contains_key(&(t, prev, next))
                    {
                        return Err(ExtError::BadTable {
                            period: t,
                            reason: format!(
                                "positive probability of {next:?} after {prev:?}, which \
                                 is not in the period menu"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The path of a choice history (one character per period).
    pub fn history_to_path(&self, h: &str) -> Result<Path, ExtError> {
        let choices: Vec<char> = h.chars().collect();
        if choices.len() != self.horizon {
            return Err(ExtError::BadHistory(h.to_owned()));
        }
        let mut ids = Vec::with_capacity(self.horizon + 1);
        ids.push(
            self.entry_ids
                .get(&choices[0])
                .ok_or_else(|| ExtError::BadHistory(h.to_owned()))?
                .clone(),
        );
        for t in 2..=self.horizon {
            ids.push(
                self.step_ids
                    .get(&(t, choices[t - 2], choices[t - 1]))
                    .ok_or_else(|| ExtError::BadHistory(h.to_owned()))?
                    .clone(),
            );
        }
        ids.push(
            self.exit_ids
                .get(&choices[self.horizon - 1])
                .ok_or_else(|| ExtError::BadHistory(h.to_owned()))?
                .clone(),
        );
        Ok(self.dag.path_from_edges(ids)?)
    }

    /// The choice history of a path: read off the per-period choices. The
    /// path is re-validated against the graph.
    pub fn path_to_history(&self, path: &Path) -> Result<String, ExtError> {
        self.dag.path_from_edges(path.edge_ids().iter().cloned())?;
        let mut h = String::with_capacity(self.horizon);
        for id in path.edge_ids() {
            match self.slot_of.get(id).expect("validated paths use graph edges") {
                DdcSlot::Entry(a) => h.push(*a),
                DdcSlot::Step { next, .. } => h.push(*next),
                DdcSlot::Exit(_) => {}
            }
        }
        Ok(h)
    }

    /// Transports a measure over histories to the path decomposition with
    /// the same masses. Zero entries are dropped.
    pub fn measure_to_paths(&self, m: &HistoryMeasure) -> Result<PathDecomposition, ExtError> {
        let mut pi = PathDecomposition::empty();
        for (h, mass) in m {
            let path = self.history_to_path(h)?;
            if !mass.is_zero() {
                pi.add(&path, mass.clone());
            }
        }
        Ok(pi)
    }

    /// Transports a path decomposition back to a measure over histories.
    /// Zero entries are dropped.
    pub fn paths_to_measure(&self, pi: &PathDecomposition) -> Result<HistoryMeasure, ExtError> {
        let mut m = HistoryMeasure::new();
        for (path, mass) in pi.entries() {
            if !mass.is_zero() {
                bump(&mut m, &self.path_to_history(path)?, mass.clone());
            }
        }
        Ok(m)
    }
}

/// The edge assignment a conditional choice system induces on its history
/// graph: entry edges carry the first-period probabilities, a step edge
/// carries its conditional probability times the inflow of its tail, and
/// exit edges carry their tail's inflow. The assignment conserves by
/// construction and pushes unit mass from the source, and its path
/// decompositions are exactly the dynamic representations of the system.
pub fn ddc_flow(g: &DdcGraph, d: &DdcData) -> Result<QuasiFlow, ExtError> {
    g.check_support(d)?;
    let mut inflow: BTreeMap<(usize, Alternative), Rational> = BTreeMap::new();
    let mut entries: Vec<(String, Rational)> = Vec::new();
    for (&a, id) in &g.entry_ids {
        let mass = d.rho1(a);
        inflow.insert((1, a), mass.clone());
        entries.push((id.clone(), mass));
    }
    for (&(t, prev, next), id) in &g.step_ids {
        let mass = &inflow[&(t - 1, prev)] * d.cond(t, prev, next);
        bump(&mut inflow, &(t, next), mass.clone());
        entries.push((id.clone(), mass));
    }
    for (&a, id) in &g.exit_ids {
        entries.push((id.clone(), inflow[&(g.horizon(), a)].clone()));
    }
    Ok(QuasiFlow::from_entries(entries))
}

/// Every choice history over the universe, lexicographically ordered. Fails
/// with [`ExtError::CapExceeded`] when there are more than `cap` of them.
pub fn all_histories(
    universe: &Universe,
    horizon: usize,
    cap: usize,
) -> Result<Vec<String>, ExtError> {
    if horizon == 0 {
        return Err(ExtError::BadHorizon(0));
    }
    let size = (0..horizon)
        .try_fold(1usize, |acc, _| acc.checked_mul(universe.size()))
        .unwrap_or(usize::MAX);
    if size > cap {
        return Err(ExtError::CapExceeded { size, cap });
    }
    Ok((0..horizon)
        .map(|_| universe.alts().iter().copied())
        .multi_cartesian_product()
        .map(|choices| choices.into_iter().collect())
        .collect())
}

/// The conditional choice system a distribution over histories generates:
/// first-period marginals, then per-period conditionals with the `0/0`
/// convention resolved to identically-zero rows. This is the brute-force
/// oracle: two distributions are observationally equivalent exactly when
/// their generated systems are equal.
pub fn ddc_phi(
    universe: &Universe,
    horizon: usize,
    mu: &HistoryMeasure,
) -> Result<DdcData, ExtError> {
    if horizon == 0 {
        return Err(ExtError::BadHorizon(0));
    }
    for h in mu.keys() {
        if h.chars().count() != horizon || h.chars().any(|a| !universe.contains(a)) {
            return Err(ExtError::BadHistory(h.clone()));
        }
    }
    check_distribution(mu, |h| h.clone())?;
    let zero_row = || -> BTreeMap<Alternative, Rational> {
        universe
            .alts()
            .iter()
            .map(|&a| (a, Rational::zero()))
            .collect()
    };
    let mut rho1 = zero_row();
    for (h, mass) in mu {
        bump(&mut rho1, &h.chars().next().expect("histories are nonempty"), mass.clone());
    }
    let mut cond = Vec::with_capacity(horizon - 1);
    for t in 2..=horizon {
        let mut joint: BTreeMap<Alternative, BTreeMap<Alternative, Rational>> = universe
            .alts()
            .iter()
            .map(|&prev| (prev, zero_row()))
            .collect();
        let mut marginal = zero_row();
        for (h, mass) in mu {
            let choices: Vec<char> = h.chars().collect();
            let prev = choices[t - 2];
            bump(joint.get_mut(&prev).expect("rows cover the universe"), &choices[t - 1], mass.clone());
            bump(&mut marginal, &prev, mass.clone());
        }
        let table = joint
            .into_iter()
            .map(|(prev, row)| {
                let denom = &marginal[&prev];
                let row = if denom.is_positive() {
                    row.into_iter().map(|(a, v)| (a, v / denom.clone())).collect()
                } else {
                    row
                };
                (prev, row)
            })
            .collect();
        cond.push(table);
    }
    DdcData::new(universe.clone(), horizon, rho1, cond)
}

/// A swap for the dynamic model: a pair of histories agreeing at period
/// `t − 1` together with the conjugates obtained by exchanging their first
/// `t − 1` choices, realized as the signed measure `+1{plus} − 1{minus}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct DdcSwap {
    minus: (String, String),
    plus: (String, String),
    t: usize,
}

/// JSON document shape for dynamic-choice swaps.
#[derive(Serialize, Deserialize)]
struct DdcSwapDoc {
    plus: Vec<String>,
    minus: Vec<String>,
    t: usize,
}

impl DdcSwap {
    /// Builds the swap exchanging the first `t − 1` choices of two
    /// histories that agree at period `t − 1`.
    pub fn new(
        c1: &str,
        c2: &str,
        t: usize,
        universe: &Universe,
        horizon: usize,
    ) -> Result<Self, ExtError> {
        let check = |h: &str| -> Result<Vec<char>, ExtError> {
            let choices: Vec<char> = h.chars().collect();
            if choices.len() != horizon || choices.iter().any(|&a| !universe.contains(a)) {
                return Err(ExtError::BadHistory(h.to_owned()));
            }
            Ok(choices)
        };
        let a = check(c1)?;
        let b = check(c2)?;
        if !(2..=horizon).contains(&t) || a[t - 2] != b[t - 2] {
            return Err(ExtError::NotCompatible {
                left: c1.to_owned(),
                right: c2.to_owned(),
                level: t,
            });
        }
        Ok(Self::exchange(&a, &b, t))
    }

    /// The swap of an already-validated compatible pair.
    fn exchange(c1: &[char], c2: &[char], t: usize) -> Self {
        let splice = |head: &[char], tail: &[char]| -> String {
            head[..t - 1].iter().chain(&tail[t - 1..]).collect()
        };
        let minus = sort_pair((c1.iter().collect::<String>(), c2.iter().collect::<String>()));
        let plus = sort_pair((splice(c2, c1), splice(c1, c2)));
        DdcSwap { minus, plus, t }
    }

    /// The pair the swap subtracts mass from, sorted.
    pub fn minus(&self) -> (&str, &str) {
        (&self.minus.0, &self.minus.1)
    }

    /// The conjugate pair the swap adds mass to, sorted.
    pub fn plus(&self) -> (&str, &str) {
        (&self.plus.0, &self.plus.1)
    }

    /// The compatibility period.
    pub fn t(&self) -> usize {
        self.t
    }

    /// True iff the swap realizes the zero measure.
    pub fn is_trivial(&self) -> bool {
        self.minus == self.plus
    }

    /// The realized signed measure `+1{plus} − 1{minus}`.
    pub fn measure(&self) -> HistoryMeasure {
        let mut m = HistoryMeasure::new();
        bump(&mut m, &self.plus.0, Rational::one());
        bump(&mut m, &self.plus.1, Rational::one());
        bump(&mut m, &self.minus.0, -Rational::one());
        bump(&mut m, &self.minus.1, -Rational::one());
        m
    }

    /// Serializes to `{"plus": [...], "minus": [...], "t": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = DdcSwapDoc {
            plus: vec![self.plus.0.clone(), self.plus.1.clone()],
            minus: vec![self.minus.0.clone(), self.minus.1.clone()],
            t: self.t,
        };
        serde_json::to_value(doc).expect("swap docs always serialize")
    }
}

/// Enumerates every swap of the history space: all unordered compatible
/// pairs, all periods, deduplicated up to sign and pair order and with zero
/// measures filtered. At a horizon of two the compatible exchanges swap
/// identical one-choice prefixes, so the list is empty — two-period systems
/// pin their representation down uniquely.
pub fn ddc_swaps(universe: &Universe, horizon: usize, cap: usize) -> Result<Vec<DdcSwap>, ExtError> {
    let histories = all_histories(universe, horizon, cap)?;
    let split: Vec<Vec<char>> = histories.iter().map(|h| h.chars().collect()).collect();
    let mut canonical: BTreeMap<_, DdcSwap> = BTreeMap::new();
    for (i, c1) in split.iter().enumerate() {
        for c2 in &split[i + 1..] {
            for t in 2..=horizon {
                if c1[t - 2] != c2[t - 2] {
                    continue;
                }
                let swap = DdcSwap::exchange(c1, c2, t);
                if swap.is_trivial() {
                    continue;
                }
                let key = sort_pair((swap.minus.clone(), swap.plus.clone()));
                canonical.entry(key).or_insert(swap);
            }
        }
    }
    Ok(canonical.into_values().sorted().collect())
}

/// Membership of a signed measure over histories in the swap span — by the
/// equivalence theorem for this model, exactly the test of whether two
/// distributions with this difference generate the same conditional choice
/// system.
pub fn in_ddc_span(
    universe: &Universe,
    horizon: usize,
    diff: &HistoryMeasure,
    cap: usize,
) -> Result<bool, ExtError> {
    for h in diff.keys() {
        if h.chars().count() != horizon || h.chars().any(|a| !universe.contains(a)) {
            return Err(ExtError::BadHistory(h.clone()));
        }
    }
    let vectors: Vec<HistoryMeasure> = ddc_swaps(universe, horizon, cap)?
        .iter()
        .map(DdcSwap::measure)
        .collect();
    Ok(span_contains(&vectors, diff))
}

// ---------------------------------------------------------------------------
// Frame-dependent choice
// ---------------------------------------------------------------------------

/// A truncated preference for the two-frame model: a strict ranking over
/// framed and unframed copies of the alternatives, cut at its best unframed
/// entry. Because framing strictly improves an alternative, everything above
/// the cut is framed, so the object is an ordered framed prefix followed by
/// one unframed terminal whose base alternative must already appear in the
/// prefix. Keyed `"prefix|terminal"`, e.g. `"ab|a"` for
/// `a(framed) ≻ b(framed) ≻ a(unframed)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TruncatedPreference {
    framed: Vec<Alternative>,
    last: Alternative,
}

impl TruncatedPreference {
    /// Validates a framed prefix (ordered, distinct, members of the
    /// universe) and an unframed terminal drawn from the prefix.
    pub fn new(prefix: &str, last: Alternative, universe: &Universe) -> Result<Self, ExtError> {
        let framed: Vec<char> = prefix.chars().collect();
        if framed.is_empty() {
            return Err(ExtError::BadTruncated(
                "the framed prefix must be nonempty".to_owned(),
            ));
        }
        let mut seen = BTreeSet::new();
        for &a in &framed {
            if !universe.contains(a) {
                return Err(ExtError::BadTruncated(format!(
                    "{a:?} is not an alternative"
                )));
            }
            if !seen.insert(a) {
                return Err(ExtError::BadTruncated(format!(
                    "{a:?} appears twice in the framed prefix"
                )));
            }
        }
        if !seen.contains(&last) {
            return Err(ExtError::BadTruncated(format!(
                "the unframed terminal {last:?} must repeat a framed entry, \
                 or it would rank above its own framed copy"
            )));
        }
        Ok(TruncatedPreference { framed, last })
    }

    /// The framed prefix, best first.
    pub fn framed(&self) -> &[Alternative] {
        &self.framed
    }

    /// The base alternative of the unframed terminal.
    pub fn last(&self) -> Alternative {
        self.last
    }

    /// Number of ranked entries, the terminal included.
    pub fn len(&self) -> usize {
        self.framed.len() + 1
    }

    /// True iff there are no entries (never holds for validated values).
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The canonical `"prefix|terminal"` key.
    pub fn key(&self) -> String {
        format!("{}|{}", self.framed.iter().collect::<String>(), self.last)
    }

    /// Parses the key shape produced by [`TruncatedPreference::key`].
    pub fn from_key(key: &str, universe: &Universe) -> Result<Self, ExtError> {
        let (prefix, last) = key
            .split_once('|')
            .ok_or_else(|| ExtError::BadTruncated(format!("{key:?} has no '|' separator")))?;
        let mut it = last.chars();
        match (it.next(), it.next()) {
            (Some(a), None) => TruncatedPreference::new(prefix, a, universe),
            _ => Err(ExtError::BadTruncated(format!(
                "{key:?} must end in a single terminal character"
            ))),
        }
    }

    /// The alternative chosen under a recommendation set: the best framed
    /// entry the set highlights, and the unframed terminal when it
    /// highlights none. The terminal's framed copy sits in the prefix, so
    /// the fallback really is maximal: whenever the terminal is itself
    /// recommended, the walk has already stopped at or before its framed
    /// copy.
    pub fn chosen(&self, rec: &BTreeSet<Alternative>) -> Alternative {
        for &a in &self.framed {
            if rec.contains(&a) {
                return a;
            }
        }
        self.last
    }

    /// The set of `k` best entries, each tagged with whether it is framed.
    ///
    /// # Panics
    /// Panics unless `1 ≤ k ≤ len`.
    pub fn k_best(&self, k: usize) -> BTreeSet<(Alternative, bool)> {
        assert!((1..=self.len()).contains(&k), "no {k}-best entry set");
        let mut set: BTreeSet<(Alternative, bool)> = self.framed[..k.min(self.framed.len())]
            .iter()
            .map(|&a| (a, true))
            .collect();
        if k == self.len() {
            set.insert((self.last, false));
        }
        set
    }
}

impl fmt::Display for TruncatedPreference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

impl fmt::Debug for TruncatedPreference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}⟩", self.key())
    }
}

/// Every truncated preference over the universe, in key-sorted order: every
/// ordered sequence of distinct alternatives as the framed prefix, paired
/// with every choice of terminal from the prefix. Fails with
/// [`ExtError::CapExceeded`] when there are more than `cap` of them.
pub fn truncated_preferences(
    universe: &Universe,
    cap: usize,
) -> Result<Vec<TruncatedPreference>, ExtError> {
    let n = universe.size();
    let mut size = 0usize;
    let mut arrangements = 1usize;
    for k in 1..=n {
        arrangements = arrangements
            .checked_mul(n - k + 1)
            .unwrap_or(usize::MAX);
        size = size
            .checked_add(arrangements.checked_mul(k).unwrap_or(usize::MAX))
            .unwrap_or(usize::MAX);
    }
    if size > cap {
        return Err(ExtError::CapExceeded { size, cap });
    }
    let mut out = Vec::with_capacity(size);
    for k in 1..=n {
        for prefix in universe.alts().iter().copied().permutations(k) {
            for &last in &prefix {
                out.push(TruncatedPreference {
                    framed: prefix.clone(),
                    last,
                });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Frame-dependent choice data: for every recommendation set (every subset
/// of the universe, the empty one included) a complete probability row over
/// all alternatives, summing to one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FdRule {
    universe: Universe,
    rows: BTreeMap<BTreeSet<Alternative>, BTreeMap<Alternative, Rational>>,
}

/// JSON document shape for frame-dependent rules.
#[derive(Serialize, Deserialize)]
struct FdRuleDoc {
    alternatives: Vec<String>,
    probabilities: BTreeMap<String, BTreeMap<String, Rational>>,
}

/// The canonical key of a recommendation set: its sorted member string,
/// `"{}"` for the empty set.
pub fn rec_key(rec: &BTreeSet<Alternative>) -> String {
    if rec.is_empty() {
        "{}".to_owned()
    } else {
        rec.iter().collect()
    }
}

/// Parses a recommendation-set key (members in any order, `"{}"` for the
/// empty set) against a universe.
pub fn parse_rec_key(key: &str, universe: &Universe) -> Result<BTreeSet<Alternative>, ExtError> {
    if key == "{}" {
        return Ok(BTreeSet::new());
    }
    let mut set = BTreeSet::new();
    for a in key.chars() {
        if !universe.contains(a) {
            return Err(ChoiceError::NotInUniverse(a).into());
        }
        if !set.insert(a) {
            return Err(ExtError::BadDocument(format!(
                "recommendation set {key:?} lists {a:?} twice"
            )));
        }
    }
    Ok(set)
}

/// Every subset of the universe (the empty one included), in mask order.
fn all_rec_sets(universe: &Universe) -> Vec<BTreeSet<Alternative>> {
    let alts = universe.alts();
    (0..(1usize << alts.len()))
        .map(|mask| {
            alts.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &a)| a)
                .collect()
        })
        .collect()
}

impl FdRule {
    /// Validates frame-dependent data: one complete row per subset of the
    /// universe, every row summing to one.
    pub fn new(
        universe: Universe,
        rows: BTreeMap<BTreeSet<Alternative>, BTreeMap<Alternative, Rational>>,
    ) -> Result<Self, ExtError> {
        for rec in rows.keys() {
            for &a in rec {
                if !universe.contains(a) {
                    return Err(ChoiceError::NotInUniverse(a).into());
                }
            }
        }
        for rec in all_rec_sets(&universe) {
            let row = rows.get(&rec).ok_or_else(|| ExtError::BadDocument(format!(
                "missing the row for recommendation set {:?}",
                rec_key(&rec)
            )))?;
            let total = check_row(&universe, row, 1, &format!("the row for {:?}", rec_key(&rec)))
                .map_err(|e| match e {
                    ExtError::BadTable { reason, .. } => ExtError::BadDocument(reason),
                    other => other,
                })?;
            if total != Rational::one() {
                return Err(ExtError::BadDocument(format!(
                    "the row for {:?} sums to {total}, expected 1",
                    rec_key(&rec)
                )));
            }
        }
        Ok(FdRule { universe, rows })
    }

    /// The universe of alternatives.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The probability of choosing `a` under recommendation set `rec`, or
    /// `None` when `rec` is not a subset of this universe.
    pub fn get(&self, a: Alternative, rec: &BTreeSet<Alternative>) -> Option<Rational> {
        self.rows.get(rec).map(|row| row[&a].clone())
    }

    /// The probability of choosing `a` under recommendation set `rec`.
    ///
    /// # Panics
    /// Panics when `rec` is not a subset of the universe or `a` is not an
    /// alternative.
    pub fn prob(&self, a: Alternative, rec: &BTreeSet<Alternative>) -> Rational {
        self.get(a, rec)
            .unwrap_or_else(|| panic!("no row for recommendation set {:?}", rec_key(rec)))
    }

    /// Serializes to `{"alternatives": [...], "probabilities": {...}}` with
    /// rows keyed by recommendation set.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = FdRuleDoc {
            alternatives: self.universe.labels(),
            probabilities: self
                .rows
                .iter()
                .map(|(rec, row)| {
                    (
                        rec_key(rec),
                        row.iter().map(|(a, v)| (a.to_string(), v.clone())).collect(),
                    )
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("frame-dependent rules always serialize")
    }

    /// Parses the document shape produced by [`FdRule::to_json`], with an
    /// explicit universe-size cap.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, ExtError> {
        let doc: FdRuleDoc = serde_json::from_value(value.clone())
            .map_err(|e| ExtError::BadDocument(e.to_string()))?;
        let universe = Universe::from_labels(&doc.alternatives, cap)?;
        let mut rows = BTreeMap::new();
        for (rec, row) in &doc.probabilities {
            let rec = parse_rec_key(rec, &universe)?;
            let mut parsed = BTreeMap::new();
            for (a, v) in row {
                let mut it = a.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => parsed.insert(c, v.clone()),
                    _ => {
                        return Err(ExtError::BadDocument(format!(
                            "{a:?} is not a single-character alternative"
                        )))
                    }
                };
            }
            if rows.insert(rec, parsed).is_some() {
                return Err(ExtError::BadDocument(
                    "two rows name the same recommendation set".to_owned(),
                ));
            }
        }
        FdRule::new(universe, rows)
    }
}

/// The frame-dependent data a distribution over truncated preferences
/// generates: under recommendation set `A`, each preference contributes its
/// mass to the alternative it chooses from the virtual menu where members
/// of `A` appear framed and the rest unframed.
pub fn fd_phi(universe: &Universe, mu: &TruncatedMeasure) -> Result<FdRule, ExtError> {
    for p in mu.keys() {
        TruncatedPreference::new(&p.framed.iter().collect::<String>(), p.last, universe)?;
    }
    check_distribution(mu, TruncatedPreference::key)?;
    let mut rows = BTreeMap::new();
    for rec in all_rec_sets(universe) {
        let mut row: BTreeMap<Alternative, Rational> = universe
            .alts()
            .iter()
            .map(|&a| (a, Rational::zero()))
            .collect();
        for (p, mass) in mu {
            bump(&mut row, &p.chosen(&rec), mass.clone());
        }
        rows.insert(rec, row);
    }
    FdRule::new(universe.clone(), rows)
}

/// A swap for the frame-dependent model: a pair of truncated preferences
/// agreeing on their `k`-best entry set together with the conjugates
/// obtained by exchanging their `k`-initial segments, realized as the
/// signed measure `+1{plus} − 1{minus}`. Exchanged tails keep their own
/// terminals, and the result always stays inside the truncated family: each
/// terminal's framed copy lies in the shared prefix set or in its own
/// retained tail.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FdSwap {
    minus: (TruncatedPreference, TruncatedPreference),
    plus: (TruncatedPreference, TruncatedPreference),
    k: usize,
}

/// JSON document shape for frame-dependent swaps.
#[derive(Serialize, Deserialize)]
struct FdSwapDoc {
    plus: Vec<String>,
    minus: Vec<String>,
    k: usize,
}

impl FdSwap {
    /// Builds the swap exchanging the `k`-initial segments of two truncated
    /// preferences with equal `k`-best entry sets. The compatibility level
    /// must leave both terminals in their tails, i.e. `k` is at most either
    /// framed-prefix length.
    pub fn new(
        p: &TruncatedPreference,
        q: &TruncatedPreference,
        k: usize,
        universe: &Universe,
    ) -> Result<Self, ExtError> {
        let p = TruncatedPreference::new(&p.framed.iter().collect::<String>(), p.last, universe)?;
        let q = TruncatedPreference::new(&q.framed.iter().collect::<String>(), q.last, universe)?;
        let compatible = (1..=p.framed.len().min(q.framed.len())).contains(&k)
            && p.framed[..k].iter().collect::<BTreeSet<_>>()
                == q.framed[..k].iter().collect::<BTreeSet<_>>();
        if !compatible {
            return Err(ExtError::NotCompatible {
                left: p.key(),
                right: q.key(),
                level: k,
            });
        }
        Ok(Self::exchange(&p, &q, k))
    }

    /// The swap of an already-validated compatible pair.
    fn exchange(p: &TruncatedPreference, q: &TruncatedPreference, k: usize) -> Self {
        let splice = |head: &TruncatedPreference, tail: &TruncatedPreference| TruncatedPreference {
            framed: head.framed[..k]
                .iter()
                .chain(&tail.framed[k..])
                .copied()
                .collect(),
            last: tail.last,
        };
        let minus = sort_pair((p.clone(), q.clone()));
        let plus = sort_pair((splice(q, p), splice(p, q)));
        FdSwap { minus, plus, k }
    }

    /// The pair the swap subtracts mass from, sorted.
    pub fn minus(&self) -> (&TruncatedPreference, &TruncatedPreference) {
        (&self.minus.0, &self.minus.1)
    }

    /// The conjugate pair the swap adds mass to, sorted.
    pub fn plus(&self) -> (&TruncatedPreference, &TruncatedPreference) {
        (&self.plus.0, &self.plus.1)
    }

    /// The compatibility level the initial segments are exchanged at.
    pub fn k(&self) -> usize {
        self.k
    }

    /// True iff the swap realizes the zero measure.
    pub fn is_trivial(&self) -> bool {
        self.minus == self.plus
    }

    /// The realized signed measure `+1{plus} − 1{minus}`.
    pub fn measure(&self) -> TruncatedMeasure {
        let mut m = TruncatedMeasure::new();
        bump(&mut m, &self.plus.0, Rational::one());
        bump(&mut m, &self.plus.1, Rational::one());
        bump(&mut m, &self.minus.0, -Rational::one());
        bump(&mut m, &self.minus.1, -Rational::one());
        m
    }

    /// Serializes to `{"plus": [...], "minus": [...], "k": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = FdSwapDoc {
            plus: vec![self.plus.0.key(), self.plus.1.key()],
            minus: vec![self.minus.0.key(), self.minus.1.key()],
            k: self.k,
        };
        serde_json::to_value(doc).expect("swap docs always serialize")
    }
}

/// Enumerates every swap of the truncated family: all unordered pairs, all
/// compatibility levels, deduplicated up to sign and pair order and with
/// zero measures filtered. Output is sorted, hence deterministic. The cap
/// gates the size of the family itself.
pub fn fd_swaps(universe: &Universe, cap: usize) -> Result<Vec<FdSwap>, ExtError> {
    let prefs = truncated_preferences(universe, cap)?;
    let mut canonical: BTreeMap<_, FdSwap> = BTreeMap::new();
    for (i, p) in prefs.iter().enumerate() {
        for q in &prefs[i + 1..] {
            for k in 1..=p.framed.len().min(q.framed.len()) {
                if p.framed[..k].iter().collect::<BTreeSet<_>>()
                    != q.framed[..k].iter().collect::<BTreeSet<_>>()
                {
                    continue;
                }
                let swap = FdSwap::exchange(p, q, k);
                if swap.is_trivial() {
                    continue;
                }
                let key = sort_pair((swap.minus.clone(), swap.plus.clone()));
                canonical.entry(key).or_insert(swap);
            }
        }
    }
    Ok(canonical.into_values().sorted().collect())
}

/// Membership of a signed measure over truncated preferences in the swap
/// span — by the equivalence theorem for this model, exactly the test of
/// whether two distributions with this difference generate the same
/// frame-dependent data.
pub fn in_fd_span(
    universe: &Universe,
    diff: &TruncatedMeasure,
    cap: usize,
) -> Result<bool, ExtError> {
    for p in diff.keys() {
        TruncatedPreference::new(&p.framed.iter().collect::<String>(), p.last, universe)?;
    }
    let vectors: Vec<TruncatedMeasure> =
        fd_swaps(universe, cap)?.iter().map(FdSwap::measure).collect();
    Ok(span_contains(&vectors, diff))
}

/// The frame-set graph of the two-frame model, with a two-way index between
/// edge ids and (frame set, alternative, framed?) triples.
#[derive(Clone, Debug)]
pub struct FdGraph {
    universe: Universe,
    dag: Dag,
    edge_of: BTreeMap<(String, Alternative, bool), String>,
    slot_of: BTreeMap<String, (BTreeSet<Alternative>, Alternative, bool)>,
}

/// Builds the frame-set graph: one node per subset of the universe (the set
/// of alternatives still framed), plus a sink. From the node of `S`, a
/// framed edge per `y ∈ S` leads to the node of `S ∖ {y}` — ranking `y`'s
/// framed copy next — and an unframed edge per `z ∉ S` leads to the sink —
/// ranking `z`'s unframed copy next and truncating there. The source is the
/// all-framed node, so source-to-sink paths spell out exactly the truncated
/// preferences.
pub fn build_fd_graph(universe: &Universe) -> FdGraph {
    let sets = all_rec_sets(universe);
    let mut nodes: Vec<String> = sets.iter().map(rec_key).collect();
    nodes.push(SINK_NODE.to_owned());
    let n = universe.size();
    let width = edge_id_width(n * (1 << n));
    let mut edges = Vec::new();
    let mut edge_of = BTreeMap::new();
    let mut slot_of = BTreeMap::new();
    let mut next = 0usize;
    let by_key: BTreeMap<String, &BTreeSet<Alternative>> =
        sets.iter().map(|s| (rec_key(s), s)).collect();
    for (key, set) in &by_key {
        for &a in universe.alts() {
            let framed = set.contains(&a);
            let head = if framed {
                let mut rest = (*set).clone();
                rest.remove(&a);
                rec_key(&rest)
            } else {
                SINK_NODE.to_owned()
            };
            let id = format!("e{next:0width$}");
            next += 1;
            edges.push((id.clone(), key.clone(), head));
            edge_of.insert((key.clone(), a, framed), id.clone());
            slot_of.insert(id, ((*set).clone(), a, framed));
        }
    }
    let source = rec_key(&universe.alts().iter().copied().collect());
    let dag = Dag::new(nodes, edges, &source, SINK_NODE)
        .expect("the frame-set graph is a valid DAG by construction");
    FdGraph {
        universe: universe.clone(),
        dag,
        edge_of,
        slot_of,
    }
}

impl FdGraph {
    /// The universe of alternatives.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The underlying DAG.
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// The id of the edge ranking `a` next at frame set `rec` — its framed
    /// copy when `framed`, its unframed terminal otherwise.
    ///
    /// # Panics
    /// Panics when no such edge exists (e.g. a framed edge for `a ∉ rec`).
    pub fn edge_id(&self, rec: &BTreeSet<Alternative>, a: Alternative, framed: bool) -> &str {
        self.edge_of
            .get(&(rec_key(rec), a, framed))
            .unwrap_or_else(|| {
                panic!(
                    "no {} edge for {a:?} at frame set {:?}",
                    if framed { "framed" } else { "unframed" },
                    rec_key(rec)
                )
            })
    }

    /// The (frame set, alternative, framed?) triple of an edge id.
    pub fn slot(&self, edge_id: &str) -> Option<(&BTreeSet<Alternative>, Alternative, bool)> {
        self.slot_of.get(edge_id).map(|(s, a, f)| (s, *a, *f))
    }

    /// The path of a truncated preference: framed edges peel off its prefix
    /// in ranking order, and the unframed terminal edge exits to the sink.
    ///
    /// # Panics
    /// Panics if the preference does not fit this universe.
    pub fn pref_to_path(&self, p: &TruncatedPreference) -> Path {
        let mut current: BTreeSet<Alternative> = self.universe.alts().iter().copied().collect();
        let mut ids = Vec::with_capacity(p.len());
        for &a in p.framed() {
            ids.push(self.edge_id(&current, a, true).to_owned());
            current.remove(&a);
        }
        ids.push(self.edge_id(&current, p.last(), false).to_owned());
        self.dag
            .path_from_edges(ids)
            .expect("truncated-preference paths are valid by construction")
    }

    /// The truncated preference of a path: read off the alternatives of its
    /// framed edges, then the terminal. The path is re-validated against
    /// the graph.
    pub fn path_to_pref(&self, path: &Path) -> Result<TruncatedPreference, ExtError> {
        self.dag.path_from_edges(path.edge_ids().iter().cloned())?;
        let mut prefix = String::new();
        let mut last = None;
        for id in path.edge_ids() {
            let (_, a, framed) = self.slot(id).expect("validated paths use graph edges");
            if framed {
                prefix.push(a);
            } else {
                last = Some(a);
            }
        }
        TruncatedPreference::new(
            &prefix,
            last.expect("paths end on an unframed edge"),
            &self.universe,
        )
    }

    /// Transports a measure over truncated preferences to the path
    /// decomposition with the same masses. Zero entries are dropped.
    pub fn measure_to_paths(&self, m: &TruncatedMeasure) -> Result<PathDecomposition, ExtError> {
        let mut pi = PathDecomposition::empty();
        for (p, mass) in m {
            let p =
                TruncatedPreference::new(&p.framed.iter().collect::<String>(), p.last, &self.universe)?;
            if !mass.is_zero() {
                pi.add(&self.pref_to_path(&p), mass.clone());
            }
        }
        Ok(pi)
    }

    /// Transports a path decomposition back to a measure over truncated
    /// preferences. Zero entries are dropped.
    pub fn paths_to_measure(&self, pi: &PathDecomposition) -> Result<TruncatedMeasure, ExtError> {
        let mut m = TruncatedMeasure::new();
        for (path, mass) in pi.entries() {
            if !mass.is_zero() {
                bump(&mut m, &self.path_to_pref(path)?, mass.clone());
            }
        }
        Ok(m)
    }
}

/// The edge assignment frame-dependent data induce on the frame-set graph,
/// by Möbius inversion down the subset lattice: writing `y(e)` for the
/// assignment, a framed edge for `x` at `S` satisfies
/// `ρ(x, S) = Σ_{S' ⊇ S} y(x framed at S')` — under recommendation `S`, `x`
/// is chosen framed exactly by the preferences ranking `x`'s framed copy
/// first among `S`'s copies, wherever the larger frame sets rank it — and an
/// unframed edge satisfies the same identity over the supersets avoiding
/// `x`. For any complete rule the assignment conserves and pushes unit mass
/// from the source; the rule has a frame-dependent representation exactly
/// when every edge is nonnegative, in which case path decompositions
/// transport back to representing distributions.
pub fn fd_flow(g: &FdGraph, rule: &FdRule) -> Result<QuasiFlow, ExtError> {
    if rule.universe() != g.universe() {
        return Err(ChoiceError::UniverseMismatch.into());
    }
    let mut sets = all_rec_sets(g.universe());
    sets.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let mut y: BTreeMap<(String, Alternative, bool), Rational> = BTreeMap::new();
    for set in &sets {
        for &a in g.universe().alts() {
            let framed = set.contains(&a);
            let mut mass = rule.prob(a, set);
            for sup in all_rec_sets(g.universe()) {
                if sup.len() > set.len()
                    && set.is_subset(&sup)
                    && (framed || !sup.contains(&a))
                {
                    mass = mass - &y[&(rec_key(&sup), a, framed)];
                }
            }
            y.insert((rec_key(set), a, framed), mass);
        }
    }
    Ok(QuasiFlow::from_entries(y.into_iter().map(
        |((key, a, framed), mass)| {
            let set = parse_rec_key(&key, g.universe()).expect("keys round trip");
            (g.edge_id(&set, a, framed).to_owned(), mass)
        },
    )))
}

/// Decomposes frame-dependent data into a representing distribution over
/// truncated preferences, or reports the first negative edge of the
/// canonical flow when none exists.
pub fn fd_rationalize(universe: &Universe, rule: &FdRule) -> Result<TruncatedMeasure, ExtError> {
    let g = build_fd_graph(universe);
    let f = fd_flow(&g, rule)?;
    for (id, mass) in f.entries() {
        if mass.is_negative() {
            return Err(ExtError::NotRationalizable {
                edge: id.to_owned(),
                mass: mass.clone(),
            });
        }
    }
    if let Err(v) = validate_quasiflow(g.dag(), &f) {
        return Err(DagError::InvalidQuasiFlow(v).into());
    }
    let pi = decompose_greedy(g.dag(), &f)?;
    g.paths_to_measure(&pi)
}
