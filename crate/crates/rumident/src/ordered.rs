//! Order-guided selection among rationalizations: swap-progressive
//! decompositions and single-crossing checks.
//!
//! When alternatives carry a natural linear order (price, fiscal cost,
//! risk), that order can be lifted to the lattice's edges and used to pick
//! one canonical decomposition out of an identified set: at every node,
//! route as much mass as possible along the highest-ranked edge first. The
//! result — the *swap-progressive* decomposition — exists for every
//! conserved nonnegative flow and is unique given the order, so it turns
//! any rationalizable rule into a point prediction without shrinking what
//! the model can explain.
//!
//! The module provides the order types ([`AltOrder`], [`EdgeOrder`]), the
//! lift ([`lift_order`]), the greedy selection ([`swap_progressive`] on raw
//! flows, [`swap_progressive_rationalization`] end to end), and the two
//! support tests [`is_swap_progressive`] and [`is_single_crossing`], both
//! decided by building the pairwise precedence relation their definitions
//! force and checking it extends to a linear order.

use crate::choicecore::{
    k_compatible, Alternative, ChoiceError, ChoiceRule, Distribution, Preference, Universe,
};
use crate::dagcore::{
    validate_quasiflow, Dag, DagError, PathDecomposition, QuasiFlow,
};
use crate::linalg::Rational;
use crate::rumgraph::{bm_flow, build_rum_graph, RumError, RumGraph};
use std::collections::BTreeMap;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrderedError {
    /// A domain-type error from the core module.
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    /// A graph or flow error.
    #[error(transparent)]
    Dag(#[from] DagError),
    /// An error from the lattice machinery.
    #[error(transparent)]
    Rum(#[from] RumError),
    /// The rule is inconsistent with random utility, so no decomposition
    /// of its flow exists.
    #[error("rule is not rationalizable: edge {edge} carries mass {mass}")]
    NotRationalizable {
        /// The offending lattice edge.
        edge: String,
        /// Its negative mass.
        mass: Rational,
    },
    /// An edge order naming an edge outside the graph.
    #[error("edge order names unknown edge {0:?}")]
    UnknownEdge(String),
    /// An edge order listing an edge twice.
    #[error("edge order repeats edge {0:?}")]
    DuplicateEdge(String),
    /// An edge order that is not total over the graph's edges.
    #[error("edge order covers {got} of {expected} edges")]
    IncompleteOrder {
        /// Number of edges in the graph.
        expected: usize,
        /// Number of edges listed.
        got: usize,
    },
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

// ---------------------------------------------------------------------------
// Orders
// ---------------------------------------------------------------------------

/// A linear order `⊵` over the alternatives of a universe, stored as the
/// descending sequence (first = highest).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AltOrder {
    universe: Universe,
    desc: Vec<Alternative>,
}

impl AltOrder {
    /// Validates a descending sequence as a permutation of the universe.
    pub fn new(universe: &Universe, desc: &[Alternative]) -> Result<Self, OrderedError> {
        let mut sorted = desc.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != universe.alts() {
            return Err(OrderedError::Choice(ChoiceError::NotAPermutation(
                desc.iter().collect(),
            )));
        }
        Ok(AltOrder {
            universe: universe.clone(),
            desc: desc.to_vec(),
        })
    }

    /// [`AltOrder::new`] from a string such as `"abdc"` (meaning
    /// `a ⊵ b ⊵ d ⊵ c`).
    pub fn from_key(universe: &Universe, key: &str) -> Result<Self, OrderedError> {
        AltOrder::new(universe, &key.chars().collect::<Vec<_>>())
    }

    /// The universe the order lives on.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The alternatives in descending order.
    pub fn alts(&self) -> &[Alternative] {
        &self.desc
    }

    /// Position of an alternative, `0` being the highest.
    ///
    /// # Panics
    /// Panics if the alternative is not in the universe.
    pub fn rank(&self, a: Alternative) -> usize {
        self.desc
            .iter()
            .position(|&x| x == a)
            .expect("alternative of the ordered universe")
    }

    /// True iff `x ⊵ y` (weakly higher; reflexive).
    pub fn geq(&self, x: Alternative, y: Alternative) -> bool {
        self.rank(x) <= self.rank(y)
    }

    /// True iff `x` is strictly higher than `y`.
    pub fn above(&self, x: Alternative, y: Alternative) -> bool {
        self.rank(x) < self.rank(y)
    }

    /// Serializes as `{"order": ["a", "b", "d", "c"]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "order": self.desc.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        })
    }

    /// Parses the [`AltOrder::to_json`] document against a known universe.
    pub fn from_json(value: &serde_json::Value, universe: &Universe) -> Result<Self, OrderedError> {
        let labels: Vec<String> = serde_json::from_value(
            value
                .get("order")
                .ok_or_else(|| OrderedError::BadDocument("missing \"order\"".into()))?
                .clone(),
        )
        .map_err(|e| OrderedError::BadDocument(e.to_string()))?;
        let mut desc = Vec::with_capacity(labels.len());
        for label in &labels {
            let mut chars = label.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => desc.push(c),
                _ => return Err(OrderedError::Choice(ChoiceError::BadLabel(label.clone()))),
            }
        }
        AltOrder::new(universe, &desc)
    }
}

/// A total linear order over the edges of a fixed graph, stored as the
/// descending edge-id sequence.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EdgeOrder {
    desc: Vec<String>,
    rank: BTreeMap<String, usize>,
}

impl EdgeOrder {
    /// Validates a descending edge-id sequence as total over `g`'s edges.
    pub fn from_descending(g: &Dag, desc: Vec<String>) -> Result<Self, OrderedError> {
        let mut rank = BTreeMap::new();
        for (i, id) in desc.iter().enumerate() {
            if g.endpoints(id).is_none() {
                return Err(OrderedError::UnknownEdge(id.clone()));
            }
            if rank.insert(id.clone(), i).is_some() {
                return Err(OrderedError::DuplicateEdge(id.clone()));
            }
        }
        if desc.len() != g.edge_count() {
            return Err(OrderedError::IncompleteOrder {
                expected: g.edge_count(),
                got: desc.len(),
            });
        }
        Ok(EdgeOrder { desc, rank })
    }

    /// The edge ids in descending order.
    pub fn descending(&self) -> &[String] {
        &self.desc
    }

    /// Position of an edge, `0` being the highest.
    ///
    /// # Panics
    /// Panics if the edge is not ordered.
    pub fn rank(&self, edge_id: &str) -> usize {
        *self.rank.get(edge_id).expect("edge of the ordered graph")
    }
}

/// Lifts an alternative order to the lattice's edges: every edge choosing
/// `x` ranks above every edge choosing `y` whenever `x ⊵ y`, and ties
/// within an alternative are broken lexicographically by menu key (the
/// induced decomposition does not depend on this tie-break; the tests
/// randomize it).
///
/// # Panics
/// Panics if `o` orders a different universe than `g`'s.
pub fn lift_order(g: &RumGraph, o: &AltOrder) -> EdgeOrder {
    assert_eq!(
        g.universe(),
        o.universe(),
        "order and lattice must share a universe"
    );
    let mut desc = Vec::with_capacity(g.dag().edge_count());
    for &alt in o.alts() {
        let mut chosen: Vec<(String, String)> = g
            .dag()
            .edges()
            .filter_map(|(id, _, _)| {
                let (menu, a) = g.menu_alt(id).expect("edge of the same lattice");
                (a == alt).then(|| (menu.key().to_owned(), id.to_owned()))
            })
            .collect();
        chosen.sort();
        desc.extend(chosen.into_iter().map(|(_, id)| id));
    }
    EdgeOrder::from_descending(g.dag(), desc).expect("lift covers every edge once")
}

// ---------------------------------------------------------------------------
// The greedy selection
// ---------------------------------------------------------------------------

/// The unique swap-progressive path decomposition of a conserved
/// nonnegative quasi-flow: repeatedly walk from source to sink taking the
/// highest-ranked positive-mass edge at every node, subtract the
/// bottleneck, and stop when the flow is exhausted. Each round zeroes at
/// least one edge, so the loop runs at most `|E|` times.
///
/// # Panics
/// Panics if `eo` does not order `g`'s edges.
pub fn swap_progressive(
    g: &Dag,
    f: &QuasiFlow,
    eo: &EdgeOrder,
) -> Result<PathDecomposition, OrderedError> {
    validate_quasiflow(g, f).map_err(DagError::InvalidQuasiFlow)?;
    let mut residual = f.clone();
    let mut result = PathDecomposition::empty();
    while !residual.is_zero() {
        let mut node = g.source().to_owned();
        let mut edges: Vec<String> = Vec::new();
        while node != g.sink() {
            let best = g
                .out_edge_ids(&node)
                .into_iter()
                .filter(|id| residual.get(id).is_positive())
                .min_by_key(|id| eo.rank(id))
                .expect("conservation leaves an exit while mass remains");
            node = g.endpoints(best).expect("edge of the same graph").1.to_owned();
            edges.push(best.to_owned());
        }
        let bottleneck = edges
            .iter()
            .map(|id| residual.get(id))
            .min()
            .expect("paths have at least one edge");
        for id in &edges {
            residual.add(id, -bottleneck.clone());
        }
        let path = g.path_from_edges(edges)?;
        result.add(&path, bottleneck);
    }
    Ok(result)
}

/// End-to-end selection for a choice rule: computes the rule's flow,
/// rejects it if any edge mass is negative, lifts the order, and maps the
/// swap-progressive decomposition back to a distribution over preferences.
pub fn swap_progressive_rationalization(
    rho: &ChoiceRule,
    o: &AltOrder,
) -> Result<Distribution, OrderedError> {
    if rho.universe() != o.universe() {
        return Err(OrderedError::Choice(ChoiceError::UniverseMismatch));
    }
    let g = build_rum_graph(rho.universe());
    let f = bm_flow(&g, rho)?;
    for (id, mass) in f.entries() {
        if mass.is_negative() {
            return Err(OrderedError::NotRationalizable {
                edge: id.to_owned(),
                mass: mass.clone(),
            });
        }
    }
    let eo = lift_order(&g, o);
    let pi = swap_progressive(g.dag(), &f, &eo)?;
    Ok(g.decomposition_to_dist(&pi)?)
}

// ---------------------------------------------------------------------------
// Support tests
// ---------------------------------------------------------------------------

/// Checks that a precedence relation on `0..n` (edge `u → v` meaning `u`
/// must come earlier) admits a linear extension.
fn has_linear_extension(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        out[u].push(v);
        indegree[v] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(w);
            }
        }
    }
    seen == n
}

/// True iff the support of `mu` can be ordered `≻₁, …, ≻_N` such that
/// whenever `≻ᵢ` and `≻ⱼ` agree on their top-`k` *set*, `i > j` implies
/// the `(k+1)`-th alternative of `≻ᵢ` weakly dominates that of `≻ⱼ`.
/// Equal next-alternatives impose no constraint; each strict disagreement
/// forces one precedence, and the test is whether these precedences are
/// acyclic.
///
/// # Panics
/// Panics if `o` orders a different universe than `mu`'s.
pub fn is_swap_progressive(mu: &Distribution, o: &AltOrder) -> bool {
    assert_eq!(
        mu.universe(),
        o.universe(),
        "order and distribution must share a universe"
    );
    let support = mu.support();
    let n = mu.universe().size();
    let mut edges = Vec::new();
    for i in 0..support.len() {
        for j in (i + 1)..support.len() {
            let (p, q) = (&support[i], &support[j]);
            for k in 0..n {
                if !k_compatible(p, q, k) {
                    continue;
                }
                let (x, y) = (p.alt_at_rank(k), q.alt_at_rank(k));
                if x == y {
                    continue;
                }
                if o.above(x, y) {
                    // p's next alternative dominates, so p must come later.
                    edges.push((j, i));
                } else {
                    edges.push((i, j));
                }
            }
        }
    }
    has_linear_extension(support.len(), &edges)
}

/// True iff the support of `mu` can be ordered `≻₁, …, ≻_N` such that once
/// a dominating alternative (`x ⊵ y`) is preferred to `y`, it stays
/// preferred in every later preference. Preference `p` may precede `q`
/// exactly when `p`'s set of order-aligned comparisons is contained in
/// `q`'s; each pair therefore forces at most one precedence, and
/// incomparable pairs are immediate failures.
///
/// # Panics
/// Panics if `o` orders a different universe than `mu`'s.
pub fn is_single_crossing(mu: &Distribution, o: &AltOrder) -> bool {
    assert_eq!(
        mu.universe(),
        o.universe(),
        "order and distribution must share a universe"
    );
    let support = mu.support();
    let alts = mu.universe().alts();
    let may_precede = |p: &Preference, q: &Preference| {
        alts.iter().all(|&x| {
            alts.iter().all(|&y| {
                x == y || !o.above(x, y) || !p.prefers(x, y) || q.prefers(x, y)
            })
        })
    };
    let mut edges = Vec::new();
    for i in 0..support.len() {
        for j in (i + 1)..support.len() {
            let forward = may_precede(&support[i], &support[j]);
            let backward = may_precede(&support[j], &support[i]);
            match (forward, backward) {
                (false, false) => return false,
                (true, false) => edges.push((i, j)),
                (false, true) => edges.push((j, i)),
                // Distinct preferences disagree somewhere, so both
                // directions can only coexist for equal preferences.
                (true, true) => unreachable!("distinct preferences are comparable at most once"),
            }
        }
    }
    has_linear_extension(support.len(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choicecore::{phi, Menu};
    use crate::idset::{is_extreme, SupportRestriction};
    use itertools::Itertools;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn abcd() -> Universe {
        Universe::new(&['a', 'b', 'c', 'd']).unwrap()
    }

    fn pref(u: &Universe, key: &str) -> Preference {
        Preference::new(key, u).unwrap()
    }

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

    fn half_half(u: &Universe, a: &str, b: &str) -> Distribution {
        Distribution::from_entries(
            u.clone(),
            vec![(a.into(), r(1, 2)), (b.into(), r(1, 2))],
        )
        .unwrap()
    }

    #[test]
    fn alt_order_validates_and_serializes() {
        let u = abcd();
        let o = AltOrder::from_key(&u, "abdc").unwrap();
        assert_eq!(o.alts(), &['a', 'b', 'd', 'c']);
        assert_eq!(o.rank('a'), 0);
        assert!(o.geq('b', 'b') && o.geq('b', 'c') && !o.geq('c', 'd'));
        assert!(o.above('d', 'c') && !o.above('d', 'd'));
        let doc = o.to_json();
        assert_eq!(doc["order"][2], "d");
        assert_eq!(AltOrder::from_json(&doc, &u).unwrap(), o);
        assert!(matches!(
            AltOrder::from_key(&u, "abca"),
            Err(OrderedError::Choice(ChoiceError::NotAPermutation(_)))
        ));
        assert!(matches!(
            AltOrder::from_key(&u, "abc"),
            Err(OrderedError::Choice(ChoiceError::NotAPermutation(_)))
        ));
        let bad = serde_json::json!({"order": ["a", "bc", "d"]});
        assert!(AltOrder::from_json(&bad, &u).is_err());
    }

    #[test]
    fn edge_order_must_be_total() {
        let u = Universe::new(&['a', 'b']).unwrap();
        let g = build_rum_graph(&u);
        let mut ids: Vec<String> = g.dag().edges().map(|(id, _, _)| id.to_owned()).collect();
        assert!(EdgeOrder::from_descending(g.dag(), ids.clone()).is_ok());
        let mut short = ids.clone();
        short.pop();
        assert!(matches!(
            EdgeOrder::from_descending(g.dag(), short),
            Err(OrderedError::IncompleteOrder { expected: 4, got: 3 })
        ));
        let mut dup = ids.clone();
        dup[1] = dup[0].clone();
        assert!(matches!(
            EdgeOrder::from_descending(g.dag(), dup),
            Err(OrderedError::DuplicateEdge(_))
        ));
        ids[0] = "e9999".into();
        assert!(matches!(
            EdgeOrder::from_descending(g.dag(), ids),
            Err(OrderedError::UnknownEdge(_))
        ));
    }

    #[test]
    fn lift_order_small_universes() {
        let u1 = Universe::new(&['a']).unwrap();
        let g1 = build_rum_graph(&u1);
        let o1 = AltOrder::from_key(&u1, "a").unwrap();
        assert_eq!(lift_order(&g1, &o1).descending().len(), 1);

        let u2 = Universe::new(&['a', 'b']).unwrap();
        let g2 = build_rum_graph(&u2);
        let o2 = AltOrder::from_key(&u2, "ab").unwrap();
        let eo = lift_order(&g2, &o2);
        let edge = |menu: &str, a| g2.edge_id(&Menu::new(menu, &u2).unwrap(), a).to_owned();
        for a_edge in [edge("a", 'a'), edge("ab", 'a')] {
            for b_edge in [edge("b", 'b'), edge("ab", 'b')] {
                assert!(eo.rank(&a_edge) < eo.rank(&b_edge));
            }
        }
    }

    #[test]
    fn lift_order_ranks_by_alternative_then_menu() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let o = AltOrder::from_key(&u, "abdc").unwrap();
        let eo = lift_order(&g, &o);
        let edge = |menu: &str, a| g.edge_id(&Menu::new(menu, &u).unwrap(), a).to_owned();
        // d-edges rank above c-edges, so ({c,d} → {c}) sits above
        // ({c,d} → {d}).
        assert!(eo.rank(&edge("cd", 'd')) < eo.rank(&edge("cd", 'c')));
        // Within an alternative, the lexicographically smaller menu wins.
        assert!(eo.rank(&edge("a", 'a')) < eo.rank(&edge("ab", 'a')));
        assert!(eo.rank(&edge("ab", 'a')) < eo.rank(&edge("abc", 'a')));
        // Total over the lattice.
        assert_eq!(eo.descending().len(), 32);
    }

    #[test]
    fn swap_progressive_reproduces_the_ordered_selection() {
        let u = abcd();
        let rho = phi(&running_example(&u));
        let o = AltOrder::from_key(&u, "abdc").unwrap();
        let nu = swap_progressive_rationalization(&rho, &o).unwrap();
        let expected = Distribution::from_entries(
            u.clone(),
            vec![("abdc".into(), r(5, 8)), ("bacd".into(), r(3, 8))],
        )
        .unwrap();
        assert_eq!(nu, expected);
        assert_eq!(phi(&nu), rho);
        assert!(is_swap_progressive(&nu, &o));
    }

    #[test]
    fn swap_progressive_on_the_uniform_rule() {
        let u = abcd();
        let prefs = u.all_preferences();
        let uniform = Distribution::uniform(u.clone(), &prefs).unwrap();
        let rho = phi(&uniform);
        let o = AltOrder::from_key(&u, "abcd").unwrap();
        let nu = swap_progressive_rationalization(&rho, &o).unwrap();
        // Half of each four-preference block with a common top pair gets
        // the mass; the d-block keeps dacb (forced by phi(nu) = rho).
        let expected_support = [
            "abcd", "acbd", "adbc", "badc", "bcad", "bdac", "cadb", "cbda", "cdab", "dacb",
            "dbca", "dcba",
        ];
        let support = nu.support();
        let keys: Vec<&str> = support.iter().map(|p| p.key()).collect();
        assert_eq!(keys, expected_support);
        for p in &support {
            assert_eq!(nu.mass(p), r(1, 12));
        }
        assert_eq!(phi(&nu), rho);
        assert!(is_swap_progressive(&nu, &o));
    }

    #[test]
    fn swap_progressive_degenerate_and_tiny_universes() {
        let u = abcd();
        let point = Distribution::degenerate(u.clone(), pref(&u, "cadb")).unwrap();
        let o = AltOrder::from_key(&u, "abcd").unwrap();
        assert_eq!(
            swap_progressive_rationalization(&phi(&point), &o).unwrap(),
            point
        );

        let u1 = Universe::new(&['a']).unwrap();
        let p1 = Distribution::degenerate(u1.clone(), pref(&u1, "a")).unwrap();
        let o1 = AltOrder::from_key(&u1, "a").unwrap();
        assert_eq!(swap_progressive_rationalization(&phi(&p1), &o1).unwrap(), p1);

        let u2 = Universe::new(&['a', 'b']).unwrap();
        let mu2 = Distribution::from_entries(
            u2.clone(),
            vec![("ab".into(), r(2, 3)), ("ba".into(), r(1, 3))],
        )
        .unwrap();
        for key in ["ab", "ba"] {
            let o2 = AltOrder::from_key(&u2, key).unwrap();
            assert_eq!(
                swap_progressive_rationalization(&phi(&mu2), &o2).unwrap(),
                mu2
            );
        }
    }

    #[test]
    fn swap_progressive_rejects_bad_flows() {
        // A rule whose flow goes negative: a always wins the pair yet
        // never the triples.
        let u = abcd();
        let mut rows: BTreeMap<Menu, BTreeMap<char, Rational>> = BTreeMap::new();
        for menu in u.all_menus() {
            let row = match menu.key() {
                "ab" => [('a', r(1, 1)), ('b', r(0, 1))].into(),
                "abc" => [('a', r(0, 1)), ('b', r(1, 2)), ('c', r(1, 2))].into(),
                "abcd" => [
                    ('a', r(0, 1)),
                    ('b', r(1, 3)),
                    ('c', r(1, 3)),
                    ('d', r(1, 3)),
                ]
                .into(),
                _ => {
                    let share = Rational::one() / Rational::from_int(menu.len() as i64);
                    menu.members().map(|m| (m, share.clone())).collect()
                }
            };
            rows.insert(menu, row);
        }
        let rho = ChoiceRule::from_rows(u.clone(), rows).unwrap();
        let o = AltOrder::from_key(&u, "abcd").unwrap();
        match swap_progressive_rationalization(&rho, &o) {
            Err(OrderedError::NotRationalizable { mass, .. }) => {
                assert!(mass.is_negative());
            }
            other => panic!("expected a rationalizability rejection, got {other:?}"),
        }
        // A raw quasi-flow with a negative edge is rejected up front.
        let g = build_rum_graph(&u);
        let o_edges = lift_order(&g, &o);
        let mut bad = bm_flow(&g, &phi(&running_example(&u))).unwrap();
        let first = g.dag().edges().next().unwrap().0.to_owned();
        bad.add(&first, r(-2, 1));
        assert!(matches!(
            swap_progressive(g.dag(), &bad, &o_edges),
            Err(OrderedError::Dag(DagError::InvalidQuasiFlow(_)))
        ));
    }

    #[test]
    fn swap_progressivity_depends_on_the_order() {
        let u = abcd();
        let pair = half_half(&u, "abcd", "badc");
        // Under a ⊵ b ⊵ c ⊵ d both constraints point the same way…
        assert!(is_swap_progressive(
            &pair,
            &AltOrder::from_key(&u, "abcd").unwrap()
        ));
        // …but reversing either the top or the tail comparison makes the
        // two preferences incompatible.
        assert!(!is_swap_progressive(
            &pair,
            &AltOrder::from_key(&u, "abdc").unwrap()
        ));
        assert!(!is_swap_progressive(
            &pair,
            &AltOrder::from_key(&u, "bacd").unwrap()
        ));
        // Singletons always pass.
        let point = Distribution::degenerate(u.clone(), pref(&u, "dcba")).unwrap();
        assert!(is_swap_progressive(
            &point,
            &AltOrder::from_key(&u, "abcd").unwrap()
        ));
    }

    #[test]
    fn single_crossing_goldens() {
        let u = abcd();
        let o = AltOrder::from_key(&u, "abdc").unwrap();
        let point = Distribution::degenerate(u.clone(), pref(&u, "dcba")).unwrap();
        assert!(is_single_crossing(&point, &o));
        // The selected pair of the running example is single-crossing:
        // bacd's aligned comparisons are a strict subset of abdc's.
        let mu_bar = half_half(&u, "abdc", "bacd");
        assert!(is_single_crossing(&mu_bar, &o));
        assert!(is_swap_progressive(&mu_bar, &o));
        // The twelve-preference uniform selection is not single-crossing
        // under its own order: cdab and badc are incomparable.
        let o_abcd = AltOrder::from_key(&u, "abcd").unwrap();
        let prefs = u.all_preferences();
        let uniform = Distribution::uniform(u.clone(), &prefs).unwrap();
        let twelve = swap_progressive_rationalization(&phi(&uniform), &o_abcd).unwrap();
        assert!(!is_single_crossing(&twelve, &o_abcd));
        assert!(!is_single_crossing(
            &half_half(&u, "cdab", "badc"),
            &o_abcd
        ));
    }

    #[test]
    fn selected_representations_are_extreme() {
        let u = abcd();
        let full = SupportRestriction::full(&u);
        let o = AltOrder::from_key(&u, "abdc").unwrap();
        let nu = swap_progressive_rationalization(&phi(&running_example(&u)), &o).unwrap();
        assert!(is_extreme(&nu, &full).unwrap());
        let o_abcd = AltOrder::from_key(&u, "abcd").unwrap();
        let prefs = u.all_preferences();
        let uniform = Distribution::uniform(u.clone(), &prefs).unwrap();
        let twelve = swap_progressive_rationalization(&phi(&uniform), &o_abcd).unwrap();
        assert!(is_extreme(&twelve, &full).unwrap());
    }

    /// Reference implementation straight from the definitions: try every
    /// ordering of the support.
    fn brute_force_passes(
        support: &[Preference],
        o: &AltOrder,
        single_crossing: bool,
    ) -> bool {
        let n = o.universe().size();
        support.iter().permutations(support.len()).any(|seq| {
            seq.iter().enumerate().all(|(j, p)| {
                (j + 1..seq.len()).all(|i| {
                    let q = seq[i]; // comes later: index i > j
                    if single_crossing {
                        o.universe().alts().iter().all(|&x| {
                            o.universe().alts().iter().all(|&y| {
                                x == y
                                    || !o.above(x, y)
                                    || !p.prefers(x, y)
                                    || q.prefers(x, y)
                            })
                        })
                    } else {
                        (0..n).all(|k| {
                            !k_compatible(p, q, k)
                                || o.geq(q.alt_at_rank(k), p.alt_at_rank(k))
                        })
                    }
                })
            })
        })
    }

    fn arb_support(u: Universe, max: usize) -> impl Strategy<Value = Vec<Preference>> {
        let prefs = u.all_preferences();
        proptest::collection::btree_set(0..prefs.len(), 1..=max)
            .prop_map(move |idx| idx.into_iter().map(|i| prefs[i].clone()).collect())
    }

    fn arb_order(u: Universe) -> impl Strategy<Value = AltOrder> {
        let n = u.size();
        Just(u.alts().to_vec())
            .prop_shuffle()
            .prop_map(move |desc| AltOrder::new(&u, &desc).unwrap())
            .prop_filter("permutation", move |o| o.alts().len() == n)
    }

    fn arb_distribution(u: Universe) -> impl Strategy<Value = Distribution> {
        let n = u.all_preferences().len();
        proptest::collection::vec(0u32..4, n).prop_map(move |mut numerators| {
            if numerators.iter().all(|&x| x == 0) {
                numerators[0] = 1;
            }
            let total: u32 = numerators.iter().sum();
            let prefs = u.all_preferences();
            Distribution::from_entries(
                u.clone(),
                prefs.iter().zip(&numerators).map(|(p, &m)| {
                    (p.key().to_owned(), Rational::new(m as i64, total as i64))
                }),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// The constraint-relation implementations agree with brute force
        /// over all orderings of the support.
        #[test]
        fn support_tests_match_brute_force(
            support in arb_support(Universe::new(&['a','b','c','d']).unwrap(), 5),
            o in arb_order(Universe::new(&['a','b','c','d']).unwrap()),
        ) {
            let u = o.universe().clone();
            let mu = Distribution::uniform(u, &support).unwrap();
            prop_assert_eq!(
                is_swap_progressive(&mu, &o),
                brute_force_passes(&support, &o, false)
            );
            let sc = is_single_crossing(&mu, &o);
            prop_assert_eq!(sc, brute_force_passes(&support, &o, true));
            // Single-crossing supports are always swap-progressive.
            if sc {
                prop_assert!(is_swap_progressive(&mu, &o));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// Existence, faithfulness, uniqueness, and extremity of the
        /// selection on random rationalizable rules.
        #[test]
        fn selection_is_unique_faithful_and_extreme(
            mu in arb_distribution(Universe::new(&['a','b','c','d']).unwrap()),
            o in arb_order(Universe::new(&['a','b','c','d']).unwrap()),
        ) {
            let rho = phi(&mu);
            let nu = swap_progressive_rationalization(&rho, &o).unwrap();
            prop_assert_eq!(phi(&nu), rho);
            prop_assert!(is_swap_progressive(&nu, &o));
            // Uniqueness: any other rationalization fails the test.
            if nu != mu {
                prop_assert!(!is_swap_progressive(&mu, &o));
            }
            let full = SupportRestriction::full(mu.universe());
            prop_assert!(is_extreme(&nu, &full).unwrap());
        }

        /// The induced distribution ignores the within-alternative
        /// tie-break of the lift.
        #[test]
        fn tie_break_does_not_matter(
            mu in arb_distribution(Universe::new(&['a','b','c','d']).unwrap()),
            o in arb_order(Universe::new(&['a','b','c','d']).unwrap()),
            keys in proptest::collection::vec(0u64..1 << 32, 32),
        ) {
            let g = build_rum_graph(mu.universe());
            let rho = phi(&mu);
            let f = bm_flow(&g, &rho).unwrap();
            let baseline = swap_progressive_rationalization(&rho, &o).unwrap();
            // Same alternative blocks, scrambled inside by random keys.
            let ids: Vec<String> =
                g.dag().edges().map(|(id, _, _)| id.to_owned()).collect();
            let mut desc = Vec::new();
            for &alt in o.alts() {
                let mut block: Vec<(u64, String)> = ids
                    .iter()
                    .enumerate()
                    .filter(|(_, id)| g.menu_alt(id).unwrap().1 == alt)
                    .map(|(i, id)| (keys[i], id.clone()))
                    .collect();
                block.sort();
                desc.extend(block.into_iter().map(|(_, id)| id));
            }
            let eo = EdgeOrder::from_descending(g.dag(), desc).unwrap();
            let pi = swap_progressive(g.dag(), &f, &eo).unwrap();
            prop_assert_eq!(g.decomposition_to_dist(&pi).unwrap(), baseline);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]

        /// The pipeline scales to five alternatives and stays unique.
        #[test]
        fn five_alternative_selection(
            support in arb_support(Universe::new(&['a','b','c','d','e']).unwrap(), 6),
            o in arb_order(Universe::new(&['a','b','c','d','e']).unwrap()),
        ) {
            let u = o.universe().clone();
            let mu = Distribution::uniform(u, &support).unwrap();
            let rho = phi(&mu);
            let nu = swap_progressive_rationalization(&rho, &o).unwrap();
            prop_assert_eq!(phi(&nu), rho);
            prop_assert!(is_swap_progressive(&nu, &o));
            if nu != mu {
                prop_assert!(!is_swap_progressive(&mu, &o));
            }
        }
    }
}
