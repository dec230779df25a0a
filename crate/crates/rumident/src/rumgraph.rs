//! The random-utility instantiation of the DAG substrate: the menu lattice,
//! Block–Marschak flows, rationalizability, and the bijection between
//! source-to-sink paths and preferences.
//!
//! The graph has a node for every menu (plus the empty set), and one edge
//! `A → A∖{a}` for every menu `A` and member `a` — traversing that edge
//! means "`a` is chosen from `A`". A preference corresponds to the path that
//! peels off its best remaining alternative at every node, so paths and
//! strict rankings are in bijection, and distributions over preferences are
//! in mass-preserving bijection with path decompositions.
//!
//! The Block–Marschak value of an edge is the alternating sum
//! `f(A → A∖{a}) = Σ_{B ⊇ A} (−1)^{|B∖A|} ρ(a, B)`. For any complete rule
//! these values conserve automatically and push unit mass out of the source;
//! the rule is consistent with random utility exactly when they are all
//! nonnegative, in which case any path decomposition of the flow transports
//! back to a rationalizing distribution.

use crate::choicecore::{
    Alternative, ChoiceError, ChoiceRule, Distribution, Menu, Preference, SignedMeasure, Universe,
};
use crate::dagcore::{
    decompose_greedy, validate_flow, Dag, DagError, Path, PathDecomposition, QuasiFlow,
};
use crate::linalg::Rational;
use std::collections::BTreeMap;

/// Node label used for the empty menu (the sink), which has no member
/// string of its own.
pub const EMPTY_NODE: &str = "{}";

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RumError {
    /// A domain-type error from the core module.
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    /// A graph error from the DAG substrate.
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// The menu-lattice DAG for a universe, with a two-way index between edge
/// ids and (menu, chosen alternative) pairs.
#[derive(Clone, Debug)]
pub struct RumGraph {
    universe: Universe,
    dag: Dag,
    edge_of: BTreeMap<(Menu, Alternative), String>,
    pair_of: BTreeMap<String, (Menu, Alternative)>,
}

/// Builds the lattice: nodes are all `2^|X|` menus (the empty one labeled
/// [`EMPTY_NODE`]), edges run `A → A∖{a}` for every member `a`, the source
/// is the grand menu and the sink the empty one. Edge ids are zero-padded
/// (`e0000`, `e0001`, …) in (menu key, alternative) order, so id order is
/// deterministic and stable across runs.
pub fn build_rum_graph(universe: &Universe) -> RumGraph {
    let menus = universe.all_menus();
    let mut nodes: Vec<String> = menus.iter().map(|m| m.key().to_owned()).collect();
    nodes.push(EMPTY_NODE.to_owned());
    let edge_total: usize = menus.iter().map(Menu::len).sum();
    let width = edge_total.saturating_sub(1).to_string().len().max(4);
    let mut edges = Vec::with_capacity(edge_total);
    let mut edge_of = BTreeMap::new();
    let mut pair_of = BTreeMap::new();
    let mut next = 0usize;
    for menu in &menus {
        for a in menu.members() {
            let id = format!("e{next:0width$}");
            next += 1;
            let rest: String = menu.members().filter(|&m| m != a).collect();
            let head = if rest.is_empty() {
                EMPTY_NODE.to_owned()
            } else {
                rest
            };
            edges.push((id.clone(), menu.key().to_owned(), head));
            edge_of.insert((menu.clone(), a), id.clone());
            pair_of.insert(id, (menu.clone(), a));
        }
    }
    let source = universe.full_menu().key().to_owned();
    let dag = Dag::new(nodes, edges, &source, EMPTY_NODE)
        .expect("the menu lattice is a valid DAG by construction");
    RumGraph {
        universe: universe.clone(),
        dag,
        edge_of,
        pair_of,
    }
}

impl RumGraph {
    /// The universe the lattice is built over.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The underlying DAG.
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// The id of the edge "choose `a` from `menu`".
    ///
    /// # Panics
    /// Panics when `a ∉ menu` or the menu is not over this universe.
    pub fn edge_id(&self, menu: &Menu, a: Alternative) -> &str {
        self.edge_of
            .get(&(menu.clone(), a))
            .unwrap_or_else(|| panic!("no edge for ({:?}, {a:?})", menu.key()))
    }

    /// The (menu, alternative) pair of an edge id.
    pub fn menu_alt(&self, edge_id: &str) -> Option<(&Menu, Alternative)> {
        self.pair_of.get(edge_id).map(|(m, a)| (m, *a))
    }

    /// The path of a preference: peel off the best remaining alternative at
    /// every node, `abcd ↦ X → {b,c,d} → {c,d} → {d} → ∅`.
    pub fn pref_to_path(&self, p: &Preference) -> Path {
        let mut remaining: Vec<char> = self.universe.alts().to_vec();
        let mut ids: Vec<String> = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let a = p.alt_at_rank(i);
            let menu_key: String = remaining.iter().collect();
            let menu = Menu::new(&menu_key, &self.universe)
                .expect("remaining sets are valid menus");
            ids.push(self.edge_id(&menu, a).to_owned());
            remaining.retain(|&x| x != a);
        }
        self.dag
            .path_from_edges(ids)
            .expect("preference paths are valid by construction")
    }

    /// The preference of a path: read off the chosen alternative of each
    /// edge in order. The path is re-validated against the lattice.
    pub fn path_to_pref(&self, path: &Path) -> Result<Preference, RumError> {
        self.dag.path_from_edges(path.edge_ids().iter().cloned())?;
        let ranking: String = path
            .edge_ids()
            .iter()
            .map(|id| {
                self.menu_alt(id)
                    .expect("validated paths use lattice edges")
                    .1
            })
            .collect();
        Ok(Preference::new(&ranking, &self.universe)?)
    }

    /// Mass-preserving transport of a distribution onto its path
    /// decomposition.
    pub fn dist_to_decomposition(&self, mu: &Distribution) -> PathDecomposition {
        PathDecomposition::from_entries(
            mu.entries()
                .map(|(p, w)| (self.pref_to_path(p), w.clone())),
        )
    }

    /// Mass-preserving transport of a path decomposition back to a
    /// distribution; fails when the decomposition is not a unit-mass
    /// measure or a path is not in the lattice.
    pub fn decomposition_to_dist(
        &self,
        pi: &PathDecomposition,
    ) -> Result<Distribution, RumError> {
        let mut m = SignedMeasure::zero(self.universe.clone());
        for (path, w) in pi.entries() {
            let pref = self.path_to_pref(path)?;
            m.add_mass(&pref, w.clone());
        }
        Ok(Distribution::from_measure(m)?)
    }
}

/// The Block–Marschak flow of a complete choice rule: the exact alternating
/// sum over supersets on every edge. No sign assumption is made — values can
/// be negative, and negative values are exactly the rationalizability
/// diagnostics.
pub fn bm_flow(g: &RumGraph, rho: &ChoiceRule) -> Result<QuasiFlow, RumError> {
    if rho.universe() != g.universe() {
        return Err(RumError::Choice(ChoiceError::UniverseMismatch));
    }
    rho.check_complete().map_err(RumError::Choice)?;
    let n = g.universe.size();
    let full: u32 = (1u32 << n) - 1;
    // Menu per bitmask over the sorted alternative list (index 0 unused).
    let menu_of_mask: Vec<Option<Menu>> = (0..=full)
        .map(|mask| {
            if mask == 0 {
                return None;
            }
            let key: String = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| g.universe.alts()[i])
                .collect();
            Some(Menu::new(&key, &g.universe).expect("mask keys are valid menus"))
        })
        .collect();
    let mut f = QuasiFlow::zero();
    for ((menu, a), id) in &g.edge_of {
        let a_mask: u32 = {
            let i = g.universe.index_of(*a).expect("edge alternatives are members");
            1 << i
        };
        let menu_mask: u32 = menu
            .members()
            .map(|m| 1u32 << g.universe.index_of(m).expect("menu members are members"))
            .sum();
        let complement = full & !menu_mask;
        debug_assert!(menu_mask & a_mask != 0);
        // Enumerate supersets B = menu ∪ sub for sub ⊆ complement.
        let mut value = Rational::zero();
        let mut sub = complement;
        loop {
            let b = menu_of_mask[(menu_mask | sub) as usize]
                .as_ref()
                .expect("supersets of a menu are nonempty");
            let term = rho.prob(*a, b);
            if sub.count_ones() % 2 == 0 {
                value = value + term;
            } else {
                value = value - term;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & complement;
        }
        f.add(id, value);
    }
    Ok(f)
}

/// The verdict of a rationalizability check.
#[derive(Clone, Debug)]
pub struct RationalizabilityReport {
    /// True iff every Block–Marschak value is nonnegative.
    pub rationalizable: bool,
    /// The edges carrying negative mass, in id order, with exact values.
    pub negative_edges: Vec<(String, Rational)>,
    /// On success, the greedy decomposition's preference distribution — a
    /// concrete rationalization whose generated rule equals the input.
    pub witness: Option<Distribution>,
}

/// Decides consistency with random utility: computes the Block–Marschak
/// flow, reports any negative edges exactly, and on success verifies
/// conservation (automatic, but checked) and returns a witness
/// rationalization extracted by greedy path decomposition.
pub fn is_rationalizable(g: &RumGraph, rho: &ChoiceRule) -> Result<RationalizabilityReport, RumError> {
    let f = bm_flow(g, rho)?;
    let negative_edges: Vec<(String, Rational)> = f
        .entries()
        .filter(|(_, v)| v.is_negative())
        .map(|(id, v)| (id.to_owned(), v.clone()))
        .collect();
    if !negative_edges.is_empty() {
        return Ok(RationalizabilityReport {
            rationalizable: false,
            negative_edges,
            witness: None,
        });
    }
    validate_flow(g.dag(), &f)
        .expect("nonnegative Block–Marschak values of a complete rule form a flow");
    let pi = decompose_greedy(g.dag(), &f)?;
    let witness = g.decomposition_to_dist(&pi)?;
    Ok(RationalizabilityReport {
        rationalizable: true,
        negative_edges: Vec::new(),
        witness: Some(witness),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choicecore::phi;
    use crate::dagcore::{recompose, topo_enumerate, validate_quasiflow};
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

    /// Shorthand: the edge "choose `a` from `menu`".
    fn edge<'g>(g: &'g RumGraph, menu: &str, a: char) -> &'g str {
        let m = Menu::new(menu, g.universe()).unwrap();
        g.edge_id(&m, a)
    }

    #[test]
    fn lattice_sizes_match_the_combinatorics() {
        let u1 = Universe::new(&['a']).unwrap();
        let g1 = build_rum_graph(&u1);
        assert_eq!(g1.dag().node_labels().len(), 2);
        assert_eq!(g1.dag().edge_count(), 1);

        let u2 = Universe::new(&['a', 'b']).unwrap();
        let g2 = build_rum_graph(&u2);
        assert_eq!(g2.dag().node_labels().len(), 4);
        assert_eq!(g2.dag().edge_count(), 4);
        assert_eq!(topo_enumerate(g2.dag()), vec!["ab", "a", "b", "{}"]);

        let g4 = build_rum_graph(&abcd());
        assert_eq!(g4.dag().node_labels().len(), 16);
        assert_eq!(g4.dag().edge_count(), 32);
        assert_eq!(g4.dag().source(), "abcd");
        assert_eq!(g4.dag().sink(), EMPTY_NODE);
    }

    #[test]
    fn edge_index_is_a_bijection() {
        let g = build_rum_graph(&abcd());
        for (id, _, _) in g.dag().edges() {
            let (menu, a) = g.menu_alt(id).unwrap();
            assert_eq!(g.edge_id(menu, a), id);
            // The head really is menu ∖ {a}.
            let (tail, head) = g.dag().endpoints(id).unwrap();
            assert_eq!(tail, menu.key());
            let expect: String = menu.members().filter(|&m| m != a).collect();
            let expect = if expect.is_empty() { EMPTY_NODE.into() } else { expect };
            assert_eq!(head, expect);
        }
    }

    #[test]
    fn pref_to_path_golden_and_round_trip() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let p = g.pref_to_path(&pref(&u, "abcd"));
        assert_eq!(
            g.dag().path_nodes(&p),
            vec!["abcd", "bcd", "cd", "d", "{}"]
        );
        for q in u.all_preferences() {
            assert_eq!(g.path_to_pref(&g.pref_to_path(&q)).unwrap(), q);
        }
        // Conversely every lattice path maps to a preference and back.
        for path in g.dag().enumerate_paths(1000).unwrap() {
            let q = g.path_to_pref(&path).unwrap();
            assert_eq!(g.pref_to_path(&q), path);
        }
        let u1 = Universe::new(&['z']).unwrap();
        let g1 = build_rum_graph(&u1);
        assert_eq!(g1.dag().count_paths(), 1u32.into());
        assert_eq!(
            g1.path_to_pref(&g1.pref_to_path(&pref(&u1, "z"))).unwrap().key(),
            "z"
        );
    }

    #[test]
    fn bm_flow_of_a_degenerate_rule_is_the_preference_path() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let mu = Distribution::degenerate(u.clone(), pref(&u, "abcd")).unwrap();
        let f = bm_flow(&g, &phi(&mu)).unwrap();
        let path = g.pref_to_path(&pref(&u, "abcd"));
        for (id, _, _) in g.dag().edges() {
            let expect = if path.edge_ids().iter().any(|e| e == id) {
                Rational::one()
            } else {
                Rational::zero()
            };
            assert_eq!(f.get(id), expect, "edge {id}");
        }
    }

    #[test]
    fn bm_flow_matches_running_example_goldens() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let f = bm_flow(&g, &phi(&running_example(&u))).unwrap();
        let expected = vec![
            (edge(&g, "abcd", 'a'), r(5, 8)), // X → {b,c,d}
            (edge(&g, "abcd", 'b'), r(3, 8)), // X → {a,c,d}
            (edge(&g, "bcd", 'b'), r(5, 8)),
            (edge(&g, "acd", 'a'), r(3, 8)),
            (edge(&g, "cd", 'c'), r(3, 8)), // {c,d} → {d}
            (edge(&g, "cd", 'd'), r(5, 8)), // {c,d} → {c}
            (edge(&g, "d", 'd'), r(3, 8)),
            (edge(&g, "c", 'c'), r(5, 8)),
        ];
        let hot: Vec<&str> = expected.iter().map(|(id, _)| *id).collect();
        for (id, v) in &expected {
            assert_eq!(f.get(id), v.clone(), "edge {id}");
        }
        for (id, _, _) in g.dag().edges() {
            if !hot.contains(&id) {
                assert!(f.get(id).is_zero(), "edge {id} should be cold");
            }
        }
        assert_eq!(validate_flow(g.dag(), &f), Ok(()));
    }

    #[test]
    fn bm_flow_requires_a_complete_rule() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let rho = phi(&running_example(&u));
        let mut doc = rho.to_json();
        doc["probabilities"]
            .as_object_mut()
            .unwrap()
            .remove("acd");
        let partial =
            ChoiceRule::from_json(&doc, crate::choicecore::DEFAULT_UNIVERSE_CAP).unwrap();
        match bm_flow(&g, &partial) {
            Err(RumError::Choice(ChoiceError::MissingMenu(m))) => assert_eq!(m, "acd"),
            other => panic!("expected missing-menu error, got {other:?}"),
        }
    }

    #[test]
    fn running_example_is_rationalizable_with_faithful_witness() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let rho = phi(&running_example(&u));
        let report = is_rationalizable(&g, &rho).unwrap();
        assert!(report.rationalizable);
        assert!(report.negative_edges.is_empty());
        let witness = report.witness.unwrap();
        assert_eq!(phi(&witness), rho);
    }

    #[test]
    fn uniform_rule_is_rationalizable() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let uniform = Distribution::uniform(u.clone(), &u.all_preferences()).unwrap();
        let report = is_rationalizable(&g, &phi(&uniform)).unwrap();
        assert!(report.rationalizable);
        assert_eq!(phi(&report.witness.unwrap()), phi(&uniform));
    }

    #[test]
    fn incoherent_rule_is_rejected_with_a_named_edge() {
        // ρ(a,{a,b}) = 1 but a never chosen from {a,b,c} or X; other menus
        // uniform. Choosing b from {a,b} then has Block–Marschak value
        // 0 − 1/2 − 1/3 + 1/3 = −1/2.
        let u = abcd();
        let g = build_rum_graph(&u);
        let mut rows: BTreeMap<Menu, BTreeMap<char, Rational>> = BTreeMap::new();
        for menu in u.all_menus() {
            let row: BTreeMap<char, Rational> = match menu.key() {
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
        let report = is_rationalizable(&g, &rho).unwrap();
        assert!(!report.rationalizable);
        assert!(report.witness.is_none());
        let bad_edge = edge(&g, "ab", 'b').to_owned();
        assert!(
            report.negative_edges.iter().any(|(id, v)| *id == bad_edge && *v == r(-1, 2)),
            "negative edges: {:?}",
            report.negative_edges
        );
    }

    #[test]
    fn transport_golden_and_trivia() {
        let u = abcd();
        let g = build_rum_graph(&u);
        let mu = running_example(&u);
        let pi = g.dist_to_decomposition(&mu);
        assert_eq!(pi.support_size(), 4);
        assert_eq!(
            recompose(g.dag(), &pi).unwrap(),
            bm_flow(&g, &phi(&mu)).unwrap()
        );
        assert_eq!(g.decomposition_to_dist(&pi).unwrap(), mu);
        // Uniform over all preferences ↦ uniform over all paths.
        let uniform = Distribution::uniform(u.clone(), &u.all_preferences()).unwrap();
        let upi = g.dist_to_decomposition(&uniform);
        assert_eq!(upi.support_size(), 24);
        for (_, w) in upi.entries() {
            assert_eq!(w.clone(), r(1, 24));
        }
        // A non-unit decomposition does not transport to a distribution.
        let short = PathDecomposition::from_entries(vec![(
            g.pref_to_path(&pref(&u, "abcd")),
            r(1, 2),
        )]);
        assert!(g.decomposition_to_dist(&short).is_err());
    }

    /// Random distributions over a universe, as exact rationals.
    fn arb_distribution(u: Universe) -> impl Strategy<Value = Distribution> {
        let n = u.all_preferences().len();
        proptest::collection::vec(0u32..5, n).prop_map(move |mut numerators| {
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
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The flow correspondence: transporting a distribution to paths
        /// and summing edge masses is exactly the Block–Marschak flow of
        /// its generated rule.
        #[test]
        fn flow_correspondence_four_alternatives(
            mu in arb_distribution(Universe::new(&['a','b','c','d']).unwrap()),
        ) {
            let g = build_rum_graph(mu.universe());
            let via_paths = recompose(g.dag(), &g.dist_to_decomposition(&mu)).unwrap();
            let via_bm = bm_flow(&g, &phi(&mu)).unwrap();
            prop_assert_eq!(via_paths, via_bm.clone());
            prop_assert_eq!(validate_flow(g.dag(), &via_bm), Ok(()));
        }

        /// On three alternatives the rationalization is unique, so the
        /// witness must reproduce the generating distribution itself.
        #[test]
        fn witness_unique_on_three_alternatives(
            mu in arb_distribution(Universe::new(&['a','b','c']).unwrap()),
        ) {
            let g = build_rum_graph(mu.universe());
            let report = is_rationalizable(&g, &phi(&mu)).unwrap();
            prop_assert!(report.rationalizable);
            prop_assert_eq!(report.witness.unwrap(), mu);
        }

        /// Linearity: the Block–Marschak flow of an even mixture is the
        /// even mixture of the flows.
        #[test]
        fn bm_flow_is_linear(
            mu in arb_distribution(Universe::new(&['a','b','c','d']).unwrap()),
            nu in arb_distribution(Universe::new(&['a','b','c','d']).unwrap()),
        ) {
            let u = mu.universe().clone();
            let g = build_rum_graph(&u);
            let mix = Distribution::from_measure(
                mu.as_measure()
                    .add_scaled(nu.as_measure(), &Rational::one())
                    .add_scaled(mu.as_measure(), &Rational::new(-1, 2))
                    .add_scaled(nu.as_measure(), &Rational::new(-1, 2)),
            ).unwrap();
            let f_mix = bm_flow(&g, &phi(&mix)).unwrap();
            let f_mu = bm_flow(&g, &phi(&mu)).unwrap();
            let f_nu = bm_flow(&g, &phi(&nu)).unwrap();
            for (id, _, _) in g.dag().edges() {
                let blended = (f_mu.get(id) + f_nu.get(id)) / Rational::from_int(2);
                prop_assert_eq!(f_mix.get(id), blended);
            }
            prop_assert_eq!(validate_quasiflow(g.dag(), &f_mix), Ok(()));
        }
    }
}
