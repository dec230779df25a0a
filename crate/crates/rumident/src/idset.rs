//! Identified-set analytics: what the data pin down about an unobserved
//! distribution over preferences, and how sharp that knowledge is.
//!
//! Given an observed rule (or a base distribution standing in for it), the
//! identified set is the polytope of distributions generating the same rule,
//! possibly intersected with a declared support restriction. This module
//! answers the standard questions about that polytope exactly:
//!
//! * [`bounds`] — tight min/max of a linear functional (a population share,
//!   a welfare weight) with attaining distributions, solved by default as a
//!   small LP over swap-basis coefficients, with an independent
//!   full-simplex formulation ([`BoundsRoute::FullSimplex`]) retained as a
//!   cross-check oracle;
//! * [`is_extreme`] — whether a distribution is an extreme point, decided
//!   by exact linear independence of the path-indicator vectors of its
//!   support;
//! * [`is_identifying_support`] — whether a support restriction forces
//!   point identification for every rule it can generate;
//! * [`extreme_points`] — full enumeration of the polytope's vertices by
//!   independent-support search, for supports below a configurable cap.

use crate::choicecore::{
    phi, ChoiceError, ChoiceRule, Distribution, Preference, SignedMeasure, Universe,
};
use crate::linalg::{lp_solve, rank, LpOutcome, LpProblem, RatMatrix, Rational, Sense, SolveOutcome};
use crate::rumgraph::{bm_flow, build_rum_graph, is_rationalizable, RumError, RumGraph};
use crate::ryser::{ryser_basis, RyserError};
use std::collections::BTreeMap;

/// Default cap on the support size for extreme-point enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 64;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdsetError {
    /// A domain-type error from the core module.
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    /// An error from the swap algebra.
    #[error(transparent)]
    Ryser(#[from] RyserError),
    /// An error from the lattice machinery.
    #[error(transparent)]
    Rum(#[from] RumError),
    /// A support restriction with no preferences.
    #[error("a support restriction needs at least one preference")]
    EmptySupport,
    /// A distribution puts mass outside the declared support.
    #[error("distribution puts mass on {0:?}, outside the support restriction")]
    SupportViolation(String),
    /// The data admit no distribution under the restriction.
    #[error("no distribution over the restricted support matches the data")]
    Infeasible,
    /// Bounds were requested against a rule no distribution generates.
    #[error("the rule is not consistent with random utility, so it pins down no identified set")]
    NotRationalizable,
    /// Enumeration over a support larger than the cap.
    #[error("support size {size} exceeds the enumeration cap {cap}")]
    CapExceeded {
        /// Size of the support.
        size: usize,
        /// The cap in force.
        cap: usize,
    },
    /// An LP returned a status the formulation rules out.
    #[error("unexpected linear-program status: {0}")]
    Internal(String),
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

// ---------------------------------------------------------------------------
// Support restrictions
// ---------------------------------------------------------------------------

/// A declared set of admissible preferences, sorted and deduplicated.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SupportRestriction {
    universe: Universe,
    prefs: Vec<Preference>,
}

impl SupportRestriction {
    /// Builds a restriction from a nonempty preference list.
    pub fn new(universe: Universe, prefs: Vec<Preference>) -> Result<Self, IdsetError> {
        if prefs.is_empty() {
            return Err(IdsetError::EmptySupport);
        }
        let mut sorted = prefs;
        sorted.sort();
        sorted.dedup();
        Ok(SupportRestriction {
            universe,
            prefs: sorted,
        })
    }

    /// The unrestricted support: every preference over the universe.
    pub fn full(universe: &Universe) -> Self {
        SupportRestriction {
            universe: universe.clone(),
            prefs: universe.all_preferences(),
        }
    }

    /// Parses a list of ranking strings.
    pub fn from_keys(universe: &Universe, keys: &[String]) -> Result<Self, IdsetError> {
        let prefs = keys
            .iter()
            .map(|k| Preference::new(k, universe))
            .collect::<Result<Vec<_>, _>>()?;
        SupportRestriction::new(universe.clone(), prefs)
    }

    /// The universe the restriction lives on.
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    /// The admissible preferences, sorted.
    pub fn prefs(&self) -> &[Preference] {
        &self.prefs
    }

    /// Number of admissible preferences.
    pub fn len(&self) -> usize {
        self.prefs.len()
    }

    /// True iff no preference is admissible (never holds for validated
    /// values).
    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    /// Membership test.
    pub fn contains(&self, p: &Preference) -> bool {
        self.prefs.binary_search(p).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Bounds queries
// ---------------------------------------------------------------------------

/// The data side of a bounds query: either a base distribution, or an
/// observed rule whose rationalizing witness will stand in for it.
#[derive(Clone, Debug)]
pub enum BoundsBase {
    /// A concrete distribution; its generated rule defines the identified
    /// set.
    Distribution(Distribution),
    /// An observed complete rule; must be consistent with random utility.
    Rule(ChoiceRule),
}

/// A linear functional over preferences together with the data pinning down
/// the identified set, and an optional support restriction.
#[derive(Clone, Debug)]
pub struct BoundsQuery {
    /// Rational weight per preference (absent preferences weigh zero).
    pub functional: BTreeMap<Preference, Rational>,
    /// The data side.
    pub base: BoundsBase,
    /// Restriction of admissible supports, when declared.
    pub support: Option<SupportRestriction>,
}

impl BoundsQuery {
    /// Parses the query document:
    /// `{"functional": {...}, "base": ... | "rule": ..., "support": [...]}`.
    pub fn from_json(value: &serde_json::Value, cap: usize) -> Result<Self, IdsetError> {
        let obj = value
            .as_object()
            .ok_or_else(|| IdsetError::BadDocument("expected an object".into()))?;
        let base = match (obj.get("base"), obj.get("rule")) {
            (Some(b), None) => BoundsBase::Distribution(Distribution::from_json(b, cap)?),
            (None, Some(r)) => BoundsBase::Rule(ChoiceRule::from_json(r, cap)?),
            _ => {
                return Err(IdsetError::BadDocument(
                    "exactly one of \"base\" or \"rule\" is required".into(),
                ))
            }
        };
        let universe = match &base {
            BoundsBase::Distribution(d) => d.universe().clone(),
            BoundsBase::Rule(r) => r.universe().clone(),
        };
        let functional_doc: BTreeMap<String, Rational> = serde_json::from_value(
            obj.get("functional")
                .ok_or_else(|| IdsetError::BadDocument("missing \"functional\"".into()))?
                .clone(),
        )
        .map_err(|e| IdsetError::BadDocument(e.to_string()))?;
        let mut functional = BTreeMap::new();
        for (key, weight) in functional_doc {
            functional.insert(Preference::new(&key, &universe)?, weight);
        }
        let support = match obj.get("support") {
            None => None,
            Some(v) => {
                let keys: Vec<String> = serde_json::from_value(v.clone())
                    .map_err(|e| IdsetError::BadDocument(e.to_string()))?;
                Some(SupportRestriction::from_keys(&universe, &keys)?)
            }
        };
        Ok(BoundsQuery {
            functional,
            base,
            support,
        })
    }
}

/// Which LP formulation answers a bounds query.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoundsRoute {
    /// Default: optimize over swap-basis coefficients `α` with
    /// `μ0 + Σ αᵢ Rᵢ ≥ 0` — a much smaller program.
    RyserCoefficients,
    /// Oracle: optimize over the full simplex of distributions with one
    /// equality per (alternative, menu) choice probability.
    FullSimplex,
}

/// Exact bounds on a functional over the identified set, with attaining
/// distributions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BoundsReport {
    /// The exact minimum.
    pub min: Rational,
    /// A distribution attaining the minimum.
    pub argmin: Distribution,
    /// The exact maximum.
    pub max: Rational,
    /// A distribution attaining the maximum.
    pub argmax: Distribution,
}

/// Resolves a query's base to a concrete distribution, witnessing rules
/// through rationalizability.
fn resolve_base(base: &BoundsBase) -> Result<Distribution, IdsetError> {
    match base {
        BoundsBase::Distribution(d) => Ok(d.clone()),
        BoundsBase::Rule(rho) => {
            let g = build_rum_graph(rho.universe());
            let report = is_rationalizable(&g, rho)?;
            report.witness.ok_or(IdsetError::NotRationalizable)
        }
    }
}

/// Tight bounds of the functional over every distribution generating the
/// same rule as the base, restricted to the declared support. Solved via
/// the default coefficient LP; see [`bounds_with_route`] for the oracle.
pub fn bounds(q: &BoundsQuery) -> Result<BoundsReport, IdsetError> {
    bounds_with_route(q, BoundsRoute::RyserCoefficients)
}

/// [`bounds`] with an explicit choice of LP formulation.
pub fn bounds_with_route(q: &BoundsQuery, route: BoundsRoute) -> Result<BoundsReport, IdsetError> {
    let mu0 = resolve_base(&q.base)?;
    let universe = mu0.universe().clone();
    let support = match &q.support {
        Some(s) => s.clone(),
        None => SupportRestriction::full(&universe),
    };
    let weight = |p: &Preference| -> Rational {
        q.functional.get(p).cloned().unwrap_or_else(Rational::zero)
    };
    let (min, argmin) = solve_one(&mu0, &support, &weight, Sense::Min, route)?;
    let (max, argmax) = solve_one(&mu0, &support, &weight, Sense::Max, route)?;
    Ok(BoundsReport {
        min,
        argmin,
        max,
        argmax,
    })
}

fn solve_one(
    mu0: &Distribution,
    support: &SupportRestriction,
    weight: &dyn Fn(&Preference) -> Rational,
    sense: Sense,
    route: BoundsRoute,
) -> Result<(Rational, Distribution), IdsetError> {
    match route {
        BoundsRoute::RyserCoefficients => solve_coefficient_lp(mu0, support, weight, sense),
        BoundsRoute::FullSimplex => solve_simplex_lp(mu0, support, weight, sense),
    }
}

/// Coefficient formulation: variables are the free swap coefficients `α`
/// plus one nonnegative slack per admissible preference; the row for each
/// preference `p` reads `Σᵢ Rᵢ(p) αᵢ − s_p = −μ0(p)` (with the slack
/// dropped, hence forcing zero, outside the support). Total mass stays one
/// automatically because swap measures sum to zero.
fn solve_coefficient_lp(
    mu0: &Distribution,
    support: &SupportRestriction,
    weight: &dyn Fn(&Preference) -> Rational,
    sense: Sense,
) -> Result<(Rational, Distribution), IdsetError> {
    let universe = mu0.universe();
    let basis = ryser_basis(universe)?;
    let prefs = universe.all_preferences();
    let dim = basis.dim();
    let ncols = dim + support.len();
    let mut rows = Vec::with_capacity(prefs.len());
    let mut rhs = Vec::with_capacity(prefs.len());
    for p in &prefs {
        let mut row = vec![Rational::zero(); ncols];
        for (i, element) in basis.elements().iter().enumerate() {
            row[i] = element.mass(p);
        }
        if let Ok(slot) = support.prefs().binary_search(p) {
            row[dim + slot] = -Rational::one();
        }
        rows.push(row);
        rhs.push(-mu0.mass(p));
    }
    let mut objective = vec![Rational::zero(); ncols];
    for (slot, p) in support.prefs().iter().enumerate() {
        objective[dim + slot] = weight(p);
    }
    let mut nonneg = vec![false; ncols];
    for flag in nonneg.iter_mut().skip(dim) {
        *flag = true;
    }
    let problem = LpProblem {
        objective,
        constraints: RatMatrix::from_rows(rows).expect("rows share a length"),
        rhs,
        nonneg,
    };
    let outcome = lp_solve(&problem, sense).map_err(|e| IdsetError::Internal(e.to_string()))?;
    match outcome {
        LpOutcome::Optimal { optimum, solution } => {
            let m = SignedMeasure::from_entries(
                universe.clone(),
                support
                    .prefs()
                    .iter()
                    .enumerate()
                    .map(|(slot, p)| (p.key().to_owned(), solution[dim + slot].clone())),
            )?;
            Ok((optimum, Distribution::from_measure(m)?))
        }
        LpOutcome::Infeasible => Err(IdsetError::Infeasible),
        LpOutcome::Unbounded => Err(IdsetError::Internal(
            "bounded mass polytope reported unbounded".into(),
        )),
    }
}

/// Simplex formulation: one nonnegative variable per admissible preference,
/// one equality per (alternative, menu) pair of the base's generated rule.
fn solve_simplex_lp(
    mu0: &Distribution,
    support: &SupportRestriction,
    weight: &dyn Fn(&Preference) -> Rational,
    sense: Sense,
) -> Result<(Rational, Distribution), IdsetError> {
    let universe = mu0.universe();
    let rho = phi(mu0);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for menu in universe.all_menus() {
        for a in menu.members() {
            let row: Vec<Rational> = support
                .prefs()
                .iter()
                .map(|p| {
                    if p.best_in(&menu) == a {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            rows.push(row);
            rhs.push(rho.prob(a, &menu));
        }
    }
    let objective: Vec<Rational> = support.prefs().iter().map(|p| weight(p)).collect();
    let problem = LpProblem {
        objective,
        constraints: RatMatrix::from_rows(rows).expect("rows share a length"),
        rhs,
        nonneg: vec![true; support.len()],
    };
    let outcome = lp_solve(&problem, sense).map_err(|e| IdsetError::Internal(e.to_string()))?;
    match outcome {
        LpOutcome::Optimal { optimum, solution } => {
            let m = SignedMeasure::from_entries(
                universe.clone(),
                support
                    .prefs()
                    .iter()
                    .zip(&solution)
                    .map(|(p, w)| (p.key().to_owned(), w.clone())),
            )?;
            Ok((optimum, Distribution::from_measure(m)?))
        }
        LpOutcome::Infeasible => Err(IdsetError::Infeasible),
        LpOutcome::Unbounded => Err(IdsetError::Internal(
            "unit-mass simplex reported unbounded".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Extreme points and identifying supports
// ---------------------------------------------------------------------------

/// The path-indicator matrix of a preference list: one row per lattice
/// edge, one column per preference, entry 1 exactly when the preference's
/// path uses the edge.
fn indicator_matrix(g: &RumGraph, prefs: &[Preference]) -> RatMatrix {
    let edge_ids: Vec<String> = g.dag().edges().map(|(id, _, _)| id.to_owned()).collect();
    let columns: Vec<Vec<bool>> = prefs
        .iter()
        .map(|p| {
            let path = g.pref_to_path(p);
            edge_ids
                .iter()
                .map(|id| path.edge_ids().iter().any(|e| e == id))
                .collect()
        })
        .collect();
    let rows: Vec<Vec<Rational>> = (0..edge_ids.len())
        .map(|r| {
            columns
                .iter()
                .map(|c| {
                    if c[r] {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    RatMatrix::from_rows(rows).expect("columns share the edge count")
}

/// True iff `mu` is an extreme point of its identified set under the
/// restriction: exactly when the path-indicator vectors of its support are
/// linearly independent. Fails when `mu` puts mass outside the restriction.
pub fn is_extreme(mu: &Distribution, s: &SupportRestriction) -> Result<bool, IdsetError> {
    if mu.universe() != s.universe() {
        return Err(IdsetError::Choice(ChoiceError::UniverseMismatch));
    }
    for p in mu.support() {
        if !s.contains(&p) {
            return Err(IdsetError::SupportViolation(p.key().to_owned()));
        }
    }
    let g = build_rum_graph(mu.universe());
    let support = mu.support();
    let m = indicator_matrix(&g, &support);
    Ok(rank(&m) == support.len())
}

/// True iff the restriction forces point identification: the
/// path-indicator vectors of all admissible preferences are linearly
/// independent, so any two admissible distributions generating the same
/// rule coincide.
pub fn is_identifying_support(s: &SupportRestriction) -> Result<bool, IdsetError> {
    let g = build_rum_graph(s.universe());
    let m = indicator_matrix(&g, s.prefs());
    Ok(rank(&m) == s.len())
}

/// Enumerates every extreme point of the identified polytope
/// `{μ : phi(μ) = rho, supp(μ) ⊆ s}` by depth-first search over linearly
/// independent sub-supports: each vertex is the unique strictly positive
/// solution on its own (independent) support. Output is deduplicated and
/// ordered by canonical support key. Refuses supports larger than `cap`
/// (see [`DEFAULT_ENUMERATION_CAP`]).
pub fn extreme_points(
    rho: &ChoiceRule,
    s: &SupportRestriction,
    cap: usize,
) -> Result<Vec<Distribution>, IdsetError> {
    if s.len() > cap {
        return Err(IdsetError::CapExceeded {
            size: s.len(),
            cap,
        });
    }
    if rho.universe() != s.universe() {
        return Err(IdsetError::Choice(ChoiceError::UniverseMismatch));
    }
    rho.check_complete()?;
    let universe = s.universe();
    let g = build_rum_graph(universe);
    let flow = bm_flow(&g, rho)?;
    let edge_ids: Vec<String> = g.dag().edges().map(|(id, _, _)| id.to_owned()).collect();
    let target: Vec<Rational> = edge_ids.iter().map(|id| flow.get(id)).collect();
    // A preference whose path crosses a zero-flow edge can never carry
    // mass: every feasible distribution routes nonnegative path masses, so
    // a zero edge zeroes every path through it. Dropping those columns up
    // front keeps the search proportional to the data, not the universe.
    let live: Vec<&Preference> = s
        .prefs()
        .iter()
        .filter(|p| {
            let path = g.pref_to_path(p);
            path.edge_ids().iter().all(|e| {
                let slot = edge_ids.binary_search(e).expect("edge of the same lattice");
                !target[slot].is_zero()
            })
        })
        .collect();
    let columns: Vec<Vec<Rational>> = live
        .iter()
        .map(|p| {
            let path = g.pref_to_path(p);
            edge_ids
                .iter()
                .map(|id| {
                    if path.edge_ids().iter().any(|e| e == id) {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut found: BTreeMap<Vec<String>, Distribution> = BTreeMap::new();
    let mut search = SupportSearch {
        live: &live,
        columns: &columns,
        target: &target,
        universe,
        basis: Vec::new(),
        chosen: Vec::new(),
        found: &mut found,
    };
    let residual = search.target.to_vec();
    search.descend(0, residual)?;
    if found.is_empty() {
        return Err(IdsetError::Infeasible);
    }
    Ok(found.into_values().collect())
}

/// Forward-elimination state for the support search: `basis` holds the
/// chosen columns reduced to echelon form (pivot entry normalized to one,
/// later vectors zero at earlier pivot rows), so testing a candidate
/// column — or the target residual — costs one sweep instead of a fresh
/// rank computation per node.
struct SupportSearch<'a> {
    live: &'a [&'a Preference],
    columns: &'a [Vec<Rational>],
    target: &'a [Rational],
    universe: &'a Universe,
    basis: Vec<(usize, Vec<Rational>)>,
    chosen: Vec<usize>,
    found: &'a mut BTreeMap<Vec<String>, Distribution>,
}

impl SupportSearch<'_> {
    /// Subtracts the basis's span from `v` in place.
    fn reduce(&self, v: &mut [Rational]) {
        for (pivot, col) in &self.basis {
            if !v[*pivot].is_zero() {
                let factor = v[*pivot].clone();
                for (entry, base) in v.iter_mut().zip(col) {
                    *entry = &*entry - &(&factor * base);
                }
            }
        }
    }

    /// DFS over index subsets in ascending order. Dependent candidates are
    /// skipped (no vertex has a dependent support), and once the flow lies
    /// in the span of the chosen columns the branch closes: any strict
    /// superset is independent yet solves with a zero coefficient, so it
    /// is never a vertex support.
    fn descend(&mut self, next: usize, residual: Vec<Rational>) -> Result<(), IdsetError> {
        if residual.iter().all(Rational::is_zero) {
            self.accept()?;
            return Ok(());
        }
        for c in next..self.columns.len() {
            let mut reduced = self.columns[c].clone();
            self.reduce(&mut reduced);
            let Some(pivot) = reduced.iter().position(|v| !v.is_zero()) else {
                continue; // dependent on the chosen columns
            };
            let scale = reduced[pivot].recip();
            for entry in reduced.iter_mut() {
                *entry = &*entry * &scale;
            }
            let mut next_residual = residual.clone();
            if !next_residual[pivot].is_zero() {
                let factor = next_residual[pivot].clone();
                for (entry, base) in next_residual.iter_mut().zip(&reduced) {
                    *entry = &*entry - &(&factor * base);
                }
            }
            self.basis.push((pivot, reduced));
            self.chosen.push(c);
            self.descend(c + 1, next_residual)?;
            self.chosen.pop();
            self.basis.pop();
        }
        Ok(())
    }

    /// The flow lies in the span of the (independent) chosen columns:
    /// solve for the unique coefficients and record a vertex when they are
    /// strictly positive.
    fn accept(&mut self) -> Result<(), IdsetError> {
        if self.chosen.is_empty() {
            return Ok(());
        }
        let rows: Vec<Vec<Rational>> = (0..self.target.len())
            .map(|r| {
                self.chosen
                    .iter()
                    .map(|&c| self.columns[c][r].clone())
                    .collect()
            })
            .collect();
        let m = RatMatrix::from_rows(rows).expect("columns share the edge count");
        let SolveOutcome::Unique(x) = m.solve(self.target) else {
            return Err(IdsetError::Internal(
                "independent consistent system was not uniquely solvable".into(),
            ));
        };
        if x.iter().all(|v| v.is_positive()) {
            let measure = SignedMeasure::from_entries(
                self.universe.clone(),
                self.chosen
                    .iter()
                    .zip(&x)
                    .map(|(&c, v)| (self.live[c].key().to_owned(), v.clone())),
            )?;
            if let Ok(dist) = Distribution::from_measure(measure) {
                let key: Vec<String> = self
                    .chosen
                    .iter()
                    .map(|&c| self.live[c].key().to_owned())
                    .collect();
                self.found.insert(key, dist);
            }
        }
        Ok(())
    }
}
