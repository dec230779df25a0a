//! Numeric probes for parametric identification.
//!
//! A smooth parametric family of choice probabilities is identified exactly
//! when a square smooth submodel of it is globally invertible, and global
//! invertibility reduces to two testable conditions: an everywhere
//! invertible Jacobian, and properness (parameter sequences escaping every
//! compact must have images that do too). Neither condition is decidable by
//! finitely many evaluations, so this module — the only floating-point one
//! in the workspace — produces *evidence*, never proofs:
//!
//! * [`jacobian`] / [`check_local`] — finite-difference Jacobians over a
//!   grid, flagging near-singular points as local-failure witnesses;
//! * [`properness_probe`] — drives parameter rays toward the boundary and
//!   reports a violation when the image accumulates at a value the model
//!   also attains at a robustly interior point;
//! * [`collision_search`] — multi-start root-finding for two separated
//!   parameter vectors with equal images, re-verified from scratch before
//!   being reported;
//! * [`builtin`] — the ratio-normalized logit submodel, and the
//!   habit-formation model with its full unconditional-probability
//!   evaluator, the workspace's stock examples of an identified and a
//!   non-identified family.
//!
//! Every tolerance is an explicit argument with a stated default, and all
//! verdicts are labeled as evidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default relative step for central finite differences.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Default threshold under which a Jacobian determinant counts as a
/// local-failure witness.
pub const DEFAULT_LOCAL_TOL: f64 = 1e-10;
/// Default minimum `‖θ − θ′‖∞` for a reported collision.
pub const DEFAULT_SEPARATION_FLOOR: f64 = 1e-3;
/// Default distance from the boundary below which an attaining point does
/// not count as interior.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-2;
/// Cap on the total number of grid points a local check will evaluate.
pub const GRID_POINT_CAP: usize = 100_000;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    /// A builtin name this module does not provide.
    #[error("unknown builtin model {0:?}")]
    UnknownModel(String),
    /// A size outside the builtin's supported range.
    #[error("size {size} is invalid for builtin {model:?}")]
    BadSize {
        /// The builtin's name.
        model: String,
        /// The rejected size.
        size: usize,
    },
    /// Mismatched or degenerate domain bounds.
    #[error("bad domain: {0}")]
    BadDomain(String),
    /// A parameter vector of the wrong length.
    #[error("expected a parameter vector of length {expected}, got {got}")]
    DimensionMismatch {
        /// The model's dimension.
        expected: usize,
        /// The offered length.
        got: usize,
    },
    /// A parameter outside the open box.
    #[error("coordinate {coordinate} = {value} lies outside the open domain")]
    OutsideDomain {
        /// Index of the offending coordinate.
        coordinate: usize,
        /// Its value.
        value: f64,
    },
    /// An evaluator produced NaN or an infinity.
    #[error("evaluator returned a non-finite value at component {0}")]
    NonFinite(usize),
    /// A full-model operation on a model without a full evaluator.
    #[error("model has no full evaluator")]
    MissingFullModel,
    /// A grid larger than [`GRID_POINT_CAP`].
    #[error("grid holds {points} points, more than the cap {cap}")]
    GridTooLarge {
        /// Requested point count.
        points: usize,
        /// The cap in force.
        cap: usize,
    },
    /// A JSON document did not match the expected schema.
    #[error("bad document: {0}")]
    BadDocument(String),
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// An open box `Π (lᵢ, uᵢ)` of admissible parameters; bounds may be
/// infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    /// Validates per-coordinate bounds (`lᵢ < uᵢ`, NaN-free, nonempty).
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ParamError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ParamError::BadDomain(
                "bounds must be nonempty and of equal length".into(),
            ));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l >= u {
                return Err(ParamError::BadDomain(format!(
                    "coordinate {i} has bounds ({l}, {u})"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The open positive orthant `(0, ∞)^d`.
    pub fn positive(dim: usize) -> Result<Self, ParamError> {
        Domain::new(vec![0.0; dim], vec![f64::INFINITY; dim])
    }

    /// The box `(low, ∞)^d`.
    pub fn above(low: f64, dim: usize) -> Result<Self, ParamError> {
        Domain::new(vec![low; dim], vec![f64::INFINITY; dim])
    }

    /// Number of coordinates.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Lower bounds.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Upper bounds.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Checks a parameter vector for length and strict interiority.
    pub fn check(&self, theta: &[f64]) -> Result<(), ParamError> {
        if theta.len() != self.dim() {
            return Err(ParamError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        for (i, &t) in theta.iter().enumerate() {
            if !t.is_finite() || t <= self.lower[i] || t >= self.upper[i] {
                return Err(ParamError::OutsideDomain {
                    coordinate: i,
                    value: t,
                });
            }
        }
        Ok(())
    }

    /// True iff the vector passes [`Domain::check`].
    pub fn contains(&self, theta: &[f64]) -> bool {
        self.check(theta).is_ok()
    }

    /// True iff every coordinate keeps at least `margin` distance from
    /// each finite edge.
    pub fn is_robustly_interior(&self, theta: &[f64], margin: f64) -> bool {
        self.contains(theta)
            && theta.iter().enumerate().all(|(i, &t)| {
                (self.lower[i].is_infinite() || t - self.lower[i] >= margin)
                    && (self.upper[i].is_infinite() || self.upper[i] - t >= margin)
            })
    }

    /// A finite box inside the domain from which searches draw random
    /// starts: finite edges are shrunk by 2%, infinite ones truncated ten
    /// units from the opposite edge (or at ±10 when both are infinite).
    fn sampling_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let (l, u) = (self.lower[i], self.upper[i]);
            let (a, b) = match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let pad = 0.02 * (u - l);
                    (l + pad, u - pad)
                }
                (true, false) => (l + 0.05, l + 10.0),
                (false, true) => (u - 10.0, u - 0.05),
                (false, false) => (-10.0, 10.0),
            };
            lo.push(a);
            hi.push(b);
        }
        (lo, hi)
    }
}

/// A smooth parametric model: a square submodel evaluator `θ ↦ φ̄(θ) ∈ ℝ^d`
/// over an open box, optionally paired with a labeled full-model evaluator
/// producing every observable choice probability.
pub struct ParametricModel {
    name: String,
    domain: Domain,
    evaluator: Box<dyn Fn(&[f64]) -> Vec<f64>>,
    full_labels: Vec<String>,
    full_evaluator: Option<Box<dyn Fn(&[f64]) -> Vec<f64>>>,
}

impl std::fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("full", &self.full_evaluator.is_some())
            .finish()
    }
}

impl ParametricModel {
    /// Wraps a submodel evaluator over a domain. The evaluator must return
    /// a vector of the domain's dimension at every interior point.
    pub fn new(
        name: &str,
        domain: Domain,
        evaluator: impl Fn(&[f64]) -> Vec<f64> + 'static,
    ) -> Self {
        ParametricModel {
            name: name.to_owned(),
            domain,
            evaluator: Box::new(evaluator),
            full_labels: Vec::new(),
            full_evaluator: None,
        }
    }

    /// Attaches a full-model evaluator: `labels[i]` names the probability
    /// returned in component `i`.
    pub fn with_full(
        mut self,
        labels: Vec<String>,
        evaluator: impl Fn(&[f64]) -> Vec<f64> + 'static,
    ) -> Self {
        self.full_labels = labels;
        self.full_evaluator = Some(Box::new(evaluator));
        self
    }

    /// The model's name (used in reports).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of parameters, equal to the number of submodel components.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The admissible open box.
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Evaluates the submodel, enforcing the domain and finiteness.
    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>, ParamError> {
        self.domain.check(theta)?;
        let out = (self.evaluator)(theta);
        if out.len() != self.dim() {
            return Err(ParamError::DimensionMismatch {
                expected: self.dim(),
                got: out.len(),
            });
        }
        for (i, v) in out.iter().enumerate() {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(i));
            }
        }
        Ok(out)
    }

    /// True iff a full-model evaluator is attached.
    pub fn has_full(&self) -> bool {
        self.full_evaluator.is_some()
    }

    /// Labels of the full model's probability components.
    pub fn full_labels(&self) -> &[String] {
        &self.full_labels
    }

    /// Evaluates the full model.
    pub fn full_eval(&self, theta: &[f64]) -> Result<Vec<f64>, ParamError> {
        let f = self
            .full_evaluator
            .as_ref()
            .ok_or(ParamError::MissingFullModel)?;
        self.domain.check(theta)?;
        let out = f(theta);
        for (i, v) in out.iter().enumerate() {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(i));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// The ratio-normalized logit submodel on `X = {x₀, …, x_K}` with weights
/// `w₀ ≡ 1`: each component is `ρ(x_k, X) / ρ(x₀, X)`, computed through
/// the probabilities and collapsing to `w_k` exactly.
fn luce_model(k: usize) -> ParametricModel {
    let domain = Domain::positive(k).expect("positive orthant");
    ParametricModel::new("luce", domain, move |w: &[f64]| {
        let denom: f64 = 1.0 + w.iter().sum::<f64>();
        let p0 = 1.0 / denom;
        w.iter().map(|wi| (wi / denom) / p0).collect()
    })
}

/// The habit-formation submodel components for parameters
/// `(v₁, c₁, …, v_N, c_N)`: the first `N` components are the binary odds
/// `(1 + vᵢ) / (vᵢ (1 + vᵢ cᵢ))` of the outside option against `xᵢ`, the
/// last `N` the triple odds `(1 + vᵢ + vᵢ₊₁) / (vᵢ + vᵢ vᵢ₊₁ + cᵢ vᵢ²)`
/// with indices wrapping.
fn habit_submodel_components(n: usize, theta: &[f64]) -> Vec<f64> {
    let v = |i: usize| theta[2 * (i % n)];
    let c = |i: usize| theta[2 * (i % n) + 1];
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push((1.0 + v(i)) / (v(i) * (1.0 + v(i) * c(i))));
    }
    for i in 0..n {
        let (vi, vj) = (v(i), v(i + 1));
        out.push((1.0 + vi + vj) / (vi + vi * vj + c(i) * vi * vi));
    }
    out
}

/// The unconditional habit-formation probabilities on every menu
/// containing the outside option: with `v₀ = c₀ = 1`,
/// `ρ(xᵢ, A) = vᵢ (Σ_{j∈A∖i} vⱼ + vᵢ cᵢ) / Σ_{j∈A} vⱼ (Σ_{k∈A∖j} v_k + vⱼ cⱼ)`.
fn habit_full_probs(n: usize, theta: &[f64]) -> Vec<f64> {
    let v = |i: usize| if i == 0 { 1.0 } else { theta[2 * (i - 1)] };
    let c = |i: usize| if i == 0 { 1.0 } else { theta[2 * (i - 1) + 1] };
    let mut out = Vec::new();
    for mask in 0..(1u32 << (n + 1)) {
        if mask & 1 == 0 {
            continue; // menus always contain the outside option
        }
        let members: Vec<usize> = (0..=n).filter(|i| mask >> i & 1 == 1).collect();
        let weight = |j: usize| {
            let rest: f64 = members.iter().filter(|&&k| k != j).map(|&k| v(k)).sum();
            v(j) * (rest + v(j) * c(j))
        };
        let denom: f64 = members.iter().map(|&j| weight(j)).sum();
        for &j in &members {
            out.push(weight(j) / denom);
        }
    }
    out
}

fn habit_full_labels(n: usize) -> Vec<String> {
    let mut labels = Vec::new();
    for mask in 0..(1u32 << (n + 1)) {
        if mask & 1 == 0 {
            continue;
        }
        let members: Vec<usize> = (0..=n).filter(|i| mask >> i & 1 == 1).collect();
        let menu: String = members.iter().map(|i| format!("x{i}")).collect();
        for j in &members {
            labels.push(format!("x{j}|{menu}"));
        }
    }
    labels
}

/// The value of `c` putting the binary odds `(1 + v) / (v (1 + v c))` at
/// exactly `target`: `c = (1 + v) / (target · v²) − 1/v`. Two level
/// curves matter for the habit model: `target = 1/10` (on which the triple
/// odds reduce to `(1 + 2v) / (v² + 10(1 + v))`, hitting `1/7` at both
/// `v = 3` and the `v → 1` boundary) and `target = 10` (whose `c` falls
/// below the model's domain for every `v > 1`).
pub fn habit_level_curve(v: f64, target: f64) -> f64 {
    (1.0 + v) / (target * v * v) - 1.0 / v
}

/// Constructs a built-in model: `"luce"` (size = number of non-outside
/// alternatives, 1..=12), `"habit-submodel"`, or `"habit-full"` (size = N,
/// 1..=6; the full variant carries the unconditional-probability
/// evaluator).
pub fn builtin(name: &str, size: usize) -> Result<ParametricModel, ParamError> {
    let bad = |model: &str| ParamError::BadSize {
        model: model.to_owned(),
        size,
    };
    match name {
        "luce" => {
            if !(1..=12).contains(&size) {
                return Err(bad("luce"));
            }
            Ok(luce_model(size))
        }
        "habit-submodel" | "habit-full" => {
            if !(1..=6).contains(&size) {
                return Err(bad(name));
            }
            let domain = Domain::above(1.0, 2 * size).expect("open box");
            let model = ParametricModel::new(name, domain, move |theta: &[f64]| {
                habit_submodel_components(size, theta)
            });
            if name == "habit-full" {
                Ok(model.with_full(habit_full_labels(size), move |theta: &[f64]| {
                    habit_full_probs(size, theta)
                }))
            } else {
                Ok(model)
            }
        }
        other => Err(ParamError::UnknownModel(other.to_owned())),
    }
}

/// Parses a builtin spec document: `{"model": "luce", "k": 3}` or
/// `{"model": "habit-full", "n": 2}`.
pub fn builtin_from_json(value: &serde_json::Value) -> Result<ParametricModel, ParamError> {
    let name = value
        .get("model")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ParamError::BadDocument("missing \"model\"".into()))?;
    let size_key = if name == "luce" { "k" } else { "n" };
    let size = value
        .get(size_key)
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ParamError::BadDocument(format!("missing \"{size_key}\"")))?;
    builtin(name, size as usize)
}

// ---------------------------------------------------------------------------
// Jacobians and the local check
// ---------------------------------------------------------------------------

/// Central-difference Jacobian `J[r][c] = ∂φ̄_r / ∂θ_c` with per-coordinate
/// step `h · max(1, |θ_c|)` (default [`DEFAULT_FD_STEP`]). Both displaced
/// points must lie inside the domain.
pub fn jacobian(
    m: &ParametricModel,
    theta: &[f64],
    h: Option<f64>,
) -> Result<Vec<Vec<f64>>, ParamError> {
    let h = h.unwrap_or(DEFAULT_FD_STEP);
    let d = m.dim();
    m.domain().check(theta)?;
    let mut columns = Vec::with_capacity(d);
    for c in 0..d {
        let step = h * theta[c].abs().max(1.0);
        let mut plus = theta.to_vec();
        plus[c] += step;
        let mut minus = theta.to_vec();
        minus[c] -= step;
        let (fp, fm) = (m.eval(&plus)?, m.eval(&minus)?);
        columns.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect::<Vec<f64>>(),
        );
    }
    Ok((0..d)
        .map(|r| (0..d).map(|c| columns[c][r]).collect())
        .collect())
}

/// Determinant by LU decomposition with partial pivoting.
fn det(mat: &[Vec<f64>]) -> f64 {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty column");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            sign = -sign;
        }
        d *= a[col][col];
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    sign * d
}

/// An axis-aligned evaluation grid: `points_per_axis` equally spaced
/// values per coordinate, Cartesian product over all coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Per-coordinate smallest grid value.
    pub lower: Vec<f64>,
    /// Per-coordinate largest grid value.
    pub upper: Vec<f64>,
    /// Number of values per coordinate (≥ 1).
    pub points_per_axis: usize,
}

impl GridSpec {
    fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>, ParamError> {
        if self.lower.len() != dim || self.upper.len() != dim || self.points_per_axis == 0 {
            return Err(ParamError::BadDomain(
                "grid bounds must match the model dimension".into(),
            ));
        }
        let total = self.points_per_axis.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if total > GRID_POINT_CAP {
            return Err(ParamError::GridTooLarge {
                points: total,
                cap: GRID_POINT_CAP,
            });
        }
        let axis = |i: usize| -> Vec<f64> {
            if self.points_per_axis == 1 {
                return vec![(self.lower[i] + self.upper[i]) / 2.0];
            }
            (0..self.points_per_axis)
                .map(|k| {
                    self.lower[i]
                        + (self.upper[i] - self.lower[i]) * k as f64
                            / (self.points_per_axis - 1) as f64
                })
                .collect()
        };
        let mut points = vec![Vec::new()];
        for i in 0..dim {
            let mut next = Vec::with_capacity(points.len() * self.points_per_axis);
            for p in &points {
                for v in axis(i) {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }
}

/// Probe verdicts. Witnesses are numerical evidence, never proofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No tested point or ray violated the conditions.
    NoViolationFound,
    /// Some grid point has a Jacobian determinant below tolerance.
    LocalFailureWitness,
    /// Some ray's image accumulates at an interior-attained value.
    PropernessViolationWitness,
}

/// A grid point with its Jacobian determinant magnitude.
#[derive(Debug, Clone, Serialize)]
pub struct PointDet {
    /// The evaluation point.
    pub theta: Vec<f64>,
    /// `|det J|` there.
    pub abs_det: f64,
}

/// Result of a local (Jacobian-invertibility) sweep.
#[derive(Debug, Clone, Serialize)]
pub struct LocalProbe {
    /// The grid that was swept.
    pub grid: GridSpec,
    /// Finite-difference step used.
    pub step: f64,
    /// Witness threshold used.
    pub tol: f64,
    /// Determinant magnitude at every grid point.
    pub dets: Vec<PointDet>,
    /// Smallest magnitude found.
    pub min_abs_det: f64,
    /// Point attaining it.
    pub argmin: Vec<f64>,
    /// Points below tolerance.
    pub witnesses: Vec<PointDet>,
    /// Fragment verdict.
    pub verdict: Verdict,
}

/// Sweeps the grid, recording `|det J|` everywhere and flagging values
/// below `tol` (default [`DEFAULT_LOCAL_TOL`]) as local-failure witnesses.
/// The grid must keep a finite-difference step's distance from the
/// domain's edges.
pub fn check_local(
    m: &ParametricModel,
    grid: &GridSpec,
    tol: f64,
) -> Result<LocalProbe, ParamError> {
    let mut dets = Vec::new();
    let mut witnesses = Vec::new();
    let mut min_abs_det = f64::INFINITY;
    let mut argmin = Vec::new();
    for theta in grid.points(m.dim())? {
        let j = jacobian(m, &theta, None)?;
        let abs_det = det(&j).abs();
        if abs_det < min_abs_det {
            min_abs_det = abs_det;
            argmin = theta.clone();
        }
        let entry = PointDet {
            theta,
            abs_det,
        };
        if abs_det < tol {
            witnesses.push(entry.clone());
        }
        dets.push(entry);
    }
    let verdict = if witnesses.is_empty() {
        Verdict::NoViolationFound
    } else {
        Verdict::LocalFailureWitness
    };
    Ok(LocalProbe {
        grid: grid.clone(),
        step: DEFAULT_FD_STEP,
        tol,
        dets,
        min_abs_det,
        argmin,
        witnesses,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Root finding (shared by the properness probe and the collision search)
// ---------------------------------------------------------------------------

/// Solves a dense square system by Gaussian elimination with partial
/// pivoting; `None` on (numerical) singularity.
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(pivot, col);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn norm2_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Finite-difference Jacobian of a fallible residual, shrinking the step
/// and falling back to one-sided differences near the domain's edges.
fn residual_jacobian(
    f: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    x: &[f64],
    r0: &[f64],
) -> Option<Vec<Vec<f64>>> {
    let m = r0.len();
    let n = x.len();
    let mut jt: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut h = 1e-7 * x[c].abs().max(1.0);
        let mut column = None;
        for _ in 0..8 {
            let mut plus = x.to_vec();
            plus[c] += h;
            let mut minus = x.to_vec();
            minus[c] -= h;
            match (f(&plus), f(&minus)) {
                (Some(fp), Some(fm)) => {
                    column = Some(
                        fp.iter()
                            .zip(&fm)
                            .map(|(a, b)| (a - b) / (2.0 * h))
                            .collect(),
                    );
                    break;
                }
                (Some(fp), None) => {
                    column = Some(fp.iter().zip(r0).map(|(a, b)| (a - b) / h).collect());
                    break;
                }
                (None, Some(fm)) => {
                    column = Some(r0.iter().zip(&fm).map(|(a, b)| (a - b) / h).collect());
                    break;
                }
                (None, None) => h *= 0.25,
            }
        }
        jt.push(column?);
    }
    Some(
        (0..m)
            .map(|r| (0..n).map(|c| jt[c][r]).collect())
            .collect(),
    )
}

/// Damped Gauss–Newton (Levenberg–Marquardt) root search for a fallible
/// residual. Returns the final iterate when the residual's sup-norm drops
/// below `tol`.
fn gauss_newton(
    f: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    let mut r = f(&x)?;
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if norm_inf(&r) <= tol {
            return Some(x);
        }
        let j = residual_jacobian(f, &x, &r)?;
        let n = x.len();
        // Normal equations Jᵀ J δ = −Jᵀ r with Levenberg damping.
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (row, rv) in j.iter().zip(&r) {
            for a in 0..n {
                jtr[a] += row[a] * rv;
                for b in 0..n {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda;
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            if let Some(delta) = solve_dense(&damped, &rhs) {
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
                if let Some(rt) = f(&trial) {
                    if norm2_sq(&rt) < norm2_sq(&r) {
                        x = trial;
                        r = rt;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 8.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (norm_inf(&r) <= tol).then_some(x)
}

fn sample_point(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| rng.gen_range(a..b))
        .collect()
}

// ---------------------------------------------------------------------------
// Properness probe
// ---------------------------------------------------------------------------

/// An explicit parameter sequence marching toward the domain's boundary
/// (or off to infinity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Human-readable identifier, reported back in results.
    pub name: String,
    /// The parameter sequence, escape direction last.
    pub points: Vec<Vec<f64>>,
}

/// Auto-generated coordinate rays from an interior base point: for each
/// coordinate, one ray halving the distance to each finite edge (and one
/// doubling off to each infinite edge), all other coordinates fixed.
pub fn coordinate_rays(
    m: &ParametricModel,
    base: &[f64],
    steps: usize,
) -> Result<Vec<Ray>, ParamError> {
    m.domain().check(base)?;
    let mut rays = Vec::new();
    for i in 0..m.dim() {
        let (l, u) = (m.domain().lower()[i], m.domain().upper()[i]);
        let mut toward_lower = Vec::with_capacity(steps);
        let mut toward_upper = Vec::with_capacity(steps);
        for k in 1..=steps {
            let mut down = base.to_vec();
            down[i] = if l.is_finite() {
                l + (base[i] - l) * 0.5f64.powi(k as i32)
            } else {
                base[i] - 2.0f64.powi(k as i32)
            };
            toward_lower.push(down);
            let mut up = base.to_vec();
            up[i] = if u.is_finite() {
                u - (u - base[i]) * 0.5f64.powi(k as i32)
            } else {
                base[i] + 2.0f64.powi(k as i32)
            };
            toward_upper.push(up);
        }
        rays.push(Ray {
            name: format!("theta{i}->lower"),
            points: toward_lower,
        });
        rays.push(Ray {
            name: format!("theta{i}->upper"),
            points: toward_upper,
        });
    }
    Ok(rays)
}

/// Options for [`properness_probe`]: seed and start count for the
/// interior-preimage solves, residual tolerance, and the interior margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOptions {
    /// RNG seed for the preimage solves.
    pub seed: u64,
    /// Number of solve starts per detected accumulation value.
    pub starts: usize,
    /// Residual tolerance for an attaining point.
    pub tol: f64,
    /// Required distance from every finite edge (see
    /// [`DEFAULT_INTERIOR_MARGIN`]).
    pub interior_margin: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            seed: 7,
            starts: 24,
            tol: 1e-8,
            interior_margin: DEFAULT_INTERIOR_MARGIN,
        }
    }
}

/// What happened along one ray.
#[derive(Debug, Clone, Serialize)]
pub enum RayOutcome {
    /// The image sequence never settled: consistent with properness.
    NoAccumulation,
    /// The image converged, but its limit is attained only within the
    /// interior margin of the boundary: consistent with properness.
    ConvergedBoundary {
        /// Estimated limit of the image sequence.
        limit: Vec<f64>,
    },
    /// The image converged to a value the model also attains at a robustly
    /// interior point: a properness-violation witness.
    Witness {
        /// Estimated limit of the image sequence.
        limit: Vec<f64>,
        /// Interior point attaining it.
        interior_point: Vec<f64>,
        /// Residual `‖φ̄(interior_point) − limit‖∞`.
        residual: f64,
    },
}

/// One ray's record: how many points evaluated, the image tail, and the
/// outcome.
#[derive(Debug, Clone, Serialize)]
pub struct RayResult {
    /// The ray's name.
    pub name: String,
    /// Number of in-domain evaluations.
    pub images: usize,
    /// Last few image vectors (most recent last).
    pub tail: Vec<Vec<f64>>,
    /// Outcome classification.
    pub outcome: RayOutcome,
}

/// Result of a properness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RayProbe {
    /// Options used.
    pub options: ProbeOptions,
    /// Per-ray records.
    pub rays: Vec<RayResult>,
    /// Fragment verdict.
    pub verdict: Verdict,
}

/// Tracks each ray's image sequence. When the images settle toward a
/// limit, a multi-start root search asks whether the model also attains
/// that limit at a robustly interior point; if so, preimages of a compact
/// neighborhood of the limit are non-compact and the ray is a
/// properness-violation witness.
pub fn properness_probe(
    m: &ParametricModel,
    rays: &[Ray],
    opts: &ProbeOptions,
) -> Result<RayProbe, ParamError> {
    let mut results = Vec::with_capacity(rays.len());
    let mut any_witness = false;
    for ray in rays {
        let images: Vec<Vec<f64>> = ray
            .points
            .iter()
            .filter_map(|p| m.eval(p).ok())
            .collect();
        let tail: Vec<Vec<f64>> = images.iter().rev().take(4).rev().cloned().collect();
        let outcome = classify_ray(m, &images, opts);
        if matches!(outcome, RayOutcome::Witness { .. }) {
            any_witness = true;
        }
        results.push(RayResult {
            name: ray.name.clone(),
            images: images.len(),
            tail,
            outcome,
        });
    }
    Ok(RayProbe {
        options: opts.clone(),
        rays: results,
        verdict: if any_witness {
            Verdict::PropernessViolationWitness
        } else {
            Verdict::NoViolationFound
        },
    })
}

fn classify_ray(m: &ParametricModel, images: &[Vec<f64>], opts: &ProbeOptions) -> RayOutcome {
    if images.len() < 3 {
        return RayOutcome::NoAccumulation;
    }
    let last = &images[images.len() - 1];
    let scale = norm_inf(last).max(1.0);
    let settled = images[images.len() - 3..]
        .windows(2)
        .all(|w| {
            let diff: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            norm_inf(&diff) <= 1e-6 * scale
        });
    if !settled {
        return RayOutcome::NoAccumulation;
    }
    let limit = last.clone();
    // Does the model attain the limit at a robustly interior point?
    let target = limit.clone();
    let residual = move |theta: &[f64]| -> Option<Vec<f64>> {
        let y = m.eval(theta).ok()?;
        Some(y.iter().zip(&target).map(|(a, b)| a - b).collect())
    };
    let (lo, hi) = m.domain().sampling_box();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.starts {
        let start = sample_point(&mut rng, &lo, &hi);
        if let Some(theta) = gauss_newton(&residual, &start, opts.tol, 80) {
            if m.domain().is_robustly_interior(&theta, opts.interior_margin) {
                let r = residual(&theta).expect("converged point is in-domain");
                return RayOutcome::Witness {
                    limit,
                    interior_point: theta,
                    residual: norm_inf(&r),
                };
            }
        }
    }
    RayOutcome::ConvergedBoundary { limit }
}

/// A combined probe report: local and boundary fragments with an overall
/// verdict (local failures take precedence over properness violations).
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// The probed model's name.
    pub model: String,
    /// Jacobian sweep, when run.
    pub local: Option<LocalProbe>,
    /// Boundary sweep, when run.
    pub rays: Option<RayProbe>,
    /// Overall verdict.
    pub verdict: Verdict,
}

impl ProbeReport {
    /// Merges fragments into one report.
    pub fn assemble(model: &str, local: Option<LocalProbe>, rays: Option<RayProbe>) -> Self {
        let verdict = if local
            .as_ref()
            .is_some_and(|l| l.verdict == Verdict::LocalFailureWitness)
        {
            Verdict::LocalFailureWitness
        } else if rays
            .as_ref()
            .is_some_and(|r| r.verdict == Verdict::PropernessViolationWitness)
        {
            Verdict::PropernessViolationWitness
        } else {
            Verdict::NoViolationFound
        };
        ProbeReport {
            model: model.to_owned(),
            local,
            rays,
            verdict,
        }
    }
}

// ---------------------------------------------------------------------------
// Collision search
// ---------------------------------------------------------------------------

/// A re-verified pair of separated parameter vectors with (numerically)
/// equal images.
#[derive(Debug, Clone, Serialize)]
pub struct Collision {
    /// First parameter vector.
    pub theta: Vec<f64>,
    /// Second parameter vector.
    pub theta_prime: Vec<f64>,
    /// Largest absolute probability gap on re-evaluation — across every
    /// menu of the full model when one is attached, otherwise across the
    /// submodel components.
    pub max_gap: f64,
    /// `‖θ − θ′‖∞`.
    pub separation: f64,
    /// Index of the successful start (results merge deterministically by
    /// this index).
    pub start_index: usize,
}

/// Options for [`collision_search`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionOptions {
    /// RNG seed for the start points.
    pub seed: u64,
    /// Minimum separation of a reported pair (see
    /// [`DEFAULT_SEPARATION_FLOOR`]); closer pairs are spurious
    /// rediscoveries of local behavior and are discarded.
    pub separation_floor: f64,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        CollisionOptions {
            seed: 7,
            separation_floor: DEFAULT_SEPARATION_FLOOR,
        }
    }
}

/// Multi-start root search for `φ̄(θ) = φ̄(θ′)` with `θ ≄ θ′`: each attempt
/// anchors `θ` at a random draw and hunts a second preimage of its image
/// with the damped Gauss–Newton iteration from a few independent starts
/// (solving the free vector alone keeps the search away from the trivial
/// `θ′ = θ` rediscovery, which is discarded by the separation floor when
/// it happens anyway). Survivors are re-verified from scratch — the
/// reported `max_gap` is recomputed by fresh evaluations and must come in
/// at or under `tol`. Returns the first verified collision by attempt
/// index, or `None` when every attempt fails (absence of a collision is
/// evidence, not proof).
pub fn collision_search(
    m: &ParametricModel,
    attempts: usize,
    tol: f64,
    opts: &CollisionOptions,
) -> Option<Collision> {
    let inner_tol = (tol * 1e-2).max(1e-14);
    let (lo, hi) = m.domain().sampling_box();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for start_index in 0..attempts {
        let theta = sample_point(&mut rng, &lo, &hi);
        let Ok(target) = m.eval(&theta) else {
            continue;
        };
        let residual = |tp: &[f64]| -> Option<Vec<f64>> {
            let y = m.eval(tp).ok()?;
            Some(y.iter().zip(&target).map(|(a, b)| a - b).collect())
        };
        let mut found = None;
        for _ in 0..4 {
            let start = sample_point(&mut rng, &lo, &hi);
            let Some(tp) = gauss_newton(&residual, &start, inner_tol, 120) else {
                continue;
            };
            let separation = norm_inf(
                &theta
                    .iter()
                    .zip(&tp)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>(),
            );
            if separation >= opts.separation_floor {
                found = Some((tp, separation));
                break;
            }
        }
        let Some((theta_prime, separation)) = found else {
            continue;
        };
        // Re-verify from scratch before reporting.
        let gap = if m.has_full() {
            let (pa, pb) = (m.full_eval(&theta), m.full_eval(&theta_prime));
            match (pa, pb) {
                (Ok(pa), Ok(pb)) => pa
                    .iter()
                    .zip(&pb)
                    .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())),
                _ => continue,
            }
        } else {
            let (ya, yb) = (m.eval(&theta), m.eval(&theta_prime));
            match (ya, yb) {
                (Ok(ya), Ok(yb)) => ya
                    .iter()
                    .zip(&yb)
                    .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())),
                _ => continue,
            }
        };
        if gap <= tol {
            return Some(Collision {
                theta,
                theta_prime,
                max_gap: gap,
                separation,
                start_index,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luce3() -> ParametricModel {
        builtin("luce", 3).unwrap()
    }

    fn habit2() -> ParametricModel {
        builtin("habit-submodel", 2).unwrap()
    }

    #[test]
    fn luce_submodel_is_the_identity() {
        let m = luce3();
        let w = [1.0, 2.0, 3.0];
        let out = m.eval(&w).unwrap();
        for (a, b) in out.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
        // Round-trip: feed the output back in and re-evaluate.
        let again = m.eval(&out).unwrap();
        for (a, b) in again.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
        let j = jacobian(&m, &w, None).unwrap();
        for (r, row) in j.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-8, "J[{r}][{c}] = {v}");
            }
        }
    }

    #[test]
    fn jacobian_of_an_affine_map_is_its_matrix() {
        let a = [[2.0, 1.0], [0.0, 3.0]];
        let m = ParametricModel::new(
            "affine",
            Domain::new(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap(),
            move |t: &[f64]| {
                vec![
                    a[0][0] * t[0] + a[0][1] * t[1],
                    a[1][0] * t[0] + a[1][1] * t[1],
                ]
            },
        );
        let j = jacobian(&m, &[0.3, -0.7], None).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((j[r][c] - a[r][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn habit_jacobian_matches_the_hand_derivative() {
        // First component f = (1+v)/(v + v²c), depending on coordinates
        // (v₁, c₁) = (θ₀, θ₁) only.
        let m = habit2();
        let theta = [1.7, 2.3, 2.5, 3.1];
        let (v, c) = (theta[0], theta[1]);
        let denom = v + v * v * c;
        let dv = (denom - (1.0 + v) * (1.0 + 2.0 * v * c)) / (denom * denom);
        let dc = -(1.0 + v) * v * v / (denom * denom);
        let j = jacobian(&m, &theta, None).unwrap();
        assert!((j[0][0] - dv).abs() < 1e-5);
        assert!((j[0][1] - dc).abs() < 1e-5);
        assert!(j[0][2].abs() < 1e-9 && j[0][3].abs() < 1e-9);
        // Central differences converge at order h².
        let err = |h: f64| {
            let j = jacobian(&m, &theta, Some(h)).unwrap();
            (j[0][0] - dv).abs()
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((2.5..6.0).contains(&ratio), "observed order ratio {ratio}");
    }

    #[test]
    fn habit_formulas_level_curves_and_domain_guard() {
        let m = habit2();
        // Along the 1/10 level curve, the binary odds components pin at
        // 1/10 and the triple odds reduce to (1+2v)/(v² + 10(1+v)),
        // which hits exactly 1/7 at v = 3.
        let v = 3.0;
        let c = habit_level_curve(v, 0.1);
        assert!((c - 37.0 / 9.0).abs() < 1e-12);
        let out = m.eval(&[v, c, v, c]).unwrap();
        assert!((out[0] - 0.1).abs() < 1e-12);
        assert!((out[1] - 0.1).abs() < 1e-12);
        assert!((out[2] - 1.0 / 7.0).abs() < 1e-12);
        assert!((out[3] - 1.0 / 7.0).abs() < 1e-12);
        for probe in [1.5, 2.0, 4.0] {
            let cc = habit_level_curve(probe, 0.1);
            let val = m.eval(&[probe, cc, probe, cc]).unwrap();
            let closed_form = (1.0 + 2.0 * probe) / (probe * probe + 10.0 * (1.0 + probe));
            assert!((val[2] - closed_form).abs() < 1e-12);
        }
        // The submodel components agree with the full model's
        // probability ratios.
        let full = builtin("habit-full", 2).unwrap();
        let theta = [1.9, 2.4, 3.2, 1.6];
        let sub = full.eval(&theta).unwrap();
        let labels = full.full_labels().to_vec();
        let probs = full.full_eval(&theta).unwrap();
        let prob = |label: &str| {
            probs[labels.iter().position(|l| l == label).unwrap()]
        };
        assert!((sub[0] - prob("x0|x0x1") / prob("x1|x0x1")).abs() < 1e-12);
        assert!((sub[1] - prob("x0|x0x2") / prob("x2|x0x2")).abs() < 1e-12);
        assert!((sub[2] - prob("x0|x0x1x2") / prob("x1|x0x1x2")).abs() < 1e-12);
        assert!((sub[3] - prob("x0|x0x1x2") / prob("x2|x0x1x2")).abs() < 1e-12);
        // The 10-level curve leaves the admissible box (c < 1 for v > 1),
        // so evaluating through the model is rejected by the domain guard.
        let c10 = habit_level_curve(3.0, 10.0);
        assert!(c10 < 1.0);
        assert!(matches!(
            m.eval(&[3.0, c10, 3.0, c10]),
            Err(ParamError::OutsideDomain { coordinate: 1, .. })
        ));
        // The boundary itself is rejected too.
        let n1 = builtin("habit-full", 1).unwrap();
        assert!(matches!(
            n1.eval(&[1.0, 1.0]),
            Err(ParamError::OutsideDomain { coordinate: 0, .. })
        ));
    }

    #[test]
    fn builtin_specs_parse_and_reject() {
        assert_eq!(builtin_from_json(&serde_json::json!({"model": "luce", "k": 3})).unwrap().dim(), 3);
        let full = builtin_from_json(&serde_json::json!({"model": "habit-full", "n": 2})).unwrap();
        assert_eq!(full.dim(), 4);
        assert!(full.has_full());
        // Menus {x0}, {x0,x1}, {x0,x2}, {x0,x1,x2}: 1 + 2 + 2 + 3 labels.
        assert_eq!(full.full_labels().len(), 8);
        assert!(matches!(
            builtin("luce", 0),
            Err(ParamError::BadSize { .. })
        ));
        assert!(matches!(
            builtin("habit-full", 9),
            Err(ParamError::BadSize { .. })
        ));
        assert!(matches!(
            builtin("nested-logit", 2),
            Err(ParamError::UnknownModel(_))
        ));
        assert!(builtin_from_json(&serde_json::json!({"n": 2})).is_err());
    }

    #[test]
    fn check_local_flags_singular_points_monotonically() {
        // f(θ) = (θ₀², θ₁) has det J = 2θ₀, singular exactly on θ₀ = 0.
        let m = ParametricModel::new(
            "fold",
            Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
            |t: &[f64]| vec![t[0] * t[0], t[1]],
        );
        let grid = GridSpec {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
            points_per_axis: 5,
        };
        let probe = check_local(&m, &grid, DEFAULT_LOCAL_TOL).unwrap();
        assert_eq!(probe.verdict, Verdict::LocalFailureWitness);
        assert!(probe.min_abs_det < DEFAULT_LOCAL_TOL);
        assert_eq!(probe.argmin[0], 0.0);
        assert!(!probe.witnesses.is_empty());
        for w in &probe.witnesses {
            assert_eq!(w.theta[0], 0.0);
        }
        // Loosening the tolerance keeps every witness.
        let looser = check_local(&m, &grid, 1e-6).unwrap();
        assert_eq!(looser.verdict, Verdict::LocalFailureWitness);
        assert!(looser.witnesses.len() >= probe.witnesses.len());

        // The identity-like builtin never comes close to singular.
        let grid3 = GridSpec {
            lower: vec![0.5; 3],
            upper: vec![4.0; 3],
            points_per_axis: 3,
        };
        let clean = check_local(&luce3(), &grid3, DEFAULT_LOCAL_TOL).unwrap();
        assert_eq!(clean.verdict, Verdict::NoViolationFound);
        assert!((clean.min_abs_det - 1.0).abs() < 1e-6);

        // An exploratory sweep of the habit submodel completes and reports
        // finite magnitudes (no ground-truth verdict asserted).
        let grid4 = GridSpec {
            lower: vec![1.5; 4],
            upper: vec![3.0; 4],
            points_per_axis: 2,
        };
        let report = check_local(&habit2(), &grid4, DEFAULT_LOCAL_TOL).unwrap();
        assert_eq!(report.dets.len(), 16);
        assert!(report.dets.iter().all(|p| p.abs_det.is_finite()));

        // Oversized grids are refused.
        let big = GridSpec {
            lower: vec![1.5; 4],
            upper: vec![3.0; 4],
            points_per_axis: 30,
        };
        assert!(matches!(
            check_local(&habit2(), &big, DEFAULT_LOCAL_TOL),
            Err(ParamError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn properness_clears_identity_and_ratio_models() {
        let ident = ParametricModel::new(
            "identity",
            Domain::positive(2).unwrap(),
            |t: &[f64]| t.to_vec(),
        );
        let rays = coordinate_rays(&ident, &[1.0, 1.0], 20).unwrap();
        let probe = properness_probe(&ident, &rays, &ProbeOptions::default()).unwrap();
        assert_eq!(probe.verdict, Verdict::NoViolationFound);
        for r in &probe.rays {
            assert!(!matches!(r.outcome, RayOutcome::Witness { .. }), "{}", r.name);
        }
        // The ratio-normalized logit behaves the same: a weight falling to
        // zero sends its image coordinate to the image's own boundary, and
        // a weight growing without bound escapes outright.
        let m = builtin("luce", 2).unwrap();
        let rays = coordinate_rays(&m, &[1.0, 2.0], 20).unwrap();
        let probe = properness_probe(&m, &rays, &ProbeOptions::default()).unwrap();
        assert_eq!(probe.verdict, Verdict::NoViolationFound);
        let down = probe.rays.iter().find(|r| r.name == "theta0->lower").unwrap();
        assert!(matches!(
            down.outcome,
            RayOutcome::ConvergedBoundary { .. }
        ));
        let up = probe.rays.iter().find(|r| r.name == "theta0->upper").unwrap();
        assert!(matches!(up.outcome, RayOutcome::NoAccumulation));
    }

    #[test]
    fn properness_detects_the_habit_accumulation() {
        // Along (v, c(v), v, c(v)) with c holding the binary odds at 1/10,
        // the image tends, as v → 1, to the value attained at v = 3.
        let m = habit2();
        let points: Vec<Vec<f64>> = (1..=18)
            .map(|k| {
                let v = 1.0 + 0.5f64.powi(k);
                let c = habit_level_curve(v, 0.1);
                vec![v, c, v, c]
            })
            .collect();
        let ray = Ray {
            name: "level-curve".into(),
            points,
        };
        let probe = properness_probe(&m, &[ray], &ProbeOptions::default()).unwrap();
        assert_eq!(probe.verdict, Verdict::PropernessViolationWitness);
        match &probe.rays[0].outcome {
            RayOutcome::Witness {
                limit,
                interior_point,
                residual,
            } => {
                assert!((limit[2] - 1.0 / 7.0).abs() < 1e-4);
                assert!(*residual < 1e-8);
                // The attaining point is robustly inside the box, far from
                // the v → 1 face the ray escapes through.
                for coord in interior_point {
                    assert!(*coord > 1.0 + DEFAULT_INTERIOR_MARGIN);
                }
                let re = m.eval(interior_point).unwrap();
                for (a, b) in re.iter().zip(limit) {
                    assert!((a - b).abs() < 1e-7);
                }
            }
            other => panic!("expected a witness, got {other:?}"),
        }
        let report = ProbeReport::assemble(m.name(), None, Some(probe));
        assert_eq!(report.verdict, Verdict::PropernessViolationWitness);
    }

    #[test]
    fn collision_search_finds_the_square_root_pair() {
        let m = ParametricModel::new(
            "square",
            Domain::new(vec![-1.0], vec![1.0]).unwrap(),
            |t: &[f64]| vec![t[0] * t[0]],
        );
        let hit = collision_search(&m, 50, 1e-9, &CollisionOptions::default())
            .expect("the square map collides at (t, -t)");
        assert!((hit.theta[0] + hit.theta_prime[0]).abs() < 1e-6);
        assert!(hit.separation >= DEFAULT_SEPARATION_FLOOR);
        assert!(hit.max_gap <= 1e-9);
        // Witness re-verification: the reported gap is what fresh
        // evaluations give.
        let fresh = (m.eval(&hit.theta).unwrap()[0] - m.eval(&hit.theta_prime).unwrap()[0]).abs();
        assert_eq!(fresh, hit.max_gap);
    }

    #[test]
    fn collision_search_on_the_full_habit_model() {
        let m = builtin("habit-full", 2).unwrap();
        let hit = collision_search(&m, 120, 1e-8, &CollisionOptions::default())
            .expect("the habit model is not identified");
        assert!(hit.separation >= DEFAULT_SEPARATION_FLOOR);
        assert!(hit.max_gap < 1e-8);
        for coord in hit.theta.iter().chain(&hit.theta_prime) {
            assert!(*coord > 1.0);
        }
        // Re-verify across every menu from scratch.
        let pa = m.full_eval(&hit.theta).unwrap();
        let pb = m.full_eval(&hit.theta_prime).unwrap();
        let gap = pa
            .iter()
            .zip(&pb)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        assert_eq!(gap, hit.max_gap);
    }

    #[test]
    fn collision_search_finds_nothing_for_the_ratio_model() {
        let m = builtin("luce", 2).unwrap();
        assert!(collision_search(&m, 300, 1e-9, &CollisionOptions::default()).is_none());
    }

    #[test]
    fn domain_validation_and_rays() {
        assert!(matches!(
            Domain::new(vec![0.0], vec![0.0]),
            Err(ParamError::BadDomain(_))
        ));
        assert!(matches!(
            Domain::new(vec![0.0, 1.0], vec![1.0]),
            Err(ParamError::BadDomain(_))
        ));
        let d = Domain::new(vec![0.0, f64::NEG_INFINITY], vec![1.0, f64::INFINITY]).unwrap();
        assert!(d.contains(&[0.5, -100.0]));
        assert!(!d.contains(&[0.0, 0.0]));
        assert!(!d.contains(&[0.5]));
        assert!(d.is_robustly_interior(&[0.5, 0.0], 0.01));
        assert!(!d.is_robustly_interior(&[0.005, 0.0], 0.01));
        let m = ParametricModel::new("id", d, |t: &[f64]| t.to_vec());
        let rays = coordinate_rays(&m, &[0.5, 0.0], 6).unwrap();
        assert_eq!(rays.len(), 4);
        let toward_finite = &rays[0];
        assert!((toward_finite.points[5][0] - 0.5 * 0.5f64.powi(6)).abs() < 1e-12);
        let toward_inf = rays.iter().find(|r| r.name == "theta1->upper").unwrap();
        assert_eq!(toward_inf.points[5][1], 64.0);
        // Out-of-domain bases are rejected.
        assert!(matches!(
            coordinate_rays(&m, &[2.0, 0.0], 6),
            Err(ParamError::OutsideDomain { .. })
        ));
    }
}
