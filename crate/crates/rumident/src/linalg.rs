//! Exact rational arithmetic and the linear-algebra/LP kernel.
//!
//! Everything downstream (choice probabilities, flows, swap subspaces,
//! identified-set bounds) is computed over [`Rational`]: arbitrary-precision
//! fractions kept in lowest terms with a positive denominator. Fixed-width
//! overflow is treated as a correctness bug, not an edge case, because the
//! alternating sums that arise in Möbius inversion cancel catastrophically
//! in floating point and overflow quickly in machine integers.
//!
//! The module provides:
//!
//! * [`Rational`] — exact fraction type, serialized as `"p/q"` (or `"p"`
//!   when the denominator is 1) in every JSON payload.
//! * [`RatMatrix`] — dense rational matrices with exact row reduction.
//! * [`rank`] / [`nullspace_basis`] — exact rank and right-nullspace basis.
//! * [`LpProblem`] / [`lp_solve`] — exact linear programming in equality
//!   form with designated nonnegative variables, solved by a two-phase
//!   simplex with Bland's rule (guaranteed termination, no cycling).
//!
//! All operations are pure and deterministic; performance is deliberately
//! traded for clarity since problem sizes are desk-scale (at most a few
//! thousand variables).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

/// Errors produced by this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    /// A rational literal could not be parsed.
    #[error("invalid rational literal {literal:?}: {reason}")]
    BadRational {
        /// The offending input string.
        literal: String,
        /// Why it was rejected.
        reason: String,
    },
    /// Matrix construction from rows of unequal length.
    #[error("ragged matrix rows: row {row} has length {found}, expected {expected}")]
    RaggedRows {
        /// Index of the offending row.
        row: usize,
        /// Its length.
        found: usize,
        /// Length of the first row.
        expected: usize,
    },
    /// Dimensions of an LP problem do not line up.
    #[error("inconsistent LP dimensions: {0}")]
    BadLpShape(String),
}

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

/// An exact rational number.
///
/// Invariants (maintained by construction): stored in lowest terms with a
/// strictly positive denominator. All arithmetic is exact; there is no
/// rounding anywhere in this type.
///
/// Serialization: `Display`/`FromStr` (and serde, via strings) use the
/// canonical form `"p/q"`, shortened to `"p"` when `q = 1`, e.g. `"5/8"`,
/// `"-3/8"`, `"2"`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    /// The additive identity, `0`.
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    /// The multiplicative identity, `1`.
    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// The integer `n` as a rational.
    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// The fraction `num/den`, reduced to lowest terms.
    ///
    /// # Panics
    /// Panics if `den == 0`; a zero denominator is a programming error, not
    /// an input condition (parse untrusted input via [`str::parse`] instead).
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "Rational::new called with zero denominator");
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// True iff the value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// True iff the value is strictly negative.
    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// True iff the value is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    /// Absolute value.
    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Multiplicative inverse.
    ///
    /// # Panics
    /// Panics on zero; callers (pivot selection) guarantee nonzero input.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "Rational::recip of zero");
        Rational(self.0.recip())
    }

    /// Nearest `f64` approximation (used only for diagnostics and the
    /// floating-point probe module; never in exact computations).
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Compare against zero and return the usual three-way ordering.
    pub fn sign(&self) -> Ordering {
        if self.is_positive() {
            Ordering::Greater
        } else if self.is_negative() {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = LinalgError;

    /// Parses `"p"` or `"p/q"` with optional sign on either part; the result
    /// is reduced and sign-normalized (`"1/-2"` parses to `-1/2`). Leading
    /// and trailing ASCII whitespace is ignored; interior whitespace is not.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let bad = |reason: &str| LinalgError::BadRational {
            literal: s.to_owned(),
            reason: reason.to_owned(),
        };
        if trimmed.is_empty() {
            return Err(bad("empty string"));
        }
        let (num_str, den_str) = match trimmed.split_once('/') {
            Some((n, d)) => (n, Some(d)),
            None => (trimmed, None),
        };
        let num = BigInt::from_str(num_str).map_err(|e| bad(&format!("numerator: {e}")))?;
        let den = match den_str {
            Some(d) => BigInt::from_str(d).map_err(|e| bad(&format!("denominator: {e}")))?,
            None => BigInt::one(),
        };
        if den.is_zero() {
            return Err(bad("zero denominator"));
        }
        Ok(Rational(BigRational::new(num, den)))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a rational as a string \"p/q\" (or \"p\"), or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(de::Error::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational(BigRational::from_integer(BigInt::from(v))))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "Rational division by zero");
        Rational(self.0.div(rhs.0))
    }
}

impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "Rational division by zero");
        Rational((&self.0).div(&rhs.0))
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// A dense matrix of [`Rational`] entries, stored row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    /// The `rows × cols` zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    /// The `n × n` identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = RatMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// Builds a matrix from rows; all rows must have equal length.
    ///
    /// An empty row list yields the degenerate `0 × 0` matrix.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(LinalgError::RaggedRows {
                    row: i,
                    found: r.len(),
                    expected: ncols,
                });
            }
        }
        Ok(RatMatrix {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Immutable entry access.
    ///
    /// # Panics
    /// Panics when out of bounds.
    pub fn at(&self, r: usize, c: usize) -> &Rational {
        assert!(r < self.rows && c < self.cols, "matrix index out of bounds");
        &self.data[r * self.cols + c]
    }

    /// Entry assignment.
    ///
    /// # Panics
    /// Panics when out of bounds.
    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        assert!(r < self.rows && c < self.cols, "matrix index out of bounds");
        self.data[r * self.cols + c] = v;
    }

    /// Row `r` as a slice.
    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The transpose.
    pub fn transpose(&self) -> RatMatrix {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.at(r, c).clone());
            }
        }
        t
    }

    /// Matrix-vector product `self · v`.
    ///
    /// # Panics
    /// Panics when `v.len() != self.ncols()`.
    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Reduced row-echelon form together with the pivot-column list.
    ///
    /// Pivoting is deterministic: columns are processed left to right and
    /// the first row (top to bottom) with a nonzero entry is selected, so
    /// identical inputs always produce identical output.
    fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut pivot_row = 0usize;
        for col in 0..m.cols {
            if pivot_row == m.rows {
                break;
            }
            let Some(sel) = (pivot_row..m.rows).find(|&r| !m.at(r, col).is_zero()) else {
                continue;
            };
            if sel != pivot_row {
                for c in 0..m.cols {
                    let a = m.at(sel, c).clone();
                    let b = m.at(pivot_row, c).clone();
                    m.set(sel, c, b);
                    m.set(pivot_row, c, a);
                }
            }
            let inv = m.at(pivot_row, col).recip();
            for c in 0..m.cols {
                let v = m.at(pivot_row, c) * &inv;
                m.set(pivot_row, c, v);
            }
            for r in 0..m.rows {
                if r != pivot_row && !m.at(r, col).is_zero() {
                    let factor = m.at(r, col).clone();
                    for c in 0..m.cols {
                        let v = m.at(r, c) - &(&factor * m.at(pivot_row, c));
                        m.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        (m, pivots)
    }

    /// Solves `self · x = rhs` exactly.
    ///
    /// # Panics
    /// Panics when `rhs.len() != self.nrows()`.
    pub fn solve(&self, rhs: &[Rational]) -> SolveOutcome {
        assert_eq!(rhs.len(), self.rows, "solve dimension mismatch");
        let mut aug = RatMatrix::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.at(r, c).clone());
            }
            aug.set(r, self.cols, rhs[r].clone());
        }
        let (red, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return SolveOutcome::Infeasible;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (i, &pc) in pivots.iter().enumerate() {
            x[pc] = red.at(i, self.cols).clone();
        }
        if pivots.len() == self.cols {
            SolveOutcome::Unique(x)
        } else {
            SolveOutcome::Underdetermined(x)
        }
    }
}

/// Result of an exact linear solve.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SolveOutcome {
    /// Exactly one solution exists.
    Unique(Vec<Rational>),
    /// No solution exists.
    Infeasible,
    /// Infinitely many solutions; the carried vector is the particular
    /// solution with every free variable set to zero.
    Underdetermined(Vec<Rational>),
}

/// Exact rank via rational Gaussian elimination.
pub fn rank(m: &RatMatrix) -> usize {
    m.rref().1.len()
}

/// An exact basis of the right nullspace `{v : m·v = 0}`.
///
/// Returns the empty list when the rank equals the column count. Vectors are
/// ordered by the free column they correspond to (ascending) and normalized
/// so that the first nonzero entry is `+1`, which makes golden tests
/// byte-reproducible.
pub fn nullspace_basis(m: &RatMatrix) -> Vec<Vec<Rational>> {
    let (red, pivots) = m.rref();
    let mut basis = Vec::new();
    let mut pivot_of_col = vec![None; m.ncols()];
    for (i, &pc) in pivots.iter().enumerate() {
        pivot_of_col[pc] = Some(i);
    }
    for free in 0..m.ncols() {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![Rational::zero(); m.ncols()];
        v[free] = Rational::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -red.at(i, free);
        }
        if let Some(first) = v.iter().find(|x| !x.is_zero()) {
            let inv = first.recip();
            for x in &mut v {
                *x = &*x * &inv;
            }
        }
        basis.push(v);
    }
    basis
}

// ---------------------------------------------------------------------------
// Linear programming
// ---------------------------------------------------------------------------

/// Optimization sense for [`lp_solve`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    /// Minimize the objective.
    Min,
    /// Maximize the objective.
    Max,
}

/// A linear program in equality form.
///
/// The feasible set is `{x : constraints · x = rhs, x_j ≥ 0 for all j with
/// nonneg[j]}`; variables with `nonneg[j] = false` are free (internally split
/// into positive and negative parts). The objective is `objective · x`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    /// Objective coefficient per variable.
    pub objective: Vec<Rational>,
    /// Equality-constraint coefficient matrix (one row per constraint).
    pub constraints: RatMatrix,
    /// Right-hand side, one entry per constraint row.
    pub rhs: Vec<Rational>,
    /// Per-variable nonnegativity designation.
    pub nonneg: Vec<bool>,
}

impl LpProblem {
    /// Validates that all dimensions line up.
    fn check_shape(&self) -> Result<(), LinalgError> {
        let n = self.constraints.ncols();
        if self.objective.len() != n {
            return Err(LinalgError::BadLpShape(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                n
            )));
        }
        if self.nonneg.len() != n {
            return Err(LinalgError::BadLpShape(format!(
                "nonneg has {} entries for {} variables",
                self.nonneg.len(),
                n
            )));
        }
        if self.rhs.len() != self.constraints.nrows() {
            return Err(LinalgError::BadLpShape(format!(
                "rhs has {} entries for {} constraint rows",
                self.rhs.len(),
                self.constraints.nrows()
            )));
        }
        Ok(())
    }
}

/// Outcome of [`lp_solve`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LpOutcome {
    /// An exact optimum, attained at the returned basic feasible solution
    /// (a vertex of the feasible polyhedron).
    Optimal {
        /// The optimal objective value.
        optimum: Rational,
        /// An optimizer, in the problem's original variable space.
        solution: Vec<Rational>,
    },
    /// The constraint system has no solution satisfying the sign conditions.
    Infeasible,
    /// The objective is unbounded in the requested direction.
    Unbounded,
}

/// Solves an exact LP by two-phase simplex with Bland's rule.
///
/// Bland's rule (least-index entering variable; least-index basic variable
/// among ratio-test ties) guarantees termination without cycling, and makes
/// the full computation deterministic. Infeasibility and unboundedness are
/// reported as distinct outcomes, never as numeric sentinels.
pub fn lp_solve(p: &LpProblem, sense: Sense) -> Result<LpOutcome, LinalgError> {
    p.check_shape()?;
    // Split free variables into differences of nonnegative parts, so the
    // core simplex only ever sees x ≥ 0.
    let n_orig = p.objective.len();
    let mut col_map = Vec::new(); // (original index, sign)
    for (j, &nn) in p.nonneg.iter().enumerate() {
        col_map.push((j, 1i8));
        if !nn {
            col_map.push((j, -1i8));
        }
    }
    let n = col_map.len();
    let m = p.constraints.nrows();
    let mut a = RatMatrix::zeros(m, n);
    for r in 0..m {
        for (jc, &(j, sg)) in col_map.iter().enumerate() {
            let v = p.constraints.at(r, j);
            a.set(r, jc, if sg > 0 { v.clone() } else { -v });
        }
    }
    let mut c: Vec<Rational> = col_map
        .iter()
        .map(|&(j, sg)| {
            if sg > 0 {
                p.objective[j].clone()
            } else {
                -&p.objective[j]
            }
        })
        .collect();
    if sense == Sense::Max {
        for cj in &mut c {
            *cj = -&*cj;
        }
    }
    let outcome = simplex_two_phase(&a, &p.rhs, &c);
    Ok(match outcome {
        CoreOutcome::Infeasible => LpOutcome::Infeasible,
        CoreOutcome::Unbounded => LpOutcome::Unbounded,
        CoreOutcome::Optimal { value, x } => {
            let mut sol = vec![Rational::zero(); n_orig];
            for (jc, &(j, sg)) in col_map.iter().enumerate() {
                if sg > 0 {
                    sol[j] = &sol[j] + &x[jc];
                } else {
                    sol[j] = &sol[j] - &x[jc];
                }
            }
            let optimum = if sense == Sense::Max { -value } else { value };
            LpOutcome::Optimal {
                optimum,
                solution: sol,
            }
        }
    })
}

enum CoreOutcome {
    Optimal { value: Rational, x: Vec<Rational> },
    Infeasible,
    Unbounded,
}

/// Dense simplex tableau over the rationals.
///
/// `t` holds the constraint rows augmented with the right-hand side in the
/// last column; `obj` is the reduced-cost row with `-z` in the last column;
/// `basis[i]` names the variable basic in row `i`.
struct Tableau {
    t: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basis: Vec<usize>,
    ncols: usize, // variable count (excludes the rhs column)
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.t[row][col].recip();
        for v in &mut self.t[row] {
            *v = &*v * &inv;
        }
        for r in 0..self.t.len() {
            if r != row && !self.t[r][col].is_zero() {
                let factor = self.t[r][col].clone();
                for c in 0..=self.ncols {
                    let sub = &factor * &self.t[row][c];
                    self.t[r][c] = &self.t[r][c] - &sub;
                }
            }
        }
        if !self.obj[col].is_zero() {
            let factor = self.obj[col].clone();
            for c in 0..=self.ncols {
                let sub = &factor * &self.t[row][c];
                self.obj[c] = &self.obj[c] - &sub;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations with Bland's rule until optimality or
    /// unboundedness. `allowed` masks columns permitted to enter (used to
    /// bar artificial variables during phase 2).
    fn iterate(&mut self, allowed: &[bool]) -> bool {
        loop {
            let entering = (0..self.ncols).find(|&j| allowed[j] && self.obj[j].is_negative());
            let Some(col) = entering else {
                return true; // optimal
            };
            let mut leave: Option<(usize, Rational)> = None;
            for r in 0..self.t.len() {
                if self.t[r][col].is_positive() {
                    let ratio = &self.t[r][self.ncols] / &self.t[r][col];
                    let better = match &leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < *lratio || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return false; // unbounded
            };
            self.pivot(row, col);
        }
    }
}

/// Core two-phase simplex on `min c·x  s.t.  a·x = b, x ≥ 0`.
fn simplex_two_phase(a: &RatMatrix, b: &[Rational], c: &[Rational]) -> CoreOutcome {
    let m = a.nrows();
    let n = a.ncols();
    // Normalize rows so b ≥ 0, then adjoin one artificial variable per row.
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for r in 0..m {
        let flip = b[r].is_negative();
        let mut row: Vec<Rational> = (0..n)
            .map(|j| {
                if flip {
                    -a.at(r, j)
                } else {
                    a.at(r, j).clone()
                }
            })
            .collect();
        row.extend((0..m).map(|k| {
            if k == r {
                Rational::one()
            } else {
                Rational::zero()
            }
        }));
        row.push(if flip { -&b[r] } else { b[r].clone() });
        t.push(row);
    }
    let ncols = n + m;
    // Phase-1 objective: minimize the artificial sum. Price out the initial
    // (artificial) basis by subtracting every constraint row.
    let mut obj = vec![Rational::zero(); ncols + 1];
    for j in n..ncols {
        obj[j] = Rational::one();
    }
    for row in &t {
        for c_idx in 0..=ncols {
            obj[c_idx] = &obj[c_idx] - &row[c_idx];
        }
    }
    let mut tab = Tableau {
        t,
        obj,
        basis: (n..ncols).collect(),
        ncols,
    };
    let allowed = vec![true; ncols];
    let finished = tab.iterate(&allowed);
    debug_assert!(finished, "phase-1 objective is bounded below by zero");
    // Phase-1 optimum is -obj[last]; positive means infeasible.
    let phase1 = -&tab.obj[ncols];
    if !phase1.is_zero() {
        return CoreOutcome::Infeasible;
    }
    // Drive remaining artificial variables out of the basis; rows that
    // cannot be pivoted are redundant constraints and are dropped.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| !tab.t[r][j].is_zero()) {
                tab.pivot(r, col);
                r += 1;
            } else {
                tab.t.remove(r);
                tab.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }
    // Phase 2: install the real objective, priced out over the basis.
    let mut obj = vec![Rational::zero(); ncols + 1];
    obj[..n].clone_from_slice(c);
    for (r, &bv) in tab.basis.iter().enumerate() {
        if !obj[bv].is_zero() {
            let factor = obj[bv].clone();
            for c_idx in 0..=ncols {
                let sub = &factor * &tab.t[r][c_idx];
                obj[c_idx] = &obj[c_idx] - &sub;
            }
        }
    }
    tab.obj = obj;
    let mut allowed = vec![true; ncols];
    for a_col in allowed.iter_mut().skip(n) {
        *a_col = false;
    }
    if !tab.iterate(&allowed) {
        return CoreOutcome::Unbounded;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.t[r][tab.ncols].clone();
        }
    }
    let value = -&tab.obj[tab.ncols];
    CoreOutcome::Optimal { value, x }
}
