//! Reduced root systems and their chamber algebra.
//!
//! A root system here is a finite set of nonzero vectors closed under its own
//! reflections. Four families are supported: the orthogonal system `±e_i`,
//! type A (realized in one dimension higher than its rank), type B, and the
//! dihedral systems `I2(m)` made of `2m` unit vectors in the plane.
//!
//! All chamber work happens in *span coordinates*: an orthonormal basis of
//! `span(R)` in which the simple roots form a square invertible matrix. For
//! every family except type A this basis is the ambient one; for type A it is
//! obtained by Gram–Schmidt on the simple roots, which resolves the rank
//! deficiency of the `n×(n−1)` simple-root matrix.

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::ALGEBRA_TOL;

/// Condition-number guard for the simple-root matrix inversion.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Truncation-tail bound above which [`GramData::integral_inverse_check`]
/// flags its horizon as too short for the target accuracy.
pub const INTEGRAL_TAIL_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum RootSystemError {
    #[error("invalid root system spec `{0}`")]
    BadSpec(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("reflection axis must be nonzero")]
    ZeroAxis,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("simple-root matrix is numerically singular (condition number {0:.3e})")]
    SingularLambda(f64),
}

/// Which root system to build.
///
/// Parsed from compact strings: `orth4`, `A3`, `B2`, `I2(5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootSystemSpec {
    /// `{±e_1, …, ±e_n}` in `ℝ^n`.
    Orthogonal(usize),
    /// Type A of the given rank, realized in `ℝ^{rank+1}` as `{e_i − e_j}`.
    TypeA(usize),
    /// Type B in `ℝ^n`: `{±e_i} ∪ {±e_i ± e_j}`.
    TypeB(usize),
    /// Dihedral system `I2(m)`: `2m` unit vectors in the plane whose chamber
    /// is a wedge of angle `π/m`.
    Dihedral(usize),
}

impl RootSystemSpec {
    pub fn validate(&self) -> Result<(), RootSystemError> {
        match *self {
            RootSystemSpec::Orthogonal(n) | RootSystemSpec::TypeA(n) | RootSystemSpec::TypeB(n) => {
                if n < 1 {
                    return Err(RootSystemError::BadParameter(format!(
                        "{self} needs a parameter >= 1"
                    )));
                }
            }
            RootSystemSpec::Dihedral(m) => {
                if m < 2 {
                    return Err(RootSystemError::BadParameter(format!(
                        "I2({m}) needs m >= 2"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Dimension of the space the roots are written in.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            RootSystemSpec::Orthogonal(n) | RootSystemSpec::TypeB(n) => n,
            RootSystemSpec::TypeA(rank) => rank + 1,
            RootSystemSpec::Dihedral(_) => 2,
        }
    }

    /// Number of simple roots, i.e. the dimension of `span(R)`.
    pub fn rank(&self) -> usize {
        match *self {
            RootSystemSpec::Orthogonal(n) | RootSystemSpec::TypeB(n) => n,
            RootSystemSpec::TypeA(rank) => rank,
            RootSystemSpec::Dihedral(_) => 2,
        }
    }
}

impl fmt::Display for RootSystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RootSystemSpec::Orthogonal(n) => write!(f, "orth{n}"),
            RootSystemSpec::TypeA(r) => write!(f, "A{r}"),
            RootSystemSpec::TypeB(n) => write!(f, "B{n}"),
            RootSystemSpec::Dihedral(m) => write!(f, "I2({m})"),
        }
    }
}

impl FromStr for RootSystemSpec {
    type Err = RootSystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || RootSystemError::BadSpec(s.to_string());
        let spec = if let Some(rest) = t.strip_prefix("orth").or_else(|| t.strip_prefix("Orth")) {
            RootSystemSpec::Orthogonal(rest.parse().map_err(|_| bad())?)
        } else if let Some(rest) = t
            .strip_prefix("I2(")
            .or_else(|| t.strip_prefix("i2("))
            .and_then(|r| r.strip_suffix(')'))
        {
            RootSystemSpec::Dihedral(rest.parse().map_err(|_| bad())?)
        } else if let Some(rest) = t.strip_prefix('A').or_else(|| t.strip_prefix('a')) {
            RootSystemSpec::TypeA(rest.parse().map_err(|_| bad())?)
        } else if let Some(rest) = t.strip_prefix('B').or_else(|| t.strip_prefix('b')) {
            RootSystemSpec::TypeB(rest.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Reflection through the hyperplane orthogonal to `alpha`:
/// `v − 2⟨α,v⟩/⟨α,α⟩ · α`. An involution and an isometry; fixes `α^⊥`.
pub fn reflect(alpha: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>, RootSystemError> {
    if alpha.len() != v.len() {
        return Err(RootSystemError::DimensionMismatch(alpha.len(), v.len()));
    }
    let norm2 = alpha.dot(alpha);
    if norm2 <= 0.0 {
        return Err(RootSystemError::ZeroAxis);
    }
    let mut out = v.clone();
    out.axpy(-2.0 * alpha.dot(v) / norm2, alpha, 1.0);
    Ok(out)
}

/// In-place variant of [`reflect`] with a precomputed squared norm; the hot
/// path of the chamber descent.
#[inline]
pub(crate) fn reflect_in_place(alpha: &DVector<f64>, norm2: f64, v: &mut DVector<f64>) {
    let c = -2.0 * alpha.dot(v) / norm2;
    v.axpy(c, alpha, 1.0);
}

/// A reduced root system together with its simple/positive split and the
/// orthonormal basis of `span(R)` used for all chamber computations.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub spec: RootSystemSpec,
    pub ambient_dim: usize,
    pub rank: usize,
    /// All roots, in ambient coordinates.
    pub roots: Vec<DVector<f64>>,
    /// Simple system, in ambient coordinates, in construction order.
    pub simple: Vec<DVector<f64>>,
    /// Positive system, in ambient coordinates.
    pub positives: Vec<DVector<f64>>,
    /// `rank × ambient_dim` matrix with orthonormal rows spanning `span(R)`.
    pub span_basis: DMatrix<f64>,
    simple_span: Vec<DVector<f64>>,
    roots_span: Vec<DVector<f64>>,
    positives_span: Vec<DVector<f64>>,
    simple_norm2: Vec<f64>,
    reflection_matrices: Vec<DMatrix<f64>>,
    interior: DVector<f64>,
}

impl RootSystem {
    /// Builds the root system described by `spec`.
    pub fn build(spec: RootSystemSpec) -> Result<Self, RootSystemError> {
        spec.validate()?;
        let dim = spec.ambient_dim();
        let unit = |i: usize| {
            let mut v = DVector::zeros(dim);
            v[i] = 1.0;
            v
        };

        let mut roots: Vec<DVector<f64>> = Vec::new();
        let mut simple: Vec<DVector<f64>> = Vec::new();
        match spec {
            RootSystemSpec::Orthogonal(n) => {
                for i in 0..n {
                    roots.push(unit(i));
                    roots.push(-unit(i));
                    simple.push(unit(i));
                }
            }
            RootSystemSpec::TypeA(rank) => {
                let n = rank + 1;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            roots.push(unit(i) - unit(j));
                        }
                    }
                }
                for i in 0..rank {
                    simple.push(unit(i) - unit(i + 1));
                }
            }
            RootSystemSpec::TypeB(n) => {
                for i in 0..n {
                    roots.push(unit(i));
                    roots.push(-unit(i));
                    for j in (i + 1)..n {
                        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                            roots.push(unit(i) * si + unit(j) * sj);
                        }
                    }
                }
                for i in 0..n.saturating_sub(1) {
                    simple.push(unit(i) - unit(i + 1));
                }
                simple.push(unit(n - 1));
            }
            RootSystemSpec::Dihedral(m) => {
                // 2m unit roots at angles −π/2 + kπ/m; the simple pair
                // (k = 1 and k = m) cuts out the wedge [0, π/m].
                let angle = |k: usize| -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / m as f64;
                for k in 1..=m {
                    let a = angle(k);
                    let r = DVector::from_vec(vec![a.cos(), a.sin()]);
                    roots.push(-&r);
                    roots.push(r);
                }
                simple.push(DVector::from_vec(vec![angle(1).cos(), angle(1).sin()]));
                simple.push(DVector::from_vec(vec![0.0, 1.0]));
            }
        }

        let rank = spec.rank();
        let span_basis = if rank == dim {
            DMatrix::identity(dim, dim)
        } else {
            gram_schmidt_rows(&simple, dim)
        };

        let to_span = |v: &DVector<f64>| &span_basis * v;
        let simple_span: Vec<_> = simple.iter().map(to_span).collect();
        let roots_span: Vec<_> = roots.iter().map(to_span).collect();
        let simple_norm2: Vec<f64> = simple_span.iter().map(|s| s.dot(s)).collect();

        // Interior chamber point: the solution of ⟨s_i, p⟩ = 1 for all i.
        let lambda = simple_matrix(&simple_span, rank);
        let lu = lambda.clone().lu();
        let interior = lu
            .solve(&DVector::from_element(rank, 1.0))
            .ok_or(RootSystemError::SingularLambda(f64::INFINITY))?;

        let mut positives = Vec::new();
        let mut positives_span = Vec::new();
        for (root, root_span) in roots.iter().zip(&roots_span) {
            if root_span.dot(&interior) > 0.0 {
                positives.push(root.clone());
                positives_span.push(root_span.clone());
            }
        }
        debug_assert_eq!(2 * positives.len(), roots.len());

        let reflection_matrices = simple_span
            .iter()
            .map(|s| {
                let mut m = DMatrix::identity(rank, rank);
                m.ger(-2.0 / s.dot(s), s, s, 1.0);
                m
            })
            .collect();

        Ok(RootSystem {
            spec,
            ambient_dim: dim,
            rank,
            roots,
            simple,
            positives,
            span_basis,
            simple_span,
            roots_span,
            positives_span,
            simple_norm2,
            reflection_matrices,
            interior,
        })
    }

    /// Simple roots in span coordinates (a basis of `ℝ^rank`).
    pub fn simple_span(&self) -> &[DVector<f64>] {
        &self.simple_span
    }

    pub fn roots_span(&self) -> &[DVector<f64>] {
        &self.roots_span
    }

    pub fn positives_span(&self) -> &[DVector<f64>] {
        &self.positives_span
    }

    /// `⟨s_i, s_i⟩` for simple root `i`.
    pub fn simple_norm2(&self, i: usize) -> f64 {
        self.simple_norm2[i]
    }

    /// `rank × rank` matrix of the simple reflection `σ_{s_i}` in span
    /// coordinates.
    pub fn reflection_matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.reflection_matrices[i]
    }

    /// A point with `⟨s_i, ·⟩ = 1` for every `i` (span coordinates).
    pub fn chamber_interior_point(&self) -> &DVector<f64> {
        &self.interior
    }

    pub fn to_span(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.span_basis * v
    }

    pub fn to_ambient(&self, y: &DVector<f64>) -> DVector<f64> {
        self.span_basis.transpose() * y
    }

    /// All wall products `⟨s_i, y⟩` of a span-coordinate point.
    pub fn wall_products(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rank, self.simple_span.iter().map(|s| s.dot(y)))
    }

    pub fn min_wall_product(&self, y: &DVector<f64>) -> f64 {
        self.simple_span
            .iter()
            .map(|s| s.dot(y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in the closed chamber, up to `tol`.
    pub fn in_chamber(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.min_wall_product(y) >= -tol
    }

    /// Runs the root-system axioms; reports each outcome rather than failing.
    pub fn verify(&self) -> AxiomReport {
        verify_root_system(self)
    }

    /// Interior wedge angle of the chamber for rank-2 systems.
    pub fn wedge_angle(&self) -> Option<f64> {
        if self.rank != 2 {
            return None;
        }
        let s1 = &self.simple_span[0];
        let s2 = &self.simple_span[1];
        let c = s1.dot(s2) / (s1.norm() * s2.norm());
        // Angle between inward normals is π − wedge angle.
        Some(std::f64::consts::PI - c.clamp(-1.0, 1.0).acos())
    }
}

fn simple_matrix(simple_span: &[DVector<f64>], rank: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rank, rank, |i, j| simple_span[i][j])
}

/// Modified Gram–Schmidt on the given vectors; returns the orthonormal basis
/// as rows. The vectors must be independent.
fn gram_schmidt_rows(vectors: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut u = v.clone();
        for b in &basis {
            let c = b.dot(&u);
            u.axpy(-c, b, 1.0);
        }
        let n = u.norm();
        assert!(n > 1e-12, "Gram-Schmidt input not independent");
        basis.push(u / n);
    }
    DMatrix::from_fn(basis.len(), dim, |i, j| basis[i][j])
}

/// Outcome of the root-system axiom checks. `closure` is the defining
/// property `σ_α(R) = R`; the others are the reducedness, the one-sign
/// expansion of every root over the simple system, and the positive/negative
/// split.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AxiomReport {
    pub closure: bool,
    pub reduced: bool,
    pub sign_consistent: bool,
    pub split_ok: bool,
    pub max_closure_deviation: f64,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.closure && self.reduced && self.sign_consistent && self.split_ok
    }
}

/// Checks the axioms on an arbitrary set of roots (`rs` need not have been
/// produced by [`RootSystem::build`]); never panics on failure.
pub fn verify_root_system(rs: &RootSystem) -> AxiomReport {
    let tol = ALGEBRA_TOL;
    let roots = &rs.roots;

    let mut closure = true;
    let mut max_dev: f64 = 0.0;
    for alpha in roots {
        for beta in roots {
            match reflect(alpha, beta) {
                Ok(image) => {
                    let dev = roots
                        .iter()
                        .map(|r| (&image - r).norm())
                        .fold(f64::INFINITY, f64::min);
                    max_dev = max_dev.max(dev);
                    if dev > tol {
                        closure = false;
                    }
                }
                Err(_) => closure = false,
            }
        }
    }

    let mut reduced = true;
    for (i, a) in roots.iter().enumerate() {
        for b in roots.iter().skip(i + 1) {
            let cos = a.dot(b) / (a.norm() * b.norm());
            if (cos.abs() - 1.0).abs() < 1e-9 {
                // Collinear pair: must be b = −a (the +a copy is excluded by
                // construction of distinct entries).
                if (a + b).norm() > tol && (a - b).norm() > tol {
                    reduced = false;
                }
            }
        }
    }

    // Every root must expand over the simple system with one-signed
    // coefficients.
    let lambda_t = simple_matrix(rs.simple_span(), rs.rank).transpose();
    let lu = lambda_t.lu();
    let mut sign_consistent = true;
    for root in rs.roots_span() {
        match lu.solve(root) {
            Some(coeffs) => {
                let has_pos = coeffs.iter().any(|&c| c > tol);
                let has_neg = coeffs.iter().any(|&c| c < -tol);
                if has_pos && has_neg {
                    sign_consistent = false;
                }
            }
            None => sign_consistent = false,
        }
    }

    let mut split_ok = roots.len() == 2 * rs.positives.len();
    for root in roots {
        let in_pos = rs.positives.iter().any(|p| (root - p).norm() <= tol);
        let in_neg = rs.positives.iter().any(|p| (root + p).norm() <= tol);
        if in_pos == in_neg {
            split_ok = false;
        }
    }

    AxiomReport {
        closure,
        reduced,
        sign_consistent,
        split_ok,
        max_closure_deviation: max_dev,
    }
}

/// The simple-root matrix `Λ`, the Gram matrix `A = ΛΛᵀ`, its inverse, and
/// the dual basis `ξ_i` with `⟨ξ_i, s_j⟩ = δ_ij` (all in span coordinates).
///
/// `A⁻¹` is computed by LU with a condition-number guard; the integral
/// representation below is a verification route only.
#[derive(Debug, Clone)]
pub struct GramData {
    pub lambda: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
    /// Dual basis vectors, span coordinates; `dual[i] = Λ⁻¹ e_i`.
    pub dual: Vec<DVector<f64>>,
}

impl GramData {
    pub fn new(rs: &RootSystem) -> Result<Self, RootSystemError> {
        let lambda = simple_matrix(rs.simple_span(), rs.rank);

        let sv = lambda.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > CONDITION_LIMIT {
            return Err(RootSystemError::SingularLambda(cond));
        }

        let gram = &lambda * lambda.transpose();
        let lambda_inv = lambda
            .clone()
            .lu()
            .try_inverse()
            .ok_or(RootSystemError::SingularLambda(cond))?;
        let gram_inv = lambda_inv.transpose() * &lambda_inv;
        let dual = (0..rs.rank).map(|i| lambda_inv.column(i).into_owned()).collect();

        Ok(GramData {
            lambda,
            gram,
            gram_inv,
            dual,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambda.nrows()
    }

    /// Positive-definiteness via Cholesky, as the testable form of the Gram
    /// invariant.
    pub fn is_positive_definite(&self) -> bool {
        self.gram.clone().cholesky().is_some()
    }

    /// Smallest off-diagonal entry of `A⁻¹`, and whether the dual basis
    /// pairs with nonnegative inner products (up to tolerance).
    pub fn dual_nonnegativity(&self) -> DualNonnegativity {
        let n = self.rank();
        let mut min_off = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    min_off = min_off.min(self.gram_inv[(i, j)]);
                }
            }
        }
        if n < 2 {
            min_off = 0.0;
        }
        DualNonnegativity {
            pass: min_off >= -ALGEBRA_TOL,
            min_off_diagonal: min_off,
        }
    }

    /// Verifies `A⁻¹ = ∫_0^∞ e^{−tA} dt` by composite-Simpson quadrature of
    /// the matrix exponential over `[0, t_max]`, and records the smallest
    /// entry of `e^{−tA}` seen at the quadrature nodes (the entrywise
    /// positivity that drives the nonnegativity of the dual pairings).
    ///
    /// The truncation tail is bounded by `e^{−λ_min t_max}/λ_min`; when that
    /// exceeds [`INTEGRAL_TAIL_TOL`] the result carries `tail_warning` and a
    /// larger `t_max` is needed for the stated accuracy.
    pub fn integral_inverse_check(
        &self,
        t_max: f64,
        steps: usize,
    ) -> Result<IntegralInverseCheck, RootSystemError> {
        if t_max <= 0.0 {
            return Err(RootSystemError::BadParameter("t_max must be > 0".into()));
        }
        if steps < 10 {
            return Err(RootSystemError::BadParameter("steps must be >= 10".into()));
        }
        let steps = steps + steps % 2; // Simpson needs an even count
        let n = self.rank();
        let h = t_max / steps as f64;

        let mut sum = DMatrix::<f64>::zeros(n, n);
        let mut min_entry = f64::INFINITY;
        for k in 0..=steps {
            let t = k as f64 * h;
            let e = (-(&self.gram) * t).exp();
            min_entry = min_entry.min(e.min());
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += e * w;
        }
        let integral = sum * (h / 3.0);

        let max_deviation = (&integral - &self.gram_inv).abs().max();
        let lambda_min = self.gram.clone().symmetric_eigen().eigenvalues.min();
        let tail_bound = if lambda_min > 0.0 {
            (-lambda_min * t_max).exp() / lambda_min
        } else {
            f64::INFINITY
        };

        Ok(IntegralInverseCheck {
            t_max,
            steps,
            max_deviation,
            min_exponential_entry: min_entry,
            lambda_min,
            tail_bound,
            tail_warning: tail_bound > INTEGRAL_TAIL_TOL,
        })
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DualNonnegativity {
    pub pass: bool,
    pub min_off_diagonal: f64,
}

/// Result of the integral-representation route to the Gram inverse.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IntegralInverseCheck {
    pub t_max: f64,
    pub steps: usize,
    /// Max-entry deviation of the truncated integral from `A⁻¹`.
    pub max_deviation: f64,
    /// Smallest entry of `e^{−tA}` over all quadrature nodes.
    pub min_exponential_entry: f64,
    pub lambda_min: f64,
    pub tail_bound: f64,
    pub tail_warning: bool,
}
