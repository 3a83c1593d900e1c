//! The finite reflection group of a root system and its chamber geometry.
//!
//! The closed chamber is a fundamental domain: every point is carried into it
//! by exactly one group element (up to the isotropy of wall points). Two
//! independent routes compute that representative — a descent by simple
//! reflections and a brute-force scan of the enumerated group — and the test
//! suites hold them against each other.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rootsys::{reflect_in_place, GramData, RootSystem};

/// Matrix-equality tolerance used to deduplicate group elements. Entries are
/// algebraic numbers well separated at the ranks handled here.
pub const MATRIX_DEDUP_TOL: f64 = 1e-8;

/// Absolute tolerance on `⟨s_i, x⟩` below which a projected point is
/// recorded as sitting on wall `i`.
pub const WALL_HIT_TOL: f64 = 1e-9;

/// A wall product below this counts as strictly negative during descent;
/// boundary points are assigned to the closed chamber.
pub const DESCENT_NEG_TOL: f64 = 1e-12;

/// Default enumeration cap (8! — beyond any rank in scope).
pub const DEFAULT_GROUP_CAP: usize = 40_320;

#[derive(Debug, Error)]
pub enum WeylError {
    #[error("group enumeration exceeded the cap of {0} elements")]
    CapExceeded(usize),
    #[error("descent failed to terminate within {0} iterations (degenerate input?)")]
    DescentDegenerate(usize),
    #[error("dimension mismatch: expected rank {0}, got {1}")]
    DimensionMismatch(usize, usize),
    #[error("simple-root index {0} out of range (rank {1})")]
    IndexOutOfRange(usize, usize),
}

/// One orthogonal transformation of the group, with a shortest word in the
/// simple reflections that produces it (applied left to right).
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub matrix: DMatrix<f64>,
    pub word: Vec<usize>,
}

impl GroupElement {
    pub fn identity(rank: usize) -> Self {
        GroupElement {
            matrix: DMatrix::identity(rank, rank),
            word: Vec::new(),
        }
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let n = self.matrix.nrows();
        ((&self.matrix * self.matrix.transpose()) - DMatrix::identity(n, n))
            .abs()
            .max()
            <= tol
    }
}

/// The reflection group, enumerated by breadth-first closure over products
/// with the simple reflections.
#[derive(Debug, Clone)]
pub struct WeylGroup {
    pub elements: Vec<GroupElement>,
    pub order: usize,
    rank: usize,
}

fn matrices_equal(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).abs().max() <= tol
}

impl WeylGroup {
    /// Enumerates the group, failing loudly if `cap` is exceeded. BFS order
    /// guarantees the stored words are shortest.
    pub fn enumerate(rs: &RootSystem, cap: usize) -> Result<Self, WeylError> {
        let rank = rs.rank;
        let mut elements: Vec<GroupElement> = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(GroupElement::identity(rank));
        while let Some(next) = queue.pop_front() {
            if elements
                .iter()
                .any(|e| matrices_equal(&e.matrix, &next.matrix, MATRIX_DEDUP_TOL))
            {
                continue;
            }
            for i in 0..rank {
                let mut word = next.word.clone();
                word.push(i);
                queue.push_back(GroupElement {
                    matrix: &next.matrix * rs.reflection_matrix(i),
                    word,
                });
            }
            elements.push(next);
            if elements.len() > cap {
                return Err(WeylError::CapExceeded(cap));
            }
        }
        let order = elements.len();
        Ok(WeylGroup {
            elements,
            order,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Index of the element equal to `m`, if enumerated.
    pub fn find(&self, m: &DMatrix<f64>) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| matrices_equal(&e.matrix, m, MATRIX_DEDUP_TOL))
    }
}

/// The chamber representative of a point, the group element carrying the
/// chamber onto the point's chamber (`point = matrixᵀ · input`), and the
/// walls the representative lies on.
#[derive(Debug, Clone)]
pub struct ChamberProjection {
    pub point: DVector<f64>,
    pub element: GroupElement,
    pub wall_hits: Vec<usize>,
}

fn wall_hits(rs: &RootSystem, y: &DVector<f64>) -> Vec<usize> {
    (0..rs.rank)
        .filter(|&i| rs.simple_span()[i].dot(y).abs() <= WALL_HIT_TOL)
        .collect()
}

fn descent_cap(rs: &RootSystem) -> usize {
    rs.positives.len() * 4 + 16
}

/// Projects `x` (span coordinates) onto the closed chamber by repeatedly
/// reflecting in a violated wall, lowest index first. Each step strictly
/// shrinks the set of positive roots with negative product, so the loop
/// terminates well inside the iteration cap.
pub fn project_descent(rs: &RootSystem, x: &DVector<f64>) -> Result<ChamberProjection, WeylError> {
    if x.len() != rs.rank {
        return Err(WeylError::DimensionMismatch(rs.rank, x.len()));
    }
    let cap = descent_cap(rs);
    let mut point = x.clone();
    let mut word = Vec::new();
    let mut matrix = DMatrix::identity(rs.rank, rs.rank);
    loop {
        let mut applied = false;
        for i in 0..rs.rank {
            let s = &rs.simple_span()[i];
            if s.dot(&point) < -DESCENT_NEG_TOL {
                reflect_in_place(s, rs.simple_norm2(i), &mut point);
                matrix *= rs.reflection_matrix(i);
                word.push(i);
                applied = true;
                break;
            }
        }
        if !applied {
            break;
        }
        if word.len() > cap {
            return Err(WeylError::DescentDegenerate(cap));
        }
    }
    let wall_hits = wall_hits(rs, &point);
    Ok(ChamberProjection {
        point,
        element: GroupElement { matrix, word },
        wall_hits,
    })
}

/// Descent without element bookkeeping; the hot path of the simulators.
/// Returns the number of reflections applied.
pub fn project_in_place(rs: &RootSystem, x: &mut DVector<f64>) -> Result<usize, WeylError> {
    let cap = descent_cap(rs);
    let mut steps = 0;
    loop {
        let mut applied = false;
        for i in 0..rs.rank {
            let s = &rs.simple_span()[i];
            if s.dot(x) < -DESCENT_NEG_TOL {
                reflect_in_place(s, rs.simple_norm2(i), x);
                steps += 1;
                applied = true;
                break;
            }
        }
        if !applied {
            return Ok(steps);
        }
        if steps > cap {
            return Err(WeylError::DescentDegenerate(cap));
        }
    }
}

/// Brute-force chamber representative: scans every `wᵀx` for the one in the
/// closed chamber. The oracle route against [`project_descent`].
pub fn project_enumerated(
    group: &WeylGroup,
    rs: &RootSystem,
    x: &DVector<f64>,
) -> ChamberProjection {
    let mut best: Option<(f64, ChamberProjection)> = None;
    for e in &group.elements {
        let y = e.matrix.tr_mul(x);
        let min_wall = rs.min_wall_product(&y);
        if min_wall >= -WALL_HIT_TOL {
            let wall_hits = wall_hits(rs, &y);
            return ChamberProjection {
                point: y,
                element: e.clone(),
                wall_hits,
            };
        }
        if best.as_ref().is_none_or(|(m, _)| min_wall > *m) {
            best = Some((
                min_wall,
                ChamberProjection {
                    point: y,
                    element: e.clone(),
                    wall_hits: Vec::new(),
                },
            ));
        }
    }
    // Unreachable for a complete group; return the least-violating image so
    // callers can observe the defect instead of panicking.
    best.expect("group has at least the identity").1
}

/// Orbit of a simple root under the group, split against the positive system.
#[derive(Debug, Clone)]
pub struct OrbitInfo {
    pub seed: usize,
    /// Orbit members in span coordinates.
    pub orbit: Vec<DVector<f64>>,
    /// Indices into `rs.positives` of the orbit's positive members.
    pub orbit_positive_indices: Vec<usize>,
    /// How many simple roots the orbit contains.
    pub simple_count: usize,
}

impl OrbitInfo {
    pub fn size(&self) -> usize {
        self.orbit.len()
    }
}

/// Computes the orbit `{w·s_i}` by applying every group element.
pub fn simple_root_orbit(
    group: &WeylGroup,
    rs: &RootSystem,
    i: usize,
) -> Result<OrbitInfo, WeylError> {
    if i >= rs.rank {
        return Err(WeylError::IndexOutOfRange(i, rs.rank));
    }
    let seed_root = &rs.simple_span()[i];
    let mut orbit: Vec<DVector<f64>> = Vec::new();
    for e in &group.elements {
        let image = &e.matrix * seed_root;
        if !orbit.iter().any(|v| (v - &image).norm() <= MATRIX_DEDUP_TOL) {
            orbit.push(image);
        }
    }
    let orbit_positive_indices: Vec<usize> = rs
        .positives_span()
        .iter()
        .enumerate()
        .filter(|(_, p)| orbit.iter().any(|v| (v - *p).norm() <= MATRIX_DEDUP_TOL))
        .map(|(k, _)| k)
        .collect();
    let simple_count = rs
        .simple_span()
        .iter()
        .filter(|s| orbit.iter().any(|v| (v - *s).norm() <= MATRIX_DEDUP_TOL))
        .count();
    Ok(OrbitInfo {
        seed: i,
        orbit,
        orbit_positive_indices,
        simple_count,
    })
}

/// Tally of the two slab indicators over a Monte Carlo sample: the union over
/// the group of one-sided chamber slabs `{0 ≤ ⟨w s_i, x⟩ ≤ ε, x ∈ wC̄}`
/// against the union of two-sided slabs `{|⟨α, x⟩| ≤ ε}` over the orbit's
/// positive members.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SlabIdentityCount {
    pub samples: usize,
    pub lhs_only: usize,
    pub rhs_only: usize,
    pub both: usize,
    pub neither: usize,
}

impl SlabIdentityCount {
    pub fn disagreements(&self) -> usize {
        self.lhs_only + self.rhs_only
    }
}

/// Evaluates the chamber-slab indicator of `x` for simple root `i`. For a
/// point off the walls the chamber containing `x` is unique, so the union
/// over the group collapses to `0 ≤ ⟨s_i, π(x)⟩ ≤ ε`.
pub fn chamber_slab_indicator(
    rs: &RootSystem,
    i: usize,
    epsilon: f64,
    x: &DVector<f64>,
) -> Result<bool, WeylError> {
    let mut y = x.clone();
    project_in_place(rs, &mut y)?;
    let u = rs.simple_span()[i].dot(&y);
    Ok(u >= -DESCENT_NEG_TOL && u <= epsilon)
}

/// Literal evaluation of the same union by scanning every group element;
/// the oracle for [`chamber_slab_indicator`] on small groups.
pub fn chamber_slab_indicator_literal(
    group: &WeylGroup,
    rs: &RootSystem,
    i: usize,
    epsilon: f64,
    x: &DVector<f64>,
) -> bool {
    let s = &rs.simple_span()[i];
    group.elements.iter().any(|e| {
        let y = e.matrix.tr_mul(x);
        let u = s.dot(&y);
        u >= -DESCENT_NEG_TOL && u <= epsilon && rs.in_chamber(&y, WALL_HIT_TOL)
    })
}

/// Samples standard-normal points and tallies the two slab indicators.
/// Zero disagreements characterizes orbits whose only simple root is the
/// seed; otherwise the chamber-slab union is strictly smaller and `rhs_only`
/// hits appear.
pub fn check_slab_identity(
    group: &WeylGroup,
    rs: &RootSystem,
    i: usize,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<SlabIdentityCount, WeylError> {
    if i >= rs.rank {
        return Err(WeylError::IndexOutOfRange(i, rs.rank));
    }
    assert!(epsilon > 0.0 && samples >= 1);
    let orbit = simple_root_orbit(group, rs, i)?;
    let orbit_positives: Vec<&DVector<f64>> = orbit
        .orbit_positive_indices
        .iter()
        .map(|&k| &rs.positives_span()[k])
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = SlabIdentityCount {
        samples,
        lhs_only: 0,
        rhs_only: 0,
        both: 0,
        neither: 0,
    };
    let mut x = DVector::zeros(rs.rank);
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let lhs = chamber_slab_indicator(rs, i, epsilon, &x)?;
        let rhs = orbit_positives.iter().any(|a| a.dot(&x).abs() <= epsilon);
        match (lhs, rhs) {
            (true, true) => count.both += 1,
            (true, false) => count.lhs_only += 1,
            (false, true) => count.rhs_only += 1,
            (false, false) => count.neither += 1,
        }
    }
    Ok(count)
}

/// Split of a dual-basis vector into its wall-normal and vertex-normal parts:
/// `ξ_i = ⟨ξ_i,ξ_i⟩ s_i + Σ_{j≠i} ⟨ξ_i,ξ_j⟩ s_j`. The first summand is an
/// inward normal on wall `i`; the rest is an inward vector at the chamber's
/// vertex because all its coefficients are nonnegative.
#[derive(Debug, Clone)]
pub struct NormalDecomposition {
    pub boundary_part: DVector<f64>,
    pub origin_part: DVector<f64>,
    /// Row `i` of the Gram inverse: the expansion coefficients over the
    /// simple roots.
    pub coefficients: Vec<f64>,
}

pub fn normal_decomposition(
    rs: &RootSystem,
    gd: &GramData,
    i: usize,
) -> Result<NormalDecomposition, WeylError> {
    if i >= rs.rank {
        return Err(WeylError::IndexOutOfRange(i, rs.rank));
    }
    let coefficients: Vec<f64> = (0..rs.rank).map(|j| gd.gram_inv[(i, j)]).collect();
    let boundary_part = &rs.simple_span()[i] * coefficients[i];
    let mut origin_part = DVector::zeros(rs.rank);
    for (j, s) in rs.simple_span().iter().enumerate() {
        if j != i {
            origin_part.axpy(coefficients[j], s, 1.0);
        }
    }
    Ok(NormalDecomposition {
        boundary_part,
        origin_part,
        coefficients,
    })
}

/// Draws a random point of the closed chamber as a nonnegative combination of
/// the dual basis.
pub fn sample_chamber_point(gd: &GramData, rng: &mut impl Rng) -> DVector<f64> {
    let rank = gd.rank();
    let mut p = DVector::zeros(rank);
    for xi in &gd.dual {
        let u: f64 = rng.gen::<f64>();
        p.axpy(u, xi, 1.0);
    }
    p
}

/// Smallest inner product of `v` against `n` sampled chamber points; a
/// nonnegative result certifies `v` as inward at the vertex (to tolerance).
pub fn min_product_over_chamber(gd: &GramData, v: &DVector<f64>, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    for _ in 0..n {
        let p = sample_chamber_point(gd, &mut rng);
        min = min.min(v.dot(&p));
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::{RootSystem, RootSystemSpec};
    use crate::{ALGEBRA_TOL, RECONSTRUCTION_TOL};
    use rand::Rng as _;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn build(spec: RootSystemSpec) -> (RootSystem, WeylGroup) {
        let rs = RootSystem::build(spec).unwrap();
        let group = WeylGroup::enumerate(&rs, DEFAULT_GROUP_CAP).unwrap();
        (rs, group)
    }

    fn gaussian_points(rank: usize, n: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DVector::from_fn(rank, |_, _| rng.sample(StandardNormal)))
            .collect()
    }

    #[test]
    fn dihedral_three_has_order_six() {
        let (_, group) = build(RootSystemSpec::Dihedral(3));
        assert_eq!(group.order, 6);
        // Three rotations (det +1, identity included) and three reflections.
        let dets: Vec<f64> = group
            .elements
            .iter()
            .map(|e| e.matrix.determinant())
            .collect();
        assert_eq!(dets.iter().filter(|&&d| d > 0.0).count(), 3);
        assert_eq!(dets.iter().filter(|&&d| d < 0.0).count(), 3);
    }

    #[test]
    fn group_orders_match_closed_forms() {
        let cases = [
            (RootSystemSpec::Orthogonal(1), 2),
            (RootSystemSpec::Orthogonal(3), 8),
            (RootSystemSpec::TypeA(2), 6),
            (RootSystemSpec::TypeA(3), 24),
            (RootSystemSpec::TypeB(2), 8),
            (RootSystemSpec::TypeB(3), 48),
            (RootSystemSpec::Dihedral(2), 4),
            (RootSystemSpec::Dihedral(5), 10),
        ];
        for (spec, expect) in cases {
            let (_, group) = build(spec);
            assert_eq!(group.order, expect, "{spec}");
        }
    }

    #[test]
    fn elements_are_orthogonal_and_words_reproduce() {
        let (rs, group) = build(RootSystemSpec::TypeB(2));
        for e in &group.elements {
            assert!(e.is_orthogonal(ALGEBRA_TOL));
            let mut m = DMatrix::identity(rs.rank, rs.rank);
            for &i in &e.word {
                m *= rs.reflection_matrix(i);
            }
            assert!((m - &e.matrix).abs().max() < ALGEBRA_TOL);
        }
    }

    #[test]
    fn group_is_closed_under_composition() {
        for spec in [
            RootSystemSpec::Dihedral(3),
            RootSystemSpec::Orthogonal(2),
            RootSystemSpec::TypeB(2),
            RootSystemSpec::TypeA(2),
        ] {
            let (_, group) = build(spec);
            for a in &group.elements {
                for b in &group.elements {
                    let prod = &a.matrix * &b.matrix;
                    assert!(group.find(&prod).is_some(), "{spec}: product escaped the set");
                }
                let inv = a.matrix.transpose();
                assert!(group.find(&inv).is_some(), "{spec}: inverse escaped the set");
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let rs = RootSystem::build(RootSystemSpec::TypeA(3)).unwrap();
        assert!(matches!(
            WeylGroup::enumerate(&rs, 10),
            Err(WeylError::CapExceeded(10))
        ));
    }

    #[test]
    fn descent_fixes_chamber_points() {
        let (rs, _) = build(RootSystemSpec::TypeB(2));
        let x = rs.chamber_interior_point().clone();
        let proj = project_descent(&rs, &x).unwrap();
        assert_relative_eq!(proj.point, x, epsilon = 1e-14);
        assert!(proj.element.word.is_empty());
        assert!(proj.wall_hits.is_empty());
    }

    #[test]
    fn descent_on_orthogonal_is_coordinatewise_abs() {
        let (rs, _) = build(RootSystemSpec::Orthogonal(3));
        for x in gaussian_points(3, 200, 11) {
            let proj = project_descent(&rs, &x).unwrap();
            let expect = x.map(f64::abs);
            assert!((proj.point - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn descent_dihedral_three_example() {
        // e^{iπ/2} lands on e^{iπ/6} inside the wedge [0, π/3].
        let (rs, _) = build(RootSystemSpec::Dihedral(3));
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let proj = project_descent(&rs, &x).unwrap();
        let expect = DVector::from_vec(vec![(std::f64::consts::PI / 6.0).cos(), 0.5]);
        assert!((proj.point - expect).norm() < 1e-12);
    }

    #[test]
    fn origin_hits_every_wall() {
        let (rs, group) = build(RootSystemSpec::TypeB(2));
        let zero = DVector::zeros(2);
        let via_descent = project_descent(&rs, &zero).unwrap();
        let via_scan = project_enumerated(&group, &rs, &zero);
        assert!(via_descent.point.norm() < 1e-14);
        assert!(via_scan.point.norm() < 1e-14);
        assert_eq!(via_descent.wall_hits, vec![0, 1]);
        assert_eq!(via_scan.wall_hits, vec![0, 1]);
    }

    #[test]
    fn wall_points_agree_between_routes() {
        let (rs, group) = build(RootSystemSpec::TypeB(2));
        // On the wall x1 = x2 (fixed by the first simple reflection).
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let a = project_descent(&rs, &x).unwrap();
        let b = project_enumerated(&group, &rs, &x);
        assert!((a.point.clone() - b.point).norm() < RECONSTRUCTION_TOL);
        assert!(!a.wall_hits.is_empty());
    }

    #[test]
    fn projection_routes_agree_everywhere() {
        for spec in [
            RootSystemSpec::Orthogonal(2),
            RootSystemSpec::TypeA(2),
            RootSystemSpec::TypeB(3),
            RootSystemSpec::Dihedral(3),
            RootSystemSpec::Dihedral(6),
        ] {
            let (rs, group) = build(spec);
            for x in gaussian_points(rs.rank, 1000, 23) {
                let a = project_descent(&rs, &x).unwrap();
                let b = project_enumerated(&group, &rs, &x);
                assert!(
                    (a.point.clone() - b.point).norm() < RECONSTRUCTION_TOL,
                    "{spec}: routes disagree"
                );
                assert!(rs.in_chamber(&a.point, WALL_HIT_TOL));
                // Reconstruction w·y = x.
                let rebuilt = &a.element.matrix * &a.point;
                assert!((rebuilt - &x).norm() < RECONSTRUCTION_TOL, "{spec}");
            }
        }
    }

    #[test]
    fn descent_steps_stay_within_positive_count() {
        let (rs, _) = build(RootSystemSpec::TypeB(3));
        let n_positives = rs.positives.len();
        let mut max_steps = 0;
        for x in gaussian_points(3, 10_000, 37) {
            let mut y = x;
            let steps = project_in_place(&rs, &mut y).unwrap();
            max_steps = max_steps.max(steps);
        }
        assert!(max_steps <= n_positives, "{max_steps} > {n_positives}");
    }

    #[test]
    fn orbits_orthogonal() {
        let (rs, group) = build(RootSystemSpec::Orthogonal(3));
        for i in 0..3 {
            let orbit = simple_root_orbit(&group, &rs, i).unwrap();
            assert_eq!(orbit.size(), 2); // {±e_i}
            assert_eq!(orbit.simple_count, 1);
            assert_eq!(orbit.orbit_positive_indices.len(), 1);
        }
    }

    #[test]
    fn orbits_type_b_two() {
        let (rs, group) = build(RootSystemSpec::TypeB(2));
        let long = simple_root_orbit(&group, &rs, 0).unwrap();
        let short = simple_root_orbit(&group, &rs, 1).unwrap();
        assert_eq!(long.size(), 4);
        assert_eq!(short.size(), 4);
        assert_eq!(long.simple_count, 1);
        assert_eq!(short.simple_count, 1);
        // The two orbits partition the eight roots.
        for v in &long.orbit {
            assert!(short.orbit.iter().all(|w| (v - w).norm() > 1e-6));
        }
    }

    #[test]
    fn orbit_dihedral_three_is_everything() {
        let (rs, group) = build(RootSystemSpec::Dihedral(3));
        for i in 0..2 {
            let orbit = simple_root_orbit(&group, &rs, i).unwrap();
            assert_eq!(orbit.size(), 6);
            assert_eq!(orbit.simple_count, 2);
            assert_eq!(orbit.orbit_positive_indices.len(), 3);
        }
    }

    #[test]
    fn orbits_partition_the_roots() {
        for spec in [
            RootSystemSpec::TypeA(3),
            RootSystemSpec::TypeB(3),
            RootSystemSpec::Dihedral(4),
            RootSystemSpec::Dihedral(5),
        ] {
            let (rs, group) = build(spec);
            let orbits: Vec<OrbitInfo> = (0..rs.rank)
                .map(|i| simple_root_orbit(&group, &rs, i).unwrap())
                .collect();
            for a in &orbits {
                for b in &orbits {
                    let common = a
                        .orbit
                        .iter()
                        .filter(|v| b.orbit.iter().any(|w| (*v - w).norm() <= 1e-8))
                        .count();
                    assert!(
                        common == 0 || (common == a.size() && common == b.size()),
                        "{spec}: orbits neither equal nor disjoint"
                    );
                }
            }
        }
    }

    #[test]
    fn slab_identity_exact_families() {
        for (spec, i) in [
            (RootSystemSpec::Orthogonal(2), 0),
            (RootSystemSpec::TypeB(2), 0),
            (RootSystemSpec::TypeB(2), 1),
            (RootSystemSpec::Dihedral(4), 0),
        ] {
            let (rs, group) = build(spec);
            let count = check_slab_identity(&group, &rs, i, 0.1, 20_000, 5).unwrap();
            assert_eq!(count.disagreements(), 0, "{spec} root {i}: {count:?}");
        }
    }

    #[test]
    fn slab_identity_strict_inclusion_for_shared_orbits() {
        let (rs, group) = build(RootSystemSpec::Dihedral(3));
        for i in 0..2 {
            let count = check_slab_identity(&group, &rs, i, 0.1, 20_000, 7).unwrap();
            assert_eq!(count.lhs_only, 0, "chamber slabs must sit inside the orbit slabs");
            assert!(count.rhs_only > 0, "root {i}: {count:?}");
        }
    }

    #[test]
    fn slab_indicator_matches_literal_union() {
        for spec in [
            RootSystemSpec::Dihedral(3),
            RootSystemSpec::TypeB(2),
            RootSystemSpec::Orthogonal(2),
        ] {
            let (rs, group) = build(spec);
            for i in 0..rs.rank {
                for x in gaussian_points(rs.rank, 2000, 13) {
                    let fast = chamber_slab_indicator(&rs, i, 0.15, &x).unwrap();
                    let literal = chamber_slab_indicator_literal(&group, &rs, i, 0.15, &x);
                    assert_eq!(fast, literal, "{spec} root {i}");
                }
            }
        }
    }

    #[test]
    fn normal_decomposition_orthogonal_has_no_origin_part() {
        let rs = RootSystem::build(RootSystemSpec::Orthogonal(3)).unwrap();
        let gd = GramData::new(&rs).unwrap();
        for i in 0..3 {
            let nd = normal_decomposition(&rs, &gd, i).unwrap();
            assert!((nd.boundary_part.clone() - &rs.simple_span()[i]).norm() < 1e-14);
            assert!(nd.origin_part.norm() < 1e-14);
        }
    }

    #[test]
    fn normal_decomposition_type_b_coefficients() {
        let rs = RootSystem::build(RootSystemSpec::TypeB(2)).unwrap();
        let gd = GramData::new(&rs).unwrap();
        let first = normal_decomposition(&rs, &gd, 0).unwrap();
        let second = normal_decomposition(&rs, &gd, 1).unwrap();
        assert_relative_eq!(first.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(first.coefficients[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(second.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(second.coefficients[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_decomposition_sums_to_dual_and_points_inward() {
        for spec in [
            RootSystemSpec::Orthogonal(4),
            RootSystemSpec::TypeA(3),
            RootSystemSpec::TypeB(3),
            RootSystemSpec::Dihedral(5),
        ] {
            let rs = RootSystem::build(spec).unwrap();
            let gd = GramData::new(&rs).unwrap();
            for i in 0..rs.rank {
                let nd = normal_decomposition(&rs, &gd, i).unwrap();
                let sum = &nd.boundary_part + &nd.origin_part;
                assert!((sum - &gd.dual[i]).norm() < ALGEBRA_TOL, "{spec}");
                assert!(nd.coefficients.iter().all(|&c| c >= -ALGEBRA_TOL), "{spec}");
                let min = min_product_over_chamber(&gd, &nd.origin_part, 1000, 3);
                assert!(min >= -ALGEBRA_TOL, "{spec}: origin part not inward ({min})");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_preserves_norm_and_reconstructs(
            coords in proptest::collection::vec(-5.0f64..5.0, 2),
            family in 0usize..3,
        ) {
            let spec = [
                RootSystemSpec::TypeB(2),
                RootSystemSpec::Dihedral(3),
                RootSystemSpec::Orthogonal(2),
            ][family];
            let rs = RootSystem::build(spec).unwrap();
            let x = DVector::from_vec(coords);
            let proj = project_descent(&rs, &x).unwrap();
            prop_assert!((proj.point.norm() - x.norm()).abs() < 1e-10);
            prop_assert!(rs.in_chamber(&proj.point, WALL_HIT_TOL));
            let rebuilt = &proj.element.matrix * &proj.point;
            prop_assert!((rebuilt - &x).norm() < RECONSTRUCTION_TOL);
        }
    }
}
