//! Path-level Monte Carlo: Brownian paths, their chamber reflections,
//! occupation-time estimators for the pushing process and one-dimensional
//! local times, and the skew constructions.
//!
//! Everything runs on an Euler grid with the chamber projection applied at
//! sample times only; the overshoot bias is `O(√dt)` and is absorbed by the
//! ensemble-level tolerances of the verification suites. Ensembles use a
//! deterministic seed schedule (`base seed + path index`) and reduce
//! sequentially, so every report is reproducible bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{ks_critical_5pct, ks_two_sample, mean_and_se};
use crate::rootsys::{GramData, RootSystem};
use crate::weyl::{self, simple_root_orbit, WeylGroup};

/// Wall products this far below zero still count as "on the wall"; matches
/// the descent tolerance so slab counts see every boundary visit.
const SLAB_LOWER_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid path config: {0}")]
    BadConfig(String),
    #[error("projection failed: {0}")]
    Projection(#[from] weyl::WeylError),
}

/// Time grid, seed and start point of one simulated path.
#[derive(Debug, Clone)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Start point in span coordinates; must lie in the closed chamber.
    pub start: DVector<f64>,
}

impl PathConfig {
    /// Start at the chamber vertex.
    pub fn from_origin(dt: f64, horizon: f64, seed: u64, rank: usize) -> Self {
        PathConfig {
            dt,
            horizon,
            seed,
            start: DVector::zeros(rank),
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self, rank: usize) -> Result<(), SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::BadConfig("dt must be > 0".into()));
        }
        if self.horizon < self.dt {
            return Err(SimError::BadConfig("horizon must be >= dt".into()));
        }
        if self.start.len() != rank {
            return Err(SimError::BadConfig(format!(
                "start has dimension {}, expected {rank}",
                self.start.len()
            )));
        }
        Ok(())
    }

    /// Additionally checks that the start point lies in the closed chamber.
    pub fn validate_for(&self, rs: &RootSystem) -> Result<(), SimError> {
        self.validate(rs.rank)?;
        if !rs.in_chamber(&self.start, 1e-10) {
            return Err(SimError::BadConfig("start point outside the chamber".into()));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> Self {
        PathConfig {
            seed,
            ..self.clone()
        }
    }
}

/// A raw Brownian path on the grid; column `k` is the state at `times[k]`.
#[derive(Debug, Clone)]
pub struct RawPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
}

impl RawPath {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.states.nrows()
    }

    /// One scalar coordinate as a series.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states.row(i).iter().copied().collect()
    }

    /// Series of inner products `⟨v, state_k⟩`.
    pub fn products(&self, v: &DVector<f64>) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| v.dot(&self.states.column(k).into_owned()))
            .collect()
    }
}

/// Simulates a Brownian motion with independent `√dt·N(0,1)` increments per
/// coordinate, reproducible from the seed.
pub fn simulate_brownian(cfg: &PathConfig, rank: usize) -> Result<RawPath, SimError> {
    cfg.validate(rank)?;
    let n = cfg.n_steps();
    let sqrt_dt = cfg.dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states = DMatrix::zeros(rank, n + 1);
    states.column_mut(0).copy_from(&cfg.start);
    for k in 0..n {
        for r in 0..rank {
            let z: f64 = rng.sample(StandardNormal);
            states[(r, k + 1)] = states[(r, k)] + sqrt_dt * z;
        }
    }
    let times = (0..=n).map(|k| k as f64 * cfg.dt).collect();
    Ok(RawPath {
        dt: cfg.dt,
        times,
        states,
    })
}

/// A path and its pointwise chamber projection, with the running distance to
/// the nearest wall (as the smallest wall product).
#[derive(Debug, Clone)]
pub struct ReflectedPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub theta: DMatrix<f64>,
    pub pi_theta: DMatrix<f64>,
    pub wall_distance: Vec<f64>,
}

impl ReflectedPath {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.pi_theta.nrows()
    }

    /// Largest deviation of `‖π(Θ)‖` from `‖Θ‖` over the grid; the
    /// projection is pointwise orthogonal so this is pure roundoff.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.times.len())
            .map(|k| (self.pi_theta.column(k).norm() - self.theta.column(k).norm()).abs())
            .fold(0.0, f64::max)
    }
}

/// Applies the chamber descent at every grid point.
pub fn reflect_path(rs: &RootSystem, raw: &RawPath) -> Result<ReflectedPath, SimError> {
    let n = raw.n_steps();
    let mut pi_theta = raw.states.clone();
    let mut wall_distance = Vec::with_capacity(n + 1);
    let mut scratch = DVector::zeros(rs.rank);
    for k in 0..=n {
        scratch.copy_from(&pi_theta.column(k));
        weyl::project_in_place(rs, &mut scratch)?;
        pi_theta.column_mut(k).copy_from(&scratch);
        wall_distance.push(rs.min_wall_product(&scratch));
    }
    Ok(ReflectedPath {
        dt: raw.dt,
        times: raw.times.clone(),
        theta: raw.states.clone(),
        pi_theta,
        wall_distance,
    })
}

/// Bandwidth diagnostics attached to a [`PushingEstimate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum EstimateWarning {
    /// `ε < √dt`: the slab is thinner than the grid can resolve.
    BandwidthBelowGridScale { epsilon: f64, grid_scale: f64 },
    /// `ε` exceeds half the start point's clearance from the walls.
    BandwidthAboveStartClearance { epsilon: f64, clearance: f64 },
}

/// Occupation-time estimate of the pushing process: per-wall nondecreasing
/// curves, their expansion over the dual basis, and the recovered driving
/// process `π(Θ) − π(Θ_0) − pushing`.
#[derive(Debug, Clone)]
pub struct PushingEstimate {
    pub epsilon: f64,
    /// Row `i` holds `Y_i(t_k) = ⟨s_i,s_i⟩/(2ε) · dt · #{j<k : wall product
    /// in [0, ε]}`.
    pub y_curves: DMatrix<f64>,
    /// `Σ_i Y_i(t) ξ_i`, a chamber-valued curve.
    pub pushing: DMatrix<f64>,
    /// `π(Θ_t) − π(Θ_0) − pushing(t)`.
    pub driving: DMatrix<f64>,
    pub warnings: Vec<EstimateWarning>,
}

impl PushingEstimate {
    pub fn rank(&self) -> usize {
        self.y_curves.nrows()
    }

    pub fn final_y(&self, i: usize) -> f64 {
        self.y_curves[(i, self.y_curves.ncols() - 1)]
    }
}

/// Builds the occupation-time estimate at bandwidth `epsilon` (recommended
/// `ε = c·√dt` with `c` around 5).
pub fn estimate_pushing(
    path: &ReflectedPath,
    rs: &RootSystem,
    gd: &GramData,
    epsilon: f64,
) -> PushingEstimate {
    assert!(epsilon > 0.0, "bandwidth must be positive");
    let rank = path.rank();
    let n = path.n_steps();

    let mut warnings = Vec::new();
    let grid_scale = path.dt.sqrt();
    if epsilon < grid_scale {
        warnings.push(EstimateWarning::BandwidthBelowGridScale {
            epsilon,
            grid_scale,
        });
    }
    let clearance = (0..rank)
        .map(|i| rs.simple_span()[i].dot(&path.pi_theta.column(0).into_owned()) / rs.simple_span()[i].norm())
        .fold(f64::INFINITY, f64::min);
    if clearance > 0.0 && epsilon > 0.5 * clearance {
        warnings.push(EstimateWarning::BandwidthAboveStartClearance { epsilon, clearance });
    }

    // All wall products at once: row i of Λ·π is ⟨s_i, π(Θ)⟩.
    let products = &gd.lambda * &path.pi_theta;

    let mut y_curves = DMatrix::zeros(rank, n + 1);
    for i in 0..rank {
        let increment = rs.simple_norm2(i) / (2.0 * epsilon) * path.dt;
        let mut acc = 0.0;
        for k in 0..n {
            let u = products[(i, k)];
            if u >= -SLAB_LOWER_TOL && u <= epsilon {
                acc += increment;
            }
            y_curves[(i, k + 1)] = acc;
        }
    }

    let dual_matrix = DMatrix::from_fn(rank, rank, |r, c| gd.dual[c][r]);
    let pushing = &dual_matrix * &y_curves;

    let start = path.pi_theta.column(0).into_owned();
    let mut driving = DMatrix::zeros(rank, n + 1);
    for k in 0..=n {
        for r in 0..rank {
            driving[(r, k)] = path.pi_theta[(r, k)] - start[r] - pushing[(r, k)];
        }
    }

    PushingEstimate {
        epsilon,
        y_curves,
        pushing,
        driving,
        warnings,
    }
}

/// Pushing mass accumulated while the wall product exceeded `delta`, per
/// simple root. The estimator only increments inside its `ε`-slab, so the
/// mass is exactly zero for every `delta ≥ ε`; values below `ε` report the
/// slab mass between `delta` and `ε`.
pub fn support_violation_mass(
    pe: &PushingEstimate,
    path: &ReflectedPath,
    gd: &GramData,
    delta: f64,
) -> Vec<f64> {
    let rank = pe.rank();
    let n = path.n_steps();
    let products = &gd.lambda * &path.pi_theta;
    (0..rank)
        .map(|i| {
            let mut mass = 0.0;
            for k in 0..n {
                let dy = pe.y_curves[(i, k + 1)] - pe.y_curves[(i, k)];
                if dy > 0.0 && products[(i, k)] > delta {
                    mass += dy;
                }
            }
            mass
        })
        .collect()
}

/// Which occupation-density normalization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimeKind {
    /// Local time at zero of a signed series: `rate/(2ε) · dt · #{|x| ≤ ε}`.
    Symmetric,
    /// Right local time at zero of a nonnegative series:
    /// `rate/ε · dt · #{0 ≤ x ≤ ε}`. For a series obtained by reflecting a
    /// signed one this is twice the symmetric value — the factor bookkeeping
    /// lives here and nowhere else.
    RightAtZero,
}

/// Occupation-time local-time estimator on the grid. `quadratic_rate` is the
/// bracket slope `d⟨X⟩/dt` of the series (e.g. `⟨α,α⟩` for `⟨α,Θ⟩`). Returns
/// the nondecreasing curve on the full grid, starting at zero.
pub fn estimate_local_time_1d(
    values: &[f64],
    dt: f64,
    epsilon: f64,
    quadratic_rate: f64,
    kind: LocalTimeKind,
) -> Vec<f64> {
    assert!(epsilon > 0.0 && dt > 0.0);
    let increment = match kind {
        LocalTimeKind::Symmetric => quadratic_rate / (2.0 * epsilon) * dt,
        LocalTimeKind::RightAtZero => quadratic_rate / epsilon * dt,
    };
    let mut curve = Vec::with_capacity(values.len());
    curve.push(0.0);
    let mut acc = 0.0;
    for &v in &values[..values.len() - 1] {
        let occupied = match kind {
            LocalTimeKind::Symmetric => v.abs() <= epsilon,
            LocalTimeKind::RightAtZero => v >= -SLAB_LOWER_TOL && v <= epsilon,
        };
        if occupied {
            acc += increment;
        }
        curve.push(acc);
    }
    curve
}

/// Runs `n_paths` independent jobs with the deterministic seed schedule
/// `base_seed + index`, in parallel, collecting results in index order.
pub fn run_ensemble<T: Send>(
    n_paths: usize,
    base_seed: u64,
    job: impl Fn(u64, usize) -> T + Sync,
) -> Vec<T> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| job(base_seed.wrapping_add(i as u64), i))
        .collect()
}

/// Ensemble statistics of the recovered driving process.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DrivingStats {
    pub n_paths: usize,
    pub horizon: f64,
    pub epsilon: f64,
    /// Ensemble mean of the per-coordinate quadratic variation over the
    /// horizon, divided by the horizon (1 for a Brownian motion).
    pub qv_over_t_mean: Vec<f64>,
    pub qv_over_t_se: Vec<f64>,
    /// Ensemble mean and standard error of the endpoint per coordinate
    /// (0 for a driftless process).
    pub endpoint_mean: Vec<f64>,
    pub endpoint_se: Vec<f64>,
    /// Largest |ensemble mean| of a cross-coordinate quadratic covariation.
    pub max_cross_qv_mean: f64,
    /// Per-coordinate correlation between the increments over the two halves
    /// of the horizon.
    pub half_increment_corr: Vec<f64>,
}

/// Simulates an ensemble, estimates the pushing process on each path and
/// summarizes the recovered driving noise.
pub fn driving_noise_stats(
    rs: &RootSystem,
    gd: &GramData,
    cfg: &PathConfig,
    epsilon: f64,
    n_paths: usize,
) -> Result<DrivingStats, SimError> {
    cfg.validate_for(rs)?;
    let rank = rs.rank;
    struct PerPath {
        qv: Vec<f64>,
        endpoint: Vec<f64>,
        cross: Vec<f64>,
        first_half: Vec<f64>,
        second_half: Vec<f64>,
    }
    let results: Vec<Result<PerPath, SimError>> = run_ensemble(n_paths, cfg.seed, |seed, _| {
        let raw = simulate_brownian(&cfg.with_seed(seed), rank)?;
        let path = reflect_path(rs, &raw)?;
        let pe = estimate_pushing(&path, rs, gd, epsilon);
        let b = &pe.driving;
        let n = path.n_steps();
        let half = n / 2;
        let mut qv = vec![0.0; rank];
        let mut cross = vec![0.0; rank * (rank.saturating_sub(1)) / 2];
        for k in 0..n {
            let mut idx = 0;
            for r in 0..rank {
                let dr = b[(r, k + 1)] - b[(r, k)];
                qv[r] += dr * dr;
                for r2 in (r + 1)..rank {
                    let dr2 = b[(r2, k + 1)] - b[(r2, k)];
                    cross[idx] += dr * dr2;
                    idx += 1;
                }
            }
        }
        let endpoint = (0..rank).map(|r| b[(r, n)]).collect();
        let first_half = (0..rank).map(|r| b[(r, half)] - b[(r, 0)]).collect();
        let second_half = (0..rank).map(|r| b[(r, n)] - b[(r, half)]).collect();
        Ok(PerPath {
            qv,
            endpoint,
            cross,
            first_half,
            second_half,
        })
    });
    let per_path: Vec<PerPath> = results.into_iter().collect::<Result<_, _>>()?;

    let t = cfg.horizon;
    let mut qv_over_t_mean = Vec::new();
    let mut qv_over_t_se = Vec::new();
    let mut endpoint_mean = Vec::new();
    let mut endpoint_se = Vec::new();
    let mut half_increment_corr = Vec::new();
    for r in 0..rank {
        let qvs: Vec<f64> = per_path.iter().map(|p| p.qv[r] / t).collect();
        let (m, se) = mean_and_se(&qvs);
        qv_over_t_mean.push(m);
        qv_over_t_se.push(se);
        let ends: Vec<f64> = per_path.iter().map(|p| p.endpoint[r]).collect();
        let (m, se) = mean_and_se(&ends);
        endpoint_mean.push(m);
        endpoint_se.push(se);
        let a: Vec<f64> = per_path.iter().map(|p| p.first_half[r]).collect();
        let b: Vec<f64> = per_path.iter().map(|p| p.second_half[r]).collect();
        half_increment_corr.push(correlation(&a, &b));
    }
    let n_cross = rank * rank.saturating_sub(1) / 2;
    let mut max_cross: f64 = 0.0;
    for idx in 0..n_cross {
        let vals: Vec<f64> = per_path.iter().map(|p| p.cross[idx] / t).collect();
        let (m, _) = mean_and_se(&vals);
        max_cross = max_cross.max(m.abs());
    }

    Ok(DrivingStats {
        n_paths,
        horizon: t,
        epsilon,
        qv_over_t_mean,
        qv_over_t_se,
        endpoint_mean,
        endpoint_se,
        max_cross_qv_mean: max_cross,
        half_increment_corr,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Per-root outcome of the orbit local-time comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub enum OrbitCheckStatus {
    /// The orbit contains more than one simple root, so the identity does
    /// not apply.
    NotApplicable { simple_count: usize },
    Checked {
        mean_y: f64,
        mean_orbit_local_time: f64,
        /// `|mean_y − mean_orbit_local_time| / mean_y`.
        rel_error: f64,
        /// Ensemble-mean occupation mass of simultaneous slab visits (the
        /// term that vanishes in the bandwidth limit).
        mean_intersection_mass: f64,
    },
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OrbitLocalTimeReport {
    pub epsilon: f64,
    pub n_paths: usize,
    pub per_root: Vec<OrbitCheckStatus>,
}

/// Compares each wall's pushing coordinate `Y_i(T)` against the summed local
/// times of `⟨α, Θ⟩` over the positive members of the orbit of `s_i`.
/// Only run where `s_i` is the sole simple root of its orbit; other roots
/// report [`OrbitCheckStatus::NotApplicable`].
pub fn orbit_local_time_check(
    rs: &RootSystem,
    group: &WeylGroup,
    gd: &GramData,
    cfg: &PathConfig,
    epsilon: f64,
    n_paths: usize,
) -> Result<OrbitLocalTimeReport, SimError> {
    cfg.validate_for(rs)?;
    let rank = rs.rank;
    let orbits: Vec<_> = (0..rank)
        .map(|i| simple_root_orbit(group, rs, i))
        .collect::<Result<_, _>>()?;

    struct PerPath {
        y_final: Vec<f64>,
        lt_final: Vec<f64>,
        intersection: Vec<f64>,
    }
    let results: Vec<Result<PerPath, SimError>> = run_ensemble(n_paths, cfg.seed, |seed, _| {
        let raw = simulate_brownian(&cfg.with_seed(seed), rank)?;
        let path = reflect_path(rs, &raw)?;
        let pe = estimate_pushing(&path, rs, gd, epsilon);
        let n = path.n_steps();
        let mut y_final = vec![0.0; rank];
        let mut lt_final = vec![0.0; rank];
        let mut intersection = vec![0.0; rank];
        for (i, orbit) in orbits.iter().enumerate() {
            if orbit.simple_count != 1 {
                continue;
            }
            y_final[i] = pe.final_y(i);
            let rate = rs.simple_norm2(i);
            let members: Vec<Vec<f64>> = orbit
                .orbit_positive_indices
                .iter()
                .map(|&p| raw.products(&rs.positives_span()[p]))
                .collect();
            for series in &members {
                let lt = estimate_local_time_1d(series, raw.dt, epsilon, rate, LocalTimeKind::Symmetric);
                lt_final[i] += lt[n];
            }
            // Time spent in two or more slabs at once, scaled like the
            // estimator itself.
            let mut overlap_steps = 0usize;
            for k in 0..n {
                let active = members.iter().filter(|s| s[k].abs() <= epsilon).count();
                if active >= 2 {
                    overlap_steps += 1;
                }
            }
            intersection[i] = rate / (2.0 * epsilon) * raw.dt * overlap_steps as f64;
        }
        Ok(PerPath {
            y_final,
            lt_final,
            intersection,
        })
    });
    let per_path: Vec<PerPath> = results.into_iter().collect::<Result<_, _>>()?;

    let n = n_paths as f64;
    let per_root = orbits
        .iter()
        .enumerate()
        .map(|(i, orbit)| {
            if orbit.simple_count != 1 {
                return OrbitCheckStatus::NotApplicable {
                    simple_count: orbit.simple_count,
                };
            }
            let mean_y = per_path.iter().map(|p| p.y_final[i]).sum::<f64>() / n;
            let mean_lt = per_path.iter().map(|p| p.lt_final[i]).sum::<f64>() / n;
            let mean_overlap = per_path.iter().map(|p| p.intersection[i]).sum::<f64>() / n;
            let rel_error = if mean_y > 0.0 {
                (mean_y - mean_lt).abs() / mean_y
            } else {
                f64::INFINITY
            };
            OrbitCheckStatus::Checked {
                mean_y,
                mean_orbit_local_time: mean_lt,
                rel_error,
                mean_intersection_mass: mean_overlap,
            }
        })
        .collect();

    Ok(OrbitLocalTimeReport {
        epsilon,
        n_paths,
        per_root,
    })
}

/// Per-root comparison of the right local time of `⟨s_i, π(Θ)⟩` at zero
/// against twice the pushing coordinate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PushingIdentityCheck {
    pub epsilon_y: f64,
    pub epsilon_local_time: f64,
    /// Final curve values per root: `(Y_i(T), L⁰(T))`.
    pub finals: Vec<(f64, f64)>,
    /// With a shared bandwidth the two estimators count the same slab steps,
    /// so `L⁰ = 2·Y` holds bitwise along the whole curve.
    pub exact_double: bool,
}

pub fn pushing_identity_check(
    path: &ReflectedPath,
    pe: &PushingEstimate,
    rs: &RootSystem,
    gd: &GramData,
    epsilon_local_time: f64,
) -> PushingIdentityCheck {
    let rank = path.rank();
    let n = path.n_steps();
    let products = &gd.lambda * &path.pi_theta;
    let mut finals = Vec::with_capacity(rank);
    let mut exact = pe.epsilon == epsilon_local_time;
    for i in 0..rank {
        let series: Vec<f64> = (0..=n).map(|k| products[(i, k)]).collect();
        let lt = estimate_local_time_1d(
            &series,
            path.dt,
            epsilon_local_time,
            rs.simple_norm2(i),
            LocalTimeKind::RightAtZero,
        );
        if pe.epsilon == epsilon_local_time {
            for k in 0..=n {
                if lt[k] != 2.0 * pe.y_curves[(i, k)] {
                    exact = false;
                }
            }
        }
        finals.push((pe.final_y(i), lt[n]));
    }
    PushingIdentityCheck {
        epsilon_y: pe.epsilon,
        epsilon_local_time,
        finals,
        exact_double: exact,
    }
}

/// Ensemble version with independent bandwidths: returns, per root, the
/// relative deviation of `mean(L⁰)` from `2·mean(Y)`.
pub fn pushing_identity_ensemble(
    rs: &RootSystem,
    gd: &GramData,
    cfg: &PathConfig,
    epsilon_y: f64,
    epsilon_local_time: f64,
    n_paths: usize,
) -> Result<Vec<f64>, SimError> {
    cfg.validate_for(rs)?;
    let rank = rs.rank;
    let results: Vec<Result<Vec<(f64, f64)>, SimError>> =
        run_ensemble(n_paths, cfg.seed, |seed, _| {
            let raw = simulate_brownian(&cfg.with_seed(seed), rank)?;
            let path = reflect_path(rs, &raw)?;
            let pe = estimate_pushing(&path, rs, gd, epsilon_y);
            Ok(pushing_identity_check(&path, &pe, rs, gd, epsilon_local_time).finals)
        });
    let finals: Vec<Vec<(f64, f64)>> = results.into_iter().collect::<Result<_, _>>()?;
    let n = n_paths as f64;
    Ok((0..rank)
        .map(|i| {
            let mean_y = finals.iter().map(|f| f[i].0).sum::<f64>() / n;
            let mean_lt = finals.iter().map(|f| f[i].1).sum::<f64>() / n;
            if mean_y > 0.0 {
                (mean_lt - 2.0 * mean_y).abs() / (2.0 * mean_y)
            } else {
                0.0
            }
        })
        .collect())
}

/// Distributional comparison behind the reflection identity in one
/// dimension: `|B_T|` against `S_T − B_T`, plus the local-time estimator
/// against the running-maximum law.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LevyReport {
    pub n_paths: usize,
    pub horizon: f64,
    pub ks_statistic: f64,
    pub ks_critical_5pct: f64,
    pub mean_abs_endpoint: f64,
    pub mean_sup: f64,
    pub mean_sup_minus_endpoint: f64,
    pub mean_local_time: f64,
    /// `E|B_T| = E[S_T] = √(2T/π)` by the reflection principle.
    pub oracle_mean: f64,
}

/// Runs two independent one-dimensional ensembles of `n_paths` each: the
/// first supplies `|B_T|` and the local-time estimate, the second
/// `(S_T − B_T, S_T)`.
pub fn levy_identity_check(
    dt: f64,
    horizon: f64,
    epsilon: f64,
    seed: u64,
    n_paths: usize,
) -> Result<LevyReport, SimError> {
    assert!(n_paths >= 100, "need at least 100 paths");
    let cfg = PathConfig::from_origin(dt, horizon, seed, 1);
    let first: Vec<(f64, f64)> = run_ensemble(n_paths, cfg.seed, |s, _| {
        let raw = simulate_brownian(&cfg.with_seed(s), 1).expect("validated");
        let series = raw.coordinate(0);
        let lt = estimate_local_time_1d(&series, dt, epsilon, 1.0, LocalTimeKind::Symmetric);
        (series[series.len() - 1].abs(), lt[lt.len() - 1])
    });
    let second: Vec<(f64, f64)> = run_ensemble(n_paths, cfg.seed + n_paths as u64, |s, _| {
        let raw = simulate_brownian(&cfg.with_seed(s), 1).expect("validated");
        let series = raw.coordinate(0);
        let sup = series.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        (sup - series[series.len() - 1], sup)
    });

    let abs_sample: Vec<f64> = first.iter().map(|p| p.0).collect();
    let reflected_sample: Vec<f64> = second.iter().map(|p| p.0).collect();
    let ks = ks_two_sample(&abs_sample, &reflected_sample);

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(LevyReport {
        n_paths,
        horizon,
        ks_statistic: ks,
        ks_critical_5pct: ks_critical_5pct(n_paths, n_paths),
        mean_abs_endpoint: mean(&abs_sample),
        mean_sup: mean(&second.iter().map(|p| p.1).collect::<Vec<_>>()),
        mean_sup_minus_endpoint: mean(&reflected_sample),
        mean_local_time: mean(&first.iter().map(|p| p.1).collect::<Vec<_>>()),
        oracle_mean: (2.0 * horizon / std::f64::consts::PI).sqrt(),
    })
}

/// Parameters of the one-dimensional skew construction.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SkewConfig {
    /// Probability that an excursion keeps the positive sign.
    pub p: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl SkewConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(SimError::BadConfig("p must lie in [0, 1]".into()));
        }
        if !(self.dt > 0.0) || self.horizon < self.dt {
            return Err(SimError::BadConfig("need dt > 0 and horizon >= dt".into()));
        }
        Ok(())
    }
}

/// One maximal interval on which the reflected path stays above the grid
/// zero threshold. Excursions shorter than two steps inherit their
/// neighbor's sign instead of drawing their own.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Excursion {
    pub start: usize,
    pub end: usize,
    pub sign: f64,
    pub drawn: bool,
}

/// The signed path of the one-dimensional skew construction.
#[derive(Debug, Clone)]
pub struct SkewPath1d {
    pub dt: f64,
    pub threshold: f64,
    pub times: Vec<f64>,
    pub reflected: Vec<f64>,
    pub signed: Vec<f64>,
    pub excursions: Vec<Excursion>,
    /// The independent sign draws, in excursion order (`true` = positive).
    pub draws: Vec<bool>,
}

/// Builds `|B|` on the grid, detects excursions above the `√dt` threshold
/// and signs each with an independent Bernoulli(p). Sign draws use the
/// second stream of the seeded generator so the underlying noise matches
/// other constructions on the same seed.
pub fn skew_bm_1d(cfg: &SkewConfig) -> Result<SkewPath1d, SimError> {
    cfg.validate()?;
    let path_cfg = PathConfig::from_origin(cfg.dt, cfg.horizon, cfg.seed, 1);
    let raw = simulate_brownian(&path_cfg, 1)?;
    let reflected: Vec<f64> = raw.coordinate(0).iter().map(|v| v.abs()).collect();
    let threshold = cfg.dt.sqrt();

    let runs = excursion_runs(&reflected, threshold);
    let mut sign_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sign_rng.set_stream(1);
    let mut draws = Vec::new();
    let mut excursions: Vec<Excursion> = Vec::with_capacity(runs.len());
    for &(start, end) in &runs {
        let long_enough = end - start + 1 >= 2;
        let (sign, drawn) = if long_enough {
            let positive = sign_rng.gen::<f64>() < cfg.p;
            draws.push(positive);
            (if positive { 1.0 } else { -1.0 }, true)
        } else {
            (f64::NAN, false) // filled from the neighbor below
        };
        excursions.push(Excursion {
            start,
            end,
            sign,
            drawn,
        });
    }
    // Short excursions merge into their neighbor: previous sign if any,
    // otherwise the next drawn one.
    let first_drawn = excursions
        .iter()
        .find(|e| e.drawn)
        .map(|e| e.sign)
        .unwrap_or(1.0);
    let mut current = first_drawn;
    for e in excursions.iter_mut() {
        if e.drawn {
            current = e.sign;
        } else {
            e.sign = current;
        }
    }

    // Points outside every excursion (the grid zero set) carry the sign of
    // the preceding excursion, so a run of all-positive draws reproduces the
    // reflected path exactly.
    let mut signed = Vec::with_capacity(reflected.len());
    let mut run_idx = 0;
    let mut current = first_drawn;
    for (k, &r) in reflected.iter().enumerate() {
        while run_idx < excursions.len() && k > excursions[run_idx].end {
            run_idx += 1;
        }
        if run_idx < excursions.len()
            && k >= excursions[run_idx].start
            && k <= excursions[run_idx].end
        {
            current = excursions[run_idx].sign;
        }
        signed.push(current * r);
    }

    Ok(SkewPath1d {
        dt: cfg.dt,
        threshold,
        times: raw.times,
        reflected,
        signed,
        excursions,
        draws,
    })
}

/// Maximal runs of indices with `values > threshold`, as inclusive ranges.
fn excursion_runs(values: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if v > threshold {
            if start.is_none() {
                start = Some(k);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, k - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len() - 1));
    }
    runs
}

/// Experimental multidimensional skew path. Evolves the chamber projection
/// of a Brownian path and, whenever a wall product starts a new excursion
/// above the `√dt` threshold (persisting at least two steps), draws a
/// Bernoulli for that wall: on "reflect" the current chamber image is kept,
/// on "transmit" the subsequent excursion is carried through the wall by its
/// simple reflection. All-reflect parameters reproduce the reflected path
/// exactly on the same noise.
#[derive(Debug, Clone)]
pub struct MultidimSkewPath {
    pub dt: f64,
    pub threshold: f64,
    pub times: Vec<f64>,
    pub path: DMatrix<f64>,
    pub reflected: ReflectedPath,
    /// Per-wall draw outcomes in event order (`true` = reflect).
    pub draws: Vec<Vec<bool>>,
    /// Steps at which a transmission was applied, as `(step, wall)`.
    pub transmissions: Vec<(usize, usize)>,
}

pub fn skew_multidim(
    rs: &RootSystem,
    gd: &GramData,
    cfg: &PathConfig,
    p_per_wall: &[f64],
) -> Result<MultidimSkewPath, SimError> {
    cfg.validate_for(rs)?;
    if p_per_wall.len() != rs.rank {
        return Err(SimError::BadConfig(format!(
            "need one probability per wall ({} != {})",
            p_per_wall.len(),
            rs.rank
        )));
    }
    if p_per_wall.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(SimError::BadConfig("probabilities must lie in [0, 1]".into()));
    }

    let raw = simulate_brownian(cfg, rs.rank)?;
    let reflected = reflect_path(rs, &raw)?;
    let n = reflected.n_steps();
    let threshold = cfg.dt.sqrt();
    let products = &gd.lambda * &reflected.pi_theta;

    let mut sign_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sign_rng.set_stream(1);

    let mut image = DMatrix::identity(rs.rank, rs.rank);
    let mut identity_image = true;
    let mut path = DMatrix::zeros(rs.rank, n + 1);
    path.column_mut(0).copy_from(&reflected.pi_theta.column(0));
    let mut draws = vec![Vec::new(); rs.rank];
    let mut transmissions = Vec::new();

    for k in 1..=n {
        for i in 0..rs.rank {
            let crossed_up = products[(i, k - 1)] <= threshold && products[(i, k)] > threshold;
            // Single-step spikes draw no sign; they merge into the
            // surrounding zero set.
            let persistent = k < n && products[(i, k + 1)] > threshold;
            if crossed_up && persistent {
                let keep = sign_rng.gen::<f64>() < p_per_wall[i];
                draws[i].push(keep);
                if !keep {
                    image *= rs.reflection_matrix(i);
                    identity_image = false;
                    transmissions.push((k, i));
                }
            }
        }
        if identity_image {
            path.column_mut(k).copy_from(&reflected.pi_theta.column(k));
        } else {
            let transformed = &image * reflected.pi_theta.column(k);
            path.column_mut(k).copy_from(&transformed);
        }
    }

    Ok(MultidimSkewPath {
        dt: cfg.dt,
        threshold,
        times: reflected.times.clone(),
        path,
        reflected,
        draws,
        transmissions,
    })
}

/// Writes a reflected path (and optionally its pushing estimate) as CSV with
/// the fixed column order `t, theta_*, pi_*, y_*, wall_distance`.
pub fn write_path_csv<W: std::io::Write>(
    out: &mut W,
    path: &ReflectedPath,
    estimate: Option<&PushingEstimate>,
) -> std::io::Result<()> {
    let rank = path.rank();
    let mut header = String::from("t");
    for i in 1..=rank {
        header.push_str(&format!(",theta_{i}"));
    }
    for i in 1..=rank {
        header.push_str(&format!(",pi_{i}"));
    }
    if estimate.is_some() {
        for i in 1..=rank {
            header.push_str(&format!(",y_{i}"));
        }
    }
    header.push_str(",wall_distance");
    writeln!(out, "{header}")?;
    for k in 0..path.times.len() {
        let mut row = format!("{}", path.times[k]);
        for r in 0..rank {
            row.push_str(&format!(",{}", path.theta[(r, k)]));
        }
        for r in 0..rank {
            row.push_str(&format!(",{}", path.pi_theta[(r, k)]));
        }
        if let Some(pe) = estimate {
            for r in 0..rank {
                row.push_str(&format!(",{}", pe.y_curves[(r, k)]));
            }
        }
        row.push_str(&format!(",{}", path.wall_distance[k]));
        writeln!(out, "{row}")?;
    }
    Ok(())
}
