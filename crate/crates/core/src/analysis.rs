//! Ensemble statistics, convergence sweeps and the distributional tests
//! behind the verification suites.

use nalgebra::DVector;
use thiserror::Error;

use crate::rootsys::{GramData, RootSystem, RootSystemSpec};
use crate::sim::{
    driving_noise_stats, orbit_local_time_check, reflect_path, run_ensemble, simulate_brownian,
    OrbitCheckStatus, PathConfig, SimError,
};
use crate::weyl::{WeylGroup, DEFAULT_GROUP_CAP};

/// Ensemble band for quadratic-variation checks: `QV/T ∈ [0.95, 1.05]`.
pub const QV_REL_BAND: f64 = 0.05;

/// Ensemble tolerance on local-time comparisons.
pub const ENSEMBLE_REL_TOL: f64 = 0.10;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("root system error: {0}")]
    Root(#[from] crate::rootsys::RootSystemError),
    #[error("group error: {0}")]
    Weyl(#[from] crate::weyl::WeylError),
}

/// One named scalar check: the pass flag is recomputable from the other
/// fields (`|estimate − target| ≤ tolerance`).
#[derive(Debug, Clone, serde::Serialize)]
pub struct StatReport {
    pub name: String,
    pub n_paths: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl StatReport {
    pub fn new(
        name: impl Into<String>,
        n_paths: usize,
        estimate: f64,
        std_error: f64,
        target: f64,
        tolerance: f64,
    ) -> Self {
        StatReport {
            name: name.into(),
            n_paths,
            estimate,
            std_error,
            target,
            tolerance,
            pass: (estimate - target).abs() <= tolerance,
        }
    }

    pub fn recompute_pass(&self) -> bool {
        (self.estimate - self.target).abs() <= self.tolerance
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic, `sup_x |F_a(x) − F_b(x)|`.
/// Symmetric in its arguments; ties are handled by advancing both empirical
/// distributions past the tied value before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be nonempty");
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Large-sample 5% critical value for the two-sample statistic,
/// `1.36·√((n+m)/(n·m))`.
pub fn ks_critical_5pct(n: usize, m: usize) -> f64 {
    1.36 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Which ensemble error a convergence sweep tracks.
#[derive(Debug, Clone, Copy)]
pub enum SweepCheck {
    /// Largest applicable relative error of the orbit local-time identity.
    OrbitLocalTimeError(RootSystemSpec),
    /// Largest deviation of per-coordinate `QV/T` from 1 in the recovered
    /// driving process.
    DrivingQvError(RootSystemSpec),
}

impl SweepCheck {
    pub fn name(&self) -> String {
        match self {
            SweepCheck::OrbitLocalTimeError(s) => format!("orbit-local-time[{s}]"),
            SweepCheck::DrivingQvError(s) => format!("driving-qv[{s}]"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepCell {
    pub dt: f64,
    pub epsilon: f64,
    pub report: StatReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepTable {
    pub check: String,
    pub cells: Vec<SweepCell>,
    /// Errors trend downward along the grid: no cell regresses by more than
    /// 10% over its predecessor, and the last sits at or below the first.
    pub monotone_trend: bool,
}

/// Runs the named check across a grid of time steps with `ε = coeff·√dt`.
/// The grid is traversed in the given order; seeds advance deterministically
/// per cell, so the sweep is reproducible bit for bit.
pub fn convergence_sweep(
    check: SweepCheck,
    dt_grid: &[f64],
    epsilon_coeff: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SweepTable, AnalysisError> {
    if dt_grid.len() < 3 {
        return Err(AnalysisError::BadInput(
            "a sweep needs at least 3 grid points".into(),
        ));
    }
    let spec = match check {
        SweepCheck::OrbitLocalTimeError(s) | SweepCheck::DrivingQvError(s) => s,
    };
    let rs = RootSystem::build(spec)?;
    let gd = GramData::new(&rs)?;
    let group = match check {
        SweepCheck::OrbitLocalTimeError(_) => Some(WeylGroup::enumerate(&rs, DEFAULT_GROUP_CAP)?),
        SweepCheck::DrivingQvError(_) => None,
    };

    let mut cells = Vec::with_capacity(dt_grid.len());
    for (idx, &dt) in dt_grid.iter().enumerate() {
        let epsilon = epsilon_coeff * dt.sqrt();
        let cell_seed = seed.wrapping_add(idx as u64 * 1_000_003);
        let cfg = PathConfig::from_origin(dt, horizon, cell_seed, rs.rank);
        let (estimate, tolerance) = match check {
            SweepCheck::OrbitLocalTimeError(_) => {
                let report = orbit_local_time_check(
                    &rs,
                    group.as_ref().expect("enumerated above"),
                    &gd,
                    &cfg,
                    epsilon,
                    n_paths,
                )?;
                let worst = report
                    .per_root
                    .iter()
                    .filter_map(|s| match s {
                        OrbitCheckStatus::Checked { rel_error, .. } => Some(*rel_error),
                        OrbitCheckStatus::NotApplicable { .. } => None,
                    })
                    .fold(0.0f64, f64::max);
                (worst, ENSEMBLE_REL_TOL)
            }
            SweepCheck::DrivingQvError(_) => {
                let stats = driving_noise_stats(&rs, &gd, &cfg, epsilon, n_paths)?;
                let worst = stats
                    .qv_over_t_mean
                    .iter()
                    .map(|q| (q - 1.0).abs())
                    .fold(0.0f64, f64::max);
                (worst, QV_REL_BAND)
            }
        };
        cells.push(SweepCell {
            dt,
            epsilon,
            report: StatReport::new(
                format!("{}@dt={dt:e}", check.name()),
                n_paths,
                estimate,
                0.0,
                0.0,
                tolerance,
            ),
        });
    }

    let errors: Vec<f64> = cells.iter().map(|c| c.report.estimate).collect();
    let monotone_trend = errors
        .windows(2)
        .all(|w| w[1] <= w[0] * 1.10 + f64::EPSILON)
        && errors.last() <= errors.first();

    Ok(SweepTable {
        check: check.name(),
        cells,
        monotone_trend,
    })
}

/// Pathwise norm identity plus a weak distributional proxy for escape to
/// infinity: the reflected path's norm equals the free path's norm exactly,
/// and over long horizons most paths grow between `T/2` and `T`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TransienceReport {
    pub n_paths: usize,
    pub horizon: f64,
    /// Largest pathwise deviation of `‖π(Θ)‖` from `‖Θ‖`.
    pub max_norm_deviation: f64,
    /// Fraction of paths with `‖π(Θ_T)‖ > ‖π(Θ_{T/2})‖`.
    pub growth_fraction: f64,
    pub mean_final_norm: f64,
    /// Quantiles (10%, 50%, 90%) of `min_{[T/2,T]} ‖π‖ / ‖π_{T/2}‖`.
    pub min_ratio_quantiles: [f64; 3],
}

/// Runs the transience proxy on a rank ≥ 2 system.
pub fn transience_check(
    rs: &RootSystem,
    cfg: &PathConfig,
    n_paths: usize,
) -> Result<TransienceReport, AnalysisError> {
    if rs.rank < 2 {
        return Err(AnalysisError::BadInput(format!(
            "transience proxy needs rank >= 2, got {}",
            rs.rank
        )));
    }
    cfg.validate_for(rs)?;

    struct PerPath {
        norm_dev: f64,
        grew: bool,
        final_norm: f64,
        min_ratio: f64,
    }
    let results: Vec<Result<PerPath, SimError>> = run_ensemble(n_paths, cfg.seed, |seed, _| {
        let raw = simulate_brownian(&cfg_with_seed(cfg, seed), rs.rank)?;
        let path = reflect_path(rs, &raw)?;
        let n = path.n_steps();
        let half = n / 2;
        let norm_at = |k: usize| path.pi_theta.column(k).norm();
        let mid = norm_at(half);
        let fin = norm_at(n);
        let mut min_norm = f64::INFINITY;
        for k in half..=n {
            min_norm = min_norm.min(norm_at(k));
        }
        Ok(PerPath {
            norm_dev: path.max_norm_deviation(),
            grew: fin > mid,
            final_norm: fin,
            min_ratio: if mid > 1e-12 { min_norm / mid } else { 0.0 },
        })
    });
    let per_path: Vec<PerPath> = results.into_iter().collect::<Result<_, _>>()?;

    let n = per_path.len() as f64;
    let max_norm_deviation = per_path.iter().map(|p| p.norm_dev).fold(0.0, f64::max);
    let growth_fraction = per_path.iter().filter(|p| p.grew).count() as f64 / n;
    let mean_final_norm = per_path.iter().map(|p| p.final_norm).sum::<f64>() / n;
    let mut ratios: Vec<f64> = per_path.iter().map(|p| p.min_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let q = |p: f64| ratios[((p * (ratios.len() - 1) as f64).round() as usize).min(ratios.len() - 1)];

    Ok(TransienceReport {
        n_paths,
        horizon: cfg.horizon,
        max_norm_deviation,
        growth_fraction,
        mean_final_norm,
        min_ratio_quantiles: [q(0.1), q(0.5), q(0.9)],
    })
}

fn cfg_with_seed(cfg: &PathConfig, seed: u64) -> PathConfig {
    PathConfig {
        dt: cfg.dt,
        horizon: cfg.horizon,
        seed,
        start: DVector::from(cfg.start.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = vec![0.3, -1.2, 4.5, 0.0, 2.2];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_supports_is_one() {
        let a = vec![0.0, 1.0, 2.0];
        let b = vec![10.0, 11.0, 12.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        assert_eq!(ks_two_sample(&b, &a), 1.0);
    }

    #[test]
    fn ks_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..700).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.1).collect();
        assert_eq!(ks_two_sample(&a, &b), ks_two_sample(&b, &a));
    }

    #[test]
    fn ks_null_calibration() {
        // Two same-law samples stay below the 5% critical value about 95%
        // of the time; with fixed seeds the tally is deterministic.
        let n = 10_000;
        let crit = ks_critical_5pct(n, n);
        let mut below = 0;
        let reruns = 40;
        for seed in 0..reruns {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            if ks_two_sample(&a, &b) < crit {
                below += 1;
            }
        }
        assert!(below >= 36, "only {below}/{reruns} below the critical value");
    }

    #[test]
    fn stat_report_pass_is_recomputable() {
        let r = StatReport::new("x", 10, 1.02, 0.01, 1.0, 0.05);
        assert!(r.pass && r.recompute_pass());
        let r = StatReport::new("x", 10, 1.5, 0.01, 1.0, 0.05);
        assert!(!r.pass && !r.recompute_pass());
    }

    #[test]
    fn sweep_needs_three_points() {
        let err = convergence_sweep(
            SweepCheck::DrivingQvError(RootSystemSpec::TypeB(2)),
            &[1e-3, 1e-4],
            5.0,
            0.5,
            4,
            1,
        );
        assert!(matches!(err, Err(AnalysisError::BadInput(_))));
    }

    #[test]
    fn sweep_is_reproducible() {
        let run = || {
            convergence_sweep(
                SweepCheck::DrivingQvError(RootSystemSpec::TypeB(2)),
                &[4e-3, 2e-3, 1e-3],
                5.0,
                0.25,
                20,
                77,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            assert_eq!(ca.report.estimate.to_bits(), cb.report.estimate.to_bits());
        }
    }

    #[test]
    fn transience_rejects_rank_one() {
        let rs = RootSystem::build(RootSystemSpec::Orthogonal(1)).unwrap();
        let cfg = PathConfig::from_origin(1e-2, 10.0, 1, 1);
        assert!(transience_check(&rs, &cfg, 10).is_err());
    }

    #[test]
    fn transience_smoke_on_rank_two() {
        let rs = RootSystem::build(RootSystemSpec::TypeB(2)).unwrap();
        let cfg = PathConfig::from_origin(1e-2, 20.0, 3, 2);
        let report = transience_check(&rs, &cfg, 100).unwrap();
        assert!(report.max_norm_deviation < 1e-8);
        assert!(report.growth_fraction > 0.4, "{report:?}");
        // Free Gaussian endpoint norm: Rayleigh mean √(πT/2) in rank 2.
        let oracle = (std::f64::consts::PI * cfg.horizon / 2.0).sqrt();
        assert!(
            (report.mean_final_norm - oracle).abs() / oracle < 0.2,
            "{report:?} vs oracle {oracle}"
        );
    }
}
