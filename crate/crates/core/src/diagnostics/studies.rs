use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{batch_means, fit_order, Bound, DiagnosticReport, Setup};
use crate::assembly::{gradient_inner, SourceField};
use crate::basis::{orthonormalize, raw_stream_basis, GramSchmidtOptions, TimeGrid};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, SharedMap, IdentityMap};
use crate::quadrature::QuadratureRule;
use crate::solver::{
    energy_residuals, energy_series, grad_energy_series, sample_brownian, solve_from, BrownianPath, CoefficientTrajectory,
    GalerkinSystem, InitialCondition, SolverOptions,
};

const BATCHES: usize = 10;

fn fine_levels(levels: &[usize]) -> Result<usize> {
    let fine = *levels.iter().max().ok_or_else(|| Error::invalid("no time levels given"))?;
    if let Some(n) = levels.iter().find(|&&n| n == 0 || fine % n != 0) {
        return Err(Error::invalid(format!("time level {n} does not divide the finest level {fine}")));
    }
    Ok(fine)
}

fn run(system: &GalerkinSystem, g0: &DVector<f64>, path: &BrownianPath) -> Result<CoefficientTrajectory> {
    solve_from(system, g0.clone(), 0.0, path, &SolverOptions::default())
}

/// Trajectories of `system` for every seed, paths sampled on `fine` and coarsened.
fn paths_on(system: &GalerkinSystem, fine: &TimeGrid, g0: &DVector<f64>, seeds: &[u64]) -> Result<Vec<CoefficientTrajectory>> {
    let factor = fine.n / system.grid.n;
    seeds
        .par_iter()
        .map(|&s| run(system, g0, &sample_brownian(s, fine).coarsen(factor)?))
        .collect()
}

/// Mean over seeds of |Σ_n R_n| per Δt level and its fitted order in Δt.
///
/// `levels` are step counts over [0, T]; tensors are assembled once on the
/// finest grid and every level is driven by the coarsened fine path.
pub fn energy_budget(setup: &Setup, levels: &[usize], seeds: &[u64]) -> Result<DiagnosticReport> {
    if levels.len() < 2 {
        return Err(Error::invalid("energy_budget needs at least two Δt levels"));
    }
    let fine_n = fine_levels(levels)?;
    let fine = setup.system_with(setup.m, fine_n)?;
    let (g0, _) = setup.ic.project(&fine)?;
    let mut report = DiagnosticReport::new("energy_budget");
    report.params = setup.describe();
    report.seeds = seeds.to_vec();
    let mut dts = Vec::new();
    let mut means = Vec::new();
    for &n in levels {
        let sys = fine.coarsen(fine_n / n)?;
        let trajs = paths_on(&sys, &fine.grid, &g0, seeds)?;
        let cum: Vec<f64> = trajs
            .iter()
            .map(|t| energy_residuals(&sys, t).iter().sum::<f64>().abs())
            .collect();
        let (mean, hw) = batch_means(&cum, BATCHES);
        let dt = sys.grid.dt();
        report.metric(format!("mean_cum_residual[dt={dt:e}]"), mean, Bound::None);
        report.metric(format!("halfwidth[dt={dt:e}]"), hw, Bound::None);
        dts.push(dt);
        means.push(mean);
    }
    let order = if means.iter().all(|&m| m == 0.0) { f64::INFINITY } else { fit_order(&dts, &means) };
    report.engineering("fitted_order", order, Bound::AtLeast(0.9));
    Ok(report)
}

/// Deterministic run with f = σ = 0: the energy must not increase by more
/// than `slack` on any step.
pub fn monotone_decay(setup: &Setup, slack: f64) -> Result<DiagnosticReport> {
    let mut det = setup.clone();
    det.force = SourceField::Zero;
    det.noise = SourceField::Zero;
    let sys = det.system()?;
    let (g0, _) = det.ic.project(&sys)?;
    let traj = run(&sys, &g0, &BrownianPath::zero(&sys.grid))?;
    let e = energy_series(&traj);
    let worst = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut report = DiagnosticReport::new("monotone_decay");
    report.params = det.describe();
    report.metric("initial_energy", e[0], Bound::None);
    report.metric("final_energy", e[e.len() - 1], Bound::None);
    report.metric("max_step_increase", worst, Bound::AtMost(slack));
    Ok(report)
}

/// Ê[sup_t |u_m|²] + Ê[∫|∇u_m|²] for each m on a common set of paths; passes
/// when max/min over m is at most `factor`.
pub fn uniform_bound_mc(setup: &Setup, m_list: &[usize], seeds: &[u64], factor: f64) -> Result<DiagnosticReport> {
    if seeds.len() < 100 {
        return Err(Error::invalid(format!("uniform_bound_mc needs at least 100 paths, got {}", seeds.len())));
    }
    let mut report = DiagnosticReport::new("uniform_bound_mc");
    report.params = setup.describe();
    report.param("m_list", format!("{m_list:?}"));
    report.seeds = seeds.to_vec();
    let mut values = Vec::new();
    for &m in m_list {
        let sys = setup.system_with(m, setup.n_time)?;
        let (g0, _) = setup.ic.project(&sys)?;
        let dt = sys.grid.dt();
        let per_path: Vec<f64> = seeds
            .par_iter()
            .map(|&s| {
                let traj = run(&sys, &g0, &sample_brownian(s, &sys.grid))?;
                let sup = energy_series(&traj).into_iter().fold(0.0, f64::max);
                let grad = grad_energy_series(&sys, &traj);
                let int: f64 = grad[..grad.len() - 1].iter().sum::<f64>() * dt;
                Ok(sup + int)
            })
            .collect::<Result<_>>()?;
        let (mean, hw) = batch_means(&per_path, BATCHES);
        report.metric(format!("bound[m={m}]"), mean, Bound::None);
        report.metric(format!("halfwidth[m={m}]"), hw, Bound::None);
        values.push(mean);
    }
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    report.engineering("max_over_min", hi / lo, Bound::AtMost(factor));
    Ok(report)
}

struct Twin {
    /// |z̃(t_n)|²
    z_sq: Vec<f64>,
    /// ∫₀^{t_n} |∇_h ũ₂|²
    grad_int: Vec<f64>,
}

fn twin_runs(sys: &GalerkinSystem, g0: &DVector<f64>, seed: u64, delta: f64) -> Result<Twin> {
    let path = sample_brownian(seed, &sys.grid);
    let m = sys.m();
    let dir = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let base = run(sys, g0, &path)?;
    let pert = run(sys, &(g0 + dir * delta), &path)?;
    let z_sq = base.g.iter().zip(&pert.g).map(|(a, b)| (b - a).norm_squared()).collect();
    let dt = sys.grid.dt();
    let grad = grad_energy_series(sys, &base);
    let mut grad_int = Vec::with_capacity(grad.len());
    let mut acc = 0.0;
    grad_int.push(0.0);
    for g in &grad[..grad.len() - 1] {
        acc += g * dt;
        grad_int.push(acc);
    }
    Ok(Twin { z_sq, grad_int })
}

/// Fits Ĉ = max_t log(|z̃(t)|²/|z̃(0)|²) / ∫₀ᵗ|∇_h ũ₂|² on one calibration run
/// and inflates it by `margin`. The result is meant to be frozen.
pub fn calibrate_gronwall(setup: &Setup, seed: u64, delta: f64, margin: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid("calibration needs δ > 0"));
    }
    let sys = setup.system()?;
    let (g0, _) = setup.ic.project(&sys)?;
    let tw = twin_runs(&sys, &g0, seed, delta)?;
    let d0 = tw.z_sq[0];
    let mut c: f64 = 0.0;
    for (z, i) in tw.z_sq.iter().zip(&tw.grad_int).skip(1) {
        if *i > 0.0 {
            c = c.max((z / d0).ln() / i);
        }
    }
    Ok(c * margin)
}

/// Twin runs on one path with initial data δ apart, checked against the
/// envelope |z̃(0)|² exp(Ĉ ∫|∇_h ũ₂|²) with a frozen Ĉ.
pub fn uniqueness_gap(setup: &Setup, seed: u64, delta: f64, c_hat: f64) -> Result<DiagnosticReport> {
    let sys = setup.system()?;
    let (g0, _) = setup.ic.project(&sys)?;
    let mut report = DiagnosticReport::new("uniqueness_gap");
    report.params = setup.describe();
    report.param("delta", delta);
    report.param("c_hat", c_hat);
    report.seeds = vec![seed];

    let zero = twin_runs(&sys, &g0, seed, 0.0)?;
    let zmax = zero.z_sq.iter().cloned().fold(0.0, f64::max);
    report.metric("zero_delta_max_gap", zmax, Bound::AtMost(0.0));

    if delta > 0.0 {
        let tw = twin_runs(&sys, &g0, seed, delta)?;
        let d0 = tw.z_sq[0];
        let ratio = tw
            .z_sq
            .iter()
            .zip(&tw.grad_int)
            .map(|(z, i)| z / (d0 * (c_hat * i).exp()))
            .fold(0.0, f64::max);
        report.metric("max_envelope_ratio", ratio, Bound::AtMost(1.0));
        let half = twin_runs(&sys, &g0, seed, 0.5 * delta)?;
        let full_max = tw.z_sq.iter().cloned().fold(0.0, f64::max);
        let half_max = half.z_sq.iter().cloned().fold(0.0, f64::max);
        report.engineering("halving_ratio", full_max / half_max, Bound::Within(3.5, 4.5));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FiniteRankOptions {
    pub m_max: usize,
    pub eps: Vec<f64>,
    pub n_trials: usize,
    pub n_times: usize,
    pub seed: u64,
}

impl Default for FiniteRankOptions {
    fn default() -> Self {
        Self {
            m_max: 32,
            eps: vec![0.1, 0.01],
            n_trials: 1000,
            n_times: 11,
            seed: 0,
        }
    }
}

fn stiffness_at(setup: &Setup, quad: &QuadratureRule, m: usize, s: f64) -> Result<DMatrix<f64>> {
    let snap = orthonormalize(&raw_stream_basis(setup.family, m), &setup.map, s, quad, &GramSchmidtOptions::default())?;
    let metric = crate::geometry::MetricField::sample(setup.map.as_ref(), &quad.points, s, &Default::default())?;
    let cov: Vec<Vec<Mat2>> = (0..m)
        .map(|j| (0..snap.n_nodes).map(|n| *snap.cov_grad(j, n)).collect())
        .collect();
    let mut st = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..=j {
            let v = gradient_inner(&cov[j], &cov[k], &metric, quad);
            st[(j, k)] = v;
            st[(k, j)] = v;
        }
    }
    Ok(st)
}

/// Smallest N with εS − P_N⊥ ⪰ 0, i.e. |v|² ≤ Σ_{j≤N}(v, w_j)² + ε|∇v|² on span{w_1..w_m}.
fn minimal_rank(st: &DMatrix<f64>, eps: f64) -> usize {
    let m = st.nrows();
    let tol = 1e-12 * eps * st.amax();
    (0..=m)
        .find(|&n| {
            let mut a = st * eps;
            for j in n..m {
                a[(j, j)] -= 1.0;
            }
            SymmetricEigen::new(a).eigenvalues.min() >= -tol
        })
        .unwrap_or(m)
}

/// N(ε) such that |v|² ≤ Σ_{j≤N}(v, w_j(t))² + ε|∇v|² holds uniformly over
/// the sampled times, checked on random trial fields in span{w_1..w_{m_max}}.
pub fn finite_rank_inequality(setup: &Setup, opts: &FiniteRankOptions) -> Result<DiagnosticReport> {
    if opts.n_times < 1 {
        return Err(Error::invalid("finite_rank_inequality needs at least one time"));
    }
    let quad = QuadratureRule::new(setup.quad_order)?;
    let m = opts.m_max;
    let times: Vec<f64> = (0..opts.n_times)
        .map(|i| if opts.n_times == 1 { 0.0 } else { setup.t_end * i as f64 / (opts.n_times - 1) as f64 })
        .collect();
    let stiff: Vec<DMatrix<f64>> = times
        .par_iter()
        .map(|&s| stiffness_at(setup, &quad, m, s))
        .collect::<Result<_>>()?;

    let mut report = DiagnosticReport::new("finite_rank_inequality");
    report.params = setup.describe();
    report.param("m_max", m);
    report.param("n_times", opts.n_times);
    report.param("n_trials", opts.n_trials);
    report.seeds = vec![opts.seed];

    let mut ranks = Vec::new();
    for &eps in &opts.eps {
        let per_t: Vec<usize> = stiff.iter().map(|s| minimal_rank(s, eps)).collect();
        let n_eps = *per_t.iter().max().unwrap();
        let spread = n_eps - *per_t.iter().min().unwrap();
        report.metric(format!("N[eps={eps}]"), n_eps as f64, Bound::AtMost((m - 1) as f64));
        report.metric(format!("t_spread[eps={eps}]"), spread as f64, Bound::AtMost(1.0));

        // random mixtures plus every single mode beyond N
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = f64::NEG_INFINITY;
        for st in &stiff {
            let mut trials: Vec<DVector<f64>> = (0..opts.n_trials)
                .map(|_| DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng)))
                .collect();
            for j in n_eps..m {
                let mut e = DVector::zeros(m);
                e[j] = 1.0;
                trials.push(e);
            }
            for c in &trials {
                let tail: f64 = c.rows(n_eps, m - n_eps).norm_squared();
                let grad = c.dot(&(st * c));
                worst = worst.max((tail - eps * grad) / c.norm_squared());
            }
        }
        report.metric(format!("worst_trial_violation[eps={eps}]"), worst, Bound::AtMost(1e-12));
        ranks.push((eps, n_eps));
    }
    for w in ranks.windows(2) {
        let (e0, n0) = w[0];
        let (e1, n1) = w[1];
        // smaller ε needs at least as many modes
        let gap = if e1 < e0 { n1 as f64 - n0 as f64 } else { n0 as f64 - n1 as f64 };
        report.metric(format!("monotone[{e0}->{e1}]"), gap, Bound::AtLeast(0.0));
    }
    Ok(report)
}

/// Ê ∫₀ᵀ |u_m − u_{m'}|² dt for consecutive pairs of nested bases.
pub fn galerkin_cauchy(setup: &Setup, m_list: &[usize], seeds: &[u64]) -> Result<DiagnosticReport> {
    if m_list.len() < 2 || m_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("galerkin_cauchy needs at least two nondecreasing m values"));
    }
    let systems: Vec<GalerkinSystem> = m_list
        .iter()
        .map(|&m| setup.system_with(m, setup.n_time))
        .collect::<Result<_>>()?;
    let g0s: Vec<DVector<f64>> = systems
        .iter()
        .map(|s| setup.ic.project(s).map(|p| p.0))
        .collect::<Result<_>>()?;
    let mut report = DiagnosticReport::new("galerkin_cauchy");
    report.params = setup.describe();
    report.param("m_list", format!("{m_list:?}"));
    report.seeds = seeds.to_vec();
    let grid = systems[0].grid;
    let dt = grid.dt();
    let per_seed: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let path = sample_brownian(seed, &grid);
            let trajs: Vec<CoefficientTrajectory> = systems
                .iter()
                .zip(&g0s)
                .map(|(s, g0)| run(s, g0, &path))
                .collect::<Result<_>>()?;
            Ok(trajs
                .windows(2)
                .map(|w| {
                    let (a, b) = (&w[0], &w[1]);
                    let d: Vec<f64> = a
                        .g
                        .iter()
                        .zip(&b.g)
                        .map(|(ga, gb)| {
                            let head = (gb.rows(0, a.m) - ga).norm_squared();
                            head + gb.rows(a.m, b.m - a.m).norm_squared()
                        })
                        .collect();
                    // trapezoid
                    dt * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut diffs = Vec::new();
    for (p, w) in m_list.windows(2).enumerate() {
        let vals: Vec<f64> = per_seed.iter().map(|v| v[p]).collect();
        let (mean, hw) = batch_means(&vals, BATCHES);
        report.metric(format!("diff[{}-{}]", w[0], w[1]), mean, Bound::None);
        report.metric(format!("halfwidth[{}-{}]", w[0], w[1]), hw, Bound::None);
        diffs.push(mean);
    }
    if diffs.len() >= 2 {
        let worst = diffs.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
        report.metric("max_successive_ratio", worst, Bound::Below(1.0));
    }
    Ok(report)
}

/// Fitted strong order of E|g^{Δt}(T) − g^{ref}(T)| over coupled paths.
pub fn strong_rate(setup: &Setup, levels: &[usize], n_ref: usize, seeds: &[u64]) -> Result<DiagnosticReport> {
    let mut all = levels.to_vec();
    all.push(n_ref);
    let fine_n = fine_levels(&all)?;
    if fine_n != n_ref {
        return Err(Error::invalid("the reference level must be the finest"));
    }
    let fine = setup.system_with(setup.m, n_ref)?;
    let (g0, _) = setup.ic.project(&fine)?;
    let reference: Vec<DVector<f64>> = paths_on(&fine, &fine.grid, &g0, seeds)?
        .into_iter()
        .map(|t| t.last().clone())
        .collect();
    let mut report = DiagnosticReport::new("strong_rate");
    report.params = setup.describe();
    report.param("levels", format!("{levels:?}"));
    report.param("n_ref", n_ref);
    report.seeds = seeds.to_vec();
    let mut dts = Vec::new();
    let mut errs = Vec::new();
    for &n in levels {
        let sys = fine.coarsen(n_ref / n)?;
        let e: Vec<f64> = paths_on(&sys, &fine.grid, &g0, seeds)?
            .iter()
            .zip(&reference)
            .map(|(t, r)| (t.last() - r).norm())
            .collect();
        let (mean, hw) = batch_means(&e, BATCHES);
        let dt = sys.grid.dt();
        report.metric(format!("strong_error[dt={dt:e}]"), mean, Bound::None);
        report.metric(format!("halfwidth[dt={dt:e}]"), hw, Bound::None);
        dts.push(dt);
        errs.push(mean);
    }
    report.engineering("fitted_order", fit_order(&dts, &errs), Bound::AtLeast(0.7));
    Ok(report)
}

/// m = 1 on the fixed square with f = σ = 0: g' = −λg, and the Euler error
/// at T must match −(λ²TΔt/2)e^{−λT} to within `rel_tol`.
pub fn euler_exponential_check(quad_order: usize, t_end: f64, n: usize, rel_tol: f64) -> Result<DiagnosticReport> {
    let map: SharedMap = Arc::new(IdentityMap { horizon: t_end });
    let mut setup = Setup::new(map, 1, t_end, n);
    setup.quad_order = quad_order;
    setup.ic = InitialCondition::Mode { index: 1, amplitude: 1.0 };
    let sys = setup.system()?;
    let lambda = sys.at(0).a_lin[(0, 0)];
    let traj = run(&sys, &DVector::from_element(1, 1.0), &BrownianPath::zero(&sys.grid))?;
    let exact = (-lambda * t_end).exp();
    let observed = traj.last()[0] - exact;
    let dt = sys.grid.dt();
    let predicted = -(lambda * lambda * t_end * dt / 2.0) * exact;
    let mut report = DiagnosticReport::new("euler_exponential");
    report.params = setup.describe();
    report.metric("lambda", lambda, Bound::None);
    report.metric("observed_error", observed, Bound::None);
    report.metric("predicted_error", predicted, Bound::None);
    report.metric("relative_mismatch", (observed / predicted - 1.0).abs(), Bound::AtMost(rel_tol));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DilationMap, TimeFunction};

    fn dilation() -> SharedMap {
        Arc::new(DilationMap {
            r: TimeFunction::affine(1.0, 1.0),
            horizon: 1.0,
        })
    }

    fn small(t_end: f64, n: usize) -> Setup {
        let mut s = Setup::new(dilation(), 3, t_end, n);
        s.quad_order = 12;
        s
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let r = energy_budget(&small(0.1, 20), &[10, 20], &[1, 2]).unwrap();
        assert_eq!(r.value("mean_cum_residual[dt=1e-2]"), Some(0.0));
        assert_eq!(r.value("mean_cum_residual[dt=5e-3]"), Some(0.0));
    }

    #[test]
    fn energy_budget_needs_two_levels() {
        assert!(energy_budget(&small(0.1, 20), &[20], &[1]).is_err());
        assert!(energy_budget(&small(0.1, 20), &[20, 30], &[1]).is_err());
    }

    #[test]
    fn deterministic_decay_order_is_one() {
        let mut s = small(0.1, 40);
        s.ic = InitialCondition::Mode { index: 1, amplitude: 1.0 };
        let r = energy_budget(&s, &[10, 20, 40], &[0]).unwrap();
        let order = r.value("fitted_order").unwrap();
        assert!((order - 1.0).abs() < 0.2, "{order}");
        assert!(monotone_decay(&s, 1e-12).unwrap().pass());
    }

    #[test]
    fn unforced_bound_is_initial_energy_plus_dissipation() {
        let mut s = small(0.1, 20);
        s.ic = InitialCondition::Mode { index: 1, amplitude: 2.0 };
        let seeds: Vec<u64> = (0..100).collect();
        let r = uniform_bound_mc(&s, &[2, 3], &seeds, 2.0).unwrap();
        // sup is attained at t = 0 and every path is the same
        let b = r.value("bound[m=2]").unwrap();
        assert!(b > 4.0);
        assert_eq!(r.value("halfwidth[m=2]"), Some(0.0));
        assert!(uniform_bound_mc(&s, &[2], &seeds[..50], 2.0).is_err());
    }

    #[test]
    fn zero_delta_twins_are_identical() {
        let mut s = small(0.1, 20);
        s.ic = InitialCondition::Mode { index: 1, amplitude: 1.0 };
        s.noise = SourceField::Mode { index: 2, amplitude: 0.5 };
        let r = uniqueness_gap(&s, 4, 0.0, 0.0).unwrap();
        assert_eq!(r.value("zero_delta_max_gap"), Some(0.0));
        assert!(r.pass());
    }

    #[test]
    fn frozen_constant_covers_its_calibration_run() {
        let mut s = small(0.2, 40);
        s.ic = InitialCondition::Mode { index: 1, amplitude: 3.0 };
        s.noise = SourceField::Mode { index: 1, amplitude: 1.0 };
        let c = calibrate_gronwall(&s, 11, 1e-6, 1.0).unwrap();
        let r = uniqueness_gap(&s, 11, 1e-6, c).unwrap();
        assert!(r.value("max_envelope_ratio").unwrap() <= 1.0 + 1e-9);
        let q = r.value("halving_ratio").unwrap();
        assert!((q - 4.0).abs() < 0.01, "{q}");
    }

    #[test]
    fn minimal_rank_of_diagonal_stiffness() {
        let st = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 20.0, 50.0, 200.0]));
        assert_eq!(minimal_rank(&st, 0.1), 1);
        assert_eq!(minimal_rank(&st, 0.01), 3);
        assert_eq!(minimal_rank(&st, 1.0), 0);
    }

    #[test]
    fn finite_rank_on_small_basis() {
        let mut s = small(1.0, 4);
        s.map = Arc::new(IdentityMap { horizon: 1.0 });
        let opts = FiniteRankOptions {
            m_max: 8,
            eps: vec![0.1, 0.01],
            n_trials: 50,
            n_times: 2,
            seed: 0,
        };
        let r = finite_rank_inequality(&s, &opts).unwrap();
        assert!(r.value("worst_trial_violation[eps=0.1]").unwrap() <= 1e-12);
        assert_eq!(r.value("t_spread[eps=0.1]"), Some(0.0));
        assert!(r.value("N[eps=0.01]").unwrap() >= r.value("N[eps=0.1]").unwrap());
    }

    #[test]
    fn identical_bases_have_zero_cauchy_gap() {
        let mut s = small(0.1, 10);
        s.ic = InitialCondition::Bubble { amplitude: 50.0 };
        let r = galerkin_cauchy(&s, &[3, 3], &[1]).unwrap();
        assert_eq!(r.value("diff[3-3]"), Some(0.0));
    }

    #[test]
    fn scalar_euler_error_formula() {
        let r = euler_exponential_check(16, 0.05, 100, 0.1).unwrap();
        assert!(r.pass(), "{}", r.render_text());
    }
}
