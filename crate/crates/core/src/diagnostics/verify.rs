//! Invariant suites behind `verify`: transformation calculus, basis and assembly.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fit_order, Bound, DiagnosticReport, Setup};
use crate::assembly::PhysicalQuadrature;
use crate::error::{Error, Result};
use crate::geometry::{
    check_uniform_jacobian, christoffel_from_metric, divergence_residual, inverse_identity_residual, metric_at,
    metric_identity_residual, pull_back, pull_back_jet, push_forward, Frame, MetricOptions, PhysicalJet, SharedMap, Vec2,
    VectorFieldSampler,
};
use crate::solver::GalerkinSystem;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Identities that hold to rounding for analytic maps.
    pub tol: f64,
    pub fd_steps: Vec<f64>,
    pub min_slope: f64,
    pub gram_tol: f64,
    pub min_antisymmetry_order: f64,
    pub neutrality_tol: f64,
    pub frame_tol: f64,
    pub n_random_g: usize,
    /// Loosen the rounding-level tolerances to 1e-6 for maps whose
    /// derivatives come from finite differences.
    pub relaxed: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 0,
            tol: 1e-10,
            fd_steps: vec![1e-3, 5e-4, 2.5e-4],
            min_slope: 1.8,
            gram_tol: 1e-10,
            min_antisymmetry_order: 1.8,
            neutrality_tol: 1e-8,
            frame_tol: 1e-8,
            n_random_g: 1000,
            relaxed: false,
        }
    }
}

impl VerifyOptions {
    fn loose(&self, tol: f64) -> f64 {
        if self.relaxed {
            tol.max(1e-6)
        } else {
            tol
        }
    }
}

/// ψ = sin(1.3 p¹ + t) cos(0.7 p²) + (p¹)² p² and u = (∂₂ψ, −∂₁ψ).
pub(crate) fn curl_field(frame: Frame) -> VectorFieldSampler {
    VectorFieldSampler::new(frame, |p: Vec2, t: f64| {
        let a = 1.3 * p[0] + t;
        let b = 0.7 * p[1];
        Vec2::new(
            -0.7 * a.sin() * b.sin() + p[0] * p[0],
            -(1.3 * a.cos() * b.cos() + 2.0 * p[0] * p[1]),
        )
    })
}

fn slope(field: &VectorFieldSampler, frame: Frame, map: &SharedMap, t: f64, steps: &[f64], n: usize) -> Result<(f64, f64)> {
    let res = steps
        .iter()
        .map(|&h| divergence_residual(field, frame, map.as_ref(), t, n, h))
        .collect::<Result<Vec<_>>>()?;
    Ok((fit_order(steps, &res), res[res.len() - 1]))
}

/// Inverse-function identities, metric identities, both Christoffel routes,
/// uniform Jacobian and divergence preservation in both directions.
pub fn verify_geometry(map: &SharedMap, opts: &VerifyOptions) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new(format!("verify_geometry_{}", sanitize(&map.name())));
    report.param("map", map.name());
    report.param("n_samples", opts.n_samples);
    report.param("relaxed", opts.relaxed);
    report.seeds = vec![opts.seed];
    let tol = opts.loose(opts.tol);

    report.metric("inverse_identity", inverse_identity_residual(map.as_ref(), opts.n_samples, opts.seed)?, Bound::AtMost(tol));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    let mut metric_worst: f64 = 0.0;
    let mut phi_worst: f64 = 0.0;
    let horizon = map.horizon();
    for _ in 0..opts.n_samples {
        let y = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
        let s = rng.random::<f64>() * horizon;
        let ms = match metric_at(map.as_ref(), y, s, &MetricOptions::default()) {
            Ok(ms) => ms,
            Err(e) if e.is_numerical() => {
                metric_worst = f64::INFINITY;
                continue;
            }
            Err(e) => return Err(e),
        };
        metric_worst = metric_worst.max(nan_to_inf(metric_identity_residual(&ms)));
        let alt = christoffel_from_metric(map.as_ref(), y, s);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    phi_worst = phi_worst.max(nan_to_inf((alt[k][i][j] - ms.phi[k][i][j]).abs()));
                }
            }
        }
    }
    report.metric("metric_identities", metric_worst, Bound::AtMost(tol));
    report.metric("christoffel_two_routes", phi_worst, Bound::AtMost(opts.loose(1e-8)));

    let mut spread: f64 = 0.0;
    for k in 0..=4 {
        let s = horizon * k as f64 / 4.0;
        spread = spread.max(match check_uniform_jacobian(map.as_ref(), s, 200, opts.seed, opts.loose(1e-8)) {
            Ok(v) => v,
            Err(Error::NonUniformJacobian { spread, .. }) => spread,
            Err(e) => return Err(e),
        });
    }
    report.metric("jacobian_spatial_spread", spread, Bound::AtMost(opts.loose(1e-8)));

    let t = 0.5 * horizon;
    let n = opts.n_samples.min(200);
    let fwd = push_forward(map, &curl_field(Frame::Physical))?;
    let (s1, r1) = slope(&fwd, Frame::Reference, map, t, &opts.fd_steps, n)?;
    let back = pull_back(map, &curl_field(Frame::Reference))?;
    let (s2, r2) = slope(&back, Frame::Physical, map, t, &opts.fd_steps, n)?;
    report.metric("divergence_slope_physical_to_reference", s1, Bound::AtLeast(opts.min_slope));
    report.metric("divergence_residual_physical_to_reference", r1, Bound::None);
    report.metric("divergence_slope_reference_to_physical", s2, Bound::AtLeast(opts.min_slope));
    report.metric("divergence_residual_reference_to_physical", r2, Bound::None);
    Ok(report)
}

/// Gram deviation at every node and the order of the antisymmetry residual
/// under halving of Δt.
pub fn verify_basis(setup: &Setup, opts: &VerifyOptions) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new("verify_basis");
    report.params = setup.describe();
    let coarse = setup.basis_with(setup.m, setup.n_time)?;
    let fine = setup.basis_with(setup.m, 2 * setup.n_time)?;
    let mut gram: f64 = 0.0;
    let mut anti_c: f64 = 0.0;
    let mut anti_f: f64 = 0.0;
    for i in 0..coarse.grid.len() {
        let mc = coarse.metric(i)?;
        let sc = coarse.snapshot(i, &mc);
        gram = gram.max(sc.gram_deviation(&mc, &coarse.quad));
        anti_c = anti_c.max(crate::basis::antisymmetry_residual(&sc, &mc, &coarse.quad)?.amax());
        let mf = fine.metric(2 * i)?;
        let sf = fine.snapshot(2 * i, &mf);
        gram = gram.max(sf.gram_deviation(&mf, &fine.quad));
        anti_f = anti_f.max(crate::basis::antisymmetry_residual(&sf, &mf, &fine.quad)?.amax());
    }
    report.metric("gram_deviation", gram, Bound::AtMost(opts.gram_tol));
    report.metric("antisymmetry_coarse", anti_c, Bound::None);
    report.metric("antisymmetry_fine", anti_f, Bound::None);
    // below the rounding floor the residual is exact and has no order
    let order = if anti_c <= 1e-11 { f64::INFINITY } else { (anti_c / anti_f).log2() };
    report.metric("antisymmetry_order", order, Bound::AtLeast(opts.min_antisymmetry_order));
    report.metric("max_coefficient_rate", coarse.max_coefficient_jump(), Bound::None);
    Ok(report)
}

fn sanitize(name: &str) -> String {
    let mapped: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect();
    mapped
        .split('_')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn nan_to_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Physical jets of every basis field at the physical quadrature nodes of stepping node n.
fn physical_basis(system: &GalerkinSystem, n: usize, pq: &PhysicalQuadrature) -> Vec<Vec<PhysicalJet>> {
    let i = system.basis_node(n);
    let map = system.basis.map.as_ref();
    let m = system.m();
    let mut out = vec![Vec::with_capacity(pq.points.len()); m];
    for x in &pq.points {
        let y = map.forward(*x, pq.t);
        for (j, jet) in system.basis.jets_at(i, y).iter().enumerate() {
            out[j].push(pull_back_jet(map, y, pq.t, jet.v, jet.d));
        }
    }
    out
}

/// Convective neutrality on random coefficient vectors at every node and
/// agreement of the reference-frame tensors with physical-frame quadrature.
pub fn verify_assembly(setup: &Setup, opts: &VerifyOptions) -> Result<DiagnosticReport> {
    let system = setup.system()?;
    let mut report = DiagnosticReport::new("verify_assembly");
    report.params = setup.describe();
    report.param("n_random_g", opts.n_random_g);
    report.seeds = vec![opts.seed];
    let m = system.m();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut neutral: f64 = 0.0;
    for t in system.tensors.iter() {
        for _ in 0..opts.n_random_g {
            let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            neutral = neutral.max(t.neutrality(&g).abs() / g.norm().powi(3));
        }
    }
    report.metric("neutrality_relative", neutral, Bound::AtMost(opts.loose(opts.neutrality_tol)));

    let mut frame: f64 = 0.0;
    let n_steps = system.grid.n;
    for n in [0, n_steps / 2, n_steps] {
        let t = system.grid.t(n);
        let pq = PhysicalQuadrature::new(system.basis.map.as_ref(), &system.basis.quad, t)?;
        let phys = physical_basis(&system, n, &pq);
        let tensors = system.at(n);
        for j in 0..m {
            for k in 0..m {
                let mut inner = 0.0;
                let mut grad = 0.0;
                for (q, w) in pq.weights.iter().enumerate() {
                    inner += w * phys[j][q].value.dot(&phys[k][q].value);
                    grad += w * phys[j][q].grad.component_mul(&phys[k][q].grad).sum();
                }
                frame = frame.max((inner - if j == k { 1.0 } else { 0.0 }).abs());
                frame = frame.max((grad - tensors.stiffness[(j, k)]).abs() / tensors.stiffness.amax());
                for l in 0..m {
                    let mut b = 0.0;
                    for (q, w) in pq.weights.iter().enumerate() {
                        b += w * (phys[l][q].grad * phys[k][q].value).dot(&phys[j][q].value);
                    }
                    frame = frame.max((b - tensors.tri(j, k, l)).abs());
                }
            }
        }
    }
    report.metric("frame_consistency", frame, Bound::AtMost(opts.loose(opts.frame_tol)));
    Ok(report)
}
