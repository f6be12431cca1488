//! Euler–Maruyama integration of the coefficient SDE and reconstruction of
//! the physical velocity.

mod brownian;

pub use brownian::{sample_brownian, BrownianPath};

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::{assemble_tensors, project_samples, GalerkinTensors, SourceField};
use crate::basis::{Jet, MovingBasis, TimeGrid};
use crate::error::{Error, Result};
use crate::geometry::{in_reference_square, pull_back_jet, Frame, Mat2, PhysicalJet, Vec2, VectorFieldSampler};

/// Tensors on every node of a basis grid, stepped with a stride of `stride`
/// fine nodes per step.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub basis: Arc<MovingBasis>,
    pub tensors: Arc<Vec<GalerkinTensors>>,
    pub stride: usize,
    /// The stepping grid.
    pub grid: TimeGrid,
}

impl GalerkinSystem {
    /// Assembles a_jk, a_jkl, f_j, σ_j at every node of the basis grid.
    pub fn assemble(basis: Arc<MovingBasis>, force: &SourceField, noise: &SourceField, convection: bool) -> Result<Self> {
        let tensors = (0..basis.grid.len())
            .into_par_iter()
            .map(|i| {
                let metric = basis.metric(i)?;
                let snap = basis.snapshot(i, &metric);
                let t = assemble_tensors(&snap, &metric, force, noise, &basis.quad)?;
                Ok(if convection { t } else { t.without_convection() })
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = basis.grid;
        Ok(Self {
            basis,
            tensors: Arc::new(tensors),
            stride: 1,
            grid,
        })
    }

    /// The same system stepped `factor` times more coarsely.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.n % factor != 0 {
            return Err(Error::invalid(format!("cannot coarsen {} steps by {factor}", self.grid.n)));
        }
        Ok(Self {
            basis: Arc::clone(&self.basis),
            tensors: Arc::clone(&self.tensors),
            stride: self.stride * factor,
            grid: TimeGrid::new(self.grid.n / factor, self.grid.t_end)?,
        })
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    /// Tensors at stepping node n.
    pub fn at(&self, n: usize) -> &GalerkinTensors {
        &self.tensors[n * self.stride]
    }

    /// Index of stepping node n on the basis grid.
    pub fn basis_node(&self, n: usize) -> usize {
        n * self.stride
    }
}

/// Initial velocity ũ₀.
#[derive(Debug, Clone, Default)]
pub enum InitialCondition {
    #[default]
    Zero,
    /// g(0) given directly.
    Coefficients(Vec<f64>),
    /// amplitude · w̃_index(0), 1-based.
    Mode { index: usize, amplitude: f64 },
    /// curl of amplitude · [y¹(1−y¹) y²(1−y²)]², not in the span of the basis.
    Bubble { amplitude: f64 },
    /// Any reference-frame sampler ũ₀(y).
    Reference(VectorFieldSampler),
}

impl InitialCondition {
    fn bubble(amplitude: f64) -> VectorFieldSampler {
        let b = |s: f64| s * s * (1.0 - s) * (1.0 - s);
        let db = |s: f64| 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        VectorFieldSampler::new(Frame::Reference, move |y: Vec2, _| {
            amplitude * Vec2::new(b(y[0]) * db(y[1]), -db(y[0]) * b(y[1]))
        })
    }

    /// g_j(0) = ⟨ũ₀, w̃_j(0)⟩₀ and the norm of the part of ũ₀ outside the span.
    pub fn project(&self, system: &GalerkinSystem) -> Result<(DVector<f64>, f64)> {
        let m = system.m();
        match self {
            InitialCondition::Zero => Ok((DVector::zeros(m), 0.0)),
            InitialCondition::Coefficients(c) => {
                if c.len() != m {
                    return Err(Error::invalid(format!("initial coefficients have length {}, expected {m}", c.len())));
                }
                Ok((DVector::from_column_slice(c), 0.0))
            }
            InitialCondition::Mode { index, amplitude } => {
                if *index == 0 || *index > m {
                    return Err(Error::invalid(format!("initial mode {index} outside 1..={m}")));
                }
                let mut g = DVector::zeros(m);
                g[index - 1] = *amplitude;
                Ok((g, 0.0))
            }
            InitialCondition::Bubble { amplitude } => Self::project_sampler(&Self::bubble(*amplitude), system),
            InitialCondition::Reference(f) => {
                if f.frame() != Frame::Reference {
                    return Err(Error::FrameMismatch {
                        expected: Frame::Reference,
                        found: f.frame(),
                    });
                }
                Self::project_sampler(f, system)
            }
        }
    }

    fn project_sampler(f: &VectorFieldSampler, system: &GalerkinSystem) -> Result<(DVector<f64>, f64)> {
        let basis = &system.basis;
        let metric = basis.metric(0)?;
        let snap = basis.snapshot(0, &metric);
        let samples: Vec<Vec2> = basis.quad.points.iter().map(|y| f.eval(*y, 0.0)).collect();
        let g = project_samples(&samples, &snap, &metric, &basis.quad);
        let total = crate::assembly::weighted_inner(&samples, &samples, &metric, &basis.quad);
        let remainder = (total - g.norm_squared()).max(0.0).sqrt();
        if remainder > 0.0 {
            log::info!("initial condition has a component of norm {remainder:.3e} outside the basis span");
        }
        Ok((g, remainder))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Abort when Σg² exceeds this factor times (initial energy + forcing budget).
    pub blowup_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { blowup_factor: 1e6 }
    }
}

/// g_{n+1} = g_n + (−a g_n − a(g_n, g_n) + f) Δt + σ ΔW
pub fn em_step(g: &DVector<f64>, tensors: &GalerkinTensors, dw: f64, dt: f64) -> DVector<f64> {
    let mut drift = &tensors.f_vec - &tensors.a_lin * g;
    if tensors.a_tri.amax() != 0.0 {
        drift -= tensors.convective(g);
    }
    let mut out = g + drift * dt;
    if dw != 0.0 {
        out.axpy(dw, &tensors.sigma_vec, 1.0);
    }
    out
}

/// Coefficients g(t_n) on the stepping grid plus the driving path.
#[derive(Debug, Clone)]
pub struct CoefficientTrajectory {
    pub m: usize,
    pub grid: TimeGrid,
    pub g: Vec<DVector<f64>>,
    pub path: BrownianPath,
    /// Norm of the part of ũ₀ discarded by the initial projection.
    pub remainder_norm: f64,
    pub max_abs: f64,
}

impl CoefficientTrajectory {
    pub fn initial(&self) -> &DVector<f64> {
        &self.g[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        self.g.last().expect("trajectory is never empty")
    }
}

/// Integrates the coefficient SDE over the system's stepping grid.
pub fn solve(
    system: &GalerkinSystem,
    ic: &InitialCondition,
    path: &BrownianPath,
    opts: &SolverOptions,
) -> Result<CoefficientTrajectory> {
    let (g0, remainder) = ic.project(system)?;
    solve_from(system, g0, remainder, path, opts)
}

/// As [`solve`], from given initial coefficients.
pub fn solve_from(
    system: &GalerkinSystem,
    g0: DVector<f64>,
    remainder_norm: f64,
    path: &BrownianPath,
    opts: &SolverOptions,
) -> Result<CoefficientTrajectory> {
    let grid = system.grid;
    if path.len() != grid.n {
        return Err(Error::invalid(format!(
            "Brownian path has {} increments, grid has {} steps",
            path.len(),
            grid.n
        )));
    }
    let dt = grid.dt();
    let e0 = g0.norm_squared();
    let mut forcing = 0.0;
    let mut noise = 0.0;
    for n in 0..grid.n {
        forcing += system.at(n).f_vec.norm() * dt;
        noise += system.at(n).sigma_vec.norm_squared() * dt;
    }
    let threshold = opts.blowup_factor * (e0 + forcing * forcing + noise);
    let mut g = Vec::with_capacity(grid.len());
    let mut max_abs = g0.amax();
    g.push(g0);
    for n in 0..grid.n {
        let next = em_step(&g[n], system.at(n), path.increments[n], dt);
        let t = grid.t(n + 1);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: n + 1, t });
        }
        let energy = next.norm_squared();
        if energy > threshold {
            return Err(Error::BlowUp {
                step: n + 1,
                t,
                energy,
                threshold,
            });
        }
        max_abs = max_abs.max(next.amax());
        g.push(next);
    }
    Ok(CoefficientTrajectory {
        m: system.m(),
        grid,
        g,
        path: path.clone(),
        remainder_norm,
        max_abs,
    })
}

/// |ũ_m(t_n)|²_{t_n} = Σ_j g_j(t_n)²
pub fn energy_series(traj: &CoefficientTrajectory) -> Vec<f64> {
    traj.g.iter().map(|g| g.norm_squared()).collect()
}

/// |∇_h ũ_m(t_n)|²_{t_n} = gᵀ S g
pub fn grad_energy_series(system: &GalerkinSystem, traj: &CoefficientTrajectory) -> Vec<f64> {
    traj.g
        .iter()
        .enumerate()
        .map(|(n, g)| g.dot(&(&system.at(n).stiffness * g)))
        .collect()
}

/// Per-step residual of the Itô energy balance:
/// R_n = ΔE + 2|∇u|²Δt − 2(f,u)Δt − 2(σ,u)ΔW − |σ|²Δt.
pub fn energy_residuals(system: &GalerkinSystem, traj: &CoefficientTrajectory) -> Vec<f64> {
    let dt = traj.grid.dt();
    (0..traj.grid.n)
        .map(|n| {
            let t = system.at(n);
            let g = &traj.g[n];
            let de = traj.g[n + 1].norm_squared() - g.norm_squared();
            de + 2.0 * g.dot(&(&t.stiffness * g)) * dt
                - 2.0 * t.f_vec.dot(g) * dt
                - 2.0 * t.sigma_vec.dot(g) * traj.path.increments[n]
                - t.sigma_vec.norm_squared() * dt
        })
        .collect()
}

/// Velocity samples on a regular grid covering D(t_n); `None` outside the domain.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    pub t: f64,
    pub points: Vec<Vec2>,
    pub values: Vec<Option<Vec2>>,
}

/// Evaluates u_m(x, t_n) = K(y) Σ_j g_j w̃_j(y), y = L(x, t_n), as a physical jet.
pub fn physical_jet(system: &GalerkinSystem, g: &DVector<f64>, n: usize, x: Vec2) -> Result<PhysicalJet> {
    let i = system.basis_node(n);
    let t = system.basis.grid.t(i);
    let map = system.basis.map.as_ref();
    let y = map.forward(x, t);
    if !in_reference_square(y) {
        return Err(Error::OutOfDomain {
            x0: x[0],
            x1: x[1],
            t,
            domain: "physical",
        });
    }
    let jets = system.basis.jets_at(i, y);
    let u = Jet::combine(g.iter().copied().zip(jets.iter()));
    Ok(pull_back_jet(map, y, t, u.v, u.d))
}

/// Point evaluation of the reconstructed velocity.
pub fn reconstruct_at(system: &GalerkinSystem, traj: &CoefficientTrajectory, n: usize, x: Vec2) -> Result<Vec2> {
    physical_jet(system, &traj.g[n], n, x).map(|j| j.value)
}

/// Samples u_m(·, t_n) on an `res × res` grid over the bounding box of D(t_n).
pub fn reconstruct(system: &GalerkinSystem, traj: &CoefficientTrajectory, n: usize, res: usize) -> Result<FieldSamples> {
    if n > traj.grid.n {
        return Err(Error::invalid(format!("time index {n} beyond grid of {} steps", traj.grid.n)));
    }
    if res < 2 {
        return Err(Error::invalid("field resolution must be at least 2"));
    }
    let i = system.basis_node(n);
    let t = system.basis.grid.t(i);
    let map = system.basis.map.as_ref();
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    let edge = 64;
    for k in 0..=edge {
        let a = k as f64 / edge as f64;
        for y in [Vec2::new(a, 0.0), Vec2::new(a, 1.0), Vec2::new(0.0, a), Vec2::new(1.0, a)] {
            let x = map.inverse(y, t);
            lo = lo.inf(&x);
            hi = hi.sup(&x);
        }
    }
    let mut points = Vec::with_capacity(res * res);
    let mut values = Vec::with_capacity(res * res);
    for a in 0..res {
        for b in 0..res {
            let x = Vec2::new(
                lo[0] + (hi[0] - lo[0]) * a as f64 / (res - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * b as f64 / (res - 1) as f64,
            );
            points.push(x);
            values.push(match physical_jet(system, &traj.g[n], n, x) {
                Ok(j) => Some(j.value),
                Err(Error::OutOfDomain { .. }) => None,
                Err(e) => return Err(e),
            });
        }
    }
    Ok(FieldSamples { t, points, values })
}

/// Physical gradient of the reconstructed field, for divergence checks.
pub fn reconstruct_gradient(system: &GalerkinSystem, g: &DVector<f64>, n: usize, x: Vec2) -> Result<Mat2> {
    physical_jet(system, g, n, x).map(|j| j.grad)
}
