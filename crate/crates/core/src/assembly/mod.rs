//! Quadrature of the weighted inner products and the Galerkin tensors
//! a_jk(s), a_jkl(s), f_j(s), σ_j(s).

pub mod ops;
mod physical;

pub use physical::{physical_grad_inner, physical_inner, trilinear_b, PhysicalQuadrature};
pub use crate::quadrature::QuadratureRule;

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSnapshot;
use crate::error::{Error, Result};
use crate::geometry::{Frame, Mat2, MetricField, Vec2, VectorFieldSampler};

/// ⟨u, v⟩_s = ∫ h_ij u^i v^j J dy for fields sampled at the quadrature nodes.
pub fn weighted_inner(u: &[Vec2], v: &[Vec2], metric: &MetricField, quad: &QuadratureRule) -> f64 {
    let mut acc = 0.0;
    for n in 0..quad.len() {
        let ms = &metric.samples[n];
        acc += quad.weights[n] * ms.j * ops::metric_dot(ms, u[n], v[n]);
    }
    acc
}

/// ⟨∇_h u, ∇_h v⟩_s = ∫ h_ij h^{kl} ∇_k u^i ∇_l v^j J dy from covariant gradients at the nodes.
pub fn gradient_inner(cu: &[Mat2], cv: &[Mat2], metric: &MetricField, quad: &QuadratureRule) -> f64 {
    let mut acc = 0.0;
    for n in 0..quad.len() {
        let ms = &metric.samples[n];
        acc += quad.weights[n] * ms.j * ops::metric_grad_dot(ms, &cu[n], &cv[n]);
    }
    acc
}

/// F w̃_j, G w̃_j and ∇ w̃_j at every node; index j · n_nodes + n.
#[derive(Debug, Clone)]
pub struct CovariantSamples {
    pub n_nodes: usize,
    pub f: Vec<Vec2>,
    pub g: Vec<Vec2>,
    pub cov: Vec<Mat2>,
}

impl CovariantSamples {
    pub fn field_f(&self, j: usize) -> &[Vec2] {
        &self.f[j * self.n_nodes..(j + 1) * self.n_nodes]
    }
    pub fn field_g(&self, j: usize) -> &[Vec2] {
        &self.g[j * self.n_nodes..(j + 1) * self.n_nodes]
    }
    pub fn field_cov(&self, j: usize) -> &[Mat2] {
        &self.cov[j * self.n_nodes..(j + 1) * self.n_nodes]
    }
}

pub fn covariant_apply(snap: &BasisSnapshot, metric: &MetricField) -> CovariantSamples {
    let nq = snap.n_nodes;
    let mut f = Vec::with_capacity(snap.m * nq);
    let mut g = Vec::with_capacity(snap.m * nq);
    let mut cov = Vec::with_capacity(snap.m * nq);
    for j in 0..snap.m {
        for n in 0..nq {
            let ms = &metric.samples[n];
            let jet = snap.jet(j, n);
            f.push(ops::apply_f(ms, &jet));
            g.push(ops::apply_g(ms, &jet));
            cov.push(*snap.cov_grad(j, n));
        }
    }
    CovariantSamples { n_nodes: nq, f, g, cov }
}

/// Deterministic forcing or noise profile in the reference frame.
#[derive(Debug, Clone, Default)]
pub enum SourceField {
    #[default]
    Zero,
    /// A spatially constant physical vector, pushed forward to the reference frame.
    Constant(Vec2),
    /// amplitude · w̃_index(s), 1-based.
    Mode { index: usize, amplitude: f64 },
    /// Arbitrary reference-frame sampler f̃(y, s).
    Reference(VectorFieldSampler),
}

impl SourceField {
    pub fn is_zero(&self) -> bool {
        match self {
            SourceField::Zero => true,
            SourceField::Constant(c) => *c == Vec2::zeros(),
            SourceField::Mode { amplitude, .. } => *amplitude == 0.0,
            SourceField::Reference(_) => false,
        }
    }

    /// ⟨f̃(s), w̃_j(s)⟩_s for j = 1..m.
    pub fn project(&self, snap: &BasisSnapshot, metric: &MetricField, quad: &QuadratureRule) -> Result<DVector<f64>> {
        let m = snap.m;
        match self {
            SourceField::Zero => Ok(DVector::zeros(m)),
            SourceField::Mode { index, amplitude } => {
                if *index == 0 || *index > m {
                    return Err(Error::invalid(format!("source mode {index} outside 1..={m}")));
                }
                let mut v = DVector::zeros(m);
                v[index - 1] = *amplitude;
                Ok(v)
            }
            SourceField::Constant(c) => {
                let samples: Vec<Vec2> = metric.samples.iter().map(|ms| ms.m.transpose() * c).collect();
                Ok(project_samples(&samples, snap, metric, quad))
            }
            SourceField::Reference(f) => {
                if f.frame() != Frame::Reference {
                    return Err(Error::FrameMismatch {
                        expected: Frame::Reference,
                        found: f.frame(),
                    });
                }
                let samples: Vec<Vec2> = quad.points.iter().map(|y| f.eval(*y, snap.s)).collect();
                Ok(project_samples(&samples, snap, metric, quad))
            }
        }
    }
}

/// Weighted projections of a sampled field onto every basis element.
pub fn project_samples(samples: &[Vec2], snap: &BasisSnapshot, metric: &MetricField, quad: &QuadratureRule) -> DVector<f64> {
    let mut out = DVector::zeros(snap.m);
    for n in 0..snap.n_nodes {
        let ms = &metric.samples[n];
        let l = quad.weights[n] * ms.j * (ms.h_down * samples[n]);
        for j in 0..snap.m {
            out[j] += l.dot(&snap.value(j, n));
        }
    }
    out
}

/// Galerkin tensors at one time node.
#[derive(Debug, Clone)]
pub struct GalerkinTensors {
    pub s: f64,
    pub m: usize,
    /// a_jk
    pub a_lin: DMatrix<f64>,
    /// a_jkl stored as an m × m² matrix, column k·m + l
    pub a_tri: DMatrix<f64>,
    pub f_vec: DVector<f64>,
    pub sigma_vec: DVector<f64>,
    /// ⟨∇_h w̃_k, ∇_h w̃_j⟩_s
    pub stiffness: DMatrix<f64>,
}

impl GalerkinTensors {
    pub fn tri(&self, j: usize, k: usize, l: usize) -> f64 {
        self.a_tri[(j, k * self.m + l)]
    }

    /// Σ_{k,l} a_jkl g_k g_l
    pub fn convective(&self, g: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let mut gg = DVector::zeros(m * m);
        for k in 0..m {
            for l in 0..m {
                gg[k * m + l] = g[k] * g[l];
            }
        }
        &self.a_tri * gg
    }

    /// Σ_{j,k,l} a_jkl g_j g_k g_l
    pub fn neutrality(&self, g: &DVector<f64>) -> f64 {
        g.dot(&self.convective(g))
    }

    /// Replaces a_tri by zero (linear Stokes dynamics).
    pub fn without_convection(mut self) -> Self {
        self.a_tri.fill(0.0);
        self
    }
}

/// Assembles the tensors at the snapshot's time node. The snapshot must carry w̃'.
pub fn assemble_tensors(
    snap: &BasisSnapshot,
    metric: &MetricField,
    force: &SourceField,
    noise: &SourceField,
    quad: &QuadratureRule,
) -> Result<GalerkinTensors> {
    if !snap.has_rates() {
        return Err(Error::invalid("assemble_tensors needs a snapshot with time derivatives"));
    }
    let m = snap.m;
    let nq = snap.n_nodes;
    let ops_samples = covariant_apply(snap, metric);

    // low[j] = W J h w̃_j, rhs[k] = w̃'_k + G w̃_k − F w̃_k
    let mut low = DMatrix::zeros(m, 2 * nq);
    let mut rhs = DMatrix::zeros(m, 2 * nq);
    let mut cov_low = DMatrix::zeros(m, 4 * nq);
    let mut cov_flat = DMatrix::zeros(m, 4 * nq);
    for n in 0..nq {
        let ms = &metric.samples[n];
        let w = quad.weights[n] * ms.j;
        for j in 0..m {
            let l = w * (ms.h_down * snap.value(j, n));
            low[(j, 2 * n)] = l[0];
            low[(j, 2 * n + 1)] = l[1];
            let r = snap.rate(j, n).unwrap_or_default() + ops_samples.g[j * nq + n] - ops_samples.f[j * nq + n];
            rhs[(j, 2 * n)] = r[0];
            rhs[(j, 2 * n + 1)] = r[1];
            let c = snap.cov_grad(j, n);
            let t = w * (ms.h_down * c * ms.h_up);
            for (e, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                cov_low[(j, 4 * n + e)] = t[(a, b)];
                cov_flat[(j, 4 * n + e)] = c[(a, b)];
            }
        }
    }
    let a_lin = &low * rhs.transpose();
    let s = &cov_low * cov_flat.transpose();
    let stiffness = (&s + s.transpose()) * 0.5;

    // v[(n, b), (k, l)] = Σ_c w̃_k^c ∇_c w̃_l^b
    let mut v = DMatrix::zeros(2 * nq, m * m);
    for n in 0..nq {
        for k in 0..m {
            let wk = snap.value(k, n);
            for l in 0..m {
                let nl = snap.cov_grad(l, n) * wk;
                v[(2 * n, k * m + l)] = nl[0];
                v[(2 * n + 1, k * m + l)] = nl[1];
            }
        }
    }
    let a_tri = &low * v;

    Ok(GalerkinTensors {
        s: snap.s,
        m,
        a_lin,
        a_tri,
        f_vec: force.project(snap, metric, quad)?,
        sigma_vec: noise.project(snap, metric, quad)?,
        stiffness,
    })
}

/// CSV dump of a_jk over time, header `s,j,k,value`.
pub fn write_a_lin_csv(out: &mut impl Write, tensors: &[GalerkinTensors]) -> Result<()> {
    writeln!(out, "s,j,k,value")?;
    for t in tensors {
        for j in 0..t.m {
            for k in 0..t.m {
                writeln!(out, "{:.16e},{},{},{:.16e}", t.s, j + 1, k + 1, t.a_lin[(j, k)])?;
            }
        }
    }
    Ok(())
}

/// CSV dump of a_jkl over time, header `s,j,k,l,value`.
pub fn write_a_tri_csv(out: &mut impl Write, tensors: &[GalerkinTensors]) -> Result<()> {
    writeln!(out, "s,j,k,l,value")?;
    for t in tensors {
        for j in 0..t.m {
            for k in 0..t.m {
                for l in 0..t.m {
                    writeln!(out, "{:.16e},{},{},{},{:.16e}", t.s, j + 1, k + 1, l + 1, t.tri(j, k, l))?;
                }
            }
        }
    }
    Ok(())
}
