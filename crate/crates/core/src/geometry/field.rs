use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{in_reference_square, DomainMap, Mat2, SharedMap, Vec2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Points are x in D(t).
    Physical,
    /// Points are y in the unit square.
    Reference,
}

/// A vector field that can be evaluated at (point, time) from any thread.
#[derive(Clone)]
pub struct VectorFieldSampler {
    frame: Frame,
    eval: Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>,
}

impl fmt::Debug for VectorFieldSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFieldSampler({:?})", self.frame)
    }
}

impl VectorFieldSampler {
    pub fn new(frame: Frame, eval: impl Fn(Vec2, f64) -> Vec2 + Send + Sync + 'static) -> Self {
        Self {
            frame,
            eval: Arc::new(eval),
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn eval(&self, p: Vec2, t: f64) -> Vec2 {
        (self.eval)(p, t)
    }
}

/// Γ̃(y,s) = Γ(L⁻¹(y,s)) M(L⁻¹(y,s)), i.e. Γ̃^j = Σ_k Γ^k ∂y^j/∂x^k.
pub fn push_forward(map: &SharedMap, field: &VectorFieldSampler) -> Result<VectorFieldSampler> {
    if field.frame != Frame::Physical {
        return Err(Error::FrameMismatch {
            expected: Frame::Physical,
            found: field.frame,
        });
    }
    let map = Arc::clone(map);
    let inner = field.clone();
    Ok(VectorFieldSampler::new(Frame::Reference, move |y, s| {
        let x = map.inverse(y, s);
        map.jac_forward(x, s).transpose() * inner.eval(x, s)
    }))
}

/// Γ(x,t) = Γ̃(L(x,t)) M(x,t)⁻¹. Since M⁻¹ = Kᵀ this is Γ = K Γ̃.
pub fn pull_back(map: &SharedMap, field: &VectorFieldSampler) -> Result<VectorFieldSampler> {
    if field.frame != Frame::Reference {
        return Err(Error::FrameMismatch {
            expected: Frame::Reference,
            found: field.frame,
        });
    }
    let map = Arc::clone(map);
    let inner = field.clone();
    Ok(VectorFieldSampler::new(Frame::Physical, move |x, t| {
        let y = map.forward(x, t);
        let m = map.jac_forward(x, t);
        let minv = m.try_inverse().unwrap_or_else(|| Mat2::from_element(f64::NAN));
        minv.transpose() * inner.eval(y, t)
    }))
}

/// Value and gradient of a physical field at one point; `grad[(k, l)] = ∂u^k/∂x^l`.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalJet {
    pub value: Vec2,
    pub grad: Mat2,
}

/// Pulls back a reference jet (ũ, `dref[(i, a)] = ∂ũ^i/∂y^a`) at (y, s) to the
/// physical frame using only K, M and ∂²x/∂y∂y of the map.
pub fn pull_back_jet(map: &dyn DomainMap, y: Vec2, s: f64, value: Vec2, dref: Mat2) -> PhysicalJet {
    let x = map.inverse(y, s);
    let m = map.jac_forward(x, s);
    let k = map.jac_inverse(y, s);
    let x2 = map.d2x_dydy(y, s);
    // ∂u^k/∂y^a = Σ_j ∂²x^k/∂y^j∂y^a ũ^j + K^k_j ∂ũ^j/∂y^a
    let mut du_dy = k * dref;
    for kk in 0..2 {
        for a in 0..2 {
            du_dy[(kk, a)] += (0..2).map(|j| x2[kk][j][a] * value[j]).sum::<f64>();
        }
    }
    // ∂/∂x^l = Σ_a ∂y^a/∂x^l ∂/∂y^a = Σ_a M[l][a] ∂/∂y^a
    PhysicalJet {
        value: k * value,
        grad: du_dy * m.transpose(),
    }
}

/// Max |central-difference divergence| of `field` over `n_samples` interior points at time `t`.
///
/// Sample points are drawn in the reference square at distance ≥ 0.05 from the
/// boundary; physical-frame fields are probed at their images under L⁻¹.
pub fn divergence_residual(
    field: &VectorFieldSampler,
    frame: Frame,
    map: &dyn DomainMap,
    t: f64,
    n_samples: usize,
    fd_step: f64,
) -> Result<f64> {
    const MARGIN: f64 = 0.05;
    if field.frame() != frame {
        return Err(Error::FrameMismatch {
            expected: frame,
            found: field.frame(),
        });
    }
    if !(fd_step > 0.0) || n_samples == 0 {
        return Err(Error::invalid("divergence_residual needs fd_step > 0 and n_samples ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1f);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let y = Vec2::new(
            MARGIN + (1.0 - 2.0 * MARGIN) * rng.random::<f64>(),
            MARGIN + (1.0 - 2.0 * MARGIN) * rng.random::<f64>(),
        );
        let p = match frame {
            Frame::Reference => y,
            Frame::Physical => map.inverse(y, t),
        };
        let mut div = 0.0;
        for i in 0..2 {
            let mut e = Vec2::zeros();
            e[i] = fd_step;
            if frame == Frame::Physical {
                for q in [p + e, p - e] {
                    if !in_reference_square(map.forward(q, t)) {
                        return Err(Error::OutOfDomain {
                            x0: q[0],
                            x1: q[1],
                            t,
                            domain: "physical",
                        });
                    }
                }
            } else if !in_reference_square(p + e) || !in_reference_square(p - e) {
                return Err(Error::OutOfDomain {
                    x0: p[0],
                    x1: p[1],
                    t,
                    domain: "reference",
                });
            }
            div += (field.eval(p + e, t)[i] - field.eval(p - e, t)[i]) / (2.0 * fd_step);
        }
        worst = worst.max(div.abs());
    }
    Ok(worst)
}
