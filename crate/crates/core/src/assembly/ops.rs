//! Pointwise transformed operators on the reference square.

use crate::basis::Jet;
use crate::geometry::{Mat2, MetricSample, Vec2};

/// `out[(i, a)] = ∇_a u^i = ∂_a u^i + Σ_k Φ^i_{ak} u^k`
pub fn covariant_gradient(ms: &MetricSample, jet: &Jet) -> Mat2 {
    let mut out = jet.d;
    for i in 0..2 {
        for a in 0..2 {
            out[(i, a)] += ms.phi[i][a][0] * jet.v[0] + ms.phi[i][a][1] * jet.v[1];
        }
    }
    out
}

/// (F u)^i = Σ_{j,k} h^{jk} ∇_j ∇_k u^i
pub fn apply_f(ms: &MetricSample, jet: &Jet) -> Vec2 {
    let phi = &ms.phi;
    let cov = covariant_gradient(ms, jet);
    let mut out = Vec2::zeros();
    for i in 0..2 {
        let mut acc = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                let h = ms.h_up[(j, k)];
                if h == 0.0 {
                    continue;
                }
                // ∂_j(∇_k u^i)
                let mut t = jet.dd[i][k][j];
                for l in 0..2 {
                    t += ms.dphi[j][i][k][l] * jet.v[l] + phi[i][k][l] * jet.d[(l, j)];
                    t += phi[i][j][l] * cov[(l, k)] - phi[l][j][k] * cov[(i, l)];
                }
                acc += h * t;
            }
        }
        out[i] = acc;
    }
    out
}

/// (G u)^i = Σ_j ∂y^j/∂t ∇_j u^i + Σ_{j,k} ∂y^i/∂x^k ∂²x^k/∂s∂y^j u^j
pub fn apply_g(ms: &MetricSample, jet: &Jet) -> Vec2 {
    let cov = covariant_gradient(ms, jet);
    cov * ms.dy_dt + ms.m.transpose() * ms.d2x_dsdy * jet.v
}

/// N(u, v)^i = Σ_j u^j ∇_j v^i, given the covariant gradient of v.
pub fn apply_n(u: Vec2, cov_v: &Mat2) -> Vec2 {
    cov_v * u
}

/// h_{ij} u^i v^j
pub fn metric_dot(ms: &MetricSample, u: Vec2, v: Vec2) -> f64 {
    u.dot(&(ms.h_down * v))
}

/// h_{ij} h^{kl} ∇_k u^i ∇_l v^j
pub fn metric_grad_dot(ms: &MetricSample, cu: &Mat2, cv: &Mat2) -> f64 {
    (cu.transpose() * ms.h_down * cv).component_mul(&ms.h_up).sum()
}
