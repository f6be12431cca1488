//! Quadrature directly in the physical frame D(t).

use crate::error::Result;
use crate::geometry::{DomainMap, PhysicalJet, Vec2};
use crate::quadrature::QuadratureRule;

/// Nodes x_n = L⁻¹(y_n, t) with weights W_n·|det K|.
#[derive(Debug, Clone)]
pub struct PhysicalQuadrature {
    pub t: f64,
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl PhysicalQuadrature {
    pub fn new(map: &dyn DomainMap, quad: &QuadratureRule, t: f64) -> Result<Self> {
        let mut points = Vec::with_capacity(quad.len());
        let mut weights = Vec::with_capacity(quad.len());
        for (y, w) in quad.points.iter().zip(&quad.weights) {
            points.push(map.inverse(*y, t));
            weights.push(w * map.jac_inverse(*y, t).determinant().abs());
        }
        Ok(Self { t, points, weights })
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// (u, v)_t
pub fn physical_inner(u: impl Fn(Vec2) -> PhysicalJet, v: impl Fn(Vec2) -> PhysicalJet, pq: &PhysicalQuadrature) -> f64 {
    pq.integrate(|x| u(x).value.dot(&v(x).value))
}

/// (∇u, ∇v)_t
pub fn physical_grad_inner(u: impl Fn(Vec2) -> PhysicalJet, v: impl Fn(Vec2) -> PhysicalJet, pq: &PhysicalQuadrature) -> f64 {
    pq.integrate(|x| u(x).grad.component_mul(&v(x).grad).sum())
}

/// b_t(u, v, w) = Σ_{i,j} ∫ u^j ∂_j v^i w^i dx
pub fn trilinear_b(
    u: impl Fn(Vec2) -> PhysicalJet,
    v: impl Fn(Vec2) -> PhysicalJet,
    w: impl Fn(Vec2) -> PhysicalJet,
    pq: &PhysicalQuadrature,
) -> f64 {
    pq.integrate(|x| (v(x).grad * u(x).value).dot(&w(x).value))
}
