//! Tensor-product Gauss–Legendre rules on the unit square.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const DEFAULT_ORDER: usize = 24;

/// Gauss–Legendre nodes and weights on (-1, 1), by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule of `order` points per axis on (0,1)².
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub order: usize,
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature order must be positive"));
        }
        let (x, w) = gauss_legendre(order);
        let x: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
        let w: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
        let mut points = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for i in 0..order {
            for j in 0..order {
                points.push(Vec2::new(x[i], x[j]));
                weights.push(w[i] * w[j]);
            }
        }
        Ok(Self { order, points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}
