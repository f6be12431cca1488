//! Moving-domain geometry: the map onto the reference square, pointwise
//! metric data, and the transformation of vector fields between frames.

mod field;
mod maps;

pub use field::{divergence_residual, pull_back, pull_back_jet, push_forward, Frame, PhysicalJet, VectorFieldSampler};
pub use maps::{
    DilationMap, DomainMap, FiniteDifferenceMap, IdentityMap, MapKind, PointMap, RotationMap, SharedMap, ShearMap,
    TimeFunction, WaveShearMap,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
/// `t[a][b][c]`, 2×2×2
pub type Tensor3 = [[[f64; 2]; 2]; 2];
/// `t[a][b][c][d]`, 2×2×2×2
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

/// Slack allowed when deciding whether a point lies in the closed unit square.
pub const DOMAIN_SLACK: f64 = 1e-12;

pub fn in_reference_square(y: Vec2) -> bool {
    (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&y[0]) && (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&y[1])
}

#[derive(Debug, Clone, Copy)]
pub struct MetricOptions {
    /// Smallest admissible |det M|.
    pub det_floor: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { det_floor: 1e-8 }
    }
}

/// Metric data of the map at one reference point (y, s).
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub y: Vec2,
    pub s: f64,
    pub m: Mat2,
    pub k: Mat2,
    /// det K = 1 / det M
    pub j: f64,
    /// h^{ij} = Σ_k ∂y^i/∂x^k ∂y^j/∂x^k
    pub h_up: Mat2,
    /// h_{ij} = Σ_k ∂x^k/∂y^i ∂x^k/∂y^j
    pub h_down: Mat2,
    /// `phi[k][i][j] = Φ^k_{ij}`
    pub phi: Tensor3,
    /// `dphi[a][k][i][j] = ∂Φ^k_{ij}/∂y^a`
    pub dphi: Tensor4,
    pub dy_dt: Vec2,
    pub d2x_dsdy: Mat2,
}

impl MetricSample {
    /// `A[(k, l)] = ∂y^k/∂x^l`, i.e. Mᵀ.
    pub fn dy_dx(&self) -> Mat2 {
        self.m.transpose()
    }
}

/// Evaluates every metric quantity of `map` at the reference point (y, s).
pub fn metric_at(map: &dyn DomainMap, y: Vec2, s: f64, opts: &MetricOptions) -> Result<MetricSample> {
    if !in_reference_square(y) {
        return Err(Error::OutOfDomain {
            x0: y[0],
            x1: y[1],
            t: s,
            domain: "reference",
        });
    }
    let x = map.inverse(y, s);
    let m = map.jac_forward(x, s);
    let det_m = m.determinant();
    if !(det_m.abs() >= opts.det_floor) {
        return Err(Error::NonInvertibleJacobian {
            det: det_m,
            floor: opts.det_floor,
            y0: y[0],
            y1: y[1],
            s,
        });
    }
    let k = map.jac_inverse(y, s);
    let h_up = m.transpose() * m;
    let h_down = k.transpose() * k;
    let x2 = map.d2x_dydy(y, s);
    let (phi, dphi) = if map.is_affine() {
        ([[[0.0; 2]; 2]; 2], [[[[0.0; 2]; 2]; 2]; 2])
    } else {
        christoffel_from_second_derivatives(&m, &x2, &map.d3x_dydydy(y, s))
    };
    Ok(MetricSample {
        y,
        s,
        m,
        k,
        j: 1.0 / det_m,
        h_up,
        h_down,
        phi,
        dphi,
        dy_dt: map.dy_dt(y, s),
        d2x_dsdy: map.d2x_dsdy(y, s),
    })
}

/// Metric samples at a fixed list of reference points, one time level.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub s: f64,
    pub samples: Vec<MetricSample>,
}

impl MetricField {
    pub fn sample(map: &dyn DomainMap, points: &[Vec2], s: f64, opts: &MetricOptions) -> Result<Self> {
        let samples = points
            .iter()
            .map(|y| metric_at(map, *y, s, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { s, samples })
    }

    /// J at the first node; J is spatially constant for admissible maps.
    pub fn jacobian(&self) -> f64 {
        self.samples.first().map_or(1.0, |m| m.j)
    }
}

/// Φ^k_{ij} = Σ_l ∂y^k/∂x^l ∂²x^l/∂y^j∂y^i and its spatial gradient.
fn christoffel_from_second_derivatives(m: &Mat2, x2: &Tensor3, x3: &Tensor4) -> (Tensor3, Tensor4) {
    // A = Mᵀ, A[k][l] = ∂y^k/∂x^l
    let a = m.transpose();
    let mut phi = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                phi[k][i][j] = (0..2).map(|l| a[(k, l)] * x2[l][j][i]).sum();
            }
        }
    }
    // ∂_c A = -A (∂_c K) A with (∂_c K)[p][q] = x2[p][q][c]
    let mut dphi = [[[[0.0; 2]; 2]; 2]; 2];
    for c in 0..2 {
        let dk = Mat2::new(x2[0][0][c], x2[0][1][c], x2[1][0][c], x2[1][1][c]);
        let da = -(a * dk * a);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    dphi[c][k][i][j] = (0..2)
                        .map(|l| da[(k, l)] * x2[l][j][i] + a[(k, l)] * x3[l][j][i][c])
                        .sum();
                }
            }
        }
    }
    (phi, dphi)
}

/// Φ through the metric: 2Φ^k_{ij} = Σ_l h^{kl}(∂_j h_{il} + ∂_i h_{jl} − ∂_l h_{ij}).
///
/// Independent of the direct formula used by [`metric_at`]; the two must agree.
pub fn christoffel_from_metric(map: &dyn DomainMap, y: Vec2, s: f64) -> Tensor3 {
    let k = map.jac_inverse(y, s);
    let x2 = map.d2x_dydy(y, s);
    let h_up = (k.transpose() * k)
        .try_inverse()
        .unwrap_or_else(|| Mat2::from_element(f64::NAN));
    // dh[a][i][j] = ∂h_{ij}/∂y^a
    let mut dh = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                dh[a][i][j] = (0..2).map(|p| x2[p][i][a] * k[(p, j)] + k[(p, i)] * x2[p][j][a]).sum();
            }
        }
    }
    let mut phi = [[[0.0; 2]; 2]; 2];
    for kk in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                phi[kk][i][j] = 0.5
                    * (0..2)
                        .map(|l| h_up[(kk, l)] * (dh[j][i][l] + dh[i][j][l] - dh[l][i][j]))
                        .sum::<f64>();
            }
        }
    }
    phi
}

/// Max residual of h^{..}h_{..} = I, det h_{..} = J², h^{..} = MᵀM and the
/// lower-index symmetry of Φ at one sample.
pub fn metric_identity_residual(ms: &MetricSample) -> f64 {
    let id = (ms.h_up * ms.h_down - Mat2::identity()).abs().max();
    let det = (ms.h_down.determinant() - ms.j * ms.j).abs() / ms.j.powi(2).max(1.0);
    let hup = (ms.h_up - ms.m.transpose() * ms.m).abs().max();
    let mut sym: f64 = 0.0;
    for k in 0..2 {
        sym = sym.max((ms.phi[k][0][1] - ms.phi[k][1][0]).abs());
    }
    id.max(det).max(hup).max(sym)
}

/// Residuals of `K Mᵀ = I` and of the four cofactor relations expressing M
/// through K / J at one point.
pub fn inverse_identity_at(map: &dyn DomainMap, y: Vec2, s: f64) -> f64 {
    let x = map.inverse(y, s);
    let m = map.jac_forward(x, s);
    let k = map.jac_inverse(y, s);
    let j = k.determinant();
    let eye = (k * m.transpose() - Mat2::identity()).abs().max();
    let rel = [
        m[(0, 0)] - k[(1, 1)] / j,
        m[(0, 1)] + k[(1, 0)] / j,
        m[(1, 0)] + k[(0, 1)] / j,
        m[(1, 1)] - k[(0, 0)] / j,
    ];
    rel.iter().fold(eye, |acc, r| acc.max(r.abs()))
}

/// Maximum of [`inverse_identity_at`] over `n_samples` uniform points of the
/// reference cylinder.
pub fn inverse_identity_residual(map: &dyn DomainMap, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("inverse_identity_residual needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_end = map.horizon();
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let y = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
        let s = rng.random::<f64>() * t_end;
        let r = inverse_identity_at(map, y, s);
        // NaN must not be swallowed by max
        if !r.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Checks that det M is constant in space at time `s` (relative spread ≤ `tol`).
pub fn check_uniform_jacobian(map: &dyn DomainMap, s: f64, n_samples: usize, seed: u64, tol: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..n_samples.max(2) {
        let y = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
        let d = map.jac_forward(map.inverse(y, s), s).determinant();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let spread = (hi - lo) / hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    if !(spread <= tol) {
        return Err(Error::NonUniformJacobian { spread, tol, s });
    }
    Ok(spread)
}
