//! Divergence-free stream-function basis and its time-dependent
//! orthonormalization with respect to the weighted inner product ⟨·,·⟩_s.

mod cache;
mod stream;

pub use cache::{load_coefficients, save_coefficients};
pub use stream::{raw_stream_basis, Jet, RawSamples, StreamElement, StreamFamily};

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::ops;
use crate::error::{Error, Result};
use crate::geometry::{Mat2, MetricField, MetricOptions, SharedMap, Vec2};
use crate::quadrature::QuadratureRule;

/// Uniform grid t_i = i·T/n, i = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n: usize,
    pub t_end: f64,
}

impl TimeGrid {
    pub fn new(n: usize, t_end: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("time grid needs at least 2 intervals, got {n}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::invalid(format!("time horizon must be positive, got {t_end}")));
        }
        Ok(Self { n, t_end })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.n {
            self.t_end
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.t(i))
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GramSchmidtOptions {
    /// Smallest admissible pivot, relative to the norm of the raw element.
    pub pivot_threshold: f64,
    /// Re-orthogonalize a vector when its projections exceed this after one pass.
    pub reorth_tol: f64,
}

impl Default for GramSchmidtOptions {
    fn default() -> Self {
        Self {
            pivot_threshold: 1e-10,
            reorth_tol: 1e-12,
        }
    }
}

/// Weighted Gram matrix ⟨ẽ_p, ẽ_q⟩_s of the raw elements.
pub fn raw_gram(raw: &RawSamples, metric: &MetricField, quad: &QuadratureRule) -> DMatrix<f64> {
    let m = raw.m();
    let nq = raw.n_nodes;
    let mut vals = DMatrix::zeros(m, 2 * nq);
    let mut low = DMatrix::zeros(m, 2 * nq);
    for n in 0..nq {
        let ms = &metric.samples[n];
        let w = quad.weights[n] * ms.j;
        for p in 0..m {
            let v = raw.value(p, n);
            let l = w * (ms.h_down * v);
            vals[(p, 2 * n)] = v[0];
            vals[(p, 2 * n + 1)] = v[1];
            low[(p, 2 * n)] = l[0];
            low[(p, 2 * n + 1)] = l[1];
        }
    }
    let g = &low * vals.transpose();
    // exact symmetry
    (&g + g.transpose()) * 0.5
}

/// Modified Gram–Schmidt in coefficient space. Row j of the result holds the
/// raw-basis coefficients of w̃_j; the matrix is lower-triangular with a
/// positive diagonal.
pub fn gram_schmidt(gram: &DMatrix<f64>, s: f64, opts: &GramSchmidtOptions) -> Result<DMatrix<f64>> {
    let m = gram.nrows();
    let mut r = DMatrix::<f64>::zeros(m, m);
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for p in 0..m {
            if a[p] == 0.0 {
                continue;
            }
            for q in 0..m {
                acc += a[p] * gram[(p, q)] * b[q];
            }
        }
        acc
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        let project = |v: &mut Vec<f64>| {
            for w in rows.iter() {
                let c = inner(v, w);
                for p in 0..=j {
                    v[p] -= c * w[p];
                }
            }
        };
        project(&mut v);
        let norm = inner(&v, &v).max(0.0).sqrt();
        let loss = rows.iter().map(|w| inner(&v, w).abs()).fold(0.0, f64::max) / norm.max(f64::MIN_POSITIVE);
        if loss > opts.reorth_tol {
            project(&mut v);
        }
        let norm = inner(&v, &v).max(0.0).sqrt();
        let pivot = norm / gram[(j, j)].sqrt();
        if !(pivot >= opts.pivot_threshold) {
            return Err(Error::DegenerateBasis {
                index: j,
                pivot,
                threshold: opts.pivot_threshold,
                s,
            });
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        rows.push(v);
    }
    for (j, row) in rows.iter().enumerate() {
        for p in 0..=j {
            r[(j, p)] = row[p];
        }
    }
    Ok(r)
}

/// R'(s) on the grid: central differences inside, one-sided second-order
/// differences at both ends.
pub fn basis_time_derivative(coeffs: &[DMatrix<f64>], dt: f64) -> Result<Vec<DMatrix<f64>>> {
    let n = coeffs.len();
    if n < 3 {
        return Err(Error::invalid("basis_time_derivative needs at least 3 time nodes"));
    }
    let h2 = 2.0 * dt;
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                ((&coeffs[1] - &coeffs[0]) * 4.0 - (&coeffs[2] - &coeffs[0])) / h2
            } else if i == n - 1 {
                ((&coeffs[n - 1] - &coeffs[n - 2]) * 4.0 - (&coeffs[n - 1] - &coeffs[n - 3])) / h2
            } else {
                (&coeffs[i + 1] - &coeffs[i - 1]) / h2
            }
        })
        .collect())
}

/// The orthonormal basis at one time node, sampled at the quadrature nodes.
#[derive(Debug, Clone)]
pub struct BasisSnapshot {
    pub s: f64,
    pub m: usize,
    pub n_nodes: usize,
    /// R(s): row j = raw coefficients of w̃_j
    pub coeffs: DMatrix<f64>,
    pub coeffs_rate: Option<DMatrix<f64>>,
    /// m × (WIDTH · n_nodes) jets of w̃_j
    jets: DMatrix<f64>,
    /// m × (2 · n_nodes) samples of w̃'_j
    rates: Option<DMatrix<f64>>,
    /// ∇_a w̃_j^i, index j · n_nodes + n
    cov: Vec<Mat2>,
}

impl BasisSnapshot {
    pub fn build(
        raw: &RawSamples,
        metric: &MetricField,
        coeffs: DMatrix<f64>,
        coeffs_rate: Option<DMatrix<f64>>,
    ) -> Self {
        let m = coeffs.nrows();
        let nq = raw.n_nodes;
        let jets = &coeffs * &raw.jets;
        let rates = coeffs_rate.as_ref().map(|rr| {
            let mut vals = DMatrix::zeros(raw.m(), 2 * nq);
            for p in 0..raw.m() {
                for n in 0..nq {
                    vals[(p, 2 * n)] = raw.jets[(p, n * Jet::WIDTH)];
                    vals[(p, 2 * n + 1)] = raw.jets[(p, n * Jet::WIDTH + 1)];
                }
            }
            rr * vals
        });
        let mut cov = Vec::with_capacity(m * nq);
        for j in 0..m {
            for n in 0..nq {
                let mut buf = [0.0; Jet::WIDTH];
                for (c, b) in buf.iter_mut().enumerate() {
                    *b = jets[(j, n * Jet::WIDTH + c)];
                }
                cov.push(ops::covariant_gradient(&metric.samples[n], &Jet::read(&buf)));
            }
        }
        Self {
            s: metric.s,
            m,
            n_nodes: nq,
            coeffs,
            coeffs_rate,
            jets,
            rates,
            cov,
        }
    }

    pub fn jet(&self, j: usize, n: usize) -> Jet {
        let start = n * Jet::WIDTH;
        let mut buf = [0.0; Jet::WIDTH];
        for (c, b) in buf.iter_mut().enumerate() {
            *b = self.jets[(j, start + c)];
        }
        Jet::read(&buf)
    }

    pub fn value(&self, j: usize, n: usize) -> Vec2 {
        Vec2::new(self.jets[(j, n * Jet::WIDTH)], self.jets[(j, n * Jet::WIDTH + 1)])
    }

    pub fn cov_grad(&self, j: usize, n: usize) -> &Mat2 {
        &self.cov[j * self.n_nodes + n]
    }

    pub fn rate(&self, j: usize, n: usize) -> Option<Vec2> {
        self.rates
            .as_ref()
            .map(|r| Vec2::new(r[(j, 2 * n)], r[(j, 2 * n + 1)]))
    }

    pub fn has_rates(&self) -> bool {
        self.rates.is_some()
    }

    /// ⟨w̃_i, w̃_j⟩_s from the sampled fields.
    pub fn gram(&self, metric: &MetricField, quad: &QuadratureRule) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.m, self.m);
        for n in 0..self.n_nodes {
            let ms = &metric.samples[n];
            let w = quad.weights[n] * ms.j;
            for i in 0..self.m {
                let li = w * (ms.h_down * self.value(i, n));
                for j in 0..=i {
                    g[(i, j)] += li.dot(&self.value(j, n));
                }
            }
        }
        for i in 0..self.m {
            for j in 0..i {
                g[(j, i)] = g[(i, j)];
            }
        }
        g
    }

    /// max_{i,j} |⟨w̃_i, w̃_j⟩_s − δ_ij|
    pub fn gram_deviation(&self, metric: &MetricField, quad: &QuadratureRule) -> f64 {
        (self.gram(metric, quad) - DMatrix::identity(self.m, self.m)).amax()
    }
}

/// Orthonormalizes `raw` at time `s`; the snapshot carries no time derivative.
pub fn orthonormalize(
    raw: &[StreamElement],
    map: &SharedMap,
    s: f64,
    quad: &QuadratureRule,
    opts: &GramSchmidtOptions,
) -> Result<BasisSnapshot> {
    let samples = RawSamples::new(raw.to_vec(), quad);
    let metric = MetricField::sample(map.as_ref(), &quad.points, s, &MetricOptions::default())?;
    let r = gram_schmidt(&raw_gram(&samples, &metric, quad), s, opts)?;
    Ok(BasisSnapshot::build(&samples, &metric, r, None))
}

/// Entry (i,j) = ⟨w̃'_i + G w̃_i, w̃_j⟩_s + ⟨w̃'_j + G w̃_j, w̃_i⟩_s, which vanishes exactly.
pub fn antisymmetry_residual(snap: &BasisSnapshot, metric: &MetricField, quad: &QuadratureRule) -> Result<DMatrix<f64>> {
    if !snap.has_rates() {
        return Err(Error::invalid("antisymmetry_residual needs a snapshot with time derivatives"));
    }
    let m = snap.m;
    let mut b = DMatrix::zeros(m, m);
    for n in 0..snap.n_nodes {
        let ms = &metric.samples[n];
        let w = quad.weights[n] * ms.j;
        let lhs: Vec<Vec2> = (0..m)
            .map(|i| snap.rate(i, n).unwrap_or_default() + ops::apply_g(ms, &snap.jet(i, n)))
            .collect();
        for i in 0..m {
            let li = w * (ms.h_down * lhs[i]);
            for j in 0..m {
                b[(i, j)] += li.dot(&snap.value(j, n));
            }
        }
    }
    Ok(&b + b.transpose())
}

/// The orthonormal basis on a whole time grid.
#[derive(Debug, Clone)]
pub struct MovingBasis {
    pub map: SharedMap,
    pub family: StreamFamily,
    pub grid: TimeGrid,
    pub quad: Arc<QuadratureRule>,
    pub metric_opts: MetricOptions,
    pub raw: Arc<RawSamples>,
    /// R(t_i)
    pub coeffs: Vec<DMatrix<f64>>,
    /// R'(t_i)
    pub rates: Vec<DMatrix<f64>>,
}

impl MovingBasis {
    pub fn build(
        map: SharedMap,
        family: StreamFamily,
        m: usize,
        grid: TimeGrid,
        quad: Arc<QuadratureRule>,
        opts: &GramSchmidtOptions,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("basis.m must be at least 1"));
        }
        let raw = Arc::new(RawSamples::new(raw_stream_basis(family, m), &quad));
        let metric_opts = MetricOptions::default();
        let coeffs = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let s = grid.t(i);
                let metric = MetricField::sample(map.as_ref(), &quad.points, s, &metric_opts)?;
                gram_schmidt(&raw_gram(&raw, &metric, &quad), s, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_coefficients(map, family, grid, quad, raw, coeffs)
    }

    pub(crate) fn from_coefficients(
        map: SharedMap,
        family: StreamFamily,
        grid: TimeGrid,
        quad: Arc<QuadratureRule>,
        raw: Arc<RawSamples>,
        coeffs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let rates = basis_time_derivative(&coeffs, grid.dt())?;
        Ok(Self {
            map,
            family,
            grid,
            quad,
            metric_opts: MetricOptions::default(),
            raw,
            coeffs,
            rates,
        })
    }

    pub fn m(&self) -> usize {
        self.raw.m()
    }

    pub fn metric(&self, i: usize) -> Result<MetricField> {
        MetricField::sample(self.map.as_ref(), &self.quad.points, self.grid.t(i), &self.metric_opts)
    }

    pub fn snapshot(&self, i: usize, metric: &MetricField) -> BasisSnapshot {
        BasisSnapshot::build(&self.raw, metric, self.coeffs[i].clone(), Some(self.rates[i].clone()))
    }

    /// Jets of w̃_1..w̃_m at an arbitrary reference point y at grid node i.
    pub fn jets_at(&self, i: usize, y: Vec2) -> Vec<Jet> {
        let raw: Vec<Jet> = self.raw.elements.iter().map(|e| e.jet(y)).collect();
        let r = &self.coeffs[i];
        (0..self.m())
            .map(|j| Jet::combine((0..=j).map(|p| (r[(j, p)], &raw[p]))))
            .collect()
    }

    /// max_i ‖R(t_{i+1}) − R(t_i)‖ / Δt; bounded iff the selection is smooth in time.
    pub fn max_coefficient_jump(&self) -> f64 {
        self.coeffs
            .windows(2)
            .map(|w| (&w[1] - &w[0]).amax() / self.grid.dt())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DilationMap, IdentityMap, TimeFunction, WaveShearMap};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn quad() -> Arc<QuadratureRule> {
        Arc::new(QuadratureRule::new(24).unwrap())
    }

    fn dilation() -> SharedMap {
        Arc::new(DilationMap {
            r: TimeFunction::affine(1.0, 1.0),
            horizon: 1.0,
        })
    }

    #[test]
    fn identity_normalization_of_first_mode() {
        let map: SharedMap = Arc::new(IdentityMap { horizon: 1.0 });
        let raw = raw_stream_basis(StreamFamily::SinProduct, 1);
        let snap = orthonormalize(&raw, &map, 0.0, &quad(), &GramSchmidtOptions::default()).unwrap();
        assert_abs_diff_eq!(snap.coeffs[(0, 0)], (3.0 * PI * PI / 8.0).powf(-0.5), epsilon = 1e-13);
        assert_abs_diff_eq!(snap.coeffs[(0, 0)], 0.5198, epsilon = 1e-4);
    }

    #[test]
    fn dilation_normalization_of_first_mode() {
        let raw = raw_stream_basis(StreamFamily::SinProduct, 1);
        let snap = orthonormalize(&raw, &dilation(), 1.0, &quad(), &GramSchmidtOptions::default()).unwrap();
        assert_abs_diff_eq!(snap.coeffs[(0, 0)], (6.0 * PI * PI).powf(-0.5), epsilon = 1e-13);
    }

    #[test]
    fn dilation_rate_of_first_mode() {
        let grid = TimeGrid::new(100, 1.0).unwrap();
        let b = MovingBasis::build(dilation(), StreamFamily::SinProduct, 1, grid, quad(), &Default::default()).unwrap();
        // R₁₁(s) = r(s)^{-2} (3π²/8)^{-1/2}, so R₁₁'(1) = -2 ṙ r^{-3} (3π²/8)^{-1/2} = -(6π²)^{-1/2}
        assert_abs_diff_eq!(b.rates[100][(0, 0)], -(6.0 * PI * PI).powf(-0.5), epsilon = 1e-4);
        assert_abs_diff_eq!(b.rates[50][(0, 0)], -2.0 * 1.5f64.powi(-3) * (3.0 * PI * PI / 8.0).powf(-0.5), epsilon = 1e-4);
    }

    #[test]
    fn identity_map_rates_vanish() {
        let map: SharedMap = Arc::new(IdentityMap { horizon: 1.0 });
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let b = MovingBasis::build(map, StreamFamily::SinProduct, 6, grid, quad(), &Default::default()).unwrap();
        assert!(b.rates.iter().all(|r| r.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gram_is_identity_on_wave_shear() {
        let map: SharedMap = Arc::new(WaveShearMap {
            alpha: TimeFunction::affine(0.0, 0.2),
            horizon: 1.0,
        });
        let q = quad();
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let b = MovingBasis::build(map, StreamFamily::SinProduct, 12, grid, q.clone(), &Default::default()).unwrap();
        for i in 0..grid.len() {
            let metric = b.metric(i).unwrap();
            let snap = b.snapshot(i, &metric);
            assert!(snap.gram_deviation(&metric, &q) < 1e-12);
            for j in 0..snap.m {
                assert!(snap.coeffs[(j, j)] > 0.0);
                for p in j + 1..snap.m {
                    assert_eq!(snap.coeffs[(j, p)], 0.0);
                }
            }
        }
    }

    #[test]
    fn nested_bases_share_leading_modes() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let small = MovingBasis::build(dilation(), StreamFamily::SinProduct, 4, grid, quad(), &Default::default()).unwrap();
        let big = MovingBasis::build(dilation(), StreamFamily::SinProduct, 8, grid, quad(), &Default::default()).unwrap();
        let diff = (&small.coeffs[3] - big.coeffs[3].view((0, 0), (4, 4))).amax();
        assert!(diff < 1e-13);
    }

    #[test]
    fn dependent_elements_are_rejected() {
        let mut g = DMatrix::identity(3, 3);
        g[(2, 2)] = 1.0;
        g[(1, 2)] = 1.0;
        g[(2, 1)] = 1.0;
        g[(1, 1)] = 1.0;
        assert!(matches!(
            gram_schmidt(&g, 0.0, &GramSchmidtOptions::default()),
            Err(Error::DegenerateBasis { index: 2, .. })
        ));
    }

    #[test]
    fn antisymmetry_vanishes_on_identity() {
        let map: SharedMap = Arc::new(IdentityMap { horizon: 1.0 });
        let q = quad();
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let b = MovingBasis::build(map, StreamFamily::SinProduct, 4, grid, q.clone(), &Default::default()).unwrap();
        let metric = b.metric(2).unwrap();
        let res = antisymmetry_residual(&b.snapshot(2, &metric), &metric, &q).unwrap();
        assert_eq!(res.amax(), 0.0);
    }

    #[test]
    fn antisymmetry_converges_at_second_order() {
        let q = quad();
        let mut prev = None;
        for n in [20, 40] {
            let grid = TimeGrid::new(n, 1.0).unwrap();
            let b = MovingBasis::build(dilation(), StreamFamily::SinProduct, 4, grid, q.clone(), &Default::default()).unwrap();
            let mut worst: f64 = 0.0;
            for i in [0, n / 2, n] {
                let metric = b.metric(i).unwrap();
                worst = worst.max(antisymmetry_residual(&b.snapshot(i, &metric), &metric, &q).unwrap().amax());
            }
            if let Some(p) = prev {
                let ratio: f64 = p / worst;
                assert!(ratio > 3.5, "ratio {ratio}");
            }
            prev = Some(worst);
        }
    }

    #[test]
    fn rates_match_point_evaluation() {
        let grid = TimeGrid::new(10, 1.0).unwrap();
        let b = MovingBasis::build(dilation(), StreamFamily::SinProduct, 3, grid, quad(), &Default::default()).unwrap();
        let metric = b.metric(5).unwrap();
        let snap = b.snapshot(5, &metric);
        let y = b.quad.points[17];
        let jets = b.jets_at(5, y);
        for j in 0..3 {
            assert_abs_diff_eq!(jets[j].v, snap.value(j, 17), epsilon = 1e-13);
            assert_abs_diff_eq!(jets[j].d, snap.jet(j, 17).d, epsilon = 1e-12);
        }
    }
}
