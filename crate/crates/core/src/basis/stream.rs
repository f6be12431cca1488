use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::geometry::{Mat2, Tensor3, Vec2};
use crate::quadrature::QuadratureRule;

/// One-dimensional profile φ_p used in the product stream functions
/// ψ_{pq}(y) = φ_p(y¹) φ_q(y²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StreamFamily {
    /// φ_p(y) = sin²(pπy)
    SinSquared,
    /// φ_p(y) = sin(πy) sin(pπy)
    #[default]
    SinProduct,
}

impl StreamFamily {
    pub fn name(self) -> &'static str {
        match self {
            StreamFamily::SinSquared => "sin_squared",
            StreamFamily::SinProduct => "sin_product",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sin_squared" => Some(StreamFamily::SinSquared),
            "sin_product" => Some(StreamFamily::SinProduct),
            _ => None,
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            StreamFamily::SinSquared => 1,
            StreamFamily::SinProduct => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(StreamFamily::SinSquared),
            2 => Some(StreamFamily::SinProduct),
            _ => None,
        }
    }

    /// (φ, φ', φ'', φ''') at y.
    pub fn profile(self, p: usize, y: f64) -> [f64; 4] {
        let p = p as f64;
        match self {
            StreamFamily::SinSquared => {
                let w = 2.0 * p * PI;
                let s = (p * PI * y).sin();
                [s * s, 0.5 * w * (w * y).sin(), 0.5 * w * w * (w * y).cos(), -0.5 * w * w * w * (w * y).sin()]
            }
            StreamFamily::SinProduct => {
                // ½[cos((p-1)πy) - cos((p+1)πy)]
                let a = (p - 1.0) * PI;
                let b = (p + 1.0) * PI;
                let (sa, ca) = (a * y).sin_cos();
                let (sb, cb) = (b * y).sin_cos();
                [
                    0.5 * (ca - cb),
                    0.5 * (-a * sa + b * sb),
                    0.5 * (-a * a * ca + b * b * cb),
                    0.5 * (a * a * a * sa - b * b * b * sb),
                ]
            }
        }
    }
}

/// Value, gradient (`d[(i, a)] = ∂u^i/∂y^a`) and Hessian (`dd[i][a][b]`) of a
/// reference-frame vector field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: Vec2,
    pub d: Mat2,
    pub dd: Tensor3,
}

impl Jet {
    pub fn zero() -> Self {
        Self {
            v: Vec2::zeros(),
            d: Mat2::zeros(),
            dd: [[[0.0; 2]; 2]; 2],
        }
    }

    pub(crate) const WIDTH: usize = 14;

    pub(crate) fn write(&self, out: &mut [f64]) {
        out[0] = self.v[0];
        out[1] = self.v[1];
        out[2] = self.d[(0, 0)];
        out[3] = self.d[(0, 1)];
        out[4] = self.d[(1, 0)];
        out[5] = self.d[(1, 1)];
        let mut c = 6;
        for i in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    out[c] = self.dd[i][a][b];
                    c += 1;
                }
            }
        }
    }

    pub(crate) fn read(src: &[f64]) -> Self {
        let mut dd = [[[0.0; 2]; 2]; 2];
        let mut c = 6;
        for row in dd.iter_mut() {
            for col in row.iter_mut() {
                for v in col.iter_mut() {
                    *v = src[c];
                    c += 1;
                }
            }
        }
        Self {
            v: Vec2::new(src[0], src[1]),
            d: Mat2::new(src[2], src[3], src[4], src[5]),
            dd,
        }
    }

    /// Σ_p c_p jet_p
    pub fn combine<'a>(terms: impl IntoIterator<Item = (f64, &'a Jet)>) -> Jet {
        let mut out = Jet::zero();
        for (c, j) in terms {
            out.v += c * j.v;
            out.d += c * j.d;
            for i in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        out.dd[i][a][b] += c * j.dd[i][a][b];
                    }
                }
            }
        }
        out
    }
}

/// ẽ = (∂ψ/∂y², −∂ψ/∂y¹) for ψ = φ_p(y¹) φ_q(y²).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamElement {
    pub p: usize,
    pub q: usize,
    pub family: StreamFamily,
}

impl StreamElement {
    pub fn psi(&self, y: Vec2) -> f64 {
        self.family.profile(self.p, y[0])[0] * self.family.profile(self.q, y[1])[0]
    }

    pub fn e_tilde(&self, y: Vec2) -> Vec2 {
        self.jet(y).v
    }

    pub fn jet(&self, y: Vec2) -> Jet {
        let f = self.family.profile(self.p, y[0]);
        let g = self.family.profile(self.q, y[1]);
        let mut dd = [[[0.0; 2]; 2]; 2];
        // e⁰ = f g'
        dd[0][0][0] = f[2] * g[1];
        dd[0][0][1] = f[1] * g[2];
        dd[0][1][0] = f[1] * g[2];
        dd[0][1][1] = f[0] * g[3];
        // e¹ = -f' g
        dd[1][0][0] = -f[3] * g[0];
        dd[1][0][1] = -f[2] * g[1];
        dd[1][1][0] = -f[2] * g[1];
        dd[1][1][1] = -f[1] * g[2];
        Jet {
            v: Vec2::new(f[0] * g[1], -f[1] * g[0]),
            d: Mat2::new(f[1] * g[1], f[0] * g[2], -f[2] * g[0], -f[1] * g[1]),
            dd,
        }
    }
}

/// First `m` stream elements, ordered by p + q and then by p.
pub fn raw_stream_basis(family: StreamFamily, m: usize) -> Vec<StreamElement> {
    let mut out = Vec::with_capacity(m);
    let mut total = 2;
    while out.len() < m {
        for p in 1..total {
            if out.len() == m {
                break;
            }
            out.push(StreamElement { p, q: total - p, family });
        }
        total += 1;
    }
    out
}

/// Jets of the raw elements at every quadrature node, one row per element,
/// `Jet::WIDTH` columns per node.
#[derive(Debug, Clone)]
pub struct RawSamples {
    pub elements: Vec<StreamElement>,
    pub n_nodes: usize,
    pub jets: DMatrix<f64>,
}

impl RawSamples {
    pub fn new(elements: Vec<StreamElement>, quad: &QuadratureRule) -> Self {
        let n_nodes = quad.len();
        let mut jets = DMatrix::zeros(elements.len(), n_nodes * Jet::WIDTH);
        let mut buf = [0.0; Jet::WIDTH];
        for (p, el) in elements.iter().enumerate() {
            for (n, y) in quad.points.iter().enumerate() {
                el.jet(*y).write(&mut buf);
                for (c, v) in buf.iter().enumerate() {
                    jets[(p, n * Jet::WIDTH + c)] = *v;
                }
            }
        }
        Self {
            elements,
            n_nodes,
            jets,
        }
    }

    pub fn m(&self) -> usize {
        self.elements.len()
    }

    pub fn value(&self, p: usize, n: usize) -> Vec2 {
        Vec2::new(self.jets[(p, n * Jet::WIDTH)], self.jets[(p, n * Jet::WIDTH + 1)])
    }
}
