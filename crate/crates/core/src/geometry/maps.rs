//! Level-preserving maps from the physical domain D(t) onto the fixed unit square.
//!
//! Index conventions used throughout the crate:
//!
//! * `M[(k, j)] = ∂y^j/∂x^k` (forward Jacobian, rows indexed by the physical coordinate)
//! * `K[(l, i)] = ∂x^l/∂y^i` (inverse Jacobian), so that `K Mᵀ = I`
//! * `d2x[l][i][j] = ∂²x^l/∂y^i∂y^j`
//! * `d3x[l][i][j][k] = ∂³x^l/∂y^i∂y^j∂y^k`
//! * `d2x_dsdy[(k, j)] = ∂²x^k/∂s∂y^j` (time derivative at fixed y)
//! * `dy_dt[j] = ∂y^j/∂t` (time derivative at fixed x)

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{Mat2, Tensor3, Tensor4, Vec2};

/// A smooth scalar function of time together with its first derivative.
#[derive(Clone)]
pub struct TimeFunction {
    label: String,
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TimeFunction {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            rate: Arc::new(rate),
        }
    }

    /// `a + b t`
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(format!("{a} + {b}*t"), move |t| a + b * t, move |_| b)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c, |_| 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn rate(&self, t: f64) -> f64 {
        (self.rate)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeFunction({})", self.label)
    }
}

/// The diffeomorphism `L(x,t) = (y(x,t), t)` and the derivatives needed to
/// transform the equations onto the reference square.
///
/// Implementations must be pure: every method may be called concurrently.
pub trait DomainMap: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Final time T of the space-time cylinder.
    fn horizon(&self) -> f64;

    fn forward(&self, x: Vec2, t: f64) -> Vec2;

    fn inverse(&self, y: Vec2, s: f64) -> Vec2;

    /// Forward Jacobian M at a physical point.
    fn jac_forward(&self, x: Vec2, t: f64) -> Mat2;

    /// Inverse Jacobian K at a reference point.
    fn jac_inverse(&self, y: Vec2, s: f64) -> Mat2;

    fn d2x_dydy(&self, y: Vec2, s: f64) -> Tensor3;

    /// Third derivatives of the inverse map; only enters through ∂Φ in the
    /// covariant Laplacian. Defaults to central differences of `d2x_dydy`.
    fn d3x_dydydy(&self, y: Vec2, s: f64) -> Tensor4 {
        let h = 1e-4;
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = h;
            let p = self.d2x_dydy(y + e, s);
            let m = self.d2x_dydy(y - e, s);
            for l in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        out[l][i][j][k] = (p[l][i][j] - m[l][i][j]) / (2.0 * h);
                    }
                }
            }
        }
        out
    }

    /// ∂y/∂t along a fixed physical point, evaluated at (y, s).
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2;

    /// ∂²x/∂s∂y at fixed y.
    fn d2x_dsdy(&self, y: Vec2, s: f64) -> Mat2;

    /// True when the map is affine in space for every t, so that Φ ≡ 0.
    fn is_affine(&self) -> bool {
        false
    }
}

pub type SharedMap = Arc<dyn DomainMap>;

#[derive(Debug, Clone)]
pub struct IdentityMap {
    pub horizon: f64,
}

impl DomainMap for IdentityMap {
    fn name(&self) -> String {
        "identity".into()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, _t: f64) -> Vec2 {
        x
    }
    fn inverse(&self, y: Vec2, _s: f64) -> Vec2 {
        y
    }
    fn jac_forward(&self, _x: Vec2, _t: f64) -> Mat2 {
        Mat2::identity()
    }
    fn jac_inverse(&self, _y: Vec2, _s: f64) -> Mat2 {
        Mat2::identity()
    }
    fn d2x_dydy(&self, _y: Vec2, _s: f64) -> Tensor3 {
        [[[0.0; 2]; 2]; 2]
    }
    fn d3x_dydydy(&self, _y: Vec2, _s: f64) -> Tensor4 {
        [[[[0.0; 2]; 2]; 2]; 2]
    }
    fn dy_dt(&self, _y: Vec2, _s: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn d2x_dsdy(&self, _y: Vec2, _s: f64) -> Mat2 {
        Mat2::zeros()
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// `x = r(t) y` with r > 0.
#[derive(Debug, Clone)]
pub struct DilationMap {
    pub r: TimeFunction,
    pub horizon: f64,
}

impl DomainMap for DilationMap {
    fn name(&self) -> String {
        format!("dilation(r={})", self.r.label())
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, t: f64) -> Vec2 {
        x / self.r.value(t)
    }
    fn inverse(&self, y: Vec2, s: f64) -> Vec2 {
        y * self.r.value(s)
    }
    fn jac_forward(&self, _x: Vec2, t: f64) -> Mat2 {
        Mat2::identity() / self.r.value(t)
    }
    fn jac_inverse(&self, _y: Vec2, s: f64) -> Mat2 {
        Mat2::identity() * self.r.value(s)
    }
    fn d2x_dydy(&self, _y: Vec2, _s: f64) -> Tensor3 {
        [[[0.0; 2]; 2]; 2]
    }
    fn d3x_dydydy(&self, _y: Vec2, _s: f64) -> Tensor4 {
        [[[[0.0; 2]; 2]; 2]; 2]
    }
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2 {
        -y * (self.r.rate(s) / self.r.value(s))
    }
    fn d2x_dsdy(&self, _y: Vec2, s: f64) -> Mat2 {
        Mat2::identity() * self.r.rate(s)
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// Rigid rotation `x = R(θ(t)) y` about the origin.
#[derive(Debug, Clone)]
pub struct RotationMap {
    pub theta: TimeFunction,
    pub horizon: f64,
}

fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

impl DomainMap for RotationMap {
    fn name(&self) -> String {
        format!("rotation(theta={})", self.theta.label())
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, t: f64) -> Vec2 {
        rotation(self.theta.value(t)).transpose() * x
    }
    fn inverse(&self, y: Vec2, s: f64) -> Vec2 {
        rotation(self.theta.value(s)) * y
    }
    fn jac_forward(&self, _x: Vec2, t: f64) -> Mat2 {
        // ∂y^j/∂x^k = R[k][j]
        rotation(self.theta.value(t))
    }
    fn jac_inverse(&self, _y: Vec2, s: f64) -> Mat2 {
        rotation(self.theta.value(s))
    }
    fn d2x_dydy(&self, _y: Vec2, _s: f64) -> Tensor3 {
        [[[0.0; 2]; 2]; 2]
    }
    fn d3x_dydydy(&self, _y: Vec2, _s: f64) -> Tensor4 {
        [[[[0.0; 2]; 2]; 2]; 2]
    }
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2 {
        let w = self.theta.rate(s);
        Vec2::new(w * y[1], -w * y[0])
    }
    fn d2x_dsdy(&self, _y: Vec2, s: f64) -> Mat2 {
        let th = self.theta.value(s);
        let w = self.theta.rate(s);
        let (sn, c) = th.sin_cos();
        Mat2::new(-sn, -c, c, -sn) * w
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// Simple shear `x¹ = y¹ + α(t) y²`, `x² = y²`.
#[derive(Debug, Clone)]
pub struct ShearMap {
    pub alpha: TimeFunction,
    pub horizon: f64,
}

impl DomainMap for ShearMap {
    fn name(&self) -> String {
        format!("shear(alpha={})", self.alpha.label())
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, t: f64) -> Vec2 {
        Vec2::new(x[0] - self.alpha.value(t) * x[1], x[1])
    }
    fn inverse(&self, y: Vec2, s: f64) -> Vec2 {
        Vec2::new(y[0] + self.alpha.value(s) * y[1], y[1])
    }
    fn jac_forward(&self, _x: Vec2, t: f64) -> Mat2 {
        Mat2::new(1.0, 0.0, -self.alpha.value(t), 1.0)
    }
    fn jac_inverse(&self, _y: Vec2, s: f64) -> Mat2 {
        Mat2::new(1.0, self.alpha.value(s), 0.0, 1.0)
    }
    fn d2x_dydy(&self, _y: Vec2, _s: f64) -> Tensor3 {
        [[[0.0; 2]; 2]; 2]
    }
    fn d3x_dydydy(&self, _y: Vec2, _s: f64) -> Tensor4 {
        [[[[0.0; 2]; 2]; 2]; 2]
    }
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2 {
        Vec2::new(-self.alpha.rate(s) * y[1], 0.0)
    }
    fn d2x_dsdy(&self, _y: Vec2, s: f64) -> Mat2 {
        Mat2::new(0.0, self.alpha.rate(s), 0.0, 0.0)
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// Area-preserving wavy shear `x¹ = y¹ + α(t) sin(π y²)`, `x² = y²`.
///
/// The only built-in map that is not affine in space, so it is the one that
/// exercises the Christoffel terms.
#[derive(Debug, Clone)]
pub struct WaveShearMap {
    pub alpha: TimeFunction,
    pub horizon: f64,
}

impl DomainMap for WaveShearMap {
    fn name(&self) -> String {
        format!("wave_shear(alpha={})", self.alpha.label())
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, t: f64) -> Vec2 {
        Vec2::new(x[0] - self.alpha.value(t) * (PI * x[1]).sin(), x[1])
    }
    fn inverse(&self, y: Vec2, s: f64) -> Vec2 {
        Vec2::new(y[0] + self.alpha.value(s) * (PI * y[1]).sin(), y[1])
    }
    fn jac_forward(&self, x: Vec2, t: f64) -> Mat2 {
        let a = self.alpha.value(t);
        Mat2::new(1.0, 0.0, -a * PI * (PI * x[1]).cos(), 1.0)
    }
    fn jac_inverse(&self, y: Vec2, s: f64) -> Mat2 {
        let a = self.alpha.value(s);
        Mat2::new(1.0, a * PI * (PI * y[1]).cos(), 0.0, 1.0)
    }
    fn d2x_dydy(&self, y: Vec2, s: f64) -> Tensor3 {
        let a = self.alpha.value(s);
        let mut out = [[[0.0; 2]; 2]; 2];
        out[0][1][1] = -a * PI * PI * (PI * y[1]).sin();
        out
    }
    fn d3x_dydydy(&self, y: Vec2, s: f64) -> Tensor4 {
        let a = self.alpha.value(s);
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        out[0][1][1][1] = -a * PI * PI * PI * (PI * y[1]).cos();
        out
    }
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2 {
        Vec2::new(-self.alpha.rate(s) * (PI * y[1]).sin(), 0.0)
    }
    fn d2x_dsdy(&self, y: Vec2, s: f64) -> Mat2 {
        Mat2::new(0.0, self.alpha.rate(s) * PI * (PI * y[1]).cos(), 0.0, 0.0)
    }
}

pub type PointMap = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;

/// A map given only by its forward and inverse point maps. Every derivative
/// is a central finite difference.
///
/// Accuracy: first derivatives use `step` (default 1e-5, error ~1e-10),
/// second derivatives `10·step` (~1e-8), third derivatives `100·step` (~1e-6).
/// Identity checks on such maps should not be held to the 1e-10 tolerances
/// that the closed-form maps meet.
#[derive(Clone)]
pub struct FiniteDifferenceMap {
    pub label: String,
    pub forward: PointMap,
    pub inverse: PointMap,
    pub step: f64,
    pub horizon: f64,
}

impl fmt::Debug for FiniteDifferenceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceMap")
            .field("label", &self.label)
            .field("step", &self.step)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl FiniteDifferenceMap {
    pub const DEFAULT_STEP: f64 = 1e-5;

    pub fn new(label: impl Into<String>, forward: PointMap, inverse: PointMap, horizon: f64) -> Self {
        let label = label.into();
        log::warn!(
            "map '{label}' has no closed-form derivatives; using central differences (step {:e})",
            Self::DEFAULT_STEP
        );
        Self {
            label,
            forward,
            inverse,
            step: Self::DEFAULT_STEP,
            horizon,
        }
    }

    fn unit(i: usize, h: f64) -> Vec2 {
        let mut e = Vec2::zeros();
        e[i] = h;
        e
    }
}

impl DomainMap for FiniteDifferenceMap {
    fn name(&self) -> String {
        format!("user({})", self.label)
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn forward(&self, x: Vec2, t: f64) -> Vec2 {
        (self.forward)(x, t)
    }
    fn inverse(&self, y: Vec2, s: f64) -> Vec2 {
        (self.inverse)(y, s)
    }
    fn jac_forward(&self, x: Vec2, t: f64) -> Mat2 {
        let h = self.step;
        let mut m = Mat2::zeros();
        for k in 0..2 {
            let e = Self::unit(k, h);
            let d = ((self.forward)(x + e, t) - (self.forward)(x - e, t)) / (2.0 * h);
            for j in 0..2 {
                m[(k, j)] = d[j];
            }
        }
        m
    }
    fn jac_inverse(&self, y: Vec2, s: f64) -> Mat2 {
        let h = self.step;
        let mut k = Mat2::zeros();
        for i in 0..2 {
            let e = Self::unit(i, h);
            let d = ((self.inverse)(y + e, s) - (self.inverse)(y - e, s)) / (2.0 * h);
            for l in 0..2 {
                k[(l, i)] = d[l];
            }
        }
        k
    }
    fn d2x_dydy(&self, y: Vec2, s: f64) -> Tensor3 {
        let h = 10.0 * self.step;
        let f = |p: Vec2| (self.inverse)(p, s);
        let mut out = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in i..2 {
                let d = if i == j {
                    let e = Self::unit(i, h);
                    (f(y + e) - 2.0 * f(y) + f(y - e)) / (h * h)
                } else {
                    let ei = Self::unit(i, h);
                    let ej = Self::unit(j, h);
                    (f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)) / (4.0 * h * h)
                };
                for l in 0..2 {
                    out[l][i][j] = d[l];
                    out[l][j][i] = d[l];
                }
            }
        }
        out
    }
    fn d3x_dydydy(&self, y: Vec2, s: f64) -> Tensor4 {
        let h = 100.0 * self.step;
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for k in 0..2 {
            let e = Self::unit(k, h);
            let p = self.d2x_dydy(y + e, s);
            let m = self.d2x_dydy(y - e, s);
            for l in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        out[l][i][j][k] = (p[l][i][j] - m[l][i][j]) / (2.0 * h);
                    }
                }
            }
        }
        out
    }
    fn dy_dt(&self, y: Vec2, s: f64) -> Vec2 {
        let h = self.step;
        let x = (self.inverse)(y, s);
        ((self.forward)(x, s + h) - (self.forward)(x, s - h)) / (2.0 * h)
    }
    fn d2x_dsdy(&self, y: Vec2, s: f64) -> Mat2 {
        let h = 10.0 * self.step;
        let mut out = Mat2::zeros();
        for j in 0..2 {
            let e = Self::unit(j, h);
            let d = ((self.inverse)(y + e, s + h) - (self.inverse)(y - e, s + h) - (self.inverse)(y + e, s - h)
                + (self.inverse)(y - e, s - h))
                / (4.0 * h * h);
            for k in 0..2 {
                out[(k, j)] = d[k];
            }
        }
        out
    }
}

/// The built-in map families.
#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    Dilation(TimeFunction),
    Rotation(TimeFunction),
    Shear(TimeFunction),
    WaveShear(TimeFunction),
}

impl MapKind {
    pub fn build(self, horizon: f64) -> SharedMap {
        match self {
            MapKind::Identity => Arc::new(IdentityMap { horizon }),
            MapKind::Dilation(r) => Arc::new(DilationMap { r, horizon }),
            MapKind::Rotation(theta) => Arc::new(RotationMap { theta, horizon }),
            MapKind::Shear(alpha) => Arc::new(ShearMap { alpha, horizon }),
            MapKind::WaveShear(alpha) => Arc::new(WaveShearMap { alpha, horizon }),
        }
    }

    /// Every built-in family with its default parameter path.
    pub fn builtins() -> Vec<MapKind> {
        vec![
            MapKind::Identity,
            MapKind::Dilation(TimeFunction::affine(1.0, 1.0)),
            MapKind::Rotation(TimeFunction::affine(0.0, 1.0)),
            MapKind::Shear(TimeFunction::affine(0.0, 0.5)),
            MapKind::WaveShear(TimeFunction::affine(0.0, 0.2)),
        ]
    }
}
