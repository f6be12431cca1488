//! Numerical certification of the energy balance, the uniform bound, the
//! finite-rank inequality, Gronwall uniqueness and convergence of the scheme.

mod studies;
mod verify;

pub use studies::{
    calibrate_gronwall, energy_budget, euler_exponential_check, finite_rank_inequality, galerkin_cauchy,
    monotone_decay, strong_rate, uniform_bound_mc, uniqueness_gap, FiniteRankOptions,
};
pub use verify::{verify_assembly, verify_basis, verify_geometry, VerifyOptions};

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::assembly::SourceField;
use crate::basis::{GramSchmidtOptions, MovingBasis, StreamFamily, TimeGrid};
use crate::error::Result;
use crate::geometry::SharedMap;
use crate::quadrature::QuadratureRule;
use crate::solver::{GalerkinSystem, InitialCondition};

/// Everything needed to build and drive one Galerkin system.
#[derive(Debug, Clone)]
pub struct Setup {
    pub map: SharedMap,
    pub family: StreamFamily,
    pub m: usize,
    pub quad_order: usize,
    pub t_end: f64,
    pub n_time: usize,
    pub ic: InitialCondition,
    pub force: SourceField,
    pub noise: SourceField,
    pub convection: bool,
}

impl Setup {
    pub fn new(map: SharedMap, m: usize, t_end: f64, n_time: usize) -> Self {
        Self {
            map,
            family: StreamFamily::default(),
            m,
            quad_order: crate::quadrature::DEFAULT_ORDER,
            t_end,
            n_time,
            ic: InitialCondition::Zero,
            force: SourceField::Zero,
            noise: SourceField::Zero,
            convection: true,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n_time, self.t_end)
    }

    pub fn basis(&self) -> Result<Arc<MovingBasis>> {
        self.basis_with(self.m, self.n_time)
    }

    pub fn basis_with(&self, m: usize, n_time: usize) -> Result<Arc<MovingBasis>> {
        let quad = Arc::new(QuadratureRule::new(self.quad_order)?);
        let grid = TimeGrid::new(n_time, self.t_end)?;
        Ok(Arc::new(MovingBasis::build(
            Arc::clone(&self.map),
            self.family,
            m,
            grid,
            quad,
            &GramSchmidtOptions::default(),
        )?))
    }

    pub fn system(&self) -> Result<GalerkinSystem> {
        self.system_with(self.m, self.n_time)
    }

    pub fn system_with(&self, m: usize, n_time: usize) -> Result<GalerkinSystem> {
        GalerkinSystem::assemble(self.basis_with(m, n_time)?, &self.force, &self.noise, self.convection)
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("map".into(), self.map.name()),
            ("family".into(), self.family.name().into()),
            ("m".into(), self.m.to_string()),
            ("quad_order".into(), self.quad_order.to_string()),
            ("T".into(), format!("{}", self.t_end)),
            ("n_time".into(), self.n_time.to_string()),
            ("ic".into(), format!("{:?}", self.ic).chars().take(80).collect()),
            ("force".into(), format!("{:?}", self.force).chars().take(80).collect()),
            ("noise".into(), format!("{:?}", self.noise).chars().take(80).collect()),
            ("convection".into(), self.convection.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    /// Strict upper bound.
    Below(f64),
    AtLeast(f64),
    Within(f64, f64),
    /// Reported only.
    None,
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::Below(b) => v < b,
            Bound::AtLeast(b) => v >= b,
            Bound::Within(lo, hi) => v >= lo && v <= hi,
            Bound::None => true,
        }
    }

    fn render(&self) -> String {
        match *self {
            Bound::AtMost(b) => format!("<= {b:e}"),
            Bound::Below(b) => format!("< {b:e}"),
            Bound::AtLeast(b) => format!(">= {b:e}"),
            Bound::Within(lo, hi) => format!("in [{lo:e}, {hi:e}]"),
            Bound::None => "-".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    /// The threshold is an engineering choice rather than a proven constant.
    pub engineering: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticReport {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metric>,
}

impl DiagnosticReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.params.push((key.into(), value.to_string()));
        self
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64, bound: Bound) -> &mut Self {
        self.push(name, value, bound, false)
    }

    pub fn engineering(&mut self, name: impl Into<String>, value: f64, bound: Bound) -> &mut Self {
        self.push(name, value, bound, true)
    }

    fn push(&mut self, name: impl Into<String>, value: f64, bound: Bound, engineering: bool) -> &mut Self {
        let pass = !value.is_nan() && bound.admits(value);
        self.metrics.push(Metric {
            name: name.into(),
            value,
            bound,
            engineering,
            pass,
        });
        self
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|m| m.value)
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.pass).collect()
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} [{}]", self.name, if self.pass() { "PASS" } else { "FAIL" });
        for (k, v) in &self.params {
            let _ = writeln!(s, "   {k} = {v}");
        }
        if !self.seeds.is_empty() {
            let _ = writeln!(s, "   seeds = {} (first {}, last {})", self.seeds.len(), self.seeds[0], self.seeds[self.seeds.len() - 1]);
        }
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "   {} {:<40} {:>14.6e}  {}{}",
                if m.pass { "ok  " } else { "FAIL" },
                m.name,
                m.value,
                m.bound.render(),
                if m.engineering { "  (engineering threshold)" } else { "" }
            );
        }
        s
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "kind,name,value,bound,pass,engineering")?;
        for (k, v) in &self.params {
            writeln!(out, "param,{k},\"{}\",,,", v.replace('"', "'"))?;
        }
        for s in &self.seeds {
            writeln!(out, "seed,,{s},,,")?;
        }
        for m in &self.metrics {
            writeln!(
                out,
                "metric,{},{:.16e},{},{},{}",
                m.name,
                m.value,
                m.bound.render(),
                m.pass,
                m.engineering
            )?;
        }
        Ok(())
    }

    /// Writes `report_<name>.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("report_{}.csv", self.name));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(path)
    }
}

/// Mean and 95% half-width from `batches` batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let b = batches.min(n);
    if b < 2 {
        return (mean, f64::NAN);
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|k| values[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mbar = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mbar).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, 1.96 * (var / b as f64).sqrt())
}

/// Least-squares slope of log(err) against log(h).
pub fn fit_order(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
