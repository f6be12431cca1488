//! Line-oriented `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use tdns_core::assembly::SourceField;
use tdns_core::basis::StreamFamily;
use tdns_core::diagnostics::Setup;
use tdns_core::geometry::{MapKind, SharedMap, TimeFunction, Vec2};
use tdns_core::solver::InitialCondition;

use crate::expr::user_map;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

/// Every accepted key with its default ("" = unset) and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("map.kind", "identity", "identity | dilation | rotation | shear | wave_shear | user"),
    ("map.rate", "", "b in r = 1 + b t, θ = b t, α = b t; built-in default when unset"),
    ("map.forward.y1", "", "user map: y¹(x1, x2, t)"),
    ("map.forward.y2", "", "user map: y²(x1, x2, t)"),
    ("map.inverse.x1", "", "user map: x¹(y1, y2, t)"),
    ("map.inverse.x2", "", "user map: x²(y1, y2, t)"),
    ("basis.family", "sin_product", "sin_product | sin_squared"),
    ("basis.m", "4", "number of basis fields"),
    ("basis.cache", "", "file for the orthonormalization coefficients"),
    ("grid.n_time", "", "number of steps; derived from T/dt when unset"),
    ("solver.dt", "", "time step; derived from T/n_time when unset"),
    ("solver.T", "0.5", "final time"),
    ("solver.seed", "0", "Brownian seed"),
    ("solver.blowup_factor", "1e6", "abort when energy exceeds this multiple of the data budget"),
    ("quad.order", "24", "Gauss–Legendre points per direction"),
    ("ic.kind", "mode", "zero | mode | bubble | coefficients"),
    ("ic.index", "1", "mode index (1-based)"),
    ("ic.amplitude", "1", "amplitude"),
    ("ic.coefficients", "", "comma-separated g(0)"),
    ("force.kind", "zero", "zero | mode | constant"),
    ("force.index", "1", "mode index (1-based)"),
    ("force.amplitude", "0", "mode amplitude"),
    ("force.x1", "0", "constant physical vector, first component"),
    ("force.x2", "0", "constant physical vector, second component"),
    ("noise.kind", "zero", "zero | mode | constant"),
    ("noise.index", "1", "mode index (1-based)"),
    ("noise.amplitude", "0", "mode amplitude"),
    ("noise.x1", "0", "constant physical vector, first component"),
    ("noise.x2", "0", "constant physical vector, second component"),
    ("model.convection", "true", "include the convective term"),
    ("output.dir", "out", "output directory"),
    ("output.field_stride", "0", "write a field snapshot every k steps (0: first and last only)"),
    ("output.field_resolution", "33", "field samples per direction"),
    ("output.tensors", "false", "dump a_jk and a_jkl over time"),
    ("convergence.dt", "4e-3,2e-3,1e-3", "strong-rate step sizes"),
    ("convergence.dt_ref", "5e-4", "reference step size"),
    ("convergence.seeds", "200", "paths for strong_rate"),
    ("convergence.m_list", "4,8,16,32", "nested bases for galerkin_cauchy"),
    ("convergence.cauchy_seeds", "50", "paths for galerkin_cauchy"),
    ("montecarlo.m_list", "4,8,16,32", "basis sizes for uniform_bound_mc"),
    ("montecarlo.paths", "200", "paths per basis size"),
    ("montecarlo.factor", "2", "allowed max/min ratio across m"),
    ("verify.maps", "all", "all: every built-in map plus the configured one; config: configured map only"),
    ("verify.samples", "1000", "random samples for identity checks"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Builtin { kind: String, rate: Option<f64> },
    User { forward: [String; 2], inverse: [String; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub enum IcSpec {
    Zero,
    Mode { index: usize, amplitude: f64 },
    Bubble { amplitude: f64 },
    Coefficients(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Zero,
    Mode { index: usize, amplitude: f64 },
    Constant([f64; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: MapSpec,
    pub family: StreamFamily,
    pub m: usize,
    pub cache: Option<PathBuf>,
    pub n_time: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub blowup_factor: f64,
    pub quad_order: usize,
    pub ic: IcSpec,
    pub force: SourceSpec,
    pub noise: SourceSpec,
    pub convection: bool,
    pub out_dir: PathBuf,
    pub field_stride: usize,
    pub field_resolution: usize,
    pub dump_tensors: bool,
    pub conv_dt: Vec<f64>,
    pub conv_dt_ref: f64,
    pub conv_seeds: usize,
    pub cauchy_m_list: Vec<usize>,
    pub cauchy_seeds: usize,
    pub mc_m_list: Vec<usize>,
    pub mc_paths: usize,
    pub mc_factor: f64,
    pub verify_all_maps: bool,
    pub verify_samples: usize,
    /// Effective key/value pairs, defaults included.
    pub effective: BTreeMap<String, String>,
}

struct Raw {
    values: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str()).filter(|v| !v.is_empty())
    }

    fn with_default(&self, key: &str) -> String {
        self.get(key).map(str::to_string).unwrap_or_else(|| default_of(key).to_string())
    }

    fn err(&self, key: &str, msg: String) -> ConfigError {
        match self.values.get(key) {
            Some((_, line)) => ConfigError::Parse { line: *line, msg },
            None => ConfigError::Validation(msg),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.with_default(key);
        v.parse()
            .map_err(|_| self.err(key, format!("cannot parse `{v}` for `{key}`")))
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("cannot parse `{v}` for `{key}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let v = self.with_default(key);
        v.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| self.err(key, format!("cannot parse `{s}` in list `{key}`")))
            })
            .collect()
    }
}

fn default_of(key: &str) -> &'static str {
    KEYS.iter().find(|k| k.0 == key).map(|k| k.1).unwrap_or("")
}

fn source(raw: &Raw, prefix: &str) -> Result<SourceSpec, ConfigError> {
    let kind = raw.with_default(&format!("{prefix}.kind"));
    match kind.as_str() {
        "zero" => Ok(SourceSpec::Zero),
        "mode" => Ok(SourceSpec::Mode {
            index: raw.parse(&format!("{prefix}.index"))?,
            amplitude: raw.parse(&format!("{prefix}.amplitude"))?,
        }),
        "constant" => Ok(SourceSpec::Constant([
            raw.parse(&format!("{prefix}.x1"))?,
            raw.parse(&format!("{prefix}.x2"))?,
        ])),
        other => Err(raw.err(&format!("{prefix}.kind"), format!("unknown {prefix}.kind `{other}`"))),
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut values = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.iter().any(|k| k.0 == key) {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            });
        }
        if values.insert(key.to_string(), (value.trim().to_string(), line_no)).is_some() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    let raw = Raw { values };

    let kind = raw.with_default("map.kind");
    let map = match kind.as_str() {
        "identity" | "dilation" | "rotation" | "shear" | "wave_shear" => MapSpec::Builtin {
            kind: kind.clone(),
            rate: raw.opt("map.rate")?,
        },
        "user" => {
            let need = |k: &str| {
                raw.get(k)
                    .map(str::to_string)
                    .ok_or_else(|| invalid(format!("map.kind = user requires `{k}`")))
            };
            MapSpec::User {
                forward: [need("map.forward.y1")?, need("map.forward.y2")?],
                inverse: [need("map.inverse.x1")?, need("map.inverse.x2")?],
            }
        }
        other => return Err(raw.err("map.kind", format!("unknown map.kind `{other}`"))),
    };
    let family_name = raw.with_default("basis.family");
    let family = StreamFamily::parse(&family_name)
        .ok_or_else(|| raw.err("basis.family", format!("unknown basis.family `{family_name}`")))?;

    let m: usize = raw.parse("basis.m")?;
    if m < 1 {
        return Err(invalid("basis.m must be at least 1"));
    }
    let quad_order: usize = raw.parse("quad.order")?;
    if quad_order < 8 {
        return Err(invalid(format!("quad.order must be at least 8, got {quad_order}")));
    }
    let t_end: f64 = raw.parse("solver.T")?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid("solver.T must be positive"));
    }
    let dt: Option<f64> = raw.opt("solver.dt")?;
    let n: Option<usize> = raw.opt("grid.n_time")?;
    let (n_time, dt) = match (n, dt) {
        (Some(n), Some(dt)) => {
            if n == 0 || ((dt * n as f64) - t_end).abs() > 1e-9 * t_end {
                return Err(invalid(format!("solver.dt · grid.n_time = {} differs from solver.T = {t_end}", dt * n as f64)));
            }
            (n, t_end / n as f64)
        }
        (Some(n), None) => {
            if n == 0 {
                return Err(invalid("grid.n_time must be positive"));
            }
            (n, t_end / n as f64)
        }
        (None, dt) => {
            let dt = dt.unwrap_or(1e-3);
            let n = steps(t_end, dt).ok_or_else(|| invalid(format!("solver.T = {t_end} is not a multiple of solver.dt = {dt}")))?;
            (n, t_end / n as f64)
        }
    };

    let ic = match raw.with_default("ic.kind").as_str() {
        "zero" => IcSpec::Zero,
        "mode" => IcSpec::Mode {
            index: raw.parse("ic.index")?,
            amplitude: raw.parse("ic.amplitude")?,
        },
        "bubble" => IcSpec::Bubble {
            amplitude: raw.parse("ic.amplitude")?,
        },
        "coefficients" => {
            let c: Vec<f64> = raw.list("ic.coefficients")?;
            if c.len() != m {
                return Err(invalid(format!("ic.coefficients has {} entries, basis.m = {m}", c.len())));
            }
            IcSpec::Coefficients(c)
        }
        other => return Err(raw.err("ic.kind", format!("unknown ic.kind `{other}`"))),
    };
    let force = source(&raw, "force")?;
    let noise = source(&raw, "noise")?;
    for (name, idx) in [
        ("ic.index", if let IcSpec::Mode { index, .. } = ic { Some(index) } else { None }),
        ("force.index", if let SourceSpec::Mode { index, .. } = force { Some(index) } else { None }),
        ("noise.index", if let SourceSpec::Mode { index, .. } = noise { Some(index) } else { None }),
    ] {
        if let Some(i) = idx {
            if i == 0 || i > m {
                return Err(invalid(format!("{name} = {i} outside 1..={m}")));
            }
        }
    }

    let conv_dt: Vec<f64> = raw.list("convergence.dt")?;
    let conv_dt_ref: f64 = raw.parse("convergence.dt_ref")?;
    let verify_maps = raw.with_default("verify.maps");
    let verify_all_maps = match verify_maps.as_str() {
        "all" => true,
        "config" => false,
        other => return Err(raw.err("verify.maps", format!("unknown verify.maps `{other}`"))),
    };

    let mut effective = BTreeMap::new();
    for (k, d, _) in KEYS {
        let v = raw.get(k).map(str::to_string).unwrap_or_else(|| d.to_string());
        effective.insert(k.to_string(), v);
    }
    effective.insert("grid.n_time".into(), n_time.to_string());
    effective.insert("solver.dt".into(), format!("{dt:e}"));

    let cfg = RunConfig {
        map,
        family,
        m,
        cache: raw.get("basis.cache").map(PathBuf::from),
        n_time,
        dt,
        t_end,
        seed: raw.parse("solver.seed")?,
        blowup_factor: raw.parse("solver.blowup_factor")?,
        quad_order,
        ic,
        force,
        noise,
        convection: raw.parse("model.convection")?,
        out_dir: PathBuf::from(raw.with_default("output.dir")),
        field_stride: raw.parse("output.field_stride")?,
        field_resolution: raw.parse("output.field_resolution")?,
        dump_tensors: raw.parse("output.tensors")?,
        conv_dt,
        conv_dt_ref,
        conv_seeds: raw.parse("convergence.seeds")?,
        cauchy_m_list: raw.list("convergence.m_list")?,
        cauchy_seeds: raw.parse("convergence.cauchy_seeds")?,
        mc_m_list: raw.list("montecarlo.m_list")?,
        mc_paths: raw.parse("montecarlo.paths")?,
        mc_factor: raw.parse("montecarlo.factor")?,
        verify_all_maps,
        verify_samples: raw.parse("verify.samples")?,
        effective,
    };
    if cfg.field_resolution < 2 {
        return Err(invalid("output.field_resolution must be at least 2"));
    }
    if cfg.mc_m_list.iter().chain(&cfg.cauchy_m_list).any(|&v| v == 0) {
        return Err(invalid("m lists must contain positive sizes"));
    }
    // a bad user expression is a configuration error, not a numerical one
    cfg.build_map()?;
    Ok(cfg)
}

/// T/dt when it is an integer up to rounding.
fn steps(t_end: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0) {
        return None;
    }
    let n = (t_end / dt).round();
    (n >= 1.0 && (n * dt - t_end).abs() <= 1e-9 * t_end).then_some(n as usize)
}

impl RunConfig {
    /// Step counts of the strong-rate levels and of the reference level.
    pub fn convergence_levels(&self) -> Result<(Vec<usize>, usize), ConfigError> {
        let n_ref = steps(self.t_end, self.conv_dt_ref)
            .ok_or_else(|| invalid(format!("convergence.dt_ref = {} does not divide solver.T", self.conv_dt_ref)))?;
        let mut levels = Vec::new();
        for &d in &self.conv_dt {
            match steps(self.t_end, d) {
                Some(n) if n_ref % n == 0 && n < n_ref => levels.push(n),
                _ => {
                    return Err(invalid(format!(
                        "convergence step {d} must divide solver.T and be a coarser multiple of convergence.dt_ref"
                    )))
                }
            }
        }
        Ok((levels, n_ref))
    }

    pub fn build_map(&self) -> Result<SharedMap, ConfigError> {
        match &self.map {
            MapSpec::Builtin { kind, rate } => {
                let affine = |default: f64, base: f64| TimeFunction::affine(base, rate.unwrap_or(default));
                let kind = match kind.as_str() {
                    "identity" => MapKind::Identity,
                    "dilation" => MapKind::Dilation(affine(1.0, 1.0)),
                    "rotation" => MapKind::Rotation(affine(1.0, 0.0)),
                    "shear" => MapKind::Shear(affine(0.5, 0.0)),
                    "wave_shear" => MapKind::WaveShear(affine(0.2, 0.0)),
                    other => return Err(invalid(format!("unknown map.kind `{other}`"))),
                };
                Ok(kind.build(self.t_end))
            }
            MapSpec::User { forward, inverse } => user_map(forward, inverse, self.t_end).map_err(invalid),
        }
    }

    pub fn is_user_map(&self) -> bool {
        matches!(self.map, MapSpec::User { .. })
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match &self.ic {
            IcSpec::Zero => InitialCondition::Zero,
            IcSpec::Mode { index, amplitude } => InitialCondition::Mode {
                index: *index,
                amplitude: *amplitude,
            },
            IcSpec::Bubble { amplitude } => InitialCondition::Bubble { amplitude: *amplitude },
            IcSpec::Coefficients(c) => InitialCondition::Coefficients(c.clone()),
        }
    }

    fn source_field(spec: &SourceSpec) -> SourceField {
        match spec {
            SourceSpec::Zero => SourceField::Zero,
            SourceSpec::Mode { index, amplitude } => SourceField::Mode {
                index: *index,
                amplitude: *amplitude,
            },
            SourceSpec::Constant(c) => SourceField::Constant(Vec2::new(c[0], c[1])),
        }
    }

    /// The problem as the core library sees it.
    pub fn setup(&self) -> Result<Setup, ConfigError> {
        let map = self.build_map()?;
        let mut s = Setup::new(Arc::clone(&map), self.m, self.t_end, self.n_time);
        s.family = self.family;
        s.quad_order = self.quad_order;
        s.ic = self.initial_condition();
        s.force = Self::source_field(&self.force);
        s.noise = Self::source_field(&self.noise);
        s.convection = self.convection;
        Ok(s)
    }

    /// `key = value` lines of the effective configuration.
    pub fn echo(&self) -> String {
        self.effective
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "map.kind=identity\nbasis.m=4\nsolver.T=0.5\nsolver.dt=1e-3\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n_time, 500);
        assert_eq!(c.m, 4);
        assert_eq!(c.quad_order, 24);
        assert_eq!(c.family, StreamFamily::SinProduct);
        assert_eq!(c.noise, SourceSpec::Zero);
        assert_eq!(c.effective["grid.n_time"], "500");
        assert!(c.echo().contains("quad.order = 24\n"));
    }

    #[test]
    fn inconsistent_grid_is_rejected() {
        let e = parse_config(&format!("{MINIMAL}grid.n_time = 400\n")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation(ref m) if m.contains("solver.T")), "{e}");
        assert!(parse_config(&format!("{MINIMAL}grid.n_time = 500\n")).is_ok());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = parse_config("# header\nbasis.m = 4\nfoo=1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::Parse {
                line: 3,
                msg: "unknown key `foo`".into()
            }
        );
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = parse_config("\n  # nothing\nbasis.m = 6  # six modes\n").unwrap();
        assert_eq!(c.m, 6);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(matches!(parse_config("basis.m = 0"), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_config("quad.order = 6"), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_config("map.kind = ellipse"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("basis.m = four"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("noise.kind = mode\nnoise.index = 9"), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_config("map.kind = user"), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_config("basis.m = 4\nbasis.m = 5"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn convergence_levels_must_nest() {
        let c = parse_config("solver.T = 0.5\nconvergence.dt = 4e-3,2e-3,1e-3\nconvergence.dt_ref = 5e-4").unwrap();
        assert_eq!(c.convergence_levels().unwrap(), (vec![125, 250, 500], 1000));
        let c = parse_config("solver.T = 0.5\nconvergence.dt = 3e-3").unwrap();
        assert!(c.convergence_levels().is_err());
    }

    #[test]
    fn user_map_expressions_are_checked() {
        let good = "map.kind = user\nmap.forward.y1 = x1/(1+t)\nmap.forward.y2 = x2/(1+t)\nmap.inverse.x1 = y1*(1+t)\nmap.inverse.x2 = y2*(1+t)\n";
        let c = parse_config(good).unwrap();
        let map = c.build_map().unwrap();
        let y = map.forward(Vec2::new(1.0, 0.5), 1.0);
        assert!((y - Vec2::new(0.5, 0.25)).norm() < 1e-15);
        let bad = good.replace("y2*(1+t)", "z*(1+t)");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Validation(_))));
    }
}
