//! Run configuration: flat `key = value` files plus command-line overrides.

use std::fmt::Write;
use std::path::PathBuf;

use swe_core::scenarios::{ScenarioKind, ScenarioSpec};
use swe_core::swe::BracketVariant;
use swe_core::time::{PicardMode, Scheme, StepConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ScenarioSpec,
    pub variant: BracketVariant,
    pub scheme: Scheme,
    pub mode: PicardMode,
    pub picard_tolerance: Option<f64>,
    pub out: PathBuf,
    /// Write a diagnostics row every this many steps (the last step is always written).
    pub diagnostics_every: usize,
    /// Write a snapshot every this many steps; 0 means first and last only.
    pub snapshot_every: usize,
    pub quadrature_degree: Option<usize>,
    pub seed: u64,
    pub dump_mesh: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Res<T> {
    Err(ConfigError(msg.into()))
}

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Res<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value, got '{line}'", n + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return err(format!("line {}: empty key", n + 1));
        }
        out.push((k.to_ascii_lowercase(), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Res<T> {
    v.parse().map_err(|_| ConfigError(format!("{key}: cannot parse '{v}'")))
}

fn flag(key: &str, v: &str) -> Res<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => err(format!("{key}: expected a boolean, got '{v}'")),
    }
}

fn parsed<T: std::str::FromStr<Err = swe_core::Error>>(v: &str) -> Res<T> {
    v.parse().map_err(|e: swe_core::Error| ConfigError(e.to_string()))
}

impl RunConfig {
    pub fn defaults(kind: ScenarioKind) -> Self {
        RunConfig {
            spec: ScenarioSpec::new(kind),
            variant: BracketVariant::FullUpwind,
            scheme: Scheme::Poisson,
            mode: PicardMode::Explicit,
            picard_tolerance: None,
            out: PathBuf::from("out"),
            diagnostics_every: 1,
            snapshot_every: 0,
            quadrature_degree: None,
            seed: 0,
            dump_mesh: false,
        }
    }

    /// Resolves pairs in order, later keys overriding earlier ones. The
    /// scenario key is applied first whatever its position.
    pub fn from_pairs(pairs: &[(String, String)]) -> Res<Self> {
        let kind = match pairs.iter().rev().find(|(k, _)| k == "scenario") {
            Some((_, v)) => parsed(v)?,
            None => ScenarioKind::Williamson2,
        };
        let mut c = RunConfig::defaults(kind);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Res<()> {
        let s = &mut self.spec;
        match key {
            "scenario" => {}
            "refinement" | "resolution" => s.resolution = num(key, v)?,
            "variant" => self.variant = parsed(v)?,
            "scheme" => self.scheme = parsed(v)?,
            "picard_mode" | "mode" => self.mode = parsed(v)?,
            "dt" => s.dt = num(key, v)?,
            "steps" => s.steps = num(key, v)?,
            "picard_iterations" | "picard" => s.picard_iterations = num(key, v)?,
            "picard_tolerance" => {
                self.picard_tolerance = if v.eq_ignore_ascii_case("none") { None } else { Some(num(key, v)?) }
            }
            "out" => self.out = PathBuf::from(v),
            "diagnostics_every" => self.diagnostics_every = num(key, v)?,
            "snapshot_every" => self.snapshot_every = num(key, v)?,
            "quadrature_degree" => {
                self.quadrature_degree = if v.eq_ignore_ascii_case("default") { None } else { Some(num(key, v)?) }
            }
            "seed" => self.seed = num(key, v)?,
            "dump_mesh" => self.dump_mesh = flag(key, v)?,
            "length" => s.length = num(key, v)?,
            "radius" => s.radius = num(key, v)?,
            "omega" => s.omega = num(key, v)?,
            "f" => s.f = num(key, v)?,
            "gravity" => s.gravity = num(key, v)?,
            "u0" => s.u0 = num(key, v)?,
            "h" => s.h = num(key, v)?,
            "b0" => s.b0 = num(key, v)?,
            "mountain_radius" => s.mountain_radius = num(key, v)?,
            "lambda_c" => s.lambda_c = num(key, v)?,
            "theta_c" => s.theta_c = num(key, v)?,
            "theta0" => s.theta0 = num(key, v)?,
            "theta1" => s.theta1 = num(key, v)?,
            "theta2" => s.theta2 = num(key, v)?,
            "hp" => s.hp = num(key, v)?,
            "alpha" => s.alpha = num(key, v)?,
            "beta" => s.beta = num(key, v)?,
            _ => return err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Res<()> {
        self.spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.step_config().validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.diagnostics_every == 0 {
            return err("diagnostics_every must be at least 1");
        }
        if self.spec.kind == ScenarioKind::UnitSquare && self.spec.resolution < 2 {
            return err("unit_square needs refinement >= 2");
        }
        if self.spec.kind.is_sphere() && self.spec.resolution > 8 {
            return err("sphere refinement above 8 is not supported");
        }
        Ok(())
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig { mode: self.mode, scheme: self.scheme, picard_tol: self.picard_tolerance, ..self.spec.step_config() }
    }

    /// Every resolved key, in a form `from_pairs` reads back.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.spec;
        let opt = |x: Option<String>, none: &str| x.unwrap_or_else(|| none.to_string());
        vec![
            ("scenario", s.kind.to_string()),
            ("refinement", s.resolution.to_string()),
            ("variant", self.variant.to_string()),
            ("scheme", self.scheme.to_string()),
            ("picard_mode", self.mode.to_string()),
            ("dt", format!("{:?}", s.dt)),
            ("steps", s.steps.to_string()),
            ("picard_iterations", s.picard_iterations.to_string()),
            ("picard_tolerance", opt(self.picard_tolerance.map(|t| format!("{t:?}")), "none")),
            ("out", self.out.display().to_string()),
            ("diagnostics_every", self.diagnostics_every.to_string()),
            ("snapshot_every", self.snapshot_every.to_string()),
            ("quadrature_degree", opt(self.quadrature_degree.map(|q| q.to_string()), "default")),
            ("seed", self.seed.to_string()),
            ("dump_mesh", self.dump_mesh.to_string()),
            ("length", format!("{:?}", s.length)),
            ("radius", format!("{:?}", s.radius)),
            ("omega", format!("{:?}", s.omega)),
            ("f", format!("{:?}", s.f)),
            ("gravity", format!("{:?}", s.gravity)),
            ("u0", format!("{:?}", s.u0)),
            ("h", format!("{:?}", s.h)),
            ("b0", format!("{:?}", s.b0)),
            ("mountain_radius", format!("{:?}", s.mountain_radius)),
            ("lambda_c", format!("{:?}", s.lambda_c)),
            ("theta_c", format!("{:?}", s.theta_c)),
            ("theta0", format!("{:?}", s.theta0)),
            ("theta1", format!("{:?}", s.theta1)),
            ("theta2", format!("{:?}", s.theta2)),
            ("hp", format!("{:?}", s.hp)),
            ("alpha", format!("{:?}", s.alpha)),
            ("beta", format!("{:?}", s.beta)),
        ]
    }

    pub fn manifest(&self, created_unix: u64) -> String {
        let mut m = format!("# swe run manifest\n# created {created_unix}\n");
        for (k, v) in self.to_pairs() {
            let _ = writeln!(m, "{k} = {v}");
        }
        m
    }
}
