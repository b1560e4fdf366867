//! Test cases: the periodic unit square, Williamson 2 and 5, and Galewsky.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::assembly::{Discretisation, Field, SpaceId};
use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre;
use crate::mesh::{Mesh, Point};
use crate::swe::{Coriolis, Model, State};
use crate::time::StepConfig;

pub const DAY: f64 = 86400.0;
pub const EARTH_RADIUS: f64 = 6_371_220.0;
pub const EARTH_OMEGA: f64 = 7.292e-5;
pub const EARTH_GRAVITY: f64 = 9.810616;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    UnitSquare,
    Williamson2,
    Williamson5,
    Galewsky,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::UnitSquare, ScenarioKind::Williamson2, ScenarioKind::Williamson5, ScenarioKind::Galewsky];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::UnitSquare => "unit_square",
            ScenarioKind::Williamson2 => "williamson2",
            ScenarioKind::Williamson5 => "williamson5",
            ScenarioKind::Galewsky => "galewsky",
        }
    }

    pub fn is_sphere(self) -> bool {
        self != ScenarioKind::UnitSquare
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// Every parameter of a scenario. Fields that a scenario does not use keep
/// their defaults and are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Cells per side for the square, refinement level for the sphere.
    pub resolution: usize,
    pub length: f64,
    pub radius: f64,
    pub omega: f64,
    /// Constant Coriolis parameter on the plane.
    pub f: f64,
    pub gravity: f64,
    pub u0: f64,
    /// Mean depth; also the reference height of the linearised Jacobian.
    pub h: f64,
    pub b0: f64,
    pub mountain_radius: f64,
    pub lambda_c: f64,
    pub theta_c: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub hp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub steps: usize,
    pub picard_iterations: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        let base = ScenarioSpec {
            kind,
            resolution: 3,
            length: 1.0,
            radius: EARTH_RADIUS,
            omega: EARTH_OMEGA,
            f: 0.0,
            gravity: EARTH_GRAVITY,
            u0: 2.0 * PI * EARTH_RADIUS / (12.0 * DAY),
            h: 5960.0,
            b0: 2000.0,
            mountain_radius: PI / 9.0,
            lambda_c: -FRAC_PI_2,
            theta_c: PI / 6.0,
            theta0: PI / 7.0,
            theta1: 5.0 * PI / 14.0,
            theta2: PI / 4.0,
            hp: 120.0,
            alpha: 1.0 / 3.0,
            beta: 1.0 / 15.0,
            dt: 50.0,
            steps: 1000,
            picard_iterations: 4,
        };
        match kind {
            ScenarioKind::UnitSquare => ScenarioSpec {
                resolution: 32,
                f: 5.0,
                gravity: 5.0,
                u0: 1.0,
                h: 1.0,
                dt: 0.001,
                steps: 1000,
                ..base
            },
            ScenarioKind::Williamson2 => ScenarioSpec { resolution: 5, steps: (50.0 * DAY / 50.0) as usize, ..base },
            ScenarioKind::Williamson5 => {
                ScenarioSpec { resolution: 5, u0: 20.0, steps: (25.0 * DAY / 50.0) as usize, picard_iterations: 8, ..base }
            }
            ScenarioKind::Galewsky => ScenarioSpec {
                resolution: 6,
                u0: 80.0,
                h: 10_000.0,
                dt: 30.0,
                steps: (6.0 * DAY / 30.0) as usize,
                picard_iterations: 8,
                ..base
            },
        }
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("radius", self.radius),
            ("gravity", self.gravity),
            ("h", self.h),
            ("dt", self.dt),
            ("mountain_radius", self.mountain_radius),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.kind == ScenarioKind::UnitSquare && self.resolution == 0 {
            return Err(Error::Config("unit square needs at least one cell per side".into()));
        }
        if self.kind == ScenarioKind::Galewsky && !(self.theta0 < self.theta1) {
            return Err(Error::Config("galewsky jet needs theta0 < theta1".into()));
        }
        if self.picard_iterations == 0 {
            return Err(Error::Config("picard_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        match self.kind {
            ScenarioKind::UnitSquare => Mesh::periodic_square(self.resolution, self.length),
            _ => Mesh::icosahedral_sphere(self.resolution, self.radius),
        }
    }

    pub fn coriolis(&self) -> Coriolis {
        match self.kind {
            ScenarioKind::UnitSquare => Coriolis::Constant(self.f),
            _ => Coriolis::Rotating { omega: self.omega, radius: self.radius },
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig { picard_iterations: self.picard_iterations, ..StepConfig::new(self.dt, self.h) }
    }
}

/// Longitude in `(-pi, pi]` and latitude of a point, after projection to the sphere.
pub fn lon_lat(x: &Point) -> (f64, f64) {
    let r = x.norm();
    (x.y.atan2(x.x), (x.z / r).clamp(-1.0, 1.0).asin())
}

/// Unit eastward vector at `x`.
pub fn east(x: &Point) -> Vector3<f64> {
    let rho = x.x.hypot(x.y);
    if rho == 0.0 {
        Vector3::zeros()
    } else {
        Vector3::new(-x.y / rho, x.x / rho, 0.0)
    }
}

/// Latitudinal balance integral of the Galewsky jet,
/// `I(theta) = int_{-pi/2}^{theta} a u (f + tan(t) u / a) dt`, tabulated on
/// a composite Gauss rule.
#[derive(Debug, Clone)]
pub struct GalewskyBalance {
    radius: f64,
    omega: f64,
    u0: f64,
    en: f64,
    theta0: f64,
    theta1: f64,
    panel: f64,
    cumulative: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const BALANCE_PANELS: usize = 10_000;

impl GalewskyBalance {
    pub fn new(spec: &ScenarioSpec) -> Self {
        let (nodes, weights) = gauss_legendre(4);
        let mut b = GalewskyBalance {
            radius: spec.radius,
            omega: spec.omega,
            u0: spec.u0,
            en: (-4.0 / (spec.theta1 - spec.theta0).powi(2)).exp(),
            theta0: spec.theta0,
            theta1: spec.theta1,
            panel: PI / BALANCE_PANELS as f64,
            cumulative: vec![0.0; BALANCE_PANELS + 1],
            nodes,
            weights,
        };
        for k in 0..BALANCE_PANELS {
            let a = -FRAC_PI_2 + k as f64 * b.panel;
            b.cumulative[k + 1] = b.cumulative[k] + b.segment(a, a + b.panel);
        }
        b
    }

    /// Zonal wind speed of the jet.
    pub fn wind(&self, theta: f64) -> f64 {
        if theta <= self.theta0 || theta >= self.theta1 {
            return 0.0;
        }
        self.u0 / self.en * (1.0 / ((theta - self.theta0) * (theta - self.theta1))).exp()
    }

    fn integrand(&self, theta: f64) -> f64 {
        let u = self.wind(theta);
        let f = 2.0 * self.omega * theta.sin();
        self.radius * u * (f + theta.tan() * u / self.radius)
    }

    fn segment(&self, a: f64, b: f64) -> f64 {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(|(s, w)| w * h * self.integrand(a + s * h)).sum()
    }

    pub fn integral(&self, theta: f64) -> f64 {
        let t = (theta + FRAC_PI_2) / self.panel;
        let k = (t.floor().max(0.0) as usize).min(BALANCE_PANELS - 1);
        let a = -FRAC_PI_2 + k as f64 * self.panel;
        self.cumulative[k] + self.segment(a, theta.min(FRAC_PI_2))
    }
}

/// A scenario ready to run: model, initial state and its parameters.
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: Model,
    pub initial: State,
    balance: Option<GalewskyBalance>,
    /// Galewsky `h0`, fixed by the mean-height condition.
    pub h0: f64,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario").field("spec", &self.spec).field("h0", &self.h0).finish()
    }
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let disc = Arc::new(Discretisation::new(spec.mesh()?)?);
        Self::with_discretisation(spec, disc)
    }

    /// Builds the scenario on an existing discretisation of the right mesh.
    pub fn with_discretisation(spec: ScenarioSpec, disc: Arc<Discretisation>) -> Result<Self> {
        spec.validate()?;
        if disc.mesh.is_sphere() != spec.kind.is_sphere() {
            return Err(Error::Config(format!("mesh geometry does not match scenario {}", spec.kind)));
        }
        let mut sc = Scenario {
            balance: (spec.kind == ScenarioKind::Galewsky).then(|| GalewskyBalance::new(&spec)),
            h0: spec.h,
            model: Model::new(disc.clone(), spec.gravity, spec.coriolis(), None)?,
            initial: State::new(&disc, Field::zeros(&disc.w1), Field::zeros(&disc.w2))?,
            spec,
        };
        if sc.spec.kind == ScenarioKind::Galewsky {
            let ones = vec![1.0; disc.points.len()];
            let area = disc.integrate(&ones);
            let g = sc.spec.gravity;
            let unshifted: Vec<f64> = disc.points.iter().map(|x| -sc.balance_integral(x) / g).collect();
            sc.h0 = sc.spec.h - disc.integrate(&unshifted) / area;
        }
        let topography = match sc.spec.kind {
            ScenarioKind::Williamson5 => Some(disc.project_scalar(SpaceId::W2, |_, x| sc.topography(x))?),
            _ => None,
        };
        sc.model = Model::new(disc.clone(), sc.spec.gravity, sc.spec.coriolis(), topography)?;
        let u = disc.interpolate_w1(|x| sc.velocity(x))?;
        let d = disc.project_scalar(SpaceId::W2, |_, x| sc.depth(x))?;
        disc.check_positive(&d)?;
        sc.initial = State::new(&disc, u, d)?;
        Ok(sc)
    }

    pub fn disc(&self) -> &Arc<Discretisation> {
        &self.model.disc
    }

    fn balance_integral(&self, x: &Point) -> f64 {
        self.balance.as_ref().map_or(0.0, |b| b.integral(lon_lat(x).1))
    }

    /// Initial velocity at a point.
    pub fn velocity(&self, x: &Point) -> Vector3<f64> {
        let s = &self.spec;
        match s.kind {
            ScenarioKind::UnitSquare => Vector3::new(0.0, (2.0 * PI * x.x / s.length).sin() * s.u0, 0.0),
            ScenarioKind::Williamson2 | ScenarioKind::Williamson5 => Vector3::new(-x.y, x.x, 0.0) * (s.u0 / s.radius),
            ScenarioKind::Galewsky => {
                let (_, theta) = lon_lat(x);
                east(x) * self.balance.as_ref().map_or(0.0, |b| b.wind(theta))
            }
        }
    }

    /// Bottom topography at a point.
    pub fn topography(&self, x: &Point) -> f64 {
        let s = &self.spec;
        if s.kind != ScenarioKind::Williamson5 {
            return 0.0;
        }
        let (lambda, theta) = lon_lat(x);
        let r = s.mountain_radius.min(((lambda - s.lambda_c).powi(2) + (theta - s.theta_c).powi(2)).sqrt());
        s.b0 * (1.0 - r / s.mountain_radius)
    }

    /// Galewsky bump `D_p`; zero for the other scenarios.
    pub fn perturbation(&self, x: &Point) -> f64 {
        let s = &self.spec;
        if s.kind != ScenarioKind::Galewsky {
            return 0.0;
        }
        let (lambda, theta) = lon_lat(x);
        s.hp * theta.cos() * (-(lambda / s.alpha).powi(2) - ((s.theta2 - theta) / s.beta).powi(2)).exp()
    }

    /// Initial depth without the Galewsky bump.
    pub fn balanced_depth(&self, x: &Point) -> f64 {
        let s = &self.spec;
        match s.kind {
            ScenarioKind::UnitSquare => s.h + s.f / (4.0 * PI * s.gravity) * (4.0 * PI * x.y / s.length).sin(),
            ScenarioKind::Williamson2 | ScenarioKind::Williamson5 => {
                let c = s.radius * s.omega * s.u0 + 0.5 * s.u0 * s.u0;
                s.h - c * x.z * x.z / (s.gravity * s.radius * s.radius) - self.topography(x)
            }
            ScenarioKind::Galewsky => self.h0 - self.balance_integral(x) / s.gravity,
        }
    }

    /// Initial depth at a point.
    pub fn depth(&self, x: &Point) -> f64 {
        self.balanced_depth(x) + self.perturbation(x)
    }

    /// Analytic solution at time `t`, when one is known.
    pub fn exact_solution(&self) -> Option<(impl Fn(&Point) -> Vector3<f64> + '_, impl Fn(&Point) -> f64 + '_)> {
        (self.spec.kind == ScenarioKind::Williamson2).then(|| (move |x: &Point| self.velocity(x), move |x: &Point| self.depth(x)))
    }

    pub fn step_config(&self) -> StepConfig {
        self.spec.step_config()
    }
}
