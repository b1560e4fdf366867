//! Acceptance criteria at desk scale. Prints one PASS/FAIL line per criterion.
//!
//! Select criteria with `SWE_ACCEPTANCE=1,4,9`; all run by default.

use std::time::Instant;

use swe_core::assembly::SpaceId;
use swe_core::diagnostics::{l2_error_scalar, Diagnostics, DiagnosticsRecord};
use swe_core::scenarios::{Scenario, ScenarioKind, ScenarioSpec};
use swe_core::swe::operators::jump_seminorm;
use swe_core::swe::{mass, BracketVariant};
use swe_core::time::{Integrator, Scheme, StepConfig};
use swe_core::verify::{self, PropertyOutcome};

type Outcome = Result<(bool, String), String>;

struct Run {
    records: Vec<DiagnosticsRecord>,
    max_mass_err: f64,
}

impl Run {
    fn max_abs_energy_err(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.rel_energy_err.abs()))
    }

    fn max_abs_enstrophy_err(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.rel_enstrophy_err.abs()))
    }
}

fn scenario(kind: ScenarioKind, resolution: usize) -> Scenario {
    Scenario::new(ScenarioSpec::new(kind).with_resolution(resolution)).expect("scenario")
}

/// Steps a scenario, recording diagnostics every step and calling `each`
/// with the step index and integrator after every step.
fn simulate(
    sc: &Scenario,
    variant: BracketVariant,
    cfg: StepConfig,
    steps: usize,
    mut each: impl FnMut(usize, &Integrator),
) -> Result<Run, String> {
    let mut it = Integrator::new(&sc.model, variant, cfg, sc.initial.clone()).map_err(|e| e.to_string())?;
    let mut diag = Diagnostics::new();
    let m0 = mass(&sc.model.disc, &it.state.d);
    let mut max_mass_err = 0.0_f64;
    diag.record(&sc.model, 0, 0.0, &it.state).map_err(|e| e.to_string())?;
    for n in 1..=steps {
        it.step().map_err(|e| format!("{} {variant} step {n}: {e}", sc.spec.kind))?;
        diag.record(&sc.model, n, it.time, &it.state).map_err(|e| e.to_string())?;
        max_mass_err = max_mass_err.max(((mass(&sc.model.disc, &it.state.d) - m0) / m0).abs());
        each(n, &it);
    }
    Ok(Run { records: diag.records, max_mass_err })
}

fn energy_conservation() -> Outcome {
    let sc = scenario(ScenarioKind::Williamson2, 3);
    let cfg = StepConfig { dt: 50.0, picard_iterations: 12, picard_tol: Some(1e-12), ..sc.step_config() };
    let run = simulate(&sc, BracketVariant::FullUpwind, cfg, 500, |_, _| {})?;
    let e = run.max_abs_energy_err();
    Ok((e <= 1e-10, format!("max |rel energy err| = {e:.3e} (limit 1e-10), max |rel mass err| = {:.1e}", run.max_mass_err)))
}

fn variant_comparison() -> Outcome {
    let sc = scenario(ScenarioKind::Williamson5, 3);
    let cfg = StepConfig { dt: 100.0, picard_iterations: 8, ..sc.step_config() };
    let mut drift = Vec::new();
    for v in [BracketVariant::NonEc, BracketVariant::FullUpwind, BracketVariant::UUpwindOnly] {
        drift.push(simulate(&sc, v, cfg, 500, |_, _| {})?.max_abs_energy_err());
    }
    let ok = drift[0] >= 1e3 * drift[1] && drift[0] >= 1e3 * drift[2];
    Ok((
        ok,
        format!(
            "max |rel energy err|: non_ec {:.3e}, full_upwind {:.3e}, u_upwind_only {:.3e} (ratios {:.1e}, {:.1e}; need >= 1e3)",
            drift[0],
            drift[1],
            drift[2],
            drift[0] / drift[1],
            drift[0] / drift[2]
        ),
    ))
}

fn convergence() -> Outcome {
    let mut errors = Vec::new();
    for r in [2, 3, 4] {
        let sc = scenario(ScenarioKind::Williamson2, r);
        let cfg = StepConfig { dt: 50.0, ..sc.step_config() };
        let mut sum = 0.0;
        simulate(&sc, BracketVariant::FullUpwind, cfg, 200, |n, it| {
            if n > 150 {
                sum += l2_error_scalar(sc.disc(), SpaceId::W2, &it.state.d, |x| sc.depth(x));
            }
        })?;
        errors.push(sum / 50.0);
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let ok = ratios.iter().all(|r| (3.0..=5.3).contains(r));
    Ok((ok, format!("L2 depth errors {:.3e}, {:.3e}, {:.3e}; ratios {:.2}, {:.2} (need [3.0, 5.3])", errors[0], errors[1], errors[2], ratios[0], ratios[1])))
}

fn depth_upwinding() -> Outcome {
    let sc = scenario(ScenarioKind::UnitSquare, 32);
    let cfg = StepConfig { dt: 0.001, picard_iterations: 4, ..sc.step_config() };
    let mut jumps = Vec::new();
    for v in [BracketVariant::FullUpwind, BracketVariant::UUpwindOnly] {
        let mut j = 0.0;
        simulate(&sc, v, cfg, 1000, |n, it| {
            if n == 1000 {
                j = jump_seminorm(sc.disc(), &it.state.d);
            }
        })?;
        jumps.push(j);
    }
    let ok = jumps[0] <= 0.75 * jumps[1];
    Ok((ok, format!("jump seminorm of D: full_upwind {:.4e}, u_upwind_only {:.4e}, ratio {:.3} (need <= 0.75)", jumps[0], jumps[1], jumps[0] / jumps[1])))
}

fn mass_conservation() -> Outcome {
    let mut worst = (0.0_f64, String::new());
    let mut runs = 0;
    for kind in ScenarioKind::ALL {
        let sc = scenario(kind, if kind.is_sphere() { 2 } else { 8 });
        for v in BracketVariant::ALL {
            for scheme in [Scheme::Poisson, Scheme::Midpoint] {
                let run = simulate(&sc, v, StepConfig { scheme, ..sc.step_config() }, 100, |_, _| {})?;
                runs += 1;
                if run.max_mass_err >= worst.0 {
                    worst = (run.max_mass_err, format!("{kind} {v} {scheme}"));
                }
            }
        }
    }
    Ok((worst.0 <= 1e-12, format!("{runs} runs of 100 steps, max |rel mass err| = {:.2e} ({}) (limit 1e-12)", worst.0, worst.1)))
}

fn suite(outcomes: swe_core::Result<Vec<PropertyOutcome>>) -> Outcome {
    let outcomes = outcomes.map_err(|e| e.to_string())?;
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.to_string()).collect();
    let detail = if failed.is_empty() {
        outcomes.iter().map(|o| format!("{}: {}", o.name, o.detail)).collect::<Vec<_>>().join("; ")
    } else {
        failed.join("; ")
    };
    Ok((failed.is_empty(), detail))
}

fn midpoint_remark() -> Outcome {
    let sc = scenario(ScenarioKind::Williamson5, 3);
    let mut drift = Vec::new();
    for scheme in [Scheme::Midpoint, Scheme::Poisson] {
        let cfg = StepConfig { dt: 200.0, picard_iterations: 4, scheme, ..sc.step_config() };
        drift.push(simulate(&sc, BracketVariant::FullUpwind, cfg, 180, |_, _| {})?.max_abs_energy_err());
    }
    let ok = drift[0] <= 1e-7 && drift[0] >= 10.0 * drift[1];
    Ok((ok, format!("max |rel energy err|: midpoint {:.3e} (limit 1e-7), poisson {:.3e}, ratio {:.1} (need >= 10)", drift[0], drift[1], drift[0] / drift[1])))
}

fn enstrophy_behaviour() -> Outcome {
    let sc = scenario(ScenarioKind::Galewsky, 3);
    let cfg = StepConfig { dt: 60.0, ..sc.step_config() };
    let up = simulate(&sc, BracketVariant::FullUpwind, cfg, 300, |_, _| {})?;
    let orig = simulate(&sc, BracketVariant::Original, cfg, 300, |_, _| {})?;
    let final_up = up.records.last().unwrap().rel_enstrophy_err;
    let (a, b) = (orig.max_abs_enstrophy_err(), up.max_abs_enstrophy_err());
    let ok = final_up <= 1e-12 && a < b;
    Ok((
        ok,
        format!(
            "full_upwind final rel enstrophy err {final_up:.3e} (need <= 1e-12); max |drift| original {a:.3e} vs full_upwind {b:.3e} (need original < full_upwind)"
        ),
    ))
}

fn main() {
    let selected: Option<Vec<usize>> =
        std::env::var("SWE_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let seed = 20_240_601;
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "energy conservation", Box::new(energy_conservation)),
        (2, "variant comparison", Box::new(variant_comparison)),
        (3, "convergence", Box::new(convergence)),
        (4, "depth upwinding benefit", Box::new(depth_upwinding)),
        (5, "mass conservation", Box::new(mass_conservation)),
        (6, "bracket antisymmetry", Box::new(move || suite(verify::antisymmetry_suite(seed, 50)))),
        (7, "velocity recovery", Box::new(move || suite(verify::recovery_suite(seed, 50)))),
        (8, "oracle equivalence", Box::new(move || suite(verify::oracle_suite(seed, 20)))),
        (9, "midpoint energy error", Box::new(midpoint_remark)),
        (10, "enstrophy behaviour", Box::new(enstrophy_behaviour)),
    ];
    let mut failures = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!passed);
        println!("{} criterion {id} ({name}): {detail} [{:.0} s]", if passed { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
