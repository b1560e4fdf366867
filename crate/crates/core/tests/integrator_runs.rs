//! Short scenario runs exercising the Picard solver and the two schemes.

use swe_core::scenarios::{Scenario, ScenarioKind, ScenarioSpec};
use swe_core::swe::{energy, BracketVariant};
use swe_core::time::{Integrator, PicardMode, Scheme, StepConfig};

fn scenario(kind: ScenarioKind, resolution: usize) -> Scenario {
    Scenario::new(ScenarioSpec::new(kind).with_resolution(resolution)).unwrap()
}

fn max_energy_drift(sc: &Scenario, variant: BracketVariant, cfg: StepConfig, steps: usize) -> f64 {
    let mut it = Integrator::new(&sc.model, variant, cfg, sc.initial.clone()).unwrap();
    let h0 = energy(&sc.model, &it.state);
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        it.step().unwrap();
        worst = worst.max(((energy(&sc.model, &it.state) - h0) / h0).abs());
    }
    worst
}

#[test]
fn energy_drift_falls_with_picard_count() {
    let sc = scenario(ScenarioKind::UnitSquare, 16);
    let drift: Vec<f64> = (2..=8)
        .map(|p| max_energy_drift(&sc, BracketVariant::FullUpwind, StepConfig { picard_iterations: p, ..sc.step_config() }, 10))
        .collect();
    println!("drift vs picard 2..8: {drift:?}");
    for w in drift.windows(2) {
        assert!(w[1] < w[0] || w[1] < 1e-14, "{drift:?}");
    }
    assert!(drift[6] < 1e-3 * drift[0], "{drift:?}");
}

/// Geometric mean residual reduction per Picard update over a run.
fn contraction(sc: &Scenario, mode: PicardMode, steps: usize) -> f64 {
    let cfg = StepConfig { mode, picard_tol: Some(f64::MIN_POSITIVE), ..sc.step_config() };
    let mut it = Integrator::new(&sc.model, BracketVariant::FullUpwind, cfg, sc.initial.clone()).unwrap();
    let (mut log_sum, mut count) = (0.0, 0);
    for _ in 0..steps {
        let r = it.step().unwrap();
        let first = r.residuals[0];
        let last = r.final_residual();
        log_sum += (last / first).ln();
        count += r.iterations;
    }
    (log_sum / count as f64).exp()
}

#[test]
fn implicit_mode_contracts_at_least_as_fast_on_galewsky() {
    let sc = scenario(ScenarioKind::Galewsky, 3);
    let explicit = contraction(&sc, PicardMode::Explicit, 20);
    let implicit = contraction(&sc, PicardMode::Implicit, 20);
    println!("residual reduction per update: explicit {explicit:.3e}, implicit {implicit:.3e}");
    assert!(implicit <= explicit, "explicit {explicit:e}, implicit {implicit:e}");
}

#[test]
fn midpoint_energy_error_is_bounded_and_exceeds_poisson_on_unsteady_flow() {
    let drift = |sc: &Scenario, scheme| max_energy_drift(sc, BracketVariant::FullUpwind, StepConfig { scheme, ..sc.step_config() }, 10);
    let w2 = scenario(ScenarioKind::Williamson2, 3);
    let steady = drift(&w2, Scheme::Midpoint);
    let sq = scenario(ScenarioKind::UnitSquare, 16);
    let (mid, poi) = (drift(&sq, Scheme::Midpoint), drift(&sq, Scheme::Poisson));
    println!("williamson2 midpoint {steady:.3e}; unit square midpoint {mid:.3e}, poisson {poi:.3e}");
    assert!(steady <= 1e-9, "{steady:e}");
    assert!(mid > 10.0 * poi && mid <= 1e-7, "midpoint {mid:e}, poisson {poi:e}");
}
