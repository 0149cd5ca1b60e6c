use std::path::Path;
use std::sync::OnceLock;

use proptest::prelude::*;
use slipflow::run::write_outcome;
use slipflow::sweep::trajectory_distance;
use slipflow::{read_archive, simulate, verify_archive, FluidParams, RunConfig, RunOutcome};

fn config(name: &str) -> RunConfig {
    RunConfig::load(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(name),
    )
    .unwrap()
}

fn small() -> &'static RunOutcome {
    static OUTCOME: OnceLock<RunOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| simulate(&config("small.toml")).unwrap())
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[1] >= w[0] - 1e-15 * w[0].abs().max(1.0))
}

#[test]
fn small_run_passes_every_check() {
    let v = small().verification();
    assert!(v.pass, "{:?}", v.first_failing());
}

#[test]
fn dissipation_accumulators_never_decrease() {
    let ledger = &small().diagnostics.ledger;
    assert!(nondecreasing(&ledger.dissipation));
    assert!(nondecreasing(&ledger.eps_dissipation));
    assert!(nondecreasing(&ledger.boundary));
    assert!(nondecreasing(&ledger.boundary_abs));
    assert!(nondecreasing(&ledger.boundary_weight));
    assert_eq!(ledger.dissipation[0], 0.0);
}

#[test]
fn complementarity_stays_within_its_bound() {
    for w in &small().diagnostics.complementarity {
        assert!(w.traction_excess <= 1e-12, "{w:?}");
        assert!(w.defect <= w.defect_bound + 1e-12, "{w:?}");
    }
    let gap = &small().diagnostics.boundary_gap;
    assert!(gap.gap <= gap.bound + 1e-12);
}

#[test]
fn archive_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = small();
    write_outcome(outcome, dir.path()).unwrap();
    let loaded = read_archive(dir.path()).unwrap();
    let traj = outcome.trajectory();
    assert_eq!(loaded.config, outcome.config);
    assert_eq!(loaded.times, traj.times);
    assert_eq!(loaded.velocity.len(), traj.u.len());
    for (a, b) in loaded.velocity.iter().zip(&traj.u) {
        assert_eq!(a.c, b.c);
    }
    for (a, b) in loaded.density.iter().zip(&traj.rho) {
        assert_eq!(a.coeffs, b.coeffs);
    }
    assert_eq!(loaded.history, outcome.solution.history);
    assert_eq!(loaded.verification, *outcome.verification());

    let again = verify_archive(dir.path()).unwrap();
    assert_eq!(again.pass, outcome.verification().pass);
    for (a, b) in again.reports.iter().zip(&outcome.verification().reports) {
        assert_eq!(a.name, b.name);
        assert!(
            (a.value - b.value).abs() <= 1e-12 * b.value.abs().max(1e-300),
            "{}: {} vs {}",
            a.name,
            a.value,
            b.value
        );
    }
}

#[test]
fn level_distance_is_symmetric_and_vanishes_on_the_diagonal() {
    let a = small();
    let mut cfg = config("small.toml");
    cfg.discretization.ky_max = 3;
    let b = simulate(&cfg).unwrap();
    let ab = trajectory_distance((&a.model, a.trajectory()), (&b.model, b.trajectory())).unwrap();
    let ba = trajectory_distance((&b.model, b.trajectory()), (&a.model, a.trajectory())).unwrap();
    assert_eq!(ab, ba);
    assert!(ab.0 > 0.0 && ab.1 > 0.0);
    let aa = trajectory_distance((&a.model, a.trajectory()), (&a.model, a.trajectory())).unwrap();
    assert_eq!(aa, (0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parameter_gate_matches_the_standing_assumptions(
        nu in -0.5f64..1.0,
        lambda in -1.0f64..1.0,
        gamma in 1.0f64..6.0,
        beta in 3.0f64..8.0,
        alpha in -1e-3f64..1e-2,
        eps in -1e-2f64..1e-1,
        delta in -1e-2f64..1e-1,
        g in -0.1f64..0.5,
    ) {
        let p = FluidParams { nu, lambda, gamma, beta, alpha, eps, delta, g: [g, 0.1], ..FluidParams::default() };
        let admissible = nu > 0.0
            && gamma > 1.5
            && nu + lambda >= 0.0
            && beta > gamma.max(4.0)
            && alpha > 0.0
            && eps > 0.0
            && delta > 0.0
            && g >= 0.0;
        prop_assert_eq!(p.validate().is_ok(), admissible);
    }

    #[test]
    fn config_gate_rejects_before_compute(gamma in 1.0f64..1.5) {
        let mut cfg = config("zero.toml");
        cfg.params.gamma = gamma;
        let err = RunConfig::from_toml(&cfg.to_toml()).and_then(|c| simulate(&c).map(|_| ())).unwrap_err();
        prop_assert!(err.to_string().contains("gamma > 3/2"), "{}", err);
    }
}
