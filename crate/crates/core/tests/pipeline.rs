use orbitcert::controllers::{builtin, ControllerSpec};
use orbitcert::dynamics::{MdpConfig, PenaltyKind, Scheme, System};
use orbitcert::pipeline::*;

fn small(cfg: &MdpConfig) -> PipelineConfig {
    let mut p = PipelineConfig::for_config(cfg);
    p.search.cmaes.restarts = 4;
    p.search.cmaes.max_generations = 30;
    p.top_k = 2;
    p.n_random = 10;
    p
}

#[test]
fn goal_start_has_no_spread() {
    let mut cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    cfg.rho0 = vec![[0.0, 0.0], [0.0, 0.0]];
    let t = eval_returns(&cfg, &ControllerSpec::zero(System::Pendulum), 8, 3).unwrap();
    assert_eq!(t.cells.len(), 4);
    for c in &t.cells {
        assert_eq!(c.returns.std, 0.0);
        assert_eq!(c.returns.mean, 0.0);
    }
    assert!(t.discrepancies.iter().all(|d| d.abs_diff.mean == 0.0));
    assert_eq!(t.cell(Scheme::Explicit, 0.025).unwrap().episode_len, 400);
}

#[test]
fn cartpole_grid_reports_penalties() {
    let cfg = MdpConfig::cartpole(Scheme::SemiImplicit, 0.01).with_episode_len(100);
    let t = eval_returns(&cfg, &builtin("cartpole_k21").unwrap(), 4, 0).unwrap();
    assert!(t.cells.iter().all(|c| c.penalties.is_some()));
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
}

#[test]
fn population_std() {
    let m = MeanStd::of(&[1.0, 3.0]);
    assert_eq!((m.mean, m.std), (2.0, 1.0));
}

#[test]
fn landajuela_bundle_proves_reference_orbit() {
    let cfg = MdpConfig::pendulum(Scheme::Explicit, 0.05);
    let ctrl = builtin("landajuela_a1").unwrap();
    let mut p = small(&cfg);
    p.extra_ics = vec![vec![3.94871, 8.0]];
    let b = run_pipeline(&cfg, &ctrl, &p, 0).unwrap();
    assert_eq!(b.candidates.len(), 3);
    assert!(b.proven().any(|c| c.m == 28 && c.j == 1 && c.contraction_ok && c.distance_to(&[3.94871, 8.0]) <= 1e-2));
    for c in &b.candidates {
        // Penalties are reproducible from the stored IC.
        let t = c.candidate.trajectory(&b.config, &ctrl, PenaltyKind::PendulumNegReward).unwrap();
        let p = t.accumulated_penalty();
        assert!((p - c.candidate.accumulated_penalty).abs() <= 1e-9 * p.abs());
        assert!(c.persistent.is_some());
    }
    for cert in b.proven() {
        assert!(cert.periodicity_holds() && cert.check_arithmetic());
    }
}

#[test]
fn bundle_is_deterministic() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = builtin("9A_AG").unwrap();
    let p = small(&cfg);
    let a = serde_json::to_string(&run_pipeline(&cfg, &ctrl, &p, 11).unwrap()).unwrap();
    let b = serde_json::to_string(&run_pipeline(&cfg, &ctrl, &p, 11).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn proof_failure_keeps_persistent_certificate() {
    // A huge ball through cosθ = 0 cannot be evaluated for this controller.
    let cfg = MdpConfig::pendulum(Scheme::Explicit, 0.05);
    let ctrl = builtin("landajuela_a1").unwrap();
    let mut p = small(&cfg);
    p.top_k = 0;
    p.extra_ics = vec![vec![3.94871, 8.0]];
    p.prove.r_star_ladder = vec![10.0];
    p.prove.allow_variable_h = false;
    let b = run_pipeline(&cfg, &ctrl, &p, 0).unwrap();
    assert_eq!(b.proof_failures(), 1);
    let c = &b.candidates[0];
    assert!(matches!(c.orbit, OrbitOutcome::ProofFailed { smoothness: true, .. }), "{:?}", c.orbit);
    assert!(c.persistent.as_ref().is_some_and(|pc| pc.steps_achieved > 0));
    assert!(c.penalty_bounds.is_some());
}

#[test]
fn stabilizing_controller_has_no_persistent_candidates() {
    let mut cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    cfg.rho0 = vec![[-0.05, 0.05], [-0.05, 0.05]];
    let ctrl = builtin("9A_AG").unwrap();
    let mut p = small(&cfg);
    p.search.bounds = cfg.rho0.clone();
    p.search.episode_len = 200;
    let b = run_pipeline(&cfg, &ctrl, &p, 0).unwrap();
    assert!(b.candidates.iter().all(|c| c.stabilizes()));
    assert_eq!(b.persistent_above_threshold(), 0);
}

#[test]
fn bad_extra_ic_is_config_error() {
    let cfg = MdpConfig::pendulum(Scheme::Explicit, 0.05);
    let mut p = small(&cfg);
    p.extra_ics = vec![vec![1.0]];
    assert!(matches!(
        run_pipeline(&cfg, &builtin("landajuela_a1").unwrap(), &p, 0),
        Err(orbitcert::Error::DimMismatch(_))
    ));
}
