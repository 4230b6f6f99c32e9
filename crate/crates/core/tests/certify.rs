// 3.14159 below is a reference initial condition, not an approximation of π.
#![allow(clippy::approx_constant)]

use std::f64::consts::PI;

use orbitcert::certify::*;
use orbitcert::controllers::{builtin, ControllerSpec};
use orbitcert::dynamics::{rollout, rollout_with_penalty, MdpConfig, PenaltyKind, Scheme, System};
use orbitcert::prover::{candidate_from_trajectory, prove_orbit, ProveOptions};
use orbitcert::{Error, Interval, IntervalVector};

fn thin(xs: &[f64]) -> IntervalVector {
    IntervalVector::from_points(xs)
}

#[test]
fn hanging_equilibrium_stays_thin() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = ControllerSpec::zero(System::Pendulum);
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[PI, 0.0]), 100, &RolloutOptions::default()).unwrap();
    assert_eq!(cert.steps_achieved, 100);
    assert_eq!(cert.stop, StopReason::Completed);
    for e in &cert.enclosures {
        assert!((e[0].midpoint() - PI).abs() < 1e-12 && e[1].midpoint().abs() < 1e-12);
        assert!(e.max_radius() < 1e-6, "{}", e.max_radius());
    }
}

#[test]
fn constant_penalty_sums() {
    // Uncontrolled at the exact upright equilibrium: zero penalty, N = 2000.
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = ControllerSpec::zero(System::Pendulum);
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[0.0, 0.0]), 2000, &RolloutOptions::default()).unwrap();
    let b = accumulated_penalty_bounds(&cert, PenaltyKind::PendulumNegReward).unwrap();
    let sum = b.complete().unwrap();
    assert!(sum.contains(0.0) && sum.width() <= 1e-11, "{sum}");

    // Hanging: π² per step, until wrapping (a rotation) hits the cap.
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[PI, 0.0]), 100, &RolloutOptions::default()).unwrap();
    let sum = accumulated_penalty_bounds(&cert, PenaltyKind::PendulumNegReward).unwrap().complete().unwrap();
    assert!(sum.inflate(1e-9).contains(100.0 * PI * PI), "{sum}");
    // arccos is steep next to cosθ = −1, so the sum is wider than the states.
    assert!(sum.width() <= 1e-4, "{sum}");
}

#[test]
fn goal_state_is_not_persistent() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = ControllerSpec::zero(System::Pendulum);
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[0.0, 0.0]), 10, &RolloutOptions::default()).unwrap();
    let rep = persistence_check(&cert, 1e-2);
    assert_eq!(rep.steps[0], Persistence::Stabilized);
    assert_eq!(rep.first_stabilized().unwrap(), Some(0));
    assert_eq!(rep.t_p().unwrap(), 0.0);
    assert_eq!(cert.t_p, Some(0.0));
}

#[test]
fn classification_boundaries() {
    let p = |lo: f64, hi: f64| Interval::new(lo, hi).unwrap();
    assert_eq!(classify(System::Pendulum, &[p(0.5, 0.6), p(0.0, 0.0)], 1e-2), Persistence::Persistent);
    assert_eq!(classify(System::Pendulum, &[p(0.0, 0.0), p(0.02, 0.03)], 1e-2), Persistence::Persistent);
    assert_eq!(classify(System::Pendulum, &[p(-0.005, 0.005), p(-0.005, 0.005)], 1e-2), Persistence::Stabilized);
    assert_eq!(classify(System::Pendulum, &[p(0.005, 0.02), p(0.0, 0.0)], 1e-2), Persistence::Indeterminate);
    // θ near 2π is near the goal too.
    assert_eq!(
        classify(System::Pendulum, &[p(2.0 * PI - 0.001, 2.0 * PI), p(0.0, 0.0)], 1e-2),
        Persistence::Stabilized
    );
    // Cartpole ignores the cart position.
    let cp = [p(2.0, 2.0), p(0.0, 0.0), p(0.01, 0.01), p(-0.01, 0.0)];
    assert_eq!(classify(System::CartpoleSwingup, &cp, 0.036), Persistence::Stabilized);
    let cp = [p(0.0, 0.0), p(0.0, 0.0), p(PI, PI), p(0.0, 0.0)];
    assert_eq!(classify(System::CartpoleSwingup, &cp, 0.036), Persistence::Persistent);
}

#[test]
fn indeterminate_step_is_reported() {
    let rep = PersistenceReport {
        eps: 1e-2,
        h: 0.05,
        steps: vec![Persistence::Persistent, Persistence::Indeterminate, Persistence::Stabilized],
        horizon: 3,
    };
    assert!(matches!(rep.first_stabilized(), Err(Error::Indeterminate { step: 1 })));
}

#[test]
fn wrapping_truncates_honestly() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = builtin("9A_CMA").unwrap();
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[3.14159, 0.0]), 1000, &RolloutOptions::default()).unwrap();
    assert!(cert.truncated() && cert.steps_achieved < 1000);
    assert!(matches!(cert.stop, StopReason::RadiusCap { .. }));
    assert!(cert.radii_monotone());
    assert!(cert.max_enclosure_radius <= 1e-1);
    let b = accumulated_penalty_bounds(&cert, PenaltyKind::PendulumNegReward).unwrap();
    assert!(matches!(b.complete(), Err(Error::HorizonTruncated { .. })));
    // The partial lower bound stays valid.
    let float = rollout_with_penalty(&cfg, &ctrl, &[3.14159, 0.0], cert.steps_achieved, PenaltyKind::PendulumNegReward)
        .unwrap();
    assert!(b.sum.contains(float.accumulated_penalty()));
}

#[test]
fn float_rollout_inside_enclosures() {
    let cases: Vec<(MdpConfig, &str, Vec<f64>)> = vec![
        (MdpConfig::pendulum(Scheme::SemiImplicit, 0.05), "9A_CMA", vec![3.14159, 0.0]),
        (MdpConfig::pendulum(Scheme::Explicit, 0.05), "landajuela_a1", vec![3.94871, 8.0]),
        (
            MdpConfig::cartpole(Scheme::Explicit, 0.01).without_terminations(),
            "cartpole_k21",
            vec![-0.449, 0.498, 2.9, -0.498],
        ),
    ];
    for (cfg, name, ic) in cases {
        let ctrl = builtin(name).unwrap();
        let cert = rigorous_rollout(&cfg, &ctrl, &thin(&ic), 400, &RolloutOptions::default()).unwrap();
        let traj = rollout(&cfg, &ctrl, &ic, cert.steps_achieved).unwrap();
        for (e, s) in cert.enclosures.iter().zip(&traj.states) {
            assert!(e.contains_point(s), "{name}");
        }
        assert!(cert.return_enclosure.contains(traj.episode_return()), "{name}");
    }
}

#[test]
fn cartpole_reference_ic_midpoint_matches_float_sum() {
    let cfg = MdpConfig::cartpole(Scheme::Explicit, 0.01).without_terminations();
    let ctrl = builtin("cartpole_k21").unwrap();
    let ic = [-0.449, 0.498, 2.9, -0.498];
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&ic), 2000, &RolloutOptions::default()).unwrap();
    let b = accumulated_penalty_bounds(&cert, PenaltyKind::CartpoleShaped).unwrap();
    let float = rollout_with_penalty(&cfg, &ctrl, &ic, cert.steps_achieved, PenaltyKind::CartpoleShaped).unwrap();
    let f = float.accumulated_penalty();
    assert!(b.sum.contains(f));
    assert!((b.sum.midpoint() - f).abs() <= 1e-3 * f.abs(), "{} vs {f}", b.sum);
}

#[test]
fn seven_a_cma_never_stabilizes() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.0125);
    let ctrl = builtin("7A_CMA").unwrap();
    let ic = [-3.50688, 0.13596];
    let traj = rollout(&cfg, &ctrl, &ic, 1000).unwrap();
    let rep = persistence_of_states(System::Pendulum, cfg.h, &traj.states, 1e-2);
    assert!(rep.all_persistent());
    assert!((rep.t_p().unwrap() - 12.5).abs() < 1e-12);
    // Rigorous claim over the achieved horizon.
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&ic), 1000, &RolloutOptions::default()).unwrap();
    let rep = persistence_check(&cert, 1e-2);
    assert!(rep.all_persistent());
    assert_eq!(cert.t_p, Some(cert.steps_achieved as f64 * cfg.h));
}

#[test]
fn t_p_recomputable_from_json() {
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = builtin("9A_AG").unwrap();
    let cert = rigorous_rollout(&cfg, &ctrl, &thin(&[0.3, 0.2]), 300, &RolloutOptions::default()).unwrap();
    let back: PersistentCertificate = serde_json::from_str(&cert.to_json().unwrap()).unwrap();
    assert_eq!(back, cert);
    assert_eq!(persistence_check(&back, back.persistence_eps).t_p().ok(), cert.t_p);
    let mut csv = Vec::new();
    cert.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), cert.enclosures.len() + 1);
}

#[test]
fn guard_stops_rollout() {
    // Landajuela divides by cosθ; a box through θ = π/2 cannot be stepped.
    let cfg = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
    let ctrl = builtin("landajuela_a1").unwrap();
    let ic = IntervalVector(vec![Interval::ball(PI / 2.0, 1e-3), Interval::point(0.0)]);
    let cert = rigorous_rollout(&cfg, &ctrl, &ic, 10, &RolloutOptions::default()).unwrap();
    assert_eq!(cert.steps_achieved, 0);
    assert!(matches!(cert.stop, StopReason::Guard { .. }));
}

#[test]
fn proven_landajuela_orbits_persist_with_linear_penalty() {
    let ctrl = builtin("landajuela_a1").unwrap();
    for (scheme, h, ic, steps) in
        [(Scheme::Explicit, 0.05, [3.94871, 8.0], 200), (Scheme::Explicit, 0.01, [0.69262, 1.59285], 1000)]
    {
        let cfg = MdpConfig::pendulum(scheme, h);
        let traj = rollout(&cfg, &ctrl, &ic, steps).unwrap();
        let cand = candidate_from_trajectory(&cfg, &ctrl, &traj.states, 0.05).unwrap();
        let cert = prove_orbit(&cand, &ProveOptions::default()).unwrap();
        assert!(orbit_persistence(&cert, 1e-2).all_persistent());
        for n in [1, cert.m, 1000] {
            let lb = orbit_penalty_lower_bound(&cert, PenaltyKind::PendulumNegReward, n).unwrap();
            assert!(lb >= 0.198 * n as f64, "n={n}: {lb}");
        }
    }
}
