use std::sync::OnceLock;

use proptest::prelude::*;

use orbitcert::autodiff::{finite_difference_jacobian, jacobian, VectorFn};
use orbitcert::controllers::{builtin, ControllerSpec};
use orbitcert::dynamics::{penalty, reward, rollout, step, MdpConfig, PenaltyKind, Scheme, System};
use orbitcert::error::GuardError;
use orbitcert::prover::{
    candidate_from_trajectory, contraction_bounds, contraction_holds, prove_orbit, ProofCertificate, ProveOptions,
};
use orbitcert::scalar::Scalar;
use orbitcert::search::{maximize, CmaesConfig};
use orbitcert::Interval;

/// One transition as a vector function of the state.
struct StepMap {
    cfg: MdpConfig,
    ctrl: ControllerSpec,
}

impl VectorFn for StepMap {
    fn input_dim(&self) -> usize {
        self.cfg.system.dim()
    }
    fn output_dim(&self) -> usize {
        self.cfg.system.dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, GuardError> {
        step(&self.cfg, &self.ctrl, x).map(|t| t.next)
    }
}

const PENDULUM: [&str; 4] = ["landajuela_a1", "9A_AG", "9A_CMA", "19A_CMA"];
const CARTPOLE: [&str; 3] = ["cartpole_k17", "cartpole_k19", "cartpole_k21"];

fn maps() -> Vec<StepMap> {
    let mut out = Vec::new();
    for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
        for name in PENDULUM {
            out.push(StepMap { cfg: MdpConfig::pendulum(scheme, 0.05), ctrl: builtin(name).unwrap() });
        }
        for name in CARTPOLE {
            out.push(StepMap { cfg: MdpConfig::cartpole(scheme, 0.01), ctrl: builtin(name).unwrap() });
        }
    }
    out
}

fn state(system: System, u: &[f64]) -> Vec<f64> {
    match system {
        System::Pendulum => vec![-7.0 + 14.0 * u[0], -8.0 + 16.0 * u[1]],
        System::CartpoleSwingup => vec![-1.0 + 2.0 * u[0], -2.0 + 4.0 * u[1], -7.0 + 14.0 * u[2], -4.0 + 4.0 * u[3]],
    }
}

fn boxed(x: &[f64], r: &[f64]) -> Vec<Interval> {
    x.iter().zip(r).map(|(&c, &w)| Interval::ball(c, w)).collect()
}

fn reference_certificate() -> &'static ProofCertificate {
    static CERT: OnceLock<ProofCertificate> = OnceLock::new();
    CERT.get_or_init(|| {
        let cfg = MdpConfig::pendulum(Scheme::Explicit, 0.05);
        let ctrl = builtin("landajuela_a1").unwrap();
        let traj = rollout(&cfg, &ctrl, &[3.94871, 8.0], 200).unwrap();
        let cand = candidate_from_trajectory(&cfg, &ctrl, &traj.states, 0.05).unwrap();
        prove_orbit(&cand, &ProveOptions::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Interval step, reward and penalty enclose the float values at any
    /// point of the box.
    #[test]
    fn step_enclosure_contains_point(
        which in 0usize..14,
        u in prop::collection::vec(0.0f64..1.0, 4),
        t in prop::collection::vec(0.0f64..=1.0, 4),
        w in prop::collection::vec(0.0f64..1e-3, 4),
    ) {
        let m = &maps()[which];
        let p = m.cfg.system.dim();
        let c = state(m.cfg.system, &u);
        let bx = boxed(&c, &w[..p]);
        let x: Vec<f64> = bx.iter().zip(&t).map(|(b, s)| (b.lo() + s * (b.hi() - b.lo())).clamp(b.lo(), b.hi())).collect();
        let kind = PenaltyKind::for_system(m.cfg.system);
        if let Ok(ti) = step(&m.cfg, &m.ctrl, &bx) {
            let tf = step(&m.cfg, &m.ctrl, &x).unwrap();
            for (a, b) in ti.next.iter().zip(&tf.next) {
                prop_assert!(a.contains(*b), "{a} ∌ {b}");
            }
            prop_assert!(ti.action.contains(tf.action));
            if let (Ok(ri), Ok(rf)) = (reward(&m.cfg, &bx, &ti.action), reward(&m.cfg, &x, &tf.action)) {
                prop_assert!(ri.contains(rf));
            }
            if let (Ok(pi), Ok(pf)) = (penalty(kind, &m.cfg, &bx, &ti.action), penalty(kind, &m.cfg, &x, &tf.action)) {
                prop_assert!(pi.contains(pf));
            }
        }
    }

    /// Interval Jacobians at a thin point contain the float Jacobian.
    #[test]
    fn jacobian_kinds_agree(which in 0usize..14, u in prop::collection::vec(0.0f64..1.0, 4)) {
        let m = &maps()[which];
        let x = state(m.cfg.system, &u);
        let thin: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        if let (Ok((vi, ji)), Ok((vf, jf))) = (jacobian(m, &thin), jacobian(m, &x)) {
            for (a, b) in vi.iter().zip(&vf) {
                prop_assert!(a.contains(*b));
            }
            for (ra, rb) in ji.iter().zip(&jf) {
                for (a, b) in ra.iter().zip(rb) {
                    prop_assert!(a.contains(*b), "{a} ∌ {b}");
                }
            }
        }
    }

    /// Passing the rounded check implies the exact inequalities.
    #[test]
    fn contraction_check_is_sound(
        y in 0.0f64..1e-3,
        z0 in 0.0f64..1.0,
        z2 in 0.0f64..1.0,
        r in 1e-12f64..1e-3,
    ) {
        if contraction_holds(y, z0, z2, 1e-3, r) {
            prop_assert!(z0 + z2 < 1.0);
            prop_assert!(y <= r * (1.0 - z0 - z2) * (1.0 + 4.0 * f64::EPSILON));
            prop_assert!(r <= 1e-3);
        }
    }

    /// Z2 is inclusion monotone in the ball radius.
    #[test]
    fn z2_monotone_in_radius(a in -7.0f64..-3.0, b in -7.0f64..-3.0) {
        let cert = reference_certificate();
        let cand = orbitcert::prover::OrbitCandidate::new(cert.config.clone(), cert.controller.clone(), cert.m, cert.j, cert.states()).unwrap();
        let g = cand.g1();
        let (small, large) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let zs = contraction_bounds(&g, &cert.x_bar, small).unwrap().z2;
        let zl = contraction_bounds(&g, &cert.x_bar, large).unwrap().z2;
        prop_assert!(zs <= zl, "{zs} > {zl}");
    }

    /// Scaling any certificate number the wrong way is caught on load.
    #[test]
    fn tampered_certificates_are_rejected(f in 1.5f64..10.0, field in 0usize..3) {
        let mut c = reference_certificate().clone();
        match field {
            0 => c.y = c.r * f,
            1 => c.r = c.y / f,
            _ => c.z2 = 1.0 - c.z0 / f,
        }
        prop_assert!(ProofCertificate::from_json(&c.to_json().unwrap()).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Same seed, same candidates.
    #[test]
    fn cmaes_is_deterministic(seed in any::<u64>()) {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - (x[1] + 0.2).powi(2) + (5.0 * x[0]).sin();
        let cfg = CmaesConfig { restarts: 3, max_generations: 20, ..CmaesConfig::default() };
        let a = maximize(f, &[-1.0, -1.0], &[1.0, 1.0], None, &cfg, seed);
        let b = maximize(f, &[-1.0, -1.0], &[1.0, 1.0], None, &cfg, seed);
        prop_assert_eq!(a, b);
    }
}

fn guard_free_point(m: &StepMap, rng: &mut impl rand::Rng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let x = state(m.cfg.system, &u);
        // Smooth on a small ball, so finite differences see one branch.
        let bx = boxed(&x, &[1e-4; 4]);
        if jacobian(m, &bx).is_ok() {
            return x;
        }
    }
}

#[test]
fn ad_matches_finite_differences() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for m in maps() {
        for _ in 0..100 {
            let x = guard_free_point(&m, &mut rng);
            let (_, ad) = jacobian(&m, &x).unwrap();
            let fd = finite_difference_jacobian(&m, &x, 1e-6).unwrap();
            for (ra, rf) in ad.iter().zip(&fd) {
                for (a, f) in ra.iter().zip(rf) {
                    worst = worst.max((a - f).abs() / (1.0 + a.abs()));
                }
            }
        }
    }
    assert!(worst <= 1e-5, "worst AD/FD entry error {worst:e}");
}

#[test]
fn interval_containment_ten_thousand() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (c1, c2): (f64, f64) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let (w1, w2): (f64, f64) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let (a, b) = (Interval::ball(c1, w1), Interval::ball(c2, w2));
        let x = c1 + w1 * rng.random_range(-1.0..=1.0);
        let y = c2 + w2 * rng.random_range(-1.0..=1.0);
        let mut ok = (a + b).contains(x + y) && (a - b).contains(x - y) && (a * b).contains(x * y);
        ok &= a.sin().contains(x.sin()) && a.cos().contains(x.cos()) && a.tanh().contains(x.tanh());
        if let Ok(q) = a.try_div(b) {
            ok &= q.contains(x / y);
        }
        if let Ok(s) = a.abs().try_sqrt() {
            ok &= s.contains(x.abs().sqrt());
        }
        if let Ok(ac) = a.cos().try_acos() {
            ok &= ac.contains(x.cos().acos());
        }
        violations += usize::from(!ok);
    }
    assert_eq!(violations, 0);
}
