//! Periodic orbits as zeros of G1/G2, Newton refinement and rigorous
//! existence proofs.

mod contraction;
mod maps;
mod newton;

use serde::{Deserialize, Serialize};

pub use contraction::{
    contraction_bounds, contraction_holds, verify_contraction, verify_with_ladder, ContractionBounds,
};
pub use maps::{build_g1, build_g2, PeriodicMap};
pub use newton::{newton_refine, NewtonConfig, NewtonResult};

use crate::autodiff::{jacobian, VectorFn};
use crate::controllers::ControllerSpec;
use crate::dynamics::{reward, step_with_h, MdpConfig, RewardAction};
use crate::error::{Error, GuardError, Result};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};
use crate::search::{recurrence_gap, Recurrence};

/// A map that Newton and the contraction test can work with: values and
/// Jacobians at float points and over interval boxes.
pub trait ZeroProblem: VectorFn {
    fn value_jacobian_f64(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), GuardError> {
        jacobian(self, x)
    }

    fn value_jacobian_box(&self, x: &[Interval]) -> Result<(Vec<Interval>, IntervalMatrix), GuardError> {
        jacobian(self, x).map(|(v, j)| (v, IntervalMatrix::from_rows(j)))
    }
}

impl ZeroProblem for PeriodicMap<'_> {
    fn value_jacobian_f64(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), GuardError> {
        self.value_and_jacobian(x)
    }

    fn value_jacobian_box(&self, x: &[Interval]) -> Result<(Vec<Interval>, IntervalMatrix), GuardError> {
        self.value_and_jacobian(x).map(|(v, j)| (v, IntervalMatrix::from_rows(j)))
    }
}

/// Approximate periodic orbit: `m` consecutive points with
/// `g^m(x_0) ≈ x_0 + 2πj·e_θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCandidate {
    pub config: MdpConfig,
    pub controller: ControllerSpec,
    pub m: usize,
    pub j: i32,
    pub states: Vec<Vec<f64>>,
    /// Step size of the candidate (the config's, unless refined with free h).
    pub h: f64,
    pub h_variable: bool,
    /// ‖G(X)‖∞ at `states`.
    pub residual: f64,
}

impl OrbitCandidate {
    pub fn new(config: MdpConfig, controller: ControllerSpec, m: usize, j: i32, states: Vec<Vec<f64>>) -> Result<Self> {
        if m < 1 || states.len() < m {
            return Err(Error::InvalidConfig(format!("orbit of period {m} needs {m} states, got {}", states.len())));
        }
        config.validate()?;
        config.check_controller(&controller)?;
        let p = config.system.dim();
        if states.iter().any(|s| s.len() != p || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::DimMismatch(format!("orbit states must be finite {p}-vectors")));
        }
        let states = states[..m].to_vec();
        let h = config.h;
        let mut cand = Self { config, controller, m, j, states, h, h_variable: false, residual: f64::INFINITY };
        let g = cand.g1();
        cand.residual = g.eval::<f64>(&g.pack(h, &cand.states)).map_or(f64::INFINITY, |v| newton::sup_norm(&v));
        Ok(cand)
    }

    /// From a detected recurrence (its last state is dropped).
    pub fn from_recurrence(config: &MdpConfig, controller: &ControllerSpec, rec: &Recurrence) -> Result<Self> {
        Self::new(config.clone(), controller.clone(), rec.m, rec.j, rec.states.clone())
    }

    pub fn g1(&self) -> PeriodicMap<'_> {
        build_g1(&self.config, &self.controller, self.m, self.j)
    }

    /// G2 anchored at the candidate's own θ_0.
    pub fn g2(&self) -> PeriodicMap<'_> {
        let anchor = self.states[0][self.config.system.angle_index()];
        build_g2(&self.config, &self.controller, self.m, self.j, anchor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProveOptions {
    pub newton: NewtonConfig,
    /// Candidate radii, tried in order.
    pub r_star_ladder: Vec<f64>,
    /// Fall back to the free-h map when the fixed-h proof fails.
    pub allow_variable_h: bool,
    /// Skip the fixed-h attempt.
    pub force_variable_h: bool,
    /// Action convention of the certificate's reward bounds. Orbit tables
    /// use the controller's raw output.
    pub reward_action: RewardAction,
}

impl Default for ProveOptions {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            r_star_ladder: vec![1e-4, 1e-5, 1e-6],
            allow_variable_h: true,
            force_variable_h: false,
            reward_action: RewardAction::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCertificate {
    pub config: MdpConfig,
    pub controller: ControllerSpec,
    pub m: usize,
    pub j: i32,
    pub y: f64,
    pub z0: f64,
    pub z2: f64,
    pub r_star: f64,
    pub r: f64,
    /// Approximate zero: `(h,)? x_0, …, x_{m−1}` stacked.
    pub x_bar: Vec<f64>,
    /// Newton residual ‖G(x̄)‖∞ in floats.
    pub residual: f64,
    /// True for a fixed-h (G1) proof.
    pub exact_h: bool,
    /// Enclosure of the orbit's step size when it was freed.
    pub h_enclosure: Option<Interval>,
    /// Phase anchor θ_0 of the free-h map.
    pub anchor: Option<f64>,
    pub step_rewards: Vec<Interval>,
    pub max_step_reward: Interval,
    pub contraction_ok: bool,
}

impl ProofCertificate {
    fn map(&self) -> PeriodicMap<'_> {
        if self.exact_h {
            build_g1(&self.config, &self.controller, self.m, self.j)
        } else {
            build_g2(&self.config, &self.controller, self.m, self.j, self.anchor.unwrap_or(f64::NAN))
        }
    }

    /// The orbit points of x̄.
    pub fn states(&self) -> Vec<Vec<f64>> {
        self.map().unpack(&self.x_bar).1
    }

    /// Float step size of x̄.
    pub fn h(&self) -> f64 {
        if self.exact_h {
            self.config.h
        } else {
            self.x_bar[0]
        }
    }

    /// Interval hull of the proven ball around orbit point `i`.
    pub fn state_enclosure(&self, i: usize) -> IntervalVector {
        IntervalVector::ball(&self.states()[i], self.r)
    }

    /// Max-norm distance from `point` to the nearest orbit point, with the
    /// angle compared modulo 2π.
    pub fn distance_to(&self, point: &[f64]) -> f64 {
        let ai = self.config.system.angle_index();
        self.states()
            .iter()
            .map(|s| {
                let k = ((point[ai] - s[ai]) / std::f64::consts::TAU).round();
                s.iter()
                    .zip(point)
                    .enumerate()
                    .map(|(i, (a, b))| if i == ai { (b - a - k * std::f64::consts::TAU).abs() } else { (b - a).abs() })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Re-check the contraction inequalities from the stored numbers.
    pub fn check_arithmetic(&self) -> bool {
        self.contraction_ok && contraction_holds(self.y, self.z0, self.z2, self.r_star, self.r)
    }

    /// Float-iterate the map `m` times from x̄'s first point and measure the
    /// closure defect ‖g^m(x_0) − x_0 − 2πj·e_θ‖∞.
    pub fn closure_defect(&self) -> Result<f64> {
        let states = self.states();
        let h = self.h();
        let mut s = states[0].clone();
        for _ in 0..self.m {
            s = step_with_h(&self.config, &self.controller, &s, &h)?.next;
        }
        Ok(recurrence_gap(&states[0], &s, self.config.system.angle_index(), self.j))
    }

    /// Brute-force periodicity oracle: closure within 2r + 1e-8.
    pub fn periodicity_holds(&self) -> bool {
        self.closure_defect().is_ok_and(|d| d <= 2.0 * self.r + 1e-8)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and re-verify the certificate arithmetic.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if !c.check_arithmetic() {
            return Err(Error::ContractionFailed { y: c.y, z0: c.z0, z2: c.z2, r_star: c.r_star });
        }
        Ok(c)
    }
}

/// Per-step reward enclosures over the proven balls and an enclosure of
/// their maximum.
pub fn orbit_reward_bounds(cert: &ProofCertificate) -> Result<(Vec<Interval>, Interval)> {
    let h = Interval::point(cert.h());
    let mut out = Vec::with_capacity(cert.m);
    for i in 0..cert.m {
        let bx = cert.state_enclosure(i);
        let tr = step_with_h(&cert.config, &cert.controller, &bx.0, &h)?;
        out.push(reward(&cert.config, &bx.0, tr.reward_action(&cert.config))?);
    }
    let max =
        out.iter().skip(1).fold(out[0], |acc, r| Interval::new(acc.lo().max(r.lo()), acc.hi().max(r.hi())).unwrap());
    Ok((out, max))
}

fn certify_zero(
    cand: &OrbitCandidate,
    g: &PeriodicMap<'_>,
    x_bar: Vec<f64>,
    residual: f64,
    b: ContractionBounds,
    reward_action: RewardAction,
) -> Result<ProofCertificate> {
    let mut cert = ProofCertificate {
        config: cand.config.clone().with_reward_action(reward_action),
        controller: cand.controller.clone(),
        m: cand.m,
        j: cand.j,
        y: b.y,
        z0: b.z0,
        z2: b.z2,
        r_star: b.r_star,
        r: b.r,
        h_enclosure: g.variable_h().then(|| Interval::ball(x_bar[0], b.r)),
        anchor: g.anchor,
        x_bar,
        residual,
        exact_h: !g.variable_h(),
        step_rewards: Vec::new(),
        max_step_reward: Interval::point(0.0),
        contraction_ok: true,
    };
    let (steps, max) = orbit_reward_bounds(&cert)?;
    cert.step_rewards = steps;
    cert.max_step_reward = max;
    Ok(cert)
}

/// Newton + ladder on one map, with a single re-centering retry.
fn prove_with(cand: &OrbitCandidate, g: &PeriodicMap<'_>, opts: &ProveOptions) -> Result<ProofCertificate> {
    let x0 = g.pack(cand.h, &cand.states);
    let refined = newton_refine(g, &x0, &opts.newton)?;
    let mut x_bar = refined.x;
    let mut residual = refined.residual;
    match verify_with_ladder(g, &x_bar, &opts.r_star_ladder) {
        Ok(b) => certify_zero(cand, g, x_bar, residual, b, opts.reward_action),
        Err(Error::ContractionFailed { .. }) => {
            let again = newton_refine(g, &x_bar, &NewtonConfig { max_iter: 1, tol: 0.0, ..opts.newton });
            if let Ok(n) = again {
                x_bar = n.x;
                residual = n.residual;
            }
            let b = verify_with_ladder(g, &x_bar, &opts.r_star_ladder)?;
            certify_zero(cand, g, x_bar, residual, b, opts.reward_action)
        }
        Err(e) => Err(e),
    }
}

/// Prove the candidate: fixed step size first, free step size as fallback.
pub fn prove_orbit(cand: &OrbitCandidate, opts: &ProveOptions) -> Result<ProofCertificate> {
    let mut first_err = None;
    if !opts.force_variable_h {
        match prove_with(cand, &cand.g1(), opts) {
            Ok(c) => return Ok(c),
            Err(e) => first_err = Some(e),
        }
    }
    if opts.allow_variable_h || opts.force_variable_h {
        return prove_with(cand, &cand.g2(), opts);
    }
    Err(first_err.unwrap_or(Error::InvalidConfig("no proof attempted".into())))
}

/// Float trajectory → detected recurrence → candidate.
pub fn candidate_from_trajectory(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    states: &[Vec<f64>],
    tol: f64,
) -> Option<OrbitCandidate> {
    let rec = crate::search::detect_periodic_candidate(states, cfg.system.angle_index(), tol)?;
    OrbitCandidate::from_recurrence(cfg, ctrl, &rec).ok()
}
