//! Controlled pendulum and cartpole swing-up, discretized by explicit or
//! semi-implicit Euler, generic over the scalar kind.
//!
//! Angles are never wrapped in the state; `θ = 0` is the upright goal.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::ControllerSpec;
use crate::error::{Error, GuardError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Pendulum,
    CartpoleSwingup,
}

impl System {
    pub fn dim(self) -> usize {
        match self {
            System::Pendulum => 2,
            System::CartpoleSwingup => 4,
        }
    }

    /// Index of θ in the state; θ̇ always follows it.
    pub fn angle_index(self) -> usize {
        match self {
            System::Pendulum => 0,
            System::CartpoleSwingup => 2,
        }
    }

    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            System::Pendulum => &["theta", "omega"],
            System::CartpoleSwingup => &["x", "x_dot", "theta", "theta_dot"],
        }
    }
}

impl FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pendulum" => Ok(System::Pendulum),
            "cartpole" | "cartpole_swingup" | "cartpole-swingup" => Ok(System::CartpoleSwingup),
            _ => Err(Error::InvalidConfig(format!("unknown system `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "E")]
    Explicit,
    #[serde(rename = "SI")]
    SemiImplicit,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "explicit" => Ok(Scheme::Explicit),
            "si" | "semi-implicit" | "semi_implicit" | "semiimplicit" => Ok(Scheme::SemiImplicit),
            _ => Err(Error::InvalidConfig(format!("unknown scheme `{s}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Explicit => "E",
            Scheme::SemiImplicit => "SI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumConstants {
    pub l: f64,
    pub m: f64,
    pub g: f64,
}

impl Default for PendulumConstants {
    fn default() -> Self {
        Self { l: 1.0, m: 1.0, g: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleConstants {
    pub m_p: f64,
    pub l: f64,
    pub m_c: f64,
    pub g: f64,
    pub f: f64,
}

impl Default for CartpoleConstants {
    fn default() -> Self {
        Self { m_p: 0.5, l: 0.6, m_c: 0.5, g: 9.82, f: 0.1 }
    }
}

/// Which action enters the pendulum's quadratic action cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardAction {
    /// The clipped action the system actually receives (environment semantics).
    #[default]
    Clipped,
    /// The controller's raw output, before clipping.
    Raw,
}

/// Full parameterization of one discrete transition system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub system: System,
    pub scheme: Scheme,
    pub h: f64,
    pub episode_len: usize,
    #[serde(default)]
    pub pendulum: PendulumConstants,
    #[serde(default)]
    pub cartpole: CartpoleConstants,
    /// Range the raw action is clipped to.
    pub control_clip: [f64; 2],
    /// Multiplier applied after clipping (cartpole force scale).
    pub force_scale: f64,
    /// Range the new angular velocity is clipped to (pendulum only).
    pub velocity_clip: Option<[f64; 2]>,
    /// Cart track half-length (cartpole only).
    pub x_escape: f64,
    pub terminations: bool,
    /// Independent uniform ranges per state component for ρ0.
    pub rho0: Vec<[f64; 2]>,
    #[serde(default)]
    pub reward_action: RewardAction,
}

impl MdpConfig {
    pub fn pendulum(scheme: Scheme, h: f64) -> Self {
        Self {
            system: System::Pendulum,
            scheme,
            h,
            episode_len: 200,
            pendulum: PendulumConstants::default(),
            cartpole: CartpoleConstants::default(),
            control_clip: [-2.0, 2.0],
            force_scale: 1.0,
            velocity_clip: Some([-8.0, 8.0]),
            x_escape: 2.4,
            terminations: false,
            rho0: vec![[-PI, PI], [-1.0, 1.0]],
            reward_action: RewardAction::Clipped,
        }
    }

    pub fn cartpole(scheme: Scheme, h: f64) -> Self {
        Self {
            system: System::CartpoleSwingup,
            scheme,
            h,
            episode_len: 500,
            pendulum: PendulumConstants::default(),
            cartpole: CartpoleConstants::default(),
            control_clip: [-1.0, 1.0],
            force_scale: 10.0,
            velocity_clip: None,
            x_escape: 2.4,
            terminations: true,
            rho0: vec![[0.0, 0.0], [0.0, 0.0], [PI - 0.05, PI + 0.05], [-0.05, 0.05]],
            reward_action: RewardAction::Clipped,
        }
    }

    pub fn new(system: System, scheme: Scheme, h: f64) -> Self {
        match system {
            System::Pendulum => Self::pendulum(scheme, h),
            System::CartpoleSwingup => Self::cartpole(scheme, h),
        }
    }

    pub fn with_episode_len(mut self, n: usize) -> Self {
        self.episode_len = n;
        self
    }

    pub fn with_reward_action(mut self, r: RewardAction) -> Self {
        self.reward_action = r;
        self
    }

    pub fn without_terminations(mut self) -> Self {
        self.terminations = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("step size must be positive");
        }
        if self.episode_len == 0 {
            return bad("episode length must be at least 1");
        }
        if !(self.control_clip[0] < self.control_clip[1]) {
            return bad("control clip needs lo < hi");
        }
        if let Some([lo, hi]) = self.velocity_clip {
            if !(lo < hi) {
                return bad("velocity clip needs lo < hi");
            }
        }
        if self.rho0.len() != self.system.dim() || self.rho0.iter().any(|[lo, hi]| !(lo <= hi)) {
            return bad("rho0 needs one ordered range per state component");
        }
        Ok(())
    }

    /// Check that `ctrl` observes this system.
    pub fn check_controller(&self, ctrl: &ControllerSpec) -> Result<()> {
        if ctrl.system != self.system {
            return Err(Error::InvalidConfig(format!(
                "controller `{}` is for {:?}, config is {:?}",
                ctrl.name, ctrl.system, self.system
            )));
        }
        ctrl.validate()
    }

    /// Draw an initial state from ρ0.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.rho0.iter().map(|&[lo, hi]| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect()
    }
}

/// ω̇ = 3u/(l²m) + 3g sinθ/(2l); `u` already clipped.
pub fn pendulum_accel<S: Scalar>(c: &PendulumConstants, theta: S, u: S) -> S {
    let k_u = 3.0 / (c.l * c.l * c.m);
    let k_g = 3.0 * c.g / (2.0 * c.l);
    S::from_f64(k_u) * u + S::from_f64(k_g) * theta.sin()
}

/// (θ̈, ẍ) for force `u` (already clipped and scaled).
///
/// The pole coupling is the mass-length product m_p·l, as in the reference
/// environment code; with m_p + l the θ̈ denominator would change sign.
pub fn cartpole_accels<S: Scalar>(
    c: &CartpoleConstants,
    theta: S,
    theta_dot: S,
    x_dot: S,
    u: S,
) -> Result<(S, S), GuardError> {
    let k = S::from_f64;
    let mpl = c.m_p * c.l;
    let total = c.m_p + c.m_c;
    let (s, co) = (theta.clone().sin(), theta.cos());
    let co2 = co.clone().sqr();
    let td2 = theta_dot.sqr();
    let fric = u.clone() - k(c.f) * x_dot.clone();

    let num_th = k(-3.0 * mpl) * td2.clone() * s.clone() * co.clone()
        + k(6.0 * total * c.g) * s.clone()
        + k(6.0) * fric * co.clone();
    let den_th = k(4.0 * c.l * total) - k(3.0 * mpl) * co2.clone();
    let num_x = k(-2.0 * mpl) * td2 * s.clone() + k(3.0 * c.m_p * c.g) * s * co + k(4.0) * u - k(4.0 * c.f) * x_dot;
    let den_x = k(4.0 * total) - k(3.0 * c.m_p) * co2;
    Ok((num_th.try_div(den_th)?, num_x.try_div(den_x)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: Vec<S>,
    /// Clipped, unscaled action.
    pub action: S,
    /// Controller output before clipping.
    pub raw_action: S,
}

impl<S: Scalar> Transition<S> {
    /// The action that enters the reward under `cfg`.
    pub fn reward_action(&self, cfg: &MdpConfig) -> &S {
        match cfg.reward_action {
            RewardAction::Clipped => &self.action,
            RewardAction::Raw => &self.raw_action,
        }
    }
}

/// One transition with step size `h`.
pub fn step_with_h<S: Scalar>(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    s: &[S],
    h: &S,
) -> Result<Transition<S>, GuardError> {
    let raw = ctrl.eval(s)?;
    let a = raw.clone().clip(cfg.control_clip[0], cfg.control_clip[1])?;
    let u = if cfg.force_scale == 1.0 { a.clone() } else { a.clone() * S::from_f64(cfg.force_scale) };
    let next = match cfg.system {
        System::Pendulum => {
            let (theta, omega) = (s[0].clone(), s[1].clone());
            let acc = pendulum_accel(&cfg.pendulum, theta.clone(), u);
            let mut w = omega.clone() + h.clone() * acc;
            if let Some([lo, hi]) = cfg.velocity_clip {
                w = w.clip(lo, hi)?;
            }
            let th = match cfg.scheme {
                Scheme::Explicit => theta + h.clone() * omega,
                Scheme::SemiImplicit => theta + h.clone() * w.clone(),
            };
            vec![th, w]
        }
        System::CartpoleSwingup => {
            let (x, xd, th, thd) = (s[0].clone(), s[1].clone(), s[2].clone(), s[3].clone());
            let (th_acc, x_acc) = cartpole_accels(&cfg.cartpole, th.clone(), thd.clone(), xd.clone(), u)?;
            let xd_new = xd.clone() + h.clone() * x_acc;
            let thd_new = thd.clone() + h.clone() * th_acc;
            let (xn, thn) = match cfg.scheme {
                Scheme::Explicit => (x + h.clone() * xd, th + h.clone() * thd),
                Scheme::SemiImplicit => (x + h.clone() * xd_new.clone(), th + h.clone() * thd_new.clone()),
            };
            vec![xn, xd_new, thn, thd_new]
        }
    };
    Ok(Transition { next, action: a, raw_action: raw })
}

pub fn step<S: Scalar>(cfg: &MdpConfig, ctrl: &ControllerSpec, s: &[S]) -> Result<Transition<S>, GuardError> {
    step_with_h(cfg, ctrl, s, &S::from_f64(cfg.h))
}

/// Native reward of the pre-step state and action `a` (see
/// [`Transition::reward_action`]).
pub fn reward<S: Scalar>(cfg: &MdpConfig, s: &[S], a: &S) -> Result<S, GuardError> {
    match cfg.system {
        System::Pendulum => {
            let wrapped = s[0].clone().cos().try_acos()?;
            Ok(-wrapped.sqr() - S::from_f64(0.1) * s[1].clone().sqr() - S::from_f64(0.001) * a.clone().sqr())
        }
        System::CartpoleSwingup => Ok(s[2].clone().cos()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// p = −r.
    PendulumNegReward,
    /// p = −cosθ + ½θ̇² + ½ẋ².
    CartpoleShaped,
}

impl PenaltyKind {
    pub fn for_system(system: System) -> Self {
        match system {
            System::Pendulum => PenaltyKind::PendulumNegReward,
            System::CartpoleSwingup => PenaltyKind::CartpoleShaped,
        }
    }
}

pub fn penalty<S: Scalar>(kind: PenaltyKind, cfg: &MdpConfig, s: &[S], a: &S) -> Result<S, GuardError> {
    match kind {
        PenaltyKind::PendulumNegReward => Ok(-reward(cfg, s, a)?),
        PenaltyKind::CartpoleShaped => {
            let half = S::from_f64(0.5);
            Ok(-s[2].clone().cos() + half.clone() * s[3].clone().sqr() + half * s[1].clone().sqr())
        }
    }
}

/// A float rollout. `states` has one more entry than `actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: System,
    pub h: f64,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub penalties: Vec<f64>,
    /// Step after which the cart left the track, if terminations are on.
    pub terminated_at: Option<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn accumulated_penalty(&self) -> f64 {
        self.penalties.iter().sum()
    }

    /// CSV with columns t, state components, action, reward. The final state
    /// has no action and is omitted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t"];
        header.extend(self.system.state_names());
        header.extend(["action", "reward"]);
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.steps() {
            let mut row = vec![crate::decimal::format(k as f64 * self.h)];
            row.extend(self.states[k].iter().map(|&v| crate::decimal::format(v)));
            row.push(crate::decimal::format(self.actions[k]));
            row.push(crate::decimal::format(self.rewards[k]));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Float rollout of up to `n` steps from `ic`, with the config's penalty.
pub fn rollout(cfg: &MdpConfig, ctrl: &ControllerSpec, ic: &[f64], n: usize) -> Result<Trajectory> {
    rollout_with_penalty(cfg, ctrl, ic, n, PenaltyKind::for_system(cfg.system))
}

pub fn rollout_with_penalty(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    ic: &[f64],
    n: usize,
    kind: PenaltyKind,
) -> Result<Trajectory> {
    cfg.validate()?;
    cfg.check_controller(ctrl)?;
    if ic.len() != cfg.system.dim() {
        return Err(Error::DimMismatch(format!(
            "initial state has {} entries, expected {}",
            ic.len(),
            cfg.system.dim()
        )));
    }
    let mut traj = Trajectory {
        system: cfg.system,
        h: cfg.h,
        states: Vec::with_capacity(n + 1),
        actions: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        penalties: Vec::with_capacity(n),
        terminated_at: None,
    };
    let mut s = ic.to_vec();
    for k in 0..n {
        let tr = step(cfg, ctrl, &s)?;
        let a = tr.reward_action(cfg);
        traj.rewards.push(reward(cfg, &s, a)?);
        traj.penalties.push(penalty(kind, cfg, &s, a)?);
        traj.actions.push(tr.action);
        traj.states.push(std::mem::replace(&mut s, tr.next));
        if cfg.system == System::CartpoleSwingup && cfg.terminations && s[0].abs() > cfg.x_escape {
            traj.terminated_at = Some(k + 1);
            break;
        }
    }
    traj.states.push(s);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::builtin;
    use std::f64::consts::FRAC_PI_2;

    fn zero(system: System) -> ControllerSpec {
        ControllerSpec::zero(system)
    }

    #[test]
    fn pendulum_accel_examples() {
        let c = PendulumConstants::default();
        assert_eq!(pendulum_accel(&c, PI, 0.0), 15.0 * PI.sin());
        assert_eq!(pendulum_accel(&c, 0.0, 2.0), 6.0);
        assert_eq!(pendulum_accel(&c, FRAC_PI_2, 0.0), 15.0);
    }

    #[test]
    fn cartpole_rest_at_bottom() {
        let c = CartpoleConstants::default();
        let (a, b) = cartpole_accels(&c, PI, 0.0, 0.0, 0.0).unwrap();
        assert!(a.abs() < 1e-13 && b.abs() < 1e-13);
    }

    #[test]
    fn cartpole_pushed_upright() {
        // sinθ = 0, cosθ = 1: θ̈ = 6u / (4·M·l − 3·m_p·l), ẍ = 4u / (4M − 3m_p)
        let c = CartpoleConstants::default();
        let (a, b) = cartpole_accels(&c, 0.0, 0.0, 0.0, 5.0).unwrap();
        assert!((a - 30.0 / (2.4 - 0.9)).abs() < 1e-12);
        assert!((b - 20.0 / (4.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn pendulum_one_step_examples() {
        let e = MdpConfig::pendulum(Scheme::Explicit, 0.05);
        let si = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
        let z = zero(System::Pendulum);
        assert_eq!(step(&e, &z, &[0.0, 1.0]).unwrap().next, vec![0.05, 1.0]);
        assert_eq!(step(&si, &z, &[0.0, 1.0]).unwrap().next, vec![0.05, 1.0]);
        let s = step(&e, &z, &[PI, 0.0]).unwrap().next;
        assert_eq!(s[0], PI);
        assert!(s[1].abs() < 1e-14);
    }

    #[test]
    fn velocity_is_clipped() {
        let e = MdpConfig::pendulum(Scheme::Explicit, 0.05);
        let s = step(&e, &zero(System::Pendulum), &[FRAC_PI_2, 7.9]).unwrap().next;
        assert_eq!(s[1], 8.0);
    }

    #[test]
    fn rewards_at_goal_and_bottom() {
        let p = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
        let t = rollout(&p, &zero(System::Pendulum), &[0.0, 0.0], 1).unwrap();
        assert_eq!(t.rewards, vec![0.0]);
        let c = MdpConfig::cartpole(Scheme::Explicit, 0.01);
        let t = rollout(&c, &zero(System::CartpoleSwingup), &[0.0, 0.0, PI, 0.0], 1).unwrap();
        assert!((t.rewards[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn termination_stops_the_episode() {
        let c = MdpConfig::cartpole(Scheme::Explicit, 0.01);
        let t = rollout(&c, &zero(System::CartpoleSwingup), &[2.39, 1.0, PI, 0.0], 100).unwrap();
        assert_eq!(t.terminated_at, Some(2));
        assert_eq!(t.states.len(), 3);
        let t = rollout(&c.clone().without_terminations(), &zero(System::CartpoleSwingup), &[2.39, 1.0, PI, 0.0], 100)
            .unwrap();
        assert_eq!(t.steps(), 100);
    }

    #[test]
    fn mismatched_controller_rejected() {
        let c = MdpConfig::cartpole(Scheme::Explicit, 0.01);
        let r = rollout(&c, &builtin("7A_AG").unwrap(), &[0.0; 4], 1);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn raw_action_cost() {
        let p = MdpConfig::pendulum(Scheme::Explicit, 0.05);
        let c = ControllerSpec::from_formula("k", System::Pendulum, "10").unwrap();
        let t = rollout(&p, &c, &[0.0, 0.0], 1).unwrap();
        assert!((t.rewards[0] + 0.004).abs() < 1e-15);
        let t = rollout(&p.with_reward_action(RewardAction::Raw), &c, &[0.0, 0.0], 1).unwrap();
        assert!((t.rewards[0] + 0.1).abs() < 1e-15);
        assert_eq!(t.actions, vec![2.0]);
    }

    #[test]
    fn csv_header() {
        let p = MdpConfig::pendulum(Scheme::SemiImplicit, 0.05);
        let t = rollout(&p, &zero(System::Pendulum), &[PI, 0.0], 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,theta,omega,action,reward\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
