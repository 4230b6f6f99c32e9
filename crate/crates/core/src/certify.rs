//! Interval rollouts from thin initial conditions: rigorous per-step
//! enclosures, reward and penalty bounds, and persistence checks.
//!
//! Enclosures widen with every composed step (the wrapping effect), so a
//! rollout stops honestly once any state radius exceeds a cap; every claim
//! then covers only the steps actually achieved.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controllers::ControllerSpec;
use crate::dynamics::{penalty, reward, step, MdpConfig, PenaltyKind, System};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalVector};
use crate::prover::ProofCertificate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    RadiusCap { radius: f64 },
    Guard { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistentCertificate {
    pub config: MdpConfig,
    pub controller: String,
    pub ic: IntervalVector,
    pub requested_steps: usize,
    pub steps_achieved: usize,
    /// `steps_achieved + 1` state enclosures.
    pub enclosures: Vec<IntervalVector>,
    /// Enclosures of the action entering the reward, one per achieved step.
    pub actions: Vec<Interval>,
    pub rewards: Vec<Interval>,
    pub return_enclosure: Interval,
    /// Largest state radius per enclosure.
    pub radii: Vec<f64>,
    pub max_enclosure_radius: f64,
    pub stop: StopReason,
    /// Some enclosure may have |x| above the escape bound (cartpole).
    pub escaped: bool,
    pub persistence_eps: f64,
    /// First time the solution provably stabilizes, else the achieved horizon.
    pub t_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutOptions {
    pub radius_cap: f64,
    /// Stabilization level; `None` uses the system default.
    pub eps: Option<f64>,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self { radius_cap: 1e-1, eps: None }
    }
}

pub fn default_eps(system: System) -> f64 {
    match system {
        System::Pendulum => 1e-2,
        System::CartpoleSwingup => 0.036,
    }
}

/// Direct interval iteration of the step map from `ic` for up to `n` steps.
pub fn rigorous_rollout(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    ic: &IntervalVector,
    n: usize,
    opts: &RolloutOptions,
) -> Result<PersistentCertificate> {
    cfg.validate()?;
    cfg.check_controller(ctrl)?;
    if ic.len() != cfg.system.dim() {
        return Err(Error::DimMismatch(format!("initial box has {} entries, expected {}", ic.len(), cfg.system.dim())));
    }
    let mut enclosures = vec![ic.clone()];
    let mut actions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut stop = StopReason::Completed;
    let mut s = ic.0.clone();
    for _ in 0..n {
        let out = step(cfg, ctrl, &s).and_then(|tr| {
            let a = *tr.reward_action(cfg);
            Ok((tr.next, a, reward(cfg, &s, &a)?))
        });
        let (next, a, r) = match out {
            Ok(v) => v,
            Err(e) => {
                stop = StopReason::Guard { message: e.to_string() };
                break;
            }
        };
        let next = IntervalVector(next);
        let radius = next.max_radius();
        if !(radius <= opts.radius_cap) {
            stop = StopReason::RadiusCap { radius };
            break;
        }
        actions.push(a);
        rewards.push(r);
        s = next.0.clone();
        enclosures.push(next);
    }
    let steps_achieved = rewards.len();
    let return_enclosure = rewards.iter().fold(Interval::point(0.0), |acc, r| acc + *r);
    let radii: Vec<f64> = enclosures.iter().map(IntervalVector::max_radius).collect();
    let escaped = cfg.system == System::CartpoleSwingup && enclosures.iter().any(|e| e[0].mag() > cfg.x_escape);
    let mut cert = PersistentCertificate {
        config: cfg.clone(),
        controller: ctrl.name.clone(),
        ic: ic.clone(),
        requested_steps: n,
        steps_achieved,
        max_enclosure_radius: radii.iter().copied().fold(0.0, f64::max),
        radii,
        enclosures,
        actions,
        rewards,
        return_enclosure,
        stop,
        escaped,
        persistence_eps: opts.eps.unwrap_or_else(|| default_eps(cfg.system)),
        t_p: None,
    };
    cert.t_p = persistence_check(&cert, cert.persistence_eps).t_p().ok();
    Ok(cert)
}

impl PersistentCertificate {
    pub fn midpoint_return(&self) -> f64 {
        self.rewards.iter().map(Interval::midpoint).sum()
    }

    pub fn truncated(&self) -> bool {
        self.steps_achieved < self.requested_steps
    }

    /// Radii never shrink after the first step.
    pub fn radii_monotone(&self) -> bool {
        self.radii.windows(2).skip(1).all(|w| w[1] >= w[0])
    }

    /// CSV of per-step midpoints and radii.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let names = self.config.system.state_names();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        for n in names {
            header.push(format!("{n}_mid"));
            header.push(format!("{n}_rad"));
        }
        header.extend(["reward_lo".to_string(), "reward_hi".to_string()]);
        w.write_record(&header).map_err(crate::dynamics::csv_err)?;
        let fmt = crate::decimal::format;
        for (k, e) in self.enclosures.iter().enumerate() {
            let mut row = vec![k.to_string(), fmt(k as f64 * self.config.h)];
            for x in e.iter() {
                row.push(fmt(x.midpoint()));
                row.push(fmt(x.radius()));
            }
            match self.rewards.get(k) {
                Some(r) => row.extend([fmt(r.lo()), fmt(r.hi())]),
                None => row.extend([String::new(), String::new()]),
            }
            w.write_record(&row).map_err(crate::dynamics::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Whether one enclosure is provably away from the goal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persistence {
    Persistent,
    Stabilized,
    Indeterminate,
}

/// Classify one state enclosure against the stabilization set at level `eps`.
///
/// Pendulum: the box (arccos cos θ, ω) ∈ [0, eps] × [−eps, eps].
/// Cartpole: the seminorm max{|ẋ|, |θ wrapped to [−π, π]|, |θ̇|} ≤ eps.
pub fn classify(system: System, s: &[Interval], eps: f64) -> Persistence {
    let wrapped =
        |th: Interval| th.cos().try_acos().unwrap_or(Interval::new(0.0, std::f64::consts::PI.next_up()).unwrap());
    let comps: Vec<Interval> = match system {
        System::Pendulum => vec![wrapped(s[0]), s[1]],
        System::CartpoleSwingup => vec![s[1], wrapped(s[2]), s[3]],
    };
    if comps.iter().any(|c| c.mig() > eps) {
        Persistence::Persistent
    } else if comps.iter().all(|c| c.mag() <= eps) {
        Persistence::Stabilized
    } else {
        Persistence::Indeterminate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub eps: f64,
    pub h: f64,
    pub steps: Vec<Persistence>,
    /// Number of steps the claim covers.
    pub horizon: usize,
}

impl PersistenceReport {
    /// First provably stabilized step, if no indeterminate step precedes it.
    pub fn first_stabilized(&self) -> Result<Option<usize>> {
        for (k, p) in self.steps.iter().enumerate() {
            match p {
                Persistence::Persistent => {}
                Persistence::Stabilized => return Ok(Some(k)),
                Persistence::Indeterminate => return Err(Error::Indeterminate { step: k }),
            }
        }
        Ok(None)
    }

    /// First stabilization time, else the covered horizon times h.
    pub fn t_p(&self) -> Result<f64> {
        Ok(self.first_stabilized()?.unwrap_or(self.horizon) as f64 * self.h)
    }

    /// Every step provably persistent.
    pub fn all_persistent(&self) -> bool {
        self.steps.iter().all(|p| *p == Persistence::Persistent)
    }
}

/// Per-step persistence of a certificate's enclosures (one per achieved
/// step; the final enclosure has no step after it).
pub fn persistence_check(cert: &PersistentCertificate, eps: f64) -> PersistenceReport {
    let steps =
        cert.enclosures[..cert.steps_achieved].iter().map(|e| classify(cert.config.system, &e.0, eps)).collect();
    PersistenceReport { eps, h: cert.config.h, steps, horizon: cert.steps_achieved }
}

/// Persistence of a float trajectory (thin enclosures of its states).
pub fn persistence_of_states(system: System, h: f64, states: &[Vec<f64>], eps: f64) -> PersistenceReport {
    let n = states.len().saturating_sub(1);
    let steps = states[..n].iter().map(|s| classify(system, &IntervalVector::from_points(s).0, eps)).collect();
    PersistenceReport { eps, h, steps, horizon: n }
}

/// Persistence of a proven orbit: every ball over one period is provably
/// away from the goal, hence so is the whole infinite trajectory.
pub fn orbit_persistence(cert: &ProofCertificate, eps: f64) -> PersistenceReport {
    let steps = (0..cert.m).map(|i| classify(cert.config.system, &cert.state_enclosure(i).0, eps)).collect();
    PersistenceReport { eps, h: cert.h(), steps, horizon: cert.m }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBounds {
    pub sum: Interval,
    pub achieved: usize,
    pub requested: usize,
}

impl PenaltyBounds {
    pub fn truncated(&self) -> bool {
        self.achieved < self.requested
    }

    /// The full-horizon sum, or `HorizonTruncated`.
    pub fn complete(&self) -> Result<Interval> {
        if self.truncated() {
            Err(Error::HorizonTruncated { achieved: self.achieved, requested: self.requested })
        } else {
            Ok(self.sum)
        }
    }
}

/// Rigorous bounds on Σ p over the achieved steps. The lower bound is the
/// reportable claim; it stays valid when the horizon was truncated.
pub fn accumulated_penalty_bounds(cert: &PersistentCertificate, kind: PenaltyKind) -> Result<PenaltyBounds> {
    let mut sum = Interval::point(0.0);
    for (s, a) in cert.enclosures.iter().zip(&cert.actions) {
        sum = sum + penalty(kind, &cert.config, &s.0, a)?;
    }
    Ok(PenaltyBounds { sum, achieved: cert.steps_achieved, requested: cert.requested_steps })
}

/// Lower bound on the penalty accumulated over any `n` consecutive steps of
/// a proven orbit: `n` times the smallest per-step lower bound.
pub fn orbit_penalty_lower_bound(cert: &ProofCertificate, kind: PenaltyKind, n: usize) -> Result<f64> {
    let h = Interval::point(cert.h());
    let mut per_step = Vec::with_capacity(cert.m);
    for i in 0..cert.m {
        let bx = cert.state_enclosure(i);
        let tr = crate::dynamics::step_with_h(&cert.config, &cert.controller, &bx.0, &h)?;
        per_step.push(penalty(kind, &cert.config, &bx.0, tr.reward_action(&cert.config))?.lo());
    }
    let min_step = per_step.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(crate::interval::round::mul_down(n as f64, min_step))
}
