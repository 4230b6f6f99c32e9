//! Evolutionary search for penalty-maximizing persistent solutions, controller
//! fine-tuning, and periodic-candidate detection.

mod cmaes;
mod periodic;

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cmaes::{default_population, maximize, CmaesConfig, CmaesResult};
pub use periodic::{detect_periodic_candidate, recurrence_gap, Recurrence};

use crate::controllers::ControllerSpec;
use crate::dynamics::{rollout, rollout_with_penalty, MdpConfig, PenaltyKind, System, Trajectory};
use crate::error::{Error, Result};

/// Score assigned to ICs or parameters whose rollout hits a guard (e.g. an
/// exact division by zero); finite so CMA-ES ranking still works.
const FAILED_ROLLOUT: f64 = -1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub threshold_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub cmaes: CmaesConfig,
    /// IC search box, one `[lo, hi]` per state component.
    pub bounds: Vec<[f64; 2]>,
    pub episode_len: usize,
    pub terminations_disabled: bool,
}

impl SearchConfig {
    pub fn for_system(system: System) -> Self {
        match system {
            System::Pendulum => Self {
                cmaes: CmaesConfig::default(),
                bounds: vec![[-TAU, TAU], [-8.0, 8.0]],
                episode_len: 1000,
                terminations_disabled: true,
            },
            System::CartpoleSwingup => Self {
                cmaes: CmaesConfig::default(),
                bounds: vec![[-0.5, 0.5], [-0.5, 0.5], [PI - 0.5, PI + 0.5], [-0.5, 0.5]],
                episode_len: 2000,
                terminations_disabled: true,
            },
        }
    }

    pub fn validate(&self, system: System) -> Result<()> {
        if self.bounds.len() != system.dim() {
            return Err(Error::InvalidConfig(format!("search box needs {} ranges", system.dim())));
        }
        if self.bounds.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(Error::InvalidConfig("search box needs lo < hi".into()));
        }
        if self.episode_len == 0 {
            return Err(Error::InvalidConfig("episode length must be at least 1".into()));
        }
        if self.cmaes.population.is_some_and(|l| l < 4) {
            return Err(Error::InvalidConfig("population must be at least 4".into()));
        }
        Ok(())
    }

    /// The MDP the search actually simulates.
    pub fn search_mdp(&self, cfg: &MdpConfig) -> MdpConfig {
        let mut c = cfg.clone().with_episode_len(self.episode_len);
        if self.terminations_disabled {
            c.terminations = false;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ic: Vec<f64>,
    pub accumulated_penalty: f64,
    pub seed: u64,
    pub restart: usize,
}

impl Candidate {
    /// Deterministic re-rollout from the stored IC.
    pub fn trajectory(&self, cfg: &MdpConfig, ctrl: &ControllerSpec, kind: PenaltyKind) -> Result<Trajectory> {
        rollout_with_penalty(cfg, ctrl, &self.ic, cfg.episode_len, kind)
    }
}

/// `n` ICs drawn from ρ0 with a fixed seed.
pub fn sample_initial_states(cfg: &MdpConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| cfg.sample_initial(&mut rng)).collect()
}

/// Maximum of `score` over the samples.
pub fn threshold_from<T: Sync>(samples: &[T], score: impl Fn(&T) -> f64 + Sync) -> f64 {
    samples.par_iter().map(&score).reduce(|| f64::NEG_INFINITY, f64::max)
}

/// M = max accumulated penalty over `n_random` ρ0 rollouts of length
/// `cfg.episode_len`.
pub fn estimate_threshold(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    kind: PenaltyKind,
    n_random: usize,
    seed: u64,
) -> Result<f64> {
    if n_random == 0 {
        return Err(Error::InvalidConfig("need at least one random rollout".into()));
    }
    cfg.validate()?;
    cfg.check_controller(ctrl)?;
    let ics = sample_initial_states(cfg, n_random, seed);
    Ok(threshold_from(&ics, |ic| {
        rollout_with_penalty(cfg, ctrl, ic, cfg.episode_len, kind).map_or(FAILED_ROLLOUT, |t| t.accumulated_penalty())
    }))
}

/// CMA-ES over initial conditions maximizing the accumulated penalty; one
/// candidate per restart, ranked by penalty (descending).
pub fn search_persistent(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    kind: PenaltyKind,
    search: &SearchConfig,
    seed: u64,
) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    cfg.check_controller(ctrl)?;
    search.validate(cfg.system)?;
    let mdp = search.search_mdp(cfg);
    let objective = |ic: &[f64]| {
        rollout_with_penalty(&mdp, ctrl, ic, mdp.episode_len, kind).map_or(FAILED_ROLLOUT, |t| t.accumulated_penalty())
    };
    let lo: Vec<f64> = search.bounds.iter().map(|b| b[0]).collect();
    let hi: Vec<f64> = search.bounds.iter().map(|b| b[1]).collect();
    Ok(maximize(objective, &lo, &hi, None, &search.cmaes, seed)
        .into_iter()
        .map(|r| Candidate { ic: r.x, accumulated_penalty: r.value, seed, restart: r.restart })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub cmaes: CmaesConfig,
    /// Each constant c is searched in c ± max(rel·|c|, abs).
    pub radius_rel: f64,
    pub radius_abs: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            cmaes: CmaesConfig { restarts: 4, max_generations: 60, sigma0: 0.1, ..CmaesConfig::default() },
            radius_rel: 0.5,
            radius_abs: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub spec: ControllerSpec,
    pub mean_return_before: f64,
    pub mean_return_after: f64,
}

/// Mean return over fixed ICs; guard failures count as a very bad return.
pub fn mean_return(cfg: &MdpConfig, ctrl: &ControllerSpec, ics: &[Vec<f64>]) -> f64 {
    let total: f64 = ics
        .iter()
        .map(|ic| rollout(cfg, ctrl, ic, cfg.episode_len).map_or(FAILED_ROLLOUT, |t| t.episode_return()))
        .sum();
    total / ics.len() as f64
}

/// CMA-ES over the controller's constants maximizing mean return on
/// `n_episodes` fixed-seed ICs. The input is returned unchanged unless a
/// strictly better constant vector is found.
pub fn fine_tune(
    spec: &ControllerSpec,
    cfg: &MdpConfig,
    n_episodes: usize,
    tune: &TuneConfig,
    seed: u64,
) -> Result<TuneResult> {
    cfg.validate()?;
    cfg.check_controller(spec)?;
    let k0 = spec.constants();
    if k0.is_empty() {
        return Err(Error::NoFreeConstants);
    }
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("need at least one episode".into()));
    }
    let ics = sample_initial_states(cfg, n_episodes, seed);
    let before = mean_return(cfg, spec, &ics);
    let objective = |k: &[f64]| match spec.with_constants(k) {
        Ok(s) => mean_return(cfg, &s, &ics),
        Err(_) => FAILED_ROLLOUT,
    };
    let radius: Vec<f64> = k0.iter().map(|c| (tune.radius_rel * c.abs()).max(tune.radius_abs)).collect();
    let lo: Vec<f64> = k0.iter().zip(&radius).map(|(c, r)| c - r).collect();
    let hi: Vec<f64> = k0.iter().zip(&radius).map(|(c, r)| c + r).collect();
    let best = maximize(objective, &lo, &hi, Some(&k0), &tune.cmaes, seed).remove(0);
    if best.value > before {
        let tuned = spec.with_constants(&best.x)?;
        let after = mean_return(cfg, &tuned, &ics);
        Ok(TuneResult { spec: tuned, mean_return_before: before, mean_return_after: after })
    } else {
        Ok(TuneResult { spec: spec.clone(), mean_return_before: before, mean_return_after: before })
    }
}
