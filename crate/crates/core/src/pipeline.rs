//! End-to-end runs: the E/SI × (h, h/2) return grid, and search → detect →
//! refine → prove → certify bundles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    accumulated_penalty_bounds, persistence_check, rigorous_rollout, PenaltyBounds, PersistentCertificate,
    RolloutOptions,
};
use crate::controllers::ControllerSpec;
use crate::dynamics::{rollout_with_penalty, MdpConfig, PenaltyKind, Scheme};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::prover::{prove_orbit, OrbitCandidate, ProofCertificate, ProveOptions};
use crate::search::{
    detect_periodic_candidate, estimate_threshold, sample_initial_states, search_persistent, Candidate, PenaltySpec,
    SearchConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub scheme: Scheme,
    pub h: f64,
    pub episode_len: usize,
    pub returns: MeanStd,
    /// Shaped accumulated penalty (cartpole only).
    pub penalties: Option<MeanStd>,
    pub per_episode: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub h: f64,
    /// Paired per-IC |R_E − R_SI|.
    pub abs_diff: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTable {
    pub controller: String,
    pub n_episodes: usize,
    pub seed: u64,
    pub cells: Vec<GridCell>,
    pub discrepancies: Vec<Discrepancy>,
}

impl ReturnTable {
    pub fn cell(&self, scheme: Scheme, h: f64) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.scheme == scheme && c.h == h)
    }

    pub fn discrepancy(&self, h: f64) -> Option<&Discrepancy> {
        self.discrepancies.iter().find(|d| d.h == h)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "h", "episode_len", "mean_return", "std_return", "mean_penalty", "std_penalty"])
            .map_err(crate::dynamics::csv_err)?;
        let fmt = crate::decimal::format;
        for c in &self.cells {
            let (pm, ps) = c.penalties.map_or((String::new(), String::new()), |p| (fmt(p.mean), fmt(p.std)));
            w.write_record([
                c.scheme.to_string(),
                fmt(c.h),
                c.episode_len.to_string(),
                fmt(c.returns.mean),
                fmt(c.returns.std),
                pm,
                ps,
            ])
            .map_err(crate::dynamics::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Episode length at step size `h` covering the same time as `base`.
pub fn scaled_episode_len(base: &MdpConfig, h: f64) -> usize {
    ((base.episode_len as f64 * base.h / h).round() as usize).max(1)
}

/// Mean ± std returns over the grid {E, SI} × {h, h/2}, all cells on the
/// same `n_episodes` ρ0 initial states, plus paired E/SI discrepancies.
pub fn eval_returns(base: &MdpConfig, ctrl: &ControllerSpec, n_episodes: usize, seed: u64) -> Result<ReturnTable> {
    base.validate()?;
    base.check_controller(ctrl)?;
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("need at least one episode".into()));
    }
    let ics = sample_initial_states(base, n_episodes, seed);
    let kind = PenaltyKind::for_system(base.system);
    let mut cells = Vec::new();
    for h in [base.h, base.h / 2.0] {
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let mut cfg = base.clone().with_episode_len(scaled_episode_len(base, h));
            cfg.h = h;
            cfg.scheme = scheme;
            let runs = ics
                .par_iter()
                .map(|ic| rollout_with_penalty(&cfg, ctrl, ic, cfg.episode_len, kind))
                .collect::<Result<Vec<_>>>()?;
            let rets: Vec<f64> = runs.iter().map(|t| t.episode_return()).collect();
            let pens: Vec<f64> = runs.iter().map(|t| t.accumulated_penalty()).collect();
            cells.push(GridCell {
                scheme,
                h,
                episode_len: cfg.episode_len,
                returns: MeanStd::of(&rets),
                penalties: (kind == PenaltyKind::CartpoleShaped).then(|| MeanStd::of(&pens)),
                per_episode: rets,
            });
        }
    }
    let discrepancies = cells
        .chunks(2)
        .map(|pair| {
            let diffs: Vec<f64> =
                pair[0].per_episode.iter().zip(&pair[1].per_episode).map(|(e, s)| (e - s).abs()).collect();
            Discrepancy { h: pair[0].h, abs_diff: MeanStd::of(&diffs) }
        })
        .collect();
    Ok(ReturnTable { controller: ctrl.name.clone(), n_episodes, seed, cells, discrepancies })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub search: SearchConfig,
    /// ρ0 rollouts used to set the threshold M.
    pub n_random: usize,
    /// Candidates (best first) passed on to detection and proof.
    pub top_k: usize,
    pub recurrence_tol: f64,
    pub prove: ProveOptions,
    pub rollout: RolloutOptions,
    /// Extra initial conditions, always processed alongside the top search
    /// results.
    #[serde(default)]
    pub extra_ics: Vec<Vec<f64>>,
}

impl PipelineConfig {
    pub fn for_config(cfg: &MdpConfig) -> Self {
        Self {
            search: SearchConfig::for_system(cfg.system),
            n_random: 100,
            top_k: 5,
            recurrence_tol: 0.05,
            prove: ProveOptions::default(),
            rollout: RolloutOptions::default(),
            extra_ics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OrbitOutcome {
    Proven { certificate: Box<ProofCertificate> },
    ProofFailed { m: usize, j: i32, error: String, smoothness: bool },
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub rank: usize,
    pub candidate: Candidate,
    pub above_threshold: bool,
    pub orbit: OrbitOutcome,
    pub persistent: Option<PersistentCertificate>,
    pub penalty_bounds: Option<PenaltyBounds>,
    pub persistent_error: Option<String>,
}

impl CandidateReport {
    /// The rigorous rollout provably reaches the stabilization set.
    pub fn stabilizes(&self) -> bool {
        self.persistent
            .as_ref()
            .is_some_and(|p| matches!(persistence_check(p, p.persistence_eps).first_stabilized(), Ok(Some(_))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub config: MdpConfig,
    pub controller: ControllerSpec,
    pub penalty: PenaltySpec,
    pub seed: u64,
    pub candidates: Vec<CandidateReport>,
}

impl Bundle {
    pub fn proven(&self) -> impl Iterator<Item = &ProofCertificate> {
        self.candidates.iter().filter_map(|c| match &c.orbit {
            OrbitOutcome::Proven { certificate } => Some(certificate.as_ref()),
            _ => None,
        })
    }

    pub fn proof_failures(&self) -> usize {
        self.candidates.iter().filter(|c| matches!(c.orbit, OrbitOutcome::ProofFailed { .. })).count()
    }

    /// Candidates above M whose certificate does not show them stabilizing.
    pub fn persistent_above_threshold(&self) -> usize {
        self.candidates.iter().filter(|c| c.above_threshold && !c.stabilizes()).count()
    }
}

fn process(
    cfg: &MdpConfig,
    ctrl: &ControllerSpec,
    kind: PenaltyKind,
    pcfg: &PipelineConfig,
    rank: usize,
    cand: Candidate,
    threshold: f64,
) -> CandidateReport {
    let mut report = CandidateReport {
        rank,
        above_threshold: cand.accumulated_penalty > threshold,
        candidate: cand,
        orbit: OrbitOutcome::NotFound,
        persistent: None,
        penalty_bounds: None,
        persistent_error: None,
    };
    let ic = report.candidate.ic.clone();
    report.orbit = match report.candidate.trajectory(cfg, ctrl, kind) {
        Err(e) => OrbitOutcome::ProofFailed { m: 0, j: 0, error: e.to_string(), smoothness: true },
        Ok(traj) => match detect_periodic_candidate(&traj.states, cfg.system.angle_index(), pcfg.recurrence_tol) {
            None => OrbitOutcome::NotFound,
            Some(rec) => {
                let attempt =
                    OrbitCandidate::from_recurrence(cfg, ctrl, &rec).and_then(|c| prove_orbit(&c, &pcfg.prove));
                match attempt {
                    Ok(cert) => OrbitOutcome::Proven { certificate: Box::new(cert) },
                    Err(e) => OrbitOutcome::ProofFailed {
                        m: rec.m,
                        j: rec.j,
                        smoothness: matches!(e, Error::SmoothnessUnverifiable(_) | Error::Guard(_)),
                        error: e.to_string(),
                    },
                }
            }
        },
    };
    // The persistent-solution certificate is produced on every path.
    match rigorous_rollout(cfg, ctrl, &IntervalVector::from_points(&ic), cfg.episode_len, &pcfg.rollout) {
        Ok(pc) => {
            report.penalty_bounds = accumulated_penalty_bounds(&pc, kind).ok();
            report.persistent = Some(pc);
        }
        Err(e) => report.persistent_error = Some(e.to_string()),
    }
    report
}

/// Search for persistent solutions, then for each of the best candidates try
/// to prove a nearby periodic orbit and certify the solution itself. Whether
/// a candidate beats the threshold M is reported, not used as a filter.
pub fn run_pipeline(cfg: &MdpConfig, ctrl: &ControllerSpec, pcfg: &PipelineConfig, seed: u64) -> Result<Bundle> {
    cfg.validate()?;
    cfg.check_controller(ctrl)?;
    pcfg.search.validate(cfg.system)?;
    let kind = PenaltyKind::for_system(cfg.system);
    let mdp = pcfg.search.search_mdp(cfg);
    let threshold = estimate_threshold(&mdp, ctrl, kind, pcfg.n_random.max(1), seed)?;

    let mut found = search_persistent(cfg, ctrl, kind, &pcfg.search, seed)?;
    found.truncate(pcfg.top_k);
    let restarts = pcfg.search.cmaes.restarts;
    for (i, ic) in pcfg.extra_ics.iter().enumerate() {
        if ic.len() != cfg.system.dim() {
            return Err(Error::DimMismatch(format!("extra initial state {i} has {} entries", ic.len())));
        }
        let p = rollout_with_penalty(&mdp, ctrl, ic, mdp.episode_len, kind)
            .map_or(f64::NEG_INFINITY, |t| t.accumulated_penalty());
        found.push(Candidate { ic: ic.clone(), accumulated_penalty: p, seed, restart: restarts + i });
    }
    found.sort_by(|a, b| b.accumulated_penalty.total_cmp(&a.accumulated_penalty).then(a.restart.cmp(&b.restart)));

    let candidates = found
        .into_par_iter()
        .enumerate()
        .map(|(rank, c)| process(&mdp, ctrl, kind, pcfg, rank, c, threshold))
        .collect();
    Ok(Bundle {
        config: mdp,
        controller: ctrl.clone(),
        penalty: PenaltySpec { kind, threshold_m: threshold },
        seed,
        candidates,
    })
}
