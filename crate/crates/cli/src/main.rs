use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use orbitcert::certify::{accumulated_penalty_bounds, rigorous_rollout, RolloutOptions};
use orbitcert::controllers::{builtin, ControllerSpec};
use orbitcert::dynamics::{rollout, MdpConfig, PenaltyKind, Scheme, System};
use orbitcert::pipeline::{eval_returns, run_pipeline, MeanStd, OrbitOutcome, PipelineConfig};
use orbitcert::prover::{candidate_from_trajectory, prove_orbit, OrbitCandidate, ProveOptions};
use orbitcert::search::{
    estimate_threshold, fine_tune, sample_initial_states, search_persistent, SearchConfig, TuneConfig,
};
use orbitcert::{Error, IntervalVector};

const EXIT_CONFIG: u8 = 2;
const EXIT_PROOF: u8 = 3;

#[derive(Parser)]
#[command(name = "orbitcert", version, about = "Search for and certify persistent solutions and periodic orbits")]
struct Cli {
    /// MDP config JSON; overrides --system/--scheme/--h.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Mdp {
    #[arg(long, default_value = "pendulum")]
    system: String,
    #[arg(long, default_value = "SI")]
    scheme: String,
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    /// Builtin controller name or path to a controller JSON file.
    #[arg(long)]
    controller: String,
}

#[derive(Args, Clone)]
struct Cmaes {
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    generations: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Float rollout to CSV; optionally detect a periodic-orbit candidate.
    Simulate {
        #[command(flatten)]
        mdp: Mdp,
        /// Comma-separated initial state.
        #[arg(long, allow_hyphen_values = true)]
        ic: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        /// Simulate this many ρ0 initial states instead of --ic.
        #[arg(long)]
        batch: Option<usize>,
        /// Write orbit_candidate.json when a recurrence is found.
        #[arg(long)]
        detect: bool,
    },
    /// Mean returns over {E, SI} × {h, h/2} with paired discrepancies.
    EvalReturns {
        #[command(flatten)]
        mdp: Mdp,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// CMA-ES search for penalty-maximizing initial conditions.
    Search {
        #[command(flatten)]
        mdp: Mdp,
        #[command(flatten)]
        cmaes: Cmaes,
        /// Episode length of the search (default 1000 pendulum, 2000 cartpole).
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 100)]
        n_random: usize,
    },
    /// Refine and prove an orbit candidate.
    Prove {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        r_star: f64,
        /// Prove with the step size as an unknown.
        #[arg(long)]
        variable_h: bool,
    },
    /// Interval rollout from a thin initial condition.
    Certify {
        #[command(flatten)]
        mdp: Mdp,
        #[arg(long, allow_hyphen_values = true)]
        ic: String,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1e-1)]
        radius_cap: f64,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Fine-tune controller constants for mean return.
    Tune {
        #[command(flatten)]
        mdp: Mdp,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 60)]
        generations: usize,
    },
    /// Full search → refine → prove → certify run.
    Report {
        #[command(flatten)]
        mdp: Mdp,
        #[command(flatten)]
        cmaes: Cmaes,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, default_value_t = 100)]
        n_random: usize,
        /// Extra initial state to process (repeatable).
        #[arg(long = "extra-ic", allow_hyphen_values = true)]
        extra_ic: Vec<String>,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Simulate { .. } => "simulate",
            Cmd::EvalReturns { .. } => "eval-returns",
            Cmd::Search { .. } => "search",
            Cmd::Prove { .. } => "prove",
            Cmd::Certify { .. } => "certify",
            Cmd::Tune { .. } => "tune",
            Cmd::Report { .. } => "report",
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    seed: u64,
    tool_version: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    wall_time_s: f64,
}

const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory; records digests of everything written.
struct Outputs {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: BTreeMap::new() })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), data).with_context(|| format!("writing {name}"))?;
        self.written.insert(name.to_string(), sha256_hex(data));
        Ok(())
    }

    /// JSON object output, tagged with the manifest that produced it.
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest".into(), MANIFEST.into());
        } else {
            v = serde_json::json!({ "manifest": MANIFEST, "data": v });
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }
}

struct Run {
    seed: u64,
    config_file: Option<PathBuf>,
    inputs: BTreeMap<String, String>,
    config_snapshot: serde_json::Value,
}

impl Run {
    fn read_input(&mut self, path: &Path) -> anyhow::Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    fn mdp(&mut self, m: &Mdp) -> anyhow::Result<MdpConfig> {
        let cfg = match self.config_file.clone() {
            Some(p) => {
                let text = self.read_input(&p)?;
                serde_json::from_str::<MdpConfig>(&text).map_err(Error::Json)?
            }
            None => {
                let system: System = m.system.parse()?;
                let scheme: Scheme = m.scheme.parse()?;
                MdpConfig::new(system, scheme, m.h)
            }
        };
        cfg.validate()?;
        self.config_snapshot = serde_json::to_value(&cfg)?;
        Ok(cfg)
    }

    fn controller(&mut self, name: &str) -> anyhow::Result<ControllerSpec> {
        if Path::new(name).is_file() {
            let text = self.read_input(Path::new(name))?;
            Ok(ControllerSpec::from_json(&text)?)
        } else {
            Ok(builtin(name)?)
        }
    }
}

fn parse_state(text: &str, system: System) -> anyhow::Result<Vec<f64>> {
    let v = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("state component `{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != system.dim() {
        return Err(Error::DimMismatch(format!("state needs {} components, got {}", system.dim(), v.len())).into());
    }
    Ok(v)
}

fn search_config(system: System, cmaes: &Cmaes, episodes: Option<usize>) -> SearchConfig {
    let mut s = SearchConfig::for_system(system);
    s.cmaes.restarts = cmaes.restarts;
    s.cmaes.max_generations = cmaes.generations;
    if let Some(n) = episodes {
        s.episode_len = n;
    }
    s
}

/// Runs the command; `Ok(true)` means proof failures were recorded.
fn execute(cli: &Cli, run: &mut Run, out: &mut Outputs) -> anyhow::Result<bool> {
    match &cli.cmd {
        Cmd::Simulate { mdp, ic, steps, batch, detect } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let n = steps.unwrap_or(cfg.episode_len);
            if let Some(b) = batch {
                let ics = sample_initial_states(&cfg, *b, run.seed);
                let rets = ics
                    .iter()
                    .map(|ic| rollout(&cfg, &ctrl, ic, n).map(|t| t.episode_return()))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut csv = String::from("episode,return\n");
                for (k, r) in rets.iter().enumerate() {
                    csv.push_str(&format!("{k},{}\n", orbitcert::decimal::format(*r)));
                }
                out.bytes("batch.csv", csv.as_bytes())?;
                out.json(
                    "summary.json",
                    &serde_json::json!({ "episodes": b, "steps": n, "returns": MeanStd::of(&rets) }),
                )?;
                return Ok(false);
            }
            let ic = parse_state(
                ic.as_deref().ok_or_else(|| Error::InvalidConfig("--ic or --batch is required".into()))?,
                cfg.system,
            )?;
            let traj = rollout(&cfg, &ctrl, &ic, n)?;
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            out.bytes("trajectory.csv", &buf)?;
            if *detect {
                if let Some(c) = candidate_from_trajectory(&cfg, &ctrl, &traj.states, 0.05) {
                    out.json("orbit_candidate.json", &c)?;
                }
            }
            Ok(false)
        }
        Cmd::EvalReturns { mdp, episodes } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let table = eval_returns(&cfg, &ctrl, *episodes, run.seed)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            out.bytes("returns.csv", &buf)?;
            out.json("returns.json", &table)?;
            Ok(false)
        }
        Cmd::Search { mdp, cmaes, episodes, n_random } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let search = search_config(cfg.system, cmaes, *episodes);
            let kind = PenaltyKind::for_system(cfg.system);
            let threshold = estimate_threshold(&search.search_mdp(&cfg), &ctrl, kind, *n_random, run.seed)?;
            let cands = search_persistent(&cfg, &ctrl, kind, &search, run.seed)?;
            out.json("candidates.json", &serde_json::json!({ "penalty": kind, "threshold_m": threshold, "search": search, "candidates": cands }))?;
            Ok(false)
        }
        Cmd::Prove { candidate, r_star, variable_h } => {
            let text = run.read_input(candidate)?;
            let cand: OrbitCandidate = serde_json::from_str(&text).map_err(Error::Json)?;
            run.config_snapshot = serde_json::to_value(&cand.config)?;
            let opts = ProveOptions {
                r_star_ladder: vec![*r_star, r_star / 10.0, r_star / 100.0],
                force_variable_h: *variable_h,
                ..ProveOptions::default()
            };
            match prove_orbit(&cand, &opts) {
                Ok(cert) => {
                    out.json("certificate.json", &cert)?;
                    Ok(false)
                }
                Err(e) => {
                    out.json(
                        "proof_failure.json",
                        &serde_json::json!({ "m": cand.m, "j": cand.j, "error": e.to_string() }),
                    )?;
                    Ok(true)
                }
            }
        }
        Cmd::Certify { mdp, ic, steps, radius_cap, eps } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let ic = parse_state(ic, cfg.system)?;
            let opts = RolloutOptions { radius_cap: *radius_cap, eps: *eps };
            let cert = rigorous_rollout(
                &cfg,
                &ctrl,
                &IntervalVector::from_points(&ic),
                steps.unwrap_or(cfg.episode_len),
                &opts,
            )?;
            let bounds = accumulated_penalty_bounds(&cert, PenaltyKind::for_system(cfg.system))?;
            let mut buf = Vec::new();
            cert.write_csv(&mut buf)?;
            out.bytes("persistent_certificate.csv", &buf)?;
            out.json(
                "persistent_certificate.json",
                &serde_json::json!({ "certificate": cert, "penalty_bounds": bounds }),
            )?;
            Ok(false)
        }
        Cmd::Tune { mdp, episodes, restarts, generations } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let mut tune = TuneConfig::default();
            tune.cmaes.restarts = *restarts;
            tune.cmaes.max_generations = *generations;
            let res = fine_tune(&ctrl, &cfg, *episodes, &tune, run.seed)?;
            out.bytes("tuned_controller.json", format!("{}\n", res.spec.to_json()?).as_bytes())?;
            out.json("tune.json", &res)?;
            Ok(false)
        }
        Cmd::Report { mdp, cmaes, episodes, top, n_random, extra_ic } => {
            let cfg = run.mdp(mdp)?;
            let ctrl = run.controller(&mdp.controller)?;
            let mut pcfg = PipelineConfig::for_config(&cfg);
            pcfg.search = search_config(cfg.system, cmaes, *episodes);
            pcfg.top_k = *top;
            pcfg.n_random = *n_random;
            pcfg.extra_ics = extra_ic.iter().map(|s| parse_state(s, cfg.system)).collect::<anyhow::Result<_>>()?;
            let bundle = run_pipeline(&cfg, &ctrl, &pcfg, run.seed)?;
            let mut csv = String::from(
                "rank,ic,accumulated_penalty,above_threshold,orbit,m,j,max_step_reward_hi,steps_certified\n",
            );
            for c in &bundle.candidates {
                let (status, m, j, max) = match &c.orbit {
                    OrbitOutcome::Proven { certificate } => (
                        "proven",
                        certificate.m,
                        certificate.j,
                        orbitcert::decimal::format(certificate.max_step_reward.hi()),
                    ),
                    OrbitOutcome::ProofFailed { m, j, .. } => ("proof_failed", *m, *j, String::new()),
                    OrbitOutcome::NotFound => ("not_found", 0, 0, String::new()),
                };
                let ic: Vec<String> = c.candidate.ic.iter().map(|v| orbitcert::decimal::format(*v)).collect();
                csv.push_str(&format!(
                    "{},{},{},{},{status},{m},{j},{max},{}\n",
                    c.rank,
                    ic.join(" "),
                    orbitcert::decimal::format(c.candidate.accumulated_penalty),
                    c.above_threshold,
                    c.persistent.as_ref().map_or(0, |p| p.steps_achieved)
                ));
            }
            out.bytes("summary.csv", csv.as_bytes())?;
            out.json("bundle.json", &serde_json::json!({ "pipeline": pcfg, "bundle": bundle }))?;
            Ok(bundle.proof_failures() > 0)
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    match e.downcast_ref::<Error>() {
        Some(
            Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::UnknownController(_)
            | Error::DimMismatch(_)
            | Error::Json(_)
            | Error::InvalidInterval { .. }
            | Error::NoFreeConstants,
        ) => true,
        _ => e
            .chain()
            .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::NotFound)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let start = Instant::now();
    let mut run = Run {
        seed: cli.seed,
        config_file: cli.config.clone(),
        inputs: BTreeMap::new(),
        config_snapshot: serde_json::Value::Null,
    };
    let result = Outputs::new(&cli.out).and_then(|mut out| {
        let failed = execute(&cli, &mut run, &mut out)?;
        let args: Vec<String> = std::env::args().skip(1).collect();
        let manifest = RunManifest {
            command: cli.cmd.name().to_string(),
            args,
            config: run.config_snapshot.clone(),
            seed: run.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs: run.inputs.clone(),
            outputs: out.written.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(out.dir.join(MANIFEST), text + "\n").context("writing manifest")?;
        Ok(failed)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("proof failures present; outputs written to {}", cli.out.display());
            ExitCode::from(EXIT_PROOF)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
