use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use aeos_bench::config::RunConfig;
use aeos_bench::files::{
    assets_path, load_scenario, load_split, manifest_path, scenario_files, scenario_path, DatasetEntry, DatasetIndex,
    DATASET_FORMAT,
};
use aeos_bench::harness::{evaluate_parallel, EvalOptions, SchedulerSpec};
use aeos_bench::pipeline::{annotate_all, train_matcher};
use aeos_bench::report::write_report;
use aeos_core::io::{
    load_document, load_trajectory, save_document, save_trajectory, ASSET_POOL_FORMAT, MANIFEST_FORMAT,
    SCENARIO_FORMAT,
};
use aeos_core::metrics::{score, CsWeights};
use aeos_core::rng::rng_from_seed;
use aeos_core::scengen::{build_splits, generate_asset_pool, generate_split_scenarios, AssetPool, SplitSpec};
use aeos_core::sim::replay;
use aeos_matcher::checkpoint::{load_checkpoint, save_checkpoint};
use aeos_matcher::features::FeatureLayout;
use aeos_matcher::scheduler::MatcherScheduler;

const EXIT_PARTIAL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "aeos", version, about = "Earth-observation constellation scheduling benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample satellites until `count` of them pass the slew test.
    GenAssets {
        #[arg(long)]
        count: usize,
        #[arg(long, env = "AEOS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate the asset pool, split manifests and scenarios.
    GenScenarios {
        /// `desk`, `full`, or a JSON split specification.
        #[arg(long, default_value = "desk")]
        split_spec: String,
        #[arg(long, env = "AEOS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Reuse an existing asset pool instead of generating one.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Produce ground-truth trajectories for a scenario file or directory.
    Annotate {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Acceptance threshold on CS.
        #[arg(long)]
        tau_a: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, env = "AEOS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the matcher on an annotated dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run one scheduler over every scenario of a split and write a CSV report.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        scheduler: SchedulerKind,
        /// Required for the matcher.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, env = "AEOS_SEED", default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record per-scenario wall time (makes reports non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Re-simulate a stored trajectory and compare its metrics.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerKind {
    Random,
    Greedy,
    Hillclimb,
    Matcher,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::GenAssets {
            count,
            seed,
            out,
            config,
        } => gen_assets(count, seed, &out, config.as_deref()),
        Command::GenScenarios {
            split_spec,
            seed,
            out,
            assets,
            config,
        } => gen_scenarios(&split_spec, seed, &out, assets.as_deref(), config.as_deref()),
        Command::Annotate {
            scenarios,
            out,
            tau_a,
            workers,
            seed,
            config,
        } => annotate(&scenarios, &out, tau_a, workers, seed, config.as_deref()),
        Command::Train {
            dataset,
            config,
            checkpoint,
        } => train(&dataset, config.as_deref(), &checkpoint),
        Command::Evaluate {
            manifest,
            scheduler,
            checkpoint,
            workers,
            seed,
            out,
            config,
            timing,
        } => evaluate(
            &manifest,
            scheduler,
            checkpoint.as_deref(),
            workers,
            seed,
            out.as_deref(),
            config.as_deref(),
            timing,
        ),
        Command::Replay {
            trajectory,
            scenario,
            config,
        } => replay_cmd(&trajectory, &scenario, config.as_deref()),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    RunConfig::load(path)
        .with_context(|| format!("reading config {}", path.map(|p| p.display().to_string()).unwrap_or_default()))
        .map_err(Failure::Data)
}

fn gen_assets(count: usize, seed: u64, out: &Path, config: Option<&Path>) -> Outcome {
    if count == 0 {
        return Err(Failure::Usage("--count must be positive".into()));
    }
    let cfg = load_config(config)?;
    let pool = generate_asset_pool(&mut rng_from_seed(seed), count, "asset", &Default::default())
        .map_err(|e| anyhow!(e))?;
    save_document(out, ASSET_POOL_FORMAT, &cfg.sim.config_hash(), &pool).context("writing asset pool")?;
    eprintln!(
        "{} assets, {} rejected ({:.1}%)",
        pool.assets.len(),
        pool.rejected,
        100.0 * pool.rejection_rate()
    );
    Ok(0)
}

fn split_spec(arg: &str) -> Result<SplitSpec, Failure> {
    match arg {
        "desk" => Ok(SplitSpec::desk()),
        "full" => Ok(SplitSpec::full()),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading split spec {path}"))?;
            Ok(serde_json::from_str(&text).with_context(|| format!("parsing split spec {path}"))?)
        }
    }
}

fn gen_scenarios(arg: &str, seed: u64, out: &Path, assets: Option<&Path>, config: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let hash = cfg.sim.config_hash();
    let spec = split_spec(arg)?;
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let pool = match assets {
        Some(p) => {
            let (pool, h): (AssetPool, String) = load_document(p, ASSET_POOL_FORMAT).context("reading asset pool")?;
            if h != hash {
                return Err(Failure::Data(anyhow!("asset pool has config hash {h}, expected {hash}")));
            }
            pool
        }
        None => generate_asset_pool(&mut rng, spec.total_assets(), "asset", &Default::default())
            .map_err(|e| anyhow!(e))?,
    };
    let ids: Vec<String> = pool.assets.iter().map(|a| a.asset_id.clone()).collect();
    let manifests = build_splits(&mut rng, &ids, &spec).map_err(|e| anyhow!(e))?;
    fs::create_dir_all(out).context("creating output directory")?;
    save_document(&assets_path(out), ASSET_POOL_FORMAT, &hash, &pool).context("writing asset pool")?;
    for m in &manifests {
        let scenarios =
            generate_split_scenarios(m, &pool.assets, &spec, Default::default()).map_err(|e| anyhow!(e))?;
        fs::create_dir_all(out.join(m.split.as_str())).context("creating split directory")?;
        for s in &scenarios {
            save_document(&scenario_path(out, m.split, &s.scenario_id), SCENARIO_FORMAT, &hash, s)
                .context("writing scenario")?;
        }
        save_document(&manifest_path(out, m.split), MANIFEST_FORMAT, &hash, m).context("writing manifest")?;
        eprintln!("{}: {} scenarios", m.split, scenarios.len());
    }
    Ok(0)
}

fn annotate(input: &Path, out: &Path, tau_a: Option<f64>, workers: usize, seed: u64, config: Option<&Path>) -> Outcome {
    if workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    let cfg = load_config(config)?;
    let mut ac = cfg.annotate;
    if let Some(t) = tau_a {
        if !(t > 0.0) {
            return Err(Failure::Usage("--tau-a must be positive".into()));
        }
        ac.tau_a = t;
    }
    let hash = cfg.sim.config_hash();
    let mut scenarios = Vec::new();
    let mut failed = 0;
    for path in scenario_files(input)? {
        match load_scenario(&path, &hash) {
            Ok(s) => scenarios.push(s),
            Err(e) => {
                eprintln!("skipping {}: {e:#}", path.display());
                failed += 1;
            }
        }
    }
    let annotations = annotate_all(&scenarios, cfg.sim, &ac, seed, workers)?;
    fs::create_dir_all(out.join("scenarios")).context("creating dataset directory")?;
    let mut index = DatasetIndex::default();
    for (s, ann) in scenarios.iter().zip(&annotations) {
        if !ann.accepted {
            eprintln!(
                "{}: rejected after {} rounds (CS {:.3})",
                s.scenario_id,
                ann.rounds,
                ann.report.cs.unwrap_or(f64::INFINITY)
            );
            continue;
        }
        let entry = DatasetEntry {
            scenario_id: s.scenario_id.clone(),
            scenario: PathBuf::from("scenarios").join(format!("{}.json", s.scenario_id)),
            trajectory: PathBuf::from(format!("{}.jsonl", s.scenario_id)),
        };
        save_document(&out.join(&entry.scenario), SCENARIO_FORMAT, &hash, s).context("writing scenario")?;
        save_trajectory(&out.join(&entry.trajectory), &ann.log).context("writing trajectory")?;
        index.entries.push(entry);
    }
    save_document(&out.join("dataset.json"), DATASET_FORMAT, &hash, &index).context("writing dataset index")?;
    println!("{} of {} scenarios accepted", index.entries.len(), scenarios.len());
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn train(dataset: &Path, config: Option<&Path>, checkpoint: &Path) -> Outcome {
    let cfg = load_config(config)?;
    let hash = cfg.sim.config_hash();
    let index_path = if dataset.is_dir() { dataset.join("dataset.json") } else { dataset.to_path_buf() };
    let root = index_path.parent().unwrap_or(Path::new("."));
    let (index, h): (DatasetIndex, String) =
        load_document(&index_path, DATASET_FORMAT).context("reading dataset index")?;
    if h != hash {
        return Err(Failure::Data(anyhow!("dataset has config hash {h}, expected {hash}")));
    }
    let mut pairs = Vec::with_capacity(index.entries.len());
    for e in &index.entries {
        let s = load_scenario(&root.join(&e.scenario), &hash)?;
        let log = load_trajectory(&root.join(&e.trajectory))
            .with_context(|| e.trajectory.display().to_string())?;
        if log.header.config_hash != hash {
            return Err(Failure::Data(anyhow!("{} was simulated under another config", e.scenario_id)));
        }
        pairs.push((s, log));
    }
    if pairs.is_empty() {
        return Err(Failure::Data(anyhow!("dataset is empty")));
    }
    let run = train_matcher(&pairs, cfg.sim, cfg.train, &cfg.explore).map_err(|e| anyhow!(e))?;
    let first = run.pretrain_losses.first().copied().unwrap_or(f64::NAN);
    let last = run.trainer.history.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} optimizer steps, loss {first:.4} -> {last:.4}, {} trajectories after {} stages",
        run.trainer.history.len(),
        run.dataset.len(),
        run.stages.len()
    );
    save_checkpoint(checkpoint, &run.trainer.model, &run.trainer.norm, run.trainer.config.tau_s)
        .context("writing checkpoint")?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    manifest: &Path,
    kind: SchedulerKind,
    checkpoint: Option<&Path>,
    workers: usize,
    seed: u64,
    out: Option<&Path>,
    config: Option<&Path>,
    timing: bool,
) -> Outcome {
    if workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    let cfg = load_config(config)?;
    let spec = match kind {
        SchedulerKind::Random => SchedulerSpec::Random {
            decision_interval: cfg.random_decision_interval,
        },
        SchedulerKind::Greedy => SchedulerSpec::Greedy,
        SchedulerKind::Hillclimb => SchedulerSpec::HillClimb(cfg.hillclimb),
        SchedulerKind::Matcher => {
            let path = checkpoint.ok_or_else(|| Failure::Usage("the matcher needs --checkpoint".into()))?;
            let ck = load_checkpoint(path, Some(&FeatureLayout::default())).map_err(|e| anyhow!(e))?;
            SchedulerSpec::Matcher {
                scheduler: Box::new(MatcherScheduler::new(ck.model, ck.norm, ck.tau_s)),
                decision_interval: cfg.matcher_decision_interval,
            }
        }
    };
    let (_, jobs) = load_split(manifest, &cfg.sim.config_hash())?;
    let opts = EvalOptions {
        workers,
        base_seed: seed,
        sim_config: cfg.sim,
        weights: CsWeights::STANDARD,
        timing,
    };
    let output = evaluate_parallel(&jobs, &spec, &opts).map_err(|e| anyhow!(e))?;
    match out {
        Some(p) => write_report(&output.rows, fs::File::create(p).context("creating report")?),
        None => write_report(&output.rows, std::io::stdout().lock()),
    }
    .context("writing report")?;
    if output.failures > 0 {
        eprintln!("{} of {} scenarios failed", output.failures, output.rows.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn replay_cmd(trajectory: &Path, scenario: &Path, config: Option<&Path>) -> Outcome {
    let cfg = load_config(config)?;
    let hash = cfg.sim.config_hash();
    let log = load_trajectory(trajectory).context("reading trajectory")?;
    if log.header.config_hash != hash {
        return Err(Failure::Data(anyhow!(
            "trajectory has config hash {}, expected {hash}",
            log.header.config_hash
        )));
    }
    let s = load_scenario(scenario, &hash)?;
    let again = replay(&log, &s, cfg.sim).map_err(|e| anyhow!(e))?;
    let stored = score(&log, &s, &CsWeights::STANDARD).map_err(|e| anyhow!(e))?;
    let replayed = score(&again, &s, &CsWeights::STANDARD).map_err(|e| anyhow!(e))?;
    println!("{}", serde_json::to_string_pretty(&replayed).context("formatting metrics")?);
    if again.steps != log.steps || again.footer != log.footer || replayed != stored {
        eprintln!("replay diverges from the stored trajectory");
        return Ok(EXIT_DATA);
    }
    Ok(0)
}
