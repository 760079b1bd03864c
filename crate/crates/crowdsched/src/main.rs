//! Command-line front end: scenario generation, episode runs, scheduler
//! comparisons, and conflict-graph dumps.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crowdsched::graph::build_epoch_graph;
use crowdsched::model::{Scenario, WeightMode, EPS};
use crowdsched::scenario_gen::{generate, parse_range, GenParams};
use crowdsched::sim::{run_episode, EpisodeResult, Schedule, SchedulerKind, SimState, PERTURB_STREAM};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "crowdsched",
    version,
    about = "Epoch scheduler for heterogeneous crowdsensing fleets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random scenario file
    Generate(GenerateArgs),
    /// Run one scheduler over a scenario for a list of seeds
    Run(RunArgs),
    /// Run several schedulers on an identical scenario and seed list
    Compare(CompareArgs),
    /// Print one epoch's conflict graph as debug text
    DumpGraph(DumpGraphArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Grid size in km, WIDTHxHEIGHT
    #[arg(long, default_value = "30x30")]
    area: String,
    #[arg(long, default_value_t = 120)]
    tasks: usize,
    #[arg(long, default_value_t = 20)]
    charges: usize,
    /// Fleet sizes as workers,uavs,vehicles
    #[arg(long, default_value = "50,30,20")]
    agents: String,
    /// Minutes each agent remains available
    #[arg(long, default_value_t = 60.0)]
    online: f64,
    /// Task execution cost: fixed ("3") or uniform range ("2:4")
    #[arg(long, default_value = "3")]
    task_cost: String,
    /// Vehicle charging rate: fixed or uniform range
    #[arg(long, default_value = "10")]
    charge_power: String,
    /// Minutes between decision epochs
    #[arg(long, default_value_t = 10.0)]
    interval: f64,
    /// Episode horizon in minutes
    #[arg(long, default_value_t = 180.0)]
    limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_weight_mode, default_value = "hierarchical")]
    weights: WeightMode,
    /// Scenario file to write
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct EpisodeArgs {
    /// Scenario file produced by `generate`
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated episode seeds
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    /// Override the scenario's weight mode
    #[arg(long, value_parser = parse_weight_mode)]
    weights: Option<WeightMode>,
    /// Wind: extra power per km as LO:HI (bare flag uses 0.1:0.4)
    #[arg(long, num_args = 0..=1, default_missing_value = "0.1:0.4")]
    wind: Option<String>,
    /// Comms drain per epoch as LO:HI (bare flag uses 0.1:0.5)
    #[arg(long, num_args = 0..=1, default_missing_value = "0.1:0.5")]
    comms: Option<String>,
    /// Per-epoch probability that an idle agent fails permanently
    #[arg(long)]
    failure: Option<f64>,
    /// Probability that a committed pair silently dissolves
    #[arg(long)]
    match_loss: Option<f64>,
    /// Output directory (default: $CROWDSCHED_OUT, then ./out)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// One of mpq, ils, greedy, kwta
    #[arg(long)]
    scheduler: String,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Comma-separated scheduler names
    #[arg(long, default_value = "mpq,ils,greedy,kwta")]
    schedulers: String,
}

#[derive(Args)]
struct DumpGraphArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Decision epoch index to dump (0-based)
    #[arg(long, default_value_t = 0)]
    epoch: usize,
    #[arg(long, value_parser = parse_weight_mode)]
    weights: Option<WeightMode>,
}

fn parse_weight_mode(s: &str) -> Result<WeightMode, String> {
    match s {
        "hierarchical" => Ok(WeightMode::Hierarchical),
        "uniform" => Ok(WeightMode::Uniform),
        other => Err(format!("unknown weight mode {other:?}; expected hierarchical or uniform")),
    }
}

fn parse_area(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once('x').context("area must look like 30x30")?;
    Ok((w.trim().parse()?, h.trim().parse()?))
}

fn parse_agents(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("agents must look like workers,uavs,vehicles (e.g. 50,30,20)");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?, parts[2].trim().parse()?))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<u64>().map_err(|e| anyhow::anyhow!("bad seed {p:?}: {e}")))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    Ok(seeds)
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("CROWDSCHED_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_scenario(args: &EpisodeArgs) -> Result<Scenario> {
    let text = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut sc = Scenario::from_json(&text)
        .with_context(|| format!("parsing {}", args.scenario.display()))?;
    if let Some(mode) = args.weights {
        sc.weight_mode = mode;
    }
    if let Some(range) = &args.wind {
        sc.perturbations.wind = Some(parse_range(range)?);
    }
    if let Some(range) = &args.comms {
        sc.perturbations.comms_cost = Some(parse_range(range)?);
    }
    if let Some(p) = args.failure {
        sc.perturbations.failure_prob = Some(p);
    }
    if let Some(q) = args.match_loss {
        sc.perturbations.match_loss_prob = Some(q);
    }
    Ok(sc)
}

/// One episode per seed, in parallel; results come back in seed order.
fn run_seed_batch(
    sc: &Scenario,
    kind: SchedulerKind,
    seeds: &[u64],
) -> Result<Vec<EpisodeResult>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            seeds.iter().map(|&seed| scope.spawn(move || run_episode(sc, kind, seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow::anyhow!("episode thread panicked"))?)
            .collect()
    })
}

struct BatchStats {
    rates: Vec<f64>,
    mean_rate: f64,
    std_rate: f64,
    mean_decision_ms: f64,
    max_decision_ms: f64,
    violations: usize,
}

fn batch_stats(results: &[EpisodeResult]) -> BatchStats {
    let rates: Vec<f64> = results.iter().map(|r| r.completion_rate).collect();
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let std_rate =
        (rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / rates.len() as f64).sqrt();
    let all_ms: Vec<f64> =
        results.iter().flat_map(|r| r.records.iter().map(|e| e.decision_ms)).collect();
    let mean_decision_ms = all_ms.iter().sum::<f64>() / all_ms.len().max(1) as f64;
    let max_decision_ms = all_ms.iter().fold(0.0f64, |m, &v| m.max(v));
    let violations = results.iter().map(|r| r.violations.len()).sum();
    BatchStats { rates, mean_rate, std_rate, mean_decision_ms, max_decision_ms, violations }
}

fn write_episode_csv(path: &Path, result: &EpisodeResult) -> Result<()> {
    let mut text = String::from("epoch_min,decision_ms,committed,cumulative_completed\n");
    for r in &result.records {
        writeln!(text, "{},{},{},{}", r.epoch_min, r.decision_ms, r.committed, r.cumulative_completed)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_batch(
    dir: &Path,
    sc_path: &Path,
    kind: SchedulerKind,
    seeds: &[u64],
    results: &[EpisodeResult],
) -> Result<BatchStats> {
    fs::create_dir_all(dir)?;
    for (seed, result) in seeds.iter().zip(results) {
        write_episode_csv(&dir.join(format!("{}_seed{}.csv", kind.name(), seed)), result)?;
    }
    let stats = batch_stats(results);
    let summary = serde_json::json!({
        "scenario": sc_path.display().to_string(),
        "scheduler": kind.name(),
        "seeds": seeds,
        "epochs": results.first().map_or(0, |r| r.epochs),
        "rates": stats.rates,
        "mean_rate": stats.mean_rate,
        "std_rate": stats.std_rate,
        "mean_decision_ms": stats.mean_decision_ms,
        "max_decision_ms": stats.max_decision_ms,
        "violations": stats.violations,
    });
    fs::write(
        dir.join(format!("summary_{}.json", kind.name())),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(stats)
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (width, height) = parse_area(&args.area)?;
    let (workers, uavs, vehicles) = parse_agents(&args.agents)?;
    let params = GenParams {
        width,
        height,
        tasks: args.tasks,
        charges: args.charges,
        workers,
        uavs,
        vehicles,
        online_minutes: args.online,
        task_cost: parse_range(&args.task_cost)?,
        charge_power: parse_range(&args.charge_power)?,
        interval: args.interval,
        limit_time: args.limit,
        weight_mode: args.weights,
        seed: args.seed,
        ..GenParams::default()
    };
    let sc = generate(&params)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, sc.to_json())?;
    println!(
        "wrote {}: {}x{} km, {} tasks, {} charges, {}/{}/{} workers/uavs/vehicles, seed {}",
        args.out.display(),
        width,
        height,
        sc.tasks.len(),
        sc.charges.len(),
        sc.workers.len(),
        sc.uavs.len(),
        sc.vehicles.len(),
        args.seed
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let kind: SchedulerKind = args.scheduler.parse()?;
    let sc = load_scenario(&args.episode)?;
    let seeds = parse_seeds(&args.episode.seeds)?;
    let dir = out_dir(&args.episode.out);
    let results = run_seed_batch(&sc, kind, &seeds)?;
    let stats = write_batch(&dir, &args.episode.scenario, kind, &seeds, &results)?;
    println!(
        "{}: rate mean {:.4} std {:.4}, decision ms mean {:.2} max {:.2}, {} seeds, out {}",
        kind.name(),
        stats.mean_rate,
        stats.std_rate,
        stats.mean_decision_ms,
        stats.max_decision_ms,
        seeds.len(),
        dir.display()
    );
    if stats.violations > 0 {
        bail!("{} invariant violations recorded", stats.violations);
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let sc = load_scenario(&args.episode)?;
    let seeds = parse_seeds(&args.episode.seeds)?;
    let dir = out_dir(&args.episode.out);
    let kinds: Vec<SchedulerKind> = args
        .schedulers
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse())
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        bail!("at least one scheduler is required");
    }

    let mut table = String::from("scheduler,mean_rate,std_rate,mean_decision_ms,max_decision_ms\n");
    let mut total_violations = 0usize;
    println!(
        "{:<8} {:>10} {:>10} {:>18} {:>18}",
        "scheduler", "mean_rate", "std_rate", "mean_decision_ms", "max_decision_ms"
    );
    for kind in kinds {
        let results = run_seed_batch(&sc, kind, &seeds)?;
        let stats = write_batch(&dir, &args.episode.scenario, kind, &seeds, &results)?;
        writeln!(
            table,
            "{},{},{},{},{}",
            kind.name(),
            stats.mean_rate,
            stats.std_rate,
            stats.mean_decision_ms,
            stats.max_decision_ms
        )?;
        println!(
            "{:<8} {:>10.4} {:>10.4} {:>18.2} {:>18.2}",
            kind.name(),
            stats.mean_rate,
            stats.std_rate,
            stats.mean_decision_ms,
            stats.max_decision_ms
        );
        total_violations += stats.violations;
    }
    fs::write(dir.join("compare.csv"), table)?;
    if total_violations > 0 {
        bail!("{total_violations} invariant violations recorded");
    }
    Ok(())
}

fn cmd_dump_graph(args: &DumpGraphArgs) -> Result<()> {
    let text = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let sc = Scenario::from_json(&text)?;
    let mode = args.weights.unwrap_or(sc.weight_mode);
    let last_epoch = ((sc.limit_time / sc.interval) + EPS).floor() as usize;
    if args.epoch >= last_epoch {
        bail!("epoch {} is beyond the horizon ({} decision epochs)", args.epoch, last_epoch);
    }
    let mut state = SimState::new(sc.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(PERTURB_STREAM);
    // replay idle epochs so positions, windows, and claims are live
    for e in 0..args.epoch {
        let t = e as f64 * sc.interval;
        state.commit_schedule(&Schedule::default(), t, &mut rng)?;
        state.advance(t + sc.interval, &mut rng)?;
    }
    let snap = state.snapshot(args.epoch as f64 * sc.interval);
    let g = build_epoch_graph(&snap, mode);
    print!("{}", g.to_debug_string());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate(args) => cmd_generate(&args),
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Compare(args) => cmd_compare(&args),
        Cmd::DumpGraph(args) => cmd_dump_graph(&args),
    }
}
