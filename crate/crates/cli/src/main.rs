use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nfdfap::bench::{aggregate, records_to_csv, run_benchmark, summary_to_csv, BenchConfig, BenchMethod};
use nfdfap::bounds::{compute_bounds, BoundsOptions, BoundsReport, DEFAULT_EXACT_LIMIT};
use nfdfap::checker::check_feasibility;
use nfdfap::ga::{run_ga, GaConfig};
use nfdfap::generator::{derive_separations, generate_topology, reference_plan, GeneratorConfig, PipelineParams};
use nfdfap::graph::{ConstraintGraph, DegreeMode};
use nfdfap::io::{
    meta_line, parse_meta, parse_two_column, read_celar, read_separation_csv, read_to_string, read_topology,
    separation_to_csv, topology_to_json, AssignmentFile, CelarEquality, PlanBlock,
};
use nfdfap::model::{Assignment, FrequencyPlan};
use nfdfap::nfd::{SeparationMatrix, SpectralMask, DEFAULT_FLOOR_DB};
use nfdfap::propagation::{AntennaPattern, LinkBudgetParams};
use nfdfap::solvers::{enhanced_solve, hedge, SolutionPool, SolverConfig, Strategy};
use nfdfap::FapError;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "nfdfap", version, about = "Frequency assignment under NFD separation constraints")]
struct Cli {
    /// Worker threads for parallel replications.
    #[arg(long, global = true, env = "NFDFAP_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a clustered synthetic topology.
    Gen(GenArgs),
    /// Derive the separation CSV from a topology.
    Constraints(ConstraintsArgs),
    /// Assign frequencies.
    Solve(SolveArgs),
    /// Compute lower bounds.
    Bound(BoundArgs),
    /// Verify an assignment file.
    Check(CheckArgs),
    /// Time-limited benchmark of the randomized solvers.
    Bench(BenchArgs),
}

#[derive(Args, Default, Clone)]
struct PlanArgs {
    /// MHz
    #[arg(long)]
    f_start: Option<f64>,
    /// MHz
    #[arg(long)]
    f_end: Option<f64>,
    /// Channel bandwidth B, MHz.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Grid step, MHz.
    #[arg(long)]
    delta_f: Option<f64>,
}

impl PlanArgs {
    fn over(&self, base: PlanBlock) -> anyhow::Result<FrequencyPlan> {
        let block = PlanBlock {
            f_start: self.f_start.unwrap_or(base.f_start),
            f_end: self.f_end.unwrap_or(base.f_end),
            bandwidth: self.bandwidth.unwrap_or(base.bandwidth),
            delta_f: self.delta_f.unwrap_or(base.delta_f),
        };
        Ok(block.build()?)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 150)]
    links: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to links / 5.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    area_km: f64,
    #[arg(long, default_value_t = 0.5)]
    cluster_radius_km: f64,
    #[arg(long, default_value_t = 20.0)]
    max_link_km: f64,
    /// Emit each drawn link in both directions.
    #[arg(long)]
    bidirectional: bool,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstraintsArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Two-column file: angle (deg), attenuation (dB).
    #[arg(long)]
    antenna: Option<PathBuf>,
    /// Two-column file: offset (MHz), level (dB).
    #[arg(long)]
    tx_mask: Option<PathBuf>,
    #[arg(long)]
    rx_mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FLOOR_DB)]
    mask_floor_db: f64,
    #[arg(long, default_value_t = 30.0)]
    tx_power_dbm: f64,
    #[arg(long, default_value_t = -79.12)]
    sensitivity_dbm: f64,
    /// Reference frequency for path loss, MHz. Defaults to mid-band.
    #[arg(long)]
    f_ref: Option<f64>,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EqualityArg {
    AsSeparation,
    Skip,
}

#[derive(Args)]
struct InstanceArgs {
    /// Separation CSV written by `constraints`.
    #[arg(long, conflicts_with = "celar", required_unless_present = "celar")]
    separations: Option<PathBuf>,
    /// CELAR-style scenario directory or constraint file.
    #[arg(long)]
    celar: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "as-separation")]
    celar_equality: EqualityArg,
    #[command(flatten)]
    plan: PlanArgs,
}

struct Instance {
    sep: SeparationMatrix,
    plan: FrequencyPlan,
    source: String,
}

impl InstanceArgs {
    fn load(&self) -> anyhow::Result<Instance> {
        if let Some(dir) = &self.celar {
            // CELAR separations are already in channel units
            let step = self.plan.delta_f.unwrap_or(1.0);
            let eq = match self.celar_equality {
                EqualityArg::AsSeparation => CelarEquality::AsSeparation,
                EqualityArg::Skip => CelarEquality::Skip,
            };
            let sep = read_celar(dir, step, eq).with_context(|| format!("reading {}", dir.display()))?;
            let base = PlanBlock { f_start: 0.0, f_end: 1000.0 * step, bandwidth: step, delta_f: step };
            let plan = self.plan.over(base)?;
            return Ok(Instance { sep, plan, source: dir.display().to_string() });
        }
        let path = self.separations.as_ref().expect("clap requires one source");
        let text = read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let meta = text.lines().next().map(parse_meta).unwrap_or_default();
        let num = |k: &str| meta.get(k).and_then(|v| v.parse::<f64>().ok());
        let reference = PlanBlock::from(&reference_plan());
        let base = PlanBlock {
            f_start: num("f_start").unwrap_or(reference.f_start),
            f_end: num("f_end").unwrap_or(reference.f_end),
            bandwidth: num("B").unwrap_or(reference.bandwidth),
            delta_f: num("delta_f").unwrap_or(reference.delta_f),
        };
        let plan = self.plan.over(base)?;
        let sep = read_separation_csv(path, plan.step)?;
        if (sep.step() - plan.step).abs() > 1e-12 {
            bail!("plan step {} MHz differs from the separation file's {} MHz", plan.step, sep.step());
        }
        Ok(Instance { sep, plan, source: path.display().to_string() })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Hedge,
    Cog,
    Hybrid,
    Ga,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "hedge")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    n_cog: usize,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Balancing factor between used-count and range in the score.
    #[arg(long, default_value_t = 0.5)]
    bf: f64,
    #[arg(long)]
    range_cap_mhz: Option<f64>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    /// Order by weighted instead of plain degree.
    #[arg(long)]
    weighted_degree: bool,
    /// Output file; `.csv` gets the pool, `.json` the best assignment.
    #[arg(long)]
    emit: Vec<PathBuf>,
    #[arg(long, default_value_t = 50)]
    ga_pop: usize,
    #[arg(long, default_value_t = 200)]
    ga_gens: usize,
    #[arg(long, default_value_t = 1.0)]
    ga_modifier: f64,
    #[arg(long, default_value_t = 0.2)]
    ga_mutation: f64,
    #[arg(long, default_value_t = 0.2)]
    ga_elite: f64,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 2.0)]
    clique_timeout_s: f64,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    /// Also write the report as a CSV row.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    assignment: PathBuf,
    #[arg(long)]
    range_cap_mhz: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Comma-separated: hedge, cog, hybrid.
    #[arg(long, value_delimiter = ',', default_value = "hedge,hybrid")]
    methods: Vec<String>,
    /// Seconds, comma-separated, ascending.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    time_limits: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    n_cog: usize,
    #[arg(long, default_value_t = 0.5)]
    bf: f64,
    #[arg(long)]
    range_cap_mhz: Option<f64>,
    /// Cap on greedy runs per stream.
    #[arg(long)]
    max_runs: Option<usize>,
    /// Per-record CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mean/min/max CSV; printed when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Writes through a sibling temp file and a rename.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn plan_meta(plan: &FrequencyPlan) -> Vec<(&'static str, String)> {
    vec![
        ("f_start", plan.f_start.to_string()),
        ("f_end", plan.f_end.to_string()),
        ("B", plan.bandwidth.to_string()),
    ]
}

fn cmd_gen(a: &GenArgs) -> anyhow::Result<()> {
    let cfg = GeneratorConfig {
        area_km: a.area_km,
        n_links: a.links,
        cluster_radius_km: a.cluster_radius_km,
        max_link_length_km: a.max_link_km,
        n_clusters: a.clusters,
        seed: a.seed,
        bidirectional: a.bidirectional,
    };
    let topo = generate_topology(&cfg)?;
    let plan = a.plan.over(PlanBlock::from(&reference_plan()))?;
    let mut json = topology_to_json(&topo, Some(&plan))?;
    json.push('\n');
    emit(a.out.as_deref(), &json)
}

fn cmd_constraints(a: &ConstraintsArgs) -> anyhow::Result<()> {
    let (topo, block) = read_topology(&a.topology).with_context(|| format!("reading {}", a.topology.display()))?;
    let plan = a.plan.over(block.unwrap_or_else(|| PlanBlock::from(&reference_plan())))?;
    let table = |p: &Path| -> anyhow::Result<Vec<(f64, f64)>> {
        let name = p.display().to_string();
        Ok(parse_two_column(&read_to_string(p)?, &name)?)
    };
    let pattern = match &a.antenna {
        Some(p) => AntennaPattern::new(table(p)?)?,
        None => AntennaPattern::default(),
    };
    let mask = |p: &Option<PathBuf>, fallback: SpectralMask| -> anyhow::Result<SpectralMask> {
        Ok(match p {
            Some(p) => SpectralMask::new(table(p)?, a.mask_floor_db)?,
            None => fallback,
        })
    };
    let params = PipelineParams {
        budget: LinkBudgetParams { tx_power_dbm: a.tx_power_dbm, sensitivity_dbm: a.sensitivity_dbm },
        pattern,
        tx_mask: mask(&a.tx_mask, SpectralMask::default_tx())?,
        rx_mask: mask(&a.rx_mask, SpectralMask::default_rx())?,
        f_ref: a.f_ref,
    };
    let sep = derive_separations(&topo, &plan, &params)?;
    if sep.sentinel_pairs() > 0 {
        eprintln!(
            "warning: {} link pairs share a node and get the full-plan separation",
            sep.sentinel_pairs()
        );
    }
    let mut meta = plan_meta(&plan);
    meta.push(("f_ref", params.f_ref.unwrap_or_else(|| plan.mid_band()).to_string()));
    emit(a.out.as_deref(), &separation_to_csv(&sep, &meta))
}

fn solver_config(a: &SolveArgs, strategy: Strategy) -> SolverConfig {
    SolverConfig {
        strategy,
        n_cog: a.n_cog,
        replications: a.replications,
        seed: a.seed,
        balancing_factor: a.bf,
        range_cap: a.range_cap_mhz,
        degree_mode: if a.weighted_degree { DegreeMode::Weighted } else { DegreeMode::Count },
        time_limit: a.time_limit_s,
        ..SolverConfig::default()
    }
}

fn cmd_solve(a: &SolveArgs) -> anyhow::Result<()> {
    let inst = a.instance.load()?;
    let (sep, plan) = (&inst.sep, &inst.plan);
    let (pool, label): (SolutionPool, &str) = match a.strategy {
        StrategyArg::Ga => {
            let base = SolverConfig { randomize: false, ..solver_config(a, Strategy::Hedge) };
            let seed_solution = hedge(sep, plan, &base, a.seed)?;
            let cfg = GaConfig {
                population: a.ga_pop,
                generations: a.ga_gens,
                modifier: a.ga_modifier,
                mutation_rate: a.ga_mutation,
                elite_fraction: a.ga_elite,
                seed: a.seed,
                balancing_factor: a.bf,
                range_cap: a.range_cap_mhz,
            };
            (run_ga(sep, plan, &seed_solution, &cfg)?.pool, "ga")
        }
        s => {
            let strategy = match s {
                StrategyArg::Hedge => Strategy::Hedge,
                StrategyArg::Cog => Strategy::Cog,
                _ => Strategy::Hybrid,
            };
            (enhanced_solve(sep, plan, &solver_config(a, strategy))?, strategy_name(strategy))
        }
    };
    let best = pool.best().context("empty pool")?;
    println!(
        "strategy={label} pool={} used={} range_mhz={:.4} psi={:.6} seed={}",
        pool.len(),
        best.metrics.used_count,
        best.metrics.range,
        best.psi,
        best.seed
    );
    for path in &a.emit {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "csv" => {
                let meta = meta_line(&[
                    ("kind", "pool".into()),
                    ("source", inst.source.clone()),
                    ("strategy", label.into()),
                    ("seed", a.seed.to_string()),
                    ("replications", a.replications.to_string()),
                    ("bf", a.bf.to_string()),
                ]);
                write_atomic(path, &pool.to_csv(&meta))?;
            }
            "json" => {
                let mut meta = BTreeMap::new();
                meta.insert("strategy".to_string(), label.to_string());
                meta.insert("seed".to_string(), a.seed.to_string());
                meta.insert("replication_seed".to_string(), best.seed.to_string());
                meta.insert("version".to_string(), nfdfap::io::VERSION.to_string());
                let file = AssignmentFile::new(&best.assignment, sep.link_ids(), Some(best.metrics.clone()), meta);
                write_atomic(path, &(file.to_json()? + "\n"))?;
            }
            other => bail!("--emit expects a .csv or .json path, got extension {other:?}"),
        }
    }
    Ok(())
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Hedge => "hedge",
        Strategy::Cog => "cog",
        Strategy::Hybrid => "hybrid",
    }
}

fn cmd_bound(a: &BoundArgs) -> anyhow::Result<()> {
    let inst = a.instance.load()?;
    let g = ConstraintGraph::from_separation(&inst.sep);
    let opts = BoundsOptions {
        exact_limit: a.exact_limit,
        clique_timeout: Duration::from_secs_f64(a.clique_timeout_s.max(0.0)),
    };
    let report = compute_bounds(&g, &inst.plan, &opts);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(path) = &a.csv {
        let text = format!(
            "{}\n{}\n{}\n",
            meta_line(&[("kind", "bounds".into()), ("source", inst.source.clone())]),
            BoundsReport::csv_header(),
            report.csv_row()
        );
        write_atomic(path, &text)?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> anyhow::Result<bool> {
    let inst = a.instance.load()?;
    let text = read_to_string(&a.assignment).with_context(|| format!("reading {}", a.assignment.display()))?;
    let file = AssignmentFile::from_json(&text)?;
    let unknown: Vec<u32> =
        file.assignment.keys().copied().filter(|id| inst.sep.vertex_of(*id).is_none()).collect();
    if !unknown.is_empty() {
        bail!("assignment names links absent from the instance: {unknown:?}");
    }
    let assignment: Assignment = file.to_assignment(inst.sep.link_ids());
    let m = check_feasibility(&assignment, &inst.sep, &inst.plan, a.range_cap_mhz);
    println!("{}", serde_json::to_string_pretty(&m)?);
    Ok(m.feasible)
}

fn cmd_bench(a: &BenchArgs) -> anyhow::Result<()> {
    let inst = a.instance.load()?;
    let methods = a
        .methods
        .iter()
        .map(|name| {
            let strategy: Strategy = name.parse()?;
            Ok(BenchMethod {
                name: name.clone(),
                config: SolverConfig {
                    strategy,
                    n_cog: a.n_cog,
                    balancing_factor: a.bf,
                    range_cap: a.range_cap_mhz,
                    ..SolverConfig::default()
                },
            })
        })
        .collect::<Result<Vec<_>, FapError>>()?;
    let cfg = BenchConfig {
        time_limits: a.time_limits.clone(),
        replications: a.replications,
        seed: a.seed,
        max_runs: a.max_runs,
    };
    let records = run_benchmark(&inst.sep, &inst.plan, &methods, &cfg)?;
    if let Some(p) = &a.out {
        write_atomic(p, &records_to_csv(&records, a.seed))?;
    }
    emit(a.summary.as_deref(), &summary_to_csv(&aggregate(&records), a.seed))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<FapError>() {
        Some(FapError::Infeasible { .. } | FapError::AllReplicationsInfeasible(_)) => EXIT_INFEASIBLE,
        _ => EXIT_BAD_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers.filter(|&n| n > 0) {
        // a second global init only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a).map(|_| true),
        Cmd::Constraints(a) => cmd_constraints(a).map(|_| true),
        Cmd::Solve(a) => cmd_solve(a).map(|_| true),
        Cmd::Bound(a) => cmd_bound(a).map(|_| true),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Bench(a) => cmd_bench(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INFEASIBLE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
