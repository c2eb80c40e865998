//! Time-limited benchmark of the randomized greedy solvers.
//!
//! Each (method, replication) pair is one seeded stream of greedy runs that
//! continues until the largest time limit. The record for a smaller limit
//! is read off the same stream's best-so-far trace, so a longer budget can
//! never report a worse final best than a shorter one.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::checker::check_feasibility;
use crate::error::{FapError, Result};
use crate::io::meta_line;
use crate::model::{FrequencyPlan, SolutionMetrics};
use crate::nfd::SeparationMatrix;
use crate::solvers::{run_replication, split_seed, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchMethod {
    pub name: String,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Seconds, ascending. `f64::INFINITY` is allowed when `max_runs` is set.
    pub time_limits: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    /// Cap on greedy runs per stream.
    pub max_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    /// Seconds since the stream started.
    pub t: f64,
    pub used_count: usize,
    /// MHz
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub method: String,
    pub time_limit: f64,
    pub replication: usize,
    pub seed: u64,
    pub used_count: Option<usize>,
    pub range_mhz: Option<f64>,
    pub feasible: bool,
    pub wall_time: f64,
    pub runs: usize,
    pub trace: Vec<TracePoint>,
}

/// Seed of benchmark replication `rep`; methods share it.
pub fn bench_seed(master: u64, rep: usize) -> u64 {
    split_seed(master, rep as u64)
}

struct Stream {
    /// (finish time, metrics) per completed greedy run
    runs: Vec<(f64, Option<SolutionMetrics>)>,
    elapsed: f64,
}

fn run_stream(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    config: &SolverConfig,
    limit: f64,
    max_runs: Option<usize>,
) -> Result<Stream> {
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut r = 0usize;
    loop {
        if max_runs.is_some_and(|m| r >= m) || start.elapsed().as_secs_f64() >= limit {
            break;
        }
        let outcome = match run_replication(sep, plan, config, r) {
            Ok(a) => Some(check_feasibility(&a, sep, plan, config.range_cap)).filter(|m| m.feasible),
            Err(FapError::Infeasible { .. }) => None,
            Err(e) => return Err(e),
        };
        runs.push((start.elapsed().as_secs_f64(), outcome));
        r += 1;
    }
    Ok(Stream { runs, elapsed: start.elapsed().as_secs_f64() })
}

/// Best-so-far trace of `runs` finishing within `limit`. Better means fewer
/// frequencies, then smaller range.
fn trace_until(runs: &[(f64, Option<SolutionMetrics>)], limit: f64) -> (Vec<TracePoint>, usize) {
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut count = 0;
    for (t, m) in runs.iter().take_while(|(t, _)| *t <= limit) {
        count += 1;
        let Some(m) = m else { continue };
        let better = match trace.last() {
            None => true,
            Some(b) => (m.used_count, m.range) < (b.used_count, b.range),
        };
        if better {
            trace.push(TracePoint { t: *t, used_count: m.used_count, range: m.range });
        }
    }
    (trace, count)
}

/// Runs every method for `replications` seeded streams in parallel and
/// returns one record per (method, limit, replication), in that order.
pub fn run_benchmark(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    methods: &[BenchMethod],
    config: &BenchConfig,
) -> Result<Vec<BenchmarkRecord>> {
    if config.time_limits.is_empty() || config.time_limits.iter().any(|t| !(*t > 0.0)) {
        return Err(FapError::InvalidParameters("time limits must be positive".into()));
    }
    if config.time_limits.windows(2).any(|w| w[1] < w[0]) {
        return Err(FapError::InvalidParameters("time limits must be ascending".into()));
    }
    let longest = *config.time_limits.last().expect("non-empty");
    if longest.is_infinite() && config.max_runs.is_none() {
        return Err(FapError::InvalidParameters("an unbounded time limit needs a run cap".into()));
    }
    for m in methods {
        m.config.validate(sep.len())?;
    }

    let jobs: Vec<(usize, usize)> =
        (0..methods.len()).flat_map(|m| (0..config.replications).map(move |r| (m, r))).collect();
    let streams: Vec<Stream> = jobs
        .par_iter()
        .map(|&(m, rep)| {
            let cfg = SolverConfig { seed: bench_seed(config.seed, rep), ..methods[m].config.clone() };
            run_stream(sep, plan, &cfg, longest, config.max_runs)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        for &limit in &config.time_limits {
            for rep in 0..config.replications {
                let stream = &streams[m * config.replications + rep];
                let (trace, runs) = trace_until(&stream.runs, limit);
                let best = trace.last();
                records.push(BenchmarkRecord {
                    method: method.name.clone(),
                    time_limit: limit,
                    replication: rep,
                    seed: bench_seed(config.seed, rep),
                    used_count: best.map(|b| b.used_count),
                    range_mhz: best.map(|b| b.range),
                    feasible: best.is_some(),
                    wall_time: stream.elapsed.min(limit),
                    runs,
                    trace,
                });
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub method: String,
    pub time_limit: f64,
    pub replications: usize,
    pub feasible: usize,
    pub mean_used: Option<f64>,
    pub min_used: Option<usize>,
    pub max_used: Option<usize>,
    pub mean_range: Option<f64>,
    pub min_range: Option<f64>,
    pub max_range: Option<f64>,
}

/// Mean, min and max over replications per (method, limit), in first-seen
/// order. Infeasible replications only count toward `replications`.
pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<BenchSummary> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(m, t)| *m == r.method && *t == r.time_limit) {
            keys.push((r.method.clone(), r.time_limit));
        }
    }
    keys.into_iter()
        .map(|(method, limit)| {
            let group: Vec<&BenchmarkRecord> =
                records.iter().filter(|r| r.method == method && r.time_limit == limit).collect();
            let used: Vec<usize> = group.iter().filter_map(|r| r.used_count).collect();
            let ranges: Vec<f64> = group.iter().filter_map(|r| r.range_mhz).collect();
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            let used_f: Vec<f64> = used.iter().map(|&u| u as f64).collect();
            BenchSummary {
                method,
                time_limit: limit,
                replications: group.len(),
                feasible: used.len(),
                mean_used: mean(&used_f),
                min_used: used.iter().copied().min(),
                max_used: used.iter().copied().max(),
                mean_range: mean(&ranges),
                min_range: ranges.iter().copied().reduce(f64::min),
                max_range: ranges.iter().copied().reduce(f64::max),
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn records_to_csv(records: &[BenchmarkRecord], seed: u64) -> String {
    let mut s = meta_line(&[("kind", "bench_records".into()), ("seed", seed.to_string())]);
    s.push_str("\nmethod,time_limit_s,replication,seed,used_count,range_mhz,feasible,wall_time_s,runs\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6},{}\n",
            r.method,
            r.time_limit,
            r.replication,
            r.seed,
            opt(r.used_count),
            opt(r.range_mhz.map(|x| format!("{x:.4}"))),
            u8::from(r.feasible),
            r.wall_time,
            r.runs
        ));
    }
    s
}

pub fn summary_to_csv(summary: &[BenchSummary], seed: u64) -> String {
    let mut s = meta_line(&[("kind", "bench_summary".into()), ("seed", seed.to_string())]);
    s.push_str("\nmethod,time_limit_s,replications,feasible,mean_used,min_used,max_used,mean_range_mhz,min_range_mhz,max_range_mhz\n");
    for r in summary {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.time_limit,
            r.replications,
            r.feasible,
            opt(r.mean_used.map(|x| format!("{x:.4}"))),
            opt(r.min_used),
            opt(r.max_used),
            opt(r.mean_range.map(|x| format!("{x:.4}"))),
            opt(r.min_range.map(|x| format!("{x:.4}"))),
            opt(r.max_range.map(|x| format!("{x:.4}"))),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{enhanced_solve, Strategy};

    fn instance() -> (SeparationMatrix, FrequencyPlan) {
        let n = 10;
        let mut s = SeparationMatrix::empty((0..n as u32).collect(), 1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (i * 7 + j * 3) % 4 != 0 {
                    let w = ((i + 2 * j) % 5 + 1) as u32;
                    s.set(i, j, w as f64, w);
                }
            }
        }
        (s, FrequencyPlan::new(0.0, 80.0, 1.0, 1.0).unwrap())
    }

    fn method(strategy: Strategy) -> BenchMethod {
        BenchMethod {
            name: strategy.to_string(),
            config: SolverConfig { strategy, n_cog: 4, ..SolverConfig::default() },
        }
    }

    #[test]
    fn unbounded_limit_matches_enhanced_solve() {
        let (s, p) = instance();
        let cfg = BenchConfig { time_limits: vec![f64::INFINITY], replications: 1, seed: 5, max_runs: Some(30) };
        let recs = run_benchmark(&s, &p, &[method(Strategy::Hedge)], &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        let solver = SolverConfig { replications: 30, seed: bench_seed(5, 0), ..method(Strategy::Hedge).config };
        let pool = enhanced_solve(&s, &p, &solver).unwrap();
        let best = pool.entries().iter().map(|e| e.metrics.used_count).min();
        assert_eq!(recs[0].used_count, best);
        assert_eq!(recs[0].runs, 30);
    }

    #[test]
    fn traces_are_monotone_and_limits_nested() {
        let (s, p) = instance();
        let cfg = BenchConfig { time_limits: vec![0.005, 0.01, 0.02], replications: 3, seed: 1, max_runs: None };
        let methods = [method(Strategy::Hedge), method(Strategy::Hybrid)];
        let recs = run_benchmark(&s, &p, &methods, &cfg).unwrap();
        assert_eq!(recs.len(), 2 * 3 * 3);
        for r in &recs {
            assert!(r.trace.windows(2).all(|w| w[1].used_count <= w[0].used_count));
        }
        for a in &recs {
            for b in &recs {
                if a.method == b.method && a.replication == b.replication && b.time_limit > a.time_limit {
                    assert!(b.trace.starts_with(&a.trace));
                    if let Some(ua) = a.used_count {
                        assert!(b.used_count.unwrap() <= ua);
                    }
                }
            }
        }
        let summary = aggregate(&recs);
        assert_eq!(summary.len(), 6);
        assert!(summary.iter().all(|s| s.replications == 3));
        let csv = summary_to_csv(&summary, 1);
        assert!(csv.starts_with("# nfdfap"));
        assert_eq!(csv.lines().count(), 2 + 6);
    }

    #[test]
    fn infeasible_outcomes_are_data() {
        let mut s = SeparationMatrix::empty(vec![0, 1], 1.0);
        s.set(0, 1, 9.0, 9);
        let p = FrequencyPlan::new(0.0, 5.0, 1.0, 1.0).unwrap();
        let cfg = BenchConfig { time_limits: vec![1.0], replications: 2, seed: 0, max_runs: Some(3) };
        let recs = run_benchmark(&s, &p, &[method(Strategy::Hedge)], &cfg).unwrap();
        assert!(recs.iter().all(|r| !r.feasible && r.used_count.is_none() && r.runs == 3));
        let summary = aggregate(&recs);
        assert_eq!(summary[0].feasible, 0);
        assert_eq!(summary[0].mean_used, None);
    }

    #[test]
    fn limits_are_validated() {
        let (s, p) = instance();
        let m = [method(Strategy::Hedge)];
        let bad = |limits: Vec<f64>, max_runs| BenchConfig { time_limits: limits, replications: 1, seed: 0, max_runs };
        assert!(run_benchmark(&s, &p, &m, &bad(vec![2.0, 1.0], None)).is_err());
        assert!(run_benchmark(&s, &p, &m, &bad(vec![], None)).is_err());
        assert!(run_benchmark(&s, &p, &m, &bad(vec![f64::INFINITY], None)).is_err());
    }
}
