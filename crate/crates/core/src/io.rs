//! Flat-file formats: topology and assignment JSON, two-column pattern/mask
//! tables, the separation CSV and the CELAR-style constraint list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FapError, Result};
use crate::model::{Assignment, FrequencyPlan, Link, Node, SolutionMetrics, Topology};
use crate::nfd::SeparationMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# nfdfap <version> key=value ...` comment line carried by every CSV.
pub fn meta_line(fields: &[(&str, String)]) -> String {
    let mut s = format!("# nfdfap {VERSION}");
    for (k, v) in fields {
        let _ = write!(s, " {k}={v}");
    }
    s
}

/// Parses `key=value` pairs out of a metadata comment line.
pub fn parse_meta(line: &str) -> BTreeMap<String, String> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Two numbers per line separated by whitespace or a comma. Blank lines and
/// `#` comments are skipped.
pub fn parse_two_column(text: &str, source_name: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(FapError::parse(source_name, k + 1, "expected two columns"));
        }
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| FapError::parse(source_name, k + 1, format!("{t:?}: {e}")))
        };
        out.push((num(cols[0])?, num(cols[1])?));
    }
    Ok(out)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn display_name(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanBlock {
    pub f_start: f64,
    pub f_end: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    pub delta_f: f64,
}

impl PlanBlock {
    pub fn build(&self) -> Result<FrequencyPlan> {
        FrequencyPlan::new(self.f_start, self.f_end, self.bandwidth, self.delta_f)
    }
}

impl From<&FrequencyPlan> for PlanBlock {
    fn from(p: &FrequencyPlan) -> Self {
        PlanBlock {
            f_start: p.f_start,
            f_end: p.f_end,
            bandwidth: p.bandwidth,
            delta_f: p.step,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    nodes: Vec<Node>,
    links: Vec<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plan: Option<PlanBlock>,
}

pub fn topology_from_json(text: &str) -> Result<(Topology, Option<PlanBlock>)> {
    let f: TopologyFile = serde_json::from_str(text)?;
    Ok((Topology::new(f.nodes, f.links)?, f.plan))
}

pub fn topology_to_json(topology: &Topology, plan: Option<&FrequencyPlan>) -> Result<String> {
    let f = TopologyFile {
        nodes: topology.nodes().to_vec(),
        links: topology.links().to_vec(),
        plan: plan.map(PlanBlock::from),
    };
    Ok(serde_json::to_string_pretty(&f)?)
}

pub fn read_topology(path: &Path) -> Result<(Topology, Option<PlanBlock>)> {
    topology_from_json(&read_to_string(path)?)
}

/// Assignment file: link id -> frequency index, with a metrics block and
/// free-form provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub assignment: BTreeMap<u32, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SolutionMetrics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl AssignmentFile {
    pub fn new(
        assignment: &Assignment,
        link_ids: &[u32],
        metrics: Option<SolutionMetrics>,
        meta: BTreeMap<String, String>,
    ) -> Self {
        AssignmentFile {
            assignment: assignment.to_link_map(link_ids),
            metrics,
            meta,
        }
    }

    pub fn to_assignment(&self, link_ids: &[u32]) -> Assignment {
        Assignment::from_link_map(&self.assignment, link_ids)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Separation CSV: metadata line, a `# link_ids:` line listing every vertex,
/// then `i,j,S_MHz,sep_quantized` rows for `i < j` and `sep > 0`.
pub fn separation_to_csv(m: &SeparationMatrix, meta: &[(&str, String)]) -> String {
    let mut fields: Vec<(&str, String)> = vec![
        ("kind", "separation".to_string()),
        ("n_links", m.len().to_string()),
        ("delta_f", m.step().to_string()),
        ("constraints", m.constraint_count().to_string()),
    ];
    fields.extend(meta.iter().cloned());
    let mut s = meta_line(&fields);
    s.push('\n');
    s.push_str("# link_ids:");
    for id in m.link_ids() {
        let _ = write!(s, " {id}");
    }
    s.push('\n');
    s.push_str("i,j,S_MHz,sep_quantized\n");
    let ids = m.link_ids();
    for (i, j, q) in m.constraints() {
        let raw = m.raw(i, j);
        let raw = if raw.is_finite() { format!("{raw}") } else { "inf".to_string() };
        let _ = writeln!(s, "{},{},{},{}", ids[i], ids[j], raw, q);
    }
    s
}

/// Reads a separation CSV. `default_step` is used when the metadata line
/// carries no `delta_f`. Without a `# link_ids:` line the vertex set is the
/// sorted set of ids seen in rows.
pub fn separation_from_csv(text: &str, source_name: &str, default_step: f64) -> Result<SeparationMatrix> {
    let mut step = default_step;
    let mut declared: Option<Vec<u32>> = None;
    let mut rows: Vec<(u32, u32, f64, u32)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# link_ids:") {
            let ids = rest
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| FapError::parse(source_name, k + 1, format!("link ids: {e}")))?;
            declared = Some(ids);
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = parse_meta(line).get("delta_f") {
                step = v
                    .parse()
                    .map_err(|e| FapError::parse(source_name, k + 1, format!("delta_f: {e}")))?;
            }
            continue;
        }
        if line.starts_with("i,") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(FapError::parse(source_name, k + 1, "expected i,j,S_MHz,sep_quantized"));
        }
        let int = |t: &str| {
            t.parse::<u32>()
                .map_err(|e| FapError::parse(source_name, k + 1, format!("{t:?}: {e}")))
        };
        let s_mhz = match cols[2] {
            "inf" | "+inf" => f64::INFINITY,
            t => t
                .parse::<f64>()
                .map_err(|e| FapError::parse(source_name, k + 1, format!("{t:?}: {e}")))?,
        };
        let (i, j) = (int(cols[0])?, int(cols[1])?);
        if i == j {
            return Err(FapError::parse(source_name, k + 1, "self constraint"));
        }
        rows.push((i, j, s_mhz, int(cols[3])?));
    }
    let ids = match declared {
        Some(ids) => ids,
        None => rows
            .iter()
            .flat_map(|&(i, j, _, _)| [i, j])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if !(step > 0.0) {
        return Err(FapError::InvalidParameters(format!("delta_f must be positive, got {step}")));
    }
    build_from_rows(ids, step, &rows, source_name)
}

fn build_from_rows(
    ids: Vec<u32>,
    step: f64,
    rows: &[(u32, u32, f64, u32)],
    source_name: &str,
) -> Result<SeparationMatrix> {
    let pos: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    if pos.len() != ids.len() {
        return Err(FapError::parse(source_name, 0, "duplicate link id"));
    }
    let mut m = SeparationMatrix::empty(ids, step);
    for &(i, j, s, q) in rows {
        let (Some(&a), Some(&b)) = (pos.get(&i), pos.get(&j)) else {
            return Err(FapError::parse(
                source_name,
                0,
                format!("constraint ({i}, {j}) references an undeclared link"),
            ));
        };
        // repeated pairs keep the stricter constraint
        if q >= m.get(a, b) {
            m.set(a, b, s, q);
        }
    }
    Ok(m)
}

pub fn read_separation_csv(path: &Path, default_step: f64) -> Result<SeparationMatrix> {
    separation_from_csv(&read_to_string(path)?, &display_name(path), default_step)
}

/// What to do with CELAR equality lines `i j = s` (duplex spacing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CelarEquality {
    /// Relax `|f_i - f_j| = s` to `|f_i - f_j| >= s`.
    #[default]
    AsSeparation,
    Skip,
}

/// Reads CELAR-style constraint lines `i j [type] op s [weight]`.
///
/// `i j > s` means `|f_i - f_j| > s` and becomes a separation of `s + 1`
/// index units. `vars`, when given, lists every variable (first token of
/// each line of a `var.txt`); otherwise the vertex set is the set of
/// variables mentioned by constraints.
pub fn separation_from_celar(
    ctr: &str,
    vars: Option<&str>,
    step: f64,
    equality: CelarEquality,
) -> Result<SeparationMatrix> {
    let mut rows = Vec::new();
    for (k, raw) in ctr.lines().enumerate() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let err = |msg: &str| FapError::parse("ctr.txt", k + 1, msg.to_string());
        if toks.len() < 4 {
            return Err(err("expected `i j [type] op value`"));
        }
        let i: u32 = toks[0].parse().map_err(|_| err("bad first variable"))?;
        let j: u32 = toks[1].parse().map_err(|_| err("bad second variable"))?;
        let op_at = toks
            .iter()
            .position(|t| *t == ">" || *t == "=")
            .ok_or_else(|| err("missing `>` or `=`"))?;
        let s: u32 = toks
            .get(op_at + 1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("bad separation value"))?;
        let q = match (toks[op_at], equality) {
            (">", _) => s + 1,
            (_, CelarEquality::AsSeparation) => s,
            (_, CelarEquality::Skip) => continue,
        };
        if i == j {
            return Err(err("self constraint"));
        }
        rows.push((i, j, q as f64 * step, q));
    }
    let ids: Vec<u32> = match vars {
        Some(text) => {
            let mut ids = Vec::new();
            for (k, line) in text.lines().enumerate() {
                if let Some(t) = line.split_whitespace().next() {
                    ids.push(t.parse().map_err(|_| {
                        FapError::parse("var.txt", k + 1, format!("bad variable id {t:?}"))
                    })?);
                }
            }
            ids.sort_unstable();
            ids.dedup();
            ids
        }
        None => rows
            .iter()
            .flat_map(|&(i, j, _, _)| [i, j])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    build_from_rows(ids, step, &rows, "ctr.txt")
}

/// Reads `ctr.txt` (and `var.txt` when present) from a CELAR scenario
/// directory, or a bare constraint file.
pub fn read_celar(path: &Path, step: f64, equality: CelarEquality) -> Result<SeparationMatrix> {
    let (ctr_path, var_path) = if path.is_dir() {
        (path.join("ctr.txt"), Some(path.join("var.txt")))
    } else {
        (path.to_path_buf(), path.parent().map(|p| p.join("var.txt")))
    };
    let ctr = read_to_string(&ctr_path)?;
    let vars = match var_path {
        Some(p) if p.is_file() => Some(read_to_string(&p)?),
        _ => None,
    };
    separation_from_celar(&ctr, vars.as_deref(), step, equality)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_column_accepts_commas_and_comments() {
        let v = parse_two_column("# a b\n0 0\n 60, 25 # tail\n\n180\t25\n", "t").unwrap();
        assert_eq!(v, vec![(0.0, 0.0), (60.0, 25.0), (180.0, 25.0)]);
        assert!(parse_two_column("1 2 3\n", "t").is_err());
        assert!(parse_two_column("1 x\n", "t").is_err());
    }

    #[test]
    fn separation_csv_round_trip() {
        let mut m = SeparationMatrix::empty(vec![3, 7, 9, 11], 0.15);
        m.set(0, 1, 0.6, 4);
        m.set(1, 3, f64::INFINITY, 3901);
        m.set(2, 3, 1.2, 8);
        let csv = separation_to_csv(&m, &[("seed", "5".into())]);
        assert!(csv.starts_with("# nfdfap "));
        let back = separation_from_csv(&csv, "mem", 99.0).unwrap();
        assert_eq!(back.link_ids(), m.link_ids());
        assert_eq!(back.step(), 0.15);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(back.get(i, j), m.get(i, j));
            }
        }
        assert_eq!(back.raw(1, 3), f64::INFINITY);
    }

    #[test]
    fn separation_csv_without_link_line_uses_seen_ids() {
        let m = separation_from_csv("i,j,S_MHz,sep_quantized\n5,2,0.3,2\n", "mem", 0.15).unwrap();
        assert_eq!(m.link_ids(), &[2, 5]);
        assert_eq!(m.get(0, 1), 2);
    }

    #[test]
    fn celar_lines_convert_strict_inequalities() {
        let ctr = "   1   2 F =  238\n   1   3 D >  186\n   2   4 C > 10 1\n";
        let m = separation_from_celar(ctr, None, 1.0, CelarEquality::AsSeparation).unwrap();
        assert_eq!(m.link_ids(), &[1, 2, 3, 4]);
        assert_eq!(m.get(0, 1), 238);
        assert_eq!(m.get(0, 2), 187);
        assert_eq!(m.get(1, 3), 11);
        assert_eq!(m.constraint_count(), 3);
        let skip = separation_from_celar(ctr, Some("1 1\n2 1\n3 1\n4 1\n5 1\n"), 1.0, CelarEquality::Skip)
            .unwrap();
        assert_eq!(skip.len(), 5);
        assert_eq!(skip.constraint_count(), 2);
    }

    #[test]
    fn assignment_file_round_trip() {
        let a = Assignment::new(vec![5, 1, 9]);
        let f = AssignmentFile::new(&a, &[10, 20, 30], None, BTreeMap::new());
        let back = AssignmentFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.to_assignment(&[10, 20, 30]), a);
        assert_eq!(back.assignment[&20], 1);
    }

    #[test]
    fn topology_json_round_trip() {
        let nodes = vec![Node { id: 0, x: 0.0, y: 0.0 }, Node { id: 1, x: 3.5, y: -1.0 }];
        let t = Topology::new(nodes, vec![Link { id: 4, tx: 1, rx: 0 }]).unwrap();
        let plan = FrequencyPlan::new(7007.5, 7607.5, 15.0, 0.15).unwrap();
        let text = topology_to_json(&t, Some(&plan)).unwrap();
        let (back, block) = topology_from_json(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(block.unwrap().build().unwrap().count(), 3901);
    }

    #[test]
    fn meta_line_parses_back() {
        let line = meta_line(&[("seed", "42".into()), ("strategy", "hedge".into())]);
        let m = parse_meta(&line);
        assert_eq!(m["seed"], "42");
        assert_eq!(m["strategy"], "hedge");
    }
}
