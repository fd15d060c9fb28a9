//! Writing sweep results to disk.
//!
//! Layout of `out_dir`:
//!
//! | file | contents |
//! |------|----------|
//! | `sweep.csv` | one row per cell: `zeta,n_r,agent,s_a,s_b,fairness,mean_j` |
//! | `detail_{agent}_nr{n_r}_z{zeta}.csv` | per eval step: `t,n_a,n_b,d_a,d_b,j` |
//! | `curve_{agent}_nr{n_r}_z{zeta}.csv` | per training step: `step,reward,moving_average` |
//! | `surplus_nr{n_r}.svg`, `fairness_nr{n_r}.svg` | metric against zeta, one line per agent |
//! | `alloc_{agent}_nr{n_r}_z{zeta}.svg` | demand and allocation over the eval split |
//! | `learning_{agent}_nr{n_r}.svg` | smoothed reward per zeta |
//! | `run_metadata.json` | wall-clock timestamp and counts |
//!
//! Everything except `run_metadata.json` is a pure function of the table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::svg::{LineChart, Series};
use super::sweep::CellResult;
use crate::domain::AgentKind;
use crate::error::{Error, Result};

pub const SWEEP_HEADER: [&str; 7] = ["zeta", "n_r", "agent", "s_a", "s_b", "fairness", "mean_j"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub zeta: f64,
    pub n_r: f64,
    pub agent: AgentKind,
    pub s_a: f64,
    pub s_b: f64,
    pub fairness: f64,
    pub mean_j: f64,
}

impl From<&CellResult> for SweepRow {
    fn from(c: &CellResult) -> Self {
        Self {
            zeta: c.zeta,
            n_r: c.n_r,
            agent: c.agent,
            s_a: c.report.s_a,
            s_b: c.report.s_b,
            fairness: c.report.fairness,
            mean_j: c.report.mean_j,
        }
    }
}

fn cell_stem(agent: AgentKind, n_r: f64, zeta: f64) -> String {
    format!("{agent}_nr{n_r}_z{zeta}")
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([num(r.zeta), num(r.n_r), r.agent.to_string(), num(r.s_a), num(r.s_b), num(r.fairness), num(r.mean_j)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(Error::SchemaMismatch { expected: SWEEP_HEADER.join(","), found: header.join(",") });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::MalformedRow { row: i + 1, reason: e.to_string() }))
        .collect()
}

/// Surplus/deficit and fairness against zeta, one chart pair per pool size.
pub fn render_sweep_charts(rows: &[SweepRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut by_pool: BTreeMap<u64, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_pool.entry(r.n_r.to_bits()).or_default().push(r);
    }
    let mut written = Vec::new();
    for (bits, pool_rows) in by_pool {
        let n_r = f64::from_bits(bits);
        let mut agents: Vec<AgentKind> = pool_rows.iter().map(|r| r.agent).collect();
        agents.sort();
        agents.dedup();
        let line = |agent: AgentKind, f: fn(&SweepRow) -> f64| {
            let mut pts: Vec<(f64, f64)> = pool_rows.iter().filter(|r| r.agent == agent).map(|r| (r.zeta, f(r))).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts
        };

        let mut surplus = LineChart::new(format!("Surplus/deficit, N_r = {n_r}"), "zeta", "S");
        let mut fairness = LineChart::new(format!("Jain fairness, N_r = {n_r}"), "zeta", "fairness");
        for &agent in &agents {
            surplus = surplus
                .with_series(Series::new(format!("{agent} S_a"), line(agent, |r| r.s_a)))
                .with_series(Series::new(format!("{agent} S_b"), line(agent, |r| r.s_b)).dashed());
            fairness = fairness.with_series(Series::new(agent.to_string(), line(agent, |r| r.fairness)));
        }
        for (name, chart) in [(format!("surplus_nr{n_r}.svg"), surplus), (format!("fairness_nr{n_r}.svg"), fairness)] {
            let path = out_dir.join(name);
            fs::write(&path, chart.render())?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_detail(cell: &CellResult, out_dir: &Path) -> Result<()> {
    let stem = cell_stem(cell.agent, cell.n_r, cell.zeta);
    let mut w = csv::Writer::from_path(out_dir.join(format!("detail_{stem}.csv")))?;
    w.write_record(["t", "n_a", "n_b", "d_a", "d_b", "j"])?;
    let steps = cell.report.per_step.as_deref().unwrap_or_default();
    for s in steps {
        w.write_record([
            s.t.to_string(),
            num(s.allocation.n_a),
            num(s.allocation.n_b),
            num(s.demand.0),
            num(s.demand.1),
            num(s.j),
        ])?;
    }
    w.flush()?;

    if !steps.is_empty() {
        let t = |s: &crate::metrics::StepDetail| s.t as f64;
        let chart = LineChart::new(format!("{} allocation, N_r = {}, zeta = {}", cell.agent, cell.n_r, cell.zeta), "t", "PRB")
            .with_series(Series::new("d_a", steps.iter().map(|s| (t(s), s.demand.0)).collect()).dashed())
            .with_series(Series::new("d_b", steps.iter().map(|s| (t(s), s.demand.1)).collect()).dashed())
            .with_series(Series::new("n_a", steps.iter().map(|s| (t(s), s.allocation.n_a)).collect()))
            .with_series(Series::new("n_b", steps.iter().map(|s| (t(s), s.allocation.n_b)).collect()));
        fs::write(out_dir.join(format!("alloc_{stem}.svg")), chart.render())?;
    }

    if let Some(curve) = &cell.curve {
        let mut w = csv::Writer::from_path(out_dir.join(format!("curve_{stem}.csv")))?;
        w.write_record(["step", "reward", "moving_average"])?;
        for (i, (r, m)) in curve.rewards.iter().zip(&curve.moving_average).enumerate() {
            w.write_record([i.to_string(), num(*r), num(*m)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_learning_charts(table: &[CellResult], out_dir: &Path) -> Result<()> {
    let mut groups: BTreeMap<(AgentKind, u64), Vec<&CellResult>> = BTreeMap::new();
    for c in table.iter().filter(|c| c.curve.is_some()) {
        groups.entry((c.agent, c.n_r.to_bits())).or_default().push(c);
    }
    for ((agent, bits), cells) in groups {
        let n_r = f64::from_bits(bits);
        let mut chart = LineChart::new(format!("{agent} learning curves, N_r = {n_r}"), "training step", "reward (moving average)");
        for c in cells {
            let curve = c.curve.as_ref().expect("filtered");
            // Thin long curves so the SVG stays small.
            let stride = (curve.moving_average.len() / 400).max(1);
            let pts = curve
                .moving_average
                .iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i + 1 == curve.moving_average.len())
                .map(|(i, &m)| (i as f64, m))
                .collect();
            chart = chart.with_series(Series::new(format!("zeta = {}", c.zeta), pts));
        }
        fs::write(out_dir.join(format!("learning_{agent}_nr{n_r}.svg")), chart.render())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata {
    generated_unix_s: u64,
    package_version: &'static str,
    cells: usize,
}

/// Writes every artifact of a sweep. Errors on an empty table before creating anything.
pub fn emit_results(table: &[CellResult], out_dir: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    fs::create_dir_all(out_dir)?;
    let rows: Vec<SweepRow> = table.iter().map(SweepRow::from).collect();
    write_sweep_csv(&rows, &out_dir.join("sweep.csv"))?;
    for cell in table {
        write_detail(cell, out_dir)?;
    }
    render_sweep_charts(&rows, out_dir)?;
    write_learning_charts(table, out_dir)?;

    let meta = RunMetadata {
        generated_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        package_version: env!("CARGO_PKG_VERSION"),
        cells: table.len(),
    };
    fs::write(out_dir.join("run_metadata.json"), serde_json::to_string_pretty(&meta).expect("metadata serialises"))?;
    Ok(())
}
