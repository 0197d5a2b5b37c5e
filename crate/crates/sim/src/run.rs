//! Sweep orchestration, CSV output and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cpdm_core::metrics::LinkReport;

use crate::config::{resolve, ExperimentSpec, ResolvedSweep};
use crate::engine::{check_monotone, groups, run_group, tx_seed, Context, Row, Status, COLUMNS};

/// Seeds of one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSeeds {
    pub row: usize,
    pub seed: u64,
    pub link_seed: u64,
}

/// Everything needed to rerun a sweep bit-for-bit: feed the file back to
/// `simulate` as its config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentSpec,
    pub sweep: ResolvedSweep,
    pub tx_seed: u64,
    pub points: Vec<PointSeeds>,
    pub csv: PathBuf,
    pub failed_points: usize,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub tap_dir: Option<PathBuf>,
}

pub struct RunOutcome {
    pub rows: Vec<Row>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub failed: usize,
}

/// Runs the sweep without touching the disk (constellation exports and taps
/// aside). Rows come back in deterministic axis order.
pub fn run_points(
    spec: &ExperimentSpec,
    sweep: &ResolvedSweep,
    opts: &RunOptions,
) -> anyhow::Result<Vec<Row>> {
    let ctx = Context::new(spec, sweep, opts.tap_dir.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .context("building the worker pool")?;
    let mut rows: Vec<Row> = pool.install(|| {
        // measured OSNR per launch power, shared by every group at that power
        let measured: Vec<Result<Vec<Option<f64>>, String>> = sweep
            .launch_powers_dbm
            .par_iter()
            .map(|&p| ctx.measured_osnr(p).map_err(|e| e.to_string()))
            .collect();
        groups(sweep)
            .into_par_iter()
            .flat_map_iter(|g| match &measured[g.power] {
                Ok(m) => run_group(&ctx, g, m),
                Err(e) => {
                    let mut rows = run_group(&ctx, g, &vec![None; sweep.distances_km.len()]);
                    for r in &mut rows {
                        if r.status == Status::Ok {
                            r.status = Status::Failed;
                            r.message = format!("OSNR measurement: {e}");
                        }
                    }
                    rows
                }
            })
            .collect()
    });
    rows.sort_by_key(|r| r.order);
    check_monotone(&mut rows);
    for r in &mut rows {
        if let Some(rep) = link_report(r) {
            if let Err(e) = rep.verify() {
                r.status = Status::Failed;
                r.message = format!("report check: {e}");
            }
        }
    }
    Ok(rows)
}

/// The row as a link report, when it carries a BER or a required OSNR.
pub fn link_report(r: &Row) -> Option<LinkReport> {
    if r.ber.is_none() && r.osnr_required_db.is_none() {
        return None;
    }
    Some(LinkReport {
        distance_km: r.distance_km,
        span_km: r.span_km,
        launch_power_dbm: r.launch_power_dbm,
        sps_bit: r.sps_bit,
        ber: r.ber.unwrap_or(0.0),
        ber_upper_bound: r.ber_upper_bound.unwrap_or(false),
        ber_ci_low: r.ber_ci_low,
        ber_ci_high: r.ber_ci_high,
        compared_bits: r.compared_bits.unwrap_or(0),
        evm_db: r.evm_db.unwrap_or(f64::NAN),
        q_factor_db: r.q_factor_db,
        osnr_measured_db: r.osnr_measured_db,
        osnr_required_db: r.osnr_required_db,
        osnr_max_achievable_db: r.osnr_max_achievable_db,
        osnr_margin_db: r.osnr_margin_db,
        seed: r.seed,
    })
}

pub fn write_rows(rows: &[Row], path: &Path) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Validates, runs and writes `<scenario>.csv` plus `manifest.json` into
/// the output directory.
pub fn run_experiment(mut spec: ExperimentSpec, opts: &RunOptions) -> anyhow::Result<RunOutcome> {
    let sweep = resolve(&mut spec)?;
    let t0 = Instant::now();
    std::fs::create_dir_all(&spec.output_dir)
        .with_context(|| format!("creating {}", spec.output_dir.display()))?;
    let rows = run_points(&spec, &sweep, opts)?;
    let csv = spec
        .output_dir
        .join(format!("{}.csv", spec.scenario.name()));
    write_rows(&rows, &csv)?;
    let failed = rows.iter().filter(|r| r.status == Status::Failed).count();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tx_seed: tx_seed(spec.master_seed),
        points: rows
            .iter()
            .enumerate()
            .map(|(i, r)| PointSeeds {
                row: i,
                seed: r.seed,
                link_seed: r.link_seed,
            })
            .collect(),
        csv: csv.clone(),
        failed_points: failed,
        wall_clock_s: t0.elapsed().as_secs_f64(),
        config: spec.clone(),
        sweep,
    };
    let mpath = spec.output_dir.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", mpath.display()))?;
    Ok(RunOutcome {
        rows,
        csv,
        manifest: mpath,
        failed,
    })
}
