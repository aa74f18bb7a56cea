//! Runs sweep points and writes the result table.

use std::io::Write;

use rayon::prelude::*;
use relaysim_core::{
    aggregate, generate, run, AggregateMetrics, Architecture, ExperimentConfig, RunDigest,
};

use crate::error::{CliError, Result};
use crate::sweep::{sweep_points, SweepSpec};

pub const CSV_HEADER: [&str; 12] = [
    "architecture",
    "N",
    "R",
    "A_L",
    "seed_base",
    "S_mean",
    "S_ci95",
    "ed_energy_mean_mJ",
    "ed_energy_ci95",
    "unserved_ed_mean",
    "frames_lost_noise",
    "frames_lost_interference",
];

/// What to run: the base configuration, the architectures to compare and
/// the sweeps to apply to each.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: ExperimentConfig,
    pub architectures: Vec<Architecture>,
    pub sweeps: Vec<SweepSpec>,
}

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub architecture: Architecture,
    pub n_eds: usize,
    /// Relay count actually simulated (0 for the single-hop benchmarks).
    pub n_relays: usize,
    pub area_side: f64,
    pub seed_base: u64,
    pub metrics: AggregateMetrics,
}

fn digest_run(cfg: &ExperimentConfig, index: u64) -> Result<RunDigest> {
    let scenario = generate(cfg, index)?;
    Ok(run(&scenario)?.digest())
}

/// Runs `cfg.run_count` independent runs and returns their digests in
/// run-index order. `workers > 1` spreads runs over a thread pool; the
/// result does not depend on the worker count.
pub fn run_digests(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RunDigest>> {
    cfg.validate()?;
    let indices = 0..cfg.run_count as u64;
    if workers <= 1 {
        return indices.map(|i| digest_run(cfg, i)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| {
        indices
            .into_par_iter()
            .map(|i| digest_run(cfg, i))
            .collect()
    })
}

/// Runs every (architecture, sweep point) combination.
///
/// Benchmarks have no relays, so sweep points that differ only in R
/// collapse into one benchmark row.
pub fn run_experiment(plan: &ExperimentPlan, workers: usize) -> Result<Vec<ResultRow>> {
    let points = sweep_points(&plan.sweeps)?;
    let mut rows: Vec<ResultRow> = Vec::new();
    for &architecture in &plan.architectures {
        for point in &points {
            let mut cfg = plan.base.clone().with_architecture(architecture);
            for &(var, value) in point {
                var.set(&mut cfg, value);
            }
            let n_relays = if architecture == Architecture::Proposal {
                cfg.n_relays
            } else {
                0
            };
            let seen = rows.iter().any(|r| {
                r.architecture == architecture
                    && r.n_eds == cfg.n_eds
                    && r.n_relays == n_relays
                    && r.area_side == cfg.area_side
            });
            if seen {
                continue;
            }
            let digests = run_digests(&cfg, workers)?;
            rows.push(ResultRow {
                architecture,
                n_eds: cfg.n_eds,
                n_relays,
                area_side: cfg.area_side,
                seed_base: cfg.base_seed,
                metrics: aggregate(&digests),
            });
        }
    }
    Ok(rows)
}

fn float(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_csv(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.architecture.name().to_string(),
            r.n_eds.to_string(),
            r.n_relays.to_string(),
            r.area_side.to_string(),
            r.seed_base.to_string(),
            float(m.throughput.mean),
            float(m.throughput.ci95),
            float(m.ed_energy_mj.mean),
            float(m.ed_energy_mj.ci95),
            float(m.unserved_eds.mean),
            float(m.frames_lost_noise.mean),
            float(m.frames_lost_interference.mean),
        ])?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("cannot write results: {e}")))?;
    Ok(())
}
