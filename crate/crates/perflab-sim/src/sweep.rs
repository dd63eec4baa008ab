//! Three-dimensional initialization mesh sweeps.
//!
//! The mesh spans the movement probability `alpha3` over [0, 1], the
//! cooperation probability `alpha5` over [0, 1] and the consumption-profile
//! shape `beta_alpha` over [1, 5], with `m` evenly spaced nodes per dimension
//! and `n` runs per node. Nodes are indexed `(i3 * m + i5) * m + ia`, and the
//! run at slot `run` of a node derives its seed from the master seed through
//! a counter, so every run is reproducible in isolation and the sweep result
//! does not depend on how runs are scheduled across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::{run_simulation, SimConfig, SimError};

/// One run's outcome within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub node_idx: usize,
    pub alpha3: f64,
    pub alpha5: f64,
    pub beta_alpha: f64,
    pub run: usize,
    pub seed: u64,
    pub t_e: u32,
    pub reached_tmax: bool,
}

/// Aggregate over the `n` runs of one mesh node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub node_idx: usize,
    pub alpha3: f64,
    pub alpha5: f64,
    pub beta_alpha: f64,
    pub mean_te: f64,
    pub sd_te: f64,
    pub n_tmax: usize,
}

/// Full sweep result: one row per run, one summary per node, both in
/// node-then-run order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<NodeSummary>,
}

/// Derives the seed of run counter `counter` from the master seed with a
/// SplitMix64 step: the counter advances the state by the golden-ratio
/// increment and the result is finalized with the usual avalanche mixer.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64)
        .collect()
}

/// Runs the `m^3 * n` sweep. `jobs` caps the worker threads; `None` uses the
/// global pool. Row order and content are independent of `jobs`.
pub fn mesh_sweep(
    base: &SimConfig,
    m: usize,
    n: usize,
    jobs: Option<usize>,
) -> Result<SweepTable, SimError> {
    if m < 2 {
        return Err(SimError::Domain(
            "mesh needs at least two nodes per dimension".into(),
        ));
    }
    if n < 1 {
        return Err(SimError::Domain("mesh needs at least one run per node".into()));
    }
    base.validate()?;

    let a3 = linspace(0.0, 1.0, m);
    let a5 = linspace(0.0, 1.0, m);
    let ba = linspace(1.0, 5.0, m);
    let mut slots = Vec::with_capacity(m * m * m * n);
    for (i3, &v3) in a3.iter().enumerate() {
        for (i5, &v5) in a5.iter().enumerate() {
            for (ia, &va) in ba.iter().enumerate() {
                let node_idx = (i3 * m + i5) * m + ia;
                for run in 0..n {
                    let counter = (node_idx * n + run) as u64;
                    slots.push((node_idx, v3, v5, va, run, derive_seed(base.seed, counter)));
                }
            }
        }
    }

    let work = |slot: &(usize, f64, f64, f64, usize, u64)| -> Result<SweepRow, SimError> {
        let &(node_idx, alpha3, alpha5, beta_alpha, run, seed) = slot;
        let mut cfg = base.clone();
        cfg.alpha3 = alpha3;
        cfg.alpha5 = alpha5;
        cfg.beta_alpha = beta_alpha;
        cfg.seed = seed;
        let summary = run_simulation(cfg)?;
        Ok(SweepRow {
            node_idx,
            alpha3,
            alpha5,
            beta_alpha,
            run,
            seed,
            t_e: summary.t_e,
            reached_tmax: summary.reached_t_max,
        })
    };

    let rows: Result<Vec<SweepRow>, SimError> = match jobs {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| SimError::Domain(format!("thread pool setup failed: {e}")))?;
            pool.install(|| slots.par_iter().map(work).collect())
        }
        None => slots.par_iter().map(work).collect(),
    };
    let rows = rows?;

    let mut summaries = Vec::with_capacity(m * m * m);
    for chunk in rows.chunks(n) {
        let mean = chunk.iter().map(|r| r.t_e as f64).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = chunk.iter().map(|r| (r.t_e as f64 - mean).powi(2)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let first = &chunk[0];
        summaries.push(NodeSummary {
            node_idx: first.node_idx,
            alpha3: first.alpha3,
            alpha5: first.alpha5,
            beta_alpha: first.beta_alpha,
            mean_te: mean,
            sd_te: sd,
            n_tmax: chunk.iter().filter(|r| r.reached_tmax).count(),
        });
    }

    Ok(SweepTable { rows, summaries })
}
