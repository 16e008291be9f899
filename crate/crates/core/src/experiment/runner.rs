use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OrderSpec};
use super::ExperimentError;
use crate::bounds::{report_for, BoundReport, Conventions};
use crate::ring::PrimeContext;
use crate::sums::{Gamma, Kernel, SumSpec, WeightedSubset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub p: u64,
    /// Resolved `T`, or the requested value when it could not be resolved.
    pub order: u64,
    pub k: u32,
    pub size_x: u64,
    pub size_y: u64,
    pub density: Option<f64>,
    pub seed: u64,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
    /// Time spent on the exact sum shared by all `k` of this cell group.
    pub exact_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub version: String,
    pub conventions: Conventions,
    pub config: ExperimentConfig,
    pub cells: Vec<CellRecord>,
    pub elapsed_ms: f64,
}

impl ExperimentRecord {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

struct Group {
    p: u64,
    order: OrderSpec,
    density: Option<f64>,
    seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn groups(config: &ExperimentConfig) -> Vec<Group> {
    let densities: Vec<Option<f64>> = match config.densities() {
        d if d.is_empty() => vec![None],
        d => d.into_iter().map(Some).collect(),
    };
    let mut out = Vec::new();
    for p in config.primes() {
        for &order in &config.orders() {
            for &density in &densities {
                let seed = match density {
                    Some(_) => splitmix(config.seed ^ splitmix(out.len() as u64)),
                    None => config.seed,
                };
                out.push(Group {
                    p,
                    order,
                    density,
                    seed,
                });
            }
        }
    }
    out
}

fn density_size(p: u64, alpha: f64) -> u64 {
    ((p as f64).powf(alpha).round() as u64).clamp(1, p - 1)
}

struct Prepared {
    order: u64,
    kernel: Kernel,
    x: WeightedSubset,
    y: WeightedSubset,
}

fn prepare(config: &ExperimentConfig, group: &Group, gamma: &Gamma) -> Result<Prepared, String> {
    let ctx = PrimeContext::new(group.p).map_err(|e| e.to_string())?;
    let order = group.order.resolve(&ctx).map_err(|e| e.to_string())?;
    let n = ctx.group_order();
    let kernel = Kernel::new(ctx, order, config.a).map_err(|e| e.to_string())?;
    let (x, y) = match group.density {
        Some(alpha) => {
            let size = density_size(group.p, alpha);
            let x = WeightedSubset::random(n, size, group.seed, Gamma::Ones);
            let y = WeightedSubset::random(n, size, splitmix(group.seed), gamma.clone());
            (x.map_err(|e| e.to_string())?, y.map_err(|e| e.to_string())?)
        }
        None => (
            config
                .x
                .resolve(n, Gamma::Ones)
                .map_err(|e| e.to_string())?,
            config
                .y
                .resolve(n, gamma.clone())
                .map_err(|e| e.to_string())?,
        ),
    };
    Ok(Prepared {
        order,
        kernel,
        x,
        y,
    })
}

fn run_group(config: &ExperimentConfig, group: &Group, gamma: &Gamma) -> Vec<CellRecord> {
    let started = Instant::now();
    let prepared = prepare(config, group, gamma);
    let requested = match group.order {
        OrderSpec::Value(t) => t,
        OrderSpec::Max => group.p.saturating_sub(1),
    };
    let blank = |k: u32, error: String| CellRecord {
        p: group.p,
        order: requested,
        k,
        size_x: 0,
        size_y: 0,
        density: group.density,
        seed: group.seed,
        report: None,
        error: Some(error),
        exact_ms: 0.0,
    };
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => return config.k.iter().map(|&k| blank(k, e.clone())).collect(),
    };

    // W does not depend on k, so it is evaluated once per group.
    let mut exact = None;
    let mut exact_ms = 0.0;
    config
        .k
        .iter()
        .map(|&k| {
            let spec = match SumSpec::new(
                prepared.kernel.clone(),
                prepared.x.clone(),
                prepared.y.clone(),
                k,
            ) {
                Ok(s) => s,
                Err(e) => return blank(k, e.to_string()),
            };
            let w = *exact.get_or_insert_with(|| {
                let w = spec.w_sum();
                exact_ms = started.elapsed().as_secs_f64() * 1e3;
                w
            });
            let (report, error) = match report_for(&spec, w) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            CellRecord {
                p: group.p,
                order: prepared.order,
                k,
                size_x: prepared.x.len() as u64,
                size_y: prepared.y.len() as u64,
                density: group.density,
                seed: group.seed,
                report,
                error,
                exact_ms,
            }
        })
        .collect()
}

/// Evaluate every cell of the grid `p x T x density x k`, in that nesting
/// order. Cell failures are recorded, not propagated.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord, ExperimentError> {
    config.validate()?;
    let gamma = config.gamma.resolve()?;
    let started = Instant::now();
    let groups = groups(config);

    #[cfg(feature = "parallel")]
    let cells: Vec<Vec<CellRecord>> = {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            groups
                .par_iter()
                .map(|g| run_group(config, g, &gamma))
                .collect()
        })
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<Vec<CellRecord>> = groups
        .iter()
        .map(|g| run_group(config, g, &gamma))
        .collect();

    Ok(ExperimentRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        conventions: Conventions::default(),
        config: config.clone(),
        cells: cells.into_iter().flatten().collect(),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
