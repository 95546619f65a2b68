//! Stage-1 spatial-cohesion pruning: grid separation, salience-based
//! alignment, pillar/collector role assignment, and weighted aggregation.
//!
//! The stage keeps `k` benchmark tokens chosen region by region so the
//! surviving set spans the whole grid, then merges neighbouring features
//! into the collector tokens under a similarity-times-proximity weight.
//! Pillar tokens (top key-norm quantile) pass through untouched.

use std::path::Path;

use crate::dump::{read_records, write_records, TensorRecord, TokenDump};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Stage-1 hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    /// Patches per region side (`g`). Trailing regions may be smaller when
    /// `g` does not divide the grid.
    pub region_size: usize,
    /// Candidates kept per region (`n`).
    pub per_region: usize,
    /// Benchmark-token count (`k`).
    pub keep: usize,
    /// Fraction of the maximum squared grid distance used as the
    /// aggregation threshold.
    pub dist_frac: f64,
    /// Quantile on benchmark key norms above which tokens become pillars.
    pub pillar_quantile: f64,
}

pub const DEFAULT_DIST_FRAC: f64 = 0.26;
pub const DEFAULT_PILLAR_QUANTILE: f64 = 0.75;

impl PruneConfig {
    pub fn new(region_size: usize, per_region: usize, keep: usize) -> Self {
        PruneConfig {
            region_size,
            per_region,
            keep,
            dist_frac: DEFAULT_DIST_FRAC,
            pillar_quantile: DEFAULT_PILLAR_QUANTILE,
        }
    }

    pub fn validate(&self, grid: (usize, usize)) -> Result<()> {
        let (grid_h, grid_w) = grid;
        if grid_h == 0 || grid_w == 0 {
            return Err(Error::InvalidConfig("grid extents must be >= 1".into()));
        }
        if self.region_size == 0 {
            return Err(Error::InvalidConfig("region_size must be >= 1".into()));
        }
        if self.per_region == 0 {
            return Err(Error::InvalidConfig("per_region must be >= 1".into()));
        }
        if self.keep == 0 {
            return Err(Error::InvalidConfig("keep must be >= 1".into()));
        }
        let regions = grid_h.div_ceil(self.region_size) * grid_w.div_ceil(self.region_size);
        if self.per_region * regions < self.keep {
            return Err(Error::InvalidConfig(format!(
                "per_region * regions = {} cannot fill keep = {}",
                self.per_region * regions,
                self.keep
            )));
        }
        if !(self.dist_frac > 0.0 && self.dist_frac <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dist_frac must be in (0, 1], got {}",
                self.dist_frac
            )));
        }
        if !(0.0..1.0).contains(&self.pillar_quantile) {
            return Err(Error::InvalidConfig(format!(
                "pillar_quantile must be in [0, 1), got {}",
                self.pillar_quantile
            )));
        }
        Ok(())
    }
}

/// Benchmark tokens split into pillars (features preserved verbatim) and
/// collectors (features aggregated from neighbours). Both lists hold
/// original token indices, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleAssignment {
    pub pillars: Vec<usize>,
    pub collectors: Vec<usize>,
}

impl RoleAssignment {
    pub fn is_pillar(&self, index: usize) -> bool {
        self.pillars.binary_search(&index).is_ok()
    }
}

/// Row-normalized aggregation weights plus the count of zero-norm
/// similarity rows encountered while building them.
#[derive(Debug, Clone)]
pub struct BuiltWeights {
    pub matrix: Matrix,
    pub zero_norm_sim_rows: usize,
}

/// Output of a stage-1 run.
#[derive(Debug, Clone)]
pub struct PruneResult {
    /// Kept original token indices, strictly ascending, length `keep`.
    pub kept_indices: Vec<usize>,
    /// Aggregated features, `keep x D_enc`.
    pub aggregated: Matrix,
    pub roles: RoleAssignment,
    /// Row-normalized weights, `keep x N`, retained for audit.
    pub weights: Matrix,
    pub zero_norm_sim_rows: usize,
}

/// Salience per token: CLS attention times key-vector L2 norm.
pub fn compute_salience(cls_attn: &[f32], keys: &Matrix) -> Result<Vec<f64>> {
    if cls_attn.len() != keys.rows() {
        return Err(Error::ShapeMismatch(format!(
            "cls_attn has {} entries, keys have {} rows",
            cls_attn.len(),
            keys.rows()
        )));
    }
    if cls_attn.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::InvalidArgument(
            "cls_attn entries must be >= 0".into(),
        ));
    }
    let norms = keys.row_norms();
    Ok(cls_attn
        .iter()
        .zip(&norms)
        .map(|(&a, &n)| a as f64 * n)
        .collect())
}

fn region_bounds(extent: usize, region_size: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..extent.div_ceil(region_size))
        .map(move |r| (r * region_size, ((r + 1) * region_size).min(extent)))
}

/// Region-based candidate selection: per region the top-`n` salience
/// indices enter the pool, and the global top-`k` of the pool are returned
/// in ascending original-index order. Ties everywhere break toward the
/// lowest index.
pub fn select_benchmarks(
    salience: &[f64],
    grid: (usize, usize),
    cfg: &PruneConfig,
) -> Result<Vec<usize>> {
    cfg.validate(grid)?;
    let (grid_h, grid_w) = grid;
    if salience.len() != grid_h * grid_w {
        return Err(Error::ShapeMismatch(format!(
            "salience has {} entries, grid implies {}",
            salience.len(),
            grid_h * grid_w
        )));
    }
    let mut pool: Vec<usize> = Vec::new();
    for (r0, r1) in region_bounds(grid_h, cfg.region_size) {
        for (c0, c1) in region_bounds(grid_w, cfg.region_size) {
            let mut region: Vec<usize> = (r0..r1)
                .flat_map(|r| (c0..c1).map(move |c| r * grid_w + c))
                .collect();
            region.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
            region.truncate(cfg.per_region);
            pool.extend(region);
        }
    }
    if pool.len() < cfg.keep {
        return Err(Error::CandidatePoolTooSmall {
            need: cfg.keep,
            have: pool.len(),
        });
    }
    pool.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
    pool.truncate(cfg.keep);
    pool.sort_unstable();
    Ok(pool)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Splits benchmark tokens by key norm: at or above the quantile threshold
/// they become pillars, the rest collectors.
pub fn assign_roles(
    benchmark_indices: &[usize],
    keys: &Matrix,
    pillar_quantile: f64,
) -> Result<RoleAssignment> {
    if benchmark_indices.is_empty() {
        return Err(Error::InvalidArgument("empty benchmark set".into()));
    }
    if !(0.0..1.0).contains(&pillar_quantile) {
        return Err(Error::InvalidConfig(format!(
            "pillar_quantile must be in [0, 1), got {pillar_quantile}"
        )));
    }
    let norms: Vec<f64> = benchmark_indices
        .iter()
        .map(|&i| {
            if i >= keys.rows() {
                return Err(Error::InvalidArgument(format!(
                    "benchmark index {i} out of range for {} keys",
                    keys.rows()
                )));
            }
            Ok(crate::matrix::l2_norm(keys.row(i)))
        })
        .collect::<Result<_>>()?;
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let tau = quantile_linear(&sorted, pillar_quantile);
    let mut pillars = Vec::new();
    let mut collectors = Vec::new();
    for (&idx, &norm) in benchmark_indices.iter().zip(&norms) {
        if norm >= tau {
            pillars.push(idx);
        } else {
            collectors.push(idx);
        }
    }
    Ok(RoleAssignment { pillars, collectors })
}

/// Builds the row-normalized aggregation weights.
///
/// Collector rows combine rectified cosine similarity with a linear spatial
/// decay `max(0, 1 - d^2 / d_thresh)` over squared grid distance, with the
/// self-entry forced to 1 before normalization. Pillar rows are one-hot on
/// their own index. Zero-norm similarity rows contribute zero cosine and
/// are counted, not failed.
pub fn build_weights(
    sim_features: &Matrix,
    grid: (usize, usize),
    benchmark_indices: &[usize],
    roles: &RoleAssignment,
    dist_frac: f64,
) -> Result<BuiltWeights> {
    let (grid_h, grid_w) = grid;
    let n = grid_h * grid_w;
    if sim_features.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "sim_features has {} rows, grid implies {n}",
            sim_features.rows()
        )));
    }
    if roles.pillars.len() + roles.collectors.len() != benchmark_indices.len() {
        return Err(Error::InvalidArgument(
            "roles do not partition the benchmark set".into(),
        ));
    }
    let d_thresh = dist_frac
        * (((grid_h - 1) * (grid_h - 1) + (grid_w - 1) * (grid_w - 1)) as f64);
    let norms = sim_features.row_norms();
    let zero_norm_sim_rows = norms.iter().filter(|&&x| x == 0.0).count();

    let mut weights = Matrix::zeros(benchmark_indices.len(), n);
    for (row, &b) in benchmark_indices.iter().enumerate() {
        if b >= n {
            return Err(Error::InvalidArgument(format!(
                "benchmark index {b} out of range for {n} tokens"
            )));
        }
        if roles.is_pillar(b) {
            weights.set(row, b, 1.0);
            continue;
        }
        let (br, bc) = (b / grid_w, b % grid_w);
        let b_row = sim_features.row(b);
        let b_norm = norms[b];
        let mut sum = 0.0f64;
        {
            let out = weights.row_mut(row);
            for j in 0..n {
                let (jr, jc) = (j / grid_w, j % grid_w);
                let dr = br.abs_diff(jr);
                let dc = bc.abs_diff(jc);
                let d2 = (dr * dr + dc * dc) as f64;
                let prox = if d2 == 0.0 {
                    1.0
                } else if d2 >= d_thresh {
                    0.0
                } else {
                    1.0 - d2 / d_thresh
                };
                if prox == 0.0 {
                    continue;
                }
                let sim = if b_norm == 0.0 || norms[j] == 0.0 {
                    0.0
                } else {
                    dot(b_row, sim_features.row(j)) / (b_norm * norms[j])
                };
                out[j] = (sim.max(0.0) * prox) as f32;
            }
            out[b] = 1.0;
            for &w in out.iter() {
                sum += w as f64;
            }
            for w in out.iter_mut() {
                *w = (*w as f64 / sum) as f32;
            }
        }
    }
    Ok(BuiltWeights {
        matrix: weights,
        zero_norm_sim_rows,
    })
}

/// Applies the aggregation weights: `out = weights * features`.
///
/// Rows must already sum to 1 (within 1e-6). Exact one-hot rows copy their
/// source feature row so pillar features survive bit-for-bit.
pub fn aggregate(features: &Matrix, weights: &Matrix) -> Result<Matrix> {
    if weights.cols() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "weights have {} columns, features have {} rows",
            weights.cols(),
            features.rows()
        )));
    }
    let mut out = Matrix::zeros(weights.rows(), features.cols());
    for i in 0..weights.rows() {
        let wrow = weights.row(i);
        let sum: f64 = wrow.iter().map(|&w| w as f64).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "weights row {i} sums to {sum}, expected 1"
            )));
        }
        let one_hot = wrow
            .iter()
            .enumerate()
            .find(|&(_, &w)| w != 0.0)
            .filter(|&(j, &w)| w == 1.0 && wrow[j + 1..].iter().all(|&x| x == 0.0))
            .map(|(j, _)| j);
        if let Some(src) = one_hot {
            out.row_mut(i).copy_from_slice(features.row(src));
            continue;
        }
        for d in 0..features.cols() {
            let mut acc = 0.0f64;
            for (j, &w) in wrow.iter().enumerate() {
                if w != 0.0 {
                    acc += w as f64 * features.get(j, d) as f64;
                }
            }
            out.set(i, d, acc as f32);
        }
    }
    Ok(out)
}

/// Runs the full stage: salience, region-capped benchmark selection, role
/// assignment, weight construction, and aggregation.
pub fn run_stage1(dump: &TokenDump, cfg: &PruneConfig) -> Result<PruneResult> {
    dump.validate()?;
    let grid = (dump.grid_h, dump.grid_w);
    let salience = compute_salience(&dump.cls_attn, &dump.keys)?;
    let kept_indices = select_benchmarks(&salience, grid, cfg)?;
    let roles = assign_roles(&kept_indices, &dump.keys, cfg.pillar_quantile)?;
    let built = build_weights(&dump.sim_features, grid, &kept_indices, &roles, cfg.dist_frac)?;
    let aggregated = aggregate(&dump.features, &built.matrix)?;
    Ok(PruneResult {
        kept_indices,
        aggregated,
        roles,
        weights: built.matrix,
        zero_norm_sim_rows: built.zero_norm_sim_rows,
    })
}

/// Stage-1 tensors reloaded from disk (roles live in the JSON sidecar the
/// CLI writes, not in the container).
#[derive(Debug, Clone)]
pub struct StoredStage1 {
    pub kept_indices: Vec<usize>,
    pub aggregated: Matrix,
    pub weights: Matrix,
}

pub fn write_result(result: &PruneResult, path: &Path) -> Result<()> {
    let kept: Vec<f32> = result.kept_indices.iter().map(|&i| i as f32).collect();
    write_records(
        path,
        &[
            TensorRecord::vector("kept_indices", kept),
            TensorRecord::matrix("aggregated", &result.aggregated),
            TensorRecord::matrix("weights", &result.weights),
        ],
    )
}

pub fn read_result(path: &Path) -> Result<StoredStage1> {
    let records = read_records(path)?;
    let mut kept_indices = None;
    let mut aggregated = None;
    let mut weights = None;
    for rec in records {
        match rec.name.as_str() {
            "kept_indices" => {
                kept_indices = Some(rec.data.iter().map(|&v| v as usize).collect::<Vec<_>>())
            }
            "aggregated" => aggregated = Some(rec.to_matrix()?),
            "weights" => weights = Some(rec.to_matrix()?),
            other => {
                return Err(Error::InvalidHeader(format!(
                    "unexpected tensor {other:?} in stage-1 result"
                )))
            }
        }
    }
    let missing = |name: &str| Error::InvalidHeader(format!("missing tensor {name:?}"));
    Ok(StoredStage1 {
        kept_indices: kept_indices.ok_or_else(|| missing("kept_indices"))?,
        aggregated: aggregated.ok_or_else(|| missing("aggregated"))?,
        weights: weights.ok_or_else(|| missing("weights"))?,
    })
}
