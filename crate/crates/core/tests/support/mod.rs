//! Shared test support: a seeded random dump generator and a naive
//! loop-based reference implementation of the full stage-1 pipeline. The
//! reference shares no kernels with the library; every reduction is an
//! explicit loop in f64 so it can serve as an independent oracle.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use nuwa_core::dump::TokenDump;
use nuwa_core::matrix::Matrix;
use nuwa_core::stage1::PruneConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data: Vec<f32> = (0..rows * cols)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_dump(
    rng: &mut ChaCha8Rng,
    grid_h: usize,
    grid_w: usize,
    d_enc: usize,
    d_k: usize,
    d_s: usize,
) -> TokenDump {
    let n = grid_h * grid_w;
    TokenDump {
        grid_h,
        grid_w,
        features: random_matrix(rng, n, d_enc),
        keys: random_matrix(rng, n, d_k),
        cls_attn: (0..n).map(|_| rng.random_range(0.0f32..1.0)).collect(),
        sim_features: random_matrix(rng, n, d_s),
        text_embeddings: None,
        projection: None,
        attn_matrix: None,
    }
}

pub struct NaiveStage1 {
    pub kept: Vec<usize>,
    pub pillars: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub aggregated: Vec<Vec<f64>>,
}

fn naive_norm(row: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &x in row {
        acc += x as f64 * x as f64;
    }
    acc.sqrt()
}

fn naive_cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (naive_norm(a), naive_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += *x as f64 * *y as f64;
    }
    dot / (na * nb)
}

/// Reference stage-1: region-capped top-n candidates, global top-k, a
/// linearly interpolated key-norm quantile for pillar roles, similarity
/// times linear distance decay for collector rows, and loop aggregation.
pub fn naive_stage1(dump: &TokenDump, cfg: &PruneConfig) -> NaiveStage1 {
    let (gh, gw) = (dump.grid_h, dump.grid_w);
    let n = gh * gw;
    let g = cfg.region_size;

    let salience: Vec<f64> = (0..n)
        .map(|i| dump.cls_attn[i] as f64 * naive_norm(dump.keys.row(i)))
        .collect();

    // Candidate pool with a per-region cap.
    let mut pool: Vec<usize> = Vec::new();
    let mut r0 = 0;
    while r0 < gh {
        let r1 = (r0 + g).min(gh);
        let mut c0 = 0;
        while c0 < gw {
            let c1 = (c0 + g).min(gw);
            let mut members: Vec<usize> = Vec::new();
            for r in r0..r1 {
                for c in c0..c1 {
                    members.push(r * gw + c);
                }
            }
            members.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
            members.truncate(cfg.per_region);
            pool.extend(members);
            c0 = c1;
        }
        r0 = r1;
    }
    pool.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
    pool.truncate(cfg.keep);
    pool.sort_unstable();
    let kept = pool;

    // Pillar roles by linear-interpolation quantile over benchmark key norms.
    let norms: Vec<f64> = kept.iter().map(|&i| naive_norm(dump.keys.row(i))).collect();
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let tau = if sorted.len() == 1 {
        sorted[0]
    } else {
        let h = (sorted.len() - 1) as f64 * cfg.pillar_quantile;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let pillars: Vec<usize> = kept
        .iter()
        .zip(&norms)
        .filter(|&(_, &nm)| nm >= tau)
        .map(|(&i, _)| i)
        .collect();

    // Collector rows: relu(cosine) * max(0, 1 - d^2/d_thresh), self forced
    // to 1, then row normalization.
    let d_thresh =
        cfg.dist_frac * (((gh - 1) * (gh - 1) + (gw - 1) * (gw - 1)) as f64);
    let mut weights = vec![vec![0.0f64; n]; kept.len()];
    for (row, &b) in kept.iter().enumerate() {
        if pillars.contains(&b) {
            weights[row][b] = 1.0;
            continue;
        }
        let (br, bc) = ((b / gw) as f64, (b % gw) as f64);
        for j in 0..n {
            let (jr, jc) = ((j / gw) as f64, (j % gw) as f64);
            let d2 = (br - jr) * (br - jr) + (bc - jc) * (bc - jc);
            let prox = if d2 == 0.0 {
                1.0
            } else if d2 >= d_thresh {
                0.0
            } else {
                1.0 - d2 / d_thresh
            };
            let sim = naive_cosine(dump.sim_features.row(b), dump.sim_features.row(j)).max(0.0);
            weights[row][j] = sim * prox;
        }
        weights[row][b] = 1.0;
        let sum: f64 = weights[row].iter().sum();
        for w in &mut weights[row] {
            *w /= sum;
        }
    }

    let d = dump.features.cols();
    let mut aggregated = vec![vec![0.0f64; d]; kept.len()];
    for (row, wrow) in weights.iter().enumerate() {
        for col in 0..d {
            let mut acc = 0.0f64;
            for (j, &w) in wrow.iter().enumerate() {
                acc += w * dump.features.get(j, col) as f64;
            }
            aggregated[row][col] = acc;
        }
    }

    NaiveStage1 {
        kept,
        pillars,
        weights,
        aggregated,
    }
}
