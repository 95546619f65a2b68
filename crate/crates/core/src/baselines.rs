//! Reference baselines: seeded random pruning and aspect-ratio-preserving
//! adaptive average pooling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Keeps `keep` distinct token indices chosen uniformly at random, sorted
/// ascending. The generator is ChaCha8 keyed with `seed_from_u64`, drawn
/// through a partial Fisher-Yates shuffle; identical seeds give identical
/// output on every platform this crate builds for.
pub fn random_prune(n_tokens: usize, keep: usize, seed: u64) -> Result<Vec<usize>> {
    if keep == 0 || keep > n_tokens {
        return Err(Error::InvalidArgument(format!(
            "keep {keep} out of range for {n_tokens} tokens"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n_tokens).collect();
    for i in 0..keep {
        let j = rng.random_range(i..n_tokens);
        pool.swap(i, j);
    }
    pool.truncate(keep);
    pool.sort_unstable();
    Ok(pool)
}

/// One output cell's input window; row/col ends are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolWindow {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl PoolWindow {
    pub fn area(&self) -> usize {
        (self.row_end - self.row_start) * (self.col_end - self.col_start)
    }
}

/// Output grid and per-cell windows for adaptive average pooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolPlan {
    pub h_in: usize,
    pub w_in: usize,
    pub h_out: usize,
    pub w_out: usize,
    /// Windows in output row-major order, length `h_out * w_out`.
    pub windows: Vec<PoolWindow>,
}

impl PoolPlan {
    pub fn output_tokens(&self) -> usize {
        self.h_out * self.w_out
    }
}

fn round_half_away(x: f64) -> usize {
    x.round() as usize
}

/// Plans an adaptive pooling of the grid down to roughly `ratio` of its
/// tokens, preserving the aspect ratio. The target is
/// `floor(N * ratio)`; the output extents come from rounding against the
/// aspect ratio, so the actual token count can differ by the rounding slack
/// and is always reported via the plan, never assumed.
pub fn plan_pool(grid: (usize, usize), ratio: f64) -> Result<PoolPlan> {
    let (h_in, w_in) = grid;
    if h_in == 0 || w_in == 0 {
        return Err(Error::InvalidArgument("grid extents must be >= 1".into()));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio must be in (0, 1], got {ratio}"
        )));
    }
    let k_target = ((h_in * w_in) as f64 * ratio).floor() as usize;
    if k_target == 0 {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} yields zero output tokens"
        )));
    }
    let aspect = h_in as f64 / w_in as f64;
    let w_out = round_half_away((k_target as f64 / aspect).sqrt());
    let h_out = round_half_away(aspect * w_out as f64);
    if h_out == 0 || w_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid {h_in}x{w_in} at ratio {ratio} collapses to an empty output grid"
        )));
    }
    let mut windows = Vec::with_capacity(h_out * w_out);
    for i in 0..h_out {
        let row_start = i * h_in / h_out;
        let row_end = ((i + 1) * h_in).div_ceil(h_out);
        for j in 0..w_out {
            let col_start = j * w_in / w_out;
            let col_end = ((j + 1) * w_in).div_ceil(w_out);
            windows.push(PoolWindow {
                row_start,
                row_end,
                col_start,
                col_end,
            });
        }
    }
    Ok(PoolPlan {
        h_in,
        w_in,
        h_out,
        w_out,
        windows,
    })
}

/// Averages each window's feature rows into one output row.
pub fn apply_pool(features: &Matrix, plan: &PoolPlan) -> Result<Matrix> {
    if features.rows() != plan.h_in * plan.w_in {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows, plan covers {}x{}",
            features.rows(),
            plan.h_in,
            plan.w_in
        )));
    }
    let d = features.cols();
    let mut out = Matrix::zeros(plan.output_tokens(), d);
    for (cell, win) in plan.windows.iter().enumerate() {
        let area = win.area() as f64;
        let mut acc = vec![0.0f64; d];
        for r in win.row_start..win.row_end {
            for c in win.col_start..win.col_end {
                let row = features.row(r * plan.w_in + c);
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
        }
        for (dst, a) in out.row_mut(cell).iter_mut().zip(acc) {
            *dst = (a / area) as f32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_keep_everything_is_all_indices() {
        let out = random_prune(6, 6, 44).unwrap();
        assert_eq!(out, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let a = random_prune(576, 64, 44).unwrap();
        let b = random_prune(576, 64, 44).unwrap();
        assert_eq!(a, b);
        let c = random_prune(576, 64, 45).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_single_keep_stays_in_range() {
        let out = random_prune(576, 1, 44).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0] < 576);
    }

    #[test]
    fn random_rejects_keep_above_n() {
        assert!(random_prune(4, 5, 0).is_err());
    }

    #[test]
    fn plan_square_grid_to_64_tokens() {
        let plan = plan_pool((24, 24), 64.0 / 576.0).unwrap();
        assert_eq!((plan.h_out, plan.w_out), (8, 8));
        assert_eq!(plan.output_tokens(), 64);
    }

    #[test]
    fn plan_ratio_one_is_identity_on_square_grids() {
        let plan = plan_pool((5, 5), 1.0).unwrap();
        assert_eq!((plan.h_out, plan.w_out), (5, 5));
        for (cell, win) in plan.windows.iter().enumerate() {
            assert_eq!(win.area(), 1, "cell {cell} window {win:?}");
        }
    }

    #[test]
    fn plan_rectangular_grid_follows_aspect_ratio() {
        // 12x24 at ratio 0.125: target 36, aspect 0.5, so an 4x8 = 32 grid.
        let plan = plan_pool((12, 24), 0.125).unwrap();
        assert_eq!((plan.h_out, plan.w_out), (4, 8));
        assert_eq!(plan.output_tokens(), 32);
    }

    #[test]
    fn plan_rejects_zero_target() {
        assert!(plan_pool((2, 2), 0.1).is_err());
    }

    #[test]
    fn apply_identity_plan_returns_input() {
        let features = Matrix::from_vec(4, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let plan = plan_pool((2, 2), 1.0).unwrap();
        let out = apply_pool(&features, &plan).unwrap();
        assert_eq!(out, features);
    }

    #[test]
    fn apply_global_pool_is_the_mean() {
        let features = Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let plan = plan_pool((2, 2), 0.25).unwrap();
        let out = apply_pool(&features, &plan).unwrap();
        assert_eq!(out.data(), &[3.0]);
    }

    #[test]
    fn apply_matches_window_mean_oracle() {
        let data: Vec<f32> = (0..16 * 3).map(|i| ((i * 7919) % 23) as f32 - 11.0).collect();
        let features = Matrix::from_vec(16, 3, data).unwrap();
        let plan = plan_pool((4, 4), 0.25).unwrap();
        let out = apply_pool(&features, &plan).unwrap();
        for (cell, win) in plan.windows.iter().enumerate() {
            for d in 0..3 {
                let mut acc = 0.0f64;
                for r in win.row_start..win.row_end {
                    for c in win.col_start..win.col_end {
                        acc += features.get(r * 4 + c, d) as f64;
                    }
                }
                let expect = acc / win.area() as f64;
                assert!((out.get(cell, d) as f64 - expect).abs() < 1e-6);
            }
        }
    }
}
