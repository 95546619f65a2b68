//! Stage-2 text-modulated refinement: pool a query vector from the text
//! embeddings, score the surviving visual tokens by cosine relevance, and
//! keep the top `keep_final` in original spatial order.

use crate::error::{Error, Result};
use crate::matrix::{cosine, l2_norm, topk_indices, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Config {
    pub keep_final: usize,
    /// LLM layer at which pruning applies; only schedule accounting uses it.
    pub switch_layer: usize,
}

/// Half the reference model's 32 layers; the unique switch point under
/// which the stock two-stage budgets hit their advertised averages.
pub const DEFAULT_SWITCH_LAYER: usize = 16;

impl Stage2Config {
    pub fn new(keep_final: usize) -> Self {
        Stage2Config {
            keep_final,
            switch_layer: DEFAULT_SWITCH_LAYER,
        }
    }
}

/// Arithmetic mean of the text-token embeddings.
pub fn pool_query(text_embeddings: &Matrix) -> Result<Vec<f32>> {
    if text_embeddings.rows() == 0 {
        return Err(Error::InvalidArgument("empty text embedding matrix".into()));
    }
    let rows = text_embeddings.rows() as f64;
    let mut mean = vec![0.0f64; text_embeddings.cols()];
    for i in 0..text_embeddings.rows() {
        for (acc, &v) in mean.iter_mut().zip(text_embeddings.row(i)) {
            *acc += v as f64;
        }
    }
    Ok(mean.into_iter().map(|v| (v / rows) as f32).collect())
}

/// Cosine relevance of each (optionally projected) visual feature row to
/// the pooled query. Without a projection the feature and query dimensions
/// must already agree.
pub fn relevance_scores(
    vision_features: &Matrix,
    projection: Option<&Matrix>,
    query: &[f32],
) -> Result<Vec<f64>> {
    if l2_norm(query) == 0.0 {
        return Err(Error::InvalidArgument("zero-norm query".into()));
    }
    let projected;
    let feats = match projection {
        Some(p) => {
            if p.rows() != vision_features.cols() || p.cols() != query.len() {
                return Err(Error::ShapeMismatch(format!(
                    "projection {}x{} does not map features of width {} to query of width {}",
                    p.rows(),
                    p.cols(),
                    vision_features.cols(),
                    query.len()
                )));
            }
            projected = vision_features.matmul(p)?;
            &projected
        }
        None => {
            if vision_features.cols() != query.len() {
                return Err(Error::ShapeMismatch(format!(
                    "features of width {} need a projection to match query of width {}",
                    vision_features.cols(),
                    query.len()
                )));
            }
            vision_features
        }
    };
    Ok((0..feats.rows())
        .map(|i| cosine(feats.row(i), query))
        .collect())
}

/// Keeps the `keep_final` highest-scoring kept indices, returned ascending
/// so downstream position remapping sees spatial order.
pub fn select_final(
    kept_indices: &[usize],
    scores: &[f64],
    cfg: &Stage2Config,
) -> Result<Vec<usize>> {
    if kept_indices.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} kept indices but {} scores",
            kept_indices.len(),
            scores.len()
        )));
    }
    if cfg.keep_final == 0 || cfg.keep_final > kept_indices.len() {
        return Err(Error::InvalidConfig(format!(
            "keep_final {} out of range for {} tokens",
            cfg.keep_final,
            kept_indices.len()
        )));
    }
    let top = topk_indices(scores, cfg.keep_final)?;
    let mut selected: Vec<usize> = top.into_iter().map(|p| kept_indices[p]).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Composes pooling, scoring, and selection over a stage-1 result.
pub fn run_stage2(
    aggregated: &Matrix,
    kept_indices: &[usize],
    text_embeddings: &Matrix,
    projection: Option<&Matrix>,
    cfg: &Stage2Config,
) -> Result<Vec<usize>> {
    let query = pool_query(text_embeddings)?;
    let scores = relevance_scores(aggregated, projection, &query)?;
    select_final(kept_indices, &scores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_single_row_is_identity() {
        let m = Matrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(pool_query(&m).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn pool_two_rows_hits_midpoint() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(pool_query(&m).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn pool_matches_loop_mean() {
        let data: Vec<f32> = (0..15).map(|i| (i as f32) * 0.37 - 2.0).collect();
        let m = Matrix::from_vec(5, 3, data.clone()).unwrap();
        let got = pool_query(&m).unwrap();
        for d in 0..3 {
            let mut acc = 0.0f64;
            for r in 0..5 {
                acc += data[r * 3 + d] as f64;
            }
            assert!((got[d] as f64 - acc / 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pool_rejects_empty() {
        assert!(pool_query(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn relevance_orthogonal_case() {
        let feats = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = relevance_scores(&feats, None, &[1.0, 0.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(r[1].abs() < 1e-12);
    }

    #[test]
    fn relevance_is_scale_invariant() {
        let feats = Matrix::from_vec(1, 2, vec![7.0, 21.0]).unwrap();
        let r = relevance_scores(&feats, None, &[1.0, 3.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relevance_matches_loop_cosine() {
        let feats = Matrix::from_vec(
            4,
            3,
            vec![0.3, -1.0, 2.0, 1.5, 0.5, -0.25, -2.0, 1.0, 0.75, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let proj = Matrix::from_vec(3, 2, vec![1.0, 0.5, -0.5, 1.0, 0.25, -1.0]).unwrap();
        let query = [0.8f32, -0.6];
        let got = relevance_scores(&feats, Some(&proj), &query).unwrap();
        for i in 0..4 {
            let mut p = [0.0f64; 2];
            for c in 0..2 {
                for k in 0..3 {
                    p[c] += feats.get(i, k) as f64 * proj.get(k, c) as f64;
                }
            }
            let qn = (query[0] as f64 * query[0] as f64 + query[1] as f64 * query[1] as f64).sqrt();
            let pn = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let expect = (p[0] * query[0] as f64 + p[1] * query[1] as f64) / (pn * qn);
            assert!((got[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn relevance_rejects_zero_query() {
        let feats = Matrix::zeros(1, 2);
        assert!(relevance_scores(&feats, None, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn relevance_rejects_missing_projection() {
        let feats = Matrix::zeros(1, 3);
        assert!(relevance_scores(&feats, None, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn select_reorders_by_original_index() {
        let cfg = Stage2Config::new(2);
        let out = select_final(&[10, 20, 30], &[0.9, 0.1, 0.5], &cfg).unwrap();
        assert_eq!(out, vec![10, 30]);
    }

    #[test]
    fn select_keep_everything_is_identity() {
        let cfg = Stage2Config::new(3);
        let out = select_final(&[4, 7, 9], &[0.1, 0.2, 0.3], &cfg).unwrap();
        assert_eq!(out, vec![4, 7, 9]);
    }

    #[test]
    fn select_all_equal_scores_keeps_first() {
        let cfg = Stage2Config::new(2);
        let out = select_final(&[4, 7, 9], &[0.5, 0.5, 0.5], &cfg).unwrap();
        assert_eq!(out, vec![4, 7]);
    }

    #[test]
    fn select_rejects_out_of_range_keep() {
        let cfg = Stage2Config::new(4);
        assert!(select_final(&[1, 2, 3], &[0.1, 0.2, 0.3], &cfg).is_err());
    }
}
