//! Analysis metrics over token dumps: visual attention entropy (VAE) and
//! object-centric cohesion (OCC).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cosine, l2_norm, topk_indices, Matrix};

/// Ground-truth object tokens for OCC, as read from a JSON spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// Token indices belonging to the object.
    pub tokens: Vec<usize>,
    /// Explicit center token; when absent the member closest to the
    /// set's grid centroid is used (ties toward the lowest index).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeResult {
    /// Mean Shannon entropy (bits) over rows with causal mass.
    pub entropy: f64,
    /// Rows whose causal prefix was all zero, excluded from the mean.
    pub skipped_rows: usize,
}

/// Average Shannon entropy of the causal attention rows: row `i` is
/// renormalized over columns `j < i` and its entropy (base 2, with
/// `0 log 0 = 0`) enters the mean. Rows with no causal mass are skipped
/// and counted.
pub fn vae(attn: &Matrix) -> Result<VaeResult> {
    let n = attn.rows();
    if attn.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "attention matrix is {}x{}, expected square",
            n,
            attn.cols()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "attention matrix needs at least 2 tokens".into(),
        ));
    }
    if attn.data().iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "attention entries must be >= 0".into(),
        ));
    }
    let mut total = 0.0f64;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for i in 1..n {
        let prefix = &attn.row(i)[..i];
        let mass: f64 = prefix.iter().map(|&v| v as f64).sum();
        if mass == 0.0 {
            skipped += 1;
            continue;
        }
        let mut h = 0.0f64;
        for &v in prefix {
            if v > 0.0 {
                let p = v as f64 / mass;
                h -= p * p.log2();
            }
        }
        total += h;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::InvalidArgument(
            "every row has zero causal mass".into(),
        ));
    }
    Ok(VaeResult {
        entropy: total / counted as f64,
        skipped_rows: skipped,
    })
}

fn default_center(tokens: &[usize], grid_w: usize) -> usize {
    let m = tokens.len() as f64;
    let (mut cr, mut cc) = (0.0f64, 0.0f64);
    for &t in tokens {
        cr += (t / grid_w) as f64;
        cc += (t % grid_w) as f64;
    }
    cr /= m;
    cc /= m;
    let mut best = tokens[0];
    let mut best_d = f64::INFINITY;
    for &t in tokens {
        let dr = (t / grid_w) as f64 - cr;
        let dc = (t % grid_w) as f64 - cc;
        let d = dr * dr + dc * dc;
        if d < best_d || (d == best_d && t < best) {
            best = t;
            best_d = d;
        }
    }
    best
}

/// Intersection-over-union between the object's token set and the `k`
/// tokens most cosine-similar to its center token. `k` defaults to the
/// object size so a perfect score is reachable.
pub fn occ(
    sim_features: &Matrix,
    grid: (usize, usize),
    object: &ObjectSpec,
    k: Option<usize>,
) -> Result<f64> {
    let (grid_h, grid_w) = grid;
    let n = grid_h * grid_w;
    if sim_features.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "sim_features has {} rows, grid implies {n}",
            sim_features.rows()
        )));
    }
    if object.tokens.is_empty() {
        return Err(Error::InvalidArgument("object token set is empty".into()));
    }
    if object.tokens.iter().any(|&t| t >= n) {
        return Err(Error::InvalidArgument(format!(
            "object token out of range for {n} tokens"
        )));
    }
    let center = match object.center_index {
        Some(c) if c < n => c,
        Some(c) => {
            return Err(Error::InvalidArgument(format!(
                "center index {c} out of range for {n} tokens"
            )))
        }
        None => default_center(&object.tokens, grid_w),
    };
    if l2_norm(sim_features.row(center)) == 0.0 {
        return Err(Error::InvalidArgument("zero-norm center feature".into()));
    }
    let k = k.unwrap_or(object.tokens.len());
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {n} tokens"
        )));
    }
    let center_row = sim_features.row(center);
    let sims: Vec<f64> = (0..n).map(|j| cosine(center_row, sim_features.row(j))).collect();
    let model_set = topk_indices(&sims, k)?;

    let truth: std::collections::BTreeSet<usize> = object.tokens.iter().copied().collect();
    let model: std::collections::BTreeSet<usize> = model_set.into_iter().collect();
    let intersection = model.intersection(&truth).count();
    let union = model.union(&truth).count();
    Ok(intersection as f64 / union as f64)
}

/// IoU of two explicit index sets; the set arithmetic behind `occ`, usable
/// for comparing arbitrary kept sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let sa: std::collections::BTreeSet<usize> = a.iter().copied().collect();
    let sb: std::collections::BTreeSet<usize> = b.iter().copied().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_causal(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 1..n {
            for j in 0..i {
                m.set(i, j, 1.0 / i as f32);
            }
        }
        m
    }

    #[test]
    fn vae_uniform_three_tokens() {
        let out = vae(&uniform_causal(3)).unwrap();
        assert!((out.entropy - 0.5).abs() < 1e-12);
        assert_eq!(out.skipped_rows, 0);
    }

    #[test]
    fn vae_one_hot_rows_have_zero_entropy() {
        let mut m = Matrix::zeros(4, 4);
        for i in 1..4 {
            m.set(i, i - 1, 1.0);
        }
        let out = vae(&m).unwrap();
        assert_eq!(out.entropy, 0.0);
    }

    #[test]
    fn vae_two_tokens_is_always_zero() {
        let m = Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.7, 0.3]).unwrap();
        let out = vae(&m).unwrap();
        assert_eq!(out.entropy, 0.0);
    }

    #[test]
    fn vae_skips_zero_mass_rows() {
        let mut m = uniform_causal(4);
        for j in 0..2 {
            m.set(2, j, 0.0);
        }
        let out = vae(&m).unwrap();
        assert_eq!(out.skipped_rows, 1);
        // Remaining rows: H(v2) = 0, H(v4) = log2(3).
        let expect = (0.0 + 3.0f64.log2()) / 2.0;
        assert!((out.entropy - expect).abs() < 1e-12);
    }

    #[test]
    fn vae_rejects_single_token() {
        assert!(vae(&Matrix::zeros(1, 1)).is_err());
    }

    fn one_hot_features(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[test]
    fn occ_set_arithmetic() {
        // Tokens 1, 2, 3 share a feature direction, everything else is
        // orthogonal, so the model set for center 2 is exactly {1, 2, 3}.
        let mut m = one_hot_features(6);
        for t in [2usize, 3] {
            for c in 0..6 {
                m.set(t, c, 0.0);
            }
            m.set(t, 1, 1.0);
        }
        let object = ObjectSpec {
            tokens: vec![2, 3, 4],
            center_index: Some(2),
        };
        // IoU({1,2,3}, {2,3,4}) = 2/4.
        let got = occ(&m, (1, 6), &object, None).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn occ_identical_sets_score_one() {
        let m = one_hot_features(4);
        let object = ObjectSpec {
            tokens: vec![1],
            center_index: None,
        };
        assert_eq!(occ(&m, (2, 2), &object, None).unwrap(), 1.0);
    }

    #[test]
    fn occ_disjoint_sets_score_zero() {
        let mut m = one_hot_features(4);
        // Make tokens 2 and 3 identical, and use center 2 with truth {0, 1}:
        // model top-2 = {2, 3}, disjoint from truth.
        for c in 0..4 {
            m.set(3, c, 0.0);
        }
        m.set(3, 2, 1.0);
        let object = ObjectSpec {
            tokens: vec![0, 1],
            center_index: Some(2),
        };
        assert_eq!(occ(&m, (2, 2), &object, None).unwrap(), 0.0);
    }

    #[test]
    fn occ_rejects_zero_center() {
        let m = Matrix::zeros(4, 2);
        let object = ObjectSpec {
            tokens: vec![0, 1],
            center_index: None,
        };
        assert!(occ(&m, (2, 2), &object, None).is_err());
    }

    #[test]
    fn default_center_is_closest_to_centroid() {
        // Tokens at (0,0), (0,2), (1,1) on a 2x3 grid: centroid (1/3, 1),
        // closest member is (1,1) = index 4.
        assert_eq!(default_center(&[0, 2, 4], 3), 4);
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(jaccard(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(jaccard(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(jaccard(&[1], &[2]), 0.0);
    }
}
