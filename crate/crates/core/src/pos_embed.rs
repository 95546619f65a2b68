//! Position-id remapping strategies for pruned token sequences.
//!
//! Three strategies over the original visual position range `[s, e]`:
//! sparse preservation keeps each survivor's absolute position, range
//! compression packs survivors into a contiguous block at the start, and
//! relative mapping stretches the survivors' relative offsets back over the
//! full range so the last token lands on `e` exactly.

use crate::error::{Error, Result};

/// Start and end position ids of the full visual range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositionRange {
    pub start: u64,
    pub end: u64,
}

impl PositionRange {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidArgument(format!(
                "position range end {end} must exceed start {start}"
            )));
        }
        Ok(PositionRange { start, end })
    }

    pub fn span(&self) -> u64 {
        self.end - self.start
    }
}

fn check_ascending(indices: &[usize]) -> Result<()> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "indices must be strictly ascending".into(),
        ));
    }
    Ok(())
}

fn check_in_range(indices: &[usize], range: PositionRange) -> Result<()> {
    if let Some(&last) = indices.last() {
        if last as u64 > range.span() {
            return Err(Error::InvalidArgument(format!(
                "index {last} exceeds range span {}",
                range.span()
            )));
        }
    }
    Ok(())
}

/// Sparse preservation: survivor at index `i` keeps position `s + i`.
pub fn remap_pesp(indices: &[usize], range: PositionRange) -> Result<Vec<u64>> {
    check_ascending(indices)?;
    check_in_range(indices, range)?;
    Ok(indices.iter().map(|&i| range.start + i as u64).collect())
}

/// Range compression: the j-th survivor gets position `s + j`.
pub fn remap_perc(indices: &[usize], range: PositionRange) -> Result<Vec<u64>> {
    check_ascending(indices)?;
    check_in_range(indices, range)?;
    Ok((0..indices.len()).map(|j| range.start + j as u64).collect())
}

/// Relative-mapping output: positions plus the number of adjacent
/// duplicates produced (possible when the range span is smaller than the
/// largest index; duplicates are kept, not collapsed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RpmeRemap {
    pub positions: Vec<u64>,
    pub duplicate_positions: usize,
}

/// Relative position mapping extension: anchors the first survivor to `s`
/// and scales the rest by `(e - s) / max_index`, rounding up, so the last
/// survivor lands exactly on `e`. A single-token input stays anchored at
/// `s`.
pub fn remap_rpme(indices: &[usize], range: PositionRange) -> Result<RpmeRemap> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("indices must be nonempty".into()));
    }
    check_ascending(indices)?;
    let mut positions = vec![range.start];
    if indices.len() > 1 {
        let max_index = *indices.last().expect("nonempty") as u128;
        let span = range.span() as u128;
        for &i in &indices[1..] {
            let scaled = (i as u128 * span).div_ceil(max_index);
            positions.push(scaled as u64 + range.start);
        }
    }
    let duplicate_positions = positions.windows(2).filter(|w| w[0] == w[1]).count();
    Ok(RpmeRemap {
        positions,
        duplicate_positions,
    })
}
