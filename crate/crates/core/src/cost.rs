//! Transformer FLOPs accounting over per-layer pruning schedules, plus the
//! itemized metric overheads of the pruning decision logic itself.
//!
//! One MAC counts as two FLOPs. A layer over `s` tokens costs
//! `8sH^2 + 4s^2H` for attention and `4sHI` for the FFN; totals sum the
//! per-layer cost across the schedule. All arithmetic is exact integer
//! math; TFLOPs/MFLOPs formatting happens only at display time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub layers: usize,
    pub hidden: u64,
    pub ffn_inner: u64,
}

impl ModelDims {
    pub fn new(layers: usize, hidden: u64, ffn_inner: u64) -> Result<Self> {
        if layers == 0 || hidden == 0 || ffn_inner == 0 {
            return Err(Error::InvalidConfig(
                "model dims must all be positive".into(),
            ));
        }
        Ok(ModelDims {
            layers,
            hidden,
            ffn_inner,
        })
    }
}

/// 7B-class decoder defaults: 32 layers, hidden 4096, FFN inner 11008.
impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            layers: 32,
            hidden: 4096,
            ffn_inner: 11008,
        }
    }
}

/// Encoder hidden dimension used by the stock similarity-metric presets
/// (ViT-L class).
pub const ENCODER_DIM: u64 = 1024;
/// Visual token count of the stock 24x24 grid.
pub const FULL_TOKENS: u64 = 576;

/// Per-layer visual-token counts; non-increasing by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruningSchedule {
    per_layer: Vec<u64>,
}

impl PruningSchedule {
    pub fn new(per_layer: Vec<u64>) -> Result<Self> {
        if per_layer.is_empty() {
            return Err(Error::InvalidConfig("schedule must not be empty".into()));
        }
        if per_layer.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(
                "schedule must be non-increasing".into(),
            ));
        }
        Ok(PruningSchedule { per_layer })
    }

    pub fn constant(tokens: u64, layers: usize) -> Result<Self> {
        PruningSchedule::new(vec![tokens; layers])
    }

    /// Two-stage schedule: `stage1_tokens` before `switch_layer`,
    /// `stage2_tokens` from it onward. The average token count follows as
    /// `(s1 * switch + s2 * (layers - switch)) / layers`.
    pub fn two_stage(
        stage1_tokens: u64,
        stage2_tokens: u64,
        switch_layer: usize,
        layers: usize,
    ) -> Result<Self> {
        if stage2_tokens > stage1_tokens {
            return Err(Error::InvalidConfig(format!(
                "stage-2 tokens {stage2_tokens} exceed stage-1 tokens {stage1_tokens}"
            )));
        }
        if switch_layer > layers {
            return Err(Error::InvalidConfig(format!(
                "switch layer {switch_layer} exceeds layer count {layers}"
            )));
        }
        let mut per_layer = vec![stage1_tokens; switch_layer];
        per_layer.resize(layers, stage2_tokens);
        PruningSchedule::new(per_layer)
    }

    pub fn per_layer(&self) -> &[u64] {
        &self.per_layer
    }

    pub fn layers(&self) -> usize {
        self.per_layer.len()
    }

    pub fn token_sum(&self) -> u128 {
        self.per_layer.iter().map(|&s| s as u128).sum()
    }

    pub fn average_tokens(&self) -> f64 {
        self.token_sum() as f64 / self.layers() as f64
    }
}

/// FLOPs of one transformer layer over `s` tokens.
pub fn flops_layer(tokens: u64, dims: &ModelDims) -> u128 {
    let s = tokens as u128;
    let h = dims.hidden as u128;
    let i = dims.ffn_inner as u128;
    8 * s * h * h + 4 * s * s * h + 4 * s * h * i
}

/// Sum of per-layer FLOPs across the schedule.
pub fn total_flops(schedule: &PruningSchedule, dims: &ModelDims) -> Result<u128> {
    if schedule.layers() != dims.layers {
        return Err(Error::ShapeMismatch(format!(
            "schedule covers {} layers, model has {}",
            schedule.layers(),
            dims.layers
        )));
    }
    Ok(schedule
        .per_layer()
        .iter()
        .map(|&s| flops_layer(s, dims))
        .sum())
}

/// One pruning-metric cost term. The hidden dimension is explicit on every
/// term so encoder-side and LLM-side contributions can mix in one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverheadTerm {
    /// Dot products of `queries` query vectors against `tokens` key
    /// vectors: `2 * S_q * S_v * H`.
    AttnScore { queries: u64, tokens: u64, dim: u64 },
    /// Pairwise cosine similarity among `tokens` vectors: `S_v^2 * H`.
    Cosine { tokens: u64, dim: u64 },
    /// L2 norms of `tokens` vectors: `2 * S_v * H`.
    Norm { tokens: u64, dim: u64 },
}

impl OverheadTerm {
    pub fn flops(&self) -> u128 {
        match *self {
            OverheadTerm::AttnScore {
                queries,
                tokens,
                dim,
            } => 2 * queries as u128 * tokens as u128 * dim as u128,
            OverheadTerm::Cosine { tokens, dim } => {
                tokens as u128 * tokens as u128 * dim as u128
            }
            OverheadTerm::Norm { tokens, dim } => 2 * tokens as u128 * dim as u128,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            OverheadTerm::AttnScore {
                queries,
                tokens,
                dim,
            } => format!("attn_score({queries},{tokens},{dim})"),
            OverheadTerm::Cosine { tokens, dim } => format!("cosine({tokens},{dim})"),
            OverheadTerm::Norm { tokens, dim } => format!("norm({tokens},{dim})"),
        }
    }
}

/// Main-pipeline FLOPs plus itemized metric overheads for one method
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub main_flops: u128,
    pub overhead_terms: Vec<(String, u128)>,
    pub avg_tokens: f64,
}

impl CostReport {
    pub fn overhead_total(&self) -> u128 {
        self.overhead_terms.iter().map(|(_, f)| f).sum()
    }
}

pub fn report(
    schedule: &PruningSchedule,
    dims: &ModelDims,
    overheads: &[OverheadTerm],
) -> Result<CostReport> {
    Ok(CostReport {
        main_flops: total_flops(schedule, dims)?,
        overhead_terms: overheads.iter().map(|t| (t.label(), t.flops())).collect(),
        avg_tokens: schedule.average_tokens(),
    })
}

/// A named method configuration: an optional main schedule and the metric
/// overhead terms. Metric-only presets (no published schedule) carry no
/// schedule.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub schedule: Option<PruningSchedule>,
    pub overheads: Vec<OverheadTerm>,
}

fn cls_scan() -> OverheadTerm {
    OverheadTerm::AttnScore {
        queries: 1,
        tokens: FULL_TOKENS,
        dim: ModelDims::default().hidden,
    }
}

/// Stock presets for the 7B reference configuration. `vanilla` and the
/// two-stage variants carry main schedules; `fastv`, `sparsevlm`, and
/// `visionzip` are metric-only.
pub fn preset(name: &str) -> Option<Preset> {
    let dims = ModelDims::default();
    let two_stage = |s1, s2| {
        PruningSchedule::two_stage(s1, s2, dims.layers / 2, dims.layers).expect("valid preset")
    };
    let nuwa_overheads = |s1| {
        vec![
            cls_scan(),
            OverheadTerm::Cosine {
                tokens: s1,
                dim: ENCODER_DIM,
            },
        ]
    };
    let preset = match name {
        "vanilla" => Preset {
            name: "vanilla",
            schedule: Some(
                PruningSchedule::constant(FULL_TOKENS, dims.layers).expect("valid preset"),
            ),
            overheads: vec![],
        },
        "nuwa64" => Preset {
            name: "nuwa64",
            schedule: Some(two_stage(112, 16)),
            overheads: nuwa_overheads(112),
        },
        "nuwa128" => Preset {
            name: "nuwa128",
            schedule: Some(two_stage(224, 32)),
            overheads: nuwa_overheads(224),
        },
        "nuwa192" => Preset {
            name: "nuwa192",
            schedule: Some(two_stage(336, 48)),
            overheads: nuwa_overheads(336),
        },
        "fastv" => Preset {
            name: "fastv",
            schedule: None,
            overheads: vec![cls_scan()],
        },
        "sparsevlm" => Preset {
            name: "sparsevlm",
            schedule: None,
            overheads: vec![
                cls_scan(),
                OverheadTerm::AttnScore {
                    queries: 1,
                    tokens: 66,
                    dim: dims.hidden,
                },
                OverheadTerm::AttnScore {
                    queries: 1,
                    tokens: 30,
                    dim: dims.hidden,
                },
            ],
        },
        "visionzip" => Preset {
            name: "visionzip",
            schedule: None,
            overheads: vec![
                cls_scan(),
                OverheadTerm::Cosine {
                    tokens: 64,
                    dim: ENCODER_DIM,
                },
            ],
        },
        _ => return None,
    };
    Some(preset)
}

pub const PRESET_NAMES: &[&str] = &[
    "vanilla",
    "nuwa64",
    "nuwa128",
    "nuwa192",
    "fastv",
    "sparsevlm",
    "visionzip",
];

/// Formats raw FLOPs as TFLOPs with 4 decimal places.
pub fn format_tflops(flops: u128) -> String {
    format!("{:.4}", flops as f64 / 1e12)
}

/// Formats raw FLOPs as MFLOPs with 4 decimal places.
pub fn format_mflops(flops: u128) -> String {
    format!("{:.4}", flops as f64 / 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_flops_for_reference_dims() {
        let dims = ModelDims::default();
        assert_eq!(flops_layer(576, &dims), 186_629_750_784);
        assert_eq!(flops_layer(112, &dims), 35_437_674_496);
        assert_eq!(flops_layer(16, &dims), 5_037_359_104);
        assert_eq!(flops_layer(0, &dims), 0);
    }

    #[test]
    fn vanilla_total_flops() {
        let dims = ModelDims::default();
        let schedule = PruningSchedule::constant(576, 32).unwrap();
        let total = total_flops(&schedule, &dims).unwrap();
        assert_eq!(total, 5_972_152_025_088);
        assert_eq!(format_tflops(total), "5.9722");
    }

    #[test]
    fn two_stage_total_flops() {
        let dims = ModelDims::default();
        let schedule = PruningSchedule::two_stage(112, 16, 16, 32).unwrap();
        let total = total_flops(&schedule, &dims).unwrap();
        assert_eq!(total, 647_600_537_600);
        assert_eq!(format_tflops(total), "0.6476");
    }

    #[test]
    fn zero_schedule_costs_nothing() {
        let dims = ModelDims::default();
        let schedule = PruningSchedule::constant(0, 32).unwrap();
        assert_eq!(total_flops(&schedule, &dims).unwrap(), 0);
    }

    #[test]
    fn overhead_terms_match_published_metrics() {
        let attn = OverheadTerm::AttnScore {
            queries: 1,
            tokens: 576,
            dim: 4096,
        };
        assert_eq!(attn.flops(), 4_718_592);

        let sparsevlm: u128 = [576u64, 66, 30]
            .iter()
            .map(|&t| {
                OverheadTerm::AttnScore {
                    queries: 1,
                    tokens: t,
                    dim: 4096,
                }
                .flops()
            })
            .sum();
        assert_eq!(sparsevlm, 5_505_024);
        assert_eq!(format_mflops(sparsevlm), "5.5050");

        let nuwa = attn.flops()
            + OverheadTerm::Cosine {
                tokens: 112,
                dim: 1024,
            }
            .flops();
        assert_eq!(nuwa, 17_563_648);
        assert_eq!(format_mflops(nuwa), "17.5636");
    }

    #[test]
    fn two_stage_schedule_averages() {
        let s = PruningSchedule::two_stage(112, 16, 16, 32).unwrap();
        assert_eq!(s.average_tokens(), 64.0);
        let s = PruningSchedule::two_stage(224, 32, 16, 32).unwrap();
        assert_eq!(s.average_tokens(), 128.0);
        let s = PruningSchedule::two_stage(7, 7, 5, 10).unwrap();
        assert_eq!(s.average_tokens(), 7.0);
    }

    #[test]
    fn two_stage_rejects_growing_budget() {
        assert!(PruningSchedule::two_stage(16, 112, 16, 32).is_err());
    }

    #[test]
    fn schedule_rejects_increase() {
        assert!(PruningSchedule::new(vec![5, 6]).is_err());
    }

    #[test]
    fn presets_expose_published_configurations() {
        let p = preset("nuwa64").unwrap();
        assert_eq!(p.schedule.as_ref().unwrap().average_tokens(), 64.0);
        assert_eq!(p.overheads.len(), 2);
        assert!(preset("unknown").is_none());
    }
}
