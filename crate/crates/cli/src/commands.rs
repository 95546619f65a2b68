use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;

use nuwa_core::baselines::{apply_pool, plan_pool, random_prune};
use nuwa_core::cost::{
    format_mflops, format_tflops, preset, total_flops, ModelDims, OverheadTerm, PruningSchedule,
};
use nuwa_core::diagnostics::{jaccard, occ, vae, ObjectSpec};
use nuwa_core::dump::{read_dump, read_records, write_records, TensorRecord, TokenDump};
use nuwa_core::error::{Error, Result};
use nuwa_core::pos_embed::{remap_perc, remap_pesp, remap_rpme, PositionRange};
use nuwa_core::stage1::{self, run_stage1, PruneConfig};
use nuwa_core::stage2::{run_stage2, Stage2Config};

use crate::manifest::RunManifest;
use crate::{CompareArgs, FlopsArgs, Format, PoolArgs, RandomArgs, RemapArgs, Stage1Args, Stage2Args, Strategy};

/// Relative output paths honor the NUWA_OUT_DIR default output directory.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("NUWA_OUT_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- inspect

pub fn inspect(input: &Path, format: Format) -> Result<()> {
    let records = read_records(input)?;
    let dump = read_dump(input).ok();
    match format {
        Format::Human => {
            println!("{}: {} records", input.display(), records.len());
            for r in &records {
                let shape = r
                    .shape
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join("x");
                println!("  {:<16} [{}] {} values", r.name, shape, r.data.len());
            }
            match &dump {
                Some(d) => println!(
                    "valid token dump: {}x{} grid, {} tokens",
                    d.grid_h,
                    d.grid_w,
                    d.n_tokens()
                ),
                None => println!("not a token dump (generic container)"),
            }
        }
        Format::Json => {
            let line = json!({
                "path": input.display().to_string(),
                "records": records
                    .iter()
                    .map(|r| json!({"name": r.name, "shape": r.shape}))
                    .collect::<Vec<_>>(),
                "token_dump": dump.map(|d| json!({
                    "grid_h": d.grid_h,
                    "grid_w": d.grid_w,
                    "tokens": d.n_tokens(),
                })),
            });
            println!("{line}");
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- stage1

/// Smallest per-region candidate count whose pool can fill `keep`.
fn minimal_per_region(grid: (usize, usize), region: usize, keep: usize) -> Result<usize> {
    let (gh, gw) = grid;
    let areas: Vec<usize> = (0..gh.div_ceil(region))
        .flat_map(|ri| {
            (0..gw.div_ceil(region)).map(move |ci| {
                let rh = region.min(gh - ri * region);
                let cw = region.min(gw - ci * region);
                rh * cw
            })
        })
        .collect();
    let max_area = *areas.iter().max().expect("at least one region");
    for n in 1..=max_area {
        let pool: usize = areas.iter().map(|&a| a.min(n)).sum();
        if pool >= keep {
            return Ok(n);
        }
    }
    Err(Error::CandidatePoolTooSmall {
        need: keep,
        have: areas.iter().sum(),
    })
}

fn stage1_one(input: &Path, out: &Path, args: &Stage1Args) -> Result<String> {
    let dump = read_dump(input)?;
    let grid = (dump.grid_h, dump.grid_w);
    let per_region = match args.per_region {
        Some(n) => n,
        None => minimal_per_region(grid, args.region, args.keep)?,
    };
    let cfg = PruneConfig {
        region_size: args.region,
        per_region,
        keep: args.keep,
        dist_frac: args.dist_frac,
        pillar_quantile: args.pillar_quantile,
    };
    let result = run_stage1(&dump, &cfg)?;
    stage1::write_result(&result, out)?;
    stage1::read_result(out)?; // outputs must validate before we report success

    let config_echo = json!({
        "region_size": cfg.region_size,
        "per_region": cfg.per_region,
        "keep": cfg.keep,
        "dist_frac": cfg.dist_frac,
        "pillar_quantile": cfg.pillar_quantile,
    });
    let sidecar_path = {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".json");
        out.with_file_name(name)
    };
    let sidecar = json!({
        "pillars": result.roles.pillars,
        "collectors": result.roles.collectors,
        "config": config_echo,
    });
    let body = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::InvalidArgument(format!("sidecar serialization: {e}")))?;
    std::fs::write(&sidecar_path, body + "\n").map_err(|e| Error::io(&sidecar_path, e))?;

    let mut manifest = RunManifest::new("stage1", config_echo);
    manifest.input(input);
    manifest.output(out)?;
    manifest.output(&sidecar_path)?;
    manifest.warn("zero_norm_sim_rows", result.zero_norm_sim_rows as u64);
    manifest.write_alongside(out)?;

    let summary = match args.format {
        Format::Human => format!(
            "{} -> {}  kept {} (pillars {}, collectors {})",
            input.display(),
            out.display(),
            result.kept_indices.len(),
            result.roles.pillars.len(),
            result.roles.collectors.len()
        ),
        Format::Json => json!({
            "input": input.display().to_string(),
            "output": out.display().to_string(),
            "kept": result.kept_indices.len(),
            "pillars": result.roles.pillars.len(),
            "collectors": result.roles.collectors.len(),
            "zero_norm_sim_rows": result.zero_norm_sim_rows,
        })
        .to_string(),
    };
    Ok(summary)
}

fn batch_out_path(input: &Path, out_dir: &Option<PathBuf>, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    let name = format!("{stem}{suffix}");
    match out_dir {
        Some(dir) => resolve_out(dir).join(name),
        None => match std::env::var_os("NUWA_OUT_DIR") {
            Some(dir) => Path::new(&dir).join(name),
            None => input.with_file_name(name),
        },
    }
}

pub fn stage1(args: &Stage1Args) -> Result<()> {
    if args.inputs.len() == 1 {
        let input = &args.inputs[0];
        let out = match &args.out {
            Some(o) => resolve_out(o),
            None => batch_out_path(input, &args.out_dir, ".s1.tkd"),
        };
        let summary = stage1_one(input, &out, args)?;
        println!("{summary}");
        return Ok(());
    }
    if args.out.is_some() {
        return Err(Error::InvalidArgument(
            "use --out-dir instead of --out with multiple inputs".into(),
        ));
    }
    let outs: Vec<PathBuf> = args
        .inputs
        .iter()
        .map(|i| batch_out_path(i, &args.out_dir, ".s1.tkd"))
        .collect();
    let jobs = args.jobs.max(1).min(args.inputs.len());
    let next = AtomicUsize::new(0);
    let summaries: Mutex<Vec<Option<Result<String>>>> =
        Mutex::new(args.inputs.iter().map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= args.inputs.len() {
                    break;
                }
                let result = stage1_one(&args.inputs[i], &outs[i], args);
                summaries.lock().unwrap()[i] = Some(result);
            });
        }
    });
    let mut first_err = None;
    for entry in summaries.into_inner().unwrap() {
        match entry.expect("all inputs processed") {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error: {e}");
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

// ----------------------------------------------------------------- stage2

pub fn stage2(args: &Stage2Args) -> Result<()> {
    let stored = stage1::read_result(&args.stage1)?;
    let dump = read_dump(&args.dump)?;
    let text = dump.text_embeddings.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "dump {} carries no text_embeddings",
            args.dump.display()
        ))
    })?;
    let cfg = Stage2Config {
        keep_final: args.keep_final,
        switch_layer: args.switch_layer,
    };
    let selected = run_stage2(
        &stored.aggregated,
        &stored.kept_indices,
        text,
        dump.projection.as_ref(),
        &cfg,
    )?;

    let out = resolve_out(&args.out);
    let record = TensorRecord::vector(
        "final_indices",
        selected.iter().map(|&i| i as f32).collect(),
    );
    write_records(&out, &[record])?;
    read_records(&out)?;

    let config_echo = json!({
        "keep_final": cfg.keep_final,
        "switch_layer": cfg.switch_layer,
    });
    let mut manifest = RunManifest::new("stage2", config_echo);
    manifest.input(&args.stage1);
    manifest.input(&args.dump);
    manifest.output(&out)?;
    manifest.write_alongside(&out)?;

    match args.format {
        Format::Human => println!(
            "{} + {} -> {}  kept {} of {}",
            args.stage1.display(),
            args.dump.display(),
            out.display(),
            selected.len(),
            stored.kept_indices.len()
        ),
        Format::Json => println!(
            "{}",
            json!({
                "stage1": args.stage1.display().to_string(),
                "dump": args.dump.display().to_string(),
                "output": out.display().to_string(),
                "final_indices": selected,
            })
        ),
    }
    Ok(())
}

// ------------------------------------------------------------------ remap

fn parse_range(spec: &str) -> Result<PositionRange> {
    let (s, e) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("range {spec:?} is not start:end")))?;
    let start: u64 = s
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad range start {s:?}")))?;
    let end: u64 = e
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad range end {e:?}")))?;
    PositionRange::new(start, end)
}

pub fn remap(args: &RemapArgs) -> Result<()> {
    let range = parse_range(&args.range)?;
    let text = read_to_string(&args.input)?;
    let indices: Vec<usize> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad index {tok:?}")))
        })
        .collect::<Result<_>>()?;
    let (positions, duplicates) = match args.strategy {
        Strategy::Rpme => {
            let out = remap_rpme(&indices, range)?;
            (out.positions, out.duplicate_positions)
        }
        Strategy::Perc => (remap_perc(&indices, range)?, 0),
        Strategy::Pesp => (remap_pesp(&indices, range)?, 0),
    };
    let rendered = match args.format {
        Format::Human => positions
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        Format::Json => json!({
            "strategy": format!("{:?}", args.strategy).to_lowercase(),
            "positions": positions,
            "duplicate_positions": duplicates,
        })
        .to_string(),
    };
    match &args.out {
        Some(out) => {
            let out = resolve_out(out);
            std::fs::write(&out, rendered + "\n").map_err(|e| Error::io(&out, e))?;
            let mut manifest = RunManifest::new(
                "remap",
                json!({
                    "strategy": format!("{:?}", args.strategy).to_lowercase(),
                    "range": args.range,
                }),
            );
            manifest.input(&args.input);
            manifest.output(&out)?;
            manifest.warn("duplicate_positions", duplicates as u64);
            manifest.write_alongside(&out)?;
        }
        None => println!("{rendered}"),
    }
    Ok(())
}

// ------------------------------------------------------------------- pool

pub fn pool(args: &PoolArgs) -> Result<()> {
    let dump = read_dump(&args.input)?;
    let plan = plan_pool((dump.grid_h, dump.grid_w), args.ratio)?;
    let pooled = apply_pool(&dump.features, &plan)?;

    let out = resolve_out(&args.out);
    write_records(
        &out,
        &[
            TensorRecord::vector("grid", vec![plan.h_out as f32, plan.w_out as f32]),
            TensorRecord::matrix("pooled", &pooled),
        ],
    )?;
    read_records(&out)?;

    let config_echo = json!({
        "ratio": args.ratio,
        "h_out": plan.h_out,
        "w_out": plan.w_out,
    });
    let mut manifest = RunManifest::new("pool", config_echo);
    manifest.input(&args.input);
    manifest.output(&out)?;
    manifest.write_alongside(&out)?;

    match args.format {
        Format::Human => println!(
            "{}x{} -> {}x{} ({} tokens) -> {}",
            plan.h_in,
            plan.w_in,
            plan.h_out,
            plan.w_out,
            plan.output_tokens(),
            out.display()
        ),
        Format::Json => println!(
            "{}",
            json!({
                "input": args.input.display().to_string(),
                "output": out.display().to_string(),
                "h_out": plan.h_out,
                "w_out": plan.w_out,
                "tokens": plan.output_tokens(),
            })
        ),
    }
    Ok(())
}

// ----------------------------------------------------------------- random

pub fn random(args: &RandomArgs) -> Result<()> {
    let dump = read_dump(&args.input)?;
    let kept = random_prune(dump.n_tokens(), args.keep, args.seed)?;

    let out = resolve_out(&args.out);
    let record = TensorRecord::vector("kept_indices", kept.iter().map(|&i| i as f32).collect());
    write_records(&out, &[record])?;
    read_records(&out)?;

    let mut manifest = RunManifest::new(
        "random",
        json!({"keep": args.keep, "seed": args.seed}),
    );
    manifest.input(&args.input);
    manifest.output(&out)?;
    manifest.write_alongside(&out)?;

    match args.format {
        Format::Human => println!(
            "kept {} of {} (seed {}) -> {}",
            kept.len(),
            dump.n_tokens(),
            args.seed,
            out.display()
        ),
        Format::Json => println!(
            "{}",
            json!({
                "input": args.input.display().to_string(),
                "output": out.display().to_string(),
                "kept_indices": kept,
                "seed": args.seed,
            })
        ),
    }
    Ok(())
}

// ------------------------------------------------------------------ flops

fn parse_dims(spec: &str) -> Result<ModelDims> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "dims {spec:?} are not layers:hidden:ffn_inner"
        )));
    }
    let parse = |s: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dimension {s:?}")))
    };
    ModelDims::new(parse(parts[0])? as usize, parse(parts[1])?, parse(parts[2])?)
}

fn parse_schedule(spec: &str) -> Result<PruningSchedule> {
    let mut per_layer = Vec::new();
    for segment in spec.split(',') {
        let (tokens, layers) = segment.split_once('x').ok_or_else(|| {
            Error::InvalidArgument(format!("segment {segment:?} is not tokensxlayers"))
        })?;
        let tokens: u64 = tokens
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad token count {tokens:?}")))?;
        let layers: usize = layers
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad layer count {layers:?}")))?;
        per_layer.extend(std::iter::repeat(tokens).take(layers));
    }
    PruningSchedule::new(per_layer)
}

fn parse_overhead(spec: &str) -> Result<OverheadTerm> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad overhead operand {s:?}")))
    };
    match parts.as_slice() {
        ["attn", q, v, d] => Ok(OverheadTerm::AttnScore {
            queries: num(q)?,
            tokens: num(v)?,
            dim: num(d)?,
        }),
        ["cosine", v, d] => Ok(OverheadTerm::Cosine {
            tokens: num(v)?,
            dim: num(d)?,
        }),
        ["norm", v, d] => Ok(OverheadTerm::Norm {
            tokens: num(v)?,
            dim: num(d)?,
        }),
        _ => Err(Error::InvalidArgument(format!(
            "overhead {spec:?} is not attn:Q:V:D, cosine:V:D, or norm:V:D"
        ))),
    }
}

pub fn flops(args: &FlopsArgs) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    if args.preset.is_some() && args.schedule.is_some() {
        return Err(Error::InvalidArgument(
            "--preset and --schedule are mutually exclusive".into(),
        ));
    }
    let (schedule, mut overheads) = match (&args.preset, &args.schedule) {
        (Some(name), _) => {
            let p = preset(name).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown preset {name:?}"))
            })?;
            (p.schedule, p.overheads)
        }
        (None, Some(spec)) => (Some(parse_schedule(spec)?), Vec::new()),
        (None, None) => (None, Vec::new()),
    };
    for spec in &args.overheads {
        overheads.push(parse_overhead(spec)?);
    }
    if schedule.is_none() && overheads.is_empty() {
        return Err(Error::InvalidArgument(
            "nothing to report: give --schedule, --preset, or --overhead".into(),
        ));
    }

    let main = schedule
        .as_ref()
        .map(|s| total_flops(s, &dims))
        .transpose()?;
    let metric: u128 = overheads.iter().map(|t| t.flops()).sum();

    match args.format {
        Format::Human => {
            if let (Some(main), Some(schedule)) = (main, schedule.as_ref()) {
                println!("main   {} TFLOPs  ({} FLOPs)", format_tflops(main), main);
                println!("avg_tokens {}", schedule.average_tokens());
            }
            println!("metric {} MFLOPs  ({} FLOPs)", format_mflops(metric), metric);
            for term in &overheads {
                println!(
                    "  {:<24} {} MFLOPs",
                    term.label(),
                    format_mflops(term.flops())
                );
            }
        }
        Format::Json => {
            let line = json!({
                "dims": {
                    "layers": dims.layers,
                    "hidden": dims.hidden,
                    "ffn_inner": dims.ffn_inner,
                },
                "main_flops": main.map(|m| m as u64),
                "main_tflops": main.map(format_tflops),
                "avg_tokens": schedule.as_ref().map(|s| s.average_tokens()),
                "metric_flops": metric as u64,
                "metric_mflops": format_mflops(metric),
                "terms": overheads
                    .iter()
                    .map(|t| json!({"label": t.label(), "flops": t.flops() as u64}))
                    .collect::<Vec<_>>(),
            });
            println!("{line}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- metrics

pub fn metrics_vae(inputs: &[PathBuf], format: Format) -> Result<()> {
    for input in inputs {
        let dump = read_dump(input)?;
        let attn = dump.attn_matrix.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("dump {} carries no attn_matrix", input.display()))
        })?;
        let result = vae(attn)?;
        match format {
            Format::Human => {
                if inputs.len() == 1 {
                    println!("{:.4}", result.entropy);
                } else {
                    println!("{} {:.4}", input.display(), result.entropy);
                }
                if result.skipped_rows > 0 {
                    eprintln!(
                        "warning: {} rows with zero causal mass skipped",
                        result.skipped_rows
                    );
                }
            }
            Format::Json => println!(
                "{}",
                json!({
                    "path": input.display().to_string(),
                    "vae": result.entropy,
                    "skipped_rows": result.skipped_rows,
                })
            ),
        }
    }
    Ok(())
}

pub fn metrics_occ(
    input: &Path,
    object_path: &Path,
    k: Option<usize>,
    format: Format,
) -> Result<()> {
    let dump = read_dump(input)?;
    let spec: ObjectSpec = serde_json::from_str(&read_to_string(object_path)?)
        .map_err(|e| Error::InvalidArgument(format!("object spec: {e}")))?;
    let value = occ(&dump.sim_features, (dump.grid_h, dump.grid_w), &spec, k)?;
    match format {
        Format::Human => println!("{value:.4}"),
        Format::Json => println!(
            "{}",
            json!({
                "path": input.display().to_string(),
                "occ": value,
                "k": k.unwrap_or(spec.tokens.len()),
            })
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompareStrategy {
    Nuwa,
    Pooling,
    Random,
}

impl CompareStrategy {
    fn label(self) -> &'static str {
        match self {
            CompareStrategy::Nuwa => "nuwa",
            CompareStrategy::Pooling => "pooling",
            CompareStrategy::Random => "random",
        }
    }
}

fn parse_strategies(spec: &str) -> Result<Vec<CompareStrategy>> {
    let mut out = Vec::new();
    for name in spec.split(',') {
        let s = match name.trim() {
            "nuwa" => CompareStrategy::Nuwa,
            "pool" | "pooling" => CompareStrategy::Pooling,
            "random" => CompareStrategy::Random,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown strategy {other:?}"
                )))
            }
        };
        out.push(s);
    }
    if out.len() < 2 {
        return Err(Error::InvalidArgument(
            "compare needs at least 2 strategies".into(),
        ));
    }
    Ok(out)
}

struct CompareRow {
    label: &'static str,
    kept: Vec<usize>,
    main_flops: u128,
    metric_flops: u128,
}

/// The stock two-stage budget split: stage 1 keeps 7/4 of the average
/// budget, stage 2 a quarter, switching halfway through the layers.
fn nuwa_budgets(keep: usize) -> Result<(usize, usize)> {
    if keep % 4 != 0 {
        return Err(Error::InvalidConfig(format!(
            "nuwa strategy needs --keep divisible by 4, got {keep}"
        )));
    }
    Ok((keep * 7 / 4, keep / 4))
}

fn compare_row(
    strategy: CompareStrategy,
    dump: &TokenDump,
    args: &CompareArgs,
    dims: &ModelDims,
) -> Result<CompareRow> {
    let n = dump.n_tokens();
    match strategy {
        CompareStrategy::Nuwa => {
            let (s1, s2) = nuwa_budgets(args.keep)?;
            let per_region = minimal_per_region((dump.grid_h, dump.grid_w), args.region, s1)?;
            let cfg = PruneConfig {
                region_size: args.region,
                per_region,
                keep: s1,
                dist_frac: nuwa_core::stage1::DEFAULT_DIST_FRAC,
                pillar_quantile: nuwa_core::stage1::DEFAULT_PILLAR_QUANTILE,
            };
            let result = run_stage1(dump, &cfg)?;
            let schedule =
                PruningSchedule::two_stage(s1 as u64, s2 as u64, dims.layers / 2, dims.layers)?;
            let metric = OverheadTerm::AttnScore {
                queries: 1,
                tokens: n as u64,
                dim: dims.hidden,
            }
            .flops()
                + OverheadTerm::Cosine {
                    tokens: s1 as u64,
                    dim: dump.sim_features.cols() as u64,
                }
                .flops();
            Ok(CompareRow {
                label: strategy.label(),
                kept: result.kept_indices,
                main_flops: total_flops(&schedule, dims)?,
                metric_flops: metric,
            })
        }
        CompareStrategy::Pooling => {
            let ratio = args.keep as f64 / n as f64;
            let plan = plan_pool((dump.grid_h, dump.grid_w), ratio)?;
            // Each output cell is represented by its window's center token.
            let kept: Vec<usize> = plan
                .windows
                .iter()
                .map(|w| {
                    let r = (w.row_start + w.row_end - 1) / 2;
                    let c = (w.col_start + w.col_end - 1) / 2;
                    r * plan.w_in + c
                })
                .collect();
            let schedule =
                PruningSchedule::constant(plan.output_tokens() as u64, dims.layers)?;
            Ok(CompareRow {
                label: strategy.label(),
                kept,
                main_flops: total_flops(&schedule, dims)?,
                metric_flops: 0,
            })
        }
        CompareStrategy::Random => {
            let kept = random_prune(n, args.keep, args.seed)?;
            let schedule = PruningSchedule::constant(args.keep as u64, dims.layers)?;
            Ok(CompareRow {
                label: strategy.label(),
                kept,
                main_flops: total_flops(&schedule, dims)?,
                metric_flops: 0,
            })
        }
    }
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let strategies = parse_strategies(&args.strategies)?;
    let dims = parse_dims(&args.dims)?;
    let dump = read_dump(&args.input)?;
    let rows: Vec<CompareRow> = strategies
        .iter()
        .map(|&s| compare_row(s, &dump, args, &dims))
        .collect::<Result<_>>()?;

    match args.format {
        Format::Human => {
            let mut header = format!(
                "{:<9} {:>6} {:>13} {:>15}",
                "strategy", "kept", "main(TFLOPs)", "metric(MFLOPs)"
            );
            for row in &rows {
                header.push_str(&format!(" {:>10}", format!("j:{}", row.label)));
            }
            println!("{header}");
            for row in &rows {
                let mut line = format!(
                    "{:<9} {:>6} {:>13} {:>15}",
                    row.label,
                    row.kept.len(),
                    format_tflops(row.main_flops),
                    format_mflops(row.metric_flops)
                );
                for other in &rows {
                    line.push_str(&format!(
                        " {:>10.4}",
                        jaccard(&row.kept, &other.kept)
                    ));
                }
                println!("{line}");
            }
        }
        Format::Json => {
            for row in &rows {
                let overlaps: serde_json::Map<String, serde_json::Value> = rows
                    .iter()
                    .map(|other| {
                        (
                            other.label.to_string(),
                            json!(jaccard(&row.kept, &other.kept)),
                        )
                    })
                    .collect();
                println!(
                    "{}",
                    json!({
                        "strategy": row.label,
                        "kept": row.kept.len(),
                        "main_flops": row.main_flops as u64,
                        "main_tflops": format_tflops(row.main_flops),
                        "metric_flops": row.metric_flops as u64,
                        "metric_mflops": format_mflops(row.metric_flops),
                        "jaccard": overlaps,
                    })
                );
            }
        }
    }
    Ok(())
}
