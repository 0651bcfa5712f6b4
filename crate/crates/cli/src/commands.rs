//! One function per subcommand. Each resolves its inputs (flags over
//! config over defaults), does the work through the library, writes
//! artifacts, and returns the process exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::json;

use vistile_core::eval::{
    aggregate, load_eval_set, load_results, run_eval, HttpClient, InferenceClient, ReplayClient,
};
use vistile_core::manifest::{
    bundled_mixture, bundled_schedule, compose_mixture, load_mixture, load_schedule,
    validate_schedule, MixtureTable, StageKind, StageSchedule, STAGES,
};
use vistile_core::raster::{self, ImageBuffer};
use vistile_core::tiling::{plan_dynamic, plan_msac, Plan, TilingConfig};
use vistile_core::vision::{forward_trace, ModelConfig, VisionModel};

use crate::args::{
    EvalArgs, ForwardArgs, MixtureArgs, ModelArgs, PlanArgs, PreprocessArgs, ReportArgs,
    ScheduleArgs, TilingArgs,
};
use crate::failure::Failure;
use crate::output::{emit_json, write_atomic};
use crate::settings::{pick, require, Settings};

struct ResolvedTiling {
    config: TilingConfig,
    msac: bool,
}

fn resolve_tiling(args: &TilingArgs, s: &mut Settings) -> Result<ResolvedTiling, Failure> {
    let defaults = TilingConfig::default();
    let no_thumbnail = args.no_thumbnail || s.take_bool("no-thumbnail")?.unwrap_or(false);
    let config = TilingConfig {
        min_tiles: pick(args.min_tiles, s.take("min-tiles")?, defaults.min_tiles),
        max_tiles: pick(args.max_tiles, s.take("max-tiles")?, defaults.max_tiles),
        tile_size: pick(args.tile_size, s.take("tile-size")?, defaults.tile_size),
        use_thumbnail: !no_thumbnail,
    };
    let msac = args.msac || s.take_bool("msac")?.unwrap_or(false);
    Ok(ResolvedTiling { config, msac })
}

fn resolve_model(args: &ModelArgs, s: &mut Settings) -> Result<ModelConfig, Failure> {
    let d = ModelConfig::default();
    Ok(ModelConfig {
        patch_size: pick(args.patch_size, s.take("patch-size")?, d.patch_size),
        vit_dim: pick(args.vit_dim, s.take("vit-dim")?, d.vit_dim),
        vit_layers: pick(args.vit_layers, s.take("vit-layers")?, d.vit_layers),
        vit_heads: pick(args.vit_heads, s.take("vit-heads")?, d.vit_heads),
        llm_dim: pick(args.llm_dim, s.take("llm-dim")?, d.llm_dim),
        shuffle_block: pick(args.shuffle_block, s.take("shuffle-block")?, d.shuffle_block),
        seed: pick(args.seed, s.take("seed")?, d.seed),
    })
}

fn make_plan(width: u32, height: u32, tiling: &ResolvedTiling) -> Result<Plan, Failure> {
    let plan = if tiling.msac {
        Plan::Msac(plan_msac(width, height, &tiling.config)?)
    } else {
        Plan::Dynamic(plan_dynamic(width, height, &tiling.config)?)
    };
    Ok(plan)
}

fn to_value<T: serde::Serialize>(value: &T) -> Result<serde_json::Value, Failure> {
    serde_json::to_value(value).map_err(|e| Failure::run(format!("cannot serialize artifact: {e}")))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn plan_cmd(args: PlanArgs, mut s: Settings) -> Result<i32, Failure> {
    let tiling = resolve_tiling(&args.tiling, &mut s)?;
    let width = require(args.width, s.take("width")?, "width")?;
    let height = require(args.height, s.take("height")?, "height")?;
    let out: Option<PathBuf> = args.out.or(s.take("out")?);
    s.finish()?;

    let plan = make_plan(width, height, &tiling)?;
    let artifact = json!({
        "schema_version": 1,
        "source": {"width": width, "height": height},
        "view_count": plan.view_count(),
        "token_budget": plan.token_budget(),
        "plan": to_value(&plan)?,
    });
    emit_json(&artifact, out.as_deref())?;
    Ok(0)
}

/// Encodes views to PNG bytes with up to `jobs` worker threads. Output
/// order is the view order regardless of scheduling.
fn encode_views(views: &[ImageBuffer], jobs: usize) -> Result<Vec<Vec<u8>>, Failure> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Vec<u8>>>> = views.iter().map(|_| Mutex::new(None)).collect();
    let failed: Mutex<Option<vistile_core::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(views.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= views.len() || failed.lock().unwrap().is_some() {
                    break;
                }
                match raster::encode_png(&views[i]) {
                    Ok(bytes) => *slots[i].lock().unwrap() = Some(bytes),
                    Err(e) => {
                        failed.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failed.into_inner().unwrap() {
        return Err(e.into());
    }
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every view encoded"))
        .collect())
}

pub fn preprocess_cmd(args: PreprocessArgs, mut s: Settings) -> Result<i32, Failure> {
    let tiling = resolve_tiling(&args.tiling, &mut s)?;
    let image: PathBuf = require(args.image, s.take("image")?, "image")?;
    let out_dir: PathBuf = require(args.out_dir, s.take("out-dir")?, "out-dir")?;
    let jobs = pick(args.jobs, s.take("jobs")?, 1).max(1);
    s.finish()?;

    let img = raster::load_image(&image)?;
    let plan = make_plan(img.width(), img.height(), &tiling)?;
    let views = plan.extract_views(&img)?;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::run(format!("cannot create {}: {e}", out_dir.display())))?;
    let encoded = encode_views(&views, jobs)?;
    let mut names = Vec::new();
    for (i, bytes) in encoded.iter().enumerate() {
        let name = format!("view_{i:02}.png");
        write_atomic(&out_dir.join(&name), bytes)?;
        names.push(name);
    }

    let artifact = json!({
        "schema_version": 1,
        "source": {"file": file_name(&image), "width": img.width(), "height": img.height()},
        "view_count": plan.view_count(),
        "token_budget": plan.token_budget(),
        "plan": to_value(&plan)?,
        "views": names,
    });
    emit_json(&artifact, Some(&out_dir.join("plan.json")))?;
    Ok(0)
}

pub fn forward_cmd(args: ForwardArgs, mut s: Settings) -> Result<i32, Failure> {
    let tiling = resolve_tiling(&args.tiling, &mut s)?;
    let model_cfg = resolve_model(&args.model, &mut s)?;
    let image: PathBuf = require(args.image, s.take("image")?, "image")?;
    let prompt = pick(
        args.prompt,
        s.take("prompt")?,
        "Extract all fields as JSON.".to_string(),
    );
    let out: Option<PathBuf> = args.out.or(s.take("out")?);
    s.finish()?;

    let img = raster::load_image(&image)?;
    let plan = make_plan(img.width(), img.height(), &tiling)?;
    let model = VisionModel::new(model_cfg)?;
    let trace = forward_trace(&model, &img, &plan, &prompt)?;

    let artifact = json!({
        "schema_version": 1,
        "source": {"file": file_name(&image), "width": img.width(), "height": img.height()},
        "model": to_value(model.config())?,
        "prompt": prompt,
        "trace": to_value(&trace)?,
    });
    emit_json(&artifact, out.as_deref())?;
    Ok(0)
}

/// Bundled stage names resolve to the built-in tables; anything with a path
/// separator, or not a known stage name, is read from disk.
fn resolve_table(arg: &str) -> Result<MixtureTable, Failure> {
    let stem = arg.strip_suffix(".csv").unwrap_or(arg);
    if !arg.contains(std::path::MAIN_SEPARATOR) && STAGES.contains(&stem) {
        let table = bundled_mixture(stem).expect("stage name checked against STAGES")?;
        return Ok(table);
    }
    Ok(load_mixture(Path::new(arg))?)
}

pub fn mixture_cmd(args: MixtureArgs, mut s: Settings) -> Result<i32, Failure> {
    let table_arg = require(args.table, s.take("table")?, "table")?;
    let scale = pick(args.scale, s.take("scale")?, 1.0);
    let seed = pick(args.seed, s.take("seed")?, 0);
    let out: Option<PathBuf> = args.out.or(s.take("out")?);
    s.finish()?;

    let table = resolve_table(&table_arg)?;
    let manifest = compose_mixture(&table, scale, seed)?;
    match out {
        Some(path) => {
            let parent = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| {
                Failure::run(format!("cannot create temp file in {}: {e}", parent.display()))
            })?;
            let mut writer = std::io::BufWriter::new(tmp.as_file());
            manifest
                .write_jsonl(&mut writer)
                .and_then(|()| writer.flush())
                .map_err(|e| Failure::run(format!("cannot write {}: {e}", path.display())))?;
            drop(writer);
            tmp.persist(&path).map_err(|e| {
                Failure::run(format!("cannot finalize {}: {}", path.display(), e.error))
            })?;
        }
        None => {
            let stdout = std::io::stdout().lock();
            let mut writer = std::io::BufWriter::new(stdout);
            manifest
                .write_jsonl(&mut writer)
                .and_then(|()| writer.flush())
                .map_err(|e| Failure::run(format!("cannot write stdout: {e}")))?;
        }
    }
    Ok(0)
}

fn resolve_schedule(arg: &str) -> Result<StageSchedule, Failure> {
    if !arg.contains(std::path::MAIN_SEPARATOR) && STAGES.contains(&arg) {
        let sched = bundled_schedule(arg).expect("stage name checked against STAGES")?;
        return Ok(sched);
    }
    Ok(load_schedule(Path::new(arg))?)
}

pub fn schedule_cmd(args: ScheduleArgs, mut s: Settings) -> Result<i32, Failure> {
    let conf = require(args.conf, s.take("conf")?, "conf")?;
    let stage_kind: Option<String> = args.stage_kind.or(s.take("stage-kind")?);
    let out: Option<PathBuf> = args.out.or(s.take("out")?);
    s.finish()?;

    // Flag syntax is checked before touching the conf file so misuse still
    // exits 2 when the file is also broken.
    let kind_flag = stage_kind
        .map(|raw| {
            raw.parse::<StageKind>()
                .map_err(|e| Failure::usage(format!("--stage-kind: {e}")))
        })
        .transpose()?;

    let sched = resolve_schedule(&conf)?;
    let kind = match kind_flag {
        Some(kind) => kind,
        None => StageKind::for_stage(&sched.stage).ok_or_else(|| {
            Failure::run(format!(
                "no built-in stage kind for stage {:?}; pass --stage-kind",
                sched.stage
            ))
        })?,
    };
    let violations = validate_schedule(&sched, kind);
    let valid = violations.is_empty();
    let artifact = json!({
        "schema_version": 1,
        "stage": sched.stage,
        "kind": to_value(&kind)?,
        "valid": valid,
        "violations": to_value(&violations)?,
    });
    emit_json(&artifact, out.as_deref())?;
    if valid {
        Ok(0)
    } else {
        eprintln!(
            "error: schedule {} failed validation with {} violation(s)",
            sched.stage,
            violations.len()
        );
        Ok(1)
    }
}

/// `set.jsonl` -> `set<suffix>` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eval".to_string());
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn eval_cmd(args: EvalArgs, mut s: Settings) -> Result<i32, Failure> {
    let set: PathBuf = require(args.set, s.take("set")?, "set")?;
    let client_kind = pick(args.client, s.take("client")?, "replay".to_string());
    let replay_dir: Option<PathBuf> = args.replay_dir.or(s.take("replay-dir")?);
    let endpoint: Option<String> = args.endpoint.or(s.take("endpoint")?);
    let model = pick(args.model, s.take("model")?, "vistile".to_string());
    let timeout = Duration::from_secs(pick(args.timeout_secs, s.take("timeout-secs")?, 30));
    let jobs = pick(args.jobs, s.take("jobs")?, 4).max(1);
    let results_path = pick(args.results, s.take("results")?, sibling(&set, ".results.jsonl"));
    let report_path = pick(args.report, s.take("report")?, sibling(&set, ".report.json"));
    s.finish()?;

    enum ClientSpec {
        Replay(PathBuf),
        Http { endpoint: String },
    }
    // Client flags are validated before any filesystem work so misuse still
    // exits 2 when the inputs are also broken.
    let spec = match client_kind.as_str() {
        "replay" => ClientSpec::Replay(replay_dir.unwrap_or_else(|| {
            set.parent().unwrap_or(Path::new(".")).join("replay")
        })),
        "http" => {
            let endpoint = match endpoint {
                Some(e) => e,
                None => std::env::var("VISTILE_ENDPOINT").map_err(|_| {
                    Failure::usage("missing endpoint: pass --endpoint or set VISTILE_ENDPOINT")
                })?,
            };
            ClientSpec::Http { endpoint }
        }
        other => {
            return Err(Failure::usage(format!(
                "--client: expected replay or http, got {other:?}"
            )))
        }
    };

    if let Some(parent) = results_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Failure::run(format!("cannot create {}: {e}", parent.display())))?;
    }

    let samples = load_eval_set(&set)?;
    let client: Box<dyn InferenceClient> = match spec {
        ClientSpec::Replay(dir) => Box::new(ReplayClient::new(&dir)?),
        ClientSpec::Http { endpoint } => {
            let token = std::env::var("VISTILE_TOKEN").ok();
            Box::new(HttpClient::new(&endpoint, &model, token.as_deref(), timeout)?)
        }
    };

    let results = run_eval(&samples, client.as_ref(), jobs, &results_path)?;
    let scored: Vec<_> = results.into_iter().map(|r| r.into_scored()).collect();
    let report = aggregate(&scored)?;
    let value = to_value(&report)?;
    emit_json(&value, Some(&report_path))?;
    emit_json(&value, None)?;
    Ok(0)
}

pub fn report_cmd(args: ReportArgs, mut s: Settings) -> Result<i32, Failure> {
    let results_path: PathBuf = require(args.results, s.take("results")?, "results")?;
    let out: Option<PathBuf> = args.out.or(s.take("out")?);
    s.finish()?;

    let results = load_results(&results_path)?;
    let scored: Vec<_> = results.into_iter().map(|r| r.into_scored()).collect();
    let report = aggregate(&scored)?;
    emit_json(&to_value(&report)?, out.as_deref())?;
    Ok(0)
}
