//! Stage schedules: per-stage hyperparameters and freeze flags, parsed from
//! flat key=value files and validated against the expected trainable-module
//! pattern for the stage kind.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyvalue;

/// Which modules a stage is allowed to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Only the projector trains; encoder and language model frozen.
    ProjectorOnly,
    /// Encoder and projector train; language model frozen.
    VisionAndProjector,
    /// Language model and projector train; encoder frozen.
    LanguageAndProjector,
    /// Everything trains.
    Full,
}

impl StageKind {
    /// Expected `(freeze_vit, freeze_llm, freeze_mlp)` for this kind.
    pub fn expected_freezes(&self) -> (bool, bool, bool) {
        match self {
            StageKind::ProjectorOnly => (true, true, false),
            StageKind::VisionAndProjector => (false, true, false),
            StageKind::LanguageAndProjector => (true, false, false),
            StageKind::Full => (false, false, false),
        }
    }

    /// Kind of each bundled stage id.
    pub fn for_stage(stage: &str) -> Option<StageKind> {
        match stage {
            "2b_pretrain" => Some(StageKind::VisionAndProjector),
            "2b_finetune" | "0_8b_finetune" => Some(StageKind::Full),
            "0_8b_pretrain_step1" => Some(StageKind::ProjectorOnly),
            "0_8b_pretrain_step2" => Some(StageKind::LanguageAndProjector),
            _ => None,
        }
    }
}

impl FromStr for StageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projector_only" => Ok(StageKind::ProjectorOnly),
            "vision_and_projector" => Ok(StageKind::VisionAndProjector),
            "language_and_projector" => Ok(StageKind::LanguageAndProjector),
            "full" => Ok(StageKind::Full),
            _ => Err(Error::parse(format!("unknown stage kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Cosine,
}

/// One training stage's hyperparameters. `learning_rate` and `epochs` hold
/// one value per sub-phase: annotated stages like "4e-5 -> 2e-5" over
/// "2 -> 1" epochs carry two, plain stages carry one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stage: String,
    pub freeze_vit: bool,
    pub freeze_llm: bool,
    pub freeze_mlp: bool,
    pub image_size: u32,
    pub max_num_tiles: u32,
    pub learning_rate: Vec<f64>,
    pub scheduler: Scheduler,
    pub batch_size: u32,
    pub weight_decay: f64,
    pub epochs: Vec<u32>,
}

fn parse_phases<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split("->")
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| Error::parse(format!("{key}: cannot parse {:?}", part.trim())))
        })
        .collect()
}

/// Parses a schedule from key=value text. All keys are required; unknown
/// keys are rejected.
pub fn parse_schedule(text: &str) -> Result<StageSchedule> {
    let pairs = keyvalue::parse_key_values(text)?;
    const KNOWN: [&str; 11] = [
        "stage",
        "freeze_vit",
        "freeze_llm",
        "freeze_mlp",
        "image_size",
        "max_num_tiles",
        "learning_rate",
        "scheduler",
        "batch_size",
        "weight_decay",
        "epochs",
    ];
    for (key, _) in &pairs {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::parse(format!("unknown schedule key {key:?}")));
        }
    }
    let get = |key: &str| -> Result<&str> {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(format!("missing schedule key {key:?}")))
    };
    let parse_bool = |key: &str| -> Result<bool> {
        match get(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::parse(format!("{key}: expected true/false, got {other:?}"))),
        }
    };
    let parse_u32 = |key: &str| -> Result<u32> {
        get(key)?
            .parse()
            .map_err(|_| Error::parse(format!("{key}: cannot parse {:?}", get(key).unwrap())))
    };

    let scheduler = match get("scheduler")? {
        "cosine" => Scheduler::Cosine,
        other => return Err(Error::parse(format!("unknown scheduler {other:?}"))),
    };

    Ok(StageSchedule {
        stage: get("stage")?.to_string(),
        freeze_vit: parse_bool("freeze_vit")?,
        freeze_llm: parse_bool("freeze_llm")?,
        freeze_mlp: parse_bool("freeze_mlp")?,
        image_size: parse_u32("image_size")?,
        max_num_tiles: parse_u32("max_num_tiles")?,
        learning_rate: parse_phases(get("learning_rate")?, "learning_rate")?,
        scheduler,
        batch_size: parse_u32("batch_size")?,
        weight_decay: get("weight_decay")?
            .parse()
            .map_err(|_| Error::parse("weight_decay: cannot parse"))?,
        epochs: parse_phases(get("epochs")?, "epochs")?,
    })
}

/// Loads a schedule file.
pub fn load_schedule(path: impl AsRef<Path>) -> Result<StageSchedule> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_schedule(&text).map_err(|e| e.with_path(path))
}

/// One rule breach found by [`validate_schedule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Checks a schedule against the expected pattern for its stage kind.
///
/// Every field is checked by exactly one rule, so a single mutated flag
/// yields a single violation. An empty report means the schedule is valid.
pub fn validate_schedule(sched: &StageSchedule, kind: StageKind) -> Vec<Violation> {
    let mut report = Vec::new();
    let (want_vit, want_llm, _) = kind.expected_freezes();
    if sched.freeze_vit != want_vit {
        report.push(violation(
            "freeze_vit",
            format!("expected {want_vit} for this stage kind, got {}", sched.freeze_vit),
        ));
    }
    if sched.freeze_llm != want_llm {
        report.push(violation(
            "freeze_llm",
            format!("expected {want_llm} for this stage kind, got {}", sched.freeze_llm),
        ));
    }
    if sched.freeze_mlp {
        report.push(violation(
            "freeze_mlp",
            "the MLP projector is never frozen in any training stage",
        ));
    }
    if sched.image_size != 448 {
        report.push(violation(
            "image_size",
            format!("expected 448, got {}", sched.image_size),
        ));
    }
    if sched.max_num_tiles != 6 {
        report.push(violation(
            "max_num_tiles",
            format!("expected 6, got {}", sched.max_num_tiles),
        ));
    }
    if sched.learning_rate.is_empty() || sched.learning_rate.iter().any(|&lr| lr <= 0.0) {
        report.push(violation("learning_rate", "rates must be positive"));
    }
    if sched.epochs.is_empty() || sched.epochs.contains(&0) {
        report.push(violation("epochs", "epoch counts must be positive"));
    }
    if sched.learning_rate.len() != sched.epochs.len() {
        report.push(violation(
            "learning_rate",
            format!(
                "phase count mismatch: {} rates vs {} epoch entries",
                sched.learning_rate.len(),
                sched.epochs.len()
            ),
        ));
    }
    if sched.batch_size == 0 {
        report.push(violation("batch_size", "batch size must be positive"));
    }
    if sched.weight_decay < 0.0 {
        report.push(violation("weight_decay", "weight decay must be non-negative"));
    }
    report
}
