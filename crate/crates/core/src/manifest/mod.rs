//! Training-recipe data machinery: mixture tables, deterministic manifest
//! composition, per-task statistics, and stage-schedule validation.

pub mod bundled;
pub mod mixture;
pub mod schedule;

pub use bundled::{bundled_mixture, bundled_schedule, mixture_csv, schedule_conf, STAGES};
pub use mixture::{
    apportion, compose_mixture, load_mixture, mixture_stats, parse_mixture_csv, InputType,
    Manifest, ManifestEntry, MixtureRow, MixtureTable, TaskKind, TaskShare,
};
pub use schedule::{
    load_schedule, parse_schedule, validate_schedule, Scheduler, StageKind, StageSchedule,
    Violation,
};
