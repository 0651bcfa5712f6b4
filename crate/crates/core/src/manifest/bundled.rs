//! Bundled stage data: the five mixture tables and matching schedules,
//! embedded so the library and CLI work without external files.

use crate::error::Result;
use crate::manifest::mixture::{parse_mixture_csv, MixtureTable};
use crate::manifest::schedule::{parse_schedule, StageSchedule};

/// Stage ids with bundled data, in training order.
pub const STAGES: [&str; 5] = [
    "2b_pretrain",
    "2b_finetune",
    "0_8b_pretrain_step1",
    "0_8b_pretrain_step2",
    "0_8b_finetune",
];

/// Raw CSV for a bundled stage mixture.
pub fn mixture_csv(stage: &str) -> Option<&'static str> {
    match stage {
        "2b_pretrain" => Some(include_str!("../../data/mixtures/2b_pretrain.csv")),
        "2b_finetune" => Some(include_str!("../../data/mixtures/2b_finetune.csv")),
        "0_8b_pretrain_step1" => {
            Some(include_str!("../../data/mixtures/0_8b_pretrain_step1.csv"))
        }
        "0_8b_pretrain_step2" => {
            Some(include_str!("../../data/mixtures/0_8b_pretrain_step2.csv"))
        }
        "0_8b_finetune" => Some(include_str!("../../data/mixtures/0_8b_finetune.csv")),
        _ => None,
    }
}

/// Raw key=value text for a bundled stage schedule.
pub fn schedule_conf(stage: &str) -> Option<&'static str> {
    match stage {
        "2b_pretrain" => Some(include_str!("../../data/schedules/2b_pretrain.conf")),
        "2b_finetune" => Some(include_str!("../../data/schedules/2b_finetune.conf")),
        "0_8b_pretrain_step1" => {
            Some(include_str!("../../data/schedules/0_8b_pretrain_step1.conf"))
        }
        "0_8b_pretrain_step2" => {
            Some(include_str!("../../data/schedules/0_8b_pretrain_step2.conf"))
        }
        "0_8b_finetune" => Some(include_str!("../../data/schedules/0_8b_finetune.conf")),
        _ => None,
    }
}

/// Parsed bundled mixture. Panics only if the embedded data is corrupt,
/// which the test suite rules out.
pub fn bundled_mixture(stage: &str) -> Option<Result<MixtureTable>> {
    mixture_csv(stage).map(|csv| parse_mixture_csv(stage, csv))
}

/// Parsed bundled schedule.
pub fn bundled_schedule(stage: &str) -> Option<Result<StageSchedule>> {
    schedule_conf(stage).map(parse_schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::schedule::{validate_schedule, StageKind};

    #[test]
    fn all_bundled_mixtures_parse_with_expected_totals() {
        let expected = [
            ("2b_pretrain", 5_251_201u64),
            ("2b_finetune", 11_947_390),
            ("0_8b_pretrain_step1", 353_755),
            ("0_8b_pretrain_step2", 11_445_394),
            ("0_8b_finetune", 7_886_660),
        ];
        for (stage, total) in expected {
            let table = bundled_mixture(stage).unwrap().unwrap();
            assert_eq!(table.total, total, "stage {stage}");
            assert_eq!(table.name, stage);
        }
    }

    #[test]
    fn all_bundled_schedules_parse_and_validate() {
        for stage in STAGES {
            let sched = bundled_schedule(stage).unwrap().unwrap();
            assert_eq!(sched.stage, stage);
            let kind = StageKind::for_stage(stage).unwrap();
            let report = validate_schedule(&sched, kind);
            assert!(report.is_empty(), "stage {stage}: {report:?}");
        }
    }

    #[test]
    fn unknown_stage_has_no_bundle() {
        assert!(mixture_csv("nope").is_none());
        assert!(schedule_conf("nope").is_none());
    }

    #[test]
    fn bundled_hyperparameters_match_expected_rows() {
        let ft = bundled_schedule("2b_finetune").unwrap().unwrap();
        assert_eq!(ft.learning_rate, vec![4e-5, 2e-5]);
        assert_eq!(ft.epochs, vec![2, 1]);
        assert_eq!(ft.weight_decay, 0.03);
        let small_ft = bundled_schedule("0_8b_finetune").unwrap().unwrap();
        assert_eq!(small_ft.learning_rate, vec![1e-5]);
        assert!(!small_ft.freeze_vit && !small_ft.freeze_llm && !small_ft.freeze_mlp);
        let step1 = bundled_schedule("0_8b_pretrain_step1").unwrap().unwrap();
        assert_eq!(step1.learning_rate, vec![1e-4]);
        assert!(step1.freeze_vit && step1.freeze_llm && !step1.freeze_mlp);
    }
}
