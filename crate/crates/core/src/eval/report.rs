//! Report aggregation: per-document-type metric means and the overall
//! accuracy average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{DocType, ScoreBreakdown};

/// A sample after scoring, ready for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub doc_type: DocType,
    pub errored: bool,
    pub scores: ScoreBreakdown,
}

/// Per-type aggregate. `accuracy` is the mean of the three metric means on
/// the 0-100 scale, rounded to 2 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    pub doc_type: DocType,
    pub samples: usize,
    pub errored: usize,
    pub mean_perfect_match: f64,
    pub mean_effective_ted: f64,
    pub mean_kv_f1: f64,
    pub accuracy: f64,
}

/// Full evaluation report. `overall` is the unweighted mean of the per-type
/// accuracies (not weighted by sample count), rounded to 2 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub per_type: Vec<TypeReport>,
    pub overall: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Aggregates scored samples into per-type means and the overall average.
/// Types are reported in enum order; sample order does not matter.
pub fn aggregate(samples: &[ScoredSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::arg("cannot aggregate an empty sample set"));
    }
    let mut per_type = Vec::new();
    for doc_type in DocType::ALL {
        let group: Vec<&ScoredSample> =
            samples.iter().filter(|s| s.doc_type == doc_type).collect();
        if group.is_empty() {
            continue;
        }
        let n = group.len() as f64;
        let mean_perfect_match = group.iter().map(|s| s.scores.perfect_match).sum::<f64>() / n;
        let mean_effective_ted = group.iter().map(|s| s.scores.effective_ted).sum::<f64>() / n;
        let mean_kv_f1 = group.iter().map(|s| s.scores.kv_f1).sum::<f64>() / n;
        per_type.push(TypeReport {
            doc_type,
            samples: group.len(),
            errored: group.iter().filter(|s| s.errored).count(),
            mean_perfect_match,
            mean_effective_ted,
            mean_kv_f1,
            accuracy: round2(
                (mean_perfect_match + mean_effective_ted + mean_kv_f1) / 3.0 * 100.0,
            ),
        });
    }
    let overall = round2(
        per_type.iter().map(|t| t.accuracy).sum::<f64>() / per_type.len() as f64,
    );
    Ok(EvalReport {
        schema_version: 1,
        per_type,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(doc_type: DocType, scores: ScoreBreakdown) -> ScoredSample {
        ScoredSample {
            id: format!("{}-{}", doc_type.as_str(), scores.perfect_match),
            doc_type,
            errored: false,
            scores,
        }
    }

    fn perfect() -> ScoreBreakdown {
        ScoreBreakdown {
            parsed: true,
            perfect_match: 1.0,
            effective_ted: 1.0,
            kv_f1: 1.0,
        }
    }

    #[test]
    fn all_perfect_corpus_scores_100() {
        let samples: Vec<ScoredSample> = DocType::ALL
            .into_iter()
            .map(|t| sample(t, perfect()))
            .collect();
        let report = aggregate(&samples).unwrap();
        assert!(report.per_type.iter().all(|t| t.accuracy == 100.0));
        assert_eq!(report.overall, 100.0);
    }

    #[test]
    fn all_unparseable_corpus_scores_0() {
        let samples: Vec<ScoredSample> = (0..5)
            .map(|_| sample(DocType::Receipt, ScoreBreakdown::zero()))
            .collect();
        let report = aggregate(&samples).unwrap();
        assert_eq!(report.overall, 0.0);
        assert_eq!(report.per_type[0].samples, 5);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn overall_is_unweighted_across_types() {
        // 1 receipt at 100 and 3 checks at 0: a sample-weighted average
        // would be 25, the type-unweighted average is 50.
        let mut samples = vec![sample(DocType::Receipt, perfect())];
        for _ in 0..3 {
            samples.push(sample(DocType::Check, ScoreBreakdown::zero()));
        }
        let report = aggregate(&samples).unwrap();
        assert_eq!(report.overall, 50.0);
    }

    #[test]
    fn reference_row_average_reproduces() {
        // Per-type accuracies 82.0, 56.4, 41.5 -> mean 59.966... -> 59.97.
        let mut samples = Vec::new();
        let mixes = [
            (DocType::Receipt, 820),
            (DocType::DriversLicense, 564),
            (DocType::Check, 415),
        ];
        for (doc_type, per_mille) in mixes {
            for i in 0..1000 {
                let s = if i < per_mille { perfect() } else { ScoreBreakdown::zero() };
                samples.push(sample(doc_type, s));
            }
        }
        let report = aggregate(&samples).unwrap();
        let acc: Vec<f64> = report.per_type.iter().map(|t| t.accuracy).collect();
        assert_eq!(acc, vec![82.0, 56.4, 41.5]);
        assert_eq!(report.overall, 59.97);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut samples = vec![
            sample(DocType::Receipt, perfect()),
            sample(DocType::Check, ScoreBreakdown::zero()),
            sample(
                DocType::Receipt,
                ScoreBreakdown {
                    parsed: true,
                    perfect_match: 0.0,
                    effective_ted: 0.5,
                    kv_f1: 0.25,
                },
            ),
        ];
        let a = aggregate(&samples).unwrap();
        samples.reverse();
        let b = aggregate(&samples).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errored_samples_are_counted_separately() {
        let mut s = sample(DocType::Other, ScoreBreakdown::zero());
        s.errored = true;
        let report = aggregate(&[s, sample(DocType::Other, perfect())]).unwrap();
        assert_eq!(report.per_type[0].errored, 1);
        assert_eq!(report.per_type[0].samples, 2);
    }
}
