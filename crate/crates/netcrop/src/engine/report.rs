//! Serializable selection reports with a stable field order.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub task: String,
    pub n: usize,
    pub o: usize,
    pub s: usize,
    pub m: usize,
    pub reps: usize,
    pub loss: String,
    pub seed: u64,
    pub threads: usize,
    pub candidates: Vec<String>,
    /// Task-specific knobs (estimator, matcher, grids, ...), key-sorted.
    pub extra: BTreeMap<String, String>,
}

/// Loss is None when the candidate's fit was degenerate (treated as +inf).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLoss {
    pub candidate: String,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepetitionOutcome {
    pub winner: String,
    pub losses: Vec<CandidateLoss>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub split_ms: u64,
    pub fit_ms: u64,
    pub stitch_ms: u64,
    pub predict_ms: u64,
    pub total_ms: u64,
}

impl Timings {
    pub fn redact(&mut self) {
        *self = Timings::default();
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: ConfigEcho,
    pub repetitions: Vec<RepetitionOutcome>,
    pub final_winner: String,
    pub timings_ms: Timings,
    pub warnings: Vec<String>,
}

impl SelectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_order() {
        let report = SelectionReport {
            config: ConfigEcho {
                task: "select-blockmodel".into(),
                n: 100,
                o: 40,
                s: 2,
                m: 30,
                reps: 3,
                loss: "squared".into(),
                seed: 9,
                threads: 1,
                candidates: vec!["sbm-k1".into(), "sbm-k2".into()],
                extra: BTreeMap::from([("kmax".into(), "2".into())]),
            },
            repetitions: vec![RepetitionOutcome {
                winner: "sbm-k2".into(),
                losses: vec![
                    CandidateLoss {
                        candidate: "sbm-k1".into(),
                        loss: Some(12.5),
                    },
                    CandidateLoss {
                        candidate: "sbm-k2".into(),
                        loss: None,
                    },
                ],
            }],
            final_winner: "sbm-k2".into(),
            timings_ms: Timings::default(),
            warnings: vec!["w".into()],
        };
        let json = report.to_json();
        let back: SelectionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.final_winner, "sbm-k2");
        assert_eq!(back.repetitions[0].losses[1].loss, None);
        // struct field order is preserved in the serialized text
        let c = json.find("\"config\"").unwrap();
        let r = json.find("\"repetitions\"").unwrap();
        let f = json.find("\"final_winner\"").unwrap();
        let t = json.find("\"timings_ms\"").unwrap();
        let w = json.find("\"warnings\"").unwrap();
        assert!(c < r && r < f && f < t && t < w);
    }

    #[test]
    fn serialization_is_byte_stable() {
        let mk = || SelectionReport {
            config: ConfigEcho {
                task: "t".into(),
                n: 10,
                o: 4,
                s: 2,
                m: 3,
                reps: 1,
                loss: "deviance".into(),
                seed: 0,
                threads: 4,
                candidates: vec![],
                extra: BTreeMap::new(),
            },
            repetitions: vec![],
            final_winner: "x".into(),
            timings_ms: Timings {
                split_ms: 1,
                fit_ms: 2,
                stitch_ms: 3,
                predict_ms: 4,
                total_ms: 10,
            },
            warnings: vec![],
        };
        let mut a = mk();
        let mut b = mk();
        a.timings_ms.redact();
        b.timings_ms = Timings {
            split_ms: 9,
            ..Default::default()
        };
        b.timings_ms.redact();
        assert_eq!(a.to_json(), b.to_json());
    }
}
