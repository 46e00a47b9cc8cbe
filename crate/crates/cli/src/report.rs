//! Machine-readable run summaries.

use anm_core::anm::StepRecord;
use anm_core::fem::StepState;
use anm_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepReport {
    pub phase: usize,
    pub lambda: f64,
    pub a_m: f64,
    pub a: f64,
    pub kind: String,
    pub residual_rms: f64,
}

impl StepReport {
    pub fn from_record(phase: usize, s: &StepRecord) -> Self {
        StepReport {
            phase,
            lambda: s.lambda,
            a_m: s.a_m,
            a: s.a,
            kind: s.kind.as_str().into(),
            residual_rms: s.residual_rms,
        }
    }

    pub fn from_state(s: &StepState) -> Self {
        StepReport {
            phase: s.phase,
            lambda: s.lambda,
            a_m: s.a_m,
            a: s.a,
            kind: s.kind.as_str().into(),
            residual_rms: s.residual_rms,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhaseReport {
    pub label: String,
    pub segment: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorReport {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tet: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> Self {
        let mut r = ErrorReport {
            message: e.to_string(),
            tet: None,
            segment: None,
            lambda: None,
        };
        if let Error::InvertedElement { tet, segment, lambda } = e.root() {
            r.tet = Some(*tet);
            r.segment = Some(*segment);
            r.lambda = Some(*lambda);
        }
        r
    }
}

/// Summary of one command. `iterations == steps.len()`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub residual_rms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tets: Option<usize>,
    /// Solution point of the toy problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
    pub phases: Vec<PhaseReport>,
    pub steps: Vec<StepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.into(),
            status: "ok".into(),
            iterations: 0,
            wall_time_s: 0.0,
            residual_rms: 0.0,
            material: None,
            nodes: None,
            tets: None,
            solution: None,
            phases: Vec::new(),
            steps: Vec::new(),
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
