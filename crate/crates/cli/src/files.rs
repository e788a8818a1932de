//! On-disk formats. Reals are written in shortest round-trip form, complex
//! entries as `[re, im]`, matrices as arrays of rows.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use safegate_core::propagation::{PulseStep, StepLabel};
use safegate_core::{AtomParameters, CMatrix, ControlSystem, HermitianOperator, PulseSequence, UnitaryOperator};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, n: usize, what: &str) -> Result<CMatrix, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::usage(format!("{what} must be a {n}x{n} matrix")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AtomPair {
    #[serde(rename = "A")]
    pub a: AtomParams,
    #[serde(rename = "B")]
    pub b: AtomParams,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AtomParams {
    pub e_minus: f64,
    pub e_zero: f64,
    pub e_plus: f64,
    pub b_perp: f64,
    pub b_z: f64,
}

impl From<&AtomParameters> for AtomParams {
    fn from(p: &AtomParameters) -> Self {
        let [e_minus, e_zero, e_plus, b_perp, b_z] = p.as_array();
        Self {
            e_minus,
            e_zero,
            e_plus,
            b_perp,
            b_z,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SystemFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: JsonMatrix,
    #[serde(rename = "B")]
    pub b: JsonMatrix,
    pub closure_rank: usize,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<AtomPair>,
}

impl SystemFile {
    pub fn from_system(sys: &ControlSystem, model: &str, params: Option<AtomPair>) -> Self {
        Self {
            n: sys.dim(),
            a: matrix_to_json(sys.a().matrix()),
            b: matrix_to_json(sys.b().matrix()),
            closure_rank: sys.closure_rank(),
            model: model.to_string(),
            params,
        }
    }

    /// Rebuilds the system; the closure rank is recomputed, not trusted.
    pub fn to_system(&self) -> Result<ControlSystem, CliError> {
        let a = HermitianOperator::new(matrix_from_json(&self.a, self.n, "A")?)?;
        let b = HermitianOperator::new(matrix_from_json(&self.b, self.n, "B")?)?;
        Ok(ControlSystem::new(a, b)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepEntry {
    pub h: String,
    pub t: f64,
    pub wait: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SequenceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_change: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SequenceFile {
    pub n: usize,
    pub alternating: bool,
    pub steps: Vec<StepEntry>,
    #[serde(default)]
    pub meta: SequenceMeta,
}

impl SequenceFile {
    pub fn from_sequence(seq: &PulseSequence, meta: SequenceMeta) -> Self {
        Self {
            n: seq.dim(),
            alternating: seq.is_alternating(),
            steps: seq
                .steps()
                .iter()
                .map(|s| StepEntry {
                    h: s.label.as_str().to_string(),
                    t: s.duration,
                    wait: s.wait,
                })
                .collect(),
            meta,
        }
    }

    pub fn to_sequence(&self) -> Result<PulseSequence, CliError> {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let label = match s.h.as_str() {
                    "A" => StepLabel::A,
                    "B" => StepLabel::B,
                    "idle" => StepLabel::Idle,
                    other => return Err(CliError::usage(format!("unknown step label '{other}'"))),
                };
                Ok(PulseStep::new(label, s.t, s.wait))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let seq = PulseSequence::new(self.n, steps)?;
        if self.alternating && !seq.is_alternating() {
            return Err(CliError::usage("sequence is marked alternating but its labels are not"));
        }
        Ok(seq)
    }
}

/// A target gate given as a file: `{ "n": int, "U": matrix }`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TargetFile {
    pub n: usize,
    #[serde(rename = "U")]
    pub u: JsonMatrix,
}

impl TargetFile {
    pub fn to_unitary(&self) -> Result<UnitaryOperator, CliError> {
        Ok(UnitaryOperator::new(matrix_from_json(&self.u, self.n, "U")?)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use safegate_core::default_system;

    #[test]
    fn system_file_round_trips_exactly() {
        let (sys, pa, pb) = default_system(3).unwrap();
        let params = AtomPair {
            a: (&pa).into(),
            b: (&pb).into(),
        };
        let file = SystemFile::from_system(&sys, "atom", Some(params));
        let text = serde_json::to_string(&file).unwrap();
        let back: SystemFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let rebuilt = back.to_system().unwrap();
        assert_eq!(rebuilt.a().matrix(), sys.a().matrix());
        assert_eq!(rebuilt.b().matrix(), sys.b().matrix());
        assert_eq!(rebuilt.closure_rank(), 15);
    }

    #[test]
    fn sequence_file_round_trips_exactly() {
        let t = [0.1, 1.0 / 3.0, std::f64::consts::PI, 2.5e-17];
        let seq = PulseSequence::alternating(2, &t).unwrap().with_added_waits(&[0.0, 0.7, 1e-300, 0.2]).unwrap();
        let meta = SequenceMeta {
            target_distance: Some(1.234_567_890_123_456_7e-9),
            seed: Some(u64::MAX),
            ..Default::default()
        };
        let file = SequenceFile::from_sequence(&seq, meta);
        let back: SequenceFile = serde_json::from_str(&serde_json::to_string_pretty(&file).unwrap()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_sequence().unwrap(), seq);
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let file = SequenceFile {
            n: 2,
            alternating: false,
            steps: vec![StepEntry {
                h: "C".into(),
                t: 1.0,
                wait: 0.0,
            }],
            meta: SequenceMeta::default(),
        };
        assert_eq!(file.to_sequence().unwrap_err().code, crate::EXIT_USAGE);
        assert!(matrix_from_json(&vec![vec![[0.0, 0.0]; 2]; 3], 2, "A").is_err());
    }

    #[test]
    fn mislabelled_alternating_flag_is_rejected() {
        let file = SequenceFile {
            n: 2,
            alternating: true,
            steps: vec![
                StepEntry {
                    h: "A".into(),
                    t: 1.0,
                    wait: 0.0,
                },
            ],
            meta: SequenceMeta::default(),
        };
        assert!(file.to_sequence().is_err());
    }
}
