//! JSON model files.
//!
//! ```json
//! {"env_dim": 2, "epsilon": [0.0, 0.0],
//!  "H_E": [[[1,0],[0,0]], [[0,0],[-1,0]]],
//!  "V0": ..., "V1": ...,
//!  "R0": {"kind": "thermal", "beta": 1.0}}
//! ```
//!
//! Matrices are row-major arrays of `[re, im]` pairs. `R0` is one of
//! `thermal` (`beta`: number or `"inf"`), `pure` (`state`: list of
//! `[re, im]`), `diagonal` (`populations`) or `random` (`seed`). An
//! optional boolean `rotating_frame` drops the qubit phases. Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{thermal_state, EnvDensity, ModelError, PureDephasingModel};
use crate::linalg::{CMatrix, Hermitian, C64};

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Matrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Finite(f64),
    Named(String),
}

impl Beta {
    pub fn value(&self) -> Result<f64, ModelFileError> {
        match self {
            Beta::Finite(b) => Ok(*b),
            Beta::Named(s) if s == "inf" || s == "infinity" => Ok(f64::INFINITY),
            Beta::Named(s) => Err(ModelFileError::Invalid(format!("beta must be a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvSpec {
    Thermal { beta: Beta },
    Pure { state: Vec<[f64; 2]> },
    Diagonal { populations: Vec<f64> },
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub env_dim: usize,
    pub epsilon: [f64; 2],
    #[serde(rename = "H_E")]
    pub h_e: Matrix,
    #[serde(rename = "V0")]
    pub v0: Matrix,
    #[serde(rename = "V1")]
    pub v1: Matrix,
    #[serde(rename = "R0")]
    pub r0: EnvSpec,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rotating_frame: bool,
}

fn to_matrix(name: &str, rows: &Matrix, n: usize) -> Result<CMatrix, ModelFileError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ModelFileError::Invalid(format!("{name} must be {n}x{n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn from_matrix(m: &CMatrix) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_parts(model: &PureDephasingModel, r0: EnvSpec) -> Self {
        use super::Branch;
        Self {
            env_dim: model.env_dim(),
            epsilon: model.epsilon(),
            h_e: from_matrix(model.h_e().matrix()),
            v0: from_matrix(model.coupling(Branch::Zero).matrix()),
            v1: from_matrix(model.coupling(Branch::One).matrix()),
            r0,
            rotating_frame: model.rotating_frame(),
        }
    }

    pub fn model(&self) -> Result<PureDephasingModel, ModelFileError> {
        let n = self.env_dim;
        let h_e = Hermitian::new(to_matrix("H_E", &self.h_e, n)?).map_err(ModelError::from)?;
        let v0 = Hermitian::new(to_matrix("V0", &self.v0, n)?).map_err(ModelError::from)?;
        let v1 = Hermitian::new(to_matrix("V1", &self.v1, n)?).map_err(ModelError::from)?;
        Ok(PureDephasingModel::new(self.epsilon, h_e, v0, v1)?.with_rotating_frame(self.rotating_frame))
    }

    /// Environment state; thermal states are built from this file's `H_E`.
    pub fn env_density(&self, model: &PureDephasingModel) -> Result<EnvDensity, ModelFileError> {
        let n = self.env_dim;
        let r = match &self.r0 {
            EnvSpec::Thermal { beta } => thermal_state(model.h_e(), beta.value()?)?,
            EnvSpec::Pure { state } => {
                if state.len() != n {
                    return Err(ModelFileError::Invalid(format!("R0 state must have {n} amplitudes")));
                }
                let psi: Vec<C64> = state.iter().map(|z| C64::new(z[0], z[1])).collect();
                EnvDensity::pure(&psi)?
            }
            EnvSpec::Diagonal { populations } => {
                if populations.len() != n {
                    return Err(ModelFileError::Invalid(format!("R0 populations must have {n} entries")));
                }
                EnvDensity::diagonal(populations)?
            }
            EnvSpec::Random { seed } => EnvDensity::random(n, *seed)?,
        };
        Ok(r)
    }

    pub fn build(&self) -> Result<(PureDephasingModel, EnvDensity), ModelFileError> {
        let model = self.model()?;
        let r0 = self.env_density(&model)?;
        Ok((model, r0))
    }
}
