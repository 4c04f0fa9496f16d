//! Fitted models as TOML.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so
//! reading an artifact back reproduces every number bit for bit.
//! Matrices are arrays of rows.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lsjm::{FusedPosterior, LsjmFit};
use crate::lsm::{FitConfig, FitReport, PriorConfig, ViewVariationalState};
use crate::network::NodeSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lsm,
    Lsjm,
}

/// `FitConfig` with the seed as a string (TOML integers are signed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub tol: f64,
    pub min_iters: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: String,
    pub align_iters: usize,
}

impl From<&FitConfig> for ConfigRecord {
    fn from(c: &FitConfig) -> Self {
        ConfigRecord {
            tol: c.tol,
            min_iters: c.min_iters,
            max_iters: c.max_iters,
            restarts: c.restarts,
            seed: c.seed.to_string(),
            align_iters: c.align_iters,
        }
    }
}

impl TryFrom<&ConfigRecord> for FitConfig {
    type Error = Error;

    fn try_from(c: &ConfigRecord) -> Result<Self> {
        Ok(FitConfig {
            tol: c.tol,
            min_iters: c.min_iters,
            max_iters: c.max_iters,
            restarts: c.restarts,
            seed: c
                .seed
                .parse()
                .map_err(|_| Error::Artifact(format!("bad seed {:?}", c.seed)))?,
            align_iters: c.align_iters,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub label: String,
    pub xi_tilde: f64,
    pub psi2_tilde: f64,
    pub cov: Vec<Vec<f64>>,
    pub positions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRecord {
    pub cov: Vec<Vec<f64>>,
    pub positions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub model: ModelKind,
    /// SHA-256 over the SHA-256 digests of the input files, in input order.
    pub fingerprint: String,
    pub nodes: Vec<String>,
    pub config: ConfigRecord,
    pub priors: Vec<PriorConfig>,
    pub views: Vec<ViewRecord>,
    pub fused: Option<FusedRecord>,
    pub report: FitReport,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fingerprint of a set of inputs: order matters.
pub fn fingerprint<'a>(inputs: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut outer = Sha256::new();
    for bytes in inputs {
        outer.update(Sha256::digest(bytes));
    }
    hex::encode(outer.finalize())
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_of(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Artifact(format!("ragged matrix in {what}")));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn view_record(label: &str, s: &ViewVariationalState) -> ViewRecord {
    ViewRecord {
        label: label.to_string(),
        xi_tilde: s.xi_tilde,
        psi2_tilde: s.psi2_tilde,
        cov: rows_of(&s.cov),
        positions: rows_of(&s.positions),
    }
}

impl ModelArtifact {
    pub fn from_lsm(
        nodes: &NodeSet,
        label: &str,
        state: &ViewVariationalState,
        prior: &PriorConfig,
        config: &FitConfig,
        report: &FitReport,
        fingerprint: String,
    ) -> Self {
        ModelArtifact {
            schema_version: SCHEMA_VERSION,
            model: ModelKind::Lsm,
            fingerprint,
            nodes: nodes.labels().to_vec(),
            config: config.into(),
            priors: vec![*prior],
            views: vec![view_record(label, state)],
            fused: None,
            report: report.clone(),
        }
    }

    pub fn from_lsjm(
        nodes: &NodeSet,
        labels: &[&str],
        fit: &LsjmFit,
        config: &FitConfig,
        fingerprint: String,
    ) -> Self {
        ModelArtifact {
            schema_version: SCHEMA_VERSION,
            model: ModelKind::Lsjm,
            fingerprint,
            nodes: nodes.labels().to_vec(),
            config: config.into(),
            priors: fit.priors.clone(),
            views: labels
                .iter()
                .zip(&fit.view_states)
                .map(|(l, s)| view_record(l, s))
                .collect(),
            fused: Some(FusedRecord {
                cov: rows_of(&fit.fused.cov_bar),
                positions: rows_of(&fit.fused.positions_bar),
            }),
            report: fit.report.clone(),
        }
    }

    pub fn view_states(&self) -> Result<Vec<ViewVariationalState>> {
        self.views
            .iter()
            .map(|v| {
                Ok(ViewVariationalState {
                    xi_tilde: v.xi_tilde,
                    psi2_tilde: v.psi2_tilde,
                    positions: matrix_of(&v.positions, &v.label)?,
                    cov: matrix_of(&v.cov, &v.label)?,
                })
            })
            .collect()
    }

    pub fn fused_posterior(&self) -> Result<Option<FusedPosterior>> {
        self.fused
            .as_ref()
            .map(|f| {
                Ok(FusedPosterior {
                    positions_bar: matrix_of(&f.positions, "fused")?,
                    cov_bar: matrix_of(&f.cov, "fused")?,
                })
            })
            .transpose()
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        FitConfig::try_from(&self.config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let artifact: ModelArtifact =
            toml::from_str(text).map_err(|e| Error::Artifact(e.to_string()))?;
        if artifact.schema_version != SCHEMA_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported schema version {}",
                artifact.schema_version
            )));
        }
        Ok(artifact)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsm::{RepairCounts, RestartSummary};
    use proptest::prelude::*;

    fn report() -> FitReport {
        FitReport {
            objective_trace: vec![-10.5, -3.25, -3.2],
            initial_objective: f64::NEG_INFINITY,
            iterations: 3,
            converged: true,
            best_restart: 1,
            restarts: vec![
                RestartSummary {
                    restart: 0,
                    initial_objective: -20.0,
                    final_objective: -4.0,
                    iterations: 7,
                    converged: false,
                    failure: Some("boom".into()),
                },
                RestartSummary {
                    restart: 1,
                    initial_objective: -19.0,
                    final_objective: -3.2,
                    iterations: 3,
                    converged: true,
                    failure: None,
                },
            ],
            repairs: RepairCounts {
                hessian: 4,
                covariance: 0,
                fused: 1,
                damped: 2,
            },
        }
    }

    fn artifact(values: &[f64]) -> ModelArtifact {
        let nodes = NodeSet::new(["a", "b", "c"]).unwrap();
        let state = ViewVariationalState {
            xi_tilde: values[0],
            psi2_tilde: values[1],
            positions: DMatrix::from_row_slice(3, 2, &values[2..8]),
            cov: DMatrix::from_row_slice(2, 2, &[values[8], values[9], values[9], values[10]]),
        };
        let config = FitConfig {
            seed: u64::MAX,
            ..Default::default()
        };
        let mut a = ModelArtifact::from_lsm(
            &nodes,
            "w1",
            &state,
            &PriorConfig::default(),
            &config,
            &report(),
            fingerprint([b"x".as_slice()]),
        );
        a.fused = Some(FusedRecord {
            cov: rows_of(&state.cov),
            positions: rows_of(&state.positions),
        });
        a
    }

    #[test]
    fn round_trip_keeps_everything() {
        let vals = [
            -0.63,
            0.01,
            1.0 / 3.0,
            -2.5e-300,
            7.0,
            0.1 + 0.2,
            -0.0,
            1e22,
            0.5,
            0.01,
            0.25,
        ];
        let a = artifact(&vals);
        let text = a.to_toml_string().unwrap();
        let b = ModelArtifact::from_toml_str(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.fit_config().unwrap().seed, u64::MAX);
        assert_eq!(
            b.view_states().unwrap()[0].positions[(2, 1)].to_bits(),
            1e22f64.to_bits()
        );
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = artifact(&[0.0; 11]).to_toml_string().unwrap();
        let text = text.replace("schema_version = 1", "schema_version = 99");
        assert!(matches!(
            ModelArtifact::from_toml_str(&text),
            Err(Error::Artifact(_))
        ));
    }

    #[test]
    fn fingerprint_is_order_sensitive() {
        let a = fingerprint([b"one".as_slice(), b"two".as_slice()]);
        let b = fingerprint([b"two".as_slice(), b"one".as_slice()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn floats_round_trip_bit_exactly(bits in prop::collection::vec(any::<u64>(), 11)) {
            let vals: Vec<f64> = bits
                .iter()
                .map(|&b| f64::from_bits(b))
                .map(|v| if v.is_nan() { 0.0 } else { v })
                .collect();
            let a = artifact(&vals);
            let b = ModelArtifact::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
            let before = a.view_states().unwrap();
            let after = b.view_states().unwrap();
            for (x, y) in before[0].positions.iter().zip(after[0].positions.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert_eq!(before[0].xi_tilde.to_bits(), after[0].xi_tilde.to_bits());
            prop_assert_eq!(before[0].cov.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            after[0].cov.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
