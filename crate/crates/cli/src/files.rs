//! JSON documents read and written by the command line tool. Matrices are
//! dense and row-major, stored as separate real and imaginary parts.

use std::collections::BTreeMap;
use std::path::Path;

use qqc_core::adversary::WeightMatrix;
use qqc_core::matlin::{c64, CMatrix, RMatrix};
use qqc_core::problem::{LabeledUnitary, QueryProblem};
use qqc_core::reconstruct::QuantumQueryAlgorithm;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrixJson {
    pub label: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub unitaries: Vec<LabeledMatrixJson>,
    pub outputs: Vec<String>,
    pub g: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmFile {
    pub n: usize,
    pub w_dim: usize,
    pub unitaries: Vec<ComplexMatrixJson>,
    pub projectors: Vec<LabeledMatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaFile {
    Wrapped { gamma: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn rectangular(rows: &[Vec<f64>], what: &str) -> Result<(usize, usize), CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::input(format!("{what}: rows have different lengths")));
    }
    Ok((rows.len(), cols))
}

pub fn complex_from_parts(re: &[Vec<f64>], im: &[Vec<f64>], what: &str) -> Result<CMatrix, CliError> {
    let shape = rectangular(re, what)?;
    if rectangular(im, what)? != shape {
        return Err(CliError::input(format!("{what}: real and imaginary parts differ in shape")));
    }
    Ok(CMatrix::from_fn(shape.0, shape.1, |i, j| c64(re[i][j], im[i][j])))
}

pub fn complex_to_parts(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&qqc_core::matlin::C64) -> f64| {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    /// Builds the problem without validating it.
    pub fn to_problem(&self) -> Result<QueryProblem, CliError> {
        let unitaries = self
            .unitaries
            .iter()
            .map(|u| Ok(LabeledUnitary::new(u.label.clone(), complex_from_parts(&u.re, &u.im, &u.label)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(QueryProblem::new(self.n, unitaries, self.outputs.clone(), self.g.clone()))
    }

    pub fn from_problem(p: &QueryProblem) -> Self {
        let unitaries = p
            .unitaries()
            .iter()
            .map(|u| {
                let (re, im) = complex_to_parts(&u.matrix);
                LabeledMatrixJson { label: u.label.clone(), re, im }
            })
            .collect();
        ProblemFile {
            n: p.n(),
            unitaries,
            outputs: p.outputs().to_vec(),
            g: p.assignments().iter().cloned().collect(),
        }
    }
}

impl AlgorithmFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::input(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn from_algorithm(alg: &QuantumQueryAlgorithm) -> Self {
        let unitaries = alg
            .unitaries
            .iter()
            .map(|u| {
                let (re, im) = complex_to_parts(u);
                ComplexMatrixJson { re, im }
            })
            .collect();
        let projectors = alg
            .outputs
            .iter()
            .zip(&alg.projectors)
            .map(|(label, p)| {
                let (re, im) = complex_to_parts(p);
                LabeledMatrixJson { label: label.clone(), re, im }
            })
            .collect();
        AlgorithmFile { n: alg.n, w_dim: alg.w_dim, unitaries, projectors }
    }

    pub fn to_algorithm(&self) -> Result<QuantumQueryAlgorithm, CliError> {
        let unitaries = self
            .unitaries
            .iter()
            .enumerate()
            .map(|(t, u)| complex_from_parts(&u.re, &u.im, &format!("U_{t}")))
            .collect::<Result<Vec<_>, CliError>>()?;
        let projectors = self
            .projectors
            .iter()
            .map(|p| complex_from_parts(&p.re, &p.im, &p.label))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(QuantumQueryAlgorithm {
            n: self.n,
            w_dim: self.w_dim,
            unitaries,
            outputs: self.projectors.iter().map(|p| p.label.clone()).collect(),
            projectors,
        })
    }
}

impl GammaFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        match self {
            GammaFile::Wrapped { gamma } | GammaFile::Bare(gamma) => gamma,
        }
    }

    pub fn to_weights(&self) -> Result<WeightMatrix, CliError> {
        let rows = self.rows();
        let (r, c) = rectangular(rows, "gamma")?;
        let m = RMatrix::from_fn(r, c, |i, j| rows[i][j]);
        WeightMatrix::new(m).map_err(CliError::from_core)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qqc_core::problem::fixtures;

    #[test]
    fn problem_round_trips_through_the_file_form() {
        for (_, p) in fixtures::all() {
            let back = ProblemFile::from_problem(&p).to_problem().unwrap();
            assert_eq!(back.unitaries(), p.unitaries());
            assert_eq!(back.outputs(), p.outputs());
            assert_eq!(back.assignment().unwrap(), p.assignment().unwrap());
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = complex_from_parts(&[vec![1.0, 0.0], vec![0.0]], &[vec![0.0, 0.0], vec![0.0]], "U").unwrap_err();
        assert_eq!(err.code, crate::ExitCode::InputError);
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        assert!(complex_from_parts(&[vec![1.0]], &[vec![0.0, 0.0]], "U").is_err());
    }

    #[test]
    fn both_gamma_layouts_parse() {
        let a: GammaFile = serde_json::from_str(r#"{"gamma": [[0, 1], [1, 0]]}"#).unwrap();
        let b: GammaFile = serde_json::from_str("[[0, 1], [1, 0]]").unwrap();
        assert_eq!(a.rows(), b.rows());
        assert_eq!(a.to_weights().unwrap().dim(), 2);
    }
}
