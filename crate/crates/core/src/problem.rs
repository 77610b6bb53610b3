//! Query problem instances `(n, S, T, g)` and the constant matrices derived
//! from them.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{QqcError, Result};
use crate::matlin::{c64, unitarity_residual, CMatrix, HermitianMatrix};

pub const UNITARITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledUnitary {
    pub label: String,
    pub matrix: CMatrix,
}

impl LabeledUnitary {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Self {
        LabeledUnitary { label: label.into(), matrix }
    }
}

/// A finite set of labeled `n × n` unitaries, an output alphabet and the
/// property `g` to compute. The file order of `unitaries` and `outputs`
/// fixes every matrix index used downstream.
///
/// Construction never fails; [`QueryProblem::validate`] lists what is wrong.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryProblem {
    n: usize,
    unitaries: Vec<LabeledUnitary>,
    outputs: Vec<String>,
    g: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    EmptyUnitarySet,
    EmptyOutputSet,
    ZeroDimension,
    WrongShape,
    NotUnitary,
    DuplicateLabel,
    DuplicateOutput,
    MissingAssignment,
    UnknownOutput,
    UnknownLabel,
    ConflictingAssignment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub residual: Option<f64>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ({})", self.kind, self.subject)?;
        if let Some(r) = self.residual {
            write!(f, " residual {r:e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: impl Into<String>, residual: Option<f64>) {
        self.violations.push(Violation { kind, subject: subject.into(), residual });
    }
}

impl QueryProblem {
    pub fn new<I, A, B>(n: usize, unitaries: Vec<LabeledUnitary>, outputs: Vec<String>, g: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        QueryProblem {
            n,
            unitaries,
            outputs,
            g: g.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Like [`QueryProblem::new`] but rejects invalid instances.
    pub fn checked<I, A, B>(n: usize, unitaries: Vec<LabeledUnitary>, outputs: Vec<String>, g: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let p = Self::new(n, unitaries, outputs, g);
        p.ensure_valid()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// |S|.
    pub fn size(&self) -> usize {
        self.unitaries.len()
    }

    pub fn unitaries(&self) -> &[LabeledUnitary] {
        &self.unitaries
    }

    pub fn unitary(&self, x: usize) -> &CMatrix {
        &self.unitaries[x].matrix
    }

    pub fn label(&self, x: usize) -> &str {
        &self.unitaries[x].label
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn assignments(&self) -> &[(String, String)] {
        &self.g
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        if self.n == 0 {
            rep.push(ViolationKind::ZeroDimension, "n", None);
        }
        if self.unitaries.is_empty() {
            rep.push(ViolationKind::EmptyUnitarySet, "S", None);
        }
        if self.outputs.is_empty() {
            rep.push(ViolationKind::EmptyOutputSet, "T", None);
        }
        let mut seen = HashSet::new();
        for u in &self.unitaries {
            if !seen.insert(u.label.as_str()) {
                rep.push(ViolationKind::DuplicateLabel, &u.label, None);
            }
            if u.matrix.shape() != (self.n, self.n) {
                rep.push(
                    ViolationKind::WrongShape,
                    format!("{}: {}x{}", u.label, u.matrix.nrows(), u.matrix.ncols()),
                    None,
                );
                continue;
            }
            let r = unitarity_residual(&u.matrix);
            if r.is_nan() || r > UNITARITY_TOL {
                rep.push(ViolationKind::NotUnitary, &u.label, Some(r));
            }
        }
        let mut outs = HashSet::new();
        for t in &self.outputs {
            if !outs.insert(t.as_str()) {
                rep.push(ViolationKind::DuplicateOutput, t, None);
            }
        }
        let mut assigned: HashMap<&str, &str> = HashMap::new();
        for (x, z) in &self.g {
            if !seen.contains(x.as_str()) {
                rep.push(ViolationKind::UnknownLabel, x, None);
            }
            if !outs.contains(z.as_str()) {
                rep.push(ViolationKind::UnknownOutput, format!("{x} -> {z}"), None);
            }
            if let Some(prev) = assigned.insert(x, z) {
                if prev != z {
                    rep.push(ViolationKind::ConflictingAssignment, x, None);
                }
            }
        }
        for u in &self.unitaries {
            if !assigned.contains_key(u.label.as_str()) {
                rep.push(ViolationKind::MissingAssignment, &u.label, None);
            }
        }
        rep
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let rep = self.validate();
        if rep.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<String> = rep.violations.iter().map(ToString::to_string).collect();
            Err(QqcError::InvalidProblem(msgs.join("; ")))
        }
    }

    /// Output index `g(X)` for each unitary, in file order.
    pub fn assignment(&self) -> Result<Vec<usize>> {
        self.ensure_valid()?;
        let map: HashMap<&str, &str> = self.g.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        Ok(self
            .unitaries
            .iter()
            .map(|u| {
                let z = map[u.label.as_str()];
                self.outputs.iter().position(|t| t == z).unwrap_or(0)
            })
            .collect())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.unitaries.iter().position(|u| u.label == label)
    }
}

/// Ω: the block-diagonal unitary with the inputs as diagonal blocks.
pub fn build_omega(p: &QueryProblem) -> Result<CMatrix> {
    p.ensure_valid()?;
    Ok(omega_unchecked(p))
}

fn omega_unchecked(p: &QueryProblem) -> CMatrix {
    let (s, n) = (p.size(), p.n());
    let mut om = CMatrix::zeros(s * n, s * n);
    for x in 0..s {
        om.view_mut((x * n, x * n), (n, n)).copy_from(p.unitary(x));
    }
    om
}

#[derive(Clone, Debug)]
pub struct DerivedConstants {
    pub omega: CMatrix,
    pub ones_e: HermitianMatrix,
    /// Δ_z, indexed by the order of T.
    pub deltas: Vec<HermitianMatrix>,
    /// Unordered pairs `(X, Y)` with `X < Y` and `g(X) ≠ g(Y)`.
    pub relation_r: Vec<(usize, usize)>,
    pub v_mats: Vec<HermitianMatrix>,
    pub w_mats: Vec<HermitianMatrix>,
}

pub fn build_constants(p: &QueryProblem) -> Result<DerivedConstants> {
    let g = p.assignment()?;
    let s = p.size();
    let deltas = (0..p.outputs().len())
        .map(|z| {
            let d: Vec<f64> = g.iter().map(|&gz| if gz == z { 1.0 } else { 0.0 }).collect();
            HermitianMatrix::from_diagonal(&d)
        })
        .collect();
    let relation_r = relation(&g);
    let v_mats = relation_r.iter().map(|&(x, y)| pair_matrix(s, &[(x, y), (y, x)])).collect();
    let w_mats = relation_r.iter().map(|&(x, y)| pair_matrix(s, &[(x, x), (y, y)])).collect();
    Ok(DerivedConstants {
        omega: omega_unchecked(p),
        ones_e: HermitianMatrix::ones(s),
        deltas,
        relation_r,
        v_mats,
        w_mats,
    })
}

pub(crate) fn relation(g: &[usize]) -> Vec<(usize, usize)> {
    let mut r = Vec::new();
    for x in 0..g.len() {
        for y in x + 1..g.len() {
            if g[x] != g[y] {
                r.push((x, y));
            }
        }
    }
    r
}

fn pair_matrix(s: usize, entries: &[(usize, usize)]) -> HermitianMatrix {
    let mut m = CMatrix::zeros(s, s);
    for &(i, j) in entries {
        m[(i, j)] = c64(1.0, 0.0);
    }
    HermitianMatrix::new(m).unwrap_or_else(|_| HermitianMatrix::zeros(s))
}

/// Bit strings of length `m` in lexicographic order, first bit leftmost.
pub fn bit_strings(m: usize) -> Vec<Vec<bool>> {
    (0..1usize << m)
        .map(|k| (0..m).map(|i| (k >> (m - 1 - i)) & 1 == 1).collect())
        .collect()
}

pub fn bit_label(x: &[bool]) -> String {
    x.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

/// Classical phase queries: `U_x = diag((−1)^{x_1}, …, (−1)^{x_m})`.
pub fn phase_query_problem<F>(m: usize, outputs: &[&str], g_classical: F) -> Result<QueryProblem>
where
    F: Fn(&[bool]) -> usize,
{
    if m == 0 {
        return Err(QqcError::InvalidProblem("phase queries need m >= 1".into()));
    }
    let mut unitaries = Vec::new();
    let mut g = Vec::new();
    for x in bit_strings(m) {
        let label = bit_label(&x);
        let mut u = CMatrix::zeros(m, m);
        for (i, b) in x.iter().enumerate() {
            u[(i, i)] = c64(if *b { -1.0 } else { 1.0 }, 0.0);
        }
        let z = g_classical(&x);
        let out = outputs
            .get(z)
            .ok_or_else(|| QqcError::InvalidProblem(format!("output index {z} out of range")))?;
        g.push((label.clone(), out.to_string()));
        unitaries.push(LabeledUnitary::new(label, u));
    }
    QueryProblem::checked(m, unitaries, outputs.iter().map(|s| s.to_string()).collect(), g)
}

/// The four desk instances used throughout the tests.
pub mod fixtures {
    use super::*;

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)])
    }

    /// `{I₂, X}` with a single output.
    pub fn constant_g() -> QueryProblem {
        QueryProblem::new(
            2,
            vec![LabeledUnitary::new("I", CMatrix::identity(2, 2)), LabeledUnitary::new("X", pauli_x())],
            vec!["a".to_string()],
            [("I", "a"), ("X", "a")],
        )
    }

    /// Deutsch's problem on two-bit phase oracles: `g(x) = x₁ ⊕ x₂`.
    pub fn deutsch_xor2() -> QueryProblem {
        phase_query_problem(2, &["0", "1"], |x| usize::from(x[0] ^ x[1])).expect("static fixture")
    }

    /// OR of two bits with phase oracles.
    pub fn or2() -> QueryProblem {
        phase_query_problem(2, &["0", "1"], |x| usize::from(x[0] || x[1])).expect("static fixture")
    }

    /// Discriminating `I₂` from Pauli-X.
    pub fn identity_vs_x() -> QueryProblem {
        QueryProblem::new(
            2,
            vec![LabeledUnitary::new("I", CMatrix::identity(2, 2)), LabeledUnitary::new("X", pauli_x())],
            vec!["a".to_string(), "b".to_string()],
            [("I", "a"), ("X", "b")],
        )
    }

    pub fn all() -> Vec<(&'static str, QueryProblem)> {
        vec![
            ("constant-g", constant_g()),
            ("deutsch-xor2", deutsch_xor2()),
            ("or2", or2()),
            ("identity-vs-x", identity_vs_x()),
        ]
    }
}
