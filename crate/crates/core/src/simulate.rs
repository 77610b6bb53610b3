//! Exact statevector execution of query algorithms.

use crate::error::{QqcError, Result};
use crate::matlin::{c64, flatten_coefficients, kron, partial_trace, CMatrix, CVector, Factor, HermitianMatrix, TensorIndex};
use crate::problem::{build_constants, build_omega, QueryProblem};
use crate::reconstruct::QuantumQueryAlgorithm;
use crate::sdp::{BlockLabel, LabeledBlocks};

#[derive(Clone, Debug)]
pub struct SimulationTrace {
    /// `states[X][t] = |Φ_X(t)⟩`, taken after `U_t`.
    pub states: Vec<Vec<CVector>>,
    /// `gram[t][X,Y] = ⟨Φ_X(t)|Φ_Y(t)⟩`.
    pub gram: Vec<CMatrix>,
    /// `probabilities[X][z] = ⟨Φ_X(q)|P_z|Φ_X(q)⟩`.
    pub probabilities: Vec<Vec<f64>>,
}

impl SimulationTrace {
    pub fn queries(&self) -> usize {
        self.gram.len().saturating_sub(1)
    }

    pub fn final_gram(&self) -> &CMatrix {
        self.gram.last().expect("trace has at least one step")
    }
}

fn check_dims(alg: &QuantumQueryAlgorithm, p: &QueryProblem) -> Result<()> {
    if alg.n != p.n() {
        return Err(QqcError::DimensionMismatch(format!("algorithm acts on n = {}, problem has n = {}", alg.n, p.n())));
    }
    let d = alg.dim();
    if d == 0 || alg.unitaries.is_empty() || alg.unitaries.iter().any(|u| u.shape() != (d, d)) {
        return Err(QqcError::DimensionMismatch(format!("unitaries must be {d}x{d}")));
    }
    if alg.projectors.is_empty() || alg.projectors.iter().any(|m| m.shape() != (d, d)) {
        return Err(QqcError::DimensionMismatch(format!("projectors must be {d}x{d}")));
    }
    Ok(())
}

pub fn run(alg: &QuantumQueryAlgorithm, p: &QueryProblem) -> Result<SimulationTrace> {
    check_dims(alg, p)?;
    let d = alg.dim();
    let id_w = CMatrix::identity(alg.w_dim, alg.w_dim);
    let mut start = CVector::zeros(d);
    start[0] = c64(1.0, 0.0);
    let mut states = Vec::with_capacity(p.size());
    let mut probabilities = Vec::with_capacity(p.size());
    for x in 0..p.size() {
        let query = kron(p.unitary(x), &id_w);
        let mut phi = &alg.unitaries[0] * &start;
        let mut per_t = vec![phi.clone()];
        for u in &alg.unitaries[1..] {
            phi = u * (&query * phi);
            per_t.push(phi.clone());
        }
        probabilities.push(alg.projectors.iter().map(|pz| phi.dotc(&(pz * &phi)).re).collect());
        states.push(per_t);
    }
    let steps = alg.unitaries.len();
    let gram = (0..steps)
        .map(|t| CMatrix::from_fn(p.size(), p.size(), |x, y| states[x][t].dotc(&states[y][t])))
        .collect();
    Ok(SimulationTrace { states, gram, probabilities })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessReport {
    pub per_input: Vec<f64>,
    pub min_success: f64,
    pub worst_input: usize,
    pub pass: bool,
}

pub fn success_report(trace: &SimulationTrace, p: &QueryProblem, eps: f64) -> Result<SuccessReport> {
    let g = p.assignment()?;
    if trace.probabilities.len() != g.len() {
        return Err(QqcError::DimensionMismatch("trace and problem disagree on the inputs".into()));
    }
    let per_input: Vec<f64> = g
        .iter()
        .zip(&trace.probabilities)
        .map(|(&z, probs)| probs.get(z).copied().unwrap_or(0.0))
        .collect();
    let (worst_input, min_success) = per_input
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 1.0));
    Ok(SuccessReport { per_input, min_success, worst_input, pass: min_success >= 1.0 - eps - 1e-6 })
}

#[derive(Clone, Debug)]
pub struct ExtendedState {
    /// `Σ_X |X⟩|Φ_X(t)⟩` on `I⊗Q⊗W`.
    pub psi: CVector,
    pub rho_iq: HermitianMatrix,
    pub rho_i: HermitianMatrix,
}

/// The state of the computer with an explicit input register, evolved with
/// `Ω` on the whole input-query space.
pub fn extended_state(p: &QueryProblem, alg: &QuantumQueryAlgorithm, t: usize) -> Result<ExtendedState> {
    check_dims(alg, p)?;
    if t > alg.queries() {
        return Err(QqcError::DimensionMismatch(format!("step {t} beyond {} queries", alg.queries())));
    }
    let (s, n, w) = (p.size(), p.n(), alg.w_dim);
    let id_s = CMatrix::identity(s, s);
    let omega_w = kron(&build_omega(p)?, &CMatrix::identity(w, w));
    let mut psi = CVector::zeros(s * n * w);
    for x in 0..s {
        psi[x * n * w] = c64(1.0, 0.0);
    }
    psi = kron(&id_s, &alg.unitaries[0]) * psi;
    for u in &alg.unitaries[1..=t] {
        psi = kron(&id_s, u) * (&omega_w * psi);
    }
    let full = HermitianMatrix::new(&psi * psi.adjoint())?;
    let rho_iq = partial_trace(&full, &TensorIndex::pair(s * n, w)?, Factor::Fast)?;
    let rho_i = partial_trace(&rho_iq, &TensorIndex::pair(s, n)?, Factor::Fast)?;
    Ok(ExtendedState { psi, rho_iq, rho_i })
}

/// A point of the primal program built from a simulated algorithm: the
/// chain states from the explicit-input evolution, and the output blocks
/// `Γ_z[X,Y] = ⟨Φ_Y|P_z|Φ_X⟩` with `Π_z = Δ_z*Γ_z − (1−ε)Δ_z`.
pub fn primal_point_from_trace(
    p: &QueryProblem,
    alg: &QuantumQueryAlgorithm,
    trace: &SimulationTrace,
    eps: f64,
) -> Result<LabeledBlocks> {
    let q = alg.queries();
    let s = p.size();
    let mut entries = Vec::new();
    for t in 0..q {
        entries.push((BlockLabel::RhoIq(t), extended_state(p, alg, t)?.rho_iq));
    }
    entries.push((BlockLabel::RhoIFinal, extended_state(p, alg, q)?.rho_i));
    let deltas = build_constants(p)?.deltas;
    let finals: Vec<&CVector> = trace.states.iter().map(|st| st.last().expect("nonempty trace")).collect();
    let mut gammas = Vec::new();
    for pz in &alg.projectors {
        let g = CMatrix::from_fn(s, s, |x, y| finals[y].dotc(&(pz * finals[x])));
        gammas.push(HermitianMatrix::new(g)?);
    }
    for (z, g) in gammas.iter().enumerate() {
        entries.push((BlockLabel::Gamma(z), g.clone()));
    }
    for (z, g) in gammas.iter().enumerate() {
        let masked = HermitianMatrix::new(g.as_matrix().component_mul(deltas[z].as_matrix()))?;
        entries.push((BlockLabel::Pi(z), masked.sub(&deltas[z].scale(1.0 - eps))));
    }
    Ok(LabeledBlocks::new(entries))
}

/// Coefficients of `Σ_X |X⟩|Φ_X⟩` read off per-input states.
pub fn extended_from_states(states: &[CVector]) -> CVector {
    let d = states.first().map_or(0, |v| v.len());
    let m = CMatrix::from_fn(states.len(), d, |x, k| states[x][k]);
    flatten_coefficients(&m)
}
