//! Turning a feasible primal point into an explicit query algorithm.
//!
//! The final Gram matrix is factored into vectors, the output blocks
//! become a POVM on their span which is then extended to a projective
//! measurement, and the inter-query unitaries are recovered backwards by
//! aligning purifications of consecutive chain states.

use log::debug;

use crate::error::{QqcError, Result};
use crate::matlin::{
    align_purifications, c64, coefficient_matrix, complete_unitary, eig_hermitian, flatten_coefficients, kron,
    naimark_extend, spectral_map, unitarity_residual, CMatrix, CVector, HermitianMatrix,
};
use crate::problem::{build_omega, QueryProblem};
use crate::sdp::{build_output_program, build_primal, BlockLabel, LabeledBlocks};
use crate::solver::{solve, verify_point, FeasibilityStatus, SolverConfig};

/// Unitaries `U_0..U_q` on `Q⊗W` (workspace index fastest) and one output
/// projector per output label.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumQueryAlgorithm {
    pub n: usize,
    pub w_dim: usize,
    pub unitaries: Vec<CMatrix>,
    pub outputs: Vec<String>,
    pub projectors: Vec<CMatrix>,
}

impl QuantumQueryAlgorithm {
    pub fn queries(&self) -> usize {
        self.unitaries.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.n * self.w_dim
    }

    /// Largest deviation from unitarity, projector idempotence, pairwise
    /// orthogonality and completeness.
    pub fn structure_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for u in &self.unitaries {
            worst = worst.max(unitarity_residual(u));
        }
        let mut total = CMatrix::zeros(d, d);
        for (a, p) in self.projectors.iter().enumerate() {
            if p.shape() != (d, d) {
                return f64::INFINITY;
            }
            worst = worst.max((p * p - p).norm()).max((p - p.adjoint()).norm());
            for q in &self.projectors[a + 1..] {
                worst = worst.max((p * q).norm());
            }
            total += p;
        }
        worst.max((total - CMatrix::identity(d, d)).norm())
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.unitaries.is_empty() || self.unitaries.iter().any(|u| u.shape() != (d, d)) {
            return Err(QqcError::DimensionMismatch(format!("unitaries must be {d}x{d}")));
        }
        if self.projectors.len() != self.outputs.len() || self.projectors.is_empty() {
            return Err(QqcError::DimensionMismatch("one projector per output required".into()));
        }
        let r = self.structure_residual();
        if r > tol {
            return Err(QqcError::Reconstruction(format!("algorithm structure residual {r:.3e}")));
        }
        Ok(())
    }
}

/// Vectors reproducing a Gram matrix together with a projective
/// measurement on their span.
#[derive(Clone, Debug)]
pub struct FinalStates {
    pub dim: usize,
    /// `⟨Ψ_X|Ψ_Y⟩ = M[X,Y]`.
    pub vectors: Vec<CVector>,
    pub projectors: Vec<CMatrix>,
}

/// Solves the output program for a fixed Gram matrix. `Ok(None)` means the
/// program was certified infeasible.
pub fn solve_output_sdp(
    assignment: &[usize],
    num_outputs: usize,
    eps: f64,
    m: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<Option<Vec<HermitianMatrix>>> {
    let prog = build_output_program(assignment, num_outputs, eps, m)?;
    let out = solve(&prog, cfg)?;
    match out.status {
        FeasibilityStatus::Feasible => {
            let point = out.point.ok_or_else(|| QqcError::Reconstruction("feasible outcome without point".into()))?;
            (0..num_outputs).map(|z| point.require(BlockLabel::Gamma(z)).cloned()).collect::<Result<_>>().map(Some)
        }
        FeasibilityStatus::InfeasibleWithCertificate => Ok(None),
        FeasibilityStatus::Undecided => Err(QqcError::SolverUndecided(out.iterations)),
    }
}

pub fn extract_final_states(
    m: &HermitianMatrix,
    gammas: &[HermitianMatrix],
    assignment: &[usize],
    eps: f64,
) -> Result<FinalStates> {
    let s = m.dim();
    if assignment.len() != s || gammas.iter().any(|g| g.dim() != s) || gammas.is_empty() {
        return Err(QqcError::DimensionMismatch("output blocks do not match the Gram matrix".into()));
    }
    let e = eig_hermitian(m)?;
    let top = e.values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(QqcError::RankEstimation("Gram matrix has no positive eigenvalue".into()));
    }
    let lmin = e.values.last().copied().unwrap_or(0.0);
    if lmin < -1e-6 * top {
        return Err(QqcError::RankEstimation(format!("Gram matrix has eigenvalue {lmin:.3e}")));
    }
    let support: Vec<usize> = (0..s).filter(|&k| e.values[k] > 1e-10 * top).collect();
    let r = support.len();
    let mut ur = CMatrix::zeros(s, r);
    for (c, &k) in support.iter().enumerate() {
        ur.set_column(c, &e.vectors.column(k));
    }
    let inv_sqrt = CMatrix::from_diagonal(&CVector::from_iterator(
        r,
        support.iter().map(|&k| c64(1.0 / e.values[k].sqrt(), 0.0)),
    ));
    let raw: Vec<HermitianMatrix> = gammas
        .iter()
        .map(|g| HermitianMatrix::new(&inv_sqrt * ur.adjoint() * g.as_matrix() * &ur * &inv_sqrt))
        .collect::<Result<_>>()?;
    let mut total = HermitianMatrix::zeros(r);
    for x in &raw {
        total = total.add(x);
    }
    if total.min_eigenvalue()? <= 0.0 {
        return Err(QqcError::RankEstimation("output blocks do not cover the Gram support".into()));
    }
    let norm = spectral_map(&total, |l| 1.0 / l.sqrt())?;
    let povm: Vec<HermitianMatrix> = raw
        .iter()
        .map(|x| HermitianMatrix::new(norm.as_matrix() * x.as_matrix() * norm.as_matrix()))
        .collect::<Result<_>>()?;
    let ext = naimark_extend(&povm, 1e-12)?;

    let vectors: Vec<CVector> = (0..s)
        .map(|x| {
            let theta = CVector::from_iterator(
                r,
                support.iter().map(|&k| e.vectors[(x, k)].conj() * e.values[k].sqrt()),
            );
            &ext.isometry * theta
        })
        .collect();

    let gram = CMatrix::from_fn(s, s, |x, y| vectors[x].dotc(&vectors[y]));
    let gram_err = (gram - m.as_matrix()).norm();
    if gram_err > 1e-6 {
        return Err(QqcError::Reconstruction(format!("final-state Gram deviation {gram_err:.3e}")));
    }
    for (x, &z) in assignment.iter().enumerate() {
        let v = &vectors[x];
        let p = v.dotc(&(&ext.projectors[z] * v)).re;
        if p < 1.0 - eps - 1e-6 {
            return Err(QqcError::Reconstruction(format!("input {x} succeeds with probability {p:.9}")));
        }
    }
    Ok(FinalStates { dim: ext.dim, vectors, projectors: ext.projectors })
}

/// `max(|S|·n, ⌈D/n⌉)`.
pub fn workspace_dim(s: usize, n: usize, final_dim: usize) -> usize {
    (s * n).max(final_dim.div_ceil(n))
}

/// Canonical purification of `σ` into a register of dimension `w`, as an
/// `σ.dim() × w` coefficient matrix.
fn canonical_purification(sigma: &HermitianMatrix, w: usize) -> Result<CMatrix> {
    let e = eig_hermitian(sigma)?;
    let d = sigma.dim();
    if d > w {
        return Err(QqcError::WorkspaceTooSmall { needed: d, available: w });
    }
    let mut chi = CMatrix::zeros(d, w);
    for k in 0..d {
        let mu = e.values[k].max(0.0).sqrt();
        for a in 0..d {
            chi[(a, k)] = e.vectors[(a, k)] * mu;
        }
    }
    Ok(chi)
}

/// Recovers the unitaries from the chain `ρ^{IQ}(0..q−1)` (density
/// convention) and final states whose Gram matrix is `conj(ρ^I(q))`.
pub fn backward_chain(
    p: &QueryProblem,
    q: usize,
    rho_iq: &[HermitianMatrix],
    final_states: &FinalStates,
    tol: f64,
) -> Result<QuantumQueryAlgorithm> {
    let (s, n) = (p.size(), p.n());
    if rho_iq.len() != q || rho_iq.iter().any(|r| r.dim() != s * n) {
        return Err(QqcError::DimensionMismatch(format!("expected {q} chain blocks of dimension {}", s * n)));
    }
    if final_states.vectors.len() != s || final_states.projectors.is_empty() {
        return Err(QqcError::DimensionMismatch("one final state per input required".into()));
    }
    let w = workspace_dim(s, n, final_states.dim);
    let nw = n * w;
    let omega = build_omega(p)?;
    let omega_w_adj = kron(&omega, &CMatrix::identity(w, w)).adjoint();

    let mut psi = CMatrix::zeros(s, nw);
    for (x, v) in final_states.vectors.iter().enumerate() {
        for k in 0..final_states.dim {
            psi[(x, k)] = v[k];
        }
    }

    let mut unitaries = vec![CMatrix::identity(nw, nw); q + 1];
    for t in (1..=q).rev() {
        let sigma = HermitianMatrix::new(&omega * rho_iq[t - 1].as_matrix() * omega.adjoint())?;
        let chi = canonical_purification(&sigma, w)?;
        // rows (X, i) of the IQ × W coefficient matrix, regrouped as I × QW
        let target = flatten_coefficients(&chi);
        let current = flatten_coefficients(&psi);
        let u = align_purifications(&current, &target, s, nw, tol)?;
        let aligned = kron(&CMatrix::identity(s, s), &u) * current;
        let back = &omega_w_adj * aligned;
        psi = coefficient_matrix(&back, s, nw);
        unitaries[t] = u.adjoint();
        debug!("chain step {t}: aligned");
    }

    let mut chi0 = CVector::zeros(nw);
    for x in 0..s {
        chi0 += psi.row(x).transpose();
    }
    let norm = chi0.norm();
    if norm < 1e-9 {
        return Err(QqcError::Reconstruction("initial states cancel".into()));
    }
    chi0 /= c64(norm, 0.0);
    let spread = (0..s)
        .map(|x| {
            let row = psi.row(x).transpose();
            (1.0 - chi0.dotc(&row).norm_sqr() / row.norm_squared().max(f64::MIN_POSITIVE)).abs()
        })
        .fold(0.0, f64::max);
    if spread > tol {
        return Err(QqcError::PurificationMismatch(spread));
    }
    unitaries[0] = complete_unitary(&CMatrix::from_column_slice(nw, 1, chi0.as_slice()))?;

    let mut projectors = Vec::with_capacity(final_states.projectors.len());
    let mut covered = CMatrix::zeros(nw, nw);
    for pz in &final_states.projectors {
        let mut big = CMatrix::zeros(nw, nw);
        big.view_mut((0, 0), (final_states.dim, final_states.dim)).copy_from(pz);
        covered += &big;
        projectors.push(big);
    }
    projectors[0] += CMatrix::identity(nw, nw) - covered;

    let alg = QuantumQueryAlgorithm { n, w_dim: w, unitaries, outputs: p.outputs().to_vec(), projectors };
    alg.validate(1e-8)?;
    Ok(alg)
}

const CHAIN_TOL: f64 = 1e-11;

/// A reconstructed algorithm together with the cleaned primal point it came from.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub algorithm: QuantumQueryAlgorithm,
    pub point: LabeledBlocks,
    pub final_dim: usize,
}

/// Symmetrizes and PSD-projects every block, then re-verifies the primal at
/// ten times the solver tolerance.
pub fn clean_primal_point(
    p: &QueryProblem,
    q: usize,
    eps: f64,
    point: &LabeledBlocks,
    feas_tol: f64,
) -> Result<LabeledBlocks> {
    let prog = build_primal(p, q, eps)?;
    let cleaned = LabeledBlocks::new(
        point.entries.iter().map(|(l, m)| Ok((*l, m.psd_part()?))).collect::<Result<Vec<_>>>()?,
    );
    let rep = verify_point(&prog, &cleaned)?;
    if !rep.satisfies(10.0 * feas_tol) {
        return Err(QqcError::Reconstruction(format!(
            "cleaned primal point violates the program by {:.3e}",
            rep.max_residual.max(-rep.min_psd_eig)
        )));
    }
    Ok(cleaned)
}

pub fn reconstruct_from_point(
    p: &QueryProblem,
    q: usize,
    eps: f64,
    point: &LabeledBlocks,
    feas_tol: f64,
) -> Result<Reconstruction> {
    let point = clean_primal_point(p, q, eps, point, feas_tol)?;
    let assignment = p.assignment()?;
    let rho_final = point.require(BlockLabel::RhoIFinal)?;
    let gram = conjugate(rho_final)?;
    let gammas: Vec<HermitianMatrix> = (0..p.outputs().len())
        .map(|z| conjugate(point.require(BlockLabel::Gamma(z))?))
        .collect::<Result<_>>()?;
    let finals = extract_final_states(&gram, &gammas, &assignment, eps)?;
    let chain: Vec<HermitianMatrix> =
        (0..q).map(|t| point.require(BlockLabel::RhoIq(t)).cloned()).collect::<Result<_>>()?;
    let algorithm = backward_chain(p, q, &chain, &finals, 1e-4)?;
    Ok(Reconstruction { algorithm, point, final_dim: finals.dim })
}

/// Solves the primal to at least `CHAIN_TOL` and reconstructs an algorithm
/// from its solution.
pub fn reconstruct(p: &QueryProblem, q: usize, eps: f64, cfg: &SolverConfig) -> Result<Reconstruction> {
    let cfg = &SolverConfig { feas_tol: cfg.feas_tol.min(CHAIN_TOL), ..cfg.clone() };
    let out = solve(&build_primal(p, q, eps)?, cfg)?;
    match out.status {
        FeasibilityStatus::Feasible => {
            let point = out.point.ok_or_else(|| QqcError::Reconstruction("feasible outcome without point".into()))?;
            reconstruct_from_point(p, q, eps, &point, cfg.feas_tol)
        }
        FeasibilityStatus::InfeasibleWithCertificate => Err(QqcError::Infeasible),
        FeasibilityStatus::Undecided => Err(QqcError::SolverUndecided(out.iterations)),
    }
}

fn conjugate(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    HermitianMatrix::new(m.as_matrix().map(|z| z.conj()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures;

    #[test]
    fn orthogonal_states_are_discriminated() {
        let m = HermitianMatrix::identity(2);
        let gammas = vec![
            HermitianMatrix::from_diagonal(&[1.0, 0.0]),
            HermitianMatrix::from_diagonal(&[0.0, 1.0]),
        ];
        let f = extract_final_states(&m, &gammas, &[0, 1], 0.0).unwrap();
        assert_eq!(f.dim, 2);
        for (x, v) in f.vectors.iter().enumerate() {
            let p = v.dotc(&(&f.projectors[x] * v)).re;
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_ones_gram_cannot_separate_outputs() {
        let m = HermitianMatrix::ones(2);
        let cfg = SolverConfig::default();
        assert!(solve_output_sdp(&[0, 1], 2, 0.0, &m, &cfg).unwrap().is_none());
        let g = solve_output_sdp(&[0, 0], 1, 0.0, &m, &cfg).unwrap().unwrap();
        assert!(g[0].sub(&m).frobenius() < 1e-6);
    }

    #[test]
    fn constant_problem_gives_trivial_algorithm() {
        let p = fixtures::constant_g();
        let r = reconstruct(&p, 0, 0.0, &SolverConfig::default()).unwrap();
        let alg = r.algorithm;
        assert_eq!(alg.queries(), 0);
        assert!((&alg.projectors[0] - CMatrix::identity(alg.dim(), alg.dim())).norm() < 1e-8);
        assert!(alg.w_dim <= workspace_dim(2, 2, 2));
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let p = fixtures::deutsch_xor2();
        assert!(matches!(reconstruct(&p, 0, 0.0, &SolverConfig::default()), Err(QqcError::Infeasible)));
    }

    #[test]
    fn workspace_formula() {
        assert_eq!(workspace_dim(4, 2, 8), 8);
        assert_eq!(workspace_dim(2, 1, 5), 5);
        assert_eq!(workspace_dim(2, 2, 9), 5);
    }
}
