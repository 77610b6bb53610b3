//! Spectral adversary lower bounds for general unitary queries, together
//! with the explicit dual witness that proves them.

use log::debug;
use rand::Rng;

use crate::error::{QqcError, Result};
use crate::matlin::{c64, eig_hermitian, kron, CMatrix, HermitianMatrix, RMatrix, C64};
use crate::problem::{build_constants, build_omega, QueryProblem};
use crate::sdp::{success_constant, BlockLabel, LabeledBlocks};

const ALPHA_FLOOR: f64 = 1e-12;

/// A nonnegative symmetric weight matrix on the inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    gamma: RMatrix,
}

impl WeightMatrix {
    pub fn new(gamma: RMatrix) -> Result<Self> {
        let s = gamma.nrows();
        if gamma.ncols() != s {
            return Err(QqcError::InvalidWeights("weight matrix is not square".into()));
        }
        for i in 0..s {
            for j in 0..s {
                let v = gamma[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(QqcError::InvalidWeights(format!("entry ({i},{j}) = {v} is negative or not finite")));
                }
                if (v - gamma[(j, i)]).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(QqcError::InvalidWeights(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        if gamma.iter().all(|v| *v == 0.0) {
            return Err(QqcError::InvalidWeights("weight matrix is zero".into()));
        }
        let sym = (&gamma + gamma.transpose()) * 0.5;
        Ok(WeightMatrix { gamma: sym })
    }

    /// All ones on pairs with different outputs.
    pub fn seed(p: &QueryProblem) -> Result<Self> {
        let g = p.assignment()?;
        let s = g.len();
        let gamma = RMatrix::from_fn(s, s, |i, j| if g[i] != g[j] { 1.0 } else { 0.0 });
        if gamma.iter().all(|v| *v == 0.0) {
            return Err(QqcError::EmptyRelation);
        }
        WeightMatrix::new(gamma)
    }

    /// Independent uniform weights in (0, 1] on pairs with different outputs.
    pub fn random<R: Rng + ?Sized>(p: &QueryProblem, rng: &mut R) -> Result<Self> {
        let g = p.assignment()?;
        let s = g.len();
        let mut gamma = RMatrix::zeros(s, s);
        for i in 0..s {
            for j in i + 1..s {
                if g[i] != g[j] {
                    let v = 1.0 - rng.random::<f64>();
                    gamma[(i, j)] = v;
                    gamma[(j, i)] = v;
                }
            }
        }
        if gamma.iter().all(|v| *v == 0.0) {
            return Err(QqcError::EmptyRelation);
        }
        WeightMatrix::new(gamma)
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightMatrix::new(&self.gamma * c)
    }

    pub fn check_against(&self, p: &QueryProblem) -> Result<()> {
        let g = p.assignment()?;
        if self.dim() != g.len() {
            return Err(QqcError::DimensionMismatch(format!(
                "weight matrix of dimension {} for {} inputs",
                self.dim(),
                g.len()
            )));
        }
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g[i] == g[j] && self.gamma[(i, j)] != 0.0 {
                    return Err(QqcError::InvalidWeights(format!(
                        "entry ({}, {}) is nonzero but both inputs share an output",
                        p.label(i),
                        p.label(j)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryReport {
    pub lambda_gamma: f64,
    pub perron_v: Vec<f64>,
    pub alpha: f64,
    /// `+∞` when `alpha` vanishes.
    pub bound: f64,
    /// `None` when the bound is unbounded.
    pub ceil_bound: Option<u64>,
}

impl AdversaryReport {
    pub fn is_unbounded(&self) -> bool {
        self.bound.is_infinite()
    }
}

/// Largest eigenvalue of Γ and a unit eigenvector with nonnegative entries.
pub fn perron(gamma: &RMatrix) -> Result<(f64, Vec<f64>)> {
    let s = gamma.nrows();
    let norm = gamma.norm();
    let shift = 0.5 * norm;
    let mut v = nalgebra::DVector::from_element(s, 1.0 / (s as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let next = gamma * &v + &v * shift;
        let nn = next.norm();
        if nn == 0.0 {
            break;
        }
        let next = next / nn;
        lambda = next.dot(&(gamma * &next));
        let res = (gamma * &next - &next * lambda).norm();
        v = next;
        if res <= 1e-13 * norm.max(1.0) {
            return Ok((lambda, nonnegative_support(gamma, v.as_slice())));
        }
    }
    debug!("power iteration stalled at lambda {lambda}, projecting onto the top eigenspace");
    let eig = eig_hermitian(&HermitianMatrix::from_real(gamma)?)?;
    let top = eig.values[0];
    let mut proj = nalgebra::DVector::<f64>::zeros(s);
    for (k, &l) in eig.values.iter().enumerate() {
        if l >= top - 1e-9 * norm.max(1.0) {
            let col = eig.vectors.column(k);
            let coeff: C64 = col.iter().sum();
            for i in 0..s {
                proj[i] += (col[i] * coeff).re;
            }
        }
    }
    if proj.norm() < 1e-12 {
        return Err(QqcError::EigenNonConvergence(s));
    }
    Ok((top, nonnegative_support(gamma, proj.as_slice())))
}

/// Clips to nonnegative entries, zeroes entries on empty rows of Γ and
/// renormalizes.
fn nonnegative_support(gamma: &RMatrix, v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, x)| if gamma.row(i).iter().all(|g| *g == 0.0) { 0.0 } else { x.max(0.0) })
        .collect();
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.iter_mut().for_each(|x| *x /= norm);
    out
}

/// `Γ⊗I − Ω(Γ⊗I)Ω†`.
pub fn difference_operator(p: &QueryProblem, w: &WeightMatrix) -> Result<HermitianMatrix> {
    let omega = build_omega(p)?;
    let gi = kron(&w.gamma.map(|v| c64(v, 0.0)), &CMatrix::identity(p.n(), p.n()));
    HermitianMatrix::new(&gi - &omega * &gi * omega.adjoint())
}

fn report(lambda_gamma: f64, perron_v: Vec<f64>, alpha: f64, eps: f64) -> AdversaryReport {
    let (bound, ceil_bound) = if alpha <= ALPHA_FLOOR {
        (f64::INFINITY, None)
    } else {
        let b = (1.0 - success_constant(eps)) * lambda_gamma / alpha;
        (b, Some(b.ceil().max(0.0) as u64))
    };
    AdversaryReport { lambda_gamma, perron_v, alpha, bound, ceil_bound }
}

fn check_bound_eps(eps: f64) -> Result<()> {
    if (0.0..0.5).contains(&eps) {
        Ok(())
    } else {
        Err(QqcError::InvalidEpsilon(eps))
    }
}

pub fn spectral_bound(p: &QueryProblem, w: &WeightMatrix, eps: f64) -> Result<AdversaryReport> {
    check_bound_eps(eps)?;
    w.check_against(p)?;
    let (lambda, v) = perron(&w.gamma)?;
    let alpha = 2.0 * difference_operator(p, w)?.max_eigenvalue()?;
    Ok(report(lambda, v, alpha, eps))
}

/// The same bound on phase-query instances, evaluated one query index at a
/// time: `α = 4·max_i λ(Γ ∘ D_i)` with `D_i[X,Y] = 1` iff `X` and `Y`
/// differ at index `i`.
pub fn classical_spectral_bound(p: &QueryProblem, w: &WeightMatrix, eps: f64) -> Result<AdversaryReport> {
    check_bound_eps(eps)?;
    w.check_against(p)?;
    let s = p.size();
    let mut bits = vec![vec![false; p.n()]; s];
    for (x, row) in bits.iter_mut().enumerate() {
        let u = p.unitary(x);
        for (i, b) in row.iter_mut().enumerate() {
            let d = u[(i, i)];
            let off = (0..p.n()).any(|j| j != i && u[(i, j)].norm() > 1e-12);
            if off || d.im.abs() > 1e-12 || (d.re.abs() - 1.0).abs() > 1e-12 {
                return Err(QqcError::InvalidProblem(format!("{} is not a phase oracle", p.label(x))));
            }
            *b = d.re < 0.0;
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 0..p.n() {
        let column: Vec<bool> = bits.iter().map(|row| row[i]).collect();
        let gi = RMatrix::from_fn(s, s, |x, y| if column[x] != column[y] { w.gamma[(x, y)] } else { 0.0 });
        worst = worst.max(HermitianMatrix::from_real(&gi)?.max_eigenvalue()?);
    }
    let (lambda, v) = perron(&w.gamma)?;
    Ok(report(lambda, v, 4.0 * worst, eps))
}

/// Blocks `K_0..K_q` and `Υ_XY` of a feasible point of the relaxed dual.
pub fn make_dual_witness(p: &QueryProblem, w: &WeightMatrix, q: usize, eps: f64) -> Result<LabeledBlocks> {
    let rep = spectral_bound(p, w, eps)?;
    if (q as f64) >= rep.bound {
        return Err(QqcError::QueryCountAtOrAboveBound { q, bound: rep.bound });
    }
    let s = p.size();
    let v = &rep.perron_v;
    let k_at = |t: usize| {
        let m = RMatrix::from_fn(s, s, |x, y| {
            let base = w.gamma[(x, y)] - if x == y { t as f64 * rep.alpha } else { 0.0 };
            base * v[x] * v[y]
        });
        HermitianMatrix::from_real(&m)
    };
    let mut entries = Vec::new();
    for t in 0..=q {
        entries.push((BlockLabel::K(t), k_at(t)?));
    }
    let k0 = k_at(0)?;
    for &(x, y) in &build_constants(p)?.relation_r {
        let a = k0.get(x, y).re;
        let mut u = RMatrix::zeros(s, s);
        u[(x, x)] = a;
        u[(y, y)] = a;
        u[(x, y)] = -a;
        u[(y, x)] = -a;
        entries.push((BlockLabel::Upsilon(x, y), HermitianMatrix::from_real(&u)?));
    }
    Ok(LabeledBlocks::new(entries))
}

/// `‖Z†((M⊗E)∘X)Z − (M⊗E)∘(Z†XZ)‖_F` with `E` the all-ones `n×n` matrix.
pub fn check_block_schur_identity(z: &CMatrix, m: &CMatrix, x: &CMatrix) -> Result<f64> {
    let s = m.nrows();
    if s == 0 || m.ncols() != s || z.nrows() != z.ncols() || !z.nrows().is_multiple_of(s) || x.shape() != z.shape() {
        return Err(QqcError::DimensionMismatch("incompatible shapes in the Schur identity".into()));
    }
    let n = z.nrows() / s;
    let pattern = kron(m, &CMatrix::from_element(n, n, c64(1.0, 0.0)));
    let lhs = z.adjoint() * pattern.component_mul(x) * z;
    let rhs = pattern.component_mul(&(z.adjoint() * x * z));
    Ok((lhs - rhs).norm())
}

/// Monotone coordinate ascent on the entries of Γ supported on pairs with
/// different outputs, starting from the all-ones seed. `budget` counts
/// bound evaluations.
pub fn search_gamma(p: &QueryProblem, eps: f64, budget: usize) -> Result<(WeightMatrix, AdversaryReport)> {
    let pairs = build_constants(p)?.relation_r;
    if pairs.is_empty() {
        return Err(QqcError::EmptyRelation);
    }
    let mut best = WeightMatrix::seed(p)?;
    let mut best_rep = spectral_bound(p, &best, eps)?;
    let mut used = 1;
    if best_rep.is_unbounded() {
        return Ok((best, best_rep));
    }
    'outer: loop {
        let mut improved = false;
        for &(x, y) in &pairs {
            for factor in [2.0, 0.5] {
                if used >= budget {
                    break 'outer;
                }
                let mut g = best.gamma.clone();
                g[(x, y)] *= factor;
                g[(y, x)] *= factor;
                used += 1;
                let Ok(cand) = WeightMatrix::new(g) else { continue };
                let rep = spectral_bound(p, &cand, eps)?;
                if rep.bound > best_rep.bound * (1.0 + 1e-12) {
                    debug!("gamma search: bound {} -> {}", best_rep.bound, rep.bound);
                    best = cand;
                    best_rep = rep;
                    improved = true;
                    if best_rep.is_unbounded() {
                        break 'outer;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best, best_rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{random_complex, random_unitary};
    use crate::problem::fixtures;
    use crate::sdp::build_dual_relaxed;
    use crate::solver::verify_point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn swap2() -> WeightMatrix {
        WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()
    }

    #[test]
    fn identity_vs_x_bound() {
        let r = spectral_bound(&fixtures::identity_vs_x(), &swap2(), 0.0).unwrap();
        assert!((r.lambda_gamma - 1.0).abs() < 1e-12);
        assert!((r.alpha - 4.0).abs() < 1e-12);
        assert!((r.bound - 0.25).abs() < 1e-12);
        assert_eq!(r.ceil_bound, Some(1));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(r.perron_v.iter().all(|x| (x - h).abs() < 1e-12));
    }

    #[test]
    fn or2_bound_matches_closed_form() {
        let p = fixtures::or2();
        let r = spectral_bound(&p, &WeightMatrix::seed(&p).unwrap(), 0.0).unwrap();
        assert!((r.bound - 3f64.sqrt() / (4.0 * 2f64.sqrt())).abs() < 1e-12);
        let c = classical_spectral_bound(&p, &WeightMatrix::seed(&p).unwrap(), 0.0).unwrap();
        assert!((c.bound - r.bound).abs() < 1e-12);
    }

    #[test]
    fn weight_validation() {
        let p = fixtures::identity_vs_x();
        assert!(WeightMatrix::new(RMatrix::zeros(2, 2)).is_err());
        assert!(WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])).is_err());
        assert!(WeightMatrix::new(RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
        let diag = WeightMatrix::new(RMatrix::identity(2, 2)).unwrap();
        assert!(spectral_bound(&p, &diag, 0.0).is_err());
        assert!(spectral_bound(&p, &swap2(), 0.5).is_err());
        assert!(matches!(WeightMatrix::seed(&fixtures::constant_g()), Err(QqcError::EmptyRelation)));
    }

    #[test]
    fn unbounded_when_queries_commute() {
        let p = crate::problem::QueryProblem::checked(
            1,
            vec![
                crate::problem::LabeledUnitary::new("a", CMatrix::identity(1, 1)),
                crate::problem::LabeledUnitary::new("b", CMatrix::identity(1, 1)),
            ],
            vec!["0".into(), "1".into()],
            [("a", "0"), ("b", "1")],
        )
        .unwrap();
        let r = spectral_bound(&p, &swap2(), 0.0).unwrap();
        assert!(r.is_unbounded());
        assert_eq!(r.ceil_bound, None);
    }

    #[test]
    fn witness_passes_relaxed_dual() {
        let p = fixtures::identity_vs_x();
        let wit = make_dual_witness(&p, &swap2(), 0, 0.0).unwrap();
        let rep = verify_point(&build_dual_relaxed(&p, 0, 0.0).unwrap(), &wit).unwrap();
        assert!(rep.max_residual <= 1e-12 && rep.min_psd_eig >= -1e-12);
        assert!((rep.strict_slack.unwrap() - 1.0).abs() < 1e-12);
        assert!(make_dual_witness(&p, &swap2(), 1, 0.0).is_err());
    }

    #[test]
    fn witness_with_zero_row() {
        let p = fixtures::or2();
        let mut g = RMatrix::zeros(4, 4);
        g[(0, 1)] = 1.0;
        g[(1, 0)] = 1.0;
        g[(0, 2)] = 0.5;
        g[(2, 0)] = 0.5;
        let w = WeightMatrix::new(g).unwrap();
        let r = spectral_bound(&p, &w, 0.0).unwrap();
        assert_eq!(r.perron_v[3], 0.0);
        let wit = make_dual_witness(&p, &w, 0, 0.0).unwrap();
        let rep = verify_point(&build_dual_relaxed(&p, 0, 0.0).unwrap(), &wit).unwrap();
        assert!(rep.max_residual <= 1e-8 && rep.min_psd_eig >= -1e-8 && rep.strictly_feasible());
    }

    #[test]
    fn schur_identity_and_negative_control() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = crate::problem::build_omega(&fixtures::deutsch_xor2()).unwrap();
        let m = random_complex(&mut rng, 4, 4);
        let x = random_complex(&mut rng, 8, 8);
        assert!(check_block_schur_identity(&z, &m, &x).unwrap() < 1e-10);
        assert!(check_block_schur_identity(&CMatrix::identity(8, 8), &m, &x).unwrap() == 0.0);
        let dense = random_unitary(&mut rng, 8);
        assert!(check_block_schur_identity(&dense, &m, &x).unwrap() > 1e-3);
    }

    #[test]
    fn search_never_decreases_seed() {
        for p in [fixtures::or2(), fixtures::deutsch_xor2()] {
            let seed = spectral_bound(&p, &WeightMatrix::seed(&p).unwrap(), 0.0).unwrap().bound;
            let (_, r) = search_gamma(&p, 0.0, 60).unwrap();
            assert!(r.bound >= seed - 1e-12);
        }
        assert!(matches!(search_gamma(&fixtures::constant_g(), 0.0, 10), Err(QqcError::EmptyRelation)));
    }
}
