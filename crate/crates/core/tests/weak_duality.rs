use proptest::prelude::*;
use qqc_core::matlin::{random_psd, HermitianMatrix};
use qqc_core::problem::{build_constants, build_omega, fixtures};
use qqc_core::sdp::{build_primal, ConeKind};
use qqc_core::solver::{solve, weak_duality_check, FeasibilityStatus, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multipliers for the rows of `build_primal(p, q, eps)` whose adjoint image
/// is PSD on every block, built backwards from the output rows.
fn random_cone_feasible_multipliers(p: &qqc_core::problem::QueryProblem, q: usize, seed: u64) -> Vec<HermitianMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, n) = (p.size(), p.n());
    let consts = build_constants(p).unwrap();
    let omega = build_omega(p).unwrap();
    let t = consts.deltas.len();

    let outs: Vec<HermitianMatrix> = (0..t).map(|_| random_psd(&mut rng, s, s).scale(-1.0)).collect();
    let worst_diag = outs
        .iter()
        .flat_map(|y| (0..s).map(move |i| -y.get(i, i).re))
        .fold(0.0, f64::max);
    let decomposition = random_psd(&mut rng, s, s).add(&HermitianMatrix::identity(s).scale(worst_diag));
    let mut chain = vec![HermitianMatrix::zeros(s); q + 1];
    chain[q] = decomposition.add(&random_psd(&mut rng, s, 2));
    for k in (0..q).rev() {
        let lifted = qqc_core::matlin::kron(chain[k + 1].as_matrix(), &qqc_core::matlin::CMatrix::identity(n, n));
        let top = HermitianMatrix::new(omega.adjoint() * lifted * &omega).unwrap().max_eigenvalue().unwrap();
        chain[k] = HermitianMatrix::identity(s).scale(top).add(&random_psd(&mut rng, s, 1));
    }
    let mut y = chain;
    y.push(decomposition);
    y.extend(outs);
    y
}

#[test]
fn zero_multipliers_give_zero() {
    let p = fixtures::deutsch_xor2();
    let prog = build_primal(&p, 1, 0.0).unwrap();
    let point = solve(&prog, &SolverConfig::default()).unwrap().point.unwrap();
    let zeros: Vec<HermitianMatrix> = prog.rows.iter().map(|r| HermitianMatrix::zeros(r.dim())).collect();
    assert_eq!(weak_duality_check(&point, &zeros, &prog).unwrap(), 0.0);
}

#[test]
fn certificate_value_is_negative() {
    let p = fixtures::deutsch_xor2();
    let prog = build_primal(&p, 0, 0.0).unwrap();
    let out = solve(&prog, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, FeasibilityStatus::InfeasibleWithCertificate);
    let cert = out.certificate.unwrap();
    let zeros = prog.label_blocks(prog.block_dims().into_iter().map(HermitianMatrix::zeros).collect());
    let v = weak_duality_check(&zeros, &cert.multipliers.matrices(), &prog).unwrap();
    assert!(v <= -1e-6);
    assert!((v - cert.value).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_primal_pairs_nonnegatively(seed in any::<u64>(), which in 0usize..2, q in 1usize..3) {
        let p = if which == 0 { fixtures::deutsch_xor2() } else { fixtures::identity_vs_x() };
        let prog = build_primal(&p, q, 0.1).unwrap();
        let point = solve(&prog, &SolverConfig::default()).unwrap().point.unwrap();
        let y = random_cone_feasible_multipliers(&p, q, seed);
        let image = prog.adjoint_apply(&y).unwrap();
        for (blk, cone) in image.iter().zip(&prog.variable_cone.blocks) {
            prop_assert_eq!(cone.kind, ConeKind::Psd);
            prop_assert!(blk.min_eigenvalue().unwrap() >= -1e-9);
        }
        let scale: f64 = y.iter().map(|m| m.frobenius()).sum();
        let v = weak_duality_check(&point, &y, &prog).unwrap();
        prop_assert!(v >= -1e-6 * scale.max(1.0), "value {}", v);
    }
}
