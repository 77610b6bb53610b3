use qqc_core::matlin::HermitianMatrix;
use qqc_core::problem::fixtures;
use qqc_core::sdp::{build_dual, build_primal, build_primal_relaxed, build_dual_relaxed, BlockLabel};
use qqc_core::solver::{solve, verify_point, FeasibilityStatus, SolverConfig};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn constant_problem_needs_no_queries() {
    let out = solve(&build_primal(&fixtures::constant_g(), 0, 0.0).unwrap(), &cfg()).unwrap();
    assert_eq!(out.status, FeasibilityStatus::Feasible);
}

#[test]
fn deutsch_one_query_is_feasible_and_its_dual_is_not() {
    let p = fixtures::deutsch_xor2();
    let primal = build_primal(&p, 1, 0.0).unwrap();
    let out = solve(&primal, &cfg()).unwrap();
    assert_eq!(out.status, FeasibilityStatus::Feasible);
    let rep = verify_point(&primal, out.point.as_ref().unwrap()).unwrap();
    assert!(rep.satisfies(1e-7));
    let dual = solve(&build_dual(&p, 1, 0.0).unwrap(), &cfg()).unwrap();
    assert_ne!(dual.status, FeasibilityStatus::Feasible);
}

#[test]
fn deutsch_zero_queries_certificate_is_a_dual_point() {
    let p = fixtures::deutsch_xor2();
    let out = solve(&build_primal(&p, 0, 0.0).unwrap(), &cfg()).unwrap();
    assert_eq!(out.status, FeasibilityStatus::InfeasibleWithCertificate);
    let cert = out.certificate.unwrap();
    assert!(cert.value <= -1e-6);
    let dual_point = cert.dual_point.unwrap();
    assert!(dual_point.get(BlockLabel::L(0)).is_some());
    let rep = verify_point(&build_dual(&p, 0, 0.0).unwrap(), &dual_point).unwrap();
    assert!(rep.max_residual <= 1e-6, "{rep:?}");
    assert!(rep.min_psd_eig >= -1e-6);
    assert!(rep.strictly_feasible());
}

#[test]
fn relaxed_certificate_is_a_relaxed_dual_point() {
    let p = fixtures::identity_vs_x();
    let out = solve(&build_primal_relaxed(&p, 0, 0.0).unwrap(), &cfg()).unwrap();
    assert_eq!(out.status, FeasibilityStatus::InfeasibleWithCertificate);
    let dual_point = out.certificate.unwrap().dual_point.unwrap();
    let rep = verify_point(&build_dual_relaxed(&p, 0, 0.0).unwrap(), &dual_point).unwrap();
    assert!(rep.max_residual <= 1e-6 && rep.min_psd_eig >= -1e-6 && rep.strictly_feasible(), "{rep:?}");
}

#[test]
fn exclusivity_on_the_fixture_grid() {
    for (name, p) in fixtures::all() {
        for q in 0..=2 {
            for eps in [0.0, 0.1] {
                let a = solve(&build_primal(&p, q, eps).unwrap(), &cfg()).unwrap();
                let b = solve(&build_dual(&p, q, eps).unwrap(), &cfg()).unwrap();
                assert!(
                    !(a.status == FeasibilityStatus::Feasible && b.status == FeasibilityStatus::Feasible),
                    "{name} q={q} eps={eps}"
                );
                assert_ne!(a.status, FeasibilityStatus::Undecided, "{name} q={q} eps={eps}");
                assert_ne!(b.status, FeasibilityStatus::Undecided, "{name} q={q} eps={eps}");
            }
        }
    }
}

#[test]
fn feasibility_is_monotone_in_queries_and_error() {
    for (name, p) in fixtures::all() {
        let feasible = |q: usize, eps: f64| {
            solve(&build_primal(&p, q, eps).unwrap(), &cfg()).unwrap().status == FeasibilityStatus::Feasible
        };
        for eps in [0.0, 0.1] {
            for q in 0..=2 {
                if feasible(q, eps) {
                    assert!(feasible(q + 1, eps), "{name}: q={q} eps={eps} but not q+1");
                    assert!(feasible(q, eps + 0.15), "{name}: q={q} eps={eps} but not larger eps");
                }
            }
        }
    }
}

#[test]
fn verification_of_solver_points_is_idempotent() {
    let p = fixtures::identity_vs_x();
    for q in 1..=2 {
        let prog = build_primal(&p, q, 0.1).unwrap();
        let out = solve(&prog, &cfg()).unwrap();
        let point = out.point.unwrap();
        let first = verify_point(&prog, &point).unwrap();
        assert!(first.satisfies(1e-7));
        assert_eq!(first, verify_point(&prog, &point).unwrap());
        assert_eq!(first.row_residuals, out.residuals);
    }
}

#[test]
fn solving_is_deterministic_given_a_seed() {
    let prog = build_primal(&fixtures::deutsch_xor2(), 1, 0.1).unwrap();
    let c = SolverConfig::with_seed(42);
    let a = solve(&prog, &c).unwrap();
    let b = solve(&prog, &c).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.point, b.point);
}

#[test]
fn mismatched_point_is_rejected() {
    let prog = build_primal(&fixtures::deutsch_xor2(), 1, 0.0).unwrap();
    let mut point = prog.label_blocks(prog.block_dims().into_iter().map(HermitianMatrix::zeros).collect());
    point.entries[0].1 = HermitianMatrix::zeros(3);
    assert!(verify_point(&prog, &point).is_err());
}
