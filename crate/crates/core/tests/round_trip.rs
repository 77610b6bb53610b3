use qqc_core::matlin::{c64, CMatrix};
use qqc_core::problem::fixtures;
use qqc_core::reconstruct::{reconstruct, solve_output_sdp, workspace_dim};
use qqc_core::sdp::{build_primal, success_constant};
use qqc_core::simulate::{extended_state, primal_point_from_trace, run, success_report};
use qqc_core::solver::{solve, verify_point, FeasibilityStatus, SolverConfig};
use qqc_core::QqcError;

#[test]
fn every_feasible_grid_point_round_trips() {
    let cfg = SolverConfig::default();
    let mut checked = 0;
    for (name, p) in fixtures::all() {
        let (s, n, t) = (p.size(), p.n(), p.outputs().len());
        for q in 0..=2 {
            for eps in [0.0, 0.1] {
                let prog = build_primal(&p, q, eps).unwrap();
                if solve(&prog, &cfg).unwrap().status != FeasibilityStatus::Feasible {
                    assert!(matches!(reconstruct(&p, q, eps, &cfg), Err(QqcError::Infeasible)));
                    continue;
                }
                let r = reconstruct(&p, q, eps, &cfg).unwrap();
                let alg = &r.algorithm;
                assert!(alg.w_dim <= workspace_dim(s, n, s * t), "{name} q={q}");
                let trace = run(alg, &p).unwrap();
                let rep = success_report(&trace, &p, eps).unwrap();
                assert!(rep.min_success >= 1.0 - eps - 1e-6, "{name} q={q} eps={eps}: {}", rep.min_success);
                let point = primal_point_from_trace(&p, alg, &trace, eps).unwrap();
                let v = verify_point(&prog, &point).unwrap();
                assert!(v.satisfies(1e-6), "{name} q={q} eps={eps}: {v:?}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 8);
}

#[test]
fn simulated_gram_matches_input_register() {
    let p = fixtures::deutsch_xor2();
    let r = reconstruct(&p, 2, 0.1, &SolverConfig::default()).unwrap();
    let trace = run(&r.algorithm, &p).unwrap();
    for t in 0..=2 {
        let ext = extended_state(&p, &r.algorithm, t).unwrap();
        let dev = (ext.rho_i.as_matrix() - trace.gram[t].transpose()).norm();
        assert!(dev <= 1e-10, "t={t}: {dev}");
        assert!((ext.rho_iq.trace() - 4.0).abs() < 1e-9);
        for x in 0..4 {
            assert!((trace.states[x][t].norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_versus_x_discriminator_has_orthogonal_final_states() {
    let p = fixtures::identity_vs_x();
    let r = reconstruct(&p, 1, 0.0, &SolverConfig::default()).unwrap();
    let trace = run(&r.algorithm, &p).unwrap();
    let id = CMatrix::identity(2, 2);
    assert!((trace.final_gram() - id).norm() < 1e-5);
}

#[test]
fn successful_algorithms_satisfy_output_and_overlap_conditions() {
    let cfg = SolverConfig::default();
    for (p, q, eps) in [(fixtures::deutsch_xor2(), 1, 0.0), (fixtures::identity_vs_x(), 1, 0.1)] {
        let r = reconstruct(&p, q, eps, &cfg).unwrap();
        let trace = run(&r.algorithm, &p).unwrap();
        assert!(success_report(&trace, &p, eps).unwrap().pass);
        let g = p.assignment().unwrap();
        let gram = qqc_core::matlin::HermitianMatrix::new(trace.final_gram().clone()).unwrap();
        let out = solve_output_sdp(&g, p.outputs().len(), eps, &gram, &cfg).unwrap();
        assert!(out.is_some());
        for x in 0..g.len() {
            for y in 0..g.len() {
                if g[x] != g[y] {
                    assert!(trace.final_gram()[(x, y)].norm() <= success_constant(eps) + 1e-6);
                }
            }
        }
    }
}

#[test]
fn input_register_starts_all_ones() {
    let p = fixtures::identity_vs_x();
    let r = reconstruct(&p, 1, 0.0, &SolverConfig::default()).unwrap();
    let ext = extended_state(&p, &r.algorithm, 0).unwrap();
    let ones = CMatrix::from_element(2, 2, c64(1.0, 0.0));
    assert!((ext.rho_i.as_matrix() - ones).norm() < 1e-10);
}
