//! Feasibility decisions for block programs by relaxed Douglas–Rachford
//! splitting between the affine constraint set and the cone, with Farkas
//! certificates read off the divergence direction.

mod sdpa;
mod standard;

pub use sdpa::{export_sdpa, parse_sdpa, to_sdpa, SdpaEntry, SdpaProblem};

use log::debug;
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QqcError, Result};
use crate::matlin::HermitianMatrix;
use crate::sdp::{
    BlockLabel, ConeKind, ConicFeasibilityProgram, ConstraintRow, LabeledBlocks, LinearBlockMap, MapKind,
    ProgramSense, RowRelation,
};
use standard::{min_eig_block, project_psd_block, StandardForm};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub feas_tol: f64,
    pub cert_margin: f64,
    pub over_relaxation: f64,
    pub seed: u64,
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            feas_tol: 1e-7,
            cert_margin: 1e-6,
            over_relaxation: 1.8,
            seed: 0,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.feas_tol > 0.0
            && self.cert_margin > 0.0
            && self.over_relaxation > 0.0
            && self.over_relaxation < 2.0
            && self.check_every > 0;
        if ok {
            Ok(())
        } else {
            Err(QqcError::MalformedProgram(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    InfeasibleWithCertificate,
    Undecided,
}

/// A Farkas certificate: multipliers `y`, one per program row, with
/// `𝒜*(y)` in the dual cone and `(b, y) ≤ −cert_margin` at `‖y‖ = 1`.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub multipliers: LabeledBlocks,
    /// The multipliers read as a point of the associated dual program,
    /// when the program carries a certificate map.
    pub dual_point: Option<LabeledBlocks>,
    /// `(b, y)`.
    pub value: f64,
    /// Smallest eigenvalue of `𝒜*(y)` over PSD blocks.
    pub min_cone_eig: f64,
    /// Norm of `𝒜*(y)` on free blocks.
    pub free_residual: f64,
}

#[derive(Clone, Debug)]
pub struct FeasibilityOutcome {
    pub status: FeasibilityStatus,
    pub point: Option<LabeledBlocks>,
    pub certificate: Option<Certificate>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Re-evaluation of a candidate point against every row of a program.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// Equality rows: `‖lhs − rhs‖_F`. Cone rows: Frobenius norm of the
    /// negative part of `lhs − rhs`. Strict rows: 0 (see `strict_slack`).
    pub row_residuals: Vec<f64>,
    /// Smallest eigenvalue of each PSD block, `None` for free blocks.
    pub block_min_eigs: Vec<Option<f64>>,
    /// `−(lhs − rhs)` of the strict row.
    pub strict_slack: Option<f64>,
    pub max_residual: f64,
    pub min_psd_eig: f64,
}

impl ResidualReport {
    pub fn strictly_feasible(&self) -> bool {
        self.strict_slack.is_none_or(|s| s > 0.0)
    }

    pub fn satisfies(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.min_psd_eig >= -tol && self.strictly_feasible()
    }
}

pub fn verify_point(prog: &ConicFeasibilityProgram, point: &LabeledBlocks) -> Result<ResidualReport> {
    prog.check_well_formed()?;
    let blocks = prog.blocks_in_order(point)?;
    verify_blocks(prog, &blocks)
}

fn verify_blocks(prog: &ConicFeasibilityProgram, blocks: &[HermitianMatrix]) -> Result<ResidualReport> {
    let mut row_residuals = Vec::with_capacity(prog.rows.len());
    let mut strict_slack = None;
    for (r, row) in prog.rows.iter().enumerate() {
        let diff = prog.evaluate_row(r, blocks)?.sub(&row.rhs);
        let res = match row.relation {
            RowRelation::Equal => diff.frobenius(),
            RowRelation::PsdGeq => diff.negative_part_norm()?,
            RowRelation::Strict => {
                strict_slack = Some(-diff.get(0, 0).re);
                0.0
            }
        };
        row_residuals.push(res);
    }
    let mut block_min_eigs = Vec::with_capacity(blocks.len());
    for (b, cone) in blocks.iter().zip(&prog.variable_cone.blocks) {
        block_min_eigs.push(match cone.kind {
            ConeKind::Psd => Some(b.min_eigenvalue()?),
            ConeKind::Free => None,
        });
    }
    let max_residual = row_residuals.iter().copied().fold(0.0, f64::max);
    let min_psd_eig = block_min_eigs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(ResidualReport { row_residuals, block_min_eigs, strict_slack, max_residual, min_psd_eig })
}

/// `(b, y)` for multipliers `y` of a primal-sense program. Whenever the
/// primal has a feasible point and `𝒜*(y)` lies in the dual cone the value
/// is nonnegative; `primal_point` is checked for dimensions only.
pub fn weak_duality_check(
    primal_point: &LabeledBlocks,
    dual_point: &[HermitianMatrix],
    primal_prog: &ConicFeasibilityProgram,
) -> Result<f64> {
    primal_prog.blocks_in_order(primal_point)?;
    if dual_point.len() != primal_prog.rows.len() {
        return Err(QqcError::DimensionMismatch(format!(
            "{} multipliers for {} rows",
            dual_point.len(),
            primal_prog.rows.len()
        )));
    }
    let mut v = 0.0;
    for (row, y) in primal_prog.rows.iter().zip(dual_point) {
        if y.dim() != row.dim() {
            return Err(QqcError::DimensionMismatch(format!("multiplier of dimension {} for row {}", y.dim(), row.name)));
        }
        v += row.rhs.inner(y);
    }
    Ok(v)
}

/// Whether the homogeneous version of a primal-sense program has only the
/// zero solution, decided by solving it with `Σ tr(x_PSD) = 1` appended.
pub fn check_p0_condition(prog: &ConicFeasibilityProgram, cfg: &SolverConfig) -> Result<bool> {
    if prog.sense != ProgramSense::EqualityPrimal {
        return Err(QqcError::MalformedProgram("P0 check needs a primal-sense program".into()));
    }
    if prog.rows.is_empty() {
        return Ok(false);
    }
    let mut h = prog.homogenized();
    h.certificate_map = None;
    let terms: Vec<(usize, LinearBlockMap)> = h
        .variable_cone
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == ConeKind::Psd)
        .map(|(c, b)| (c, LinearBlockMap::new(MapKind::Trace, &h.context, b.dim)))
        .collect();
    h.rows.push(ConstraintRow {
        name: "normalization".into(),
        relation: RowRelation::Equal,
        terms,
        rhs: HermitianMatrix::identity(1),
    });
    match solve(&h, cfg)?.status {
        FeasibilityStatus::InfeasibleWithCertificate => Ok(true),
        FeasibilityStatus::Feasible => Ok(false),
        FeasibilityStatus::Undecided => Err(QqcError::SolverUndecided(cfg.max_iters)),
    }
}

struct Projector {
    sf: StandardForm,
    /// `Aᵀ(AAᵀ)⁺`
    a_pinv: nalgebra::DMatrix<f64>,
    /// `(AAᵀ)⁺`
    gram_pinv: nalgebra::DMatrix<f64>,
}

impl Projector {
    fn new(sf: StandardForm) -> Self {
        let gram = &sf.a * sf.a.transpose();
        let m = gram.nrows();
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cut = 1e-12 * top.max(1.0);
        let mut scaled = eig.eigenvectors.clone();
        for k in 0..m {
            let l = eig.eigenvalues[k];
            let inv = if l > cut { 1.0 / l } else { 0.0 };
            scaled.column_mut(k).scale_mut(inv);
        }
        let gram_pinv = scaled * eig.eigenvectors.transpose();
        let a_pinv = sf.a.transpose() * &gram_pinv;
        Projector { sf, a_pinv, gram_pinv }
    }

    fn affine(&self, z: &DVector<f64>) -> DVector<f64> {
        let r = &self.sf.a * z - &self.sf.b;
        z - &self.a_pinv * r
    }

    fn cone(&self, v: &mut DVector<f64>) {
        for blk in &self.sf.blocks {
            if blk.kind == ConeKind::Psd {
                project_psd_block(&mut v.as_mut_slice()[blk.range()], blk.dim);
            }
        }
    }

    /// Projection onto the dual cone (PSD blocks clipped, free blocks zeroed).
    fn dual_cone(&self, v: &mut DVector<f64>) {
        for blk in &self.sf.blocks {
            let s = &mut v.as_mut_slice()[blk.range()];
            match blk.kind {
                ConeKind::Psd => project_psd_block(s, blk.dim),
                ConeKind::Free => s.iter_mut().for_each(|x| *x = 0.0),
            }
        }
    }

    /// `(min PSD eigenvalue of Aᵀw, free-block norm of Aᵀw, (b,w))`.
    fn certificate_quality(&self, w: &DVector<f64>) -> (f64, f64, f64) {
        let u = self.sf.a.transpose() * w;
        let mut min_eig = f64::INFINITY;
        let mut free = 0.0;
        for blk in &self.sf.blocks {
            let s = &u.as_slice()[blk.range()];
            match blk.kind {
                ConeKind::Psd => min_eig = min_eig.min(min_eig_block(s, blk.dim)),
                ConeKind::Free => free += s.iter().map(|x| x * x).sum::<f64>(),
            }
        }
        (min_eig, free.sqrt(), self.sf.b.dot(w))
    }
}

pub fn solve(prog: &ConicFeasibilityProgram, cfg: &SolverConfig) -> Result<FeasibilityOutcome> {
    cfg.validate()?;
    let sf = StandardForm::build(prog)?;
    let proj = Projector::new(sf);
    let sf = &proj.sf;

    let consistent = &sf.a * (&proj.a_pinv * &sf.b);
    let gap = &sf.b - consistent;
    if gap.norm() > 1e-9 * (1.0 + sf.b.norm()) {
        let w = -gap.normalize();
        if let Some(out) = accept_certificate(prog, &proj, w, cfg, 0) {
            return Ok(out);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = DVector::from_fn(sf.nvars(), |_, _| rng.random_range(-1e-3..1e-3));
    let lambda = cfg.over_relaxation;
    for it in 1..=cfg.max_iters {
        let x = proj.affine(&z);
        let mut y = 2.0 * &x - &z;
        proj.cone(&mut y);
        let diff = &y - &x;
        z += lambda * &diff;
        if it % cfg.check_every != 0 && it != cfg.max_iters {
            continue;
        }
        let res = &sf.a * &y - &sf.b;
        let rows = sf.row_residual_norms(&res);
        if rows.iter().all(|r| *r <= cfg.feas_tol) {
            let point = prog.label_blocks(sf.program_point(&y));
            let report = verify_point(prog, &point)?;
            if report.max_residual <= cfg.feas_tol && report.min_psd_eig >= -cfg.feas_tol {
                debug!("feasible after {it} iterations");
                return Ok(FeasibilityOutcome {
                    status: FeasibilityStatus::Feasible,
                    point: Some(point),
                    certificate: None,
                    residuals: report.row_residuals,
                    iterations: it,
                });
            }
        }
        if diff.norm() > 10.0 * cfg.feas_tol {
            let w = &proj.gram_pinv * (&sf.a * &diff);
            if w.norm() > 0.0 {
                if let Some(out) = accept_certificate(prog, &proj, w.normalize(), cfg, it) {
                    debug!("certificate after {it} iterations");
                    return Ok(out);
                }
            }
        }
    }
    let x = proj.affine(&z);
    let mut y = x.clone();
    proj.cone(&mut y);
    let residuals = sf.row_residual_norms(&(&sf.a * &y - &sf.b));
    debug!("undecided after {} iterations", cfg.max_iters);
    Ok(FeasibilityOutcome {
        status: FeasibilityStatus::Undecided,
        point: None,
        certificate: None,
        residuals,
        iterations: cfg.max_iters,
    })
}

fn accept_certificate(
    prog: &ConicFeasibilityProgram,
    proj: &Projector,
    mut w: DVector<f64>,
    cfg: &SolverConfig,
    iterations: usize,
) -> Option<FeasibilityOutcome> {
    let sf = &proj.sf;
    let passes = |q: (f64, f64, f64)| q.0 >= -cfg.feas_tol && q.1 <= cfg.feas_tol && q.2 <= -cfg.cert_margin;
    let mut quality = proj.certificate_quality(&w);
    if !passes(quality) {
        if quality.2 > -cfg.cert_margin {
            return None;
        }
        for _ in 0..200 {
            let mut u = sf.a.transpose() * &w;
            proj.dual_cone(&mut u);
            let next = &proj.gram_pinv * (&sf.a * u);
            if next.norm() == 0.0 {
                return None;
            }
            w = next.normalize();
            quality = proj.certificate_quality(&w);
            if passes(quality) || quality.2 > -cfg.cert_margin {
                break;
            }
        }
        if !passes(quality) {
            return None;
        }
    }
    let y = sf.row_matrices(&w);
    let multipliers = LabeledBlocks::new((0..y.len()).map(BlockLabel::Row).zip(y.iter().cloned()).collect());
    let dual_point = prog.map_certificate(&y);
    Some(FeasibilityOutcome {
        status: FeasibilityStatus::InfeasibleWithCertificate,
        point: None,
        certificate: Some(Certificate {
            multipliers,
            dual_point,
            value: quality.2,
            min_cone_eig: quality.0,
            free_residual: quality.1,
        }),
        residuals: Vec::new(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{
        build_dual, build_primal, ConeBlock, ConeSpec, MapContext, ProgramSolutionLabels,
    };
    use crate::problem::fixtures;

    pub(crate) fn toy(rows: Vec<ConstraintRow>, dims: &[usize]) -> ConicFeasibilityProgram {
        ConicFeasibilityProgram {
            variable_cone: ConeSpec { blocks: dims.iter().map(|&dim| ConeBlock { dim, kind: ConeKind::Psd }).collect() },
            labels: ProgramSolutionLabels { names: (0..dims.len()).map(BlockLabel::Var).collect() },
            rows,
            sense: ProgramSense::EqualityPrimal,
            strict_row: None,
            context: MapContext::standalone(1),
            certificate_map: None,
        }
    }

    #[test]
    fn trace_one_scalar_program_is_feasible() {
        let ctx = MapContext::standalone(1);
        let prog = toy(
            vec![ConstraintRow {
                name: "t".into(),
                relation: RowRelation::Equal,
                terms: vec![(0, LinearBlockMap::new(MapKind::Trace, &ctx, 1))],
                rhs: HermitianMatrix::identity(1),
            }],
            &[1],
        );
        let out = solve(&prog, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, FeasibilityStatus::Feasible);
        let x = out.point.unwrap();
        assert!((x.entries[0].1.get(0, 0).re - 1.0).abs() < 1e-7);
    }

    #[test]
    fn negative_trace_is_certified_infeasible() {
        let ctx = MapContext::standalone(2);
        let prog = toy(
            vec![ConstraintRow {
                name: "t".into(),
                relation: RowRelation::Equal,
                terms: vec![(0, LinearBlockMap::new(MapKind::Trace, &ctx, 2))],
                rhs: HermitianMatrix::identity(1).scale(-1.0),
            }],
            &[2],
        );
        let out = solve(&prog, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, FeasibilityStatus::InfeasibleWithCertificate);
        let c = out.certificate.unwrap();
        assert!(c.value <= -1e-6 && c.min_cone_eig >= -1e-7);
    }

    #[test]
    fn inconsistent_linear_system_is_certified() {
        let ctx = MapContext::standalone(1);
        let row = |v: f64| ConstraintRow {
            name: "t".into(),
            relation: RowRelation::Equal,
            terms: vec![(0, LinearBlockMap::new(MapKind::Identity, &ctx, 1))],
            rhs: HermitianMatrix::identity(1).scale(v),
        };
        let prog = toy(vec![row(1.0), row(2.0)], &[1]);
        let out = solve(&prog, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, FeasibilityStatus::InfeasibleWithCertificate);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn p0_examples() {
        let cfg = SolverConfig::default();
        let prog = build_primal(&fixtures::deutsch_xor2(), 1, 0.0).unwrap();
        assert!(check_p0_condition(&prog, &cfg).unwrap());

        let ctx = MapContext::standalone(1);
        let free_dir = toy(
            vec![ConstraintRow {
                name: "zero".into(),
                relation: RowRelation::Equal,
                terms: vec![(0, LinearBlockMap::zero(2, 1))],
                rhs: HermitianMatrix::zeros(1),
            }],
            &[2],
        );
        let _ = ctx;
        assert!(!check_p0_condition(&free_dir, &cfg).unwrap());
        assert!(!check_p0_condition(&toy(vec![], &[2]), &cfg).unwrap());
        assert!(check_p0_condition(&build_dual(&fixtures::deutsch_xor2(), 0, 0.0).unwrap(), &cfg).is_err());
    }

    #[test]
    fn zero_dual_point_has_zero_slack() {
        let prog = build_dual(&fixtures::deutsch_xor2(), 1, 0.0).unwrap();
        let zeros = prog.label_blocks(prog.block_dims().into_iter().map(HermitianMatrix::zeros).collect());
        let rep = verify_point(&prog, &zeros).unwrap();
        assert_eq!(rep.strict_slack, Some(0.0));
        assert!(!rep.strictly_feasible());
        assert_eq!(rep.max_residual, 0.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let prog = build_primal(&fixtures::constant_g(), 0, 0.0).unwrap();
        let cfg = SolverConfig { over_relaxation: 2.0, ..SolverConfig::default() };
        assert!(solve(&prog, &cfg).is_err());
    }
}
