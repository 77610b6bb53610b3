use super::maps::{LinearBlockMap, MapContext, MapKind};
use super::{
    BlockLabel, CertificateEntry, CertificateMap, ConeBlock, ConeKind, ConeSpec, ConicFeasibilityProgram,
    ConstraintRow, ProgramSense, ProgramSolutionLabels, RowRelation, StrictRow,
};
use crate::error::{QqcError, Result};
use crate::matlin::{CMatrix, HermitianMatrix};
use crate::problem::{build_constants, DerivedConstants, QueryProblem};

/// Normalization of the strict row in the homogeneous dual programs.
const DUAL_STRICT_MARGIN: f64 = 1.0;

pub fn check_eps(eps: f64) -> Result<()> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(QqcError::InvalidEpsilon(eps))
    }
}

/// `2√(ε(1−ε))`, the bound on final overlaps between inputs with different outputs.
pub fn success_constant(eps: f64) -> f64 {
    2.0 * (eps * (1.0 - eps)).max(0.0).sqrt()
}

pub fn map_context(p: &QueryProblem) -> Result<(MapContext, DerivedConstants)> {
    let c = build_constants(p)?;
    let ctx = MapContext { s: p.size(), n: p.n(), omega: c.omega.clone(), deltas: c.deltas.clone() };
    Ok((ctx, c))
}

struct Grid {
    ctx: MapContext,
    blocks: Vec<ConeBlock>,
    labels: Vec<BlockLabel>,
    rows: Vec<ConstraintRow>,
}

impl Grid {
    fn new(ctx: MapContext) -> Self {
        Grid { ctx, blocks: Vec::new(), labels: Vec::new(), rows: Vec::new() }
    }

    fn block(&mut self, label: BlockLabel, dim: usize, kind: ConeKind) -> usize {
        self.blocks.push(ConeBlock { dim, kind });
        self.labels.push(label);
        self.blocks.len() - 1
    }

    fn map(&self, kind: MapKind, dim: usize) -> LinearBlockMap {
        LinearBlockMap::new(kind, &self.ctx, dim)
    }

    fn row(&mut self, name: String, relation: RowRelation, terms: Vec<(usize, LinearBlockMap)>, rhs: HermitianMatrix) {
        self.rows.push(ConstraintRow { name, relation, terms, rhs });
    }

    fn finish(
        self,
        sense: ProgramSense,
        strict_row: Option<StrictRow>,
        certificate_map: Option<CertificateMap>,
    ) -> ConicFeasibilityProgram {
        ConicFeasibilityProgram {
            variable_cone: ConeSpec { blocks: self.blocks },
            labels: ProgramSolutionLabels { names: self.labels },
            rows: self.rows,
            sense,
            strict_row,
            context: self.ctx,
            certificate_map,
        }
    }
}

/// Adds the ρ blocks and the query-chain rows shared by both primal forms.
/// Returns the column of ρ^I(q).
fn query_chain(grid: &mut Grid, q: usize) -> usize {
    let (s, sn) = (grid.ctx.s, grid.ctx.s * grid.ctx.n);
    let rho: Vec<usize> = (0..q).map(|t| grid.block(BlockLabel::RhoIq(t), sn, ConeKind::Psd)).collect();
    let rho_i = grid.block(BlockLabel::RhoIFinal, s, ConeKind::Psd);
    let ptq = grid.map(MapKind::PartialTraceQ, 0);
    let conj = grid.map(MapKind::ConjOmegaThenPartialTraceQ, 0).scaled(-1.0);
    let id = grid.map(MapKind::Identity, s);
    if q == 0 {
        grid.row("initial".into(), RowRelation::Equal, vec![(rho_i, id)], HermitianMatrix::ones(s));
        return rho_i;
    }
    grid.row("initial".into(), RowRelation::Equal, vec![(rho[0], ptq)], HermitianMatrix::ones(s));
    for t in 1..q {
        grid.row(
            format!("query({t})"),
            RowRelation::Equal,
            vec![(rho[t], ptq), (rho[t - 1], conj)],
            HermitianMatrix::zeros(s),
        );
    }
    grid.row(
        format!("query({q})"),
        RowRelation::Equal,
        vec![(rho_i, id), (rho[q - 1], conj)],
        HermitianMatrix::zeros(s),
    );
    rho_i
}

/// Output decomposition `Σ Γ_z = M` and `Δ_z*Γ_z − Π_z = (1−ε)Δ_z`, with
/// `M` either a variable column or a constant.
fn output_rows(grid: &mut Grid, m_col: Option<usize>, m_const: Option<&HermitianMatrix>, eps: f64) {
    let s = grid.ctx.s;
    let t = grid.ctx.deltas.len();
    let gammas: Vec<usize> = (0..t).map(|z| grid.block(BlockLabel::Gamma(z), s, ConeKind::Psd)).collect();
    let pis: Vec<usize> = (0..t).map(|z| grid.block(BlockLabel::Pi(z), s, ConeKind::Psd)).collect();
    let id = grid.map(MapKind::Identity, s);
    let mut terms: Vec<(usize, LinearBlockMap)> = gammas.iter().map(|&c| (c, id)).collect();
    if let Some(col) = m_col {
        terms.push((col, grid.map(MapKind::NegIdentity, s)));
    }
    let rhs = m_const.cloned().unwrap_or_else(|| HermitianMatrix::zeros(s));
    grid.row("decomposition".into(), RowRelation::Equal, terms, rhs);
    for z in 0..t {
        let rhs = grid.ctx.deltas[z].scale(1.0 - eps);
        grid.row(
            format!("output({z})"),
            RowRelation::Equal,
            vec![(gammas[z], grid.map(MapKind::SchurDelta(z), s)), (pis[z], grid.map(MapKind::NegIdentity, s))],
            rhs,
        );
    }
}

/// The primal program P(g, q, ε).
pub fn build_primal(p: &QueryProblem, q: usize, eps: f64) -> Result<ConicFeasibilityProgram> {
    check_eps(eps)?;
    let (ctx, _) = map_context(p)?;
    let t = ctx.deltas.len();
    let mut grid = Grid::new(ctx);
    let rho_i = query_chain(&mut grid, q);
    output_rows(&mut grid, Some(rho_i), None, eps);
    let mut entries: Vec<CertificateEntry> = (0..=q)
        .map(|k| CertificateEntry { label: BlockLabel::L(k), row: k, sign: 1.0, pair_mask: None })
        .collect();
    entries.extend((0..t).map(|z| CertificateEntry {
        label: BlockLabel::Lambda(z),
        row: q + 2 + z,
        sign: -1.0,
        pair_mask: None,
    }));
    Ok(grid.finish(ProgramSense::EqualityPrimal, None, Some(CertificateMap { entries })))
}

/// The primal with the output conditions replaced by the pairwise overlap
/// bound `|ρ^I(q)[X,Y]| ≤ 2√(ε(1−ε))` for every pair in R.
pub fn build_primal_relaxed(p: &QueryProblem, q: usize, eps: f64) -> Result<ConicFeasibilityProgram> {
    check_eps(eps)?;
    let (ctx, consts) = map_context(p)?;
    let s = ctx.s;
    let c = success_constant(eps);
    let mut grid = Grid::new(ctx);
    let rho_i = query_chain(&mut grid, q);
    let mut entries: Vec<CertificateEntry> = (0..=q)
        .map(|k| CertificateEntry { label: BlockLabel::K(k), row: q - k, sign: -1.0, pair_mask: None })
        .collect();
    for (k, &(x, y)) in consts.relation_r.iter().enumerate() {
        let col = grid.block(BlockLabel::PiPair(x, y), s, ConeKind::Psd);
        let row = grid.rows.len();
        grid.row(
            format!("overlap({x},{y})"),
            RowRelation::Equal,
            vec![(col, grid.map(MapKind::Identity, s)), (rho_i, grid.map(MapKind::NegSchurV(x, y), s))],
            consts.w_mats[k].scale(c),
        );
        entries.push(CertificateEntry { label: BlockLabel::Upsilon(x, y), row, sign: 1.0, pair_mask: Some((x, y)) });
    }
    Ok(grid.finish(ProgramSense::EqualityPrimal, None, Some(CertificateMap { entries })))
}

/// The dual D(g, q, ε): its feasibility certifies that no q-query
/// algorithm succeeds with probability 1 − ε.
pub fn build_dual(p: &QueryProblem, q: usize, eps: f64) -> Result<ConicFeasibilityProgram> {
    check_eps(eps)?;
    let (ctx, _) = map_context(p)?;
    let (s, sn, t) = (ctx.s, ctx.s * ctx.n, ctx.deltas.len());
    let mut grid = Grid::new(ctx);
    let l: Vec<usize> = (0..=q).map(|k| grid.block(BlockLabel::L(k), s, ConeKind::Free)).collect();
    let lam: Vec<usize> = (0..t).map(|z| grid.block(BlockLabel::Lambda(z), s, ConeKind::Psd)).collect();
    let lift = grid.map(MapKind::PartialTraceQ, 0).adjointed();
    let conj = grid.map(MapKind::ConjOmegaThenPartialTraceQ, 0).adjointed().scaled(-1.0);
    for k in 1..=q {
        grid.row(
            format!("query({k})"),
            RowRelation::PsdGeq,
            vec![(l[k - 1], lift), (l[k], conj)],
            HermitianMatrix::zeros(sn),
        );
    }
    for (z, &lz) in lam.iter().enumerate() {
        grid.row(
            format!("output({z})"),
            RowRelation::PsdGeq,
            vec![(l[q], grid.map(MapKind::Identity, s)), (lz, grid.map(MapKind::SchurDelta(z), s).scaled(-1.0))],
            HermitianMatrix::zeros(s),
        );
    }
    let mut terms = vec![(l[0], grid.map(MapKind::SumEntries, s))];
    terms.extend((0..t).map(|z| (lam[z], grid.map(MapKind::TraceDelta(z), s).scaled(-(1.0 - eps)))));
    let row = grid.rows.len();
    grid.row("strict".into(), RowRelation::Strict, terms, HermitianMatrix::zeros(1));
    Ok(grid.finish(
        ProgramSense::ConeInequalityDual,
        Some(StrictRow { row, margin: DUAL_STRICT_MARGIN }),
        None,
    ))
}

/// The dual of the relaxed primal, whose feasible points are the
/// adversary witnesses.
pub fn build_dual_relaxed(p: &QueryProblem, q: usize, eps: f64) -> Result<ConicFeasibilityProgram> {
    check_eps(eps)?;
    let (ctx, consts) = map_context(p)?;
    let (s, sn) = (ctx.s, ctx.s * ctx.n);
    let c = success_constant(eps);
    let mut grid = Grid::new(ctx);
    let k: Vec<usize> = (0..=q).map(|t| grid.block(BlockLabel::K(t), s, ConeKind::Free)).collect();
    let ups: Vec<usize> = consts
        .relation_r
        .iter()
        .map(|&(x, y)| grid.block(BlockLabel::Upsilon(x, y), s, ConeKind::Psd))
        .collect();

    let mut terms = vec![(k[0], grid.map(MapKind::NegIdentity, s))];
    for (col, &(x, y)) in ups.iter().zip(&consts.relation_r) {
        terms.push((*col, grid.map(MapKind::NegSchurV(x, y), s)));
    }
    grid.row("initial".into(), RowRelation::PsdGeq, terms, HermitianMatrix::zeros(s));

    let conj = grid.map(MapKind::ConjOmegaThenPartialTraceQ, 0).adjointed();
    let lift = grid.map(MapKind::PartialTraceQ, 0).adjointed().scaled(-1.0);
    for t in 1..=q {
        grid.row(
            format!("query({t})"),
            RowRelation::PsdGeq,
            vec![(k[t - 1], conj), (k[t], lift)],
            HermitianMatrix::zeros(sn),
        );
    }
    for (col, &(x, y)) in ups.iter().zip(&consts.relation_r) {
        grid.row(
            format!("sparsity({x},{y})"),
            RowRelation::Equal,
            vec![(*col, grid.map(MapKind::SchurOffPair(x, y), s))],
            HermitianMatrix::zeros(s),
        );
    }
    let mut terms: Vec<(usize, LinearBlockMap)> =
        ups.iter().map(|col| (*col, grid.map(MapKind::Trace, s).scaled(c))).collect();
    terms.push((k[q], grid.map(MapKind::SumEntries, s).scaled(-1.0)));
    let row = grid.rows.len();
    grid.row("strict".into(), RowRelation::Strict, terms, HermitianMatrix::zeros(1));
    Ok(grid.finish(
        ProgramSense::ConeInequalityDual,
        Some(StrictRow { row, margin: DUAL_STRICT_MARGIN }),
        None,
    ))
}

/// The output program O(g, ε, M) for a fixed final Gram matrix `m`.
pub fn build_output_program(
    assignment: &[usize],
    num_outputs: usize,
    eps: f64,
    m: &HermitianMatrix,
) -> Result<ConicFeasibilityProgram> {
    check_eps(eps)?;
    let s = assignment.len();
    if m.dim() != s {
        return Err(QqcError::DimensionMismatch(format!("Gram matrix of dimension {} for {s} inputs", m.dim())));
    }
    if assignment.iter().any(|&z| z >= num_outputs) {
        return Err(QqcError::InvalidProblem("assignment refers to an unknown output".into()));
    }
    let deltas = (0..num_outputs)
        .map(|z| {
            let d: Vec<f64> = assignment.iter().map(|&g| if g == z { 1.0 } else { 0.0 }).collect();
            HermitianMatrix::from_diagonal(&d)
        })
        .collect();
    let ctx = MapContext { s, n: 1, omega: CMatrix::identity(s, s), deltas };
    let mut grid = Grid::new(ctx);
    output_rows(&mut grid, None, Some(m), eps);
    Ok(grid.finish(ProgramSense::EqualityPrimal, None, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{c64, random_hermitian};
    use crate::problem::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primal_block_layout_for_deutsch() {
        let p = fixtures::deutsch_xor2();
        let prog = build_primal(&p, 1, 0.0).unwrap();
        prog.check_well_formed().unwrap();
        assert_eq!(prog.block_dims(), vec![8, 4, 4, 4, 4, 4]);
        assert_eq!(
            prog.labels.names,
            vec![
                BlockLabel::RhoIq(0),
                BlockLabel::RhoIFinal,
                BlockLabel::Gamma(0),
                BlockLabel::Gamma(1),
                BlockLabel::Pi(0),
                BlockLabel::Pi(1)
            ]
        );
        assert_eq!(prog.rows.len(), 5);
    }

    #[test]
    fn zero_query_primal_pins_rho_to_all_ones() {
        let prog = build_primal(&fixtures::constant_g(), 0, 0.0).unwrap();
        prog.check_well_formed().unwrap();
        assert_eq!(prog.block_dims(), vec![2, 2, 2]);
        assert_eq!(prog.rows[0].rhs, HermitianMatrix::ones(2));
    }

    #[test]
    fn eps_out_of_range_is_rejected() {
        let p = fixtures::deutsch_xor2();
        assert!(matches!(build_primal(&p, 1, 1.0), Err(QqcError::InvalidEpsilon(_))));
        assert!(build_dual(&p, 1, -0.1).is_err());
        assert!(build_primal_relaxed(&p, 1, f64::NAN).is_err());
    }

    #[test]
    fn every_builder_is_well_formed() {
        for (_, p) in fixtures::all() {
            for q in 0..3 {
                for eps in [0.0, 0.1] {
                    build_primal(&p, q, eps).unwrap().check_well_formed().unwrap();
                    build_primal_relaxed(&p, q, eps).unwrap().check_well_formed().unwrap();
                    build_dual(&p, q, eps).unwrap().check_well_formed().unwrap();
                    build_dual_relaxed(&p, q, eps).unwrap().check_well_formed().unwrap();
                }
            }
        }
    }

    #[test]
    fn relaxed_primal_without_pairs_keeps_only_chain() {
        let prog = build_primal_relaxed(&fixtures::constant_g(), 2, 0.1).unwrap();
        assert_eq!(prog.rows.len(), 3);
        assert_eq!(prog.num_blocks(), 3);
    }

    #[test]
    fn constant_relaxed_dual_degenerates() {
        let prog = build_dual_relaxed(&fixtures::constant_g(), 1, 0.0).unwrap();
        prog.check_well_formed().unwrap();
        let strict = &prog.rows[prog.strict_row.unwrap().row];
        assert_eq!(strict.terms.len(), 1);
    }

    #[test]
    fn zero_dual_point_is_not_strict() {
        let p = fixtures::deutsch_xor2();
        let prog = build_dual(&p, 1, 0.0).unwrap();
        let zeros: Vec<HermitianMatrix> = prog.block_dims().into_iter().map(HermitianMatrix::zeros).collect();
        let s = prog.strict_row.unwrap().row;
        assert_eq!(prog.evaluate_row(s, &zeros).unwrap().get(0, 0), c64(0.0, 0.0));
    }

    #[test]
    fn phase_query_dual_has_classical_block_structure() {
        let p = fixtures::or2();
        let prog = build_dual(&p, 2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let blocks: Vec<HermitianMatrix> =
            prog.block_dims().into_iter().map(|d| random_hermitian(&mut rng, d)).collect();
        let row = prog.evaluate_row(1, &blocks).unwrap();
        let (l_prev, l_next) = (&blocks[1], &blocks[2]);
        for x in 0..4 {
            for y in 0..4 {
                let uxuy = p.unitary(x).adjoint() * p.unitary(y);
                for i in 0..2 {
                    for j in 0..2 {
                        let expect = if i == j { l_prev.get(x, y) } else { c64(0.0, 0.0) } - uxuy[(i, j)] * l_next.get(x, y);
                        let got = row.get(x * 2 + i, y * 2 + j);
                        assert!((got - expect).norm() < 1e-13);
                        if i != j {
                            assert_eq!(uxuy[(i, j)], c64(0.0, 0.0));
                        } else {
                            assert_eq!(uxuy[(i, j)].norm(), 1.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn output_program_shape() {
        let m = HermitianMatrix::ones(4);
        let prog = build_output_program(&[0, 1, 1, 0], 2, 0.0, &m).unwrap();
        prog.check_well_formed().unwrap();
        assert_eq!(prog.num_blocks(), 4);
        assert!(build_output_program(&[0, 1], 2, 0.0, &m).is_err());
    }
}
