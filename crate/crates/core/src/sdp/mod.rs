//! Block-structured conic feasibility programs and the builders for the
//! primal, relaxed primal, dual and relaxed dual of a query problem.

mod builders;
mod maps;

use std::fmt;

pub use builders::{
    build_dual, build_dual_relaxed, build_output_program, build_primal, build_primal_relaxed, check_eps,
    map_context, success_constant,
};
pub use maps::{apply_adjoint, apply_map, LinearBlockMap, MapContext, MapKind};

use crate::error::{QqcError, Result};
use crate::matlin::HermitianMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Psd,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeBlock {
    pub dim: usize,
    pub kind: ConeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeSpec {
    pub blocks: Vec<ConeBlock>,
}

/// Semantic tag of a variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockLabel {
    RhoIq(usize),
    RhoIFinal,
    Gamma(usize),
    Pi(usize),
    PiPair(usize, usize),
    L(usize),
    Lambda(usize),
    K(usize),
    Upsilon(usize, usize),
    /// Multiplier attached to a constraint row of another program.
    Row(usize),
    Var(usize),
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockLabel::RhoIq(t) => write!(f, "rho_iq({t})"),
            BlockLabel::RhoIFinal => write!(f, "rho_i(q)"),
            BlockLabel::Gamma(z) => write!(f, "gamma({z})"),
            BlockLabel::Pi(z) => write!(f, "pi({z})"),
            BlockLabel::PiPair(x, y) => write!(f, "pi_pair({x},{y})"),
            BlockLabel::L(t) => write!(f, "L({t})"),
            BlockLabel::Lambda(z) => write!(f, "lambda({z})"),
            BlockLabel::K(t) => write!(f, "K({t})"),
            BlockLabel::Upsilon(x, y) => write!(f, "upsilon({x},{y})"),
            BlockLabel::Row(i) => write!(f, "row({i})"),
            BlockLabel::Var(i) => write!(f, "var({i})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramSolutionLabels {
    pub names: Vec<BlockLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowRelation {
    /// `Σ 𝒜(x) = B`
    Equal,
    /// `Σ 𝒜(x) − B ⪰ 0`
    PsdGeq,
    /// The scalar `Σ 𝒜(x) − B` is strictly negative.
    Strict,
}

#[derive(Clone, Debug)]
pub struct ConstraintRow {
    pub name: String,
    pub relation: RowRelation,
    pub terms: Vec<(usize, LinearBlockMap)>,
    pub rhs: HermitianMatrix,
}

impl ConstraintRow {
    pub fn dim(&self) -> usize {
        self.rhs.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgramSense {
    EqualityPrimal,
    ConeInequalityDual,
}

/// Index of the scalar row that must be strictly negative, realized as
/// `value ≤ −margin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrictRow {
    pub row: usize,
    pub margin: f64,
}

/// How a multiplier vector `y` (one Hermitian block per primal row) reads
/// as a point of the associated dual program: block `k` equals
/// `sign · y[row]`, optionally restricted to the principal 2×2 pattern of
/// a pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateMap {
    pub entries: Vec<CertificateEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateEntry {
    pub label: BlockLabel,
    pub row: usize,
    pub sign: f64,
    pub pair_mask: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct ConicFeasibilityProgram {
    pub variable_cone: ConeSpec,
    pub labels: ProgramSolutionLabels,
    pub rows: Vec<ConstraintRow>,
    pub sense: ProgramSense,
    pub strict_row: Option<StrictRow>,
    pub context: MapContext,
    pub certificate_map: Option<CertificateMap>,
}

/// Variable blocks tagged with their semantic labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledBlocks {
    pub entries: Vec<(BlockLabel, HermitianMatrix)>,
}

impl LabeledBlocks {
    pub fn new(entries: Vec<(BlockLabel, HermitianMatrix)>) -> Self {
        LabeledBlocks { entries }
    }

    pub fn get(&self, label: BlockLabel) -> Option<&HermitianMatrix> {
        self.entries.iter().find(|(l, _)| *l == label).map(|(_, m)| m)
    }

    pub fn require(&self, label: BlockLabel) -> Result<&HermitianMatrix> {
        self.get(label).ok_or_else(|| QqcError::DimensionMismatch(format!("block {label} missing")))
    }

    pub fn labels(&self) -> Vec<BlockLabel> {
        self.entries.iter().map(|(l, _)| *l).collect()
    }

    pub fn matrices(&self) -> Vec<HermitianMatrix> {
        self.entries.iter().map(|(_, m)| m.clone()).collect()
    }
}

impl ConicFeasibilityProgram {
    pub fn num_blocks(&self) -> usize {
        self.variable_cone.blocks.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.variable_cone.blocks.iter().map(|b| b.dim).collect()
    }

    pub fn check_well_formed(&self) -> Result<()> {
        let bad = |m: String| Err(QqcError::MalformedProgram(m));
        if self.variable_cone.blocks.is_empty() {
            return bad("no variable blocks".into());
        }
        if self.labels.names.len() != self.num_blocks() {
            return bad("one label per block required".into());
        }
        if self.variable_cone.blocks.iter().any(|b| b.dim == 0) {
            return bad("zero-dimensional block".into());
        }
        for (r, row) in self.rows.iter().enumerate() {
            for (col, map) in &row.terms {
                let Some(block) = self.variable_cone.blocks.get(*col) else {
                    return bad(format!("row {r} references column {col}"));
                };
                if map.in_dim != block.dim || map.out_dim != row.dim() {
                    return bad(format!(
                        "row {r} column {col}: map {}->{} against block {} and row {}",
                        map.in_dim,
                        map.out_dim,
                        block.dim,
                        row.dim()
                    ));
                }
            }
            let strict_here = self.strict_row.is_some_and(|s| s.row == r);
            if (row.relation == RowRelation::Strict) != strict_here {
                return bad(format!("row {r} strictness disagrees with strict_row"));
            }
            if row.relation == RowRelation::Strict && row.dim() != 1 {
                return bad("strict row must be scalar".into());
            }
            if self.sense == ProgramSense::EqualityPrimal && row.relation != RowRelation::Equal {
                return bad(format!("row {r} is not an equality in a primal-sense program"));
            }
        }
        if let Some(s) = self.strict_row {
            if s.row >= self.rows.len() || s.margin <= 0.0 {
                return bad("invalid strict row".into());
            }
        }
        Ok(())
    }

    /// `Σ_col 𝒜_{row,col}(x_col)`.
    pub fn evaluate_row(&self, row: usize, blocks: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        let r = &self.rows[row];
        let mut acc = HermitianMatrix::zeros(r.dim());
        for (col, map) in &r.terms {
            let x = blocks
                .get(*col)
                .ok_or_else(|| QqcError::DimensionMismatch(format!("missing block {col}")))?;
            acc = acc.add(&map.apply(&self.context, x)?);
        }
        Ok(acc)
    }

    /// `𝒜*(y)`, one Hermitian block per variable block.
    pub fn adjoint_apply(&self, y: &[HermitianMatrix]) -> Result<Vec<HermitianMatrix>> {
        let mut out: Vec<HermitianMatrix> = self.block_dims().into_iter().map(HermitianMatrix::zeros).collect();
        for (r, row) in self.rows.iter().enumerate() {
            for (col, map) in &row.terms {
                out[*col] = out[*col].add(&map.apply_adjoint(&self.context, &y[r])?);
            }
        }
        Ok(out)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.relation != RowRelation::Strict)
            .all(|r| r.rhs.frobenius() == 0.0)
    }

    /// The same program with every right-hand side set to zero.
    pub fn homogenized(&self) -> Self {
        let mut p = self.clone();
        for row in &mut p.rows {
            row.rhs = HermitianMatrix::zeros(row.dim());
        }
        p
    }

    /// Reads a multiplier vector as a point of the associated dual program.
    pub fn map_certificate(&self, y: &[HermitianMatrix]) -> Option<LabeledBlocks> {
        let map = self.certificate_map.as_ref()?;
        let entries = map
            .entries
            .iter()
            .map(|e| {
                let mut m = y[e.row].scale(e.sign);
                if let Some((a, b)) = e.pair_mask {
                    let mut masked = crate::matlin::CMatrix::zeros(m.dim(), m.dim());
                    for i in [a, b] {
                        for j in [a, b] {
                            masked[(i, j)] = m.get(i, j);
                        }
                    }
                    m = HermitianMatrix::new(masked).unwrap_or(m);
                }
                (e.label, m)
            })
            .collect();
        Some(LabeledBlocks::new(entries))
    }

    /// Arranges labeled blocks in this program's column order.
    pub fn blocks_in_order(&self, point: &LabeledBlocks) -> Result<Vec<HermitianMatrix>> {
        self.labels
            .names
            .iter()
            .zip(&self.variable_cone.blocks)
            .map(|(l, b)| {
                let m = point.require(*l)?;
                if m.dim() != b.dim {
                    return Err(QqcError::DimensionMismatch(format!(
                        "block {l} has dimension {} instead of {}",
                        m.dim(),
                        b.dim
                    )));
                }
                Ok(m.clone())
            })
            .collect()
    }

    pub fn label_blocks(&self, blocks: Vec<HermitianMatrix>) -> LabeledBlocks {
        LabeledBlocks::new(self.labels.names.iter().copied().zip(blocks).collect())
    }
}
