use crate::error::{QqcError, Result};
use crate::matlin::{c64, kron, ptrace_fast, CMatrix, HermitianMatrix};

/// Constant data the block maps refer to.
#[derive(Clone, Debug)]
pub struct MapContext {
    pub s: usize,
    pub n: usize,
    pub omega: CMatrix,
    pub deltas: Vec<HermitianMatrix>,
}

impl MapContext {
    /// A context with `s` rows, a trivial query register and no outputs,
    /// for programs that only use the structure-free maps.
    pub fn standalone(s: usize) -> Self {
        MapContext { s, n: 1, omega: CMatrix::identity(s, s), deltas: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// `G ↦ tr_Q G`
    PartialTraceQ,
    /// `G ↦ tr_Q(Ω G Ω†)`
    ConjOmegaThenPartialTraceQ,
    Identity,
    NegIdentity,
    /// `M ↦ Δ_z * M`
    SchurDelta(usize),
    /// `M ↦ V^{XY} * M`
    SchurV(usize, usize),
    NegSchurV(usize, usize),
    /// Keeps the entries of `M` outside `{XX, XY, YX, YY}`.
    SchurOffPair(usize, usize),
    /// `M ↦ Σ_{ij} M_ij`, a 1×1 output.
    SumEntries,
    Trace,
    /// `M ↦ tr(Δ_z M)`
    TraceDelta(usize),
    Zero,
}

impl MapKind {
    pub fn all_for(ctx: &MapContext) -> Vec<MapKind> {
        let mut kinds = vec![
            MapKind::PartialTraceQ,
            MapKind::ConjOmegaThenPartialTraceQ,
            MapKind::Identity,
            MapKind::NegIdentity,
            MapKind::SumEntries,
            MapKind::Trace,
            MapKind::Zero,
        ];
        for z in 0..ctx.deltas.len() {
            kinds.push(MapKind::SchurDelta(z));
            kinds.push(MapKind::TraceDelta(z));
        }
        if ctx.s >= 2 {
            kinds.extend([MapKind::SchurV(0, 1), MapKind::NegSchurV(0, 1), MapKind::SchurOffPair(0, 1)]);
        }
        kinds
    }
}

/// One entry `𝒜_{αβ}` of the constraint grid: a scaled linear map between
/// Hermitian spaces, optionally replaced by its adjoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearBlockMap {
    pub kind: MapKind,
    pub scale: f64,
    pub adjoint: bool,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearBlockMap {
    /// The forward map. `dim` sizes the kinds whose dimension is not fixed
    /// by the context (identity, trace, sum of entries, zero).
    pub fn new(kind: MapKind, ctx: &MapContext, dim: usize) -> Self {
        let sn = ctx.s * ctx.n;
        let (in_dim, out_dim) = match kind {
            MapKind::PartialTraceQ | MapKind::ConjOmegaThenPartialTraceQ => (sn, ctx.s),
            MapKind::Identity | MapKind::NegIdentity | MapKind::Zero => (dim, dim),
            MapKind::SchurDelta(_) | MapKind::SchurV(..) | MapKind::NegSchurV(..) | MapKind::SchurOffPair(..) => {
                (ctx.s, ctx.s)
            }
            MapKind::SumEntries | MapKind::Trace => (dim, 1),
            MapKind::TraceDelta(_) => (ctx.s, 1),
        };
        LinearBlockMap { kind, scale: 1.0, adjoint: false, in_dim, out_dim }
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        LinearBlockMap { kind: MapKind::Zero, scale: 1.0, adjoint: false, in_dim, out_dim }
    }

    pub fn adjointed(self) -> Self {
        LinearBlockMap { adjoint: !self.adjoint, in_dim: self.out_dim, out_dim: self.in_dim, ..self }
    }

    pub fn scaled(self, s: f64) -> Self {
        LinearBlockMap { scale: self.scale * s, ..self }
    }

    pub fn apply(&self, ctx: &MapContext, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        check_dim(x, self.in_dim)?;
        let (base_in, base_out) = self.base_dims();
        let out = if self.adjoint {
            base_adjoint(self.kind, ctx, x.as_matrix(), base_in)
        } else {
            base_forward(self.kind, ctx, x.as_matrix(), base_out)
        };
        HermitianMatrix::new(out * c64(self.scale, 0.0))
    }

    pub fn apply_adjoint(&self, ctx: &MapContext, y: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.adjointed().apply(ctx, y)
    }

    fn base_dims(&self) -> (usize, usize) {
        if self.adjoint {
            (self.out_dim, self.in_dim)
        } else {
            (self.in_dim, self.out_dim)
        }
    }
}

pub fn apply_map(m: &LinearBlockMap, ctx: &MapContext, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    m.apply(ctx, x)
}

pub fn apply_adjoint(m: &LinearBlockMap, ctx: &MapContext, y: &HermitianMatrix) -> Result<HermitianMatrix> {
    m.apply_adjoint(ctx, y)
}

fn check_dim(x: &HermitianMatrix, d: usize) -> Result<()> {
    if x.dim() == d {
        Ok(())
    } else {
        Err(QqcError::DimensionMismatch(format!("map expects dimension {d}, got {}", x.dim())))
    }
}

fn pair_mask(s: usize, x: usize, y: usize, entries: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(s, s);
    for &(i, j) in entries {
        let (a, b) = (if i == 0 { x } else { y }, if j == 0 { x } else { y });
        m[(a, b)] = c64(1.0, 0.0);
    }
    m
}

fn v_mask(s: usize, x: usize, y: usize) -> CMatrix {
    pair_mask(s, x, y, &[(0, 1), (1, 0)])
}

fn off_pair_mask(s: usize, x: usize, y: usize) -> CMatrix {
    let inside = pair_mask(s, x, y, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
    CMatrix::from_element(s, s, c64(1.0, 0.0)) - inside
}

fn scalar(v: f64) -> CMatrix {
    CMatrix::from_element(1, 1, c64(v, 0.0))
}

fn base_forward(kind: MapKind, ctx: &MapContext, x: &CMatrix, out_dim: usize) -> CMatrix {
    let s = ctx.s;
    match kind {
        MapKind::PartialTraceQ => ptrace_fast(x, s, ctx.n),
        MapKind::ConjOmegaThenPartialTraceQ => ptrace_fast(&(&ctx.omega * x * ctx.omega.adjoint()), s, ctx.n),
        MapKind::Identity => x.clone(),
        MapKind::NegIdentity => -x.clone(),
        MapKind::SchurDelta(z) => ctx.deltas[z].as_matrix().component_mul(x),
        MapKind::SchurV(a, b) => v_mask(s, a, b).component_mul(x),
        MapKind::NegSchurV(a, b) => -v_mask(s, a, b).component_mul(x),
        MapKind::SchurOffPair(a, b) => off_pair_mask(s, a, b).component_mul(x),
        MapKind::SumEntries => scalar(x.iter().map(|v| v.re).sum()),
        MapKind::Trace => scalar(x.trace().re),
        MapKind::TraceDelta(z) => scalar((ctx.deltas[z].as_matrix().component_mul(x)).trace().re),
        MapKind::Zero => CMatrix::zeros(out_dim, out_dim),
    }
}

fn base_adjoint(kind: MapKind, ctx: &MapContext, y: &CMatrix, in_dim: usize) -> CMatrix {
    let id_n = CMatrix::identity(ctx.n, ctx.n);
    match kind {
        MapKind::PartialTraceQ => kron(y, &id_n),
        MapKind::ConjOmegaThenPartialTraceQ => ctx.omega.adjoint() * kron(y, &id_n) * &ctx.omega,
        MapKind::Identity
        | MapKind::NegIdentity
        | MapKind::SchurDelta(_)
        | MapKind::SchurV(..)
        | MapKind::NegSchurV(..)
        | MapKind::SchurOffPair(..) => base_forward(kind, ctx, y, in_dim),
        MapKind::SumEntries => CMatrix::from_element(in_dim, in_dim, y[(0, 0)]),
        MapKind::Trace => CMatrix::identity(in_dim, in_dim) * y[(0, 0)],
        MapKind::TraceDelta(z) => ctx.deltas[z].as_matrix() * y[(0, 0)],
        MapKind::Zero => CMatrix::zeros(in_dim, in_dim),
    }
}
