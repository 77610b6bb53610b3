//! Real-vector standard form `A v = b, v ∈ K` of a block program.
//!
//! Each Hermitian block of dimension d becomes d² real coordinates: the
//! diagonal, then `√2·Re H_ij` and `√2·Im H_ij` for every `i < j`. The
//! coordinates are orthonormal for the trace inner product, so Euclidean
//! norms of coordinate vectors equal Frobenius norms.

use nalgebra::{DVector, SymmetricEigen};

use crate::error::Result;
use crate::matlin::{c64, from_real_embedding, real_embedding, CMatrix, HermitianMatrix, RMatrix};
use crate::sdp::{ConeKind, ConicFeasibilityProgram, RowRelation};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CoordKind {
    Diag,
    Re,
    Im,
}

pub(crate) fn coord_kind(d: usize, k: usize) -> CoordKind {
    if k < d {
        CoordKind::Diag
    } else if (k - d).is_multiple_of(2) {
        CoordKind::Re
    } else {
        CoordKind::Im
    }
}

pub(crate) fn herm_to_vec(h: &CMatrix) -> Vec<f64> {
    let d = h.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(h[(i, i)].re);
    }
    for i in 0..d {
        for j in i + 1..d {
            v.push(SQRT2 * h[(i, j)].re);
            v.push(SQRT2 * h[(i, j)].im);
        }
    }
    v
}

pub(crate) fn vec_to_herm(v: &[f64], d: usize) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = c64(v[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = c64(v[k], v[k + 1]) / SQRT2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StdBlock {
    pub offset: usize,
    pub dim: usize,
    pub kind: ConeKind,
}

impl StdBlock {
    pub fn len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct StandardForm {
    pub a: RMatrix,
    pub b: DVector<f64>,
    pub blocks: Vec<StdBlock>,
    /// Equation range of each program row.
    pub rows: Vec<(usize, usize)>,
    pub program_blocks: usize,
}

impl StandardForm {
    pub fn build(prog: &ConicFeasibilityProgram) -> Result<Self> {
        prog.check_well_formed()?;
        let mut blocks = Vec::new();
        let mut offset = 0;
        for b in &prog.variable_cone.blocks {
            blocks.push(StdBlock { offset, dim: b.dim, kind: b.kind });
            offset += b.dim * b.dim;
        }
        let mut slack_of_row = vec![None; prog.rows.len()];
        for (r, row) in prog.rows.iter().enumerate() {
            if row.relation != RowRelation::Equal {
                slack_of_row[r] = Some(blocks.len());
                blocks.push(StdBlock { offset, dim: row.dim(), kind: ConeKind::Psd });
                offset += row.dim() * row.dim();
            }
        }
        let nvars = offset;
        let mut rows = Vec::new();
        let mut m = 0;
        for row in &prog.rows {
            rows.push((m, row.dim() * row.dim()));
            m += row.dim() * row.dim();
        }
        let mut a = RMatrix::zeros(m, nvars);
        let mut b = DVector::zeros(m);
        for (r, row) in prog.rows.iter().enumerate() {
            let (roff, rlen) = rows[r];
            let mut rhs = herm_to_vec(row.rhs.as_matrix());
            if row.relation == RowRelation::Strict {
                let margin = prog.strict_row.map(|s| s.margin).unwrap_or(0.0);
                rhs[0] -= margin;
            }
            for (k, v) in rhs.into_iter().enumerate() {
                b[roff + k] = v;
            }
            for (col, map) in &row.terms {
                let blk = blocks[*col];
                let mut unit = vec![0.0; blk.len()];
                for k in 0..blk.len() {
                    unit[k] = 1.0;
                    let e = HermitianMatrix::new(vec_to_herm(&unit, blk.dim))?;
                    unit[k] = 0.0;
                    let out = herm_to_vec(map.apply(&prog.context, &e)?.as_matrix());
                    for (l, v) in out.into_iter().enumerate() {
                        a[(roff + l, blk.offset + k)] += v;
                    }
                }
            }
            if let Some(sb) = slack_of_row[r] {
                let blk = blocks[sb];
                let sign = if row.relation == RowRelation::Strict { 1.0 } else { -1.0 };
                for l in 0..rlen {
                    a[(roff + l, blk.offset + l)] = sign;
                }
            }
        }
        Ok(StandardForm { a, b, blocks, rows, program_blocks: prog.num_blocks() })
    }

    pub fn nvars(&self) -> usize {
        self.a.ncols()
    }

    pub fn block_matrix(&self, v: &DVector<f64>, k: usize) -> CMatrix {
        let blk = self.blocks[k];
        vec_to_herm(&v.as_slice()[blk.range()], blk.dim)
    }

    pub fn program_point(&self, v: &DVector<f64>) -> Vec<HermitianMatrix> {
        (0..self.program_blocks)
            .map(|k| HermitianMatrix::new(self.block_matrix(v, k)).expect("square block"))
            .collect()
    }

    /// Per-row multipliers read off an equation-space vector.
    pub fn row_matrices(&self, w: &DVector<f64>) -> Vec<HermitianMatrix> {
        self.rows
            .iter()
            .map(|&(off, len)| {
                let d = (len as f64).sqrt().round() as usize;
                HermitianMatrix::new(vec_to_herm(&w.as_slice()[off..off + len], d)).expect("square row")
            })
            .collect()
    }

    pub fn row_residual_norms(&self, r: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().map(|&(off, len)| r.rows(off, len).norm()).collect()
    }
}

/// Euclidean projection of a coordinate block onto the PSD cone, computed
/// through the real-symmetric embedding.
pub(crate) fn project_psd_block(v: &mut [f64], d: usize) {
    if d == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let h = vec_to_herm(v, d);
    let emb = real_embedding(&h);
    let eig = SymmetricEigen::new(emb);
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return;
    }
    let mut scaled = eig.eigenvectors.clone();
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(l.max(0.0));
    }
    let proj = scaled * eig.eigenvectors.transpose();
    let back = herm_to_vec(&from_real_embedding(&proj));
    v.copy_from_slice(&back);
}

pub(crate) fn min_eig_block(v: &[f64], d: usize) -> f64 {
    if d == 1 {
        return v[0];
    }
    let eig = SymmetricEigen::new(real_embedding(&vec_to_herm(v, d)));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{random_hermitian, random_psd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinates_are_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_hermitian(&mut rng, 4);
        let b = random_hermitian(&mut rng, 4);
        let (va, vb) = (herm_to_vec(a.as_matrix()), herm_to_vec(b.as_matrix()));
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - a.inner(&b)).abs() < 1e-12);
        assert!((vec_to_herm(&va, 4) - a.as_matrix()).norm() < 1e-14);
        assert_eq!(coord_kind(3, 2), CoordKind::Diag);
        assert_eq!(coord_kind(3, 3), CoordKind::Re);
        assert_eq!(coord_kind(3, 4), CoordKind::Im);
    }

    #[test]
    fn psd_projection_matches_spectral_clipping() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(&mut rng, 3);
        let mut v = herm_to_vec(h.as_matrix());
        project_psd_block(&mut v, 3);
        let expect = h.psd_part().unwrap();
        assert!((vec_to_herm(&v, 3) - expect.as_matrix()).norm() < 1e-12);
        let p = random_psd(&mut rng, 3, 2);
        let mut v = herm_to_vec(p.as_matrix());
        project_psd_block(&mut v, 3);
        assert!((vec_to_herm(&v, 3) - p.as_matrix()).norm() < 1e-12);
    }
}
