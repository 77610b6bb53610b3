//! SDPA sparse (`.dat-s`) writer and reader.
//!
//! A program `A v = b, v ∈ K` is written in SDPA's dual form
//! `F_k • Y = c_k, Y ⪰ 0` with `c = b` and no objective matrix. When no
//! constraint couples real and imaginary coordinates the real-symmetric
//! subproblem is written at the original block sizes; otherwise every
//! block is written through its real embedding at doubled size. Free
//! blocks are split into a difference of two PSD blocks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{QqcError, Result};
use crate::matlin::{real_embedding, RMatrix};
use crate::sdp::{ConeKind, ConicFeasibilityProgram, ProgramSense};

use super::standard::{coord_kind, vec_to_herm, CoordKind, StandardForm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpaEntry {
    /// Constraint index, 1-based.
    pub k: usize,
    /// Block index, 1-based.
    pub b: usize,
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaProblem {
    pub m: usize,
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

struct Equation {
    row: usize,
}

pub fn to_sdpa(prog: &ConicFeasibilityProgram) -> Result<SdpaProblem> {
    let sf = StandardForm::build(prog)?;
    let real = decouples(&sf);

    let mut eqs = Vec::new();
    for &(off, len) in &sf.rows {
        let d = (len as f64).sqrt().round() as usize;
        for l in 0..len {
            if !real || coord_kind(d, l) != CoordKind::Im {
                eqs.push(Equation { row: off + l });
            }
        }
    }

    let mut block_sizes = Vec::new();
    // (standard block, sign) for each emitted block
    let mut emitted = Vec::new();
    for (k, blk) in sf.blocks.iter().enumerate() {
        let size = if real { blk.dim } else { 2 * blk.dim } as i64;
        let signs: &[f64] = match blk.kind {
            ConeKind::Psd => &[1.0],
            ConeKind::Free => &[1.0, -1.0],
        };
        for &s in signs {
            block_sizes.push(size);
            emitted.push((k, s));
        }
    }

    let mut entries = Vec::new();
    for (e, eq) in eqs.iter().enumerate() {
        for (b, &(k, sign)) in emitted.iter().enumerate() {
            let blk = sf.blocks[k];
            let coeffs: Vec<f64> = sf.a.row(eq.row).columns(blk.offset, blk.len()).iter().map(|x| sign * x).collect();
            if coeffs.iter().all(|x| *x == 0.0) {
                continue;
            }
            let f = vec_to_herm(&coeffs, blk.dim);
            let mat: RMatrix = if real { f.map(|z| z.re) } else { real_embedding(&f) / 2.0 };
            for i in 0..mat.nrows() {
                for j in i..mat.ncols() {
                    let v = mat[(i, j)];
                    if v != 0.0 {
                        entries.push(SdpaEntry { k: e + 1, b: b + 1, i: i + 1, j: j + 1, v });
                    }
                }
            }
        }
    }
    let c = eqs.iter().map(|eq| sf.b[eq.row]).collect();
    Ok(SdpaProblem { m: eqs.len(), block_sizes, c, entries })
}

fn decouples(sf: &StandardForm) -> bool {
    let mut eq_im = vec![false; sf.a.nrows()];
    for &(off, len) in &sf.rows {
        let d = (len as f64).sqrt().round() as usize;
        for l in 0..len {
            eq_im[off + l] = coord_kind(d, l) == CoordKind::Im;
        }
    }
    let mut var_im = vec![false; sf.a.ncols()];
    for blk in &sf.blocks {
        for k in 0..blk.len() {
            var_im[blk.offset + k] = coord_kind(blk.dim, k) == CoordKind::Im;
        }
    }
    for (r, &row_im) in eq_im.iter().enumerate() {
        if row_im && sf.b[r] != 0.0 {
            return false;
        }
        for (c, &col_im) in var_im.iter().enumerate() {
            if row_im != col_im && sf.a[(r, c)] != 0.0 {
                return false;
            }
        }
    }
    true
}

impl SdpaProblem {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.m);
        let _ = writeln!(out, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {:?}", e.k, e.b, e.i, e.j, e.v);
        }
        out
    }

    /// Dense constraint matrix `F_k` restricted to block `b` (both 1-based).
    pub fn constraint_block(&self, k: usize, b: usize) -> RMatrix {
        let d = self.block_sizes[b - 1].unsigned_abs() as usize;
        let mut f = RMatrix::zeros(d, d);
        for e in self.entries.iter().filter(|e| e.k == k && e.b == b) {
            f[(e.i - 1, e.j - 1)] = e.v;
            f[(e.j - 1, e.i - 1)] = e.v;
        }
        f
    }
}

pub fn parse_sdpa(text: &str) -> Result<SdpaProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let err = |line: usize, msg: &str| QqcError::SdpaParse { line, msg: msg.to_string() };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));
    let fields = |l: &str| -> Vec<String> {
        l.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    };

    let (n, l) = next("constraint count")?;
    let m: usize = fields(l).first().and_then(|s| s.parse().ok()).ok_or_else(|| err(n, "bad constraint count"))?;
    let (n, l) = next("block count")?;
    let nb: usize = fields(l).first().and_then(|s| s.parse().ok()).ok_or_else(|| err(n, "bad block count"))?;
    let (n, l) = next("block sizes")?;
    let block_sizes: Vec<i64> = fields(l)
        .iter()
        .take(nb)
        .map(|s| s.parse().map_err(|_| err(n, "bad block size")))
        .collect::<Result<_>>()?;
    if block_sizes.len() != nb || block_sizes.contains(&0) {
        return Err(err(n, "block sizes do not match block count"));
    }
    let (n, l) = next("right-hand side")?;
    let c: Vec<f64> = fields(l)
        .iter()
        .take(m)
        .map(|s| s.parse().map_err(|_| err(n, "bad rhs value")))
        .collect::<Result<_>>()?;
    if c.len() != m {
        return Err(err(n, "rhs length does not match constraint count"));
    }
    let mut entries = Vec::new();
    for (n, l) in lines {
        let f = fields(l);
        if f.len() < 5 {
            return Err(err(n, "entry needs five fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(n, "bad index"));
        let e = SdpaEntry {
            k: int(&f[0])?,
            b: int(&f[1])?,
            i: int(&f[2])?,
            j: int(&f[3])?,
            v: f[4].parse().map_err(|_| err(n, "bad value"))?,
        };
        let size = e.b.checked_sub(1).and_then(|b| block_sizes.get(b)).map(|s| s.unsigned_abs() as usize);
        let Some(size) = size else {
            return Err(err(n, "block index out of range"));
        };
        if e.k > m || e.i == 0 || e.j == 0 || e.i > size || e.j > size || e.i > e.j {
            return Err(err(n, "entry index out of range"));
        }
        entries.push(e);
    }
    Ok(SdpaProblem { m, block_sizes, c, entries })
}

pub fn export_sdpa(prog: &ConicFeasibilityProgram, path: &Path) -> Result<()> {
    if prog.sense != ProgramSense::EqualityPrimal {
        return Err(QqcError::MalformedProgram("SDPA export needs a primal-sense program".into()));
    }
    std::fs::write(path, to_sdpa(prog)?.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::HermitianMatrix;
    use crate::problem::fixtures;
    use crate::sdp::{
        build_primal, BlockLabel, ConeBlock, ConeSpec, ConstraintRow, LinearBlockMap, MapContext, MapKind,
        ProgramSolutionLabels, RowRelation,
    };

    fn trace_program() -> ConicFeasibilityProgram {
        let ctx = MapContext::standalone(1);
        ConicFeasibilityProgram {
            variable_cone: ConeSpec { blocks: vec![ConeBlock { dim: 1, kind: ConeKind::Psd }] },
            labels: ProgramSolutionLabels { names: vec![BlockLabel::Var(0)] },
            rows: vec![ConstraintRow {
                name: "trace".into(),
                relation: RowRelation::Equal,
                terms: vec![(0, LinearBlockMap::new(MapKind::Trace, &ctx, 1))],
                rhs: HermitianMatrix::identity(1),
            }],
            sense: ProgramSense::EqualityPrimal,
            strict_row: None,
            context: ctx,
            certificate_map: None,
        }
    }

    #[test]
    fn one_variable_file() {
        let text = to_sdpa(&trace_program()).unwrap().to_text();
        assert_eq!(text, "1\n1\n1\n1.0\n1 1 1 1 1.0\n");
    }

    #[test]
    fn deutsch_round_trip() {
        let prog = build_primal(&fixtures::deutsch_xor2(), 1, 0.0).unwrap();
        let p = to_sdpa(&prog).unwrap();
        let back = parse_sdpa(&p.to_text()).unwrap();
        assert_eq!(p, back);
        assert!(p.entries.iter().all(|e| e.i <= e.j));
    }

    #[test]
    fn complex_data_uses_doubled_blocks() {
        let prog = build_primal(&fixtures::or2(), 1, 0.1).unwrap();
        let real = to_sdpa(&prog).unwrap();
        let dims = prog.block_dims();
        assert_eq!(real.block_sizes.len(), dims.len());

        let mut p = trace_program();
        p.variable_cone.blocks[0].dim = 2;
        p.rows[0].terms = vec![(0, LinearBlockMap::new(MapKind::Identity, &p.context, 2))];
        p.rows[0].rhs = HermitianMatrix::new(crate::matlin::CMatrix::from_row_slice(
            2,
            2,
            &[
                crate::matlin::c64(1.0, 0.0),
                crate::matlin::c64(0.0, 0.5),
                crate::matlin::c64(0.0, -0.5),
                crate::matlin::c64(1.0, 0.0),
            ],
        ))
        .unwrap();
        let out = to_sdpa(&p).unwrap();
        assert_eq!(out.block_sizes, vec![4]);
        assert_eq!(out.m, 4);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_sdpa("1\n1\n2\n1.0\n1 1 3 3 1.0\n").is_err());
        assert!(parse_sdpa("1\n1\n2\n").is_err());
        assert!(parse_sdpa("2\n1\n{2}\n1.0, 2.0\n1 1 1 2 0.5\n").is_ok());
    }
}
