//! Block-diagonal semidefinite programs over Hermitian matrices.
//!
//! The canonical form is the equality-constrained primal
//! `min ⟨C,X⟩ s.t. ⟨A_i,X⟩ = b_i, X ⪰ 0`; complex data goes through the
//! real embedding H ↦ [[Re H, −Im H],[Im H, Re H]] before solving.
//! Most callers build problems through [`model::Lmi`].

pub mod ipm;
pub mod model;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};
use ipm::{IpmOptions, RawStatus, RealSdp, RMat, SpCons, SpEntry};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Sparse Hermitian coefficients spread over the blocks. Both triangles are
/// stored; `(block,row,col) → value`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockCoeffs {
    pub entries: BTreeMap<(usize, usize, usize), C64>,
}

impl BlockCoeffs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add v at (r,c) and conj(v) at (c,r).
    pub fn add_herm(&mut self, block: usize, row: usize, col: usize, v: C64) {
        if row == col {
            *self.entries.entry((block, row, row)).or_default() += C64::new(v.re, 0.0);
        } else {
            *self.entries.entry((block, row, col)).or_default() += v;
            *self.entries.entry((block, col, row)).or_default() += v.conj();
        }
    }

    /// Add a raw entry; the caller keeps the pattern Hermitian.
    pub fn add_raw(&mut self, block: usize, row: usize, col: usize, v: C64) {
        *self.entries.entry((block, row, col)).or_default() += v;
    }

    pub fn from_dense(block: usize, m: &CMat) -> Self {
        let mut out = Self::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    out.add_raw(block, i, j, m[(i, j)]);
                }
            }
        }
        out
    }

    pub fn prune(&mut self) {
        self.entries.retain(|_, v| v.norm() > 0.0);
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    pub fn dense_block(&self, block: usize, n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for (&(b, r, cc), &v) in &self.entries {
            if b == block {
                m[(r, cc)] += v;
            }
        }
        m
    }

    /// Re Σ conj(A_rc) X_rc over blocks.
    pub fn pair(&self, x: &[CMat]) -> f64 {
        self.entries.iter().map(|(&(b, r, cc), v)| (v.conj() * x[b][(r, cc)]).re).sum()
    }

    fn hermitian_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&(b, r, cc), v) in &self.entries {
            let w = self.entries.get(&(b, cc, r)).copied().unwrap_or_default();
            worst = worst.max((v - w.conj()).norm());
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: BlockCoeffs,
    pub rhs: f64,
}

/// min ⟨C,X⟩ s.t. ⟨A_i,X⟩ = b_i, X = ⊕ X_k ⪰ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: BlockCoeffs,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal_blocks: Vec<CMat>,
    pub dual_multipliers: Vec<f64>,
    /// Z = C − Σ y_i A_i
    pub dual_slack: Vec<CMat>,
    pub gap: f64,
    pub status: SdpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Set when the solver stopped on an improving ray.
    pub infeasible_side: Option<&'static str>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpProblem { blocks, objective: BlockCoeffs::new(), constraints: vec![] }
    }

    pub fn add_constraint(&mut self, coeffs: BlockCoeffs, rhs: f64) {
        self.constraints.push(Constraint { coeffs, rhs });
    }

    pub fn is_real(&self) -> bool {
        self.objective.is_real() && self.constraints.iter().all(|k| k.coeffs.is_real())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |bc: &BlockCoeffs| -> Result<()> {
            for &(b, r, cc) in bc.entries.keys() {
                if b >= self.blocks.len() || r >= self.blocks[b] || cc >= self.blocks[b] {
                    return Err(Error::Shape(format!("coefficient ({b},{r},{cc}) outside blocks")));
                }
            }
            let res = bc.hermitian_residual();
            if res > 1e-12 {
                return Err(Error::NotHermitian(res));
            }
            Ok(())
        };
        check(&self.objective)?;
        for k in &self.constraints {
            check(&k.coeffs)?;
            if !k.rhs.is_finite() {
                return Err(Error::Invalid("non-finite right-hand side".into()));
            }
        }
        Ok(())
    }

    /// Objective value of a fixed point.
    pub fn objective_at(&self, x: &[CMat]) -> f64 {
        self.objective.pair(x)
    }

    pub fn residual_at(&self, x: &[CMat]) -> f64 {
        self.constraints
            .iter()
            .map(|k| (k.coeffs.pair(x) - k.rhs).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn embed_coeffs(bc: &BlockCoeffs, blocks: &[usize], scale: f64) -> BlockCoeffs {
    let mut out = BlockCoeffs::new();
    for (&(b, r, cc), v) in &bc.entries {
        let n = blocks[b];
        let re = v.re * scale;
        let im = v.im * scale;
        if re != 0.0 {
            out.add_raw(b, r, cc, C64::new(re, 0.0));
            out.add_raw(b, r + n, cc + n, C64::new(re, 0.0));
        }
        if im != 0.0 {
            out.add_raw(b, r + n, cc, C64::new(im, 0.0));
            out.add_raw(b, r, cc + n, C64::new(-im, 0.0));
        }
    }
    out.prune();
    out
}

/// Real symmetric program with the same optimal value: every block doubles
/// in size and all data is scaled by ½.
pub fn embed_hermitian(p: &SdpProblem) -> SdpProblem {
    let blocks2: Vec<usize> = p.blocks.iter().map(|n| 2 * n).collect();
    SdpProblem {
        objective: embed_coeffs(&p.objective, &p.blocks, 0.5),
        constraints: p
            .constraints
            .iter()
            .map(|k| Constraint { coeffs: embed_coeffs(&k.coeffs, &p.blocks, 0.5), rhs: k.rhs })
            .collect(),
        blocks: blocks2,
    }
}

fn to_real(p: &SdpProblem) -> RealSdp {
    let c = p
        .blocks
        .iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut m = RMat::zeros(n, n);
            for (&(bb, r, cc), v) in &p.objective.entries {
                if bb == b {
                    m[(r, cc)] += v.re;
                }
            }
            m
        })
        .collect();
    let a = p
        .constraints
        .iter()
        .map(|k| {
            SpCons::new(
                k.coeffs
                    .entries
                    .iter()
                    .filter(|(_, v)| v.re != 0.0)
                    .map(|(&(b, r, cc), v)| SpEntry { block: b, row: r, col: cc, val: v.re })
                    .collect(),
            )
        })
        .collect();
    RealSdp { blocks: p.blocks.clone(), c, a, b: p.constraints.iter().map(|k| k.rhs).collect() }
}

fn rmat_to_c(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

fn unembed(m: &RMat, n: usize, factor: f64) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        c(
            (m[(i, j)] + m[(i + n, j + n)]) * factor,
            (m[(i + n, j)] - m[(i, j + n)]) * factor,
        )
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: DEFAULT_TOL, max_iter: 200 }
    }
}

pub fn solve(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_with(p, SolveOptions { tol, ..Default::default() })
}

pub fn solve_with(p: &SdpProblem, opts: SolveOptions) -> Result<SdpSolution> {
    if !(1e-12..=1e-4).contains(&opts.tol) {
        return Err(Error::Domain(format!("tol {} outside [1e-12, 1e-4]", opts.tol)));
    }
    let total: usize = p.blocks.iter().sum();
    if total > 256 {
        return Err(Error::Domain(format!("total block dimension {total} exceeds 256")));
    }
    p.validate()?;
    let complex = !p.is_real();
    let work = if complex { embed_hermitian(p) } else { p.clone() };
    let mut real = to_real(&work);

    // presolve: drop dependent rows, remembering them for the final check
    let dep = ipm::dependent_rows(&real.a, &real.blocks, 1e-12);
    if !dep.is_empty() {
        let keep: Vec<usize> = (0..real.a.len()).filter(|i| !dep.contains(i)).collect();
        real.a = keep.iter().map(|&i| real.a[i].clone()).collect();
        real.b = keep.iter().map(|&i| real.b[i]).collect();
    }
    let kept: Vec<usize> = (0..p.constraints.len()).filter(|i| !dep.contains(i)).collect();

    let raw = ipm::solve_real(
        &real,
        &IpmOptions { tol: opts.tol, max_iter: opts.max_iter, ..Default::default() },
    );

    let (primal_blocks, dual_slack): (Vec<CMat>, Vec<CMat>) = if complex {
        (
            raw.x.iter().zip(&p.blocks).map(|(m, &n)| unembed(m, n, 0.5)).collect(),
            raw.z.iter().zip(&p.blocks).map(|(m, &n)| unembed(m, n, 1.0)).collect(),
        )
    } else {
        (raw.x.iter().map(rmat_to_c).collect(), raw.z.iter().map(rmat_to_c).collect())
    };
    let mut y = vec![0.0; p.constraints.len()];
    for (k, &i) in kept.iter().enumerate() {
        y[i] = raw.y[k];
    }

    let mut status = match raw.status {
        RawStatus::Optimal => SdpStatus::Optimal,
        RawStatus::PrimalInfeasible | RawStatus::DualInfeasible => SdpStatus::Infeasible,
        RawStatus::NumericalLimit => SdpStatus::NumericalLimit,
    };
    let infeasible_side = match raw.status {
        RawStatus::PrimalInfeasible => Some("primal"),
        RawStatus::DualInfeasible => Some("dual"),
        _ => None,
    };
    let bnorm = p.constraints.iter().map(|k| k.rhs * k.rhs).sum::<f64>().sqrt();
    let primal_residual = p.residual_at(&primal_blocks) / (1.0 + bnorm);
    // dropped rows must still hold at the returned point
    if status == SdpStatus::Optimal && !dep.is_empty() && primal_residual > 1e3 * opts.tol {
        status = SdpStatus::Infeasible;
    }
    let primal_value = raw.pobj;
    let dual_value = raw.dobj;
    Ok(SdpSolution {
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs(),
        primal_blocks,
        dual_multipliers: y,
        dual_slack,
        status,
        primal_residual,
        dual_residual: raw.dinf,
        iterations: raw.iterations,
        infeasible_side,
    })
}

// ---- JSON dump/load -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JsonConstraint {
    coeffs: Vec<Vec<Vec<[f64; 2]>>>,
    rhs: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonProblem {
    blocks: Vec<usize>,
    objective: Vec<Vec<Vec<[f64; 2]>>>,
    constraints: Vec<JsonConstraint>,
}

fn dense_blocks(bc: &BlockCoeffs, blocks: &[usize]) -> Vec<Vec<Vec<[f64; 2]>>> {
    blocks
        .iter()
        .enumerate()
        .map(|(b, &n)| {
            let m = bc.dense_block(b, n);
            (0..n).map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
        })
        .collect()
}

fn parse_blocks(raw: &[Vec<Vec<[f64; 2]>>], blocks: &[usize]) -> Result<BlockCoeffs> {
    if raw.len() != blocks.len() {
        return Err(Error::Shape("block count mismatch".into()));
    }
    let mut out = BlockCoeffs::new();
    for (b, (rows, &n)) in raw.iter().zip(blocks).enumerate() {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("block {b} is not {n}x{n}")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v[0] != 0.0 || v[1] != 0.0 {
                    out.add_raw(b, i, j, c(v[0], v[1]));
                }
            }
        }
    }
    Ok(out)
}

impl SdpProblem {
    pub fn to_json(&self) -> String {
        let jp = JsonProblem {
            blocks: self.blocks.clone(),
            objective: dense_blocks(&self.objective, &self.blocks),
            constraints: self
                .constraints
                .iter()
                .map(|k| JsonConstraint { coeffs: dense_blocks(&k.coeffs, &self.blocks), rhs: k.rhs })
                .collect(),
        };
        serde_json::to_string(&jp).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let jp: JsonProblem = serde_json::from_str(s).map_err(|e| Error::Invalid(e.to_string()))?;
        let p = SdpProblem {
            objective: parse_blocks(&jp.objective, &jp.blocks)?,
            constraints: jp
                .constraints
                .iter()
                .map(|k| Ok(Constraint { coeffs: parse_blocks(&k.coeffs, &jp.blocks)?, rhs: k.rhs }))
                .collect::<Result<_>>()?,
            blocks: jp.blocks,
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, lambda_max, r};

    #[test]
    fn one_by_one_with_slack() {
        // min x s.t. x − s = 1, (x, s) ⪰ 0 as two 1×1 blocks
        let mut p = SdpProblem::new(vec![1, 1]);
        p.objective.add_herm(0, 0, 0, r(1.0));
        let mut k = BlockCoeffs::new();
        k.add_herm(0, 0, 0, r(1.0));
        k.add_herm(1, 0, 0, r(-1.0));
        p.add_constraint(k, 1.0);
        let s = solve(&p, 1e-9).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_value - 1.0).abs() < 1e-8);
        assert!((s.dual_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_forcing_gives_lambda_max() {
        // max ⟨A,X⟩ s.t. Tr X = 1 ⇔ min ⟨−A,X⟩
        let a = from_real(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]);
        let mut p = SdpProblem::new(vec![3]);
        p.objective = BlockCoeffs::from_dense(0, &(-&a));
        let mut k = BlockCoeffs::new();
        for i in 0..3 {
            k.add_herm(0, i, i, r(1.0));
        }
        p.add_constraint(k, 1.0);
        let s = solve(&p, 1e-10).unwrap();
        assert!((-s.primal_value - lambda_max(&a)).abs() < 1e-8);
    }

    #[test]
    fn pauli_y_embeds_antisymmetric() {
        let mut p = SdpProblem::new(vec![2]);
        p.objective.add_herm(0, 0, 1, c(0.0, -1.0));
        let e = embed_hermitian(&p);
        let m = e.objective.dense_block(0, 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)].im, 0.0);
                assert_eq!(m[(i, j)].re, m[(j, i)].re);
            }
        }
        // lower-left block carries Im Y, which is antisymmetric
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(2 + i, j)].re, -m[(2 + j, i)].re);
                assert_eq!(m[(i, j)].re, 0.0);
            }
        }
        assert!(m[(3, 0)].re != 0.0);
    }

    #[test]
    fn real_one_by_one_embedding_is_diagonal_copy() {
        let mut p = SdpProblem::new(vec![1]);
        p.objective.add_herm(0, 0, 0, r(3.0));
        let e = embed_hermitian(&p);
        let m = e.objective.dense_block(0, 2);
        assert_eq!(m[(0, 0)].re, 1.5);
        assert_eq!(m[(1, 1)].re, 1.5);
        assert_eq!(m[(0, 1)].re, 0.0);
    }

    #[test]
    fn infeasible_program_flagged() {
        let mut p = SdpProblem::new(vec![1]);
        p.objective.add_herm(0, 0, 0, r(1.0));
        let mut k = BlockCoeffs::new();
        k.add_herm(0, 0, 0, r(1.0));
        p.add_constraint(k, -1.0);
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
        assert_eq!(s.infeasible_side, Some("primal"));
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = SdpProblem::new(vec![1]);
        assert!(solve(&p, 1e-2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut p = SdpProblem::new(vec![2]);
        p.objective.add_herm(0, 0, 1, c(0.5, -0.25));
        let mut k = BlockCoeffs::new();
        k.add_herm(0, 0, 0, r(1.0));
        k.add_herm(0, 1, 1, r(1.0));
        p.add_constraint(k, 1.0);
        let q = SdpProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }
}
