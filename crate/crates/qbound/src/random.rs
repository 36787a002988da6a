//! Seeded random instances for property suites and sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c, CMat, C64};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn ginibre(rows: usize, cols: usize, rng: &mut Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(gauss(rng), gauss(rng)))
}

pub fn hermitian(n: usize, rng: &mut Rng) -> CMat {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar unitary via QR with the diagonal phases fixed.
pub fn unitary(n: usize, rng: &mut Rng) -> CMat {
    isometry(n, n, rng)
}

/// Haar isometry from C^cols into C^rows.
pub fn isometry(rows: usize, cols: usize, rng: &mut Rng) -> CMat {
    assert!(rows >= cols);
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..cols {
        let d = rr[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= ph);
    }
    q
}

pub fn pure_ket(n: usize, rng: &mut Rng) -> CMat {
    let g = ginibre(n, 1, rng);
    let nn = g.norm();
    g.unscale(nn)
}

/// Induced-measure mixed state of the given rank.
pub fn density(n: usize, rank: usize, rng: &mut Rng) -> CMat {
    let g = ginibre(n, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m.unscale(t)
}

pub fn full_rank_density(n: usize, rng: &mut Rng) -> CMat {
    density(n, n, rng)
}

/// Kraus operators of a random channel from a Haar isometry into out⊗env.
pub fn kraus_ops(din: usize, dout: usize, nkraus: usize, rng: &mut Rng) -> Vec<CMat> {
    let v = isometry(dout * nkraus, din, rng);
    (0..nkraus)
        .map(|k| CMat::from_fn(dout, din, |i, j| v[(i * nkraus + k, j)]))
        .collect()
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.gen_range(lo..hi)
}
