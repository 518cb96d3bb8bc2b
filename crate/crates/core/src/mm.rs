//! Kronecker-product transforms evaluated as batches of dense matrix
//! products, with exact operation counts.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::KronFactor;
use crate::error::{Error, Result};
use crate::field::{Field, PrimeField};
use crate::par;
use crate::sparse::{check_dim, SparseMatrix};
use crate::transform::OpCount;

/// Largest block side materialized densely in one round.
pub const BLOCK_CAP: usize = 4096;

/// Columns per independent block of a wide product.
const COLUMN_BLOCK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmBackend {
    Naive,
    /// Strassen recursion on zero-padded power-of-two squares, switching to
    /// the naive product at side `threshold` or below.
    StrassenLike { threshold: usize },
}

impl MmBackend {
    pub const DEFAULT_THRESHOLD: usize = 32;

    pub fn strassen() -> Self {
        MmBackend::StrassenLike { threshold: Self::DEFAULT_THRESHOLD }
    }
}

impl fmt::Display for MmBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MmBackend::Naive => write!(f, "naive"),
            MmBackend::StrassenLike { .. } => write!(f, "strassen"),
        }
    }
}

impl std::str::FromStr for MmBackend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(MmBackend::Naive),
            "strassen" => Ok(MmBackend::strassen()),
            _ => Err(Error::InvalidArgument(format!("unknown backend '{s}'"))),
        }
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<E> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<E>,
}

impl<E: Clone> Dense<E> {
    pub fn new(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Dense { rows, cols, data })
    }

    pub fn from_sparse<F: Field<Elem = E>>(m: &SparseMatrix<F>) -> Self {
        Dense { rows: m.rows(), cols: m.cols(), data: m.to_dense().into_iter().flatten().collect() }
    }

    fn cols_range(&self, start: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.data[r * self.cols + start..r * self.cols + start + width]);
        }
        Dense { rows: self.rows, cols: width, data }
    }
}

/// `A B` with the chosen backend; the count covers exactly the operations
/// executed, so padding work is included for the Strassen backend.
pub fn matmul_dense<F: Field>(f: &F, backend: MmBackend, a: &Dense<F::Elem>, b: &Dense<F::Elem>) -> Result<(Dense<F::Elem>, OpCount)> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch { op: "matmul_dense", left: (a.rows, a.cols), right: (b.rows, b.cols) });
    }
    let (m, p) = (a.rows, b.cols);
    let width = match backend {
        MmBackend::Naive => COLUMN_BLOCK,
        MmBackend::StrassenLike { .. } => a.rows.max(a.cols).max(1).next_power_of_two(),
    };
    let blocks = p.div_ceil(width);
    let parts = par::map_range(blocks, |blk| {
        let start = blk * width;
        let w = width.min(p - start);
        let bb = b.cols_range(start, w);
        let mut ops = OpCount::default();
        let c = match backend {
            MmBackend::Naive => naive(f, a, &bb, &mut ops),
            MmBackend::StrassenLike { threshold } => strassen_padded(f, a, &bb, threshold.max(1), &mut ops),
        };
        (c, ops)
    });
    let mut data = vec![f.zero(); m * p];
    let mut ops = OpCount::default();
    for (blk, (c, o)) in parts.into_iter().enumerate() {
        let start = blk * width;
        for r in 0..m {
            data[r * p + start..r * p + start + c.cols].clone_from_slice(&c.data[r * c.cols..(r + 1) * c.cols]);
        }
        ops = ops + o;
    }
    Ok((Dense { rows: m, cols: p, data }, ops))
}

fn naive<F: Field>(f: &F, a: &Dense<F::Elem>, b: &Dense<F::Elem>, ops: &mut OpCount) -> Dense<F::Elem> {
    let (m, k, p) = (a.rows, a.cols, b.cols);
    let mut data = Vec::with_capacity(m * p);
    for i in 0..m {
        for j in 0..p {
            if k == 0 {
                data.push(f.zero());
                continue;
            }
            let mut acc = f.mul(&a.data[i * k], &b.data[j]);
            for t in 1..k {
                let prod = f.mul(&a.data[i * k + t], &b.data[t * p + j]);
                acc = f.add(&acc, &prod);
            }
            data.push(acc);
        }
    }
    ops.mults += (m * k * p) as u64;
    ops.adds += (m * k.saturating_sub(1) * p) as u64;
    Dense { rows: m, cols: p, data }
}

fn pad<E: Clone>(x: &Dense<E>, s: usize, zero: &E) -> Vec<E> {
    let mut out = vec![zero.clone(); s * s];
    for r in 0..x.rows {
        out[r * s..r * s + x.cols].clone_from_slice(&x.data[r * x.cols..(r + 1) * x.cols]);
    }
    out
}

fn strassen_padded<F: Field>(f: &F, a: &Dense<F::Elem>, b: &Dense<F::Elem>, threshold: usize, ops: &mut OpCount) -> Dense<F::Elem> {
    let s = a.rows.max(a.cols).max(b.cols).max(1).next_power_of_two();
    let zero = f.zero();
    let c = strassen(f, &pad(a, s, &zero), &pad(b, s, &zero), s, threshold, ops);
    let mut data = Vec::with_capacity(a.rows * b.cols);
    for r in 0..a.rows {
        data.extend_from_slice(&c[r * s..r * s + b.cols]);
    }
    Dense { rows: a.rows, cols: b.cols, data }
}

fn quadrant<E: Clone>(x: &[E], s: usize, qi: usize, qj: usize) -> Vec<E> {
    let h = s / 2;
    let mut out = Vec::with_capacity(h * h);
    for r in 0..h {
        let base = (qi * h + r) * s + qj * h;
        out.extend_from_slice(&x[base..base + h]);
    }
    out
}

fn elementwise<F: Field>(f: &F, x: &[F::Elem], y: &[F::Elem], sub: bool, ops: &mut OpCount) -> Vec<F::Elem> {
    if sub {
        ops.subs += x.len() as u64;
        x.iter().zip(y).map(|(u, v)| f.sub(u, v)).collect()
    } else {
        ops.adds += x.len() as u64;
        x.iter().zip(y).map(|(u, v)| f.add(u, v)).collect()
    }
}

fn strassen<F: Field>(f: &F, a: &[F::Elem], b: &[F::Elem], s: usize, threshold: usize, ops: &mut OpCount) -> Vec<F::Elem> {
    if s <= threshold {
        let da = Dense { rows: s, cols: s, data: a.to_vec() };
        let db = Dense { rows: s, cols: s, data: b.to_vec() };
        return naive(f, &da, &db, ops).data;
    }
    let h = s / 2;
    let (a11, a12, a21, a22) = (quadrant(a, s, 0, 0), quadrant(a, s, 0, 1), quadrant(a, s, 1, 0), quadrant(a, s, 1, 1));
    let (b11, b12, b21, b22) = (quadrant(b, s, 0, 0), quadrant(b, s, 0, 1), quadrant(b, s, 1, 0), quadrant(b, s, 1, 1));
    let e = |x: &[F::Elem], y: &[F::Elem], sub: bool, ops: &mut OpCount| elementwise(f, x, y, sub, ops);
    let t1 = e(&a11, &a22, false, ops);
    let t2 = e(&b11, &b22, false, ops);
    let m1 = strassen(f, &t1, &t2, h, threshold, ops);
    let t = e(&a21, &a22, false, ops);
    let m2 = strassen(f, &t, &b11, h, threshold, ops);
    let t = e(&b12, &b22, true, ops);
    let m3 = strassen(f, &a11, &t, h, threshold, ops);
    let t = e(&b21, &b11, true, ops);
    let m4 = strassen(f, &a22, &t, h, threshold, ops);
    let t = e(&a11, &a12, false, ops);
    let m5 = strassen(f, &t, &b22, h, threshold, ops);
    let t1 = e(&a21, &a11, true, ops);
    let t2 = e(&b11, &b12, false, ops);
    let m6 = strassen(f, &t1, &t2, h, threshold, ops);
    let t1 = e(&a12, &a22, true, ops);
    let t2 = e(&b21, &b22, false, ops);
    let m7 = strassen(f, &t1, &t2, h, threshold, ops);
    let c11 = {
        let x = e(&m1, &m4, false, ops);
        let x = e(&x, &m5, true, ops);
        e(&x, &m7, false, ops)
    };
    let c12 = e(&m3, &m5, false, ops);
    let c21 = e(&m2, &m4, false, ops);
    let c22 = {
        let x = e(&m1, &m2, true, ops);
        let x = e(&x, &m3, false, ops);
        e(&x, &m6, false, ops)
    };
    let mut c = vec![f.zero(); s * s];
    for r in 0..h {
        c[r * s..r * s + h].clone_from_slice(&c11[r * h..(r + 1) * h]);
        c[r * s + h..(r + 1) * s].clone_from_slice(&c12[r * h..(r + 1) * h]);
        c[(r + h) * s..(r + h) * s + h].clone_from_slice(&c21[r * h..(r + 1) * h]);
        c[(r + h) * s + h..(r + h + 1) * s].clone_from_slice(&c22[r * h..(r + 1) * h]);
    }
    c
}

/// `(M ⊗ I_N) v`: with `v` read as the `q x N` row-major matrix `X`
/// (`X[c, b] = v[c N + b]`), the result is `M X` flattened the same way.
pub fn kron_identity_apply<F: Field>(m: &SparseMatrix<F>, copies: usize, v: &[F::Elem], backend: MmBackend) -> Result<(Vec<F::Elem>, OpCount)> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let q = m.rows();
    if v.len() != q * copies {
        return Err(Error::LengthMismatch { expected: q * copies, got: v.len() });
    }
    kron_identity_dense(m.field(), &Dense::from_sparse(m), copies, v, backend)
}

fn kron_identity_dense<F: Field>(f: &F, m: &Dense<F::Elem>, copies: usize, v: &[F::Elem], backend: MmBackend) -> Result<(Vec<F::Elem>, OpCount)> {
    let x = Dense::new(m.cols, copies, v.to_vec())?;
    let (y, ops) = matmul_dense(f, backend, m, &x)?;
    Ok((y.data, ops))
}

/// Per-round and total operation counts of [`butterflytomm_apply`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MmReport {
    pub rounds: Vec<OpCount>,
    /// `(m, k, p)` of each round's product.
    pub shape: (usize, usize, usize),
}

impl MmReport {
    pub fn total(&self) -> OpCount {
        self.rounds.iter().fold(OpCount::default(), |a, &b| a + b)
    }
}

/// Moves base-`big` digit `slot` of every index (of `k` digits) to the
/// front, or back again when `inverse`.
fn rotate_digit<E: Clone>(v: &[E], big: usize, k: usize, slot: usize, inverse: bool) -> Vec<E> {
    let below = big.pow((k - 1 - slot) as u32);
    let rest = big.pow((k - 1) as u32);
    let mut out = v.to_vec();
    for (idx, x) in v.iter().enumerate() {
        let hi = idx / (below * big);
        let mid = idx / below % big;
        let lo = idx % below;
        let front = mid * rest + hi * below + lo;
        if inverse {
            out[idx] = v[front].clone();
        } else {
            out[front] = x.clone();
        }
    }
    out
}

/// `(M_1 ⊗ ... ⊗ M_n) v` in `k` rounds: block `l` is
/// `M'_l = M_{l n/k + 1} ⊗ ... ⊗ M_{(l+1) n/k}`, and round `l` rotates the
/// block's digit to the front, applies `M'_l ⊗ I`, and rotates back.
pub fn butterflytomm_apply<F: Field>(ms: &[SparseMatrix<F>], k: usize, v: &[F::Elem], backend: MmBackend) -> Result<(Vec<F::Elem>, MmReport)> {
    let n = ms.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty factor list".into()));
    }
    if k == 0 || n % k != 0 {
        return Err(Error::DivisorMismatch(k, n));
    }
    let q = ms[0].rows();
    for m in ms {
        if m.shape() != (q, q) {
            return Err(Error::DimensionMismatch { op: "butterflytomm_apply", left: m.shape(), right: (q, q) });
        }
    }
    let field = ms[0].field().clone();
    let b = n / k;
    let big = check_dim((q as u128).pow(b as u32))?;
    if big > BLOCK_CAP {
        return Err(Error::DimensionCap { dim: big as u128, cap: BLOCK_CAP });
    }
    let total = check_dim((q as u128).pow(n as u32))?;
    if v.len() != total {
        return Err(Error::LengthMismatch { expected: total, got: v.len() });
    }
    let copies = total / big;
    let mut x = v.to_vec();
    let mut rounds = Vec::with_capacity(k);
    for l in 0..k {
        let mut block = SparseMatrix::identity(field.clone(), 1)?;
        for m in &ms[l * b..(l + 1) * b] {
            block = block.kron(m)?;
        }
        let front = rotate_digit(&x, big, k, l, false);
        let (y, ops) = kron_identity_dense(&field, &Dense::from_sparse(&block), copies, &front, backend)?;
        x = rotate_digit(&y, big, k, l, true);
        rounds.push(ops);
    }
    Ok((x, MmReport { rounds, shape: (big, big, copies) }))
}

/// Measured costs of the `k`-round evaluation of a `q^n`-dimensional
/// Kronecker product against the dense `q^n x q^n` product.
#[derive(Clone, Debug, PartialEq)]
pub struct MmCostReport {
    pub q: usize,
    pub n: usize,
    pub k: usize,
    pub backend: MmBackend,
    pub report: MmReport,
    pub dense_mults: u128,
    pub dense_adds: u128,
    /// The round-based result matched the axis-wise Kronecker evaluation.
    pub verified: bool,
}

pub const MM_CSV_HEADER: &str = "q,n,k,backend,mults,adds,dense_mults";

impl MmCostReport {
    pub fn csv_row(&self) -> String {
        let t = self.report.total();
        format!("{},{},{},{},{},{},{}", self.q, self.n, self.k, self.backend, t.mults, t.adds + t.subs, self.dense_mults)
    }
}

/// Runs [`butterflytomm_apply`] on seeded random factors and a random
/// probe vector over the default prime field.
pub fn mm_cost_report(q: usize, n: usize, k: usize, backend: MmBackend, seed: u64) -> Result<MmCostReport> {
    if q < 2 {
        return Err(Error::InvalidArgument("q must be at least 2".into()));
    }
    let f = PrimeField::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ms = (0..n)
        .map(|_| {
            let rows: Vec<Vec<u32>> = (0..q).map(|_| (0..q).map(|_| f.random(&mut rng)).collect()).collect();
            SparseMatrix::from_dense(f.clone(), &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = check_dim((q as u128).pow(n as u32))?;
    let v: Vec<u32> = (0..len).map(|_| f.random(&mut rng)).collect();
    let (y, report) = butterflytomm_apply(&ms, k, &v, backend)?;
    let verified = KronFactor::new(f.clone(), ms)?.apply(&v)? == y;
    let big = len as u128;
    Ok(MmCostReport { q, n, k, backend, report, dense_mults: big * big, dense_adds: big * (big - 1), verified })
}

/// Exponent `k log_{k-1} k` of the rectangular product `n x n` by `n x n^{k-1}`
/// from the best known rectangular algorithms; infinite for `k <= 2`.
pub fn rect_mm_exponent(k: usize) -> f64 {
    if k <= 2 {
        return f64::INFINITY;
    }
    let k = k as f64;
    k * k.ln() / (k - 1.0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disjointness::r1;
    use crate::rigidity::hadamard;
    use proptest::prelude::*;

    fn f7() -> PrimeField {
        PrimeField::new(7).unwrap()
    }

    fn random_dense(f: &PrimeField, r: usize, c: usize, rng: &mut ChaCha8Rng) -> Dense<u32> {
        Dense { rows: r, cols: c, data: (0..r * c).map(|_| f.random(rng)).collect() }
    }

    fn dense_kron_apply(ms: &[SparseMatrix<PrimeField>], v: &[u32]) -> Vec<u32> {
        let mut m = SparseMatrix::identity(ms[0].field().clone(), 1).unwrap();
        for x in ms {
            m = m.kron(x).unwrap();
        }
        m.apply(v).unwrap()
    }

    #[test]
    fn kron_identity_examples() {
        let f = f7();
        let h = hadamard(&f, 1).unwrap();
        let v: Vec<u32> = [1, 2, 3, 4].iter().map(|&x| f.from_i64(x)).collect();
        for backend in [MmBackend::Naive, MmBackend::strassen()] {
            let (y, _) = kron_identity_apply(&h, 2, &v, backend).unwrap();
            let want: Vec<u32> = [4, 6, -2, -2].iter().map(|&x| f.from_i64(x)).collect();
            assert_eq!(y, want);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = SparseMatrix::from_dense(f.clone(), &random_dense(&f, 3, 3, &mut rng).data.chunks(3).map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        let v: Vec<u32> = (0..3).map(|_| f.random(&mut rng)).collect();
        assert_eq!(kron_identity_apply(&m, 1, &v, MmBackend::Naive).unwrap().0, m.apply(&v).unwrap());
        let v: Vec<u32> = (0..15).map(|_| f.random(&mut rng)).collect();
        let dense = m.kron(&SparseMatrix::identity(f.clone(), 5).unwrap()).unwrap();
        for backend in [MmBackend::Naive, MmBackend::strassen(), MmBackend::StrassenLike { threshold: 1 }] {
            assert_eq!(kron_identity_apply(&m, 5, &v, backend).unwrap().0, dense.apply(&v).unwrap());
        }
        assert!(matches!(kron_identity_apply(&m, 5, &v[..14], MmBackend::Naive), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn naive_counts() {
        let f = f7();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, k, p) in [(1, 1, 1), (3, 4, 5), (16, 16, 300), (7, 1, 2)] {
            let a = random_dense(&f, m, k, &mut rng);
            let b = random_dense(&f, k, p, &mut rng);
            let (_, ops) = matmul_dense(&f, MmBackend::Naive, &a, &b).unwrap();
            assert_eq!(ops.mults, (m * k * p) as u64);
            assert_eq!(ops.adds, (m * (k - 1) * p) as u64);
        }
    }

    #[test]
    fn strassen_mults_power_of_seven() {
        let f = f7();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for a in 0..=6u32 {
            let s = 1usize << a;
            let x = random_dense(&f, s, s, &mut rng);
            let y = random_dense(&f, s, s, &mut rng);
            let (c, ops) = matmul_dense(&f, MmBackend::StrassenLike { threshold: 1 }, &x, &y).unwrap();
            assert_eq!(ops.mults, 7u64.pow(a), "a={a}");
            if a <= 5 {
                assert_eq!(c, matmul_dense(&f, MmBackend::Naive, &x, &y).unwrap().0);
            }
        }
    }

    #[test]
    fn strassen_beats_naive_at_64() {
        let f = f7();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_dense(&f, 64, 64, &mut rng);
        let y = random_dense(&f, 64, 64, &mut rng);
        let (c1, n) = matmul_dense(&f, MmBackend::Naive, &x, &y).unwrap();
        let (c2, s) = matmul_dense(&f, MmBackend::strassen(), &x, &y).unwrap();
        assert_eq!(c1, c2);
        assert!(s.mults < n.mults);
        assert_eq!(s.mults, 7 * 32u64.pow(3));
    }

    #[test]
    fn strassen_rectangular_and_padding() {
        let f = f7();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, k, p) in [(3, 5, 7), (5, 3, 40), (1, 9, 2), (17, 17, 33)] {
            let a = random_dense(&f, m, k, &mut rng);
            let b = random_dense(&f, k, p, &mut rng);
            for threshold in [1, 2, 4] {
                let got = matmul_dense(&f, MmBackend::StrassenLike { threshold }, &a, &b).unwrap().0;
                assert_eq!(got, matmul_dense(&f, MmBackend::Naive, &a, &b).unwrap().0);
            }
        }
        let a = random_dense(&f, 2, 3, &mut rng);
        assert!(matmul_dense(&f, MmBackend::Naive, &a, &a).is_err());
    }

    #[test]
    fn hadamard_rounds() {
        let f = PrimeField::default();
        let h = hadamard(&f, 1).unwrap();
        let ms = vec![h; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v: Vec<u32> = (0..256).map(|_| f.random(&mut rng)).collect();
        let want = dense_kron_apply(&ms, &v);
        for backend in [MmBackend::Naive, MmBackend::strassen(), MmBackend::StrassenLike { threshold: 2 }] {
            let (y, rep) = butterflytomm_apply(&ms, 2, &v, backend).unwrap();
            assert_eq!(y, want);
            assert_eq!(rep.rounds.len(), 2);
            assert_eq!(rep.shape, (16, 16, 16));
        }
        let (y, rep) = butterflytomm_apply(&ms, 8, &v, MmBackend::Naive).unwrap();
        assert_eq!(y, want);
        assert_eq!(rep.shape, (2, 2, 128));
        assert!(rep.rounds.iter().all(|r| r.mults == 512 && r.adds == 256));
    }

    #[test]
    fn mixed_rounds() {
        let f = f7();
        let h = hadamard(&f, 1).unwrap();
        let r = r1(&f).unwrap();
        let ms: Vec<_> = (0..8).map(|i| if i % 2 == 0 { h.clone() } else { r.clone() }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<u32> = (0..256).map(|_| f.random(&mut rng)).collect();
        let want = dense_kron_apply(&ms, &v);
        for k in [1, 2, 4, 8] {
            for backend in [MmBackend::Naive, MmBackend::strassen()] {
                assert_eq!(butterflytomm_apply(&ms, k, &v, backend).unwrap().0, want, "k={k}");
            }
        }
        assert!(matches!(butterflytomm_apply(&ms, 3, &v, MmBackend::Naive), Err(Error::DivisorMismatch(3, 8))));
        assert!(matches!(butterflytomm_apply(&ms, 0, &v, MmBackend::Naive), Err(Error::DivisorMismatch(0, 8))));
    }

    #[test]
    fn cost_reports() {
        let r = mm_cost_report(2, 8, 2, MmBackend::Naive, 0).unwrap();
        assert!(r.verified);
        assert!(r.report.rounds.iter().all(|o| o.mults == 16 * 16 * 16));
        assert_eq!(r.dense_mults, 65536);
        assert_eq!(r.csv_row(), format!("2,8,2,naive,8192,{},65536", 2 * 16 * 15 * 16));
        let r = mm_cost_report(2, 8, 8, MmBackend::Naive, 0).unwrap();
        assert!(r.verified);
        assert_eq!(r.report.total().mults, 2 * 256 * 8);
        let r = mm_cost_report(3, 4, 2, MmBackend::strassen(), 1).unwrap();
        assert!(r.verified);
    }

    #[test]
    fn exponent_curve() {
        assert!(rect_mm_exponent(2).is_infinite());
        assert!((rect_mm_exponent(3) - 3.0 * 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for k in 3..40 {
            let e = rect_mm_exponent(k);
            assert!(e > k as f64 && e - (k as f64) < prev);
            prev = e - k as f64;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn rounds_match_dense(q in 2usize..4, b in 1usize..3, k in 1usize..4, seed in any::<u64>(), strassen in any::<bool>()) {
            let f = f7();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = b * k;
            prop_assume!(q.pow(n as u32) <= 729);
            let ms: Vec<_> = (0..n).map(|_| {
                let d = random_dense(&f, q, q, &mut rng);
                SparseMatrix::from_dense(f.clone(), &d.data.chunks(q).map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
            }).collect();
            let v: Vec<u32> = (0..q.pow(n as u32)).map(|_| f.random(&mut rng)).collect();
            let backend = if strassen { MmBackend::StrassenLike { threshold: 1 } } else { MmBackend::Naive };
            let (y, rep) = butterflytomm_apply(&ms, k, &v, backend).unwrap();
            prop_assert_eq!(y, dense_kron_apply(&ms, &v));
            if !strassen {
                let (m, kk, p) = rep.shape;
                prop_assert!(rep.rounds.iter().all(|r| r.mults == (m * kk * p) as u64));
            }
        }
    }
}
