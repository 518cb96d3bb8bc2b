//! The disjointness matrix `R_n[x, y] = [x AND y = 0]`: generation, dense
//! row/column removal, the square/rectangle partition and its factorization,
//! and entropy helpers.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::circuit::SynchronousCircuit;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::par;
use crate::rigidity::{binomial, RigidityDecomposition};
use crate::sparse::{check_dim, SparseMatrix};
use crate::synth::{lift_power, symmetrized_depth_d, TwoFactorization};

/// Largest `n` for which `R_n` is built explicitly.
pub const MAX_DISJOINTNESS_N: usize = 26;

/// Largest `n` for which [`dense_removal`] scans rows directly.
pub const SCAN_LIMIT: usize = 16;

fn check_n(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::DimensionCap { dim: 1u128 << n, cap: 1usize << limit });
    }
    check_dim(1u128 << n)?;
    Ok(())
}

/// `R_1 = [[1, 1], [1, 0]]`.
pub fn r1<F: Field>(f: &F) -> Result<SparseMatrix<F>> {
    SparseMatrix::from_int_rows(f.clone(), &[vec![1, 1], vec![1, 0]])
}

/// Columns `y` with `x AND y = 0`, ascending: the submasks of `!x`.
fn disjoint_cols(n: usize, x: usize) -> Vec<usize> {
    let comp = !x & ((1 << n) - 1);
    let mut out = Vec::with_capacity(1 << comp.count_ones());
    let mut y = 0usize;
    loop {
        out.push(y);
        if y == comp {
            break;
        }
        y = (y.wrapping_sub(comp)) & comp;
    }
    out
}

pub fn disjointness_matrix<F: Field>(f: &F, n: usize) -> Result<SparseMatrix<F>> {
    check_n(n, MAX_DISJOINTNESS_N)?;
    let one = f.one();
    SparseMatrix::from_row_fn(f.clone(), 1 << n, 1 << n, |x| {
        disjoint_cols(n, x).into_iter().map(|y| (y, one.clone())).collect()
    })
}

/// `sum_{i < k} C(n, i)` (exclusive) or `sum_{i <= k} C(n, i)` (inclusive).
pub fn binom_cum(n: u64, k: u64, inclusive: bool) -> BigUint {
    let top = if inclusive { k.min(n) + 1 } else { k.min(n + 1) };
    let mut term = BigUint::one();
    let mut acc = BigUint::zero();
    for i in 0..top {
        acc += &term;
        term = term * (n - i) / (i + 1);
    }
    acc
}

fn binom_cum_u128(n: u64, k: u64, inclusive: bool) -> u128 {
    binom_cum(n, k, inclusive).to_u128().expect("fits")
}

/// Result of removing every row and column of weight below `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovalReport {
    pub n: usize,
    pub k: usize,
    /// Rows removed; the same number of columns is removed.
    pub removed: u128,
    pub residual_row_nnz: u128,
    pub residual_col_nnz: u128,
    /// `C(n - k, <= n - 2k)`.
    pub bound: u128,
    /// Whether the residual counts came from a direct scan.
    pub scanned: bool,
}

impl RemovalReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n, self.k, self.removed, self.residual_row_nnz, self.residual_col_nnz, self.bound
        )
    }
}

pub const REMOVAL_CSV_HEADER: &str = "n,k,removed,residual_row_nnz,residual_col_nnz,bound";

fn check_removal_args(n: usize, k: usize) -> Result<()> {
    if k == 0 || 2 * k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n/2, got n={n} k={k}")));
    }
    Ok(())
}

/// Indices of weight below `k`, ascending.
pub fn light_indices(n: usize, k: usize) -> Vec<usize> {
    (0..1usize << n).filter(|x| (x.count_ones() as usize) < k).collect()
}

/// Residual sparsity by scanning every surviving row and column.
pub fn dense_removal_scan(n: usize, k: usize) -> Result<RemovalReport> {
    check_removal_args(n, k)?;
    check_n(n, SCAN_LIMIT)?;
    let heavy = |z: usize| z.count_ones() as usize >= k;
    let counts = par::map_range(1 << n, |x| {
        if !heavy(x) {
            return 0u128;
        }
        disjoint_cols(n, x).into_iter().filter(|&y| heavy(y)).count() as u128
    });
    let row_max = counts.iter().copied().max().unwrap_or(0);
    // R_n is symmetric, but columns are scanned independently all the same.
    let col_counts = par::map_range(1 << n, |y| {
        if !heavy(y) {
            return 0u128;
        }
        (0..1usize << n).filter(|&x| heavy(x) && x & y == 0).count() as u128
    });
    let col_max = col_counts.iter().copied().max().unwrap_or(0);
    Ok(RemovalReport {
        n,
        k,
        removed: (0..1usize << n).filter(|&x| !heavy(x)).count() as u128,
        residual_row_nnz: row_max,
        residual_col_nnz: col_max,
        bound: binom_cum_u128((n - k) as u64, (n - 2 * k) as u64, true),
        scanned: true,
    })
}

/// Residual sparsity by counting: a surviving row of weight `w` keeps
/// `sum_{j >= k} C(n - w, j)` entries.
pub fn dense_removal_count(n: usize, k: usize) -> Result<RemovalReport> {
    check_removal_args(n, k)?;
    let best = (k..=n)
        .map(|w| (k..=n - w).map(|j| binomial((n - w) as u64, j as u64)).sum::<u128>())
        .max()
        .unwrap_or(0);
    Ok(RemovalReport {
        n,
        k,
        removed: binom_cum_u128(n as u64, k as u64, false),
        residual_row_nnz: best,
        residual_col_nnz: best,
        bound: binom_cum_u128((n - k) as u64, (n - 2 * k) as u64, true),
        scanned: false,
    })
}

/// Scans when `n <= SCAN_LIMIT`, counts otherwise.
pub fn dense_removal(n: usize, k: usize) -> Result<RemovalReport> {
    if n <= SCAN_LIMIT {
        dense_removal_scan(n, k)
    } else {
        dense_removal_count(n, k)
    }
}

/// `k = floor(a n)`.
pub fn removal_threshold(n: usize, a: &BigRational) -> usize {
    (a * BigRational::from_integer(n.into())).floor().to_integer().to_usize().unwrap_or(0)
}

/// `R_n = L + S` where `L` carries the rows and columns of weight below
/// `k = floor(a n)` as explicit outer products, and `S` is the residual.
/// `L = E_X R[X, :] + R[not X, Y] E_Y^T`, so its rank is at most `|X| + |Y|`.
pub fn rn_rigidity_decomposition<F: Field>(f: &F, n: usize, a: &BigRational) -> Result<RigidityDecomposition<F>> {
    let k = removal_threshold(n, a);
    let r = disjointness_matrix(f, n)?;
    let size = 1usize << n;
    let light = light_indices(n, k);
    let m = light.len();
    let mut pos = vec![usize::MAX; size];
    for (p, &x) in light.iter().enumerate() {
        pos[x] = p;
    }
    let one = f.one();
    // low_left = [E_X | R[:, Y] with rows in X cleared]
    let low_left = SparseMatrix::from_row_fn(f.clone(), size, 2 * m, |x| {
        if pos[x] != usize::MAX {
            vec![(pos[x], one.clone())]
        } else {
            disjoint_cols(n, x)
                .into_iter()
                .filter(|&y| pos[y] != usize::MAX)
                .map(|y| (m + pos[y], one.clone()))
                .collect()
        }
    })?;
    // low_right = [R[X, :] ; E_Y^T]
    let low_right = SparseMatrix::from_row_fn(f.clone(), 2 * m, size, |p| {
        if p < m {
            disjoint_cols(n, light[p]).into_iter().map(|y| (y, one.clone())).collect()
        } else {
            vec![(light[p - m], one.clone())]
        }
    })?;
    let sparse = SparseMatrix::from_row_fn(f.clone(), size, size, |x| {
        if pos[x] != usize::MAX {
            return vec![];
        }
        disjoint_cols(n, x).into_iter().filter(|&y| pos[y] == usize::MAX).map(|y| (y, one.clone())).collect()
    })?;
    Ok(RigidityDecomposition::new(r, 2 * m, low_left, low_right, sparse))
}

/// Binary entropy in bits, `0 log 0 = 0`.
pub fn entropy(p: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

pub fn entropy_rational(p: &BigRational) -> f64 {
    entropy(crate::field::rational_to_f64(p))
}

/// `(1 - a) H((1 - 2a) / (1 - a))`, the exponent of the residual sparsity.
pub fn residual_exponent(a: f64) -> f64 {
    (1.0 - a) * entropy((1.0 - 2.0 * a) / (1.0 - a))
}

/// Larger root of `residual_exponent(a) = 1/2` in `[1/3, 1/2]`, by bisection
/// to 40 bits.
pub fn a_star() -> f64 {
    let (mut lo, mut hi) = (1.0 / 3.0, 0.5);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if residual_exponent(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Numerical checks of the entropy facts used in the analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyCheck {
    /// `|H(1/q) - (log q - (q-1)/q log(q-1))|`.
    pub identity_error: f64,
    /// Binomial sandwich held for every `n <= 64` and `p = k/n`.
    pub sandwich_holds: bool,
    /// Remainder of the second-order expansion of `H(1/q + delta) - H(1/q)`.
    pub upper_residual: f64,
    /// Remainder of the second-order expansion of `H(1/q) - H(1/q - delta)`.
    pub lower_residual: f64,
    /// Taylor bound `max |H'''| delta^3 / 6` on the interval.
    pub cubic_bound: f64,
}

impl EntropyCheck {
    pub fn all_hold(&self) -> bool {
        self.identity_error < 1e-12
            && self.sandwich_holds
            && self.upper_residual.abs() <= self.cubic_bound + 1e-15
            && self.lower_residual.abs() <= self.cubic_bound + 1e-15
    }
}

pub fn entropy_identities_check(q: u32, delta: f64) -> Result<EntropyCheck> {
    if q < 2 {
        return Err(Error::InvalidArgument("q must be at least 2".into()));
    }
    let qf = q as f64;
    let p0 = 1.0 / qf;
    if !(delta > 0.0 && delta < p0 - 1.0 / (qf + 1.0)) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1/q - 1/(q+1)), got {delta}")));
    }
    let identity_error = (entropy(p0) - (qf.log2() - (qf - 1.0) / qf * (qf - 1.0).log2())).abs();
    let mut sandwich_holds = true;
    for n in 2..=64u64 {
        for k in 1..n {
            let h = entropy(k as f64 / n as f64) * n as f64;
            let c = (binomial(n, k) as f64).log2();
            let lo = h - ((n + 1) as f64).log2();
            if c < lo - 1e-9 || c > h + 1e-9 {
                sandwich_holds = false;
            }
        }
    }
    let slope = (qf - 1.0).log2();
    let curv = qf * qf / ((qf - 1.0) * 4f64.ln());
    let upper_residual = entropy(p0 + delta) - entropy(p0) - (delta * slope - delta * delta * curv);
    let lower_residual = entropy(p0) - entropy(p0 - delta) - (delta * slope + delta * delta * curv);
    // |H'''(p)| = |1 - 2p| / (p (1 - p))^2 / ln 2 peaks at an endpoint.
    let h3 = |p: f64| (1.0 - 2.0 * p).abs() / (p * (1.0 - p)).powi(2) / 2f64.ln();
    let m = h3(p0 - delta).max(h3(p0 + delta));
    Ok(EntropyCheck {
        identity_error,
        sandwich_holds,
        upper_residual,
        lower_residual,
        cubic_bound: m * delta.powi(3) / 6.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PieceKind {
    Square,
    /// Twice as many rows as columns.
    TallRect,
}

/// An all-ones combinatorial rectangle of `R_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub kind: PieceKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectPartition {
    pub n: usize,
    pub pieces: Vec<Piece>,
}

impl RectPartition {
    /// (sum of square sides, sum of rectangle short sides).
    pub fn side_sums(&self) -> (u64, u64) {
        let mut s = 0;
        let mut r = 0;
        for p in &self.pieces {
            match p.kind {
                PieceKind::Square => s += p.cols.len() as u64,
                PieceKind::TallRect => r += p.cols.len() as u64,
            }
        }
        (s, r)
    }

    pub fn area(&self) -> u64 {
        self.pieces.iter().map(|p| (p.rows.len() * p.cols.len()) as u64).sum()
    }
}

/// `(s_n, r_n)` from the recursion `s = s' + 2 r'`, `r = s' + r'`, `s_1 = r_1 = 1`.
pub fn side_sum_recursion(n: usize) -> (u64, u64) {
    let (mut s, mut r) = (1u64, 0u64);
    for _ in 0..n {
        (s, r) = (s + 2 * r, s + r);
    }
    (s, r)
}

/// Partition of the ones of `R_n` into squares and tall rectangles.
///
/// `R_n = [[R, R], [R, 0]]` with `R = R_{n-1}`; write `0P`, `1P` for a row
/// set `P` of `R` shifted into the top or bottom half, likewise for columns.
/// Starting from the single 1x1 square of `R_0`, each piece with rows `P`
/// and columns `Q` has three copies (top-left, top-right, bottom-left):
///
/// * a square becomes the tall rectangle `(0P + 1P) x 0Q` (top-left and
///   bottom-left stacked) plus the square `0P x 1Q` (top-right);
/// * a tall rectangle becomes the square `0P x (0Q + 1Q)` (top-left and
///   top-right side by side) plus the tall rectangle `1P x 0Q` (bottom-left).
pub fn js_partition(n: usize) -> Result<RectPartition> {
    check_n(n, 14)?;
    let mut pieces = vec![Piece { rows: vec![0], cols: vec![0], kind: PieceKind::Square }];
    for level in 0..n {
        let half = 1usize << level;
        let hi = |v: &[usize]| v.iter().map(|&i| i + half).collect::<Vec<_>>();
        let both = |v: &[usize]| {
            let mut out = v.to_vec();
            out.extend(hi(v));
            out
        };
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for p in pieces {
            match p.kind {
                PieceKind::Square => {
                    next.push(Piece { rows: both(&p.rows), cols: p.cols.clone(), kind: PieceKind::TallRect });
                    next.push(Piece { rows: p.rows, cols: hi(&p.cols), kind: PieceKind::Square });
                }
                PieceKind::TallRect => {
                    next.push(Piece { rows: p.rows.clone(), cols: both(&p.cols), kind: PieceKind::Square });
                    next.push(Piece { rows: hi(&p.rows), cols: p.cols, kind: PieceKind::TallRect });
                }
            }
        }
        pieces = next;
    }
    Ok(RectPartition { n, pieces })
}

/// `R_n = A B` with `A[:, p]` the row indicator and `B[p, :]` the column
/// indicator of piece `p`. As `R_n` is symmetric, `R_n = B^T A^T` too.
pub fn js_factorization<F: Field>(f: &F, n: usize) -> Result<TwoFactorization<F>> {
    let part = js_partition(n)?;
    let size = 1usize << n;
    let h = part.pieces.len();
    let one = f.one();
    let mut at = Vec::new();
    let mut bt = Vec::new();
    for (p, piece) in part.pieces.iter().enumerate() {
        at.extend(piece.rows.iter().map(|&i| (i, p, one.clone())));
        bt.extend(piece.cols.iter().map(|&j| (p, j, one.clone())));
    }
    let a = SparseMatrix::from_triplets(f.clone(), size, h, at)?;
    let b = SparseMatrix::from_triplets(f.clone(), h, size, bt)?;
    Ok(TwoFactorization { target: disjointness_matrix(f, n)?, c_t: b.transpose(), b_t: a.transpose(), b: a, c: b, h, exponent: None })
}

/// Depth-`d` circuit for `R_n` from the factorization of `R_m`,
/// `m = ceil(n / d)` unless given.
pub fn rn_depth_d<F: Field>(f: &F, n: usize, d: usize, m: Option<usize>) -> Result<SynchronousCircuit<F>> {
    if d < 2 {
        return Err(Error::DepthTooSmall { got: d, min: 2 });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let m = m.unwrap_or_else(|| n.div_ceil(d)).max(1);
    let tf = js_factorization(f, m)?;
    let base = symmetrized_depth_d(&tf, d)?;
    lift_power(&base, &r1(f)?, m * d, n)
}
