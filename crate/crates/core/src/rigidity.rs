//! Low-rank plus sparse decompositions: explicit constructions, an exhaustive
//! certifier, outer-1 normalization, composition, and the DFT lower bound.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::field::{root_of_unity, Field, PrimeField};
use crate::par;
use crate::sparse::{rank_at_most, SparseMatrix};

/// Default ceiling on enumerated (pattern, assignment) pairs.
pub const DEFAULT_WORK_CAP: u128 = 2_000_000_000;

/// `target = low_left * low_right + sparse`, with `low_left` having at most
/// `rank_bound` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidityDecomposition<F: Field> {
    pub target: SparseMatrix<F>,
    pub rank_bound: usize,
    pub low_left: SparseMatrix<F>,
    pub low_right: SparseMatrix<F>,
    pub sparse: SparseMatrix<F>,
    pub changes: usize,
}

impl<F: Field> RigidityDecomposition<F> {
    /// Builds a decomposition, taking `changes` from the sparse part.
    pub fn new(
        target: SparseMatrix<F>,
        rank_bound: usize,
        low_left: SparseMatrix<F>,
        low_right: SparseMatrix<F>,
        sparse: SparseMatrix<F>,
    ) -> Self {
        let changes = sparse.nnz();
        RigidityDecomposition { target, rank_bound, low_left, low_right, sparse, changes }
    }

    pub fn low_rank(&self) -> Result<SparseMatrix<F>> {
        self.low_left.matmul(&self.low_right)
    }

    /// Checks the reconstruction, the inner dimension and the change count.
    pub fn verify(&self) -> Result<()> {
        if self.low_left.cols() > self.rank_bound {
            return Err(Error::InvalidWitness(format!(
                "inner dimension {} exceeds rank bound {}",
                self.low_left.cols(),
                self.rank_bound
            )));
        }
        if self.sparse.nnz() != self.changes {
            return Err(Error::InvalidWitness(format!(
                "sparse part has {} entries, {} declared",
                self.sparse.nnz(),
                self.changes
            )));
        }
        if self.low_rank()?.add(&self.sparse)? != self.target {
            return Err(Error::InvalidWitness("low-rank plus sparse does not reconstruct target".into()));
        }
        Ok(())
    }

    pub fn nnz_r(&self) -> usize {
        self.sparse.nnz_r()
    }

    pub fn nnz_c(&self) -> usize {
        self.sparse.nnz_c()
    }

    /// Decomposition of `diag(dl) * target * diag(dr)`.
    pub fn conjugate(&self, dl: &[F::Elem], dr: &[F::Elem]) -> Result<Self> {
        Ok(RigidityDecomposition {
            target: self.target.scale_rows(dl)?.scale_cols(dr)?,
            rank_bound: self.rank_bound,
            low_left: self.low_left.scale_rows(dl)?,
            low_right: self.low_right.scale_cols(dr)?,
            sparse: self.sparse.scale_rows(dl)?.scale_cols(dr)?,
            changes: self.changes,
        })
    }

    /// Decomposition of the transpose.
    pub fn transpose(&self) -> Self {
        RigidityDecomposition {
            target: self.target.transpose(),
            rank_bound: self.rank_bound,
            low_left: self.low_right.transpose(),
            low_right: self.low_left.transpose(),
            sparse: self.sparse.transpose(),
            changes: self.changes,
        }
    }

    /// Decomposition of `target ⊗ target` with the low part `L ⊗ L`.
    /// The rank bound multiplies; the sparse part is whatever remains.
    pub fn kron_square(&self) -> Result<Self> {
        let target = self.target.kron(&self.target)?;
        let low_left = self.low_left.kron(&self.low_left)?;
        let low_right = self.low_right.kron(&self.low_right)?;
        let sparse = target.sub(&low_left.matmul(&low_right)?)?;
        Ok(Self::new(target, self.rank_bound * self.rank_bound, low_left, low_right, sparse))
    }
}

/// Outcome of an exhaustive search.
#[derive(Clone, Debug, PartialEq)]
pub enum RigiditySearch<F: Field> {
    Found { changes: usize, witness: RigidityDecomposition<F> },
    ExceedsBound { max_changes: usize },
}

impl<F: Field> RigiditySearch<F> {
    pub fn changes(&self) -> Option<usize> {
        match self {
            RigiditySearch::Found { changes, .. } => Some(*changes),
            RigiditySearch::ExceedsBound { .. } => None,
        }
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of (pattern, assignment) pairs the search may visit.
pub fn brute_force_work(cells: usize, p: u32, max_changes: usize) -> u128 {
    (0..=max_changes)
        .map(|s| binomial(cells as u64, s as u64).saturating_mul((p as u128 - 1).saturating_pow(s as u32)))
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// The `k`-th `s`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, s: usize, mut k: u128, out: &mut Vec<usize>) {
    out.clear();
    let mut c = 0;
    for left in (1..=s).rev() {
        loop {
            let count = binomial((n - c - 1) as u64, (left - 1) as u64);
            if k < count {
                break;
            }
            k -= count;
            c += 1;
        }
        out.push(c);
        c += 1;
    }
}

/// Exact minimum number of entry changes bringing `m` to rank at most `r`,
/// by exhaustive search over change patterns of increasing size. Patterns are
/// visited lexicographically by flattened index, and for each pattern every
/// assignment of new values is tried; the first hit is the witness.
pub fn brute_force_rigidity(
    m: &SparseMatrix<PrimeField>,
    r: usize,
    max_changes: usize,
    work_cap: u128,
) -> Result<RigiditySearch<PrimeField>> {
    let f = *m.field();
    let (rows, cols) = m.shape();
    let cells = rows * cols;
    let max_changes = max_changes.min(cells);
    let estimate = brute_force_work(cells, f.modulus(), max_changes);
    if estimate > work_cap {
        return Err(Error::WorkCapExceeded { estimate, cap: work_cap });
    }
    let base: Vec<u32> = m.to_dense().concat();
    let p = f.modulus();
    for s in 0..=max_changes {
        let patterns = binomial(cells as u64, s as u64);
        let hit = par::find_first_init(
            patterns as u64,
            || (Vec::with_capacity(s), vec![0u32; cells], vec![0u32; s]),
            |(pattern, buf, offs), k| {
                unrank_combination(cells, s, k as u128, pattern);
                // Odometer over offsets 1..p-1 added to the original values.
                offs.iter_mut().for_each(|o| *o = 1);
                loop {
                    buf.copy_from_slice(&base);
                    for (&cell, &o) in pattern.iter().zip(offs.iter()) {
                        buf[cell] = f.add(&base[cell], &o);
                    }
                    if rank_at_most(&f, buf, rows, cols, r) {
                        let vals: Vec<u32> = pattern.iter().zip(offs.iter()).map(|(&c, &o)| f.add(&base[c], &o)).collect();
                        return Some((pattern.clone(), vals));
                    }
                    let mut i = s;
                    loop {
                        if i == 0 {
                            return None;
                        }
                        i -= 1;
                        if offs[i] + 1 < p {
                            offs[i] += 1;
                            break;
                        }
                        offs[i] = 1;
                    }
                }
            },
        );
        if let Some((_, (pattern, vals))) = hit {
            let mut changed = base.clone();
            for (&c, v) in pattern.iter().zip(vals) {
                changed[c] = v;
            }
            let dense: Vec<Vec<u32>> = changed.chunks(cols).map(<[u32]>::to_vec).collect();
            let low = SparseMatrix::from_dense(f, &dense)?;
            let (low_left, low_right) = low.rank_factorization()?;
            let sparse = m.sub(&low)?;
            let witness = RigidityDecomposition::new(m.clone(), r, low_left, low_right, sparse);
            return Ok(RigiditySearch::Found { changes: s, witness });
        }
    }
    Ok(RigiditySearch::ExceedsBound { max_changes })
}

/// Walsh–Hadamard matrix `H_n` over `f`.
pub fn hadamard<F: Field>(f: &F, n: usize) -> Result<SparseMatrix<F>> {
    SparseMatrix::from_int_rows(f.clone(), &[vec![1, 1], vec![1, -1]])?.kron_power(n)
}

fn require_odd_characteristic<F: Field>(f: &F) -> Result<()> {
    if f.is_zero(&f.from_i64(2)) {
        return Err(Error::CharacteristicTwo);
    }
    Ok(())
}

/// `H_2` as a rank-1 matrix plus four entries equal to 2.
pub fn h2_rank1_decomposition<F: Field>(f: &F) -> Result<RigidityDecomposition<F>> {
    require_odd_characteristic(f)?;
    let target = hadamard(f, 2)?;
    let low_left = SparseMatrix::from_int_rows(f.clone(), &[vec![1], vec![-1], vec![-1], vec![-1]])?;
    let low_right = SparseMatrix::from_int_rows(f.clone(), &[vec![-1, 1, 1, 1]])?;
    let two = f.from_i64(2);
    let sparse = SparseMatrix::from_triplets(
        f.clone(),
        4,
        4,
        vec![(0, 0, two.clone()), (1, 2, two.clone()), (2, 1, two.clone()), (3, 3, two)],
    )?;
    Ok(RigidityDecomposition::new(target, 1, low_left, low_right, sparse))
}

/// `H_4 = A⊗A + S` where `A` is the rank-1 part of the `H_2` decomposition.
pub fn h4_rank1_decomposition<F: Field>(f: &F) -> Result<RigidityDecomposition<F>> {
    h2_rank1_decomposition(f)?.kron_square()
}

/// `M = [[1, 1], [1, omega]]`.
pub fn outer1_2x2<F: Field>(f: &F, omega: &F::Elem) -> Result<SparseMatrix<F>> {
    let one = f.one();
    SparseMatrix::from_dense(f.clone(), &[vec![one.clone(), one.clone()], vec![one, omega.clone()]])
}

/// Rank-1 decomposition of `M^{⊗3}` for `M = [[1, 1], [1, omega]]`. The low part
/// is `omega^-1` at the corner, 1 on the rest of the first row and column,
/// and `omega` elsewhere.
pub fn cube_rank1_decomposition<F: Field>(f: &F, omega: &F::Elem) -> Result<RigidityDecomposition<F>> {
    let w_inv = f.inv(omega).ok_or(Error::OmegaZero)?;
    let target = outer1_2x2(f, omega)?.kron_power(3)?;
    let mut u = vec![vec![omega.clone()]; 8];
    u[0] = vec![f.one()];
    let mut v = vec![f.one(); 8];
    v[0] = w_inv;
    let low_left = SparseMatrix::from_dense(f.clone(), &u)?;
    let low_right = SparseMatrix::from_dense(f.clone(), &[v])?;
    let sparse = target.sub(&low_left.matmul(&low_right)?)?;
    Ok(RigidityDecomposition::new(target, 1, low_left, low_right, sparse))
}

/// Rank-1 decomposition of `M^{⊗3}` for any 2x2 `M` whose first row and
/// column are nonzero, via normalization to outer-1 form.
pub fn cube_decomposition_general<F: Field>(m: &SparseMatrix<F>) -> Result<RigidityDecomposition<F>> {
    if m.shape() != (2, 2) {
        return Err(Error::InvalidArgument(format!("expected a 2x2 matrix, got {:?}", m.shape())));
    }
    let f = m.field().clone();
    let (d, mp, dp) = normalize_outer1(m)?;
    let base = cube_rank1_decomposition(&f, &mp.get(1, 1))?;
    let diag = |x: &SparseMatrix<F>| -> Result<Vec<F::Elem>> {
        let d3 = x.kron_power(3)?;
        Ok((0..8).map(|i| d3.get(i, i)).collect())
    };
    base.conjugate(&diag(&d)?, &diag(&dp)?)
}

/// `M = D * M' * D'` with `D`, `D'` invertible diagonal and `M'` having ones
/// throughout its first row and column.
pub fn normalize_outer1<F: Field>(
    m: &SparseMatrix<F>,
) -> Result<(SparseMatrix<F>, SparseMatrix<F>, SparseMatrix<F>)> {
    let f = m.field().clone();
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    for j in 0..cols {
        if f.is_zero(&m.get(0, j)) {
            return Err(Error::OuterZero { row: 0, col: j });
        }
    }
    for i in 1..rows {
        if f.is_zero(&m.get(i, 0)) {
            return Err(Error::OuterZero { row: i, col: 0 });
        }
    }
    let m00 = m.get(0, 0);
    // G = diag(1 / M[i,0]); G' = diag(M[0,0] / M[0,j]); M' = G M G'.
    let g: Vec<F::Elem> = (0..rows).map(|i| f.inv(&m.get(i, 0)).expect("nonzero")).collect();
    let gp: Vec<F::Elem> = (0..cols).map(|j| f.mul(&m00, &f.inv(&m.get(0, j)).expect("nonzero"))).collect();
    let mp = m.scale_rows(&g)?.scale_cols(&gp)?;
    let d = g.iter().map(|x| f.inv(x).expect("nonzero")).collect();
    let dp = gp.iter().map(|x| f.inv(x).expect("nonzero")).collect();
    Ok((SparseMatrix::diagonal(f.clone(), d)?, mp, SparseMatrix::diagonal(f, dp)?))
}

/// Decomposition of `A * D * B` from decompositions of `A` and `B`, grouping
/// `L_A D B + S_A D L_B` as the low-rank part and `S_A D S_B` as the sparse part.
pub fn compose_nonrigid<F: Field>(
    da: &RigidityDecomposition<F>,
    d: &SparseMatrix<F>,
    db: &RigidityDecomposition<F>,
) -> Result<RigidityDecomposition<F>> {
    let a = &da.target;
    let b = &db.target;
    if a.cols() != d.rows() || d.cols() != b.rows() {
        return Err(Error::DimensionMismatch { op: "compose_nonrigid", left: a.shape(), right: b.shape() });
    }
    let target = a.matmul(d)?.matmul(b)?;
    let sa_d = da.sparse.matmul(d)?;
    let low_left = da.low_left.concat_h(&sa_d.matmul(&db.low_left)?)?;
    let low_right = da.low_right.matmul(d)?.matmul(b)?.stack_v(&db.low_right)?;
    let sparse = sa_d.matmul(&db.sparse)?;
    Ok(RigidityDecomposition::new(target, da.rank_bound + db.rank_bound, low_left, low_right, sparse))
}

/// Lower bound `(N - r)^2 / (r + 1)` on the rigidity of an `N x N` DFT matrix.
pub fn shparlinski_bound(n: u64, r: u64) -> BigRational {
    let d = BigInt::from(n) - BigInt::from(r);
    BigRational::new(&d * &d, BigInt::from(r + 1))
}

/// `F_N[i, j] = w^(ij)` for the least primitive `N`-th root of unity `w` in F_p.
pub fn dft_matrix(n: usize, f: &PrimeField) -> Result<SparseMatrix<PrimeField>> {
    let w = root_of_unity(f, n as u64)?;
    SparseMatrix::from_fn(*f, n, n, |i, j| f.pow(&w, ((i * j) % n) as u64))
}
