//! `V_f[x, y] = f(x OR y)` and its factorization `V_f = R_n D_f R_n`:
//! butterfly application of `R_n`, batch evaluation of
//! `sum_t f(s OR t)`, reduction of Kronecker products of 2x2 matrices to
//! `V_f`, and the inclusion-exclusion expansion over base `q`.

use crate::disjointness::r1;
use crate::error::{Error, Result};
use crate::field::{Field, FieldCtx};
use crate::par;
use crate::rigidity::normalize_outer1;
use crate::sparse::{check_dim, SparseMatrix};

/// Largest side length for which `V_f` is materialized.
pub const VF_MATERIALIZE_CAP: usize = 1 << 13;

/// Largest table size accepted by [`inclusion_exclusion_expand`].
pub const EXPAND_CAP: usize = 4096;

/// Values of `f : [q]^n -> F` in codec order (leftmost slot most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable<F: Field> {
    field: F,
    q: usize,
    n: usize,
    values: Vec<F::Elem>,
}

fn table_len(q: usize, n: usize) -> Result<usize> {
    let len = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    check_dim(len)
}

impl<F: Field> TruthTable<F> {
    pub fn new(field: F, q: usize, n: usize, values: Vec<F::Elem>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("base must be positive".into()));
        }
        let len = table_len(q, n)?;
        if values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: values.len() });
        }
        Ok(TruthTable { field, q, n, values })
    }

    pub fn from_fn(field: F, q: usize, n: usize, f: impl Fn(&[usize]) -> F::Elem + Sync + Send) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("base must be positive".into()));
        }
        let len = table_len(q, n)?;
        let values = par::map_range(len, |i| f(&decode(q, n, i)));
        Ok(TruthTable { field, q, n, values })
    }

    pub fn random<R: rand::Rng + ?Sized>(field: F, q: usize, n: usize, rng: &mut R) -> Result<Self> {
        let len = table_len(q, n)?;
        let values = (0..len).map(|_| field.random(rng)).collect();
        Self::new(field, q, n, values)
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn ctx(&self) -> FieldCtx {
        self.field.ctx()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[F::Elem] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, z: &[usize]) -> &F::Elem {
        &self.values[encode(self.q, z)]
    }

    pub fn at(&self, idx: usize) -> &F::Elem {
        &self.values[idx]
    }
}

fn encode(q: usize, z: &[usize]) -> usize {
    z.iter().fold(0, |acc, &d| acc * q + d)
}

fn decode(q: usize, n: usize, mut idx: usize) -> Vec<usize> {
    let mut z = vec![0; n];
    for slot in z.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
    z
}

fn digitwise_max(q: usize, n: usize, x: usize, y: usize) -> usize {
    if q == 2 {
        return x | y;
    }
    let (a, b) = (decode(q, n, x), decode(q, n, y));
    let z: Vec<usize> = a.iter().zip(&b).map(|(u, v)| *u.max(v)).collect();
    encode(q, &z)
}

/// `V_f[x, y] = f(max(x, y))` taken digitwise; for `q = 2` this is `f(x OR y)`.
pub fn vf_matrix<F: Field>(f: &TruthTable<F>) -> Result<SparseMatrix<F>> {
    let len = f.len();
    if len > VF_MATERIALIZE_CAP {
        return Err(Error::DimensionCap { dim: len as u128, cap: VF_MATERIALIZE_CAP });
    }
    let (q, n) = (f.q, f.n);
    SparseMatrix::from_fn(f.field.clone(), len, len, |x, y| f.values[digitwise_max(q, n, x, y)].clone())
}

/// Field operations performed by a kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub adds: u64,
    pub subs: u64,
    pub mults: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.adds + self.subs + self.mults
    }
}

impl std::ops::Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount { adds: self.adds + o.adds, subs: self.subs + o.subs, mults: self.mults + o.mults }
    }
}

fn log2_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Minimum chunk handed to one worker in a butterfly level.
const BUTTERFLY_GRAIN: usize = 1 << 12;

/// In-place `x <- R_n x` (or `R_n^{-1} x`). Level `l` pairs the indices
/// differing in bit `l`: `(u0, u1) -> (u0 + u1, u0)` forward and
/// `(u0, u1) -> (u1, u0 - u1)` inverse, one field operation per pair.
pub fn fast_rn_apply_in_place<F: Field>(f: &F, x: &mut [F::Elem], inverse: bool) -> Result<OpCount> {
    let n = log2_len(x.len())?;
    let pairs = (x.len() / 2) as u64;
    for level in 0..n {
        let half = 1usize << level;
        let chunk = (2 * half).max(BUTTERFLY_GRAIN.min(x.len()));
        par::for_each_chunk(x, chunk, |_, block| {
            for pair in block.chunks_mut(2 * half) {
                let (lo, hi) = pair.split_at_mut(half);
                for (u0, u1) in lo.iter_mut().zip(hi.iter_mut()) {
                    if inverse {
                        let d = f.sub(u0, u1);
                        std::mem::swap(u0, u1);
                        *u1 = d;
                    } else {
                        let s = f.add(u0, u1);
                        *u1 = std::mem::replace(u0, s);
                    }
                }
            }
        });
    }
    let ops = pairs * n as u64;
    Ok(if inverse { OpCount { subs: ops, ..Default::default() } } else { OpCount { adds: ops, ..Default::default() } })
}

pub fn fast_rn_apply<F: Field>(f: &F, x: &[F::Elem], inverse: bool) -> Result<(Vec<F::Elem>, OpCount)> {
    let mut y = x.to_vec();
    let ops = fast_rn_apply_in_place(f, &mut y, inverse)?;
    Ok((y, ops))
}

/// `b_f = R_n^{-1} a_f` and `D_f = diag(b_f)`, so that `V_f = R_n D_f R_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct VfWitness<F: Field> {
    pub n: usize,
    pub b: Vec<F::Elem>,
    pub d: SparseMatrix<F>,
}

impl<F: Field> VfWitness<F> {
    /// Dense check of `R_n D_f R_n = V_f`.
    pub fn verify(&self, f: &TruthTable<F>) -> Result<bool> {
        let r = r1(f.field())?.kron_power(self.n)?;
        Ok(r.matmul(&self.d)?.matmul(&r)? == vf_matrix(f)?)
    }
}

fn require_binary<F: Field>(f: &TruthTable<F>) -> Result<()> {
    if f.q != 2 {
        return Err(Error::InvalidArgument(format!("expected a table over {{0,1}}, got base {}", f.q)));
    }
    Ok(())
}

pub fn build_vf_witness<F: Field>(f: &TruthTable<F>) -> Result<VfWitness<F>> {
    require_binary(f)?;
    let (b, _) = fast_rn_apply(&f.field, &f.values, true)?;
    let d = SparseMatrix::diagonal(f.field.clone(), b.clone())?;
    Ok(VfWitness { n: f.n, b, d })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// `sum_t f(s OR t)`.
    Or,
    /// `sum_t f(s AND t)`.
    And,
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Convention::Or),
            "and" => Ok(Convention::And),
            _ => Err(Error::InvalidArgument(format!("unknown convention '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult<F: Field> {
    /// Distinct points in ascending order with their sums.
    pub answers: Vec<(usize, F::Elem)>,
    /// Operations of the `V_f x` evaluation.
    pub ops: OpCount,
    /// Operations spent computing `b_f` from the truth table.
    pub setup_ops: OpCount,
    /// Set when multiplicities may wrap around the field characteristic.
    pub warning: Option<String>,
}

/// For every distinct `s` in `points`, `sum_{t in points} f(s OR t)` (or
/// `f(s AND t)`), counted with multiplicity, via `R_n (D_f (R_n u))`.
/// AND reduces to OR through `f(s AND t) = f'(~s OR ~t)` with `f'(z) = f(~z)`.
pub fn batch_sums<F: Field>(f: &TruthTable<F>, points: &[usize], convention: Convention) -> Result<BatchResult<F>> {
    require_binary(f)?;
    let len = f.len();
    let mask = len - 1;
    if let Some(&bad) = points.iter().find(|&&p| p > mask) {
        return Err(Error::InvalidArgument(format!("point {bad} does not fit in {} bits", f.n)));
    }
    let field = &f.field;
    let warning = match field.ctx().modulus() {
        Some(p) if points.len() as u64 >= p as u64 => Some(format!(
            "{} points reach the field size {p}; multiplicities wrap modulo {p}, use rational mode for exact counts",
            points.len()
        )),
        _ => None,
    };
    let (table, flip) = match convention {
        Convention::Or => (f.values.clone(), 0),
        Convention::And => ((0..len).map(|z| f.values[!z & mask].clone()).collect(), mask),
    };
    let (b, setup_ops) = fast_rn_apply(field, &table, true)?;
    let mut u = vec![field.zero(); len];
    let one = field.one();
    for &p in points {
        let slot = &mut u[p ^ flip];
        *slot = field.add(slot, &one);
    }
    let mut ops = fast_rn_apply_in_place(field, &mut u, false)?;
    for (ui, bi) in u.iter_mut().zip(&b) {
        *ui = field.mul(ui, bi);
    }
    ops.mults += len as u64;
    ops = ops + fast_rn_apply_in_place(field, &mut u, false)?;
    let mut distinct = points.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let answers = distinct.into_iter().map(|s| (s, u[s ^ flip].clone())).collect();
    Ok(BatchResult { answers, ops, setup_ops, warning })
}

/// `(M_1 ⊗ ... ⊗ M_n) = Pi V_f Pi'` for outer-nonzero 2x2 matrices `M_i`,
/// with `Pi`, `Pi'` weighted permutations.
#[derive(Clone, Debug, PartialEq)]
pub struct KronVf<F: Field> {
    pub pi: SparseMatrix<F>,
    pub f: TruthTable<F>,
    pub pi_prime: SparseMatrix<F>,
}

impl<F: Field> KronVf<F> {
    /// Dense check against the materialized Kronecker product.
    pub fn verify(&self, ms: &[SparseMatrix<F>]) -> Result<bool> {
        let field = self.f.field();
        let mut target = SparseMatrix::identity(field.clone(), 1)?;
        for m in ms {
            target = target.kron(m)?;
        }
        Ok(self.pi.matmul(&vf_matrix(&self.f)?)?.matmul(&self.pi_prime)? == target)
    }
}

/// Each `M_i = D_i P V_{g_i} P D'_i` where `D_i, D'_i` normalize `M_i` to the
/// outer-1 form `[[1, 1], [1, w_i]]`, `P` swaps the two indices, and
/// `g_i(0) = w_i`, `g_i(1) = 1`. Then `f(z) = prod_i g_i(z_i)`,
/// `Pi = ⊗ D_i P` and `Pi' = ⊗ P D'_i`.
pub fn kron2_to_vf<F: Field>(ms: &[SparseMatrix<F>]) -> Result<KronVf<F>> {
    let field = match ms.first() {
        Some(m) => m.field().clone(),
        None => return Err(Error::InvalidArgument("empty factor list".into())),
    };
    let mut left = SparseMatrix::identity(field.clone(), 1)?;
    let mut right = SparseMatrix::identity(field.clone(), 1)?;
    let mut omegas = Vec::with_capacity(ms.len());
    let swap = SparseMatrix::from_int_rows(field.clone(), &[vec![0, 1], vec![1, 0]])?;
    for m in ms {
        if m.shape() != (2, 2) {
            return Err(Error::DimensionMismatch { op: "kron2_to_vf", left: m.shape(), right: (2, 2) });
        }
        let (dl, norm, dr) = normalize_outer1(m)?;
        omegas.push(norm.get(1, 1));
        left = left.kron(&dl.matmul(&swap)?)?;
        right = right.kron(&swap.matmul(&dr)?)?;
    }
    let n = ms.len();
    let one = field.one();
    let f = TruthTable::from_fn(field.clone(), 2, n, |z| {
        z.iter().zip(&omegas).fold(one.clone(), |acc, (&b, w)| if b == 0 { field.mul(&acc, w) } else { acc })
    })?;
    Ok(KronVf { pi: left, f, pi_prime: right })
}

/// The functions `f_S` of the expansion `V_f = sum_S V_{f_S}^{⊗S} ⊗ J^{⊗ rest}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion<F: Field> {
    /// `(S, f_S)` for every `S ⊆ [n]` in increasing bitmask order, where bit
    /// `i` of the mask is slot `i`. `f_S` is a table over `[q-1]^{|S|}`.
    pub parts: Vec<(Vec<usize>, TruthTable<F>)>,
    /// `sum_{S ⊆ S_z} f_S(z|_S - 1) = f(z)` for every `z`.
    pub identity_holds: bool,
}

impl<F: Field> Expansion<F> {
    pub fn part(&self, s: &[usize]) -> Option<&TruthTable<F>> {
        self.parts.iter().find(|(t, _)| t == s).map(|(_, tab)| tab)
    }
}

fn slots(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// `f_S(w) = sum_{T ⊆ S} (-1)^{|S|-|T|} f(g_T(w))` where `g_T(w)` is
/// `w_i + 1` on the slots in `T` and `0` elsewhere.
pub fn inclusion_exclusion_expand<F: Field>(f: &TruthTable<F>) -> Result<Expansion<F>> {
    let (q, n) = (f.q, f.n);
    if q < 2 {
        return Err(Error::InvalidArgument("base must be at least 2".into()));
    }
    if f.len() > EXPAND_CAP {
        return Err(Error::DimensionCap { dim: f.len() as u128, cap: EXPAND_CAP });
    }
    let field = &f.field;
    let parts_vals = par::map_range(1 << n, |mask| {
        let s = slots(mask, n);
        let k = s.len();
        let size = (q - 1).pow(k as u32);
        let vals: Vec<F::Elem> = (0..size)
            .map(|wi| {
                let w = decode(q - 1, k, wi);
                let mut acc = field.zero();
                for tsub in 0..1usize << k {
                    let mut z = vec![0; n];
                    for (j, &slot) in s.iter().enumerate() {
                        if tsub >> j & 1 == 1 {
                            z[slot] = w[j] + 1;
                        }
                    }
                    let v = &f.values[encode(q, &z)];
                    if (k - tsub.count_ones() as usize) % 2 == 0 {
                        acc = field.add(&acc, v);
                    } else {
                        acc = field.sub(&acc, v);
                    }
                }
                acc
            })
            .collect();
        (s, vals)
    });
    let mut parts = Vec::with_capacity(parts_vals.len());
    for (s, vals) in parts_vals {
        let k = s.len();
        parts.push((s, TruthTable::new(field.clone(), q - 1, k, vals)?));
    }
    let identity_holds = par::all_init(
        f.len(),
        || (),
        |_, zi| {
            let z = decode(q, n, zi);
            let support: usize = (0..n).filter(|&i| z[i] != 0).fold(0, |m, i| m | 1 << i);
            let mut acc = field.zero();
            let mut sub = support;
            loop {
                let (s, tab) = &parts[sub];
                let w: Vec<usize> = s.iter().map(|&i| z[i] - 1).collect();
                acc = field.add(&acc, tab.get(&w));
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & support;
            }
            acc == f.values[zi]
        },
    );
    Ok(Expansion { parts, identity_holds })
}

/// Largest table size for the dense matrix form of the expansion.
pub const EXPANSION_MATRIX_CAP: usize = 256;

/// Dense check of `V_f = sum_S V_{f_S}^{⊗S} ⊗ J^{⊗ rest}`, where on the slots
/// of `S` the factor is `V` of `f_S` extended by zero to `[q]^{|S|}`
/// (`f~_S(u) = f_S(u - 1)` if every `u_i >= 1`, else 0), and `J` is the
/// all-ones `q x q` matrix on the remaining slots.
pub fn verify_expansion_matrix<F: Field>(f: &TruthTable<F>, exp: &Expansion<F>) -> Result<bool> {
    let (q, n) = (f.q, f.n);
    if f.len() > EXPANSION_MATRIX_CAP {
        return Err(Error::DimensionCap { dim: f.len() as u128, cap: EXPANSION_MATRIX_CAP });
    }
    let field = &f.field;
    let len = f.len();
    let mut sum = SparseMatrix::zeros(field.clone(), len, len)?;
    for (s, tab) in &exp.parts {
        let k = s.len();
        let extended = TruthTable::from_fn(field.clone(), q, k, |u| {
            if u.iter().all(|&d| d >= 1) {
                let w: Vec<usize> = u.iter().map(|&d| d - 1).collect();
                tab.get(&w).clone()
            } else {
                field.zero()
            }
        })?;
        let vs = vf_matrix(&extended)?;
        let project = |x: usize| {
            let digits = decode(q, n, x);
            encode(q, &s.iter().map(|&i| digits[i]).collect::<Vec<_>>())
        };
        let term = SparseMatrix::from_fn(field.clone(), len, len, |x, y| vs.get(project(x), project(y)))?;
        sum = sum.add(&term)?;
    }
    Ok(sum == vf_matrix(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disjointness::disjointness_matrix;
    use crate::field::{PrimeField, Rationals};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn table(f: &PrimeField, q: usize, n: usize, vals: &[i64]) -> TruthTable<PrimeField> {
        TruthTable::new(f.clone(), q, n, vals.iter().map(|&v| f.from_i64(v)).collect()).unwrap()
    }

    #[test]
    fn vf_examples() {
        let f = fp(5);
        let ones = table(&f, 2, 1, &[1, 1]);
        assert_eq!(vf_matrix(&ones).unwrap(), SparseMatrix::from_int_rows(f.clone(), &[vec![1, 1], vec![1, 1]]).unwrap());
        let parity = table(&f, 2, 2, &[0, 1, 1, 0]);
        let v = vf_matrix(&parity).unwrap();
        assert_eq!(v.get(1, 2), *parity.get(&[1, 1]));
        assert_eq!(v.get(1, 2), 0);
        assert_eq!(v.get(1, 0), 1);
        let zero_ind = table(&f, 2, 2, &[1, 0, 0, 0]);
        let v = vf_matrix(&zero_ind).unwrap();
        assert_eq!(v.nnz(), 1);
        assert_eq!(v.get(0, 0), 1);
        assert_ne!(v, disjointness_matrix(&f, 2).unwrap());
        let big = TruthTable::new(f.clone(), 2, 14, vec![0; 1 << 14]).unwrap();
        assert!(matches!(vf_matrix(&big), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn table_errors() {
        let f = fp(5);
        assert!(matches!(TruthTable::new(f.clone(), 2, 2, vec![0; 3]), Err(Error::LengthMismatch { expected: 4, got: 3 })));
        assert!(TruthTable::new(f, 0, 2, vec![]).is_err());
    }

    #[test]
    fn butterfly_examples() {
        let f = fp(101);
        let (y, ops) = fast_rn_apply(&f, &[3, 5], false).unwrap();
        assert_eq!(y, vec![8, 3]);
        assert_eq!(ops, OpCount { adds: 1, subs: 0, mults: 0 });
        let (x, _) = fast_rn_apply(&f, &y, true).unwrap();
        assert_eq!(x, vec![3, 5]);
        let (_, ops) = fast_rn_apply(&f, &vec![0; 4096], false).unwrap();
        assert_eq!(ops.adds, 24576);
        let (_, ops) = fast_rn_apply(&f, &vec![0; 4096], true).unwrap();
        assert_eq!(ops.subs, 24576);
        assert!(matches!(fast_rn_apply(&f, &[1, 2, 3], false), Err(Error::LengthNotPowerOfTwo(3))));
        assert!(fast_rn_apply(&f, &[], false).is_err());
    }

    #[test]
    fn butterfly_matches_dense() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..=14 {
            let r = disjointness_matrix(&f, n).unwrap();
            let x: Vec<u32> = (0..1 << n).map(|_| f.random(&mut rng)).collect();
            let (y, ops) = fast_rn_apply(&f, &x, false).unwrap();
            assert_eq!(y, r.apply(&x).unwrap(), "n={n}");
            assert_eq!(ops.adds, (n as u64) << n >> 1);
        }
    }

    #[test]
    fn butterfly_round_trip() {
        let f = fp(2147483647);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<u32> = (0..1024).map(|_| f.random(&mut rng)).collect();
            let (y, _) = fast_rn_apply(&f, &x, false).unwrap();
            let (z, _) = fast_rn_apply(&f, &y, true).unwrap();
            assert_eq!(z, x);
        }
    }

    #[test]
    fn butterfly_rationals() {
        let q = Rationals;
        let x: Vec<_> = (0..8).map(|i| q.from_i64(i * i - 3)).collect();
        let r = disjointness_matrix(&q, 3).unwrap();
        let (y, _) = fast_rn_apply(&q, &x, false).unwrap();
        assert_eq!(y, r.apply(&x).unwrap());
        let (z, _) = fast_rn_apply(&q, &y, true).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn witness_examples() {
        let f = fp(7);
        let ones = table(&f, 2, 1, &[1, 1]);
        let w = build_vf_witness(&ones).unwrap();
        assert_eq!(w.b, vec![1, 0]);
        assert_eq!(w.d.to_dense(), vec![vec![1, 0], vec![0, 0]]);
        assert!(w.verify(&ones).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TruthTable::random(f.clone(), 2, 10, &mut rng).unwrap();
        assert!(build_vf_witness(&t).unwrap().verify(&t).unwrap());

        let n = 6;
        let top = TruthTable::from_fn(f.clone(), 2, n, |z| f.from_i64(z.iter().all(|&b| b == 1) as i64)).unwrap();
        let w = build_vf_witness(&top).unwrap();
        let a = top.values().to_vec();
        // Oracle: the dense R_n maps b_f back to a_f.
        let r = disjointness_matrix(&f, n).unwrap();
        assert_eq!(r.apply(&w.b).unwrap(), a);
        let minus_one = f.from_i64(-1);
        assert!(w.b.iter().all(|v| *v == 1 || *v == minus_one));
        assert!(w.verify(&top).unwrap());
    }

    #[test]
    fn witness_reconstruction_all_sizes() {
        let f = fp(101);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=9 {
            let t = TruthTable::random(f.clone(), 2, n, &mut rng).unwrap();
            assert!(build_vf_witness(&t).unwrap().verify(&t).unwrap(), "n={n}");
        }
    }

    fn brute_batch(f: &TruthTable<PrimeField>, pts: &[usize], conv: Convention) -> Vec<(usize, u32)> {
        let field = f.field();
        let mut distinct = pts.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        distinct
            .into_iter()
            .map(|s| {
                let mut acc = 0;
                for &t in pts {
                    let z = match conv {
                        Convention::Or => s | t,
                        Convention::And => s & t,
                    };
                    acc = field.add(&acc, f.at(z));
                }
                (s, acc)
            })
            .collect()
    }

    #[test]
    fn batch_examples() {
        let f = fp(101);
        let zero_ind = table(&f, 2, 2, &[1, 0, 0, 0]);
        let r = batch_sums(&zero_ind, &[0b00, 0b01], Convention::Or).unwrap();
        assert_eq!(r.answers, vec![(0, 1), (1, 0)]);
        let zero3 = TruthTable::from_fn(f.clone(), 2, 3, |z| f.from_i64(z.iter().all(|&b| b == 0) as i64)).unwrap();
        let pts = [0b100, 0b010, 0b001];
        let r = batch_sums(&zero3, &pts, Convention::And).unwrap();
        assert_eq!(r.answers, brute_batch(&zero3, &pts, Convention::And));
        assert!(r.answers.iter().all(|(_, v)| *v == 2));
        assert!(r.warning.is_none());
    }

    #[test]
    fn batch_random_n12() {
        let f = fp(101);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = TruthTable::random(f.clone(), 2, 12, &mut rng).unwrap();
        let pts: Vec<usize> = (0..200).map(|_| rand::Rng::gen_range(&mut rng, 0..4096)).collect();
        for conv in [Convention::Or, Convention::And] {
            let r = batch_sums(&t, &pts, conv).unwrap();
            assert_eq!(r.answers, brute_batch(&t, &pts, conv));
            assert_eq!(r.ops.adds, 49152);
            assert_eq!(r.ops.mults, 4096);
            assert!(r.ops.mults <= 3 * 4096 && r.ops.adds <= 12 * 4096);
            assert!(r.warning.is_some());
        }
    }

    #[test]
    fn batch_errors() {
        let f = fp(101);
        let t = table(&f, 2, 2, &[1, 0, 0, 0]);
        assert!(batch_sums(&t, &[4], Convention::Or).is_err());
        let t3 = TruthTable::new(f.clone(), 3, 1, vec![0; 3]).unwrap();
        assert!(batch_sums(&t3, &[0], Convention::Or).is_err());
        assert_eq!("AND".parse::<Convention>().unwrap(), Convention::And);
        assert!("xor".parse::<Convention>().is_err());
    }

    #[test]
    fn batch_rational_counts_exactly() {
        let q = Rationals;
        let t = TruthTable::from_fn(q, 2, 3, |z| q.from_i64(z.iter().all(|&b| b == 0) as i64)).unwrap();
        let pts = vec![0usize; 20];
        let r = batch_sums(&t, &pts, Convention::Or).unwrap();
        assert_eq!(r.answers, vec![(0, q.from_i64(20))]);
        assert!(r.warning.is_none());
    }

    #[test]
    fn kron2_hadamard() {
        let f = fp(7);
        let h = SparseMatrix::from_int_rows(f.clone(), &[vec![1, 1], vec![1, -1]]).unwrap();
        let ms = vec![h; 4];
        let k = kron2_to_vf(&ms).unwrap();
        let minus = f.from_i64(-1);
        for z in 0..16usize {
            let zeros = 4 - z.count_ones();
            let want = if zeros % 2 == 0 { 1 } else { minus };
            assert_eq!(*k.f.at(z), want);
        }
        assert!(k.verify(&ms).unwrap());
    }

    #[test]
    fn kron2_r1() {
        let f = fp(7);
        let ms = vec![r1(&f).unwrap()];
        let k = kron2_to_vf(&ms).unwrap();
        assert_eq!(k.f.values(), &[0, 1]);
        assert_eq!(vf_matrix(&k.f).unwrap().to_dense(), vec![vec![0, 1], vec![1, 1]]);
        assert!(k.verify(&ms).unwrap());
        let bad = SparseMatrix::from_int_rows(f.clone(), &[vec![1, 0], vec![1, 1]]).unwrap();
        assert!(matches!(kron2_to_vf(&[bad]), Err(Error::OuterZero { .. })));
        assert!(kron2_to_vf::<PrimeField>(&[]).is_err());
    }

    #[test]
    fn kron2_random() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=6 {
            let ms: Vec<_> = (0..n)
                .map(|_| {
                    let mut nz = || loop {
                        let v = f.random(&mut rng);
                        if v != 0 {
                            break v;
                        }
                    };
                    let (a, b, c) = (nz(), nz(), nz());
                    let d = f.random(&mut rng);
                    SparseMatrix::from_dense(f.clone(), &[vec![a, b], vec![c, d]]).unwrap()
                })
                .collect();
            assert!(kron2_to_vf(&ms).unwrap().verify(&ms).unwrap(), "n={n}");
        }
    }

    #[test]
    fn expansion_all_ones() {
        let f = fp(7);
        let t = TruthTable::from_fn(f.clone(), 2, 4, |_| 1).unwrap();
        let e = inclusion_exclusion_expand(&t).unwrap();
        assert!(e.identity_holds);
        assert_eq!(e.parts.len(), 16);
        for (s, tab) in &e.parts {
            assert_eq!(tab.len(), 1);
            assert_eq!(*tab.at(0), if s.is_empty() { 1 } else { 0 });
        }
    }

    #[test]
    fn expansion_random() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = TruthTable::random(f.clone(), 3, 2, &mut rng).unwrap();
        let e = inclusion_exclusion_expand(&t).unwrap();
        assert!(e.identity_holds);
        // Direct evaluation of both sides at every z.
        for zi in 0..9 {
            let z = decode(3, 2, zi);
            let mut acc = 0;
            for (s, tab) in &e.parts {
                if s.iter().all(|&i| z[i] != 0) {
                    let w: Vec<usize> = s.iter().map(|&i| z[i] - 1).collect();
                    acc = f.add(&acc, tab.get(&w));
                }
            }
            assert_eq!(acc, *t.at(zi));
        }
        assert!(verify_expansion_matrix(&t, &e).unwrap());
        for _ in 0..100 {
            let t = TruthTable::random(f.clone(), 3, 3, &mut rng).unwrap();
            assert!(inclusion_exclusion_expand(&t).unwrap().identity_holds);
        }
        for (q, n) in [(2, 3), (4, 2), (3, 4)] {
            let t = TruthTable::random(f.clone(), q, n, &mut rng).unwrap();
            let e = inclusion_exclusion_expand(&t).unwrap();
            assert!(e.identity_holds);
            assert!(verify_expansion_matrix(&t, &e).unwrap(), "q={q} n={n}");
        }
        let big = TruthTable::new(f.clone(), 2, 13, vec![0; 1 << 13]).unwrap();
        assert!(inclusion_exclusion_expand(&big).is_err());
    }

    #[test]
    fn expansion_detects_corruption() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = TruthTable::random(f.clone(), 3, 2, &mut rng).unwrap();
        let mut e = inclusion_exclusion_expand(&t).unwrap();
        let (_, tab) = &mut e.parts[3];
        tab.values[0] = f.add(&tab.values[0], &1);
        assert!(!verify_expansion_matrix(&t, &e).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn butterfly_dense_agreement(n in 0usize..9, seed in any::<u64>()) {
            let f = fp(2147483647);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<u32> = (0..1 << n).map(|_| f.random(&mut rng)).collect();
            let r = disjointness_matrix(&f, n).unwrap();
            let (y, ops) = fast_rn_apply(&f, &x, false).unwrap();
            prop_assert_eq!(&y, &r.apply(&x).unwrap());
            prop_assert_eq!(ops.adds, (n as u64) << n >> 1);
            let (z, ops) = fast_rn_apply(&f, &y, true).unwrap();
            prop_assert_eq!(z, x);
            prop_assert_eq!(ops.subs, (n as u64) << n >> 1);
        }

        #[test]
        fn batch_matches_double_loop(n in 1usize..8, seed in any::<u64>(), and in any::<bool>()) {
            let f = fp(1009);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = TruthTable::random(f.clone(), 2, n, &mut rng).unwrap();
            let m = rand::Rng::gen_range(&mut rng, 1..40);
            let pts: Vec<usize> = (0..m).map(|_| rand::Rng::gen_range(&mut rng, 0..1usize << n)).collect();
            let conv = if and { Convention::And } else { Convention::Or };
            let r = batch_sums(&t, &pts, conv).unwrap();
            prop_assert_eq!(r.answers, brute_batch(&t, &pts, conv));
            prop_assert!(r.ops.mults <= 3u64 << n);
            prop_assert!(r.ops.adds <= (n as u64) << n);
        }

        #[test]
        fn expansion_identity(q in 2usize..5, n in 1usize..4, seed in any::<u64>()) {
            let f = fp(13);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = TruthTable::random(f, q, n, &mut rng).unwrap();
            prop_assert!(inclusion_exclusion_expand(&t).unwrap().identity_holds);
        }
    }
}
