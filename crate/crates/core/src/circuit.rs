//! Synchronous linear circuits: chains of sparse factors whose product is the
//! computed transform. Factors are kept as Kronecker products of small parts so
//! wire counts are exact without materializing large matrices.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::par;
use crate::sparse::{check_dim, RowAccumulator, SparseMatrix};

/// `parts[0] ⊗ parts[1] ⊗ ...`, left part most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct KronFactor<F: Field> {
    field: F,
    parts: Vec<SparseMatrix<F>>,
}

impl<F: Field> KronFactor<F> {
    pub fn new(field: F, parts: Vec<SparseMatrix<F>>) -> Result<Self> {
        for p in &parts {
            if *p.field() != field {
                return Err(Error::ContextMismatch { left: field.ctx(), right: p.field().ctx() });
            }
        }
        Ok(KronFactor { field, parts })
    }

    pub fn single(m: SparseMatrix<F>) -> Self {
        KronFactor { field: m.field().clone(), parts: vec![m] }
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn parts(&self) -> &[SparseMatrix<F>] {
        &self.parts
    }

    pub fn rows(&self) -> u128 {
        self.parts.iter().map(|p| p.rows() as u128).product()
    }

    pub fn cols(&self) -> u128 {
        self.parts.iter().map(|p| p.cols() as u128).product()
    }

    pub fn nnz(&self) -> u128 {
        self.parts.iter().map(|p| p.nnz() as u128).product()
    }

    /// Appends `other`'s parts on the right (`self ⊗ other`).
    pub fn kron(&self, other: &Self) -> Self {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        KronFactor { field: self.field.clone(), parts }
    }

    pub fn push(&mut self, m: SparseMatrix<F>) {
        self.parts.push(m);
    }

    pub fn push_front(&mut self, m: SparseMatrix<F>) {
        self.parts.insert(0, m);
    }

    /// `self^{⊗k}`.
    pub fn power(&self, k: usize) -> Self {
        let mut parts = Vec::with_capacity(self.parts.len() * k);
        for _ in 0..k {
            parts.extend(self.parts.iter().cloned());
        }
        KronFactor { field: self.field.clone(), parts }
    }

    pub fn transpose(&self) -> Self {
        KronFactor { field: self.field.clone(), parts: self.parts.iter().map(SparseMatrix::transpose).collect() }
    }

    /// Drops 1x1 identity parts.
    pub fn simplify(mut self) -> Self {
        let one = self.field.one();
        self.parts.retain(|p| !(p.shape() == (1, 1) && p.get(0, 0) == one));
        self
    }

    pub fn materialize(&self) -> Result<SparseMatrix<F>> {
        check_dim(self.rows())?;
        check_dim(self.cols())?;
        let mut acc = SparseMatrix::identity(self.field.clone(), 1)?;
        for p in &self.parts {
            acc = acc.kron(p)?;
        }
        Ok(acc)
    }

    /// Row `i` as sorted `(col, value)` pairs, computed from the parts.
    pub fn row(&self, i: usize) -> Vec<(usize, F::Elem)> {
        let f = &self.field;
        let mut idx = vec![0; self.parts.len()];
        let mut rem = i;
        for (k, p) in self.parts.iter().enumerate().rev() {
            idx[k] = rem % p.rows();
            rem /= p.rows();
        }
        let mut out = vec![(0usize, f.one())];
        for (p, &r) in self.parts.iter().zip(&idx) {
            let (c, v) = p.row(r);
            let mut next = Vec::with_capacity(out.len() * c.len());
            for (j0, x) in &out {
                for (&j, y) in c.iter().zip(v) {
                    next.push((j0 * p.cols() + j as usize, f.mul(x, y)));
                }
            }
            out = next;
        }
        out
    }

    /// `y = self * x` by applying one part at a time along its tensor axis.
    pub fn apply(&self, x: &[F::Elem]) -> Result<Vec<F::Elem>> {
        let cols = self.cols();
        if x.len() as u128 != cols {
            return Err(Error::LengthMismatch { expected: cols as usize, got: x.len() });
        }
        let f = &self.field;
        let mut cur = x.to_vec();
        // Shape before step k (processing parts right to left):
        // (c_0 .. c_k, r_{k+1} .. r_last).
        for k in (0..self.parts.len()).rev() {
            let p = &self.parts[k];
            let outer: usize = self.parts[..k].iter().map(SparseMatrix::cols).product();
            let inner: usize = self.parts[k + 1..].iter().map(SparseMatrix::rows).product();
            let (pr, pc) = p.shape();
            let len = check_dim((outer * pr * inner) as u128)?;
            let mut next = vec![f.zero(); len];
            let src = &cur;
            par::for_each_chunk(&mut next, (pr * inner).max(1), |o, block| {
                for r in 0..pr {
                    let (cs, vs) = p.row(r);
                    let dst = &mut block[r * inner..(r + 1) * inner];
                    for (&c, v) in cs.iter().zip(vs) {
                        let s = &src[(o * pc + c as usize) * inner..(o * pc + c as usize + 1) * inner];
                        for (d, y) in dst.iter_mut().zip(s) {
                            f.mul_add_assign(d, v, y);
                        }
                    }
                }
            });
            cur = next;
        }
        Ok(cur)
    }
}

/// Parameters of the rigidity-based size formula attached to synthesized circuits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormulaBound {
    /// Base dimension.
    pub q: usize,
    /// Exponent in base-`q` digits.
    pub n: usize,
    /// Inner dimension of the two-factorization (`q + r`).
    pub h: usize,
    /// `log_q((r + 1)(r + changes / q))`.
    pub c: f64,
}

impl FormulaBound {
    pub fn big_n(&self) -> f64 {
        (self.q as f64).powi(self.n as i32)
    }

    /// `d * N^(1 + c/d)`, with the extra `q^(1-c)` factor when `d` does not divide `n`.
    pub fn stated(&self, d: usize) -> f64 {
        let per = self.big_n().powf(1.0 + self.c / d as f64);
        let extra = if self.n % d == 0 { 1.0 } else { (self.q as f64).powf(1.0 - self.c) };
        d as f64 * per * extra
    }

    /// Stated bound times the `(h/q)^((d-2) n / d)` slack from chaining the
    /// inner-dimension identities.
    pub fn chainable(&self, d: usize) -> f64 {
        let slack = (self.h as f64 / self.q as f64).powf((d.saturating_sub(2) * self.n) as f64 / d as f64);
        self.stated(d) * slack
    }
}

/// `A_1 * A_2 * ... * A_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynchronousCircuit<F: Field> {
    pub factors: Vec<KronFactor<F>>,
    pub formula: Option<FormulaBound>,
}

impl<F: Field> SynchronousCircuit<F> {
    pub fn new(factors: Vec<KronFactor<F>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("a circuit needs at least one factor".into()));
        }
        for w in factors.windows(2) {
            if w[0].cols() != w[1].rows() {
                return Err(Error::DimensionMismatch {
                    op: "circuit chain",
                    left: (w[0].rows() as usize, w[0].cols() as usize),
                    right: (w[1].rows() as usize, w[1].cols() as usize),
                });
            }
        }
        Ok(SynchronousCircuit { factors, formula: None })
    }

    pub fn from_matrices(ms: Vec<SparseMatrix<F>>) -> Result<Self> {
        Self::new(ms.into_iter().map(KronFactor::single).collect())
    }

    pub fn with_formula(mut self, formula: FormulaBound) -> Self {
        self.formula = Some(formula);
        self
    }

    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn rows(&self) -> u128 {
        self.factors[0].rows()
    }

    pub fn cols(&self) -> u128 {
        self.factors.last().expect("nonempty").cols()
    }

    pub fn field(&self) -> &F {
        self.factors[0].field()
    }

    pub fn factor_nnz(&self) -> Vec<u128> {
        self.factors.iter().map(KronFactor::nnz).collect()
    }

    pub fn wires(&self) -> u128 {
        self.factor_nnz().iter().sum()
    }

    pub fn max_factor_nnz(&self) -> u128 {
        self.factor_nnz().into_iter().max().unwrap_or(0)
    }

    pub fn materialize_factors(&self) -> Result<Vec<SparseMatrix<F>>> {
        self.factors.iter().map(KronFactor::materialize).collect()
    }

    /// Full product as one matrix.
    pub fn product(&self) -> Result<SparseMatrix<F>> {
        let ms = self.materialize_factors()?;
        let mut acc = ms[0].clone();
        for m in &ms[1..] {
            acc = acc.matmul(m)?;
        }
        Ok(acc)
    }

    /// `A_1 (A_2 (... (A_d x)))`.
    pub fn apply(&self, x: &[F::Elem]) -> Result<Vec<F::Elem>> {
        let mut cur = x.to_vec();
        for fct in self.factors.iter().rev() {
            cur = fct.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Consecutive factors `self` then `other`: the product is `self * other`.
    pub fn then(self, other: Self) -> Result<Self> {
        let mut factors = self.factors;
        factors.extend(other.factors);
        let mut out = Self::new(factors)?;
        out.formula = self.formula;
        Ok(out)
    }

    /// Circuit for `self ⊗ m`: `m` joins the first factor and identities of
    /// matching size join the others.
    pub fn kron_tail(mut self, m: &SparseMatrix<F>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        let id = SparseMatrix::identity(m.field().clone(), m.rows())?;
        for (j, fct) in self.factors.iter_mut().enumerate() {
            fct.push(if j == 0 { m.clone() } else { id.clone() });
        }
        self.factors = self.factors.into_iter().map(KronFactor::simplify).collect();
        self.formula = None;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub equal: bool,
    pub wires: u128,
    pub factor_nnz: Vec<u128>,
    pub depth: usize,
    /// Stated size bound, when the circuit carries formula parameters.
    pub bound: Option<f64>,
    /// Bound including the chaining slack.
    pub chainable_bound: Option<f64>,
    pub c: Option<f64>,
}

impl VerifyReport {
    fn new<F: Field>(circ: &SynchronousCircuit<F>, equal: bool) -> Self {
        let d = circ.depth();
        VerifyReport {
            equal,
            wires: circ.wires(),
            factor_nnz: circ.factor_nnz(),
            depth: d,
            bound: circ.formula.map(|fb| fb.stated(d)),
            chainable_bound: circ.formula.map(|fb| fb.chainable(d)),
            c: circ.formula.map(|fb| fb.c),
        }
    }
}

/// Exact comparison of the circuit's product with `target`, row by row.
pub fn verify_circuit<F: Field>(circ: &SynchronousCircuit<F>, target: &SparseMatrix<F>) -> Result<VerifyReport> {
    if circ.rows() != target.rows() as u128 || circ.cols() != target.cols() as u128 {
        return Err(Error::DimensionMismatch {
            op: "verify_circuit",
            left: (circ.rows() as usize, circ.cols() as usize),
            right: target.shape(),
        });
    }
    let equal = rows_match(circ, |i| {
        let (c, v) = target.row(i);
        c.iter().map(|&j| j as usize).zip(v.iter().cloned()).collect()
    })?;
    Ok(VerifyReport::new(circ, equal))
}

/// Exact comparison against a target given in Kronecker form, so the target
/// itself is never materialized.
pub fn verify_circuit_kron<F: Field>(circ: &SynchronousCircuit<F>, target: &KronFactor<F>) -> Result<VerifyReport> {
    if circ.rows() != target.rows() || circ.cols() != target.cols() {
        return Err(Error::DimensionMismatch {
            op: "verify_circuit",
            left: (circ.rows() as usize, circ.cols() as usize),
            right: (target.rows() as usize, target.cols() as usize),
        });
    }
    let equal = rows_match(circ, |i| target.row(i))?;
    Ok(VerifyReport::new(circ, equal))
}

/// Randomized check: compares `circ * x` with `target * x` on `trials` random
/// vectors. A wrong circuit passes one trial with probability at most `1/|F|`.
pub fn probe_circuit<F: Field, R: rand::Rng>(
    circ: &SynchronousCircuit<F>,
    target: &KronFactor<F>,
    trials: usize,
    rng: &mut R,
) -> Result<VerifyReport> {
    if circ.rows() != target.rows() || circ.cols() != target.cols() {
        return Err(Error::DimensionMismatch {
            op: "probe_circuit",
            left: (circ.rows() as usize, circ.cols() as usize),
            right: (target.rows() as usize, target.cols() as usize),
        });
    }
    let f = circ.field().clone();
    let n = check_dim(circ.cols())?;
    let mut equal = true;
    for _ in 0..trials {
        let x: Vec<F::Elem> = (0..n).map(|_| f.random(rng)).collect();
        if circ.apply(&x)? != target.apply(&x)? {
            equal = false;
            break;
        }
    }
    Ok(VerifyReport::new(circ, equal))
}

fn rows_match<F, T>(circ: &SynchronousCircuit<F>, target_row: T) -> Result<bool>
where
    F: Field,
    T: Fn(usize) -> Vec<(usize, F::Elem)> + Sync + Send,
{
    let ms = circ.materialize_factors()?;
    let f = circ.field().clone();
    let rows = ms[0].rows();
    Ok(par::all_init(
        rows,
        || ms[1..].iter().map(|m| RowAccumulator::new(&f, m.cols())).collect::<Vec<_>>(),
        |accs, i| {
            let (c, v) = ms[0].row(i);
            let mut cur: Vec<(u32, F::Elem)> = c.iter().copied().zip(v.iter().cloned()).collect();
            for (m, acc) in ms[1..].iter().zip(accs.iter_mut()) {
                for (k, x) in &cur {
                    let (cb, vb) = m.row(*k as usize);
                    for (&j, y) in cb.iter().zip(vb) {
                        acc.add(&f, j, x, y);
                    }
                }
                cur = acc.drain(&f);
            }
            let want = target_row(i);
            let want: Vec<(usize, F::Elem)> = want.into_iter().filter(|(_, v)| !f.is_zero(v)).collect();
            want.len() == cur.len() && want.iter().zip(&cur).all(|((a, x), (b, y))| *a == *b as usize && x == y)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeField;
    use crate::rigidity::hadamard;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f7() -> PrimeField {
        PrimeField::new(7).unwrap()
    }

    #[test]
    fn kron_factor_matches_materialized() {
        let f = f7();
        let a = SparseMatrix::from_int_rows(f, &[vec![1, 2, 0], vec![0, 3, 1]]).unwrap();
        let b = SparseMatrix::from_int_rows(f, &[vec![1, 1], vec![1, 0], vec![0, 5]]).unwrap();
        let k = KronFactor::new(f, vec![a.clone(), b.clone(), a.clone()]).unwrap();
        let m = k.materialize().unwrap();
        assert_eq!(m, a.kron(&b).unwrap().kron(&a).unwrap());
        assert_eq!(k.nnz(), m.nnz() as u128);
        for i in 0..m.rows() {
            let (c, v) = m.row(i);
            let want: Vec<(usize, u32)> = c.iter().map(|&j| j as usize).zip(v.iter().copied()).collect();
            assert_eq!(k.row(i), want);
        }
        let x: Vec<u32> = (0..m.cols() as u32).map(|i| i % 7).collect();
        assert_eq!(k.apply(&x).unwrap(), m.apply(&x).unwrap());
        assert_eq!(k.transpose().materialize().unwrap(), m.transpose());
    }

    #[test]
    fn verify_detects_tampering() {
        let f = f7();
        let h = hadamard(&f, 2).unwrap();
        let circ = SynchronousCircuit::from_matrices(vec![h.clone(), SparseMatrix::identity(f, 4).unwrap()]).unwrap();
        let rep = verify_circuit(&circ, &h).unwrap();
        assert!(rep.equal);
        assert_eq!(rep.wires, 20);
        assert_eq!(rep.depth, 2);
        let bad = SparseMatrix::diagonal(f, vec![1, 1, 1, 2]).unwrap();
        let circ = SynchronousCircuit::from_matrices(vec![h.clone(), bad]).unwrap();
        assert!(!verify_circuit(&circ, &h).unwrap().equal);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = KronFactor::single(h.clone());
        assert!(!probe_circuit(&circ, &target, 8, &mut rng).unwrap().equal);
        assert!(!verify_circuit_kron(&circ, &target).unwrap().equal);
        assert!(matches!(
            verify_circuit(&circ, &SparseMatrix::identity(f, 3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(SynchronousCircuit::from_matrices(vec![h, SparseMatrix::identity(f, 3).unwrap()]).is_err());
    }

    #[test]
    fn kron_tail_extends_product() {
        let f = f7();
        let h = hadamard(&f, 1).unwrap();
        let circ = crate::synth::butterfly_depth(&h, 3, 2).unwrap().kron_tail(&hadamard(&f, 2).unwrap()).unwrap();
        assert!(verify_circuit(&circ, &hadamard(&f, 5).unwrap()).unwrap().equal);
        let rect = SparseMatrix::from_int_rows(f, &[vec![1, 2]]).unwrap();
        assert!(matches!(circ.kron_tail(&rect), Err(Error::NotSquare { .. })));
    }
}
