//! Circuit constructions for Kronecker powers: rigidity-based depth-d
//! circuits, powering, the butterfly baseline, unbounded depth and exponent
//! balancing.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::circuit::{verify_circuit, FormulaBound, KronFactor, SynchronousCircuit};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::rigidity::RigidityDecomposition;
use crate::sparse::SparseMatrix;

/// `log_q((r + 1)(r + changes / q))`.
pub fn rigidity_exponent(q: usize, r: usize, changes: usize) -> f64 {
    let num = (r as f64 + 1.0) * (r as f64 * q as f64 + changes as f64);
    (num.ln() - (q as f64).ln()) / (q as f64).ln()
}

/// `M = B * C = C' * B'` with inner dimension `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFactorization<F: Field> {
    pub target: SparseMatrix<F>,
    pub b: SparseMatrix<F>,
    pub c: SparseMatrix<F>,
    pub b_t: SparseMatrix<F>,
    pub c_t: SparseMatrix<F>,
    pub h: usize,
    /// Exponent of the size formula, when built from a rigidity decomposition.
    pub exponent: Option<f64>,
}

impl<F: Field> TwoFactorization<F> {
    pub fn q(&self) -> usize {
        self.target.rows()
    }

    pub fn verify(&self) -> Result<bool> {
        Ok(self.b.matmul(&self.c)? == self.target && self.c_t.matmul(&self.b_t)? == self.target)
    }
}

/// `B = (S | B_lr)`, `C = (I / C_lr)`; the primed pair comes from the
/// transposed decomposition: `C' = (I | B_lr)`, `B' = (S / C_lr)`.
pub fn two_factor_from_rigidity<F: Field>(d: &RigidityDecomposition<F>) -> Result<TwoFactorization<F>> {
    let m = &d.target;
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let q = m.rows();
    let f = m.field().clone();
    let id = SparseMatrix::identity(f, q)?;
    let b = d.sparse.concat_h(&d.low_left)?;
    let c = id.stack_v(&d.low_right)?;
    let c_t = id.concat_h(&d.low_left)?;
    let b_t = d.sparse.stack_v(&d.low_right)?;
    let h = b.cols();
    Ok(TwoFactorization {
        target: m.clone(),
        b,
        c,
        b_t,
        c_t,
        h,
        exponent: Some(rigidity_exponent(q, d.low_left.cols(), d.changes)),
    })
}

/// Any explicit pair `M = B * C = C' * B'`.
pub fn two_factor_explicit<F: Field>(
    b: SparseMatrix<F>,
    c: SparseMatrix<F>,
    c_t: SparseMatrix<F>,
    b_t: SparseMatrix<F>,
) -> Result<TwoFactorization<F>> {
    let target = b.matmul(&c)?;
    let h = b.cols();
    let tf = TwoFactorization { target, b, c, b_t, c_t, h, exponent: None };
    if !tf.verify()? {
        return Err(Error::InvalidArgument("the two orderings have different products".into()));
    }
    Ok(tf)
}

/// Depth-`d` circuit for `M^{⊗d}`. Expression `i < d` is `B` at position `i`
/// and `C` at `i + 1`; expression `d` is `C'` first, `B'` last and `I_h` in
/// between. Factor `j` is the Kronecker product of the position-`j` terms.
pub fn symmetrized_depth_d<F: Field>(tf: &TwoFactorization<F>, d: usize) -> Result<SynchronousCircuit<F>> {
    if d < 2 {
        return Err(Error::DepthTooSmall { got: d, min: 2 });
    }
    let f = tf.target.field().clone();
    let q = tf.q();
    let iq = SparseMatrix::identity(f.clone(), q)?;
    let ih = SparseMatrix::identity(f.clone(), tf.h)?;
    let mut factors = Vec::with_capacity(d);
    for j in 1..=d {
        let mut parts = Vec::with_capacity(d);
        for e in 1..d {
            parts.push(if j == e {
                tf.b.clone()
            } else if j == e + 1 {
                tf.c.clone()
            } else {
                iq.clone()
            });
        }
        parts.push(if j == 1 {
            tf.c_t.clone()
        } else if j == d {
            tf.b_t.clone()
        } else {
            ih.clone()
        });
        factors.push(KronFactor::new(f.clone(), parts)?);
    }
    let circ = SynchronousCircuit::new(factors)?;
    Ok(match tf.exponent {
        Some(c) => circ.with_formula(FormulaBound { q, n: d, h: tf.h, c }),
        None => circ,
    })
}

fn digit_count(dim: usize, q: usize) -> Result<usize> {
    let mut e = 0;
    let mut x = 1usize;
    while x < dim {
        x *= q;
        e += 1;
    }
    if x != dim {
        return Err(Error::InvalidArgument(format!("dimension {dim} is not a power of {q}")));
    }
    Ok(e)
}

/// Keeps the rows (or columns) of `factor` whose trailing `k` base-`q` digits
/// all equal `digit`.
fn restrict_trailing<F: Field>(factor: &KronFactor<F>, q: usize, mut k: usize, digit: usize, rows: bool) -> Result<KronFactor<F>> {
    let mut parts = factor.parts().to_vec();
    for p in parts.iter_mut().rev() {
        if k == 0 {
            break;
        }
        let dim = if rows { p.rows() } else { p.cols() };
        let e = digit_count(dim, q)?;
        if e == 0 {
            continue;
        }
        let take = e.min(k);
        let block = q.pow(take as u32);
        let rep = digit * (block - 1) / (q - 1);
        let keep: Vec<usize> = (0..dim / block).map(|i| i * block + rep).collect();
        *p = if rows { p.select_rows(&keep) } else { p.select_cols(&keep) };
        k -= take;
    }
    if k > 0 {
        return Err(Error::InvalidArgument("not enough digits to restrict".into()));
    }
    KronFactor::new(factor.field().clone(), parts)
}

/// Circuit for `M^{⊗n}` from a circuit for `M^{⊗t}`. When `t | n` each factor
/// is raised to the `n/t` Kronecker power. Otherwise the circuit for the next
/// multiple of `t` is restricted to the block whose trailing digits are
/// `(a, ..., a) x (b, ..., b)` for a nonzero entry `M[a, b]`, and rescaled.
pub fn lift_power<F: Field>(circ: &SynchronousCircuit<F>, m: &SparseMatrix<F>, t: usize, n: usize) -> Result<SynchronousCircuit<F>> {
    if t == 0 || n == 0 {
        return Err(Error::InvalidArgument("exponents must be positive".into()));
    }
    let f = m.field().clone();
    let q = m.rows();
    let reps = n.div_ceil(t);
    let mut factors: Vec<KronFactor<F>> = circ.factors.iter().map(|x| x.power(reps)).collect();
    let extra = reps * t - n;
    if extra > 0 {
        let (a, b, v) = m.iter().next().map(|(a, b, v)| (a, b, v.clone())).ok_or_else(|| Error::InvalidArgument("zero base matrix".into()))?;
        let last = factors.len() - 1;
        factors[0] = restrict_trailing(&factors[0], q, extra, a, true)?;
        factors[last] = restrict_trailing(&factors[last], q, extra, b, false)?;
        let scale = f.inv(&f.pow(&v, extra as u64)).expect("nonzero entry");
        if !f.is_one(&scale) {
            let mut parts = factors[0].parts().to_vec();
            parts[0] = parts[0].scale(&scale);
            factors[0] = KronFactor::new(f.clone(), parts)?;
        }
    }
    let mut out = SynchronousCircuit::new(factors)?;
    if let Some(mut fb) = circ.formula {
        fb.n = fb.n / t * n;
        out = out.with_formula(fb);
    }
    Ok(out)
}

/// Depth-`d` circuit for `M^{⊗n}`, `M` the target of `decomp`. When `d` does
/// not divide `n` the circuit for `n' = d * floor(n/d)` is extended by the
/// `k = n - n'` remaining slots, `M` in slot `j` of factor `j` for `j <= k`.
pub fn synth_depth_d<F: Field>(decomp: &RigidityDecomposition<F>, n: usize, d: usize) -> Result<SynchronousCircuit<F>> {
    if d < 2 {
        return Err(Error::DepthTooSmall { got: d, min: 2 });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let m = &decomp.target;
    let f = m.field().clone();
    let q = m.rows();
    let tf = two_factor_from_rigidity(decomp)?;
    let np = d * (n / d);
    let k = n - np;
    let mut circ = if np > 0 {
        lift_power(&symmetrized_depth_d(&tf, d)?, m, d, np)?
    } else {
        let one = SparseMatrix::identity(f.clone(), 1)?;
        SynchronousCircuit::new(vec![KronFactor::single(one); d])?
    };
    if k > 0 {
        let iq = SparseMatrix::identity(f.clone(), q)?;
        for (j, fct) in circ.factors.iter_mut().enumerate() {
            for slot in 0..k {
                fct.push(if slot == j { m.clone() } else { iq.clone() });
            }
        }
        circ.factors = circ.factors.into_iter().map(KronFactor::simplify).collect();
    }
    let c = tf.exponent.expect("built from a decomposition");
    Ok(SynchronousCircuit::new(circ.factors)?.with_formula(FormulaBound { q, n, h: tf.h, c }))
}

/// Grouped butterfly: factor `l` applies the `l`-th group of `g` matrices and
/// the identity elsewhere.
pub fn butterfly_circuit<F: Field>(ms: &[SparseMatrix<F>], g: usize) -> Result<SynchronousCircuit<F>> {
    let n = ms.len();
    if n == 0 || g == 0 || n % g != 0 {
        return Err(Error::GroupMismatch { group: g, n });
    }
    let f = ms[0].field().clone();
    let q = ms[0].rows();
    for m in ms {
        if m.shape() != (q, q) {
            return Err(Error::DimensionMismatch { op: "butterfly_circuit", left: (q, q), right: m.shape() });
        }
    }
    let mut factors = Vec::with_capacity(n / g);
    for l in 0..n / g {
        let mut parts = Vec::new();
        if l > 0 {
            parts.push(SparseMatrix::identity(f.clone(), q.pow((l * g) as u32))?);
        }
        parts.extend(ms[l * g..(l + 1) * g].iter().cloned());
        if (l + 1) * g < n {
            parts.push(SparseMatrix::identity(f.clone(), q.pow((n - (l + 1) * g) as u32))?);
        }
        factors.push(KronFactor::new(f.clone(), parts)?);
    }
    SynchronousCircuit::new(factors)
}

/// Butterfly for `M^{⊗n}` with the `n` slots split into `d` nearly equal groups.
pub fn butterfly_depth<F: Field>(m: &SparseMatrix<F>, n: usize, d: usize) -> Result<SynchronousCircuit<F>> {
    if d == 0 || d > n {
        return Err(Error::GroupMismatch { group: d, n });
    }
    let f = m.field().clone();
    let q = m.rows();
    let mut factors = Vec::with_capacity(d);
    let mut start = 0;
    for l in 0..d {
        let size = n / d + usize::from(l < n % d);
        let mut parts = Vec::new();
        if start > 0 {
            parts.push(SparseMatrix::identity(f.clone(), q.pow(start as u32))?);
        }
        parts.extend(std::iter::repeat_n(m.clone(), size));
        if start + size < n {
            parts.push(SparseMatrix::identity(f.clone(), q.pow((n - start - size) as u32))?);
        }
        factors.push(KronFactor::new(f.clone(), parts)?);
        start += size;
    }
    SynchronousCircuit::new(factors)
}

/// Result of [`synth_unbounded`].
#[derive(Clone, Debug)]
pub struct UnboundedCircuit<F: Field> {
    pub circuit: SynchronousCircuit<F>,
    pub d: usize,
    pub n_prime: usize,
    pub k: usize,
    pub wires: u128,
    /// `wires / (N log2 N)`.
    pub ratio: f64,
}

/// Depth chosen from the exponent: `round(c ln N)` clamped to `[2, n]`, with
/// halves rounded down.
pub fn unbounded_depth(c: f64, q: usize, n: usize) -> usize {
    let x = c * (n as f64) * (q as f64).ln();
    let fl = x.floor();
    let d = if x - fl > 0.5 { fl + 1.0 } else { fl };
    (d.max(2.0) as usize).min(n.max(2))
}

/// `M^{⊗n} = (M^{⊗n'} ⊗ I_{q^k}) * (I_{q^n'} ⊗ M^{⊗k})`, with the left part a
/// depth-`d` circuit and the right part a depth-`k` one.
pub fn synth_unbounded<F: Field>(decomp: &RigidityDecomposition<F>, n: usize) -> Result<UnboundedCircuit<F>> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    let m = &decomp.target;
    let f = m.field().clone();
    let q = m.rows();
    let c = rigidity_exponent(q, decomp.low_left.cols(), decomp.changes);
    let d = unbounded_depth(c, q, n);
    let np = d * (n / d);
    let k = n - np;
    let mut left = synth_depth_d(decomp, np, d)?;
    let circuit = if k == 0 {
        left
    } else {
        let pad = SparseMatrix::identity(f.clone(), q.pow(k as u32))?;
        left.factors.iter_mut().for_each(|x| x.push(pad.clone()));
        let mut right = if k == 1 {
            SynchronousCircuit::from_matrices(vec![m.clone()])?
        } else {
            synth_depth_d(decomp, k, k)?
        };
        let front = SparseMatrix::identity(f, q.pow(np as u32))?;
        right.factors.iter_mut().for_each(|x| x.push_front(front.clone()));
        left.then(right)?
    };
    let wires = circuit.wires();
    let big_n = (q as f64).powi(n as i32);
    let ratio = wires as f64 / (big_n * big_n.log2());
    Ok(UnboundedCircuit { circuit, d, n_prime: np, k, wires, ratio })
}

/// Exponent promised by balancing factors with exponents `a`:
/// `1 + (a* - 1) / (1 + d a* - sum a)`.
pub fn balanced_exponent(a: &[BigRational]) -> BigRational {
    let star = a.iter().max().cloned().unwrap_or_else(BigRational::one);
    balanced_with_star(a, star)
}

/// Symmetric variant: `a*` is the largest `(a_j + a_{d+1-j}) / 2`.
pub fn balanced_exponent_symmetric(a: &[BigRational]) -> BigRational {
    let d = a.len();
    let two = BigRational::from_integer(BigInt::from(2));
    let star = (0..d).map(|j| (&a[j] + &a[d - 1 - j]) / &two).max().unwrap_or_else(BigRational::one);
    balanced_with_star(a, star)
}

fn balanced_with_star(a: &[BigRational], star: BigRational) -> BigRational {
    let one = BigRational::one();
    let d = BigRational::from_integer(BigInt::from(a.len()));
    let sum: BigRational = a.iter().fold(BigRational::zero(), |s, x| s + x);
    &one + (&star - &one) / (&one + &d * &star - sum)
}

/// How `n` digits were split by [`balance_exponents`].
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceSplit {
    /// Digits handled by the powered input circuit.
    pub base: usize,
    /// Digits handled by plain `M` in each factor's own slot.
    pub slots: Vec<usize>,
    /// Measured input exponents `log_q(nnz(A_j)) / t`.
    pub exponents: Vec<f64>,
}

/// Rebalances a circuit for `M^{⊗t}` into one for `M^{⊗n}`: part of the digits
/// go through the input circuit, and factor `j` also applies `M` on its own
/// block of digits, sized so the lighter factors absorb more work.
pub fn balance_exponents<F: Field>(
    base: &SynchronousCircuit<F>,
    m: &SparseMatrix<F>,
    t: usize,
    n: usize,
    sym: bool,
) -> Result<(SynchronousCircuit<F>, BalanceSplit)> {
    if t == 0 || n == 0 {
        return Err(Error::InvalidArgument("exponents must be positive".into()));
    }
    if !verify_circuit(base, &m.kron_power(t)?)?.equal {
        return Err(Error::UnverifiedInput);
    }
    let (base, t) = if sym {
        if !m.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        let d = base.depth();
        let paired = (0..d).map(|j| base.factors[j].kron(&base.factors[d - 1 - j].transpose())).collect();
        (SynchronousCircuit::new(paired)?, 2 * t)
    } else {
        (base.clone(), t)
    };
    let f = m.field().clone();
    let q = m.rows();
    let d = base.depth();
    let lq = (q as f64).ln();
    let a: Vec<f64> = base.factor_nnz().iter().map(|&z| (z as f64).ln() / lq / t as f64).collect();
    let star = a.iter().cloned().fold(f64::MIN, f64::max);
    let b = 1.0 / (1.0 + a.iter().map(|x| star - x).sum::<f64>());
    const EPS: f64 = 1e-12;
    let mut slots: Vec<usize> = a.iter().map(|x| ((star - x) * b * n as f64 + EPS).floor() as usize).collect();
    let mut nb = t * (((b * n as f64 + EPS).floor() as usize) / t);
    while nb + slots.iter().sum::<usize>() > n {
        nb -= t;
    }
    // Remaining digits go one at a time to the slot that keeps the largest
    // factor smallest.
    let lm = (m.nnz() as f64).ln();
    let mut rem = n - nb - slots.iter().sum::<usize>();
    if nb == 0 && rem >= t && slots.iter().all(|&s| s == 0) {
        nb = t;
        rem -= t;
    }
    while rem > 0 {
        let total: usize = slots.iter().sum::<usize>() + 1;
        let cost = |j: usize, s: &[usize]| {
            (0..d)
                .map(|i| {
                    let own = s[i] + usize::from(i == j);
                    a[i] * (nb as f64) * lq + own as f64 * lm + (total - own) as f64 * lq
                })
                .fold(f64::MIN, f64::max)
        };
        let best = (0..d)
            .min_by(|&x, &y| cost(x, &slots).partial_cmp(&cost(y, &slots)).expect("finite"))
            .expect("nonempty");
        slots[best] += 1;
        rem -= 1;
    }
    let powered = if nb > 0 { Some(lift_power(&base, m, t, nb)?) } else { None };
    let mut factors = Vec::with_capacity(d);
    for j in 0..d {
        let mut fct = match &powered {
            Some(p) => p.factors[j].clone(),
            None => KronFactor::single(SparseMatrix::identity(f.clone(), 1)?),
        };
        for (l, &s) in slots.iter().enumerate() {
            if s == 0 {
                continue;
            }
            if l == j {
                for _ in 0..s {
                    fct.push(m.clone());
                }
            } else {
                fct.push(SparseMatrix::identity(f.clone(), q.pow(s as u32))?);
            }
        }
        factors.push(fct.simplify());
    }
    let circ = SynchronousCircuit::new(factors)?;
    Ok((circ, BalanceSplit { base: nb, slots, exponents: a }))
}
