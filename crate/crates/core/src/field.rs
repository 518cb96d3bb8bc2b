//! Exact scalar fields: prime fields below 2^31 and arbitrary-precision rationals.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Default modulus for generic work: the Mersenne prime 2^31 - 1.
pub const DEFAULT_MODULUS: u32 = 2_147_483_647;

/// Field descriptor. Serialized as `p` for F_p and `0` for the rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldCtx {
    Prime(u32),
    Rational,
}

impl FieldCtx {
    /// Validating constructor for a prime field.
    pub fn prime(p: u64) -> Result<Self> {
        validate_modulus(p)?;
        Ok(FieldCtx::Prime(p as u32))
    }

    pub fn descriptor(self) -> u64 {
        match self {
            FieldCtx::Prime(p) => p as u64,
            FieldCtx::Rational => 0,
        }
    }

    pub fn from_descriptor(d: u64) -> Result<Self> {
        if d == 0 {
            Ok(FieldCtx::Rational)
        } else {
            FieldCtx::prime(d)
        }
    }

    pub fn modulus(self) -> Option<u32> {
        match self {
            FieldCtx::Prime(p) => Some(p),
            FieldCtx::Rational => None,
        }
    }
}

impl fmt::Display for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldCtx::Prime(p) => write!(f, "F{p}"),
            FieldCtx::Rational => write!(f, "Q"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn validate_modulus(p: u64) -> Result<()> {
    if p == 2 {
        return Err(Error::CharacteristicTwo);
    }
    if p >= (1 << 31) || !is_prime(p) {
        return Err(Error::InvalidModulus(p));
    }
    Ok(())
}

/// Arithmetic over a concrete field. Elements are plain values; the field
/// object carries whatever context the arithmetic needs.
pub trait Field: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    type Elem: Clone + fmt::Debug + PartialEq + Eq + Hash + Send + Sync;

    fn ctx(&self) -> FieldCtx;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_i64(&self, v: i64) -> Self::Elem;
    /// `None` when the denominator vanishes in this field.
    fn from_rational(&self, r: &BigRational) -> Option<Self::Elem>;
    fn is_zero(&self, x: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;
    fn format(&self, x: &Self::Elem) -> String;
    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Elem;
    fn to_scalar(&self, x: &Self::Elem) -> Scalar;
    fn from_scalar(&self, s: &Scalar) -> Result<Self::Elem>;

    fn is_one(&self, x: &Self::Elem) -> bool {
        *x == self.one()
    }

    /// `acc += a * b`
    fn mul_add_assign(&self, acc: &mut Self::Elem, a: &Self::Elem, b: &Self::Elem) {
        let t = self.mul(a, b);
        *acc = self.add(acc, &t);
    }

    fn pow(&self, x: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut base = x.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Parses an integer or `num/den` literal.
    fn parse(&self, s: &str) -> Result<Self::Elem> {
        let r = parse_rational(s)?;
        self.from_rational(&r).ok_or(Error::DivisionByZero)
    }
}

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse { line: 0, msg: format!("bad scalar literal `{s}`") };
    let r = match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::DivisionByZero);
            }
            BigRational::new(n, d)
        }
        None => BigRational::from_integer(s.parse().map_err(|_| bad())?),
    };
    Ok(r)
}

/// F_p for an odd prime p < 2^31.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        validate_modulus(p)?;
        Ok(PrimeField { p: p as u32 })
    }

    pub fn modulus(&self) -> u32 {
        self.p
    }
}

impl Default for PrimeField {
    fn default() -> Self {
        PrimeField { p: DEFAULT_MODULUS }
    }
}

impl Field for PrimeField {
    type Elem = u32;

    fn ctx(&self) -> FieldCtx {
        FieldCtx::Prime(self.p)
    }
    #[inline]
    fn zero(&self) -> u32 {
        0
    }
    #[inline]
    fn one(&self) -> u32 {
        1
    }
    fn from_i64(&self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }
    fn from_rational(&self, r: &BigRational) -> Option<u32> {
        let p = BigInt::from(self.p);
        let n = r.numer().mod_floor(&p).to_u32()?;
        let d = r.denom().mod_floor(&p).to_u32()?;
        let di = self.inv(&d)?;
        Some(self.mul(&n, &di))
    }
    #[inline]
    fn is_zero(&self, x: &u32) -> bool {
        *x == 0
    }
    #[inline]
    fn add(&self, a: &u32, b: &u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
    #[inline]
    fn sub(&self, a: &u32, b: &u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }
    #[inline]
    fn mul(&self, a: &u32, b: &u32) -> u32 {
        ((*a as u64 * *b as u64) % self.p as u64) as u32
    }
    #[inline]
    fn neg(&self, a: &u32) -> u32 {
        if *a == 0 {
            0
        } else {
            self.p - a
        }
    }
    fn inv(&self, a: &u32) -> Option<u32> {
        if *a == 0 {
            return None;
        }
        let e = (*a as i64).extended_gcd(&(self.p as i64));
        debug_assert_eq!(e.gcd, 1);
        Some(e.x.rem_euclid(self.p as i64) as u32)
    }
    #[inline]
    fn mul_add_assign(&self, acc: &mut u32, a: &u32, b: &u32) {
        *acc = ((*acc as u64 + *a as u64 * *b as u64) % self.p as u64) as u32;
    }
    fn format(&self, x: &u32) -> String {
        x.to_string()
    }
    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(0..self.p)
    }
    fn to_scalar(&self, x: &u32) -> Scalar {
        Scalar { ctx: self.ctx(), value: ScalarValue::Residue(*x) }
    }
    fn from_scalar(&self, s: &Scalar) -> Result<u32> {
        match (&s.value, s.ctx == self.ctx()) {
            (ScalarValue::Residue(v), true) => Ok(*v),
            _ => Err(Error::ContextMismatch { left: self.ctx(), right: s.ctx }),
        }
    }
}

/// The rationals with arbitrary-precision numerator and denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Rationals;

impl Field for Rationals {
    type Elem = BigRational;

    fn ctx(&self) -> FieldCtx {
        FieldCtx::Rational
    }
    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn from_i64(&self, v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }
    fn from_rational(&self, r: &BigRational) -> Option<BigRational> {
        Some(r.clone())
    }
    fn is_zero(&self, x: &BigRational) -> bool {
        x.is_zero()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn inv(&self, a: &BigRational) -> Option<BigRational> {
        if a.is_zero() {
            None
        } else {
            Some(a.recip())
        }
    }
    fn format(&self, x: &BigRational) -> String {
        format_rational(x)
    }
    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> BigRational {
        let n: i64 = rng.gen_range(-9..=9);
        let d: i64 = rng.gen_range(1..=4);
        BigRational::new(n.into(), d.into())
    }
    fn to_scalar(&self, x: &BigRational) -> Scalar {
        Scalar { ctx: FieldCtx::Rational, value: ScalarValue::Fraction(x.clone()) }
    }
    fn from_scalar(&self, s: &Scalar) -> Result<BigRational> {
        match &s.value {
            ScalarValue::Fraction(v) => Ok(v.clone()),
            _ => Err(Error::ContextMismatch { left: FieldCtx::Rational, right: s.ctx }),
        }
    }
}

pub(crate) fn format_rational(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ScalarValue {
    Residue(u32),
    Fraction(BigRational),
}

/// A field element tagged with its field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    ctx: FieldCtx,
    value: ScalarValue,
}

impl Scalar {
    pub fn from_int(ctx: FieldCtx, v: i64) -> Self {
        match ctx {
            FieldCtx::Prime(p) => PrimeField { p }.to_scalar(&PrimeField { p }.from_i64(v)),
            FieldCtx::Rational => Rationals.to_scalar(&Rationals.from_i64(v)),
        }
    }

    pub fn from_fraction(ctx: FieldCtx, num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        let r = BigRational::new(num.into(), den.into());
        match ctx {
            FieldCtx::Prime(p) => {
                let f = PrimeField { p };
                Ok(f.to_scalar(&f.from_rational(&r).ok_or(Error::DivisionByZero)?))
            }
            FieldCtx::Rational => Ok(Rationals.to_scalar(&r)),
        }
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn value(&self) -> &ScalarValue {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        match &self.value {
            ScalarValue::Residue(v) => *v == 0,
            ScalarValue::Fraction(v) => v.is_zero(),
        }
    }

    fn check(&self, other: &Scalar) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch { left: self.ctx, right: other.ctx });
        }
        Ok(())
    }

    fn binop(
        &self,
        other: &Scalar,
        fp: impl Fn(&PrimeField, &u32, &u32) -> u32,
        fq: impl Fn(&BigRational, &BigRational) -> BigRational,
    ) -> Result<Scalar> {
        self.check(other)?;
        let value = match (&self.value, &other.value, self.ctx) {
            (ScalarValue::Residue(a), ScalarValue::Residue(b), FieldCtx::Prime(p)) => {
                ScalarValue::Residue(fp(&PrimeField { p }, a, b))
            }
            (ScalarValue::Fraction(a), ScalarValue::Fraction(b), _) => ScalarValue::Fraction(fq(a, b)),
            _ => unreachable!("scalar value does not match its context"),
        };
        Ok(Scalar { ctx: self.ctx, value })
    }

    pub fn add(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, |f, a, b| f.add(a, b), |a, b| a + b)
    }

    pub fn sub(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, |f, a, b| f.sub(a, b), |a, b| a - b)
    }

    pub fn mul(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, |f, a, b| f.mul(a, b), |a, b| a * b)
    }

    pub fn neg(&self) -> Scalar {
        let value = match (&self.value, self.ctx) {
            (ScalarValue::Residue(a), FieldCtx::Prime(p)) => ScalarValue::Residue(PrimeField { p }.neg(a)),
            (ScalarValue::Fraction(a), _) => ScalarValue::Fraction(-a),
            _ => unreachable!("scalar value does not match its context"),
        };
        Scalar { ctx: self.ctx, value }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let value = match (&self.value, self.ctx) {
            (ScalarValue::Residue(a), FieldCtx::Prime(p)) => {
                ScalarValue::Residue(PrimeField { p }.inv(a).expect("nonzero"))
            }
            (ScalarValue::Fraction(a), _) => ScalarValue::Fraction(a.recip()),
            _ => unreachable!("scalar value does not match its context"),
        };
        Ok(Scalar { ctx: self.ctx, value })
    }

    pub fn pow(&self, mut e: u64) -> Scalar {
        let mut acc = Scalar::from_int(self.ctx, 1);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same context");
            }
            base = base.mul(&base).expect("same context");
            e >>= 1;
        }
        acc
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            ScalarValue::Residue(v) => write!(f, "{v}"),
            ScalarValue::Fraction(v) => f.write_str(&format_rational(v)),
        }
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest generator of the multiplicative group of F_p.
pub fn multiplicative_generator(f: &PrimeField) -> u32 {
    let p = f.modulus() as u64;
    let factors = prime_factors(p - 1);
    (2..p as u32)
        .find(|&g| factors.iter().all(|&r| f.pow(&g, (p - 1) / r) != 1))
        .unwrap_or(1)
}

/// Smallest residue of exact multiplicative order `n` in F_p.
///
/// Starts from `g^((p-1)/n)` for a generator `g`; every element of order `n`
/// is a coprime power of that one, and the least of them is returned.
pub fn primitive_root_of_unity(ctx: FieldCtx, n: u64) -> Result<Scalar> {
    let p = match ctx {
        FieldCtx::Prime(p) => p,
        FieldCtx::Rational => return Err(Error::RationalUnsupported),
    };
    let f = PrimeField { p };
    if n == 0 || (p as u64 - 1) % n != 0 {
        return Err(Error::NoRootExists { n, p });
    }
    let w0 = f.pow(&multiplicative_generator(&f), (p as u64 - 1) / n);
    let mut best = w0;
    let mut cur = 1u32;
    for k in 1..=n {
        cur = f.mul(&cur, &w0);
        if k.gcd(&n) == 1 && cur < best {
            best = cur;
        }
    }
    Ok(f.to_scalar(&best))
}

/// Raw-residue form of [`primitive_root_of_unity`].
pub fn root_of_unity(f: &PrimeField, n: u64) -> Result<u32> {
    f.from_scalar(&primitive_root_of_unity(f.ctx(), n)?)
}

/// Rational -> nearest f64, used only for reporting.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        let sign = if r.is_negative() { -1.0 } else { 1.0 };
        sign * f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f5() -> FieldCtx {
        FieldCtx::prime(5).unwrap()
    }

    #[test]
    fn small_field_examples() {
        let two = Scalar::from_int(f5(), 2);
        assert_eq!(two.inv().unwrap(), Scalar::from_int(f5(), 3));
        let s = Scalar::from_int(f5(), 3).add(&Scalar::from_int(f5(), 4)).unwrap();
        assert_eq!(s, Scalar::from_int(f5(), 2));
        let q = FieldCtx::Rational;
        let a = Scalar::from_fraction(q, 2, 3).unwrap();
        let b = Scalar::from_fraction(q, 9, 4).unwrap();
        assert_eq!(a.mul(&b).unwrap(), Scalar::from_fraction(q, 3, 2).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(Scalar::from_int(f5(), 0).inv(), Err(Error::DivisionByZero)));
        let x = Scalar::from_int(f5(), 1);
        let y = Scalar::from_int(FieldCtx::Rational, 1);
        assert!(matches!(x.add(&y), Err(Error::ContextMismatch { .. })));
        assert!(matches!(FieldCtx::prime(2), Err(Error::CharacteristicTwo)));
        assert!(FieldCtx::prime(9).is_err());
        assert!(FieldCtx::prime(1 << 31).is_err());
        assert!(FieldCtx::prime(DEFAULT_MODULUS as u64).is_ok());
    }

    #[test]
    fn roots_of_unity() {
        let r = |p: u64, n: u64| primitive_root_of_unity(FieldCtx::prime(p).unwrap(), n);
        assert_eq!(r(5, 4).unwrap().to_string(), "2");
        assert_eq!(r(5, 1).unwrap().to_string(), "1");
        assert_eq!(r(7, 3).unwrap().to_string(), "2");
        assert!(matches!(r(7, 4), Err(Error::NoRootExists { .. })));
        assert!(matches!(
            primitive_root_of_unity(FieldCtx::Rational, 2),
            Err(Error::RationalUnsupported)
        ));
    }

    #[test]
    fn root_is_least_of_exact_order() {
        for p in [5u64, 7, 11, 13, 31, 101] {
            let f = PrimeField::new(p).unwrap();
            for n in 1..p {
                if (p - 1) % n != 0 {
                    continue;
                }
                let exact = |x: u32| f.pow(&x, n) == 1 && (1..n).all(|k| f.pow(&x, k) != 1);
                let oracle = (1..p as u32).find(|&x| exact(x)).unwrap();
                assert_eq!(root_of_unity(&f, n).unwrap(), oracle, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn parse_and_format() {
        let f = PrimeField::new(7).unwrap();
        assert_eq!(f.parse("-1").unwrap(), 6);
        assert_eq!(f.parse("1/2").unwrap(), 4);
        assert!(f.parse("1/7").is_err());
        assert_eq!(Rationals.format(&Rationals.parse("6/4").unwrap()), "3/2");
        assert_eq!(Rationals.format(&Rationals.parse("-8/4").unwrap()), "-2");
    }

    fn axioms<F: Field>(f: &F, x: &F::Elem, y: &F::Elem, z: &F::Elem) {
        assert_eq!(f.add(&f.add(x, y), z), f.add(x, &f.add(y, z)));
        assert_eq!(f.mul(x, &f.add(y, z)), f.add(&f.mul(x, y), &f.mul(x, z)));
        assert_eq!(f.mul(x, y), f.mul(y, x));
        if !f.is_zero(x) {
            assert!(f.is_one(&f.mul(x, &f.inv(x).unwrap())));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn prime_field_axioms(x in 0u32..DEFAULT_MODULUS, y in 0u32..DEFAULT_MODULUS, z in 0u32..DEFAULT_MODULUS) {
            axioms(&PrimeField::default(), &x, &y, &z);
        }

        #[test]
        fn small_prime_axioms(x in 0u32..5, y in 0u32..5, z in 0u32..5) {
            axioms(&PrimeField::new(5).unwrap(), &x, &y, &z);
        }

        #[test]
        fn rational_axioms(a in -50i64..50, b in 1i64..20, c in -50i64..50, d in 1i64..20, e in -50i64..50, g in 1i64..20) {
            let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
            axioms(&Rationals, &q(a, b), &q(c, d), &q(e, g));
        }

        #[test]
        fn root_has_exact_order(idx in 0usize..6) {
            let (p, n) = [(5u64, 4u64), (7, 3), (7, 6), (13, 12), (101, 25), (2147483647, 7)][idx];
            let w = primitive_root_of_unity(FieldCtx::prime(p).unwrap(), n).unwrap();
            for k in 1..n {
                prop_assert_ne!(w.pow(k), Scalar::from_int(w.ctx(), 1));
            }
            prop_assert_eq!(w.pow(n), Scalar::from_int(w.ctx(), 1));
        }
    }
}
