//! Plain-text formats for matrices, rigidity witnesses, circuits, truth
//! tables and point sets. Blank lines and lines starting with `#` are
//! ignored on input. Field descriptors are `p` for `F_p` and `0` for the
//! rationals.

use std::fmt::Write as _;

use crate::circuit::SynchronousCircuit;
use crate::error::{Error, Result};
use crate::field::{Field, FieldCtx};
use crate::rigidity::RigidityDecomposition;
use crate::sparse::SparseMatrix;
use crate::transform::TruthTable;

struct Lines<'a> {
    inner: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let v: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Lines { inner: v.into_iter().peekable() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of input, expected {what}") })
    }

    fn peek(&mut self) -> Option<&(usize, &'a str)> {
        self.inner.peek()
    }

    fn finish(&mut self) -> Result<()> {
        match self.inner.next() {
            Some((line, l)) => Err(Error::Parse { line, msg: format!("trailing content '{l}'") }),
            None => Ok(()),
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn fields<'a>(line: usize, l: &'a str, keyword: Option<&str>, count: usize) -> Result<Vec<&'a str>> {
    let mut parts: Vec<&str> = l.split_whitespace().collect();
    if let Some(k) = keyword {
        if parts.first() != Some(&k) {
            return Err(perr(line, format!("expected '{k}' header, got '{l}'")));
        }
        parts.remove(0);
    }
    if parts.len() != count {
        return Err(perr(line, format!("expected {count} fields, got {}", parts.len())));
    }
    Ok(parts)
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| perr(line, format!("invalid number '{s}'")))
}

fn ctx_of(line: usize, s: &str) -> Result<FieldCtx> {
    FieldCtx::from_descriptor(num(line, s)?)
}

fn check_ctx<F: Field>(f: &F, line: usize, got: FieldCtx) -> Result<()> {
    if f.ctx() != got {
        return Err(perr(line, format!("file is over {got}, expected {}", f.ctx())));
    }
    Ok(())
}

/// Field named in the header of any of the formats below.
pub fn peek_field(text: &str) -> Result<FieldCtx> {
    let mut lines = Lines::new(text);
    let (line, l) = lines.next("header")?;
    let parts: Vec<&str> = l.split_whitespace().collect();
    let idx = match parts.first().copied() {
        Some("rigidity") => 4,
        Some("circuit") => 4,
        Some("truthtable") => 3,
        _ => 2,
    };
    let s = parts.get(idx).ok_or_else(|| perr(line, "header too short"))?;
    ctx_of(line, s)
}

pub fn write_matrix<F: Field>(m: &SparseMatrix<F>) -> String {
    let mut s = format!("{} {} {}\n", m.rows(), m.cols(), m.field().ctx().descriptor());
    write_triplets(&mut s, m);
    s
}

fn write_triplets<F: Field>(s: &mut String, m: &SparseMatrix<F>) {
    for (i, j, v) in m.iter() {
        let _ = writeln!(s, "{i} {j} {}", m.field().format(v));
    }
}

fn read_triplets<F: Field>(f: &F, lines: &mut Lines<'_>, rows: usize, cols: usize, nnz: Option<usize>) -> Result<SparseMatrix<F>> {
    let mut t = Vec::new();
    loop {
        if let Some(k) = nnz {
            if t.len() == k {
                break;
            }
        } else {
            match lines.peek() {
                None => break,
                Some((_, l)) if *l == "---" => break,
                _ => {}
            }
        }
        let (line, l) = lines.next("matrix entry")?;
        let p = fields(line, l, None, 3)?;
        let v = f.parse(p[2]).map_err(|e| perr(line, e.to_string()))?;
        t.push((num::<usize>(line, p[0])?, num::<usize>(line, p[1])?, v));
    }
    SparseMatrix::from_triplets(f.clone(), rows, cols, t)
}

fn read_matrix_block<F: Field>(f: &F, lines: &mut Lines<'_>) -> Result<SparseMatrix<F>> {
    let (line, l) = lines.next("matrix header")?;
    let p = fields(line, l, None, 3)?;
    check_ctx(f, line, ctx_of(line, p[2])?)?;
    read_triplets(f, lines, num(line, p[0])?, num(line, p[1])?, None)
}

pub fn read_matrix<F: Field>(f: &F, text: &str) -> Result<SparseMatrix<F>> {
    let mut lines = Lines::new(text);
    let m = read_matrix_block(f, &mut lines)?;
    lines.finish()?;
    Ok(m)
}

/// `rigidity q r changes field`, then `low_left`, `low_right` and the
/// sparse part as matrix blocks separated by `---`.
pub fn write_witness<F: Field>(d: &RigidityDecomposition<F>) -> String {
    let mut s = format!("rigidity {} {} {} {}\n", d.target.rows(), d.rank_bound, d.changes, d.target.field().ctx().descriptor());
    s.push_str(&write_matrix(&d.low_left));
    s.push_str("---\n");
    s.push_str(&write_matrix(&d.low_right));
    s.push_str("---\n");
    s.push_str(&write_matrix(&d.sparse));
    s
}

/// Reads a witness for `target` and checks it.
pub fn read_witness<F: Field>(target: &SparseMatrix<F>, text: &str) -> Result<RigidityDecomposition<F>> {
    let f = target.field();
    let mut lines = Lines::new(text);
    let (line, l) = lines.next("witness header")?;
    let p = fields(line, l, Some("rigidity"), 4)?;
    check_ctx(f, line, ctx_of(line, p[3])?)?;
    let q: usize = num(line, p[0])?;
    let r: usize = num(line, p[1])?;
    let changes: usize = num(line, p[2])?;
    let mut blocks = Vec::new();
    for i in 0..3 {
        if i > 0 {
            let (line, l) = lines.next("'---'")?;
            if l != "---" {
                return Err(perr(line, "expected '---'"));
            }
        }
        blocks.push(read_matrix_block(f, &mut lines)?);
    }
    lines.finish()?;
    if target.shape() != (q, q) {
        return Err(Error::InvalidWitness(format!("witness is for {q}x{q}, target is {:?}", target.shape())));
    }
    let sparse = blocks.pop().expect("three blocks");
    let low_right = blocks.pop().expect("three blocks");
    let low_left = blocks.pop().expect("three blocks");
    let d = RigidityDecomposition::new(target.clone(), r, low_left, low_right, sparse);
    if d.changes != changes {
        return Err(Error::InvalidWitness(format!("header claims {changes} changes, sparse part has {}", d.changes)));
    }
    d.verify()?;
    Ok(d)
}

/// `circuit depth rows cols field wires`, then for each factor
/// `factor idx rows cols nnz` and its entries.
pub fn write_circuit<F: Field>(c: &SynchronousCircuit<F>) -> Result<String> {
    let mut s = format!("circuit {} {} {} {} {}\n", c.depth(), c.rows(), c.cols(), c.field().ctx().descriptor(), c.wires());
    for (idx, m) in c.materialize_factors()?.iter().enumerate() {
        let _ = writeln!(s, "factor {idx} {} {} {}", m.rows(), m.cols(), m.nnz());
        write_triplets(&mut s, m);
    }
    Ok(s)
}

pub fn read_circuit<F: Field>(f: &F, text: &str) -> Result<SynchronousCircuit<F>> {
    let mut lines = Lines::new(text);
    let (line, l) = lines.next("circuit header")?;
    let p = fields(line, l, Some("circuit"), 5)?;
    let depth: usize = num(line, p[0])?;
    let rows: usize = num(line, p[1])?;
    let cols: usize = num(line, p[2])?;
    check_ctx(f, line, ctx_of(line, p[3])?)?;
    let wires: u128 = num(line, p[4])?;
    let mut ms = Vec::with_capacity(depth);
    for idx in 0..depth {
        let (fl, l) = lines.next("factor header")?;
        let q = fields(fl, l, Some("factor"), 4)?;
        if num::<usize>(fl, q[0])? != idx {
            return Err(perr(fl, format!("expected factor {idx}")));
        }
        let nnz: usize = num(fl, q[3])?;
        let m = read_triplets(f, &mut lines, num(fl, q[1])?, num(fl, q[2])?, Some(nnz))?;
        if m.nnz() != nnz {
            return Err(perr(fl, format!("factor {idx} declares {nnz} entries but {} are nonzero", m.nnz())));
        }
        ms.push(m);
    }
    lines.finish()?;
    let c = SynchronousCircuit::from_matrices(ms)?;
    if c.rows() != rows as u128 || c.cols() != cols as u128 {
        return Err(perr(line, "header shape disagrees with the factors"));
    }
    if c.wires() != wires {
        return Err(perr(line, format!("header claims {wires} wires, factors have {}", c.wires())));
    }
    Ok(c)
}

pub fn write_truth_table<F: Field>(t: &TruthTable<F>) -> String {
    let mut s = format!("truthtable {} {} {}\n", t.q(), t.n(), t.ctx().descriptor());
    for v in t.values() {
        let _ = writeln!(s, "{}", t.field().format(v));
    }
    s
}

pub fn read_truth_table<F: Field>(f: &F, text: &str) -> Result<TruthTable<F>> {
    parse_truth_table(f, text, true)
}

/// Reads the values into `f` whatever field the header names.
pub fn read_truth_table_as<F: Field>(f: &F, text: &str) -> Result<TruthTable<F>> {
    parse_truth_table(f, text, false)
}

fn parse_truth_table<F: Field>(f: &F, text: &str, strict: bool) -> Result<TruthTable<F>> {
    let mut lines = Lines::new(text);
    let (line, l) = lines.next("truth table header")?;
    let p = fields(line, l, Some("truthtable"), 3)?;
    let ctx = ctx_of(line, p[2])?;
    if strict {
        check_ctx(f, line, ctx)?;
    }
    let q: usize = num(line, p[0])?;
    let n: usize = num(line, p[1])?;
    let mut values = Vec::new();
    while let Some(&(vl, v)) = lines.peek() {
        values.push(f.parse(v).map_err(|e| perr(vl, e.to_string()))?);
        lines.next("value")?;
    }
    TruthTable::new(f.clone(), q, n, values)
}

/// Bitstrings, leftmost character most significant.
pub fn read_points(text: &str, n: usize) -> Result<Vec<usize>> {
    Lines::new(text)
        .inner
        .map(|(line, l)| {
            if l.len() != n || !l.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(perr(line, format!("expected a {n}-bit string, got '{l}'")));
            }
            Ok(l.bytes().fold(0usize, |acc, b| acc << 1 | (b - b'0') as usize))
        })
        .collect()
}

pub fn format_point(x: usize, n: usize) -> String {
    (0..n).rev().map(|i| if x >> i & 1 == 1 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use crate::rigidity::{h2_rank1_decomposition, hadamard};
    use crate::synth::synth_depth_d;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn matrix_round_trip() {
        let f = PrimeField::new(5).unwrap();
        let h = hadamard(&f, 2).unwrap();
        let text = write_matrix(&h);
        assert!(text.starts_with("4 4 5\n"));
        assert_eq!(read_matrix(&f, &text).unwrap(), h);
        assert_eq!(peek_field(&text).unwrap(), FieldCtx::Prime(5));
        let q = Rationals;
        let m = SparseMatrix::from_dense(q, &[vec![BigRational::new((-3).into(), 4.into()), q.from_i64(2)]]).unwrap();
        let text = write_matrix(&m);
        assert!(text.contains("0 0 -3/4"));
        assert_eq!(read_matrix(&q, &text).unwrap(), m);
        assert!(read_matrix(&PrimeField::new(7).unwrap(), &write_matrix(&h)).is_err());
    }

    #[test]
    fn matrix_parse_errors() {
        let f = PrimeField::new(5).unwrap();
        assert!(matches!(read_matrix(&f, "2 2 5\n0 0 1\n0 0 2\n"), Err(Error::DuplicateEntry { .. })));
        assert!(matches!(read_matrix(&f, "2 2 5\n0 x 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_matrix(&f, "2 2 5\n2 0 1\n"), Err(Error::IndexOutOfBounds { .. })));
        assert!(matches!(read_matrix(&f, ""), Err(Error::Parse { .. })));
        assert_eq!(read_matrix(&f, "# comment\n2 2 5\n\n1 1 3\n").unwrap().get(1, 1), 3);
    }

    #[test]
    fn witness_round_trip() {
        let f = PrimeField::new(5).unwrap();
        let d = h2_rank1_decomposition(&f).unwrap();
        let text = write_witness(&d);
        assert!(text.starts_with("rigidity 4 1 4 5\n"));
        let back = read_witness(&d.target, &text).unwrap();
        assert_eq!(back, d);
        let tampered = text.replacen("rigidity 4 1 4 5", "rigidity 4 1 3 5", 1);
        assert!(matches!(read_witness(&d.target, &tampered), Err(Error::InvalidWitness(_))));
    }

    #[test]
    fn circuit_round_trip() {
        let f = PrimeField::new(7).unwrap();
        let d = h2_rank1_decomposition(&f).unwrap();
        let c = synth_depth_d(&d, 3, 2).unwrap();
        let text = write_circuit(&c).unwrap();
        assert!(text.starts_with(&format!("circuit 2 64 64 7 {}\n", c.wires())));
        let back = read_circuit(&f, &text).unwrap();
        assert_eq!(back.wires(), c.wires());
        assert_eq!(back.product().unwrap(), c.product().unwrap());
        let bad = text.replacen(&format!(" {}\n", c.wires()), " 1\n", 1);
        assert!(read_circuit(&f, &bad).is_err());
    }

    #[test]
    fn truth_table_and_points() {
        let f = PrimeField::new(101).unwrap();
        let t = TruthTable::new(f.clone(), 2, 2, vec![1, 0, 100, 3]).unwrap();
        let text = write_truth_table(&t);
        assert!(text.starts_with("truthtable 2 2 101\n"));
        assert_eq!(read_truth_table(&f, &text).unwrap(), t);
        assert!(read_truth_table(&f, "truthtable 2 2 101\n1\n2\n").is_err());
        let q = Rationals;
        assert!(read_truth_table(&q, &text).is_err());
        assert_eq!(read_truth_table_as(&q, &text).unwrap().values()[2], q.from_i64(100));
        assert_eq!(read_points("00\n01\n\n10\n", 2).unwrap(), vec![0, 1, 2]);
        assert!(read_points("012\n", 3).is_err());
        assert!(read_points("01\n", 3).is_err());
        assert_eq!(format_point(1, 3), "001");
    }

    proptest! {
        #[test]
        fn random_matrix_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let f = PrimeField::new(11).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<Vec<u32>> = (0..rows).map(|_| (0..cols).map(|_| if rng.gen_bool(0.4) { f.random(&mut rng) } else { 0 }).collect()).collect();
            let m = SparseMatrix::from_dense(f.clone(), &d).unwrap();
            prop_assert_eq!(read_matrix(&f, &write_matrix(&m)).unwrap(), m);
        }
    }
}
