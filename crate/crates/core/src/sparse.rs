//! Exact sparse matrices in compressed-row form.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::par;

static DIM_CAP: AtomicUsize = AtomicUsize::new(1 << 26);

/// Largest row or column count any constructor will produce.
pub fn dimension_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Sets the dimension cap; values above `u32::MAX` are clamped.
pub fn set_dimension_cap(cap: usize) {
    DIM_CAP.store(cap.min(u32::MAX as usize), Ordering::Relaxed);
}

pub(crate) fn check_dim(d: u128) -> Result<usize> {
    let cap = dimension_cap();
    if d > cap as u128 {
        return Err(Error::DimensionCap { dim: d, cap });
    }
    Ok(d as usize)
}

/// Mixed-radix codec: `x` in `[q]^n` maps to `sum x[i] q^(n-1-i)`, so the
/// leftmost Kronecker slot is the most significant digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexCodec {
    pub q: usize,
    pub n: usize,
}

impl IndexCodec {
    pub fn new(q: usize, n: usize) -> Self {
        assert!(q >= 2, "base must be at least 2");
        IndexCodec { q, n }
    }

    pub fn len(&self) -> usize {
        self.q.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.n);
        x.iter().fold(0, |acc, &d| acc * self.q + d)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.n];
        for slot in x.iter_mut().rev() {
            *slot = idx % self.q;
            idx /= self.q;
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct SparseMatrix<F: Field> {
    field: F,
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<F::Elem>,
}

impl<F: Field> PartialEq for SparseMatrix<F> {
    fn eq(&self, o: &Self) -> bool {
        self.field == o.field
            && self.rows == o.rows
            && self.cols == o.cols
            && self.row_ptr == o.row_ptr
            && self.col_idx == o.col_idx
            && self.vals == o.vals
    }
}

impl<F: Field> SparseMatrix<F> {
    /// Builds from per-row `(col, value)` lists that are already sorted by column
    /// with no duplicates. Zero values are dropped.
    fn from_sorted_rows(field: F, rows: usize, cols: usize, data: Vec<Vec<(u32, F::Elem)>>) -> Self {
        debug_assert_eq!(data.len(), rows);
        let total = data.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(total);
        let mut vals = Vec::with_capacity(total);
        row_ptr.push(0);
        for row in data {
            for (j, v) in row {
                if !field.is_zero(&v) {
                    debug_assert!(col_idx.len() == *row_ptr.last().unwrap() || *col_idx.last().unwrap() < j);
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { field, rows, cols, row_ptr, col_idx, vals }
    }

    fn check_shape(rows: usize, cols: usize) -> Result<()> {
        check_dim(rows as u128)?;
        check_dim(cols as u128)?;
        Ok(())
    }

    pub fn zeros(field: F, rows: usize, cols: usize) -> Result<Self> {
        Self::check_shape(rows, cols)?;
        Ok(SparseMatrix { field, rows, cols, row_ptr: vec![0; rows + 1], col_idx: vec![], vals: vec![] })
    }

    /// Triplets in any order; zeros are dropped, duplicates rejected.
    pub fn from_triplets(field: F, rows: usize, cols: usize, mut t: Vec<(usize, usize, F::Elem)>) -> Result<Self> {
        Self::check_shape(rows, cols)?;
        for &(i, j, _) in &t {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfBounds { i, j, rows, cols });
            }
        }
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in t.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateEntry { i: w[0].0, j: w[0].1 });
            }
        }
        let mut data = vec![Vec::new(); rows];
        for (i, j, v) in t {
            data[i].push((j as u32, v));
        }
        Ok(Self::from_sorted_rows(field, rows, cols, data))
    }

    pub fn from_dense(field: F, dense: &[Vec<F::Elem>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        Self::check_shape(rows, cols)?;
        let mut data = Vec::with_capacity(rows);
        for (i, r) in dense.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { op: "from_dense", left: (i, cols), right: (i, r.len()) });
            }
            data.push(r.iter().enumerate().map(|(j, v)| (j as u32, v.clone())).collect());
        }
        Ok(Self::from_sorted_rows(field, rows, cols, data))
    }

    /// Integer entries mapped into the field.
    pub fn from_int_rows(field: F, dense: &[Vec<i64>]) -> Result<Self> {
        let d: Vec<Vec<F::Elem>> = dense.iter().map(|r| r.iter().map(|&v| field.from_i64(v)).collect()).collect();
        Self::from_dense(field, &d)
    }

    /// Entry `(i, j)` given by `f`, evaluated row-parallel.
    pub fn from_fn<G>(field: F, rows: usize, cols: usize, f: G) -> Result<Self>
    where
        G: Fn(usize, usize) -> F::Elem + Sync + Send,
    {
        Self::check_shape(rows, cols)?;
        let data = par::map_range(rows, |i| (0..cols).map(|j| (j as u32, f(i, j))).collect::<Vec<_>>());
        Ok(Self::from_sorted_rows(field, rows, cols, data))
    }

    /// Rows given as sorted `(col, value)` lists, evaluated row-parallel.
    pub fn from_row_fn<G>(field: F, rows: usize, cols: usize, f: G) -> Result<Self>
    where
        G: Fn(usize) -> Vec<(usize, F::Elem)> + Sync + Send,
    {
        Self::check_shape(rows, cols)?;
        let data = par::map_range(rows, |i| {
            let mut r: Vec<(u32, F::Elem)> = f(i).into_iter().map(|(j, v)| (j as u32, v)).collect();
            r.sort_unstable_by_key(|e| e.0);
            r
        });
        for (i, r) in data.iter().enumerate() {
            for w in r.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::DuplicateEntry { i, j: w[0].0 as usize });
                }
            }
            if let Some(&(j, _)) = r.last() {
                if j as usize >= cols {
                    return Err(Error::IndexOutOfBounds { i, j: j as usize, rows, cols });
                }
            }
        }
        Ok(Self::from_sorted_rows(field, rows, cols, data))
    }

    pub fn identity(field: F, k: usize) -> Result<Self> {
        let one = field.one();
        Self::diagonal(field, vec![one; k])
    }

    pub fn diagonal(field: F, values: Vec<F::Elem>) -> Result<Self> {
        let k = values.len();
        Self::check_shape(k, k)?;
        let data = values.into_iter().enumerate().map(|(i, v)| vec![(i as u32, v)]).collect();
        Ok(Self::from_sorted_rows(field, k, k, data))
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Largest number of nonzeros in a row.
    pub fn nnz_r(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Largest number of nonzeros in a column.
    pub fn nnz_c(&self) -> usize {
        self.col_counts().into_iter().max().unwrap_or(0)
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.cols];
        for &j in &self.col_idx {
            c[j as usize] += 1;
        }
        c
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[F::Elem]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> F::Elem {
        let (c, v) = self.row(i);
        match c.binary_search(&(j as u32)) {
            Ok(k) => v[k].clone(),
            Err(_) => self.field.zero(),
        }
    }

    /// Nonzero entries in `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &F::Elem)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, x)| (i, j as usize, x))
        })
    }

    pub fn triplets(&self) -> Vec<(usize, usize, F::Elem)> {
        self.iter().map(|(i, j, v)| (i, j, v.clone())).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<F::Elem>> {
        let mut d = vec![vec![self.field.zero(); self.cols]; self.rows];
        for (i, j, v) in self.iter() {
            d[i][j] = v.clone();
        }
        d
    }

    fn same_field(&self, o: &Self) -> Result<()> {
        if self.field != o.field {
            return Err(Error::ContextMismatch { left: self.field.ctx(), right: o.field.ctx() });
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut data: Vec<Vec<(u32, F::Elem)>> = vec![Vec::new(); self.cols];
        for (i, j, v) in self.iter() {
            data[j].push((i as u32, v.clone()));
        }
        Self::from_sorted_rows(self.field.clone(), self.cols, self.rows, data)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// `A ⊗ B`; the left operand supplies the high digits of both indices.
    pub fn kron(&self, b: &Self) -> Result<Self> {
        self.same_field(b)?;
        let rows = check_dim(self.rows as u128 * b.rows as u128)?;
        let cols = check_dim(self.cols as u128 * b.cols as u128)?;
        let f = &self.field;
        let nnz = self.nnz() * b.nnz();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for ia in 0..self.rows {
            let (ca, va) = self.row(ia);
            for ib in 0..b.rows {
                let (cb, vb) = b.row(ib);
                for (&ja, x) in ca.iter().zip(va) {
                    let base = ja as usize * b.cols;
                    for (&jb, y) in cb.iter().zip(vb) {
                        col_idx.push((base + jb as usize) as u32);
                        vals.push(f.mul(x, y));
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(SparseMatrix { field: f.clone(), rows, cols, row_ptr, col_idx, vals })
    }

    /// `M^{⊗n}`; `n = 0` gives the 1x1 identity.
    pub fn kron_power(&self, n: usize) -> Result<Self> {
        let pow = |d: usize| (0..n).try_fold(1u128, |a, _| a.checked_mul(d as u128)).unwrap_or(u128::MAX);
        check_dim(pow(self.rows))?;
        check_dim(pow(self.cols))?;
        let mut acc = Self::identity(self.field.clone(), 1)?;
        for _ in 0..n {
            acc = acc.kron(self)?;
        }
        Ok(acc)
    }

    /// Exact product with cancellations dropped. Rows are computed in parallel.
    pub fn matmul(&self, b: &Self) -> Result<Self> {
        self.same_field(b)?;
        if self.cols != b.rows {
            return Err(Error::DimensionMismatch { op: "matmul", left: self.shape(), right: b.shape() });
        }
        let f = &self.field;
        let cols = b.cols;
        let data = par::map_range_init(
            self.rows,
            || RowAccumulator::new(f, cols),
            |acc, i| {
                let (ca, va) = self.row(i);
                for (&k, x) in ca.iter().zip(va) {
                    let (cb, vb) = b.row(k as usize);
                    for (&j, y) in cb.iter().zip(vb) {
                        acc.add(f, j, x, y);
                    }
                }
                acc.drain(f)
            },
        );
        Ok(Self::from_sorted_rows(f.clone(), self.rows, cols, data))
    }

    fn zip_with(&self, b: &Self, op: &'static str, g: impl Fn(&F::Elem, &F::Elem) -> F::Elem) -> Result<Self> {
        self.same_field(b)?;
        if self.shape() != b.shape() {
            return Err(Error::DimensionMismatch { op, left: self.shape(), right: b.shape() });
        }
        let z = self.field.zero();
        let mut data = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = b.row(i);
            let (mut p, mut q) = (0, 0);
            let mut out = Vec::with_capacity(ca.len() + cb.len());
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(u32::MAX);
                let jb = cb.get(q).copied().unwrap_or(u32::MAX);
                if ja == jb {
                    out.push((ja, g(&va[p], &vb[q])));
                    p += 1;
                    q += 1;
                } else if ja < jb {
                    out.push((ja, g(&va[p], &z)));
                    p += 1;
                } else {
                    out.push((jb, g(&z, &vb[q])));
                    q += 1;
                }
            }
            data.push(out);
        }
        Ok(Self::from_sorted_rows(self.field.clone(), self.rows, self.cols, data))
    }

    pub fn add(&self, b: &Self) -> Result<Self> {
        let f = self.field.clone();
        self.zip_with(b, "add", |x, y| f.add(x, y))
    }

    pub fn sub(&self, b: &Self) -> Result<Self> {
        let f = self.field.clone();
        self.zip_with(b, "sub", |x, y| f.sub(x, y))
    }

    pub fn scale(&self, c: &F::Elem) -> Self {
        let f = &self.field;
        let data = (0..self.rows)
            .map(|i| {
                let (cs, vs) = self.row(i);
                cs.iter().zip(vs).map(|(&j, v)| (j, f.mul(c, v))).collect()
            })
            .collect();
        Self::from_sorted_rows(f.clone(), self.rows, self.cols, data)
    }

    /// `diag(d) * self`
    pub fn scale_rows(&self, d: &[F::Elem]) -> Result<Self> {
        if d.len() != self.rows {
            return Err(Error::LengthMismatch { expected: self.rows, got: d.len() });
        }
        let f = &self.field;
        let data = (0..self.rows)
            .map(|i| {
                let (cs, vs) = self.row(i);
                cs.iter().zip(vs).map(|(&j, v)| (j, f.mul(&d[i], v))).collect()
            })
            .collect();
        Ok(Self::from_sorted_rows(f.clone(), self.rows, self.cols, data))
    }

    /// `self * diag(d)`
    pub fn scale_cols(&self, d: &[F::Elem]) -> Result<Self> {
        if d.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: d.len() });
        }
        let f = &self.field;
        let data = (0..self.rows)
            .map(|i| {
                let (cs, vs) = self.row(i);
                cs.iter().zip(vs).map(|(&j, v)| (j, f.mul(v, &d[j as usize]))).collect()
            })
            .collect();
        Ok(Self::from_sorted_rows(f.clone(), self.rows, self.cols, data))
    }

    /// Matrix-vector product `A x`.
    pub fn apply(&self, x: &[F::Elem]) -> Result<Vec<F::Elem>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: x.len() });
        }
        let f = &self.field;
        Ok(par::map_range(self.rows, |i| {
            let (cs, vs) = self.row(i);
            let mut acc = f.zero();
            for (&j, v) in cs.iter().zip(vs) {
                f.mul_add_assign(&mut acc, v, &x[j as usize]);
            }
            acc
        }))
    }

    /// `(A | B)`
    pub fn concat_h(&self, b: &Self) -> Result<Self> {
        self.same_field(b)?;
        if self.rows != b.rows {
            return Err(Error::DimensionMismatch { op: "concat_h", left: self.shape(), right: b.shape() });
        }
        let cols = check_dim(self.cols as u128 + b.cols as u128)?;
        let off = self.cols as u32;
        let data = (0..self.rows)
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = b.row(i);
                ca.iter()
                    .zip(va)
                    .map(|(&j, v)| (j, v.clone()))
                    .chain(cb.iter().zip(vb).map(|(&j, v)| (j + off, v.clone())))
                    .collect()
            })
            .collect();
        Ok(Self::from_sorted_rows(self.field.clone(), self.rows, cols, data))
    }

    /// `(A / B)`: `A` on top of `B`.
    pub fn stack_v(&self, b: &Self) -> Result<Self> {
        self.same_field(b)?;
        if self.cols != b.cols {
            return Err(Error::DimensionMismatch { op: "stack_v", left: self.shape(), right: b.shape() });
        }
        let rows = check_dim(self.rows as u128 + b.rows as u128)?;
        let mut out = self.clone();
        out.rows = rows;
        let base = out.col_idx.len();
        out.col_idx.extend_from_slice(&b.col_idx);
        out.vals.extend_from_slice(&b.vals);
        out.row_ptr.extend(b.row_ptr[1..].iter().map(|p| p + base));
        Ok(out)
    }

    /// Submatrix on the listed rows, in the listed order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let data = idx
            .iter()
            .map(|&i| {
                let (c, v) = self.row(i);
                c.iter().copied().zip(v.iter().cloned()).collect()
            })
            .collect();
        Self::from_sorted_rows(self.field.clone(), idx.len(), self.cols, data)
    }

    /// Submatrix on the listed columns; `idx` must be strictly increasing.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let mut map = vec![u32::MAX; self.cols];
        for (k, &j) in idx.iter().enumerate() {
            map[j] = k as u32;
        }
        let data = (0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&j, _)| map[j as usize] != u32::MAX)
                    .map(|(&j, x)| (map[j as usize], x.clone()))
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(self.field.clone(), self.rows, idx.len(), data)
    }

    /// Exact rank by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut d = self.to_dense();
        eliminate(&self.field, &mut d).len()
    }

    /// `self = B * C` with `B` of shape `rows x rank` and `C` of shape `rank x cols`.
    pub fn rank_factorization(&self) -> Result<(Self, Self)> {
        let mut d = self.to_dense();
        let pivots = eliminate(&self.field, &mut d);
        let f = &self.field;
        // Reduce to RREF: normalize pivots, clear above.
        for (r, &c) in pivots.iter().enumerate() {
            let inv = f.inv(&d[r][c]).expect("pivot is nonzero");
            for x in d[r].iter_mut() {
                *x = f.mul(x, &inv);
            }
            let pr = d[r].clone();
            for (rr, row) in d.iter_mut().enumerate().take(r) {
                let _ = rr;
                let factor = row[c].clone();
                if !f.is_zero(&factor) {
                    for (x, y) in row.iter_mut().zip(&pr) {
                        *x = f.sub(x, &f.mul(&factor, y));
                    }
                }
            }
        }
        d.truncate(pivots.len());
        let c = if pivots.is_empty() { Self::zeros(f.clone(), 0, self.cols)? } else { Self::from_dense(f.clone(), &d)? };
        let b = self.select_cols(&pivots);
        Ok((b, c))
    }

    /// Same matrix with every value passed through `g` into another field.
    pub fn map_field<G: Field>(&self, field: G, g: impl Fn(&F::Elem) -> G::Elem) -> SparseMatrix<G> {
        let data = (0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, x)| (j, g(x))).collect()
            })
            .collect();
        SparseMatrix::from_sorted_rows(field, self.rows, self.cols, data)
    }
}

/// Dense row accumulator with a touched-column list.
pub(crate) struct RowAccumulator<E> {
    vals: Vec<E>,
    seen: Vec<bool>,
    touched: Vec<u32>,
}

impl<E: Clone> RowAccumulator<E> {
    pub(crate) fn new<F: Field<Elem = E>>(f: &F, cols: usize) -> Self {
        RowAccumulator { vals: vec![f.zero(); cols], seen: vec![false; cols], touched: Vec::new() }
    }

    #[inline]
    pub(crate) fn add<F: Field<Elem = E>>(&mut self, f: &F, j: u32, x: &E, y: &E) {
        let ju = j as usize;
        if !self.seen[ju] {
            self.seen[ju] = true;
            self.touched.push(j);
        }
        f.mul_add_assign(&mut self.vals[ju], x, y);
    }

    /// Sorted nonzero entries; resets the accumulator.
    pub(crate) fn drain<F: Field<Elem = E>>(&mut self, f: &F) -> Vec<(u32, E)> {
        self.touched.sort_unstable();
        let mut out = Vec::with_capacity(self.touched.len());
        for &j in &self.touched {
            let ju = j as usize;
            self.seen[ju] = false;
            let v = std::mem::replace(&mut self.vals[ju], f.zero());
            if !f.is_zero(&v) {
                out.push((j, v));
            }
        }
        self.touched.clear();
        out
    }
}

/// Forward elimination in place; returns pivot columns. Row updates below the
/// pivot run in parallel on large inputs.
pub(crate) fn eliminate<F: Field>(f: &F, d: &mut [Vec<F::Elem>]) -> Vec<usize> {
    let rows = d.len();
    let cols = d.first().map_or(0, Vec::len);
    let big = rows * cols >= 1 << 14;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !f.is_zero(&d[i][c])) else { continue };
        d.swap(r, p);
        let inv = f.inv(&d[r][c]).expect("pivot is nonzero");
        let pivot_row = d[r].clone();
        let update = |row: &mut Vec<F::Elem>| {
            if f.is_zero(&row[c]) {
                return;
            }
            let factor = f.mul(&row[c], &inv);
            for k in c..cols {
                if !f.is_zero(&pivot_row[k]) {
                    row[k] = f.sub(&row[k], &f.mul(&factor, &pivot_row[k]));
                }
            }
        };
        if big {
            par::for_each_chunk(&mut d[r + 1..], 8, |_, chunk| chunk.iter_mut().for_each(update));
        } else {
            d[r + 1..].iter_mut().for_each(update);
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Returns true when the dense `rows x cols` matrix in `buf` (row-major) has
/// rank at most `bound`. Destroys `buf`.
pub(crate) fn rank_at_most<F: Field>(f: &F, buf: &mut [F::Elem], rows: usize, cols: usize, bound: usize) -> bool {
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !f.is_zero(&buf[i * cols + c])) else { continue };
        if r == bound {
            return false;
        }
        if p != r {
            for k in 0..cols {
                buf.swap(r * cols + k, p * cols + k);
            }
        }
        let inv = f.inv(&buf[r * cols + c]).expect("pivot is nonzero");
        for i in r + 1..rows {
            let x = buf[i * cols + c].clone();
            if f.is_zero(&x) {
                continue;
            }
            let factor = f.mul(&x, &inv);
            for k in c..cols {
                let t = f.mul(&factor, &buf[r * cols + k]);
                buf[i * cols + k] = f.sub(&buf[i * cols + k], &t);
            }
        }
        r += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn h1<F: Field>(f: F) -> SparseMatrix<F> {
        SparseMatrix::from_int_rows(f, &[vec![1, 1], vec![1, -1]]).unwrap()
    }

    fn r1<F: Field>(f: F) -> SparseMatrix<F> {
        SparseMatrix::from_int_rows(f, &[vec![1, 1], vec![1, 0]]).unwrap()
    }

    fn random<F: Field>(f: &F, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> SparseMatrix<F> {
        use rand::Rng;
        let d: Vec<Vec<F::Elem>> = (0..rows)
            .map(|_| (0..cols).map(|_| if rng.gen_bool(0.6) { f.random(rng) } else { f.zero() }).collect())
            .collect();
        SparseMatrix::from_dense(f.clone(), &d).unwrap()
    }

    fn dense_matmul<F: Field>(f: &F, a: &[Vec<F::Elem>], b: &[Vec<F::Elem>]) -> Vec<Vec<F::Elem>> {
        let n = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|row| {
                (0..n)
                    .map(|j| row.iter().zip(b).fold(f.zero(), |acc, (x, brow)| f.add(&acc, &f.mul(x, &brow[j]))))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn codec_round_trip() {
        let c = IndexCodec::new(3, 4);
        assert_eq!(c.encode(&[1, 0, 2, 1]), 27 + 6 + 1);
        for i in 0..c.len() {
            assert_eq!(c.encode(&c.decode(i)), i);
        }
    }

    #[test]
    fn kron_examples() {
        let f = fp(5);
        let h2 = h1(f).kron(&h1(f)).unwrap();
        let expect = [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(h2.get(i, j), f.from_i64(v));
            }
        }
        let r2 = r1(f).kron(&r1(f)).unwrap();
        assert_eq!(r2.nnz(), 9);
        let a = random(&f, 3, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.kron(&SparseMatrix::identity(f, 1).unwrap()).unwrap(), a);
        let h3 = h1(f).kron_power(3).unwrap();
        assert_eq!(h3.nnz(), 64);
        assert!(h3.iter().all(|(_, _, v)| *v == 1 || *v == 4));
    }

    #[test]
    fn kron_respects_codec() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&f, 2, 3, &mut rng);
        let b = random(&f, 3, 2, &mut rng);
        let k = a.kron(&b).unwrap();
        for ia in 0..2 {
            for ib in 0..3 {
                for ja in 0..3 {
                    for jb in 0..2 {
                        assert_eq!(k.get(ia * 3 + ib, ja * 2 + jb), f.mul(&a.get(ia, ja), &b.get(ib, jb)));
                    }
                }
            }
        }
    }

    #[test]
    fn matmul_examples() {
        let f = Rationals;
        let inv = SparseMatrix::from_int_rows(f, &[vec![0, 1], vec![1, -1]]).unwrap();
        assert_eq!(r1(f).matmul(&inv).unwrap(), SparseMatrix::identity(f, 2).unwrap());
        let g = fp(7);
        let perm = |p: &[usize]| {
            SparseMatrix::from_triplets(g, p.len(), p.len(), p.iter().enumerate().map(|(i, &j)| (i, j, 1)).collect())
                .unwrap()
        };
        let pq = perm(&[2, 0, 1]).matmul(&perm(&[1, 2, 0])).unwrap();
        assert_eq!(pq.nnz(), 3);
        assert_eq!(pq.nnz_r(), 1);
        assert_eq!(pq.nnz_c(), 1);
        assert!(matches!(perm(&[0, 1]).matmul(&perm(&[0, 1, 2])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cancellation_is_dropped() {
        let f = fp(5);
        let a = SparseMatrix::from_int_rows(f, &[vec![1, 1]]).unwrap();
        let b = SparseMatrix::from_int_rows(f, &[vec![1], vec![-1]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().nnz(), 0);
    }

    #[test]
    fn rank_examples() {
        let f = fp(5);
        assert_eq!(h1(f).kron_power(2).unwrap().rank(), 4);
        let j8 = SparseMatrix::from_fn(f, 8, 8, |_, _| 1).unwrap();
        assert_eq!(j8.rank(), 1);
        assert_eq!(SparseMatrix::zeros(f, 3, 3).unwrap().rank(), 0);
    }

    #[test]
    fn rank_multiplicative_under_kron() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random(&f, 4, 4, &mut rng);
            let b = random(&f, 4, 4, &mut rng);
            assert_eq!(a.kron(&b).unwrap().rank(), a.rank() * b.rank());
        }
    }

    #[test]
    fn rank_factorization_reconstructs() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random(&f, 5, 3, &mut rng).matmul(&random(&f, 3, 6, &mut rng)).unwrap();
            let (b, c) = a.rank_factorization().unwrap();
            assert_eq!(b.cols(), a.rank());
            assert_eq!(b.matmul(&c).unwrap(), a);
        }
    }

    #[test]
    fn block_identity() {
        let f = fp(7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x1 = random(&f, 3, 3, &mut rng);
            let x2 = random(&f, 3, 2, &mut rng);
            let x3 = random(&f, 3, 3, &mut rng);
            let x4 = random(&f, 3, 2, &mut rng);
            let lhs = x1.concat_h(&x3).unwrap().matmul(&x2.stack_v(&x4).unwrap()).unwrap();
            let d1 = dense_matmul(&f, &x1.to_dense(), &x2.to_dense());
            let d2 = dense_matmul(&f, &x3.to_dense(), &x4.to_dense());
            let oracle: Vec<Vec<u32>> =
                d1.iter().zip(&d2).map(|(r, s)| r.iter().zip(s).map(|(a, b)| f.add(a, b)).collect()).collect();
            assert_eq!(lhs.to_dense(), oracle);
        }
    }

    #[test]
    fn apply_identity_and_errors() {
        let f = fp(7);
        let i4 = SparseMatrix::identity(f, 4).unwrap();
        assert_eq!(i4.apply(&[1, 2, 3, 4]).unwrap(), vec![1, 2, 3, 4]);
        assert!(i4.apply(&[1]).is_err());
        assert!(matches!(
            SparseMatrix::from_triplets(f, 2, 2, vec![(0, 0, 1), (0, 0, 2)]),
            Err(Error::DuplicateEntry { .. })
        ));
        assert!(matches!(
            SparseMatrix::from_triplets(f, 2, 2, vec![(2, 0, 1)]),
            Err(Error::IndexOutOfBounds { .. })
        ));
        let other = SparseMatrix::identity(fp(5), 4).unwrap();
        assert!(matches!(i4.kron(&other), Err(Error::ContextMismatch { .. })));
    }

    #[test]
    fn dimension_cap_enforced() {
        let f = fp(5);
        let h = h1(f);
        assert!(matches!(h.kron_power(27), Err(Error::DimensionCap { .. })));
    }

    proptest! {
        #[test]
        fn sparsity_rules(seed in any::<u64>(), ar in 1usize..5, ac in 1usize..5, br in 1usize..5, bc in 1usize..5) {
            let f = fp(7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&f, ar, ac, &mut rng);
            let b = random(&f, br, bc, &mut rng);
            let k = a.kron(&b).unwrap();
            prop_assert_eq!(k.nnz(), a.nnz() * b.nnz());
            prop_assert_eq!(k.nnz_r(), a.nnz_r() * b.nnz_r());
            prop_assert_eq!(k.nnz_c(), a.nnz_c() * b.nnz_c());
            let c = random(&f, ac, bc, &mut rng);
            prop_assert!(a.matmul(&c).unwrap().nnz_r() <= a.nnz_r() * c.nnz_r());
            let d: Vec<u32> = (0..ar).map(|_| 1 + rand::Rng::gen_range(&mut rng, 0..6)).collect();
            let e: Vec<u32> = (0..ac).map(|_| 1 + rand::Rng::gen_range(&mut rng, 0..6)).collect();
            let s = a.scale_rows(&d).unwrap().scale_cols(&e).unwrap();
            prop_assert_eq!(s.nnz(), a.nnz());
            prop_assert_eq!(s.nnz_r(), a.nnz_r());
        }

        #[test]
        fn matmul_matches_dense(seed in any::<u64>(), m in 1usize..17, n in 1usize..17, p in 1usize..17) {
            let f = fp(5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&f, m, n, &mut rng);
            let b = random(&f, n, p, &mut rng);
            prop_assert_eq!(a.matmul(&b).unwrap().to_dense(), dense_matmul(&f, &a.to_dense(), &b.to_dense()));
        }

        #[test]
        fn mixed_product(seed in any::<u64>()) {
            let f = fp(7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [a, b, c, d] = [0; 4].map(|_| random(&f, 3, 3, &mut rng));
            let lhs = a.kron(&b).unwrap().matmul(&c.kron(&d).unwrap()).unwrap();
            let rhs = a.matmul(&c).unwrap().kron(&b.matmul(&d).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rank_at_most_agrees(seed in any::<u64>(), bound in 0usize..5) {
            let f = fp(5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&f, 4, 4, &mut rng);
            let mut buf: Vec<u32> = a.to_dense().concat();
            prop_assert_eq!(rank_at_most(&f, &mut buf, 4, 4, bound), a.rank() <= bound);
        }

        #[test]
        fn transpose_involution(seed in any::<u64>()) {
            let f = fp(7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&f, 4, 6, &mut rng);
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            prop_assert_eq!(a.transpose().nnz_r(), a.nnz_c());
        }
    }
}
