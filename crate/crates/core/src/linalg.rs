//! Dense exact linear algebra over the rationals.
//!
//! Rows are cleared of denominators and kept primitive, then eliminated with
//! integer-only updates `row_i = (p/g) row_i - (a/g) row_k`. Pivot columns are
//! taken in order; the pivot row is the sparsest candidate, lowest index first,
//! so results are deterministic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::rational::{Vector, Q};

/// Row-major dense rational matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Q::one();
        }
        m
    }

    /// Builds from rows; all rows must share a length. `cols` is needed when there are no rows.
    pub fn from_rows(rows: &[Vector], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend(r.iter().cloned());
        }
        Self { rows: rows.len(), cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vector], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, x) in c.iter().enumerate() {
                m.data[i * cols.len() + j] = x.clone();
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vector> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn col(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vector {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| crate::rational::dot(self.row(i), v)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn rank(&self) -> usize {
        rank(&self.row_vecs(), self.cols)
    }

    pub fn nullspace(&self) -> Vec<Vector> {
        nullspace(&self.row_vecs(), self.cols)
    }

    /// Exact inverse, `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let aug: Vec<Vector> = (0..n)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
                r
            })
            .collect();
        let red = rref(&aug, 2 * n);
        if red.pivots.len() < n || red.pivots[n - 1] >= n {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for (i, row) in red.rows.iter().enumerate() {
            for j in 0..n {
                inv.data[i * n + j] = row[n + j].clone();
            }
        }
        Some(inv)
    }

    pub fn determinant(&self) -> Q {
        assert_eq!(self.rows, self.cols);
        determinant(&self.row_vecs())
    }
}

fn lcm_denominators(row: &[Q]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, x| if x.is_zero() { acc } else { acc.lcm(x.denom()) })
}

fn primitive(row: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in row.iter() {
        if !x.is_zero() {
            g = g.gcd(x);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for x in row.iter_mut() {
        if !x.is_zero() {
            *x /= &g;
        }
    }
}

/// Clears denominators and divides by the content.
pub fn integer_row(row: &[Q]) -> Vec<BigInt> {
    let l = lcm_denominators(row);
    let mut out: Vec<BigInt> =
        row.iter().map(|x| if x.is_zero() { BigInt::zero() } else { x.numer() * (&l / x.denom()) }).collect();
    primitive(&mut out);
    out
}

/// `target = (p/g) target - (a/g) src`, where `p = src[col]`, `a = target[col]`.
fn eliminate(target: &mut [BigInt], src: &[BigInt], col: usize) {
    let a = target[col].clone();
    if a.is_zero() {
        return;
    }
    let p = &src[col];
    let g = a.gcd(p);
    let pm = p / &g;
    let am = &a / &g;
    for j in 0..target.len() {
        let s = &src[j];
        if s.is_zero() {
            if !target[j].is_zero() && !pm.is_one() {
                target[j] *= &pm;
            }
        } else {
            let t = std::mem::take(&mut target[j]);
            target[j] = t * &pm - &am * s;
        }
    }
    debug_assert!(target[col].is_zero());
    primitive(target);
}

/// Row echelon form in primitive integer rows, plus the pivot columns.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub rows: Vec<Vec<BigInt>>,
    pub pivots: Vec<usize>,
    /// For each echelon row, the index of the input row it came from.
    pub origin: Vec<usize>,
}

pub fn echelon(rows: &[Vector], cols: usize) -> Echelon {
    let mut work: Vec<(usize, Vec<BigInt>)> = rows.iter().enumerate().map(|(i, r)| (i, integer_row(r))).collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..cols {
        if rank == work.len() {
            break;
        }
        // Sparsest candidate row, lowest index on ties.
        let Some(p) = (rank..work.len())
            .filter(|&i| !work[i].1[col].is_zero())
            .min_by_key(|&i| (work[i].1.iter().filter(|x| !x.is_zero()).count(), i))
        else {
            continue;
        };
        work.swap(rank, p);
        let (head, tail) = work.split_at_mut(rank + 1);
        let src = &head[rank].1;
        tail.par_iter_mut().with_min_len(8).for_each(|(_, t)| eliminate(t, src, col));
        pivots.push(col);
        rank += 1;
    }
    work.truncate(rank);
    let origin = work.iter().map(|(i, _)| *i).collect();
    Echelon { rows: work.into_iter().map(|(_, r)| r).collect(), pivots, origin }
}

pub fn rank(rows: &[Vector], cols: usize) -> usize {
    echelon(rows, cols).pivots.len()
}

/// Reduced row echelon form over the rationals.
#[derive(Clone, Debug)]
pub struct Rref {
    pub rows: Vec<Vector>,
    pub pivots: Vec<usize>,
}

pub fn rref(rows: &[Vector], cols: usize) -> Rref {
    let Echelon { mut rows, pivots, .. } = echelon(rows, cols);
    for k in (0..rows.len()).rev() {
        let (head, tail) = rows.split_at_mut(k);
        let src = &tail[0];
        head.par_iter_mut().with_min_len(8).for_each(|t| eliminate(t, src, pivots[k]));
    }
    let rows = rows
        .iter()
        .zip(&pivots)
        .map(|(r, &p)| {
            let d = r[p].clone();
            r.iter().map(|x| Q::new(x.clone(), d.clone())).collect()
        })
        .collect();
    Rref { rows, pivots }
}

/// Basis of `{x : M x = 0}`, one vector per free column, in column order.
pub fn nullspace(rows: &[Vector], cols: usize) -> Vec<Vector> {
    let red = rref(rows, cols);
    let mut is_pivot = vec![false; cols];
    for &p in &red.pivots {
        is_pivot[p] = true;
    }
    (0..cols)
        .filter(|&j| !is_pivot[j])
        .map(|free| {
            let mut v = vec![Q::zero(); cols];
            v[free] = Q::one();
            for (row, &p) in red.rows.iter().zip(&red.pivots) {
                v[p] = -row[free].clone();
            }
            v
        })
        .collect()
}

pub fn determinant(rows: &[Vector]) -> Q {
    let n = rows.len();
    if n == 0 {
        return Q::one();
    }
    // Plain rational elimination; only used on small matrices.
    let mut m: Vec<Vector> = rows.to_vec();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let piv = m[c][c].clone();
        det *= &piv;
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for j in c..n {
                let v = &f * &m[c][j];
                m[i][j] -= v;
            }
        }
    }
    det
}

/// Solves `M x = b` for square nonsingular `M`.
pub fn solve(m: &RationalMatrix, b: &[Q]) -> Option<Vector> {
    let n = m.nrows();
    if n != m.ncols() || b.len() != n {
        return None;
    }
    let aug: Vec<Vector> = (0..n)
        .map(|i| {
            let mut r = m.row(i).to_vec();
            r.push(b[i].clone());
            r
        })
        .collect();
    let red = rref(&aug, n + 1);
    if red.pivots.len() != n || red.pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(red.rows.iter().map(|r| r[n].clone()).collect())
}

/// True iff the two spanning sets span the same subspace.
pub fn subspace_equal(a: &[Vector], b: &[Vector], dim: usize) -> bool {
    let ra = rank(a, dim);
    let rb = rank(b, dim);
    if ra != rb {
        return false;
    }
    let mut all = a.to_vec();
    all.extend(b.iter().cloned());
    rank(&all, dim) == ra
}

/// True iff `Σ rank(span_i) = rank(∪ span_i)`.
pub fn is_direct_sum(spans: &[Vec<Vector>], dim: usize) -> bool {
    let sum: usize = spans.iter().map(|s| rank(s, dim)).sum();
    let all: Vec<Vector> = spans.iter().flatten().cloned().collect();
    sum == rank(&all, dim)
}

/// Rank certificate of a square matrix: pivots and a digest of the pivot trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PivotTrace {
    pub rank: usize,
    pub pivots: Vec<usize>,
    pub origin: Vec<usize>,
    pub digest: String,
}

pub fn pivot_trace(rows: &[Vector], cols: usize) -> PivotTrace {
    let e = echelon(rows, cols);
    let mut h = Sha256::new();
    for (row, &p) in e.rows.iter().zip(&e.pivots) {
        h.update((p as u64).to_le_bytes());
        let v = &row[p];
        h.update([if v.is_negative() { 1u8 } else { 0u8 }]);
        h.update(v.magnitude().to_bytes_le());
    }
    PivotTrace { rank: e.pivots.len(), pivots: e.pivots, origin: e.origin, digest: hex::encode(h.finalize()) }
}
