//! Dense matrices over a [`Scalar`] and the elimination routines the
//! homology and torsion code is built on.
//!
//! Pivoting is column by column, left to right. Floating backends take the
//! largest-modulus entry of the column as pivot; the exact backend takes the
//! first nonzero one. A column is declared dependent when its best pivot is
//! below `rel_tol · max|entry|`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivots this many times above the threshold are still flagged as
/// ill-conditioned rank decisions.
const CONDITION_BAND: f64 = 1e2;

#[derive(Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> fmt::Debug for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].render()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn scalar(v: S) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn diagonal(values: &[S]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = v.clone();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(nrows: usize, columns: &[Vec<S>]) -> Self {
        let mut m = Self::zeros(nrows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), nrows);
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = v.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<S> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn columns(&self) -> Vec<Vec<S>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    /// Entrywise conversion to another scalar type.
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|v| v.clone() * s.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero_exact() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero_exact() {
                        continue;
                    }
                    let v = out[(i, j)].clone() + a.clone() * b.clone();
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = &self[(i, j)];
                    if !a.is_zero_exact() && !x.is_zero_exact() {
                        acc = acc + a.clone() * x.clone();
                    }
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.map(|v| -v.clone()))
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                let v = self[(r0 + i, c0 + j)].clone() + block[(i, j)].clone();
                self[(r0 + i, c0 + j)] = v;
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut b = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                b[(i, j)] = self[(r0 + i, c0 + j)].clone();
            }
        }
        b
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(Scalar::modulus).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero_exact)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> S {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = S::one();
        for c in 0..n {
            let Some(p) = pick_pivot(&a, c, c) else {
                return S::zero();
            };
            if a[(p, c)].is_zero_exact() {
                return S::zero();
            }
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let piv = a[(c, c)].clone();
            det = det * piv.clone();
            let inv = piv.recip();
            let support = a.row_support(c, c);
            for r in c + 1..n {
                let f = a[(r, c)].clone() * inv.clone();
                if f.is_zero_exact() {
                    continue;
                }
                a.eliminate(r, c, &f, &support);
            }
        }
        det
    }

    /// Inverse by Gauss–Jordan; `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_modulus();
        for c in 0..n {
            let p = pick_pivot(&a, c, c)?;
            let piv_mod = a[(p, c)].modulus();
            if a[(p, c)].is_zero_exact() || (!S::EXACT && piv_mod <= 1e-14 * scale) {
                return None;
            }
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let pinv = a[(c, c)].recip();
            for k in 0..n {
                a[(c, k)] = a[(c, k)].clone() * pinv.clone();
                inv[(c, k)] = inv[(c, k)].clone() * pinv.clone();
            }
            let support = a.row_support(c, 0);
            let inv_support = inv.row_support(c, 0);
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[(r, c)].clone();
                if f.is_zero_exact() {
                    continue;
                }
                a.eliminate(r, c, &f, &support);
                inv.eliminate(r, c, &f, &inv_support);
            }
        }
        Some(inv)
    }

    /// Columns `from..` where row `r` is nonzero.
    fn row_support(&self, r: usize, from: usize) -> Vec<usize> {
        (from..self.cols).filter(|&k| !self[(r, k)].is_zero_exact()).collect()
    }

    /// `row[i] -= f · row[src]` over the given support of `row[src]`.
    fn eliminate(&mut self, i: usize, src: usize, f: &S, support: &[usize]) {
        for &k in support {
            let v = self[(i, k)].clone() - f.clone() * self[(src, k)].clone();
            self[(i, k)] = v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Reduced row echelon form with the crate's pivoting rule.
    pub fn rref(&self, rel_tol: f64) -> Result<Rref<S>> {
        let mut a = self.clone();
        let scale = self.max_modulus();
        let threshold = rel_tol * scale;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let Some(p) = pick_pivot(&a, r, c) else { continue };
            let m = a[(p, c)].modulus();
            if a[(p, c)].is_zero_exact() || (!S::EXACT && m <= threshold) {
                continue;
            }
            if !S::EXACT && m <= CONDITION_BAND * threshold {
                return Err(Error::IllConditioned { pivot: m, scale });
            }
            a.swap_rows(p, r);
            let pinv = a[(r, c)].recip();
            for k in c..a.cols {
                a[(r, k)] = a[(r, k)].clone() * pinv.clone();
            }
            let support = a.row_support(r, c);
            for i in 0..a.rows {
                if i == r {
                    continue;
                }
                let f = a[(i, c)].clone();
                if f.is_zero_exact() {
                    continue;
                }
                a.eliminate(i, r, &f, &support);
            }
            if !S::EXACT {
                // clear the eliminated column exactly
                for i in 0..a.rows {
                    if i != r {
                        a[(i, c)] = S::zero();
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        Ok(Rref { reduced: a, pivots })
    }

    pub fn rank(&self, rel_tol: f64) -> Result<usize> {
        Ok(self.rref(rel_tol)?.pivots.len())
    }

    /// Indices of the leftmost maximal set of independent columns.
    pub fn pivot_columns(&self, rel_tol: f64) -> Result<Vec<usize>> {
        Ok(self.rref(rel_tol)?.pivots)
    }

    /// Basis of the null space, one vector per non-pivot column.
    pub fn kernel_basis(&self, rel_tol: f64) -> Result<Vec<Vec<S>>> {
        Ok(self.rref(rel_tol)?.kernel_basis())
    }

    /// Solves `self · x = b` for a matrix with independent columns. Returns
    /// `Ok(None)` when `b` is not in the column span.
    pub fn solve_full_rank(&self, b: &[S], rel_tol: f64) -> Result<Option<Vec<S>>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        aug.set_block(0, 0, self);
        for (i, v) in b.iter().enumerate() {
            aug[(i, self.cols)] = v.clone();
        }
        let scale = self.max_modulus().max(b.iter().map(Scalar::modulus).fold(0.0, f64::max));
        let rref = aug.rref(rel_tol)?;
        if rref.pivots.len() < self.cols || rref.pivots[..self.cols] != (0..self.cols).collect::<Vec<_>>() {
            return Err(Error::IllConditioned { pivot: 0.0, scale });
        }
        if rref.pivots.len() > self.cols {
            return Ok(None);
        }
        Ok(Some((0..self.cols).map(|i| rref.reduced[(i, self.cols)].clone()).collect()))
    }
}

fn pick_pivot<S: Scalar>(a: &Matrix<S>, from_row: usize, col: usize) -> Option<usize> {
    if from_row >= a.rows {
        return None;
    }
    if S::EXACT {
        // a unit pivot keeps the entries from growing
        let mut first = None;
        for r in from_row..a.rows {
            let v = &a[(r, col)];
            if v.is_zero_exact() {
                continue;
            }
            if *v == S::one() || *v == -S::one() {
                return Some(r);
            }
            first.get_or_insert(r);
        }
        return first.or(Some(from_row));
    }
    let mut best = from_row;
    let mut best_mod = a[(from_row, col)].modulus();
    for r in from_row + 1..a.rows {
        let m = a[(r, col)].modulus();
        if m > best_mod {
            best = r;
            best_mod = m;
        }
    }
    Some(best)
}

/// Output of [`Matrix::rref`]: the reduced matrix and the pivot column of
/// each nonzero row.
#[derive(Clone, Debug)]
pub struct Rref<S: Scalar> {
    pub reduced: Matrix<S>,
    pub pivots: Vec<usize>,
}

impl<S: Scalar> Rref<S> {
    /// Null space of the original matrix, one vector per non-pivot column.
    pub fn kernel_basis(&self) -> Vec<Vec<S>> {
        let cols = self.reduced.cols;
        let mut is_pivot = vec![false; cols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        (0..cols)
            .filter(|&free| !is_pivot[free])
            .map(|free| {
                let mut x = vec![S::zero(); cols];
                x[free] = S::one();
                for (row, &c) in self.pivots.iter().enumerate() {
                    x[c] = -self.reduced[(row, free)].clone();
                }
                x
            })
            .collect()
    }
}

/// Concatenates column lists into one matrix with `nrows` rows.
pub fn hstack<S: Scalar>(nrows: usize, parts: &[&[Vec<S>]]) -> Matrix<S> {
    let cols: Vec<Vec<S>> = parts.iter().flat_map(|p| p.iter().cloned()).collect();
    Matrix::from_columns(nrows, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{C64, Q};

    fn q(v: i64) -> Q {
        Q::from_i64(v)
    }

    #[test]
    fn det_exact_and_float_agree() {
        let rows = [vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]];
        let mq = Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect());
        assert_eq!(mq.det(), q(4));
        let mc = mq.convert(|v| v.to_c64());
        assert!((mc.det() - C64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kernel_of_rank_deficient() {
        let m = Matrix::from_rows(vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)]]);
        let k = m.kernel_basis(0.0).unwrap();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.mul_vec(v).iter().all(|x| x.is_zero_exact()));
        }
        assert_eq!(m.pivot_columns(0.0).unwrap(), vec![0]);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Matrix::from_rows(vec![vec![C64::new(1.0, 1.0), C64::new(2.0, 0.0)], vec![C64::new(0.0, -1.0), C64::new(3.0, 0.5)]]);
        let prod = m.mul(&m.inverse().unwrap());
        assert!(prod.sub(&Matrix::identity(2)).max_modulus() < 1e-12);
        assert!(Matrix::<Q>::zeros(2, 2).inverse().is_none());
    }

    #[test]
    fn solve_detects_out_of_span() {
        let a = Matrix::from_rows(vec![vec![q(1)], vec![q(1)]]);
        assert_eq!(a.solve_full_rank(&[q(2), q(2)], 0.0).unwrap(), Some(vec![q(2)]));
        assert_eq!(a.solve_full_rank(&[q(1), q(2)], 0.0).unwrap(), None);
    }

    #[test]
    fn tiny_pivot_is_flagged() {
        let m = Matrix::from_rows(vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1e-9, 0.0)]]);
        assert!(matches!(m.rref(1e-10), Err(Error::IllConditioned { .. })));
    }
}
