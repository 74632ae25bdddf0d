//! Dense exact linear algebra over the rationals.
//!
//! Everything here is deterministic: pivots are chosen by position, never
//! by magnitude, so identical inputs give identical echelon forms. Sizes
//! are desk scale (a few thousand rows, a few dozen columns), so plain
//! fraction arithmetic with always-reduced rationals is fast enough.

use crate::rat::Q;
use num_traits::{One, Zero};

/// A dense rational matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Q>,
}

impl Mat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let v = &out[(i, j)] + a * b;
                        out[(i, j)] = v;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Q::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// In-place reduced row echelon form. Returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self[(r, c)].recip();
            for j in c..self.cols {
                let v = &self[(r, j)] * &inv;
                self[(r, j)] = v;
            }
            for i in 0..self.rows {
                if i != r && !self[(i, c)].is_zero() {
                    let f = self[(i, c)].clone();
                    for j in c..self.cols {
                        let v = &self[(i, j)] - &f * &self[(r, j)];
                        self[(i, j)] = v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right nullspace, one vector per free column, in
    /// ascending free-column order. Each vector has a 1 in its free
    /// column.
    pub fn nullspace(&self) -> Vec<Vec<Q>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free] {
                continue;
            }
            let mut v = vec![Q::zero(); self.cols];
            v[free] = Q::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(r, free)].clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Solves `A x = b`. Returns `None` when inconsistent; when the
    /// system is underdetermined this picks the solution with zero free
    /// coordinates.
    pub fn solve(&self, b: &[Q]) -> Option<Vec<Q>> {
        assert_eq!(self.rows, b.len());
        let mut aug = Mat::zero(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let pivots = aug.rref();
        if pivots.contains(&self.cols) {
            return None; // pivot in the RHS column
        }
        let mut x = vec![Q::zero(); self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug[(r, self.cols)].clone();
        }
        Some(x)
    }

    /// Inverse of a square matrix, or `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Mat::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Q::one();
        }
        let pivots = aug.rref();
        if pivots.len() < n || pivots.iter().any(|&c| c >= n) {
            return None;
        }
        let mut inv = Mat::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

/// Incremental row-echelon accumulator.
///
/// Rows are fed one at a time; the accumulator keeps a reduced echelon
/// basis of the row span. This is how the symmetry solver digests its
/// (many rows) x (few unknowns) constraint stream without materializing
/// the whole matrix.
#[derive(Debug, Clone)]
pub struct Echelon {
    cols: usize,
    /// (pivot column, reduced row); sorted by pivot column.
    rows: Vec<(usize, Vec<Q>)>,
}

impl Echelon {
    pub fn new(cols: usize) -> Self {
        Echelon {
            cols,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `row` against the basis and inserts the remainder if
    /// nonzero. Returns true when the rank grew.
    pub fn insert(&mut self, mut row: Vec<Q>) -> bool {
        assert_eq!(row.len(), self.cols);
        for (pc, r) in &self.rows {
            if !row[*pc].is_zero() {
                let f = row[*pc].clone();
                for j in *pc..self.cols {
                    if !r[j].is_zero() {
                        row[j] = &row[j] - &f * &r[j];
                    }
                }
            }
        }
        let Some(pc) = row.iter().position(|v| !v.is_zero()) else {
            return false;
        };
        let inv = row[pc].recip();
        for v in row.iter_mut().skip(pc) {
            if !v.is_zero() {
                *v = &*v * &inv;
            }
        }
        // back-substitute into existing rows so the basis stays reduced
        for (_, r) in self.rows.iter_mut() {
            if !r[pc].is_zero() {
                let f = r[pc].clone();
                for j in pc..self.cols {
                    if !row[j].is_zero() {
                        r[j] = &r[j] - &f * &row[j];
                    }
                }
            }
        }
        let at = self.rows.partition_point(|(c, _)| *c < pc);
        self.rows.insert(at, (pc, row));
        true
    }

    /// Nullspace of the accumulated row span, as in [`Mat::nullspace`].
    pub fn nullspace(&self) -> Vec<Vec<Q>> {
        let mut is_pivot = vec![false; self.cols];
        for (pc, _) in &self.rows {
            is_pivot[*pc] = true;
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free] {
                continue;
            }
            let mut v = vec![Q::zero(); self.cols];
            v[free] = Q::one();
            for (pc, r) in &self.rows {
                v[*pc] = -r[free].clone();
            }
            basis.push(v);
        }
        basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{qi, qr};

    fn m(rows: Vec<Vec<i64>>) -> Mat {
        Mat::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(qi).collect())
                .collect(),
        )
    }

    #[test]
    fn rank_and_rref() {
        let a = m(vec![vec![1, 2, 3], vec![2, 4, 6], vec![1, 0, 1]]);
        assert_eq!(a.rank(), 2);
        let id = Mat::identity(3);
        assert_eq!(id.rank(), 3);
    }

    #[test]
    fn nullspace_is_annihilated() {
        let a = m(vec![vec![1, 2, 3, 4], vec![0, 1, 1, 1]]);
        let ns = a.nullspace();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for x in a.mul_vec(v) {
                assert!(x.is_zero());
            }
        }
    }

    #[test]
    fn solve_small_system() {
        let a = m(vec![vec![2, 1], vec![1, -1]]);
        let b = vec![qi(3), qi(0)];
        let x = a.solve(&b).unwrap();
        assert_eq!(x, vec![qi(1), qi(1)]);
        // inconsistent
        let a2 = m(vec![vec![1, 1], vec![1, 1]]);
        assert!(a2.solve(&[qi(0), qi(1)]).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let a = m(vec![vec![2, 1, 0], vec![1, 1, 1], vec![0, 3, 1]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), Mat::identity(3));
        assert_eq!(inv.mul(&a), Mat::identity(3));
        assert_eq!(inv[(0, 0)], qr(2, 5));
        let singular = m(vec![vec![1, 2], vec![2, 4]]);
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn echelon_matches_batch_rank() {
        let rows = vec![
            vec![qi(1), qi(2), qi(3)],
            vec![qi(2), qi(4), qi(6)],
            vec![qi(0), qi(1), qi(1)],
            vec![qi(1), qi(3), qi(4)],
        ];
        let mut e = Echelon::new(3);
        for r in rows.clone() {
            e.insert(r);
        }
        assert_eq!(e.rank(), Mat::from_rows(rows).rank());
        let ns = e.nullspace();
        assert_eq!(ns.len(), 1);
    }
}
