use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::round::add_up;
use super::Interval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalVector(pub Vec<Interval>);

impl IntervalVector {
    pub fn from_points(xs: &[f64]) -> Self {
        Self(xs.iter().copied().map(Interval::point).collect())
    }

    /// Box of radius `r` (in the max norm) around `xs`.
    pub fn ball(xs: &[f64], r: f64) -> Self {
        Self(xs.iter().map(|&x| Interval::ball(x, r)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    /// Upper bound of the max norm over the box.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(Interval::mag).fold(0.0, f64::max)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.0.iter().map(Interval::midpoint).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.0.iter().map(Interval::radius).fold(0.0, f64::max)
    }

    pub fn contains_point(&self, xs: &[f64]) -> bool {
        xs.len() == self.len() && self.0.iter().zip(xs).all(|(i, &x)| i.contains(x))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Interval::is_finite)
    }
}

impl Index<usize> for IntervalVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl From<Vec<Interval>> for IntervalVector {
    fn from(v: Vec<Interval>) -> Self {
        Self(v)
    }
}

/// Dense row-major interval matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Interval::point(0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::point(1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Interval>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Matrix whose `(i, j)` entry is `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Interval) -> Self {
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j));
        Self { rows, cols, data: data.collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Interval] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Upper bound of the induced max norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().fold(0.0, |acc, x| add_up(acc, x.mag()))).fold(0.0, f64::max)
    }

    pub fn midpoints(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(Interval::midpoint).collect()).collect()
    }

    /// Column indices of entries that are not exactly zero, per row.
    pub fn nonzero_pattern(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| !(x.lo() == 0.0 && x.hi() == 0.0))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    /// `self * rhs`, skipping exact zeros of `rhs`.
    pub fn matmul(&self, rhs: &IntervalMatrix) -> IntervalMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let pattern = rhs.nonzero_pattern();
        let mut out = IntervalMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let acc = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if a.lo() == 0.0 && a.hi() == 0.0 {
                    continue;
                }
                for &j in &pattern[k] {
                    acc[j] = acc[j] + *a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &IntervalVector) -> IntervalVector {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        IntervalVector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).fold(Interval::point(0.0), |acc, (a, x)| acc + *a * *x))
                .collect(),
        )
    }

    pub fn sub(&self, rhs: &IntervalMatrix) -> IntervalMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        IntervalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    /// Entrywise containment of a point matrix.
    pub fn contains_points(&self, m: &[Vec<f64>]) -> bool {
        m.len() == self.rows
            && m.iter().enumerate().all(|(i, row)| {
                row.len() == self.cols && row.iter().enumerate().all(|(j, &x)| self[(i, j)].contains(x))
            })
    }
}

impl Index<(usize, usize)> for IntervalMatrix {
    type Output = Interval;
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntervalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn vector_norm() {
        let v = IntervalVector(vec![iv(-2.0, -1.0), iv(0.0, 3.0)]);
        assert_eq!(v.norm_inf(), 3.0);
    }

    #[test]
    fn matrix_norms() {
        assert_eq!(IntervalMatrix::identity(2).norm_inf(), 1.0);
        let m = IntervalMatrix::from_rows(vec![
            vec![Interval::point(1.0), Interval::point(-2.0)],
            vec![Interval::point(3.0), Interval::point(4.0)],
        ]);
        assert_eq!(m.norm_inf(), 7.0);
    }

    #[test]
    fn matmul_matches_dense_product() {
        let a = IntervalMatrix::from_rows(vec![vec![iv(1.0, 1.0), iv(2.0, 2.0)], vec![iv(0.0, 0.0), iv(-1.0, 1.0)]]);
        let b = IntervalMatrix::from_rows(vec![vec![iv(0.0, 0.0), iv(1.0, 2.0)], vec![iv(3.0, 3.0), iv(0.0, 0.0)]]);
        let c = a.matmul(&b);
        assert_eq!(c[(0, 0)], iv(6.0, 6.0));
        assert_eq!(c[(0, 1)], iv(1.0, 2.0));
        assert_eq!(c[(1, 0)], iv(-3.0, 3.0));
        assert_eq!(c[(1, 1)], iv(0.0, 0.0));
        let v = a.mul_vec(&IntervalVector::from_points(&[1.0, 1.0]));
        assert_eq!(v[0], iv(3.0, 3.0));
        assert_eq!(v[1], iv(-1.0, 1.0));
    }
}
