//! Compressed sparse column storage with a precomputed pattern.
//!
//! Assembly first builds the pattern from element connectivity, then adds
//! element contributions in place. Element loops run in ascending order so
//! the summation order of every entry is fixed.

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CscMatrix {
    /// Pattern holding every `(r, c)` with `r in rows[e]`, `c in cols[e]`
    /// for some element `e`, all values zero.
    pub fn from_element_sets(nrows: usize, ncols: usize, rows: &[Vec<usize>], cols: &[Vec<usize>]) -> Self {
        // Elements touching each column.
        let mut count = vec![0usize; ncols + 1];
        for set in cols {
            for &c in set {
                count[c + 1] += 1;
            }
        }
        for c in 0..ncols {
            count[c + 1] += count[c];
        }
        let mut fill = count.clone();
        let mut elements = vec![0usize; count[ncols]];
        for (e, set) in cols.iter().enumerate() {
            for &c in set {
                elements[fill[c]] = e;
                fill[c] += 1;
            }
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut scratch = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            for &e in &elements[count[c]..count[c + 1]] {
                scratch.extend_from_slice(&rows[e]);
            }
            scratch.sort_unstable();
            scratch.dedup();
            row_idx.extend_from_slice(&scratch);
            col_ptr.push(row_idx.len());
        }
        let nnz = row_idx.len();
        CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values: vec![C64::new(0.0, 0.0); nnz],
        }
    }

    /// Builds from unsorted triplets, summing duplicates in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut sorted: Vec<(usize, usize, usize)> = triplets
            .iter()
            .enumerate()
            .map(|(k, &(r, c, _))| (c, r, k))
            .collect();
        sorted.sort_unstable();
        let mut col_ptr = vec![0; ncols + 1];
        let mut row_idx = Vec::new();
        let mut values: Vec<C64> = Vec::new();
        let mut last = None;
        for &(c, r, k) in &sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((c, r)) {
                *values.last_mut().unwrap() += triplets[k].2;
            } else {
                row_idx.push(r);
                values.push(triplets[k].2);
                col_ptr[c + 1] += 1;
                last = Some((c, r));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.position(row, col)
            .map_or(C64::new(0.0, 0.0), |k| self.values[k])
    }

    /// Adds `value` to an entry of the pattern.
    ///
    /// # Panics
    /// If `(row, col)` is outside the pattern.
    pub fn add(&mut self, row: usize, col: usize, value: C64) {
        let k = self
            .position(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) not in pattern"));
        self.values[k] += value;
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    /// `y = A^H x`
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.ncols)
            .map(|c| {
                (self.col_ptr[c]..self.col_ptr[c + 1])
                    .map(|k| self.values[k].conj() * x[self.row_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn adjoint(&self) -> CscMatrix {
        let triplets: Vec<(usize, usize, C64)> = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        CscMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// `a * self + b * other` for matrices of equal shape.
    pub fn combine(&self, a: C64, other: &CscMatrix, b: C64) -> CscMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.col_ptr == other.col_ptr && self.row_idx == other.row_idx {
            let mut out = self.clone();
            for (v, w) in out.values.iter_mut().zip(&other.values) {
                *v = a * *v + b * w;
            }
            return out;
        }
        let triplets: Vec<(usize, usize, C64)> = self
            .iter()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.iter().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        CscMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn scaled(&self, a: C64) -> CscMatrix {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= a;
        }
        out
    }

    /// Largest `|A - A^H|` entry relative to the largest `|A|` entry.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let defect = self
            .iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); self.nrows * self.ncols];
        for (r, c, v) in self.iter() {
            d[r * self.ncols + c] += v;
        }
        d
    }

    pub fn to_faer(&self) -> SparseColMat<usize, C64> {
        self.clone().into_faer()
    }

    pub fn into_faer(self) -> SparseColMat<usize, C64> {
        let symbolic = SymbolicSparseColMat::new_checked(self.nrows, self.ncols, self.col_ptr, None, self.row_idx);
        SparseColMat::new(symbolic, self.values)
    }

    /// Entries on and below the diagonal.
    pub fn lower(&self) -> CscMatrix {
        self.clone().into_lower()
    }

    /// Drops the entries above the diagonal in place.
    pub fn into_lower(mut self) -> CscMatrix {
        let mut out = 0;
        let mut start = 0;
        for c in 0..self.ncols {
            let end = self.col_ptr[c + 1];
            for k in start..end {
                if self.row_idx[k] >= c {
                    self.row_idx[out] = self.row_idx[k];
                    self.values[out] = self.values[k];
                    out += 1;
                }
            }
            start = end;
            self.col_ptr[c + 1] = out;
        }
        self.row_idx.truncate(out);
        self.values.truncate(out);
        self.row_idx.shrink_to_fit();
        self.values.shrink_to_fit();
        self
    }

    /// Block matrix from a row-major grid of optional blocks.
    pub fn block(blocks: &[&[Option<&CscMatrix>]]) -> CscMatrix {
        let heights: Vec<usize> = blocks
            .iter()
            .map(|row| row.iter().flatten().next().expect("block row without matrix").nrows)
            .collect();
        let ncol_blocks = blocks[0].len();
        let widths: Vec<usize> = (0..ncol_blocks)
            .map(|j| {
                blocks
                    .iter()
                    .find_map(|row| row[j].map(|m| m.ncols))
                    .expect("block column without matrix")
            })
            .collect();
        let mut triplets = Vec::new();
        let mut r0 = 0;
        for (i, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (j, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    triplets.extend(m.iter().map(|(r, c, v)| (r0 + r, c0 + c, v)));
                }
                c0 += widths[j];
            }
            r0 += heights[i];
        }
        CscMatrix::from_triplets(r0, widths.iter().sum(), &triplets)
    }
}

/// Hermitian inner product `x^H y`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pattern_and_products() {
        let rows = vec![vec![0, 1], vec![1, 2]];
        let mut a = CscMatrix::from_element_sets(3, 3, &rows, &rows);
        assert_eq!(a.nnz(), 7);
        a.add(0, 0, c(1.0, 0.0));
        a.add(1, 0, c(0.0, 1.0));
        a.add(0, 1, c(0.0, -1.0));
        a.add(1, 1, c(2.0, 0.0));
        a.add(2, 2, c(3.0, 0.0));
        assert!(a.hermitian_defect() < 1e-15);
        let x = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let y = a.mul_vec(&x);
        assert_eq!(y, vec![c(2.0, 0.0), c(0.0, 3.0), c(6.0, 0.0)]);
        assert_eq!(a.adjoint_mul_vec(&x), y);
        assert_eq!(a.adjoint().to_dense(), a.to_dense());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let t = [(0, 0, c(1.0, 0.0)), (1, 0, c(2.0, 0.0)), (0, 0, c(0.5, 1.0))];
        let a = CscMatrix::from_triplets(2, 1, &t);
        assert_eq!(a.get(0, 0), c(1.5, 1.0));
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn lower_part() {
        let t = [(0, 0, c(1.0, 0.0)), (1, 0, c(2.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 1, c(3.0, 0.0))];
        let a = CscMatrix::from_triplets(2, 2, &t);
        let l = a.lower();
        assert_eq!(l.nnz(), 3);
        assert_eq!(l.get(0, 1), c(0.0, 0.0));
        assert_eq!(l.get(1, 0), c(2.0, 0.0));
        assert_eq!(l.col_ptr(), &[0, 2, 3]);
    }

    #[test]
    fn blocks() {
        let i = CscMatrix::identity(2);
        let b = CscMatrix::block(&[&[Some(&i), Some(&i)], &[Some(&i), None]]);
        assert_eq!((b.nrows(), b.ncols(), b.nnz()), (4, 4, 6));
        assert_eq!(b.get(2, 0), c(1.0, 0.0));
        assert_eq!(b.get(2, 2), c(0.0, 0.0));
    }
}
