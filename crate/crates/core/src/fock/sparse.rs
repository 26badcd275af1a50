//! Minimal compressed-sparse-row complex matrices.

use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseC {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<C64>,
}

impl SparseC {
    pub fn zeros(n: usize) -> Self {
        SparseC { n, indptr: vec![0; n + 1], indices: vec![], data: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SparseC {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            data: d.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(n: usize, mut t: Vec<(u32, u32, C64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *data.last_mut().expect("nonempty") += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            data.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_idx = Vec::with_capacity(rows.len());
        let mut keep_data = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(data) {
            if v != C64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_idx.push(c);
                keep_data.push(v);
            }
        }
        for &r in &keep_rows {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        SparseC { n, indptr, indices: keep_idx, data: keep_data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k] as usize, self.data[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&(j as u32)) {
            Ok(p) => self.data[lo + p],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    fn triplets(&self) -> Vec<(u32, u32, C64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push((i as u32, j as u32, v));
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.n, t)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// a·self + b·other.
    pub fn axpby(&self, a: C64, other: &SparseC, b: C64) -> Self {
        assert_eq!(self.n, other.n);
        let mut t: Vec<(u32, u32, C64)> = self.triplets().into_iter().map(|(r, c, v)| (r, c, a * v)).collect();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, b * v)));
        Self::from_triplets(self.n, t)
    }

    pub fn add(&self, other: &SparseC) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn matmul(&self, other: &SparseC) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut mark = vec![usize::MAX; n];
        let mut cols: Vec<usize> = Vec::new();
        for i in 0..n {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                if acc[j] != C64::new(0.0, 0.0) {
                    indices.push(j as u32);
                    data.push(acc[j]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseC { n, indptr, indices, data }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// max |M − M†| over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn max_abs_diff(&self, other: &SparseC) -> f64 {
        let diff = self.axpby(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0));
        diff.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_matmul_matches_dense() {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let a = SparseC::from_triplets(3, vec![(0, 1, one), (0, 1, one), (2, 0, i), (1, 1, one - one)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), C64::new(2.0, 0.0));
        let b = a.adjoint();
        let p = a.matmul(&b).to_dense();
        let q = a.to_dense() * b.to_dense();
        assert!((p - q).iter().all(|z| z.norm() < 1e-15));
    }
}
