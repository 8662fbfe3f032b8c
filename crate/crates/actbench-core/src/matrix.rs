//! Dense row-major matrices over f64, sized for batches of network inputs.
//!
//! Everything here is single-threaded on purpose: timing runs elsewhere in
//! the crate assume no hidden thread pools, and results must be reproducible
//! bit-for-bit for a fixed seed.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from an explicit row-of-rows literal. Panics if rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut out = self.clone();
        out.map_inplace(f);
        out
    }

    /// self[m x k] * other[k x n]. Panics on a dimension mismatch; callers
    /// that take user-supplied shapes validate first.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.matmul_into(other, &mut out);
        out
    }

    /// As `matmul`, but accumulates into rows that may be pre-seeded (the
    /// network layer uses this to fold the bias add into the same pass).
    pub(crate) fn matmul_into(&self, other: &Matrix, out: &mut Matrix) {
        let k = self.cols;
        let n = other.cols;
        assert_eq!(other.rows, k);
        assert_eq!(out.rows, self.rows);
        assert_eq!(out.cols, n);
        for i in 0..self.rows {
            let arow = self.row(i);
            let crow = &mut out.data[i * n..(i + 1) * n];
            // Unroll over k so four b-rows stream per pass; the output row
            // stays cache-resident while the j-loop vectorises.
            let mut kk = 0;
            while kk + 4 <= k {
                let (a0, a1, a2, a3) = (arow[kk], arow[kk + 1], arow[kk + 2], arow[kk + 3]);
                let b0 = &other.data[kk * n..(kk + 1) * n];
                let b1 = &other.data[(kk + 1) * n..(kk + 2) * n];
                let b2 = &other.data[(kk + 2) * n..(kk + 3) * n];
                let b3 = &other.data[(kk + 3) * n..(kk + 4) * n];
                for j in 0..n {
                    crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
                }
                kk += 4;
            }
            while kk < k {
                let a = arow[kk];
                let b = &other.data[kk * n..(kk + 1) * n];
                for j in 0..n {
                    crow[j] += a * b[j];
                }
                kk += 1;
            }
        }
    }

    /// self^T * other, without materialising the transpose.
    /// self[m x k], other[m x n] -> [k x n].
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let k = self.cols;
        let n = other.cols;
        let mut out = Matrix::zeros(k, n);
        for i in 0..self.rows {
            let arow = self.row(i);
            let brow = other.row(i);
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[p * n..(p + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    /// self * other^T. self[m x n], other[k x n] -> [m x k].
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t dimension mismatch");
        let m = self.rows;
        let k = other.rows;
        let mut out = Matrix::zeros(m, k);
        for i in 0..m {
            let arow = self.row(i);
            let orow = out.row_mut(i);
            for p in 0..k {
                let brow = other.row(p);
                let mut acc = 0.0;
                for j in 0..arow.len() {
                    acc += arow[j] * brow[j];
                }
                orow[p] = acc;
            }
        }
        out
    }

    pub fn scale_inplace(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference product: the plainest possible triple loop.
    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for p in 0..a.cols() {
                    acc += a.get(i, p) * b.get(p, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        for seed in 0..40u64 {
            let m = 1 + (seed as usize * 7) % 9;
            let k = 1 + (seed as usize * 5) % 11;
            let n = 1 + (seed as usize * 3) % 8;
            let a = random_matrix(m, k, seed);
            let b = random_matrix(k, n, seed + 1000);
            let fast = a.matmul(&b);
            let slow = naive_matmul(&a, &b);
            for i in 0..m {
                for j in 0..n {
                    assert!(
                        (fast.get(i, j) - slow.get(i, j)).abs() <= 1e-12,
                        "mismatch at ({i},{j}) for seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn transpose_products_match_naive() {
        let a = random_matrix(6, 4, 7);
        let b = random_matrix(6, 5, 8);
        let got = a.t_matmul(&b);
        // a^T b the slow way
        for p in 0..4 {
            for j in 0..5 {
                let mut acc = 0.0;
                for i in 0..6 {
                    acc += a.get(i, p) * b.get(i, j);
                }
                assert!((got.get(p, j) - acc).abs() < 1e-12);
            }
        }

        let c = random_matrix(3, 4, 9);
        let d = random_matrix(5, 4, 10);
        let got = c.matmul_t(&d);
        for i in 0..3 {
            for p in 0..5 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += c.get(i, j) * d.get(p, j);
                }
                assert!((got.get(i, p) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_into_accumulates_on_seeded_rows() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]);
        let mut out = Matrix::from_rows(&[vec![10.0]]);
        a.matmul_into(&b, &mut out);
        assert_eq!(out.get(0, 0), 10.0 + 11.0);
    }

    #[test]
    fn from_rows_round_trips_accessors() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.get(1, 2), 6.0);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
    }
}
