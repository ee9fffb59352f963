//! Banded Cholesky factorisation for the symmetric positive-definite systems
//! produced by the five-point Laplacian.

/// Lower factor `L` of `M = L L^T` for a matrix of half-bandwidth `b`.
/// Row `i` stores columns `i - b ..= i` contiguously.
pub(crate) struct BandCholesky {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factorises the matrix whose lower band is filled in by `fill`. The
    /// callback receives `(row, row_slice)` where `row_slice[c]` holds
    /// column `row + c - b`. Returns `None` if the matrix is not positive
    /// definite.
    pub(crate) fn factor(n: usize, b: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Option<Self> {
        let w = b + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            fill(i, &mut data[i * w..(i + 1) * w]);
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let len = j - lo;
                let (head, tail) = data.split_at_mut(i * w);
                let row_i = &mut tail[..w];
                let oi = lo + b - i;
                let dot = if j == i {
                    row_i[oi..oi + len].iter().map(|v| v * v).sum::<f64>()
                } else {
                    let row_j = &head[j * w..(j + 1) * w];
                    let oj = lo + b - j;
                    row_i[oi..oi + len].iter().zip(&row_j[oj..oj + len]).map(|(a, c)| a * c).sum::<f64>()
                };
                let s = row_i[j + b - i] - dot;
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    row_i[b] = s.sqrt();
                } else {
                    row_i[j + b - i] = s / head[j * w + b];
                }
            }
        }
        Some(Self { n, b, data })
    }

    /// Solves `M x = rhs` in place.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = &self.data[i * w..(i + 1) * w];
            let s: f64 = row[lo + b - i..b].iter().zip(&x[lo..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) / row[b];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(b);
            let row = &self.data[i * w..(i + 1) * w];
            x[i] /= row[b];
            let xi = x[i];
            for (v, l) in x[lo..i].iter_mut().zip(&row[lo + b - i..b]) {
                *v -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense reference: tridiagonal-plus-band SPD matrix.
    fn entry(i: usize, j: usize, b: usize) -> f64 {
        if i == j {
            6.0 + i as f64 * 0.01
        } else if i.abs_diff(j) == 1 || i.abs_diff(j) == b {
            -1.0
        } else {
            0.0
        }
    }

    #[test]
    fn solves_banded_system() {
        let (n, b) = (40, 5);
        let chol = BandCholesky::factor(n, b, |i, row| {
            for (c, v) in row.iter_mut().enumerate() {
                let j = i as isize + c as isize - b as isize;
                if j >= 0 {
                    *v = entry(i, j as usize, b);
                }
            }
        })
        .unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| entry(i, j, b) * x_true[j]).sum()).collect();
        chol.solve_in_place(&mut rhs);
        for (a, e) in rhs.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let r = BandCholesky::factor(10, 2, |i, row| {
            row[2] = if i == 5 { -1.0 } else { 2.0 };
        });
        assert!(r.is_none());
    }
}
