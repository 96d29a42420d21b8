//! Strided matrix multiply backed by `matrixmultiply`.

/// A read-only matrix view: `rows × cols` with explicit element strides.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    pub fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn max_offset(&self) -> isize {
        if self.rows == 0 || self.cols == 0 {
            return -1;
        }
        (self.rows as isize - 1) * self.rs + (self.cols as isize - 1) * self.cs
    }
}

/// `c = a · b + beta · c` with `c` row-major `a.rows × b.cols` and row
/// stride `ldc`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64], ldc: usize) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.rs >= 0 && a.cs >= 0 && b.rs >= 0 && b.cs >= 0);
    assert!(a.max_offset() < a.data.len() as isize);
    assert!(b.max_offset() < b.data.len() as isize);
    assert!(ldc >= n && (m - 1) * ldc + n <= c.len());
    if k == 0 {
        c.chunks_mut(ldc).take(m).for_each(|r| r[..n].iter_mut().for_each(|x| *x *= beta));
        return;
    }
    // SAFETY: bounds of all three operands were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_naive_including_transposes() {
        let (m, k, n) = (5, 3, 4);
        let a: Vec<f64> = (0..m * k).map(|x| (x as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|x| (x as f64 * 0.11).cos()).collect();
        let want = naive(&a, &b, m, k, n);
        let mut c = vec![0.0; m * n];
        gemm(View::row_major(&a, m, k), View::row_major(&b, k, n), 0.0, &mut c, n);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-14);
        }
        // (b^T a^T)^T = a b
        let mut ct = vec![0.0; n * m];
        gemm(View::row_major(&b, k, n).t(), View::row_major(&a, m, k).t(), 0.0, &mut ct, m);
        for i in 0..m {
            for j in 0..n {
                assert!((ct[j * m + i] - want[i * n + j]).abs() < 1e-14);
            }
        }
    }
}
