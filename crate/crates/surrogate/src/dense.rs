//! Column-major matrix products with free transposition.

use nalgebra::DMatrix;

/// `c = alpha * op(a) * op(b) + beta * c`, where `op` optionally transposes.
pub fn gemm(alpha: f64, a: &DMatrix<f64>, ta: bool, b: &DMatrix<f64>, tb: bool, beta: f64, c: &mut DMatrix<f64>) {
    let (m, k) = if ta { (a.ncols(), a.nrows()) } else { (a.nrows(), a.ncols()) };
    let (kb, n) = if tb { (b.ncols(), b.nrows()) } else { (b.nrows(), b.ncols()) };
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "output shape differs");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (a.nrows() as isize, 1) } else { (1, a.nrows() as isize) };
    let (rsb, csb) = if tb { (b.nrows() as isize, 1) } else { (1, b.nrows() as isize) };
    let ldc = c.nrows() as isize;
    // SAFETY: strides and dimensions describe the column-major storage of
    // a, b and c exactly; c does not alias a or b.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            1,
            ldc,
        );
    }
}

pub fn matmul(a: &DMatrix<f64>, ta: bool, b: &DMatrix<f64>, tb: bool) -> DMatrix<f64> {
    let m = if ta { a.ncols() } else { a.nrows() };
    let n = if tb { b.nrows() } else { b.ncols() };
    let mut c = DMatrix::zeros(m, n);
    gemm(1.0, a, ta, b, tb, 0.0, &mut c);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_products_match_nalgebra() {
        let a = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let b = DMatrix::from_fn(4, 2, |i, j| (i + 3 * j) as f64 * 0.5);
        assert_eq!(matmul(&a, false, &b, false), &a * &b);
        let at = a.transpose();
        let bt = b.transpose();
        assert_eq!(matmul(&at, true, &b, false), &a * &b);
        assert_eq!(matmul(&a, false, &bt, true), &a * &b);
        assert_eq!(matmul(&at, true, &bt, true), &a * &b);
    }
}
