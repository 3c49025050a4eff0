//! Thin wrappers over LAPACK for the dense kernels used throughout the crate.

use ndarray::{s, Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Singular value decomposition `a = u · diag(s) · vt`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vt: Array2<C64>,
}

fn svd_with(a: ArrayView2<C64>, job: JobSvd) -> Result<Svd> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        let (ku, kv) = match job {
            JobSvd::All => (m, n),
            _ => (0, 0),
        };
        return Ok(Svd {
            u: Array2::<f64>::eye(ku).mapv(C64::from),
            s: Array1::zeros(0),
            vt: Array2::<f64>::eye(kv).mapv(C64::from),
        });
    }
    let owned = a.as_standard_layout().into_owned();
    let (u, s, vt) = owned.svddc(job)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no Vt".into()))?;
    Ok(Svd { u, s, vt })
}

/// Economy SVD: `u` is m×k, `vt` is k×n with k = min(m, n).
pub fn svd(a: ArrayView2<C64>) -> Result<Svd> {
    svd_with(a, JobSvd::Some)
}

/// Full SVD: `u` is m×m and `vt` is n×n.
pub fn svd_full(a: ArrayView2<C64>) -> Result<Svd> {
    svd_with(a, JobSvd::All)
}

pub fn singular_values(a: ArrayView2<C64>) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(Array1::zeros(0));
    }
    let owned = a.as_standard_layout().into_owned();
    let (_, s, _) = owned.svddc(JobSvd::None)?;
    Ok(s)
}

/// Eigenvalues (ascending) of a Hermitian matrix; only the lower triangle is read.
pub fn eigvalsh(a: ArrayView2<C64>) -> Result<Vec<f64>> {
    heevd(a, false).map(|(w, _)| w)
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn eigh(a: ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    heevd(a, true).map(|(w, v)| (w, v.expect("vectors requested")))
}

fn heevd(a: ArrayView2<C64>, vectors: bool) -> Result<(Vec<f64>, Option<Array2<C64>>)> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::ShapeMismatch(format!("eigensolve of non-square {n}x{m} matrix")));
    }
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| Array2::zeros((0, 0)))));
    }
    // LAPACK wants column-major storage.
    let mut f = Array2::<C64>::zeros((n, n).f());
    f.assign(&a);
    let jobz = if vectors { b'V' } else { b'N' } as std::os::raw::c_char;
    let uplo = b'L' as std::os::raw::c_char;
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;

    let mut work = vec![ZERO; 1];
    let mut rwork = vec![0.0f64; 1];
    let mut iwork = vec![0i32; 1];
    let query = -1i32;
    let ptr = f.as_slice_memory_order_mut().expect("contiguous").as_mut_ptr();
    // SAFETY: workspace query; every pointer references a live buffer of the
    // advertised length.
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            ptr as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &query,
            rwork.as_mut_ptr(),
            &query,
            iwork.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zheevd workspace query failed: info={info}")));
    }
    let lwork = work[0].re.max(1.0) as i32;
    let lrwork = rwork[0].max(1.0) as i32;
    let liwork = iwork[0].max(1);
    let mut work = vec![ZERO; lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    // SAFETY: buffers sized by the workspace query above.
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &nn,
            ptr as *mut _,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zheevd failed: info={info}")));
    }
    Ok((w, vectors.then_some(f)))
}

pub fn adjoint(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: ArrayView2<C64>, b: ArrayView2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalize the rows of `a` in place with two passes of modified
/// Gram–Schmidt. Returns `false` if some row collapsed to (numerically) zero.
pub fn orthonormalize_rows(a: &mut Array2<C64>) -> bool {
    let rows = a.nrows();
    for i in 0..rows {
        for _pass in 0..2 {
            for j in 0..i {
                let (done, mut rest) = a.view_mut().split_at(ndarray::Axis(0), i);
                let prev = done.row(j);
                let mut cur = rest.row_mut(0);
                let overlap: C64 = prev.iter().zip(cur.iter()).map(|(p, c)| p.conj() * c).sum();
                cur.zip_mut_with(&prev, |c, p| *c -= overlap * p);
            }
        }
        let norm = a.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 1e-10 {
            return false;
        }
        a.row_mut(i).mapv_inplace(|z| z / norm);
    }
    true
}

/// `a · diag(w)` scaling of columns.
pub fn scale_columns(a: &mut Array2<C64>, w: &[f64]) {
    for (mut col, &x) in a.columns_mut().into_iter().zip(w) {
        col.mapv_inplace(|z| z * x);
    }
}

/// Reshape helper for row-major contiguous data.
pub fn to_matrix(data: Vec<C64>, rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_vec((rows, cols), data).expect("matrix shape matches data length")
}

/// Top-left `k` columns of `a`.
pub fn leading_columns(a: ArrayView2<C64>, k: usize) -> Array2<C64> {
    a.slice(s![.., ..k]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigh_recovers_diagonal_spectrum() {
        let a = array![[ONE * 2.0, C64::new(0.0, 1.0)], [C64::new(0.0, -1.0), ONE * 2.0]];
        let (w, v) = eigh(a.view()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12);
        let av = a.dot(&v);
        for k in 0..2 {
            for i in 0..2 {
                assert!((av[[i, k]] - v[[i, k]] * w[k]).norm() < 1e-12);
            }
        }
        assert_eq!(eigvalsh(a.view()).unwrap().len(), 2);
    }

    #[test]
    fn svd_of_empty_matrix() {
        let a = Array2::<C64>::zeros((0, 3));
        let f = svd_full(a.view()).unwrap();
        assert_eq!(f.vt.dim(), (3, 3));
        assert_eq!(singular_values(a.view()).unwrap().len(), 0);
    }

    #[test]
    fn gram_schmidt_produces_orthonormal_rows() {
        let mut a = array![[ONE, ONE, ZERO], [ONE, ZERO, ONE]];
        assert!(orthonormalize_rows(&mut a));
        let g = a.dot(&adjoint(a.view()));
        assert!(max_abs_diff(g.view(), Array2::<C64>::eye(2).view()) < 1e-14);
    }
}
