//! Thin safe wrappers over the LAPACK eigensolvers.

use std::os::raw::c_char;

use num_complex::Complex64;

use crate::{Error, Result};

/// Eigen-decomposition of the real symmetric `n x n` matrix stored in `a` (either layout;
/// only the lower triangle in column-major order is read). Returns ascending eigenvalues.
/// With `vectors`, `a` is overwritten by the orthonormal eigenvectors as columns in
/// column-major order (eigenvector i is `a[i*n..(i+1)*n]`).
pub(crate) fn symmetric_eigen(n: usize, a: &mut [f64], vectors: bool) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    let mut w = vec![0.0; n];
    if n == 0 {
        return Ok(w);
    }
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = n as i32;
    let mut info = 0;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    // SAFETY: all pointers reference live buffers of the sizes LAPACK expects; the first
    // call is a workspace query (lwork = liwork = -1) that writes one element to each.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &-1,
            iwork_query.as_mut_ptr(),
            &-1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevd",
            info,
        });
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    // SAFETY: buffers sized from the workspace query above.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            a.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dsyevd",
            info,
        });
    }
    Ok(w)
}

/// Eigenvalues and right eigenvectors of a general complex `n x n` matrix given in
/// column-major order. Eigenvector i is `vectors[i*n..(i+1)*n]`, normalized to unit length.
pub(crate) fn general_eigen(
    n: usize,
    a: &mut [Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut vr = vec![Complex64::new(0.0, 0.0); n * n];
    if n == 0 {
        return Ok((w, vr));
    }
    let (jobvl, jobvr) = (b'N' as c_char, b'V' as c_char);
    let nn = n as i32;
    let mut info = 0;
    let mut rwork = vec![0.0f64; 2 * n];
    let mut dummy = [Complex64::new(0.0, 0.0)];
    let mut query = [Complex64::new(0.0, 0.0)];
    // SAFETY: Complex64 is repr(C) { re, im }, layout-identical to LAPACK's complex double.
    // Buffers have the sizes zgeev expects; the first call is a workspace query.
    unsafe {
        lapack_sys::zgeev_(
            &jobvl,
            &jobvr,
            &nn,
            a.as_mut_ptr().cast(),
            &nn,
            w.as_mut_ptr().cast(),
            dummy.as_mut_ptr().cast(),
            &1,
            vr.as_mut_ptr().cast(),
            &nn,
            query.as_mut_ptr().cast(),
            &-1,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgeev",
            info,
        });
    }
    let lwork = (query[0].re as i32).max(1);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    // SAFETY: as above, with the queried workspace size.
    unsafe {
        lapack_sys::zgeev_(
            &jobvl,
            &jobvr,
            &nn,
            a.as_mut_ptr().cast(),
            &nn,
            w.as_mut_ptr().cast(),
            dummy.as_mut_ptr().cast(),
            &1,
            vr.as_mut_ptr().cast(),
            &nn,
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgeev",
            info,
        });
    }
    Ok((w, vr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_eigenvalues() {
        // [[0, -1], [1, 0]] has eigenvalues +-i.
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut a = vec![z, one, -one, z];
        let (w, v) = general_eigen(2, &mut a).unwrap();
        let mut im: Vec<f64> = w.iter().map(|c| c.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 1.0).abs() < 1e-14 && (im[1] - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|c| c.re.abs() < 1e-14));
        let norm: f64 = v[..2].iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_x() {
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        let w = symmetric_eigen(2, &mut a, true).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        let v0 = &a[0..2];
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }

    #[test]
    fn reconstruction() {
        let n = 6;
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 3) % 5) as f64 - 2.0;
                h[i * n + j] = v;
                h[j * n + i] = v;
            }
        }
        let mut v = h.clone();
        let w = symmetric_eigen(n, &mut v, true).unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| v[k * n + i] * w[k] * v[k * n + j]).sum();
                assert!((r - h[i * n + j]).abs() < 1e-12);
            }
        }
        let mut plain = h.clone();
        let w2 = symmetric_eigen(n, &mut plain, false).unwrap();
        assert!(w.iter().zip(&w2).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
