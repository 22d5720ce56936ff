//! Small dense complex linear algebra: Hermitian eigendecomposition by
//! cyclic Jacobi rotations and the dominant singular pair built on it.
//!
//! Matrices here are antenna-panel sized (≤ 64×64), where Jacobi is
//! deterministic, accurate to near machine precision, and fast enough that
//! a general-purpose LAPACK binding would buy nothing.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::{Error, Result};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = Complex64;

/// Conjugated dot product Σᵢ conj(a[i])·b[i].
pub fn cdot(a: &ArrayView1<C64>, b: &ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Frobenius norm.
pub fn frobenius_norm_sq(h: &ArrayView2<C64>) -> f64 {
    h.iter().map(|x| x.norm_sqr()).sum()
}

/// Sum of squared magnitudes of the strict off-diagonal part.
fn off_diagonal_sq(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[(p, q)].norm_sqr();
            }
        }
    }
    s
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues sorted descending with the matching
/// orthonormal eigenvectors as columns: `a ≈ V · diag(λ) · V^H`.
pub fn hermitian_eig(a: &ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Beamforming(format!(
            "eigendecomposition needs a square matrix, got {}×{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Beamforming("non-finite matrix entry".into()));
    }
    let mut m = a.to_owned();
    let mut v = Array2::<C64>::eye(n);
    if n <= 1 {
        let evs = if n == 1 { vec![m[(0, 0)].re] } else { vec![] };
        return Ok((evs, v));
    }
    let norm_sq = frobenius_norm_sq(&m.view());
    let tol = 1e-30 * norm_sq.max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        if off_diagonal_sq(&m) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm_sqr() <= tol / (n * n) as f64 {
                    continue;
                }
                let phi = apq.arg();
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                let tau = (beta - alpha) / (2.0 * apq.norm());
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let eminus = C64::from_polar(1.0, -phi);
                let eplus = C64::from_polar(1.0, phi);
                // Column update (A ← A·J), J = [[c, s], [−s·e^{−iφ}, c·e^{−iφ}]]
                // on the (p,q) plane.
                for r in 0..n {
                    let arp = m[(r, p)];
                    let arq = m[(r, q)];
                    m[(r, p)] = arp * c - arq * s * eminus;
                    m[(r, q)] = arp * s + arq * c * eminus;
                }
                // Row update (A ← J^H·A) with conjugated coefficients.
                for r in 0..n {
                    let apr = m[(p, r)];
                    let aqr = m[(q, r)];
                    m[(p, r)] = apr * c - aqr * s * eplus;
                    m[(q, r)] = apr * s + aqr * c * eplus;
                }
                // Numerical hygiene: the plane is now exactly decoupled and
                // the diagonal real.
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * c - vrq * s * eminus;
                    v[(r, q)] = vrp * s + vrq * c * eminus;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok((eigenvalues, vectors))
}

/// Dominant singular pair of a complex matrix.
#[derive(Debug, Clone)]
pub struct DominantSvd {
    /// Largest singular value.
    pub sigma1: f64,
    /// Second-largest singular value (0 for a single-row/column matrix).
    pub sigma2: f64,
    /// Left singular vector (unit norm, length = row count).
    pub u: Array1<C64>,
    /// Right singular vector (unit norm, length = column count).
    pub v: Array1<C64>,
}

/// Rotate a vector's global phase so its largest-magnitude entry is real
/// positive (ties broken toward the lowest index). Pins the phase
/// ambiguity of eigen/singular vectors for bit-reproducible outputs.
pub fn fix_phase(vec: &mut Array1<C64>) {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, x) in vec.iter().enumerate() {
        let m = x.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let rot = C64::from_polar(1.0, -vec[best].arg());
    vec.mapv_inplace(|x| x * rot);
}

fn normalized(mut vec: Array1<C64>) -> Array1<C64> {
    let norm = vec.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        vec.mapv_inplace(|x| x / norm);
    }
    vec
}

/// Compute the dominant singular triple (σ₁, u, v) of `h`, plus σ₂, via an
/// eigendecomposition of the Gram matrix on the smaller side. Both vectors
/// get the [`fix_phase`] convention independently, so `u^H·h·v` has
/// magnitude σ₁ but arbitrary phase.
pub fn dominant_svd(h: &ArrayView2<C64>) -> Result<DominantSvd> {
    let (rows, cols) = (h.nrows(), h.ncols());
    if rows == 0 || cols == 0 {
        return Err(Error::Beamforming("dominant SVD of an empty matrix".into()));
    }
    if frobenius_norm_sq(h) <= 0.0 {
        return Err(Error::Beamforming("dominant SVD of a zero matrix".into()));
    }
    let hc = h.mapv(|x| x.conj());
    let (evals, evecs, u_side) = if rows <= cols {
        // G = H·H^H  (rows × rows)
        let g = h.dot(&hc.t());
        let (e, v) = hermitian_eig(&g.view())?;
        (e, v, true)
    } else {
        // G = H^H·H  (cols × cols)
        let g = hc.t().dot(h);
        let (e, v) = hermitian_eig(&g.view())?;
        (e, v, false)
    };
    let sigma1 = evals[0].max(0.0).sqrt();
    if sigma1 <= 0.0 {
        return Err(Error::Beamforming("dominant SVD of a zero matrix".into()));
    }
    let (mut u, mut v) = if u_side {
        let u = evecs.column(0).to_owned();
        // hc.t() = conj(H)ᵀ = H^H, so this is v = H^H·u normalized.
        let v = normalized(hc.t().dot(&u));
        (u, v)
    } else {
        let v = evecs.column(0).to_owned();
        let u = normalized(h.dot(&v));
        (u, v)
    };
    // σ₂ by deflation: the Gram eigenvalue λ₂ has an absolute error floor of
    // ~eps·σ₁², which would inflate a true σ₂ of 0 to ~√eps·σ₁. Subtracting
    // the (very accurate) dominant pair first and measuring the residual's
    // top singular value keeps tiny σ₂ tiny.
    let sigma2 = if rows.min(cols) > 1 {
        let c = cdot(&u.view(), &h.dot(&v).view());
        let mut resid = h.to_owned();
        for r in 0..rows {
            for col in 0..cols {
                resid[(r, col)] -= u[r] * c * v[col].conj();
            }
        }
        if frobenius_norm_sq(&resid.view()) <= 0.0 {
            0.0
        } else {
            let rc = resid.mapv(|x| x.conj());
            let g = if rows <= cols { resid.dot(&rc.t()) } else { rc.t().dot(&resid) };
            let (re, _) = hermitian_eig(&g.view())?;
            re[0].max(0.0).sqrt()
        }
    } else {
        0.0
    };
    fix_phase(&mut u);
    fix_phase(&mut v);
    Ok(DominantSvd { sigma1, sigma2, u, v })
}
