//! Eigenvalues of small dense complex matrices by Householder reduction to
//! upper Hessenberg form followed by single-shift QR with Wilkinson shifts.
//!
//! Kept separate from the faer-backed solver in [`crate::spectral`] so that
//! reduced-density spectra can be cross-checked along a second route.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{CsmError, Result};

/// Reduce `a` in place to upper Hessenberg form by unitary similarity.
pub fn reduce_to_hessenberg(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);

        // A ← (I − 2vvᴴ)A on rows k+1.., columns k..
        for j in k..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(r, vr)| vr.conj() * a[(k + 1 + r, j)])
                .sum();
            for (r, vr) in v.iter().enumerate() {
                a[(k + 1 + r, j)] -= 2.0 * vr * s;
            }
        }
        // A ← A(I − 2vvᴴ) on all rows, columns k+1..
        for i in 0..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(c, vc)| a[(i, k + 1 + c)] * vc)
                .sum();
            for (c, vc) in v.iter().enumerate() {
                a[(i, k + 1 + c)] -= 2.0 * s * vc.conj();
            }
        }
        for i in k + 2..n {
            a[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

// rotation [[c, s], [−s̄, c]] with c real mapping (a, b) to (r, 0)
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let r = an.hypot(b.norm());
    if r == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    (an / r, (a / an) * b.conj() / r)
}

// eigenvalue of the trailing 2×2 block closer to its last diagonal entry
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All eigenvalues of `m`, in no particular order.
pub fn qr_eigenvalues(m: ArrayView2<'_, Complex64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(CsmError::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let mut h = m.to_owned();
    reduce_to_hessenberg(&mut h);
    let norm = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut iter_since_deflation = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n.max(1);
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // look for a negligible subdiagonal in the active window
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if scale == 0.0 {
                scale = norm;
            }
            if sub <= f64::EPSILON * scale || sub <= f64::MIN_POSITIVE {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        total += 1;
        iter_since_deflation += 1;
        if total > max_total {
            return Err(CsmError::Eigensolver("QR iteration did not converge".into()));
        }
        let mu = if iter_since_deflation % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75, 0.3) * h[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c * x + s * y;
                h[(k + 1, j)] = -s.conj() * x + c * y;
            }
            rotations.push((c, s));
        }
        for (off, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + off;
            for i in lo..=(k + 2).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = c * x + s.conj() * y;
                h[(i, k + 1)] = -s * x + c * y;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(eig)
}
