//! Schmidt form of two-boson resonance states under the bilinear product.
//!
//! A state `Σ_{i≥j} rᵢⱼφᵢⱼ` is rewritten as `Σᵢⱼ eᵢⱼψᵢ(x₁)ψⱼ(x₂)` with a
//! complex-symmetric `e`. Its complex-orthogonal decomposition
//! `e = V·diag(d)·Vᵀ` gives natural orbitals (columns of `V`) and
//! occupancies `λₙ = dₙ²`, which are also the eigenvalues of the reduced
//! density matrix `ρ = e·e`.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{CsmError, Result};
use crate::hessenberg::qr_eigenvalues;
use crate::operators::PairBasis;
use crate::spectral::{c_dot, eigendecompose_matrix};

/// Normalization defect above which an eigenvector is rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Default `|λ|` cutoff for terms entering the von Neumann entropy.
pub const DEFAULT_ENTROPY_CUTOFF: f64 = 1e-12;

/// Occupancies below this are dropped from reports.
pub const REPORT_CUTOFF: f64 = 1e-10;

/// Occupancies smaller than this never raise the branch-cut flag; their
/// entropy contribution is below `1e-6`.
pub const BRANCH_SIGNIFICANCE: f64 = 1e-8;

/// Symmetric one-particle coefficient matrix of a two-boson state.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub entries: Array2<Complex64>,
}

impl CoefficientMatrix {
    /// Wrap a matrix that is already symmetric and c-normalized.
    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(CsmError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `Σᵢⱼ eᵢⱼ²`, which is 1 for a c-normalized state.
    pub fn bilinear_trace(&self) -> Complex64 {
        self.entries.iter().map(|z| z * z).sum()
    }

    pub fn symmetry_defect(&self) -> f64 {
        crate::operators::symmetry_defect(&self.entries)
    }

    /// `ρ_A = e·eᵀ`.
    pub fn reduced_density(&self) -> Array2<Complex64> {
        self.entries.dot(&self.entries.t())
    }

    /// `ρ_B = eᵀ·e`.
    pub fn reduced_density_b(&self) -> Array2<Complex64> {
        self.entries.t().dot(&self.entries)
    }
}

/// Map a permanent-basis eigenvector onto `e`: `eᵢᵢ = rᵢᵢ`,
/// `eᵢⱼ = eⱼᵢ = 2^{-1/2}rᵢⱼ`.
pub fn coefficient_matrix(eigvec: &[Complex64], basis: &PairBasis) -> Result<CoefficientMatrix> {
    if eigvec.len() != basis.dim() {
        return Err(CsmError::DimensionMismatch {
            expected: basis.dim(),
            found: eigvec.len(),
        });
    }
    let defect = (c_dot(eigvec, eigvec) - Complex64::new(1.0, 0.0)).norm();
    if defect > NORMALIZATION_TOLERANCE {
        return Err(CsmError::Normalization(defect));
    }
    let n = basis.n_orbitals();
    let mut e = Array2::zeros((n, n));
    for (&(i, j), &r) in basis.pairs().iter().zip(eigvec) {
        if i == j {
            e[(i, i)] = r;
        } else {
            let v = r * std::f64::consts::FRAC_1_SQRT_2;
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    Ok(CoefficientMatrix { entries: e })
}

/// Schmidt coefficients, occupancies and natural orbitals.
#[derive(Debug, Clone)]
pub struct EntanglementSpectrum {
    pub d: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    /// Columns are natural-orbital coefficients in the oscillator basis.
    pub orbitals: Array2<Complex64>,
    /// `max |e − V·diag(d)·Vᵀ|`.
    pub recon_defect: f64,
    /// `max |VᵀV − I|`.
    pub orthogonality_defect: f64,
    pub reliable: bool,
}

impl EntanglementSpectrum {
    /// Leading occupancies with `|λ| > REPORT_CUTOFF`.
    pub fn reported(&self) -> Vec<Complex64> {
        self.lambda
            .iter()
            .copied()
            .filter(|l| l.norm() > REPORT_CUTOFF)
            .collect()
    }

    pub fn lambda_sum(&self) -> Complex64 {
        self.lambda.iter().sum()
    }
}

/// Complex-orthogonal decomposition `e = V·diag(d)·Vᵀ`, sorted by `|λ|`
/// descending.
pub fn takagi_symmetric(e: &CoefficientMatrix) -> Result<EntanglementSpectrum> {
    let n = e.dim();
    let pairs = eigendecompose_matrix(e.entries.view())?;
    let mut reliable = pairs.iter().all(|p| p.reliable);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pairs[b].value.norm().total_cmp(&pairs[a].value.norm()));

    let d: Vec<Complex64> = order.iter().map(|&k| pairs[k].value).collect();
    let mut cols: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&k| pairs[k].right.to_vec())
        .collect();
    // accurate dominant vectors first; small-|d| vectors absorb the
    // rounding of their near-degenerate neighbours
    for k in 0..n {
        let (done, rest) = cols.split_at_mut(k);
        let v = &mut rest[0];
        for a in done.iter() {
            let p = c_dot(a, v);
            v.iter_mut().zip(a).for_each(|(x, y)| *x -= p * y);
        }
        let cn = c_dot(v, v);
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 || cn.norm() / norm2 < crate::spectral::SELF_ORTHOGONAL_THRESHOLD {
            reliable = false;
            continue;
        }
        let s = cn.sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    }
    let orbitals = Array2::from_shape_fn((n, n), |(i, k)| cols[k][i]);

    let mut recon = Array2::<Complex64>::zeros((n, n));
    for (k, dk) in d.iter().enumerate() {
        for i in 0..n {
            let vi = dk * orbitals[(i, k)];
            for j in 0..n {
                recon[(i, j)] += vi * orbitals[(j, k)];
            }
        }
    }
    let recon_defect = recon
        .iter()
        .zip(e.entries.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let gram = orbitals.t().dot(&orbitals);
    let orthogonality_defect = gram
        .indexed_iter()
        .map(|((i, j), z)| (z - if i == j { 1.0 } else { 0.0 }).norm())
        .fold(0.0, f64::max);

    Ok(EntanglementSpectrum {
        lambda: d.iter().map(|z| z * z).collect(),
        d,
        orbitals,
        recon_defect,
        orthogonality_defect,
        reliable,
    })
}

/// Eigenvalues of `ρ = e·eᵀ` by the Hessenberg-QR route, independent of
/// [`takagi_symmetric`]. Sorted by `|λ|` descending.
pub fn rdm_eigenvalues_direct(e: &CoefficientMatrix) -> Result<Vec<Complex64>> {
    let mut lambda = qr_eigenvalues(e.reduced_density().view())?;
    lambda.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(lambda)
}

/// Largest distance between two equally sized multisets after greedy
/// nearest matching (largest-modulus entries first).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&x, &y| a[y].norm().total_cmp(&a[x].norm()));
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for i in order {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, z)| (j, (z - a[i]).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Complex von Neumann and linear entropies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEntropy {
    pub vn: Complex64,
    pub lin: Complex64,
    /// Some retained `λ` sits on the logarithm's branch cut.
    pub branch_ambiguous: bool,
}

/// `S = −Σλ ln λ` over `|λ| > cutoff` (principal branch) and
/// `S_lin = 1 − Σλ²` over all terms.
pub fn complex_entropies(lambda: &[Complex64], cutoff: f64) -> ComplexEntropy {
    let mut vn = Complex64::new(0.0, 0.0);
    let mut branch_ambiguous = false;
    for &l in lambda {
        if l.norm() <= cutoff {
            continue;
        }
        if l.re < 0.0 && l.im.abs() <= 1e-12 && l.norm() > BRANCH_SIGNIFICANCE {
            branch_ambiguous = true;
        }
        vn -= l * l.ln();
    }
    let lin = Complex64::new(1.0, 0.0) - lambda.iter().map(|l| l * l).sum::<Complex64>();
    ComplexEntropy {
        vn,
        lin,
        branch_ambiguous,
    }
}

/// `⟪Q⟫ = tr(ρ·Q)`.
pub fn mean_value(rho: ArrayView2<'_, Complex64>, q: ArrayView2<'_, Complex64>) -> Result<Complex64> {
    let n = rho.nrows();
    if rho.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(CsmError::DimensionMismatch {
            expected: n,
            found: if rho.ncols() != n { rho.ncols() } else { q.nrows().max(q.ncols()) },
        });
    }
    Ok((0..n)
        .map(|i| (0..n).map(|k| rho[(i, k)] * q[(k, i)]).sum::<Complex64>())
        .sum())
}

/// Everything derived from one coefficient matrix.
#[derive(Debug, Clone)]
pub struct CorrelationAnalysis {
    pub coefficients: CoefficientMatrix,
    pub spectrum: EntanglementSpectrum,
    pub entropy: ComplexEntropy,
    /// Largest mismatch between Takagi occupancies and the direct
    /// reduced-density eigenvalues.
    pub path_defect: f64,
}

pub fn analyze(coefficients: CoefficientMatrix) -> Result<CorrelationAnalysis> {
    let spectrum = takagi_symmetric(&coefficients)?;
    let direct = rdm_eigenvalues_direct(&coefficients)?;
    let path_defect = multiset_distance(&spectrum.lambda, &direct);
    let entropy = complex_entropies(&spectrum.lambda, DEFAULT_ENTROPY_CUTOFF);
    Ok(CorrelationAnalysis {
        coefficients,
        spectrum,
        entropy,
        path_defect,
    })
}

/// `ρ` expressed in the natural-orbital basis, `Vᵀ·ρ·V`.
pub fn density_in_natural_basis(e: &CoefficientMatrix, spectrum: &EntanglementSpectrum) -> Array2<Complex64> {
    let rho = e.reduced_density();
    spectrum.orbitals.t().dot(&rho).dot(&spectrum.orbitals)
}

/// Column `k` of the natural-orbital matrix.
pub fn natural_orbital(spectrum: &EntanglementSpectrum, k: usize) -> Array1<Complex64> {
    spectrum.orbitals.column(k).to_owned()
}
