//! Infinite-repulsion (Tonks-Girardeau) reference built from the two lowest
//! one-particle resonance orbitals:
//!
//! `χ(x₁,x₂) = sgn(x₂−x₁)·[φ₀(x₁)φ₁(x₂) − φ₁(x₁)φ₀(x₂)]/√2`.
//!
//! The state is projected onto the oscillator product basis so its spectrum
//! is directly comparable with finite-g results.

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{CsmError, Result};
use crate::hermite::{gauss_legendre, ho_values_into, BasisSpec};
use crate::schmidt::{analyze, CoefficientMatrix, CorrelationAnalysis};
use crate::spectral::{c_dot, refine_eigenpair, ResonanceCriteria, ResonanceState};
use crate::workflow::OneParticleScan;

/// Trace defect before renormalization above which the projection is
/// considered under-resolved.
pub const MAX_TRACE_DEFECT: f64 = 1e-3;

/// c-normalized one-particle resonance orbital in the oscillator basis.
#[derive(Debug, Clone)]
pub struct ResonanceOrbital {
    pub coeffs: Array1<Complex64>,
    pub value: Complex64,
}

impl ResonanceOrbital {
    pub fn from_state(state: &ResonanceState) -> Self {
        Self {
            coeffs: state.eigenpair.right.clone(),
            value: state.eigenpair.value,
        }
    }

    fn sample(&self, psi: &[f64]) -> Complex64 {
        self.coeffs.iter().zip(psi).map(|(c, p)| c * p).sum()
    }
}

/// `W_TG = W₀ + W₁`.
pub fn tg_position(w0: Complex64, w1: Complex64) -> Complex64 {
    w0 + w1
}

/// Outer Gauss-Legendre grid on `[−L, L]`; every gap between outer nodes is
/// integrated with `sub_nodes` points to build the cumulative integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgGrid {
    pub half_width: f64,
    pub nodes: usize,
    pub sub_nodes: usize,
}

impl Default for TgGrid {
    fn default() -> Self {
        Self {
            half_width: 12.0,
            nodes: 600,
            sub_nodes: 8,
        }
    }
}

impl TgGrid {
    /// Window reaching past the outermost classical turning point `√(2n+1)`,
    /// at the default node density.
    pub fn for_basis(n_orbitals: usize) -> Self {
        let d = Self::default();
        let half_width = d.half_width.max(((2 * n_orbitals + 1) as f64).sqrt() + 3.0).ceil();
        Self {
            half_width,
            nodes: (d.nodes as f64 * half_width / d.half_width).ceil() as usize,
            ..d
        }
    }
}

#[derive(Debug, Clone)]
pub struct TgProjection {
    /// Symmetrized and renormalized to unit bilinear trace.
    pub matrix: CoefficientMatrix,
    /// `|Σ Eᵢⱼ² − 1|` before renormalization.
    pub trace_defect: f64,
    /// `max |E − Eᵀ|` of the raw projection.
    pub symmetry_defect: f64,
}

/// Sampled quantities on the outer grid.
struct GridSamples {
    weights: Vec<f64>,
    // psi[(i, k)] = ψᵢ(x_k)
    psi: Array2<f64>,
    phi: [Vec<Complex64>; 2],
    // cumulative[a][(i, k)] = ∫_{−L}^{x_k} ψᵢφₐ; totals[a][i] over [−L, L]
    cumulative: [Array2<Complex64>; 2],
    totals: [Vec<Complex64>; 2],
}

fn sample_grid(phi0: &ResonanceOrbital, phi1: &ResonanceOrbital, n: usize, grid: &TgGrid) -> Result<GridSamples> {
    if grid.nodes < 2 || grid.sub_nodes < 1 || !(grid.half_width > 0.0) {
        return Err(CsmError::Config(format!("invalid TG grid {grid:?}")));
    }
    let l = grid.half_width;
    let outer = gauss_legendre(grid.nodes, -l, l)?;
    let unit = gauss_legendre(grid.sub_nodes, 0.0, 1.0)?;
    let k_len = outer.len();
    let mut psi = Array2::zeros((n, k_len));
    let mut phi = [vec![Complex64::default(); k_len], vec![Complex64::default(); k_len]];
    let mut column = vec![0.0; n];
    for (k, &x) in outer.nodes.iter().enumerate() {
        ho_values_into(x, &mut column);
        for i in 0..n {
            psi[(i, k)] = column[i];
        }
        phi[0][k] = phi0.sample(&column);
        phi[1][k] = phi1.sample(&column);
    }

    let mut cumulative = [Array2::zeros((n, k_len)), Array2::zeros((n, k_len))];
    let mut running = [vec![Complex64::default(); n], vec![Complex64::default(); n]];
    let mut left = -l;
    for k in 0..=k_len {
        let right = if k < k_len { outer.nodes[k] } else { l };
        let width = right - left;
        for (&u, &w) in unit.nodes.iter().zip(&unit.weights) {
            let x = left + u * width;
            ho_values_into(x, &mut column);
            let f = [phi0.sample(&column), phi1.sample(&column)];
            for a in 0..2 {
                let fw = f[a] * (w * width);
                for i in 0..n {
                    running[a][i] += fw * column[i];
                }
            }
        }
        if k < k_len {
            for a in 0..2 {
                for i in 0..n {
                    cumulative[a][(i, k)] = running[a][i];
                }
            }
        }
        left = right;
    }
    Ok(GridSamples {
        weights: outer.weights,
        psi,
        phi,
        cumulative,
        totals: running,
    })
}

/// Raw projection `Eᵢⱼ = ∬ψᵢ(x₁)ψⱼ(x₂)χ(x₁,x₂)`; with `signed = false` the
/// sgn factor is dropped, leaving the antisymmetric determinant state.
fn project(phi0: &ResonanceOrbital, phi1: &ResonanceOrbital, n: usize, grid: &TgGrid, signed: bool) -> Result<Array2<Complex64>> {
    let s = sample_grid(phi0, phi1, n, grid)?;
    let k_len = s.weights.len();
    // inner[a][(i, k)]: the x₁ integral of ψᵢφₐ against the kernel at x₂ = x_k
    let inner: Vec<Array2<Complex64>> = (0..2)
        .map(|a| {
            Array2::from_shape_fn((n, k_len), |(i, k)| {
                if signed {
                    2.0 * s.cumulative[a][(i, k)] - s.totals[a][i]
                } else {
                    s.totals[a][i]
                }
            })
        })
        .collect();
    // outer[a][(j, k)] = w_k ψⱼ(x_k) φₐ(x_k)
    let outer: Vec<Array2<Complex64>> = (0..2)
        .map(|a| Array2::from_shape_fn((n, k_len), |(j, k)| s.phi[a][k] * (s.weights[k] * s.psi[(j, k)])))
        .collect();
    let e = (inner[0].dot(&outer[1].t()) - inner[1].dot(&outer[0].t())) * FRAC_1_SQRT_2;
    Ok(e)
}

fn check_pair(phi0: &ResonanceOrbital, phi1: &ResonanceOrbital, spec: &BasisSpec) -> Result<()> {
    let n = spec.n_orbitals();
    for phi in [phi0, phi1] {
        if phi.coeffs.len() != n {
            return Err(CsmError::DimensionMismatch {
                expected: n,
                found: phi.coeffs.len(),
            });
        }
    }
    let (a, b) = (phi0.coeffs.as_slice().unwrap(), phi1.coeffs.as_slice().unwrap());
    let defect = (c_dot(a, a) - 1.0)
        .norm()
        .max((c_dot(b, b) - 1.0).norm())
        .max(c_dot(a, b).norm());
    if defect > 1e-6 {
        return Err(CsmError::Normalization(defect));
    }
    Ok(())
}

/// Coefficient matrix of the TG state in the first `n_orbitals` oscillator
/// functions.
pub fn tg_coefficient_matrix(
    phi0: &ResonanceOrbital,
    phi1: &ResonanceOrbital,
    spec: &BasisSpec,
    grid: &TgGrid,
) -> Result<TgProjection> {
    check_pair(phi0, phi1, spec)?;
    let raw = project(phi0, phi1, spec.n_orbitals(), grid, true)?;
    let symmetry_defect = crate::operators::symmetry_defect(&raw);
    let sym = (&raw + &raw.t()) * 0.5;
    let trace: Complex64 = sym.iter().map(|z| z * z).sum();
    let trace_defect = (trace - 1.0).norm();
    if trace_defect > MAX_TRACE_DEFECT {
        return Err(CsmError::QuadratureResolution(trace_defect));
    }
    let scale = trace.sqrt();
    Ok(TgProjection {
        matrix: CoefficientMatrix::from_entries(sym.mapv(|z| z / scale))?,
        trace_defect,
        symmetry_defect,
    })
}

/// Projection of the bare determinant `[φ₀(x₁)φ₁(x₂) − φ₁(x₁)φ₀(x₂)]/√2`
/// (no sgn factor), an antisymmetric matrix.
pub fn determinant_coefficient_matrix(
    phi0: &ResonanceOrbital,
    phi1: &ResonanceOrbital,
    spec: &BasisSpec,
    grid: &TgGrid,
) -> Result<Array2<Complex64>> {
    check_pair(phi0, phi1, spec)?;
    project(phi0, phi1, spec.n_orbitals(), grid, false)
}

/// Settings for [`tg_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct TgConfig {
    pub thetas: Vec<f64>,
    /// Angle at which both orbitals are taken, so they are c-orthogonal
    /// eigenvectors of one operator.
    pub orbital_theta: f64,
    pub criteria: ResonanceCriteria,
    /// `None` picks [`TgGrid::for_basis`].
    pub grid: Option<TgGrid>,
}

impl Default for TgConfig {
    fn default() -> Self {
        Self {
            thetas: crate::spectral::theta_grid(0.1, 0.3, 0.01).expect("static grid"),
            orbital_theta: 0.2,
            criteria: ResonanceCriteria::default(),
            grid: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TgReference {
    pub w0: Complex64,
    pub w1: Complex64,
    pub position: Complex64,
    pub energy: f64,
    pub width: f64,
    pub projection: TgProjection,
    pub analysis: CorrelationAnalysis,
}

/// Locate `W₀`, `W₁` by a one-particle θ scan, build the TG state from the
/// corresponding orbitals and analyse its correlations.
pub fn tg_reference(spec: &BasisSpec, potential: crate::operators::PotentialKind, config: &TgConfig) -> Result<TgReference> {
    let scan = OneParticleScan::run(spec, potential, &config.thetas, &config.criteria)?;
    let (p0, p1) = match scan.resonances.as_slice() {
        [a, b, ..] => (*a, *b),
        _ => return Err(CsmError::NoResonance),
    };
    let op = crate::operators::build_one_particle(
        spec,
        &crate::operators::ModelParams::new(config.orbital_theta, 0.0, potential)?,
    )?;
    let orbital = |value: Complex64| -> Result<ResonanceOrbital> {
        let pair = refine_eigenpair(op.entries.view(), value)?;
        Ok(ResonanceOrbital {
            coeffs: pair.right,
            value: pair.value,
        })
    };
    let phi0 = orbital(p0.value)?;
    let phi1 = orbital(p1.value)?;
    if (phi0.value - phi1.value).norm() <= 1e-8 * phi0.value.norm() {
        return Err(CsmError::Eigensolver(
            "both resonances resolve to the same eigenpair at the orbital angle".into(),
        ));
    }
    let grid = config.grid.unwrap_or_else(|| TgGrid::for_basis(spec.n_orbitals()));
    let projection = tg_coefficient_matrix(&phi0, &phi1, spec, &grid)?;
    let analysis = analyze(projection.matrix.clone())?;
    let position = tg_position(p0.value, p1.value);
    Ok(TgReference {
        w0: p0.value,
        w1: p1.value,
        position,
        energy: position.re,
        width: -2.0 * position.im,
        projection,
        analysis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_one_particle, ModelParams, PotentialKind};
    use crate::schmidt::rdm_eigenvalues_direct;
    use crate::spectral::eigendecompose;

    fn harmonic_orbitals(n: usize) -> (BasisSpec, ResonanceOrbital, ResonanceOrbital) {
        let spec = BasisSpec::new(n, 2 * n + 10).unwrap();
        let op = build_one_particle(&spec, &ModelParams::new(0.0, 0.0, PotentialKind::Harmonic).unwrap())
            .unwrap();
        let pairs = eigendecompose(&op).unwrap();
        let take = |k: usize| ResonanceOrbital {
            coeffs: pairs[k].right.clone(),
            value: pairs[k].value,
        };
        (spec, take(0), take(1))
    }

    #[test]
    fn position_is_additive() {
        let w0 = Complex64::new(0.411, -0.0026);
        let w1 = Complex64::new(1.014, -0.125);
        let w = tg_position(w0, w1);
        assert_eq!(w, w0 + w1);
        assert!((w.re - 1.425).abs() < 1e-12);
        assert!((-2.0 * w.im - 0.2552).abs() < 1e-12);
        assert_eq!(tg_position(w0, Complex64::new(0.0, 0.0)), w0);
        assert!((tg_position(w0, w0).re - 0.822).abs() < 1e-12);
    }

    #[test]
    fn determinant_state_has_two_equal_occupancies() {
        let (spec, phi0, phi1) = harmonic_orbitals(12);
        let e = determinant_coefficient_matrix(&phi0, &phi1, &spec, &TgGrid::default()).unwrap();
        // antisymmetric: symmetric part vanishes
        let sym = (&e + &e.t()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(sym < 1e-10);
        let m = CoefficientMatrix::from_entries(e).unwrap();
        let lambda = rdm_eigenvalues_direct(&m).unwrap();
        assert!((lambda[0] - 0.5).norm() < 1e-9);
        assert!((lambda[1] - 0.5).norm() < 1e-9);
        assert!(lambda[2..].iter().all(|l| l.norm() < 1e-9));
    }

    #[test]
    fn harmonic_tg_state_is_symmetric_and_normalized() {
        let (spec, phi0, phi1) = harmonic_orbitals(40);
        let proj = tg_coefficient_matrix(&phi0, &phi1, &spec, &TgGrid::default()).unwrap();
        assert!(proj.symmetry_defect < 1e-9);
        assert!(proj.trace_defect < 1e-3);
        let a = analyze(proj.matrix).unwrap();
        assert!((a.spectrum.lambda_sum() - 1.0).norm() < 1e-6);
        // confined limit: real occupancies, real entropies
        assert!(a.spectrum.lambda.iter().all(|l| l.im.abs() < 1e-9));
        assert!(a.entropy.lin.im.abs() < 1e-9 && a.entropy.vn.im.abs() < 1e-9);
        assert!(a.entropy.lin.re > 0.0);
    }

    #[test]
    fn outer_grid_convergence() {
        let (spec, phi0, phi1) = harmonic_orbitals(30);
        let coarse = TgGrid::default();
        let fine = TgGrid {
            nodes: 2 * coarse.nodes,
            ..coarse
        };
        let a = tg_coefficient_matrix(&phi0, &phi1, &spec, &coarse).unwrap();
        let b = tg_coefficient_matrix(&phi0, &phi1, &spec, &fine).unwrap();
        let diff = a
            .matrix
            .entries
            .iter()
            .zip(b.matrix.entries.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-7, "{diff}");
    }

    #[test]
    fn grid_grows_with_basis() {
        assert_eq!(TgGrid::for_basis(20), TgGrid::default());
        let g = TgGrid::for_basis(90);
        assert!(g.half_width * g.half_width > 181.0);
        assert!(g.nodes > 600);
    }

    #[test]
    fn rejects_non_orthogonal_pair() {
        let (spec, phi0, _) = harmonic_orbitals(10);
        assert!(matches!(
            tg_coefficient_matrix(&phi0, &phi0, &spec, &TgGrid::default()),
            Err(CsmError::Normalization(_))
        ));
        let short = ResonanceOrbital {
            coeffs: Array1::zeros(3),
            value: Complex64::new(0.0, 0.0),
        };
        assert!(tg_coefficient_matrix(&phi0, &short, &spec, &TgGrid::default()).is_err());
    }
}
