//! Complex-scaled one-particle and two-boson Hamiltonians in the oscillator
//! and permanent bases.
//!
//! Every matrix is assembled with the bilinear (c-) product: no complex
//! conjugation enters any element, so all operators are complex symmetric.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use ndarray::parallel::prelude::*;

use crate::error::{CsmError, Result};
use crate::hermite::{gauss_hermite, ho_table, BasisSpec, QuadratureRule};

/// External potential `v`, evaluated at a complex-rotated coordinate.
pub trait Potential: Send + Sync {
    /// `v(z)` continued into the complex plane.
    fn at(&self, z: Complex64) -> Complex64;

    /// True when `v` is a polynomial of degree ≤ 2, in which case oscillator
    /// integrals are exact with the basis quadrature.
    fn is_quadratic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotentialKind {
    /// `v(x) = ½x²e^{-x²/5}`: supports resonances but no bound states.
    #[default]
    OpenWell,
    /// `v(x) = ½x²`, the confining reference.
    Harmonic,
}

impl Potential for PotentialKind {
    fn at(&self, z: Complex64) -> Complex64 {
        match self {
            PotentialKind::OpenWell => 0.5 * z * z * (-z * z / 5.0).exp(),
            PotentialKind::Harmonic => 0.5 * z * z,
        }
    }

    fn is_quadratic(&self) -> bool {
        matches!(self, PotentialKind::Harmonic)
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialKind::OpenWell => "open-well",
            PotentialKind::Harmonic => "harmonic",
        })
    }
}

impl FromStr for PotentialKind {
    type Err = CsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open-well" | "open_well" => Ok(PotentialKind::OpenWell),
            "harmonic" => Ok(PotentialKind::Harmonic),
            other => Err(CsmError::Config(format!("unknown potential '{other}'"))),
        }
    }
}

/// Scaling angle, contact strength and external potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub theta: f64,
    pub g: f64,
    pub potential: PotentialKind,
}

impl ModelParams {
    pub fn new(theta: f64, g: f64, potential: PotentialKind) -> Result<Self> {
        check_theta(theta)?;
        if !g.is_finite() {
            return Err(CsmError::Config(format!("interaction strength {g} is not finite")));
        }
        Ok(Self { theta, g, potential })
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::new(theta, self.g, self.potential)
    }

    /// Attractive coupling lies outside the studied repulsive regime.
    pub fn is_attractive(&self) -> bool {
        self.g < 0.0
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if (0.0..FRAC_PI_4).contains(&theta) {
        Ok(())
    } else {
        Err(CsmError::AngleDomain(theta))
    }
}

/// `e^{-2iθ}⟨ψᵢ|−½d²/dx²|ψⱼ⟩` from ladder-operator algebra.
pub fn kinetic_element(i: usize, j: usize, theta: f64) -> Complex64 {
    let (lo, hi) = (i.min(j), i.max(j));
    let bare = if lo == hi {
        (2.0 * lo as f64 + 1.0) / 4.0
    } else if hi - lo == 2 {
        -(((lo + 1) * (lo + 2)) as f64).sqrt() / 4.0
    } else {
        0.0
    };
    Complex64::from_polar(bare, -2.0 * theta)
}

/// `∫ψᵢψⱼ v(xe^{iθ}) dx` by Gauss-Hermite quadrature on the bounded factor
/// `ψᵢψⱼe^{x²}`.
pub fn potential_element(
    i: usize,
    j: usize,
    theta: f64,
    potential: &dyn Potential,
    rule: &QuadratureRule,
) -> Result<Complex64> {
    check_theta(theta)?;
    if (i + j) % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rot = Complex64::from_polar(1.0, theta);
    let table = ho_table(i.max(j) + 1, &rule.nodes);
    Ok((0..rule.len())
        .map(|k| {
            rule.scaled_weights[k] * table[(i, k)] * table[(j, k)] * potential.at(rule.nodes[k] * rot)
        })
        .sum())
}

/// Full `n×n` potential matrix.
pub fn potential_matrix(
    n: usize,
    theta: f64,
    potential: &dyn Potential,
    rule: &QuadratureRule,
) -> Result<Array2<Complex64>> {
    check_theta(theta)?;
    let rot = Complex64::from_polar(1.0, theta);
    let table = ho_table(n, &rule.nodes);
    let sampled: Vec<Complex64> = rule
        .nodes
        .iter()
        .zip(&rule.scaled_weights)
        .map(|(&x, &w)| w * potential.at(x * rot))
        .collect();
    let mut v = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i % 2..=i).step_by(2) {
            let s: Complex64 = (0..rule.len())
                .map(|k| sampled[k] * (table[(i, k)] * table[(j, k)]))
                .sum();
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
    }
    Ok(v)
}

/// `h = e^{-2iθ}T + V(xe^{iθ})` in the first `n` oscillator orbitals.
pub fn one_body_matrix(
    n: usize,
    theta: f64,
    potential: &dyn Potential,
    rule: &QuadratureRule,
) -> Result<Array2<Complex64>> {
    let mut h = potential_matrix(n, theta, potential, rule)?;
    for i in 0..n {
        for j in i.saturating_sub(2)..(i + 3).min(n) {
            h[(i, j)] += kinetic_element(i, j, theta);
        }
    }
    Ok(h)
}

/// `∫ψᵢψⱼψₖψₗ dx`, exact when `rule` has at least `(i+j+k+l)/2 + 1` nodes.
///
/// The integrand is a polynomial times `e^{-2x²}`; the rule is applied after
/// substituting `x = u/√2`.
pub fn delta_element(i: usize, j: usize, k: usize, l: usize, rule: &QuadratureRule) -> f64 {
    if (i + j + k + l) % 2 == 1 {
        return 0.0;
    }
    let top = i.max(j).max(k).max(l) + 1;
    let xs: Vec<f64> = rule.nodes.iter().map(|u| u / SQRT_2).collect();
    let t = ho_table(top, &xs);
    (0..rule.len())
        .map(|q| rule.scaled_weights[q] * t[(i, q)] * t[(j, q)] * t[(k, q)] * t[(l, q)])
        .sum::<f64>()
        / SQRT_2
}

/// Total parity `(-1)^{i+j}` of a permanent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_pair(i: usize, j: usize) -> Self {
        if (i + j) % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Permanent basis `φᵢⱼ = sᵢⱼ[ψᵢψⱼ + ψⱼψᵢ]`, `i ≥ j`, optionally
/// restricted to one parity sector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBasis {
    n_orbitals: usize,
    parity: Option<Parity>,
    pairs: Vec<(usize, usize)>,
    // canonical triangular index -> row position
    lookup: Vec<Option<usize>>,
}

impl PairBasis {
    pub fn new(n_orbitals: usize, parity: Option<Parity>) -> Self {
        let full = n_orbitals * (n_orbitals + 1) / 2;
        let mut pairs = Vec::new();
        let mut lookup = vec![None; full];
        for i in 0..n_orbitals {
            for j in 0..=i {
                if parity.map_or(true, |p| Parity::of_pair(i, j) == p) {
                    lookup[i * (i + 1) / 2 + j] = Some(pairs.len());
                    pairs.push((i, j));
                }
            }
        }
        Self {
            n_orbitals,
            parity,
            pairs,
            lookup,
        }
    }

    /// Dimension of the sector, checked against `max_dim`.
    pub fn checked(n_orbitals: usize, parity: Option<Parity>, max_dim: usize) -> Result<Self> {
        let basis = Self::new(n_orbitals, parity);
        if basis.dim() > max_dim {
            return Err(CsmError::DimensionOverflow {
                dim: basis.dim(),
                max: max_dim,
            });
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn parity(&self) -> Option<Parity> {
        self.parity
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Row position of `φᵢⱼ`, in either index order.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = (i.max(j), i.min(j));
        if hi >= self.n_orbitals {
            return None;
        }
        self.lookup[hi * (hi + 1) / 2 + lo]
    }

    /// `sᵢᵢ = 1/2`, `sᵢⱼ = 2^{-1/2}`.
    pub fn symmetry_factor(i: usize, j: usize) -> f64 {
        if i == j {
            0.5
        } else {
            std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    OneParticle,
    TwoParticle(PairBasis),
}

/// Dense complex-symmetric matrix of a complex-scaled Hamiltonian.
#[derive(Debug, Clone)]
pub struct ScaledOperator {
    pub entries: Array2<Complex64>,
    pub params: ModelParams,
    pub kind: OperatorKind,
    /// Largest change of any potential element when the quadrature is
    /// doubled; zero for quadratic potentials.
    pub quadrature_defect: f64,
}

impl ScaledOperator {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |M − Mᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        symmetry_defect(&self.entries)
    }

    pub fn pair_basis(&self) -> Option<&PairBasis> {
        match &self.kind {
            OperatorKind::TwoParticle(b) => Some(b),
            OperatorKind::OneParticle => None,
        }
    }
}

pub fn symmetry_defect(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

/// Potential matrix plus the deviation observed when the rule is doubled.
fn checked_one_body(
    n: usize,
    theta: f64,
    potential: PotentialKind,
    rule: &QuadratureRule,
    doubled: Option<&QuadratureRule>,
) -> Result<(Array2<Complex64>, f64)> {
    let h = one_body_matrix(n, theta, &potential, rule)?;
    let defect = match doubled {
        Some(fine) if !potential.is_quadratic() => {
            let v0 = potential_matrix(n, theta, &potential, rule)?;
            let v1 = potential_matrix(n, theta, &potential, fine)?;
            v0.iter()
                .zip(v1.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        }
        _ => 0.0,
    };
    Ok((h, defect))
}

/// One-particle operator `e^{-2iθ}T + V(xe^{iθ})`.
pub fn build_one_particle(spec: &BasisSpec, params: &ModelParams) -> Result<ScaledOperator> {
    check_theta(params.theta)?;
    let rule = gauss_hermite(spec.quad_nodes())?;
    let fine = gauss_hermite(2 * spec.quad_nodes())?;
    let (h, defect) = checked_one_body(
        spec.n_orbitals(),
        params.theta,
        params.potential,
        &rule,
        Some(&fine),
    )?;
    Ok(ScaledOperator {
        entries: h,
        params: *params,
        kind: OperatorKind::OneParticle,
        quadrature_defect: defect,
    })
}

/// Two-boson operator over the full permanent basis.
pub fn build_two_particle(spec: &BasisSpec, params: &ModelParams) -> Result<ScaledOperator> {
    TwoParticleAssembler::new(spec, params.potential, None)?.operator(params.theta, params.g)
}

/// Two-boson operator restricted to one parity sector.
pub fn build_two_particle_block(
    spec: &BasisSpec,
    params: &ModelParams,
    parity: Parity,
) -> Result<ScaledOperator> {
    TwoParticleAssembler::new(spec, params.potential, Some(parity))?.operator(params.theta, params.g)
}

/// Holds the θ- and g-independent pieces of the two-boson matrix so that
/// sweeps only redo the cheap one-body part.
#[derive(Debug, Clone)]
pub struct TwoParticleAssembler {
    spec: BasisSpec,
    potential: PotentialKind,
    basis: PairBasis,
    rule: QuadratureRule,
    fine_rule: QuadratureRule,
    /// `⟪φ_p|δ(x₂−x₁)|φ_q⟫ = 4 s_p s_q ∫ψₙψₘψᵢψⱼ`.
    contact: Array2<f64>,
}

impl TwoParticleAssembler {
    pub fn new(spec: &BasisSpec, potential: PotentialKind, parity: Option<Parity>) -> Result<Self> {
        let basis = PairBasis::checked(spec.n_orbitals(), parity, spec.max_dim())?;
        if spec.quad_nodes() < spec.contact_nodes_required() {
            return Err(CsmError::InsufficientQuadrature {
                nodes: spec.quad_nodes(),
                reason: format!(
                    "contact integrals of {} orbitals need {} nodes",
                    spec.n_orbitals(),
                    spec.contact_nodes_required()
                ),
            });
        }
        let rule = gauss_hermite(spec.quad_nodes())?;
        let fine_rule = gauss_hermite(2 * spec.quad_nodes())?;
        let contact = contact_matrix(&basis, &rule);
        Ok(Self {
            spec: *spec,
            potential,
            basis,
            rule,
            fine_rule,
            contact,
        })
    }

    /// Rebuild from precomputed contact matrix (e.g. a cache hit).
    pub fn with_contact(
        spec: &BasisSpec,
        potential: PotentialKind,
        parity: Option<Parity>,
        contact: Array2<f64>,
    ) -> Result<Self> {
        let basis = PairBasis::checked(spec.n_orbitals(), parity, spec.max_dim())?;
        if contact.dim() != (basis.dim(), basis.dim()) {
            return Err(CsmError::DimensionMismatch {
                expected: basis.dim(),
                found: contact.nrows(),
            });
        }
        Ok(Self {
            spec: *spec,
            potential,
            basis,
            rule: gauss_hermite(spec.quad_nodes())?,
            fine_rule: gauss_hermite(2 * spec.quad_nodes())?,
            contact,
        })
    }

    pub fn basis(&self) -> &PairBasis {
        &self.basis
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn contact(&self) -> &Array2<f64> {
        &self.contact
    }

    /// One-particle operator at the same angle, sharing the quadrature.
    pub fn one_particle(&self, theta: f64) -> Result<ScaledOperator> {
        let (h, defect) = checked_one_body(
            self.spec.n_orbitals(),
            theta,
            self.potential,
            &self.rule,
            Some(&self.fine_rule),
        )?;
        Ok(ScaledOperator {
            entries: h,
            params: ModelParams::new(theta, 0.0, self.potential)?,
            kind: OperatorKind::OneParticle,
            quadrature_defect: defect,
        })
    }

    /// One-body part of the two-boson matrix in the permanent basis.
    pub fn one_body_block(&self, h: &Array2<Complex64>) -> Array2<Complex64> {
        pair_one_body(&self.basis, h)
    }

    pub fn operator(&self, theta: f64, g: f64) -> Result<ScaledOperator> {
        let params = ModelParams::new(theta, g, self.potential)?;
        let one = self.one_particle(theta)?;
        let mut entries = self.one_body_block(&one.entries);
        let coupling = Complex64::from_polar(g, -theta);
        if g != 0.0 {
            entries
                .iter_mut()
                .zip(self.contact.iter())
                .for_each(|(e, &c)| *e += coupling * c);
        }
        Ok(ScaledOperator {
            entries,
            params,
            kind: OperatorKind::TwoParticle(self.basis.clone()),
            quadrature_defect: one.quadrature_defect,
        })
    }
}

/// `⟪φₙₘ|h₁+h₂|φᵢⱼ⟫ = 2sₙₘsᵢⱼ(h_{ni}δ_{mj} + h_{nj}δ_{mi} + h_{mi}δ_{nj} + h_{mj}δ_{ni})`.
pub fn pair_one_body(basis: &PairBasis, h: &Array2<Complex64>) -> Array2<Complex64> {
    let pairs = basis.pairs();
    let dim = pairs.len();
    let mut out = Array2::zeros((dim, dim));
    out.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(p, mut row)| {
            let (n, m) = pairs[p];
            let sp = PairBasis::symmetry_factor(n, m);
            for (q, &(i, j)) in pairs.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                if m == j {
                    acc += h[(n, i)];
                }
                if m == i {
                    acc += h[(n, j)];
                }
                if n == j {
                    acc += h[(m, i)];
                }
                if n == i {
                    acc += h[(m, j)];
                }
                if acc != Complex64::new(0.0, 0.0) {
                    row[q] = 2.0 * sp * PairBasis::symmetry_factor(i, j) * acc;
                }
            }
        });
    out
}

/// Contact matrix as the Gram matrix of sampled pair densities
/// `2s_p ψₙψₘ(u/√2)` with weights `w̃/√2`.
pub fn contact_matrix(basis: &PairBasis, rule: &QuadratureRule) -> Array2<f64> {
    let xs: Vec<f64> = rule.nodes.iter().map(|u| u / SQRT_2).collect();
    let t = ho_table(basis.n_orbitals(), &xs);
    let root_w: Vec<f64> = rule
        .scaled_weights
        .iter()
        .map(|w| (w / SQRT_2).sqrt())
        .collect();
    let mut samples = Array2::<f64>::zeros((basis.dim(), rule.len()));
    for (p, &(i, j)) in basis.pairs().iter().enumerate() {
        let f = 2.0 * PairBasis::symmetry_factor(i, j);
        for k in 0..rule.len() {
            samples[(p, k)] = f * root_w[k] * t[(i, k)] * t[(j, k)];
        }
    }
    samples.dot(&samples.t())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn kinetic_examples() {
        assert!(close(kinetic_element(0, 0, 0.0), Complex64::new(0.25, 0.0), 1e-15));
        assert_eq!(kinetic_element(0, 1, 0.2).norm(), 0.0);
        assert!(close(
            kinetic_element(0, 2, 0.0),
            Complex64::new(-2f64.sqrt() / 4.0, 0.0),
            1e-15
        ));
        assert_eq!(kinetic_element(2, 0, 0.3), kinetic_element(0, 2, 0.3));
        let t = kinetic_element(3, 3, 0.2);
        assert!(close(t, Complex64::from_polar(7.0 / 4.0, -0.4), 1e-15));
    }

    #[test]
    fn kinetic_matches_pointwise_second_derivative() {
        // -½ψᵢ'' = ½((2i+1) − x²)ψᵢ
        let rule = gauss_hermite(60).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let direct: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.scaled_weights)
                    .map(|(&x, &w)| {
                        w * crate::hermite::evaluate_ho(i, x)
                            * 0.5
                            * ((2 * j + 1) as f64 - x * x)
                            * crate::hermite::evaluate_ho(j, x)
                    })
                    .sum();
                assert!((kinetic_element(i, j, 0.0).re - direct).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn potential_examples() {
        let rule = gauss_hermite(400).unwrap();
        let pot = PotentialKind::OpenWell;
        let v00 = potential_element(0, 0, 0.0, &pot, &rule).unwrap();
        assert!(close(v00, Complex64::new(0.25 / 1.2f64.powf(1.5), 0.0), 1e-13));
        assert!((v00.re - 0.190182).abs() < 1e-6);
        assert_eq!(potential_element(0, 1, 0.2, &pot, &rule).unwrap().norm(), 0.0);

        let coarse = gauss_hermite(200).unwrap();
        let a = potential_element(3, 5, 0.2, &pot, &coarse).unwrap();
        let b = potential_element(3, 5, 0.2, &pot, &rule).unwrap();
        assert!((a - b).norm() < 1e-11);

        assert!(matches!(
            potential_element(0, 0, 0.8, &pot, &rule),
            Err(CsmError::AngleDomain(_))
        ));
        assert!(potential_element(0, 0, -0.1, &pot, &rule).is_err());
    }

    // ψᵢψⱼ as polynomial coefficients of e^{-x²}, then ∫x^{2m}e^{-ax²}
    // = Γ(m+½)/a^{m+½} with complex a on the principal branch.
    fn analytic_potential(i: usize, j: usize, theta: f64) -> Complex64 {
        fn hermite_coeffs(n: usize) -> Vec<f64> {
            let mut prev = vec![0.0; n + 1];
            let mut cur = vec![0.0; n + 1];
            cur[0] = std::f64::consts::PI.powf(-0.25);
            for k in 0..n {
                let mut next = vec![0.0; n + 1];
                let kf = k as f64;
                for d in 0..n {
                    next[d + 1] += (2.0 / (kf + 1.0)).sqrt() * cur[d];
                }
                for d in 0..=n {
                    next[d] -= (kf / (kf + 1.0)).sqrt() * prev[d];
                }
                prev = cur;
                cur = next;
            }
            cur
        }
        let (pi, pj) = (hermite_coeffs(i), hermite_coeffs(j));
        let e2 = Complex64::from_polar(1.0, 2.0 * theta);
        let a = 1.0 + e2 / 5.0;
        let mut total = Complex64::new(0.0, 0.0);
        for (di, ci) in pi.iter().enumerate() {
            for (dj, cj) in pj.iter().enumerate() {
                let deg = di + dj + 2;
                if deg % 2 == 1 || *ci == 0.0 || *cj == 0.0 {
                    continue;
                }
                let m = deg / 2;
                let mut gamma = std::f64::consts::PI.sqrt();
                for s in 0..m {
                    gamma *= s as f64 + 0.5;
                }
                total += ci * cj * gamma / a.powf(m as f64 + 0.5);
            }
        }
        0.5 * e2 * total
    }

    #[test]
    fn quadrature_agrees_with_analytic_gaussian_moments() {
        let rule = gauss_hermite(400).unwrap();
        let pot = PotentialKind::OpenWell;
        for theta in [0.0, 0.1, 0.2, 0.35] {
            for i in 0..7 {
                for j in 0..7 {
                    let q = potential_element(i, j, theta, &pot, &rule).unwrap();
                    let a = analytic_potential(i, j, theta);
                    assert!((q - a).norm() < 1e-10, "{i} {j} {theta}: {q} vs {a}");
                }
            }
        }
    }

    #[test]
    fn delta_examples() {
        let rule = gauss_hermite(64).unwrap();
        let d0 = delta_element(0, 0, 0, 0, &rule);
        assert!((d0 - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert_eq!(delta_element(0, 0, 0, 1, &rule), 0.0);
        let reference = delta_element(1, 1, 2, 2, &rule);
        for (a, b, c, d) in [(1, 2, 1, 2), (2, 2, 1, 1), (2, 1, 2, 1), (1, 2, 2, 1)] {
            assert!((delta_element(a, b, c, d, &rule) - reference).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_is_exact_once_degree_bound_met() {
        let small = gauss_hermite(2 * 20 - 1).unwrap();
        let big = gauss_hermite(200).unwrap();
        for (i, j, k, l) in [(19, 19, 19, 19), (19, 3, 8, 12), (10, 10, 0, 0)] {
            let a = delta_element(i, j, k, l, &small);
            let b = delta_element(i, j, k, l, &big);
            assert!((a - b).abs() < 1e-14, "{a} {b}");
        }
    }

    #[test]
    fn one_particle_symmetry_and_reality() {
        let spec = BasisSpec::new(40, 200).unwrap();
        let op0 = build_one_particle(&spec, &ModelParams::new(0.0, 0.0, PotentialKind::OpenWell).unwrap())
            .unwrap();
        assert!(op0.entries.iter().all(|z| z.im == 0.0));
        let op = build_one_particle(&spec, &ModelParams::new(0.2, 0.0, PotentialKind::OpenWell).unwrap())
            .unwrap();
        assert!(op.symmetry_defect() < 1e-12);
        assert!(op.quadrature_defect < 1e-11);
    }

    #[test]
    fn pair_basis_indexing() {
        let full = PairBasis::new(6, None);
        assert_eq!(full.dim(), 21);
        for (p, &(i, j)) in full.pairs().iter().enumerate() {
            assert!(i >= j);
            assert_eq!(full.position(i, j), Some(p));
            assert_eq!(full.position(j, i), Some(p));
        }
        let even = PairBasis::new(90, Some(Parity::Even));
        let odd = PairBasis::new(90, Some(Parity::Odd));
        assert_eq!(even.dim() + odd.dim(), 4095);
        assert_eq!(even.dim(), 2070);
        assert_eq!(even.position(1, 0), None);
        assert!(PairBasis::checked(90, None, 4000).is_err());
    }

    #[test]
    fn two_particle_guards() {
        let spec = BasisSpec::new(10, 12).unwrap();
        let params = ModelParams::new(0.2, 1.0, PotentialKind::OpenWell).unwrap();
        assert!(matches!(
            build_two_particle(&spec, &params),
            Err(CsmError::InsufficientQuadrature { .. })
        ));
        let tight = BasisSpec::new(10, 40).unwrap().with_max_dim(50);
        assert!(matches!(
            build_two_particle(&tight, &params),
            Err(CsmError::DimensionOverflow { dim: 55, max: 50 })
        ));
    }

    #[test]
    fn two_particle_structure() {
        let spec = BasisSpec::new(12, 60).unwrap();
        let params = ModelParams::new(0.2, 3.0, PotentialKind::OpenWell).unwrap();
        let op = build_two_particle(&spec, &params).unwrap();
        assert_eq!(op.dim(), 78);
        assert!(op.symmetry_defect() < 1e-12);
        let basis = op.pair_basis().unwrap();
        for (p, &(a, b)) in basis.pairs().iter().enumerate() {
            for (q, &(c, d)) in basis.pairs().iter().enumerate() {
                if Parity::of_pair(a, b) != Parity::of_pair(c, d) {
                    assert!(op.entries[(p, q)].norm() < 1e-13);
                }
            }
        }
        // blocks are exact sub-matrices of the full operator
        let even = build_two_particle_block(&spec, &params, Parity::Even).unwrap();
        let eb = even.pair_basis().unwrap();
        for (p, &(a, b)) in eb.pairs().iter().enumerate() {
            for (q, &(c, d)) in eb.pairs().iter().enumerate() {
                let full = op.entries[(basis.position(a, b).unwrap(), basis.position(c, d).unwrap())];
                assert!((even.entries[(p, q)] - full).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn theta_continuity() {
        let spec = BasisSpec::new(8, 40).unwrap();
        let a = build_two_particle(&spec, &ModelParams::new(0.2, 5.0, PotentialKind::OpenWell).unwrap())
            .unwrap();
        let b = build_two_particle(
            &spec,
            &ModelParams::new(0.2 + 1e-6, 5.0, PotentialKind::OpenWell).unwrap(),
        )
        .unwrap();
        let worst = a
            .entries
            .iter()
            .zip(b.entries.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4);
    }

    #[test]
    fn two_particle_matches_plane_quadrature() {
        // independent route: apply H pointwise on a 2D Gauss-Legendre grid
        let n = 6;
        let (theta, g) = (0.2, 3.0);
        let spec = BasisSpec::new(n, 40).unwrap();
        let op = build_two_particle(&spec, &ModelParams::new(theta, g, PotentialKind::OpenWell).unwrap()).unwrap();
        let basis = op.pair_basis().unwrap().clone();
        let rule = crate::hermite::gauss_legendre(300, -12.0, 12.0).unwrap();
        let psi = crate::hermite::ho_table(n, &rule.nodes);
        let rot = Complex64::from_polar(1.0, theta);
        let kin = Complex64::from_polar(1.0, -2.0 * theta);
        let v = |x: f64| {
            let z = rot * x;
            0.5 * z * z * (-z * z / 5.0).exp()
        };
        // (Hψᵢ)(x) one-body, pointwise
        let h_psi = Array2::from_shape_fn((n, rule.len()), |(i, k)| {
            let x = rule.nodes[k];
            kin * 0.5 * ((2 * i + 1) as f64 - x * x) * psi[(i, k)] + v(x) * psi[(i, k)]
        });
        let dim = basis.dim();
        let mut oracle = Array2::<Complex64>::zeros((dim, dim));
        for k1 in 0..rule.len() {
            for k2 in 0..rule.len() {
                let w = rule.weights[k1] * rule.weights[k2];
                let bra: Vec<f64> = basis
                    .pairs()
                    .iter()
                    .map(|&(p, q)| PairBasis::symmetry_factor(p, q) * (psi[(p, k1)] * psi[(q, k2)] + psi[(q, k1)] * psi[(p, k2)]))
                    .collect();
                let ket: Vec<Complex64> = basis
                    .pairs()
                    .iter()
                    .map(|&(i, j)| {
                        let s = PairBasis::symmetry_factor(i, j);
                        s * (h_psi[(i, k1)] * psi[(j, k2)]
                            + psi[(i, k1)] * h_psi[(j, k2)]
                            + h_psi[(j, k1)] * psi[(i, k2)]
                            + psi[(j, k1)] * h_psi[(i, k2)])
                    })
                    .collect();
                for r in 0..dim {
                    for c in 0..dim {
                        oracle[(r, c)] += w * bra[r] * ket[c];
                    }
                }
            }
        }
        let coupling = Complex64::from_polar(g, -theta);
        for k in 0..rule.len() {
            let diag: Vec<f64> = basis
                .pairs()
                .iter()
                .map(|&(p, q)| 2.0 * PairBasis::symmetry_factor(p, q) * psi[(p, k)] * psi[(q, k)])
                .collect();
            for r in 0..dim {
                for c in 0..dim {
                    oracle[(r, c)] += coupling * rule.weights[k] * diag[r] * diag[c];
                }
            }
        }
        let worst = oracle
            .iter()
            .zip(op.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn non_interacting_spectrum_is_pairwise_sums() {
        let spec = BasisSpec::new(10, 40).unwrap();
        let params = ModelParams::new(0.2, 0.0, PotentialKind::OpenWell).unwrap();
        let one = crate::spectral::eigenvalues(build_one_particle(&spec, &params).unwrap().entries.view()).unwrap();
        let two = crate::spectral::eigenvalues(build_two_particle(&spec, &params).unwrap().entries.view()).unwrap();
        let mut sums = Vec::new();
        for a in 0..one.len() {
            for b in 0..=a {
                sums.push(one[a] + one[b]);
            }
        }
        assert_eq!(sums.len(), two.len());
        assert!(crate::schmidt::multiset_distance(&sums, &two) < 1e-8);
    }
}
