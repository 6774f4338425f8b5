//! Harmonic-oscillator one-particle basis and the quadrature rules used for
//! every matrix-element integral.
//!
//! Hermite functions are always generated by the recurrence on the
//! normalized functions, so no intermediate quantity grows like `H_n(x)`.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{CsmError, Result};

/// Default node count for production Gauss-Hermite rules.
pub const DEFAULT_QUAD_NODES: usize = 400;

/// Default upper bound on the two-particle matrix dimension.
pub const DEFAULT_MAX_DIM: usize = 20_000;

/// Truncated oscillator basis together with its quadrature resources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    n_orbitals: usize,
    quad_nodes: usize,
    max_dim: usize,
}

impl BasisSpec {
    /// `n_orbitals >= 2` and enough nodes to integrate `ψᵢψⱼ` exactly.
    pub fn new(n_orbitals: usize, quad_nodes: usize) -> Result<Self> {
        if n_orbitals < 2 {
            return Err(CsmError::Config(format!(
                "basis needs at least 2 orbitals, got {n_orbitals}"
            )));
        }
        if quad_nodes < n_orbitals {
            return Err(CsmError::InsufficientQuadrature {
                nodes: quad_nodes,
                reason: format!("overlaps of {n_orbitals} orbitals need at least {n_orbitals} nodes"),
            });
        }
        Ok(Self {
            n_orbitals,
            quad_nodes,
            max_dim: DEFAULT_MAX_DIM,
        })
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Self {
        self.max_dim = max_dim;
        self
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Nodes needed to integrate a product of four orbitals exactly after
    /// the `x = u/√2` substitution.
    pub fn contact_nodes_required(&self) -> usize {
        2 * self.n_orbitals - 1
    }
}

/// Quadrature rule for the weight `e^{-x²}` (Gauss-Hermite) or for unit
/// weight on a finite interval (Gauss-Legendre).
///
/// `scaled_weights[k] = weights[k]·e^{x_k²}` for Hermite rules, which lets
/// integrands be sampled as products of bounded Hermite functions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ f(x) e^{-x²} dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `ψᵢ(x)` for a single index.
pub fn evaluate_ho(i: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..i {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
            - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ψ₀(x) … ψ_{n-1}(x)` written into `out`.
pub fn ho_values_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = x * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

pub fn ho_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    ho_values_into(x, &mut out);
    out
}

/// Table `t[(i, k)] = ψᵢ(x_k)` for orbitals `i < n`.
pub fn ho_table(n: usize, xs: &[f64]) -> Array2<f64> {
    let mut table = Array2::zeros((n, xs.len()));
    let mut column = vec![0.0; n];
    for (k, &x) in xs.iter().enumerate() {
        ho_values_into(x, &mut column);
        for i in 0..n {
            table[(i, k)] = column[i];
        }
    }
    table
}

/// Gauss-Hermite rule with `n` nodes.
///
/// Roots are found by Newton iteration on `ψ_n` starting from asymptotic
/// guesses, largest root first.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(CsmError::Config("Gauss-Hermite rule needs n >= 1".into()));
    }
    const MAX_ITER: usize = 100;
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut pos = vec![0.0; m];
    let mut scaled = vec![0.0; m];
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * pos[0],
            3 => 1.91 * z - 0.91 * pos[1],
            _ => 2.0 * z - pos[i - 2],
        };
        let mut converged = false;
        let mut lower = 0.0;
        for _ in 0..MAX_ITER {
            let (psi_n, psi_nm1) = hermite_pair(n, z);
            let deriv = (2.0 * nf).sqrt() * psi_nm1 - z * psi_n;
            let step = psi_n / deriv;
            z -= step;
            lower = psi_nm1;
            if step.abs() <= 1e-14 * z.abs().max(1.0) {
                let (_, refreshed) = hermite_pair(n, z);
                lower = refreshed;
                converged = true;
                break;
            }
        }
        if !converged || !z.is_finite() {
            return Err(CsmError::QuadratureConvergence { order: n, index: i });
        }
        pos[i] = z;
        scaled[i] = 1.0 / (nf * lower * lower);
    }
    // odd n: the middle guess converges to 0; pin it
    if n % 2 == 1 {
        pos[m - 1] = 0.0;
        let (_, lower) = hermite_pair(n, 0.0);
        scaled[m - 1] = 1.0 / (nf * lower * lower);
    }

    let mut nodes = Vec::with_capacity(n);
    let mut scaled_weights = Vec::with_capacity(n);
    for i in 0..m {
        nodes.push(-pos[i]);
        scaled_weights.push(scaled[i]);
    }
    for i in (0..n / 2).rev() {
        nodes.push(pos[i]);
        scaled_weights.push(scaled[i]);
    }
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(&x, &w)| w * (-x * x).exp())
        .collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        scaled_weights,
    })
}

// (ψ_n(z), ψ_{n-1}(z)); the Gaussian factor is carried as a logarithm so
// the seed does not underflow for |z| > 38
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    const RESCALE: f64 = 1e150;
    let mut log_scale = -0.5 * z * z;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for k in 0..n {
        let kf = k as f64;
        let next = z * (2.0 / (kf + 1.0)).sqrt() * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    let factor = log_scale.exp();
    (cur * factor, prev * factor)
}

/// Gauss-Legendre rule with `n` nodes on `[a, b]`. `scaled_weights`
/// equals `weights` for this rule.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(CsmError::Config("Gauss-Legendre rule needs n >= 1".into()));
    }
    let nf = n as f64;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let jf = j as f64;
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let step = p0 / dp;
            z -= step;
            if step.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CsmError::QuadratureConvergence { order: n, index: i });
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    Ok(QuadratureRule {
        scaled_weights: weights.clone(),
        nodes,
        weights,
    })
}

/// Largest `|∫ψᵢψⱼ − δᵢⱼ|` over the basis, integrated with the basis quadrature.
pub fn overlap_check(spec: &BasisSpec) -> Result<f64> {
    let rule = gauss_hermite(spec.quad_nodes())?;
    let n = spec.n_orbitals();
    let table = ho_table(n, &rule.nodes);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..rule.len())
                .map(|k| rule.scaled_weights[k] * table[(i, k)] * table[(j, k)])
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    Ok(worst)
}
