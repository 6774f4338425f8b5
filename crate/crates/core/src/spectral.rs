//! Eigenpairs of complex-symmetric operators under the bilinear product, and
//! location of θ-stationary resonance eigenvalues.
//!
//! For `M = Mᵀ` the left eigenvector matrix is `(R⁻¹)ᵀ = R` once columns are
//! c-normalized (`vᵀv = 1`), so every [`EigenPair`] stores the same vector
//! twice.

use faer::Mat;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CsmError, Result};
use crate::operators::{check_theta, ScaledOperator};

/// Below this `|vᵀv|/‖v‖²` a vector counts as self-orthogonal.
pub const SELF_ORTHOGONAL_THRESHOLD: f64 = 1e-6;

/// Relative gap under which eigenvalues are treated as one degenerate
/// cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub right: Array1<Complex64>,
    pub left: Array1<Complex64>,
    /// `|⟪L|R⟫ − 1|`.
    pub c_norm_defect: f64,
    /// False when the vector was (near) self-orthogonal and could not be
    /// rescued, i.e. the matrix is close to an exceptional point.
    pub reliable: bool,
}

impl EigenPair {
    /// `‖Mv − Wv‖₂ / |W|` (absolute when `W = 0`).
    pub fn residual(&self, m: &Array2<Complex64>) -> f64 {
        let mv = m.dot(&self.right);
        let r: f64 = mv
            .iter()
            .zip(self.right.iter())
            .map(|(a, b)| (a - self.value * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = self.value.norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }
}

/// Stationary resonance eigenvalue `W = E − iΓ/2` with its eigenvectors.
#[derive(Debug, Clone)]
pub struct ResonanceState {
    pub eigenpair: EigenPair,
    pub theta: f64,
    pub energy: f64,
    pub width: f64,
    /// `|dW/dθ|` estimated on the scan grid.
    pub stability: f64,
}

impl ResonanceState {
    pub fn new(eigenpair: EigenPair, theta: f64, stability: f64) -> Self {
        let w = eigenpair.value;
        Self {
            energy: w.re,
            width: -2.0 * w.im,
            eigenpair,
            theta,
            stability,
        }
    }

    pub fn value(&self) -> Complex64 {
        self.eigenpair.value
    }
}

/// `uᵀv` without conjugation.
pub fn c_dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn to_faer(m: ArrayView2<'_, Complex64>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_square(m: ArrayView2<'_, Complex64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(CsmError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(CsmError::Config("empty matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CsmError::Eigensolver("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// All eigenvalues of a dense complex matrix.
pub fn eigenvalues(m: ArrayView2<'_, Complex64>) -> Result<Vec<Complex64>> {
    check_square(m)?;
    to_faer(m)
        .eigenvalues()
        .map_err(|e| CsmError::Eigensolver(format!("{e:?}")))
}

/// Scale `v` to `vᵀv = 1` and fix the sign so the largest-modulus component
/// has non-negative real part. Returns the pre-normalization `|vᵀv|/‖v‖²`.
fn c_normalize(v: &mut [Complex64]) -> f64 {
    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let cn = c_dot(v, v);
    let ratio = if norm2 > 0.0 { cn.norm() / norm2 } else { 0.0 };
    if cn.norm() > 0.0 {
        let s = cn.sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    }
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or_default();
    if pivot.re < 0.0 {
        v.iter_mut().for_each(|z| *z = -*z);
    }
    ratio
}

// union of index sets whose eigenvalues are within tolerance
fn clusters(values: &[Complex64]) -> Vec<Vec<usize>> {
    let n = values.len();
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = CLUSTER_TOLERANCE * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..n {
        for b in a + 1..n {
            let (ia, ib) = (order[a], order[b]);
            if values[ib].re - values[ia].re > tol {
                break;
            }
            if (values[ia] - values[ib]).norm() <= tol {
                let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
                parent[ra] = rb;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Bilinear Gram-Schmidt inside each degenerate cluster. When the cluster's
/// own vectors are (near) dependent, candidates `e_k` projected off every
/// other eigenvector are used instead; that complement is exactly the
/// cluster's eigenspace for a diagonalizable symmetric matrix.
fn orthogonalize_clusters(values: &[Complex64], vectors: &mut [Vec<Complex64>], reliable: &mut [bool]) {
    let n = vectors.first().map_or(0, |v| v.len());
    for cluster in clusters(values) {
        let mut accepted: Vec<Vec<Complex64>> = Vec::new();
        let outside: Vec<usize> = (0..vectors.len())
            .filter(|i| !cluster.contains(i) && reliable[*i])
            .collect();
        let mut fallback = 0usize;
        for &idx in &cluster {
            let mut candidate = Some(vectors[idx].clone());
            let mut done = false;
            while let Some(mut v) = candidate.take() {
                for a in &accepted {
                    let p = c_dot(a, &v);
                    v.iter_mut().zip(a).for_each(|(x, y)| *x -= p * y);
                }
                let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                let cn = c_dot(&v, &v);
                if norm2 > 0.0 && cn.norm() / norm2 >= SELF_ORTHOGONAL_THRESHOLD && norm2 > 1e-20 {
                    let s = cn.sqrt();
                    v.iter_mut().for_each(|z| *z /= s);
                    accepted.push(v);
                    done = true;
                    break;
                }
                if fallback < n {
                    let mut e = vec![Complex64::new(0.0, 0.0); n];
                    e[fallback] = Complex64::new(1.0, 0.0);
                    fallback += 1;
                    for &o in &outside {
                        let p = c_dot(&vectors[o], &e);
                        e.iter_mut().zip(&vectors[o]).for_each(|(x, y)| *x -= p * y);
                    }
                    candidate = Some(e);
                }
            }
            if done {
                vectors[idx] = accepted.last().cloned().unwrap_or_default();
            } else {
                reliable[idx] = false;
            }
        }
    }
}

fn is_real_symmetric(m: ArrayView2<'_, Complex64>) -> bool {
    let n = m.nrows();
    m.iter().all(|z| z.im == 0.0) && (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// All eigenpairs of a complex-symmetric matrix, c-normalized and sorted by
/// `Re W` ascending.
pub fn eigendecompose_matrix(m: ArrayView2<'_, Complex64>) -> Result<Vec<EigenPair>> {
    check_square(m)?;
    let n = m.nrows();
    let (values, mut vectors) = if is_real_symmetric(m) {
        // Hermitian limit: real eigenvectors, also inside degenerate levels
        let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = a
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| CsmError::Eigensolver(format!("{e:?}")))?;
        let (u, s) = (evd.U(), evd.S());
        let values: Vec<Complex64> = (0..n).map(|k| Complex64::new(s[k], 0.0)).collect();
        let vectors: Vec<Vec<Complex64>> = (0..n)
            .map(|k| (0..n).map(|i| Complex64::new(u[(i, k)], 0.0)).collect())
            .collect();
        (values, vectors)
    } else {
        let evd = to_faer(m)
            .eigen()
            .map_err(|e| CsmError::Eigensolver(format!("{e:?}")))?;
        let (u, s) = (evd.U(), evd.S());
        let values: Vec<Complex64> = (0..n).map(|k| s[k]).collect();
        let vectors: Vec<Vec<Complex64>> = (0..n).map(|k| (0..n).map(|i| u[(i, k)]).collect()).collect();
        (values, vectors)
    };
    let mut reliable = vec![true; n];
    for (k, v) in vectors.iter_mut().enumerate() {
        if c_normalize(v) < SELF_ORTHOGONAL_THRESHOLD {
            reliable[k] = false;
        }
    }
    // degenerate clusters may have legitimately self-orthogonal members
    for cluster in clusters(&values) {
        for &k in &cluster {
            reliable[k] = true;
        }
    }
    orthogonalize_clusters(&values, &mut vectors, &mut reliable);

    let mut pairs: Vec<EigenPair> = values
        .into_iter()
        .zip(vectors)
        .zip(reliable)
        .map(|((value, mut v), ok)| {
            c_normalize(&mut v);
            let right = Array1::from(v);
            let c_norm_defect = (c_dot(right.as_slice().unwrap(), right.as_slice().unwrap())
                - Complex64::new(1.0, 0.0))
            .norm();
            EigenPair {
                value,
                left: right.clone(),
                right,
                c_norm_defect,
                reliable: ok,
            }
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    Ok(pairs)
}

pub fn eigendecompose(op: &ScaledOperator) -> Result<Vec<EigenPair>> {
    eigendecompose_matrix(op.entries.view())
}

/// Eigenpair nearest to `shift` by shifted inverse iteration, with the
/// eigenvalue polished by the bilinear Rayleigh quotient.
pub fn refine_eigenpair(m: ArrayView2<'_, Complex64>, shift: Complex64) -> Result<EigenPair> {
    check_square(m)?;
    let n = m.nrows();
    // an exact eigenvalue as shift makes the factorization singular
    let sigma = shift + Complex64::new(1e-11, 1e-11) * (1.0 + shift.norm());
    let mut a = to_faer(m);
    for i in 0..n {
        a[(i, i)] -= sigma;
    }
    let lu = a.partial_piv_lu();
    let mut x = Mat::<Complex64>::from_fn(n, 1, |i, _| {
        Complex64::new(1.0 + (i % 7) as f64 * 0.1, 0.05 * (i % 5) as f64)
    });
    let mut value = shift;
    let mut v: Vec<Complex64> = Vec::new();
    for _ in 0..4 {
        x = faer::linalg::solvers::Solve::solve(&lu, &x);
        let norm = (0..n).map(|i| x[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(CsmError::Eigensolver("inverse iteration diverged".into()));
        }
        for i in 0..n {
            x[(i, 0)] /= norm;
        }
        v = (0..n).map(|i| x[(i, 0)]).collect();
        let mv = m.dot(&Array1::from(v.clone()));
        let num = c_dot(&v, mv.as_slice().unwrap());
        let den = c_dot(&v, &v);
        if den.norm() < SELF_ORTHOGONAL_THRESHOLD {
            value = sigma;
        } else {
            value = num / den;
        }
    }
    let ratio = c_normalize(&mut v);
    let right = Array1::from(v);
    let c_norm_defect = (c_dot(right.as_slice().unwrap(), right.as_slice().unwrap())
        - Complex64::new(1.0, 0.0))
    .norm();
    Ok(EigenPair {
        value,
        left: right.clone(),
        right,
        c_norm_defect,
        reliable: ratio >= SELF_ORTHOGONAL_THRESHOLD,
    })
}

/// One eigenvalue followed across the θ grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub values: Vec<Complex64>,
    /// `|ΔW/Δθ|`: central differences inside, one-sided at the ends.
    pub rates: Vec<f64>,
    /// Some matching step had a runner-up within 3× the chosen distance.
    pub ambiguous: bool,
}

#[derive(Debug, Clone)]
pub struct ThetaScan {
    pub thetas: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

/// A runner-up closer than this multiple of the chosen distance makes the
/// match ambiguous.
pub const MATCH_RATIO: f64 = 3.0;

/// Evenly spaced grid `start, start+step, …` up to `stop` (inclusive within
/// a rounding margin).
pub fn theta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(CsmError::Config(format!(
            "empty theta window [{start}, {stop}] with step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Diagonalize on every grid angle and link eigenvalues into trajectories
/// by minimal complex distance.
pub fn theta_scan<F>(thetas: &[f64], eigenvalues_at: F) -> Result<ThetaScan>
where
    F: Fn(f64) -> Result<Vec<Complex64>> + Sync,
{
    if thetas.is_empty() {
        return Err(CsmError::Config("theta grid is empty".into()));
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CsmError::Config("theta grid must be strictly increasing".into()));
    }
    for &t in thetas {
        check_theta(t)?;
    }
    let spectra: Vec<Vec<Complex64>> = thetas
        .par_iter()
        .map(|&t| eigenvalues_at(t))
        .collect::<Result<_>>()?;
    let width = spectra[0].len();
    if spectra.iter().any(|s| s.len() != width) {
        return Err(CsmError::Eigensolver("spectrum size changed across the grid".into()));
    }

    let mut trajectories: Vec<Trajectory> = spectra[0]
        .iter()
        .map(|&w| Trajectory {
            values: vec![w],
            rates: Vec::new(),
            ambiguous: false,
        })
        .collect();
    for next in &spectra[1..] {
        link_step(&mut trajectories, next);
    }
    for traj in &mut trajectories {
        traj.rates = finite_difference_rates(thetas, &traj.values);
    }
    Ok(ThetaScan {
        thetas: thetas.to_vec(),
        trajectories,
    })
}

fn link_step(trajectories: &mut [Trajectory], next: &[Complex64]) {
    let n = next.len();
    // (nearest distance, nearest index, runner-up distance) per trajectory
    let nearest: Vec<(f64, usize, f64)> = trajectories
        .par_iter()
        .map(|t| {
            let last = *t.values.last().unwrap();
            let mut best = (f64::INFINITY, 0usize);
            let mut second = f64::INFINITY;
            for (j, w) in next.iter().enumerate() {
                let d = (w - last).norm();
                if d < best.0 {
                    second = best.0;
                    best = (d, j);
                } else if d < second {
                    second = d;
                }
            }
            (best.0, best.1, second)
        })
        .collect();
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by(|&a, &b| nearest[a].0.total_cmp(&nearest[b].0));
    let mut taken = vec![false; n];
    for t in order {
        let (d, j, second) = nearest[t];
        let pick = if !taken[j] {
            if second < MATCH_RATIO * d {
                trajectories[t].ambiguous = true;
            }
            j
        } else {
            // preferred partner already claimed
            trajectories[t].ambiguous = true;
            let last = *trajectories[t].values.last().unwrap();
            (0..n)
                .filter(|&k| !taken[k])
                .min_by(|&a, &b| (next[a] - last).norm().total_cmp(&(next[b] - last).norm()))
                .unwrap()
        };
        taken[pick] = true;
        trajectories[t].values.push(next[pick]);
    }
}

fn finite_difference_rates(thetas: &[f64], values: &[Complex64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![f64::INFINITY; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = match k {
                0 => (0, 1),
                _ if k == n - 1 => (n - 2, n - 1),
                _ => (k - 1, k + 1),
            };
            (values[b] - values[a]).norm() / (thetas[b] - thetas[a])
        })
        .collect()
}

/// Which stabilized trajectory to report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    LowestEnergy,
    NearestTo(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceCriteria {
    pub selection: Selection,
    /// A trajectory counts as stabilized when its smallest
    /// `|dW/dθ| / |W|` is below this. Rotated continuum states sit near 2.
    pub max_relative_rate: f64,
    /// Restrict the stationary point to this closed θ interval.
    pub window: Option<(f64, f64)>,
}

impl Default for ResonanceCriteria {
    fn default() -> Self {
        Self {
            selection: Selection::LowestEnergy,
            max_relative_rate: 0.1,
            window: None,
        }
    }
}

/// Grid point where a trajectory is most stationary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub trajectory: usize,
    pub theta_index: usize,
    pub theta: f64,
    pub value: Complex64,
    pub rate: f64,
    pub ambiguous: bool,
}

/// `Im W` must be below `−RESONANCE_IM_FLOOR·|W|`, so round-off on a real
/// spectrum is not mistaken for a decay width.
pub const RESONANCE_IM_FLOOR: f64 = 1e-10;

/// Stationary points of every stabilized trajectory with `Im W < 0`, sorted
/// by `Re W`.
pub fn stabilized_points(scan: &ThetaScan, criteria: &ResonanceCriteria) -> Vec<StationaryPoint> {
    let mut out: Vec<StationaryPoint> = scan
        .trajectories
        .iter()
        .enumerate()
        .filter_map(|(t, traj)| {
            (0..traj.values.len())
                .filter(|&k| {
                    let th = scan.thetas[k];
                    traj.values[k].im < -RESONANCE_IM_FLOOR * traj.values[k].norm()
                        && criteria.window.map_or(true, |(lo, hi)| th >= lo - 1e-12 && th <= hi + 1e-12)
                })
                .min_by(|&a, &b| traj.rates[a].total_cmp(&traj.rates[b]))
                .map(|k| StationaryPoint {
                    trajectory: t,
                    theta_index: k,
                    theta: scan.thetas[k],
                    value: traj.values[k],
                    rate: traj.rates[k],
                    ambiguous: traj.ambiguous,
                })
        })
        .filter(|p| p.rate.is_finite() && p.rate <= criteria.max_relative_rate * p.value.norm())
        .collect();
    out.sort_by(|a, b| a.value.re.total_cmp(&b.value.re));
    out
}

/// Pick the resonance among the stabilized trajectories.
pub fn find_resonance(scan: &ThetaScan, criteria: &ResonanceCriteria) -> Result<StationaryPoint> {
    let points = stabilized_points(scan, criteria);
    match criteria.selection {
        Selection::LowestEnergy => points.into_iter().next(),
        Selection::NearestTo(target) => points
            .into_iter()
            .min_by(|a, b| (a.value - target).norm().total_cmp(&(b.value - target).norm())),
    }
    .ok_or(CsmError::NoResonance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::BasisSpec;
    use crate::operators::{build_one_particle, ModelParams, PotentialKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z;
            }
        }
        m
    }

    #[test]
    fn one_by_one() {
        let m = Array2::from_elem((1, 1), Complex64::new(0.3, -0.7));
        let pairs = eigendecompose_matrix(m.view()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].value - Complex64::new(0.3, -0.7)).norm() < 1e-15);
        assert!((pairs[0].right[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reconstruction_and_biorthogonality() {
        let m = random_symmetric(6, 11);
        let pairs = eigendecompose_matrix(m.view()).unwrap();
        let n = 6;
        let mut recon = Array2::<Complex64>::zeros((n, n));
        let mut completeness = Array2::<Complex64>::zeros((n, n));
        for p in &pairs {
            assert!(p.reliable);
            assert!(p.c_norm_defect < 1e-8);
            assert!(p.residual(&m) < 1e-8);
            for i in 0..n {
                for j in 0..n {
                    recon[(i, j)] += p.value * p.right[i] * p.right[j];
                    completeness[(i, j)] += p.right[i] * p.left[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((recon[(i, j)] - m[(i, j)]).norm() < 1e-9);
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((completeness[(i, j)] - id).norm() < 1e-7);
            }
        }
        for a in &pairs {
            for b in &pairs {
                let expected = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                let dot = c_dot(a.right.as_slice().unwrap(), b.right.as_slice().unwrap());
                assert!((dot - expected).norm() < 1e-7);
            }
        }
        assert!(pairs.windows(2).all(|w| w[0].value.re <= w[1].value.re));
    }

    #[test]
    fn sign_convention() {
        let m = random_symmetric(5, 3);
        for p in eigendecompose_matrix(m.view()).unwrap() {
            let pivot = p
                .right
                .iter()
                .copied()
                .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
                .unwrap();
            assert!(pivot.re >= 0.0);
        }
    }

    #[test]
    fn degenerate_cluster_is_c_orthogonalized() {
        // e = d vvᵀ has an (n−1)-fold zero eigenvalue
        let n = 7;
        let v: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(1.0 / (k as f64 + 1.0), 0.1 * k as f64))
            .collect();
        let s = c_dot(&v, &v).sqrt();
        let v: Vec<Complex64> = v.iter().map(|z| z / s).collect();
        let m = Array2::from_shape_fn((n, n), |(i, j)| 0.8 * v[i] * v[j]);
        let pairs = eigendecompose_matrix(m.view()).unwrap();
        for a in 0..n {
            assert!(pairs[a].reliable);
            for b in 0..n {
                let dot = c_dot(pairs[a].right.as_slice().unwrap(), pairs[b].right.as_slice().unwrap());
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).norm() < 1e-7, "{a} {b} {dot}");
            }
        }
    }

    #[test]
    fn real_symmetric_limit_has_real_spectrum() {
        let spec = BasisSpec::new(60, 200).unwrap();
        let op = build_one_particle(&spec, &ModelParams::new(0.0, 0.0, PotentialKind::OpenWell).unwrap())
            .unwrap();
        for p in eigendecompose(&op).unwrap() {
            assert!(p.value.im.abs() < 1e-10);
        }
        // degenerate real levels keep real eigenvectors
        let mut m = Array2::<Complex64>::zeros((4, 4));
        for (i, d) in [1.0, 2.0, 2.0, 3.0].into_iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        let pairs = eigendecompose_matrix(m.view()).unwrap();
        for p in &pairs {
            assert!(p.right.iter().all(|z| z.im == 0.0));
            assert!(p.reliable);
        }
    }

    #[test]
    fn inverse_iteration_matches_full_decomposition() {
        let m = random_symmetric(30, 5);
        let pairs = eigendecompose_matrix(m.view()).unwrap();
        let target = &pairs[7];
        let refined = refine_eigenpair(m.view(), target.value + Complex64::new(1e-4, -1e-4)).unwrap();
        assert!((refined.value - target.value).norm() < 1e-10);
        let diff: f64 = refined
            .right
            .iter()
            .zip(target.right.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8);
        assert!(refined.residual(&m) < 1e-8);
    }

    #[test]
    fn grid_construction() {
        let g = theta_grid(0.1, 0.3, 0.01).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 0.3).abs() < 1e-12);
        assert!(theta_grid(0.3, 0.1, 0.01).is_err());
        assert!(theta_grid(0.1, 0.3, 0.0).is_err());
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let f = |_t: f64| Ok(vec![Complex64::new(1.0, 0.0)]);
        assert!(theta_scan(&[], f).is_err());
        assert!(theta_scan(&[0.2, 0.1], f).is_err());
        assert!(theta_scan(&[0.1, 0.9], f).is_err());
    }

    #[test]
    fn synthetic_trajectories() {
        // one fixed resonance among rotating continuum states
        let resonance = Complex64::new(0.4, -0.01);
        let f = |t: f64| {
            let mut v: Vec<Complex64> = (1..6)
                .map(|k| Complex64::from_polar(0.3 * k as f64, -2.0 * t))
                .collect();
            v.push(resonance + Complex64::new(1e-4 * t, 0.0));
            Ok(v)
        };
        let thetas = theta_grid(0.1, 0.3, 0.01).unwrap();
        let scan = theta_scan(&thetas, f).unwrap();
        assert_eq!(scan.trajectories.len(), 6);
        let point = find_resonance(&scan, &ResonanceCriteria::default()).unwrap();
        assert!((point.value - resonance).norm() < 1e-4);
        let continuum_min = scan
            .trajectories
            .iter()
            .filter(|t| (t.values[0] - resonance).norm() > 1e-3)
            .map(|t| t.rates.iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        assert!(continuum_min > 10.0 * point.rate);
    }

    #[test]
    fn no_resonance_without_negative_imaginary_part() {
        let f = |t: f64| Ok(vec![Complex64::new(1.0, 0.1 + t * 1e-6)]);
        let scan = theta_scan(&[0.1, 0.2, 0.3], f).unwrap();
        assert!(matches!(
            find_resonance(&scan, &ResonanceCriteria::default()),
            Err(CsmError::NoResonance)
        ));
        // round-off below a real eigenvalue is not a width
        let real = |_: f64| Ok(vec![Complex64::new(1.5, -1e-15)]);
        let scan = theta_scan(&[0.1, 0.2, 0.3], real).unwrap();
        assert!(find_resonance(&scan, &ResonanceCriteria::default()).is_err());
        let empty = ThetaScan {
            thetas: vec![0.2],
            trajectories: vec![],
        };
        assert!(matches!(
            find_resonance(&empty, &ResonanceCriteria::default()),
            Err(CsmError::NoResonance)
        ));
    }

    #[test]
    fn ambiguous_matches_are_flagged() {
        let f = |t: f64| {
            Ok(vec![
                Complex64::new(1.0 + t, 0.0),
                Complex64::new(1.0 + 1.5 * t, 0.0),
            ])
        };
        let scan = theta_scan(&[0.1, 0.2], f).unwrap();
        assert!(scan.trajectories.iter().any(|t| t.ambiguous));
    }
}
