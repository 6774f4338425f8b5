//! End-to-end runs: one-particle θ scans, two-boson resonances at a fixed
//! angle, and sweeps over the coupling.

use rayon::prelude::*;

use crate::error::{CsmError, Result};
use crate::hermite::BasisSpec;
use crate::operators::{build_one_particle, ModelParams, Parity, PotentialKind, TwoParticleAssembler};
use crate::schmidt::{analyze, coefficient_matrix, CorrelationAnalysis};
use crate::spectral::{
    eigenvalues, find_resonance, refine_eigenpair, stabilized_points, theta_scan, ResonanceCriteria,
    ResonanceState, StationaryPoint, ThetaScan,
};

/// Quadrature change above which a result is flagged.
pub const QUADRATURE_FLAG: f64 = 1e-11;
/// Disagreement between the two occupancy routes above which a result is
/// flagged.
pub const PATH_FLAG: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OneParticleScan {
    pub scan: ThetaScan,
    /// Stabilized trajectories, lowest `Re W` first.
    pub resonances: Vec<StationaryPoint>,
}

impl OneParticleScan {
    pub fn run(
        spec: &BasisSpec,
        potential: PotentialKind,
        thetas: &[f64],
        criteria: &ResonanceCriteria,
    ) -> Result<Self> {
        let scan = theta_scan(thetas, |theta| {
            let op = build_one_particle(spec, &ModelParams::new(theta, 0.0, potential)?)?;
            eigenvalues(op.entries.view())
        })?;
        let resonances = stabilized_points(&scan, criteria);
        Ok(Self { scan, resonances })
    }

    /// Eigenpair of the `k`-th resonance at its own stationary angle.
    pub fn state(&self, spec: &BasisSpec, potential: PotentialKind, k: usize) -> Result<ResonanceState> {
        let p = self.resonances.get(k).ok_or(CsmError::NoResonance)?;
        let op = build_one_particle(spec, &ModelParams::new(p.theta, 0.0, potential)?)?;
        let pair = refine_eigenpair(op.entries.view(), p.value)?;
        Ok(ResonanceState::new(pair, p.theta, p.rate))
    }
}

/// How the two-boson resonance is located.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub theta: f64,
    /// Spacing of the three-point stability probe around `theta`.
    pub probe_step: f64,
    pub criteria: ResonanceCriteria,
    /// Full θ grid; when set, the stationary angle is searched on it
    /// instead of fixing `theta`.
    pub restabilize: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            theta: 0.2,
            probe_step: 0.01,
            criteria: ResonanceCriteria::default(),
            restabilize: None,
        }
    }
}

/// Warnings attached to a result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub quadrature_defect: f64,
    pub symmetry_defect: f64,
    pub residual: f64,
    pub c_norm_defect: f64,
    pub path_defect: f64,
    pub lambda_sum_defect: f64,
    pub ambiguous_tracking: bool,
    pub unreliable_eigenvector: bool,
    pub unreliable_decomposition: bool,
    pub branch_ambiguous: bool,
    pub attractive: bool,
}

impl Diagnostics {
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.quadrature_defect > QUADRATURE_FLAG {
            out.push(format!("quadrature defect {:.3e}", self.quadrature_defect));
        }
        if self.path_defect > PATH_FLAG {
            out.push(format!("occupancy routes disagree by {:.3e}", self.path_defect));
        }
        if self.lambda_sum_defect > 1e-8 {
            out.push(format!("occupancies sum off by {:.3e}", self.lambda_sum_defect));
        }
        if self.ambiguous_tracking {
            out.push("ambiguous trajectory matching".into());
        }
        if self.unreliable_eigenvector {
            out.push("near self-orthogonal eigenvector".into());
        }
        if self.unreliable_decomposition {
            out.push("degenerate Schmidt decomposition".into());
        }
        if self.branch_ambiguous {
            out.push("occupancy on logarithm branch cut".into());
        }
        if self.attractive {
            out.push("attractive coupling".into());
        }
        out
    }

    pub fn is_clean(&self) -> bool {
        self.flags().is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TwoParticleResonance {
    pub g: f64,
    pub state: ResonanceState,
    pub analysis: CorrelationAnalysis,
    pub diagnostics: Diagnostics,
}

/// Holds the θ- and g-independent contact matrix for repeated solves.
#[derive(Debug, Clone)]
pub struct TwoBodySolver {
    assembler: TwoParticleAssembler,
}

impl TwoBodySolver {
    /// Resonances of interest are parity-even, so the even block suffices.
    pub fn new(spec: &BasisSpec, potential: PotentialKind) -> Result<Self> {
        Self::with_parity(spec, potential, Some(Parity::Even))
    }

    pub fn with_parity(spec: &BasisSpec, potential: PotentialKind, parity: Option<Parity>) -> Result<Self> {
        Ok(Self {
            assembler: TwoParticleAssembler::new(spec, potential, parity)?,
        })
    }

    pub fn from_assembler(assembler: TwoParticleAssembler) -> Self {
        Self { assembler }
    }

    pub fn assembler(&self) -> &TwoParticleAssembler {
        &self.assembler
    }

    fn probe_grid(&self, opts: &SolveOptions) -> Result<(Vec<f64>, Option<(f64, f64)>)> {
        if let Some(grid) = &opts.restabilize {
            return Ok((grid.clone(), opts.criteria.window));
        }
        let t = opts.theta;
        crate::operators::check_theta(t)?;
        let lo = (t - opts.probe_step).max(0.0);
        let hi = t + opts.probe_step;
        crate::operators::check_theta(hi)?;
        let grid = if lo < t { vec![lo, t, hi] } else { vec![t, hi] };
        Ok((grid, Some((t, t))))
    }

    pub fn scan(&self, g: f64, thetas: &[f64]) -> Result<ThetaScan> {
        theta_scan(thetas, |theta| {
            let op = self.assembler.operator(theta, g)?;
            eigenvalues(op.entries.view())
        })
    }

    pub fn solve(&self, g: f64, opts: &SolveOptions) -> Result<TwoParticleResonance> {
        let (grid, window) = self.probe_grid(opts)?;
        let scan = self.scan(g, &grid)?;
        let criteria = ResonanceCriteria { window, ..opts.criteria };
        let point = find_resonance(&scan, &criteria)?;

        let op = self.assembler.operator(point.theta, g)?;
        let pair = refine_eigenpair(op.entries.view(), point.value)?;
        let residual = pair.residual(&op.entries);
        let c_norm_defect = pair.c_norm_defect;
        let unreliable_eigenvector = !pair.reliable;
        let coeffs = coefficient_matrix(pair.right.as_slice().unwrap(), self.assembler.basis())?;
        let analysis = analyze(coeffs)?;
        let diagnostics = Diagnostics {
            quadrature_defect: op.quadrature_defect,
            symmetry_defect: op.symmetry_defect(),
            residual,
            c_norm_defect,
            path_defect: analysis.path_defect,
            lambda_sum_defect: (analysis.spectrum.lambda_sum() - 1.0).norm(),
            ambiguous_tracking: point.ambiguous,
            unreliable_eigenvector,
            unreliable_decomposition: !analysis.spectrum.reliable,
            branch_ambiguous: analysis.entropy.branch_ambiguous,
            attractive: g < 0.0,
        };
        Ok(TwoParticleResonance {
            g,
            state: ResonanceState::new(pair, point.theta, point.rate),
            analysis,
            diagnostics,
        })
    }

    /// Independent solves in input order; runs on the current rayon pool.
    pub fn sweep(&self, gs: &[f64], opts: &SolveOptions) -> Vec<Result<TwoParticleResonance>> {
        gs.par_iter().map(|&g| self.solve(g, opts)).collect()
    }
}

/// `g_min + k·(g_max − g_min)/(steps − 1)`.
pub fn coupling_grid(g_min: f64, g_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !g_min.is_finite() || !g_max.is_finite() || g_max < g_min {
        return Err(CsmError::Config(format!(
            "invalid coupling grid [{g_min}, {g_max}] with {steps} steps"
        )));
    }
    if steps == 1 {
        return Ok(vec![g_min]);
    }
    let h = (g_max - g_min) / (steps - 1) as f64;
    Ok((0..steps).map(|k| g_min + k as f64 * h).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn coupling_grid_endpoints() {
        let g = coupling_grid(0.0, 45.0, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.0);
        assert!((g[9] - 45.0).abs() < 1e-12);
        assert_eq!(coupling_grid(3.0, 3.0, 1).unwrap(), vec![3.0]);
        assert!(coupling_grid(1.0, 0.0, 3).is_err());
        assert!(coupling_grid(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn harmonic_ground_state_is_product() {
        let spec = BasisSpec::new(12, 40).unwrap();
        let solver = TwoBodySolver::new(&spec, PotentialKind::Harmonic).unwrap();
        let scan = solver.scan(0.0, &[0.09, 0.1, 0.11]).unwrap();
        let lowest = scan
            .trajectories
            .iter()
            .map(|t| t.values[1])
            .min_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap();
        assert!((lowest - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn sweep_preserves_order() {
        let spec = BasisSpec::new(16, 40).unwrap();
        let solver = TwoBodySolver::new(&spec, PotentialKind::OpenWell).unwrap();
        let opts = SolveOptions {
            criteria: ResonanceCriteria {
                max_relative_rate: 10.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let gs = [2.0, 0.0, 1.0];
        let out = solver.sweep(&gs, &opts);
        for (g, r) in gs.iter().zip(&out) {
            assert_eq!(r.as_ref().unwrap().g, *g);
        }
        let again = solver.solve(1.0, &opts).unwrap();
        assert_eq!(again.state.value(), out[2].as_ref().unwrap().state.value());
    }

    #[test]
    fn probe_rejects_angles_outside_domain() {
        let spec = BasisSpec::new(6, 20).unwrap();
        let solver = TwoBodySolver::new(&spec, PotentialKind::OpenWell).unwrap();
        let opts = SolveOptions {
            theta: 0.78,
            ..Default::default()
        };
        assert!(matches!(solver.solve(0.0, &opts), Err(CsmError::AngleDomain(_))));
    }
}
