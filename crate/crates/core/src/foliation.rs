//! Spectral Newton solver for CMC / STCMC / constant-expansion leaves,
//! sigma-sweeps building asymptotic foliations, and center-of-mass series.
//!
//! Round spheres are all critical for the flat functional, so the
//! linearization carries an approximate translation kernel in the l = 1
//! band. The solver splits it off: the inner Newton iteration acts on the
//! l = 0 and l >= 2 coefficients with the l = 1 block projected out of both
//! residual and update, while an outer damped fixed-point loop moves the
//! graph center until the l = 1 residual projection drops below tolerance.
//! An area-function critical-point estimate cross-checks the converged
//! center.


use crate::fit::{fit_series, SeriesFit};
use crate::idata::InitialData;
use crate::sphere::{lm_index, n_coeffs, SphereBasis, SphereQuadrature};
use crate::surfaces::{
    curvature_functional, surface_geometry_with_basis, LeafMode, SphereGraph, SurfaceGeom,
};
use crate::tensor::*;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

/// A single leaf equation: curvature functional = 2 / sigma.
#[derive(Debug, Clone, Copy)]
pub struct LeafProblem {
    pub mode: LeafMode,
    pub sigma: f64,
}

/// Solver options; tolerances scale with the leaf label.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub l_max: usize,
    /// Newton target: residual sup-norm <= newton_tol_factor * (2 / sigma).
    pub newton_tol_factor: f64,
    pub max_newton: usize,
    /// Center target: |sigma^2 T(res_1)| <= center_tol_factor * sigma.
    pub center_tol_factor: f64,
    pub max_center_iters: usize,
    /// Initial damping of the center fixed point, doubled on monotone
    /// progress and halved on rejection.
    pub damping: f64,
    /// Estimate the area-function critical point at convergence.
    pub cross_check_area: bool,
}

impl SolveOptions {
    pub fn new(l_max: usize) -> Self {
        SolveOptions {
            l_max,
            newton_tol_factor: 1e-10,
            max_newton: 30,
            center_tol_factor: 1e-10,
            max_center_iters: 50,
            damping: 0.5,
            cross_check_area: true,
        }
    }

    fn newton_tol(&self, sigma: f64) -> f64 {
        self.newton_tol_factor * 2.0 / sigma
    }

    fn center_tol(&self, sigma: f64) -> f64 {
        self.center_tol_factor * sigma
    }
}

/// A converged leaf with its geometry summary and solver diagnostics.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub problem: LeafProblem,
    pub graph: SphereGraph,
    pub area_g: f64,
    pub barycenter: Vec3,
    pub hawking_mass: f64,
    /// Node-wise sup norm of functional - 2/sigma at convergence.
    pub residual_sup: f64,
    /// |sigma^2 T(res_1)| at convergence (length units).
    pub kernel_projection: f64,
    /// Residual sup norms of the first inner Newton solve.
    pub newton_history: Vec<f64>,
    /// Inverse-power estimate of the smallest eigenvalue of the final
    /// Jacobian restricted to the mean-zero (l >= 1) block.
    pub min_eigenvalue_estimate: Option<f64>,
    /// Distance from the converged center to the estimated critical point
    /// of the area function (cross-check mode).
    pub area_step_discrepancy: Option<f64>,
    pub newton_iterations: usize,
    pub center_iterations: usize,
}

/// Maps the l = 1 coefficient block to the translation vector it represents:
/// delta rho = <v, omega> has coefficients v * sqrt(4 pi / 3).
fn translation_from_l1(coeffs: &[f64]) -> Vec3 {
    let s = (3.0 / (4.0 * PI)).sqrt();
    [
        s * coeffs[lm_index(1, 1)],
        s * coeffs[lm_index(1, -1)],
        s * coeffs[lm_index(1, 0)],
    ]
}

/// Spectral residual of the leaf equation on a graph: coefficients of
/// F(omega) = functional(omega) - 2/sigma, plus two node sup-norms: the full
/// one and the one with the l = 1 (kernel) component synthesized out. The
/// inner Newton steers by the projected norm; only the outer center loop can
/// remove the kernel part.
fn residual_with_sup(
    family: &dyn InitialData,
    graph: &SphereGraph,
    problem: &LeafProblem,
    quad: &SphereQuadrature,
    basis: &SphereBasis,
) -> Result<(Vec<f64>, f64, f64, SurfaceGeom)> {
    let geom = surface_geometry_with_basis(family, graph, quad, basis)?;
    let vals = curvature_functional(&geom, problem.mode)?;
    let target = 2.0 / problem.sigma;
    let f: Vec<f64> = vals.iter().map(|v| v - target).collect();
    let coeffs = basis.analyze(quad, &f);
    let mut sup = 0.0f64;
    let mut proj_sup = 0.0f64;
    for (node, v) in quad.nodes.iter().zip(f.iter()) {
        sup = sup.max(v.abs());
        let l1 = coeffs[lm_index(1, -1)] * basis.y(1, -1, node)
            + coeffs[lm_index(1, 0)] * basis.y(1, 0, node)
            + coeffs[lm_index(1, 1)] * basis.y(1, 1, node);
        proj_sup = proj_sup.max((v - l1).abs());
    }
    Ok((coeffs, sup, proj_sup, geom))
}

/// Spectral residual of the leaf equation (coefficient vector).
pub fn residual(
    family: &dyn InitialData,
    graph: &SphereGraph,
    problem: &LeafProblem,
    quad: &SphereQuadrature,
) -> Result<Vec<f64>> {
    let basis = SphereBasis::new(quad);
    residual_with_sup(family, graph, problem, quad, &basis).map(|(c, _, _, _)| c)
}

/// Active coefficient indices: l = 0 and l >= 2 (the l = 1 block is the
/// declared approximate kernel).
fn active_indices(l_max: usize) -> Vec<usize> {
    let mut idx = vec![0];
    idx.extend(4..n_coeffs(l_max));
    idx
}

/// Dense Jacobian d residual / d coefficient by one-sided directional
/// differences with step 1e-6 sigma, over all coefficients.
fn jacobian(
    family: &dyn InitialData,
    graph: &SphereGraph,
    problem: &LeafProblem,
    quad: &SphereQuadrature,
    basis: &SphereBasis,
    base: &[f64],
) -> Result<DMatrix<f64>> {
    let n = n_coeffs(graph.l_max);
    let h = 1e-6 * problem.sigma;
    let cols: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut bumped = graph.clone();
            bumped.coeffs[j] += h;
            let (res, _, _, _) = residual_with_sup(family, &bumped, problem, quad, basis)?;
            Ok(res.iter().zip(base.iter()).map(|(r, b)| (r - b) / h).collect())
        })
        .collect();
    let mut jac = DMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (i, v) in col.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

fn submatrix(jac: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| jac[(idx[i], idx[j])])
}

/// Smallest-|eigenvalue| estimate by inverse power iteration on a reduced
/// Jacobian block.
fn smallest_eigenvalue_estimate(block: &DMatrix<f64>) -> Option<f64> {
    let lu = block.clone().lu();
    let n = block.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..40 {
        let w = lu.solve(&v)?;
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        v = w / norm;
        // Rayleigh quotient on the original block.
        lambda = v.dot(&(block * &v));
    }
    Some(lambda)
}

struct InnerSolveState {
    jac: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Runs Newton on the active block until the kernel-projected node residual
/// meets half the leaf tolerance (the other half is the center loop's
/// budget). `state` supplies a previous factorization to try first; the
/// returned state is reusable. Appends projected residual sups to `history`.
#[allow(clippy::too_many_arguments)]
fn inner_newton(
    family: &dyn InitialData,
    graph: &mut SphereGraph,
    problem: &LeafProblem,
    quad: &SphereQuadrature,
    basis: &SphereBasis,
    opts: &SolveOptions,
    mut state: Option<InnerSolveState>,
    fresh_jacobian: bool,
    history: &mut Vec<f64>,
    total_iters: &mut usize,
) -> Result<(Vec<f64>, SurfaceGeom, InnerSolveState)> {
    let active = active_indices(graph.l_max);
    let tol = 0.5 * opts.newton_tol(problem.sigma);
    let (mut res, _, mut psup, mut geom) = residual_with_sup(family, graph, problem, quad, basis)?;
    history.push(psup);
    let mut increases = 0usize;
    let mut prev_sup = psup;
    for _ in 0..opts.max_newton {
        if psup <= tol {
            break;
        }
        *total_iters += 1;
        if fresh_jacobian {
            // True Newton: rebuild the linearization at the current iterate.
            state = None;
        }
        // Try a reused factorization first; rebuild when it stalls.
        let mut tried_fresh = state.is_none();
        loop {
            let st = match state.take() {
                Some(st) => st,
                None => {
                    let jac = jacobian(family, graph, problem, quad, basis, &res)?;
                    let lu = submatrix(&jac, &active).lu();
                    tried_fresh = true;
                    InnerSolveState { jac, lu }
                }
            };
            let rhs = DVector::from_fn(active.len(), |i, _| res[active[i]]);
            let delta = st.lu.solve(&rhs).ok_or_else(|| Error::KernelStuck {
                sigma: problem.sigma,
                reason: "singular reduced Jacobian".into(),
            })?;
            let mut trial = graph.clone();
            for (i, &k) in active.iter().enumerate() {
                trial.coeffs[k] -= delta[i];
            }
            let (tres, _, tsup, tgeom) = residual_with_sup(family, &trial, problem, quad, basis)?;
            if tsup < psup || tried_fresh {
                *graph = trial;
                res = tres;
                psup = tsup;
                geom = tgeom;
                state = Some(st);
                break;
            }
            // Reused Jacobian made no progress: rebuild once and retry.
        }
        history.push(psup);
        if psup > prev_sup {
            increases += 1;
            if increases >= 2 {
                return Err(Error::NewtonDiverged {
                    sigma: problem.sigma,
                    residual: psup,
                });
            }
        } else {
            increases = 0;
        }
        prev_sup = psup;
    }
    if psup > tol {
        return Err(Error::NewtonDiverged {
            sigma: problem.sigma,
            residual: psup,
        });
    }
    let state = match state {
        Some(s) => s,
        None => {
            let jac = jacobian(family, graph, problem, quad, basis, &res)?;
            let lu = submatrix(&jac, &active).lu();
            InnerSolveState { jac, lu }
        }
    };
    Ok((res, geom, state))
}

/// Solves one leaf by the reduction strategy described at module level.
pub fn solve_leaf(
    family: &dyn InitialData,
    problem: &LeafProblem,
    seed: &SphereGraph,
    opts: &SolveOptions,
) -> Result<Leaf> {
    let quad = crate::sphere::quad_sphere(opts.l_max)?;
    let basis = SphereBasis::new(&quad);
    solve_leaf_with(family, problem, seed, opts, &quad, &basis)
}

pub(crate) fn solve_leaf_with(
    family: &dyn InitialData,
    problem: &LeafProblem,
    seed: &SphereGraph,
    opts: &SolveOptions,
    quad: &SphereQuadrature,
    basis: &SphereBasis,
) -> Result<Leaf> {
    assert_eq!(seed.l_max, opts.l_max);
    let sigma = problem.sigma;
    let mut graph = seed.clone();
    // The l = 1 coefficients stay at zero: translations are carried by the
    // center alone.
    for k in 1..4 {
        graph.coeffs[k] = 0.0;
    }
    let mut history = Vec::new();
    let mut newton_iters = 0usize;

    let (mut res, mut geom, mut state) = inner_newton(
        family, &mut graph, problem, quad, basis, opts, None, true, &mut history,
        &mut newton_iters,
    )?;

    // Degeneracy probe: an exact translation kernel (flat data, E = 0) makes
    // the l = 1 residual insensitive to the center; refuse rather than pick a
    // center silently.
    let probe = 1e-3 * sigma;
    let t0 = translation_from_l1(&res);
    {
        let mut probed = graph.clone();
        probed.center[0] += probe;
        let (pres, _, _, _) = residual_with_sup(family, &probed, problem, quad, basis)?;
        let t1 = translation_from_l1(&pres);
        let sensitivity = norm(&sub3(&t1, &t0)) * sigma * sigma * sigma / probe;
        if sensitivity < 1e-4 {
            return Err(Error::KernelStuck {
                sigma,
                reason: format!(
                    "translation kernel is degenerate (sensitivity {sensitivity:.2e}); \
                     expected when the energy vanishes"
                ),
            });
        }
    }

    // Outer center loop: damped fixed point a <- a + lambda sigma^2 T(res_1).
    let center_tol = opts.center_tol(sigma);
    let mut lambda = opts.damping;
    let mut direction = 1.0f64;
    let mut center_iters = 0usize;
    let mut kernel_projection = sigma * sigma * norm(&translation_from_l1(&res));
    loop {
        if kernel_projection <= center_tol {
            break;
        }
        if center_iters >= opts.max_center_iters {
            return Err(Error::KernelStuck {
                sigma,
                reason: format!(
                    "center loop exhausted {} iterations (projection {kernel_projection:.2e}, \
                     tolerance {center_tol:.2e})",
                    opts.max_center_iters
                ),
            });
        }
        center_iters += 1;
        let t = translation_from_l1(&res);
        let mut step = scale3(&t, direction * lambda * sigma * sigma);
        // Keep the center move a small fraction of the leaf radius.
        let max_step = 0.2 * sigma;
        if norm(&step) > max_step {
            step = scale3(&step, max_step / norm(&step));
        }
        let saved_graph = graph.clone();
        let saved_res = res.clone();
        graph.center = add3(&graph.center, &step);
        let attempt = inner_newton(
            family, &mut graph, problem, quad, basis, opts, Some(state), false, &mut history,
            &mut newton_iters,
        )?;
        res = attempt.0;
        geom = attempt.1;
        state = attempt.2;
        let new_projection = sigma * sigma * norm(&translation_from_l1(&res));
        if new_projection < kernel_projection {
            kernel_projection = new_projection;
            lambda = (lambda * 2.0).min(1e6);
        } else {
            // Reject: restore, try the opposite direction once, then damp.
            graph = saved_graph;
            res = saved_res;
            if center_iters == 1 {
                direction = -direction;
            } else {
                lambda *= 0.25;
            }
            if lambda < 1e-6 {
                return Err(Error::KernelStuck {
                    sigma,
                    reason: "center fixed point stopped contracting".into(),
                });
            }
        }
    }

    let residual_sup = {
        let vals = curvature_functional(&geom, problem.mode)?;
        let target = 2.0 / sigma;
        vals.iter().fold(0.0f64, |m, v| m.max((v - target).abs()))
    };

    // Smallest eigenvalue of the mean-zero block of the final Jacobian.
    let l1_up: Vec<usize> = (1..n_coeffs(opts.l_max)).collect();
    let min_eigenvalue_estimate = smallest_eigenvalue_estimate(&submatrix(&state.jac, &l1_up));

    // Area-function cross check: distance from the converged center to the
    // critical point of a |-> |Sigma(a)|_g estimated by central differences.
    let area_step_discrepancy = if opts.cross_check_area {
        let delta = 1e-3 * sigma;
        let mut step = [0.0; 3];
        let mut ok = true;
        let g0 = geom.area_g;
        for i in 0..3 {
            let mut plus = graph.clone();
            plus.center[i] += delta;
            let mut minus = graph.clone();
            minus.center[i] -= delta;
            let ap = surface_geometry_with_basis(family, &plus, quad, basis)?.area_g;
            let am = surface_geometry_with_basis(family, &minus, quad, basis)?.area_g;
            let grad = (ap - am) / (2.0 * delta);
            let hess = (ap - 2.0 * g0 + am) / (delta * delta);
            if hess.abs() < 1e-300 {
                ok = false;
                break;
            }
            step[i] = -grad / hess;
        }
        if ok {
            Some(norm(&step))
        } else {
            None
        }
    } else {
        None
    };

    Ok(Leaf {
        problem: *problem,
        graph,
        area_g: geom.area_g,
        barycenter: geom.barycenter,
        hawking_mass: geom.hawking_mass,
        residual_sup,
        kernel_projection,
        newton_history: history,
        min_eigenvalue_estimate,
        area_step_discrepancy,
        newton_iterations: newton_iters,
        center_iterations: center_iters,
    })
}

/// A sigma-indexed family of solved leaves.
#[derive(Debug, Clone)]
pub struct Foliation {
    pub mode: LeafMode,
    pub leaves: Vec<Leaf>,
    /// Failed labels with the error description; the sweep continues past
    /// isolated failures.
    pub failures: Vec<(f64, String)>,
    /// Minimal radial gap between consecutive leaves (positive = disjoint).
    pub gaps: Vec<f64>,
}

/// Geometric sigma grid with a fixed leaf count per ln-decade.
pub fn sigma_grid(sigma_min: f64, sigma_max: f64, per_decade: usize) -> Vec<f64> {
    crate::charges::dense_ladder(sigma_min, sigma_max, per_decade)
}

/// Sweeps the sigma grid, seeding each leaf from the previous one.
pub fn sweep(
    family: &dyn InitialData,
    mode: LeafMode,
    sigmas: &[f64],
    opts: &SolveOptions,
) -> Result<Foliation> {
    if sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("sigma grid must be increasing".into()));
    }
    let quad = crate::sphere::quad_sphere(opts.l_max)?;
    let basis = SphereBasis::new(&quad);
    let m_hint = family.mass_hint().unwrap_or(0.0);
    let mut leaves: Vec<Leaf> = Vec::new();
    let mut failures = Vec::new();
    for &sigma in sigmas {
        let seed = match leaves.last() {
            Some(prev) => {
                let mut s = prev.graph.rescaled(sigma / prev.problem.sigma);
                s.center = prev.graph.center;
                s
            }
            None => SphereGraph::round(sigma * (1.0 - m_hint / sigma), [0.0; 3], opts.l_max),
        };
        let problem = LeafProblem { mode, sigma };
        match solve_leaf_with(family, &problem, &seed, opts, &quad, &basis) {
            Ok(leaf) => leaves.push(leaf),
            Err(e) => failures.push((sigma, e.to_string())),
        }
    }
    // Disjointness of consecutive leaves: the inner leaf's largest radius
    // about its center against the outer leaf's smallest distance from the
    // same center.
    let mut gaps = Vec::new();
    for pair in leaves.windows(2) {
        let inner = &pair[0];
        let outer = &pair[1];
        let synth_in = basis.synthesize_with_derivatives(&inner.graph.coeffs);
        let max_in = synth_in
            .iter()
            .fold(0.0f64, |m, s| m.max(s[0]));
        let synth_out = basis.synthesize_with_derivatives(&outer.graph.coeffs);
        let min_out = quad
            .nodes
            .iter()
            .zip(synth_out.iter())
            .map(|(node, s)| {
                let w = crate::sphere::direction(node.theta, node.phi);
                let x = vec3(|i| outer.graph.center[i] + s[0] * w[i]);
                norm(&sub3(&x, &inner.graph.center))
            })
            .fold(f64::INFINITY, f64::min);
        gaps.push(min_out - max_in);
    }
    Ok(Foliation {
        mode,
        leaves,
        failures,
        gaps,
    })
}

/// Center-of-mass series diagnostics for a foliation.
#[derive(Debug, Clone)]
pub struct CenterReport {
    pub sigmas: Vec<f64>,
    pub barycenters: Vec<Vec3>,
    pub fits: [SeriesFit; 3],
    /// For STCMC sweeps: |z(sigma) - (Z_BORT(S_sigma) + Z0(S_sigma))| trend.
    pub stcmc_consistency: Option<Vec<f64>>,
}

/// Extrapolates the barycenter series componentwise; for STCMC foliations it
/// also cross-checks the center series against the corrected charge series
/// on coordinate spheres of the same label.
pub fn center_limits(
    family: &dyn InitialData,
    fol: &Foliation,
    quad: &SphereQuadrature,
) -> Result<CenterReport> {
    if fol.leaves.len() < 6 {
        return Err(Error::FitFailed {
            reason: format!("need >= 6 leaves, got {}", fol.leaves.len()),
        });
    }
    let sigmas: Vec<f64> = fol.leaves.iter().map(|l| l.problem.sigma).collect();
    let barycenters: Vec<Vec3> = fol.leaves.iter().map(|l| l.barycenter).collect();
    let fit_i = |i: usize| -> Result<SeriesFit> {
        let ys: Vec<f64> = barycenters.iter().map(|z| z[i]).collect();
        fit_series(&sigmas, &ys)
    };
    let fits = [fit_i(0)?, fit_i(1)?, fit_i(2)?];

    let stcmc_consistency = if fol.mode == LeafMode::Stcmc {
        // Normalize the charge centers by the extrapolated energy.
        let ladder: Vec<f64> = sigmas.clone();
        let report = crate::charges::charge_ladder(family, &ladder, quad)?;
        let trend = fol
            .leaves
            .iter()
            .zip(report.samples.iter())
            .map(|(leaf, s)| match (s.z_bort, s.z0) {
                (Some(z), Some(z0)) => {
                    norm(&vec3(|i| leaf.barycenter[i] - (z[i] + z0[i])))
                }
                _ => f64::NAN,
            })
            .collect();
        Some(trend)
    } else {
        None
    };

    Ok(CenterReport {
        sigmas,
        barycenters,
        fits,
        stcmc_consistency,
    })
}

/// Spectrum of the solver's linearization at a converged leaf, restricted to
/// mean-zero functions, with the translation block both included (l >= 1)
/// and excluded (l >= 2). Eigenvalues are sorted ascending by real part;
/// the linearization is labeled as the solver's own, not any operator from
/// the uniqueness literature.
#[derive(Debug, Clone)]
pub struct StabilitySpectrum {
    pub with_translations: Vec<f64>,
    pub without_translations: Vec<f64>,
}

/// Dense Jacobian of the leaf residual at a solved leaf (diagnostics).
pub fn leaf_jacobian(
    family: &dyn InitialData,
    leaf: &Leaf,
    opts: &SolveOptions,
) -> Result<DMatrix<f64>> {
    let quad = crate::sphere::quad_sphere(opts.l_max)?;
    let basis = SphereBasis::new(&quad);
    let (res, _, _, _) = residual_with_sup(family, &leaf.graph, &leaf.problem, &quad, &basis)?;
    jacobian(family, &leaf.graph, &leaf.problem, &quad, &basis, &res)
}

/// Computes the smallest eigenvalues of the leaf Jacobian. The blocks are
/// symmetrized before the eigensolve (the linearization is self-adjoint up
/// to the metric deviation); the recorded asymmetry defect guards against
/// reading a genuinely non-normal matrix as if it were symmetric.
pub fn stability_indicator(
    family: &dyn InitialData,
    leaf: &Leaf,
    opts: &SolveOptions,
    count: usize,
) -> Result<StabilitySpectrum> {
    let jac = leaf_jacobian(family, leaf, opts)?;
    let spectrum = |idx: &[usize]| -> Result<Vec<f64>> {
        let block = submatrix(&jac, idx);
        let scale = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0f64;
        for i in 0..block.nrows() {
            for j in 0..i {
                asym = asym.max((block[(i, j)] - block[(j, i)]).abs());
            }
        }
        if asym > 0.05 * scale {
            return Err(Error::EigSolverFailed {
                reason: format!(
                    "linearization too far from symmetric (defect {asym:.2e} vs scale {scale:.2e})"
                ),
            });
        }
        let sym = DMatrix::from_fn(block.nrows(), block.ncols(), |i, j| {
            0.5 * (block[(i, j)] + block[(j, i)])
        });
        let mut reals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().cloned().collect();
        reals.sort_by(f64::total_cmp);
        reals.truncate(count);
        Ok(reals)
    };
    let n = n_coeffs(opts.l_max);
    let with_tr: Vec<usize> = (1..n).collect();
    let without_tr: Vec<usize> = (4..n).collect();
    Ok(StabilitySpectrum {
        with_translations: spectrum(&with_tr)?,
        without_translations: spectrum(&without_tr)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idata::DataFamily;
    use crate::sphere::quad_sphere;
    use approx::assert_relative_eq;

    /// Areal radius of the Schwarzschild CMC sphere with label sigma:
    /// bisection on (2/r) sqrt(1 - 2m/r) = 2/sigma.
    fn schwarzschild_cmc_radius(m: f64, sigma: f64) -> f64 {
        let f = |r: f64| (2.0 / r) * (1.0 - 2.0 * m / r).sqrt() - 2.0 / sigma;
        let mut lo = 2.0 * m * 1.01;
        let mut hi = 2.0 * sigma;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn flat_round_sphere_has_zero_residual() {
        let quad = quad_sphere(8).unwrap();
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma: 10.0,
        };
        let graph = SphereGraph::round(10.0, [2.0, -1.0, 0.5], 8);
        let res = residual(&DataFamily::Flat, &graph, &problem, &quad).unwrap();
        for (k, c) in res.iter().enumerate() {
            assert!(c.abs() < 1e-12, "coefficient {k} = {c}");
        }
    }

    #[test]
    fn schwarzschild_round_leaf_residual_via_radius_oracle() {
        let quad = quad_sphere(8).unwrap();
        let sigma = 50.0;
        let r = schwarzschild_cmc_radius(1.0, sigma);
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma,
        };
        let graph = SphereGraph::round(r, [0.0; 3], 8);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let res = residual(&fam, &graph, &problem, &quad).unwrap();
        for c in &res {
            assert!(c.abs() < 1e-10, "residual {c}");
        }
    }

    #[test]
    fn flat_solve_reports_kernel_degeneracy() {
        let opts = SolveOptions::new(8);
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma: 10.0,
        };
        let seed = SphereGraph::round(9.0, [0.0; 3], 8);
        let got = solve_leaf(&DataFamily::Flat, &problem, &seed, &opts);
        assert!(
            matches!(got, Err(Error::KernelStuck { .. })),
            "flat CMC spheres are non-unique; got {got:?}"
        );
    }

    #[test]
    fn schwarzschild_leaf_is_round_and_centered() {
        let opts = SolveOptions::new(12);
        let sigma = 50.0;
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma,
        };
        // Crude seed, slightly off-center.
        let seed = SphereGraph::round(sigma, [0.4, -0.3, 0.2], 12);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let leaf = solve_leaf(&fam, &problem, &seed, &opts).unwrap();

        assert!(leaf.residual_sup <= 1e-10 * (2.0 / sigma) * 1.0001);
        // All l >= 1 structure is tiny and the center returns to the origin.
        assert!(leaf.graph.max_nonround_coeff() <= 1e-9 * sigma);
        assert!(norm(&leaf.barycenter) < 1e-4 * sigma, "{:?}", leaf.barycenter);
        // Mean radius solves the scalar oracle.
        let oracle = schwarzschild_cmc_radius(1.0, sigma);
        assert_relative_eq!(leaf.graph.mean_radius(), oracle, max_relative = 1e-8);
        assert_relative_eq!(leaf.hawking_mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn stcmc_equals_cmc_without_extrinsic_curvature() {
        let opts = SolveOptions::new(10);
        let sigma = 40.0;
        let seed = SphereGraph::round(sigma - 1.0, [0.0; 3], 10);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let cmc = solve_leaf(
            &fam,
            &LeafProblem {
                mode: LeafMode::Cmc,
                sigma,
            },
            &seed,
            &opts,
        )
        .unwrap();
        for mode in [LeafMode::Stcmc, LeafMode::CePlus, LeafMode::CeMinus] {
            let other = solve_leaf(&fam, &LeafProblem { mode, sigma }, &seed, &opts).unwrap();
            for (a, b) in cmc.graph.coeffs.iter().zip(other.graph.coeffs.iter()) {
                assert!(
                    (a - b).abs() <= 1e-10 * sigma,
                    "{} leaf drifted from CMC: {a} vs {b}",
                    mode.name()
                );
            }
        }
    }

    #[test]
    fn newton_contraction_is_quadratic() {
        // Seed far enough that several Newton steps are visible.
        let opts = SolveOptions::new(10);
        let sigma = 50.0;
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma,
        };
        let seed = SphereGraph::round(sigma * 1.05, [0.0; 3], 10);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let leaf = solve_leaf(&fam, &problem, &seed, &opts).unwrap();
        let target = 2.0 / sigma;
        let qs: Vec<f64> = leaf.newton_history.iter().map(|r| r / target).collect();
        let floor = 1e-12;
        let mut checked = 0;
        for w in qs.windows(2) {
            if w[0] < 1e-3 && w[0] > 100.0 * floor {
                assert!(
                    w[1] <= (100.0 * w[0] * w[0]).max(floor),
                    "not quadratic: {} -> {} (history {qs:?})",
                    w[0],
                    w[1]
                );
                checked += 1;
            }
        }
        assert!(checked >= 1, "no contraction pairs observed: {qs:?}");
    }

    #[test]
    fn translation_eigenvalues_scale_like_sigma_cubed() {
        let opts = SolveOptions::new(8);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let mut estimates = Vec::new();
        for sigma in [50.0, 100.0] {
            let seed = SphereGraph::round(sigma - 1.0, [0.0; 3], 8);
            let problem = LeafProblem {
                mode: LeafMode::Cmc,
                sigma,
            };
            let leaf = solve_leaf(&fam, &problem, &seed, &opts).unwrap();
            let lam = leaf.min_eigenvalue_estimate.unwrap();
            // ~ 6 m / sigma^3, positive for positive mass.
            assert!(lam > 0.0);
            assert_relative_eq!(lam, 6.0 / sigma.powi(3), max_relative = 0.5);
            estimates.push(lam);
        }
        let ratio = estimates[0] / estimates[1];
        assert_relative_eq!(ratio, 8.0, max_relative = 0.3);
    }

    #[test]
    fn stability_spectrum_blocks() {
        let opts = SolveOptions::new(8);
        let sigma = 50.0;
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let seed = SphereGraph::round(sigma - 1.0, [0.0; 3], 8);
        let problem = LeafProblem {
            mode: LeafMode::Cmc,
            sigma,
        };
        let leaf = solve_leaf(&fam, &problem, &seed, &opts).unwrap();
        let spec = stability_indicator(&fam, &leaf, &opts, 5).unwrap();
        // Translation block: three near-kernel eigenvalues ~ 6m/sigma^3.
        for lam in &spec.with_translations[..3] {
            assert!(*lam > 0.0 && *lam < 1e-3);
        }
        // Mean-zero non-translation block bounded away from zero by the
        // flat-comparison gap 0.5 * (2 / sigma^2).
        assert!(spec.without_translations[0] >= 0.5 * 2.0 / (sigma * sigma));
    }

    #[test]
    fn schwarzschild_sweep_is_round_disjoint_and_massive() {
        let opts = SolveOptions::new(10);
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let sigmas: Vec<f64> = (0..7).map(|k| 50.0 * 2f64.powi(k)).collect();
        let fol = sweep(&fam, LeafMode::Cmc, &sigmas, &opts).unwrap();
        assert!(fol.failures.is_empty(), "failures: {:?}", fol.failures);
        assert_eq!(fol.leaves.len(), 7);
        for leaf in &fol.leaves {
            assert!(leaf.graph.max_nonround_coeff() <= 1e-9 * leaf.problem.sigma);
            assert_relative_eq!(leaf.hawking_mass, 1.0, epsilon = 1e-6);
            let oracle = schwarzschild_cmc_radius(1.0, leaf.problem.sigma);
            assert_relative_eq!(leaf.graph.mean_radius(), oracle, max_relative = 1e-8);
        }
        for gap in &fol.gaps {
            assert!(*gap > 0.0, "leaves must be pairwise disjoint");
        }
        let quad = quad_sphere(10).unwrap();
        let report = center_limits(&fam, &fol, &quad).unwrap();
        for f in &report.fits {
            assert!(f.limit.abs() < 1e-3);
        }
    }

    #[test]
    fn transformed_leaf_tracks_the_rigid_motion() {
        // Solving in pulled-back data yields the pulled-back leaf:
        // z' = Q^t (z - b).
        let opts = SolveOptions::new(10);
        let sigma = 60.0;
        let fam = DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let problem = LeafProblem {
            mode: LeafMode::Stcmc,
            sigma,
        };
        let seed = SphereGraph::round(sigma - 1.0, [0.0; 3], 10);
        let base = solve_leaf(&fam, &problem, &seed, &opts).unwrap();

        let q = rotation(&[0.2, 1.0, -0.4], 0.9);
        let b = [1.5, -0.7, 2.2];
        let moved = fam.clone().rigid_transform(q, b).unwrap();
        let leaf = solve_leaf(&moved, &problem, &seed, &opts).unwrap();
        let expected = matvec(&transpose(&q), &sub3(&base.barycenter, &b));
        for i in 0..3 {
            assert!(
                (leaf.barycenter[i] - expected[i]).abs() < 1e-8 * sigma,
                "barycenter equivariance: {:?} vs {:?}",
                leaf.barycenter,
                expected
            );
        }
    }
}
