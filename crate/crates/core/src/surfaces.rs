//! Geometry of closed surfaces given as radial graphs over round spheres:
//! fundamental forms, mean curvature, the spacetime mean curvature
//! sqrt(H^2 - (tr_S K)^2), areas, barycenters, and the Hawking mass.
//!
//! A surface is `x(omega) = a + rho(omega) omega` with `rho` expanded in the
//! real orthonormal harmonics of module [`crate::sphere`]; the normal is
//! outward (increasing rho), so round spheres have positive mean curvature.

use crate::curvature::christoffel_from;
use crate::idata::InitialData;
use crate::sphere::{
    direction, direction_dphi, direction_dphi_dphi, direction_dtheta, direction_dtheta_dphi,
    lm_index, n_coeffs, SphereBasis, SphereQuadrature,
};
use crate::tensor::*;
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Radial graph over a round sphere: center and harmonic coefficients of
/// the radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGraph {
    pub center: Point3,
    pub l_max: usize,
    /// Coefficients `c_lm` of `rho(omega)`, indexed by [`lm_index`].
    pub coeffs: Vec<f64>,
}

impl SphereGraph {
    /// Round sphere of the given radius.
    pub fn round(radius: f64, center: Point3, l_max: usize) -> Self {
        let mut coeffs = vec![0.0; n_coeffs(l_max)];
        coeffs[lm_index(0, 0)] = radius * (4.0 * PI).sqrt();
        SphereGraph {
            center,
            l_max,
            coeffs,
        }
    }

    /// Mean coordinate radius `c_00 / sqrt(4 pi)`.
    pub fn mean_radius(&self) -> f64 {
        self.coeffs[lm_index(0, 0)] / (4.0 * PI).sqrt()
    }

    /// Scales the radial function by a constant factor.
    pub fn rescaled(&self, factor: f64) -> Self {
        SphereGraph {
            center: self.center,
            l_max: self.l_max,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Largest coefficient magnitude over l >= 1.
    pub fn max_nonround_coeff(&self) -> f64 {
        self.coeffs[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Leaf equation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafMode {
    Cmc,
    Stcmc,
    CePlus,
    CeMinus,
}

impl LeafMode {
    pub fn name(&self) -> &'static str {
        match self {
            LeafMode::Cmc => "cmc",
            LeafMode::Stcmc => "stcmc",
            LeafMode::CePlus => "ce+",
            LeafMode::CeMinus => "ce-",
        }
    }
}

/// Per-node surface data.
#[derive(Debug, Clone)]
pub struct NodeGeom {
    pub theta: f64,
    pub phi: f64,
    pub position: Point3,
    /// Outward g-unit normal.
    pub normal: Vec3,
    pub mean_curvature: f64,
    pub tr_sigma_k: f64,
    /// sqrt(det q_g) / sin(theta): the g-area density against dOmega weights.
    pub area_density_g: f64,
    pub area_density_delta: f64,
}

/// A surface with its pointwise and integrated geometry.
#[derive(Debug, Clone)]
pub struct SurfaceGeom {
    pub nodes: Vec<NodeGeom>,
    pub area_g: f64,
    pub area_delta: f64,
    /// Euclidean-area barycenter.
    pub barycenter: Vec3,
    pub hawking_mass: f64,
}

/// Evaluates the full geometry of a graph surface in the given data.
pub fn surface_geometry(
    family: &dyn InitialData,
    graph: &SphereGraph,
    quad: &SphereQuadrature,
) -> Result<SurfaceGeom> {
    let basis = SphereBasis::new(quad);
    surface_geometry_with_basis(family, graph, quad, &basis)
}

/// Same as [`surface_geometry`] with a prebuilt basis (solver hot path).
pub fn surface_geometry_with_basis(
    family: &dyn InitialData,
    graph: &SphereGraph,
    quad: &SphereQuadrature,
    basis: &SphereBasis,
) -> Result<SurfaceGeom> {
    assert_eq!(
        graph.l_max, quad.l_max,
        "graph band limit must match quadrature"
    );
    let synth = basis.synthesize_with_derivatives(&graph.coeffs);
    let nodes: Vec<NodeGeom> = quad
        .nodes
        .par_iter()
        .zip(synth.par_iter())
        .map(|(node, s)| node_geometry(family, &graph.center, node.theta, node.phi, s))
        .collect::<Result<_>>()?;

    let mut area_g = 0.0;
    let mut area_delta = 0.0;
    let mut z = [0.0; 3];
    let mut willmore = 0.0;
    for (node, ng) in quad.nodes.iter().zip(nodes.iter()) {
        area_g += node.weight * ng.area_density_g;
        area_delta += node.weight * ng.area_density_delta;
        for i in 0..3 {
            z[i] += node.weight * ng.area_density_delta * ng.position[i];
        }
        willmore += node.weight * ng.area_density_g * ng.mean_curvature * ng.mean_curvature;
    }
    let barycenter = scale3(&z, 1.0 / area_delta);
    let hawking_mass = (area_g / (16.0 * PI)).sqrt() * (1.0 - willmore / (16.0 * PI));
    Ok(SurfaceGeom {
        nodes,
        area_g,
        area_delta,
        barycenter,
        hawking_mass,
    })
}

fn node_geometry(
    family: &dyn InitialData,
    center: &Point3,
    theta: f64,
    phi: f64,
    synth: &[f64; 6],
) -> Result<NodeGeom> {
    let [rho, rho_t, rho_p, rho_tt, rho_tp, rho_pp] = *synth;
    if rho <= 0.0 {
        return Err(Error::DegenerateSurface { theta, phi });
    }
    let w = direction(theta, phi);
    let wt = direction_dtheta(theta, phi);
    let wp = direction_dphi(theta, phi);
    let wtp = direction_dtheta_dphi(theta, phi);
    let wpp = direction_dphi_dphi(theta, phi);

    let x = vec3(|i| center[i] + rho * w[i]);
    let xt = vec3(|i| rho_t * w[i] + rho * wt[i]);
    let xp = vec3(|i| rho_p * w[i] + rho * wp[i]);
    // omega_theta_theta = -omega.
    let xtt = vec3(|i| rho_tt * w[i] + 2.0 * rho_t * wt[i] - rho * w[i]);
    let xtp = vec3(|i| rho_tp * w[i] + rho_t * wp[i] + rho_p * wt[i] + rho * wtp[i]);
    let xpp = vec3(|i| rho_pp * w[i] + 2.0 * rho_p * wp[i] + rho * wpp[i]);

    let s = family.geometry(&x)?;
    let ginv = s.g.inverse().ok_or(Error::DegenerateSurface { theta, phi })?;
    let gamma = christoffel_from(ginv.as_mat(), &s.dg);

    // Induced metrics (g and delta).
    let q = [
        [s.g.bilinear(&xt, &xt), s.g.bilinear(&xt, &xp)],
        [s.g.bilinear(&xp, &xt), s.g.bilinear(&xp, &xp)],
    ];
    let det_q = q[0][0] * q[1][1] - q[0][1] * q[1][0];
    if !(q[0][0] > 0.0 && det_q > 0.0) {
        return Err(Error::DegenerateSurface { theta, phi });
    }
    let qd = [
        [dot(&xt, &xt), dot(&xt, &xp)],
        [dot(&xp, &xt), dot(&xp, &xp)],
    ];
    let det_qd = qd[0][0] * qd[1][1] - qd[0][1] * qd[1][0];

    // Outward g-unit normal from the Euclidean conormal x_t x x_p.
    let n_cov = cross(&xt, &xp);
    let v = matvec(ginv.as_mat(), &n_cov);
    let len = dot(&v, &n_cov).sqrt();
    let normal = scale3(&v, 1.0 / len);

    // Second fundamental form h_AB = -<nabla_A x_B, nu>_g; the normal
    // covector is n_cov / len.
    let nu_cov = scale3(&n_cov, 1.0 / len);
    let second = |xa: &Vec3, xb: &Vec3, xab: &Vec3| -> f64 {
        -sum1(|j| nu_cov[j] * (xab[j] + sum2(|k, l| gamma[j][k][l] * xa[k] * xb[l])))
    };
    let h_tt = second(&xt, &xt, &xtt);
    let h_tp = second(&xt, &xp, &xtp);
    let h_pp = second(&xp, &xp, &xpp);
    let mean_curvature = (q[1][1] * h_tt - 2.0 * q[0][1] * h_tp + q[0][0] * h_pp) / det_q;

    // tr_S K = tr_g K - K(nu, nu).
    let tr_gk = sum2(|i, j| ginv.get(i, j) * s.k.get(i, j));
    let tr_sigma_k = tr_gk - s.k.bilinear(&normal, &normal);

    let sin_t = theta.sin();
    Ok(NodeGeom {
        theta,
        phi,
        position: x,
        normal,
        mean_curvature,
        tr_sigma_k,
        area_density_g: det_q.sqrt() / sin_t,
        area_density_delta: det_qd.sqrt() / sin_t,
    })
}

/// Per-node values of the selected curvature functional.
pub fn curvature_functional(geom: &SurfaceGeom, mode: LeafMode) -> Result<Vec<f64>> {
    geom.nodes
        .iter()
        .map(|n| match mode {
            LeafMode::Cmc => Ok(n.mean_curvature),
            LeafMode::Stcmc => {
                let rad = n.mean_curvature * n.mean_curvature - n.tr_sigma_k * n.tr_sigma_k;
                if rad <= 0.0 {
                    Err(Error::NonSpacelikeMeanCurvature { radicand: rad })
                } else {
                    Ok(rad.sqrt())
                }
            }
            LeafMode::CePlus => Ok(n.mean_curvature + n.tr_sigma_k),
            LeafMode::CeMinus => Ok(n.mean_curvature - n.tr_sigma_k),
        })
        .collect()
}

/// Hawking mass `sqrt(|S|_g / 16 pi) (1 - (1/16 pi) int H^2 dA_g)`.
pub fn hawking_mass(geom: &SurfaceGeom) -> f64 {
    geom.hawking_mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idata::DataFamily;
    use crate::sphere::quad_sphere;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, radius: f64, l_max: usize, amp: f64) -> SphereGraph {
        let mut g = SphereGraph::round(radius, [0.0; 3], l_max);
        for l in 1..=4usize {
            for m in -(l as i64)..=(l as i64) {
                g.coeffs[lm_index(l, m)] = amp * radius * rng.gen_range(-1.0..1.0);
            }
        }
        g
    }

    #[test]
    fn euclidean_sphere_curvature_and_barycenter() {
        let quad = quad_sphere(12).unwrap();
        let a = [1.5, -2.0, 0.7];
        let graph = SphereGraph::round(10.0, a, 12);
        let geom = surface_geometry(&DataFamily::Flat, &graph, &quad).unwrap();
        for n in &geom.nodes {
            assert_relative_eq!(n.mean_curvature, 0.2, epsilon = 1e-10);
            assert_relative_eq!(n.tr_sigma_k, 0.0, epsilon = 1e-14);
        }
        assert_relative_eq!(geom.area_g, 4.0 * PI * 100.0, epsilon = 1e-8);
        for i in 0..3 {
            assert_relative_eq!(geom.barycenter[i], a[i], epsilon = 1e-12);
        }
        assert!(geom.hawking_mass.abs() < 1e-12);
    }

    #[test]
    fn schwarzschild_round_sphere_curvature_and_hawking_mass() {
        // Areal coordinate sphere r0: H = (2/r0) sqrt(1 - 2m/r0) and
        // m_H = m exactly.
        let quad = quad_sphere(16).unwrap();
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        for r0 in [10.0, 25.0] {
            let graph = SphereGraph::round(r0, [0.0; 3], 16);
            let geom = surface_geometry(&fam, &graph, &quad).unwrap();
            let want = (2.0 / r0) * (1.0 - 2.0 / r0).sqrt();
            for n in &geom.nodes {
                assert_relative_eq!(n.mean_curvature, want, epsilon = 1e-9);
            }
            assert_relative_eq!(geom.area_g, 4.0 * PI * r0 * r0, epsilon = 1e-7);
            assert_relative_eq!(geom.hawking_mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn normals_have_unit_g_length() {
        let quad = quad_sphere(10).unwrap();
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let graph = random_graph(&mut rng, 20.0, 10, 0.02);
        let geom = surface_geometry(&fam, &graph, &quad).unwrap();
        for ng in geom.nodes.iter() {
            let x = ng.position;
            let s = fam.geometry(&x).unwrap();
            let len = s.g.bilinear(&ng.normal, &ng.normal);
            assert_relative_eq!(len, 1.0, epsilon = 1e-10);
            // Outward.
            let radial = vec3(|i| x[i] - graph.center[i]);
            assert!(dot(&ng.normal, &radial) > 0.0, "normal flipped");
        }
    }

    #[test]
    fn tr_sigma_k_matches_tangential_trace() {
        // Independent construction: tr_S K = q^{AB} K(x_A, x_B) with the
        // tangent basis, rather than tr_g K - K(nu, nu).
        let quad = quad_sphere(10).unwrap();
        let fam = DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let graph = random_graph(&mut rng, 60.0, 10, 0.01);
        let basis = SphereBasis::new(&quad);
        let synth = basis.synthesize_with_derivatives(&graph.coeffs);
        let geom = surface_geometry(&fam, &graph, &quad).unwrap();
        for ((node, ng), s) in quad.nodes.iter().zip(geom.nodes.iter()).zip(synth.iter()) {
            let [rho, rho_t, rho_p, ..] = *s;
            let w = direction(node.theta, node.phi);
            let wt = direction_dtheta(node.theta, node.phi);
            let wp = direction_dphi(node.theta, node.phi);
            let xt = vec3(|i| rho_t * w[i] + rho * wt[i]);
            let xp = vec3(|i| rho_p * w[i] + rho * wp[i]);
            let smp = fam.geometry(&ng.position).unwrap();
            let q = [
                [smp.g.bilinear(&xt, &xt), smp.g.bilinear(&xt, &xp)],
                [smp.g.bilinear(&xp, &xt), smp.g.bilinear(&xp, &xp)],
            ];
            let det = q[0][0] * q[1][1] - q[0][1] * q[1][0];
            let qinv = [
                [q[1][1] / det, -q[0][1] / det],
                [-q[1][0] / det, q[0][0] / det],
            ];
            let k_tt = smp.k.bilinear(&xt, &xt);
            let k_tp = smp.k.bilinear(&xt, &xp);
            let k_pp = smp.k.bilinear(&xp, &xp);
            let oracle = qinv[0][0] * k_tt + 2.0 * qinv[0][1] * k_tp + qinv[1][1] * k_pp;
            assert!(
                (ng.tr_sigma_k - oracle).abs() < 1e-9,
                "tr_S K mismatch: {} vs {}",
                ng.tr_sigma_k,
                oracle
            );
        }
    }

    #[test]
    fn mean_curvature_matches_first_variation_of_area() {
        // d/d eps Area(rho + eps psi) = int H psi g(omega, nu) dA_g.
        let quad = quad_sphere(12).unwrap();
        let families: Vec<(&str, DataFamily)> = vec![
            ("flat", DataFamily::Flat),
            ("areal", DataFamily::SchwarzschildAreal { m: 1.0 }),
            (
                "graph",
                DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap(),
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (name, fam) in families {
            for trial in 0..3 {
                let graph = random_graph(&mut rng, 40.0, 12, 0.01);
                let geom = surface_geometry(&fam, &graph, &quad).unwrap();
                // psi = a smooth band-limited bump.
                let basis = SphereBasis::new(&quad);
                let psi: Vec<f64> = quad
                    .nodes
                    .iter()
                    .map(|n| 1.0 + 0.3 * basis.y(2, 1, n) - 0.2 * basis.y(3, -2, n))
                    .collect();
                let eps = 1e-5 * 40.0;
                let mut plus = graph.clone();
                let mut minus = graph.clone();
                let psi_coeffs = basis.analyze(&quad, &psi);
                for (k, c) in psi_coeffs.iter().enumerate() {
                    plus.coeffs[k] += eps * c;
                    minus.coeffs[k] -= eps * c;
                }
                let area_p = surface_geometry(&fam, &plus, &quad).unwrap().area_g;
                let area_m = surface_geometry(&fam, &minus, &quad).unwrap().area_g;
                let fd = (area_p - area_m) / (2.0 * eps);
                let mut want = 0.0;
                for ((node, ng), p) in quad.nodes.iter().zip(geom.nodes.iter()).zip(psi.iter()) {
                    let w = direction(node.theta, node.phi);
                    let s = fam.geometry(&ng.position).unwrap();
                    let g_wnu = s.g.bilinear(&w, &ng.normal);
                    want += node.weight * ng.area_density_g * ng.mean_curvature * p * g_wnu;
                }
                assert!(
                    (fd - want).abs() / want.abs() < 1e-6,
                    "{name} trial {trial}: dA = {fd} vs int H psi = {want}"
                );
            }
        }
    }

    #[test]
    fn hawking_mass_nonpositive_in_flat_space() {
        let quad = quad_sphere(14).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let graph = random_graph(&mut rng, 10.0, 14, 0.03);
            let geom = surface_geometry(&DataFamily::Flat, &graph, &quad).unwrap();
            assert!(
                geom.hawking_mass < 1e-10,
                "flat-space Hawking mass {} must be <= 0",
                geom.hawking_mass
            );
        }
    }

    /// Wrapper that flips the sign of K, leaving the metric untouched.
    struct FlipK<'a>(&'a DataFamily);

    impl InitialData for FlipK<'_> {
        fn metric_dev(&self, x: &Point3) -> crate::Result<SymMat3> {
            self.0.metric_dev(x)
        }
        fn extrinsic(&self, x: &Point3) -> crate::Result<SymMat3> {
            Ok(self.0.extrinsic(x)?.scale(-1.0))
        }
        fn dmetric(&self, x: &Point3, h: f64) -> crate::Result<Ten3> {
            self.0.dmetric(x, h)
        }
        fn dextrinsic(&self, x: &Point3, h: f64) -> crate::Result<Ten3> {
            let d = self.0.dextrinsic(x, h)?;
            Ok(ten3(|k, i, j| -d[k][i][j]))
        }
        fn min_radius(&self) -> f64 {
            self.0.min_radius()
        }
    }

    #[test]
    fn functional_identities() {
        let quad = quad_sphere(10).unwrap();
        let fam = DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let graph = SphereGraph::round(100.0, [0.0; 3], 10);
        let geom = surface_geometry(&fam, &graph, &quad).unwrap();
        let cmc = curvature_functional(&geom, LeafMode::Cmc).unwrap();
        let stcmc = curvature_functional(&geom, LeafMode::Stcmc).unwrap();
        // The radicand subtracts a square, so STCMC <= CMC pointwise.
        for (c, s) in cmc.iter().zip(stcmc.iter()) {
            assert!(s <= c);
        }
        // The spacetime mean curvature ignores the sign of K.
        let flipped = FlipK(&fam);
        let geom_f = surface_geometry(&flipped, &graph, &quad).unwrap();
        let stcmc_f = curvature_functional(&geom_f, LeafMode::Stcmc).unwrap();
        for (a, b) in stcmc.iter().zip(stcmc_f.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }

        // K = 0 data: every functional collapses to H.
        let areal = DataFamily::SchwarzschildAreal { m: 1.0 };
        let graph = SphereGraph::round(30.0, [0.0; 3], 10);
        let geom = surface_geometry(&areal, &graph, &quad).unwrap();
        let cmc = curvature_functional(&geom, LeafMode::Cmc).unwrap();
        for mode in [LeafMode::Stcmc, LeafMode::CePlus, LeafMode::CeMinus] {
            let vals = curvature_functional(&geom, mode).unwrap();
            for (a, b) in cmc.iter().zip(vals.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn spectral_consistency_across_band_limits() {
        // Smooth graph with band limit 8: the analyzed mean-curvature
        // coefficients agree between L = 16 and L = 32 resolutions.
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q16 = quad_sphere(16).unwrap();
        let q32 = quad_sphere(32).unwrap();
        let mut g16 = SphereGraph::round(25.0, [0.0; 3], 16);
        for l in 1..=4usize {
            for m in -(l as i64)..=(l as i64) {
                g16.coeffs[lm_index(l, m)] = 1e-3 * 25.0 * rng.gen_range(-1.0..1.0);
            }
        }
        let mut g32 = SphereGraph::round(25.0, [0.0; 3], 32);
        for l in 0..=16usize {
            for m in -(l as i64)..=(l as i64) {
                g32.coeffs[lm_index(l, m)] = g16.coeffs[lm_index(l, m)];
            }
        }
        let b16 = SphereBasis::new(&q16);
        let b32 = SphereBasis::new(&q32);
        let geom16 = surface_geometry(&fam, &g16, &q16).unwrap();
        let geom32 = surface_geometry(&fam, &g32, &q32).unwrap();
        let h16: Vec<f64> = geom16.nodes.iter().map(|n| n.mean_curvature).collect();
        let h32: Vec<f64> = geom32.nodes.iter().map(|n| n.mean_curvature).collect();
        let c16 = b16.analyze(&q16, &h16);
        let c32 = b32.analyze(&q32, &h32);
        for l in 0..=8usize {
            for m in -(l as i64)..=(l as i64) {
                let a = c16[lm_index(l, m)];
                let b = c32[lm_index(l, m)];
                assert!(
                    (a - b).abs() < 1e-9,
                    "H coefficient ({l},{m}) differs: {a} vs {b}"
                );
            }
        }
    }
}
