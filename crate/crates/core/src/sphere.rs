//! Quadrature and real spherical harmonics on the unit sphere.
//!
//! The quadrature is Gauss-Legendre in cos(theta) crossed with a uniform
//! azimuthal grid, so products of spherical harmonics up to combined degree
//! 2 l_max are integrated exactly. The harmonic basis is real, orthonormal,
//! and carries no Condon-Shortley phase; the same basis convention is shared
//! by the charge integrals, the surface geometry, and the leaf solver.

use crate::tensor::Vec3;
use crate::{Error, Result};
use std::f64::consts::PI;

/// One quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub theta: f64,
    pub phi: f64,
    /// Weight for integration against d(Omega); all weights sum to 4 pi.
    pub weight: f64,
    pub i_theta: usize,
    pub j_phi: usize,
}

/// Product quadrature on S^2 exact for harmonics up to combined degree 2 l_max.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub l_max: usize,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub nodes: Vec<QuadNode>,
}

impl SphereQuadrature {
    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }
    pub fn n_phi(&self) -> usize {
        self.phis.len()
    }

    /// Integrates a per-node integrand against d(Omega).
    pub fn integrate(&self, mut f: impl FnMut(&QuadNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Builds the product quadrature: l_max + 1 Gauss-Legendre colatitudes by
/// 2 l_max + 1 uniform azimuths.
pub fn quad_sphere(l_max: usize) -> Result<SphereQuadrature> {
    if l_max < 2 {
        return Err(Error::Invalid(format!("l_max must be >= 2, got {l_max}")));
    }
    let n_theta = l_max + 1;
    let n_phi = 2 * l_max + 1;
    let (xs, ws) = gauss_legendre(n_theta);
    // Gauss-Legendre returns nodes in descending x = cos(theta); keep theta ascending.
    let thetas: Vec<f64> = xs.iter().map(|x| x.acos()).collect();
    let phis: Vec<f64> = (0..n_phi)
        .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
        .collect();
    let phi_w = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (i, (&theta, &wt)) in thetas.iter().zip(ws.iter()).enumerate() {
        for (j, &phi) in phis.iter().enumerate() {
            nodes.push(QuadNode {
                theta,
                phi,
                weight: wt * phi_w,
                i_theta: i,
                j_phi: j,
            });
        }
    }
    Ok(SphereQuadrature {
        l_max,
        thetas,
        phis,
        nodes,
    })
}

/// Flat index of the real harmonic (l, m), m in [-l, l].
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (m + l as i64) as usize
}

/// Number of real harmonics up to band limit `l_max`.
#[inline]
pub fn n_coeffs(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Unit radial direction and its angular derivatives.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

pub fn direction_dtheta(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [ct * cp, ct * sp, -st]
}

pub fn direction_dphi(theta: f64, phi: f64) -> Vec3 {
    let (st, _) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [-st * sp, st * cp, 0.0]
}

pub fn direction_dtheta_dphi(theta: f64, phi: f64) -> Vec3 {
    let (_, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [-ct * sp, ct * cp, 0.0]
}

pub fn direction_dphi_dphi(theta: f64, phi: f64) -> Vec3 {
    let (st, _) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [-st * cp, -st * sp, 0.0]
}

/// Tabulated normalized associated Legendre functions and their first two
/// colatitude derivatives on the quadrature's theta nodes, plus azimuthal
/// trigonometric tables. Everything needed to evaluate real harmonics and
/// their angular derivatives at the quadrature nodes.
#[derive(Debug, Clone)]
pub struct SphereBasis {
    pub l_max: usize,
    n_theta: usize,
    n_phi: usize,
    /// p[i_theta][pk(l, m)] with m >= 0.
    p: Vec<Vec<f64>>,
    dp: Vec<Vec<f64>>,
    d2p: Vec<Vec<f64>>,
    /// cos(m phi), sin(m phi) tables: trig[j_phi][m] = (cos, sin).
    trig: Vec<Vec<(f64, f64)>>,
}

/// Packed index over (l, m >= 0): l(l+1)/2 + m.
#[inline]
fn pk(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl SphereBasis {
    pub fn new(quad: &SphereQuadrature) -> Self {
        let l_max = quad.l_max;
        let n_pk = pk(l_max, l_max) + 1;
        let mut p = Vec::with_capacity(quad.n_theta());
        let mut dp = Vec::with_capacity(quad.n_theta());
        let mut d2p = Vec::with_capacity(quad.n_theta());
        for &theta in &quad.thetas {
            let (row_p, row_dp) = normalized_legendre_row(l_max, theta);
            // Second derivative from the associated Legendre ODE:
            // P'' = -cot(theta) P' - (l(l+1) - m^2/sin^2) P.
            let (st, ct) = theta.sin_cos();
            let cot = ct / st;
            let mut row_d2 = vec![0.0; n_pk];
            for l in 0..=l_max {
                for m in 0..=l {
                    let k = pk(l, m);
                    let ll = (l * (l + 1)) as f64;
                    let mm = (m * m) as f64;
                    row_d2[k] = -cot * row_dp[k] - (ll - mm / (st * st)) * row_p[k];
                }
            }
            p.push(row_p);
            dp.push(row_dp);
            d2p.push(row_d2);
        }
        let trig = quad
            .phis
            .iter()
            .map(|&phi| {
                (0..=l_max)
                    .map(|m| {
                        let a = m as f64 * phi;
                        (a.cos(), a.sin())
                    })
                    .collect()
            })
            .collect();
        SphereBasis {
            l_max,
            n_theta: quad.n_theta(),
            n_phi: quad.n_phi(),
            p,
            dp,
            d2p,
            trig,
        }
    }

    /// Value of the real harmonic Y_{l m} at a node.
    pub fn y(&self, l: usize, m: i64, node: &QuadNode) -> f64 {
        let am = m.unsigned_abs() as usize;
        let pv = self.p[node.i_theta][pk(l, am)];
        let (c, s) = self.trig[node.j_phi][am];
        if m == 0 {
            pv
        } else if m > 0 {
            std::f64::consts::SQRT_2 * pv * c
        } else {
            std::f64::consts::SQRT_2 * pv * s
        }
    }

    /// Analysis: projects per-node samples onto the basis with the quadrature.
    pub fn analyze(&self, quad: &SphereQuadrature, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), quad.nodes.len());
        let mut coeffs = vec![0.0; n_coeffs(self.l_max)];
        for l in 0..=self.l_max {
            for m in -(l as i64)..=(l as i64) {
                let mut acc = 0.0;
                for (node, v) in quad.nodes.iter().zip(values.iter()) {
                    acc += node.weight * v * self.y(l, m, node);
                }
                coeffs[lm_index(l, m)] = acc;
            }
        }
        coeffs
    }

    /// Synthesis of the radial field and its angular derivatives at every node.
    ///
    /// Returns per-node (f, f_theta, f_phi, f_theta_theta, f_theta_phi,
    /// f_phi_phi), in node order.
    pub fn synthesize_with_derivatives(&self, coeffs: &[f64]) -> Vec<[f64; 6]> {
        assert_eq!(coeffs.len(), n_coeffs(self.l_max));
        let l_max = self.l_max;
        // Stage 1: contract over l per (theta row, m, {cos, sin} branch).
        // u*[i][m] for the cos(m phi) branch, v*[i][m] for sin(m phi).
        let mut uc = vec![vec![[0.0; 3]; l_max + 1]; self.n_theta];
        let mut us = vec![vec![[0.0; 3]; l_max + 1]; self.n_theta];
        for i in 0..self.n_theta {
            for m in 0..=l_max {
                let mut acc_c = [0.0; 3];
                let mut acc_s = [0.0; 3];
                for l in m..=l_max {
                    let k = pk(l, m);
                    let tabs = [self.p[i][k], self.dp[i][k], self.d2p[i][k]];
                    if m == 0 {
                        let c = coeffs[lm_index(l, 0)];
                        for q in 0..3 {
                            acc_c[q] += c * tabs[q];
                        }
                    } else {
                        let cc = coeffs[lm_index(l, m as i64)];
                        let cs = coeffs[lm_index(l, -(m as i64))];
                        for q in 0..3 {
                            acc_c[q] += cc * tabs[q] * std::f64::consts::SQRT_2;
                            acc_s[q] += cs * tabs[q] * std::f64::consts::SQRT_2;
                        }
                    }
                }
                uc[i][m] = acc_c;
                us[i][m] = acc_s;
            }
        }
        // Stage 2: assemble per node with the azimuthal factors.
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let mut val = [0.0; 6];
                for m in 0..=l_max {
                    let (c, s) = self.trig[j][m];
                    let mf = m as f64;
                    let a = &uc[i][m];
                    let b = &us[i][m];
                    // f, f_t, f_tt use the plain azimuthal factor.
                    val[0] += a[0] * c + b[0] * s;
                    val[1] += a[1] * c + b[1] * s;
                    val[3] += a[2] * c + b[2] * s;
                    // d/dphi swaps cos <-> sin with factors -m, +m.
                    val[2] += mf * (-a[0] * s + b[0] * c);
                    val[4] += mf * (-a[1] * s + b[1] * c);
                    // d^2/dphi^2 multiplies by -m^2.
                    val[5] += -mf * mf * (a[0] * c + b[0] * s);
                }
                out.push(val);
            }
        }
        out
    }
}

/// Normalized associated Legendre values and theta-derivatives for all
/// (l, m >= 0) up to l_max at a single colatitude. No Condon-Shortley phase.
fn normalized_legendre_row(l_max: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let n_pk = pk(l_max, l_max) + 1;
    let mut p = vec![0.0; n_pk];
    let (st, ct) = theta.sin_cos();
    p[pk(0, 0)] = (1.0 / (4.0 * PI)).sqrt();
    // Diagonal: P_mm = sqrt((2m+1)/(2m)) sin(theta) P_{m-1,m-1}.
    for m in 1..=l_max {
        let f = ((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt();
        p[pk(m, m)] = f * st * p[pk(m - 1, m - 1)];
    }
    // First off-diagonal: P_{m+1,m} = sqrt(2m+3) cos(theta) P_mm.
    for m in 0..l_max {
        p[pk(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * ct * p[pk(m, m)];
    }
    // General recurrence.
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let alpha = ((2.0 * lf - 1.0) * (2.0 * lf + 1.0) / ((lf - mf) * (lf + mf))).sqrt();
            let beta = ((2.0 * lf + 1.0) * (lf + mf - 1.0) * (lf - mf - 1.0)
                / ((2.0 * lf - 3.0) * (lf - mf) * (lf + mf)))
                .sqrt();
            p[pk(l, m)] = alpha * ct * p[pk(l - 1, m)] - beta * p[pk(l - 2, m)];
        }
    }
    // Derivative: sin(theta) dP_lm/dtheta = l cos(theta) P_lm - e_lm P_{l-1,m}.
    let mut dp = vec![0.0; n_pk];
    for m in 0..=l_max {
        for l in m..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let lower = if l > m { p[pk(l - 1, m)] } else { 0.0 };
            let e = if l > 0 {
                ((lf * lf - mf * mf) * (2.0 * lf + 1.0) / (2.0 * lf - 1.0)).sqrt()
            } else {
                0.0
            };
            dp[pk(l, m)] = (lf * ct * p[pk(l, m)] - e * lower) / st;
        }
    }
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_four_pi() {
        let quad = quad_sphere(16).unwrap();
        let total: f64 = quad.nodes.iter().map(|n| n.weight).sum();
        assert_relative_eq!(total, 4.0 * PI, epsilon = 1e-13);
        assert!(quad.nodes.iter().all(|n| n.weight > 0.0));
    }

    #[test]
    fn constant_integrates_exactly() {
        let quad = quad_sphere(8).unwrap();
        let val = quad.integrate(|_| 1.0);
        assert_relative_eq!(val, 4.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let quad = quad_sphere(12).unwrap();
        let basis = SphereBasis::new(&quad);
        let pairs = [
            ((2, 1), (2, 1), 1.0),
            ((2, 1), (2, -1), 0.0),
            ((1, 0), (0, 0), 0.0),
            ((5, -3), (5, -3), 1.0),
            ((7, 2), (6, 2), 0.0),
            ((0, 0), (0, 0), 1.0),
        ];
        for ((l1, m1), (l2, m2), want) in pairs {
            let got = quad.integrate(|n| basis.y(l1, m1, n) * basis.y(l2, m2, n));
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_moment_vanishes() {
        let quad = quad_sphere(6).unwrap();
        let basis = SphereBasis::new(&quad);
        let got = quad.integrate(|n| basis.y(1, 0, n));
        assert!(got.abs() < 1e-13);
    }

    #[test]
    fn analysis_recovers_band_limited_coefficients() {
        let quad = quad_sphere(10).unwrap();
        let basis = SphereBasis::new(&quad);
        let mut coeffs = vec![0.0; n_coeffs(10)];
        coeffs[lm_index(0, 0)] = 2.0;
        coeffs[lm_index(3, -2)] = -0.7;
        coeffs[lm_index(8, 5)] = 0.31;
        let values: Vec<f64> = quad
            .nodes
            .iter()
            .map(|n| {
                2.0 * basis.y(0, 0, n) - 0.7 * basis.y(3, -2, n) + 0.31 * basis.y(8, 5, n)
            })
            .collect();
        let got = basis.analyze(&quad, &values);
        for (k, (&g, &w)) in got.iter().zip(coeffs.iter()).enumerate() {
            assert!((g - w).abs() < 1e-12, "coefficient {k}: {g} vs {w}");
        }
    }

    #[test]
    fn synthesized_derivatives_match_finite_differences() {
        let quad = quad_sphere(8).unwrap();
        let basis = SphereBasis::new(&quad);
        let mut coeffs = vec![0.0; n_coeffs(8)];
        coeffs[lm_index(0, 0)] = 3.5;
        coeffs[lm_index(2, 1)] = 0.4;
        coeffs[lm_index(4, -3)] = -0.2;
        let synth = basis.synthesize_with_derivatives(&coeffs);
        // Compare against direct evaluation through y() and small-angle FD in phi
        // (theta handled through an independent closed form below).
        for (node, vals) in quad.nodes.iter().zip(synth.iter()) {
            let direct = 3.5 * basis.y(0, 0, node) + 0.4 * basis.y(2, 1, node)
                - 0.2 * basis.y(4, -3, node);
            assert_relative_eq!(vals[0], direct, epsilon = 1e-12);
        }
        // Y_{2,1} = sqrt(2) N P^1_2(cos t) cos(phi); check f_theta at one node
        // against an analytic derivative: P^1_2 = 3 sin t cos t (no phase),
        // N = sqrt(5/(4pi) * 1/6).
        let n0 = &quad.nodes[3];
        let nn = (5.0 / (4.0 * PI) / 6.0_f64).sqrt();
        let dp_dt = 3.0 * ((n0.theta.cos()).powi(2) - (n0.theta.sin()).powi(2));
        let want =
            0.4 * std::f64::consts::SQRT_2 * nn * dp_dt * n0.phi.cos() - 0.2 * 0.0 + 0.0;
        // the (4,-3) term contributes too; evaluate it numerically by FD in theta
        let eps = 1e-6;
        let y43 = |t: f64| {
            let quad1 = t;
            // normalized P_4^3 via the row builder
            let (p, _) = normalized_legendre_row(4, quad1);
            std::f64::consts::SQRT_2 * p[pk(4, 3)] * (3.0 * n0.phi).sin()
        };
        let fd = (y43(n0.theta + eps) - y43(n0.theta - eps)) / (2.0 * eps);
        let idx = n0.i_theta * quad.n_phi() + n0.j_phi;
        assert_relative_eq!(synth[idx][1], want - 0.2 * fd, epsilon = 1e-5);
    }
}
