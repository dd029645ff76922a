//! Pointwise differential-geometric operators on initial data samples:
//! Levi-Civita connection, Ricci and scalar curvature, constraint densities,
//! conjugate momenta, the Cotton tensor, and the local foliation one-forms.
//!
//! Index conventions follow the sample layout: `dg[k][i][j] = d_k g_ij`.
//! Divergences of (0,2) tensors contract the derivative with the first slot,
//! `(div T)_i = g^{jk} nabla_j T_{ki}`; gradients are g-covariant (for the
//! scalars appearing here they coincide with coordinate partials).

use crate::diff::{step_at, THIRD_DERIV_STEP_SCALE};
use crate::idata::{InitialData, InitialDataSample};
use crate::tensor::*;
use crate::{Error, Result};

/// Energy and momentum constraint densities.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintSample {
    pub rho: f64,
    pub j: Vec3,
}

/// The local STCMC and constant-expansion one-forms.
#[derive(Debug, Clone, Copy)]
pub struct OneFormSample {
    pub a_st: Vec3,
    pub a_ce: Vec3,
    /// Stencil error estimate of the third-derivative content of `a_st`.
    pub error_estimate: f64,
}

/// Cotton tensor components `C[i][j][k]`, antisymmetric in (j, k) by
/// construction.
#[derive(Debug, Clone)]
pub struct CottonSample {
    pub c: Ten3,
    /// Stencil error estimate propagated from the nested differentiation.
    pub error_estimate: f64,
}

/// Options for the operations that need third derivatives of the metric.
#[derive(Debug, Clone, Copy)]
pub struct ThirdDerivOptions {
    /// Step scale of the outer stencil over Ricci / scalar curvature.
    pub step_scale: f64,
    /// Absolute tolerance on the stencil error estimate.
    pub tol_abs: f64,
    /// Relative tolerance against the largest computed component.
    pub tol_rel: f64,
}

impl Default for ThirdDerivOptions {
    fn default() -> Self {
        ThirdDerivOptions {
            step_scale: THIRD_DERIV_STEP_SCALE,
            tol_abs: 1e-5,
            tol_rel: 0.05,
        }
    }
}

fn inverse_metric(s: &InitialDataSample) -> Result<Mat3> {
    if !s.g.is_positive_definite() {
        return Err(Error::DegenerateMetric { r: f64::NAN });
    }
    Ok(*s.g.inverse().expect("positive definite").as_mat())
}

/// Christoffel symbols `Gamma^k_ij`, indexed `[k][i][j]`.
pub fn christoffel(s: &InitialDataSample) -> Result<Ten3> {
    let ginv = inverse_metric(s)?;
    Ok(christoffel_from(&ginv, &s.dg))
}

pub(crate) fn christoffel_from(ginv: &Mat3, dg: &Ten3) -> Ten3 {
    ten3(|k, i, j| {
        0.5 * sum1(|l| ginv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]))
    })
}

/// `d_m g^{ab} = -g^{ac} (d_m g_cd) g^{db}`.
fn dginv(ginv: &Mat3, dg: &Ten3) -> Ten3 {
    ten3(|m, a, b| -sum2(|c, d| ginv[a][c] * dg[m][c][d] * ginv[d][b]))
}

/// `d_m Gamma^k_ij` from first and second metric derivatives.
fn dchristoffel(ginv: &Mat3, dg: &Ten3, ddg: &Ten4) -> [Ten3; 3] {
    let dgi = dginv(ginv, dg);
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let t1 = 0.5
                        * sum1(|l| dgi[m][k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]));
                    let t2 = 0.5
                        * sum1(|l| {
                            ginv[k][l]
                                * (ddg[m][i][l][j] + ddg[m][j][l][i] - ddg[m][l][i][j])
                        });
                    out[m][k][i][j] = t1 + t2;
                }
            }
        }
    }
    out
}

/// Ricci tensor from the sample's first and second metric derivatives.
pub fn ricci(s: &InitialDataSample) -> Result<SymMat3> {
    let ginv = inverse_metric(s)?;
    let gamma = christoffel_from(&ginv, &s.dg);
    let dgamma = dchristoffel(&ginv, &s.dg, &s.ddg);
    let raw = mat3(|i, j| {
        let t1 = sum1(|k| dgamma[k][k][i][j] - dgamma[i][k][k][j]);
        let t2 = sum2(|k, l| gamma[k][k][l] * gamma[l][i][j] - gamma[k][i][l] * gamma[l][k][j]);
        t1 + t2
    });
    Ok(SymMat3::symmetrize(raw))
}

/// Scalar curvature `Scal_g = g^{ij} R_ij`.
pub fn scalar_curvature(s: &InitialDataSample) -> Result<f64> {
    let ginv = inverse_metric(s)?;
    let ric = ricci(s)?;
    Ok(sum2(|i, j| ginv[i][j] * ric.get(i, j)))
}

/// Covariant derivative of a symmetric (0,2) tensor:
/// `nabla_m T_ij = d_m T_ij - Gamma^l_mi T_lj - Gamma^l_mj T_il`.
fn cov_deriv_sym(dt: &Ten3, t: &SymMat3, gamma: &Ten3) -> Ten3 {
    ten3(|m, i, j| {
        dt[m][i][j] - sum1(|l| gamma[l][m][i] * t.get(l, j) + gamma[l][m][j] * t.get(i, l))
    })
}

/// Hamiltonian and momentum constraint densities:
/// `16 pi rho = Scal - |K|^2 + (tr K)^2`, `8 pi J = div(K - (tr K) g)`.
pub fn constraints(s: &InitialDataSample) -> Result<ConstraintSample> {
    let ginv = inverse_metric(s)?;
    let gamma = christoffel_from(&ginv, &s.dg);
    let scal = scalar_curvature(s)?;

    let tr_k = sum2(|i, j| ginv[i][j] * s.k.get(i, j));
    let k_sq = {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        acc += ginv[i][a] * ginv[j][b] * s.k.get(i, j) * s.k.get(a, b);
                    }
                }
            }
        }
        acc
    };
    let rho = (scal - k_sq + tr_k * tr_k) / (16.0 * std::f64::consts::PI);

    // T = K - (tr K) g and its coordinate derivative.
    let dgi = dginv(&ginv, &s.dg);
    let dtr = vec3(|m| {
        sum2(|a, b| dgi[m][a][b] * s.k.get(a, b) + ginv[a][b] * s.dk[m][a][b])
    });
    let t = SymMat3::from_fn(|i, j| s.k.get(i, j) - tr_k * s.g.get(i, j));
    let dt = ten3(|m, i, j| {
        s.dk[m][i][j] - dtr[m] * s.g.get(i, j) - tr_k * s.dg[m][i][j]
    });
    let nabla_t = cov_deriv_sym(&dt, &t, &gamma);
    let j = vec3(|i| {
        sum2(|a, b| ginv[a][b] * nabla_t[a][b][i]) / (8.0 * std::f64::consts::PI)
    });
    Ok(ConstraintSample { rho, j })
}

/// Conjugate momentum tensors: `pi = (tr_g K) g - K` and the coordinate
/// variant `pibar = K - (tr_delta K) delta`.
pub fn conjugate_momenta(s: &InitialDataSample) -> (SymMat3, SymMat3) {
    let ginv = s.g.inverse().expect("metric invertible");
    let tr_g = sum2(|i, j| ginv.get(i, j) * s.k.get(i, j));
    let pi = SymMat3::from_fn(|i, j| tr_g * s.g.get(i, j) - s.k.get(i, j));
    let tr_d = s.k.trace();
    let pibar = SymMat3::from_fn(|i, j| {
        s.k.get(i, j) - tr_d * if i == j { 1.0 } else { 0.0 }
    });
    (pi, pibar)
}

/// Coordinate gradient of the Ricci tensor and of the scalar curvature by
/// nested fourth-order stencils over full samples. Returns
/// `(d_m R_ij, d_m Scal, error estimate)`.
pub fn ricci_gradient(
    family: &dyn InitialData,
    x: &Point3,
    opts: &ThirdDerivOptions,
) -> Result<(Ten3, Vec3, f64)> {
    let h = step_at(x, opts.step_scale);
    let ric_at = |p: &Point3| -> Result<SymMat3> {
        let s = family.sample(p)?;
        ricci(&s)
    };
    let fine = crate::idata::fd_ten3(ric_at, x, h)?;
    let coarse = crate::idata::fd_ten3(ric_at, x, 2.0 * h)?;
    let mut dric = [[[0.0; 3]; 3]; 3];
    let mut dscal = [0.0; 3];
    let mut est = 0.0f64;
    let mut max_comp = 0.0f64;
    for m in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                dric[m][i][j] = fine[m][i][j];
                est = est.max((fine[m][i][j] - coarse[m][i][j]).abs());
                max_comp = max_comp.max(fine[m][i][j].abs());
            }
        }
    }
    // d Scal = d (g^{ij} R_ij) needs the center sample for g^{-1} and R.
    let s0 = family.sample(x)?;
    let ginv = inverse_metric(&s0)?;
    let ric0 = ricci(&s0)?;
    let dgi = dginv(&ginv, &s0.dg);
    for m in 0..3 {
        dscal[m] = sum2(|i, j| dgi[m][i][j] * ric0.get(i, j) + ginv[i][j] * dric[m][i][j]);
    }
    if est > opts.tol_abs + opts.tol_rel * max_comp {
        return Err(Error::DifferentiationBudgetExceeded {
            estimate: est,
            tolerance: opts.tol_abs + opts.tol_rel * max_comp,
        });
    }
    Ok((dric, dscal, est))
}

/// Cotton tensor
/// `C_ijk = nabla_k R_ij - nabla_j R_ik - (1/4)(g_ij nabla_k S - g_ik nabla_j S)`,
/// assembled antisymmetrically in (j, k) by construction.
pub fn cotton(
    family: &dyn InitialData,
    x: &Point3,
    opts: &ThirdDerivOptions,
) -> Result<CottonSample> {
    let (dric, dscal, est) = ricci_gradient(family, x, opts)?;
    let s0 = family.sample(x)?;
    let ginv = inverse_metric(&s0)?;
    let gamma = christoffel_from(&ginv, &s0.dg);
    let ric0 = ricci(&s0)?;
    let nabla_ric = cov_deriv_sym(&dric, &ric0, &gamma);
    // D_ijk = nabla_k R_ij - (1/4) g_ij d_k S; C_ijk = D_ijk - D_ikj.
    let d = ten3(|i, j, k| nabla_ric[k][i][j] - 0.25 * s0.g.get(i, j) * dscal[k]);
    let c = ten3(|i, j, k| d[i][j][k] - d[i][k][j]);
    Ok(CottonSample {
        c,
        error_estimate: est,
    })
}

/// The local STCMC and constant-expansion one-forms,
/// `A_ST = (3/2) grad Scal + (1/8)[grad |K|^2 + (41/2) grad (tr K)^2
///         + 4 div(K^2) - 14 div(tr K * K)]`
/// and `A_CE = (5/6) grad tr K - 2 div K`.
pub fn local_one_forms(
    family: &dyn InitialData,
    x: &Point3,
    opts: &ThirdDerivOptions,
) -> Result<OneFormSample> {
    let s = family.sample(x)?;
    let ginv = inverse_metric(&s)?;
    let gamma = christoffel_from(&ginv, &s.dg);
    let nabla_k = cov_deriv_sym(&s.dk, &s.k, &gamma);

    let tr_k = sum2(|i, j| ginv[i][j] * s.k.get(i, j));
    let dgi = dginv(&ginv, &s.dg);
    let grad_tr = vec3(|m| {
        sum2(|a, b| dgi[m][a][b] * s.k.get(a, b) + ginv[a][b] * s.dk[m][a][b])
    });

    // div K and div(tr K * K), both on the first slot.
    let div_k = vec3(|i| sum2(|a, b| ginv[a][b] * nabla_k[a][b][i]));
    let div_trk_k = vec3(|i| {
        sum2(|a, b| ginv[a][b] * (grad_tr[a] * s.k.get(b, i) + tr_k * nabla_k[a][b][i]))
    });

    let a_ce = vec3(|i| (5.0 / 6.0) * grad_tr[i] - 2.0 * div_k[i]);

    // grad |K|^2 = 2 g^{ac} g^{bd} (nabla_m K_ab) K_cd.
    let grad_ksq = vec3(|m| {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        acc += ginv[a][c] * ginv[b][d] * nabla_k[m][a][b] * s.k.get(c, d);
                    }
                }
            }
        }
        2.0 * acc
    });
    let grad_trsq = vec3(|m| 2.0 * tr_k * grad_tr[m]);

    // (K^2)_ab = K_ac g^{cd} K_db; nabla by the product rule with metric
    // compatibility, then divergence on the first slot.
    let div_ksq = vec3(|i| {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        acc += ginv[a][b]
                            * ginv[c][d]
                            * (nabla_k[a][b][c] * s.k.get(d, i)
                                + s.k.get(b, c) * nabla_k[a][d][i]);
                    }
                }
            }
        }
        acc
    });

    // grad Scal needs third derivatives only when K fails to make it moot;
    // it is always required for A_ST.
    let (_, dscal, est) = ricci_gradient(family, x, opts)?;

    let a_st = vec3(|i| {
        1.5 * dscal[i]
            + 0.125
                * (grad_ksq[i] + 20.5 * grad_trsq[i] + 4.0 * div_ksq[i] - 14.0 * div_trk_k[i])
    });
    Ok(OneFormSample {
        a_st,
        a_ce,
        error_estimate: est,
    })
}
