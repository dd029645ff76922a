//! Analytic initial data families in asymptotic Cartesian coordinates.
//!
//! A family evaluates the spatial metric deviation `u = g - delta`, the
//! extrinsic curvature `K`, and their derivatives at points. The derivative
//! strategy is mixed by design: metrics are analytic, first derivatives are
//! analytic where a closed form is natural (flat and Schwarzschild data, the
//! spherically symmetric part of graph slices) and fourth-order central
//! differences elsewhere; all second derivatives come from central
//! differences with step `max(1, r) * 1e-5`.
//!
//! Sign conventions, fixed once for the whole crate: `K` is taken with
//! respect to the future-directed unit normal of the slice; the mean
//! curvature of round spheres is positive with respect to the outward
//! normal. Units G = c = 1.

use crate::diff::{self, step_at, SAMPLE_STEP_SCALE, SECOND_DERIV_STEP_SCALE};
use crate::tensor::*;
use crate::{Error, Result};

/// Relative horizon margin for family evaluation domains.
pub const HORIZON_MARGIN: f64 = 1e-3;

/// Pointwise values of `(g, K)` and the derivatives the curvature formulas
/// need. Index conventions: `dg[k][i][j] = d_k g_ij`,
/// `ddg[k][l][i][j] = d_k d_l g_ij`, `dk[k][i][j] = d_k K_ij`.
#[derive(Debug, Clone)]
pub struct InitialDataSample {
    pub g: SymMat3,
    pub dg: Ten3,
    pub ddg: Ten4,
    pub k: SymMat3,
    pub dk: Ten3,
}

/// The cheaper subset needed by surface geometry and charge integrands.
#[derive(Debug, Clone)]
pub struct GeomSample {
    pub g: SymMat3,
    pub dg: Ten3,
    pub k: SymMat3,
}

/// Schwarzschild spacetime metric components and first partials in
/// coordinates (t, x1, x2, x3): `dgbar[mu][alpha][beta] = d_mu gbar_{alpha beta}`.
#[derive(Debug, Clone)]
pub struct SpacetimeSample {
    pub gbar: [[f64; 4]; 4],
    pub dgbar: [[[f64; 4]; 4]; 4],
}

/// Graphical slice {t = f(x)} of the Schwarzschild spacetime with
/// `f = f_beta_even(r) + <x, a> / r^(1 - gamma)`.
///
/// `beta == 0` selects the `sin(ln r)` profile; any other `beta < 1/2`
/// selects `r^beta`. `gamma < 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSliceSpec {
    pub m: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: Vec3,
}

impl GraphSliceSpec {
    pub fn new(m: f64, beta: f64, gamma: f64, a: Vec3) -> Result<Self> {
        if m == 0.0 || !m.is_finite() {
            return Err(Error::Invalid(format!(
                "graph slice requires nonzero finite mass, got {m}"
            )));
        }
        if !(beta < 0.5) || !(gamma < 0.5) {
            return Err(Error::Invalid(format!(
                "graph slice profiles require beta, gamma < 1/2, got beta = {beta}, gamma = {gamma}"
            )));
        }
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("graph direction must be finite".into()));
        }
        Ok(GraphSliceSpec { m, beta, gamma, a })
    }
}

/// An analytic description of an initial data set.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFamily {
    Flat,
    SchwarzschildAreal { m: f64 },
    SchwarzschildIsotropic { m: f64 },
    GraphSlice(GraphSliceSpec),
    Transformed {
        q: Mat3,
        b: Vec3,
        inner: Box<DataFamily>,
    },
}

/// Pointwise evaluation contract shared by the built-in families and any
/// test-constructed data (e.g. conformally perturbed time-symmetric sets).
///
/// `h` is the absolute finite-difference step at the evaluation point; the
/// provided assembly methods compute it from a scale and forward it, so an
/// implementation can mix analytic and stencil derivatives as it declares.
pub trait InitialData: Sync {
    /// `u = g - delta`, exact.
    fn metric_dev(&self, x: &Point3) -> Result<SymMat3>;
    /// Extrinsic curvature `K`, exact pointwise.
    fn extrinsic(&self, x: &Point3) -> Result<SymMat3>;
    /// First derivatives of `u`.
    fn dmetric(&self, x: &Point3, h: f64) -> Result<Ten3>;
    /// First derivatives of `K`.
    fn dextrinsic(&self, x: &Point3, h: f64) -> Result<Ten3> {
        fd_ten3(|p| self.extrinsic(p), x, h)
    }
    /// Second derivatives of `u`.
    fn ddmetric(&self, x: &Point3, h: f64) -> Result<Ten4> {
        fd_ten4(|p| self.metric_dev(p), x, h)
    }
    /// Smallest admissible coordinate radius.
    fn min_radius(&self) -> f64;

    /// Mass parameter when the family carries one; used only to seed leaf
    /// solves.
    fn mass_hint(&self) -> Option<f64> {
        None
    }

    /// Checks the evaluation point against the domain.
    fn check_domain(&self, x: &Point3) -> Result<f64> {
        let r = norm(x);
        let r_min = self.min_radius();
        if r <= r_min || r == 0.0 || !r.is_finite() {
            return Err(Error::Domain { r, r_min });
        }
        Ok(r)
    }

    /// `(g, dg, K)` with the default derivative step.
    fn geometry(&self, x: &Point3) -> Result<GeomSample> {
        self.check_domain(x)?;
        let h = step_at(x, SAMPLE_STEP_SCALE);
        let g = SymMat3::identity().add(&self.metric_dev(x)?);
        if !g.is_positive_definite() {
            return Err(Error::DegenerateMetric { r: norm(x) });
        }
        Ok(GeomSample {
            g,
            dg: self.dmetric(x, h)?,
            k: self.extrinsic(x)?,
        })
    }

    /// Full sample with the declared per-order derivative steps.
    fn sample(&self, x: &Point3) -> Result<InitialDataSample> {
        self.check_domain(x)?;
        let h1 = step_at(x, SAMPLE_STEP_SCALE);
        let h2 = step_at(x, SECOND_DERIV_STEP_SCALE);
        let g = SymMat3::identity().add(&self.metric_dev(x)?);
        if !g.is_positive_definite() {
            return Err(Error::DegenerateMetric { r: norm(x) });
        }
        Ok(InitialDataSample {
            g,
            dg: self.dmetric(x, h1)?,
            ddg: self.ddmetric(x, h2)?,
            k: self.extrinsic(x)?,
            dk: self.dextrinsic(x, h1)?,
        })
    }
}

/// Fourth-order stencil of a symmetric-matrix-valued function: out[k][i][j] = d_k f_ij.
pub(crate) fn fd_ten3(
    f: impl Fn(&Point3) -> Result<SymMat3>,
    x: &Point3,
    h: f64,
) -> Result<Ten3> {
    let mut out = [[[0.0; 3]; 3]; 3];
    for dir in 0..3 {
        let mut acc = SymMat3::ZERO;
        for (o, w) in diff::D1_OFFSETS.iter().zip(diff::D1_WEIGHTS.iter()) {
            let p = vec3(|i| if i == dir { x[i] + o * h } else { x[i] });
            acc = acc.add(&f(&p)?.scale(*w));
        }
        for i in 0..3 {
            for j in 0..3 {
                out[dir][i][j] = acc.get(i, j) / h;
            }
        }
    }
    Ok(out)
}

/// Fourth-order second derivatives: out[k][l][i][j] = d_k d_l f_ij,
/// symmetric in (k, l) by construction.
pub(crate) fn fd_ten4(
    f: impl Fn(&Point3) -> Result<SymMat3>,
    x: &Point3,
    h: f64,
) -> Result<Ten4> {
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for k in 0..3 {
        for l in k..3 {
            let mut acc = SymMat3::ZERO;
            if k == l {
                for (o, w) in diff::D2_OFFSETS.iter().zip(diff::D2_WEIGHTS.iter()) {
                    let p = vec3(|i| if i == k { x[i] + o * h } else { x[i] });
                    acc = acc.add(&f(&p)?.scale(*w));
                }
            } else {
                for (ok, wk) in diff::D1_OFFSETS.iter().zip(diff::D1_WEIGHTS.iter()) {
                    for (ol, wl) in diff::D1_OFFSETS.iter().zip(diff::D1_WEIGHTS.iter()) {
                        let p = vec3(|i| {
                            x[i] + if i == k { ok * h } else { 0.0 }
                                + if i == l { ol * h } else { 0.0 }
                        });
                        acc = acc.add(&f(&p)?.scale(wk * wl));
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let v = acc.get(i, j) / (h * h);
                    out[k][l][i][j] = v;
                    out[l][k][i][j] = v;
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Schwarzschild building blocks (areal Cartesian components)
// ---------------------------------------------------------------------------

/// `c(r)` with `g_m = delta + c(r) n (x) n`, i.e. `c = 2m / (r - 2m)`.
fn areal_c(m: f64, r: f64) -> f64 {
    2.0 * m / (r - 2.0 * m)
}

fn areal_c_prime(m: f64, r: f64) -> f64 {
    -2.0 * m / ((r - 2.0 * m) * (r - 2.0 * m))
}

fn areal_dev(m: f64, x: &Point3) -> SymMat3 {
    let r = norm(x);
    let n = scale3(x, 1.0 / r);
    let c = areal_c(m, r);
    SymMat3::from_fn(|i, j| c * n[i] * n[j])
}

fn areal_ddev(m: f64, x: &Point3) -> Ten3 {
    let r = norm(x);
    let n = scale3(x, 1.0 / r);
    let c = areal_c(m, r);
    let cp = areal_c_prime(m, r);
    ten3(|k, i, j| {
        let dn = (kron(k, i) * n[j] + kron(k, j) * n[i] - 2.0 * n[k] * n[i] * n[j]) / r;
        cp * n[k] * n[i] * n[j] + c * dn
    })
}

#[inline]
fn kron(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Inverse spatial Schwarzschild metric: `delta - (2m/r) n (x) n`.
fn areal_inv(m: f64, x: &Point3) -> Mat3 {
    let r = norm(x);
    let n = scale3(x, 1.0 / r);
    mat3(|i, j| kron(i, j) - (2.0 * m / r) * n[i] * n[j])
}

/// Exact Schwarzschild spacetime metric and first partials.
///
/// The domain check is strict (`r > 2m` for positive mass) rather than the
/// family evaluation margin, so near-horizon lapses evaluate to finite
/// values.
pub fn spacetime_metric(m: f64, _t: f64, x: &Point3) -> Result<SpacetimeSample> {
    let r = norm(x);
    let r_min = (2.0 * m).max(0.0);
    if r <= r_min || r == 0.0 {
        return Err(Error::Domain { r, r_min });
    }
    let n = scale3(x, 1.0 / r);
    let n_sq = 1.0 - 2.0 * m / r;
    let dev = areal_dev(m, x);
    let ddev = areal_ddev(m, x);

    let mut gbar = [[0.0; 4]; 4];
    gbar[0][0] = -n_sq;
    for i in 0..3 {
        for j in 0..3 {
            gbar[i + 1][j + 1] = kron(i, j) + dev.get(i, j);
        }
    }
    let mut dgbar = [[[0.0; 4]; 4]; 4];
    for k in 0..3 {
        // d_k gbar_00 = -(2m/r^2) n_k
        dgbar[k + 1][0][0] = -(2.0 * m / (r * r)) * n[k];
        for i in 0..3 {
            for j in 0..3 {
                dgbar[k + 1][i + 1][j + 1] = ddev[k][i][j];
            }
        }
    }
    Ok(SpacetimeSample { gbar, dgbar })
}

// ---------------------------------------------------------------------------
// Graph slice internals
// ---------------------------------------------------------------------------

/// Graph function value and first/second derivatives at x.
struct GraphFn {
    df: Vec3,
    ddf: SymMat3,
}

fn graph_fn(spec: &GraphSliceSpec, x: &Point3) -> GraphFn {
    let r = norm(x);
    let n = scale3(x, 1.0 / r);
    // Even profile.
    let (fp, fpp) = if spec.beta == 0.0 {
        let lr = r.ln();
        (lr.cos() / r, -(lr.sin() + lr.cos()) / (r * r))
    } else {
        let b = spec.beta;
        (b * r.powf(b - 1.0), b * (b - 1.0) * r.powf(b - 2.0))
    };
    // Odd profile <x, a> rho(r) with rho = r^(gamma - 1).
    let g = spec.gamma;
    let rho = r.powf(g - 1.0);
    let rho_p = (g - 1.0) * r.powf(g - 2.0);
    let rho_pp = (g - 1.0) * (g - 2.0) * r.powf(g - 3.0);
    let xa = dot(x, &spec.a);

    let df = vec3(|i| fp * n[i] + spec.a[i] * rho + xa * rho_p * n[i]);
    let ddf = SymMat3::from_fn(|i, j| {
        let tang = (kron(i, j) - n[i] * n[j]) / r;
        fpp * n[i] * n[j]
            + fp * tang
            + rho_p * (spec.a[i] * n[j] + spec.a[j] * n[i])
            + xa * (rho_pp * n[i] * n[j] + rho_p * tang)
    });
    GraphFn { df, ddf }
}

/// Induced metric deviation of the graph: `u = c n(x)n - N^2 df(x)df`.
fn graph_dev(spec: &GraphSliceSpec, x: &Point3) -> Result<SymMat3> {
    let r = norm(x);
    let n = scale3(x, 1.0 / r);
    let c = areal_c(spec.m, r);
    let n_sq = 1.0 - 2.0 * spec.m / r;
    let gf = graph_fn(spec, x);
    check_spacelike(spec, x, &gf.df)?;
    Ok(SymMat3::from_fn(|i, j| {
        c * n[i] * n[j] - n_sq * gf.df[i] * gf.df[j]
    }))
}

fn check_spacelike(spec: &GraphSliceSpec, x: &Point3, df: &Vec3) -> Result<f64> {
    let r = norm(x);
    let n_sq = 1.0 - 2.0 * spec.m / r;
    let ginv = areal_inv(spec.m, x);
    let df_sq = sum2(|k, l| ginv[k][l] * df[k] * df[l]);
    let radicand = 1.0 - n_sq * df_sq;
    if radicand <= 0.0 {
        return Err(Error::NonSpacelikeSlice { r, radicand });
    }
    // lambda^2 = N^-2 - |df|^2_g = radicand / N^2
    Ok((radicand / n_sq).sqrt())
}

/// Second fundamental form of the graph with respect to the future-directed
/// unit normal, assembled from the 4d Christoffel symbols of the spacetime
/// sample.
fn graph_extrinsic(spec: &GraphSliceSpec, x: &Point3) -> Result<SymMat3> {
    let r = norm(x);
    let m = spec.m;
    let gf = graph_fn(spec, x);
    let lambda = check_spacelike(spec, x, &gf.df)?;
    let st = spacetime_metric(m, 0.0, x)?;

    // Inverse spacetime metric (static block-diagonal form).
    let n_sq = 1.0 - 2.0 * m / r;
    let ginv3 = areal_inv(m, x);
    let mut ginv4 = [[0.0; 4]; 4];
    ginv4[0][0] = -1.0 / n_sq;
    for i in 0..3 {
        for j in 0..3 {
            ginv4[i + 1][j + 1] = ginv3[i][j];
        }
    }

    // 4d Christoffels.
    let mut gamma4 = [[[0.0; 4]; 4]; 4];
    for lam in 0..4 {
        for mu in 0..4 {
            for nu in 0..4 {
                let mut acc = 0.0;
                for rho in 0..4 {
                    acc += 0.5
                        * ginv4[lam][rho]
                        * (st.dgbar[mu][rho][nu] + st.dgbar[nu][rho][mu] - st.dgbar[rho][mu][nu]);
                }
                gamma4[lam][mu][nu] = acc;
            }
        }
    }

    // Future unit conormal n_mu = (-1, df) / lambda. Tangentially, the
    // gradient of the normalization cancels between d_i n_j and f_j d_i n_0,
    // leaving only f_ij / lambda from the coordinate-derivative part.
    let n_cov = {
        let mut v = [0.0; 4];
        v[0] = -1.0 / lambda;
        for i in 0..3 {
            v[i + 1] = gf.df[i] / lambda;
        }
        v
    };

    let k_raw = mat3(|i, j| {
        let d_part = gf.ddf.get(i, j) / lambda;
        let mut conn = 0.0;
        for lam_idx in 0..4 {
            conn += n_cov[lam_idx]
                * (gamma4[lam_idx][i + 1][j + 1]
                    + gf.df[i] * gamma4[lam_idx][0][j + 1]
                    + gf.df[j] * gamma4[lam_idx][0][i + 1]
                    + gf.df[i] * gf.df[j] * gamma4[lam_idx][0][0]);
        }
        d_part - conn
    });
    Ok(SymMat3::symmetrize(k_raw))
}

/// Full graph-slice sample at a point (the [`DataFamily::GraphSlice`] path).
pub fn graph_slice_data(spec: &GraphSliceSpec, x: &Point3) -> Result<InitialDataSample> {
    DataFamily::GraphSlice(spec.clone()).sample(x)
}

// ---------------------------------------------------------------------------
// DataFamily evaluation
// ---------------------------------------------------------------------------

impl DataFamily {
    pub fn graph_slice(m: f64, beta: f64, gamma: f64, a: Vec3) -> Result<DataFamily> {
        Ok(DataFamily::GraphSlice(GraphSliceSpec::new(m, beta, gamma, a)?))
    }

    /// Wraps a family in an exact rigid motion; the returned family evaluates
    /// the pullback `g'(x) = Q^t g(Qx + b) Q` and likewise for `K` and all
    /// derivatives by the chain rule.
    pub fn rigid_transform(self, q: Mat3, b: Vec3) -> Result<DataFamily> {
        let defect = orthogonality_defect(&q);
        if defect > 1e-14 {
            return Err(Error::Invalid(format!(
                "transform matrix is not orthogonal (defect {defect:.3e})"
            )));
        }
        Ok(DataFamily::Transformed {
            q,
            b,
            inner: Box::new(self),
        })
    }

    fn transform_point(q: &Mat3, b: &Vec3, x: &Point3) -> Point3 {
        add3(&matvec(q, x), b)
    }
}

/// Pullback of a symmetric tensor: `(Q^t T Q)_ij`.
fn pullback_sym(q: &Mat3, t: &SymMat3) -> SymMat3 {
    SymMat3::from_fn(|i, j| sum2(|a, b| q[a][i] * t.get(a, b) * q[b][j]))
}

fn pullback_ten3(q: &Mat3, t: &Ten3) -> Ten3 {
    ten3(|k, i, j| sum3(|c, a, b| q[c][k] * q[a][i] * q[b][j] * t[c][a][b]))
}

fn pullback_ten4(q: &Mat3, t: &Ten4) -> Ten4 {
    ten4(|k, l, i, j| {
        let mut acc = 0.0;
        for c in 0..3 {
            for d in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        acc += q[c][k] * q[d][l] * q[a][i] * q[b][j] * t[c][d][a][b];
                    }
                }
            }
        }
        acc
    })
}

impl InitialData for DataFamily {
    fn metric_dev(&self, x: &Point3) -> Result<SymMat3> {
        self.check_domain(x)?;
        match self {
            DataFamily::Flat => Ok(SymMat3::ZERO),
            DataFamily::SchwarzschildAreal { m } => Ok(areal_dev(*m, x)),
            DataFamily::SchwarzschildIsotropic { m } => {
                let r = norm(x);
                let psi = 1.0 + m / (2.0 * r);
                let f = psi.powi(4) - 1.0;
                Ok(SymMat3::from_fn(|i, j| f * kron(i, j)))
            }
            DataFamily::GraphSlice(spec) => graph_dev(spec, x),
            DataFamily::Transformed { q, b, inner } => {
                let y = DataFamily::transform_point(q, b, x);
                let u = inner.metric_dev(&y)?;
                // Q^t (delta + u) Q - delta, keeping the (Q^t Q - delta) defect exact.
                let qtq = matmul(&transpose(q), q);
                Ok(SymMat3::from_fn(|i, j| {
                    qtq[i][j] - kron(i, j) + sum2(|a, c| q[a][i] * u.get(a, c) * q[c][j])
                }))
            }
        }
    }

    fn extrinsic(&self, x: &Point3) -> Result<SymMat3> {
        self.check_domain(x)?;
        match self {
            DataFamily::Flat
            | DataFamily::SchwarzschildAreal { .. }
            | DataFamily::SchwarzschildIsotropic { .. } => Ok(SymMat3::ZERO),
            DataFamily::GraphSlice(spec) => graph_extrinsic(spec, x),
            DataFamily::Transformed { q, b, inner } => {
                let y = DataFamily::transform_point(q, b, x);
                Ok(pullback_sym(q, &inner.extrinsic(&y)?))
            }
        }
    }

    fn dmetric(&self, x: &Point3, h: f64) -> Result<Ten3> {
        self.check_domain(x)?;
        match self {
            DataFamily::Flat => Ok([[[0.0; 3]; 3]; 3]),
            DataFamily::SchwarzschildAreal { m } => Ok(areal_ddev(*m, x)),
            DataFamily::SchwarzschildIsotropic { m } => {
                let r = norm(x);
                let n = scale3(x, 1.0 / r);
                let psi = 1.0 + m / (2.0 * r);
                let dpsi = -m / (2.0 * r * r);
                let f_p = 4.0 * psi.powi(3) * dpsi;
                Ok(ten3(|k, i, j| f_p * n[k] * kron(i, j)))
            }
            DataFamily::GraphSlice(spec) => {
                // Analytic derivative of the spherically symmetric part plus a
                // stencil derivative of the -N^2 df (x) df remainder.
                let base = areal_ddev(spec.m, x);
                let rem = fd_ten3(
                    |p| {
                        let r = norm(p);
                        let n_sq = 1.0 - 2.0 * spec.m / r;
                        let gf = graph_fn(spec, p);
                        Ok(SymMat3::from_fn(|i, j| -n_sq * gf.df[i] * gf.df[j]))
                    },
                    x,
                    h,
                )?;
                Ok(ten3(|k, i, j| base[k][i][j] + rem[k][i][j]))
            }
            DataFamily::Transformed { q, b, inner } => {
                let y = DataFamily::transform_point(q, b, x);
                Ok(pullback_ten3(q, &inner.dmetric(&y, h)?))
            }
        }
    }

    fn dextrinsic(&self, x: &Point3, h: f64) -> Result<Ten3> {
        match self {
            DataFamily::Flat
            | DataFamily::SchwarzschildAreal { .. }
            | DataFamily::SchwarzschildIsotropic { .. } => {
                self.check_domain(x)?;
                Ok([[[0.0; 3]; 3]; 3])
            }
            DataFamily::GraphSlice(_) => fd_ten3(|p| self.extrinsic(p), x, h),
            DataFamily::Transformed { q, b, inner } => {
                let y = DataFamily::transform_point(q, b, x);
                Ok(pullback_ten3(q, &inner.dextrinsic(&y, h)?))
            }
        }
    }

    fn ddmetric(&self, x: &Point3, h: f64) -> Result<Ten4> {
        match self {
            DataFamily::Flat => {
                self.check_domain(x)?;
                Ok([[[[0.0; 3]; 3]; 3]; 3])
            }
            DataFamily::Transformed { q, b, inner } => {
                let y = DataFamily::transform_point(q, b, x);
                Ok(pullback_ten4(q, &inner.ddmetric(&y, h)?))
            }
            _ => fd_ten4(|p| self.metric_dev(p), x, h),
        }
    }

    fn mass_hint(&self) -> Option<f64> {
        match self {
            DataFamily::Flat => Some(0.0),
            DataFamily::SchwarzschildAreal { m }
            | DataFamily::SchwarzschildIsotropic { m }
            | DataFamily::GraphSlice(GraphSliceSpec { m, .. }) => Some(*m),
            DataFamily::Transformed { inner, .. } => inner.mass_hint(),
        }
    }

    fn min_radius(&self) -> f64 {
        match self {
            DataFamily::Flat => 0.0,
            DataFamily::SchwarzschildAreal { m } | DataFamily::GraphSlice(GraphSliceSpec { m, .. }) => {
                if *m > 0.0 {
                    2.0 * m * (1.0 + HORIZON_MARGIN)
                } else {
                    0.0
                }
            }
            DataFamily::SchwarzschildIsotropic { m } => {
                if *m > 0.0 {
                    2.0 * m * (1.0 + HORIZON_MARGIN)
                } else {
                    0.5 * m.abs() * (1.0 + HORIZON_MARGIN)
                }
            }
            DataFamily::Transformed { inner, .. } => inner.min_radius(),
        }
    }
}

/// Evaluates a family at a point with the default derivative strategy.
pub fn eval(family: &DataFamily, x: &Point3) -> Result<InitialDataSample> {
    family.sample(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<(&'static str, DataFamily)> {
        vec![
            ("flat", DataFamily::Flat),
            ("areal", DataFamily::SchwarzschildAreal { m: 1.0 }),
            ("isotropic", DataFamily::SchwarzschildIsotropic { m: 1.0 }),
            (
                "graph",
                DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap(),
            ),
            (
                "graph-beta",
                DataFamily::graph_slice(1.0, 0.25, 0.1, [0.3, -0.2, 0.5]).unwrap(),
            ),
        ]
    }

    #[test]
    fn flat_is_euclidean() {
        let s = eval(&DataFamily::Flat, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.g, SymMat3::identity());
        assert_eq!(s.k, SymMat3::ZERO);
        assert_eq!(s.dg, [[[0.0; 3]; 3]; 3]);
        assert_eq!(s.ddg, [[[[0.0; 3]; 3]; 3]; 3]);
    }

    #[test]
    fn areal_radial_component() {
        // g_m = N^-2 dr^2 + r^2 dOmega^2 in Cartesian components at (10, 0, 0):
        // radial direction e_1, so g_11 = (1 - 2/10)^-1 = 1.25, tangential 1.
        let s = eval(&DataFamily::SchwarzschildAreal { m: 1.0 }, &[10.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(s.g.get(0, 0), 1.25, epsilon = 1e-14);
        assert_relative_eq!(s.g.get(1, 1), 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.g.get(2, 2), 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.g.get(0, 1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn spacetime_minkowski_and_lapse() {
        let s = spacetime_metric(0.0, 0.0, &[3.0, 4.0, 0.0]).unwrap();
        assert_relative_eq!(s.gbar[0][0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(s.gbar[1][1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.gbar[1][2], 0.0, epsilon = 1e-15);

        let s = spacetime_metric(1.0, 0.0, &[4.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(s.gbar[0][0], -0.5, epsilon = 1e-15);

        // Near-degenerate lapse is still a finite sample.
        let s = spacetime_metric(1.0, 0.0, &[2.0001, 0.0, 0.0]).unwrap();
        assert!(s.gbar[0][0] < 0.0 && s.gbar[0][0].is_finite());
        assert!(s.gbar[1][1].is_finite());
    }

    #[test]
    fn horizon_margin_enforced() {
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        assert!(matches!(
            eval(&fam, &[2.001, 0.0, 0.0]),
            Err(Error::Domain { .. })
        ));
        assert!(eval(&fam, &[2.01, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn dg_matches_finite_differences_of_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (name, fam) in families() {
            for _ in 0..10 {
                let r = rng.gen_range(8.0..200.0);
                let theta: f64 = rng.gen_range(0.2..2.9);
                let phi: f64 = rng.gen_range(0.0..6.28);
                let x = [
                    r * theta.sin() * phi.cos(),
                    r * theta.sin() * phi.sin(),
                    r * theta.cos(),
                ];
                let h = step_at(&x, SAMPLE_STEP_SCALE);
                let dg = fam.dmetric(&x, h).unwrap();
                let fd = fd_ten3(|p| fam.metric_dev(p), &x, h * 1.9).unwrap();
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            let scale = 1.0_f64.max(dg[k][i][j].abs());
                            assert!(
                                (dg[k][i][j] - fd[k][i][j]).abs() / scale < 1e-7,
                                "{name}: dg[{k}][{i}][{j}] {} vs fd {}",
                                dg[k][i][j],
                                fd[k][i][j]
                            );
                        }
                    }
                }
                // dK against finite differences of K.
                let dk = fam.dextrinsic(&x, h).unwrap();
                let fdk = fd_ten3(|p| fam.extrinsic(p), &x, h * 1.9).unwrap();
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            let scale = 1.0_f64.max(dk[k][i][j].abs());
                            assert!(
                                (dk[k][i][j] - fdk[k][i][j]).abs() / scale < 1e-7,
                                "{name}: dk mismatch"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rigid_identity_is_transparent() {
        let fam = DataFamily::SchwarzschildAreal { m: 1.0 };
        let id = fam
            .clone()
            .rigid_transform(mat3(|i, j| kron(i, j)), [0.0; 3])
            .unwrap();
        let x = [7.0, -3.0, 2.0];
        let a = eval(&fam, &x).unwrap();
        let b = eval(&id, &x).unwrap();
        assert_relative_eq!(a.g.get(0, 1), b.g.get(0, 1), epsilon = 1e-15);
        assert_relative_eq!(a.k.get(2, 2), b.k.get(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn rotated_flat_stays_flat() {
        let q = rotation(&[0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let fam = DataFamily::Flat.rigid_transform(q, [1.0, 2.0, 3.0]).unwrap();
        let s = eval(&fam, &[5.0, 1.0, -2.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(s.g.get(i, j), kron(i, j), epsilon = 1e-14);
            }
        }
        assert!(s.k.max_abs() < 1e-15);
    }

    #[test]
    fn rigid_roundtrip_recovers_inner() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = rotation(&[0.4, 1.0, -0.7], 0.83);
        let b = [3.0, -1.0, 0.5];
        let inner = DataFamily::graph_slice(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let fwd = inner.clone().rigid_transform(q, b).unwrap();
        let back = fwd
            .rigid_transform(transpose(&q), scale3(&matvec(&transpose(&q), &b), -1.0))
            .unwrap();
        for _ in 0..5 {
            let x = [
                rng.gen_range(20.0..60.0),
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-30.0..30.0),
            ];
            let a = eval(&inner, &x).unwrap();
            let c = eval(&back, &x).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a.g.get(i, j) - c.g.get(i, j)).abs() < 1e-13);
                    assert!((a.k.get(i, j) - c.k.get(i, j)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn nearly_constant_graph_is_time_symmetric() {
        // beta very negative makes f' negligibly small; with a = 0 the slice
        // approaches a t = const slice, so K ~ 0 and g ~ g_m.
        let spec = GraphSliceSpec::new(1.0, -6.0, 0.0, [0.0; 3]).unwrap();
        let x = [50.0, 10.0, -20.0];
        let s = graph_slice_data(&spec, &x).unwrap();
        assert!(s.k.max_abs() < 1e-10);
        let areal = eval(&DataFamily::SchwarzschildAreal { m: 1.0 }, &x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.g.get(i, j) - areal.g.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn graph_slice_has_extrinsic_curvature() {
        let spec = GraphSliceSpec::new(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let s = graph_slice_data(&spec, &[30.0, 0.0, 0.0]).unwrap();
        assert!(s.k.max_abs() > 1e-5);
    }

    #[test]
    fn graph_slice_rejects_null_slices() {
        // Large gradient near the horizon: sin(ln r) has |f'| ~ 1/r but N^2
        // approaches 1; force failure with a steep odd part instead.
        let spec = GraphSliceSpec::new(1.0, 0.0, 0.45, [50.0, 0.0, 0.0]).unwrap();
        let res = graph_slice_data(&spec, &[9.0, 0.1, 0.0]);
        assert!(matches!(res, Err(Error::NonSpacelikeSlice { .. })));
    }
}
