//! Central finite-difference stencils used by the data families and the
//! third-derivative closures.
//!
//! All stencils are fourth order. The step at a point x is
//! `h = max(1, |x|) * scale`, with one scale per derivative order.
//! First derivatives use a tight step; second derivatives use a much wider
//! one because their roundoff floor grows like `eps |u| / h^2` while the
//! fourth-order truncation term stays negligible for the analytic families
//! (relative truncation ~ (5e-4)^4 ~ 6e-14). The nested third-derivative
//! closures apply [`THIRD_DERIV_STEP_SCALE`] on top of ordinary samples.

use crate::tensor::{norm, vec3, Point3};

/// Step scale for first derivatives in sample assembly.
pub const SAMPLE_STEP_SCALE: f64 = 1e-5;

/// Step scale for second derivatives in sample assembly.
pub const SECOND_DERIV_STEP_SCALE: f64 = 5e-4;

/// Step scale for the nested third-derivative stencils.
pub const THIRD_DERIV_STEP_SCALE: f64 = 1e-4;

/// Step at `x` for a given scale.
pub fn step_at(x: &Point3, scale: f64) -> f64 {
    norm(x).max(1.0) * scale
}

/// Offsets and weights of the 4th-order first-derivative stencil, in units
/// of h: f'(x) = sum_k w_k f(x + o_k h) / h.
pub const D1_OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
pub const D1_WEIGHTS: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];

/// 4th-order second-derivative stencil (same direction twice):
/// f''(x) = sum_k w_k f(x + o_k h) / h^2.
pub const D2_OFFSETS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const D2_WEIGHTS: [f64; 5] = [
    -1.0 / 12.0,
    16.0 / 12.0,
    -30.0 / 12.0,
    16.0 / 12.0,
    -1.0 / 12.0,
];

fn shifted(x: &Point3, dir: usize, offset: f64) -> Point3 {
    vec3(|i| if i == dir { x[i] + offset } else { x[i] })
}

/// 4th-order partial derivative of a scalar-valued function in direction `dir`.
pub fn d1<F: FnMut(&Point3) -> f64>(mut f: F, x: &Point3, dir: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (o, w) in D1_OFFSETS.iter().zip(D1_WEIGHTS.iter()) {
        acc += w * f(&shifted(x, dir, o * h));
    }
    acc / h
}

/// 4th-order pure second partial in direction `dir`.
pub fn d2_diag<F: FnMut(&Point3) -> f64>(mut f: F, x: &Point3, dir: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (o, w) in D2_OFFSETS.iter().zip(D2_WEIGHTS.iter()) {
        acc += w * f(&shifted(x, dir, o * h));
    }
    acc / (h * h)
}

/// 4th-order mixed partial in directions `a != b` (tensor product of the
/// first-derivative stencil with itself).
pub fn d2_cross<F: FnMut(&Point3) -> f64>(mut f: F, x: &Point3, a: usize, b: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (oa, wa) in D1_OFFSETS.iter().zip(D1_WEIGHTS.iter()) {
        for (ob, wb) in D1_OFFSETS.iter().zip(D1_WEIGHTS.iter()) {
            let p = shifted(&shifted(x, a, oa * h), b, ob * h);
            acc += wa * wb * f(&p);
        }
    }
    acc / (h * h)
}

/// First derivative with a built-in error estimate: the stencil is evaluated
/// at steps h and 2h and Richardson-combined. For a 4th-order stencil the
/// truncation error of the 2h result is 16x the h result, so
/// `|D_h - D_2h| / 15` estimates the truncation error of `D_h`; roundoff
/// noise makes the raw difference the honest bound, which is what we report.
pub fn d1_with_estimate<F: FnMut(&Point3) -> f64>(
    mut f: F,
    x: &Point3,
    dir: usize,
    h: f64,
) -> (f64, f64) {
    let fine = d1(&mut f, x, dir, h);
    let coarse = d1(&mut f, x, dir, 2.0 * h);
    (fine, (fine - coarse).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trial(x: &Point3) -> f64 {
        (x[0] * 0.7).sin() * (x[1] - 0.3).cos() + x[2] * x[2] * x[0]
    }

    #[test]
    fn first_derivative_matches_analytic() {
        let x = [1.2, -0.4, 2.0];
        let h = step_at(&x, SAMPLE_STEP_SCALE);
        let got = d1(trial, &x, 0, h);
        let want = 0.7 * (x[0] * 0.7).cos() * (x[1] - 0.3).cos() + x[2] * x[2];
        assert_relative_eq!(got, want, epsilon = 1e-9);
    }

    #[test]
    fn second_derivatives_match_analytic() {
        let x = [1.2, -0.4, 2.0];
        let h = step_at(&x, SAMPLE_STEP_SCALE);
        let got = d2_diag(trial, &x, 0, h);
        let want = -0.49 * (x[0] * 0.7).sin() * (x[1] - 0.3).cos();
        assert_relative_eq!(got, want, epsilon = 1e-6, max_relative = 1e-5);

        let got = d2_cross(trial, &x, 0, 2, h);
        let want = 2.0 * x[2];
        assert_relative_eq!(got, want, epsilon = 1e-5);
    }

    #[test]
    fn estimate_bounds_error() {
        let x = [0.9, 0.1, -0.2];
        let h = step_at(&x, THIRD_DERIV_STEP_SCALE);
        let (got, est) = d1_with_estimate(trial, &x, 1, h);
        let want = -(x[0] * 0.7).sin() * (x[1] - 0.3).sin();
        assert!((got - want).abs() <= 10.0 * est.max(1e-12));
    }
}
