//! The scalar constants behind every other module.
//!
//! The breakpoint `l` of the support set is fixed by the transcendental
//! equation `9l + ln(1 - 2l) - ln l - 3 = 0`, which has exactly one root in
//! (0, 1/6). Everything else is derived from `l`:
//!
//! * `r = 1 - 2l` — the upper breakpoint,
//! * `alpha = r / l` — base of the exponential projection density on the
//!   triangle,
//! * `c = l * r^2` — the constant product on the two-dimensional part of the
//!   support,
//! * `primal_value` — the optimal transport cost, in closed form.
//!
//! `r` is always derived as `1 - 2l`; no decimal approximation of `r` is
//! hard-coded anywhere in the crate.

use crate::error::{Error, Result};

/// Solved model constants, immutable once constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    /// Root of the transcendental equation, in (0, 1/6).
    pub l: f64,
    /// `1 - 2l`, in (2/3, 1).
    pub r: f64,
    /// `r / l`, greater than 1.
    pub alpha: f64,
    /// `l * r^2`.
    pub c: f64,
    /// Optimal cost of the transport problem.
    pub primal_value: f64,
}

/// Residual of the equation fixing `l`: `9l + ln(1 - 2l) - ln l - 3`.
///
/// Strictly decreasing on (0, 1/6), with its unique root near 0.0945.
pub fn equation_residual(l: f64) -> Result<f64> {
    if !(l > 0.0 && l < 0.5) {
        return Err(Error::Domain {
            name: "l",
            value: l,
            domain: "(0, 1/2)",
        });
    }
    Ok(9.0 * l + (1.0 - 2.0 * l).ln() - l.ln() - 3.0)
}

fn residual_derivative(l: f64) -> f64 {
    9.0 - 2.0 / (1.0 - 2.0 * l) - 1.0 / l
}

/// Solves for `l` by bisection on [1e-6, 1/6 - 1e-6] followed by Newton
/// polishing, then derives the remaining constants.
pub fn solve_constants(tolerance: f64) -> Result<ModelConstants> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Domain {
            name: "tolerance",
            value: tolerance,
            domain: "(0, inf)",
        });
    }

    let mut lo = 1e-6;
    let mut hi = 1.0 / 6.0 - 1e-6;
    let f_lo = equation_residual(lo)?;
    let f_hi = equation_residual(hi)?;
    if f_lo.signum() == f_hi.signum() {
        // The residual tends to +inf at 0+ and is negative at 1/6; a same-sign
        // bracket means the residual itself is broken.
        return Err(Error::Bracket { lo, hi });
    }

    // Bisection down to a short interval, then let Newton finish.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = equation_residual(mid)?;
        if f_mid == 0.0 {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }

    // Newton tail: quadratic convergence, capped iteration count.
    let mut l = 0.5 * (lo + hi);
    for _ in 0..40 {
        let f = equation_residual(l)?;
        if f.abs() < tolerance {
            break;
        }
        let step = f / residual_derivative(l);
        let next = l - step;
        l = if next > 0.0 && next < 1.0 / 6.0 {
            next
        } else {
            0.5 * (lo + hi)
        };
    }

    let f = equation_residual(l)?;
    if f.abs() >= tolerance {
        return Err(Error::Bracket { lo, hi });
    }

    let r = 1.0 - 2.0 * l;
    let alpha = r / l;
    let c = l * r * r;
    let mut k = ModelConstants {
        l,
        r,
        alpha,
        c,
        primal_value: 0.0,
    };
    k.primal_value = primal_value_closed_form(&k);
    Ok(k)
}

/// Optimal cost in closed form: `3 * \int_0^l x(1-2x)^2 dx + c (r - l)`,
/// with the polynomial integral expanded analytically to
/// `l^2/2 - 4l^3/3 + l^4`.
pub fn primal_value_closed_form(k: &ModelConstants) -> f64 {
    let l = k.l;
    let segment_integral = l * l / 2.0 - 4.0 * l * l * l / 3.0 + l * l * l * l;
    3.0 * segment_integral + k.c * (k.r - k.l)
}
