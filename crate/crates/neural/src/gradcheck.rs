//! Central finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::params::{Grads, ParamSet};

/// Denominator floor of the relative error, so entries where both gradients
/// vanish compare by absolute difference.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares `grad` of `loss` with `(loss(θ+h) − loss(θ−h)) / 2h` for every
/// scalar of `params`. `params` is restored before returning.
pub fn check_gradients(
    params: &mut ParamSet,
    h: f64,
    loss: impl Fn(&ParamSet) -> Result<f64>,
    grad: impl Fn(&ParamSet) -> Result<Grads>,
) -> Result<GradCheckReport> {
    let analytic = grad(params)?.flatten(params);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *params.scalar_mut(k);
        *params.scalar_mut(k) = orig + h;
        let up = loss(params);
        *params.scalar_mut(k) = orig - h;
        let down = loss(params);
        *params.scalar_mut(k) = orig;
        let numeric = (up? - down?) / (2.0 * h);
        let err = relative_error(a, numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err;
            report.worst_index = k;
            report.analytic = a;
            report.numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}
