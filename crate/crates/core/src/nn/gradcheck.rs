//! Central finite-difference checks of analytic gradients.

use serde::Serialize;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

/// Assumed accuracy of a loss evaluation, in units of machine epsilon
/// relative to the loss value.
pub const ROUNDOFF_ULPS: f64 = 16.0;

#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    pub name: String,
    pub checked: usize,
    /// Coordinates whose perturbation changed the activation pattern of a
    /// piecewise-linear op (e.g. crossed a ReLU kink); finite differences are
    /// meaningless there.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: usize,
}

impl GradReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_err < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_excess(analytic, numeric, 0.0)
}

/// Relative error after discounting `noise`, the absolute error that
/// rounding in the loss alone can put into a central difference.
pub fn relative_excess(analytic: f64, numeric: f64, noise: f64) -> f64 {
    ((analytic - numeric).abs() - noise).max(0.0) / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Bound on the roundoff part of a central difference between loss values
/// `fp` and `fm`.
pub fn roundoff_bound(fp: f64, fm: f64) -> f64 {
    ROUNDOFF_ULPS * f64::EPSILON * fp.abs().max(fm.abs()).max(1.0) / FD_STEP
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn grad_check(name: &str, mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> GradReport {
    grad_check_piecewise(name, |p| (f(p), 0), x, analytic)
}

/// Like [`grad_check`] for functions that also return a signature of their
/// activation pattern. Coordinates where the signature differs between the
/// two probe points are skipped and counted.
pub fn grad_check_piecewise(
    name: &str,
    mut f: impl FnMut(&[f64]) -> (f64, u64),
    x: &[f64],
    analytic: &[f64],
) -> GradReport {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let mut report = GradReport {
        name: name.to_string(),
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst_index: 0,
    };
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let (fp, sp) = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let (fm, sm) = f(&probe);
        probe[i] = x[i];
        if sp != sm {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        let rel = relative_excess(analytic[i], numeric, roundoff_bound(fp, fm));
        report.checked += 1;
        report.max_abs_err = report.max_abs_err.max((analytic[i] - numeric).abs());
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report
}

/// Hashes a ReLU activation pattern (which entries are positive).
pub fn activation_signature<'a>(tensors: impl IntoIterator<Item = &'a [f64]>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tensors {
        for &v in t {
            h ^= u64::from(v > 0.0);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h = h.rotate_left(7) ^ t.len() as u64;
    }
    h
}
