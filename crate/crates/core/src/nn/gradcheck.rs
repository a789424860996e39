//! Central finite-difference verification of analytic gradients.

use crate::error::NnError;

/// Which coordinates to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords<'a> {
    All,
    Subset(&'a [usize]),
}

/// Relative error used throughout: `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the gradient `loss_fn` reports at `params` with central
/// differences `(L(θ+εe_i) − L(θ−εe_i)) / 2ε` and returns the worst
/// relative error. `loss_fn` returns `(loss, gradient)`; only the gradient
/// at the unperturbed point is used.
pub fn finite_difference_check<L>(mut loss_fn: L, params: &[f64], eps: f64, coords: Coords<'_>) -> Result<f64, NnError>
where
    L: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (base, analytic) = loss_fn(params);
    if !base.is_finite() {
        return Err(NnError::NonFinite(base));
    }
    if analytic.len() != params.len() {
        return Err(NnError::Shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let all: Vec<usize>;
    let indices = match coords {
        Coords::All => {
            all = (0..params.len()).collect();
            &all[..]
        }
        Coords::Subset(idx) => idx,
    };

    let mut theta = params.to_vec();
    let mut worst = 0.0f64;
    for &i in indices {
        let orig = theta[i];
        theta[i] = orig + eps;
        let (plus, _) = loss_fn(&theta);
        theta[i] = orig - eps;
        let (minus, _) = loss_fn(&theta);
        theta[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite(if plus.is_finite() { minus } else { plus }));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}
