//! Central finite-difference verification of analytic gradients.

use crate::rng::{self, StreamRng};

/// Default perturbation.
pub const EPS: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: usize,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let d = (analytic - numeric).abs();
    if d == 0.0 {
        0.0
    } else {
        d / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
    }
}

/// Compares `analytic` against central differences of `loss` at `coords`
/// randomly chosen parameter coordinates (all of them if fewer exist).
pub fn grad_check(
    params: &mut [f64],
    analytic: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
    eps: f64,
    coords: usize,
    rng: &mut StreamRng,
) -> GradCheck {
    let mut idx: Vec<usize> = (0..params.len()).collect();
    rng::shuffle(rng, &mut idx);
    idx.truncate(coords);
    let mut out = GradCheck { max_rel_error: 0.0, worst: 0, checked: 0 };
    for &i in &idx {
        let orig = params[i];
        params[i] = orig + eps;
        let up = loss(params);
        params[i] = orig - eps;
        let down = loss(params);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        if err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst = i;
        }
        out.checked += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn exact_gradient_of_a_cubic() {
        let mut p: Vec<f64> = (0..300).map(|i| (i as f64 * 0.01) - 1.0).collect();
        let g: Vec<f64> = p.iter().map(|x| 3.0 * x * x + 1.0).collect();
        let r = grad_check(&mut p, &g, |q| q.iter().map(|x| x * x * x + x).sum(), EPS, 250, &mut stream(0, Purpose::Init, 0));
        assert_eq!(r.checked, 250);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn constant_loss_with_zero_gradient_has_zero_error() {
        let mut p = vec![0.5; 10];
        let r = grad_check(&mut p, &[0.0; 10], |_| 1.0, EPS, 10, &mut stream(0, Purpose::Init, 0));
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut p = vec![1.0; 4];
        let r = grad_check(&mut p, &[2.0, 2.0, 2.0, 0.0], |q| q.iter().map(|x| x * x).sum(), EPS, 4, &mut stream(0, Purpose::Init, 0));
        assert!(r.max_rel_error > 0.9);
    }
}
