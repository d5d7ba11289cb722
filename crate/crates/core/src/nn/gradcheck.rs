/// Outcome of a finite-difference comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` at `params`,
/// perturbing every coordinate by ±`epsilon`.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(params: &[f64], analytic: &[f64], epsilon: f64, mut loss: F) -> GradCheck {
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = GradCheck { max_rel_error: 0.0, worst_index: 0 };
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = loss(&p);
        p[i] = orig - epsilon;
        let down = loss(&p);
        p[i] = orig;
        let err = relative_error(analytic[i], (up - down) / (2.0 * epsilon));
        if err > worst.max_rel_error {
            worst = GradCheck { max_rel_error: err, worst_index: i };
        }
    }
    worst
}
