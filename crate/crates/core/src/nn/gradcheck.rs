use super::model::CnnModel;
use super::{NnError, Tensor4};

/// Denominator floor of the relative error, so parameters whose true
/// gradient vanishes (a bias feeding batch normalisation) compare on
/// absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Worst relative error of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Compares every analytic gradient entry against the central difference
/// `(L(p + eps) - L(p - eps)) / 2 eps` of the training-mode batch loss.
pub fn finite_difference_check(
    model: &CnnModel,
    x: &Tensor4,
    labels: &[usize],
    eps: f64,
) -> Result<Vec<GradCheck>, NnError> {
    let (_, grads) = model.loss_and_grads(x, labels)?;
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (t, name) in CnnModel::PARAM_NAMES.iter().enumerate() {
        let mut worst: f64 = 0.0;
        let len = grads.0[t].len();
        for i in 0..len {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + eps;
            let up = CnnModel::loss(&probe.forward_train(x)?, labels);
            probe.params_mut()[t][i] = orig - eps;
            let down = CnnModel::loss(&probe.forward_train(x)?, labels);
            probe.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.0[t][i];
            let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
        out.push(GradCheck { name, max_rel_error: worst, checked: len });
    }
    Ok(out)
}
