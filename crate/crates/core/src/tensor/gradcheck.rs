//! Central finite-difference checks of analytic gradients.

use crate::error::Result;

use super::params::{ParamId, ParamStore};

/// Relative error `|a − n| / max(1e-8, |a| + |n|)` as used by [`check_params`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs() + numeric.abs();
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Worst mismatch found by a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Step used for weight `w`: `1e-5 · max(1, |w|)`.
pub fn step_size(w: f64) -> f64 {
    1e-5 * w.abs().max(1.0)
}

/// Compares the analytic parameter gradients of `loss_fn` with central
/// differences. `loss_fn` must build a fresh graph, run backward when
/// `backward` is true, and return the scalar loss. At most `max_per_param`
/// evenly spaced entries of each parameter are probed.
pub fn check_params(
    store: &mut ParamStore,
    max_per_param: usize,
    mut loss_fn: impl FnMut(&mut ParamStore, bool) -> Result<f64>,
) -> Result<GradCheckReport> {
    store.zero_grad();
    loss_fn(store, true)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.clone()).collect();
    store.zero_grad();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let n = store.get(id).value.len();
        let stride = n.div_ceil(max_per_param.max(1)).max(1);
        for j in (0..n).step_by(stride) {
            let w = store.get(id).value.data()[j];
            let h = step_size(w);
            store.get_mut(id).value.data_mut()[j] = w + h;
            let up = loss_fn(store, false)?;
            store.get_mut(id).value.data_mut()[j] = w - h;
            let down = loss_fn(store, false)?;
            store.get_mut(id).value.data_mut()[j] = w;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[id.0][j], numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = j;
            }
        }
    }
    Ok(report)
}
