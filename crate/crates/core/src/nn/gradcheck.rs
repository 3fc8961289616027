//! Central-difference verification of analytic parameter gradients.

use serde::Serialize;

use super::Parameterized;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Entries probed per parameter tensor (evenly spread when larger).
    pub max_per_param: usize,
    /// Denominator floor for the relative error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_per_param: 12,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < tolerance
    }
}

fn nth_param<N: Parameterized<f64> + ?Sized>(net: &mut N, which: usize, f: &mut dyn FnMut(&mut Vec<f64>)) {
    let mut k = 0;
    net.visit_params_mut(&mut |p| {
        if k == which {
            f(&mut p.value);
        }
        k += 1;
    });
}

/// `backward` must leave analytic gradients in every `Param::grad` (they are
/// zeroed first); `loss` evaluates the objective without touching gradients.
pub fn grad_check<N: Parameterized<f64> + ?Sized>(
    net: &mut N,
    loss: &mut dyn FnMut(&mut N) -> f64,
    backward: &mut dyn FnMut(&mut N),
    opts: GradCheckOptions,
) -> GradCheckReport {
    net.zero_grads();
    backward(net);
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    net.visit_params(&mut |p| analytic.push((p.name.clone(), p.grad.clone())));

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let n = grad.len();
        let picks: Vec<usize> = if n <= opts.max_per_param {
            (0..n).collect()
        } else {
            (0..opts.max_per_param).map(|j| j * (n - 1) / (opts.max_per_param - 1)).collect()
        };
        for idx in picks {
            let mut orig = 0.0;
            nth_param(net, pi, &mut |v| {
                orig = v[idx];
                v[idx] = orig + opts.step;
            });
            let up = loss(net);
            nth_param(net, pi, &mut |v| v[idx] = orig - opts.step);
            let down = loss(net);
            nth_param(net, pi, &mut |v| v[idx] = orig);
            let numeric = (up - down) / (2.0 * opts.step);
            let a = grad[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if !(err <= report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_param = name.clone();
                report.worst_index = idx;
            }
        }
    }
    report
}
