//! Variance-based loss.
//!
//! For each class the trainer tracks the running mean and population
//! variance of the softmax probability the model assigns to the true class.
//! Class weights drift from 1 toward those variances under a linearly
//! decaying factor α and freeze once α reaches zero, which with
//! `γ = batch_size / N` happens after one epoch. A sample's loss is
//! weighted by the *other* class's weight, so the class the model
//! aggregates poorly pulls the decision boundary away from itself.

use std::fmt::Write as _;

use crate::data::Label;

/// Floor applied to converted weights so the loss never divides by zero.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// A logit or probability pair, positive class first.
pub type Pair = [f64; 2];

/// Max-subtracted softmax.
pub fn softmax(z: Pair) -> Pair {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn log_sum_exp(z: Pair) -> f64 {
    let m = z[0].max(z[1]);
    m + ((z[0] - m).exp() + (z[1] - m).exp()).ln()
}

/// Standard softmax cross-entropy.
pub fn cross_entropy(z: Pair, y: Label) -> f64 {
    log_sum_exp(z) - z[y.index()]
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad(z: Pair, y: Label) -> Pair {
    let mut q = softmax(z);
    q[y.index()] -= 1.0;
    q
}

fn shifted(z: Pair, w: Pair) -> Pair {
    [z[0] + w[0].ln(), z[1] + w[1].ln()]
}

/// `−log( w̃_y e^{z_y} / Σ w̃ e^{z} )`, evaluated as a cross-entropy on
/// logits shifted by `ln w̃`. Always positive: the weighted true-class
/// share is below 1.
pub fn vbl_loss(z: Pair, y: Label, w: Pair) -> f64 {
    cross_entropy(shifted(z, w), y)
}

/// `∂L/∂z = q − onehot(y)` with `q = softmax(z + ln w̃)`.
pub fn vbl_grad(z: Pair, y: Label, w: Pair) -> Pair {
    cross_entropy_grad(shifted(z, w), y)
}

/// Batch-mean loss and per-sample logit gradients (already divided by the
/// batch size).
pub fn vbl_batch(logits: &[Pair], labels: &[Label], w: Pair) -> (f64, Vec<Pair>) {
    let b = logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            total += vbl_loss(z, y, w);
            let g = vbl_grad(z, y, w);
            [g[0] / b, g[1] / b]
        })
        .collect();
    (total / b, grads)
}

/// Batch-mean cross-entropy and per-sample logit gradients.
pub fn cross_entropy_batch(logits: &[Pair], labels: &[Label]) -> (f64, Vec<Pair>) {
    let b = logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            total += cross_entropy(z, y);
            let g = cross_entropy_grad(z, y);
            [g[0] / b, g[1] / b]
        })
        .collect();
    (total / b, grads)
}

/// Swaps the class weights: a label's loss weight is the other class's
/// variance weight. Floored at [`WEIGHT_FLOOR`].
pub fn convert_weights(omega: Pair) -> Pair {
    [omega[1].max(WEIGHT_FLOOR), omega[0].max(WEIGHT_FLOOR)]
}

/// Adaptive weighting state, single writer.
///
/// α is kept as the exact fraction `alpha_units / horizon` so that
/// `γ = batch_size / N` reaches zero after exactly `⌈N / batch_size⌉`
/// decrements.
#[derive(Debug, Clone, PartialEq)]
pub struct VblState {
    /// Running mean of the true-class probability, per class.
    pub mean: Pair,
    /// Running population variance, per class.
    pub var: Pair,
    /// Variance weights ω, per class.
    pub omega: Pair,
    /// Converted weights ω̃ used by the loss.
    pub omega_tilde: Pair,
    /// Observations absorbed per class.
    pub n: [u64; 2],
    alpha_units: i64,
    step_units: i64,
    horizon: i64,
    frozen: bool,
}

impl VblState {
    /// Fresh state for a training set of `n_train` samples.
    pub fn new(batch_size: usize, n_train: usize) -> Self {
        assert!(batch_size > 0 && n_train > 0, "batch size and training size must be positive");
        VblState {
            mean: [0.0; 2],
            var: [0.0; 2],
            omega: [1.0; 2],
            omega_tilde: convert_weights([1.0; 2]),
            n: [0; 2],
            alpha_units: n_train as i64,
            step_units: batch_size as i64,
            horizon: n_train as i64,
            frozen: false,
        }
    }

    /// A state frozen at the given ω; the loss then uses `convert(ω)` forever.
    pub fn frozen_at(omega: Pair) -> Self {
        VblState {
            omega,
            omega_tilde: convert_weights(omega),
            alpha_units: 0,
            frozen: true,
            ..VblState::new(1, 1)
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_units as f64 / self.horizon as f64
    }

    pub fn gamma(&self) -> f64 {
        self.step_units as f64 / self.horizon as f64
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Folds one batch into the per-class statistics. Each class present in
    /// the batch contributes a single observation: the mean true-class
    /// probability over its samples. Absent classes are left untouched.
    pub fn update_stats(&mut self, logits: &[Pair], labels: &[Label]) {
        if self.frozen {
            return;
        }
        let mut sum = [0.0; 2];
        let mut count = [0usize; 2];
        for (&z, &y) in logits.iter().zip(labels) {
            let c = y.index();
            sum[c] += softmax(z)[c];
            count[c] += 1;
        }
        for c in 0..2 {
            if count[c] > 0 {
                self.observe(c, sum[c] / count[c] as f64);
            }
        }
    }

    /// One step of the running mean / population variance recursion.
    pub fn observe(&mut self, class: usize, x: f64) {
        self.n[class] += 1;
        let n = self.n[class] as f64;
        if self.n[class] == 1 {
            self.mean[class] = x;
            self.var[class] = 0.0;
        } else {
            let prev = self.mean[class];
            let d = x - prev;
            self.mean[class] = prev + d / n;
            self.var[class] = (n - 1.0) / (n * n) * d * d + (n - 1.0) / n * self.var[class];
        }
    }

    /// `ω ← α·ω + (1 − α)·V`, refreshes ω̃, then `α ← α − γ`; freezes once
    /// α is no longer positive.
    pub fn update_weights(&mut self) {
        if self.frozen {
            return;
        }
        let alpha = self.alpha();
        for c in 0..2 {
            self.omega[c] = alpha * self.omega[c] + (1.0 - alpha) * self.var[c];
        }
        self.omega_tilde = convert_weights(self.omega);
        self.alpha_units -= self.step_units;
        if self.alpha_units <= 0 {
            self.alpha_units = self.alpha_units.max(0);
            self.frozen = true;
        }
    }

    /// One training batch: statistics, weights and conversion.
    pub fn step(&mut self, logits: &[Pair], labels: &[Label]) {
        if self.frozen {
            return;
        }
        self.update_stats(logits, labels);
        self.update_weights();
    }

    pub fn csv_header() -> &'static str {
        "batch,mean_P,mean_N,var_P,var_N,omega_P,omega_N,omega_tilde_P,omega_tilde_N,alpha,n_P,n_N,frozen"
    }

    pub fn csv_row(&self, batch: usize) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{batch},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mean[0],
            self.mean[1],
            self.var[0],
            self.var[1],
            self.omega[0],
            self.omega[1],
            self.omega_tilde[0],
            self.omega_tilde[1],
            self.alpha(),
            self.n[0],
            self.n[1],
            self.frozen
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: Label = Label::Positive;
    const N: Label = Label::Negative;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax([0.0, 0.0]), [0.5, 0.5]);
        let p = softmax([1000.0, 0.0]);
        assert!(p[0].is_finite() && close(p[0], 1.0, 1e-15) && p[1] < 1e-300 + 1e-15);
        let p = softmax([2.0, 0.0]);
        let e2 = 2f64.exp();
        assert!(close(p[0], e2 / (e2 + 1.0), 1e-15));
        assert!(close(p[0], 0.8808, 5e-5) && close(p[1], 0.1192, 5e-5));
    }

    #[test]
    fn running_stats_example() {
        let mut st = VblState::new(1, 10);
        let expect = [(0.2, 0.0), (0.3, 0.01), (0.5, 0.26 / 3.0)];
        for (x, (a, v)) in [0.2, 0.4, 0.9].into_iter().zip(expect) {
            st.observe(0, x);
            assert!(close(st.mean[0], a, 1e-12), "{} vs {a}", st.mean[0]);
            assert!(close(st.var[0], v, 1e-12), "{} vs {v}", st.var[0]);
        }
        assert!(close(st.var[0], 0.086667, 1e-6));
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let mut st = VblState::new(1, 10);
        for _ in 0..50 {
            st.observe(1, 0.625);
        }
        assert_eq!(st.mean[1], 0.625);
        assert_eq!(st.var[1], 0.0);
    }

    #[test]
    fn absent_class_is_skipped() {
        let mut st = VblState::new(4, 100);
        st.update_stats(&[[0.0, 1.0], [2.0, 0.0]], &[N, N]);
        assert_eq!(st.n, [0, 1]);
        assert_eq!((st.mean[0], st.var[0]), (0.0, 0.0));
        // batch observation is the mean over that class's samples
        let want = (softmax([0.0, 1.0])[1] + softmax([2.0, 0.0])[1]) / 2.0;
        assert!(close(st.mean[1], want, 1e-15));
    }

    #[test]
    fn weight_update_examples() {
        // α = 0.75 after one decrement with γ = 1/4
        let mut st = VblState::new(1, 4);
        st.update_weights();
        assert_eq!(st.omega, [1.0, 1.0]);
        assert_eq!(st.alpha(), 0.75);
        st.var = [0.04, 0.04];
        st.update_weights();
        assert!(close(st.omega[0], 0.76, 1e-15));

        // α = 1 leaves ω unchanged whatever V is
        let mut st = VblState::new(2, 10);
        st.var = [0.3, 0.9];
        st.update_weights();
        assert_eq!(st.omega, [1.0, 1.0]);
    }

    #[test]
    fn freezes_after_one_epoch_of_batches() {
        let mut st = VblState::new(35, 350);
        assert!(close(st.gamma(), 0.1, 1e-15));
        for i in 0..10 {
            assert!(!st.is_frozen(), "frozen early at batch {i}");
            st.step(&[[0.3, 0.1], [0.0, 0.2]], &[P, N]);
        }
        assert!(st.is_frozen());
        let snapshot = st.clone();
        st.step(&[[5.0, 0.1], [0.0, 9.2]], &[P, N]);
        assert_eq!(st, snapshot);

        // a ragged last batch still freezes after ⌈N/B⌉ steps
        let mut st = VblState::new(16, 350);
        for _ in 0..21 {
            st.update_weights();
        }
        assert!(!st.is_frozen());
        st.update_weights();
        assert!(st.is_frozen());
    }

    #[test]
    fn convert_examples() {
        assert_eq!(convert_weights([2.0, 1.0]), [1.0, 2.0]);
        assert_eq!(convert_weights([1.0, 1.0]), [1.0, 1.0]);
        assert_eq!(convert_weights([0.0, 3.0]), [3.0, WEIGHT_FLOOR]);
    }

    #[test]
    fn loss_examples() {
        assert!(close(vbl_loss([1.0, 1.0], P, [1.0, 1.0]), 2f64.ln(), 1e-15));
        let w = convert_weights([2.0, 1.0]);
        let want = (1.0 + 2.0 * (-2f64).exp()).ln();
        assert!(close(vbl_loss([2.0, 0.0], P, w), want, 1e-15));
        assert!(close(want, 0.2395, 5e-5));
        let (mean, _) = vbl_batch(&[[2.0, 0.0]; 5], &[P; 5], w);
        assert!(close(mean, want, 1e-15));
    }

    #[test]
    fn loss_stays_positive_when_true_class_dominates() {
        // the true-class term inside the log is exactly 1
        let l = vbl_loss([5.0, 0.0], P, [10.0, 1.0]);
        assert!(l > 0.0 && l < 1e-3);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(vbl_grad([0.0, 0.0], P, [1.0, 1.0]), [-0.5, 0.5]);
        let g = vbl_grad([0.3, -1.2], N, [0.2, 3.0]);
        assert!(close(g[0] + g[1], 0.0, 1e-15));
    }

    #[test]
    fn unit_weights_reduce_to_cross_entropy() {
        for (z, y) in [([0.3, -2.0], P), ([10.0, 11.0], N), ([-700.0, 700.0], P)] {
            assert_eq!(vbl_loss(z, y, [1.0, 1.0]), cross_entropy(z, y));
            assert_eq!(vbl_grad(z, y, [1.0, 1.0]), cross_entropy_grad(z, y));
        }
    }

    #[test]
    fn csv_row_has_header_arity() {
        let st = VblState::new(3, 9);
        let cols = VblState::csv_header().split(',').count();
        assert_eq!(st.csv_row(0).split(',').count(), cols);
    }
}
