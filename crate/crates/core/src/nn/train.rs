use std::fmt;

use rand::seq::SliceRandom;

use super::Cnn;
use crate::data::Label;
use crate::error::{GtdaError, Result};
use crate::eval::{confusion_from_labels, metrics, Metrics};
use crate::rng::{self, Stream};
use crate::s2i::RasterImage;
use crate::vbl::{self, Pair, VblState};

/// Images scaled to `[0, 1]` with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub side: usize,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub pixels: Vec<Vec<f64>>,
}

impl ImageSet {
    pub fn from_images(items: Vec<(String, RasterImage, Label)>) -> Result<Self> {
        let side = items.first().map(|(_, img, _)| img.width()).unwrap_or(0);
        let mut set = ImageSet {
            side,
            ids: Vec::with_capacity(items.len()),
            labels: Vec::with_capacity(items.len()),
            pixels: Vec::with_capacity(items.len()),
        };
        for (id, img, label) in items {
            if img.width() != side || img.height() != side {
                return Err(GtdaError::Data(format!(
                    "image {id:?} is {}x{}, expected {side}x{side}",
                    img.width(),
                    img.height()
                )));
            }
            set.pixels.push(img.to_unit());
            set.ids.push(id);
            set.labels.push(label);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Vbl,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::Vbl => "vbl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ce" | "cross_entropy" => Some(LossKind::CrossEntropy),
            "vbl" => Some(LossKind::Vbl),
            _ => None,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub loss: LossKind,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.0002,
            epochs: 50,
            batch_size: 16,
            momentum: 0.9,
            loss: LossKind::Vbl,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(GtdaError::InvalidInput(format!("learning rate {} must be >= 0", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(GtdaError::InvalidInput("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GtdaError::InvalidInput(format!("momentum {} must be in [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Holdout metrics, when a holdout set was given.
    pub metrics: Option<Metrics>,
    pub omega: Pair,
    pub alpha: f64,
}

impl EpochRecord {
    pub fn csv_header() -> &'static str {
        "epoch,loss,acc,precision,recall,f1,omega_P,omega_N,alpha"
    }

    pub fn csv_row(&self) -> String {
        let m = |f: fn(&Metrics) -> f64| self.metrics.as_ref().map_or(String::new(), |x| f(x).to_string());
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.loss,
            m(|x| x.accuracy),
            m(|x| x.precision),
            m(|x| x.recall),
            m(|x| x.f1),
            self.omega[0],
            self.omega[1],
            self.alpha
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Final weighting state for VBL runs.
    pub vbl: Option<VblState>,
    /// One [`VblState::csv_row`] per batch for VBL runs.
    pub vbl_log: Vec<String>,
}

/// Mini-batch SGD with momentum (`v ← μv + g`, `θ ← θ − lr·v`).
///
/// Each batch: forward, then for VBL (until frozen) fold the batch logits
/// into the weighting state, then loss and gradient at the current weights,
/// then one parameter step. Batches follow a per-epoch permutation drawn
/// from `shuffle_seed`. `vbl_state` overrides the fresh state a VBL run
/// would otherwise start from.
pub fn train(
    model: &mut Cnn,
    train_set: &ImageSet,
    holdout: Option<&ImageSet>,
    config: &TrainConfig,
    vbl_state: Option<VblState>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(GtdaError::Data("training set is empty".into()));
    }
    let n = train_set.len();
    let mut state = match config.loss {
        LossKind::Vbl => Some(vbl_state.unwrap_or_else(|| VblState::new(config.batch_size, n))),
        LossKind::CrossEntropy => None,
    };
    let mut velocity = vec![0.0; model.num_params()];
    let mut history = Vec::with_capacity(config.epochs);
    let mut vbl_log = Vec::new();
    let mut batch_no = 0usize;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::substream(config.shuffle_seed, Stream::Shuffle, epoch as u64));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let images: Vec<&[f64]> = chunk.iter().map(|&i| train_set.pixels[i].as_slice()).collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let (logits, cache) = model.forward(&images)?;
            let (loss, dlogits) = match state.as_mut() {
                Some(st) => {
                    st.step(&logits, &labels);
                    vbl_log.push(st.csv_row(batch_no));
                    vbl::vbl_batch(&logits, &labels, st.omega_tilde)
                }
                None => vbl::cross_entropy_batch(&logits, &labels),
            };
            if !loss.is_finite() {
                return Err(numerical_abort(epoch, b, &logits, state.as_ref(), loss));
            }
            loss_sum += loss * chunk.len() as f64;
            let grad = model.backward(&cache, &dlogits)?;
            let (lr, mu) = (config.lr, config.momentum);
            model.update_params(|p| {
                for ((p, v), g) in p.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                    *v = mu * *v + g;
                    *p -= lr * *v;
                }
            });
            if let Some(i) = model.params().iter().position(|v| !v.is_finite()) {
                return Err(GtdaError::Numerical(format!(
                    "epoch {epoch}, batch {b}: parameter {i} became non-finite"
                )));
            }
            batch_no += 1;
        }
        let metrics = holdout.map(|h| evaluate(model, h)).transpose()?;
        let (omega, alpha) = state.as_ref().map_or(([1.0, 1.0], 0.0), |s| (s.omega, s.alpha()));
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            metrics,
            omega,
            alpha,
        });
        log::debug!("epoch {epoch}: loss {:.5}", loss_sum / n as f64);
    }
    Ok(TrainOutcome {
        history,
        vbl: state,
        vbl_log,
    })
}

fn numerical_abort(epoch: usize, batch: usize, logits: &[Pair], state: Option<&VblState>, loss: f64) -> GtdaError {
    let (lo, hi) = logits
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
    let weights = state.map_or([1.0, 1.0], |s| s.omega_tilde);
    GtdaError::Numerical(format!(
        "non-finite loss {loss} at epoch {epoch}, batch {batch}; omega_tilde=({}, {}), logits in [{lo}, {hi}]",
        weights[0], weights[1]
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    /// Unweighted softmax probability of the positive class.
    pub prob_positive: f64,
    pub logits: Pair,
}

/// Argmax of the unweighted softmax; exactly equal logits predict negative.
pub fn predict(model: &Cnn, set: &ImageSet) -> Result<Vec<Prediction>> {
    set.pixels
        .iter()
        .zip(&set.ids)
        .map(|(img, id)| {
            let z = model.logits(img)?;
            Ok(Prediction {
                id: id.clone(),
                label: if z[0] > z[1] { Label::Positive } else { Label::Negative },
                prob_positive: vbl::softmax(z)[0],
                logits: z,
            })
        })
        .collect()
}

pub fn evaluate(model: &Cnn, set: &ImageSet) -> Result<Metrics> {
    let predicted: Vec<Label> = predict(model, set)?.into_iter().map(|p| p.label).collect();
    Ok(metrics(&confusion_from_labels(&predicted, &set.labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_model, ModelConfig};

    fn toy_set(n: usize, side: usize) -> ImageSet {
        let mut set = ImageSet {
            side,
            ids: vec![],
            labels: vec![],
            pixels: vec![],
        };
        for i in 0..n {
            let positive = i % 2 == 0;
            set.ids.push(format!("s{i}"));
            set.labels.push(if positive { Label::Positive } else { Label::Negative });
            set.pixels.push(vec![if positive { 1.0 } else { 0.0 }; side * side]);
        }
        set
    }

    #[test]
    fn tie_predicts_negative() {
        let mut m = init_model(&ModelConfig { input_size: 8, channels: vec![2], seed: 0 }).unwrap();
        let (wr, br) = (m.dense_weight_range(), m.dense_bias_range());
        m.update_params(|p| {
            p[wr].fill(0.0);
            p[br].fill(0.3);
        });
        let set = toy_set(2, 8);
        let preds = predict(&m, &set).unwrap();
        assert!(preds.iter().all(|p| p.label == Label::Negative && p.prob_positive == 0.5));

        m.update_params(|p| {
            let b = p.len() - 2;
            p[b] = 3.0;
            p[b + 1] = 1.0;
        });
        let preds = predict(&m, &set).unwrap();
        assert_eq!(preds[0].label, Label::Positive);
        assert!((preds[0].prob_positive - 0.8808).abs() < 5e-5);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = ModelConfig { input_size: 8, channels: vec![2], seed: 3 };
        let mut m = init_model(&cfg).unwrap();
        let before = m.params().to_vec();
        let tc = TrainConfig { lr: 0.0, epochs: 1, batch_size: 4, ..Default::default() };
        train(&mut m, &toy_set(8, 8), None, &tc, None).unwrap();
        assert_eq!(m.params(), &before[..]);
    }

    #[test]
    fn rejects_bad_config() {
        let mut m = init_model(&ModelConfig { input_size: 8, channels: vec![2], seed: 3 }).unwrap();
        let tc = TrainConfig { epochs: 0, ..Default::default() };
        assert!(train(&mut m, &toy_set(4, 8), None, &tc, None).is_err());
    }
}
