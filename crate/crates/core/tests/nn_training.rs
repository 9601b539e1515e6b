use gtda::data::Label;
use gtda::nn::{init_model, predict, train, Cnn, ImageSet, LossKind, ModelConfig, TrainConfig};
use gtda::vbl::{self, VblState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_images(n: usize, side: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..side * side).map(|_| rng.random::<f64>()).collect()).collect()
}

fn batch_loss(model: &Cnn, images: &[&[f64]], labels: &[Label], w: [f64; 2]) -> f64 {
    let (z, _) = model.forward(images).unwrap();
    vbl::vbl_batch(&z, labels, w).0
}

/// Central differences over every parameter of a one-block model.
#[test]
fn backward_matches_finite_differences() {
    let cfg = ModelConfig { input_size: 16, channels: vec![4], seed: 11 };
    let mut model = init_model(&cfg).unwrap();
    let imgs = random_images(3, 16, 2);
    let images: Vec<&[f64]> = imgs.iter().map(|v| v.as_slice()).collect();
    let labels = [Label::Positive, Label::Negative, Label::Negative];
    let w = [0.7, 1.9];
    let (z, cache) = model.forward(&images).unwrap();
    let (_, dz) = vbl::vbl_batch(&z, &labels, w);
    let grad = model.backward(&cache, &dz).unwrap();

    let h = 1e-5;
    let base = model.params().to_vec();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] += h;
        model.set_params(p.clone()).unwrap();
        let up = batch_loss(&model, &images, &labels, w);
        p[i] -= 2.0 * h;
        model.set_params(p).unwrap();
        let down = batch_loss(&model, &images, &labels, w);
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

fn toy_set(n: usize, side: usize, seed: u64) -> ImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ImageSet { side, ids: vec![], labels: vec![], pixels: vec![] };
    for i in 0..n {
        let positive = i % 2 == 0;
        let mut img: Vec<f64> = (0..side * side).map(|_| 0.1 * rng.random::<f64>()).collect();
        if positive {
            // bright square in a random place
            let (x0, y0) = (rng.random_range(0..side - 4), rng.random_range(0..side - 4));
            for y in y0..y0 + 4 {
                for x in x0..x0 + 4 {
                    img[y * side + x] = 1.0;
                }
            }
        }
        set.ids.push(format!("t{i}"));
        set.labels.push(if positive { Label::Positive } else { Label::Negative });
        set.pixels.push(img);
    }
    set
}

#[test]
fn separable_toy_data_is_learned_quickly() {
    let data = toy_set(64, 16, 1);
    let mut model = init_model(&ModelConfig { input_size: 16, channels: vec![4, 8], seed: 1 }).unwrap();
    let cfg = TrainConfig { lr: 0.05, epochs: 5, batch_size: 8, loss: LossKind::CrossEntropy, ..Default::default() };
    let out = train(&mut model, &data, Some(&data), &cfg, None).unwrap();
    let last = out.history.last().unwrap();
    assert_eq!(last.metrics.unwrap().accuracy, 1.0, "{:?}", out.history);
}

#[test]
fn single_sample_is_overfit() {
    let data = toy_set(1, 16, 3);
    let mut model = init_model(&ModelConfig { input_size: 16, channels: vec![4], seed: 2 }).unwrap();
    let cfg = TrainConfig { lr: 0.05, epochs: 200, batch_size: 1, loss: LossKind::CrossEntropy, ..Default::default() };
    let out = train(&mut model, &data, None, &cfg, None).unwrap();
    assert!(out.history.last().unwrap().loss < 1e-3);
    assert_eq!(predict(&model, &data).unwrap()[0].label, Label::Positive);
}

#[test]
fn frozen_unit_weights_reproduce_cross_entropy_training() {
    let data = toy_set(24, 16, 5);
    let cfg = ModelConfig { input_size: 16, channels: vec![3, 4], seed: 9 };
    let mut a = init_model(&cfg).unwrap();
    let mut b = a.clone();
    let base = TrainConfig { lr: 0.02, epochs: 3, batch_size: 5, shuffle_seed: 4, ..Default::default() };
    let ce = train(&mut a, &data, None, &TrainConfig { loss: LossKind::CrossEntropy, ..base.clone() }, None).unwrap();
    // convert((1,1)) = (1,1)
    let frozen = VblState::frozen_at([1.0, 1.0]);
    let v = train(&mut b, &data, None, &TrainConfig { loss: LossKind::Vbl, ..base }, Some(frozen)).unwrap();
    assert_eq!(a.params(), b.params());
    let la: Vec<f64> = ce.history.iter().map(|h| h.loss).collect();
    let lb: Vec<f64> = v.history.iter().map(|h| h.loss).collect();
    assert_eq!(la, lb);
}

#[test]
fn training_is_deterministic_and_vbl_freezes() {
    let data = toy_set(20, 16, 8);
    let cfg = ModelConfig { input_size: 16, channels: vec![2], seed: 3 };
    let tc = TrainConfig { lr: 0.01, epochs: 3, batch_size: 4, loss: LossKind::Vbl, ..Default::default() };
    let (mut a, mut b) = (init_model(&cfg).unwrap(), init_model(&cfg).unwrap());
    let ra = train(&mut a, &data, None, &tc, None).unwrap();
    let rb = train(&mut b, &data, None, &tc, None).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(ra.vbl_log, rb.vbl_log);
    // 20 samples / batch 4: weights move for 5 batches, then stay fixed
    assert_eq!(ra.vbl_log.len(), 15);
    let omega = |row: &str| row.split(',').skip(5).take(2).collect::<Vec<_>>().join(",");
    assert!(ra.vbl_log[..5].windows(2).any(|w| omega(&w[0]) != omega(&w[1])));
    assert!(ra.vbl_log[4..].windows(2).all(|w| omega(&w[0]) == omega(&w[1])));
    assert!(ra.vbl.unwrap().is_frozen());
}
