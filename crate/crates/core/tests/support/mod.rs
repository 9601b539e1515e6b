//! Reference implementations used only by tests.
#![allow(dead_code)]

use gtda::s2i::{CurveType, RasterImage};

/// Brute-force rasterizer: tests every point of a 16×16 grid per pixel
/// against the curve geometry by direct distance evaluation.
pub fn supersample_oracle(
    points: &[(f64, f64)],
    curve_type: CurveType,
    scale: f64,
    width: usize,
    height: usize,
) -> RasterImage {
    const N: usize = 16;
    let inside = |x: f64, y: f64| -> bool {
        match curve_type {
            CurveType::Point => points
                .iter()
                .any(|&(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) <= scale * scale),
            CurveType::Line => {
                let r = scale / 2.0;
                let in_band = points.windows(2).any(|w| {
                    let (ax, ay) = w[0];
                    let (bx, by) = w[1];
                    let (dx, dy) = (bx - ax, by - ay);
                    let len2 = dx * dx + dy * dy;
                    if len2 == 0.0 {
                        return false;
                    }
                    let t = ((x - ax) * dx + (y - ay) * dy) / len2;
                    let dist = ((x - ax) * dy - (y - ay) * dx).abs() / len2.sqrt();
                    (0.0..=1.0).contains(&t) && dist <= r
                });
                in_band
                    || (points.len() > 2
                        && points[1..points.len() - 1]
                            .iter()
                            .any(|&(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r))
            }
        }
    };
    let mut pixels = Vec::with_capacity(width * height);
    for py in 0..height {
        for px in 0..width {
            let mut count = 0u32;
            for sy in 0..N {
                for sx in 0..N {
                    let x = px as f64 + (sx as f64 + 0.5) / N as f64;
                    let y = py as f64 + (sy as f64 + 0.5) / N as f64;
                    if inside(x, y) {
                        count += 1;
                    }
                }
            }
            pixels.push(((count * 255 + 128) / 256) as u8);
        }
    }
    RasterImage::from_pixels(width, height, pixels).unwrap()
}

/// Fraction of pixels whose values differ by at most one level.
pub fn agreement(a: &RasterImage, b: &RasterImage) -> f64 {
    let ok = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .filter(|(x, y)| (**x as i32 - **y as i32).abs() <= 1)
        .count();
    ok as f64 / a.pixels().len() as f64
}

/// Population variance computed from the whole stream at once.
pub fn batch_population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Confusion counts and metrics in one pass, written independently of the
/// library: returns (tp, fn, fp, tn, acc, precision, recall, f1).
pub fn one_pass_metrics(pred: &[bool], truth: &[bool]) -> (u64, u64, u64, u64, f64, f64, f64, f64) {
    let (mut tp, mut fnn, mut fp, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in pred.iter().zip(truth) {
        match (t, p) {
            (true, true) => tp += 1,
            (true, false) => fnn += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let total = (tp + fnn + fp + tn) as f64;
    let acc = (tp + tn) as f64 / total;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (tp, fnn, fp, tn, acc, precision, recall, f1)
}
