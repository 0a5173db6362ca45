//! Synthetic handwritten-digit surrogate used when MNIST is not available.
//!
//! Each digit is one of a few stroke skeletons in the unit square. Every
//! sample applies a random affine warp (scale, rotation, shear, shift) and a
//! smooth sinusoidal displacement, jitters the stroke vertices and draws the
//! strokes with a random pen width using anti-aliased distance-to-segment
//! shading. Pixels are in `[0, 255]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::idx::LabeledImages;
use super::rng::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

type Point = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Vec<Point> {
    let steps = 16;
    (0..=steps)
        .map(|k| {
            let t = (from_deg + (to_deg - from_deg) * k as f64 / steps as f64) * PI / 180.0;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Stroke skeletons (x to the right, y downward). `style` picks between
/// common handwriting variants.
fn skeleton(digit: u8, style: u32) -> Vec<Vec<Point>> {
    match (digit, style % 2) {
        (0, 0) => vec![arc(0.5, 0.5, 0.2, 0.32, 0.0, 360.0)],
        (0, _) => vec![arc(0.5, 0.5, 0.25, 0.3, -80.0, 290.0)],
        (1, 0) => vec![vec![(0.4, 0.27), (0.52, 0.15), (0.52, 0.85)]],
        (1, _) => vec![vec![(0.52, 0.15), (0.48, 0.85)], vec![(0.38, 0.85), (0.62, 0.85)]],
        (2, 0) => {
            let mut top = arc(0.5, 0.35, 0.19, 0.18, 190.0, 380.0);
            top.extend([(0.3, 0.85), (0.73, 0.85)]);
            vec![top]
        }
        (2, _) => {
            let mut top = arc(0.5, 0.33, 0.2, 0.17, 180.0, 400.0);
            top.extend([(0.32, 0.8)]);
            top.extend(arc(0.4, 0.78, 0.08, 0.07, 0.0, -300.0));
            top.push((0.75, 0.82));
            vec![top]
        }
        (3, 0) => vec![
            arc(0.48, 0.33, 0.18, 0.17, -160.0, 90.0),
            arc(0.48, 0.67, 0.2, 0.18, -90.0, 160.0),
        ],
        (3, _) => {
            let mut s = vec![(0.3, 0.15), (0.7, 0.15), (0.45, 0.45)];
            s.extend(arc(0.47, 0.66, 0.21, 0.2, -90.0, 160.0));
            vec![s]
        }
        (4, 0) => vec![
            vec![(0.6, 0.15), (0.27, 0.62), (0.76, 0.62)],
            vec![(0.62, 0.35), (0.62, 0.86)],
        ],
        (4, _) => vec![
            vec![(0.32, 0.15), (0.3, 0.52), (0.74, 0.52)],
            vec![(0.66, 0.15), (0.64, 0.86)],
        ],
        (5, _) => {
            let mut s = vec![(0.7, 0.15), (0.36, 0.15), (0.33, 0.47)];
            s.extend(arc(0.5, 0.64, 0.2, 0.2, -130.0, 150.0));
            vec![s]
        }
        (6, _) => vec![
            vec![(0.66, 0.17), (0.46, 0.3), (0.33, 0.58)],
            arc(0.5, 0.66, 0.18, 0.18, 0.0, 360.0),
        ],
        (7, 0) => vec![vec![(0.27, 0.15), (0.73, 0.15), (0.43, 0.86)]],
        (7, _) => vec![vec![(0.27, 0.15), (0.73, 0.15), (0.43, 0.86)], vec![(0.42, 0.5), (0.68, 0.5)]],
        (8, _) => vec![
            arc(0.5, 0.32, 0.15, 0.16, 0.0, 360.0),
            arc(0.5, 0.67, 0.19, 0.18, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.35, 0.17, 0.18, 0.0, 360.0),
            vec![(0.67, 0.36), (0.6, 0.86)],
        ],
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Renders one randomly warped sample of `digit` on a `dim x dim` grid.
pub fn render_digit(digit: u8, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let style = rng.random_range(0..2u32);
    let sx = rng.random_range(0.7..1.15);
    let sy = rng.random_range(0.8..1.1);
    let rot: f64 = rng.random_range(-0.3..0.3);
    let shear = rng.random_range(-0.35..0.35);
    let tx = rng.random_range(-0.08..0.08);
    let ty = rng.random_range(-0.07..0.07);
    let width = rng.random_range(0.035..0.09);
    // smooth elastic displacement
    let amp = rng.random_range(0.0..0.06);
    let (fx, fy) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let (px_phase, py_phase) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    let (c, s) = (rot.cos(), rot.sin());
    let warp = |(x, y): Point| {
        let (x, y) = ((x - 0.5) * sx + shear * (y - 0.5), (y - 0.5) * sy);
        let (x, y) = (0.5 + c * x - s * y + tx, 0.5 + s * x + c * y + ty);
        (
            x + amp * (2.0 * PI * fy * y + px_phase).sin(),
            y + amp * (2.0 * PI * fx * x + py_phase).sin(),
        )
    };
    let strokes: Vec<Vec<Point>> = skeleton(digit, style)
        .into_iter()
        .map(|stroke| {
            stroke
                .into_iter()
                .map(|p| {
                    let q = warp(p);
                    (q.0 + rng.random_range(-0.02..0.02), q.1 + rng.random_range(-0.02..0.02))
                })
                .collect()
        })
        .collect();
    let px = 1.0 / dim as f64;
    Matrix::from_fn(dim, dim, |r, col| {
        let p = ((col as f64 + 0.5) * px, (r as f64 + 0.5) * px);
        let dist = strokes
            .iter()
            .flat_map(|s| s.windows(2).map(move |w| segment_distance(p, w[0], w[1])))
            .fold(f64::INFINITY, f64::min);
        255.0 * (1.0 - (dist - width) / px).clamp(0.0, 1.0)
    })
}

/// `per_class` samples of every digit in `classes`, grouped by class.
pub fn synthetic_digits(classes: &[u8], per_class: usize, dim: usize, seed: u64) -> Result<LabeledImages> {
    if dim < 8 {
        return Err(Error::arg("synthetic digits need at least 8x8 pixels"));
    }
    let mut images = Vec::with_capacity(classes.len() * per_class);
    let mut labels = Vec::with_capacity(classes.len() * per_class);
    for &digit in classes {
        if digit > 9 {
            return Err(Error::arg(format!("no skeleton for digit {digit}")));
        }
        let mut rng = stream_rng(seed, digit as u64, Stream::Data);
        for _ in 0..per_class {
            images.push(render_digit(digit, dim, &mut rng));
            labels.push(digit);
        }
    }
    Ok(LabeledImages { dim, images, labels })
}
