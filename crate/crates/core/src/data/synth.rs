use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::image::{Image, LabeledImage};

/// Two-class grayscale stand-in corpus. Label 0 images carry one bright disc
/// near the centre, label 1 images a few soft bright blobs anywhere; both sit
/// on uniform noise. Classes alternate, starting with label 0.
pub fn synth_corpus(n_per_class: usize, image_size: usize, seed: u64) -> Vec<LabeledImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = image_size as f64;
    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for label in 0..2 {
            let mut gray: Vec<f64> = (0..image_size * image_size)
                .map(|_| rng.random_range(0.0..70.0))
                .collect();
            if label == 0 {
                let cy = s / 2.0 + rng.random_range(-0.05..0.05) * s;
                let cx = s / 2.0 + rng.random_range(-0.05..0.05) * s;
                let radius = rng.random_range(0.18..0.26) * s;
                let level = rng.random_range(150.0..200.0);
                paint(&mut gray, image_size, |y, x| {
                    if (y - cy).hypot(x - cx) <= radius {
                        level
                    } else {
                        0.0
                    }
                });
            } else {
                for _ in 0..rng.random_range(3..6) {
                    let cy = rng.random_range(0.0..s);
                    let cx = rng.random_range(0.0..s);
                    let sigma = rng.random_range(0.06..0.12) * s;
                    let level = rng.random_range(90.0..150.0);
                    paint(&mut gray, image_size, |y, x| {
                        let d2 = (y - cy).powi(2) + (x - cx).powi(2);
                        level * (-d2 / (2.0 * sigma * sigma)).exp()
                    });
                }
            }
            let bytes: Vec<u8> = gray.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            out.push(LabeledImage {
                image: Image::from_gray(image_size, image_size, &bytes).expect("square image"),
                label,
            });
        }
    }
    out
}

fn paint(gray: &mut [f64], size: usize, f: impl Fn(f64, f64) -> f64) {
    for y in 0..size {
        for x in 0..size {
            gray[y * size + x] += f(y as f64 + 0.5, x as f64 + 0.5);
        }
    }
}
