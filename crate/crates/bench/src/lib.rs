//! Fixtures shared by the benchmarks.

use std::path::{Path, PathBuf};

use efnet_core::data::{synth_corpus, LabeledImage};
use efnet_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Standard-normal tensor from a fixed seed.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape.to_vec(), 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid shape")
}

/// `n` synthetic images of `size x size`, alternating labels.
pub fn corpus(n: usize, size: usize) -> Vec<LabeledImage> {
    let mut images = synth_corpus(n.div_ceil(2), size, 17);
    images.truncate(n);
    images
}

/// Writes each image as a PNG under `dir` and returns the paths.
pub fn write_pngs(images: &[LabeledImage], dir: &Path) -> Vec<PathBuf> {
    images
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let path = dir.join(format!("{i:05}.png"));
            let buf = image::RgbImage::from_raw(
                r.image.width() as u32,
                r.image.height() as u32,
                r.image.pixels().to_vec(),
            )
            .expect("pixel count matches");
            buf.save(&path).expect("write png");
            path
        })
        .collect()
}
