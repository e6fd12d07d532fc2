use rand::Rng;

use crate::tensor::Tensor;

/// Mirrors image `row` of an `[N, H, W, C]` batch left to right in place.
pub fn flip_horizontal(images: &mut Tensor, row: usize) {
    let [_, h, w, c] = dims(images);
    let image = &mut images.data_mut()[row * h * w * c..(row + 1) * h * w * c];
    for line in image.chunks_exact_mut(w * c) {
        for x in 0..w / 2 {
            let (left, right) = line.split_at_mut((w - 1 - x) * c);
            left[x * c..(x + 1) * c].swap_with_slice(&mut right[..c]);
        }
    }
}

/// Flips each image of the batch independently with the given probability.
/// Returns how many images were flipped.
pub fn augment_flip<R: Rng + ?Sized>(images: &mut Tensor, probability: f64, rng: &mut R) -> usize {
    let n = images.shape()[0];
    let mut flipped = 0;
    for row in 0..n {
        if rng.random_bool(probability) {
            flip_horizontal(images, row);
            flipped += 1;
        }
    }
    flipped
}

fn dims(t: &Tensor) -> [usize; 4] {
    let s = t.shape();
    [s[0], s[1], s[2], s[3]]
}
