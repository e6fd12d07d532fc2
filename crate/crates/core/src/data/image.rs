use crate::error::{Error, Result};

/// Normal = 0, Pneumonia = 1.
pub const CLASS_NAMES: [&str; 2] = ["normal", "pneumonia"];

/// Interleaved 8-bit RGB pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width * 3 {
            return Err(Error::Format(format!(
                "{height}x{width} RGB image needs {} bytes, got {}",
                height * width * 3,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    /// Replicates one intensity per pixel into all three channels.
    pub fn from_gray(height: usize, width: usize, gray: &[u8]) -> Result<Self> {
        Self::new(height, width, gray.iter().flat_map(|&g| [g, g, g]).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Bilinear resize, rounded back to 8 bits.
    pub fn resize(&self, height: usize, width: usize) -> Image {
        if (height, width) == (self.height, self.width) {
            return self.clone();
        }
        let src: Vec<f64> = self.pixels.iter().map(|&p| p as f64).collect();
        let out = resize_bilinear(&src, (self.height, self.width, 3), (height, width));
        Image {
            height,
            width,
            pixels: out.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: usize,
}

/// Bilinear interpolation of an interleaved `h x w x c` buffer with
/// half-pixel centres (corners not aligned) and edge clamping.
pub fn resize_bilinear(src: &[f64], (h, w, c): (usize, usize, usize), (oh, ow): (usize, usize)) -> Vec<f64> {
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let ys = taps(oh, h);
    let xs = taps(ow, w);
    let at = |y: usize, x: usize, ch: usize| src[(y * w + x) * c + ch];
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let mut out = Vec::with_capacity(oh * ow * c);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for ch in 0..c {
                let top = lerp(at(y0, x0, ch), at(y0, x1, ch), tx);
                let bottom = lerp(at(y1, x0, ch), at(y1, x1, ch), tx);
                out.push(lerp(top, bottom, ty));
            }
        }
    }
    out
}
