use std::fs;
use std::path::{Path, PathBuf};

use image::ImageReader;
use log::warn;

use super::image::{Image, LabeledImage, CLASS_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodePolicy {
    /// Log and drop files that fail to decode.
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub images: Vec<LabeledImage>,
    /// Files dropped under [`DecodePolicy::Skip`], with the decoder's message.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Decodes a PNG or JPEG file to 8-bit RGB; grayscale is replicated into
/// all three channels.
pub fn decode_image(path: &Path) -> Result<Image> {
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let rgb = reader.decode().map_err(|e| decode_err(e.to_string()))?.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(h as usize, w as usize, rgb.into_raw())
}

/// Reads every file of the two class folders in file-name order; images from
/// `normal_dir` get label 0 and those from `pneumonia_dir` label 1.
pub fn ingest_directory(normal_dir: &Path, pneumonia_dir: &Path, policy: DecodePolicy) -> Result<Ingested> {
    let mut out = Ingested::default();
    for (label, dir) in [normal_dir, pneumonia_dir].into_iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.is_file());
        files.sort();
        let before = out.images.len();
        for path in files {
            match decode_image(&path) {
                Ok(image) => out.images.push(LabeledImage { image, label }),
                Err(e) if policy == DecodePolicy::Skip => {
                    warn!("skipping {}: {e}", path.display());
                    out.skipped.push((path, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        if out.images.len() == before {
            return Err(Error::EmptyClass(CLASS_NAMES[label]));
        }
    }
    Ok(out)
}
