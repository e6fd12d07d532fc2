use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crc32fast::Hasher;

use super::dataset::Dataset;
use super::image::{Image, LabeledImage};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RECORD_MAGIC: &[u8; 4] = b"EFRC";
pub const RECORD_VERSION: u16 = 1;
/// Canonical side length of stored images.
pub const IMAGE_SIZE: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Val, SplitTag::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown split `{s}`")))
    }
}

/// Same-sized RGB images with binary labels, as stored in a record file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDataset {
    pub split: SplitTag,
    height: usize,
    width: usize,
    records: Vec<LabeledImage>,
}

impl RecordDataset {
    /// Resizes every image to `size x size`.
    pub fn build(images: Vec<LabeledImage>, size: usize, split: SplitTag) -> Result<Self> {
        let records = images
            .into_iter()
            .map(|r| LabeledImage {
                image: r.image.resize(size, size),
                label: r.label,
            })
            .collect();
        Self::from_records(records, split)
    }

    /// Requires all images to share one size and labels to be 0 or 1.
    pub fn from_records(records: Vec<LabeledImage>, split: SplitTag) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let (height, width) = (first.image.height(), first.image.width());
        if height > u16::MAX as usize || width > u16::MAX as usize {
            return Err(Error::Format(format!(
                "{height}x{width} exceeds the record header range"
            )));
        }
        for (i, r) in records.iter().enumerate() {
            if (r.image.height(), r.image.width()) != (height, width) {
                return Err(Error::Format(format!(
                    "record {i} is {}x{}, expected {height}x{width}",
                    r.image.height(),
                    r.image.width()
                )));
            }
            if r.label > 1 {
                return Err(Error::InvalidLabels(format!("record {i} has label {}", r.label)));
            }
        }
        Ok(Self {
            split,
            height,
            width,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn records(&self) -> &[LabeledImage] {
        &self.records
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// CRC32 over every label and pixel byte in order.
    pub fn source_checksum(&self) -> u32 {
        let mut h = Hasher::new();
        for r in &self.records {
            h.update(&[r.label as u8]);
            h.update(r.image.pixels());
        }
        h.finalize()
    }

    /// Pixels scaled to `[0, 1]` by division by 255, labels one-hot.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let n = self.records.len();
        let mut pixels = Vec::with_capacity(n * self.height * self.width * 3);
        let mut labels = vec![0.0; n * 2];
        for (i, r) in self.records.iter().enumerate() {
            pixels.extend(r.image.pixels().iter().map(|&p| p as f64 / 255.0));
            labels[i * 2 + r.label] = 1.0;
        }
        Dataset::new(
            Tensor::new([n, self.height, self.width, 3], pixels)?,
            Tensor::new([n, 2], labels)?,
        )
    }
}

fn one_hot(label: usize) -> [u8; 2] {
    let mut v = [0u8; 2];
    v[label] = 1;
    v
}

fn record_crc(label: &[u8], payload: &[u8]) -> u32 {
    let mut h = Hasher::new();
    h.update(label);
    h.update(&(payload.len() as u32).to_le_bytes());
    h.update(payload);
    h.finalize()
}

pub fn write_records<W: Write>(data: &RecordDataset, mut w: W) -> Result<()> {
    w.write_all(RECORD_MAGIC)?;
    w.write_all(&RECORD_VERSION.to_le_bytes())?;
    w.write_all(&(data.height as u16).to_le_bytes())?;
    w.write_all(&(data.width as u16).to_le_bytes())?;
    w.write_all(&[3u8, 2u8])?;
    w.write_all(&(data.records.len() as u64).to_le_bytes())?;
    for r in &data.records {
        let label = one_hot(r.label);
        let payload = r.image.pixels();
        w.write_all(&label)?;
        w.write_all(&(payload.len() as u32).to_le_bytes())?;
        w.write_all(payload)?;
        w.write_all(&record_crc(&label, payload).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], on_eof: impl FnOnce() -> Error) -> Result<()> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(on_eof()),
        Err(e) => Err(e.into()),
    }
}

pub fn read_records<R: Read>(mut r: R, split: SplitTag) -> Result<RecordDataset> {
    let mut header = [0u8; 20];
    read_exact_or(&mut r, &mut header, || Error::Format("record header truncated".into()))?;
    if &header[0..4] != RECORD_MAGIC {
        return Err(Error::Format("bad record magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != RECORD_VERSION {
        return Err(Error::Format(format!("unsupported record version {version}")));
    }
    let height = u16::from_le_bytes([header[6], header[7]]) as usize;
    let width = u16::from_le_bytes([header[8], header[9]]) as usize;
    let (channels, classes) = (header[10], header[11]);
    if channels != 3 || classes != 2 {
        return Err(Error::Format(format!(
            "expected 3 channels and 2 classes, got {channels} and {classes}"
        )));
    }
    let count = u64::from_le_bytes(header[12..20].try_into().expect("8-byte slice"));
    let expected_len = height * width * 3;
    let mut records = Vec::with_capacity(count.min(1 << 16) as usize);
    for index in 0..count {
        let truncated = || Error::Truncated {
            expected: count,
            last_complete: index.checked_sub(1),
        };
        let mut label = [0u8; 2];
        read_exact_or(&mut r, &mut label, truncated)?;
        let mut len = [0u8; 4];
        read_exact_or(&mut r, &mut len, truncated)?;
        let len = u32::from_le_bytes(len) as usize;
        if len != expected_len {
            return Err(Error::CorruptRecord {
                index,
                reason: format!("payload length {len}, expected {expected_len}"),
            });
        }
        let mut payload = vec![0u8; len];
        read_exact_or(&mut r, &mut payload, truncated)?;
        let mut crc = [0u8; 4];
        read_exact_or(&mut r, &mut crc, truncated)?;
        if u32::from_le_bytes(crc) != record_crc(&label, &payload) {
            return Err(Error::CorruptRecord {
                index,
                reason: "checksum mismatch".into(),
            });
        }
        let label = match label {
            [1, 0] => 0,
            [0, 1] => 1,
            other => {
                return Err(Error::CorruptRecord {
                    index,
                    reason: format!("label {other:?} is not one-hot"),
                })
            }
        };
        records.push(LabeledImage {
            image: Image::new(height, width, payload)?,
            label,
        });
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format(format!("trailing bytes after {count} records")));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(RecordDataset {
        split,
        height,
        width,
        records,
    })
}

pub fn write_record_file(data: &RecordDataset, path: &Path) -> Result<()> {
    write_records(data, BufWriter::new(File::create(path)?))
}

pub fn read_record_file(path: &Path, split: SplitTag) -> Result<RecordDataset> {
    read_records(BufReader::new(File::open(path)?), split)
}
