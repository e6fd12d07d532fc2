//! Dataset ingestion, splitting, resizing, augmentation, the record file
//! format and a synthetic corpus.

mod augment;
pub(crate) mod dataset;
mod image;
mod ingest;
mod records;
mod split;
mod synth;

pub use augment::{augment_flip, flip_horizontal};
pub use dataset::Dataset;
pub use image::{resize_bilinear, Image, LabeledImage, CLASS_NAMES};
pub use ingest::{decode_image, ingest_directory, DecodePolicy, Ingested};
pub use records::{
    read_record_file, read_records, write_record_file, write_records, RecordDataset, SplitTag, IMAGE_SIZE,
    RECORD_MAGIC, RECORD_VERSION,
};
pub use split::{shuffle_split, SplitPlan, Splits, REFERENCE_SPLIT};
pub use synth::synth_corpus;
