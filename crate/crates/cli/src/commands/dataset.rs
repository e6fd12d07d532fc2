use std::fmt::Write as _;

use anyhow::{Context, Result};
use efnet_core::data::{
    ingest_directory, shuffle_split, synth_corpus, write_record_file, DecodePolicy, LabeledImage, RecordDataset,
    SplitPlan, SplitTag,
};
use log::{info, warn};

use crate::args::{Cli, DatasetBuildArgs};
use crate::config::write_effective;
use crate::output::{file_crc32, out_dir, record_path, write};

pub fn run(cli: &Cli, args: &DatasetBuildArgs) -> Result<()> {
    let dir = out_dir(cli, args.out.as_deref(), "dataset")?;
    write_effective(&dir, args)?;

    let (images, source, skipped) = if args.synthetic {
        (synth_corpus(args.per_class, args.size, args.seed), "synthetic", 0)
    } else {
        let (normal, pneumonia) = (args.normal.as_deref(), args.pneumonia.as_deref());
        let (normal, pneumonia) = normal.zip(pneumonia).context("--normal and --pneumonia are required")?;
        let policy = if args.strict_decode {
            DecodePolicy::Abort
        } else {
            DecodePolicy::Skip
        };
        let ingested = ingest_directory(normal, pneumonia, policy)?;
        for (path, reason) in &ingested.skipped {
            warn!("skipped {}: {reason}", path.display());
        }
        let skipped = ingested.skipped.len();
        (ingested.images, "directories", skipped)
    };
    let n = images.len();
    let plan = match args.split {
        Some(counts) => SplitPlan::new(args.seed, counts.0),
        None => SplitPlan::scaled(n, args.seed),
    };
    let splits = shuffle_split(images, &plan)?;

    let mut manifest = format!(
        "format=efnet-splits\nversion=1\nsource={source}\nseed={}\nsize={}\nimages={n}\nskipped={skipped}\n",
        args.seed, args.size
    );
    for (tag, part) in [
        (SplitTag::Train, splits.train),
        (SplitTag::Val, splits.val),
        (SplitTag::Test, splits.test),
    ] {
        let pneumonia = part.iter().filter(|r: &&LabeledImage| r.label == 1).count();
        let count = part.len();
        let records = RecordDataset::build(part, args.size, tag)?;
        let path = record_path(&dir, tag.as_str());
        write_record_file(&records, &path).with_context(|| format!("writing {}", path.display()))?;
        let crc = file_crc32(&path)?;
        let name = tag.as_str();
        let _ = write!(
            manifest,
            "{name}.file={name}.efrc\n{name}.count={count}\n{name}.normal={}\n{name}.pneumonia={pneumonia}\n{name}.crc32={crc:08x}\n",
            count - pneumonia
        );
        info!("wrote {} ({count} images, crc32 {crc:08x})", path.display());
    }
    write(&dir.join("manifest"), &manifest)?;
    print!("{manifest}");
    Ok(())
}
