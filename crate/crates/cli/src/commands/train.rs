use std::fs::{self, File};
use std::io::BufWriter;

use anyhow::{Context, Result};
use efnet_core::blocks::{build_toy_model, write_checkpoint};
use efnet_core::optim::{evaluate_loss, train, AdamConfig, TrainConfig};

use super::load_split;
use crate::args::{Cli, LrSchedule, TrainArgs};
use crate::config::write_effective;
use crate::output::{out_dir, write};

pub fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        adam: AdamConfig {
            learning_rate: args.lr,
            ..AdamConfig::default()
        },
        plateau_factor: match args.lr_schedule {
            LrSchedule::Plateau => args.plateau_factor,
            LrSchedule::Constant => 1.0,
        },
        plateau_patience: args.plateau_patience,
        min_lr: args.min_lr,
        early_stop_patience: args.early_stop_patience,
        warmup_epochs: args.warmup_epochs,
        flip_probability: args.flip_probability,
        seed: args.seed,
        target_train_accuracy: args.target_train_accuracy,
    }
}

pub fn run(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let dir = out_dir(cli, args.out.as_deref(), &format!("train-{}", args.arch))?;
    write_effective(&dir, args)?;
    let train_set = load_split(&args.data, "train")?;
    let val_set = load_split(&args.data, "val")?;

    let mut model = build_toy_model(&args.arch, args.depth, args.width, train_set.num_classes(), args.seed)?;
    let outcome = train(&mut model, &train_set, &val_set, &train_config(args))
        .with_context(|| format!("training {}", args.arch))?;

    let checkpoints = dir.join("checkpoints");
    fs::create_dir_all(&checkpoints)?;
    let ckpt = checkpoints.join("best.efck");
    write_checkpoint(&model, BufWriter::new(File::create(&ckpt)?))
        .with_context(|| format!("writing {}", ckpt.display()))?;
    write(&dir.join("history.csv"), outcome.history.to_csv())?;

    let (train_loss, train_acc) = evaluate_loss(&model, &train_set)?;
    let summary = format!(
        "format=efnet-train\nversion=1\narch={}\ncheckpoint=checkpoints/best.efck\nepochs_run={}\nbest_epoch={}\n\
         best_val_loss={}\nstop={:?}\nfinal_train_loss={train_loss}\nfinal_train_accuracy={train_acc}\n",
        args.arch,
        outcome.history.len(),
        outcome.best_epoch,
        outcome.best_val_loss,
        outcome.stop,
    );
    write(&dir.join("manifest"), &summary)?;
    print!("{summary}");
    Ok(())
}
