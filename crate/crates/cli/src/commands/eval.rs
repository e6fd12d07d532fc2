use std::path::Path;

use anyhow::{bail, Context, Result};
use efnet_core::ensemble::{EnsembleManifest, EnsembleModel};
use efnet_core::metrics::{
    evaluate, evaluate_probabilities, format_confusion_table, format_metrics_table, format_percent, Evaluation,
    MetricsReport,
};
use efnet_core::Tensor;

use super::{load_checkpoint, load_split};
use crate::args::{Cli, EvalArgs};
use crate::config::write_effective;
use crate::output::{out_dir, read_to_string, write};

/// Reads `label,p_normal,p_pneumonia` rows (header optional).
pub fn read_predictions(path: &Path) -> Result<(Tensor, Tensor)> {
    let text = read_to_string(path)?;
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("label")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [label, p0, p1] = fields[..] else {
            bail!("{}:{}: expected label,p_normal,p_pneumonia", path.display(), i + 1);
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .with_context(|| format!("{}:{}: bad number `{s}`", path.display(), i + 1))
        };
        match label {
            "0" => labels.extend([1.0, 0.0]),
            "1" => labels.extend([0.0, 1.0]),
            other => bail!("{}:{}: label must be 0 or 1, got `{other}`", path.display(), i + 1),
        }
        probs.extend([parse(p0)?, parse(p1)?]);
    }
    let n = labels.len() / 2;
    Ok((Tensor::new([n, 2], probs)?, Tensor::new([n, 2], labels)?))
}

/// Renders the count row and the percentage row for one model.
pub fn render_rows(name: &str, report: &MetricsReport) -> String {
    let counts = format_confusion_table(&[(name.to_string(), report.counts)]);
    let metrics = format_metrics_table(&[(name.to_string(), report.clone())]);
    let row = [report.accuracy, report.precision, report.recall, report.f1]
        .map(format_percent)
        .join(", ");
    format!("{counts}\n{metrics}\naccuracy, precision, recall, f1: {row}\n")
}

pub fn run(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let dir = out_dir(cli, args.out.as_deref(), "eval")?;
    write_effective(&dir, args)?;

    let data_dir = || args.data.as_deref().context("--data is required with a model");
    let mut weights_table = None;
    let (default_name, evaluation): (String, Evaluation) = if let Some(path) = &args.predictions {
        let (probs, labels) = read_predictions(path)?;
        let stem = path
            .file_stem()
            .map_or("predictions".into(), |s| s.to_string_lossy().into_owned());
        (stem, evaluate_probabilities(&probs, &labels)?)
    } else if let Some(path) = &args.checkpoint {
        let model = load_checkpoint(path)?;
        let data = load_split(data_dir()?, &args.split)?;
        (model.config().arch.network_name().to_string(), evaluate(&model, &data)?)
    } else if let Some(path) = &args.manifest {
        let manifest = EnsembleManifest::parse(&read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let model = EnsembleModel::from_manifest(&manifest, base)?;
        let data = load_split(data_dir()?, &args.split)?;
        weights_table = Some(model.report_weights());
        ("Ensemble".to_string(), evaluate(&model, &data)?)
    } else {
        bail!("one of --checkpoint, --manifest or --predictions is required");
    };
    let name = args.name.clone().unwrap_or(default_name);
    let report = &evaluation.report;

    write(&dir.join("report.txt"), format!("model={name}\n{}", report.to_kv()))?;
    write(&dir.join("report.json"), report.to_json()?)?;
    match &evaluation.roc {
        Some(roc) => write(&dir.join("roc.csv"), roc.to_csv())?,
        None => log::warn!("labels hold a single class; ROC curve and AUC are undefined"),
    }
    if let Some(table) = weights_table {
        write(&dir.join("weights.txt"), table)?;
    }
    let rows = render_rows(&name, report);
    write(&dir.join("tables.txt"), &rows)?;
    print!("{rows}");
    Ok(())
}
