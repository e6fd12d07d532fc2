use std::fmt::Write as _;

use anyhow::{Context, Result};
use efnet_core::ensemble::parse_weight_report;
use efnet_core::metrics::{format_confusion_table, format_metrics_table, MetricsReport};

use crate::args::{Cli, ReportArgs};
use crate::config::write_effective;
use crate::output::{out_dir, read_to_string, write};

pub fn run(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let dir = out_dir(cli, args.out.as_deref(), "report")?;
    write_effective(&dir, args)?;

    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for run in &args.runs {
        let text = read_to_string(&run.join("report.txt"))?;
        let report = MetricsReport::from_kv(&text).with_context(|| format!("parsing {}/report.txt", run.display()))?;
        let name = text
            .lines()
            .find_map(|l| l.strip_prefix("model="))
            .map(str::to_string)
            .unwrap_or_else(|| run.display().to_string());
        rows.push((name, report));
        let weights_path = run.join("weights.txt");
        if weights_path.exists() {
            weights = parse_weight_report(&read_to_string(&weights_path)?)?;
        }
    }
    let counts: Vec<_> = rows.iter().map(|(n, r)| (n.clone(), r.counts)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "Confusion counts\n{}", format_confusion_table(&counts));
    let _ = writeln!(out, "Metrics (%)\n{}", format_metrics_table(&rows));
    if !weights.is_empty() {
        let _ = writeln!(
            out,
            "Ensemble weights\n{}",
            efnet_core::ensemble::report_weights(&weights)
        );
    }
    write(&dir.join("report.txt"), &out)?;
    print!("{out}");
    Ok(())
}
