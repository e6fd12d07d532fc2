//! Confusion matrix, accuracy/precision/recall/F1, ROC/AUC and report output.

mod confusion;
mod report;
mod roc;

pub use confusion::{accuracy, confusion, f1, precision, recall, ConfusionMatrix};
pub use report::{
    evaluate, evaluate_probabilities, format_confusion_table, format_metrics_table, format_percent, Evaluation,
    MetricsReport, Predictor,
};
pub use roc::{roc_auc, RocCurve};
