use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::weights::{ensemble_forward, fit_weights, EnsembleWeights, FitConfig, FitOutcome};
use crate::blocks::{read_checkpoint, ModelGraph};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Predictor;
use crate::tensor::Tensor;

/// Frozen member models combined through [`EnsembleWeights`].
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    names: Vec<String>,
    members: Vec<ModelGraph>,
    weights: EnsembleWeights,
}

impl EnsembleModel {
    /// Members start with uniform weights.
    pub fn new(members: Vec<(String, ModelGraph)>) -> Result<Self> {
        let weights = EnsembleWeights::uniform(members.len())?;
        let k = members[0].1.num_classes();
        if let Some((name, _)) = members.iter().find(|(_, m)| m.num_classes() != k) {
            return Err(Error::Ensemble(format!("member `{name}` disagrees on class count")));
        }
        let (names, members) = members.into_iter().unzip();
        Ok(Self {
            names,
            members,
            weights,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn members(&self) -> &[ModelGraph] {
        &self.members
    }

    pub fn weights(&self) -> &EnsembleWeights {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: EnsembleWeights) -> Result<()> {
        if weights.len() != self.members.len() {
            return Err(Error::Ensemble(format!(
                "{} weights for {} members",
                weights.len(),
                self.members.len()
            )));
        }
        self.weights = weights;
        Ok(())
    }

    /// Pre-softmax scores of every member.
    pub fn member_scores(&self, images: &Tensor) -> Result<Vec<Tensor>> {
        self.members.iter().map(|m| m.predict_logits(images)).collect()
    }

    pub fn member_checksums(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.params().checksum()).collect()
    }

    /// Fits the weights on `data` while the members stay frozen.
    pub fn fit(&mut self, data: &Dataset, config: &FitConfig) -> Result<FitOutcome> {
        let before = self.member_checksums();
        let scores = self.member_scores(data.images())?;
        let outcome = fit_weights(&scores, data.labels(), config)?;
        if self.member_checksums() != before {
            return Err(Error::Ensemble(
                "member parameters changed during weight fitting".into(),
            ));
        }
        self.weights = outcome.weights.clone();
        Ok(outcome)
    }

    /// Loads members from checkpoints listed in a manifest; relative paths
    /// resolve against the manifest's directory.
    pub fn from_manifest(manifest: &EnsembleManifest, base: &Path) -> Result<Self> {
        let mut members = Vec::with_capacity(manifest.members.len());
        for m in &manifest.members {
            let path = base.join(&m.checkpoint);
            let model = read_checkpoint(BufReader::new(File::open(&path)?))?;
            members.push((m.name.clone(), model));
        }
        let mut model = Self::new(members)?;
        model.set_weights(EnsembleWeights::from_logits(
            manifest.members.iter().map(|m| m.logit).collect(),
        )?)?;
        Ok(model)
    }

    pub fn manifest(&self, checkpoints: &[PathBuf]) -> Result<EnsembleManifest> {
        if checkpoints.len() != self.members.len() {
            return Err(Error::Ensemble("one checkpoint path per member required".into()));
        }
        Ok(EnsembleManifest {
            members: self
                .names
                .iter()
                .zip(checkpoints)
                .zip(self.weights.logits())
                .map(|((name, path), &logit)| ManifestMember {
                    name: name.clone(),
                    checkpoint: path.clone(),
                    logit,
                })
                .collect(),
        })
    }

    pub fn report_weights(&self) -> String {
        let rows: Vec<(String, f64)> = self.names.iter().cloned().zip(self.weights.weights()).collect();
        report_weights(&rows)
    }
}

impl Predictor for EnsembleModel {
    fn predict_proba(&self, images: &Tensor) -> Result<Tensor> {
        ensemble_forward(&self.member_scores(images)?, &self.weights.weights())
    }
}

/// Two-column table of member names and weights with two decimals.
pub fn report_weights(rows: &[(String, f64)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}  {:>7}\n", "model", "weight");
    for (name, w) in rows {
        let _ = writeln!(out, "{name:<width$}  {w:>7.2}");
    }
    out
}

/// Inverse of [`report_weights`].
pub fn parse_weight_report(text: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
        Some(h) if h == ["model", "weight"] => {}
        _ => return Err(Error::Parse("weight report header missing".into())),
    }
    lines
        .map(|line| {
            let (name, w) = line
                .trim()
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| Error::Parse(format!("bad weight line `{line}`")))?;
            let w = w.parse().map_err(|_| Error::Parse(format!("bad weight `{w}`")))?;
            Ok((name.trim().to_string(), w))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestMember {
    pub name: String,
    pub checkpoint: PathBuf,
    pub logit: f64,
}

/// Versioned key=value listing of member checkpoints and weight logits.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleManifest {
    pub members: Vec<ManifestMember>,
}

impl EnsembleManifest {
    pub const FORMAT: &'static str = "efnet-ensemble";
    pub const VERSION: u32 = 1;

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "format={}\nversion={}\nmembers={}\n",
            Self::FORMAT,
            Self::VERSION,
            self.members.len()
        );
        for (i, m) in self.members.iter().enumerate() {
            let _ = writeln!(out, "member.{i}.name={}", m.name);
            let _ = writeln!(out, "member.{i}.checkpoint={}", m.checkpoint.display());
            let _ = writeln!(out, "member.{i}.logit={:?}", m.logit);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got `{l}`")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("manifest lacks `{k}`")))
        };
        if get("format")? != Self::FORMAT {
            return Err(Error::Parse("not an ensemble manifest".into()));
        }
        let version: u32 = get("version")?
            .parse()
            .map_err(|_| Error::Parse("bad version".into()))?;
        if version != Self::VERSION {
            return Err(Error::Parse(format!("unsupported manifest version {version}")));
        }
        let count: usize = get("members")?
            .parse()
            .map_err(|_| Error::Parse("bad member count".into()))?;
        let members = (0..count)
            .map(|i| {
                Ok(ManifestMember {
                    name: get(&format!("member.{i}.name"))?.to_string(),
                    checkpoint: PathBuf::from(get(&format!("member.{i}.checkpoint"))?),
                    logit: get(&format!("member.{i}.logit"))?
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad logit for member {i}")))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }
}
