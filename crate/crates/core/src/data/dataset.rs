use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Images `[N, H, W, C]` with values in `[0, 1]` and one-hot labels `[N, K]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Tensor,
    labels: Tensor,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Tensor) -> Result<Self> {
        if images.rank() != 4 || labels.rank() != 2 || images.shape()[0] != labels.shape()[0] {
            return shape_err(
                "dataset",
                format!("images {:?} and labels {:?} disagree", images.shape(), labels.shape()),
            );
        }
        validate_one_hot(&labels)?;
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.labels.shape()[1]
    }

    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &Tensor {
        &self.labels
    }

    /// Index of the hot entry in every label row.
    pub fn class_indices(&self) -> Vec<usize> {
        let k = self.num_classes();
        self.labels
            .data()
            .chunks_exact(k)
            .map(|row| row.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            images: self.images.gather_rows(rows)?,
            labels: self.labels.gather_rows(rows)?,
        })
    }
}

pub(crate) fn validate_one_hot(labels: &Tensor) -> Result<()> {
    let k = labels.shape()[1];
    if k < 2 {
        return Err(Error::InvalidLabels(format!("need at least 2 classes, got {k}")));
    }
    for (i, row) in labels.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::InvalidLabels(format!("row {i} is not one-hot: {row:?}")));
        }
    }
    Ok(())
}
