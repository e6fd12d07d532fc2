use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Named parameter table. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, trainable });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.value.zero_grad());
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// CRC32 over names, shapes and the raw bits of every value.
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for p in &self.params {
            h.update(p.name.as_bytes());
            for &d in p.value.shape() {
                h.update(&(d as u64).to_le_bytes());
            }
            for x in p.value.data() {
                h.update(&x.to_bits().to_le_bytes());
            }
        }
        h.finalize()
    }

    /// Overwrites values of `other` into `self` by name, checking shapes.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        for src in &other.params {
            let id = self
                .id(&src.name)
                .ok_or_else(|| Error::UnknownParameter(src.name.clone()))?;
            let dst = &mut self.params[id.0];
            if dst.value.shape() != src.value.shape() {
                return Err(Error::Shape {
                    op: "load_values",
                    detail: format!(
                        "`{}` has shape {:?}, source has {:?}",
                        src.name,
                        dst.value.shape(),
                        src.value.shape()
                    ),
                });
            }
            dst.value = src.value.clone();
            dst.trainable = src.trainable;
        }
        if other.len() != self.len() {
            return Err(Error::Format(format!(
                "parameter table has {} entries, model expects {}",
                other.len(),
                self.len()
            )));
        }
        Ok(())
    }
}
