use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Entry<T> {
    pub shape: [usize; 2],
    pub data: Vec<T>,
}

impl<T: Real> Entry<T> {
    fn from_array(a: &Array2<T>) -> Self {
        let (r, c) = a.dim();
        Entry {
            shape: [r, c],
            data: a.iter().copied().collect(),
        }
    }

    fn to_array(&self, name: &str) -> Result<Array2<T>> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone())
            .map_err(|e| Error::invalid(format!("checkpoint entry {name}: {e}")))
    }
}

/// Flat JSON snapshot: parameter path -> shape and row-major values, plus
/// non-learned buffers (batch-norm running statistics) and free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Checkpoint<T> {
    pub precision: String,
    pub params: BTreeMap<String, Entry<T>>,
    #[serde(default)]
    pub buffers: BTreeMap<String, Entry<T>>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl<T: Real> Checkpoint<T> {
    pub fn from_store(store: &ParamStore<T>) -> Self {
        Checkpoint {
            precision: T::NAME.to_string(),
            params: store
                .names()
                .iter()
                .zip(store.values())
                .map(|(n, v)| (n.clone(), Entry::from_array(v)))
                .collect(),
            buffers: BTreeMap::new(),
            meta: serde_json::Value::Null,
        }
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: &Array2<T>) {
        self.buffers.insert(name.into(), Entry::from_array(value));
    }

    pub fn buffer(&self, name: &str) -> Result<Array2<T>> {
        self.buffers
            .get(name)
            .ok_or_else(|| Error::invalid(format!("checkpoint has no buffer {name}")))?
            .to_array(name)
    }

    /// Copies every stored value into `store`; names and shapes must match
    /// exactly.
    pub fn load_into(&self, store: &mut ParamStore<T>) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::invalid(format!(
                "checkpoint holds {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        let mut values = Vec::with_capacity(store.len());
        for (name, cur) in store.names().iter().zip(store.values()) {
            let e = self
                .params
                .get(name)
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks parameter {name}")))?;
            let a = e.to_array(name)?;
            if a.dim() != cur.dim() {
                return Err(Error::shape(
                    "load_checkpoint",
                    format!("{name}: stored {:?}, model {:?}", a.dim(), cur.dim()),
                ));
            }
            values.push(a);
        }
        store.set_values(values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Self = serde_json::from_str(&text)?;
        if ck.precision != T::NAME {
            return Err(Error::invalid(format!(
                "checkpoint precision {} does not match {}",
                ck.precision,
                T::NAME
            )));
        }
        Ok(ck)
    }
}
