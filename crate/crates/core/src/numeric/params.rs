use std::collections::btree_map::{self, BTreeMap};

use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Named parameter slots, iterated in lexicographic name order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    slots: BTreeMap<String, Matrix<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            slots: BTreeMap::new(),
        }
    }

    /// Registers a new slot; duplicate names are rejected.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix<T>) -> Result<()> {
        let name = name.into();
        match self.slots.entry(name) {
            btree_map::Entry::Occupied(e) => {
                Err(Error::Domain(format!("parameter `{}` registered twice", e.key())))
            }
            btree_map::Entry::Vacant(e) => {
                e.insert(value);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.slots.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix<T>> {
        self.slots.get_mut(name)
    }

    /// Removes and returns a slot, failing with a checkpoint error when absent.
    pub fn take(&mut self, name: &str) -> Result<Matrix<T>> {
        self.slots
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix<T>)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix<T>)> {
        self.slots.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of scalar entries across all slots.
    pub fn num_values(&self) -> usize {
        self.slots.values().map(Matrix::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            slots: self
                .slots
                .iter()
                .map(|(k, m)| (k.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    pub fn global_norm(&self) -> T {
        self.slots.values().map(Matrix::norm_sq).sum::<T>().sqrt()
    }

    /// Checks that `other` has exactly the same names and shapes.
    pub fn check_compatible(&self, other: &ParamStore<T>) -> Result<()> {
        for (name, m) in &self.slots {
            match other.slots.get(name) {
                None => return Err(Error::Checkpoint(format!("missing parameter `{name}`"))),
                Some(o) if o.shape() != m.shape() => {
                    return Err(Error::Checkpoint(format!(
                        "parameter `{name}` is {:?}, expected {:?}",
                        o.shape(),
                        m.shape()
                    )))
                }
                _ => {}
            }
        }
        if let Some(extra) = other.slots.keys().find(|k| !self.slots.contains_key(*k)) {
            return Err(Error::Checkpoint(format!("unexpected parameter `{extra}`")));
        }
        Ok(())
    }
}

impl<T> IntoIterator for ParamStore<T> {
    type Item = (String, Matrix<T>);
    type IntoIter = btree_map::IntoIter<String, Matrix<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.slots.into_iter()
    }
}
