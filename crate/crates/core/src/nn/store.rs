use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::WeightsError;
use crate::tensor::{Scalar, Tensor};

/// Index of a parameter inside the [`ParamStore`] that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named parameters in insertion order.
#[derive(Debug, Clone)]
pub struct ParamStore<T: Scalar> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Adds a trainable parameter. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId, WeightsError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(WeightsError::DuplicateName(name));
        }
        let value = if value.requires_grad() && value.is_leaf() {
            value
        } else {
            value.detached_param()
        };
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, value));
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].1
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Total number of scalar parameters.
    pub fn count_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.entries.iter().for_each(|(_, t)| t.zero_grad());
    }

    /// Replaces a parameter's values with a fresh trainable leaf.
    pub fn set(&mut self, id: ParamId, data: Vec<T>) {
        let slot = &mut self.entries[id.0].1;
        *slot = Tensor::param(data, slot.shape()).expect("parameter shape is fixed");
    }

    /// Same names with the given tensors, used as-is. Lets a caller route
    /// its own leaves (e.g. a gradient checker's) through a model.
    pub fn with_tensors(&self, tensors: Vec<Tensor<T>>) -> ParamStore<T> {
        assert_eq!(tensors.len(), self.entries.len(), "one tensor per parameter");
        ParamStore {
            entries: self
                .entries
                .iter()
                .zip(tensors)
                .map(|((n, _), t)| (n.clone(), t))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Copy whose tensors never accumulate gradients.
    pub fn frozen(&self) -> ParamStore<T> {
        ParamStore {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), t.detach())).collect(),
            index: self.index.clone(),
        }
    }

    /// Same names and shapes in another element type.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast::<U>().detached_param()))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// SHA-256 over names, shapes and raw values, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        for (name, t) in &self.entries {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            buf.clear();
            t.data().iter().for_each(|v| v.write_le(&mut buf));
            h.update(&buf);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copies values from `other` into this store. Every parameter must be
    /// present in `other` with an identical shape, and `other` may not carry
    /// extra names. Nothing is modified on error.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<(), WeightsError> {
        for (name, t) in &self.entries {
            let src = other
                .by_name(name)
                .ok_or_else(|| WeightsError::MissingParam(name.clone()))?;
            if src.shape() != t.shape() {
                return Err(WeightsError::ShapeMismatch {
                    name: name.clone(),
                    expected: t.shape().to_vec(),
                    found: src.shape().to_vec(),
                });
            }
        }
        if let Some((extra, _)) = other.iter().find(|(n, _)| !self.index.contains_key(*n)) {
            return Err(WeightsError::UnexpectedParam(extra.to_string()));
        }
        for (name, t) in self.entries.iter_mut() {
            *t = other.by_name(name).expect("checked above").detached_param();
        }
        Ok(())
    }
}

impl<T: Scalar> PartialEq for ParamStore<T> {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|((na, a), (nb, b))| {
                na == nb && a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.bits() == y.bits())
            })
    }
}

/// Per-layer seed from a model seed and the layer's hierarchical name.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_store_counts_zero() {
        assert_eq!(ParamStore::<f32>::new().count_params(), 0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f32>::new();
        s.insert("a", Tensor::zeros(&[2])).unwrap();
        assert!(matches!(
            s.insert("a", Tensor::zeros(&[2])),
            Err(WeightsError::DuplicateName(_))
        ));
    }

    #[test]
    fn load_from_names_offending_parameter() {
        let mut a = ParamStore::<f32>::new();
        a.insert("conv.weight", Tensor::zeros(&[4, 3])).unwrap();
        let mut b = ParamStore::<f32>::new();
        b.insert("conv.weight", Tensor::zeros(&[4, 4])).unwrap();
        match a.load_from(&b) {
            Err(WeightsError::ShapeMismatch { name, .. }) => assert_eq!(name, "conv.weight"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frozen_copy_collects_no_gradients() {
        let mut s = ParamStore::<f64>::new();
        let id = s.insert("w", Tensor::ones(&[3])).unwrap();
        let f = s.frozen();
        f.get(id).sum().backward().unwrap();
        assert!(f.get(id).grad().is_none());
        assert!(s.get(id).grad().is_none());
        assert_eq!(s.checksum(), f.checksum());
    }

    #[test]
    fn seeds_depend_on_name_and_seed() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(5, "mbi.0"), derive_seed(5, "mbi.0"));
    }
}
