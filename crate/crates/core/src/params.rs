//! Parameter vectors and their partition into sparse and non-sparse layers.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsglError};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    /// Carries the spike-and-slab prior and is eligible for pruning.
    Sparse,
    /// Plain Gaussian weight decay with scale `sigma0`.
    NonSparse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: String,
    pub offset: usize,
    pub len: usize,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Splits a layout into global index sets for the sparse and non-sparse
/// partitions. Layers must tile `0..total` without gaps or overlap.
pub fn partition_indices(layers: &[LayerSpec]) -> Result<(Vec<usize>, Vec<usize>)> {
    if layers.is_empty() {
        return Err(SsglError::Layout("layout is empty".into()));
    }
    let mut ordered: Vec<&LayerSpec> = layers.iter().collect();
    ordered.sort_by_key(|l| l.offset);

    let mut ids = HashSet::new();
    let mut cursor = 0usize;
    let mut sparse = Vec::new();
    let mut dense = Vec::new();
    for layer in ordered {
        if !ids.insert(layer.id.as_str()) {
            return Err(SsglError::Layout(format!("duplicate layer id `{}`", layer.id)));
        }
        if layer.len == 0 {
            return Err(SsglError::Layout(format!("layer `{}` is empty", layer.id)));
        }
        if layer.offset < cursor {
            return Err(SsglError::Layout(format!(
                "layer `{}` overlaps the previous layer at index {}",
                layer.id, layer.offset
            )));
        }
        if layer.offset > cursor {
            return Err(SsglError::Layout(format!(
                "gap before layer `{}`: indices {}..{} are unassigned",
                layer.id, cursor, layer.offset
            )));
        }
        let target = match layer.kind {
            LayerKind::Sparse => &mut sparse,
            LayerKind::NonSparse => &mut dense,
        };
        target.extend(layer.range());
        cursor = layer.offset + layer.len;
    }
    Ok((sparse, dense))
}

/// A validated layer layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LayerSpec>", into = "Vec<LayerSpec>")]
pub struct Layout {
    layers: Vec<LayerSpec>,
    total: usize,
    sparse_count: usize,
}

impl TryFrom<Vec<LayerSpec>> for Layout {
    type Error = SsglError;

    fn try_from(layers: Vec<LayerSpec>) -> Result<Self> {
        Layout::new(layers)
    }
}

impl From<Layout> for Vec<LayerSpec> {
    fn from(layout: Layout) -> Self {
        layout.layers
    }
}

impl Layout {
    pub fn new(mut layers: Vec<LayerSpec>) -> Result<Self> {
        let (sparse, dense) = partition_indices(&layers)?;
        layers.sort_by_key(|l| l.offset);
        Ok(Self {
            total: sparse.len() + dense.len(),
            sparse_count: sparse.len(),
            layers,
        })
    }

    /// Builds a contiguous layout from `(id, len, kind)` triples in order.
    pub fn contiguous<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize, LayerKind)>) -> Result<Self> {
        let mut offset = 0;
        let layers = parts
            .into_iter()
            .map(|(id, len, kind)| {
                let spec = LayerSpec { id: id.into(), offset, len, kind };
                offset += len;
                spec
            })
            .collect();
        Self::new(layers)
    }

    /// Single sparse layer covering `len` parameters.
    pub fn single_sparse(len: usize) -> Result<Self> {
        Self::contiguous([("beta", len, LayerKind::Sparse)])
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Total number of parameters in sparse layers.
    pub fn sparse_len(&self) -> usize {
        self.sparse_count
    }

    pub fn sparse_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| l.kind == LayerKind::Sparse)
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| l.kind == LayerKind::NonSparse)
    }

    pub fn num_sparse_layers(&self) -> usize {
        self.sparse_layers().count()
    }

    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        partition_indices(&self.layers).expect("layout validated at construction")
    }
}

/// Model parameters with a pruning mask. Masked-out entries are always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    values: Vec<T>,
    layout: Layout,
    mask: Vec<bool>,
}

impl<T: Real> ParamVector<T> {
    pub fn zeros(layout: Layout) -> Self {
        let n = layout.len();
        Self { values: vec![T::zero(); n], layout, mask: vec![true; n] }
    }

    pub fn from_values(layout: Layout, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(SsglError::Shape(format!(
                "layout covers {} parameters but {} values were given",
                layout.len(),
                values.len()
            )));
        }
        let n = values.len();
        Ok(Self { values, layout, mask: vec![true; n] })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Mutable access to the raw values. Callers must call [`apply_mask`]
    /// afterwards if they may have written to masked entries.
    ///
    /// [`apply_mask`]: ParamVector::apply_mask
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Values (mutable) alongside the mask, for kernels that skip pruned entries.
    pub fn values_and_mask_mut(&mut self) -> (&mut [T], &[bool]) {
        (&mut self.values, &self.mask)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces the mask and zeroes every masked-out entry.
    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.values.len() {
            return Err(SsglError::Shape(format!(
                "mask has {} entries, parameters have {}",
                mask.len(),
                self.values.len()
            )));
        }
        self.mask = mask;
        self.apply_mask();
        Ok(())
    }

    /// Zeroes masked-out entries. Idempotent.
    pub fn apply_mask(&mut self) {
        for (v, &keep) in self.values.iter_mut().zip(&self.mask) {
            if !keep {
                *v = T::zero();
            }
        }
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Slices of the sparse layers, in layout order.
    pub fn sparse_slices(&self) -> impl Iterator<Item = &[T]> {
        self.layout.sparse_layers().map(move |l| &self.values[l.range()])
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
