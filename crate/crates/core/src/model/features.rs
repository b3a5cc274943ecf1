use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Mat;

/// Per-patch features `L × width`, tagged with the backbone(s) they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    pub values: Mat,
    pub source: Vec<String>,
}

impl PatchFeatures {
    pub fn len(&self) -> usize {
        self.values.rows
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows == 0
    }

    pub fn width(&self) -> usize {
        self.values.cols
    }

    pub fn is_fused(&self) -> bool {
        self.source.len() > 1
    }
}

/// Channel-wise concatenation: row `i` is `a.row(i)` followed by `b.row(i)`.
pub fn fuse_features(a: &PatchFeatures, b: &PatchFeatures) -> Result<PatchFeatures> {
    if a.len() != b.len() {
        return Err(Error::Granularity(format!(
            "cannot fuse {} patches from {:?} with {} patches from {:?}",
            a.len(),
            a.source,
            b.len(),
            b.source
        )));
    }
    let width = a.width() + b.width();
    let mut values = Mat::zeros(a.len(), width);
    for i in 0..a.len() {
        let row = values.row_mut(i);
        row[..a.width()].copy_from_slice(a.values.row(i));
        row[a.width()..].copy_from_slice(b.values.row(i));
    }
    let mut source = a.source.clone();
    source.extend(b.source.iter().cloned());
    Ok(PatchFeatures { values, source })
}
