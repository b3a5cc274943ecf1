use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::string::String;

use super::SynthDataset;
use crate::error::{Error, Result};
use crate::image::RawImage;

/// Resolves the image references stored in records.
pub trait ImageSource {
    fn image(&self, reference: &str) -> Result<Cow<'_, RawImage>>;
}

impl ImageSource for SynthDataset {
    fn image(&self, reference: &str) -> Result<Cow<'_, RawImage>> {
        SynthDataset::image(self, reference)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::MissingImage(reference.into()))
    }
}

impl ImageSource for BTreeMap<String, RawImage> {
    fn image(&self, reference: &str) -> Result<Cow<'_, RawImage>> {
        self.get(reference)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::MissingImage(reference.into()))
    }
}
