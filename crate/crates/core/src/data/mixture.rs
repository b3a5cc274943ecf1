use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{InstructExample, TaskKind};
use crate::error::{Error, Result};
use crate::rng;

/// A named, already-resolved collection of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<InstructExample>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceEntry {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(default = "yes"))]
    pub include: bool,
}

#[cfg(feature = "serde")]
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub sources: Vec<SourceEntry>,
    pub include_language_only: bool,
    /// Passes over the data; fractional values truncate the last pass.
    pub epoch_count: f64,
    pub seed: u64,
}

/// One element of a mixture stream, tagged with the pass it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub epoch: u32,
    pub example: InstructExample,
}

pub fn build_mixture(cfg: &MixtureConfig, datasets: &[Dataset]) -> Result<Vec<StreamItem>> {
    build_mixture_filtered(cfg, datasets, |_| true)
}

/// Concatenate the included sources (keeping records accepted by `keep`),
/// then emit `round(epoch_count · N)` records: full passes, each shuffled
/// with its own seed, truncated at the end.
pub fn build_mixture_filtered(
    cfg: &MixtureConfig,
    datasets: &[Dataset],
    keep: impl Fn(&InstructExample) -> bool,
) -> Result<Vec<StreamItem>> {
    if cfg.sources.is_empty() {
        return Err(Error::InvalidArgument("a mixture needs at least one source".into()));
    }
    if !(cfg.epoch_count.is_finite() && cfg.epoch_count > 0.0) {
        return Err(Error::InvalidArgument(format!("epoch count must be positive, got {}", cfg.epoch_count)));
    }
    let mut pool: Vec<&InstructExample> = Vec::new();
    for entry in &cfg.sources {
        let ds = datasets
            .iter()
            .find(|d| d.name == entry.name)
            .ok_or_else(|| Error::MissingSource(entry.name.clone()))?;
        if !entry.include {
            continue;
        }
        pool.extend(
            ds.examples
                .iter()
                .filter(|ex| cfg.include_language_only || ex.task_kind != TaskKind::LanguageOnly)
                .filter(|ex| keep(ex)),
        );
    }
    if pool.is_empty() {
        return Err(Error::InsufficientData("the mixture selects no records".into()));
    }
    let total = libm::round(cfg.epoch_count * pool.len() as f64) as usize;
    let mut stream = Vec::with_capacity(total);
    let mut epoch = 0u32;
    while stream.len() < total {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng::seeded(rng::derive_seed(cfg.seed, epoch as u64)));
        for i in order.into_iter().take(total - stream.len()) {
            stream.push(StreamItem {
                epoch,
                example: pool[i].clone(),
            });
        }
        epoch += 1;
    }
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn dataset(name: &str, n: usize, lang_every: usize) -> Dataset {
        Dataset {
            name: name.into(),
            examples: (0..n)
                .map(|i| {
                    let lang = lang_every > 0 && i % lang_every == 0;
                    InstructExample {
                        id: format!("{name}-{i}"),
                        image: (!lang).then(|| format!("{name}/{i}.png")),
                        task_kind: if lang { TaskKind::LanguageOnly } else { TaskKind::Vqa },
                        prompt: "q".into(),
                        response: "a".into(),
                    }
                })
                .collect(),
        }
    }

    fn cfg(epochs: f64) -> MixtureConfig {
        MixtureConfig {
            sources: vec![
                SourceEntry { name: "a".into(), include: true },
                SourceEntry { name: "b".into(), include: true },
            ],
            include_language_only: true,
            epoch_count: epochs,
            seed: 4,
        }
    }

    #[test]
    fn fractional_epochs_truncate() {
        let data = [dataset("a", 100, 0), dataset("b", 100, 0)];
        let s = build_mixture(&cfg(1.25), &data).unwrap();
        assert_eq!(s.len(), 250);
        assert_eq!(s.iter().filter(|i| i.epoch == 0).count(), 200);
        // the first pass is a permutation of all records
        let mut ids: Vec<_> = s[..200].iter().map(|i| i.example.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 200);
        assert_eq!(build_mixture(&cfg(1.25), &data).unwrap(), s);
    }

    #[test]
    fn language_only_filter() {
        let data = [dataset("a", 30, 3), dataset("b", 10, 0)];
        let mut c = cfg(1.0);
        c.include_language_only = false;
        let s = build_mixture(&c, &data).unwrap();
        assert!(s.iter().all(|i| i.example.image.is_some()));
        assert_eq!(s.len(), 30);
    }

    #[test]
    fn errors() {
        let data = [dataset("a", 3, 0)];
        assert!(matches!(build_mixture(&cfg(1.0), &data), Err(Error::MissingSource(_))));
        let both = [dataset("a", 3, 0), dataset("b", 3, 0)];
        assert!(build_mixture(&cfg(0.0), &both).is_err());
        assert!(build_mixture(&MixtureConfig { sources: vec![], ..cfg(1.0) }, &both).is_err());
    }

    #[test]
    fn stream_is_a_multiset_repetition() {
        let data = [dataset("a", 7, 0), dataset("b", 5, 2)];
        let s = build_mixture(&cfg(2.5), &data).unwrap();
        assert_eq!(s.len(), 30);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for i in &s {
            *counts.entry(i.example.id.clone()).or_default() += 1;
        }
        assert!(counts.values().all(|c| *c == 2 || *c == 3));
        assert_eq!(counts.values().filter(|c| **c == 3).count(), 6);
    }
}
