use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{process_image, ProcessedImage, RawImage};
use crate::math::{self, Mat};
use crate::params::{Component, Grads, ParamStore};
use crate::prompt::{format_prompt, FormattedPrompt};
use crate::rng;
use crate::tokenizer::{ByteTokenizer, TokenId};

use super::backbone::{BackboneCache, VisualBackbone};
use super::config::VlmConfig;
use super::features::{fuse_features, PatchFeatures};
use super::lm::ToyLm;
use super::projector::Projector;

/// Negative log-likelihood of `target` under the softmax of `logits`.
pub fn token_nll(logits: &[f64], target: usize) -> f64 {
    math::log_sum_exp(logits) - logits[target]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlmOutput {
    /// Mean NLL over scored positions.
    pub loss: f64,
    pub scored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossSum {
    pub nll_sum: f64,
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub tokens: Vec<TokenId>,
    /// True when decoding stopped without emitting EOS.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Vlm {
    pub config: VlmConfig,
    pub params: ParamStore,
    backbones: Vec<VisualBackbone>,
    projector: Projector,
    lm: ToyLm,
}

struct Encoded {
    prefix: Mat,
    caches: Option<(Vec<BackboneCache>, super::projector::ProjectorCache)>,
}

impl Vlm {
    pub fn new(config: VlmConfig, seed: u64) -> Result<Self> {
        if config.backbones.is_empty() || config.backbones.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "expected one or two backbones, got {}",
                config.backbones.len()
            )));
        }
        let mut rng = rng::seeded(seed);
        let mut params = ParamStore::new();
        let side = config.image.resolution;
        let backbones = config
            .backbones
            .iter()
            .enumerate()
            .map(|(i, b)| VisualBackbone::new(&mut params, i, b, side, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        if let [a, b] = backbones.as_slice() {
            if a.num_patches() != b.num_patches() {
                return Err(Error::Granularity(format!(
                    "backbones {} and {} produce {} and {} patches",
                    a.id(),
                    b.id(),
                    a.num_patches(),
                    b.num_patches()
                )));
            }
        }
        let input_dim = backbones.iter().map(|b| b.config.dim).sum();
        let hidden = config.projector_hidden.unwrap_or(config.lm.dim);
        let projector = Projector::new(&mut params, input_dim, hidden, config.lm.dim, &mut rng);
        let lm = ToyLm::new(&mut params, &config.lm, ByteTokenizer::VOCAB_SIZE, &mut rng)?;
        let vlm = Vlm {
            config,
            params,
            backbones,
            projector,
            lm,
        };
        if vlm.image_tokens() >= vlm.config.lm.max_context {
            return Err(Error::ContextOverflow {
                needed: vlm.image_tokens() + 1,
                max: vlm.config.lm.max_context,
            });
        }
        Ok(vlm)
    }

    pub fn backbones(&self) -> &[VisualBackbone] {
        &self.backbones
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn lm(&self) -> &ToyLm {
        &self.lm
    }

    /// Number of prefix rows an image contributes.
    pub fn image_tokens(&self) -> usize {
        self.backbones[0].num_patches()
    }

    /// Token budget left for text when an image is present.
    pub fn text_budget(&self, with_image: bool) -> usize {
        self.config.lm.max_context - if with_image { self.image_tokens() } else { 0 }
    }

    pub fn preprocess(&self, img: &RawImage) -> Result<ProcessedImage> {
        let s = &self.config.image;
        process_image(img, s.scheme, s.resolution, &s.norm)
    }

    pub fn format(&self, user: &str, response: Option<&str>, with_image: bool) -> Result<FormattedPrompt> {
        format_prompt(self.config.lm.style, user, response, self.text_budget(with_image))
    }

    /// Patch features from every backbone, fused when there are two.
    pub fn encode(&self, img: &ProcessedImage) -> Result<PatchFeatures> {
        let mut feats = self
            .backbones
            .iter()
            .map(|b| b.forward(&self.params, img).map(|(f, _)| f))
            .collect::<Result<Vec<_>>>()?;
        Ok(match feats.len() {
            1 => feats.pop().expect("one"),
            _ => fuse_features(&feats[0], &feats[1])?,
        })
    }

    fn encode_for_training(&self, img: &ProcessedImage, keep: bool, keep_backbone: bool) -> Result<Encoded> {
        let mut feats = Vec::with_capacity(self.backbones.len());
        let mut caches = Vec::new();
        for b in &self.backbones {
            let (f, c) = b.forward(&self.params, img)?;
            feats.push(f);
            if keep_backbone {
                caches.push(c);
            }
        }
        let fused = match feats.len() {
            1 => feats.pop().expect("one"),
            _ => fuse_features(&feats[0], &feats[1])?,
        };
        let (prefix, pc) = self.projector.forward(&self.params, &fused.values);
        Ok(Encoded {
            prefix,
            caches: keep.then_some((caches, pc)),
        })
    }

    fn prefix_for(&self, feats: Option<&PatchFeatures>) -> Result<Mat> {
        match feats {
            Some(f) => super::projector::project(&self.projector, &self.params, f),
            None => Ok(Mat::zeros(0, self.lm.dim())),
        }
    }

    /// Scores `labels[j]` for every `j` with `mask[j]`, predicted from the
    /// hidden state one position earlier. Image rows are never scored.
    pub fn loss_with_labels(
        &self,
        feats: Option<&PatchFeatures>,
        inputs: &[TokenId],
        labels: &[TokenId],
        mask: &[bool],
    ) -> Result<VlmOutput> {
        if labels.len() != inputs.len() || mask.len() != inputs.len() {
            return Err(Error::Dimension("inputs, labels and mask must have equal length".into()));
        }
        let prefix = self.prefix_for(feats)?;
        let (hidden, _) = self.lm.forward(&self.params, &prefix, inputs)?;
        let (rows, targets) = scored_rows(&hidden, prefix.rows, labels, mask)?;
        let logits = self.lm.logits(&self.params, &rows);
        let nll: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| token_nll(logits.row(i), t as usize))
            .sum();
        Ok(VlmOutput {
            loss: nll / targets.len() as f64,
            scored: targets.len(),
        })
    }

    pub fn loss_features(&self, feats: Option<&PatchFeatures>, prompt: &FormattedPrompt) -> Result<VlmOutput> {
        self.loss_with_labels(feats, &prompt.tokens, &prompt.tokens, &prompt.loss_mask)
    }

    pub fn loss(&self, img: Option<&ProcessedImage>, prompt: &FormattedPrompt) -> Result<VlmOutput> {
        let feats = img.map(|i| self.encode(i)).transpose()?;
        self.loss_features(feats.as_ref(), prompt)
    }

    /// Adds `scale · ∇(Σ NLL)` into `g` for the trainable components and
    /// returns the unscaled NLL sum.
    pub fn accumulate_gradients(
        &self,
        img: Option<&ProcessedImage>,
        prompt: &FormattedPrompt,
        g: &mut Grads,
        scale: f64,
    ) -> Result<LossSum> {
        let p = &self.params;
        let train_backbone = g.wants(Component::Backbone);
        let train_projector = g.wants(Component::Projector) || train_backbone;
        let encoded = match img {
            Some(i) => Some(self.encode_for_training(i, train_projector, train_backbone)?),
            None => None,
        };
        let empty = Mat::zeros(0, self.lm.dim());
        let prefix = encoded.as_ref().map_or(&empty, |e| &e.prefix);
        let (hidden, cache) = self.lm.forward(p, prefix, &prompt.tokens)?;
        let (rows, targets) = scored_rows(&hidden, prefix.rows, &prompt.tokens, &prompt.loss_mask)?;
        let mut dlogits = self.lm.logits(p, &rows);
        let mut nll_sum = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = dlogits.row_mut(i);
            nll_sum += token_nll(row, t as usize);
            math::softmax_in_place(row);
            row[t as usize] -= 1.0;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        let drows = self.lm.head_backward(p, &rows, &dlogits, g);
        let mut dhidden = Mat::zeros(hidden.rows, hidden.cols);
        let mut k = 0;
        for (j, &m) in prompt.loss_mask.iter().enumerate() {
            if m {
                dhidden.row_mut(prefix.rows + j - 1).copy_from_slice(drows.row(k));
                k += 1;
            }
        }
        let dprefix = self.lm.backward(p, &cache, &dhidden, g);
        if let Some(Encoded {
            caches: Some((bcaches, pcache)),
            ..
        }) = &encoded
        {
            let dfeat = self.projector.backward(p, pcache, &dprefix, g, train_backbone);
            if let Some(dfeat) = dfeat {
                let mut col = 0;
                for (b, c) in self.backbones.iter().zip(bcaches) {
                    let w = b.config.dim;
                    let mut part = Mat::zeros(dfeat.rows, w);
                    for r in 0..dfeat.rows {
                        part.row_mut(r).copy_from_slice(&dfeat.row(r)[col..col + w]);
                    }
                    b.backward(p, c, &part, g);
                    col += w;
                }
            }
        }
        Ok(LossSum {
            nll_sum,
            scored: targets.len(),
        })
    }

    /// Greedy decoding; ties go to the lowest token id.
    pub fn generate_greedy(&self, img: Option<&ProcessedImage>, user: &str, max_new: usize) -> Result<Generation> {
        let feats = img.map(|i| self.encode(i)).transpose()?;
        self.generate_from_features(feats.as_ref(), user, max_new)
    }

    pub fn generate_from_features(
        &self,
        feats: Option<&PatchFeatures>,
        user: &str,
        max_new: usize,
    ) -> Result<Generation> {
        let prefix = self.prefix_for(feats)?;
        let mut tokens = self.format(user, None, feats.is_some())?.tokens;
        let start = tokens.len();
        let mut truncated = true;
        while tokens.len() - start < max_new && prefix.rows + tokens.len() < self.config.lm.max_context {
            let (hidden, _) = self.lm.forward(&self.params, &prefix, &tokens)?;
            let last = hidden.slice_rows(hidden.rows - 1, hidden.rows);
            let logits = self.lm.logits(&self.params, &last);
            let next = math::argmax(logits.row(0)) as TokenId;
            if next == ByteTokenizer::EOS {
                truncated = false;
                break;
            }
            tokens.push(next);
        }
        let generated = tokens.split_off(start);
        Ok(Generation {
            text: ByteTokenizer.decode(&generated),
            tokens: generated,
            truncated,
        })
    }
}

fn scored_rows(hidden: &Mat, offset: usize, labels: &[TokenId], mask: &[bool]) -> Result<(Mat, Vec<TokenId>)> {
    let positions: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    if positions.is_empty() {
        return Err(Error::EmptyLoss);
    }
    if offset + positions[0] == 0 {
        return Err(Error::InvalidArgument("the first position has no context to predict it from".into()));
    }
    let mut rows = Mat::zeros(positions.len(), hidden.cols);
    let mut targets = Vec::with_capacity(positions.len());
    for (k, &j) in positions.iter().enumerate() {
        rows.row_mut(k).copy_from_slice(hidden.row(offset + j - 1));
        targets.push(labels[j]);
    }
    Ok((rows, targets))
}
