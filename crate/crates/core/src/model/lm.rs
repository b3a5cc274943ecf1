use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{matmul, matmul_acc, Mat, View};
use crate::nn::{Block, BlockCache, LayerNorm, LayerNormCache, Linear, INIT_STD};
use crate::params::{Component, Grads, Init, ParamStore, TensorId};
use crate::rng::DetRng;
use crate::tokenizer::TokenId;

use super::config::LmConfig;

/// Small causal transformer over byte tokens that also accepts a prefix of
/// already-embedded rows (the projected image patches).
#[derive(Debug, Clone)]
pub struct ToyLm {
    pub config: LmConfig,
    pub vocab: usize,
    tok_emb: TensorId,
    pos_emb: TensorId,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
    head: Option<Linear>,
}

#[derive(Debug, Clone)]
pub(crate) struct LmCache {
    prefix_len: usize,
    tokens: Vec<TokenId>,
    blocks: Vec<BlockCache>,
    ln_f: LayerNormCache,
}

impl ToyLm {
    pub(crate) fn new(store: &mut ParamStore, config: &LmConfig, vocab: usize, rng: &mut DetRng) -> Result<Self> {
        if config.layers == 0 || config.dim == 0 || config.heads == 0 || !config.dim.is_multiple_of(config.heads) {
            return Err(Error::InvalidArgument(format!(
                "lm: need layers > 0 and dim divisible by heads (dim {}, heads {}, layers {})",
                config.dim, config.heads, config.layers
            )));
        }
        if config.max_context == 0 {
            return Err(Error::InvalidArgument("lm: max_context must be positive".into()));
        }
        let c = Component::Lm;
        let tok_emb = store.add("lm.tok_emb".into(), &[vocab, config.dim], c, true, Init::Normal(INIT_STD), rng);
        let pos_emb = store.add(
            "lm.pos_emb".into(),
            &[config.max_context, config.dim],
            c,
            false,
            Init::Normal(INIT_STD),
            rng,
        );
        let blocks = (0..config.layers)
            .map(|i| {
                Block::new(
                    store,
                    &format!("lm.blocks.{i}"),
                    config.dim,
                    config.heads,
                    true,
                    config.layers,
                    c,
                    rng,
                )
            })
            .collect();
        let ln_f = LayerNorm::new(store, "lm.ln_f", config.dim, c, rng);
        let head = (!config.tie_embeddings)
            .then(|| Linear::new(store, "lm.head", config.dim, vocab, c, false, INIT_STD, rng));
        Ok(ToyLm {
            config: config.clone(),
            vocab,
            tok_emb,
            pos_emb,
            blocks,
            ln_f,
            head,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, p: &ParamStore, prefix: &Mat, tokens: &[TokenId]) -> Result<Mat> {
        let d = self.config.dim;
        let n = prefix.rows + tokens.len();
        if n > self.config.max_context {
            return Err(Error::ContextOverflow {
                needed: n,
                max: self.config.max_context,
            });
        }
        if prefix.rows > 0 && prefix.cols != d {
            return Err(Error::Dimension(format!("prefix width {} != lm width {d}", prefix.cols)));
        }
        let emb = p.get(self.tok_emb);
        let pos = p.get(self.pos_emb);
        let mut x = Mat::zeros(n, d);
        for i in 0..n {
            let row = x.row_mut(i);
            if i < prefix.rows {
                row.copy_from_slice(prefix.row(i));
            } else {
                let t = tokens[i - prefix.rows] as usize;
                if t >= self.vocab {
                    return Err(Error::InvalidArgument(format!("token id {t} out of range")));
                }
                row.copy_from_slice(&emb[t * d..(t + 1) * d]);
            }
            for (v, pv) in row.iter_mut().zip(&pos[i * d..(i + 1) * d]) {
                *v += pv;
            }
        }
        Ok(x)
    }

    /// Final-norm hidden states for every position of `prefix ++ tokens`.
    pub(crate) fn forward(&self, p: &ParamStore, prefix: &Mat, tokens: &[TokenId]) -> Result<(Mat, LmCache)> {
        let mut x = self.embed(p, prefix, tokens)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(p, &x);
            caches.push(cache);
            x = y;
        }
        let (h, ln_f) = self.ln_f.forward(p, &x);
        Ok((
            h,
            LmCache {
                prefix_len: prefix.rows,
                tokens: tokens.to_vec(),
                blocks: caches,
                ln_f,
            },
        ))
    }

    pub(crate) fn logits(&self, p: &ParamStore, hidden: &Mat) -> Mat {
        match &self.head {
            Some(head) => head.forward(p, hidden),
            None => matmul(
                hidden.view(),
                View::new(p.get(self.tok_emb), self.vocab, self.config.dim).t(),
            ),
        }
    }

    /// Backward through the output head; returns the gradient w.r.t. `hidden`.
    pub(crate) fn head_backward(&self, p: &ParamStore, hidden: &Mat, dlogits: &Mat, g: &mut Grads) -> Mat {
        match &self.head {
            Some(head) => head.backward(p, hidden, dlogits, g, true).expect("dx"),
            None => {
                if let Some(ge) = g.slot(self.tok_emb) {
                    matmul_acc(dlogits.view().t(), hidden.view(), ge);
                }
                matmul(dlogits.view(), View::new(p.get(self.tok_emb), self.vocab, self.config.dim))
            }
        }
    }

    /// Backward from the final hidden states; returns the gradient w.r.t. the prefix rows.
    pub(crate) fn backward(&self, p: &ParamStore, cache: &LmCache, dhidden: &Mat, g: &mut Grads) -> Mat {
        let d = self.config.dim;
        let mut dx = self.ln_f.backward(p, &cache.ln_f, dhidden, g);
        for (block, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = block.backward(p, c, &dx, g);
        }
        if let Some(gp) = g.slot(self.pos_emb) {
            for (acc, v) in gp.iter_mut().zip(&dx.data) {
                *acc += v;
            }
        }
        if let Some(ge) = g.slot(self.tok_emb) {
            for (j, &t) in cache.tokens.iter().enumerate() {
                let t = t as usize;
                let src = dx.row(cache.prefix_len + j);
                for (acc, v) in ge[t * d..(t + 1) * d].iter_mut().zip(src) {
                    *acc += v;
                }
            }
        }
        dx.slice_rows(0, cache.prefix_len)
    }
}
