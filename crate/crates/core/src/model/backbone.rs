use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{patch_grid, PatchGrid, ProcessedImage};
use crate::math::Mat;
use crate::nn::{Block, BlockCache, Linear, INIT_STD};
use crate::params::{Component, Grads, Init, ParamStore, TensorId};
use crate::rng::DetRng;

use super::config::BackboneConfig;
use super::features::PatchFeatures;

/// Toy ViT. Features are read from the output of the penultimate block, so
/// only `layers - 1` blocks are materialized and there is no final norm.
#[derive(Debug, Clone)]
pub struct VisualBackbone {
    pub config: BackboneConfig,
    pub side: usize,
    pub grid: PatchGrid,
    patch_embed: Linear,
    pos: TensorId,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
pub struct BackboneCache {
    patches: Mat,
    blocks: Vec<BlockCache>,
}

/// Rows are patches in raster order; each row is the patch's pixels in
/// raster order with channels interleaved.
pub fn patchify(img: &ProcessedImage, patch_size: usize) -> Result<Mat> {
    let grid = patch_grid(img.side, patch_size)?;
    let n = grid.patches_per_side;
    let width = patch_size * patch_size * 3;
    let mut out = Mat::zeros(grid.total_patches, width);
    for py in 0..n {
        for px in 0..n {
            let row = out.row_mut(py * n + px);
            for dy in 0..patch_size {
                let y = py * patch_size + dy;
                let start = (y * img.side + px * patch_size) * 3;
                row[dy * patch_size * 3..(dy + 1) * patch_size * 3]
                    .copy_from_slice(&img.pixels[start..start + patch_size * 3]);
            }
        }
    }
    Ok(out)
}

impl VisualBackbone {
    pub(crate) fn new(
        store: &mut ParamStore,
        index: usize,
        config: &BackboneConfig,
        side: usize,
        rng: &mut DetRng,
    ) -> Result<Self> {
        if config.layers == 0 || config.dim == 0 || config.heads == 0 || !config.dim.is_multiple_of(config.heads) {
            return Err(Error::InvalidArgument(format!(
                "backbone {}: need layers > 0 and dim divisible by heads (dim {}, heads {}, layers {})",
                config.id, config.dim, config.heads, config.layers
            )));
        }
        let grid = patch_grid(side, config.patch_size)?;
        let name = format!("backbone.{index}");
        let c = Component::Backbone;
        let patch_embed = Linear::new(
            store,
            &format!("{name}.patch_embed"),
            config.patch_size * config.patch_size * 3,
            config.dim,
            c,
            true,
            INIT_STD,
            rng,
        );
        let pos = store.add(
            format!("{name}.pos"),
            &[grid.total_patches, config.dim],
            c,
            false,
            Init::Normal(INIT_STD),
            rng,
        );
        let tapped = config.layers - 1;
        let blocks = (0..tapped)
            .map(|i| {
                Block::new(
                    store,
                    &format!("{name}.blocks.{i}"),
                    config.dim,
                    config.heads,
                    false,
                    config.layers,
                    c,
                    rng,
                )
            })
            .collect();
        Ok(VisualBackbone {
            config: config.clone(),
            side,
            grid,
            patch_embed,
            pos,
            blocks,
        })
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    /// Number of blocks actually run (depth of the feature tap).
    pub fn tapped_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_patches(&self) -> usize {
        self.grid.total_patches
    }

    pub(crate) fn forward(&self, p: &ParamStore, img: &ProcessedImage) -> Result<(PatchFeatures, BackboneCache)> {
        if img.side != self.side {
            return Err(Error::Dimension(format!(
                "backbone {} expects {}px input, got {}px",
                self.config.id, self.side, img.side
            )));
        }
        let patches = patchify(img, self.config.patch_size)?;
        let mut x = self.patch_embed.forward(p, &patches);
        for (v, pv) in x.data.iter_mut().zip(p.get(self.pos)) {
            *v += pv;
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(p, &x);
            caches.push(cache);
            x = y;
        }
        let feats = PatchFeatures {
            values: x,
            source: vec![String::from(self.id())],
        };
        Ok((
            feats,
            BackboneCache {
                patches,
                blocks: caches,
            },
        ))
    }

    pub(crate) fn backward(&self, p: &ParamStore, cache: &BackboneCache, dfeat: &Mat, g: &mut Grads) {
        let mut dx = dfeat.clone();
        for (block, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = block.backward(p, c, &dx, g);
        }
        if let Some(gp) = g.slot(self.pos) {
            for (acc, v) in gp.iter_mut().zip(&dx.data) {
                *acc += v;
            }
        }
        self.patch_embed.backward(p, &cache.patches, &dx, g, false);
    }
}

/// Runs a backbone on a preprocessed image and returns its patch features.
pub fn visual_forward(backbone: &VisualBackbone, params: &ParamStore, img: &ProcessedImage) -> Result<PatchFeatures> {
    backbone.forward(params, img).map(|(f, _)| f)
}
