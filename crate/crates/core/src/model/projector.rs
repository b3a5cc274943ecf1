use alloc::format;

use crate::error::{Error, Result};
use crate::math::{self, Mat};
use crate::nn::{Linear, INIT_STD};
use crate::params::{Component, Grads, ParamStore};
use crate::rng::DetRng;

use super::features::PatchFeatures;

/// Two-layer GELU MLP applied to each patch independently.
#[derive(Debug, Clone)]
pub struct Projector {
    fc1: Linear,
    fc2: Linear,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ProjectorCache {
    x: Mat,
    pre: Mat,
    act: Mat,
}

impl Projector {
    pub(crate) fn new(
        store: &mut ParamStore,
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut DetRng,
    ) -> Self {
        let c = Component::Projector;
        let fc1 = Linear::new(store, "projector.fc1", input_dim, hidden_dim, c, true, INIT_STD, rng);
        let fc2 = Linear::new(store, "projector.fc2", hidden_dim, output_dim, c, true, INIT_STD, rng);
        Projector {
            fc1,
            fc2,
            input_dim,
            hidden_dim,
            output_dim,
        }
    }

    pub fn param_count(&self) -> usize {
        (self.input_dim + 1) * self.hidden_dim + (self.hidden_dim + 1) * self.output_dim
    }

    pub(crate) fn forward(&self, p: &ParamStore, x: &Mat) -> (Mat, ProjectorCache) {
        let pre = self.fc1.forward(p, x);
        let act = Mat::from_vec(pre.rows, pre.cols, pre.data.iter().map(|v| math::gelu(*v)).collect());
        let y = self.fc2.forward(p, &act);
        (
            y,
            ProjectorCache {
                x: x.clone(),
                pre,
                act,
            },
        )
    }

    pub(crate) fn backward(
        &self,
        p: &ParamStore,
        cache: &ProjectorCache,
        dy: &Mat,
        g: &mut Grads,
        need_dx: bool,
    ) -> Option<Mat> {
        let dact = self.fc2.backward(p, &cache.act, dy, g, true).expect("dx");
        let dpre = Mat::from_vec(
            dact.rows,
            dact.cols,
            dact.data
                .iter()
                .zip(&cache.pre.data)
                .map(|(d, u)| d * math::gelu_grad(*u))
                .collect(),
        );
        self.fc1.backward(p, &cache.x, &dpre, g, need_dx)
    }
}

/// Maps patch features into the LM embedding space, one row per patch.
pub fn project(projector: &Projector, params: &ParamStore, feats: &PatchFeatures) -> Result<Mat> {
    if feats.width() != projector.input_dim {
        return Err(Error::Dimension(format!(
            "projector expects width {}, features have {}",
            projector.input_dim,
            feats.width()
        )));
    }
    Ok(projector.forward(params, &feats.values).0)
}
