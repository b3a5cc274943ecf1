//! Differentiable building blocks: affine maps, layer norm, multi-head
//! self-attention and pre-norm transformer blocks.
//!
//! Each layer's `forward` returns its output together with whatever it needs
//! for `backward`, which accumulates parameter gradients into [`Grads`]
//! (only for trainable tensors) and returns the gradient w.r.t. its input.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, gemm_strided, matmul, matmul_acc, Mat, View};
use crate::params::{Component, Grads, Init, ParamStore, TensorId};
use crate::rng::DetRng;

pub const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-5;

/// `y = x·W + b` with `W` stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: TensorId,
    pub b: Option<TensorId>,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inp: usize,
        out: usize,
        component: Component,
        bias: bool,
        std: f64,
        rng: &mut DetRng,
    ) -> Self {
        let w = store.add(format!("{name}.w"), &[inp, out], component, true, Init::Normal(std), rng);
        let b = bias.then(|| store.add(format!("{name}.b"), &[out], component, false, Init::Zeros, rng));
        Linear { w, b, inp, out }
    }

    pub fn forward(&self, p: &ParamStore, x: &Mat) -> Mat {
        debug_assert_eq!(x.cols, self.inp);
        let mut y = matmul(x.view(), View::new(p.get(self.w), self.inp, self.out));
        if let Some(b) = self.b {
            let bias = p.get(b);
            for row in y.data.chunks_exact_mut(self.out) {
                for (v, bv) in row.iter_mut().zip(bias) {
                    *v += bv;
                }
            }
        }
        y
    }

    /// Accumulates `dW`, `db`; returns `dx` when `need_dx`.
    pub fn backward(&self, p: &ParamStore, x: &Mat, dy: &Mat, g: &mut Grads, need_dx: bool) -> Option<Mat> {
        if let Some(gw) = g.slot(self.w) {
            matmul_acc(x.view().t(), dy.view(), gw);
        }
        if let Some(b) = self.b {
            if let Some(gb) = g.slot(b) {
                for row in dy.data.chunks_exact(self.out) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
        }
        need_dx.then(|| matmul(dy.view(), View::new(p.get(self.w), self.inp, self.out).t()))
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: TensorId,
    pub bias: TensorId,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, component: Component, rng: &mut DetRng) -> Self {
        let gain = store.add(format!("{name}.g"), &[dim], component, false, Init::Ones, rng);
        let bias = store.add(format!("{name}.b"), &[dim], component, false, Init::Zeros, rng);
        LayerNorm { gain, bias, dim }
    }

    pub fn forward(&self, p: &ParamStore, x: &Mat) -> (Mat, LayerNormCache) {
        let (gain, bias) = (p.get(self.gain), p.get(self.bias));
        let n = self.dim as f64;
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for i in 0..x.rows {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let istd = 1.0 / libm::sqrt(var + LN_EPS);
            inv_std.push(istd);
            let (xh, yr) = (xhat.row_mut(i), &mut y.data[i * x.cols..(i + 1) * x.cols]);
            for j in 0..x.cols {
                xh[j] = (row[j] - mean) * istd;
                yr[j] = xh[j] * gain[j] + bias[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &ParamStore, cache: &LayerNormCache, dy: &Mat, g: &mut Grads) -> Mat {
        let gain = p.get(self.gain);
        if let Some(gg) = g.slot(self.gain) {
            for i in 0..dy.rows {
                for ((acc, d), xh) in gg.iter_mut().zip(dy.row(i)).zip(cache.xhat.row(i)) {
                    *acc += d * xh;
                }
            }
        }
        if let Some(gb) = g.slot(self.bias) {
            for i in 0..dy.rows {
                for (acc, d) in gb.iter_mut().zip(dy.row(i)) {
                    *acc += d;
                }
            }
        }
        let n = self.dim as f64;
        let mut dx = Mat::zeros(dy.rows, dy.cols);
        let mut dxhat = vec![0.0; self.dim];
        for i in 0..dy.rows {
            let (dyr, xh) = (dy.row(i), cache.xhat.row(i));
            for j in 0..self.dim {
                dxhat[j] = dyr[j] * gain[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / n;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
            let istd = cache.inv_std[i];
            for (j, out) in dx.row_mut(i).iter_mut().enumerate() {
                *out = istd * (dxhat[j] - mean_d - xh[j] * mean_dx);
            }
        }
        dx
    }
}

/// Multi-head self-attention with a fused QKV projection.
#[derive(Debug, Clone)]
pub struct Attention {
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub dim: usize,
    pub causal: bool,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Mat,
    qkv: Mat,
    probs: Vec<Mat>,
    concat: Mat,
}

impl Attention {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        causal: bool,
        component: Component,
        out_std: f64,
        rng: &mut DetRng,
    ) -> Self {
        assert!(heads > 0 && dim.is_multiple_of(heads), "dim must split evenly across heads");
        let qkv = Linear::new(store, &format!("{name}.qkv"), dim, 3 * dim, component, true, INIT_STD, rng);
        let proj = Linear::new(store, &format!("{name}.proj"), dim, dim, component, true, out_std, rng);
        Attention {
            qkv,
            proj,
            heads,
            dim,
            causal,
        }
    }

    fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn forward(&self, p: &ParamStore, x: &Mat) -> (Mat, AttentionCache) {
        let n = x.rows;
        let (d, dh) = (self.dim, self.head_dim());
        let scale = 1.0 / libm::sqrt(dh as f64);
        let qkv = self.qkv.forward(p, x);
        let mut concat = Mat::zeros(n, d);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let q = View::strided(&qkv.data[h * dh..], n, dh, 3 * d, 1);
            let k = View::strided(&qkv.data[d + h * dh..], n, dh, 3 * d, 1);
            let v = View::strided(&qkv.data[2 * d + h * dh..], n, dh, 3 * d, 1);
            let mut s = Mat::zeros(n, n);
            gemm_strided(scale, q, k.t(), 0.0, &mut s.data, n, 1);
            for i in 0..n {
                let row = s.row_mut(i);
                if self.causal {
                    math::softmax_in_place(&mut row[..=i]);
                    row[i + 1..].fill(0.0);
                } else {
                    math::softmax_in_place(row);
                }
            }
            gemm_strided(1.0, s.view(), v, 0.0, &mut concat.data[h * dh..], d, 1);
            probs.push(s);
        }
        let y = self.proj.forward(p, &concat);
        (
            y,
            AttentionCache {
                x: x.clone(),
                qkv,
                probs,
                concat,
            },
        )
    }

    pub fn backward(&self, p: &ParamStore, cache: &AttentionCache, dy: &Mat, g: &mut Grads) -> Mat {
        let n = dy.rows;
        let (d, dh) = (self.dim, self.head_dim());
        let scale = 1.0 / libm::sqrt(dh as f64);
        let dconcat = self
            .proj
            .backward(p, &cache.concat, dy, g, true)
            .expect("input gradient requested");
        let qkv = &cache.qkv;
        let mut dqkv = Mat::zeros(n, 3 * d);
        let mut dp = Mat::zeros(n, n);
        for h in 0..self.heads {
            let probs = &cache.probs[h];
            let q = View::strided(&qkv.data[h * dh..], n, dh, 3 * d, 1);
            let k = View::strided(&qkv.data[d + h * dh..], n, dh, 3 * d, 1);
            let v = View::strided(&qkv.data[2 * d + h * dh..], n, dh, 3 * d, 1);
            let dout = View::strided(&dconcat.data[h * dh..], n, dh, d, 1);
            // dV = Pᵀ·dO
            gemm_strided(1.0, probs.view().t(), dout, 0.0, &mut dqkv.data[2 * d + h * dh..], 3 * d, 1);
            // dP = dO·Vᵀ, then softmax backward in place
            gemm_strided(1.0, dout, v.t(), 0.0, &mut dp.data, n, 1);
            for i in 0..n {
                let (pr, dr) = (probs.row(i), dp.row_mut(i));
                let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
                for (dv, pv) in dr.iter_mut().zip(pr) {
                    *dv = pv * (*dv - dot) * scale;
                }
            }
            gemm_strided(1.0, dp.view(), k, 0.0, &mut dqkv.data[h * dh..], 3 * d, 1);
            gemm_strided(1.0, dp.view().t(), q, 0.0, &mut dqkv.data[d + h * dh..], 3 * d, 1);
        }
        self.qkv
            .backward(p, &cache.x, &dqkv, g, true)
            .expect("input gradient requested")
    }
}

/// Pre-norm transformer block: `h = x + attn(ln1(x))`, `y = h + mlp(ln2(h))`.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    normed2: Mat,
    pre_act: Mat,
    act: Mat,
}

impl Block {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        causal: bool,
        depth: usize,
        component: Component,
        rng: &mut DetRng,
    ) -> Self {
        let out_std = INIT_STD / libm::sqrt(2.0 * depth.max(1) as f64);
        let ln1 = LayerNorm::new(store, &format!("{name}.ln1"), dim, component, rng);
        let attn = Attention::new(store, &format!("{name}.attn"), dim, heads, causal, component, out_std, rng);
        let ln2 = LayerNorm::new(store, &format!("{name}.ln2"), dim, component, rng);
        let fc1 = Linear::new(store, &format!("{name}.fc1"), dim, 4 * dim, component, true, INIT_STD, rng);
        let fc2 = Linear::new(store, &format!("{name}.fc2"), 4 * dim, dim, component, true, out_std, rng);
        Block {
            ln1,
            attn,
            ln2,
            fc1,
            fc2,
        }
    }

    pub fn forward(&self, p: &ParamStore, x: &Mat) -> (Mat, BlockCache) {
        let (normed1, ln1) = self.ln1.forward(p, x);
        let (attn_out, attn) = self.attn.forward(p, &normed1);
        let mut h = x.clone();
        h.add_assign(&attn_out);
        let (normed2, ln2) = self.ln2.forward(p, &h);
        let pre_act = self.fc1.forward(p, &normed2);
        let act = Mat::from_vec(
            pre_act.rows,
            pre_act.cols,
            pre_act.data.iter().map(|v| math::gelu(*v)).collect(),
        );
        let mut y = h;
        y.add_assign(&self.fc2.forward(p, &act));
        (
            y,
            BlockCache {
                ln1,
                attn,
                ln2,
                normed2,
                pre_act,
                act,
            },
        )
    }

    pub fn backward(&self, p: &ParamStore, cache: &BlockCache, dy: &Mat, g: &mut Grads) -> Mat {
        let dact = self.fc2.backward(p, &cache.act, dy, g, true).expect("dx");
        let dpre = Mat::from_vec(
            dact.rows,
            dact.cols,
            dact.data
                .iter()
                .zip(&cache.pre_act.data)
                .map(|(d, u)| d * math::gelu_grad(*u))
                .collect(),
        );
        let dnormed2 = self.fc1.backward(p, &cache.normed2, &dpre, g, true).expect("dx");
        let mut dh = dy.clone();
        dh.add_assign(&self.ln2.backward(p, &cache.ln2, &dnormed2, g));
        let dnormed1 = self.attn.backward(p, &cache.attn, &dh, g);
        let mut dx = dh;
        dx.add_assign(&self.ln1.backward(p, &cache.ln1, &dnormed1, g));
        dx
    }
}
