use prism_core::image::{NormStats, RawImage, Scheme};
use prism_core::math::Mat;
use prism_core::model::{
    fuse_features, project, token_nll, visual_forward, BackboneConfig, ImageSettings, LmConfig, Vlm, VlmConfig,
};
use prism_core::params::{Component, ComponentSet, Grads};
use prism_core::prompt::{FormattedPrompt, PromptStyle};
use prism_core::rng;
use prism_core::tokenizer::ByteTokenizer;
use prism_core::Error;
use rand::Rng;

fn random_image(w: usize, h: usize, seed: u64) -> RawImage {
    let mut r = rng::seeded(seed);
    RawImage::new(w, h, (0..w * h * 3).map(|_| r.random::<u8>()).collect()).unwrap()
}

fn backbone(id: &str, patch: usize, dim: usize, layers: usize) -> BackboneConfig {
    BackboneConfig {
        id: id.into(),
        patch_size: patch,
        dim,
        layers,
        heads: 2,
    }
}

/// 28px input with patch 14 → 4 patches; small enough for exhaustive finite differences.
fn tiny_config(backbones: Vec<BackboneConfig>, tie: bool) -> VlmConfig {
    VlmConfig {
        image: ImageSettings {
            scheme: Scheme::NaiveResize,
            resolution: 28,
            norm: NormStats::default(),
        },
        backbones,
        projector_hidden: None,
        lm: LmConfig {
            dim: 16,
            layers: 2,
            heads: 2,
            max_context: 32,
            style: PromptStyle::Base,
            tie_embeddings: tie,
        },
    }
}

fn eight_tokens() -> FormattedPrompt {
    FormattedPrompt {
        tokens: vec![ByteTokenizer::BOS, 72, 105, 33, 32, 111, 107, ByteTokenizer::EOS],
        loss_mask: vec![false, false, false, false, true, true, true, true],
    }
}

#[test]
fn toy_backbone_patch_counts() {
    let vlm = Vlm::new(VlmConfig::default(), 0).unwrap();
    let img = vlm.preprocess(&random_image(300, 200, 1)).unwrap();
    let f = visual_forward(&vlm.backbones()[0], &vlm.params, &img).unwrap();
    assert_eq!((f.len(), f.width()), (256, 64));
    assert!(f.values.is_finite());
    assert_eq!(vlm.backbones()[0].tapped_blocks(), 3);

    let cfg = VlmConfig {
        backbones: vec![backbone("p16", 16, 32, 2)],
        ..VlmConfig::default()
    };
    let vlm = Vlm::new(cfg, 0).unwrap();
    let img = vlm.preprocess(&random_image(224, 224, 2)).unwrap();
    assert_eq!(visual_forward(&vlm.backbones()[0], &vlm.params, &img).unwrap().len(), 196);
}

#[test]
fn backbones_with_different_grids_cannot_be_fused() {
    let cfg = VlmConfig {
        backbones: vec![backbone("a", 14, 32, 2), backbone("b", 16, 32, 2)],
        ..VlmConfig::default()
    };
    assert!(matches!(Vlm::new(cfg, 0), Err(Error::Granularity(_))));
}

#[test]
fn wrong_resolution_is_rejected() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 0).unwrap();
    let other = Vlm::new(
        VlmConfig {
            image: ImageSettings {
                resolution: 56,
                ..ImageSettings::default()
            },
            ..tiny_config(vec![backbone("a", 14, 8, 2)], false)
        },
        0,
    )
    .unwrap();
    let img = other.preprocess(&random_image(56, 56, 3)).unwrap();
    assert!(matches!(vlm.encode(&img), Err(Error::Dimension(_))));
}

#[test]
fn zero_backbone_on_zero_input_gives_zero_features() {
    let mut vlm = Vlm::new(VlmConfig::default(), 5).unwrap();
    vlm.params.fill_component(Component::Backbone, 0.0);
    let mut img = vlm.preprocess(&random_image(224, 224, 4)).unwrap();
    img.pixels.iter_mut().for_each(|v| *v = 0.0);
    let f = vlm.encode(&img).unwrap();
    assert!(f.values.data.iter().all(|v| *v == 0.0));
}

#[test]
fn projector_parameter_count() {
    let cfg = VlmConfig {
        backbones: vec![backbone("dino", 14, 64, 2), backbone("siglip", 14, 96, 2)],
        ..VlmConfig::default()
    };
    let vlm = Vlm::new(cfg, 0).unwrap();
    let p = vlm.projector();
    assert_eq!((p.input_dim, p.hidden_dim, p.output_dim), (160, 128, 128));
    assert_eq!(p.param_count(), 160 * 128 + 128 + 128 * 128 + 128);
    assert_eq!(p.param_count(), 37_120);
    assert_eq!(vlm.params.count(ComponentSet::of(&[Component::Projector])), 37_120);
}

#[test]
fn projector_zero_and_permutation() {
    let mut vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 9).unwrap();
    let mut r = rng::seeded(10);
    let x = Mat::from_vec(8, 8, (0..64).map(|_| rng::normal(&mut r)).collect());
    let feats = prism_core::model::PatchFeatures {
        values: x.clone(),
        source: vec!["a".into()],
    };
    let y = project(vlm.projector(), &vlm.params, &feats).unwrap();
    let perm = [3usize, 0, 7, 1, 6, 2, 5, 4];
    let mut xp = Mat::zeros(8, 8);
    for (i, &j) in perm.iter().enumerate() {
        xp.row_mut(i).copy_from_slice(x.row(j));
    }
    let yp = project(
        vlm.projector(),
        &vlm.params,
        &prism_core::model::PatchFeatures {
            values: xp,
            source: vec!["a".into()],
        },
    )
    .unwrap();
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(yp.row(i), y.row(j));
    }
    let narrow = prism_core::model::PatchFeatures {
        values: Mat::zeros(8, 5),
        source: vec!["a".into()],
    };
    assert!(matches!(project(vlm.projector(), &vlm.params, &narrow), Err(Error::Dimension(_))));

    vlm.params.fill_component(Component::Projector, 0.0);
    let z = project(vlm.projector(), &vlm.params, &feats).unwrap();
    assert!(z.data.iter().all(|v| *v == 0.0));
}

#[test]
fn uniform_logits_cost_ln_vocab() {
    let logits = [0.0; 256];
    for t in [0, 17, 255] {
        assert!((token_nll(&logits, t) - 256f64.ln()).abs() < 1e-12);
    }
    assert!((256f64.ln() - 5.545).abs() < 1e-3);
}

#[test]
fn loss_needs_scored_positions() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 0).unwrap();
    let img = vlm.preprocess(&random_image(28, 28, 1)).unwrap();
    let prompt = vlm.format("What is this?", None, true).unwrap();
    assert!(prompt.loss_mask.iter().all(|m| !m));
    assert_eq!(vlm.loss(Some(&img), &prompt), Err(Error::EmptyLoss));
}

#[test]
fn context_overflow_is_reported() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 0).unwrap();
    let long = "x".repeat(40);
    assert!(matches!(vlm.format(&long, Some("y"), true), Err(Error::ContextOverflow { .. })));
}

#[test]
fn loss_ignores_labels_outside_the_mask() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 3).unwrap();
    let img = vlm.preprocess(&random_image(28, 28, 2)).unwrap();
    let feats = vlm.encode(&img).unwrap();
    let p = eight_tokens();
    let base = vlm.loss_with_labels(Some(&feats), &p.tokens, &p.tokens, &p.loss_mask).unwrap();
    let mut labels = p.tokens.clone();
    for (j, m) in p.loss_mask.iter().enumerate() {
        if !m {
            labels[j] = (labels[j] + 91) % 256;
        }
    }
    let perturbed = vlm.loss_with_labels(Some(&feats), &p.tokens, &labels, &p.loss_mask).unwrap();
    assert_eq!(base.loss.to_bits(), perturbed.loss.to_bits());
    assert_eq!(base.scored, 4);
    // a scored label does matter
    labels[6] = (labels[6] + 1) % 256;
    let changed = vlm.loss_with_labels(Some(&feats), &p.tokens, &labels, &p.loss_mask).unwrap();
    assert_ne!(base.loss, changed.loss);
}

#[test]
fn image_rows_reach_the_text_positions() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 3).unwrap();
    let p = eight_tokens();
    let a = vlm.loss(Some(&vlm.preprocess(&random_image(28, 28, 5)).unwrap()), &p).unwrap();
    let b = vlm.loss(Some(&vlm.preprocess(&random_image(28, 28, 6)).unwrap()), &p).unwrap();
    let none = vlm.loss(None, &p).unwrap();
    assert_ne!(a.loss, b.loss);
    assert_ne!(a.loss, none.loss);
    assert_eq!(a.scored, none.scored);
}

#[test]
fn fused_forward_equals_precomputed_concatenation() {
    let cfg = tiny_config(vec![backbone("dino", 14, 8, 2), backbone("siglip", 14, 6, 3)], false);
    let vlm = Vlm::new(cfg, 4).unwrap();
    let img = vlm.preprocess(&random_image(40, 30, 8)).unwrap();
    let a = visual_forward(&vlm.backbones()[0], &vlm.params, &img).unwrap();
    let b = visual_forward(&vlm.backbones()[1], &vlm.params, &img).unwrap();
    let fused = fuse_features(&a, &b).unwrap();
    assert_eq!(fused.width(), 14);
    let p = eight_tokens();
    let direct = vlm.loss(Some(&img), &p).unwrap();
    let pre = vlm.loss_features(Some(&fused), &p).unwrap();
    assert_eq!(direct.loss.to_bits(), pre.loss.to_bits());
}

/// Central differences over every trainable parameter of the given components.
fn gradient_check(vlm: &mut Vlm, components: ComponentSet) -> (f64, f64, usize) {
    let img = vlm.preprocess(&random_image(28, 28, 12)).unwrap();
    let prompt = eight_tokens();
    let scored = prompt.scored_positions() as f64;
    let mut g = Grads::new(&vlm.params, components);
    vlm.accumulate_gradients(Some(&img), &prompt, &mut g, 1.0 / scored).unwrap();
    let h = 1e-5;
    let (mut worst, mut diff2, mut norm2, mut checked) = (0.0f64, 0.0, 0.0, 0);
    for spec in vlm.params.specs().to_vec() {
        if !components.contains(spec.component) {
            continue;
        }
        for k in spec.offset..spec.offset + spec.len {
            let orig = vlm.params.data()[k];
            vlm.params.data_mut()[k] = orig + h;
            let up = vlm.loss(Some(&img), &prompt).unwrap().loss;
            vlm.params.data_mut()[k] = orig - h;
            let down = vlm.loss(Some(&img), &prompt).unwrap().loss;
            vlm.params.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
            worst = worst.max(rel);
            diff2 += (analytic - numeric).powi(2);
            norm2 += numeric.powi(2);
            checked += 1;
        }
    }
    (worst, (diff2 / norm2).sqrt(), checked)
}

#[test]
fn gradients_match_finite_differences() {
    let comps = ComponentSet::of(&[Component::Projector, Component::Lm]);
    for tie in [false, true] {
        let mut vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], tie), 21).unwrap();
        let (worst, global, n) = gradient_check(&mut vlm, comps);
        assert!(n > 1000);
        assert!(worst < 1e-4, "tie={tie}: elementwise {worst:e}");
        assert!(global < 1e-4, "tie={tie}: global {global:e}");
    }
}

#[test]
fn backbone_gradients_match_finite_differences() {
    let mut vlm = Vlm::new(
        tiny_config(vec![backbone("a", 14, 8, 2), backbone("b", 14, 4, 2)], false),
        22,
    )
    .unwrap();
    let (worst, global, _) = gradient_check(&mut vlm, ComponentSet::of(&[Component::Backbone]));
    assert!(worst < 1e-4, "elementwise {worst:e}");
    assert!(global < 1e-4, "global {global:e}");
}

#[test]
fn frozen_components_receive_no_gradient() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 2).unwrap();
    let img = vlm.preprocess(&random_image(28, 28, 1)).unwrap();
    let mut g = Grads::new(&vlm.params, ComponentSet::of(&[Component::Projector]));
    vlm.accumulate_gradients(Some(&img), &eight_tokens(), &mut g, 1.0).unwrap();
    for spec in vlm.params.specs() {
        let slice = &g.data()[spec.offset..spec.offset + spec.len];
        match spec.component {
            Component::Projector => {}
            _ => assert!(slice.iter().all(|v| *v == 0.0), "{}", spec.name),
        }
    }
    let proj = vlm.params.find("projector.fc1.w").unwrap();
    assert!(g.get(proj).iter().any(|v| *v != 0.0));
}

#[test]
fn greedy_decoding_is_deterministic_and_bounded() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 6).unwrap();
    let img = vlm.preprocess(&random_image(28, 28, 3)).unwrap();
    let a = vlm.generate_greedy(Some(&img), "Hi", 5).unwrap();
    let b = vlm.generate_greedy(Some(&img), "Hi", 5).unwrap();
    assert_eq!(a, b);
    assert!(a.tokens.len() <= 5);
    let one = vlm.generate_greedy(Some(&img), "Hi", 1).unwrap();
    assert!(one.tokens.len() == 1 || !one.truncated);
    assert_eq!(one.tokens[..], a.tokens[..one.tokens.len()]);
    let prompt_len = vlm.format("Hi", None, true).unwrap().len();
    let long = vlm.generate_greedy(Some(&img), "Hi", 100).unwrap();
    if long.truncated {
        assert_eq!(long.tokens.len(), 32 - 4 - prompt_len);
    }
}

#[test]
fn greedy_output_survives_positive_logit_rescaling() {
    let mut vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 8).unwrap();
    let img = vlm.preprocess(&random_image(28, 28, 4)).unwrap();
    let before = vlm.generate_greedy(Some(&img), "Name it", 8).unwrap();
    let head = vlm.params.find("lm.head.w").unwrap();
    for scale in [4.0, 0.125] {
        let mut scaled = vlm.clone();
        scaled.params.get_mut(head).iter_mut().for_each(|w| *w *= scale);
        assert_eq!(scaled.generate_greedy(Some(&img), "Name it", 8).unwrap(), before);
    }
    vlm.params.get_mut(head).iter_mut().for_each(|w| *w *= 2.0);
    assert_eq!(vlm.generate_greedy(Some(&img), "Name it", 8).unwrap(), before);
}

#[test]
fn language_only_examples_have_no_prefix() {
    let vlm = Vlm::new(tiny_config(vec![backbone("a", 14, 8, 2)], false), 1).unwrap();
    let prompt = vlm.format("What is 2 plus 3?", Some("5"), false).unwrap();
    assert_eq!(vlm.text_budget(false), 32);
    assert_eq!(vlm.text_budget(true), 28);
    let out = vlm.loss(None, &prompt).unwrap();
    assert_eq!(out.scored, 2);
    assert!(out.loss.is_finite());
}
