use image::imageops::{crop_imm, resize, FilterType};
use image::{ImageBuffer, Rgb, Rgb32FImage};
use prism::fixture::fixture_table;
use prism_core::image::{process_image, NormStats, RawImage, Scheme};
use prism_core::stats::{one_sided_t_test, student_t_cdf, zscores_pooled, ModelKey, Pool};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// The reference accumulates in f32.
const TOL: f64 = 1e-4;

fn gradient(w: usize, h: usize) -> RawImage {
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            data.extend_from_slice(&[(x * 255 / w) as u8, (y * 255 / h) as u8, ((3 * x + 7 * y) % 256) as u8]);
        }
    }
    RawImage::new(w, h, data).unwrap()
}

fn as_float(img: &RawImage) -> Rgb32FImage {
    let data = img.data().iter().map(|&v| v as f32 / 255.0).collect();
    ImageBuffer::from_raw(img.width() as u32, img.height() as u32, data).unwrap()
}

fn identity() -> NormStats {
    NormStats {
        mean: [0.0; 3],
        std: [1.0; 3],
    }
}

fn max_diff(ours: &[f64], theirs: &ImageBuffer<Rgb<f32>, Vec<f32>>) -> f64 {
    assert_eq!(ours.len(), theirs.as_raw().len());
    ours.iter()
        .zip(theirs.as_raw())
        .map(|(a, b)| (a - *b as f64).abs())
        .fold(0.0, f64::max)
}

#[test]
fn resize_crop_matches_triangle_filter() {
    let img = gradient(640, 480);
    let ours = process_image(&img, Scheme::ResizeCrop, 224, &identity()).unwrap();
    // short side to 224: 640 × 224 / 480 = 298.67 → 299 wide, centered crop from x = 37
    let scaled = resize(&as_float(&img), 299, 224, FilterType::Triangle);
    let theirs = crop_imm(&scaled, 37, 0, 224, 224).to_image();
    assert!(max_diff(&ours.pixels, &theirs) < TOL);
}

#[test]
fn naive_resize_matches_triangle_filter() {
    for (w, h, side) in [(37, 23, 16), (10, 7, 28), (300, 200, 224), (56, 56, 28)] {
        let img = gradient(w, h);
        let ours = process_image(&img, Scheme::NaiveResize, side, &identity()).unwrap();
        let theirs = resize(&as_float(&img), side as u32, side as u32, FilterType::Triangle);
        let d = max_diff(&ours.pixels, &theirs);
        assert!(d < TOL, "{w}x{h} -> {side}: {d}");
    }
}

#[test]
fn letterbox_matches_padding_then_resizing() {
    let img = gradient(90, 40);
    let ours = process_image(&img, Scheme::Letterbox, 28, &identity()).unwrap();
    let mut padded: Rgb32FImage = ImageBuffer::new(90, 90);
    image::imageops::replace(&mut padded, &as_float(&img), 0, 25);
    let theirs = resize(&padded, 28, 28, FilterType::Triangle);
    assert!(max_diff(&ours.pixels, &theirs) < TOL);
    assert!((ours.pad_fraction - 50.0 / 90.0).abs() < 1e-12);
}

#[test]
fn t_cdf_matches_statrs() {
    for df in [1.0, 2.0, 3.0, 4.0, 7.0, 10.0, 29.0, 120.0] {
        let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -40..=40 {
            let t = i as f64 * 0.37;
            let (a, b) = (student_t_cdf(t, df), oracle.cdf(t));
            assert!((a - b).abs() < 1e-10, "df {df} t {t}: {a} vs {b}");
        }
    }
}

#[test]
fn one_sided_p_matches_statrs() {
    for d in [vec![0.5, 0.3, 0.7], vec![0.1, -0.2, 0.4, 0.05], vec![1.2, 0.9, 1.4, 1.1, 0.2, -0.3]] {
        let r = one_sided_t_test(&d).unwrap();
        let oracle = 1.0 - StudentsT::new(0.0, 1.0, r.df as f64).unwrap().cdf(r.t);
        assert!((r.p - oracle).abs() < 1e-10, "{d:?}: {} vs {oracle}", r.p);
    }
}

#[test]
fn fixture_visual_representation_z() {
    let t = fixture_table().unwrap();
    let family = "Visual Representations";
    let column: Vec<(String, f64)> = t
        .models()
        .iter()
        .filter(|m| m.family == family)
        .filter_map(|m| t.value(m, "VQAv2").map(|v| (m.name.clone(), v)))
        .collect();
    assert_eq!(column.len(), 4);
    let n = column.len() as f64;
    let mean = column.iter().map(|(_, v)| v).sum::<f64>() / n;
    let sd = (column.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let z = zscores_pooled(&t, Pool::Family).unwrap();
    for (name, v) in &column {
        let got = z.value(&ModelKey::new(family, name.as_str()), "VQAv2").unwrap();
        assert!((got - (v - mean) / sd).abs() < 1e-12, "{name}");
    }
    let siglip = z.value(&ModelKey::new(family, "SigLIP ViT-SO 224px"), "VQAv2").unwrap();
    assert!((siglip - 1.099).abs() < 1e-3, "{siglip}");
}
