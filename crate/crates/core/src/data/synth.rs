//! Synthetic shapes world standing in for the real instruction mixture.
//!
//! Each layout places non-overlapping colored squares, circles and
//! triangles on a light canvas; every (color, shape) pair appears at most
//! once so referring expressions are unambiguous. Per layout the generator
//! emits one record of each kind: color question, shape count, spatial
//! true/false statement, presence yes/no question, localization, region
//! caption and caption.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::bbox::{encode_bbox, BBox};
use super::example::{InstructExample, TaskKind};
use super::trigger::apply_trigger_prompt;
use crate::error::{Error, Result};
use crate::image::RawImage;
use crate::rng::{self, DetRng};

pub const BACKGROUND: [u8; 3] = [245, 245, 245];
pub const MAX_OBJECTS: usize = 15;
/// Layout gap in pixels between object boxes.
const GAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    Purple,
    Orange,
}

impl Color {
    pub const ALL: [Color; 6] = [Color::Red, Color::Green, Color::Blue, Color::Yellow, Color::Purple, Color::Orange];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::Purple => "purple",
            Color::Orange => "orange",
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [220, 40, 40],
            Color::Green => [40, 170, 60],
            Color::Blue => [40, 80, 220],
            Color::Yellow => [225, 200, 30],
            Color::Purple => [140, 60, 190],
            Color::Orange => [240, 140, 30],
        }
    }
}

/// A shape occupying the pixel square `[x, x+size) × [y, y+size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SceneObject {
    pub shape: Shape,
    pub color: Color,
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl SceneObject {
    /// Pixel box `(x0, y0, x1, y1)` with exclusive ends.
    pub fn pixel_box(&self) -> (usize, usize, usize, usize) {
        (self.x, self.y, self.x + self.size, self.y + self.size)
    }

    pub fn bbox(&self, canvas: usize) -> BBox {
        let c = canvas as f64;
        BBox {
            x_min: self.x as f64 / c,
            y_min: self.y as f64 / c,
            x_max: (self.x + self.size) as f64 / c,
            y_max: (self.y + self.size) as f64 / c,
        }
    }

    pub fn phrase(&self) -> String {
        format!("{} {}", self.color.name(), self.shape.name())
    }

    fn center2(&self) -> (usize, usize) {
        (2 * self.x + self.size, 2 * self.y + self.size)
    }

    /// Whether the pixel whose center is `(px + ½, py + ½)` is inside the shape.
    pub fn covers(&self, px: usize, py: usize) -> bool {
        let (x0, y0, x1, y1) = self.pixel_box();
        if px < x0 || px >= x1 || py < y0 || py >= y1 {
            return false;
        }
        let s = self.size as f64;
        let (fx, fy) = (px as f64 + 0.5 - self.x as f64, py as f64 + 0.5 - self.y as f64);
        match self.shape {
            Shape::Square => true,
            Shape::Circle => {
                let r = s / 2.0;
                (fx - r) * (fx - r) + (fy - r) * (fy - r) <= r * r
            }
            Shape::Triangle => (fx - s / 2.0).abs() <= fy / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub canvas: usize,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn render(&self) -> RawImage {
        let mut img = RawImage::filled(self.canvas, self.canvas, BACKGROUND).expect("canvas is nonempty");
        for obj in &self.objects {
            let (x0, y0, x1, y1) = obj.pixel_box();
            for py in y0..y1.min(self.canvas) {
                for px in x0..x1.min(self.canvas) {
                    if obj.covers(px, py) {
                        img.set_pixel(px, py, obj.color.rgb());
                    }
                }
            }
        }
        img
    }

    pub fn count(&self, shape: Shape) -> usize {
        self.objects.iter().filter(|o| o.shape == shape).count()
    }

    pub fn contains(&self, color: Color, shape: Shape) -> bool {
        self.objects.iter().any(|o| o.color == color && o.shape == shape)
    }

    pub fn caption(&self) -> String {
        let mut objs = self.objects.clone();
        objs.sort_by_key(|o| (o.x, o.y));
        let phrases: Vec<String> = objs
            .iter()
            .map(|o| {
                let phrase = o.phrase();
                let article = if phrase.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
                format!("{article} {phrase}")
            })
            .collect();
        let mut text = match phrases.len() {
            0 => String::from("an empty canvas"),
            1 => phrases[0].clone(),
            n => format!("{} and {}", phrases[..n - 1].join(", "), phrases[n - 1]),
        };
        text.replace_range(0..1, &text[0..1].to_uppercase());
        text.push('.');
        text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::LeftOf, Relation::RightOf, Relation::Above, Relation::Below];

    pub fn phrase(self) -> &'static str {
        match self {
            Relation::LeftOf => "left of",
            Relation::RightOf => "right of",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }

    /// Compares object centers.
    pub fn holds(self, a: &SceneObject, b: &SceneObject) -> bool {
        let ((ax, ay), (bx, by)) = (a.center2(), b.center2());
        match self {
            Relation::LeftOf => ax < bx,
            Relation::RightOf => ax > bx,
            Relation::Above => ay < by,
            Relation::Below => ay > by,
        }
    }
}

/// Which evaluation probe a synthetic record corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Probe {
    Color,
    Count,
    Spatial,
    Presence,
    Localization,
    RegionCaption,
    Caption,
}

/// Untriggered question and gold answer behind a generated record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthQuestion {
    pub example: usize,
    pub probe: Probe,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of distinct layouts (images).
    pub images: usize,
    pub canvas: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub language_only: usize,
}

impl SynthConfig {
    pub fn new(seed: u64, images: usize, canvas: usize) -> Self {
        SynthConfig {
            seed,
            images,
            canvas,
            min_objects: 2,
            max_objects: 4,
            language_only: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub examples: Vec<InstructExample>,
    /// `(image reference, rendered image)` in layout order.
    pub images: Vec<(String, RawImage)>,
    pub scenes: Vec<Scene>,
    pub questions: Vec<SynthQuestion>,
}

impl SynthDataset {
    pub fn image(&self, reference: &str) -> Option<&RawImage> {
        self.images.iter().find(|(r, _)| r == reference).map(|(_, img)| img)
    }
}

fn separated(a: &SceneObject, b: &SceneObject) -> bool {
    let (ax0, ay0, ax1, ay1) = a.pixel_box();
    let (bx0, by0, bx1, by1) = b.pixel_box();
    ax1 + GAP <= bx0 || bx1 + GAP <= ax0 || ay1 + GAP <= by0 || by1 + GAP <= ay0
}

fn draw_scene(cfg: &SynthConfig, rng: &mut DetRng) -> Option<Scene> {
    let canvas = cfg.canvas;
    let lo = (canvas / 8).max(3);
    let hi = (canvas / 4).max(lo + 1);
    if hi > canvas {
        return None;
    }
    let target = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(target);
    let mut tries = 0;
    while objects.len() < target && tries < 200 {
        tries += 1;
        let shape = Shape::ALL[rng.random_range(0..Shape::ALL.len())];
        let color = Color::ALL[rng.random_range(0..Color::ALL.len())];
        let size = rng.random_range(lo..=hi);
        let x = rng.random_range(0..=canvas - size);
        let y = rng.random_range(0..=canvas - size);
        let obj = SceneObject { shape, color, x, y, size };
        let unique = !objects.iter().any(|o| o.shape == shape && o.color == color);
        if unique && objects.iter().all(|o| separated(o, &obj)) {
            objects.push(obj);
        }
    }
    let scene = Scene { canvas, objects };
    let has_unique_shape = Shape::ALL.iter().any(|s| scene.count(*s) == 1);
    (scene.objects.len() >= cfg.min_objects && has_unique_shape).then_some(scene)
}

/// Generate `cfg.images` distinct layouts and their records; deterministic in
/// `cfg.seed`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.images == 0 {
        return Err(Error::InvalidArgument("at least one image is required".into()));
    }
    if cfg.min_objects < 2 || cfg.min_objects > cfg.max_objects || cfg.max_objects > MAX_OBJECTS {
        return Err(Error::InvalidArgument(format!(
            "object count range {}..={} must lie within 2..={MAX_OBJECTS}",
            cfg.min_objects, cfg.max_objects
        )));
    }
    if cfg.canvas < 8 {
        return Err(Error::InvalidArgument(format!("canvas {} is too small", cfg.canvas)));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut seen = BTreeSet::new();
    let mut scenes = Vec::with_capacity(cfg.images);
    // give up after this many consecutive draws without a new layout
    let patience = 5000;
    let mut misses = 0;
    while scenes.len() < cfg.images && misses < patience {
        misses += 1;
        if let Some(scene) = draw_scene(cfg, &mut rng) {
            let mut key = scene.objects.clone();
            key.sort();
            if seen.insert(key) {
                scenes.push(scene);
                misses = 0;
            }
        }
    }
    if scenes.len() < cfg.images {
        return Err(Error::LayoutExhausted {
            requested: cfg.images,
            produced: scenes.len(),
        });
    }

    let mut out = SynthDataset {
        examples: Vec::new(),
        images: Vec::with_capacity(scenes.len()),
        scenes: Vec::new(),
        questions: Vec::new(),
    };
    for (i, scene) in scenes.into_iter().enumerate() {
        let image_ref = format!("images/{}_{i:05}.png", cfg.seed);
        out.images.push((image_ref.clone(), scene.render()));
        emit_records(cfg, i, &scene, &image_ref, &mut rng, &mut out)?;
        out.scenes.push(scene);
    }
    for j in 0..cfg.language_only {
        let (a, b) = (rng.random_range(0..50u32), rng.random_range(0..50u32));
        out.examples.push(InstructExample {
            id: format!("synth-{}-lang-{j:05}", cfg.seed),
            image: None,
            task_kind: TaskKind::LanguageOnly,
            prompt: format!("What is {a} plus {b}?"),
            response: format!("{}", a + b),
        });
    }
    Ok(out)
}

fn emit_records(
    cfg: &SynthConfig,
    index: usize,
    scene: &Scene,
    image_ref: &str,
    rng: &mut DetRng,
    out: &mut SynthDataset,
) -> Result<()> {
    let objs = &scene.objects;
    let mut push = |probe: Probe, kind: TaskKind, question: String, answer: String| -> Result<()> {
        let prompt = apply_trigger_prompt(kind, &question, None)?;
        out.questions.push(SynthQuestion {
            example: out.examples.len(),
            probe,
            question,
            answer: answer.clone(),
        });
        out.examples.push(InstructExample {
            id: format!("synth-{}-{index:05}-{}", cfg.seed, probe_slug(probe)),
            image: Some(image_ref.into()),
            task_kind: kind,
            prompt,
            response: answer,
        });
        Ok(())
    };

    let unique_shapes: Vec<&SceneObject> = objs.iter().filter(|o| scene.count(o.shape) == 1).collect();
    let target = **unique_shapes.choose(rng).expect("layouts always contain a unique shape");
    push(
        Probe::Color,
        TaskKind::Vqa,
        format!("What color is the {}?", target.shape.name()),
        target.color.name().into(),
    )?;

    let shape = Shape::ALL[rng.random_range(0..Shape::ALL.len())];
    push(
        Probe::Count,
        TaskKind::Vqa,
        format!("How many {}s are there?", shape.name()),
        format!("{}", scene.count(shape)),
    )?;

    let a = rng.random_range(0..objs.len());
    let b = (a + rng.random_range(1..objs.len())) % objs.len();
    let (oa, ob) = (&objs[a], &objs[b]);
    let truth = index.is_multiple_of(2);
    let candidates: Vec<Relation> = Relation::ALL.into_iter().filter(|r| r.holds(oa, ob) == truth).collect();
    let relation = *candidates.choose(rng).expect("separated objects satisfy some relation and violate another");
    push(
        Probe::Spatial,
        TaskKind::Vqa,
        format!("True or false: the {} is {} the {}.", oa.phrase(), relation.phrase(), ob.phrase()),
        String::from(if truth { "True" } else { "False" }),
    )?;

    let (color, shape) = if index.is_multiple_of(2) {
        let o = objs.choose(rng).expect("nonempty scene");
        (o.color, o.shape)
    } else {
        let absent: Vec<(Color, Shape)> = Color::ALL
            .iter()
            .flat_map(|c| Shape::ALL.iter().map(move |s| (*c, *s)))
            .filter(|(c, s)| !scene.contains(*c, *s))
            .collect();
        *absent.choose(rng).expect("fewer objects than color/shape pairs")
    };
    push(
        Probe::Presence,
        TaskKind::Vqa,
        format!(
            "Is there {} {} {} in the image?",
            if color == Color::Orange { "an" } else { "a" },
            color.name(),
            shape.name()
        ),
        String::from(if index.is_multiple_of(2) { "Yes" } else { "No" }),
    )?;

    let referent = objs.choose(rng).expect("nonempty scene");
    let box_text = encode_bbox(&referent.bbox(cfg.canvas));
    push(
        Probe::Localization,
        TaskKind::Localization,
        format!("the {}", referent.phrase()),
        box_text.clone(),
    )?;
    push(
        Probe::RegionCaption,
        TaskKind::RegionCaption,
        box_text,
        format!("the {}", referent.phrase()),
    )?;
    push(Probe::Caption, TaskKind::Caption, String::new(), scene.caption())?;
    Ok(())
}

fn probe_slug(p: Probe) -> &'static str {
    match p {
        Probe::Color => "color",
        Probe::Count => "count",
        Probe::Spatial => "spatial",
        Probe::Presence => "presence",
        Probe::Localization => "loc",
        Probe::RegionCaption => "region",
        Probe::Caption => "caption",
    }
}
