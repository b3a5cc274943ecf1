use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{decode_bbox, BBox};

/// Intersection over union; 0 when the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Lowercase, drop punctuation (keeping decimal points inside numbers),
/// collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut kept = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii_punctuation() {
            let decimal = c == '.'
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if !decimal {
                continue;
            }
        }
        kept.extend(c.to_lowercase());
    }
    let mut out = String::with_capacity(kept.len());
    for word in kept.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Open-ended answer accuracy. With ten or more references the consensus
/// rule `min(matches / 3, 1)` applies; otherwise any exact match scores 1.
pub fn score_vqa(prediction: &str, references: &[String]) -> f64 {
    let pred = normalize_answer(prediction);
    if pred.is_empty() || references.is_empty() {
        return 0.0;
    }
    let matches = references.iter().filter(|r| normalize_answer(r) == pred).count();
    if references.len() >= 10 {
        (matches as f64 / 3.0).min(1.0)
    } else if matches > 0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationScore {
    pub score: f64,
    pub iou: Option<f64>,
    pub parse_failure: bool,
}

pub fn score_localization(prediction: &str, gt: &BBox, threshold: f64) -> LocalizationScore {
    match decode_bbox(prediction) {
        Ok(b) => {
            let v = iou(&b, gt);
            LocalizationScore {
                score: if v >= threshold { 1.0 } else { 0.0 },
                iou: Some(v),
                parse_failure: false,
            }
        }
        Err(_) => LocalizationScore {
            score: 0.0,
            iou: None,
            parse_failure: true,
        },
    }
}

/// Index of the option a prediction names, by option text first and then
/// by option letter.
pub fn resolve_option(prediction: &str, options: &[String]) -> Option<usize> {
    let pred = normalize_answer(prediction);
    if pred.is_empty() {
        return None;
    }
    if let Some(i) = options.iter().position(|o| normalize_answer(o) == pred) {
        return Some(i);
    }
    let mut letters = pred.chars();
    match (letters.next(), letters.next()) {
        (Some(c), None) if c.is_ascii_lowercase() => {
            let i = (c as u8 - b'a') as usize;
            (i < options.len()).then_some(i)
        }
        _ => None,
    }
}

pub fn score_closed_set(prediction: &str, gold: &str, options: &[String]) -> f64 {
    match (resolve_option(prediction, options), options.iter().position(|o| o == gold)) {
        (Some(p), Some(g)) if p == g => 1.0,
        _ => 0.0,
    }
}
