use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned box in normalized `[0, 1]` image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| 0.0 <= lo && lo <= hi && hi <= 1.0;
        if ok(self.x_min, self.x_max) && ok(self.y_min, self.y_max) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("box outside the unit square or inverted: {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Renders `[x_min, y_min, x_max, y_max]` with three decimals.
pub fn encode_bbox(b: &BBox) -> String {
    format!("[{:.3}, {:.3}, {:.3}, {:.3}]", b.x_min, b.y_min, b.x_max, b.y_max)
}

pub fn decode_bbox(text: &str) -> Result<BBox> {
    let fail = || Error::Parse(format!("not a bounding box: {text:?}"));
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(fail)?;
    let coords: Vec<f64> = inner
        .split(',')
        .map(|part| {
            let part = part.trim();
            let numeric = !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b'-');
            if !numeric {
                return Err(fail());
            }
            part.parse::<f64>().map_err(|_| fail())
        })
        .collect::<Result<_>>()?;
    if coords.len() != 4 {
        return Err(fail());
    }
    BBox::new(coords[0], coords[1], coords[2], coords[3]).map_err(|_| fail())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_three_decimals() {
        let b = BBox::new(0.12, 0.34, 0.56, 0.78).unwrap();
        assert_eq!(encode_bbox(&b), "[0.120, 0.340, 0.560, 0.780]");
    }

    #[test]
    fn malformed_text_fails() {
        for bad in ["cat", "", "[0.1, 0.2, 0.3]", "[0.1, 0.2, 0.3, 0.4, 0.5]", "[0.5, 0.2, 0.3, 0.4]", "[a, b, c, d]", "(0.1, 0.2, 0.3, 0.4)", "[0.1, 0.2, 0.3, 1.4]", "[nan, 0.2, 0.3, 0.4]"] {
            assert!(matches!(decode_bbox(bad), Err(Error::Parse(_))), "{bad}");
        }
        assert!(decode_bbox(" [0.1,0.2,0.3,0.4] ").is_ok());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b, c, d)| BBox {
            x_min: a.min(c),
            x_max: a.max(c),
            y_min: b.min(d),
            y_max: b.max(d),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_within_half_a_thousandth(b in arb_box()) {
            let back = decode_bbox(&encode_bbox(&b)).unwrap();
            for (x, y) in [(b.x_min, back.x_min), (b.y_min, back.y_min), (b.x_max, back.x_max), (b.y_max, back.y_max)] {
                prop_assert!((x - y).abs() <= 5e-4 + 1e-12);
            }
            // rendered values re-encode to the same text
            prop_assert_eq!(encode_bbox(&back), encode_bbox(&b));
        }
    }
}
