use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::table::{ModelKey, ScoreTable};
use super::zscore::aggregate;
use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.01;

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // the fraction converges fast only below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub t: f64,
    pub df: usize,
    /// `P(T ≥ t)` under the null of zero mean.
    pub p: f64,
}

/// One-sided one-sample t test of `mean(d) > 0`. `None` when `n < 2` or the
/// sample has zero variance.
pub fn one_sided_t_test(d: &[f64]) -> Option<TTest> {
    let n = d.len();
    if n < 2 {
        return None;
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var.is_nan() || var <= 0.0 {
        return None;
    }
    let t = mean / libm::sqrt(var / n as f64);
    let df = n - 1;
    let tail = 0.5 * regularized_incomplete_beta(df as f64 / (df as f64 + t * t), df as f64 / 2.0, 0.5);
    let p = if t >= 0.0 { tail } else { 1.0 - tail };
    Some(TTest { n, mean, t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Significant,
    NotSignificant,
    InsufficientData,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Significant => "significant",
            Verdict::NotSignificant => "not significant",
            Verdict::InsufficientData => "insufficient data",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignificanceResult {
    /// Name of the procedure as usually cited; computed as a one-sided
    /// one-sample t test on the pairwise differences.
    pub test: String,
    pub base: Vec<ModelKey>,
    pub alternate: Vec<ModelKey>,
    /// `aggregate(alt) - aggregate(base)` for every (base, alt) pair, base-major.
    pub differences: Vec<f64>,
    pub t: Option<f64>,
    pub df: Option<usize>,
    pub p: Option<f64>,
    pub verdict: Verdict,
}

pub fn compare(
    base: &[ModelKey],
    alternate: &[ModelKey],
    z: &ScoreTable,
    subset: Option<&[String]>,
) -> Result<SignificanceResult> {
    if base.is_empty() || alternate.is_empty() {
        return Err(Error::InvalidArgument("base and alternate sets must be nonempty".into()));
    }
    if let Some(m) = base.iter().find(|m| alternate.contains(m)) {
        return Err(Error::InvalidArgument(format!("{m} is in both the base and alternate sets")));
    }
    let aggs = aggregate(z, subset)?;
    let score = |key: &ModelKey| -> Result<f64> {
        aggs.iter()
            .find(|a| &a.model == key)
            .map(|a| a.score)
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: format!("{key}"),
            })
    };
    let mut differences = Vec::with_capacity(base.len() * alternate.len());
    for b in base {
        let sb = score(b)?;
        for a in alternate {
            differences.push(score(a)? - sb);
        }
    }
    let test = one_sided_t_test(&differences);
    let verdict = match test {
        None => Verdict::InsufficientData,
        Some(t) if t.p < ALPHA => Verdict::Significant,
        Some(_) => Verdict::NotSignificant,
    };
    Ok(SignificanceResult {
        test: "1-sided Fisher T-test".into(),
        base: base.to_vec(),
        alternate: alternate.to_vec(),
        differences,
        t: test.map(|t| t.t),
        df: test.map(|t| t.df),
        p: test.map(|t| t.p),
        verdict,
    })
}
