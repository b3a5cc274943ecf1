use alloc::format;

use crate::error::{Error, Result};

pub fn warmup_steps(warmup_ratio: f64, total_steps: usize) -> usize {
    libm::round(warmup_ratio * total_steps as f64) as usize
}

/// Linear warmup from 0 to `peak`, then cosine decay to exactly 0 at `total_steps`.
pub fn lr_at(peak: f64, warmup_ratio: f64, step: usize, total_steps: usize) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    let warmup = warmup_steps(warmup_ratio, total_steps);
    if step < warmup {
        return Ok(peak * step as f64 / warmup as f64);
    }
    if total_steps == warmup {
        return Ok(peak);
    }
    let progress = (step - warmup) as f64 / (total_steps - warmup) as f64;
    Ok(peak * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress)))
}
