use crate::error::{Result, VeError};

/// Default moving-average window of the trend/seasonal decomposition.
pub const DEFAULT_KERNEL: usize = 25;

/// Centered moving average with the series' end values replicated as padding.
pub fn moving_average(x: &[f64], kernel: usize) -> Result<Vec<f64>> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(VeError::Config(format!("moving-average kernel must be odd and positive, got {kernel}")));
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = kernel / 2;
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    let mut sum: f64 = (-(half as isize)..=half as isize).map(at).sum();
    let mut out = Vec::with_capacity(n);
    out.push(sum / kernel as f64);
    for i in 1..n as isize {
        sum += at(i + half as isize) - at(i - 1 - half as isize);
        out.push(sum / kernel as f64);
    }
    Ok(out)
}

/// `(trend, seasonal)` with `seasonal = x - trend`.
pub fn decompose(x: &[f64], kernel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let trend = moving_average(x, kernel)?;
    let seasonal = x.iter().zip(&trend).map(|(a, b)| a - b).collect();
    Ok((trend, seasonal))
}
