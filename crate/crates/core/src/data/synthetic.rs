//! Generated datasets for tests, demos and shape-faithful stand-ins.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::TimeSeriesDataset;
use crate::numeric::RealMatrix;

/// `channels` phase-shifted sinusoids with a common period.
pub fn sine_dataset(rows: usize, channels: usize, period: f64) -> TimeSeriesDataset {
    let m = RealMatrix::from_fn(rows, channels, |t, c| {
        (2.0 * PI * (t as f64 + 3.0 * c as f64) / period).sin()
    });
    TimeSeriesDataset::unnamed("sine", m).expect("nonempty")
}

/// Pattern family of a variate in [`grouped_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Sine,
    Sawtooth,
    Ar1,
}

/// Twelve variates in three groups of four: period-24 sines, period-24
/// sawtooths and AR(1) noise. Members of a group differ in phase and scale.
pub fn grouped_dataset(steps: usize, seed: u64) -> (TimeSeriesDataset, Vec<Pattern>) {
    const PERIOD: f64 = 24.0;
    const AR_COEF: f64 = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid");
    let mut patterns = Vec::with_capacity(12);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(12);
    for group in [Pattern::Sine, Pattern::Sawtooth, Pattern::Ar1] {
        for member in 0..4 {
            let phase = rng.random_range(0.0..PERIOD);
            let scale = 1.0 + 0.25 * member as f64;
            let col: Vec<f64> = match group {
                Pattern::Sine => (0..steps)
                    .map(|t| scale * (2.0 * PI * (t as f64 + phase) / PERIOD).sin())
                    .collect(),
                Pattern::Sawtooth => (0..steps)
                    .map(|t| {
                        let u = ((t as f64 + phase) / PERIOD).fract();
                        scale * (2.0 * u - 1.0)
                    })
                    .collect(),
                Pattern::Ar1 => {
                    let mut x = 0.0;
                    (0..steps)
                        .map(|_| {
                            x = AR_COEF * x + noise.sample(&mut rng);
                            scale * x
                        })
                        .collect()
                }
            };
            patterns.push(group);
            columns.push(col);
        }
    }
    let m = RealMatrix::from_fn(steps, 12, |t, c| columns[c][t]);
    let names = patterns
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{p:?}{}", i % 4).to_lowercase())
        .collect();
    let ds = TimeSeriesDataset::new("grouped", m, names).expect("nonempty");
    (ds, patterns)
}

/// `YYYY-MM-DD hh:mm:ss` for minutes since 1970-01-01.
pub fn format_timestamp(minutes: i64) -> String {
    let days = minutes.div_euclid(1440);
    let rem = minutes.rem_euclid(1440);
    // civil_from_days
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02} {:02}:{:02}:00", rem / 60, rem % 60)
}

/// Stand-in with the row count, channel count and sampling interval of a
/// public benchmark: daily and weekly cycles plus AR(1) noise per channel.
pub fn standin_dataset(
    name: &str,
    rows: usize,
    channels: usize,
    step_minutes: i64,
    start_minutes: i64,
    seed: u64,
) -> TimeSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).expect("valid");
    let per_day = (1440 / step_minutes).max(1) as f64;
    let params: Vec<(f64, f64, f64, f64)> = (0..channels)
        .map(|_| {
            (
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..per_day),
                rng.random_range(0.0..0.5),
                rng.random_range(-3.0..3.0),
            )
        })
        .collect();
    let mut state = vec![0.0; channels];
    let mut data = Vec::with_capacity(rows * channels);
    for t in 0..rows {
        let tf = t as f64;
        for (c, &(amp, phase, weekly, level)) in params.iter().enumerate() {
            state[c] = 0.8 * state[c] + noise.sample(&mut rng);
            let daily = amp * (2.0 * PI * (tf + phase) / per_day).sin();
            let week = weekly * (2.0 * PI * tf / (7.0 * per_day)).sin();
            data.push(level + daily + week + state[c]);
        }
    }
    let m = RealMatrix::from_vec(rows, channels, data).expect("sized");
    let names = (0..channels).map(|c| format!("{name}_{c}")).collect();
    let mut ds = TimeSeriesDataset::new(name, m, names).expect("nonempty");
    ds.timestamps = (0..rows as i64)
        .map(|t| format_timestamp(start_minutes + t * step_minutes))
        .collect();
    ds.granularity = if step_minutes % 60 == 0 {
        format!("{}hour", step_minutes / 60)
    } else {
        format!("{step_minutes}min")
    };
    ds
}
