//! Four-source benchmark with ETT-length segments.

use serde::{Deserialize, Serialize};

use super::dataset::TimeSeriesDataset;
use super::split::{chrono_split, SplitPart, SplitSpec, Splits};
use crate::error::{Result, VeError};

/// How donor datasets (ECL, Weather) are cut down to ETT segment lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixStrategy {
    /// Split each donor with its own ratio, then keep the head of each segment.
    /// Fails when a donor segment is shorter than the ETT one (ECL validation is).
    PerSplit,
    /// Keep the head of each donor series and cut it at the ETT row boundaries.
    #[default]
    AlignedBorders,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBlock {
    pub source: String,
    /// Inclusive zero-based first channel.
    pub first: usize,
    /// Inclusive zero-based last channel.
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    pub splits: Splits,
    pub blocks: Vec<ChannelBlock>,
}

fn validate_channels(ds: &TimeSeriesDataset, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(c) if ds.channels() != c => Err(VeError::shape(format!(
            "{} has {} channels, expected {c}",
            ds.name,
            ds.channels()
        ))),
        _ => Ok(()),
    }
}

/// Concatenates ETTh1, ETTh2, ECL and Weather channels segment by segment.
///
/// Segment lengths follow ETTh1. With the real sources the result has
/// 7 + 7 + 321 + 21 = 356 channels, ECL occupying 14..=334.
pub fn build_mixed_dataset(
    etth1: &TimeSeriesDataset,
    etth2: &TimeSeriesDataset,
    ecl: &TimeSeriesDataset,
    weather: &TimeSeriesDataset,
    strategy: MixStrategy,
) -> Result<MixedDataset> {
    let ett_spec = SplitSpec::ett();
    let reference = chrono_split(etth1, &ett_spec)?;
    let target = [reference.train.len(), reference.val.len(), reference.test.len()];

    let cut = |ds: &TimeSeriesDataset, spec: SplitSpec| -> Result<Splits> {
        let own = match strategy {
            MixStrategy::PerSplit => chrono_split(ds, &spec)?,
            MixStrategy::AlignedBorders => {
                let needed: usize = target.iter().sum();
                if ds.len() < needed {
                    return Err(VeError::InsufficientData(format!(
                        "{} has {} rows, the ETT reference needs {needed}",
                        ds.name,
                        ds.len()
                    )));
                }
                let (a, b) = (target[0], target[0] + target[1]);
                Splits {
                    train: ds.slice_rows(0..a),
                    val: ds.slice_rows(a..b),
                    test: ds.slice_rows(b..needed),
                }
            }
        };
        let parts = [SplitPart::Train, SplitPart::Val, SplitPart::Test];
        let mut truncated = Vec::with_capacity(3);
        for (part, &len) in parts.iter().zip(&target) {
            let seg = own.part(*part);
            if seg.len() < len {
                return Err(VeError::InsufficientData(format!(
                    "{} {:?} segment has {} rows, ETT segment has {len}",
                    ds.name,
                    part,
                    seg.len()
                )));
            }
            truncated.push(seg.slice_rows(0..len));
        }
        let mut it = truncated.into_iter();
        Ok(Splits {
            train: it.next().unwrap(),
            val: it.next().unwrap(),
            test: it.next().unwrap(),
        })
    };

    validate_channels(etth2, Some(etth1.channels()))?;
    let sources = [
        ("ETTh1", reference.clone()),
        ("ETTh2", cut(etth2, ett_spec)?),
        ("ECL", cut(ecl, SplitSpec::standard())?),
        ("Weather", cut(weather, SplitSpec::standard())?),
    ];
    let originals = [etth1, etth2, ecl, weather];

    let mut blocks = Vec::with_capacity(4);
    let mut offset = 0;
    for ((label, _), ds) in sources.iter().zip(originals) {
        blocks.push(ChannelBlock {
            source: (*label).to_string(),
            first: offset,
            last: offset + ds.channels() - 1,
        });
        offset += ds.channels();
    }

    let join = |part: SplitPart| -> Result<TimeSeriesDataset> {
        let parts: Vec<TimeSeriesDataset> = sources
            .iter()
            .map(|(label, s)| {
                let mut seg = s.part(part).clone();
                seg.name = (*label).to_string();
                seg
            })
            .collect();
        let refs: Vec<&TimeSeriesDataset> = parts.iter().collect();
        TimeSeriesDataset::concat_channels("mixed", &refs)
    };
    Ok(MixedDataset {
        splits: Splits {
            train: join(SplitPart::Train)?,
            val: join(SplitPart::Val)?,
            test: join(SplitPart::Test)?,
        },
        blocks,
    })
}

/// Evenly spaced channel indices keeping roughly `fraction` of `channels` (at least one).
pub fn subsample_channels(channels: usize, fraction: f64) -> Vec<usize> {
    let keep = ((channels as f64 * fraction).round() as usize).clamp(1, channels.max(1));
    let step = channels as f64 / keep as f64;
    (0..keep).map(|i| ((i as f64 * step).floor() as usize).min(channels - 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RealMatrix;

    fn source(name: &str, rows: usize, channels: usize) -> TimeSeriesDataset {
        let m = RealMatrix::from_fn(rows, channels, |t, c| (t * 1000 + c) as f64);
        let mut ds = TimeSeriesDataset::unnamed(name, m).unwrap();
        ds.name = name.into();
        ds
    }

    #[test]
    fn small_mix_layout_and_lengths() {
        // shapes scaled down by 100 from the real sources
        let (h1, h2) = (source("ETTh1", 174, 7), source("ETTh2", 174, 7));
        let ecl = source("ECL", 263, 5);
        let weather = source("weather", 526, 3);
        let mix = build_mixed_dataset(&h1, &h2, &ecl, &weather, MixStrategy::AlignedBorders).unwrap();
        let s = &mix.splits;
        assert_eq!(s.train.channels(), 22);
        let reference = chrono_split(&h1, &SplitSpec::ett()).unwrap();
        assert_eq!(s.train.len(), reference.train.len());
        assert_eq!(s.val.len(), reference.val.len());
        assert_eq!(s.test.len(), reference.test.len());
        assert_eq!(mix.blocks[2], ChannelBlock { source: "ECL".into(), first: 14, last: 18 });
        // ECL channel 0 of the first val row is ECL row = ETT train length (aligned borders)
        assert_eq!(s.val.values.get(0, 14), (reference.train.len() * 1000) as f64);
    }

    #[test]
    fn per_split_keeps_donor_segment_heads() {
        let (h1, h2) = (source("ETTh1", 100, 1), source("ETTh2", 100, 1));
        let ecl = source("ECL", 1000, 1);
        let weather = source("weather", 1000, 1);
        let mix = build_mixed_dataset(&h1, &h2, &ecl, &weather, MixStrategy::PerSplit).unwrap();
        // ECL val segment starts at its own 7:1:2 boundary, 700
        assert_eq!(mix.splits.val.values.get(0, 2), 700_000.0);
        assert_eq!(mix.splits.val.len(), 20);
    }

    #[test]
    fn per_split_fails_when_donor_segment_is_short() {
        // ECL at its real length: 10% validation is 2630 rows < 3484 ETT rows
        let (h1, h2) = (source("ETTh1", 17420, 1), source("ETTh2", 17420, 1));
        let ecl = source("ECL", 26304, 1);
        let weather = source("weather", 52696, 1);
        let err = build_mixed_dataset(&h1, &h2, &ecl, &weather, MixStrategy::PerSplit).unwrap_err();
        assert!(matches!(err, VeError::InsufficientData(_)));
        assert!(build_mixed_dataset(&h1, &h2, &ecl, &weather, MixStrategy::AlignedBorders).is_ok());
    }

    #[test]
    fn reordering_sources_reorders_channels() {
        let (h1, h2) = (source("ETTh1", 100, 2), source("ETTh2", 100, 2));
        let ecl = source("ECL", 200, 1);
        let weather = source("weather", 200, 1);
        let a = build_mixed_dataset(&h1, &h2, &ecl, &weather, MixStrategy::AlignedBorders).unwrap();
        let b = build_mixed_dataset(&h2, &h1, &ecl, &weather, MixStrategy::AlignedBorders).unwrap();
        for t in 0..a.splits.train.len() {
            let (ra, rb) = (a.splits.train.values.row(t), b.splits.train.values.row(t));
            assert_eq!(&ra[0..2], &rb[2..4]);
            assert_eq!(&ra[2..4], &rb[0..2]);
            assert_eq!(&ra[4..], &rb[4..]);
        }
    }

    #[test]
    fn subsample_is_evenly_spaced() {
        assert_eq!(subsample_channels(356, 0.01), vec![0, 89, 178, 267]);
        assert_eq!(subsample_channels(7, 0.01), vec![0]);
    }
}
