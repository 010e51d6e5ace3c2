use serde::{Deserialize, Serialize};

use super::{Dataset, Spectrogram};
use crate::error::{Error, Result};

/// Max, mean and median of a set of pixel values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    fn of(mut xs: Vec<f64>) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let median = if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        };
        Some(Summary {
            max: xs[n - 1],
            mean: xs.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

/// Statistics of masked ("noisy") and unmasked ("noiseless") pixels.
///
/// A class with no pixels is reported as `None`, as is the difference row
/// when either side is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub noisy: Option<Summary>,
    pub noiseless: Option<Summary>,
    /// Absolute differences between the two classes.
    pub difference: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub train: Option<SplitStats>,
    pub test: Option<SplitStats>,
}

pub fn split_stats(split: &[Spectrogram]) -> Result<SplitStats> {
    if split.is_empty() {
        return Err(Error::Precondition("statistics of an empty split".into()));
    }
    let mut noisy = Vec::new();
    let mut clean = Vec::new();
    for s in split {
        for (&v, &m) in s.values.iter().zip(s.mask.iter()) {
            if m {
                noisy.push(v as f64);
            } else {
                clean.push(v as f64);
            }
        }
    }
    let noisy = Summary::of(noisy);
    let noiseless = Summary::of(clean);
    let difference = match (noisy, noiseless) {
        (Some(a), Some(b)) => Some(Summary {
            max: (a.max - b.max).abs(),
            mean: (a.mean - b.mean).abs(),
            median: (a.median - b.median).abs(),
        }),
        _ => None,
    };
    Ok(SplitStats {
        noisy,
        noiseless,
        difference,
    })
}

/// Per-split statistics; empty splits are skipped and reported as `None`.
pub fn dataset_stats(d: &Dataset) -> Result<DatasetStats> {
    if d.train.is_empty() && d.test.is_empty() {
        return Err(Error::Precondition("dataset has no spectrograms".into()));
    }
    let opt = |s: &[Spectrogram]| {
        if s.is_empty() {
            Ok(None)
        } else {
            split_stats(s).map(Some)
        }
    };
    Ok(DatasetStats {
        train: opt(&d.train)?,
        test: opt(&d.test)?,
    })
}
