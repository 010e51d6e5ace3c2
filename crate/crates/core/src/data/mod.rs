//! Spectrograms, patches and datasets.
//!
//! A [`Spectrogram`] is a frequency × time grid of real magnitudes paired
//! with a boolean RFI mask of the same shape. Training operates on square
//! [`Patch`]es cut from spectrograms; model output is stitched back into a
//! full-size grid before scoring.

mod container;
mod stats;
mod synth;

use std::collections::BTreeMap;

use ndarray::{s, Array2};

use crate::error::{Error, Result};

pub use container::{
    read_container, read_tensor, write_container, write_tensor, DType, Tensor, TensorData,
    TensorRole,
};
pub use stats::{dataset_stats, split_stats, DatasetStats, SplitStats, Summary};
pub use synth::{generate_synthetic, generate_with, SynthConfig};

/// Default patch edge length.
pub const PATCH_SIZE: usize = 32;

/// A frequency × time magnitude image with its RFI mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    /// Magnitudes, shape `[F, T]`.
    pub values: Array2<f32>,
    /// RFI flags, shape `[F, T]`; `true` marks contaminated pixels.
    pub mask: Array2<bool>,
    /// Free-form annotations (source, preprocessing applied, ...).
    pub meta: BTreeMap<String, String>,
}

impl Spectrogram {
    pub fn new(values: Array2<f32>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Dimension(format!(
                "values {:?} and mask {:?} differ",
                values.dim(),
                mask.dim()
            )));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Dimension("spectrogram must be at least 1x1".into()));
        }
        Ok(Self {
            values,
            mask,
            meta: BTreeMap::new(),
        })
    }

    /// Number of frequency channels.
    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        self.values.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Fraction of pixels flagged in the mask.
    pub fn mask_density(&self) -> f64 {
        let n = self.mask.iter().filter(|&&m| m).count();
        n as f64 / self.mask.len() as f64
    }
}

/// A square tile of a spectrogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub values: Array2<f32>,
    pub mask: Array2<bool>,
    /// `(frequency offset, time offset)` of the tile in its parent.
    pub origin: (usize, usize),
}

impl Patch {
    pub fn size(&self) -> usize {
        self.values.nrows()
    }
}

/// Train and test splits of spectrograms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Spectrogram>,
    pub test: Vec<Spectrogram>,
    pub seed: Option<u64>,
}

impl Dataset {
    /// Applies `f` to every spectrogram in both splits.
    pub fn try_map<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&Spectrogram) -> Result<Spectrogram>,
    {
        Ok(Dataset {
            train: self.train.iter().map(&mut f).collect::<Result<_>>()?,
            test: self.test.iter().map(&mut f).collect::<Result<_>>()?,
            seed: self.seed,
        })
    }
}

fn check_divisible(f: usize, t: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Dimension("patch size must be positive".into()));
    }
    if !f.is_multiple_of(p) || !t.is_multiple_of(p) {
        return Err(Error::Dimension(format!(
            "{f}x{t} is not divisible into {p}x{p} patches"
        )));
    }
    Ok(())
}

/// Tile origins for an `f × t` grid cut into `p × p` patches, frequency-major.
pub fn patch_origins(f: usize, t: usize, p: usize) -> Result<Vec<(usize, usize)>> {
    check_divisible(f, t, p)?;
    let mut origins = Vec::with_capacity((f / p) * (t / p));
    for fo in (0..f).step_by(p) {
        for to in (0..t).step_by(p) {
            origins.push((fo, to));
        }
    }
    Ok(origins)
}

/// Cuts a spectrogram into non-overlapping `p × p` patches.
///
/// Patches are returned frequency-major: all time offsets of the first band
/// of `p` channels come first. No padding is applied; both dimensions must
/// be divisible by `p`.
pub fn patch(s: &Spectrogram, p: usize) -> Result<Vec<Patch>> {
    let (f, t) = s.dim();
    Ok(patch_origins(f, t, p)?
        .into_iter()
        .map(|(fo, to)| Patch {
            values: s.values.slice(s![fo..fo + p, to..to + p]).to_owned(),
            mask: s.mask.slice(s![fo..fo + p, to..to + p]).to_owned(),
            origin: (fo, to),
        })
        .collect())
}

/// Reassembles tiles addressed by their origins into an `f × t` grid.
///
/// Every cell must be covered exactly once. Tile order does not matter.
pub fn stitch_grid<T: Clone + Default>(
    tiles: &[((usize, usize), &Array2<T>)],
    f: usize,
    t: usize,
) -> Result<Array2<T>> {
    let mut out = Array2::<T>::default((f, t));
    let mut covered = Array2::<bool>::from_elem((f, t), false);
    for &((fo, to), tile) in tiles {
        let (pf, pt) = tile.dim();
        if fo + pf > f || to + pt > t {
            return Err(Error::Coverage(format!(
                "tile at ({fo}, {to}) of size {pf}x{pt} exceeds {f}x{t}"
            )));
        }
        let mut cover = covered.slice_mut(s![fo..fo + pf, to..to + pt]);
        if cover.iter().any(|&c| c) {
            return Err(Error::Coverage(format!("tile at ({fo}, {to}) overlaps")));
        }
        cover.fill(true);
        out.slice_mut(s![fo..fo + pf, to..to + pt]).assign(tile);
    }
    if let Some(((fi, ti), _)) = covered.indexed_iter().find(|(_, &c)| !c) {
        return Err(Error::Coverage(format!("cell ({fi}, {ti}) is not covered")));
    }
    Ok(out)
}

/// Inverse of [`patch`]: rebuilds an `f × t` spectrogram from its tiles.
pub fn stitch(patches: &[Patch], f: usize, t: usize) -> Result<Spectrogram> {
    if let Some(first) = patches.first() {
        let p = first.size();
        for pt in patches {
            if pt.values.dim() != (p, p) || pt.mask.dim() != (p, p) {
                return Err(Error::Coverage("patches differ in size".into()));
            }
            if pt.origin.0 % p != 0 || pt.origin.1 % p != 0 {
                return Err(Error::Coverage(format!(
                    "origin {:?} is not a multiple of {p}",
                    pt.origin
                )));
            }
        }
    }
    let values: Vec<_> = patches.iter().map(|p| (p.origin, &p.values)).collect();
    let mask: Vec<_> = patches.iter().map(|p| (p.origin, &p.mask)).collect();
    Spectrogram::new(stitch_grid(&values, f, t)?, stitch_grid(&mask, f, t)?)
}
