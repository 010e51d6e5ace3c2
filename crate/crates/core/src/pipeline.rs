//! Glue between the stages: preprocess, patch, encode, run, decode, stitch.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{patch, stitch_grid, Patch, Spectrogram, PATCH_SIZE};
use crate::encoding::{
    decode, encode, encode_target, Decoded, EncoderSpec, Method, SpikeTrain, Target,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pixels, EvalReport};
use crate::network::{Mode, Network};
use crate::preprocess::{divisive_normalise, scale, DivNormSpec, ScalingSpec};

/// Preprocessing applied to every spectrogram before encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub scaling: ScalingSpec,
    /// Divisive normalisation, skipped when absent.
    pub divnorm: Option<DivNormSpec>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            scaling: ScalingSpec::HERA,
            divnorm: Some(DivNormSpec::default()),
        }
    }
}

impl PreprocessConfig {
    pub fn without_divnorm(mut self) -> Self {
        self.divnorm = None;
        self
    }
}

pub fn preprocess(s: &Spectrogram, cfg: &PreprocessConfig) -> Result<Spectrogram> {
    let scaled = scale(s, &cfg.scaling)?;
    match &cfg.divnorm {
        Some(dn) => divisive_normalise(&scaled, dn),
        None => Ok(scaled),
    }
}

/// One training or evaluation example.
#[derive(Clone, Debug)]
pub struct Sample {
    pub patch: Patch,
    pub input: SpikeTrain,
    pub target: Target,
}

/// Preprocesses, patches and encodes a spectrogram.
pub fn prepare(s: &Spectrogram, pre: &PreprocessConfig, enc: &EncoderSpec) -> Result<Vec<Sample>> {
    let p = preprocess(s, pre)?;
    patch(&p, PATCH_SIZE)?
        .into_iter()
        .map(|patch| {
            let input = encode(&patch, enc)?;
            let target = encode_target(patch.mask.view(), enc);
            Ok(Sample {
                patch,
                input,
                target,
            })
        })
        .collect()
}

/// Checks that a network's widths fit the encoder on 32-channel patches.
pub fn check_widths(net: &Network, enc: &EncoderSpec) -> Result<()> {
    let want_in = enc.method.input_width(PATCH_SIZE);
    let want_out = enc.method.output_width(PATCH_SIZE);
    if net.spec.input_width != want_in || net.spec.output_width != want_out {
        return Err(Error::Width(format!(
            "{} encoding needs {want_in} inputs and {want_out} outputs, network has {} and {}",
            enc.method, net.spec.input_width, net.spec.output_width
        )));
    }
    Ok(())
}

/// Runs the network on one encoded patch and decodes its output.
pub fn run_patch(net: &Network, enc: &EncoderSpec, input: &SpikeTrain) -> Result<Decoded> {
    let tape = net.forward(input, Mode::Surrogate)?;
    let out = tape.output_spikes(enc.effective_exposure(), enc.method == Method::Delta)?;
    decode(&out, enc)
}

/// Flags a whole spectrogram; scores and flags are stitched from patches.
pub fn infer(
    net: &Network,
    enc: &EncoderSpec,
    pre: &PreprocessConfig,
    s: &Spectrogram,
) -> Result<Decoded> {
    check_widths(net, enc)?;
    let samples = prepare(s, pre, enc)?;
    let decoded: Vec<Decoded> = samples
        .par_iter()
        .map(|x| run_patch(net, enc, &x.input))
        .collect::<Result<_>>()?;
    let (f, t) = s.dim();
    let origins: Vec<_> = samples.iter().map(|x| x.patch.origin).collect();
    let flags: Vec<_> = origins
        .iter()
        .zip(&decoded)
        .map(|(&o, d)| (o, &d.flags))
        .collect();
    let scores: Vec<_> = origins
        .iter()
        .zip(&decoded)
        .map(|(&o, d)| (o, &d.scores))
        .collect();
    Ok(Decoded {
        flags: stitch_grid(&flags, f, t)?,
        scores: stitch_grid(&scores, f, t)?,
    })
}

/// Inference over a set of spectrograms, pooled into one report.
pub fn evaluate_dataset(
    net: &Network,
    enc: &EncoderSpec,
    pre: &PreprocessConfig,
    specs: &[Spectrogram],
) -> Result<(EvalReport, Vec<Decoded>)> {
    let outs: Vec<Decoded> = specs
        .iter()
        .map(|s| infer(net, enc, pre, s))
        .collect::<Result<_>>()?;
    let flags = outs.iter().flat_map(|d| d.flags.iter().copied());
    let pixels = outs
        .iter()
        .zip(specs)
        .flat_map(|(d, s)| d.scores.iter().copied().zip(s.mask.iter().copied()))
        .collect();
    let mut report = evaluate_pixels(flags, pixels)?;
    report.threshold_used = enc.score_threshold();
    Ok((report, outs))
}

/// Per-pixel residual between a decoded mask and the ground truth:
/// +1 false positive, -1 false negative, 0 agreement.
pub fn residual(flags: &Array2<bool>, mask: &Array2<bool>) -> Array2<f32> {
    ndarray::Zip::from(flags)
        .and(mask)
        .map_collect(|&f, &m| f32::from(u8::from(f)) - f32::from(u8::from(m)))
}
