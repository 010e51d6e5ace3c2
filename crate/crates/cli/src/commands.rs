use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use spikeflag::data::{
    generate_with, patch, read_container, read_tensor, write_container, write_tensor, Dataset,
    Spectrogram, Tensor, TensorData, TensorRole, PATCH_SIZE,
};
use spikeflag::deploy::estimate_deployment;
use spikeflag::encoding::{
    encode as encode_patch, encode_target, EncoderSpec, Method, SpikeTrain, Target,
};
use spikeflag::network::{load_checkpoint, save_checkpoint, Checkpoint, Network};
use spikeflag::pipeline::{check_widths, evaluate_dataset, residual, PreprocessConfig};
use spikeflag::plot::{bitmap, curve_pixmap, graymap, graymap_range, write_image};
use spikeflag::training::{sweep as run_sweep, write_trial_table, SweepBase};
use spikeflag::{pipeline, training, Error, Result};

use crate::config::RunConfig;
use crate::Pick;

/// Marks spectrograms written by `preprocess` so they are not scaled twice.
const PREPROCESSED: &str = "preprocessed";

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serialises") + "\n";
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("no {what} given")))
}

/// Reads a raw dataset, refusing one that has already been preprocessed.
fn dataset(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<Dataset> {
    let dir = required(
        flag,
        &cfg.paths.dataset,
        "dataset (--data or paths.dataset)",
    )?;
    let d = read_container(&dir)?;
    if d.train
        .iter()
        .chain(&d.test)
        .any(|s| s.meta.contains_key(PREPROCESSED))
    {
        return Err(Error::Config(format!(
            "{} is already preprocessed; pass the raw dataset",
            dir.display()
        )));
    }
    Ok(d)
}

fn pick<'a>(d: &'a Dataset, split: &str, index: usize) -> Result<&'a Spectrogram> {
    let s = if split == "train" { &d.train } else { &d.test };
    s.get(index).ok_or_else(|| {
        Error::Config(format!(
            "{split} split has {} spectrograms, index {index}",
            s.len()
        ))
    })
}

fn raster(t: &SpikeTrain) -> Vec<u8> {
    bitmap(t.bits.mapv(|b| b == 1).view())
}

/// Network, encoder and preprocessing to evaluate with. A checkpoint's own
/// settings win over the run configuration.
fn model(
    cfg: &RunConfig,
    checkpoint: Option<PathBuf>,
) -> Result<(Network, EncoderSpec, PreprocessConfig)> {
    let Some(dir) = checkpoint.or_else(|| cfg.paths.checkpoint.clone()) else {
        return Ok((
            Network::new(cfg.network_spec())?,
            cfg.encoder.clone(),
            cfg.preprocess.clone(),
        ));
    };
    let ck = load_checkpoint(&dir)?;
    let field = |k: &str| ck.extra.get(k).cloned();
    let enc = match field("encoder") {
        Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?,
        None => cfg.encoder.clone(),
    };
    let pre = match field("preprocess") {
        Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?,
        None => cfg.preprocess.clone(),
    };
    Ok((ck.network, enc, pre))
}

pub fn generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let c = &cfg.data;
    let d = generate_with(
        &c.synth,
        c.count,
        c.channels,
        c.steps,
        c.contamination,
        cfg.seed,
    )?;
    write_container(&d, out)?;
    eprintln!(
        "wrote {} train and {} test spectrograms to {}",
        d.train.len(),
        d.test.len(),
        out.display()
    );
    Ok(())
}

pub fn preprocess(cfg: &RunConfig, data: Option<PathBuf>, out: &Path) -> Result<()> {
    let d = dataset(cfg, data)?;
    let tag = serde_json::to_string(&cfg.preprocess).expect("plain data serialises");
    let p = d.try_map(|s| {
        let mut p = pipeline::preprocess(s, &cfg.preprocess)?;
        p.meta.insert(PREPROCESSED.into(), tag.clone());
        Ok(p)
    })?;
    write_container(&p, out)
}

pub fn encode(
    cfg: &RunConfig,
    data: Option<PathBuf>,
    p: &Pick,
    all_methods: bool,
    out: &Path,
) -> Result<()> {
    let d = dataset(cfg, data)?;
    let s = pipeline::preprocess(pick(&d, &p.split, p.index)?, &cfg.preprocess)?;
    let patches = patch(&s, PATCH_SIZE)?;
    let trains: Vec<SpikeTrain> = patches
        .iter()
        .map(|x| encode_patch(x, &cfg.encoder))
        .collect::<Result<_>>()?;
    mkdir(out)?;
    let dim = trains[0].bits.dim();
    let stacked = Tensor::from_grids_u8(
        trains.iter().map(|t| t.bits.view()),
        dim,
        TensorRole::Values,
    );
    write_tensor(&out.join("spikes.sft"), &stacked)?;
    write_image(
        &out.join("patch.pgm"),
        &graymap_range(patches[0].values.view(), 0.0, 1.0)?,
    )?;
    write_image(&out.join("raster.pbm"), &raster(&trains[0]))?;
    if let Target::Spikes(t) = encode_target(patches[0].mask.view(), &cfg.encoder) {
        write_image(&out.join("target.pbm"), &raster(&t))?;
    }
    if all_methods {
        for m in Method::ALL {
            let spec = EncoderSpec {
                method: m,
                ..cfg.encoder.clone()
            };
            let t = encode_patch(&patches[0], &spec)?;
            write_image(&out.join(format!("raster_{}.pbm", m.name())), &raster(&t))?;
        }
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, data: Option<PathBuf>, out: &Path) -> Result<()> {
    let d = dataset(cfg, data)?;
    let spec = cfg.network_spec();
    let outcome = training::train(&d, &cfg.encoder, &spec, &cfg.train, &cfg.preprocess)?;
    for r in &outcome.history.records {
        eprintln!(
            "epoch {:>3}  train {:.4}  val {:.4}  lr {:.2e}",
            r.epoch, r.train_loss, r.val_loss, r.lr
        );
    }
    let ck = Checkpoint {
        network: outcome.network,
        step: outcome.steps,
        seed: cfg.seed,
        extra: serde_json::json!({
            "encoder": cfg.encoder,
            "preprocess": cfg.preprocess,
        }),
    };
    save_checkpoint(&ck, out)?;
    outcome.history.write_jsonl(&out.join("history.jsonl"))?;
    write_json(&out.join("config.json"), cfg)
}

pub fn eval(
    cfg: &RunConfig,
    data: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    index: usize,
    out: &Path,
) -> Result<()> {
    let d = dataset(cfg, data)?;
    let s = pick(&d, "test", index)?;
    let (net, enc, pre) = model(cfg, checkpoint)?;
    check_widths(&net, &enc)?;
    let (report, outs) = evaluate_dataset(&net, &enc, &pre, &d.test)?;
    mkdir(out)?;
    write_json(&out.join("report.json"), &report)?;

    let dec = &outs[index];
    let img = |name: &str, bytes: Vec<u8>| write_image(&out.join(name), &bytes);
    img("spectrogram.pgm", graymap(s.values.view())?)?;
    img(
        "normalised.pgm",
        graymap_range(pipeline::preprocess(s, &pre)?.values.view(), 0.0, 1.0)?,
    )?;
    img(
        "inference.pgm",
        graymap_range(dec.scores.mapv(|x| x as f32).view(), 0.0, 1.0)?,
    )?;
    img("flags.pbm", bitmap(dec.flags.view()))?;
    img(
        "residual.pgm",
        graymap_range(residual(&dec.flags, &s.mask).view(), -1.0, 1.0)?,
    )?;
    img("mask.pbm", bitmap(s.mask.view()))?;
    img("roc.ppm", curve_pixmap(&report.roc_points, 256, 256)?)?;
    img("pr.ppm", curve_pixmap(&report.pr_points, 256, 256)?)?;
    println!(
        "accuracy {:.4}  auroc {}  auprc {}  f1 {:.4}",
        report.accuracy,
        fmt_opt(report.auroc),
        fmt_opt(report.auprc),
        report.f1
    );
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub fn sweep(cfg: &RunConfig, data: Option<PathBuf>, out: &Path) -> Result<()> {
    let d = dataset(cfg, data)?;
    let base = SweepBase {
        encoder: cfg.encoder.clone(),
        neuron: cfg.network.neuron,
        train: cfg.train.clone(),
        preprocess: cfg.preprocess.clone(),
        network_seed: cfg.seed,
    };
    let outcome = run_sweep(&d, &base, &cfg.sweep)?;
    mkdir(out)?;
    write_trial_table(&outcome.records, &out.join("trials.jsonl"))?;
    write_json(&out.join("winner.json"), &outcome.records[outcome.winner])
}

pub fn infer(
    cfg: &RunConfig,
    checkpoint: Option<PathBuf>,
    input: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let ck = required(
        checkpoint,
        &cfg.paths.checkpoint,
        "checkpoint (--checkpoint)",
    )?;
    let input = required(input, &cfg.paths.input, "input (--input)")?;
    let (net, enc, pre) = model(cfg, Some(ck))?;
    let t = read_tensor(&input)?;
    let TensorData::F32(v) = &t.data else {
        return Err(Error::Config(format!(
            "{} must hold f32 values",
            input.display()
        )));
    };
    let [n, f, steps] = t.shape;
    let mut flags = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for k in 0..n {
        let grid =
            Array2::from_shape_vec((f, steps), v[k * f * steps..(k + 1) * f * steps].to_vec())
                .expect("shape read from header");
        let s = Spectrogram::new(grid, Array2::from_elem((f, steps), false))?;
        let dec = pipeline::infer(&net, &enc, &pre, &s)?;
        flags.push(dec.flags.mapv(u8::from));
        scores.push(dec.scores.mapv(|x| x as f32));
    }
    mkdir(out)?;
    write_tensor(
        &out.join("flags.sft"),
        &Tensor::from_grids_u8(flags.iter().map(|g| g.view()), (f, steps), TensorRole::Mask),
    )?;
    write_tensor(
        &out.join("scores.sft"),
        &Tensor::from_grids_f32(scores.iter().map(|g| g.view()), (f, steps)),
    )?;
    if let Some(first) = flags.first() {
        write_image(
            &out.join("flags.pbm"),
            &bitmap(first.mapv(|b| b == 1).view()),
        )?;
    }
    let flagged: usize = flags
        .iter()
        .map(|g| g.iter().filter(|&&b| b == 1).count())
        .sum();
    println!("flagged {flagged} of {} pixels", n * f * steps);
    Ok(())
}

pub fn estimate(cfg: &RunConfig, channels: Option<usize>, out: &Path) -> Result<()> {
    let c = &cfg.deploy;
    let e = estimate_deployment(
        channels.unwrap_or(c.channels),
        c.exposure,
        c.ops_per_exposure,
        c.integration_time_s,
        &c.chip,
    )?;
    mkdir(out)?;
    write_json(&out.join("estimate.json"), &e)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&e).expect("plain data serialises")
    );
    Ok(())
}
