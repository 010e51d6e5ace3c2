//! Checkpoints: one SFT1 file per weight, bias and decay tensor plus a
//! `manifest.json`.
//!
//! Tensors are stored as f32, so a loaded network matches the saved one to
//! single precision. Decays are stored as logits, `[beta, alpha]`.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{Network, NetworkParams, NetworkSpec};
use crate::data::{read_tensor, write_tensor, Tensor, TensorData, TensorRole};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    spec: NetworkSpec,
    step: u64,
    seed: u64,
    layers: usize,
    #[serde(default)]
    extra: serde_json::Value,
}

/// A network together with the training step and seed it came from.
///
/// `extra` carries whatever else the caller needs to reproduce inference,
/// typically the encoder and preprocessing settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub step: u64,
    pub seed: u64,
    pub extra: serde_json::Value,
}

fn tensor(values: &[f64], rows: usize, cols: usize) -> Tensor {
    let data: Vec<f32> = values.iter().map(|&x| x as f32).collect();
    let grid = ArrayView2::from_shape((rows, cols), &data).expect("layout checked by caller");
    Tensor::from_grids_f32([grid], (rows, cols))
}

fn load_into(path: &Path, dst: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    let t = read_tensor(path)?;
    let TensorData::F32(v) = &t.data else {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: "checkpoint tensors must be f32".into(),
        });
    };
    if t.shape != [1, rows, cols] || t.role != TensorRole::Values {
        return Err(Error::Shape(format!(
            "{} has shape {:?}, expected {:?}",
            path.display(),
            t.shape,
            [1, rows, cols]
        )));
    }
    for (d, &s) in dst.iter_mut().zip(v) {
        *d = f64::from(s);
    }
    Ok(())
}

pub fn save_checkpoint(ck: &Checkpoint, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = &ck.network.params;
    for l in 0..p.num_layers() {
        let (n_in, n_out) = p.shape(l);
        write_tensor(
            &dir.join(format!("layer{l}_weights.sft")),
            &tensor(p.weights(l), n_out, n_in),
        )?;
        write_tensor(
            &dir.join(format!("layer{l}_bias.sft")),
            &tensor(p.bias(l), 1, n_out),
        )?;
        write_tensor(
            &dir.join(format!("layer{l}_decay.sft")),
            &tensor(&[p.beta_logit(l), p.alpha_logit(l)], 1, 2),
        )?;
    }
    let manifest = Manifest {
        spec: ck.network.spec.clone(),
        step: ck.step,
        seed: ck.seed,
        layers: p.num_layers(),
        extra: ck.extra.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    m.spec.validate()?;
    let mut p = NetworkParams::zeros(&m.spec);
    if p.num_layers() != m.layers {
        return Err(Error::Shape(format!(
            "manifest lists {} layers, spec implies {}",
            m.layers,
            p.num_layers()
        )));
    }
    for l in 0..p.num_layers() {
        let (n_in, n_out) = p.shape(l);
        load_into(
            &dir.join(format!("layer{l}_weights.sft")),
            p.weights_mut(l),
            n_out,
            n_in,
        )?;
        load_into(
            &dir.join(format!("layer{l}_bias.sft")),
            p.bias_mut(l),
            1,
            n_out,
        )?;
        let mut decay = [0.0; 2];
        load_into(&dir.join(format!("layer{l}_decay.sft")), &mut decay, 1, 2)?;
        *p.beta_logit_mut(l) = decay[0];
        *p.alpha_logit_mut(l) = decay[1];
    }
    Ok(Checkpoint {
        network: Network::from_parts(m.spec, p)?,
        step: m.step,
        seed: m.seed,
        extra: m.extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::LifParams;

    fn roundable(n: &mut Network) {
        n.params
            .data
            .iter_mut()
            .for_each(|x| *x = f64::from(*x as f32));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = Network::new(NetworkSpec {
            input_width: 6,
            hidden_width: 5,
            num_hidden_layers: 2,
            output_width: 4,
            neuron: LifParams::second_order(0.8),
            seed: 3,
        })
        .unwrap();
        roundable(&mut net);
        let ck = Checkpoint {
            network: net,
            step: 17,
            seed: 3,
            extra: serde_json::json!({"method": "latency"}),
        };
        save_checkpoint(&ck, dir.path()).unwrap();
        assert_eq!(load_checkpoint(dir.path()).unwrap(), ck);
    }

    #[test]
    fn missing_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let ck = Checkpoint {
            network: Network::new(NetworkSpec {
                input_width: 2,
                hidden_width: 2,
                num_hidden_layers: 1,
                output_width: 2,
                neuron: LifParams::default(),
                seed: 0,
            })
            .unwrap(),
            step: 0,
            seed: 0,
            extra: serde_json::Value::Null,
        };
        save_checkpoint(&ck, dir.path()).unwrap();
        fs::remove_file(dir.path().join("layer1_bias.sft")).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Io { .. })));
    }
}
