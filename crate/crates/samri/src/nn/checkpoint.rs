//! Checkpoints: all parameter arrays, Adam moments, batch-norm running
//! statistics and stream positions in f64 containers plus a JSON manifest.
//! Reloading and continuing reproduces an uninterrupted run bit-exactly
//! (single-threaded).

use std::path::Path;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::param::Net;
use super::train::{LossRecord, TrainConfig, TrainState};
use crate::container::{load_tensor, save_tensor, Tensor, TensorData};
use crate::error::{Error, Result};
use crate::rng::{SeededStream, StreamState};

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    cfg: TrainConfig,
    iteration: u64,
    epoch: usize,
    mask_stream: StreamState,
    batch_stream: StreamState,
    opt_g: Adam,
    opt_d: Adam,
    history: Vec<LossRecord>,
}

fn array_file(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(format!("{}.tns", name.replace('/', ".")))
}

fn save_array(dir: &Path, name: &str, value: &ArrayD<f64>) -> Result<()> {
    save_tensor(
        &Tensor::new(TensorData::F64(value.clone()), name),
        array_file(dir, name),
    )
}

fn load_array(dir: &Path, name: &str, expect_shape: &[usize]) -> Result<ArrayD<f64>> {
    let path = array_file(dir, name);
    let t = load_tensor(&path)?;
    match t.data {
        TensorData::F64(a) => {
            if a.shape() != expect_shape {
                return Err(Error::format(
                    &path,
                    format!("shape {:?} != expected {:?}", a.shape(), expect_shape),
                ));
            }
            Ok(a)
        }
        _ => Err(Error::format(&path, "expected f64 payload")),
    }
}

pub fn save_checkpoint(state: &mut TrainState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: "checkpoint-v1".into(),
        cfg: state.cfg.clone(),
        iteration: state.iteration,
        epoch: state.epoch,
        mask_stream: state.mask_stream.state(),
        batch_stream: state.batch_stream.state(),
        opt_g: state.opt_g.clone(),
        opt_d: state.opt_d.clone(),
        history: state.history.clone(),
    };
    let mpath = dir.join("manifest.json");
    std::fs::write(
        &mpath,
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::validation(format!("manifest serialization: {e}")))?,
    )
    .map_err(|e| Error::io(&mpath, e))?;

    for p in state.gen.params_mut() {
        save_array(dir, &p.name, &p.value)?;
        save_array(dir, &format!("{}.adam_m", p.name), &p.m)?;
        save_array(dir, &format!("{}.adam_v", p.name), &p.v)?;
    }
    for p in state.disc.params_mut() {
        save_array(dir, &p.name, &p.value)?;
        save_array(dir, &format!("{}.adam_m", p.name), &p.m)?;
        save_array(dir, &format!("{}.adam_v", p.name), &p.v)?;
    }
    for (name, buf) in state.gen.buffers_mut() {
        save_array(dir, &name, &buf.clone().into_dyn())?;
    }
    for (name, buf) in state.disc.buffers_mut() {
        save_array(dir, &name, &buf.clone().into_dyn())?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainState> {
    let mpath = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(
        &std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?,
    )
    .map_err(|e| Error::format(&mpath, e.to_string()))?;

    let mut state = TrainState::new(manifest.cfg)?;
    state.iteration = manifest.iteration;
    state.epoch = manifest.epoch;
    state.mask_stream = SeededStream::restore(&manifest.mask_stream);
    state.batch_stream = SeededStream::restore(&manifest.batch_stream);
    state.opt_g = manifest.opt_g;
    state.opt_d = manifest.opt_d;
    state.history = manifest.history;

    for p in state.gen.params_mut() {
        p.value = load_array(dir, &p.name, p.value.shape())?;
        p.m = load_array(dir, &format!("{}.adam_m", p.name), p.m.shape())?;
        p.v = load_array(dir, &format!("{}.adam_v", p.name), p.v.shape())?;
    }
    for p in state.disc.params_mut() {
        p.value = load_array(dir, &p.name, p.value.shape())?;
        p.m = load_array(dir, &format!("{}.adam_m", p.name), p.m.shape())?;
        p.v = load_array(dir, &format!("{}.adam_v", p.name), p.v.shape())?;
    }
    for (name, buf) in state.gen.buffers_mut() {
        let arr = load_array(dir, &name, &[buf.len()])?;
        *buf = arr.into_dimensionality::<ndarray::Ix1>().unwrap();
    }
    for (name, buf) in state.disc.buffers_mut() {
        let arr = load_array(dir, &name, &[buf.len()])?;
        *buf = arr.into_dimensionality::<ndarray::Ix1>().unwrap();
    }
    Ok(state)
}
