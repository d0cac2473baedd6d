//! Dataset synthesis and the on-disk prepared layout.
//!
//! A prepared directory holds `manifest.json`, `mask.pgm` (one plane),
//! `kspace.bin`, `truth.bin` (exact pixels) and 8-bit previews of the truth.

use std::fs;
use std::path::{Path, PathBuf};

use bfdca_core::mask::{default_lines, make_radial_mask, split_mask};
use bfdca_core::noise::add_noise;
use bfdca_core::operators::fourier_forward;
use bfdca_core::phantom::{make_random_phantom, make_shepp_logan};
use bfdca_core::{Dataset, Image, KSpaceData, SamplingMask};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Source};
use crate::error::{CliError, Result};
use crate::imageio::{load_image, save_image, save_mask, load_mask};
use crate::kspace::{hex, mask_checksum, read_image_record, read_kspace, write_image_record, write_kspace};

/// Ground truth, the sampling mask over all frames, and the measured data.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub truth: Image,
    /// Mask of a single frame; every frame is sampled the same way.
    pub plane_mask: SamplingMask,
    pub mask: SamplingMask,
    pub b: KSpaceData,
    pub lines: usize,
}

impl Measured {
    pub fn frames(&self) -> usize {
        self.truth.shape().frames
    }

    /// Frames `idx`, with their samples.
    pub fn subset(&self, idx: &[usize]) -> Result<Measured> {
        let frames = self.truth.frames();
        let m = self.plane_mask.m();
        let mut picked = Vec::with_capacity(idx.len());
        let mut samples = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            let frame = frames
                .get(i)
                .ok_or_else(|| CliError::usage(format!("frame {i} out of range")))?;
            picked.push(frame.clone());
            samples.extend_from_slice(&self.b.samples[i * m..(i + 1) * m]);
        }
        Ok(Measured {
            truth: Image::stack(&picked)?,
            plane_mask: self.plane_mask.clone(),
            mask: self.plane_mask.repeat(idx.len()),
            b: KSpaceData::new(samples),
            lines: self.lines,
        })
    }

    /// Training and held-out parts: aliased when `train_fraction` is one,
    /// otherwise a seeded split of every frame's samples.
    pub fn dataset(&self, train_fraction: f64, seed: u64) -> Result<Dataset> {
        if train_fraction >= 1.0 {
            return Ok(Dataset::aliased(self.mask.clone(), self.b.clone(), Some(self.truth.clone()))?);
        }
        let (tr, val) = split_mask(&self.mask, train_fraction, seed)?;
        let b_tr = self.b.restrict(&self.mask, &tr)?;
        let b_val = self.b.restrict(&self.mask, &val)?;
        Ok(Dataset::new(tr, b_tr, val, b_val, Some(self.truth.clone()))?)
    }
}

/// Seed of corpus image `i`.
pub fn corpus_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

pub fn ground_truth(cfg: &ExperimentConfig) -> Result<Image> {
    Ok(match &cfg.source {
        Source::SheppLogan => make_shepp_logan(cfg.size)?,
        Source::RandomPhantom => make_random_phantom(cfg.size, cfg.phantom_seed)?,
        Source::Corpus => {
            let frames = (0..cfg.corpus_size)
                .map(|i| make_random_phantom(cfg.size, corpus_seed(cfg.phantom_seed, i)))
                .collect::<bfdca_core::Result<Vec<_>>>()?;
            Image::stack(&frames)?
        }
        Source::File(p) => load_image(p)?,
    })
}

/// Synthesizes the measurements. `offset` shifts the mask and noise seeds,
/// which is how repeats re-draw their data; offset 0 is what `prepare` writes.
pub fn generate(cfg: &ExperimentConfig, offset: u64) -> Result<Measured> {
    let truth = ground_truth(cfg)?;
    measure(cfg, truth, offset)
}

pub fn measure(cfg: &ExperimentConfig, truth: Image, offset: u64) -> Result<Measured> {
    let s = truth.shape();
    let lines = if cfg.lines == 0 {
        default_lines(s.height, s.width, cfg.rate)
    } else {
        cfg.lines
    };
    let plane_mask = make_radial_mask(s.height, s.width, cfg.rate, lines, cfg.mask_seed.wrapping_add(offset))?;
    let mask = plane_mask.repeat(s.frames);
    let clean = fourier_forward(&truth, &mask)?;
    let mut noise = cfg.noise();
    noise.seed = noise.seed.wrapping_add(offset);
    let b = add_noise(&clean, &noise)?;
    Ok(Measured {
        truth,
        plane_mask,
        mask,
        b,
        lines,
    })
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Writes the prepared dataset into `cfg.out` and returns the manifest.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Value> {
    cfg.validate()?;
    let data = generate(cfg, 0)?;
    let dir = &cfg.out;
    create_dir(dir)?;
    save_mask(&data.plane_mask, &dir.join("mask.pgm"))?;
    write_kspace(&dir.join("kspace.bin"), &data.mask, &data.b)?;
    write_image_record(&dir.join("truth.bin"), &data.truth)?;
    let frames = data.truth.frames();
    if frames.len() == 1 {
        save_image(&frames[0], &dir.join("truth.pgm"))?;
    } else {
        let sub = dir.join("truth");
        create_dir(&sub)?;
        for (i, f) in frames.iter().enumerate() {
            save_image(f, &sub.join(format!("{i:03}.pgm")))?;
        }
    }
    let s = data.truth.shape();
    let noise = cfg.noise();
    let manifest = json!({
        "format": "bfdca-dataset/1",
        "data_hash": cfg.data_hash(),
        "config": cfg.data_pairs().into_iter().collect::<std::collections::BTreeMap<_, _>>(),
        "height": s.height,
        "width": s.width,
        "frames": s.frames,
        "n": s.plane(),
        "m": data.plane_mask.m(),
        "m_total": data.mask.m(),
        "lines": data.lines,
        "mask_checksum": hex(&mask_checksum(&data.mask)),
        "seeds": {
            "mask": cfg.mask_seed,
            "noise": noise.seed,
            "phantom": cfg.phantom_seed,
        },
        "files": {
            "mask": "mask.pgm",
            "kspace": "kspace.bin",
            "truth": "truth.bin",
        },
    });
    write_json(&manifest_path(dir), &manifest)?;
    Ok(manifest)
}

/// Reads a prepared dataset, checking that it was produced from the same
/// data-relevant configuration.
pub fn load_prepared(cfg: &ExperimentConfig) -> Result<Measured> {
    let dir = &cfg.out;
    let path = manifest_path(dir);
    if !path.exists() {
        return Err(CliError::usage(format!(
            "no prepared dataset in {} (run `prepare` first)",
            dir.display()
        )));
    }
    let manifest = read_json(&path)?;
    if manifest["data_hash"].as_str() != Some(cfg.data_hash().as_str()) {
        return Err(CliError::usage(format!(
            "dataset in {} was prepared from a different configuration",
            dir.display()
        )));
    }
    let truth = read_image_record(&dir.join("truth.bin"))?;
    let plane_mask = load_mask(&dir.join("mask.pgm"))?;
    let s = truth.shape();
    if plane_mask.shape() != bfdca_core::Shape::new(s.height, s.width) {
        return Err(CliError::io(&dir.join("mask.pgm"), "mask and truth sizes differ"));
    }
    let mask = plane_mask.repeat(s.frames);
    let b = read_kspace(&dir.join("kspace.bin"), &mask)?;
    let lines = manifest["lines"].as_u64().unwrap_or(0) as usize;
    Ok(Measured {
        truth,
        plane_mask,
        mask,
        b,
        lines,
    })
}
