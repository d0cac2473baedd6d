//! Experiment configuration: a flat `key = value` file plus overrides.
//!
//! Lines are `key = value`; `#` starts a comment. Overrides are applied in
//! order after the file, so command-line flags win.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bfdca_core::noise::{NoiseKind, NoiseSpec};
use bfdca_core::search::SearchSpace;
use bfdca_core::{AdmmConfig, BfdcaConfig};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    SheppLogan,
    /// Random head-like phantom drawn from `phantom_seed`.
    RandomPhantom,
    /// `corpus_size` random phantoms for the train / validation / test protocol.
    Corpus,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bfdca,
    Gs,
    Rs,
    Tpe,
    RestoreFixed,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bfdca => "bfdca",
            Method::Gs => "gs",
            Method::Rs => "rs",
            Method::Tpe => "tpe",
            Method::RestoreFixed => "restore-fixed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bfdca" => Method::Bfdca,
            "gs" => Method::Gs,
            "rs" => Method::Rs,
            "tpe" => Method::Tpe,
            "restore-fixed" => Method::RestoreFixed,
            _ => return None,
        })
    }

    pub fn is_search(self) -> bool {
        matches!(self, Method::Gs | Method::Rs | Method::Tpe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockKind {
    Wall,
    /// Every timing reads zero, which makes outputs byte-reproducible.
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub size: usize,
    pub phantom_seed: u64,
    pub rate: f64,
    /// `0` selects the default ray count.
    pub lines: usize,
    pub mask_seed: u64,
    /// `None` means noiseless.
    pub noise_kind: Option<NoiseKind>,
    pub noise_level: f64,
    pub noise_seed: u64,
    /// Fraction of samples kept for the lower level; `1` reuses the training
    /// data for validation.
    pub train_fraction: f64,
    pub split_seed: u64,
    pub corpus_size: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,

    pub method: Method,
    pub seed: u64,
    pub repeat: usize,
    pub out: PathBuf,
    pub clock: ClockKind,

    pub tol: f64,
    pub max_outer: usize,
    pub c_alpha: f64,
    pub c_rho: f64,
    pub alpha0: f64,
    pub delta_alpha: f64,
    pub alpha_max: f64,
    pub rho0: f64,
    pub delta_rho: f64,
    pub rho_max: f64,
    pub r0: [f64; 2],

    pub lo: f64,
    pub hi: f64,
    pub grid: usize,
    pub budget: usize,
    pub lambda: [f64; 2],

    pub admm_max_iter: usize,
    pub admm_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let b = BfdcaConfig::default();
        Self {
            source: Source::SheppLogan,
            size: 64,
            phantom_seed: 0,
            rate: 0.57,
            lines: 0,
            mask_seed: 0,
            noise_kind: Some(NoiseKind::SaltPepper),
            noise_level: 0.01,
            noise_seed: 1,
            train_fraction: 1.0,
            split_seed: 0,
            corpus_size: 100,
            n_train: 10,
            n_val: 10,
            n_test: 50,
            method: Method::Bfdca,
            seed: 7,
            repeat: 1,
            out: PathBuf::from("out"),
            clock: ClockKind::Wall,
            tol: b.tol,
            max_outer: b.max_outer,
            c_alpha: b.c_alpha,
            c_rho: b.c_rho,
            alpha0: b.alpha0,
            delta_alpha: b.delta_alpha,
            alpha_max: b.alpha_max,
            rho0: b.rho0,
            delta_rho: b.delta_rho,
            rho_max: b.rho_max,
            r0: b.r0,
            lo: -9.0,
            hi: -3.0,
            grid: 14,
            budget: 200,
            lambda: [0.0, 0.0],
            admm_max_iter: b.lower.max_iter,
            admm_tol: b.lower.primal_tol,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::usage(format!("config key `{key}`: cannot parse `{value}` as {expected}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value, "a number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "a finite number"))
    }
}

fn noise_name(kind: Option<NoiseKind>) -> &'static str {
    match kind {
        None => "none",
        Some(NoiseKind::SaltPepper) => "salt_pepper",
        Some(NoiseKind::UniformRandom) => "uniform_random",
        Some(NoiseKind::Gaussian) => "gaussian",
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", no + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override `{kv}`: expected key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "source" => {
                self.source = match value {
                    "shepp-logan" => Source::SheppLogan,
                    "random-phantom" => Source::RandomPhantom,
                    "corpus" => Source::Corpus,
                    "" => return Err(bad(key, value, "a source")),
                    path => Source::File(PathBuf::from(path)),
                }
            }
            "size" => self.size = num(key, value, "a pixel count")?,
            "phantom_seed" => self.phantom_seed = num(key, value, "a seed")?,
            "rate" => self.rate = real(key, value)?,
            "lines" => self.lines = num(key, value, "a ray count")?,
            "mask_seed" => self.mask_seed = num(key, value, "a seed")?,
            "noise_kind" => {
                self.noise_kind = match value {
                    "none" => None,
                    "salt_pepper" => Some(NoiseKind::SaltPepper),
                    "uniform_random" => Some(NoiseKind::UniformRandom),
                    "gaussian" => Some(NoiseKind::Gaussian),
                    _ => return Err(bad(key, value, "none|salt_pepper|uniform_random|gaussian")),
                }
            }
            "noise_level" => self.noise_level = real(key, value)?,
            "noise_seed" => self.noise_seed = num(key, value, "a seed")?,
            "train_fraction" => self.train_fraction = real(key, value)?,
            "split_seed" => self.split_seed = num(key, value, "a seed")?,
            "corpus_size" => self.corpus_size = num(key, value, "a count")?,
            "n_train" => self.n_train = num(key, value, "a count")?,
            "n_val" => self.n_val = num(key, value, "a count")?,
            "n_test" => self.n_test = num(key, value, "a count")?,
            "method" => self.method = Method::parse(value).ok_or_else(|| bad(key, value, "bfdca|gs|rs|tpe|restore-fixed"))?,
            "seed" => self.seed = num(key, value, "a seed")?,
            "repeat" => self.repeat = num(key, value, "a count")?,
            "out" => self.out = PathBuf::from(value),
            "clock" => {
                self.clock = match value {
                    "wall" => ClockKind::Wall,
                    "null" => ClockKind::Null,
                    _ => return Err(bad(key, value, "wall|null")),
                }
            }
            "tol" => self.tol = real(key, value)?,
            "max_outer" => self.max_outer = num(key, value, "a count")?,
            "c_alpha" => self.c_alpha = real(key, value)?,
            "c_rho" => self.c_rho = real(key, value)?,
            "alpha0" => self.alpha0 = real(key, value)?,
            "delta_alpha" => self.delta_alpha = real(key, value)?,
            "alpha_max" => self.alpha_max = real(key, value)?,
            "rho0" => self.rho0 = real(key, value)?,
            "delta_rho" => self.delta_rho = real(key, value)?,
            "rho_max" => self.rho_max = real(key, value)?,
            "r1_0" => self.r0[0] = real(key, value)?,
            "r2_0" => self.r0[1] = real(key, value)?,
            "lo" => self.lo = real(key, value)?,
            "hi" => self.hi = real(key, value)?,
            "grid" => self.grid = num(key, value, "a count")?,
            "budget" => self.budget = num(key, value, "a count")?,
            "lambda1" => self.lambda[0] = real(key, value)?,
            "lambda2" => self.lambda[1] = real(key, value)?,
            "admm_max_iter" => self.admm_max_iter = num(key, value, "a count")?,
            "admm_tol" => self.admm_tol = real(key, value)?,
            _ => return Err(CliError::usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeat == 0 {
            return Err(CliError::usage("repeat must be at least 1"));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(CliError::usage("rate must lie in (0, 1]"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(CliError::usage("train_fraction must lie in (0, 1]"));
        }
        if self.source == Source::Corpus {
            if self.train_fraction >= 1.0 {
                return Err(CliError::usage("the corpus protocol needs train_fraction < 1"));
            }
            if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
                return Err(CliError::usage("the corpus protocol needs nonempty train, validation and test sets"));
            }
            if self.method == Method::RestoreFixed {
                return Err(CliError::usage("restore-fixed does not select hyperparameters"));
            }
        }
        self.noise().validate()?;
        match self.method {
            Method::Bfdca => self.bfdca()?.validate()?,
            Method::Gs | Method::Rs | Method::Tpe => self.space()?.validate()?,
            Method::RestoreFixed => {
                bfdca_core::Hyperparams::weights(self.lambda[0], self.lambda[1])?;
            }
        }
        self.admm().validate()?;
        Ok(())
    }

    pub fn noise(&self) -> NoiseSpec {
        match self.noise_kind {
            Some(kind) => NoiseSpec {
                kind,
                level: self.noise_level,
                seed: self.noise_seed,
            },
            None => NoiseSpec {
                seed: self.noise_seed,
                ..NoiseSpec::none()
            },
        }
    }

    pub fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            max_iter: self.admm_max_iter,
            primal_tol: self.admm_tol,
            dual_tol: self.admm_tol,
            ..AdmmConfig::default()
        }
    }

    pub fn bfdca(&self) -> Result<BfdcaConfig> {
        Ok(BfdcaConfig {
            c_alpha: self.c_alpha,
            c_rho: self.c_rho,
            delta_alpha: self.delta_alpha,
            delta_rho: self.delta_rho,
            alpha0: self.alpha0,
            alpha_max: self.alpha_max,
            rho0: self.rho0,
            rho_max: self.rho_max,
            tol: self.tol,
            max_outer: self.max_outer,
            r0: self.r0,
            lower: self.admm(),
            ..BfdcaConfig::default()
        })
    }

    pub fn space(&self) -> Result<SearchSpace> {
        Ok(SearchSpace::new(self.lo, self.hi, self.grid, self.budget, self.seed)?)
    }

    /// Fields that determine the prepared dataset.
    pub fn data_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![(
            "source",
            match &self.source {
                Source::SheppLogan => "shepp-logan".to_string(),
                Source::RandomPhantom => "random-phantom".to_string(),
                Source::Corpus => "corpus".to_string(),
                Source::File(p) => p.display().to_string(),
            },
        )];
        if !matches!(self.source, Source::File(_)) {
            v.push(("size", self.size.to_string()));
        }
        if matches!(self.source, Source::RandomPhantom | Source::Corpus) {
            v.push(("phantom_seed", self.phantom_seed.to_string()));
        }
        if self.source == Source::Corpus {
            v.push(("corpus_size", self.corpus_size.to_string()));
        }
        v.push(("rate", format!("{:?}", self.rate)));
        v.push(("lines", self.lines.to_string()));
        v.push(("mask_seed", self.mask_seed.to_string()));
        v.push(("noise_kind", noise_name(self.noise_kind).to_string()));
        if self.noise_kind.is_some() {
            v.push(("noise_level", format!("{:?}", self.noise_level)));
            v.push(("noise_seed", self.noise_seed.to_string()));
        }
        v
    }

    /// Every field that can change a result file. The output directory is
    /// excluded, as are parameters the chosen method never reads.
    pub fn semantic_pairs(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:?}");
        let mut v = self.data_pairs();
        v.push(("train_fraction", f(self.train_fraction)));
        if self.train_fraction < 1.0 || self.source == Source::Corpus {
            v.push(("split_seed", self.split_seed.to_string()));
        }
        if self.source == Source::Corpus {
            v.push(("n_train", self.n_train.to_string()));
            v.push(("n_val", self.n_val.to_string()));
            v.push(("n_test", self.n_test.to_string()));
        }
        v.push(("method", self.method.name().to_string()));
        v.push(("repeat", self.repeat.to_string()));
        v.push((
            "clock",
            match self.clock {
                ClockKind::Wall => "wall",
                ClockKind::Null => "null",
            }
            .to_string(),
        ));
        v.push(("admm_max_iter", self.admm_max_iter.to_string()));
        v.push(("admm_tol", f(self.admm_tol)));
        match self.method {
            Method::Bfdca => {
                for (k, x) in [
                    ("tol", self.tol),
                    ("c_alpha", self.c_alpha),
                    ("c_rho", self.c_rho),
                    ("alpha0", self.alpha0),
                    ("delta_alpha", self.delta_alpha),
                    ("alpha_max", self.alpha_max),
                    ("rho0", self.rho0),
                    ("delta_rho", self.delta_rho),
                    ("rho_max", self.rho_max),
                    ("r1_0", self.r0[0]),
                    ("r2_0", self.r0[1]),
                ] {
                    v.push((k, f(x)));
                }
                v.push(("max_outer", self.max_outer.to_string()));
            }
            Method::Gs | Method::Rs | Method::Tpe => {
                v.push(("lo", f(self.lo)));
                v.push(("hi", f(self.hi)));
                if self.method == Method::Gs {
                    v.push(("grid", self.grid.to_string()));
                } else {
                    v.push(("budget", self.budget.to_string()));
                    v.push(("seed", self.seed.to_string()));
                }
            }
            Method::RestoreFixed => {
                v.push(("lambda1", f(self.lambda[0])));
                v.push(("lambda2", f(self.lambda[1])));
            }
        }
        v
    }

    pub fn config_hash(&self) -> String {
        hash_pairs(&self.semantic_pairs())
    }

    pub fn data_hash(&self) -> String {
        hash_pairs(&self.data_pairs())
    }
}

fn hash_pairs(pairs: &[(&'static str, String)]) -> String {
    let mut text = String::new();
    for (k, v) in pairs {
        let _ = writeln!(text, "{k}={v}");
    }
    crate::kspace::hex(&Sha256::digest(text.as_bytes()))
}
