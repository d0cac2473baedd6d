//! The `run` command: single-image experiments and the corpus protocol.

use std::fmt::Write as _;
use std::fs;

use bfdca_core::penalized::solve_penalized;
use bfdca_core::operators::fourier_forward;
use bfdca_core::split::split_corpus;
use bfdca_core::{metrics, Hyperparams, MetricReport};
use serde_json::{json, Map, Value};

use crate::clock::make_clock;
use crate::config::{ExperimentConfig, Source};
use crate::data::{load_prepared, write_json, Measured};
use crate::error::{CliError, Result};
use crate::imageio::save_image;
use crate::kspace::write_image_record;
use crate::methods::{run_method, Outcome};
use crate::trace::{fmt_f64, write_trace};

pub const SUMMARY_SCHEMA: &str = "bfdca-summary/1";

/// JSON number, or a string for values JSON cannot represent.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt_f64(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

pub fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, std }
}

fn stats_json(series: &[(&str, Vec<f64>)]) -> Value {
    let mut m = Map::new();
    for (name, values) in series {
        let s = stat(values);
        m.insert(
            (*name).to_string(),
            json!({
                "mean": jnum(s.mean),
                "std": jnum(s.std),
                "values": values.iter().map(|&v| jnum(v)).collect::<Vec<_>>(),
            }),
        );
    }
    Value::Object(m)
}

/// `mean ± std` with three decimals, the shape of a results table cell.
pub fn pm(values: &[f64]) -> String {
    let s = stat(values);
    format!("{:.3} ± {:.3}", s.mean, s.std)
}

fn header(cfg: &ExperimentConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SUMMARY_SCHEMA));
    m.insert("method".into(), json!(cfg.method.name()));
    m.insert("config_hash".into(), json!(cfg.config_hash()));
    m.insert("repeat".into(), json!(cfg.repeat));
    m.insert(
        "seeds".into(),
        json!({
            "mask": cfg.mask_seed,
            "noise": cfg.noise_seed,
            "split": cfg.split_seed,
            "method": cfg.seed,
            "phantom": cfg.phantom_seed,
        }),
    );
    m
}

fn failed(cfg: &ExperimentConfig, err: &CliError) -> Result<()> {
    let mut m = header(cfg);
    m.insert("status".into(), json!("failed"));
    m.insert("error".into(), json!(err.to_string()));
    write_json(&cfg.out.join("summary.json"), &Value::Object(m))
}

/// Runs the configured method on the prepared dataset in `cfg.out` and
/// writes traces, the restored image and `summary.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<Value> {
    cfg.validate()?;
    let base = load_prepared(cfg)?;
    let result = if cfg.source == Source::Corpus {
        run_protocol(cfg, base)
    } else {
        run_single(cfg, base)
    };
    match result {
        Err(e @ CliError::Solver(_)) => {
            failed(cfg, &e)?;
            Err(e)
        }
        other => other,
    }
}

fn repeat_data(cfg: &ExperimentConfig, base: &Measured, i: usize) -> Result<Measured> {
    if i == 0 {
        Ok(base.clone())
    } else {
        // same ground truth, fresh mask and noise
        crate::data::measure(cfg, base.truth.clone(), i as u64)
    }
}

fn trace_name(i: usize) -> String {
    if i == 0 {
        "trace.csv".into()
    } else {
        format!("trace_r{i}.csv")
    }
}

fn run_single(cfg: &ExperimentConfig, base: Measured) -> Result<Value> {
    let mut series: [(&str, Vec<f64>); 5] = [
        ("time_s", vec![]),
        ("rlne", vec![]),
        ("psnr", vec![]),
        ("nre", vec![]),
        ("val_err", vec![]),
    ];
    let mut first: Option<(Outcome, MetricReport)> = None;
    for i in 0..cfg.repeat {
        let data = repeat_data(cfg, &base, i)?;
        let ds = data.dataset(cfg.train_fraction, cfg.split_seed.wrapping_add(i as u64))?;
        let clock = make_clock(cfg.clock);
        let out = run_method(cfg, cfg.seed.wrapping_add(i as u64), &ds, clock.as_ref())?;
        let rep = MetricReport::compute(&out.x, &data.truth, &data.b, &data.mask)?;
        write_trace(&cfg.out.join(trace_name(i)), &out.rows)?;
        for (slot, v) in series.iter_mut().zip([out.time_s, rep.rlne, rep.psnr, rep.nre, out.val_err]) {
            slot.1.push(v);
        }
        if i == 0 {
            first = Some((out, rep));
        }
    }
    let (out, rep) = first.expect("repeat >= 1");
    write_image_record(&cfg.out.join("restored.bin"), &out.x)?;
    if out.x.shape().frames == 1 {
        save_image(&out.x, &cfg.out.join("restored.pgm"))?;
    }
    let mut m = header(cfg);
    m.insert("status".into(), json!("ok"));
    m.insert("error".into(), Value::Null);
    m.insert("time_s".into(), jnum(out.time_s));
    m.insert("rlne".into(), jnum(rep.rlne));
    m.insert("psnr".into(), jnum(rep.psnr));
    m.insert("nre".into(), jnum(rep.nre));
    m.insert("val_err".into(), jnum(out.val_err));
    m.insert("iterations".into(), json!(out.iterations));
    m.insert("converged".into(), json!(out.converged));
    m.insert("weights".into(), json!([jnum(out.weights[0]), jnum(out.weights[1])]));
    m.insert(
        "radii".into(),
        out.radii.map_or(Value::Null, |r| json!([jnum(r[0]), jnum(r[1])])),
    );
    m.insert("stats".into(), stats_json(&series));
    let summary = Value::Object(m);
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Errors of a restoration at fixed weights on a set of images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetErrors {
    /// Mean over images of `‖Φ_ho x − b_ho‖ / ‖b_ho‖` on held-out samples.
    pub data_err: f64,
    /// Mean over images of the RLNE against the ground truth.
    pub rlne: f64,
}

/// Restores every image of `set` from its training samples at `weights` and
/// scores it on its held-out samples.
pub fn evaluate_weights(cfg: &ExperimentConfig, set: &Measured, weights: [f64; 2], seed: u64) -> Result<SetErrors> {
    let ds = set.dataset(cfg.train_fraction, seed)?;
    let lam = Hyperparams::weights(weights[0], weights[1])?;
    let sol = solve_penalized(&ds.mask_tr, &ds.b_tr, &lam, &cfg.admm())?;
    let pred = fourier_forward(&sol.x, &ds.mask_val)?;
    let plane = set.truth.shape().plane();
    let frames = set.frames();
    let (mut num, mut den) = (vec![0.0; frames], vec![0.0; frames]);
    for ((i, p), b) in ds.mask_val.indices().zip(&pred.samples).zip(&ds.b_val.samples) {
        num[i / plane] += (p - b).norm_sqr();
        den[i / plane] += b.norm_sqr();
    }
    let data_err = num
        .iter()
        .zip(&den)
        .map(|(n, d)| if *d > 0.0 { (n / d).sqrt() } else { n.sqrt() })
        .sum::<f64>()
        / frames as f64;
    let restored = sol.x.frames();
    let truth = set.truth.frames();
    let mut rlne = 0.0;
    for (x, t) in restored.iter().zip(&truth) {
        rlne += metrics::rlne(x, t)?;
    }
    Ok(SetErrors {
        data_err,
        rlne: rlne / frames as f64,
    })
}

/// Seeds of the three per-set sample splits within repeat `i`.
fn split_seed(cfg: &ExperimentConfig, i: usize, set: u64) -> u64 {
    cfg.split_seed.wrapping_add(1000 * i as u64).wrapping_add(set)
}

fn run_protocol(cfg: &ExperimentConfig, base: Measured) -> Result<Value> {
    let counts = (cfg.n_train, cfg.n_val, cfg.n_test);
    let mut series: [(&str, Vec<f64>); 5] = [
        ("time_s", vec![]),
        ("val_err", vec![]),
        ("test_err", vec![]),
        ("val_rlne", vec![]),
        ("test_rlne", vec![]),
    ];
    let mut table = String::from("repeat,time_s,val_err,test_err,val_rlne,test_rlne,lambda1,lambda2\n");
    let mut first_weights = [0.0; 2];
    for i in 0..cfg.repeat {
        let data = repeat_data(cfg, &base, i)?;
        let split = split_corpus(data.frames(), counts, cfg.split_seed.wrapping_add(i as u64))?;
        let train = data.subset(&split.train)?;
        let ds = train.dataset(cfg.train_fraction, split_seed(cfg, i, 0))?;
        let clock = make_clock(cfg.clock);
        let out = run_method(cfg, cfg.seed.wrapping_add(i as u64), &ds, clock.as_ref())?;
        if i == 0 {
            write_trace(&cfg.out.join("trace.csv"), &out.rows)?;
            first_weights = out.weights;
        }
        let val = evaluate_weights(cfg, &data.subset(&split.validation)?, out.weights, split_seed(cfg, i, 1))?;
        let test = evaluate_weights(cfg, &data.subset(&split.test)?, out.weights, split_seed(cfg, i, 2))?;
        let row = [out.time_s, val.data_err, test.data_err, val.rlne, test.rlne];
        for (slot, v) in series.iter_mut().zip(row) {
            slot.1.push(v);
        }
        let _ = writeln!(
            table,
            "{i},{},{},{},{},{},{},{}",
            fmt_f64(row[0]),
            fmt_f64(row[1]),
            fmt_f64(row[2]),
            fmt_f64(row[3]),
            fmt_f64(row[4]),
            fmt_f64(out.weights[0]),
            fmt_f64(out.weights[1])
        );
    }
    let path = cfg.out.join("protocol.csv");
    fs::write(&path, table).map_err(|e| CliError::io(&path, e))?;

    let mut m = header(cfg);
    m.insert("status".into(), json!("ok"));
    m.insert("error".into(), Value::Null);
    m.insert(
        "protocol".into(),
        json!({"n_train": cfg.n_train, "n_val": cfg.n_val, "n_test": cfg.n_test, "train_fraction": cfg.train_fraction}),
    );
    m.insert("time_s".into(), jnum(stat(&series[0].1).mean));
    m.insert("val_err".into(), jnum(stat(&series[1].1).mean));
    m.insert("test_err".into(), jnum(stat(&series[2].1).mean));
    m.insert("weights".into(), json!([jnum(first_weights[0]), jnum(first_weights[1])]));
    m.insert(
        "table".into(),
        json!({
            "Time": pm(&series[0].1),
            "Val.Err": pm(&series[1].1),
            "Tes.Err": pm(&series[2].1),
        }),
    );
    m.insert("stats".into(), stats_json(&series));
    let summary = Value::Object(m);
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}
