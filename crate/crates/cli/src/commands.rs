//! The five subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use specdep::calibration::{
    calibrate_thresholds, null_ks_statistics, replicate_seed, simulate_scenario, DgpKind, DgpSpec, ThresholdTable,
};
use specdep::dvine::{compare_channel_matrix, compare_prepost as prepost_test};
use specdep::ks_change::analyze_channel;
use specdep::recording::{read_binary, read_csv, write_binary, write_csv};
use specdep::spectral::{EpochTensor, SegmentOptions};

use crate::config::{to_zero_based, InputFormat, RunConfig};
use crate::report::{envelope, Output};
use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `dgp1a:100`, `dgp1b:100` or `dgp2-3:100`.
pub fn parse_segment(s: &str, cfg: &RunConfig) -> Result<DgpSpec, CliError> {
    let (kind, epochs) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("segment '{s}' must look like <kind>:<epochs>")))?;
    let epochs: usize = epochs
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad epoch count in segment '{s}'")))?;
    let kind = match kind.trim().to_ascii_lowercase().as_str() {
        "dgp1a" => DgpKind::Dgp1A,
        "dgp1b" => DgpKind::Dgp1B,
        k => match k.strip_prefix("dgp2-").map(str::parse::<usize>) {
            Some(Ok(index)) => DgpKind::Dgp2 { index },
            _ => return Err(usage(format!("unknown segment kind in '{s}'"))),
        },
    };
    let spec = DgpSpec {
        noise: cfg.simulate.noise,
        rho: cfg.rho,
        ..DgpSpec::new(kind, epochs, cfg.simulate.epoch_len)
    };
    spec.validate()?;
    Ok(spec)
}

/// Samples of simulated channel `c` (0-based) come from `replicate_seed(seed, c)`.
pub fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = &cfg.simulate;
    let segments: Vec<DgpSpec> = s.segments.iter().map(|x| parse_segment(x, cfg)).collect::<Result<_, _>>()?;
    let epochs: usize = segments.iter().map(|g| g.epochs).sum();
    let per_channel: Vec<Vec<Vec<f64>>> = (0..s.channels)
        .into_par_iter()
        .map(|c| simulate_scenario(&segments, replicate_seed(cfg.seed, c)))
        .collect::<Result<_, _>>()?;
    let samples: Vec<f64> = per_channel.into_iter().flatten().flatten().collect();
    let tensor = EpochTensor::from_channel_major(samples, s.channels, epochs, s.epoch_len, s.sampling_rate_hz)?;

    let mut out = Output::new(&cfg.out_dir)?;
    let data_path = match s.format {
        InputFormat::Binary => {
            let p = out.path(&format!("{}.bin", s.name));
            write_binary(&p, &tensor)?;
            out.record(p.clone());
            out.record(specdep::recording::sidecar_path(&p));
            p
        }
        InputFormat::Csv => {
            let p = out.path(&format!("{}.csv", s.name));
            write_csv(&p, &tensor)?;
            out.record(p.clone());
            p
        }
    };
    let result = json!({
        "path": data_path,
        "channels": s.channels,
        "epochs": epochs,
        "epoch_len": s.epoch_len,
        "segments": segments,
    });
    out.json(&format!("{}_report.json", s.name), &envelope("simulate", cfg, &result)?)?;
    Ok(out)
}

pub fn calibrate(cfg: &RunConfig) -> Result<Output, CliError> {
    let c = &cfg.calibrate;
    let scenarios = c.design.scenarios(c.epochs, c.epoch_len, c.noise, cfg.rho);
    for seg in scenarios.iter().flatten() {
        seg.validate()?;
    }
    let detect = cfg.detect_config();
    detect.validate(c.epoch_len)?;
    for b in &cfg.bands {
        b.bins(c.epoch_len, c.sampling_rate_hz)?;
    }
    let available = (c.epochs - 2) * scenarios.len() * c.runs;
    if available < 100 {
        return Err(usage(format!(
            "the design yields {available} null statistics per band; at least 100 are required"
        )));
    }
    let stats = null_ks_statistics(&scenarios, c.runs, cfg.seed, c.sampling_rate_hz, &cfg.bands, &detect)?;
    let mut table = calibrate_thresholds(&stats, cfg.alpha, &format!("calibrated-{}", c.design.name()))?;
    table.meta.seed = Some(cfg.seed);
    table.meta.replicates = Some(c.runs);

    let mut out = Output::new(&cfg.out_dir)?;
    out.json("thresholds.json", &table)?;
    let mut csv = String::from("band,index,D\n");
    for (band, d) in &stats {
        for (i, x) in d.iter().enumerate() {
            csv.push_str(&format!("{band},{i},{x:?}\n"));
        }
    }
    out.text("null_stats.csv", &csv)?;
    out.json("calibrate_report.json", &envelope("calibrate", cfg, &table)?)?;
    Ok(out)
}

/// Reads the configured recording; a missing file is a usage error naming it.
pub fn load_input(cfg: &RunConfig) -> Result<EpochTensor, CliError> {
    let path = cfg
        .input
        .path
        .as_deref()
        .ok_or_else(|| usage("no input recording given (use --input)"))?;
    if !path.exists() {
        return Err(usage(format!("input file not found: {}", path.display())));
    }
    let tensor = match cfg.input.resolved_format() {
        InputFormat::Binary => read_binary(path)?,
        InputFormat::Csv => read_csv(
            path,
            cfg.input.epoch_len,
            cfg.input.sampling_rate_hz,
            SegmentOptions::default(),
        )?,
    };
    Ok(tensor)
}

/// 1-based channel numbers to analyse.
fn select_channels(cfg: &RunConfig, tensor: &EpochTensor) -> Result<Vec<usize>, CliError> {
    let d = tensor.channels();
    let chosen = cfg.channels.clone().unwrap_or_else(|| (1..=d).collect());
    if let Some(&c) = chosen.iter().find(|&&c| c == 0 || c > d) {
        return Err(usage(format!("channel {c} does not exist; the recording has {d} channel(s)")));
    }
    let mut seen = chosen.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != chosen.len() {
        return Err(usage("a channel is listed twice"));
    }
    Ok(chosen)
}

fn load_thresholds(path: Option<&Path>) -> Result<ThresholdTable, CliError> {
    let Some(p) = path else {
        return Ok(ThresholdTable::builtin());
    };
    let text = std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read thresholds {}: {e}", p.display())))?;
    let table: ThresholdTable =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    table.validate()?;
    Ok(table)
}

#[derive(Serialize)]
struct DetectSummary<'a> {
    input: Option<&'a Path>,
    channels: usize,
    epochs: usize,
    epoch_len: usize,
    sampling_rate_hz: f64,
    thresholds: &'a ThresholdTable,
    /// channel → band → flagged epochs
    flagged: BTreeMap<usize, BTreeMap<String, Vec<usize>>>,
}

pub fn detect(cfg: &RunConfig) -> Result<Output, CliError> {
    let tensor = load_input(cfg)?;
    let channels = select_channels(cfg, &tensor)?;
    let thresholds = load_thresholds(cfg.thresholds.as_deref())?;
    for b in &cfg.bands {
        thresholds.get(&b.name)?;
        b.bins(tensor.epoch_len(), tensor.sampling_rate_hz())?;
    }
    let detect = cfg.detect_config();
    detect.validate(tensor.epoch_len())?;

    let fs = tensor.sampling_rate_hz();
    let per_channel: Vec<Vec<specdep::ks_change::ChangepointReport>> = channels
        .par_iter()
        .map(|&c| {
            // the library keys random streams by 0-based channel index
            let analyses = analyze_channel(&tensor.channel_epochs(c - 1), fs, &cfg.bands, &detect, c - 1)?;
            analyses
                .iter()
                .map(|a| {
                    let mut rep = a.report(thresholds.get(&a.band.name)?, thresholds.meta.alpha);
                    rep.channel = c;
                    rep.ks.channel = c;
                    for m in &mut rep.marginals {
                        m.channel = c;
                    }
                    Ok(rep)
                })
                .collect::<specdep::Result<Vec<_>>>()
        })
        .collect::<Result<_, _>>()?;

    let mut out = Output::new(&cfg.out_dir)?;
    let mut flagged: BTreeMap<usize, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    for rep in per_channel.iter().flatten() {
        let stem = format!("detect_ch{}_{}", rep.channel, rep.band);
        out.json(&format!("{stem}.json"), &envelope("detect", cfg, rep)?)?;
        out.text(&format!("{stem}_ks.csv"), &rep.ks.to_csv())?;
        out.text(&format!("{stem}_flagged.csv"), &rep.flagged_csv())?;
        flagged
            .entry(rep.channel)
            .or_default()
            .insert(rep.band.clone(), rep.flagged_epochs.clone());
    }
    let summary = DetectSummary {
        input: cfg.input.path.as_deref(),
        channels: tensor.channels(),
        epochs: tensor.epochs(),
        epoch_len: tensor.epoch_len(),
        sampling_rate_hz: fs,
        thresholds: &thresholds,
        flagged,
    };
    out.json("detect_summary.json", &envelope("detect", cfg, &summary)?)?;
    Ok(out)
}

#[derive(Serialize)]
struct PrepostRow {
    channel: usize,
    xi: u64,
    n: u64,
    p_value: f64,
    rejected: bool,
}

pub fn compare_prepost(cfg: &RunConfig) -> Result<Output, CliError> {
    let tensor = load_input(cfg)?;
    let channels = select_channels(cfg, &tensor)?;
    let band = cfg.band(&cfg.compare.band)?;
    let r = tensor.epochs();
    let half = r / 2;
    if half == 0 {
        return Err(usage("pre/post comparison needs at least two epochs"));
    }
    let pre = to_zero_based(cfg.compare.pre.unwrap_or([1, half]), r, "pre")?;
    let post = to_zero_based(cfg.compare.post.unwrap_or([half + 1, 2 * half]), r, "post")?;
    if pre.start < post.end && post.start < pre.end {
        return Err(usage("pre and post epoch ranges overlap"));
    }
    if pre.len() != post.len() {
        return Err(usage(format!(
            "pre and post ranges must have equal length ({} vs {})",
            pre.len(),
            post.len()
        )));
    }
    let cc = cfg.compare_config();
    cc.detect.validate(tensor.epoch_len())?;
    band.bins(tensor.epoch_len(), tensor.sampling_rate_hz())?;

    let rows: Vec<PrepostRow> = channels
        .par_iter()
        .map(|&c| {
            let res = prepost_test(
                &tensor.channel_epochs(c - 1),
                tensor.sampling_rate_hz(),
                band,
                pre.clone(),
                post.clone(),
                &cc,
                c - 1,
            )?;
            Ok(PrepostRow {
                channel: c,
                xi: res.xi,
                n: res.n,
                p_value: res.p_value,
                rejected: res.p_value < cfg.compare.level,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Output::new(&cfg.out_dir)?;
    let mut csv = String::from("channel,xi,n,p_value,rejected\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{},{},{}\n", row.channel, row.xi, row.n, row.p_value, row.rejected));
    }
    out.text("prepost.csv", &csv)?;
    let result = json!({
        "band": band.name,
        "pre": [pre.start + 1, pre.end],
        "post": [post.start + 1, post.end],
        "level": cfg.compare.level,
        "results": rows,
    });
    out.json("prepost.json", &envelope("compare-prepost", cfg, &result)?)?;
    Ok(out)
}

pub fn compare_channels(cfg: &RunConfig) -> Result<Output, CliError> {
    let tensor = load_input(cfg)?;
    let channels = select_channels(cfg, &tensor)?;
    if channels.len() < 2 {
        return Err(usage("channel comparison needs at least two channels"));
    }
    let band = cfg.band(&cfg.compare.band)?;
    let r = tensor.epochs();
    let range = to_zero_based(cfg.compare.range.unwrap_or([1, r]), r, "channel")?;
    if range.len() < 2 {
        return Err(usage("channel comparison needs at least two epochs in the range"));
    }
    let cc = cfg.compare_config();
    cc.detect.validate(tensor.epoch_len())?;
    band.bins(tensor.epoch_len(), tensor.sampling_rate_hz())?;

    let data: Vec<Vec<&[f64]>> = channels.iter().map(|&c| tensor.channel_epochs(c - 1)).collect();
    let keys: Vec<usize> = channels.iter().map(|c| c - 1).collect();
    let mut matrix = compare_channel_matrix(&data, &keys, tensor.sampling_rate_hz(), band, range.clone(), &cc)?;
    matrix.channels = channels.clone();
    for r in &mut matrix.results {
        r.a += 1;
        r.b += 1;
    }

    let mut out = Output::new(&cfg.out_dir)?;
    out.text("channels_long.csv", &matrix.to_csv())?;
    out.text("channels_matrix.csv", &matrix.to_matrix_csv())?;
    let result = json!({
        "band": band.name,
        "range": [range.start + 1, range.end],
        "matrix": matrix,
    });
    out.json("channels.json", &envelope("compare-channels", cfg, &result)?)?;
    Ok(out)
}
