//! Recording file formats.
//!
//! **CSV**: UTF-8, comma separated, a header row of channel names followed by
//! one row per time sample and one column per channel. Values are parsed as
//! decimal floats. The sampling rate and epoch length are supplied by the
//! caller.
//!
//! **Raw binary + sidecar**: the `.bin` file is a bare sequence of IEEE-754
//! binary64 values in little-endian byte order, with no header. Values are
//! stored channel-major: for each channel `l` in `0..d`, for each epoch `r` in
//! `0..R`, the `T` samples of that epoch, so the value at `(l, r, t)` starts at
//! byte offset `8 * ((l * R + r) * T + t)`. The file length is exactly
//! `8 * d * R * T` bytes. The JSON sidecar carries
//! `{"d", "T", "R", "sampling_rate_hz", "layout": "channel-major"}` and may add
//! an optional `"channel_names"` array.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::spectral::{segment_epochs, EpochTensor, SegmentOptions};
use crate::{Error, Result};

pub const LAYOUT_CHANNEL_MAJOR: &str = "channel-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub d: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub sampling_rate_hz: f64,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_names: Option<Vec<String>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Sidecar path for a binary recording: same stem with a `.json` extension.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Reads a CSV recording and segments it into epochs.
pub fn read_csv(
    path: &Path,
    epoch_len: usize,
    sampling_rate_hz: f64,
    opts: SegmentOptions,
) -> Result<EpochTensor> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Format(format!("{}: empty header", path.display())));
    }
    let mut streams = vec![Vec::new(); names.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if rec.len() != names.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                row + 2,
                rec.len(),
                names.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {} column {}: not a number: {field:?}",
                    path.display(),
                    row + 2,
                    c + 1
                ))
            })?;
            streams[c].push(v);
        }
    }
    segment_epochs(&streams, epoch_len, sampling_rate_hz, opts)?.with_channel_names(names)
}

/// Writes `tensor` as CSV, concatenating epochs back into continuous streams.
pub fn write_csv(path: &Path, tensor: &EpochTensor) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(tensor.channel_names()).map_err(fmt_err)?;
    let mut row = Vec::with_capacity(tensor.channels());
    for r in 0..tensor.epochs() {
        for t in 0..tensor.epoch_len() {
            row.clear();
            for c in 0..tensor.channels() {
                // shortest round-trip representation
                row.push(format!("{:?}", tensor.epoch(c, r)[t]));
            }
            w.write_record(&row).map_err(fmt_err)?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Reads a raw binary recording and its sidecar (`<stem>.json`).
pub fn read_binary(path: &Path) -> Result<EpochTensor> {
    let side_path = sidecar_path(path);
    let text = fs::read_to_string(&side_path).map_err(io_err(&side_path))?;
    let side: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", side_path.display())))?;
    if side.layout != LAYOUT_CHANNEL_MAJOR {
        return Err(Error::Format(format!(
            "{}: unsupported layout {:?}",
            side_path.display(),
            side.layout
        )));
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let expected = 8 * side.d * side.r * side.t;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: {} bytes, sidecar implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let tensor = EpochTensor::from_channel_major(samples, side.d, side.r, side.t, side.sampling_rate_hz)?;
    match side.channel_names {
        Some(names) => tensor.with_channel_names(names),
        None => Ok(tensor),
    }
}

/// Writes `tensor` to `path` plus its sidecar.
pub fn write_binary(path: &Path, tensor: &EpochTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(tensor.samples().len() * 8);
    for v in tensor.samples() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(io_err(path))?;
    let side = Sidecar {
        d: tensor.channels(),
        t: tensor.epoch_len(),
        r: tensor.epochs(),
        sampling_rate_hz: tensor.sampling_rate_hz(),
        layout: LAYOUT_CHANNEL_MAJOR.to_string(),
        channel_names: Some(tensor.channel_names().to_vec()),
    };
    let side_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).expect("sidecar serialises");
    fs::write(&side_path, json + "\n").map_err(io_err(&side_path))
}
