//! Epoch segmentation, DFT magnitudes and frequency-band extraction.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Samples arranged channel × epoch × time.
///
/// Storage is channel-major: the epoch `r` of channel `l` occupies
/// `samples[(l * epochs + r) * epoch_len ..][.. epoch_len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTensor {
    samples: Vec<f64>,
    channels: usize,
    epochs: usize,
    epoch_len: usize,
    sampling_rate_hz: f64,
    channel_names: Vec<String>,
}

impl EpochTensor {
    /// Builds a tensor from channel-major samples.
    pub fn from_channel_major(
        samples: Vec<f64>,
        channels: usize,
        epochs: usize,
        epoch_len: usize,
        sampling_rate_hz: f64,
    ) -> Result<Self> {
        if channels == 0 || epochs == 0 {
            return Err(Error::invalid("tensor needs at least one channel and one epoch"));
        }
        if epoch_len == 0 || epoch_len % 2 != 0 {
            return Err(Error::invalid(format!(
                "epoch length must be even and positive, got {epoch_len}"
            )));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if samples.len() != channels * epochs * epoch_len {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for {channels}x{epochs}x{epoch_len}, got {}",
                channels * epochs * epoch_len,
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let channel_names = (1..=channels).map(|c| format!("ch{c}")).collect();
        Ok(Self {
            samples,
            channels,
            epochs,
            epoch_len,
            sampling_rate_hz,
            channel_names,
        })
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels {
            return Err(Error::DimensionMismatch(format!(
                "{} channel names for {} channels",
                names.len(),
                self.channels
            )));
        }
        self.channel_names = names;
        Ok(self)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn epoch_len(&self) -> usize {
        self.epoch_len
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Samples of epoch `epoch` (0-based) on channel `channel` (0-based).
    pub fn epoch(&self, channel: usize, epoch: usize) -> &[f64] {
        let start = (channel * self.epochs + epoch) * self.epoch_len;
        &self.samples[start..start + self.epoch_len]
    }

    /// All epochs of one channel, in temporal order.
    pub fn channel_epochs(&self, channel: usize) -> Vec<&[f64]> {
        (0..self.epochs).map(|r| self.epoch(channel, r)).collect()
    }
}

/// How `segment_epochs` lays windows over a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Distance between consecutive epoch starts; `None` means the epoch
    /// length (non-overlapping windows).
    pub stride: Option<usize>,
    /// Drop samples that do not fill a whole window instead of failing.
    pub allow_trailing: bool,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            stride: None,
            allow_trailing: false,
        }
    }
}

/// Cuts per-channel sample streams into epochs of `epoch_len` samples.
pub fn segment_epochs(
    streams: &[Vec<f64>],
    epoch_len: usize,
    sampling_rate_hz: f64,
    opts: SegmentOptions,
) -> Result<EpochTensor> {
    let first = streams
        .first()
        .ok_or_else(|| Error::invalid("no channels to segment"))?;
    for (c, s) in streams.iter().enumerate() {
        if s.len() != first.len() {
            return Err(Error::ChannelLengthMismatch {
                channel: c,
                expected: first.len(),
                found: s.len(),
            });
        }
    }
    let len = first.len();
    if epoch_len == 0 || len < epoch_len {
        return Err(Error::StreamTooShort { len, epoch_len });
    }
    let stride = opts.stride.unwrap_or(epoch_len);
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let epochs = (len - epoch_len) / stride + 1;
    let used = (epochs - 1) * stride + epoch_len;
    if used != len && !opts.allow_trailing {
        return Err(Error::TrailingSamples { len, epoch_len });
    }
    let mut samples = Vec::with_capacity(streams.len() * epochs * epoch_len);
    for s in streams {
        for r in 0..epochs {
            samples.extend_from_slice(&s[r * stride..r * stride + epoch_len]);
        }
    }
    EpochTensor::from_channel_major(samples, streams.len(), epochs, epoch_len, sampling_rate_hz)
}

/// Magnitudes of the unitary DFT `f_k = T^{-1/2} Σ_t x(t) e^{-i2πkt/T}` at
/// the fundamental frequencies `k = 0..=T/2`.
///
/// The plan is built once and reused; the struct is cheap to clone and safe
/// to share across threads.
#[derive(Clone)]
pub struct MagnitudeTransform {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl std::fmt::Debug for MagnitudeTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MagnitudeTransform").field("len", &self.len).finish()
    }
}

impl MagnitudeTransform {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || len % 2 != 0 {
            return Err(Error::invalid(format!("epoch length must be even, got {len}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(Self { fft, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Computes `|f_k|` for `k = 0..=T/2`.
    pub fn magnitudes(&self, epoch: &[f64]) -> Result<Vec<f64>> {
        if epoch.len() != self.len {
            return Err(Error::DimensionMismatch(format!(
                "epoch has {} samples, transform expects {}",
                epoch.len(),
                self.len
            )));
        }
        if let Some(i) = epoch.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut buf: Vec<Complex<f64>> = epoch.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.len as f64).sqrt();
        Ok(buf[..=self.len / 2].iter().map(|c| c.norm() * scale).collect())
    }
}

/// One-shot convenience around [`MagnitudeTransform`].
pub fn fourier_magnitudes(epoch: &[f64]) -> Result<Vec<f64>> {
    MagnitudeTransform::new(epoch.len())?.magnitudes(epoch)
}

/// A named frequency band `(lo_hz, hi_hz]` with optional notched frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
    #[serde(default)]
    pub notch_hz: Vec<f64>,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, lo_hz: f64, hi_hz: f64, notch_hz: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if !(lo_hz >= 0.0 && hi_hz > lo_hz && hi_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "band {name}: need 0 <= lo < hi, got ({lo_hz}, {hi_hz}]"
            )));
        }
        if let Some(n) = notch_hz.iter().find(|&&n| !(n > lo_hz && n <= hi_hz)) {
            return Err(Error::invalid(format!(
                "band {name}: notch {n} Hz lies outside ({lo_hz}, {hi_hz}]"
            )));
        }
        Ok(Self {
            name,
            lo_hz,
            hi_hz,
            notch_hz,
        })
    }

    fn is_notched(&self, f: f64) -> bool {
        self.notch_hz
            .iter()
            .any(|&n| (n - f).abs() <= 1e-9 * n.abs().max(1.0))
    }

    /// Indices `k` of the DFT bins retained by the band for an epoch of
    /// `epoch_len` samples recorded at `sampling_rate_hz`.
    pub fn bins(&self, epoch_len: usize, sampling_rate_hz: f64) -> Result<Vec<usize>> {
        let nyquist = sampling_rate_hz / 2.0;
        if self.hi_hz > nyquist * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "band {} upper edge {} Hz exceeds Nyquist {} Hz",
                self.name, self.hi_hz, nyquist
            )));
        }
        let resolution = sampling_rate_hz / epoch_len as f64;
        let tol = 1e-9 * resolution;
        let bins: Vec<usize> = (1..=epoch_len / 2)
            .filter(|&k| {
                let f = k as f64 * resolution;
                f > self.lo_hz + tol && f <= self.hi_hz + tol && !self.is_notched(f)
            })
            .collect();
        if bins.is_empty() {
            return Err(Error::EmptyBand(self.name.clone()));
        }
        Ok(bins)
    }
}

/// The five conventional bands Δ (0,4], θ (4,8], α (8,12], β (12,30] and
/// γ (30,300]. With `notch_gamma`, the 60 Hz bin is excluded from γ.
pub fn default_bands(notch_gamma: bool) -> Vec<BandSpec> {
    let notch = if notch_gamma { vec![60.0] } else { Vec::new() };
    vec![
        BandSpec::new("delta", 0.0, 4.0, Vec::new()).expect("valid"),
        BandSpec::new("theta", 4.0, 8.0, Vec::new()).expect("valid"),
        BandSpec::new("alpha", 8.0, 12.0, Vec::new()).expect("valid"),
        BandSpec::new("beta", 12.0, 30.0, Vec::new()).expect("valid"),
        BandSpec::new("gamma", 30.0, 300.0, notch).expect("valid"),
    ]
}

/// Magnitudes of one channel and epoch restricted to one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMagnitudes {
    pub channel: usize,
    pub epoch: usize,
    pub band: String,
    pub freqs_hz: Vec<f64>,
    pub values: Vec<f64>,
}

/// Keeps the full-spectrum magnitudes that fall inside `band`, in increasing
/// frequency order.
pub fn band_extract(
    mags: &[f64],
    band: &BandSpec,
    sampling_rate_hz: f64,
    channel: usize,
    epoch: usize,
) -> Result<BandMagnitudes> {
    if mags.len() < 2 {
        return Err(Error::invalid("spectrum needs at least two bins"));
    }
    let epoch_len = 2 * (mags.len() - 1);
    let bins = band.bins(epoch_len, sampling_rate_hz)?;
    let resolution = sampling_rate_hz / epoch_len as f64;
    Ok(BandMagnitudes {
        channel,
        epoch,
        band: band.name.clone(),
        freqs_hz: bins.iter().map(|&k| k as f64 * resolution).collect(),
        values: bins.iter().map(|&k| mags[k]).collect(),
    })
}

/// Affine map onto `[0, 1]` defined by a global minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: f64,
    pub max: f64,
}

impl Scaling {
    /// Global range of every value in `series`.
    pub fn from_series<S: AsRef<[f64]>>(series: &[S]) -> Result<Self> {
        let (min, max) = series
            .iter()
            .flat_map(|s| s.as_ref().iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::invalid("cannot scale an empty or non-finite series"));
        }
        if max <= min {
            return Err(Error::Degenerate(format!(
                "all values equal {min}; range is empty"
            )));
        }
        Ok(Self { min, max })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    #[inline]
    pub fn invert(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

/// Band magnitudes of one channel across epochs, rescaled by a common range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedMagnitudes {
    pub values: Vec<Vec<f64>>,
    pub scaling: Scaling,
}

/// Rescales every epoch of `series` with the global minimum and maximum over
/// all epochs, so the smallest value maps to 0 and the largest to 1.
pub fn standardize<S: AsRef<[f64]>>(series: &[S]) -> Result<StandardizedMagnitudes> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "standardisation needs at least two epochs, got {}",
            series.len()
        )));
    }
    let scaling = Scaling::from_series(series)?;
    let values = series
        .iter()
        .map(|s| s.as_ref().iter().map(|&x| scaling.apply(x)).collect())
        .collect();
    Ok(StandardizedMagnitudes { values, scaling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn segment_reference_layout() {
        let streams = vec![vec![0.5; 600_000]; 32];
        let t = segment_epochs(&streams, 1000, 1000.0, SegmentOptions::default()).unwrap();
        assert_eq!((t.channels(), t.epochs(), t.epoch_len()), (32, 600, 1000));
    }

    #[test]
    fn segment_single_and_short() {
        let t = segment_epochs(&[vec![1.0; 1000]], 1000, 1000.0, SegmentOptions::default()).unwrap();
        assert_eq!(t.epochs(), 1);
        let err = segment_epochs(&[vec![1.0; 999]], 1000, 1000.0, SegmentOptions::default());
        assert!(matches!(err, Err(Error::StreamTooShort { .. })));
    }

    #[test]
    fn segment_trailing_policy_and_mismatch() {
        let strict = segment_epochs(&[vec![1.0; 2500]], 1000, 1000.0, SegmentOptions::default());
        assert!(matches!(strict, Err(Error::TrailingSamples { .. })));
        let lax = SegmentOptions {
            allow_trailing: true,
            ..Default::default()
        };
        assert_eq!(segment_epochs(&[vec![1.0; 2500]], 1000, 1000.0, lax).unwrap().epochs(), 2);
        let mismatch = segment_epochs(&[vec![1.0; 2000], vec![1.0; 1000]], 1000, 1000.0, lax);
        assert!(matches!(mismatch, Err(Error::ChannelLengthMismatch { channel: 1, .. })));
    }

    #[test]
    fn segment_overlapping_stride() {
        let stream: Vec<f64> = (0..10).map(f64::from).collect();
        let opts = SegmentOptions {
            stride: Some(2),
            allow_trailing: false,
        };
        let t = segment_epochs(&[stream], 4, 4.0, opts).unwrap();
        assert_eq!(t.epochs(), 4);
        assert_eq!(t.epoch(0, 1), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(t.epoch(0, 3), &[6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn dc_only_spectrum() {
        let m = fourier_magnitudes(&[2.5; 1000]).unwrap();
        assert_eq!(m.len(), 501);
        assert!((m[0] - 1000f64.sqrt() * 2.5).abs() < 1e-9);
        assert!(m[1..].iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn pure_cosine_concentrates_in_one_bin() {
        let t = 1000;
        let x: Vec<f64> = (1..=t)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / t as f64).cos())
            .collect();
        let m = fourier_magnitudes(&x).unwrap();
        // closed form: |f_10| = sqrt(T) / 2
        assert!((m[10] - (t as f64).sqrt() / 2.0).abs() < 1e-9);
        for (k, &v) in m.iter().enumerate() {
            if k != 10 {
                assert!(v < 1e-9, "bin {k} = {v}");
            }
        }
    }

    #[test]
    fn parseval_under_unitary_scaling() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3, crate::rng::tag::TEST, &[]);
        let x: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() - 0.5).collect();
        let m = fourier_magnitudes(&x).unwrap();
        // full spectrum energy: bins 1..T/2-1 appear twice (conjugate symmetry)
        let half = m.len() - 1;
        let spec: f64 = m[0] * m[0]
            + m[half] * m[half]
            + 2.0 * m[1..half].iter().map(|v| v * v).sum::<f64>();
        let time: f64 = x.iter().map(|v| v * v).sum();
        assert!((spec - time).abs() < 1e-9 * time);
    }

    #[test]
    fn non_finite_and_odd_length_rejected() {
        assert!(matches!(fourier_magnitudes(&[1.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(fourier_magnitudes(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn delta_band_has_four_bins() {
        let bands = default_bands(true);
        let mags = vec![1.0; 501];
        let d = band_extract(&mags, &bands[0], 1000.0, 0, 0).unwrap();
        assert_eq!(d.freqs_hz, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn gamma_band_cardinality_with_and_without_notch() {
        let with = default_bands(true)[4].bins(1000, 1000.0).unwrap();
        assert_eq!(with.len(), 269);
        assert!(!with.contains(&60));
        assert_eq!((with[0], *with.last().unwrap()), (31, 300));
        let without = default_bands(false)[4].bins(1000, 1000.0).unwrap();
        assert_eq!(without.len(), 270);
    }

    #[test]
    fn empty_band_and_nyquist() {
        let b = BandSpec::new("tiny", 0.0, 0.5, Vec::new()).unwrap();
        assert!(matches!(b.bins(1000, 1000.0), Err(Error::EmptyBand(_))));
        let b = BandSpec::new("high", 400.0, 600.0, Vec::new()).unwrap();
        assert!(b.bins(1000, 1000.0).is_err());
        assert!(BandSpec::new("bad", 10.0, 20.0, vec![25.0]).is_err());
    }

    #[test]
    fn bands_partition_without_overlap() {
        let bands = default_bands(true);
        let mut all: Vec<usize> = bands
            .iter()
            .flat_map(|b| b.bins(1000, 1000.0).unwrap())
            .collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n, "bands overlap");
        let expected: Vec<usize> = (1..=300).filter(|&k| k != 60).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn other_resolutions() {
        // 2 s epochs at 1 kHz: 0.5 Hz bins
        let bins = default_bands(true)[0].bins(2000, 1000.0).unwrap();
        assert_eq!(bins, vec![1, 2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn standardize_endpoints_and_errors() {
        let s = standardize(&[vec![2.0, 4.0], vec![6.0]]).unwrap();
        assert_eq!(s.values, vec![vec![0.0, 0.5], vec![1.0]]);
        assert!(matches!(
            standardize(&[vec![3.0, 3.0], vec![3.0]]),
            Err(Error::Degenerate(_))
        ));
        assert!(standardize(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn standardize_is_idempotent_on_unit_data() {
        let s = standardize(&[vec![2.0, 4.0], vec![6.0, 5.0]]).unwrap();
        let again = standardize(&s.values).unwrap();
        assert_eq!(again.values, s.values);
    }

    proptest! {
        #[test]
        fn standardize_preserves_ranks_and_inverts(
            data in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 1..6), 2..6)
        ) {
            prop_assume!(Scaling::from_series(&data).is_ok());
            let s = standardize(&data).unwrap();
            let flat_in: Vec<f64> = data.iter().flatten().copied().collect();
            let flat_out: Vec<f64> = s.values.iter().flatten().copied().collect();
            prop_assert!(flat_out.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for i in 0..flat_in.len() {
                for j in 0..flat_in.len() {
                    if flat_in[i] < flat_in[j] {
                        prop_assert!(flat_out[i] < flat_out[j]);
                    }
                }
                let back = s.scaling.invert(flat_out[i]);
                prop_assert!((back - flat_in[i]).abs() <= 1e-12 * flat_in[i].abs().max(s.scaling.max - s.scaling.min));
            }
        }

        #[test]
        fn magnitudes_nonnegative_and_deterministic(x in prop::collection::vec(-10.0f64..10.0, 16)) {
            let a = fourier_magnitudes(&x).unwrap();
            let b = fourier_magnitudes(&x).unwrap();
            prop_assert!(a.iter().all(|&v| v >= 0.0));
            prop_assert_eq!(a, b);
        }
    }
}
