//! Cycle-synchronous windowing, harmonic analysis, Hilbert envelope and the
//! per-window feature vector used for classification.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::WaveformRecord;

/// Highest harmonic included in THD and the feature vector.
pub const MAX_HARMONIC: usize = 13;

/// Fraction of the window excluded from envelope statistics at each edge.
pub const EDGE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisWindow {
    samples: Vec<f64>,
    sample_rate: f64,
    fundamental: f64,
    cycles: usize,
    channel: String,
    start_time: f64,
}

/// Samples per fundamental cycle, rounded to the nearest integer.
pub fn samples_per_cycle(sample_rate: f64, fundamental: f64) -> usize {
    (sample_rate / fundamental).round() as usize
}

impl AnalysisWindow {
    pub fn new(samples: Vec<f64>, sample_rate: f64, fundamental: f64, channel: impl Into<String>, start_time: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && fundamental > 0.0) {
            return Err(Error::param("window", "sample rate and fundamental must be > 0"));
        }
        let spc = samples_per_cycle(sample_rate, fundamental);
        if spc == 0 || samples.len() % spc != 0 {
            return Err(Error::param(
                "window",
                format!("{} samples is not a whole number of {spc}-sample cycles", samples.len()),
            ));
        }
        let cycles = samples.len() / spc;
        if cycles < 2 {
            return Err(Error::param("window", "needs at least 2 cycles"));
        }
        Ok(Self {
            samples,
            sample_rate,
            fundamental,
            cycles,
            channel: channel.into(),
            start_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
    pub fn fundamental(&self) -> f64 {
        self.fundamental
    }
    pub fn cycles(&self) -> usize {
        self.cycles
    }
    pub fn channel(&self) -> &str {
        &self.channel
    }
    pub fn start_time(&self) -> f64 {
        self.start_time
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Window length and stride in samples.
pub fn window_geometry(sample_rate: f64, fundamental: f64, cycles: usize, overlap: f64) -> Result<(usize, usize)> {
    if cycles < 2 {
        return Err(Error::param("cycles", "must be >= 2"));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::param("overlap", format!("must be in [0, 0.9], got {overlap}")));
    }
    let len = cycles * samples_per_cycle(sample_rate, fundamental);
    let stride = ((len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    Ok((len, stride))
}

pub fn make_windows(record: &WaveformRecord, channel: &str, fundamental: f64, cycles: usize, overlap: f64) -> Result<Vec<AnalysisWindow>> {
    let data = record.channel(channel)?;
    let (len, stride) = window_geometry(record.sample_rate(), fundamental, cycles, overlap)?;
    if data.len() < len {
        return Err(Error::param(
            "record",
            format!("{} samples is shorter than one {len}-sample window", data.len()),
        ));
    }
    let count = (data.len() - len) / stride + 1;
    (0..count)
        .map(|w| {
            let start = w * stride;
            AnalysisWindow::new(
                data[start..start + len].to_vec(),
                record.sample_rate(),
                fundamental,
                channel,
                record.start_time() + start as f64 / record.sample_rate(),
            )
        })
        .collect()
}

fn fft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    /// Signed mean value.
    pub dc: f64,
    /// Index k holds harmonic k (index 0 is |dc|).
    pub amplitudes: Vec<f64>,
    /// Phases (rad) relative to a cosine at the window start.
    pub phases: Vec<f64>,
}

/// Amplitudes and phases at integer multiples of the fundamental. Bins are
/// exact because windows hold whole cycles.
pub fn harmonic_spectrum(window: &AnalysisWindow, max_harmonic: usize) -> Result<HarmonicSpectrum> {
    if max_harmonic as f64 * window.fundamental >= window.sample_rate / 2.0 {
        return Err(Error::param(
            "max_harmonic",
            format!(
                "harmonic {max_harmonic} of {} Hz aliases at {} Hz sampling",
                window.fundamental, window.sample_rate
            ),
        ));
    }
    let spec = fft(&window.samples);
    Ok(spectrum_from_fft(&spec, window.cycles, max_harmonic))
}

fn spectrum_from_fft(spec: &[Complex64], cycles: usize, max_harmonic: usize) -> HarmonicSpectrum {
    let n = spec.len() as f64;
    let dc = spec[0].re / n;
    let mut amplitudes = vec![dc.abs()];
    let mut phases = vec![0.0];
    for k in 1..=max_harmonic {
        let c = spec[k * cycles];
        amplitudes.push(2.0 * c.norm() / n);
        phases.push(c.arg());
    }
    HarmonicSpectrum { dc, amplitudes, phases }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub envelope: Vec<f64>,
    /// Instantaneous frequency, Hz (one sample shorter than the envelope).
    pub frequency: Vec<f64>,
}

impl Envelope {
    /// Index range kept after dropping `EDGE_FRACTION` at each end.
    pub fn interior(len: usize) -> std::ops::Range<usize> {
        let edge = (len as f64 * EDGE_FRACTION).ceil() as usize;
        edge..len.saturating_sub(edge).max(edge)
    }
}

fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // keep DC and Nyquist, double positive frequencies, zero negative ones
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= w / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Analytic-signal magnitude and phase-derivative frequency.
pub fn hilbert_envelope(window: &AnalysisWindow) -> Envelope {
    let z = analytic_signal(&window.samples);
    let envelope = z.iter().map(|c| c.norm()).collect();
    let scale = window.sample_rate / (2.0 * PI);
    let frequency = z
        .windows(2)
        .map(|w| {
            if w[0].norm() == 0.0 || w[1].norm() == 0.0 {
                0.0
            } else {
                (w[1] * w[0].conj()).arg() * scale
            }
        })
        .collect();
    Envelope { envelope, frequency }
}

/// Per-window scalar features. Zero-energy windows report zero for every
/// ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rms: f64,
    pub dc: f64,
    pub fundamental: f64,
    /// Harmonics 2..=13.
    pub harmonics: [f64; MAX_HARMONIC - 1],
    pub thd: f64,
    /// Even-harmonic energy over total harmonic energy (k = 1..=13).
    pub even_odd_ratio: f64,
    /// |E+ - E-| / (E+ + E-) over positive and negative polarity samples.
    pub asymmetry: f64,
    pub crest_factor: f64,
    pub envelope_mean: f64,
    pub envelope_std: f64,
    /// (max - min) / (max + min) of the interior envelope.
    pub modulation_index: f64,
    /// Fraction of mean-square power outside DC and harmonics 1..=13.
    pub interharmonic_fraction: f64,
}

impl FeatureVector {
    pub const LEN: usize = 10 + MAX_HARMONIC;

    /// Stable column names, in [`FeatureVector::to_vec`] order.
    pub fn names() -> Vec<String> {
        let mut v = vec!["rms".to_string(), "dc".to_string(), "h1".to_string()];
        v.extend((2..=MAX_HARMONIC).map(|k| format!("h{k}")));
        v.extend(
            [
                "thd",
                "even_odd_ratio",
                "asymmetry",
                "crest_factor",
                "envelope_mean",
                "envelope_std",
                "modulation_index",
                "interharmonic_fraction",
            ]
            .map(String::from),
        );
        v
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.rms, self.dc, self.fundamental];
        v.extend_from_slice(&self.harmonics);
        v.extend_from_slice(&[
            self.thd,
            self.even_odd_ratio,
            self.asymmetry,
            self.crest_factor,
            self.envelope_mean,
            self.envelope_std,
            self.modulation_index,
            self.interharmonic_fraction,
        ]);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::LEN {
            return Err(Error::Mismatch(format!("expected {} features, got {}", Self::LEN, v.len())));
        }
        let h = MAX_HARMONIC + 2;
        Ok(Self {
            rms: v[0],
            dc: v[1],
            fundamental: v[2],
            harmonics: std::array::from_fn(|i| v[3 + i]),
            thd: v[h],
            even_odd_ratio: v[h + 1],
            asymmetry: v[h + 2],
            crest_factor: v[h + 3],
            envelope_mean: v[h + 4],
            envelope_std: v[h + 5],
            modulation_index: v[h + 6],
            interharmonic_fraction: v[h + 7],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn extract_features(window: &AnalysisWindow) -> Result<FeatureVector> {
    let x = &window.samples;
    let n = x.len() as f64;
    let spec = fft(x);
    let hs = spectrum_from_fft(&spec, window.cycles, MAX_HARMONIC);
    if MAX_HARMONIC as f64 * window.fundamental >= window.sample_rate / 2.0 {
        return Err(Error::param("window", "sample rate too low for 13 harmonics"));
    }
    let a = &hs.amplitudes;

    let mean_square = x.iter().map(|v| v * v).sum::<f64>() / n;
    let rms = mean_square.sqrt();
    let harm_sq: f64 = a[2..].iter().map(|v| v * v).sum();
    let thd = ratio(harm_sq.sqrt(), a[1]);
    let even: f64 = a.iter().enumerate().skip(1).filter(|(k, _)| k % 2 == 0).map(|(_, v)| v * v).sum();
    let all: f64 = a[1..].iter().map(|v| v * v).sum();
    let even_odd_ratio = ratio(even, all);

    let (mut e_pos, mut e_neg, mut peak) = (0.0, 0.0, 0.0f64);
    for &v in x {
        if v > 0.0 {
            e_pos += v * v;
        } else {
            e_neg += v * v;
        }
        peak = peak.max(v.abs());
    }
    let asymmetry = ratio((e_pos - e_neg).abs(), e_pos + e_neg);
    let crest_factor = ratio(peak, rms);

    let env = hilbert_envelope(window);
    let interior = &env.envelope[Envelope::interior(env.envelope.len())];
    let m = interior.len().max(1) as f64;
    let envelope_mean = interior.iter().sum::<f64>() / m;
    let envelope_std = (interior.iter().map(|v| (v - envelope_mean).powi(2)).sum::<f64>() / m).sqrt();
    let (emin, emax) = interior
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let modulation_index = if interior.is_empty() { 0.0 } else { ratio(emax - emin, emax + emin) };

    let in_band = hs.dc * hs.dc + a[1..].iter().map(|v| v * v / 2.0).sum::<f64>();
    let interharmonic_fraction = ratio((mean_square - in_band).max(0.0), mean_square);

    Ok(FeatureVector {
        rms,
        dc: hs.dc,
        fundamental: a[1],
        harmonics: std::array::from_fn(|i| a[i + 2]),
        thd,
        even_odd_ratio,
        asymmetry,
        crest_factor,
        envelope_mean,
        envelope_std,
        modulation_index,
        interharmonic_fraction,
    })
}
