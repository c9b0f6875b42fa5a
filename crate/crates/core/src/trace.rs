//! Noisy amplitude traces and their on-disk form: a `t_ns,amplitude` CSV
//! next to a JSON sidecar holding the metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::NS;
use crate::dynamics::AmplitudeTrajectory;
use crate::error::{Error, Result};
use crate::pulse::TimelineDocument;

pub const TRACE_FORMAT_VERSION: u32 = 1;
const CSV_HEADER: [&str; 2] = ["t_ns", "amplitude"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub timeline_hash: String,
    /// Single-shot amplitude noise.
    pub noise_sigma: f64,
    pub n_avg: u64,
    pub seed: u64,
    /// Random stream within `seed`; distinct per trace of a sweep.
    #[serde(default)]
    pub stream: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<TimelineDocument>,
}

impl TraceMeta {
    /// Noise on each stored (averaged) sample, if any.
    pub fn sample_sigma(&self) -> Option<f64> {
        (self.noise_sigma > 0.0).then(|| self.noise_sigma / (self.n_avg as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times_ns: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ns.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times_ns.len() != self.amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: self.times_ns.len(),
                found: self.amplitudes.len(),
            });
        }
        check_monotonic(&self.times_ns)
    }

    /// Sampling period, ns.
    pub fn period_ns(&self) -> Option<f64> {
        let n = self.times_ns.len();
        (n >= 2).then(|| (self.times_ns[n - 1] - self.times_ns[0]) / (n - 1) as f64)
    }
}

fn check_monotonic(times: &[f64]) -> Result<()> {
    match times.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::NonMonotonicTime { index: i + 1 }),
        None => Ok(()),
    }
}

/// Samples a trajectory at `rate_per_ns` and adds the mean of `n_avg`
/// independent Gaussian draws of width `sigma` to every sample.
pub fn sample_trace(traj: &AmplitudeTrajectory, rate_per_ns: f64, sigma: f64, n_avg: u64, seed: u64) -> Result<Trace> {
    sample_trace_stream(traj, rate_per_ns, sigma, n_avg, seed, 0)
}

pub fn sample_trace_stream(
    traj: &AmplitudeTrajectory,
    rate_per_ns: f64,
    sigma: f64,
    n_avg: u64,
    seed: u64,
    stream: u64,
) -> Result<Trace> {
    if !(rate_per_ns > 0.0 && rate_per_ns.is_finite()) {
        return Err(Error::non_positive("sample rate"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("noise sigma", "negative"));
    }
    if n_avg == 0 {
        return Err(Error::non_positive("N_avg"));
    }
    let (first, last) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a / NS, b / NS),
        _ => return Err(Error::Precondition("empty trajectory".into())),
    };
    let period = 1.0 / rate_per_ns;
    let n = ((last - first) / period * (1.0 + 1e-12)).floor() as usize + 1;
    let times_ns: Vec<f64> = (0..n).map(|k| first + period * k as f64).collect();
    let mut amplitudes: Vec<f64> = times_ns
        .iter()
        .map(|&t| traj.amplitude_at((t * NS).min(traj.times[traj.times.len() - 1])).unwrap_or(0.0))
        .collect();

    let meta = TraceMeta {
        timeline_hash: traj.timeline.fingerprint(),
        noise_sigma: sigma,
        n_avg,
        seed,
        stream,
        schedule: Some(traj.timeline.to_document()),
    };
    if let Some(s) = meta.sample_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let noise = Normal::new(0.0, s).map_err(|e| Error::invalid("noise sigma", e.to_string()))?;
        for a in &mut amplitudes {
            *a += noise.sample(&mut rng);
        }
    }
    Ok(Trace {
        times_ns,
        amplitudes,
        meta,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format_version: u32,
    n_samples: usize,
    #[serde(flatten)]
    meta: TraceMeta,
}

/// JSON sidecar path belonging to a trace CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    trace.validate()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let csv_err = |e: csv::Error| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for (t, a) in trace.times_ns.iter().zip(&trace.amplitudes) {
        w.serialize((t, a)).map_err(csv_err)?;
    }
    w.flush()?;

    let sidecar = Sidecar {
        format_version: TRACE_FORMAT_VERSION,
        n_samples: trace.len(),
        meta: trace.meta.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    let mut f = BufWriter::new(File::create(sidecar_path(path))?);
    f.write_all(json.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let side_path = sidecar_path(path);
    if !side_path.exists() {
        return Err(Error::MissingSidecar(side_path));
    }
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(File::open(&side_path)?))?;
    if sidecar.format_version != TRACE_FORMAT_VERSION {
        return Err(Error::MalformedCsv {
            path: side_path,
            reason: format!("unsupported format version {}", sidecar.format_version),
        });
    }

    let malformed = |reason: String| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = r.headers().map_err(|e| malformed(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(malformed(format!("expected header `{}`", CSV_HEADER.join(","))));
    }
    let mut times_ns = Vec::with_capacity(sidecar.n_samples);
    let mut amplitudes = Vec::with_capacity(sidecar.n_samples);
    for (row, record) in r.deserialize::<(f64, f64)>().enumerate() {
        let (t, a) = record.map_err(|e| malformed(format!("row {}: {e}", row + 1)))?;
        times_ns.push(t);
        amplitudes.push(a);
    }
    if times_ns.len() != sidecar.n_samples {
        return Err(Error::LengthMismatch {
            expected: sidecar.n_samples,
            found: times_ns.len(),
        });
    }
    check_monotonic(&times_ns)?;
    Ok(Trace {
        times_ns,
        amplitudes,
        meta: sidecar.meta,
    })
}
