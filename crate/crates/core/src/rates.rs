//! Photon absorption / emission rates induced by a voltage-biased QCR and the
//! resulting damping rate of the resonator mode.
//!
//! Leading order in `rho`, single-photon processes, bias split symmetrically
//! over the two junctions:
//!
//! ```text
//! Γ↓(V) = rho (2 R_K / R_T) Σ_{σ=±1} F(σ eV/2 + h f0)
//! Γ↑(V) = rho (2 R_K / R_T) Σ_{σ=±1} F(σ eV/2 - h f0)
//! γ_QCR = Γ↓ - Γ↑
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::constants::{BOLTZMANN, ELEMENTARY_CHARGE, UV};
use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::params::{DerivedParams, DeviceParams};
use crate::tunneling::{TunnelKernel, TunnelKernelParams};

/// Largest bias accepted, |eV| in units of the gap.
pub const MAX_BIAS_GAPS: f64 = 10.0;

/// Anything that maps a QCR bias voltage to a damping rate in 1/s.
pub trait DampingModel: Send + Sync {
    fn gamma_qcr(&self, volts: f64) -> Result<f64>;

    /// Maximum of `gamma_qcr` over a 65-point grid on `[0, v_max]`.
    fn max_on(&self, v_max: f64) -> Result<f64> {
        let n = 64;
        (0..=n).try_fold(0.0_f64, |acc, i| {
            let v = v_max * i as f64 / n as f64;
            Ok(acc.max(self.gamma_qcr(v)?))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRates {
    /// Photon absorption by the QCR, 1/s.
    pub down: f64,
    /// Photon emission by the QCR, 1/s.
    pub up: f64,
}

impl TransitionRates {
    pub fn damping(&self) -> f64 {
        self.down - self.up
    }
}

/// Live theory model built from the device parameters.
#[derive(Debug, Clone, Copy)]
pub struct QcrModel {
    pub derived: DerivedParams,
    pub kernel: TunnelKernel,
}

impl QcrModel {
    pub fn new(device: &DeviceParams) -> Result<Self> {
        device.validate()?;
        Ok(Self::from_parts(device.derive(), device.kernel()))
    }

    pub fn from_parts(derived: DerivedParams, kernel: TunnelKernelParams) -> Self {
        Self {
            derived,
            kernel: TunnelKernel::new(kernel),
        }
    }

    pub fn gap(&self) -> f64 {
        self.kernel.params.delta
    }

    /// Bias voltage at which `eV = fraction * 2Δ`.
    pub fn volts_at_fraction(&self, fraction: f64) -> f64 {
        fraction * 2.0 * self.gap() / ELEMENTARY_CHARGE
    }

    fn prefactor(&self) -> f64 {
        self.derived.rho * 2.0 * self.derived.r_k / self.kernel.params.r_t
    }

    pub fn transition_rates(&self, volts: f64) -> Result<TransitionRates> {
        let half_bias = 0.5 * ELEMENTARY_CHARGE * volts;
        if !(2.0 * half_bias.abs() <= MAX_BIAS_GAPS * self.gap()) {
            return Err(Error::Precondition(format!(
                "|eV| = {:.3} Delta exceeds {MAX_BIAS_GAPS} Delta",
                2.0 * half_bias.abs() / self.gap()
            )));
        }
        let photon = self.derived.photon_energy;
        let f = |e: f64| self.kernel.forward_rate(e).map(|r| r.value);
        let pre = self.prefactor();
        let down = pre * (f(half_bias + photon)? + f(-half_bias + photon)?);
        let up = pre * (f(half_bias - photon)? + f(-half_bias - photon)?);
        Ok(TransitionRates { down, up })
    }

    pub fn damping(&self, volts: f64) -> Result<f64> {
        self.transition_rates(volts).map(|r| r.damping())
    }

    pub fn effective_temperature(&self, volts: f64) -> Result<f64> {
        let r = self.transition_rates(volts)?;
        effective_temperature_from_rates(r, self.derived.photon_energy)
    }

    pub fn rate_point(&self, volts: f64) -> Result<RatePoint> {
        let r = self.transition_rates(volts)?;
        Ok(RatePoint {
            volts,
            gamma_down: r.down,
            gamma_up: r.up,
            gamma_qcr: r.damping(),
            t_eff: effective_temperature_from_rates(r, self.derived.photon_energy)?,
        })
    }
}

impl DampingModel for QcrModel {
    fn gamma_qcr(&self, volts: f64) -> Result<f64> {
        self.damping(volts)
    }
}

pub fn transition_rates(volts: f64, d: &DerivedParams, k: &TunnelKernelParams) -> Result<TransitionRates> {
    QcrModel::from_parts(*d, *k).transition_rates(volts)
}

pub fn qcr_damping(volts: f64, d: &DerivedParams, k: &TunnelKernelParams) -> Result<f64> {
    QcrModel::from_parts(*d, *k).damping(volts)
}

pub fn effective_temperature(volts: f64, d: &DerivedParams, k: &TunnelKernelParams) -> Result<f64> {
    QcrModel::from_parts(*d, *k).effective_temperature(volts)
}

/// Mode temperature for which the Boltzmann ratio equals Γ↑/Γ↓.
pub fn effective_temperature_from_rates(r: TransitionRates, photon_energy: f64) -> Result<f64> {
    if !(r.down > r.up) || !(r.up > 0.0) {
        return Err(Error::NoCooling { down: r.down, up: r.up });
    }
    Ok(photon_energy / (BOLTZMANN * (r.down / r.up).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub volts: f64,
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_qcr: f64,
    pub t_eff: f64,
}

/// Tabulated damping curve over a strictly increasing voltage grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    /// Fingerprint of the device parameters the curve was computed from.
    pub provenance: String,
    /// Gap used for the `eV/2Δ` column, J.
    pub gap: f64,
}

pub const RATE_CSV_HEADER: &str =
    "eV_over_2Delta,V_uV,Gamma_down_1_per_s,Gamma_up_1_per_s,gamma_qcr_1_per_s,T_eff_K";

/// Evaluates the model on every grid voltage, in parallel, keeping grid order.
pub fn rate_curve(grid: &[f64], device: &DeviceParams) -> Result<RateCurve> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty voltage grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("voltage grid must increase strictly".into()));
    }
    let model = QcrModel::new(device)?;
    let points = grid
        .par_iter()
        .map(|&v| {
            model.rate_point(v).map_err(|e| Error::AtVoltage {
                volts: v,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurve {
        points,
        provenance: device.fingerprint(),
        gap: device.delta,
    })
}

/// `n` evenly spaced voltages with `eV/2Δ` running from `lo` to `hi`.
pub fn fraction_grid(lo: f64, hi: f64, n: usize, gap: f64) -> Vec<f64> {
    let to_volts = 2.0 * gap / ELEMENTARY_CHARGE;
    match n {
        0 => Vec::new(),
        1 => vec![lo * to_volts],
        _ => (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64) * to_volts)
            .collect(),
    }
}

impl RateCurve {
    pub fn voltages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.volts).collect()
    }

    pub fn fraction(&self, volts: f64) -> f64 {
        ELEMENTARY_CHARGE * volts / (2.0 * self.gap)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(100 * (self.points.len() + 1));
        out.push_str(RATE_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                self.fraction(p.volts),
                p.volts / UV,
                p.gamma_down,
                p.gamma_up,
                p.gamma_qcr,
                p.t_eff
            );
        }
        out
    }

    /// Parses the CSV written by [`RateCurve::to_csv`]. The gap is recovered
    /// from the voltage and fraction columns.
    pub fn from_csv(text: &str) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedCsv {
            path: "<rate curve>".into(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>().join(",") != RATE_CSV_HEADER {
            return Err(malformed("unexpected header".into()));
        }
        let mut points = Vec::new();
        let mut gap = None;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| malformed(e.to_string()))?;
            let field = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| malformed(format!("row {}: column {j} is not a number", i + 1)))
            };
            let fraction = field(0)?;
            let volts = field(1)? * UV;
            if fraction != 0.0 && gap.is_none() {
                gap = Some(ELEMENTARY_CHARGE * volts / (2.0 * fraction));
            }
            points.push(RatePoint {
                volts,
                gamma_down: field(2)?,
                gamma_up: field(3)?,
                gamma_qcr: field(4)?,
                t_eff: field(5)?,
            });
        }
        if points.is_empty() {
            return Err(malformed("no rows".into()));
        }
        if points.windows(2).any(|w| !(w[1].volts > w[0].volts)) {
            return Err(malformed("voltage column must increase strictly".into()));
        }
        Ok(Self {
            points,
            provenance: String::new(),
            gap: gap.unwrap_or(f64::NAN),
        })
    }

    /// Interpolation table of γ_QCR over |V|.
    pub fn damping_table(&self) -> Result<DampingTable> {
        let (v, g): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .filter(|p| p.volts >= 0.0)
            .map(|p| (p.volts, p.gamma_qcr))
            .unzip();
        DampingTable::new(v, g)
    }
}

/// γ_QCR(|V|) interpolated with a monotone cubic; never extrapolates.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingTable {
    interp: Pchip,
}

impl DampingTable {
    /// Voltages must be non-negative and strictly increasing.
    pub fn new(volts: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if volts.first().is_some_and(|&v| v < 0.0) {
            return Err(Error::Precondition("damping table voltages must be non-negative".into()));
        }
        Ok(Self {
            interp: Pchip::new(volts, gamma)?,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.interp.domain()
    }
}

impl DampingModel for DampingTable {
    fn gamma_qcr(&self, volts: f64) -> Result<f64> {
        self.interp.eval(volts.abs()).ok_or_else(|| {
            let (min, max) = self.interp.domain();
            Error::OutOfRange { volts, min, max }
        })
    }
}

/// Another model multiplied by a constant factor.
#[derive(Debug, Clone)]
pub struct Scaled<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: DampingModel> DampingModel for Scaled<M> {
    fn gamma_qcr(&self, volts: f64) -> Result<f64> {
        Ok(self.factor * self.inner.gamma_qcr(volts)?)
    }
}
