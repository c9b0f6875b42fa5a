//! Device parameters, derived couplings and the JSON configuration document.
//!
//! Internally everything is strict SI. The configuration document carries an
//! explicit unit suffix on every field name (`Delta_ueV`, `f0_GHz`, ...) and
//! conversion happens only in [`load_params`] / [`write_params`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{FEMTOFARAD, GHZ, KILOOHM, MICRO_EV, PLANCK, RESISTANCE_QUANTUM};
use crate::error::{Error, Result};
use crate::reference;
use crate::tunneling::TunnelKernelParams;

/// Physical description of the resonator + QCR sample, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    /// Tunneling resistance of one NIS junction, ohm.
    pub r_t: f64,
    /// Electron temperature of the normal-metal island, K.
    pub t_n: f64,
    /// Dynes broadening parameter.
    pub gamma_d: f64,
    /// Resonator characteristic impedance, ohm.
    pub z_r: f64,
    /// QCR-to-resonator coupling capacitance, F.
    pub c_c: f64,
    /// Capacitance of one NIS junction, F.
    pub c_m: f64,
    /// Fundamental mode frequency, Hz.
    pub f0: f64,
    /// Superconducting gap of the leads, J.
    pub delta: f64,
}

impl DeviceParams {
    /// The characterized sample.
    pub fn table_one() -> Self {
        Self {
            r_t: 14.0 * KILOOHM,
            t_n: 0.17,
            gamma_d: 4e-4,
            z_r: 35.0,
            c_c: 840.0 * FEMTOFARAD,
            c_m: 5.0 * FEMTOFARAD,
            f0: 8.683 * GHZ,
            delta: 215.0 * MICRO_EV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("R_T", self.r_t),
            ("T_N", self.t_n),
            ("gamma_D", self.gamma_d),
            ("Z_r", self.z_r),
            ("C_c", self.c_c),
            ("C_m", self.c_m),
            ("f0", self.f0),
            ("Delta", self.delta),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::invalid(name, "non-finite"));
            }
            if value <= 0.0 {
                return Err(Error::non_positive(name));
            }
        }
        if self.gamma_d >= 1.0 {
            return Err(Error::invalid("gamma_D", "out-of-range (must be < 1)"));
        }
        let photon = PLANCK * self.f0;
        if photon >= self.delta {
            return Err(Error::PhotonAboveGap {
                photon_uev: photon / MICRO_EV,
                gap_uev: self.delta / MICRO_EV,
            });
        }
        Ok(())
    }

    pub fn derive(&self) -> DerivedParams {
        derive(self)
    }

    pub fn kernel(&self) -> TunnelKernelParams {
        TunnelKernelParams {
            delta: self.delta,
            gamma_d: self.gamma_d,
            t_n: self.t_n,
            r_t: self.r_t,
        }
    }

    /// Stable short hash of the canonical document form; used as provenance.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_string(&write_params(self)).expect("device document serializes");
        short_hash(doc.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Couplings derived from [`DeviceParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Capacitive division factor C_c / (C_c + 2 C_m).
    pub alpha_c: f64,
    /// Photon-assisted tunneling interaction parameter.
    pub rho: f64,
    /// Photon energy h f0, J.
    pub photon_energy: f64,
    /// Resistance quantum h/e^2, ohm.
    pub r_k: f64,
}

pub fn derive(params: &DeviceParams) -> DerivedParams {
    // the two junction capacitances shunt the island in parallel
    let alpha_c = params.c_c / (params.c_c + 2.0 * params.c_m);
    DerivedParams {
        alpha_c,
        rho: PI * alpha_c * alpha_c * params.z_r / RESISTANCE_QUANTUM,
        photon_energy: PLANCK * params.f0,
        r_k: RESISTANCE_QUANTUM,
    }
}

/// Damping channels of the resonator other than the biased QCR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentRates {
    /// Damping into the transmission line, 1/s.
    pub gamma_tr: f64,
    /// Excess damping as a fraction of `gamma_tr`.
    pub gamma_x_fraction: f64,
    /// Residual QCR damping at zero bias, 1/s.
    pub gamma_qcr_off: f64,
}

impl EnvironmentRates {
    pub fn new(gamma_tr: f64, gamma_x_fraction: f64, gamma_qcr_off: f64) -> Result<Self> {
        let env = Self {
            gamma_tr,
            gamma_x_fraction,
            gamma_qcr_off,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_tr > 0.0 && self.gamma_tr.is_finite()) {
            return Err(Error::non_positive("gamma_tr"));
        }
        if !(0.0..1.0).contains(&self.gamma_x_fraction) {
            return Err(Error::invalid("gamma_x_fraction", "out-of-range (must be in [0, 1))"));
        }
        if !(self.gamma_qcr_off >= 0.0 && self.gamma_qcr_off.is_finite()) {
            return Err(Error::invalid("gamma_qcr_off", "negative"));
        }
        Ok(())
    }

    pub fn gamma_x(&self) -> f64 {
        self.gamma_x_fraction * self.gamma_tr
    }

    /// gamma_tr + gamma_x.
    pub fn background(&self) -> f64 {
        self.gamma_tr + self.gamma_x()
    }
}

/// Device section of the configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDocument {
    #[serde(rename = "R_T_kohm", skip_serializing_if = "Option::is_none")]
    pub r_t_kohm: Option<f64>,
    #[serde(rename = "T_N_K", skip_serializing_if = "Option::is_none")]
    pub t_n_k: Option<f64>,
    #[serde(rename = "gamma_D", skip_serializing_if = "Option::is_none")]
    pub gamma_d: Option<f64>,
    #[serde(rename = "Z_r_ohm", skip_serializing_if = "Option::is_none")]
    pub z_r_ohm: Option<f64>,
    #[serde(rename = "C_c_fF", skip_serializing_if = "Option::is_none")]
    pub c_c_ff: Option<f64>,
    #[serde(rename = "C_m_fF", skip_serializing_if = "Option::is_none")]
    pub c_m_ff: Option<f64>,
    #[serde(rename = "f0_GHz", skip_serializing_if = "Option::is_none")]
    pub f0_ghz: Option<f64>,
    #[serde(rename = "Delta_ueV", skip_serializing_if = "Option::is_none")]
    pub delta_uev: Option<f64>,
}

/// Converts the unit-suffixed device document to SI and validates it.
pub fn load_params(doc: &DeviceDocument) -> Result<DeviceParams> {
    fn req(v: Option<f64>, name: &'static str) -> Result<f64> {
        v.ok_or(Error::MissingField(name))
    }
    let params = DeviceParams {
        r_t: req(doc.r_t_kohm, "R_T_kohm")? * KILOOHM,
        t_n: req(doc.t_n_k, "T_N_K")?,
        gamma_d: req(doc.gamma_d, "gamma_D")?,
        z_r: req(doc.z_r_ohm, "Z_r_ohm")?,
        c_c: req(doc.c_c_ff, "C_c_fF")? * FEMTOFARAD,
        c_m: req(doc.c_m_ff, "C_m_fF")? * FEMTOFARAD,
        f0: req(doc.f0_ghz, "f0_GHz")? * GHZ,
        delta: req(doc.delta_uev, "Delta_ueV")? * MICRO_EV,
    };
    params.validate()?;
    Ok(params)
}

pub fn write_params(p: &DeviceParams) -> DeviceDocument {
    DeviceDocument {
        r_t_kohm: Some(p.r_t / KILOOHM),
        t_n_k: Some(p.t_n),
        gamma_d: Some(p.gamma_d),
        z_r_ohm: Some(p.z_r),
        c_c_ff: Some(p.c_c / FEMTOFARAD),
        c_m_ff: Some(p.c_m / FEMTOFARAD),
        f0_ghz: Some(p.f0 / GHZ),
        delta_uev: Some(p.delta / MICRO_EV),
    }
}

/// Environment section. `gamma_qcr_off_per_s` falls back to the theory value
/// at zero bias when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDocument {
    pub gamma_tr_per_s: f64,
    #[serde(default = "default_gamma_x_fraction")]
    pub gamma_x_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_qcr_off_per_s: Option<f64>,
}

fn default_gamma_x_fraction() -> f64 {
    reference::GAMMA_X_FRACTION
}

impl Default for EnvironmentDocument {
    fn default() -> Self {
        Self {
            gamma_tr_per_s: reference::GAMMA_TR.value,
            gamma_x_fraction: reference::GAMMA_X_FRACTION,
            gamma_qcr_off_per_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub device: DeviceDocument,
    #[serde(default)]
    pub environment: EnvironmentDocument,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub device: DeviceParams,
    pub environment: EnvironmentDocument,
}

impl Config {
    pub fn table_one() -> Self {
        Self {
            device: DeviceParams::table_one(),
            environment: EnvironmentDocument::default(),
        }
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self> {
        let device = load_params(&doc.device)?;
        let env = &doc.environment;
        if !(env.gamma_tr_per_s > 0.0) {
            return Err(Error::non_positive("gamma_tr_per_s"));
        }
        if !(0.0..1.0).contains(&env.gamma_x_fraction) {
            return Err(Error::invalid("gamma_x_fraction", "out-of-range (must be in [0, 1))"));
        }
        if let Some(off) = env.gamma_qcr_off_per_s {
            if !(off >= 0.0) {
                return Err(Error::invalid("gamma_qcr_off_per_s", "negative"));
            }
        }
        Ok(Self {
            device,
            environment: env.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ConfigDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_document(&self) -> ConfigDocument {
        ConfigDocument {
            device: write_params(&self.device),
            environment: self.environment.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn table_one_document_loads() {
        let text = r#"{"device": {"R_T_kohm": 14, "T_N_K": 0.17, "gamma_D": 4e-4, "Z_r_ohm": 35,
            "C_c_fF": 840, "C_m_fF": 5, "f0_GHz": 8.683, "Delta_ueV": 215}}"#;
        let cfg = Config::from_json(text).unwrap();
        let p = cfg.device;
        let t = DeviceParams::table_one();
        assert!(rel(p.r_t, 14e3) < 1e-15);
        assert_eq!(p.t_n, 0.17);
        assert_eq!(p.gamma_d, 4e-4);
        assert_eq!(p.z_r, 35.0);
        assert!(rel(p.c_c, 840e-15) < 1e-15);
        assert!(rel(p.c_m, 5e-15) < 1e-15);
        assert!(rel(p.f0, 8.683e9) < 1e-15);
        assert!(rel(p.delta, 215e-6 * 1.602_176_634e-19) < 1e-15);
        assert_eq!(p, t);
        assert_eq!(cfg.environment.gamma_x_fraction, 0.10);
    }

    #[test]
    fn zero_gap_is_rejected_by_name() {
        let mut doc = write_params(&DeviceParams::table_one());
        doc.delta_uev = Some(0.0);
        let err = load_params(&doc).unwrap_err();
        assert_eq!(err.to_string(), "non-positive Delta");
    }

    #[test]
    fn photon_above_gap_is_rejected() {
        // h * 60 GHz = 248.1 ueV > 215 ueV
        let mut doc = write_params(&DeviceParams::table_one());
        doc.f0_ghz = Some(60.0);
        let err = load_params(&doc).unwrap_err();
        assert!(matches!(err, Error::PhotonAboveGap { .. }));
        assert!(err.to_string().contains("photon energy exceeds gap"));
    }

    #[test]
    fn missing_field_is_named() {
        let mut doc = write_params(&DeviceParams::table_one());
        doc.c_m_ff = None;
        let err = load_params(&doc).unwrap_err();
        assert_eq!(err.to_string(), "missing field `C_m_fF`");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"device": {"R_T": 14}}"#;
        assert!(Config::from_json(text).is_err());
    }

    #[test]
    fn derived_couplings_for_table_one() {
        let d = DeviceParams::table_one().derive();
        assert!((d.alpha_c - 840.0 / 850.0).abs() < 1e-15);
        assert!((d.alpha_c - 0.9882).abs() < 1e-4);
        assert!(rel(d.rho, 4.160_096_412_715_5e-3) < 1e-12);
        assert!(rel(d.photon_energy / MICRO_EV, 35.910_002_612_39) < 1e-12);
        assert!(d.alpha_c > 0.0 && d.alpha_c <= 1.0);
        assert!(d.rho > 0.0 && d.rho < 1.0);
    }

    #[test]
    fn derive_is_pure() {
        let p = DeviceParams::table_one();
        assert_eq!(p.derive(), p.derive());
    }

    #[test]
    fn gamma_d_must_be_below_one() {
        let mut p = DeviceParams::table_one();
        p.gamma_d = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let p = DeviceParams::table_one();
        let mut q = p;
        q.t_n = 0.18;
        assert_eq!(p.fingerprint(), p.fingerprint());
        assert_ne!(p.fingerprint(), q.fingerprint());
        assert_eq!(p.fingerprint().len(), 16);
    }

    #[test]
    fn environment_validation() {
        assert!(EnvironmentRates::new(1.2e7, 0.1, 1e5).is_ok());
        assert!(EnvironmentRates::new(0.0, 0.1, 1e5).is_err());
        assert!(EnvironmentRates::new(1.2e7, 1.0, 1e5).is_err());
        assert!(EnvironmentRates::new(1.2e7, 0.1, -1.0).is_err());
        let env = EnvironmentRates::new(1.2e7, 0.1, 0.0).unwrap();
        assert!(rel(env.background(), 1.32e7) < 1e-15);
    }
}
