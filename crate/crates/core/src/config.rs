//! Scenario configuration.
//!
//! Powers are carried in linear units internally (`pt_mw`, watts for noise);
//! the serialized record uses dBm for the transmit power and dBm/Hz for the
//! noise density.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// RIS phase-shifter resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseResolution {
    Continuous,
    Bits(u32),
}

impl PhaseResolution {
    /// Grid step `2π / 2^B`, `None` for continuous phases.
    pub fn step(self) -> Option<f64> {
        match self {
            PhaseResolution::Continuous => None,
            PhaseResolution::Bits(b) => Some(std::f64::consts::TAU / (1u64 << b) as f64),
        }
    }
}

impl fmt::Display for PhaseResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseResolution::Continuous => f.write_str("inf"),
            PhaseResolution::Bits(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for PhaseResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "continuous" => Ok(PhaseResolution::Continuous),
            other => {
                let b: u32 = other
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("phase bits `{s}`")))?;
                if b == 0 || b > 16 {
                    return Err(Error::InvalidConfig(format!("phase bits must be in 1..=16, got {b}")));
                }
                Ok(PhaseResolution::Bits(b))
            }
        }
    }
}

impl Serialize for PhaseResolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhaseResolution::Continuous => s.serialize_str("inf"),
            PhaseResolution::Bits(b) => s.serialize_u32(*b),
        }
    }
}

impl<'de> Deserialize<'de> for PhaseResolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(b) => PhaseResolution::from_str(&b.to_string()),
            Raw::Str(s) => PhaseResolution::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Path loss (dB) of the AP–RIS and RIS–user links at distance `d` metres.
pub fn ris_path_loss_db(d: f64) -> f64 {
    35.6 + 22.0 * d.log10()
}

/// Path loss (dB) of the direct AP–user link at distance `d` metres.
pub fn direct_path_loss_db(d: f64) -> f64 {
    32.6 + 36.7 * d.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// AP antennas.
    pub m: usize,
    /// Single-antenna users.
    pub k: usize,
    /// RIS elements; 0 means no RIS.
    pub n: usize,
    /// Maximum transmit power in milliwatts.
    pub pt_mw: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Rician factor; `f64::INFINITY` gives pure line of sight.
    pub kappa: f64,
    pub phase_bits: PhaseResolution,
    pub ap_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m: 8,
            k: 4,
            n: 100,
            pt_mw: 10.0,
            noise_psd_dbm_hz: -170.0,
            bandwidth_hz: 180e3,
            kappa: 10.0,
            phase_bits: PhaseResolution::Continuous,
            ap_pos: [0.0, 0.0],
            ris_pos: [200.0, 0.0],
            user_center: [200.0, 30.0],
            user_radius: 10.0,
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 {
            return bad("M must be positive".into());
        }
        if self.k == 0 {
            return bad("K must be positive".into());
        }
        if !(self.pt_mw > 0.0 && self.pt_mw.is_finite()) {
            return bad(format!("P_T must be positive, got {} mW", self.pt_mw));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return bad("noise PSD must be finite".into());
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if !(self.user_radius >= 0.0 && self.user_radius.is_finite()) {
            return bad(format!("user radius must be >= 0, got {}", self.user_radius));
        }
        let pts = [self.ap_pos, self.ris_pos, self.user_center];
        if pts.iter().flatten().any(|c| !c.is_finite()) {
            return bad("positions must be finite".into());
        }
        if !(self.noise_power_w() > 0.0) {
            return bad("noise power underflows to zero".into());
        }
        Ok(())
    }

    /// Transmit power budget in watts.
    pub fn pt_w(&self) -> f64 {
        self.pt_mw * 1e-3
    }

    pub fn pt_dbm(&self) -> f64 {
        mw_to_dbm(self.pt_mw)
    }

    pub fn with_pt_dbm(mut self, dbm: f64) -> Self {
        self.pt_mw = dbm_to_mw(dbm);
        self
    }

    /// Noise power in watts, identical for every user.
    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10();
        10f64.powf((dbm - 30.0) / 10.0)
    }

    /// Noise-to-power ratio σ²/P_T appearing in the WMMSE updates.
    pub fn noise_to_power(&self) -> f64 {
        self.noise_power_w() / self.pt_w()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ConfigRecord = serde_json::from_str(text)?;
        let cfg = SystemConfig::from(rec);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConfigRecord::from(self)).expect("config serializes")
    }
}

/// Serialized form of [`SystemConfig`]: transmit power in dBm, every field
/// optional on input with the defaults filled in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigRecord {
    #[serde(alias = "M")]
    pub m: usize,
    #[serde(alias = "K")]
    pub k: usize,
    #[serde(alias = "N")]
    pub n: usize,
    pub pt_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    #[serde(serialize_with = "ser_kappa", deserialize_with = "de_kappa")]
    pub kappa: f64,
    pub phase_bits: PhaseResolution,
    pub ap_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub seed: u64,
}

impl Default for ConfigRecord {
    fn default() -> Self {
        ConfigRecord::from(&SystemConfig::default())
    }
}

impl From<&SystemConfig> for ConfigRecord {
    fn from(c: &SystemConfig) -> Self {
        ConfigRecord {
            m: c.m,
            k: c.k,
            n: c.n,
            pt_dbm: c.pt_dbm(),
            noise_psd_dbm_hz: c.noise_psd_dbm_hz,
            bandwidth_hz: c.bandwidth_hz,
            kappa: c.kappa,
            phase_bits: c.phase_bits,
            ap_pos: c.ap_pos,
            ris_pos: c.ris_pos,
            user_center: c.user_center,
            user_radius: c.user_radius,
            seed: c.seed,
        }
    }
}

impl From<ConfigRecord> for SystemConfig {
    fn from(r: ConfigRecord) -> Self {
        SystemConfig {
            m: r.m,
            k: r.k,
            n: r.n,
            pt_mw: dbm_to_mw(r.pt_dbm),
            noise_psd_dbm_hz: r.noise_psd_dbm_hz,
            bandwidth_hz: r.bandwidth_hz,
            kappa: r.kappa,
            phase_bits: r.phase_bits,
            ap_pos: r.ap_pos,
            ris_pos: r.ris_pos,
            user_center: r.user_center,
            user_radius: r.user_radius,
            seed: r.seed,
        }
    }
}

impl Serialize for SystemConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SystemConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cfg = SystemConfig::from(ConfigRecord::deserialize(d)?);
        cfg.validate().map_err(serde::de::Error::custom)?;
        Ok(cfg)
    }
}

fn ser_kappa<S: Serializer>(k: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if k.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*k)
    }
}

fn de_kappa<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Str(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
        Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_noise_power() {
        let c = SystemConfig::default();
        let dbm = c.noise_psd_dbm_hz + 10.0 * c.bandwidth_hz.log10();
        assert!((dbm + 117.447).abs() < 1e-3, "{dbm}");
        assert!((c.noise_power_w() - 1.8e-15).abs() < 0.01e-15);
    }

    #[test]
    fn path_loss_table_values() {
        let pl = ris_path_loss_db(200.0);
        assert!((pl - 86.22).abs() < 0.01, "{pl}");
        assert!((db_to_amplitude(pl) - 4.89e-5).abs() < 0.01e-5);
        let d = (200f64.powi(2) + 30f64.powi(2)).sqrt();
        assert!((d - 202.24).abs() < 0.01);
        assert!((direct_path_loss_db(d) - 117.23).abs() < 0.01);
    }

    #[test]
    fn json_roundtrip_and_partial() {
        let mut c = SystemConfig::default();
        c.kappa = f64::INFINITY;
        c.phase_bits = PhaseResolution::Bits(2);
        let back = SystemConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back.kappa, f64::INFINITY);
        assert_eq!(back.phase_bits, PhaseResolution::Bits(2));
        assert!((back.pt_mw - c.pt_mw).abs() < 1e-12);

        let partial = SystemConfig::from_json(r#"{"M": 4, "K": 2, "N": 16, "phase_bits": "inf"}"#).unwrap();
        assert_eq!((partial.m, partial.k, partial.n), (4, 2, 16));
        assert_eq!(partial.pt_dbm().round(), 10.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(SystemConfig::from_json(r#"{"bandwidth_hz": 0}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"user_radius": -1}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"K": 0}"#).is_err());
        assert!(SystemConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!("0".parse::<PhaseResolution>().is_err());
    }
}
