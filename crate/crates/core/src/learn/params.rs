//! Trainable parameters of the unfolded solvers and their checkpoint file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gnn::GnnParams;
use crate::{Error, Result};

/// Which unfolded network a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Learned `γ⁽ⁱ⁾` only, conventional initialisation.
    Pinet,
    /// Learned `γ⁽ⁱ⁾` plus GNN initialisation.
    PinetPlus,
    /// Two-timescale variant for imperfect CSI with learned `ρ⁽ⁱ⁾, δ⁽ⁱ⁾`.
    PinetImcsi,
}

impl Variant {
    pub fn imperfect_csi(self) -> bool {
        matches!(self, Variant::PinetImcsi)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pinet => "pinet",
            Variant::PinetPlus => "pinet-plus",
            Variant::PinetImcsi => "pinet-imcsi",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinet" => Ok(Variant::Pinet),
            "pinet-plus" => Ok(Variant::PinetPlus),
            "pinet-imcsi" => Ok(Variant::PinetImcsi),
            other => Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

/// Keeps probabilities strictly inside (0, 1) for the logit map.
const PROB_CLAMP: f64 = 1e-9;

fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParams {
    pub variant: Variant,
    /// `γ⁽⁰⁾ … γ⁽ᴵᴼ⁾`, acting on the Frobenius-normalised `B`.
    pub gammas: Vec<f64>,
    pub gnn: GnnParams,
    /// `ρ⁽¹⁾ … ρ⁽ᴵᴼ⁾`; empty for perfect-CSI variants.
    pub rhos: Vec<f64>,
    /// `δ⁽¹⁾ … δ⁽ᴵᴼ⁾`; empty for perfect-CSI variants.
    pub deltas: Vec<f64>,
}

impl TrainableParams {
    /// Fresh parameters: `γ⁽ⁱ⁾ = 1` (the `γ = ‖B‖_F` rule on the normalised
    /// matrix), GNN per [`GnnParams::init`], and decaying SSCA-style
    /// `ρ⁽ⁱ⁾ = i^{-1/2}`, `δ⁽ⁱ⁾ = i^{-1/4}` capped at 0.95.
    pub fn init<R: Rng + ?Sized>(m: usize, i_o: usize, variant: Variant, rng: &mut R) -> Self {
        let gnn = GnnParams::init(m, rng);
        let (rhos, deltas) = if variant.imperfect_csi() {
            (
                (1..=i_o).map(|i| (i as f64).powf(-0.5).min(0.95)).collect(),
                (1..=i_o).map(|i| (i as f64).powf(-0.25).min(0.95)).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        TrainableParams {
            variant,
            gammas: vec![1.0; i_o + 1],
            gnn,
            rhos,
            deltas,
        }
    }

    pub fn m(&self) -> usize {
        self.gnn.m
    }

    /// Number of unrolled outer iterations.
    pub fn i_o(&self) -> usize {
        self.gammas.len().saturating_sub(1)
    }

    /// Flattened length: `I_O + 1 + 69M² + 54M + 2`, plus `2 I_O` for the
    /// imperfect-CSI variant.
    pub fn len(&self) -> usize {
        self.gammas.len() + self.gnn.len() + self.rhos.len() + self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expected_len(m: usize, i_o: usize, variant: Variant) -> usize {
        let base = i_o + 1 + GnnParams::param_count(m);
        if variant.imperfect_csi() {
            base + 2 * i_o
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("gammas must be positive and finite".into()));
        }
        let unit = |v: &[f64]| v.iter().all(|x| *x > 0.0 && *x <= 1.0);
        if !unit(&self.rhos) || !unit(&self.deltas) {
            return Err(Error::InvalidParameter("rho/delta must lie in (0, 1]".into()));
        }
        if self.variant.imperfect_csi() && (self.rhos.len() != self.i_o() || self.deltas.len() != self.i_o()) {
            return Err(Error::Dimension(format!(
                "{} rhos / {} deltas for I_O = {}",
                self.rhos.len(),
                self.deltas.len(),
                self.i_o()
            )));
        }
        Ok(())
    }

    /// Natural-parameter vector: gammas, GNN, rhos, deltas.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.gammas);
        self.gnn.write_flat(&mut out);
        out.extend_from_slice(&self.rhos);
        out.extend_from_slice(&self.deltas);
        out
    }

    pub fn from_flat(flat: &[f64], m: usize, i_o: usize, variant: Variant) -> Result<Self> {
        let expected = Self::expected_len(m, i_o, variant);
        if flat.len() != expected {
            return Err(Error::Dimension(format!(
                "{} parameters for M={m}, I_O={i_o}, {variant} (expected {expected})",
                flat.len()
            )));
        }
        let gammas = flat[..=i_o].to_vec();
        let mut gnn = GnnParams::zeros(m);
        let used = gnn.read_flat(&flat[i_o + 1..])?;
        let rest = &flat[i_o + 1 + used..];
        let (rhos, deltas) = if variant.imperfect_csi() {
            (rest[..i_o].to_vec(), rest[i_o..].to_vec())
        } else {
            (Vec::new(), Vec::new())
        };
        let p = TrainableParams {
            variant,
            gammas,
            gnn,
            rhos,
            deltas,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unconstrained coordinates: `ln γ`, raw GNN weights, `logit ρ`,
    /// `logit δ`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.gammas.iter().map(|g| g.ln()));
        self.gnn.write_flat(&mut out);
        out.extend(self.rhos.iter().map(|&r| logit(r)));
        out.extend(self.deltas.iter().map(|&d| logit(d)));
        out
    }

    /// Inverse of [`to_unconstrained`](Self::to_unconstrained), keeping the
    /// shape of `self`.
    pub fn with_unconstrained(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.len() {
            return Err(Error::Dimension(format!("{} coordinates for {} parameters", z.len(), self.len())));
        }
        let ng = self.gammas.len();
        let mut out = self.clone();
        for (g, v) in out.gammas.iter_mut().zip(&z[..ng]) {
            *g = v.exp().clamp(1e-12, 1e12);
        }
        let used = out.gnn.read_flat(&z[ng..])?;
        let mut at = ng + used;
        for r in out.rhos.iter_mut() {
            *r = sigmoid(z[at]).max(PROB_CLAMP);
            at += 1;
        }
        for d in out.deltas.iter_mut() {
            *d = sigmoid(z[at]).max(PROB_CLAMP);
            at += 1;
        }
        Ok(out)
    }

    /// Same parameters unrolled for `i_o` iterations: extra iterations reuse
    /// the last learned scalars, surplus ones are dropped.
    pub fn resized(&self, i_o: usize) -> Self {
        let stretch = |v: &[f64], len: usize, fill: f64| -> Vec<f64> {
            (0..len).map(|i| v.get(i).or(v.last()).copied().unwrap_or(fill)).collect()
        };
        let mut out = self.clone();
        out.gammas = stretch(&self.gammas, i_o + 1, 1.0);
        if self.variant.imperfect_csi() {
            out.rhos = stretch(&self.rhos, i_o, 0.5);
            out.deltas = stretch(&self.deltas, i_o, 0.5);
        }
        out
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            m: self.m(),
            i_o: self.i_o(),
            variant: self.variant,
            params: self.flatten(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Checkpoint::from_json(&text)?.into_params()
    }
}

pub const CHECKPOINT_FORMAT: &str = "risbeam-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk parameter record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "I_O")]
    pub i_o: usize,
    pub variant: Variant,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidParameter(format!("not a checkpoint: format `{}`", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidParameter(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    pub fn into_params(self) -> Result<TrainableParams> {
        TrainableParams::from_flat(&self.params, self.m, self.i_o, self.variant)
    }
}
