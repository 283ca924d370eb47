//! LOS-sample datasets and their JSON file format.
//!
//! ```text
//! {
//!   "header":  {"M": 8, "K": 4, "N": 100, "seed": 7, "count": 1000},
//!   "config":  { ...SystemConfig fields, P_T in dBm... },
//!   "samples": [
//!     {
//!       "user_pos":     [[x, y], ...],                 // K entries
//!       "g_los":        [[re, im], ...],               // N*M, row-major
//!       "h_los_r":      [[[re, im], ...], ...],        // K rows of N
//!       "l1": 4.89e-5,
//!       "l2": [...], "ld": [...], "direct_pl_db": [...]
//!     }
//!   ]
//! }
//! ```
//!
//! Sample `i` is drawn from the stream `split(seed, i)`, so a dataset can be
//! regenerated piecewise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{sample_los, LosComponents};
use crate::config::SystemConfig;
use crate::linalg::{CMat, CVec};
use crate::rng::split;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    user_pos: Vec<[f64; 2]>,
    g_los: Vec<[f64; 2]>,
    h_los_r: Vec<Vec<[f64; 2]>>,
    l1: f64,
    l2: Vec<f64>,
    ld: Vec<f64>,
    direct_pl_db: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    header: Header,
    config: SystemConfig,
    samples: Vec<SampleRecord>,
}

/// A set of LOS samples together with the scenario that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SystemConfig,
    pub seed: u64,
    pub samples: Vec<LosComponents>,
}

fn pairs<'a>(it: impl Iterator<Item = &'a C64>) -> Vec<[f64; 2]> {
    it.map(|z| [z.re, z.im]).collect()
}

fn complex(p: &[[f64; 2]]) -> impl Iterator<Item = C64> + '_ {
    p.iter().map(|[re, im]| C64::new(*re, *im))
}

impl SampleRecord {
    fn from_los(los: &LosComponents) -> Self {
        let (n, m) = los.g_los.shape();
        // nalgebra is column-major; emit row-major
        let g = (0..n).flat_map(|r| (0..m).map(move |c| (r, c))).map(|rc| &los.g_los[rc]);
        SampleRecord {
            user_pos: los.user_pos.clone(),
            g_los: pairs(g),
            h_los_r: los.h_los_r.iter().map(|h| pairs(h.iter())).collect(),
            l1: los.l1,
            l2: los.l2.clone(),
            ld: los.ld.clone(),
            direct_pl_db: los.direct_pl_db.clone(),
        }
    }

    fn into_los(self, h: &Header, index: usize) -> Result<LosComponents> {
        let bad = |what: &str, got: usize, want: usize| {
            Err(Error::Dataset(format!("sample {index}: {what} has {got} entries, expected {want}")))
        };
        if self.g_los.len() != h.n * h.m {
            return bad("g_los", self.g_los.len(), h.n * h.m);
        }
        for (name, len) in [
            ("user_pos", self.user_pos.len()),
            ("h_los_r", self.h_los_r.len()),
            ("l2", self.l2.len()),
            ("ld", self.ld.len()),
            ("direct_pl_db", self.direct_pl_db.len()),
        ] {
            if len != h.k {
                return bad(name, len, h.k);
            }
        }
        if let Some(row) = self.h_los_r.iter().find(|r| r.len() != h.n) {
            return bad("h_los_r row", row.len(), h.n);
        }
        let finite = self.g_los.iter().chain(self.h_los_r.iter().flatten()).flatten().all(|v| v.is_finite())
            && self.l2.iter().chain(&self.ld).chain(&self.direct_pl_db).all(|v| v.is_finite())
            && self.l1.is_finite();
        if !finite {
            return Err(Error::Dataset(format!("sample {index}: non-finite value")));
        }
        Ok(LosComponents {
            user_pos: self.user_pos,
            g_los: CMat::from_row_iterator(h.n, h.m, complex(&self.g_los)),
            h_los_r: self.h_los_r.iter().map(|r| CVec::from_iterator(h.n, complex(r))).collect(),
            l1: self.l1,
            l2: self.l2,
            ld: self.ld,
            direct_pl_db: self.direct_pl_db,
        })
    }
}

impl Dataset {
    /// Draws `count` LOS samples for `config`, sample `i` from
    /// `split(seed, i)`.
    pub fn generate(config: &SystemConfig, count: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let samples = (0..count as u64)
            .map(|i| sample_los(config, &mut split(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            config: config.clone(),
            seed,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn header(&self) -> Header {
        Header {
            m: self.config.m,
            k: self.config.k,
            n: self.config.n,
            seed: self.seed,
            count: self.samples.len(),
        }
    }

    /// The first `count` samples (or all of them).
    pub fn truncated(&self, count: usize) -> Dataset {
        Dataset {
            samples: self.samples.iter().take(count).cloned().collect(),
            ..self.clone()
        }
    }

    /// Splits off the last `count` samples, e.g. for held-out evaluation.
    pub fn split_tail(&self, count: usize) -> (Dataset, Dataset) {
        let at = self.samples.len().saturating_sub(count);
        let head = Dataset {
            samples: self.samples[..at].to_vec(),
            ..self.clone()
        };
        let tail = Dataset {
            samples: self.samples[at..].to_vec(),
            ..self.clone()
        };
        (head, tail)
    }

    pub fn to_json(&self) -> String {
        let rec = DatasetRecord {
            header: self.header(),
            config: self.config.clone(),
            samples: self.samples.iter().map(SampleRecord::from_los).collect(),
        };
        serde_json::to_string(&rec).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: DatasetRecord = serde_json::from_str(text)?;
        let h = rec.header;
        if (h.m, h.k, h.n) != (rec.config.m, rec.config.k, rec.config.n) {
            return Err(Error::Dataset(format!(
                "header dimensions (M={}, K={}, N={}) disagree with config (M={}, K={}, N={})",
                h.m, h.k, h.n, rec.config.m, rec.config.k, rec.config.n
            )));
        }
        if rec.samples.len() != h.count {
            return Err(Error::Dataset(format!(
                "header announces {} samples, file holds {}",
                h.count,
                rec.samples.len()
            )));
        }
        let samples = rec
            .samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.into_los(&h, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            config: rec.config,
            seed: h.seed,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
