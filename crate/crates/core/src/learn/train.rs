//! Training loop: SPSA gradients of the unrolled loss fed to Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{TrainableParams, Variant};
use super::spsa::{spsa_gradient, Adam};
use crate::channel::{sample_channels, ChannelSet};
use crate::config::SystemConfig;
use crate::dataset::Dataset;
use crate::linalg::CVec;
use crate::rng::{from_seed, next_seed, split};
use crate::solvers::{
    avg_wsr_on, draw_episode, wmmse_pinet_forward, wmmse_pinet_imcsi, Episode, QuantMode, SolveOptions, UnfoldMode,
    EVAL_SWEEPS, TRAIN_ETA,
};
use crate::{Error, Result};

/// Seed offset separating the default held-out LOS set from training data.
const HELDOUT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trainer hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub i_o: usize,
    pub epochs: usize,
    pub batch: usize,
    /// Adam step for `ln γ`, `logit ρ`, `logit δ`.
    pub lr_scalar: f64,
    /// Adam step for GNN weights.
    pub lr_gnn: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Perturbation scale `c_k = c0 / (k + 1)^c_decay`.
    pub c0: f64,
    pub c_decay: f64,
    /// Rademacher directions averaged per step.
    pub directions: usize,
    /// Soft-quantization sharpness.
    pub eta: f64,
    /// Held-out items and evaluation period in steps.
    pub heldout: usize,
    pub eval_every: usize,
    /// NMSE of the training estimates (imperfect-CSI variant only).
    pub varrho: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            i_o: 5,
            epochs: 20,
            batch: 50,
            lr_scalar: 0.2,
            lr_gnn: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            c0: 0.05,
            c_decay: 0.101,
            directions: 1,
            eta: TRAIN_ETA,
            heldout: 50,
            eval_every: 10,
            varrho: 0.2,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if self.i_o == 0 {
            return bad("I_O must be positive");
        }
        if !(self.c0 > 0.0) || !(self.eta > 0.0) {
            return bad("c0 and eta must be positive");
        }
        if !(self.lr_scalar >= 0.0) || !(self.lr_gnn >= 0.0) {
            return bad("learning rates must be >= 0");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: Hyper = serde_json::from_str(text)?;
        h.validate()?;
        Ok(h)
    }
}

/// One training example with everything the forward pass draws fixed, so
/// the `±` perturbations see common random numbers.
#[derive(Debug, Clone)]
pub enum BatchItem {
    Perfect { channels: ChannelSet, init_seed: u64 },
    Imperfect { episode: Episode, init_seed: u64 },
}

impl BatchItem {
    /// Draws a fresh fading realisation (or imperfect-CSI episode) on `los`.
    pub fn draw<R: Rng + ?Sized>(
        los: &crate::channel::LosComponents,
        config: &SystemConfig,
        variant: Variant,
        i_o: usize,
        varrho: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut local = from_seed(next_seed(rng));
        let init_seed = next_seed(rng);
        Ok(if variant.imperfect_csi() {
            BatchItem::Imperfect {
                episode: draw_episode(los, config, i_o + 1, varrho, &mut local)?,
                init_seed,
            }
        } else {
            BatchItem::Perfect {
                channels: sample_channels(los, config, &mut local)?,
                init_seed,
            }
        })
    }
}

/// WSR of one item (average over the episode's true channels for the
/// imperfect-CSI variant).
pub fn item_wsr(params: &TrainableParams, item: &BatchItem, opts: &SolveOptions, quant: QuantMode) -> Result<f64> {
    let i_o = params.i_o();
    match item {
        BatchItem::Perfect { channels, init_seed } => {
            let mode = match params.variant {
                Variant::Pinet => UnfoldMode::Pinet,
                _ => UnfoldMode::PinetPlus,
            };
            let r = wmmse_pinet_forward(channels, params, opts, i_o, mode, quant, &mut from_seed(*init_seed))?;
            Ok(r.wsr)
        }
        BatchItem::Imperfect { episode, init_seed } => {
            let r = wmmse_pinet_imcsi(&episode.stream, params, opts, quant, &mut from_seed(*init_seed))?;
            imcsi_value(&r.theta, &episode.truths, opts)
        }
    }
}

fn imcsi_value(theta: &CVec, truths: &[ChannelSet], opts: &SolveOptions) -> Result<f64> {
    avg_wsr_on(theta, truths, opts.pt, EVAL_SWEEPS)
}

/// Negative mean WSR over `batch`; per-item passes run in parallel and are
/// summed in order.
pub fn unrolled_loss(params: &TrainableParams, batch: &[BatchItem], opts: &SolveOptions, quant: QuantMode) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let vals = batch
        .par_iter()
        .map(|item| item_wsr(params, item, opts, quant))
        .collect::<Vec<_>>();
    let mut total = 0.0;
    for (sample, v) in vals.into_iter().enumerate() {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { sample });
        }
        total += v;
    }
    Ok(-total / batch.len() as f64)
}

/// Coordinates that influence the loss: the plain unfolded network never
/// touches the GNN or its `γ⁽⁰⁾`.
pub fn active_mask(params: &TrainableParams) -> Vec<bool> {
    let mut mask = vec![true; params.len()];
    if params.variant == Variant::Pinet {
        mask[0] = false;
        for m in &mut mask[params.gammas.len()..params.gammas.len() + params.gnn.len()] {
            *m = false;
        }
    }
    mask
}

/// One row of the loss trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Mean of the two perturbed batch losses.
    pub loss: f64,
    /// Held-out loss with hard quantization, when evaluated this step.
    pub heldout: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best held-out loss seen.
    pub params: TrainableParams,
    pub trace: Vec<StepRecord>,
    pub initial_heldout: f64,
    pub best_heldout: f64,
}

/// Fixed held-out items drawn on `heldout` samples.
pub fn heldout_items(heldout: &Dataset, variant: Variant, hyper: &Hyper) -> Result<Vec<BatchItem>> {
    let mut rng = split(hyper.seed ^ HELDOUT_SEED_SALT, 0);
    heldout
        .samples
        .iter()
        .map(|los| BatchItem::draw(los, &heldout.config, variant, hyper.i_o, hyper.varrho, &mut rng))
        .collect()
}

/// Default held-out LOS set: same scenario, seed separated from training.
pub fn default_heldout(data: &Dataset, count: usize) -> Result<Dataset> {
    Dataset::generate(&data.config, count, data.seed ^ HELDOUT_SEED_SALT)
}

/// Trains `variant` on `data`. Each epoch shuffles the LOS samples into
/// batches; each step draws fresh fading, estimates the gradient by SPSA on
/// the soft-quantized loss and applies Adam. The held-out loss (hard
/// quantization) is checked every `eval_every` steps and at the end; the
/// best parameters seen are returned.
pub fn train(
    data: &Dataset,
    heldout: Option<&Dataset>,
    variant: Variant,
    hyper: &Hyper,
    init: Option<TrainableParams>,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let config = &data.config;
    let opts = SolveOptions::from_config(config);
    let mut rng = from_seed(hyper.seed);
    let params0 = match init {
        Some(p) => {
            if p.variant != variant || p.m() != config.m || p.i_o() != hyper.i_o {
                return Err(Error::Dimension(format!(
                    "initial parameters ({}, M={}, I_O={}) do not fit ({variant}, M={}, I_O={})",
                    p.variant,
                    p.m(),
                    p.i_o(),
                    config.m,
                    hyper.i_o
                )));
            }
            p
        }
        None => TrainableParams::init(config.m, hyper.i_o, variant, &mut rng),
    };
    let owned;
    let heldout = match heldout {
        Some(h) => h,
        None => {
            owned = default_heldout(data, hyper.heldout)?;
            &owned
        }
    };
    let eval_items = heldout_items(heldout, variant, hyper)?;
    let eval = |p: &TrainableParams| unrolled_loss(p, &eval_items, &opts, QuantMode::Hard);

    let initial = eval(&params0)?;
    let mut best = (initial, params0.clone());
    let mut bad_streak = 0;

    let mask = active_mask(&params0);
    let ng = params0.gammas.len();
    let n_gnn = params0.gnn.len();
    let lr: Vec<f64> = (0..params0.len())
        .map(|i| if i >= ng && i < ng + n_gnn { hyper.lr_gnn } else { hyper.lr_scalar })
        .collect();
    let mut adam = Adam::new(lr, hyper.beta1, hyper.beta2, hyper.eps);
    let mut z = params0.to_unconstrained();
    let mut current = params0.clone();
    let soft = QuantMode::Soft { eta: hyper.eta };

    let steps_per_epoch = data.len().div_ceil(hyper.batch);
    let mut trace = Vec::with_capacity(hyper.epochs * steps_per_epoch);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch) {
            let batch = chunk
                .iter()
                .map(|&i| BatchItem::draw(&data.samples[i], config, variant, hyper.i_o, hyper.varrho, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let loss = |zz: &[f64]| -> Result<f64> {
                let p = current.with_unconstrained(zz)?;
                unrolled_loss(&p, &batch, &opts, soft)
            };
            let c = hyper.c0 / ((step + 1) as f64).powf(hyper.c_decay);
            let (grad, level) = spsa_gradient(&z, &loss, c, hyper.directions, Some(&mask), &mut rng)?;
            adam.step(&mut z, &grad);
            current = current.with_unconstrained(&z)?;
            step += 1;

            let last = epoch + 1 == hyper.epochs && step == (epoch + 1) * steps_per_epoch;
            let heldout_loss = if step % hyper.eval_every == 0 || last {
                let h = eval(&current)?;
                if h < best.0 {
                    best = (h, current.clone());
                }
                if h - initial > 10.0 * initial.abs() {
                    bad_streak += 1;
                    if bad_streak >= 3 {
                        return Err(Error::Diverged {
                            step,
                            loss: h,
                            initial,
                        });
                    }
                } else {
                    bad_streak = 0;
                }
                Some(h)
            } else {
                None
            };
            log::debug!("epoch {epoch} step {step}: loss {level:.5} heldout {heldout_loss:?}");
            trace.push(StepRecord {
                step,
                epoch,
                loss: level,
                heldout: heldout_loss,
            });
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        trace,
        initial_heldout: initial,
        best_heldout: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Dataset, Hyper) {
        let cfg = SystemConfig {
            m: 2,
            k: 2,
            n: 4,
            ..SystemConfig::default()
        };
        let data = Dataset::generate(&cfg, 4, 1).unwrap();
        let hyper = Hyper {
            i_o: 2,
            epochs: 1,
            batch: 2,
            heldout: 2,
            eval_every: 1,
            ..Hyper::default()
        };
        (data, hyper)
    }

    #[test]
    fn zero_rate_returns_init() {
        let (data, mut hyper) = tiny();
        hyper.lr_gnn = 0.0;
        hyper.lr_scalar = 0.0;
        for v in [Variant::Pinet, Variant::PinetPlus, Variant::PinetImcsi] {
            let init = TrainableParams::init(2, 2, v, &mut from_seed(3));
            let out = train(&data, None, v, &hyper, Some(init.clone())).unwrap();
            assert_eq!(out.params, init);
            assert_eq!(out.trace.len(), 2);
        }
    }

    #[test]
    fn loss_is_reproducible() {
        let (data, hyper) = tiny();
        let items = heldout_items(&data, Variant::PinetPlus, &hyper).unwrap();
        let p = TrainableParams::init(2, 2, Variant::PinetPlus, &mut from_seed(0));
        let opts = SolveOptions::from_config(&data.config);
        let soft = QuantMode::Soft { eta: 100.0 };
        let a = unrolled_loss(&p, &items, &opts, soft).unwrap();
        let b = unrolled_loss(&p, &items, &opts, soft).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a < 0.0);
    }

    #[test]
    fn mask_hides_gnn_for_plain_unfolding() {
        let p = TrainableParams::init(2, 3, Variant::Pinet, &mut from_seed(0));
        let m = active_mask(&p);
        assert_eq!(m.iter().filter(|b| **b).count(), 3);
        let q = TrainableParams::init(2, 3, Variant::PinetPlus, &mut from_seed(0));
        assert!(active_mask(&q).iter().all(|b| *b));
    }

    #[test]
    fn rejects_mismatched_init() {
        let (data, hyper) = tiny();
        let init = TrainableParams::init(2, 4, Variant::Pinet, &mut from_seed(3));
        assert!(train(&data, None, Variant::Pinet, &hyper, Some(init)).is_err());
    }
}
