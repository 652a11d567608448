//! The server round loop.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{generate_synthetic, DatasetParams, SyntheticDataset};
use super::dirichlet::dirichlet_partition;
use super::metrics::{deviation_metric, inclusion_metrics};
use super::model::{Architecture, Model, Network};
use super::trainer::{local_train, TrainerConfig};
use crate::aggregators::{aggregate_detailed, bucketing_wrap, AggregatorSpec};
use crate::attacks::{craft, AttackContext, AttackSpec};
use crate::error::{Error, Result};
use crate::gas::{gas_aggregate, GasConfig, PartitionPolicy, Selection};
use crate::seed::SeedSpec;
use crate::vector::{ensure_finite, GradientVector};

/// Server-side defense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Defense {
    Plain {
        aggregator: AggregatorSpec,
    },
    Gas {
        p: usize,
        /// Unknown-`f` mode: drop this fraction of participants. Absent means
        /// the server uses the known Byzantine count.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default)]
        partition_policy: PartitionPolicy,
        base: AggregatorSpec,
    },
    Bucketed {
        s: usize,
        aggregator: AggregatorSpec,
    },
}

impl Defense {
    pub fn label(&self) -> String {
        match self {
            Defense::Plain { aggregator } => aggregator.name().to_owned(),
            Defense::Gas { base, delta: None, .. } => format!("GAS({})", base.name()),
            Defense::Gas { base, delta: Some(d), .. } => format!("GAS({}, δ={d})", base.name()),
            Defense::Bucketed { aggregator, s } => format!("Bucketing({}, s={s})", aggregator.name()),
        }
    }

    /// Checks the defense for `k` participants of which the server assumes
    /// `f` Byzantine.
    pub fn validate(&self, k: usize, f: usize) -> Result<()> {
        match self {
            Defense::Plain { aggregator } => aggregator.validate(k, f),
            Defense::Gas { p, delta, base, .. } => {
                if *p == 0 {
                    return Err(Error::InvalidParameter("defense.p: must be at least 1".into()));
                }
                let selection = gas_selection(*delta, f);
                selection
                    .validate(k)
                    .map_err(|e| Error::InvalidParameter(format!("defense.delta: {e}")))?;
                base.validate(k, selection.byzantine_count(k))
            }
            Defense::Bucketed { s, aggregator } => {
                if *s == 0 {
                    return Err(Error::InvalidParameter("defense.s: must be at least 1".into()));
                }
                let buckets = k.div_ceil(*s);
                if buckets <= 2 * f {
                    return Err(Error::InvalidParameter(format!(
                        "defense.s: {buckets} buckets cannot absorb f={f} Byzantine clients (need more than 2f)"
                    )));
                }
                aggregator.validate(buckets, f)
            }
        }
    }
}

fn gas_selection(delta: Option<f64>, f: usize) -> Selection {
    match delta {
        Some(delta) => Selection::Ratio { delta },
        None => Selection::KnownF { f },
    }
}

fn default_ratio() -> f64 {
    1.0
}
fn default_repeats() -> usize {
    5
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub beta: f64,
    pub rounds: usize,
    #[serde(default = "default_ratio")]
    pub client_sample_ratio: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub model: Architecture,
    pub attack: AttackSpec,
    pub defense: Defense,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub dataset: DatasetParams,
}

impl ExperimentConfig {
    /// The desk-scale reference setup: ten Gaussian classes in 64 dimensions,
    /// 50 clients with 10 Byzantine, Dir(0.5) shards, softmax model (d = 650).
    pub fn standard(attack: AttackSpec, defense: Defense) -> Self {
        Self {
            seed: 0,
            n: 50,
            f: 10,
            beta: 0.5,
            rounds: 200,
            client_sample_ratio: 1.0,
            repeats: 5,
            model: Architecture::Softmax,
            attack,
            defense,
            trainer: TrainerConfig::default(),
            dataset: DatasetParams::default(),
        }
    }

    pub fn network(&self) -> Network {
        Network::new(self.model, self.dataset.classes, self.dataset.features)
    }

    /// Number of clients sampled per round.
    pub fn sampled_per_round(&self) -> usize {
        ((self.client_sample_ratio * self.n as f64).round() as usize).clamp(1, self.n)
    }

    /// Byzantine count the server assumes among `k` participants: `f` under
    /// full participation, otherwise `f` scaled by the participation rate and
    /// capped below `k/2`.
    pub fn server_f(&self, k: usize) -> usize {
        if k >= self.n {
            self.f
        } else {
            let scaled = (self.f * k).div_ceil(self.n);
            scaled.min(k.saturating_sub(1) / 2)
        }
    }

    /// Field-level validation.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidParameter(format!("{field}: {msg}")));
        if self.n == 0 {
            return bad("n", "must be at least 1".into());
        }
        if 2 * self.f >= self.n {
            return bad("f", format!("must satisfy f < n/2 (n={}, f={})", self.n, self.f));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", format!("must be positive (beta={})", self.beta));
        }
        if self.rounds == 0 {
            return bad("rounds", "must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1".into());
        }
        if !(self.client_sample_ratio > 0.0 && self.client_sample_ratio <= 1.0) {
            return bad(
                "client_sample_ratio",
                format!("must be in (0, 1] (got {})", self.client_sample_ratio),
            );
        }
        let d = &self.dataset;
        if d.classes < 2 || d.features == 0 || d.per_class == 0 || d.test_per_class == 0 {
            return bad("dataset", "needs classes ≥ 2, features ≥ 1 and at least one sample per class".into());
        }
        if !(d.r_sep >= 0.0 && d.sigma_x >= 0.0) {
            return bad("dataset", "r_sep and sigma_x must be nonnegative".into());
        }
        if let Architecture::Mlp { hidden: 0 } = self.model {
            return bad("model.hidden", "must be at least 1".into());
        }
        self.attack
            .validate()
            .map_err(|e| Error::InvalidParameter(format!("attack: {e}")))?;
        self.trainer.validate()?;
        let k = self.sampled_per_round();
        self.defense.validate(k, self.server_f(k)).map_err(|e| match e {
            Error::InvalidParameter(_) => e,
            other => Error::InvalidParameter(format!("defense: {other}")),
        })
    }
}

/// Metrics of one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub test_accuracy: f64,
    pub deviation: f64,
    pub honest_inclusion_ratio: f64,
    pub byz_inclusion_count: usize,
    /// Seconds spent in the round.
    pub wall_time: f64,
}

/// Intermediate values of one round, for inspection and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// Participating client ids, ascending.
    pub participants: Vec<usize>,
    pub is_byzantine: Vec<bool>,
    pub honest_gradients: Vec<GradientVector>,
    /// What the server received, aligned with `participants`.
    pub submitted: Vec<GradientVector>,
    pub aggregate: GradientVector,
    /// Participant positions the defense kept; `None` means all.
    pub selected: Option<Vec<usize>>,
    pub server_f: usize,
}

/// One repeat of an experiment: data, shards, Byzantine identities and the
/// global model.
#[derive(Debug, Clone)]
pub struct Simulation<'c> {
    cfg: &'c ExperimentConfig,
    seed: SeedSpec,
    train: SyntheticDataset,
    test: SyntheticDataset,
    shards: Vec<Vec<usize>>,
    byzantine: Vec<bool>,
    model: Model,
}

impl<'c> Simulation<'c> {
    pub fn new(cfg: &'c ExperimentConfig, seed: SeedSpec) -> Result<Self> {
        cfg.validate()?;
        let (train, test) = generate_synthetic(&cfg.dataset, &seed.derive("data", 0))?;
        let shards = dirichlet_partition(
            train.labels(),
            cfg.dataset.classes,
            cfg.n,
            cfg.beta,
            &seed.derive("dirichlet", 0),
        )?
        .client_indices;

        let mut ids: Vec<usize> = (0..cfg.n).collect();
        ids.shuffle(&mut seed.derive("identities", 0).rng());
        let mut byzantine = vec![false; cfg.n];
        for &id in &ids[..cfg.f] {
            byzantine[id] = true;
        }

        let model = Model::init(cfg.network(), &seed.derive("init", 0));
        Ok(Self {
            cfg,
            seed,
            train,
            test,
            shards,
            byzantine,
            model,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn byzantine(&self) -> &[bool] {
        &self.byzantine
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn train_data(&self) -> &SyntheticDataset {
        &self.train
    }

    pub fn test_data(&self) -> &SyntheticDataset {
        &self.test
    }

    pub fn client_seed(&self, round: usize, client: usize) -> SeedSpec {
        self.seed
            .derive("round", round as u64)
            .derive("train", 0)
            .derive("client", client as u64)
    }

    /// Clients sampled at `round`, ascending. A pure function of the seed and
    /// the round.
    pub fn sampled_clients(&self, round: usize) -> Vec<usize> {
        let k = self.cfg.sampled_per_round();
        if k == self.cfg.n {
            return (0..k).collect();
        }
        let mut rng = self.seed.derive("round", round as u64).derive("sample", 0).rng();
        let mut picked = index::sample(&mut rng, self.cfg.n, k).into_vec();
        picked.sort_unstable();
        picked
    }

    pub fn run_round(&mut self, round: usize) -> Result<RoundRecord> {
        self.run_round_traced(round).map(|(record, _)| record)
    }

    pub fn run_round_traced(&mut self, round: usize) -> Result<(RoundRecord, RoundTrace)> {
        self.step(round).map_err(|e| Error::Round {
            round,
            source: Box::new(e),
        })
    }

    fn step(&mut self, round: usize) -> Result<(RoundRecord, RoundTrace)> {
        let started = Instant::now();
        let cfg = self.cfg;
        let net = cfg.network();
        let round_seed = self.seed.derive("round", round as u64);

        // clients without data cannot train and sit the round out
        let participants: Vec<usize> = self
            .sampled_clients(round)
            .into_iter()
            .filter(|&c| !self.shards[c].is_empty())
            .collect();
        let is_byzantine: Vec<bool> = participants.iter().map(|&c| self.byzantine[c]).collect();
        let honest_ids: Vec<usize> = participants.iter().copied().filter(|&c| !self.byzantine[c]).collect();
        let byz_ids: Vec<usize> = participants.iter().copied().filter(|&c| self.byzantine[c]).collect();
        if honest_ids.is_empty() {
            return Err(Error::InvalidParameter("no honest client sampled".into()));
        }

        let w = &self.model.params;
        let train = |ids: &[usize], flip: bool| -> Result<Vec<GradientVector>> {
            ids.par_iter()
                .map(|&c| {
                    local_train(
                        &net,
                        w,
                        &self.train,
                        &self.shards[c],
                        &cfg.trainer,
                        flip,
                        &self.client_seed(round, c),
                    )
                })
                .collect()
        };
        let honest = train(&honest_ids, false)?;
        let byz_true = if cfg.attack.needs_true_gradients() {
            train(&byz_ids, cfg.attack.flips_labels())?
        } else {
            Vec::new()
        };
        let crafted = craft(
            &cfg.attack,
            &AttackContext {
                honest_gradients: &honest,
                byz_count: byz_ids.len(),
                byz_true_gradients: &byz_true,
            },
            &round_seed.derive("attack", 0),
        )?;

        let (mut h, mut b) = (honest.iter(), crafted.iter());
        let submitted: Vec<GradientVector> = is_byzantine
            .iter()
            .map(|&byz| if byz { b.next() } else { h.next() }.cloned().expect("one vector per participant"))
            .collect();
        ensure_finite(&submitted)?;

        let k = submitted.len();
        let server_f = cfg.server_f(k);
        let agg_seed = round_seed.derive("aggregate", 0);
        let (aggregate, selected) = match &cfg.defense {
            Defense::Plain { aggregator } => {
                let out = aggregate_detailed(aggregator, &submitted, server_f, &agg_seed)?;
                (out.value, out.selected)
            }
            Defense::Gas {
                p,
                delta,
                partition_policy,
                base,
            } => {
                let gas = GasConfig {
                    p: *p,
                    base: base.clone(),
                    selection: gas_selection(*delta, server_f),
                    partition_policy: *partition_policy,
                    seed: self.seed.derive("gas", 0),
                };
                let out = gas_aggregate(&gas, &submitted, round)?;
                (out.aggregate, Some(out.selection.selected))
            }
            Defense::Bucketed { s, aggregator } => {
                (bucketing_wrap(aggregator, &submitted, server_f, *s, &agg_seed)?, None)
            }
        };

        for (wk, g) in self.model.params.iter_mut().zip(aggregate.iter()) {
            *wk -= g;
        }

        let deviation = deviation_metric(&aggregate, &honest)?;
        let (honest_inclusion_ratio, byz_inclusion_count) = inclusion_metrics(selected.as_deref(), &is_byzantine);
        let test_accuracy = self.model.accuracy(&self.test);
        let record = RoundRecord {
            round,
            test_accuracy,
            deviation,
            honest_inclusion_ratio,
            byz_inclusion_count,
            wall_time: started.elapsed().as_secs_f64(),
        };
        let trace = RoundTrace {
            participants,
            is_byzantine,
            honest_gradients: honest,
            submitted,
            aggregate,
            selected,
            server_f,
        };
        Ok((record, trace))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub repeat: usize,
    pub records: Vec<RoundRecord>,
    pub best_accuracy: f64,
}

/// Mean and population standard deviation of the per-repeat best accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub best_accuracy_mean: f64,
    pub best_accuracy_std: f64,
    pub per_repeat_best: Vec<f64>,
}

impl ExperimentSummary {
    pub fn from_bests(bests: Vec<f64>) -> Self {
        let n = bests.len() as f64;
        let mean = bests.iter().sum::<f64>() / n;
        let var = bests.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n;
        Self {
            best_accuracy_mean: mean,
            best_accuracy_std: var.sqrt(),
            per_repeat_best: bests,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub summary: ExperimentSummary,
}

pub fn repeat_seed(cfg: &ExperimentConfig, repeat: usize) -> SeedSpec {
    SeedSpec::new(cfg.seed).derive("repeat", repeat as u64)
}

/// Runs all rounds of one repeat.
pub fn run_single(cfg: &ExperimentConfig, repeat: usize) -> Result<RunResult> {
    let mut sim = Simulation::new(cfg, repeat_seed(cfg, repeat))?;
    let records = (0..cfg.rounds)
        .map(|t| sim.run_round(t))
        .collect::<Result<Vec<_>>>()?;
    let best_accuracy = records.iter().map(|r| r.test_accuracy).fold(0.0, f64::max);
    Ok(RunResult {
        repeat,
        records,
        best_accuracy,
    })
}

/// Runs `cfg.repeats` independent repeats and summarises their best
/// accuracies.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_single(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = ExperimentSummary::from_bests(runs.iter().map(|r| r.best_accuracy).collect());
    Ok(ExperimentResult { runs, summary })
}
