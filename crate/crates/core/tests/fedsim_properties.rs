use gas_core::fedsim::{
    dirichlet_partition, generate_synthetic, run_single, Architecture, DatasetParams, Defense, ExperimentConfig,
    Network, RoundRecord, Simulation, TrainerConfig,
};
use gas_core::{l2_norm, AggregatorSpec, AttackSpec, Error, PartitionPolicy, SeedSpec};
use rand::seq::SliceRandom;

fn small(attack: AttackSpec, defense: Defense) -> ExperimentConfig {
    ExperimentConfig {
        seed: 21,
        n: 8,
        f: 0,
        rounds: 10,
        repeats: 1,
        dataset: DatasetParams {
            classes: 3,
            features: 5,
            per_class: 40,
            test_per_class: 10,
            r_sep: 3.0,
            sigma_x: 1.0,
        },
        trainer: TrainerConfig {
            local_epochs: 2,
            batch_size: 8,
            ..TrainerConfig::default()
        },
        ..ExperimentConfig::standard(attack, defense)
    }
}

fn mean_defense() -> Defense {
    Defense::Plain {
        aggregator: AggregatorSpec::Mean,
    }
}

/// FedAvg written as one loop over rounds and clients, sharing only the data
/// generators and the model's loss gradient with the simulator.
fn fedavg_reference(cfg: &ExperimentConfig, seed: &SeedSpec) -> Vec<Vec<f64>> {
    let (train, _) = generate_synthetic(&cfg.dataset, &seed.derive("data", 0)).unwrap();
    let shards = dirichlet_partition(train.labels(), cfg.dataset.classes, cfg.n, cfg.beta, &seed.derive("dirichlet", 0))
        .unwrap()
        .client_indices;
    let net = Network::new(Architecture::Softmax, cfg.dataset.classes, cfg.dataset.features);
    let d = net.dim();
    let tc = &cfg.trainer;
    let mut w = vec![0.0; d];
    let mut history = Vec::new();
    for t in 0..cfg.rounds {
        let mut sum = vec![0.0; d];
        let mut count = 0.0;
        for (c, shard) in shards.iter().enumerate() {
            if shard.is_empty() {
                continue;
            }
            let client_seed = seed.derive("round", t as u64).derive("train", 0).derive("client", c as u64);
            let mut local = w.clone();
            let mut velocity = vec![0.0; d];
            let mut grad = vec![0.0; d];
            let mut order = shard.clone();
            for e in 0..tc.local_epochs {
                order.shuffle(&mut client_seed.derive("epoch", e as u64).rng());
                for batch in order.chunks(tc.batch_size) {
                    net.loss_and_grad(&local, &train, batch, false, &mut grad);
                    let norm = l2_norm(&grad);
                    let clip = tc.clip_norm.unwrap();
                    if norm > clip {
                        for g in grad.iter_mut() {
                            *g *= clip / norm;
                        }
                    }
                    for k in 0..d {
                        let g = grad[k] + tc.weight_decay * local[k];
                        velocity[k] = tc.momentum * velocity[k] + g;
                        local[k] -= tc.learning_rate * velocity[k];
                    }
                }
            }
            for k in 0..d {
                sum[k] += w[k] - local[k];
            }
            count += 1.0;
        }
        for k in 0..d {
            w[k] -= sum[k] / count;
        }
        history.push(w.clone());
    }
    history
}

#[test]
fn fedavg_matches_straight_line_reference_bitwise() {
    let cfg = small(AttackSpec::NoAttack, mean_defense());
    assert!(cfg.network().dim() <= 100);
    let seed = SeedSpec::new(cfg.seed).derive("repeat", 0);
    let reference = fedavg_reference(&cfg, &seed);
    let mut sim = Simulation::new(&cfg, seed).unwrap();
    for (t, want) in reference.iter().enumerate() {
        let record = sim.run_round(t).unwrap();
        assert_eq!(&sim.model().params, want, "round {t}");
        assert_eq!(record.deviation, 0.0);
    }
}

#[test]
fn gas_without_byzantine_is_fedavg() {
    let plain = small(AttackSpec::NoAttack, mean_defense());
    let gas = Defense::Gas {
        p: 4,
        delta: None,
        partition_policy: PartitionPolicy::PerRound,
        base: AggregatorSpec::Median,
    };
    let cfg = small(AttackSpec::NoAttack, gas);
    let mut a = Simulation::new(&cfg, SeedSpec::new(cfg.seed).derive("repeat", 0)).unwrap();
    let mut b = Simulation::new(&plain, SeedSpec::new(cfg.seed).derive("repeat", 0)).unwrap();
    for t in 0..cfg.rounds {
        let (_, ta) = a.run_round_traced(t).unwrap();
        let (_, tb) = b.run_round_traced(t).unwrap();
        let diff = ta.aggregate.distance(&tb.aggregate);
        assert!(diff <= 1e-12, "round {t}: {diff:e}");
    }
}

#[test]
fn honest_gradients_do_not_depend_on_the_attack() {
    let defense = Defense::Plain {
        aggregator: AggregatorSpec::Median,
    };
    let attacks = [
        AttackSpec::NoAttack,
        AttackSpec::BitFlip,
        AttackSpec::LabelFlip,
        AttackSpec::lie(),
        AttackSpec::min_max(),
        AttackSpec::min_sum(),
        AttackSpec::ipm(),
    ];
    let mut first = None;
    for attack in attacks {
        let cfg = ExperimentConfig { f: 2, ..small(attack, defense.clone()) };
        let mut sim = Simulation::new(&cfg, SeedSpec::new(5)).unwrap();
        let (_, trace) = sim.run_round_traced(0).unwrap();
        let honest = trace.honest_gradients;
        match &first {
            None => first = Some(honest),
            Some(h) => assert_eq!(h, &honest, "{attack:?}"),
        }
    }
}

fn strip(records: &[RoundRecord]) -> Vec<(usize, u64, u64, u64, usize)> {
    records
        .iter()
        .map(|r| {
            (
                r.round,
                r.test_accuracy.to_bits(),
                r.deviation.to_bits(),
                r.honest_inclusion_ratio.to_bits(),
                r.byz_inclusion_count,
            )
        })
        .collect()
}

#[test]
fn parallel_and_sequential_training_agree_bitwise() {
    let cfg = ExperimentConfig {
        f: 2,
        client_sample_ratio: 0.75,
        ..small(
            AttackSpec::lie(),
            Defense::Gas {
                p: 3,
                delta: None,
                partition_policy: PartitionPolicy::PerRound,
                base: AggregatorSpec::Median,
            },
        )
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_single(&cfg, 0).unwrap())
    };
    let sequential = run(1);
    let parallel = run(4);
    assert_eq!(strip(&sequential.records), strip(&parallel.records));
}

#[test]
fn defense_precondition_fails_with_round_in_message() {
    // Bulyan with f=1 needs 7 clients; sampling 6 of 8 with f scaled to 1 fails validation up front
    let cfg = ExperimentConfig {
        f: 1,
        client_sample_ratio: 0.75,
        ..small(AttackSpec::NoAttack, Defense::Plain { aggregator: AggregatorSpec::Bulyan })
    };
    let err = cfg.validate().unwrap_err();
    assert!(err.to_string().contains("Bulyan requires n ≥ 4f+3"), "{err}");

    let cfg = small(
        AttackSpec::NoAttack,
        Defense::Plain {
            aggregator: AggregatorSpec::Dnc { c: 4.0, niters: 40, b: 1 },
        },
    );
    let cfg = ExperimentConfig { f: 1, ..cfg };
    let mut sim = Simulation::new(&cfg, SeedSpec::new(0)).unwrap();
    let err = sim.run_round(0).unwrap_err();
    assert!(matches!(err, Error::Round { round: 0, .. }), "{err}");
    assert!(err.to_string().starts_with("round 0: "), "{err}");
}

#[test]
fn gas_excludes_lie_on_the_desk_instance() {
    let cfg = ExperimentConfig {
        rounds: 5,
        ..ExperimentConfig::standard(
            AttackSpec::lie(),
            Defense::Gas {
                p: 16,
                delta: None,
                partition_policy: PartitionPolicy::PerRound,
                base: AggregatorSpec::Median,
            },
        )
    };
    let run = run_single(&cfg, 0).unwrap();
    for r in &run.records {
        assert!(r.honest_inclusion_ratio >= 0.95, "{r:?}");
    }
}

/// Negative control: the LIE attack should visibly hurt undefended FedAvg on
/// the standard desk instance.
#[test]
fn lie_harms_plain_mean_on_the_desk_instance() {
    let clean = ExperimentConfig {
        repeats: 1,
        ..ExperimentConfig::standard(AttackSpec::NoAttack, mean_defense())
    };
    let attacked = ExperimentConfig {
        attack: AttackSpec::lie(),
        ..clean.clone()
    };
    let final_acc = |cfg: &ExperimentConfig| run_single(cfg, 0).unwrap().records.last().unwrap().test_accuracy;
    let (a, b) = (final_acc(&clean), final_acc(&attacked));
    assert!(b <= a - 0.10, "no-attack final accuracy {a:.4}, under LIE {b:.4}");
}
