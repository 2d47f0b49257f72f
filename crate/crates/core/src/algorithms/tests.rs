use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::encoding::avg_hamming_to_nash;
use crate::market::DemandKind;

fn duopoly() -> ModelSpec {
    ModelSpec::Custom { kind: DemandKind::Linear, a: 256.0, b: 1.0, x: 56.0, y: 0.0, players: 2 }
}

fn params(kind: AlgorithmKind) -> SimulationParams {
    SimulationParams { pop_size: 20, generations: 5, seed: 17, ..SimulationParams::new("poly4", kind) }
}

const ALL: [AlgorithmKind; 4] = [AlgorithmKind::VI, AlgorithmKind::VS, AlgorithmKind::CP, AlgorithmKind::CS];

fn c(s: &str) -> Chromosome {
    s.parse().unwrap()
}

#[test]
fn fixed_initialisations() {
    let anti = Simulation::<f64>::new(SimulationParams { init: InitMode::AntiNash, ..params(AlgorithmKind::VS) }, TraceOptions::default()).unwrap();
    let d = avg_hamming_to_nash(&anti.state().populations, &anti.nash_chromosome()).unwrap();
    assert_eq!(d, 20.0);

    let nash = SimulationParams { init: InitMode::Nash, p_mut: 0.0, generations: 1, ..params(AlgorithmKind::CS) };
    let mut trace: Vec<GenerationRecord> = Vec::new();
    run_simulation::<f64, _>(nash, TraceOptions::default(), &mut trace).unwrap();
    assert_eq!(trace[0].lumped_state, 0);
}

#[test]
fn random_initialisation_is_fair() {
    // 4 players x 40 chromosomes x 20 bits = 3200 bits; sd of the mean ~0.0088
    let sim = Simulation::<f64>::new(SimulationParams { pop_size: 40, ..params(AlgorithmKind::VI) }, TraceOptions::default()).unwrap();
    let ones: u32 = sim.state().populations.iter().flat_map(|p| &p.members).map(|c| c.value().count_ones()).sum();
    let mean = ones as f64 / 3200.0;
    assert!((0.45..=0.55).contains(&mean), "{mean}");
}

#[test]
fn explicit_initialisation_shape() {
    let bad = SimulationParams { init: InitMode::Explicit(vec![vec![c("0101")]; 2]), bits: 4, pop_size: 2, ..SimulationParams::new(duopoly(), AlgorithmKind::CP) };
    assert!(Simulation::<f64>::new(bad, TraceOptions::default()).is_err());
}

#[test]
fn invalid_params() {
    let base = params(AlgorithmKind::VI);
    for bad in [
        SimulationParams { pop_size: 21, ..base.clone() },
        SimulationParams { bits: 7, ..base.clone() },
        SimulationParams { generations: 0, ..base.clone() },
        SimulationParams { ga_rate: 0, ..base.clone() },
        SimulationParams { p_mut: -0.1, ..base.clone() },
        SimulationParams { p_cross: 0.9, ..base.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
    }
    assert!(SimulationParams { ga_rate: 0, ..params(AlgorithmKind::CP) }.validate().is_ok());
}

#[test]
fn vriend_period_at_nash() {
    let p = SimulationParams { init: InitMode::Nash, ..params(AlgorithmKind::VI) };
    let mut sim = Simulation::<f64>::new(p, TraceOptions::default()).unwrap();
    let game = sim.vriend_period().unwrap();
    assert!(game.chromosomes.iter().all(|&x| x == sim.nash_chromosome()));
    assert!(game.profits.iter().all(|&p| p == game.profits[0]));
    assert!((game.quantities[0] - 86.9401).abs() < 1e-3);
}

#[test]
fn vriend_picks_are_uniform() {
    let p = SimulationParams { pop_size: 20, ..params(AlgorithmKind::VS) };
    let mut sim = Simulation::<f64>::new(p, TraceOptions::default()).unwrap();
    let mut counts = [0u32; 20];
    for _ in 0..10_000 {
        counts[sim.vriend_period().unwrap().chosen[0]] += 1;
    }
    let sd = (10_000.0f64 * 0.05 * 0.95).sqrt();
    for (j, &n) in counts.iter().enumerate() {
        assert!((f64::from(n) - 500.0).abs() <= 3.0 * sd, "index {j}: {n}");
    }
}

#[test]
fn nash_is_absorbing_without_mutation() {
    for kind in ALL {
        let p = SimulationParams { init: InitMode::Nash, p_mut: 0.0, generations: 20, ..params(kind) };
        let mut trace: Vec<GenerationRecord> = Vec::new();
        let sim = run_simulation::<f64, _>(p.clone(), TraceOptions::default(), &mut trace).unwrap();
        assert_eq!(trace.len(), 20);
        for r in &trace {
            assert_eq!(r.lumped_state, 0, "{kind}");
            assert_eq!(r.ne_games, r.games, "{kind}");
            assert_eq!(r.games as usize, p.games_per_generation());
        }
        let nash = sim.nash_chromosome();
        assert!(sim.state().populations.iter().all(|pop| pop.members.iter().all(|&x| x == nash)));
    }
}

#[test]
fn sizes_are_conserved() {
    for kind in ALL {
        let p = SimulationParams { p_mut: 0.05, generations: 15, ..params(kind) };
        let mut traces: Vec<GenerationTrace> = Vec::new();
        run_simulation::<f64, _>(p, TraceOptions { snapshots: true, record_games: false }, &mut traces).unwrap();
        for t in &traces {
            let snap = t.snapshot.as_ref().unwrap();
            assert_eq!(snap.len(), 4);
            assert!(snap.iter().all(|pop| pop.len() == 20 && pop.members.iter().all(|c| c.len() == 20)));
        }
    }
}

#[test]
fn game_accounting() {
    let vi = SimulationParams { generations: 10, ..params(AlgorithmKind::VI) };
    let mut traces: Vec<GenerationTrace> = Vec::new();
    run_simulation::<f64, _>(vi, TraceOptions { record_games: true, snapshots: false }, &mut traces).unwrap();
    assert_eq!(traces.iter().map(|t| t.games.as_ref().unwrap().len()).sum::<usize>(), 500);

    let cp = SimulationParams { generations: 10, pop_size: 40, ..params(AlgorithmKind::CP) };
    let mut traces: Vec<GenerationTrace> = Vec::new();
    run_simulation::<f64, _>(cp, TraceOptions { record_games: true, snapshots: false }, &mut traces).unwrap();
    assert_eq!(traces.iter().map(|t| t.games.as_ref().unwrap().len()).sum::<usize>(), 400);

    let one = SimulationParams { generations: 1, ..params(AlgorithmKind::CS) };
    let mut traces: Vec<GenerationRecord> = Vec::new();
    run_simulation::<f64, _>(one, TraceOptions::default(), &mut traces).unwrap();
    assert_eq!(traces.len(), 1);
}

#[test]
fn coevol_every_chromosome_plays_once() {
    let p = SimulationParams { pop_size: 30, ..params(AlgorithmKind::CS) };
    let mut sim = Simulation::<f64>::new(p, TraceOptions::default()).unwrap();
    for _ in 0..5 {
        let games = sim.coevol_matchups().unwrap();
        assert_eq!(games.len(), 30);
        for player in 0..4 {
            let mut seen: Vec<usize> = games.iter().map(|g| g.chosen[player]).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..30).collect::<Vec<_>>());
        }
    }
}

#[test]
fn vriend_update_keeps_uniform_nash() {
    for kind in [AlgorithmKind::VI, AlgorithmKind::VS] {
        let p = SimulationParams { init: InitMode::Nash, p_mut: 0.0, ..params(kind) };
        let mut sim = Simulation::<f64>::new(p, TraceOptions::default()).unwrap();
        let before = sim.state().populations.clone();
        sim.update_populations().unwrap();
        assert_eq!(sim.state().populations, before);
    }
}

#[test]
fn social_pool_bookkeeping() {
    let p = SimulationParams {
        model: duopoly(),
        pop_size: 2,
        bits: 4,
        init: InitMode::Explicit(vec![vec![c("0000"), c("0011")], vec![c("1111"), c("1100")]]),
        ..params(AlgorithmKind::VS)
    };
    let mut sim = Simulation::<f64>::new(p, TraceOptions::default()).unwrap();
    sim.vriend_period().unwrap();
    sim.update_populations().unwrap();
    assert_eq!(sim.state().populations.len(), 2);
    assert!(sim.state().populations.iter().all(|pop| pop.len() == 2));
}

/// Player 0 starts with only zeros, player 1 only ones: with individual
/// learning and no mutation no 1 can ever appear in player 0's population.
fn disjoint(kind: AlgorithmKind, seed: u64) -> Simulation<f64> {
    let p = SimulationParams {
        model: duopoly(),
        pop_size: 4,
        bits: 4,
        p_mut: 0.0,
        generations: 30,
        seed,
        init: InitMode::Explicit(vec![vec![c("0000"); 4], vec![c("1111"); 4]]),
        ..SimulationParams::new(duopoly(), kind)
    };
    run_simulation::<f64, _>(p, TraceOptions::default(), &mut NullSink).unwrap()
}

#[test]
fn individual_learning_never_mixes_players() {
    for kind in [AlgorithmKind::VI, AlgorithmKind::CP] {
        for seed in 0..20 {
            let sim = disjoint(kind, seed);
            assert!(sim.state().populations[0].members.iter().all(|c| c.value() == 0), "{kind}");
            assert!(sim.state().populations[1].members.iter().all(|c| c.value() == 15), "{kind}");
        }
    }
}

#[test]
fn social_learning_mixes_players() {
    for kind in [AlgorithmKind::VS, AlgorithmKind::CS] {
        let mixed = (0..20).any(|seed| {
            let sim = disjoint(kind, seed);
            sim.state().populations.iter().any(|pop| pop.members.iter().any(|c| c.value() != 0 && c.value() != 15))
                || sim.state().populations[0].members.iter().any(|c| c.value() == 15)
        });
        assert!(mixed, "{kind}");
    }
}

#[test]
fn replay_is_identical() {
    for kind in ALL {
        let p = SimulationParams { p_mut: 0.01, generations: 30, ..params(kind) };
        let mut a: Vec<GenerationTrace> = Vec::new();
        let mut b: Vec<GenerationTrace> = Vec::new();
        let opts = TraceOptions { record_games: true, snapshots: true };
        run_simulation::<f64, _>(p.clone(), opts, &mut a).unwrap();
        run_simulation::<f64, _>(p, opts, &mut b).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn single_precision_engine() {
    let p = SimulationParams { generations: 3, ..params(AlgorithmKind::CS) };
    let mut trace: Vec<GenerationRecord> = Vec::new();
    let sim = run_simulation::<f32, _>(p, TraceOptions::default(), &mut trace).unwrap();
    assert_eq!(trace.len(), 3);
    assert!((sim.q_hat() - 86.9401).abs() < 1e-2);
}

#[test]
fn oracle_with_uniform_opponents() {
    let model: MarketModel<f64> = duopoly().build().unwrap();
    let codec = QuantityCodec::new(4, 15.0).unwrap();
    let pops = vec![
        Population { members: vec![c("0001"), c("0010")], owner: Owner::Player(0) },
        Population { members: vec![c("0011"); 2], owner: Owner::Player(1) },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let e = expected_profit_coevol_oracle(&pops, &model, &codec, 0, &mut rng).unwrap();
    // opponent always plays 3, so player 0's profits are deterministic
    assert_eq!(e[0][0], model.profit(1.0, 4.0));
    assert_eq!(e[0][1], model.profit(2.0, 5.0));
    // player 1 faces 1 or 2 with equal probability
    let hand = (model.profit(3.0, 4.0) + model.profit(3.0, 5.0)) / 2.0;
    assert!((e[1][0] - hand).abs() < 1e-12);
}

#[test]
fn oracle_monte_carlo_agrees_with_enumeration() {
    let model: MarketModel<f64> = crate::market::catalogue("linear4").unwrap();
    let codec = QuantityCodec::new(8, 120.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pops: Vec<Population> = (0..4)
        .map(|i| Population {
            members: (0..4).map(|j| Chromosome::new((37 * i + 53 * j + 11) % 256, 8).unwrap()).collect(),
            owner: Owner::Player(i as usize),
        })
        .collect();
    let exact = expected_profit_coevol_oracle(&pops, &model, &codec, 0, &mut rng).unwrap();
    // reimplementation of the sampling branch through a large population
    let mut mc = 0.0;
    let draws = 200_000;
    for _ in 0..draws {
        let rest: f64 = (1..4).map(|i| codec.decode(&pops[i].members[rng.random_range(0..4)]).unwrap()).sum();
        let q = codec.decode(&pops[0].members[0]).unwrap();
        mc += model.profit(q, q + rest);
    }
    mc /= draws as f64;
    assert!((mc - exact[0][0]).abs() / exact[0][0].abs() < 0.01, "{mc} vs {}", exact[0][0]);
}
