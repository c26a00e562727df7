use fedmenf::data::{gen_synthetic_signal, split_support_query, SignalKind};
use fedmenf::meta::{local_update, ClientState, FederationContext, MetaHyperparams};
use fedmenf::nn::{siren_init, Architecture, ParamVector};
use fedmenf::rng;
use fedmenf::server::{
    aggregate, client_rng, run_training, ClientUpdate, EvalSettings, LocalModifier, ServerHyper, ServerState, ServerStrategy,
    TrainingSetup,
};
use proptest::prelude::*;
use rand::Rng;

fn updates(seed: u64, n: usize, dim: usize) -> Vec<ClientUpdate> {
    let mut r = rng::from_seed(seed);
    (0..n)
        .map(|id| ClientUpdate {
            client_id: id,
            w_e: ParamVector::new((0..dim).map(|_| r.random_range(-1.0..1.0)).collect()),
            alpha: r.random_range(0.1..3.0),
            local_steps: 4,
            c_delta: None,
        })
        .collect()
}

fn theta(dim: usize) -> ParamVector {
    ParamVector::new((0..dim).map(|i| 0.1 * i as f64).collect())
}

fn run(strategy: ServerStrategy, hyper: ServerHyper, ups: &[ClientUpdate]) -> ParamVector {
    let s = ServerState::new(theta(ups[0].w_e.len()), strategy, hyper, 10);
    aggregate(&s, ups).unwrap().theta
}

fn assert_close(a: &ParamVector, b: &ParamVector, tol: f64) {
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn fedavg_is_exact_weighted_mean() {
    let ups = updates(1, 3, 5);
    let total: f64 = ups.iter().map(|u| u.alpha).sum();
    let expect: Vec<f64> = (0..5).map(|i| ups.iter().map(|u| u.alpha / total * u.w_e[i]).sum()).collect();
    assert_close(&run(ServerStrategy::Fedavg, ServerHyper::default(), &ups), &ParamVector::new(expect), 1e-15);
}

#[test]
fn degenerate_strategies_reduce_to_fedavg() {
    let ups = updates(2, 4, 6);
    let avg = run(ServerStrategy::Fedavg, ServerHyper::default(), &ups);
    assert_close(&run(ServerStrategy::Fedprox, ServerHyper::default(), &ups), &avg, 0.0);
    assert_close(&run(ServerStrategy::Fednova, ServerHyper::default(), &ups), &avg, 1e-12);
    // Scaffold with zero control variates and unit global step.
    assert_close(&run(ServerStrategy::Scaffold, ServerHyper::default(), &ups), &avg, 1e-12);
    // FedExP with a huge epsilon keeps the server step at 1.
    let big_eps = ServerHyper { eps_exp: 1e12, ..Default::default() };
    assert_close(&run(ServerStrategy::Fedexp, big_eps, &ups), &avg, 1e-12);
    // FedACG with no momentum carried over.
    assert_close(&run(ServerStrategy::Fedacg, ServerHyper::default(), &ups), &avg, 1e-12);
    let no_momentum = ServerHyper { lambda_acg: 0.0, ..Default::default() };
    assert_close(&run(ServerStrategy::Fedacg, no_momentum, &ups), &avg, 1e-12);
}

#[test]
fn fedexp_extrapolates_for_disagreeing_clients() {
    // Two opposite updates: the average move is small relative to the
    // individual ones, so the server step grows beyond 1.
    let t = theta(2);
    let ups = vec![
        ClientUpdate { client_id: 0, w_e: t.add(&ParamVector::new(vec![1.0, 0.1])), alpha: 1.0, local_steps: 1, c_delta: None },
        ClientUpdate { client_id: 1, w_e: t.add(&ParamVector::new(vec![-1.0, 0.1])), alpha: 1.0, local_steps: 1, c_delta: None },
    ];
    let out = run(ServerStrategy::Fedexp, ServerHyper::default(), &ups);
    // eta = (1.01 + 1.01) / (2 * 2 * (0.01 + 0.001)) = 45.9...
    let eta = 2.02 / (4.0 * 0.011);
    assert!((out[1] - (t[1] + eta * 0.1)).abs() < 1e-12);
    assert!((out[0] - t[0]).abs() < 1e-12);
}

#[test]
fn fedacg_momentum_accumulates() {
    let t = theta(2);
    let mut s = ServerState::new(t.clone(), ServerStrategy::Fedacg, ServerHyper::default(), 2);
    let step = ParamVector::new(vec![0.5, -0.5]);
    let up = |s: &ServerState| {
        let mut w = fedmenf::server::broadcast(s);
        w.axpy(1.0, &step);
        vec![ClientUpdate { client_id: 0, w_e: w, alpha: 1.0, local_steps: 1, c_delta: None }]
    };
    s = aggregate(&s, &up(&s)).unwrap();
    assert_close(&s.momentum, &step, 1e-15);
    s = aggregate(&s, &up(&s)).unwrap();
    // m2 = lambda * m1 + step
    assert_close(&s.momentum, &step.scaled(1.2), 1e-12);
}

#[test]
fn scaffold_updates_global_control() {
    let ups: Vec<ClientUpdate> = updates(3, 2, 3)
        .into_iter()
        .map(|mut u| {
            u.c_delta = Some(ParamVector::new(vec![1.0, 2.0, 3.0]));
            u
        })
        .collect();
    let s = ServerState::new(theta(3), ServerStrategy::Scaffold, ServerHyper::default(), 4);
    let next = aggregate(&s, &ups).unwrap();
    // (M / N) * mean(c_delta) = 0.5 * (1, 2, 3)
    assert_close(&next.c_global, &ParamVector::new(vec![0.5, 1.0, 1.5]), 1e-15);
}

fn tiny_setup() -> TrainingSetup {
    let arch = Architecture::siren(vec![2, 6, 1]).unwrap();
    let sig = gen_synthetic_signal(SignalKind::Gabor, &[8, 8], 1, 1).unwrap();
    let task = split_support_query(&sig, 0.5, 1).unwrap();
    TrainingSetup {
        theta0: siren_init(&arch, 5),
        arch,
        clients: vec![ClientState { id: 0, tasks: vec![task], weight: 1.0 }],
        test_tasks: vec![],
        meta: MetaHyperparams { outer_steps: 3, inner_batch: 8, outer_batch: 8, ..Default::default() },
        strategy: ServerStrategy::Fedavg,
        hyper: ServerHyper::default(),
        rounds: 2,
        participants: 1,
        seed: 11,
        eval: EvalSettings { cadence: 0, ..Default::default() },
    }
}

#[test]
fn single_client_training_is_sequential_local_updates() {
    let setup = tiny_setup();
    let out = run_training(&setup).unwrap();
    let mut theta = setup.theta0.clone();
    for round in 0..setup.rounds {
        let ctx = FederationContext { n_clients: 1, rounds: setup.rounds, participants: 1, round };
        let mut r = client_rng(setup.seed, round, 0);
        theta = local_update(&theta, &setup.arch, &setup.clients[0], &setup.meta, &ctx, &LocalModifier::Identity, &mut r)
            .unwrap()
            .w_e;
    }
    assert_eq!(out.theta(), &theta);
}

#[test]
fn training_is_deterministic() {
    let mut setup = tiny_setup();
    setup.rounds = 3;
    let a = run_training(&setup).unwrap();
    let b = run_training(&setup).unwrap();
    assert_eq!(a.rounds, b.rounds);
    assert_eq!(a.theta(), b.theta());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregation_ignores_arrival_order(seed in 0u64..10_000, shift in 0usize..5) {
        let ups = updates(seed, 5, 4);
        let mut rotated = ups.clone();
        rotated.rotate_left(shift);
        for strategy in [ServerStrategy::Fedavg, ServerStrategy::Fednova, ServerStrategy::Fedexp, ServerStrategy::Fedacg] {
            let a = run(strategy, ServerHyper::default(), &ups);
            let b = run(strategy, ServerHyper::default(), &rotated);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn fedavg_stays_in_bounding_box(seed in 0u64..10_000) {
        let ups = updates(seed, 4, 3);
        let out = run(ServerStrategy::Fedavg, ServerHyper::default(), &ups);
        for i in 0..3 {
            let lo = ups.iter().map(|u| u.w_e[i]).fold(f64::INFINITY, f64::min);
            let hi = ups.iter().map(|u| u.w_e[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out[i] >= lo - 1e-12 && out[i] <= hi + 1e-12);
        }
    }
}
