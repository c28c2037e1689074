#![allow(dead_code)]

use osa_core::baselines::{McConfig, McPolicy};
use osa_core::channel::{ChannelModel, VacancySource, CASE_1};
use osa_core::config::{parse_config, ExperimentConfig};
use osa_core::durations::{n_probe, t_rh, t_sh};
use osa_core::engine::{run, Participant};
use osa_core::policy::{rank_lenient, ChannelStats, Phase};
use osa_core::tsn::{TsnConfig, TsnPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config(name: &str) -> ExperimentConfig {
    let path = format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_config(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Fraction of runs in which `users` random-hopping SUs all reach
/// sequential hopping (hence distinct channels) within `t_rh(8, 0.1, 0.1)`.
pub fn orthogonal_rate(mu: &[f64], users: u32, runs: u64) -> f64 {
    let limit = t_rh(8, 0.1, 0.1).unwrap();
    let cfg = TsnConfig::theory(8, 0.1, 0.3, 0.07)
        .unwrap()
        .with_cc(limit, 1_000)
        .unwrap();
    let ok = (0..runs)
        .filter(|&seed| {
            let model = ChannelModel::new(mu.to_vec(), 0.1, seed).unwrap();
            let parts = (1..=users)
                .map(|id| Participant {
                    su_id: id,
                    label: "tsn".into(),
                    arrival: 1,
                    departure: None,
                    policy: Box::new(TsnPolicy::new(cfg, seed, id)),
                })
                .collect();
            let tr = run(parts, &model, limit).unwrap();
            (1..=users).all(|id| {
                tr.events
                    .iter()
                    .any(|e| e.su_id == id && e.phase == Phase::SeqHop)
            })
        })
        .count();
    ok as f64 / runs as f64
}

/// Whether every pair at least `eps` apart is ordered correctly.
pub fn epsilon_correct(mu: &[f64], order: &[usize], eps: f64) -> bool {
    order.iter().enumerate().all(|(i, &a)| {
        order[i + 1..]
            .iter()
            .all(|&b| mu[a] >= mu[b] || mu[b] - mu[a] < eps - 1e-9)
    })
}

/// Fraction of runs in which round-robin sampling for `t_sh(8, 0.07, 0.1)`
/// slots yields an epsilon-correct ranking of Case 1.
pub fn ranking_rate(runs: u64) -> f64 {
    let slots = t_sh(8, 0.07, 0.1).unwrap();
    let ok = (0..runs)
        .filter(|&seed| {
            let model = ChannelModel::new(CASE_1.to_vec(), 0.1, 1_000 + seed).unwrap();
            let mut stats = ChannelStats::new(8);
            let start = (seed % 8) as usize;
            for t in 1..=slots {
                let ch = (start + t as usize) % 8;
                stats.record(ch, model.is_vacant(ch, t));
            }
            let (ranking, _) = rank_lenient(&stats);
            epsilon_correct(&CASE_1, ranking.order(), 0.07)
        })
        .count();
    ok as f64 / runs as f64
}

/// Fraction of runs in which SU 1's Musical Chairs estimate equals `users`.
pub fn mc_estimate_rate(users: u32, runs: u64) -> f64 {
    let learn = 2000;
    let cfg = McConfig::new(8, learn, None).unwrap();
    let ok = (0..runs)
        .filter(|&seed| {
            let model = ChannelModel::new(CASE_1.to_vec(), 0.1, seed).unwrap();
            let mut policies: Vec<McPolicy> =
                (1..=users).map(|id| McPolicy::new(cfg, seed, id)).collect();
            for t in 1..=learn {
                let acts: Vec<_> = policies
                    .iter_mut()
                    .map(|p| osa_core::policy::Policy::select(p, t))
                    .collect();
                let vac = model.sample_slot(t).vacant;
                let fb = osa_core::engine::resolve_slot(&acts, &vac);
                for ((p, a), (f, _)) in policies.iter_mut().zip(&acts).zip(&fb) {
                    osa_core::policy::Policy::observe(p, a, f);
                }
            }
            policies[0].u_hat() == Some(users as usize)
        })
        .count();
    ok as f64 / runs as f64
}

/// Empirical miss rate of `n_probe(mu, dp)` probes on a channel vacant with
/// probability `mu`.
pub fn probe_miss_rate(mu: f64, dp: f64, trials: u64, seed: u64) -> f64 {
    let n = n_probe(mu, dp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let misses = (0..trials)
        .filter(|_| (0..n).all(|_| !rng.gen_bool(mu)))
        .count();
    misses as f64 / trials as f64
}
