//! Seeded repetitions, aggregation and output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, PolicySpec, ResolvedPolicy};
use crate::engine::{self, Participant, Trace};
use crate::error::{Error, Result};
use crate::metrics::{fairness, MetricSeries};
use crate::trace_io::{write_trace_csv, write_vacancy_csv, RunManifest};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write per-run traces, manifests and aggregates here.
    pub out: Option<PathBuf>,
    /// Serialize traces (and digest them) even without an output directory.
    pub digest_traces: bool,
    /// Worker count; defaults to available parallelism.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub slot: u64,
    pub regret: f64,
    pub collisions: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub repetition: u32,
    pub seed: u64,
    pub regret: f64,
    pub collisions: u64,
    pub utilization: f64,
    pub per_su_reward: BTreeMap<u32, u64>,
    pub trace_sha256: Option<String>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

impl RunSummary {
    pub fn sample_at(&self, slot: u64) -> Option<&Sample> {
        self.samples.iter().find(|s| s.slot == slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub policy: String,
    pub slot: u64,
    pub runs: usize,
    pub regret_mean: f64,
    pub regret_se: f64,
    pub collisions_mean: f64,
    pub collisions_se: f64,
    pub utilization_mean: f64,
    pub utilization_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub label: String,
    pub kind: String,
    pub durations: BTreeMap<String, f64>,
    pub regret_mean: f64,
    pub collisions_mean: f64,
    pub utilization_mean: f64,
    pub fairness: f64,
    pub failures: Vec<String>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config_digest: String,
    pub horizon: u64,
    pub repetitions: u32,
    pub base_seed: u64,
    pub partial: bool,
    pub policies: Vec<PolicySummary>,
    #[serde(skip)]
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentSummary {
    pub fn policy(&self, label: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.label == label)
    }
}

/// Sampled slots: every `stride`, plus the horizon.
pub fn sample_slots(horizon: u64, stride: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (1..=horizon / stride).map(|k| k * stride).collect();
    if v.last() != Some(&horizon) {
        v.push(horizon);
    }
    v
}

/// Builds participants for one repetition.
pub fn participants(
    cfg: &ExperimentConfig,
    spec: &PolicySpec,
    policy: &ResolvedPolicy,
    seed: u64,
) -> Vec<Participant> {
    cfg.schedule
        .entries()
        .into_iter()
        .map(|(id, e)| Participant {
            su_id: id,
            label: spec.label.clone(),
            arrival: e.arrival,
            departure: e.departure,
            policy: policy.build(seed, id, e.arrival),
        })
        .collect()
}

/// Runs a single repetition and returns its trace.
pub fn run_single(cfg: &ExperimentConfig, spec: &PolicySpec, repetition: u32) -> Result<Trace> {
    let policy = cfg.resolve(spec)?;
    let seed = cfg.base_seed + repetition as u64;
    let model = cfg.channel_model(seed);
    engine::run(participants(cfg, spec, &policy, seed), &model, cfg.horizon)
}

fn run_one(
    cfg: &ExperimentConfig,
    spec: &PolicySpec,
    policy: &ResolvedPolicy,
    repetition: u32,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let seed = cfg.base_seed + repetition as u64;
    let model = cfg.channel_model(seed);
    let trace = engine::run(participants(cfg, spec, policy, seed), &model, cfg.horizon)?;
    let m = MetricSeries::compute(&trace, &cfg.model.mu);
    let samples = sample_slots(cfg.horizon, cfg.stride)
        .into_iter()
        .map(|s| {
            let i = s as usize - 1;
            Sample {
                slot: s,
                regret: m.regret[i],
                collisions: m.collisions[i],
                utilization: m.utilization[i],
            }
        })
        .collect();

    let mut trace_sha256 = None;
    if opts.out.is_some() || opts.digest_traces {
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf)?;
        trace_sha256 = Some(hex::encode(Sha256::digest(&buf)));
        if let Some(dir) = &opts.out {
            let pdir = dir.join(&spec.label);
            let csv_name = format!("run_{repetition:03}.csv");
            fs::write(pdir.join(&csv_name), &buf)?;
            let vac_name = format!("run_{repetition:03}_vacancy.csv");
            let mut vbuf = Vec::new();
            write_vacancy_csv(&trace, &mut vbuf)?;
            fs::write(pdir.join(&vac_name), vbuf)?;
            let manifest = RunManifest {
                policy: spec.label.clone(),
                repetition,
                seed,
                config_digest: cfg.digest(),
                horizon: cfg.horizon,
                durations: policy.durations(),
                trace_file: Some(csv_name),
                vacancy_file: Some(vac_name),
            };
            fs::write(
                pdir.join(format!("run_{repetition:03}.json")),
                serde_json::to_vec_pretty(&manifest)?,
            )?;
        }
    }
    Ok(RunSummary {
        repetition,
        seed,
        regret: m.final_regret(),
        collisions: m.final_collisions(),
        utilization: m.final_utilization(),
        per_su_reward: m.per_su_reward,
        trace_sha256,
        samples,
    })
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(label: &str, runs: &[RunSummary]) -> Vec<AggregateRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    (0..first.samples.len())
        .map(|k| {
            let col = |f: fn(&Sample) -> f64| runs.iter().map(move |r| f(&r.samples[k]));
            let (rm, rs) = mean_se(col(|s| s.regret));
            let (cm, cs) = mean_se(col(|s| s.collisions as f64));
            let (um, us) = mean_se(col(|s| s.utilization));
            AggregateRow {
                policy: label.to_string(),
                slot: first.samples[k].slot,
                runs: runs.len(),
                regret_mean: rm,
                regret_se: rs,
                collisions_mean: cm,
                collisions_se: cs,
                utilization_mean: um,
                utilization_se: us,
            }
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentSummary> {
    let threads = opts
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if let Some(dir) = &opts.out {
        for spec in &cfg.policies {
            fs::create_dir_all(dir.join(&spec.label))?;
        }
    }

    let mut policies = Vec::new();
    let mut all_rows = Vec::new();
    for spec in &cfg.policies {
        let resolved = cfg.resolve(spec)?;
        let results: Vec<Result<RunSummary>> = pool.install(|| {
            (0..cfg.repetitions)
                .into_par_iter()
                .map(|r| run_one(cfg, spec, &resolved, r, opts))
                .collect()
        });
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok(s) => runs.push(s),
                Err(e) => failures.push(format!("repetition {r}: {e}")),
            }
        }
        all_rows.extend(aggregate(&spec.label, &runs));
        let rewards: Vec<_> = runs.iter().map(|r| r.per_su_reward.clone()).collect();
        policies.push(PolicySummary {
            label: spec.label.clone(),
            kind: spec.kind.as_str().to_string(),
            durations: resolved.durations(),
            regret_mean: mean_se(runs.iter().map(|r| r.regret)).0,
            collisions_mean: mean_se(runs.iter().map(|r| r.collisions as f64)).0,
            utilization_mean: mean_se(runs.iter().map(|r| r.utilization)).0,
            fairness: fairness(&rewards),
            failures,
            runs,
        });
    }

    let summary = ExperimentSummary {
        config_digest: cfg.digest(),
        horizon: cfg.horizon,
        repetitions: cfg.repetitions,
        base_seed: cfg.base_seed,
        partial: policies.iter().any(|p| !p.failures.is_empty()),
        policies,
        aggregate: all_rows,
    };
    if let Some(dir) = &opts.out {
        write_outputs(dir, &summary)?;
    }
    Ok(summary)
}

fn write_outputs(dir: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
    for row in &summary.aggregate {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    Ok(())
}
