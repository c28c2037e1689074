//! Regret, collision, utilization and fairness series derived from a trace.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::Trace;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricSeries {
    /// Cumulative expected-reward regret after each slot.
    pub regret: Vec<f64>,
    pub collisions: Vec<u64>,
    /// Percent of top-channel vacancies turned into successful transmissions.
    pub utilization: Vec<f64>,
    /// Cumulative realized rewards summed over SUs.
    pub realized: Vec<u64>,
    pub per_su_reward: BTreeMap<u32, u64>,
}

impl MetricSeries {
    pub fn compute(trace: &Trace, mu: &[f64]) -> Self {
        let mut per_su_reward = BTreeMap::new();
        for r in &trace.records {
            *per_su_reward.entry(r.su_id).or_insert(0) += r.feedback.reward as u64;
        }
        Self {
            regret: regret(trace, mu),
            collisions: collisions(trace),
            utilization: utilization(trace, mu),
            realized: realized(trace),
            per_su_reward,
        }
    }

    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_collisions(&self) -> u64 {
        self.collisions.last().copied().unwrap_or(0)
    }

    pub fn final_utilization(&self) -> f64 {
        self.utilization.last().copied().unwrap_or(0.0)
    }
}

/// Channels best-first by true vacancy, lower index first on ties.
fn true_order(mu: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mu.len()).collect();
    idx.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]));
    idx
}

/// `prefix[u]` = sum of the `u` largest vacancy probabilities.
fn top_prefix(mu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for c in true_order(mu) {
        out.push(out.last().unwrap() + mu[c]);
    }
    out
}

/// Walks records slot by slot, calling `f(slot_index, records)` for every
/// slot including empty ones.
fn per_slot<'a>(trace: &'a Trace, mut f: impl FnMut(usize, &'a [crate::engine::SlotRecord])) {
    let recs = &trace.records;
    let mut i = 0;
    for s in 0..trace.horizon as usize {
        let start = i;
        while i < recs.len() && recs[i].slot == s as u64 + 1 {
            i += 1;
        }
        f(s, &recs[start..i]);
    }
}

pub fn regret(trace: &Trace, mu: &[f64]) -> Vec<f64> {
    let prefix = top_prefix(mu);
    let mut out = Vec::with_capacity(trace.horizon as usize);
    let mut acc = 0.0;
    per_slot(trace, |s, recs| {
        let opt = prefix[trace.active[s].min(mu.len())];
        let got: f64 = recs
            .iter()
            .filter(|r| r.sole_access)
            .map(|r| mu[r.action.channel])
            .sum();
        acc += opt - got;
        out.push(acc);
    });
    out
}

pub fn collisions(trace: &Trace) -> Vec<u64> {
    let mut out = Vec::with_capacity(trace.horizon as usize);
    let mut acc = 0;
    per_slot(trace, |_, recs| {
        acc += recs.iter().filter(|r| r.feedback.collided).count() as u64;
        out.push(acc);
    });
    out
}

pub fn realized(trace: &Trace) -> Vec<u64> {
    let mut out = Vec::with_capacity(trace.horizon as usize);
    let mut acc = 0;
    per_slot(trace, |_, recs| {
        acc += recs.iter().map(|r| r.feedback.reward as u64).sum::<u64>();
        out.push(acc);
    });
    out
}

pub fn utilization(trace: &Trace, mu: &[f64]) -> Vec<f64> {
    let order = true_order(mu);
    let mut out = Vec::with_capacity(trace.horizon as usize);
    let (mut num, mut den) = (0u64, 0u64);
    per_slot(trace, |s, recs| {
        let u = trace.active[s].min(mu.len());
        den += order[..u].iter().filter(|&&c| trace.vacancy[s][c]).count() as u64;
        num += recs.iter().map(|r| r.feedback.reward as u64).sum::<u64>();
        out.push(if den == 0 {
            0.0
        } else {
            // Successes off the top channels can briefly outnumber top vacancies.
            (100.0 * num as f64 / den as f64).min(100.0)
        });
    });
    out
}

/// Jain index `(sum x)^2 / (n * sum x^2)`; 1 for empty or all-zero input.
pub fn jain(xs: &[f64]) -> f64 {
    let s: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sq == 0.0 {
        1.0
    } else {
        s * s / (xs.len() as f64 * sq)
    }
}

/// Jain index over per-SU mean rewards across runs with one schedule.
pub fn fairness(runs: &[BTreeMap<u32, u64>]) -> f64 {
    let mut sums: BTreeMap<u32, f64> = BTreeMap::new();
    for run in runs {
        for (&id, &r) in run {
            *sums.entry(id).or_default() += r as f64;
        }
    }
    let means: Vec<f64> = sums.values().map(|s| s / runs.len() as f64).collect();
    jain(&means)
}
