//! Ground-truth channel statistics and per-slot vacancy realizations.
//!
//! Vacancies are generated in counter mode: the bit for `(channel, slot)` is a
//! pure function of the model seed, so any slot can be sampled in any order
//! and every consumer sees the same realization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source of per-slot PU vacancy. Slots are 1-based, channels 0-based.
pub trait VacancySource: Sync {
    fn n_channels(&self) -> usize;
    fn is_vacant(&self, channel: usize, slot: u64) -> bool;

    fn sample_slot(&self, slot: u64) -> VacancyVector {
        VacancyVector {
            slot,
            vacant: (0..self.n_channels())
                .map(|c| self.is_vacant(c, slot))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyVector {
    pub slot: u64,
    pub vacant: Vec<bool>,
}

impl VacancyVector {
    pub fn vacant_count(&self) -> usize {
        self.vacant.iter().filter(|v| **v).count()
    }
}

/// True vacancy probabilities `mu` (natural channel order), the floor
/// `theta` every channel exceeds, and the realization seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    mu: Vec<f64>,
    theta: f64,
    seed: u64,
}

impl ChannelModel {
    pub fn new(mu: Vec<f64>, theta: f64, seed: u64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidModel("mu must not be empty".into()));
        }
        for (i, &m) in mu.iter().enumerate() {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "mu[{i}] = {m} is outside (0, 1]"
                )));
            }
        }
        let mut sorted = mu.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("mu values must be distinct".into()));
        }
        let mu_min = sorted[0];
        if !(theta > 0.0 && theta < mu_min) {
            return Err(Error::InvalidModel(format!(
                "theta = {theta} must lie in (0, min(mu) = {mu_min})"
            )));
        }
        Ok(Self { mu, theta, seed })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Channel indices sorted best-first by true vacancy probability.
    pub fn true_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| self.mu[b].total_cmp(&self.mu[a]).then(a.cmp(&b)));
        idx
    }

    /// Sum of the `u` largest vacancy probabilities.
    pub fn top_sum(&self, u: usize) -> f64 {
        self.true_order().iter().take(u).map(|&c| self.mu[c]).sum()
    }
}

impl VacancySource for ChannelModel {
    fn n_channels(&self) -> usize {
        self.mu.len()
    }

    fn is_vacant(&self, channel: usize, slot: u64) -> bool {
        unit_from_counter(self.seed, channel as u64, slot) < self.mu[channel]
    }
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) keyed on `(seed, stream, counter)`.
#[inline]
pub fn unit_from_counter(seed: u64, stream: u64, counter: u64) -> f64 {
    let k = mix64(seed ^ mix64(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)));
    let x = mix64(k ^ counter.wrapping_mul(0xA076_1D64_78BD_642F));
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Vacancy pattern that is vacant everywhere except listed busy spans.
/// Used to script worked examples slot by slot.
#[derive(Debug, Clone, Default)]
pub struct ScriptedVacancy {
    n: usize,
    busy: Vec<Vec<(u64, u64)>>,
}

impl ScriptedVacancy {
    pub fn all_vacant(n: usize) -> Self {
        Self {
            n,
            busy: vec![Vec::new(); n],
        }
    }

    /// Marks `channel` busy for slots `from..=to`.
    pub fn busy(mut self, channel: usize, from: u64, to: u64) -> Self {
        self.busy[channel].push((from, to));
        self
    }
}

impl VacancySource for ScriptedVacancy {
    fn n_channels(&self) -> usize {
        self.n
    }

    fn is_vacant(&self, channel: usize, slot: u64) -> bool {
        !self.busy[channel]
            .iter()
            .any(|&(a, b)| slot >= a && slot <= b)
    }
}

pub const CASE_1: [f64; 8] = [0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78];
pub const CASE_2: [f64; 8] = [0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80];
