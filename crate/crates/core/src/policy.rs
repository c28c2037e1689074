//! Policy contract between SUs and the engine, plus the shared estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::mix64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensing {
    /// PU sensing only; transmits whenever the channel is vacant.
    Short,
    /// PU sensing, then listens for other SUs before transmitting.
    Long,
}

impl Sensing {
    pub fn as_str(self) -> &'static str {
        match self {
            Sensing::Short => "short",
            Sensing::Long => "long",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelAction {
    pub channel: usize,
    pub sensing: Sensing,
    pub incumbent: bool,
}

impl ChannelAction {
    /// Short sensing without an incumbent claim (random hopping).
    pub fn short(channel: usize) -> Self {
        Self {
            channel,
            sensing: Sensing::Short,
            incumbent: false,
        }
    }

    pub fn incumbent(channel: usize) -> Self {
        Self {
            channel,
            sensing: Sensing::Short,
            incumbent: true,
        }
    }

    pub fn long(channel: usize) -> Self {
        Self {
            channel,
            sensing: Sensing::Long,
            incumbent: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotFeedback {
    pub pu_busy: bool,
    pub su_present: bool,
    pub transmitted: bool,
    pub collided: bool,
    pub reward: u8,
}

impl SlotFeedback {
    pub fn success(&self) -> bool {
        self.reward == 1
    }
}

/// Per-channel selection counts `S` and vacant observations `V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStats {
    s: Vec<u64>,
    v: Vec<u64>,
}

impl ChannelStats {
    pub fn new(n: usize) -> Self {
        Self {
            s: vec![0; n],
            v: vec![0; n],
        }
    }

    pub fn from_counts(s: Vec<u64>, v: Vec<u64>) -> Result<Self> {
        if s.len() != v.len() || s.iter().zip(&v).any(|(s, v)| v > s) {
            return Err(Error::InvalidParameter(
                "stats need equal lengths and V <= S".into(),
            ));
        }
        Ok(Self { s, v })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn record(&mut self, channel: usize, vacant: bool) {
        self.s[channel] += 1;
        if vacant {
            self.v[channel] += 1;
        }
    }

    pub fn selections(&self) -> &[u64] {
        &self.s
    }

    pub fn vacancies(&self) -> &[u64] {
        &self.v
    }

    pub fn mu_hat(&self, channel: usize) -> Option<f64> {
        (self.s[channel] > 0).then(|| self.v[channel] as f64 / self.s[channel] as f64)
    }
}

/// Channel indices best-first by estimated vacancy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pi: Vec<usize>,
    rank_of: Vec<usize>,
}

impl Ranking {
    pub fn from_order(pi: Vec<usize>) -> Result<Self> {
        let n = pi.len();
        let mut rank_of = vec![usize::MAX; n];
        for (r, &c) in pi.iter().enumerate() {
            if c >= n || rank_of[c] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "{pi:?} is not a permutation"
                )));
            }
            rank_of[c] = r;
        }
        Ok(Self { pi, rank_of })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_order((0..n).collect()).expect("identity is a permutation")
    }

    pub fn order(&self) -> &[usize] {
        &self.pi
    }

    pub fn channel(&self, rank: usize) -> usize {
        self.pi[rank]
    }

    pub fn rank_of(&self, channel: usize) -> usize {
        self.rank_of[channel]
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

fn sort_desc(est: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..est.len()).collect();
    // sort_by is stable, so equal estimates keep the lower index first.
    idx.sort_by(|&a, &b| est[b].total_cmp(&est[a]));
    idx
}

/// Ranks channels by `V/S`; every channel must have been observed.
pub fn rank_channels(stats: &ChannelStats) -> Result<Ranking> {
    let est = (0..stats.n())
        .map(|c| stats.mu_hat(c).ok_or(Error::UnobservedChannel(c)))
        .collect::<Result<Vec<_>>>()?;
    Ranking::from_order(sort_desc(&est))
}

/// Ranking used inside policies: unobserved channels count as never vacant.
/// Returns the ranking and the estimates in ranked order.
pub fn rank_lenient(stats: &ChannelStats) -> (Ranking, Vec<f64>) {
    let est: Vec<f64> = (0..stats.n())
        .map(|c| stats.mu_hat(c).unwrap_or(0.0))
        .collect();
    let pi = sort_desc(&est);
    let ranked = pi.iter().map(|&c| est[c]).collect();
    (Ranking::from_order(pi).expect("sorted indices"), ranked)
}

/// Coarse state label used for trace events and checkpoints.
/// Ranks are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    RandomHop,
    SeqHop,
    Trek { reserved: usize },
    Locked { rank: usize },
    Bci { reserved: usize, probe: usize },
    Tl { rank: usize },
    Learn,
    Chairs,
    Seated { rank: usize },
    Random,
}

impl Phase {
    /// Rank held in a settled state (TSN lock or TDN temporary lock).
    pub fn settled_rank(&self) -> Option<usize> {
        match *self {
            Phase::Locked { rank } | Phase::Tl { rank } => Some(rank),
            _ => None,
        }
    }
}

pub trait Policy: Send {
    /// Short policy name used in trace rows.
    fn name(&self) -> &'static str;

    /// Action for global slot `t`. Called exactly once per active slot,
    /// always followed by `observe`.
    fn select(&mut self, t: u64) -> ChannelAction;

    fn observe(&mut self, action: &ChannelAction, feedback: &SlotFeedback);

    fn phase(&self) -> Phase;
}

/// Independent RNG stream for one SU in one run.
pub fn policy_rng(seed: u64, su_id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x5EED_0000_0000_0000) ^ mix64(su_id as u64))
}

/// Channel-characterization hopper shared by the trekking policies and the
/// sequential-hopping baseline: uniform random hops until the first
/// collision-free transmission, then `c + 1 mod N` every slot.
#[derive(Debug, Clone)]
pub struct Hopper {
    n: usize,
    long: bool,
    seq: bool,
    last: usize,
    stats: ChannelStats,
    rh_slots: u64,
}

impl Hopper {
    /// `long` selects long sensing for both hopping modes.
    pub fn new(n: usize, long: bool) -> Self {
        Self {
            n,
            long,
            seq: false,
            last: 0,
            stats: ChannelStats::new(n),
            rh_slots: 0,
        }
    }

    pub fn is_sequential(&self) -> bool {
        self.seq
    }

    /// Slots spent random hopping so far.
    pub fn rh_slots(&self) -> u64 {
        self.rh_slots
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn phase(&self) -> Phase {
        if self.seq {
            Phase::SeqHop
        } else {
            Phase::RandomHop
        }
    }

    pub fn select(&mut self, rng: &mut impl Rng) -> ChannelAction {
        if self.seq {
            self.last = (self.last + 1) % self.n;
            if self.long {
                ChannelAction::long(self.last)
            } else {
                ChannelAction::incumbent(self.last)
            }
        } else {
            self.rh_slots += 1;
            self.last = rng.gen_range(0..self.n);
            if self.long {
                ChannelAction::long(self.last)
            } else {
                ChannelAction::short(self.last)
            }
        }
    }

    pub fn observe(&mut self, action: &ChannelAction, fb: &SlotFeedback) {
        self.stats.record(action.channel, !fb.pu_busy);
        if !self.seq && fb.success() {
            self.seq = true;
        }
    }
}
