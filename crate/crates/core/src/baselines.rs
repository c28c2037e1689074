//! Comparison policies: uniform random hopping, perpetual sequential
//! hopping, and a Musical Chairs reconstruction with optional epochs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::policy::{
    policy_rng, rank_lenient, ChannelAction, ChannelStats, Hopper, Phase, Policy, Ranking,
    SlotFeedback,
};

/// Inverts `P(no collision) = (1 - 1/N)^(U - 1)` for `U`.
pub fn mc_estimate_users(nu_hat: f64, n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    if nu_hat.is_nan() || nu_hat <= 0.0 {
        return n;
    }
    if nu_hat >= 1.0 {
        return 1;
    }
    let u = 1.0 + nu_hat.ln() / (1.0 - 1.0 / n as f64).ln();
    (u.round() as i64).clamp(1, n as i64) as usize
}

pub struct RandomPolicy {
    n: usize,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(n: usize, seed: u64, su_id: u32) -> Self {
        Self {
            n,
            rng: policy_rng(seed, su_id),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(&mut self, _t: u64) -> ChannelAction {
        ChannelAction::short(self.rng.gen_range(0..self.n))
    }

    fn observe(&mut self, _action: &ChannelAction, _fb: &SlotFeedback) {}

    fn phase(&self) -> Phase {
        Phase::Random
    }
}

/// Random hopping until the first clean transmission, then round-robin
/// over all channels forever.
pub struct SeqHopPolicy {
    hopper: Hopper,
    rng: ChaCha8Rng,
}

impl SeqHopPolicy {
    pub fn new(n: usize, seed: u64, su_id: u32) -> Self {
        Self {
            hopper: Hopper::new(n, false),
            rng: policy_rng(seed, su_id),
        }
    }
}

impl Policy for SeqHopPolicy {
    fn name(&self) -> &'static str {
        "seqhop"
    }

    fn select(&mut self, _t: u64) -> ChannelAction {
        self.hopper.select(&mut self.rng)
    }

    fn observe(&mut self, action: &ChannelAction, fb: &SlotFeedback) {
        self.hopper.observe(action, fb);
    }

    fn phase(&self) -> Phase {
        self.hopper.phase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n: usize,
    pub learn_len: u64,
    /// Global restart period; `None` gives the static variant.
    pub epoch_len: Option<u64>,
}

impl McConfig {
    pub fn new(n: usize, learn_len: u64, epoch_len: Option<u64>) -> Result<Self> {
        if learn_len == 0 {
            return Err(Error::InvalidParameter("learn_len must be >= 1".into()));
        }
        if let Some(e) = epoch_len {
            if e <= learn_len {
                return Err(Error::InvalidParameter(format!(
                    "epoch_len {e} must exceed learn_len {learn_len}"
                )));
            }
        }
        Ok(Self {
            n,
            learn_len,
            epoch_len,
        })
    }
}

#[derive(Debug, Clone)]
enum McState {
    Learn {
        k: u64,
        stats: ChannelStats,
        sent: u64,
        clean: u64,
    },
    Chairs {
        ranking: Ranking,
        u_hat: usize,
        cand: Option<usize>,
    },
    Seated {
        ranking: Ranking,
        rank: usize,
    },
}

pub struct McPolicy {
    cfg: McConfig,
    rng: ChaCha8Rng,
    epoch: Option<u64>,
    u_hat: Option<usize>,
    state: McState,
}

impl McPolicy {
    pub fn new(cfg: McConfig, seed: u64, su_id: u32) -> Self {
        Self {
            cfg,
            rng: policy_rng(seed, su_id),
            epoch: None,
            u_hat: None,
            state: Self::learning(cfg.n),
        }
    }

    fn learning(n: usize) -> McState {
        McState::Learn {
            k: 0,
            stats: ChannelStats::new(n),
            sent: 0,
            clean: 0,
        }
    }

    /// Latest user-count estimate.
    pub fn u_hat(&self) -> Option<usize> {
        self.u_hat
    }
}

impl Policy for McPolicy {
    fn name(&self) -> &'static str {
        if self.cfg.epoch_len.is_some() {
            "dmc"
        } else {
            "mc"
        }
    }

    fn select(&mut self, t: u64) -> ChannelAction {
        if let Some(e) = self.cfg.epoch_len {
            let epoch = (t - 1) / e;
            if self.epoch.is_some_and(|p| p != epoch) {
                self.state = Self::learning(self.cfg.n);
            }
            self.epoch = Some(epoch);
        }
        match &mut self.state {
            McState::Learn { k, .. } => {
                *k += 1;
                ChannelAction::short(self.rng.gen_range(0..self.cfg.n))
            }
            McState::Chairs {
                ranking,
                u_hat,
                cand,
            } => {
                let r = *cand.get_or_insert_with(|| self.rng.gen_range(0..*u_hat));
                ChannelAction::short(ranking.channel(r))
            }
            McState::Seated { ranking, rank } => ChannelAction::incumbent(ranking.channel(*rank)),
        }
    }

    fn observe(&mut self, action: &ChannelAction, fb: &SlotFeedback) {
        match &mut self.state {
            McState::Learn {
                k,
                stats,
                sent,
                clean,
            } => {
                stats.record(action.channel, !fb.pu_busy);
                if fb.transmitted {
                    *sent += 1;
                    if !fb.collided {
                        *clean += 1;
                    }
                }
                if *k >= self.cfg.learn_len {
                    let nu = if *sent == 0 {
                        1.0
                    } else {
                        *clean as f64 / *sent as f64
                    };
                    let u_hat = mc_estimate_users(nu, self.cfg.n);
                    let (ranking, _) = rank_lenient(stats);
                    self.u_hat = Some(u_hat);
                    self.state = McState::Chairs {
                        ranking,
                        u_hat,
                        cand: None,
                    };
                }
            }
            McState::Chairs { ranking, cand, .. } => {
                if fb.pu_busy {
                    return;
                }
                if fb.success() {
                    let rank = cand.expect("candidate drawn");
                    self.state = McState::Seated {
                        ranking: ranking.clone(),
                        rank,
                    };
                } else if fb.collided {
                    *cand = None;
                }
            }
            McState::Seated { .. } => {}
        }
    }

    fn phase(&self) -> Phase {
        match &self.state {
            McState::Learn { .. } => Phase::Learn,
            McState::Chairs { .. } => Phase::Chairs,
            McState::Seated { rank, .. } => Phase::Seated { rank: *rank },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_reference() {
        assert_eq!(mc_estimate_users(1.0, 8), 1);
        assert_eq!(mc_estimate_users(0.875f64.powi(3), 8), 4);
        assert_eq!(mc_estimate_users(0.0, 8), 8);
        assert_eq!(mc_estimate_users(1e-9, 8), 8);
        assert_eq!(mc_estimate_users(0.3, 1), 1);
    }

    #[test]
    fn random_single_channel() {
        let mut p = RandomPolicy::new(1, 3, 1);
        assert!((1..100).all(|t| p.select(t).channel == 0));
    }

    #[test]
    fn epoch_restarts_learning() {
        let cfg = McConfig::new(4, 5, Some(20)).unwrap();
        let mut p = McPolicy::new(cfg, 9, 1);
        let ok = SlotFeedback {
            transmitted: true,
            reward: 1,
            ..Default::default()
        };
        let mut learn_starts = Vec::new();
        let mut prev = Phase::Seated { rank: 99 };
        for t in 1..=65 {
            let a = p.select(t);
            if p.phase() == Phase::Learn && prev != Phase::Learn {
                learn_starts.push(t);
            }
            p.observe(&a, &ok);
            prev = p.phase();
        }
        assert_eq!(learn_starts, vec![1, 21, 41, 61]);
        assert_eq!(p.u_hat(), Some(1));
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(McConfig::new(8, 0, None).is_err());
        assert!(McConfig::new(8, 100, Some(100)).is_err());
    }
}
