//! Trekking for static networks.
//!
//! Channel characterization (random then sequential hopping, short sensing)
//! runs for `t_rh + t_sh` local slots. The SU then reserves its current
//! rank `J` and probes rank `J-1` with long sensing for `M_J + 1` slots.
//! Hearing another SU on a vacant probe locks it on `J`; a quiet window
//! moves the reservation up one rank. Reaching rank 0 locks there.
//!
//! Two probers can meet on one channel when their rankings disagree. Each
//! hears the other through the collision and locks with probability 1/2,
//! otherwise it keeps probing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::durations::{m_table, DurationParams, ProbeBudgetTable};
use crate::error::{Error, Result};
use crate::policy::{
    policy_rng, rank_lenient, ChannelAction, Hopper, Phase, Policy, Ranking, SlotFeedback,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TsnConfig {
    pub n: usize,
    pub theta: f64,
    pub t_rh: u64,
    pub t_sh: u64,
    pub delta_prime: f64,
}

impl TsnConfig {
    /// Durations from the closed forms with the confidence split evenly.
    pub fn theory(n: usize, theta: f64, delta: f64, epsilon: f64) -> Result<Self> {
        let p = DurationParams::new(n, theta, delta, epsilon)?;
        Ok(Self {
            n,
            theta,
            t_rh: p.t_rh(),
            t_sh: p.t_sh(),
            delta_prime: p.delta_prime,
        })
    }

    /// Replaces the characterization lengths.
    pub fn with_cc(mut self, t_rh: u64, t_sh: u64) -> Result<Self> {
        if t_rh + t_sh < 2 {
            return Err(Error::InvalidParameter(format!(
                "characterization length {} is shorter than 2 slots",
                t_rh + t_sh
            )));
        }
        self.t_rh = t_rh;
        self.t_sh = t_sh;
        Ok(self)
    }

    /// Splits a total length, keeping the current `t_rh` when it fits.
    pub fn with_t_cc(self, t_cc: u64) -> Result<Self> {
        if t_cc < 2 {
            return Err(Error::InvalidParameter(format!(
                "characterization length {t_cc} is shorter than 2 slots"
            )));
        }
        let t_rh = self.t_rh.min(t_cc - 1);
        self.with_cc(t_rh, t_cc - t_rh)
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Result<Self> {
        if !(delta_prime > 0.0 && delta_prime < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_prime = {delta_prime} must lie in (0, 1)"
            )));
        }
        self.delta_prime = delta_prime;
        Ok(self)
    }

    pub fn t_cc(&self) -> u64 {
        self.t_rh + self.t_sh
    }
}

/// Ranks estimates best-first, flooring each at `theta` so every probe
/// budget is defined.
pub(crate) fn budget_table(
    ranked_mu_hat: &[f64],
    theta: f64,
    delta_prime: f64,
) -> ProbeBudgetTable {
    let floored: Vec<f64> = ranked_mu_hat.iter().map(|&m| m.max(theta)).collect();
    m_table(&floored, delta_prime).expect("floored estimates are positive")
}

#[derive(Debug, Clone)]
enum State {
    Cc(Hopper),
    Trek { j0: usize, y: u64 },
    Locked { rank: usize },
}

pub struct TsnPolicy {
    cfg: TsnConfig,
    rng: ChaCha8Rng,
    local: u64,
    ranking: Option<Ranking>,
    table: Option<ProbeBudgetTable>,
    state: State,
}

impl TsnPolicy {
    pub fn new(cfg: TsnConfig, seed: u64, su_id: u32) -> Self {
        Self {
            cfg,
            rng: policy_rng(seed, su_id),
            local: 0,
            ranking: None,
            table: None,
            state: State::Cc(Hopper::new(cfg.n, false)),
        }
    }

    /// Starts directly in the trekking phase from `rank`, skipping
    /// characterization. Used for scripted replays.
    pub fn trekking(ranking: Ranking, table: ProbeBudgetTable, rank: usize) -> Self {
        let n = ranking.len();
        let cfg = TsnConfig {
            n,
            theta: 0.0,
            t_rh: 0,
            t_sh: 0,
            delta_prime: 0.0,
        };
        let mut p = Self {
            cfg,
            rng: policy_rng(0, 0),
            local: 0,
            ranking: Some(ranking),
            table: Some(table),
            state: State::Locked { rank: 0 },
        };
        p.begin_trek(rank);
        p
    }

    pub fn config(&self) -> &TsnConfig {
        &self.cfg
    }

    pub fn ranking(&self) -> Option<&Ranking> {
        self.ranking.as_ref()
    }

    fn begin_trek(&mut self, rank: usize) {
        self.state = if rank == 0 {
            State::Locked { rank: 0 }
        } else {
            State::Trek { j0: rank, y: 0 }
        };
    }

    fn channel(&self, rank: usize) -> usize {
        self.ranking.as_ref().expect("ranked").channel(rank)
    }
}

impl Policy for TsnPolicy {
    fn name(&self) -> &'static str {
        "tsn"
    }

    fn select(&mut self, _t: u64) -> ChannelAction {
        self.local += 1;
        match &mut self.state {
            State::Cc(h) => h.select(&mut self.rng),
            State::Trek { j0, y } => {
                let budget = self.table.as_ref().expect("ranked").budget(*j0);
                if *y > budget {
                    *j0 -= 1;
                    *y = 0;
                    if *j0 == 0 {
                        self.state = State::Locked { rank: 0 };
                        return ChannelAction::incumbent(self.channel(0));
                    }
                }
                *y += 1;
                let probe = *j0 - 1;
                ChannelAction::long(self.channel(probe))
            }
            State::Locked { rank } => {
                let rank = *rank;
                ChannelAction::incumbent(self.channel(rank))
            }
        }
    }

    fn observe(&mut self, action: &ChannelAction, fb: &SlotFeedback) {
        match &mut self.state {
            State::Cc(h) => {
                h.observe(action, fb);
                if self.local >= self.cfg.t_cc() {
                    let (ranking, est) = rank_lenient(h.stats());
                    let rank = ranking.rank_of(action.channel);
                    self.table = Some(budget_table(&est, self.cfg.theta, self.cfg.delta_prime));
                    self.ranking = Some(ranking);
                    self.begin_trek(rank);
                }
            }
            State::Trek { j0, .. } => {
                if !fb.pu_busy && fb.su_present && !(fb.collided && self.rng.gen_bool(0.5)) {
                    self.state = State::Locked { rank: *j0 };
                }
            }
            State::Locked { .. } => {}
        }
    }

    fn phase(&self) -> Phase {
        match &self.state {
            State::Cc(h) => h.phase(),
            State::Trek { j0, .. } => Phase::Trek { reserved: *j0 },
            State::Locked { rank } => Phase::Locked { rank: *rank },
        }
    }
}
