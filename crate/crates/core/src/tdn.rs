//! Continuous trekking for dynamic networks.
//!
//! Characterization uses long sensing throughout so entrants never disturb
//! settled SUs. Afterwards the SU alternates between best-channel
//! identification (BCI, long-sensing probes) and temporary lock (TL, short
//! sensing on the reserved rank for `t_tl` slots).
//!
//! BCI keeps a physical probe rank `p` and a reserved rank `j`. A probe
//! window is `M_{j+1}` slots after the slot in which the probe was entered.
//! Before the first fall-back point exists (`fb == false`) a detection
//! pushes the SU one rank worse; afterwards a detection sends it back to
//! `j` in TL.
//!
//! Two SUs can end up in TL on the same channel when their rankings
//! disagree. A TL collision makes each of them leave with probability 1/2
//! and re-enter BCI as an entrant on that rank.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::durations::{DurationParams, ProbeBudgetTable};
use crate::error::{Error, Result};
use crate::policy::{
    policy_rng, rank_lenient, ChannelAction, Hopper, Phase, Policy, Ranking, SlotFeedback,
};
use crate::tsn::budget_table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TdnConfig {
    pub n: usize,
    pub theta: f64,
    pub t_rh: u64,
    pub t_sh: u64,
    pub t_tl: u64,
    pub delta_prime: f64,
}

impl TdnConfig {
    pub fn theory(n: usize, theta: f64, delta: f64, epsilon: f64, t_tl: u64) -> Result<Self> {
        if t_tl == 0 {
            return Err(Error::InvalidParameter("t_tl must be >= 1".into()));
        }
        let p = DurationParams::new(n, theta, delta, epsilon)?;
        Ok(Self {
            n,
            theta,
            t_rh: p.t_rh(),
            t_sh: p.t_sh(),
            t_tl,
            delta_prime: p.delta_prime,
        })
    }

    pub fn with_t_cc(mut self, t_cc: u64) -> Result<Self> {
        if t_cc < 2 {
            return Err(Error::InvalidParameter(format!(
                "characterization length {t_cc} is shorter than 2 slots"
            )));
        }
        self.t_rh = self.t_rh.min(t_cc - 1);
        self.t_sh = t_cc - self.t_rh;
        Ok(self)
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

#[derive(Debug, Clone)]
enum State {
    Cc(Hopper),
    Bci {
        p: usize,
        j: usize,
        y: u64,
        fb: bool,
    },
    Tl {
        j: usize,
        x: u64,
    },
}

pub struct TdnPolicy {
    cfg: TdnConfig,
    rng: ChaCha8Rng,
    local: u64,
    start_of_network: bool,
    ranking: Option<Ranking>,
    table: Option<ProbeBudgetTable>,
    tl_exits: u64,
    state: State,
}

impl TdnPolicy {
    /// `arrival` is the global slot of the SU's first action.
    pub fn new(cfg: TdnConfig, seed: u64, su_id: u32, arrival: u64) -> Self {
        Self {
            cfg,
            rng: policy_rng(seed, su_id),
            local: 0,
            start_of_network: arrival <= 1,
            ranking: None,
            table: None,
            tl_exits: 0,
            state: State::Cc(Hopper::new(cfg.n, true)),
        }
    }

    /// Starts directly in continuous trekking on `rank`.
    pub fn continuous(
        ranking: Ranking,
        table: ProbeBudgetTable,
        rank: usize,
        t_tl: u64,
        start_of_network: bool,
    ) -> Self {
        let n = ranking.len();
        let cfg = TdnConfig {
            n,
            theta: 0.0,
            t_rh: 0,
            t_sh: 0,
            t_tl,
            delta_prime: 0.0,
        };
        let mut p = Self {
            cfg,
            rng: policy_rng(0, 0),
            local: 0,
            start_of_network,
            ranking: Some(ranking),
            table: Some(table),
            tl_exits: 0,
            state: State::Tl { j: 0, x: 0 },
        };
        p.begin_ctr(rank);
        p
    }

    pub fn config(&self) -> &TdnConfig {
        &self.cfg
    }

    /// Completed TL to BCI transitions.
    pub fn tl_exits(&self) -> u64 {
        self.tl_exits
    }

    fn begin_ctr(&mut self, rank: usize) {
        let n = self.cfg.n;
        self.state = if self.start_of_network {
            // SUs present from the start are already orthogonal, so the
            // current rank is a safe fall-back.
            State::Bci {
                p: rank.saturating_sub(1),
                j: rank,
                y: 0,
                fb: true,
            }
        } else {
            State::Bci {
                p: rank,
                j: (rank + 1).min(n),
                y: 0,
                fb: false,
            }
        };
    }

    fn channel(&self, rank: usize) -> usize {
        self.ranking.as_ref().expect("ranked").channel(rank)
    }
}

impl Policy for TdnPolicy {
    fn name(&self) -> &'static str {
        "tdn"
    }

    fn select(&mut self, _t: u64) -> ChannelAction {
        self.local += 1;
        let t_tl = self.cfg.t_tl;
        match &mut self.state {
            State::Cc(h) => h.select(&mut self.rng),
            State::Bci { p, j, y, fb } => {
                let budget = self.table.as_ref().expect("ranked").budget(*j);
                if *y < budget {
                    *y += 1;
                    let ch = *p;
                    return ChannelAction::long(self.channel(ch));
                }
                if *j == 0 {
                    self.state = State::Tl { j: 0, x: 0 };
                    return ChannelAction::incumbent(self.channel(0));
                }
                // Probe confirmed free: reserve it and look one rank up.
                *j = *p;
                *p = p.saturating_sub(1);
                *y = 0;
                *fb = true;
                let ch = *p;
                ChannelAction::long(self.channel(ch))
            }
            State::Tl { j, x } => {
                if *x < t_tl {
                    *x += 1;
                    let ch = *j;
                    return ChannelAction::incumbent(self.channel(ch));
                }
                let j = *j;
                self.tl_exits += 1;
                if j == 0 {
                    self.state = State::Tl { j: 0, x: 0 };
                    return ChannelAction::incumbent(self.channel(0));
                }
                self.state = State::Bci {
                    p: j - 1,
                    j,
                    y: 0,
                    fb: true,
                };
                ChannelAction::long(self.channel(j - 1))
            }
        }
    }

    fn observe(&mut self, action: &ChannelAction, fb_in: &SlotFeedback) {
        let n = self.cfg.n;
        match &mut self.state {
            State::Cc(h) => {
                h.observe(action, fb_in);
                if self.local >= self.cfg.t_cc() {
                    let (ranking, est) = rank_lenient(h.stats());
                    let rank = ranking.rank_of(action.channel);
                    self.table = Some(budget_table(&est, self.cfg.theta, self.cfg.delta_prime));
                    self.ranking = Some(ranking);
                    self.begin_ctr(rank);
                }
            }
            State::Bci { p, j, y, fb } => {
                if fb_in.pu_busy || !fb_in.su_present {
                    return;
                }
                if *fb {
                    // A collision means another prober, not a settled SU.
                    if !fb_in.transmitted {
                        self.state = State::Tl { j: *j, x: 0 };
                    }
                } else if *p == n - 1 && fb_in.transmitted && self.rng.gen_bool(0.5) {
                    // Colliding at the bottom with nowhere lower to go.
                    self.state = State::Tl { j: n - 1, x: 0 };
                } else {
                    *p = (*j).min(n - 1);
                    *j = (*p + 1).min(n);
                    *y = 0;
                }
            }
            State::Tl { j, .. } => {
                if fb_in.collided && self.rng.gen_bool(0.5) {
                    let j = *j;
                    self.state = State::Bci {
                        p: j,
                        j: (j + 1).min(n),
                        y: 0,
                        fb: false,
                    };
                }
            }
        }
    }

    fn phase(&self) -> Phase {
        match &self.state {
            State::Cc(h) => h.phase(),
            State::Bci { p, j, .. } => Phase::Bci {
                reserved: *j,
                probe: *p,
            },
            State::Tl { j, .. } => Phase::Tl { rank: *j },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_table() -> ProbeBudgetTable {
        ProbeBudgetTable::from_probes(vec![3, 4, 5, 7, 11, 13, 21, 44]).unwrap()
    }

    fn drive_alone(p: &mut TdnPolicy, slots: u64) -> Vec<(u64, Phase)> {
        let mut out = Vec::new();
        let mut last = p.phase();
        for t in 1..=slots {
            let a = p.select(t);
            p.observe(
                &a,
                &SlotFeedback {
                    transmitted: true,
                    reward: 1,
                    ..Default::default()
                },
            );
            if p.phase() != last {
                last = p.phase();
                out.push((t, last));
            }
        }
        out
    }

    #[test]
    fn rejects_zero_dwell() {
        assert!(TdnConfig::theory(8, 0.1, 0.3, 0.07, 0).is_err());
        assert!(TdnConfig::theory(8, 0.1, 0.3, 0.07, 200).is_ok());
    }

    #[test]
    fn top_rank_cycles_tl() {
        let mut p = TdnPolicy::continuous(Ranking::identity(8), fig_table(), 0, 5, true);
        let ev = drive_alone(&mut p, 30);
        assert_eq!(ev.first(), Some(&(1, Phase::Tl { rank: 0 })));
        assert_eq!(ev.len(), 1);
        // Restarts every t_tl + 1 slots: 7, 13, 19, 25.
        assert_eq!(p.tl_exits(), 4);
    }

    #[test]
    fn lone_start_su_reaches_top() {
        let mut p = TdnPolicy::continuous(Ranking::identity(8), fig_table(), 2, 200, true);
        let ev = drive_alone(&mut p, 100);
        let first_tl = ev.iter().find(|e| matches!(e.1, Phase::Tl { .. }));
        assert_eq!(first_tl, Some(&(13, Phase::Tl { rank: 0 })));
    }

    #[test]
    fn entrant_pushed_down_then_confirms() {
        let mut p = TdnPolicy::continuous(Ranking::identity(8), fig_table(), 3, 200, false);
        assert_eq!(
            p.phase(),
            Phase::Bci {
                reserved: 4,
                probe: 3
            }
        );
        let a = p.select(1);
        p.observe(
            &a,
            &SlotFeedback {
                su_present: true,
                transmitted: true,
                collided: true,
                ..Default::default()
            },
        );
        assert_eq!(
            p.phase(),
            Phase::Bci {
                reserved: 5,
                probe: 4
            }
        );
    }

    #[test]
    fn tl_collision_eventually_yields() {
        let hit = SlotFeedback {
            su_present: true,
            transmitted: true,
            collided: true,
            ..Default::default()
        };
        let mut p = TdnPolicy::continuous(Ranking::identity(8), fig_table(), 0, 200, true);
        let a = p.select(1);
        p.observe(&a, &SlotFeedback::default());
        assert_eq!(p.phase(), Phase::Tl { rank: 0 });
        for t in 2..=64 {
            let a = p.select(t);
            p.observe(&a, &hit);
            if p.phase() != (Phase::Tl { rank: 0 }) {
                break;
            }
        }
        assert_eq!(p.phase(), Phase::Bci { reserved: 1, probe: 0 });
    }

    #[test]
    fn push_down_clamps_at_bottom() {
        let mut p = TdnPolicy::continuous(Ranking::identity(4), fig_table(), 3, 10, false);
        for t in 1..5 {
            let a = p.select(t);
            assert_eq!(a.channel, 3);
            p.observe(
                &a,
                &SlotFeedback {
                    su_present: true,
                    ..Default::default()
                },
            );
            assert_eq!(
                p.phase(),
                Phase::Bci {
                    reserved: 4,
                    probe: 3
                }
            );
        }
    }
}
