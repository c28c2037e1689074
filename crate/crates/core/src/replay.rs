//! Scripted replays of worked trekking examples.
//!
//! A fixture pins the probe table, each SU's starting rank and start slot,
//! and PU busy spans. Channels are identified with ranks (identity
//! ranking), characterization is skipped, and slot 1 is the first
//! trekking slot. Ranks in fixtures are 1-based.

use serde::{Deserialize, Serialize};

use crate::channel::ScriptedVacancy;
use crate::durations::ProbeBudgetTable;
use crate::engine::{self, Participant, Trace};
use crate::error::{Error, Result};
use crate::policy::{Policy, Ranking};
use crate::tdn::TdnPolicy;
use crate::tsn::TsnPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tsn,
    Tdn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusySpan {
    pub rank: usize,
    pub from: u64,
    pub to: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureUser {
    pub id: u32,
    pub rank: usize,
    #[serde(default = "one")]
    pub start: u64,
    #[serde(default)]
    pub departure: Option<u64>,
}

fn one() -> u64 {
    1
}

/// `slot`: first settle on `rank` happens exactly then. `by`: the SU has
/// settled (on `rank` if given, else anywhere) no later than this slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub id: u32,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub slot: Option<u64>,
    #[serde(default)]
    pub by: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub algorithm: Algorithm,
    pub n_probe: Vec<u64>,
    pub horizon: u64,
    #[serde(default)]
    pub t_tl: Option<u64>,
    #[serde(default)]
    pub busy: Vec<BusySpan>,
    pub users: Vec<FixtureUser>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Checkpoint {
    pub id: u32,
    pub rank: usize,
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub expectation: Expectation,
    pub observed: Option<u64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub name: String,
    pub checkpoints: Vec<Checkpoint>,
    pub outcomes: Vec<Outcome>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// First settle slot of `id` on 1-based `rank`.
    pub fn settle(&self, id: u32, rank: usize) -> Option<u64> {
        self.checkpoints
            .iter()
            .find(|c| c.id == id && c.rank == rank)
            .map(|c| c.slot)
    }
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Fixture = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_probe.len();
        let bad = |m: String| Err(Error::Fixture(m));
        if n == 0 {
            return bad("n_probe is empty".into());
        }
        for u in &self.users {
            if u.rank == 0 || u.rank > n {
                return bad(format!("user {} rank {} outside 1..={n}", u.id, u.rank));
            }
        }
        for b in &self.busy {
            if b.rank == 0 || b.rank > n || b.from > b.to {
                return bad(format!("bad busy span {b:?}"));
            }
        }
        if self.algorithm == Algorithm::Tdn && self.t_tl.unwrap_or(0) == 0 {
            return bad("tdn fixtures need t_tl >= 1".into());
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_probe.len()
    }

    pub fn run_trace(&self) -> Result<Trace> {
        let n = self.n();
        let table = ProbeBudgetTable::from_probes(self.n_probe.clone())?;
        let mut vac = ScriptedVacancy::all_vacant(n);
        for b in &self.busy {
            vac = vac.busy(b.rank - 1, b.from, b.to);
        }
        let parts = self
            .users
            .iter()
            .map(|u| {
                let policy: Box<dyn Policy> = match self.algorithm {
                    Algorithm::Tsn => Box::new(TsnPolicy::trekking(
                        Ranking::identity(n),
                        table.clone(),
                        u.rank - 1,
                    )),
                    Algorithm::Tdn => Box::new(TdnPolicy::continuous(
                        Ranking::identity(n),
                        table.clone(),
                        u.rank - 1,
                        self.t_tl.unwrap_or(1),
                        u.start <= 1,
                    )),
                };
                Participant {
                    su_id: u.id,
                    label: format!("{:?}", self.algorithm).to_lowercase(),
                    arrival: u.start,
                    departure: u.departure,
                    policy,
                }
            })
            .collect();
        engine::run(parts, &vac, self.horizon)
    }

    pub fn run(&self) -> Result<ReplayReport> {
        let trace = self.run_trace()?;
        let mut checkpoints: Vec<Checkpoint> = Vec::new();
        for e in &trace.events {
            if let Some(r) = e.phase.settled_rank() {
                if !checkpoints
                    .iter()
                    .any(|c| c.id == e.su_id && c.rank == r + 1)
                {
                    checkpoints.push(Checkpoint {
                        id: e.su_id,
                        rank: r + 1,
                        slot: e.slot,
                    });
                }
            }
        }
        let outcomes = self
            .expect
            .iter()
            .map(|x| {
                let observed = checkpoints
                    .iter()
                    .filter(|c| c.id == x.id && x.rank.is_none_or(|r| r == c.rank))
                    .map(|c| c.slot)
                    .min();
                let passed = observed
                    .is_some_and(|o| x.slot.is_none_or(|s| s == o) && x.by.is_none_or(|b| o <= b));
                Outcome {
                    expectation: x.clone(),
                    observed,
                    passed,
                }
            })
            .collect();
        Ok(ReplayReport {
            name: self.name.clone(),
            checkpoints,
            outcomes,
        })
    }
}
