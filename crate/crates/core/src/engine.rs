//! Slot loop and per-slot channel resolution.

use std::collections::BTreeMap;

use crate::channel::VacancySource;
use crate::error::{Error, Result};
use crate::policy::{ChannelAction, Phase, Policy, Sensing, SlotFeedback};

/// One scheduled SU. Active for `arrival <= t < departure`.
pub struct Participant {
    pub su_id: u32,
    pub label: String,
    pub arrival: u64,
    pub departure: Option<u64>,
    pub policy: Box<dyn Policy>,
}

impl Participant {
    pub fn active_at(&self, t: u64) -> bool {
        t >= self.arrival && self.departure.is_none_or(|d| t < d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub slot: u64,
    pub su_id: u32,
    pub action: ChannelAction,
    pub feedback: SlotFeedback,
    /// Whether this SU was the only would-be transmitter on its channel,
    /// regardless of PU state. Drives expected-reward regret.
    pub sole_access: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEvent {
    pub slot: u64,
    pub su_id: u32,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub n: usize,
    pub horizon: u64,
    /// `vacancy[t - 1][c]`.
    pub vacancy: Vec<Vec<bool>>,
    /// Active SU count per slot.
    pub active: Vec<usize>,
    /// Ordered by slot, then by participant order.
    pub records: Vec<SlotRecord>,
    pub events: Vec<PhaseEvent>,
    pub labels: BTreeMap<u32, String>,
}

impl Trace {
    /// Records of slot `t` as a contiguous slice.
    pub fn slot_records(&self) -> impl Iterator<Item = &[SlotRecord]> {
        self.records.chunk_by(|a, b| a.slot == b.slot)
    }

    /// First slot at which `su_id` entered a settled state on `rank`.
    pub fn first_settle(&self, su_id: u32, rank: usize) -> Option<u64> {
        self.events
            .iter()
            .find(|e| e.su_id == su_id && e.phase.settled_rank() == Some(rank))
            .map(|e| e.slot)
    }
}

/// Resolves one slot. Returns feedback and sole-access flags aligned with
/// `actions`.
pub fn resolve_slot(actions: &[ChannelAction], vacant: &[bool]) -> Vec<(SlotFeedback, bool)> {
    let n = vacant.len();
    let mut short = vec![0u32; n];
    let mut long = vec![0u32; n];
    for a in actions {
        assert!(a.channel < n, "channel {} out of range", a.channel);
        debug_assert!(!a.incumbent || a.sensing == Sensing::Short);
        match a.sensing {
            Sensing::Short => short[a.channel] += 1,
            Sensing::Long => long[a.channel] += 1,
        }
    }
    actions
        .iter()
        .map(|a| {
            let c = a.channel;
            let is_short = a.sensing == Sensing::Short;
            // Unconditional transmitters key the channel first; listeners
            // only transmit into silence.
            let would = if short[c] > 0 { short[c] } else { long[c] };
            let would_send = is_short || short[c] == 0;
            let sole = would_send && would == 1;
            if !vacant[c] {
                let fb = SlotFeedback {
                    pu_busy: true,
                    ..Default::default()
                };
                return (fb, sole);
            }
            let others = if would_send { would - 1 } else { would };
            let collided = would_send && others > 0;
            let fb = SlotFeedback {
                pu_busy: false,
                su_present: others > 0,
                transmitted: would_send,
                collided,
                reward: u8::from(would_send && !collided),
            };
            (fb, sole)
        })
        .collect()
}

/// Rejects schedules with bad windows or more than `n` concurrent SUs.
pub fn validate_schedule(participants: &[Participant], n: usize) -> Result<()> {
    let mut deltas: BTreeMap<u64, i64> = BTreeMap::new();
    for p in participants {
        if p.arrival == 0 {
            return Err(Error::InvalidSchedule(format!(
                "SU {} arrives at slot 0; slots start at 1",
                p.su_id
            )));
        }
        if let Some(d) = p.departure {
            if d <= p.arrival {
                return Err(Error::InvalidSchedule(format!(
                    "SU {} departs at {d}, not after its arrival {}",
                    p.su_id, p.arrival
                )));
            }
            *deltas.entry(d).or_default() -= 1;
        }
        *deltas.entry(p.arrival).or_default() += 1;
    }
    let mut ids: Vec<u32> = participants.iter().map(|p| p.su_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSchedule("duplicate SU id".into()));
    }
    let mut active = 0i64;
    for (t, d) in deltas {
        active += d;
        if active > n as i64 {
            return Err(Error::InvalidSchedule(format!(
                "active count {active} exceeds N = {n} at slot {t}"
            )));
        }
    }
    Ok(())
}

/// Runs `participants` for slots `1..=horizon` against `source`.
pub fn run(
    mut participants: Vec<Participant>,
    source: &dyn VacancySource,
    horizon: u64,
) -> Result<Trace> {
    let n = source.n_channels();
    validate_schedule(&participants, n)?;
    let mut trace = Trace {
        n,
        horizon,
        labels: participants
            .iter()
            .map(|p| (p.su_id, p.label.clone()))
            .collect(),
        ..Default::default()
    };
    trace.vacancy.reserve(horizon as usize);
    trace.active.reserve(horizon as usize);
    let mut phases: Vec<Option<Phase>> = vec![None; participants.len()];
    let mut idx = Vec::with_capacity(participants.len());
    let mut actions = Vec::with_capacity(participants.len());

    for t in 1..=horizon {
        let vacant = source.sample_slot(t).vacant;
        idx.clear();
        actions.clear();
        for (i, p) in participants.iter_mut().enumerate() {
            if !p.active_at(t) {
                continue;
            }
            let a = p.policy.select(t);
            note_phase(&mut trace.events, &mut phases[i], p, t);
            idx.push(i);
            actions.push(a);
        }
        let feedback = resolve_slot(&actions, &vacant);
        for ((&i, a), (fb, sole)) in idx.iter().zip(&actions).zip(feedback) {
            let p = &mut participants[i];
            p.policy.observe(a, &fb);
            note_phase(&mut trace.events, &mut phases[i], p, t);
            trace.records.push(SlotRecord {
                slot: t,
                su_id: p.su_id,
                action: *a,
                feedback: fb,
                sole_access: sole,
            });
        }
        trace.active.push(idx.len());
        trace.vacancy.push(vacant);
    }
    Ok(trace)
}

fn note_phase(events: &mut Vec<PhaseEvent>, last: &mut Option<Phase>, p: &Participant, t: u64) {
    let ph = p.policy.phase();
    if *last != Some(ph) {
        events.push(PhaseEvent {
            slot: t,
            su_id: p.su_id,
            phase: ph,
        });
        *last = Some(ph);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ScriptedVacancy;

    fn fb_of(actions: &[ChannelAction], vacant: &[bool]) -> Vec<SlotFeedback> {
        resolve_slot(actions, vacant)
            .into_iter()
            .map(|x| x.0)
            .collect()
    }

    #[test]
    fn two_short_collide() {
        let f = fb_of(&[ChannelAction::short(0), ChannelAction::short(0)], &[true]);
        assert!(f
            .iter()
            .all(|x| x.collided && x.reward == 0 && x.transmitted));
    }

    #[test]
    fn prober_defers_to_incumbent() {
        let f = fb_of(
            &[ChannelAction::long(1), ChannelAction::incumbent(1)],
            &[true, true],
        );
        assert!(f[0].su_present && !f[0].transmitted && !f[0].collided);
        assert!(f[1].reward == 1 && !f[1].collided);
    }

    #[test]
    fn busy_channel_blocks_everyone() {
        let f = fb_of(&[ChannelAction::short(0), ChannelAction::long(0)], &[false]);
        for x in f {
            assert!(x.pu_busy && !x.transmitted && !x.collided && x.reward == 0);
        }
    }

    #[test]
    fn silent_probers_collide() {
        let f = fb_of(&[ChannelAction::long(0), ChannelAction::long(0)], &[true]);
        assert!(f
            .iter()
            .all(|x| x.collided && x.su_present && x.transmitted));
        let lone = fb_of(&[ChannelAction::long(0)], &[true]);
        assert!(lone[0].reward == 1 && !lone[0].su_present);
    }

    #[test]
    fn sole_access_ignores_pu_state() {
        let r = resolve_slot(
            &[
                ChannelAction::long(0),
                ChannelAction::incumbent(0),
                ChannelAction::long(1),
            ],
            &[false, false],
        );
        assert_eq!(
            r.iter().map(|x| x.1).collect::<Vec<_>>(),
            vec![false, true, true]
        );
    }

    struct Fixed(usize);
    impl Policy for Fixed {
        fn name(&self) -> &'static str {
            "fixed"
        }
        fn select(&mut self, _t: u64) -> ChannelAction {
            ChannelAction::incumbent(self.0)
        }
        fn observe(&mut self, _a: &ChannelAction, _f: &SlotFeedback) {}
        fn phase(&self) -> Phase {
            Phase::Locked { rank: self.0 }
        }
    }

    fn fixed(id: u32, ch: usize, arrival: u64, departure: Option<u64>) -> Participant {
        Participant {
            su_id: id,
            label: "fixed".into(),
            arrival,
            departure,
            policy: Box::new(Fixed(ch)),
        }
    }

    #[test]
    fn empty_schedule_records_vacancy_only() {
        let tr = run(vec![], &ScriptedVacancy::all_vacant(3), 10).unwrap();
        assert_eq!(tr.vacancy.len(), 10);
        assert!(tr.records.is_empty());
    }

    #[test]
    fn activity_windows() {
        let parts = vec![fixed(1, 0, 1, Some(4)), fixed(2, 1, 3, None)];
        let tr = run(parts, &ScriptedVacancy::all_vacant(2), 6).unwrap();
        assert_eq!(tr.active, vec![1, 1, 2, 1, 1, 1]);
        assert_eq!(tr.records.len(), 7);
        assert_eq!(tr.slot_records().count(), 6);
    }

    #[test]
    fn overfull_schedule_rejected() {
        let parts = vec![fixed(1, 0, 1, None), fixed(2, 0, 5, None)];
        let err = run(parts, &ScriptedVacancy::all_vacant(1), 10).unwrap_err();
        assert!(err.to_string().contains("exceeds"));
        let ok = vec![fixed(1, 0, 1, Some(5)), fixed(2, 0, 5, None)];
        assert!(run(ok, &ScriptedVacancy::all_vacant(1), 10).is_ok());
    }
}
