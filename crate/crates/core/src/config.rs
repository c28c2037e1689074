//! Experiment configuration (TOML) with exhaustive validation.
//!
//! ```toml
//! horizon = 10000
//! repetitions = 50
//! base_seed = 1
//! output_directory = "out"
//! stride = 100
//!
//! [model]
//! mu = [0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
//! theta = 0.1
//!
//! [schedule]
//! users = 4            # or [[schedule.entries]] with arrival / departure
//!
//! [[policies]]
//! kind = "tsn"         # tsn | tdn | mc | dmc | random | seqhop
//! preset = "fixed"     # fixed | theory
//! t_cc = 2000
//! ```
//!
//! `fixed` pins T_CC = 2000, T_TL = 200, learn 2000 and epoch 13000;
//! `theory` derives every length from the closed forms. Explicit keys
//! override either preset.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::baselines::{McConfig, McPolicy, RandomPolicy, SeqHopPolicy};
use crate::channel::ChannelModel;
use crate::durations::{t_bci, t_tr, x_switches, DurationParams};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::tdn::{TdnConfig, TdnPolicy};
use crate::tsn::{TsnConfig, TsnPolicy};

pub const FIXED_T_CC: u64 = 2000;
pub const FIXED_T_TL: u64 = 200;
pub const FIXED_LEARN: u64 = 2000;
pub const FIXED_EPOCH: u64 = 13000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Tsn,
    Tdn,
    Mc,
    Dmc,
    Random,
    Seqhop,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tsn" => Self::Tsn,
            "tdn" => Self::Tdn,
            "mc" => Self::Mc,
            "dmc" => Self::Dmc,
            "random" => Self::Random,
            "seqhop" => Self::Seqhop,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tsn => "tsn",
            Self::Tdn => "tdn",
            Self::Mc => "mc",
            Self::Dmc => "dmc",
            Self::Random => "random",
            Self::Seqhop => "seqhop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fixed,
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub label: String,
    pub preset: Preset,
    pub delta: f64,
    pub epsilon: f64,
    pub t_cc: Option<u64>,
    pub t_rh: Option<u64>,
    pub t_tl: Option<u64>,
    pub learn_len: Option<u64>,
    pub epoch_len: Option<u64>,
    pub delta_prime: Option<f64>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, preset: Preset) -> Self {
        Self {
            kind,
            label: kind.as_str().to_string(),
            preset,
            delta: 0.3,
            epsilon: 0.07,
            t_cc: None,
            t_rh: None,
            t_tl: None,
            learn_len: None,
            epoch_len: None,
            delta_prime: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub arrival: u64,
    pub departure: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleSpec {
    Static { users: usize },
    Dynamic { entries: Vec<ScheduleEntry> },
}

impl ScheduleSpec {
    /// Entries with SU ids assigned from 1 in listed order.
    pub fn entries(&self) -> Vec<(u32, ScheduleEntry)> {
        match self {
            Self::Static { users } => (1..=*users as u32)
                .map(|id| {
                    (
                        id,
                        ScheduleEntry {
                            arrival: 1,
                            departure: None,
                        },
                    )
                })
                .collect(),
            Self::Dynamic { entries } => entries
                .iter()
                .enumerate()
                .map(|(i, e)| (i as u32 + 1, *e))
                .collect(),
        }
    }

    pub fn max_active(&self) -> usize {
        let mut ev: BTreeMap<u64, i64> = BTreeMap::new();
        for (_, e) in self.entries() {
            *ev.entry(e.arrival).or_default() += 1;
            if let Some(d) = e.departure {
                *ev.entry(d).or_default() -= 1;
            }
        }
        let mut cur = 0i64;
        let mut best = 0i64;
        for d in ev.values() {
            cur += d;
            best = best.max(cur);
        }
        best as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub mu: Vec<f64>,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub horizon: u64,
    pub repetitions: u32,
    pub base_seed: u64,
    pub output_directory: PathBuf,
    pub stride: u64,
    pub model: ModelSpec,
    pub schedule: ScheduleSpec,
    pub policies: Vec<PolicySpec>,
}

impl ExperimentConfig {
    pub fn n(&self) -> usize {
        self.model.mu.len()
    }

    pub fn channel_model(&self, seed: u64) -> ChannelModel {
        ChannelModel::new(self.model.mu.clone(), self.model.theta, seed).expect("validated")
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("serializable");
        hex::encode(Sha256::digest(json))
    }

    pub fn resolve(&self, spec: &PolicySpec) -> Result<ResolvedPolicy> {
        ResolvedPolicy::new(spec, self.n(), self.model.theta, self.horizon)
    }
}

/// A policy spec with every duration fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedPolicy {
    Tsn(TsnConfig),
    Tdn(TdnConfig),
    Mc(McConfig),
    Random { n: usize },
    Seqhop { n: usize },
}

impl ResolvedPolicy {
    pub fn new(spec: &PolicySpec, n: usize, theta: f64, horizon: u64) -> Result<Self> {
        let fixed = spec.preset == Preset::Fixed;
        Ok(match spec.kind {
            PolicyKind::Tsn => {
                let mut c = TsnConfig::theory(n, theta, spec.delta, spec.epsilon)?;
                c = cc_override(c, spec, fixed, |c, rh, sh| c.with_cc(rh, sh))?;
                if let Some(d) = spec.delta_prime {
                    c = c.with_delta_prime(d)?;
                }
                Self::Tsn(c)
            }
            PolicyKind::Tdn => {
                let t_tl = spec.t_tl.unwrap_or(if fixed {
                    FIXED_T_TL
                } else {
                    (horizon as f64).sqrt().ceil() as u64
                });
                let mut c = TdnConfig::theory(n, theta, spec.delta, spec.epsilon, t_tl)?;
                c = cc_override(c, spec, fixed, |mut c, rh, sh| {
                    c.t_rh = rh;
                    c.t_sh = sh;
                    Ok(c)
                })?;
                if let Some(d) = spec.delta_prime {
                    c = c.with_delta_prime(d)?;
                }
                Self::Tdn(c)
            }
            PolicyKind::Mc | PolicyKind::Dmc => {
                let learn = spec.learn_len.unwrap_or(FIXED_LEARN);
                let epoch =
                    (spec.kind == PolicyKind::Dmc).then(|| spec.epoch_len.unwrap_or(FIXED_EPOCH));
                Self::Mc(McConfig::new(n, learn, epoch)?)
            }
            PolicyKind::Random => Self::Random { n },
            PolicyKind::Seqhop => Self::Seqhop { n },
        })
    }

    pub fn build(&self, seed: u64, su_id: u32, arrival: u64) -> Box<dyn Policy> {
        match *self {
            Self::Tsn(c) => Box::new(TsnPolicy::new(c, seed, su_id)),
            Self::Tdn(c) => Box::new(TdnPolicy::new(c, seed, su_id, arrival)),
            Self::Mc(c) => Box::new(McPolicy::new(c, seed, su_id)),
            Self::Random { n } => Box::new(RandomPolicy::new(n, seed, su_id)),
            Self::Seqhop { n } => Box::new(SeqHopPolicy::new(n, seed, su_id)),
        }
    }

    /// Durations in effect, keyed by name.
    pub fn durations(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            Self::Tsn(c) => {
                m.insert("t_rh".into(), c.t_rh as f64);
                m.insert("t_sh".into(), c.t_sh as f64);
                m.insert("t_cc".into(), c.t_cc() as f64);
                m.insert("delta_prime".into(), c.delta_prime);
            }
            Self::Tdn(c) => {
                m.insert("t_rh".into(), c.t_rh as f64);
                m.insert("t_sh".into(), c.t_sh as f64);
                m.insert("t_cc".into(), c.t_cc() as f64);
                m.insert("t_tl".into(), c.t_tl as f64);
                m.insert("delta_prime".into(), c.delta_prime);
            }
            Self::Mc(c) => {
                m.insert("learn_len".into(), c.learn_len as f64);
                if let Some(e) = c.epoch_len {
                    m.insert("epoch_len".into(), e as f64);
                }
            }
            Self::Random { .. } | Self::Seqhop { .. } => {}
        }
        m
    }
}

fn cc_override<C: Copy + HasCc>(
    c: C,
    spec: &PolicySpec,
    fixed: bool,
    set: impl Fn(C, u64, u64) -> Result<C>,
) -> Result<C> {
    let t_cc = spec.t_cc.or(fixed.then_some(FIXED_T_CC));
    let Some(t_cc) = t_cc else {
        return match spec.t_rh {
            Some(rh) => set(c, rh, c.t_sh()),
            None => Ok(c),
        };
    };
    if t_cc < 2 {
        return Err(Error::InvalidParameter(format!(
            "t_cc = {t_cc} is shorter than 2 slots"
        )));
    }
    let rh = spec.t_rh.unwrap_or(c.t_rh()).min(t_cc - 1);
    set(c, rh, t_cc - rh)
}

trait HasCc {
    fn t_rh(&self) -> u64;
    fn t_sh(&self) -> u64;
}

impl HasCc for TsnConfig {
    fn t_rh(&self) -> u64 {
        self.t_rh
    }
    fn t_sh(&self) -> u64 {
        self.t_sh
    }
}

impl HasCc for TdnConfig {
    fn t_rh(&self) -> u64 {
        self.t_rh
    }
    fn t_sh(&self) -> u64 {
        self.t_sh
    }
}

/// Text report of all durations for one config.
pub fn explain(cfg: &ExperimentConfig) -> Result<String> {
    use std::fmt::Write;
    let n = cfg.n();
    let theta = cfg.model.theta;
    let mut s = String::new();
    let u = cfg.schedule.max_active().max(1);
    writeln!(
        s,
        "N = {n}, theta = {theta}, horizon = {}, max active U = {u}",
        cfg.horizon
    )
    .ok();
    for spec in &cfg.policies {
        writeln!(
            s,
            "\n[{}] kind = {}, preset = {:?}",
            spec.label,
            spec.kind.as_str(),
            spec.preset
        )
        .ok();
        let p = DurationParams::new(n, theta, spec.delta, spec.epsilon)?;
        writeln!(
            s,
            "  delta = {}, epsilon = {}, delta1 = delta2 = delta3 = {:.6}",
            p.delta, p.epsilon, p.delta3
        )
        .ok();
        writeln!(
            s,
            "  T_RH  = ceil(ln(d1/N) / ln(1 - theta (1-1/N)^(N-1)))      = {}",
            p.t_rh()
        )
        .ok();
        writeln!(
            s,
            "  T_SH  = ceil((2N/eps^2) ln(2N^2/d2))                       = {}",
            p.t_sh()
        )
        .ok();
        writeln!(
            s,
            "  T_TR  = ceil(ln(d3/(N U)) / ln(1-theta)) N(N-1)/2  (U = {u})  = {}",
            t_tr(n, theta, p.delta3, u)?
        )
        .ok();
        let bci = t_bci(n, theta, spec.delta)?;
        writeln!(
            s,
            "  T_BCI = ceil(ln(delta/3) / ln(1-theta)) N(N-1)/2           = {bci}"
        )
        .ok();
        let resolved = cfg.resolve(spec)?;
        for (k, v) in resolved.durations() {
            writeln!(s, "  in effect: {k} = {v}").ok();
        }
        if let ResolvedPolicy::Tdn(c) = resolved {
            let x0 = x_switches(cfg.horizon, c.t_cc(), bci, c.t_tl, 0);
            writeln!(
                s,
                "  x_0   = ceil((T - T_CC - T_BCI) / (T_TL + T_BCI))          = {x0}"
            )
            .ok();
        }
        let dp = spec.delta_prime.unwrap_or(p.delta_prime);
        let mut sorted = cfg.model.mu.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let table = crate::durations::m_table(&sorted, dp)?;
        writeln!(s, "  probe table at true mu, delta' = {dp:.6}:").ok();
        writeln!(s, "    rank  mu      N_j   M_j").ok();
        for (r, m) in sorted.iter().enumerate() {
            writeln!(
                s,
                "    {:<4}  {:<6.3}  {:<4}  {}",
                r + 1,
                m,
                table.n_probe()[r],
                table.m_budget()[r]
            )
            .ok();
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------- parsing

struct Walker {
    errors: Vec<String>,
}

impl Walker {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn unknown_keys(&mut self, path: &str, t: &toml::Table, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                self.err(&p, "unknown key");
            }
        }
    }

    fn uint(&mut self, t: &toml::Table, path: &str, key: &str, required: bool) -> Option<u64> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                if required {
                    self.err(&p, "missing required key");
                }
                None
            }
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(v) => {
                self.err(&p, format!("expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn float(&mut self, t: &toml::Table, path: &str, key: &str, required: bool) -> Option<f64> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                if required {
                    self.err(&p, "missing required key");
                }
                None
            }
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(v) => {
                self.err(&p, format!("expected a number, got {v}"));
                None
            }
        }
    }

    fn string(&mut self, t: &toml::Table, path: &str, key: &str, required: bool) -> Option<String> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                if required {
                    self.err(&p, "missing required key");
                }
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.err(&p, format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn table<'a>(&mut self, t: &'a toml::Table, path: &str, key: &str) -> Option<&'a toml::Table> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                self.err(&p, "missing required table");
                None
            }
            Some(Value::Table(x)) => Some(x),
            Some(_) => {
                self.err(&p, "expected a table");
                None
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn open_prob(w: &mut Walker, path: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x > 0.0 && x < 1.0) {
            w.err(path, format!("{x} must lie in (0, 1)"));
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {e}")]))?;
    let mut w = Walker { errors: Vec::new() };
    w.unknown_keys(
        "",
        &root,
        &[
            "horizon",
            "repetitions",
            "base_seed",
            "output_directory",
            "stride",
            "model",
            "schedule",
            "policies",
        ],
    );

    let horizon = w.uint(&root, "", "horizon", true);
    if horizon == Some(0) {
        w.err("horizon", "must be >= 1");
    }
    let repetitions = w.uint(&root, "", "repetitions", true);
    if repetitions == Some(0) {
        w.err("repetitions", "must be >= 1");
    }
    let base_seed = w.uint(&root, "", "base_seed", true);
    let output_directory = w.string(&root, "", "output_directory", true);
    let stride = w.uint(&root, "", "stride", false).unwrap_or(100);
    if stride == 0 {
        w.err("stride", "must be >= 1");
    }

    let model = w.table(&root, "", "model").and_then(|m| {
        w.unknown_keys("model", m, &["mu", "theta"]);
        let theta = w.float(m, "model", "theta", true);
        let mu = match m.get("mu") {
            None => {
                w.err("model.mu", "missing required key");
                None
            }
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(x) => out.push(*x as f64),
                        _ => w.err(&format!("model.mu[{i}]"), "expected a number"),
                    }
                }
                Some(out)
            }
            Some(_) => {
                w.err("model.mu", "expected an array");
                None
            }
        };
        let (mu, theta) = (mu?, theta?);
        if let Err(e) = ChannelModel::new(mu.clone(), theta, 0) {
            w.err("model", e);
            return None;
        }
        Some(ModelSpec { mu, theta })
    });
    let n = model.as_ref().map(|m| m.mu.len());

    let schedule = w.table(&root, "", "schedule").and_then(|s| {
        w.unknown_keys("schedule", s, &["users", "entries"]);
        match (s.get("users"), s.get("entries")) {
            (Some(_), Some(_)) => {
                w.err("schedule", "give either users or entries, not both");
                None
            }
            (None, None) => {
                w.err("schedule", "missing users or entries");
                None
            }
            (Some(_), None) => {
                let u = w.uint(s, "schedule", "users", true)? as usize;
                if u == 0 {
                    w.err("schedule.users", "must be >= 1");
                }
                Some(ScheduleSpec::Static { users: u })
            }
            (None, Some(Value::Array(a))) => {
                let mut entries = Vec::new();
                for (i, e) in a.iter().enumerate() {
                    let p = format!("schedule.entries[{i}]");
                    let Value::Table(t) = e else {
                        w.err(&p, "expected a table");
                        continue;
                    };
                    w.unknown_keys(&p, t, &["arrival", "departure"]);
                    let arrival = w.uint(t, &p, "arrival", true);
                    let departure = w.uint(t, &p, "departure", false);
                    if let Some(a) = arrival {
                        if a == 0 {
                            w.err(&join(&p, "arrival"), "slots start at 1");
                        }
                        if let Some(d) = departure {
                            if d <= a {
                                w.err(&join(&p, "departure"), "must be after arrival");
                            }
                        }
                        entries.push(ScheduleEntry {
                            arrival: a,
                            departure,
                        });
                    }
                }
                Some(ScheduleSpec::Dynamic { entries })
            }
            (None, Some(_)) => {
                w.err("schedule.entries", "expected an array of tables");
                None
            }
        }
    });
    if let (Some(s), Some(n)) = (&schedule, n) {
        let peak = s.max_active();
        if peak > n {
            w.err("schedule", format!("active count exceeds N ({peak} > {n})"));
        }
    }

    let mut policies = Vec::new();
    match root.get("policies") {
        None => w.err("policies", "missing required key"),
        Some(Value::Array(a)) if a.is_empty() => w.err("policies", "must not be empty"),
        Some(Value::Array(a)) => {
            for (i, v) in a.iter().enumerate() {
                let p = format!("policies[{i}]");
                let Value::Table(t) = v else {
                    w.err(&p, "expected a table");
                    continue;
                };
                if let Some(spec) = parse_policy(&mut w, &p, t, n, model.as_ref(), horizon) {
                    policies.push(spec);
                }
            }
        }
        Some(_) => w.err("policies", "expected an array of tables"),
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in &policies {
        if !seen.insert(p.label.clone()) {
            w.err("policies", format!("duplicate label {:?}", p.label));
        }
    }

    if !w.errors.is_empty() {
        return Err(Error::Config(w.errors));
    }
    Ok(ExperimentConfig {
        horizon: horizon.expect("checked"),
        repetitions: repetitions.expect("checked") as u32,
        base_seed: base_seed.expect("checked"),
        output_directory: PathBuf::from(output_directory.expect("checked")),
        stride,
        model: model.expect("checked"),
        schedule: schedule.expect("checked"),
        policies,
    })
}

fn parse_policy(
    w: &mut Walker,
    p: &str,
    t: &toml::Table,
    n: Option<usize>,
    model: Option<&ModelSpec>,
    horizon: Option<u64>,
) -> Option<PolicySpec> {
    w.unknown_keys(
        p,
        t,
        &[
            "kind",
            "label",
            "preset",
            "delta",
            "epsilon",
            "t_cc",
            "t_rh",
            "t_tl",
            "learn_len",
            "epoch_len",
            "delta_prime",
        ],
    );
    let kind_s = w.string(t, p, "kind", true);
    let kind = kind_s.as_deref().and_then(|k| {
        let r = PolicyKind::parse(k);
        if r.is_none() {
            w.err(&join(p, "kind"), format!("unknown policy kind {k:?}"));
        }
        r
    });
    let preset = match w.string(t, p, "preset", false).as_deref() {
        None | Some("fixed") => Preset::Fixed,
        Some("theory") => Preset::Theory,
        Some(other) => {
            w.err(&join(p, "preset"), format!("unknown preset {other:?}"));
            Preset::Fixed
        }
    };
    let delta = w.float(t, p, "delta", false);
    open_prob(w, &join(p, "delta"), delta);
    let epsilon = w.float(t, p, "epsilon", false);
    if let Some(e) = epsilon {
        if !(e > 0.0 && e <= 1.0) {
            w.err(&join(p, "epsilon"), format!("{e} must lie in (0, 1]"));
        }
    }
    let delta_prime = w.float(t, p, "delta_prime", false);
    open_prob(w, &join(p, "delta_prime"), delta_prime);
    let t_cc = w.uint(t, p, "t_cc", false);
    if let Some(c) = t_cc {
        if c < 2 {
            w.err(&join(p, "t_cc"), "must be >= 2");
        }
    }
    let t_rh = w.uint(t, p, "t_rh", false);
    if let (Some(rh), Some(cc)) = (t_rh, t_cc) {
        if rh >= cc {
            w.err(&join(p, "t_rh"), "must be shorter than t_cc");
        }
    }
    let t_tl = w.uint(t, p, "t_tl", false);
    if t_tl == Some(0) {
        w.err(&join(p, "t_tl"), "must be >= 1");
    }
    let learn_len = w.uint(t, p, "learn_len", false);
    if learn_len == Some(0) {
        w.err(&join(p, "learn_len"), "must be >= 1");
    }
    let epoch_len = w.uint(t, p, "epoch_len", false);
    let label = w.string(t, p, "label", false);

    let kind = kind?;
    let mut spec = PolicySpec::new(kind, preset);
    if let Some(l) = label {
        spec.label = l;
    }
    spec.delta = delta.unwrap_or(spec.delta);
    spec.epsilon = epsilon.unwrap_or(spec.epsilon);
    spec.t_cc = t_cc;
    spec.t_rh = t_rh;
    spec.t_tl = t_tl;
    spec.learn_len = learn_len;
    spec.epoch_len = epoch_len;
    spec.delta_prime = delta_prime;
    if let (Some(n), Some(m), Some(h)) = (n, model, horizon) {
        if w.errors.is_empty() {
            if let Err(e) = ResolvedPolicy::new(&spec, n, m.theta, h) {
                w.err(p, e);
            }
        }
    }
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE1: &str = r#"
horizon = 10000
repetitions = 50
base_seed = 1
output_directory = "out"

[model]
mu = [0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
theta = 0.1

[schedule]
users = 4

[[policies]]
kind = "tsn"
t_cc = 2000
"#;

    #[test]
    fn case1_valid() {
        let c = parse_config(CASE1).unwrap();
        assert_eq!(c.n(), 8);
        assert_eq!(c.stride, 100);
        let r = c.resolve(&c.policies[0]).unwrap();
        let ResolvedPolicy::Tsn(t) = r else { panic!() };
        assert_eq!((t.t_rh, t.t_sh), (110, 1890));
    }

    #[test]
    fn too_many_users() {
        let err = parse_config(&CASE1.replace("users = 4", "users = 9")).unwrap_err();
        assert!(err.to_string().contains("active count exceeds N"), "{err}");
    }

    #[test]
    fn reports_every_violation() {
        let bad = CASE1
            .replace("repetitions = 50", "repetitions = 0\nbogus = 1")
            .replace("kind = \"tsn\"", "kind = \"ucb\"");
        let Error::Config(errs) = parse_config(&bad).unwrap_err() else {
            panic!()
        };
        assert!(errs.iter().any(|e| e.starts_with("repetitions")));
        assert!(errs.iter().any(|e| e.starts_with("bogus: unknown key")));
        assert!(errs.iter().any(|e| e.starts_with("policies[0].kind")));
    }

    #[test]
    fn dynamic_schedule() {
        let text = CASE1.replace(
            "users = 4",
            "entries = [{ arrival = 1, departure = 50 }, { arrival = 30 }]",
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.schedule.max_active(), 2);
        assert_eq!(
            c.schedule.entries()[1],
            (
                2,
                ScheduleEntry {
                    arrival: 30,
                    departure: None
                }
            )
        );
    }

    #[test]
    fn digest_is_stable() {
        let a = parse_config(CASE1).unwrap();
        let b = parse_config(CASE1).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn theory_preset_uses_formulas() {
        let c = parse_config(
            &CASE1
                .replace("t_cc = 2000", "preset = \"theory\"")
                .replace("kind = \"tsn\"", "kind = \"tsn\"\nlabel = \"tsn-th\""),
        )
        .unwrap();
        let ResolvedPolicy::Tsn(t) = c.resolve(&c.policies[0]).unwrap() else {
            panic!()
        };
        assert_eq!((t.t_rh, t.t_sh), (110, 23363));
    }

    #[test]
    fn explain_lists_durations() {
        let c = parse_config(CASE1).unwrap();
        let s = explain(&c).unwrap();
        assert!(s.contains("= 110"));
        assert!(s.contains("= 23363"));
        assert!(s.contains("= 1540"));
    }
}
