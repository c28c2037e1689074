//! Phase lengths and probe budgets.
//!
//! All formulas use natural logarithms and apply a single ceiling at the end.
//! Slot counts are `u64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {p} must lie in (0, 1)"
        )))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("channel count must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Confidence and resolution parameters shared by the trekking policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationParams {
    pub n: usize,
    pub theta: f64,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub epsilon: f64,
    pub delta_prime: f64,
}

impl DurationParams {
    /// Splits `delta` evenly across the three phases and derives the
    /// per-probe failure probability as `delta3 / N^2` (worst case U = N).
    pub fn new(n: usize, theta: f64, delta: f64, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_prob("theta", theta)?;
        check_prob("delta", delta)?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {epsilon} must lie in (0, 1]"
            )));
        }
        let d3 = delta / 3.0;
        Ok(Self {
            n,
            theta,
            delta,
            delta1: d3,
            delta2: d3,
            delta3: d3,
            epsilon,
            delta_prime: default_delta_prime(n, d3),
        })
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Result<Self> {
        check_prob("delta_prime", delta_prime)?;
        self.delta_prime = delta_prime;
        Ok(self)
    }

    pub fn t_rh(&self) -> u64 {
        t_rh(self.n, self.theta, self.delta1).expect("validated")
    }

    pub fn t_sh(&self) -> u64 {
        t_sh(self.n, self.epsilon, self.delta2).expect("validated")
    }

    pub fn t_tr(&self, users: usize) -> Result<u64> {
        t_tr(self.n, self.theta, self.delta3, users)
    }

    pub fn t_bci(&self) -> u64 {
        t_bci(self.n, self.theta, self.delta).expect("validated")
    }
}

pub fn default_delta_prime(n: usize, delta3: f64) -> f64 {
    delta3 / (n * n) as f64
}

fn ceil_slots(x: f64) -> u64 {
    // Guard against 23361.999999 style artefacts landing on the wrong side.
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

/// Random-hopping length after which all SUs sit on distinct channels
/// with probability at least `1 - delta1`.
pub fn t_rh(n: usize, theta: f64, delta1: f64) -> Result<u64> {
    check_n(n)?;
    check_prob("theta", theta)?;
    check_prob("delta1", delta1)?;
    let nf = n as f64;
    // (1 - 1/N)^(N-1) is 1 for N = 1 since powi(0) == 1.
    let p_free = theta * (1.0 - 1.0 / nf).powi(n as i32 - 1);
    Ok(ceil_slots((delta1 / nf).ln() / (1.0 - p_free).ln()))
}

/// Sequential-hopping length giving every SU an epsilon-correct ranking
/// with probability at least `1 - delta2`.
pub fn t_sh(n: usize, epsilon: f64, delta2: f64) -> Result<u64> {
    check_n(n)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in (0, 1]"
        )));
    }
    check_prob("delta2", delta2)?;
    let nf = n as f64;
    Ok(ceil_slots(
        2.0 * nf / (epsilon * epsilon) * (2.0 * nf * nf / delta2).ln(),
    ))
}

/// Per-channel observation count `O_min` behind `t_sh`.
pub fn o_min(n: usize, epsilon: f64, delta2: f64) -> u64 {
    let nf = n as f64;
    ceil_slots(2.0 / (epsilon * epsilon) * (2.0 * nf * nf / delta2).ln())
}

/// Smallest `n` with `(1 - mu_hat)^n <= delta_prime`.
pub fn n_probe(mu_hat: f64, delta_prime: f64) -> Result<u64> {
    check_prob("delta_prime", delta_prime)?;
    if mu_hat >= 1.0 {
        return Ok(1);
    }
    if mu_hat.is_nan() || mu_hat <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "probe budget undefined for mu_hat = {mu_hat}"
        )));
    }
    let q = 1.0 - mu_hat;
    let mut n = (delta_prime.ln() / q.ln()).ceil().max(1.0) as u64;
    while n > 1 && q.powi(n as i32 - 1) <= delta_prime {
        n -= 1;
    }
    while q.powi(n as i32) > delta_prime {
        n += 1;
    }
    Ok(n)
}

/// Probe counts `N_j` and cumulative budgets `M_i = sum_{j<i} N_j`, indexed
/// by 0-based rank: `m_budget[r]` is the budget `M_{r+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeBudgetTable {
    n_probe: Vec<u64>,
    m_budget: Vec<u64>,
}

impl ProbeBudgetTable {
    pub fn from_probes(n_probe: Vec<u64>) -> Result<Self> {
        if n_probe.is_empty() || n_probe.contains(&0) {
            return Err(Error::InvalidParameter(
                "probe counts must be non-empty and >= 1".into(),
            ));
        }
        let m_budget = n_probe
            .iter()
            .scan(0u64, |acc, &n| {
                let m = *acc;
                *acc += n;
                Some(m)
            })
            .collect();
        Ok(Self { n_probe, m_budget })
    }

    pub fn n_probe(&self) -> &[u64] {
        &self.n_probe
    }

    pub fn m_budget(&self) -> &[u64] {
        &self.m_budget
    }

    pub fn len(&self) -> usize {
        self.n_probe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_probe.is_empty()
    }

    /// Budget `M_{j+1}` for 0-based `j` in `0..=N`; `j == N` gives the total
    /// `sum_j N_j`, used when an SU observes the worst rank itself.
    pub fn budget(&self, j: usize) -> u64 {
        if j < self.m_budget.len() {
            self.m_budget[j]
        } else {
            self.n_probe.iter().sum()
        }
    }
}

/// Builds the table from estimates ranked best-first.
pub fn m_table(ranked_mu_hat: &[f64], delta_prime: f64) -> Result<ProbeBudgetTable> {
    let n = ranked_mu_hat
        .iter()
        .map(|&m| n_probe(m, delta_prime))
        .collect::<Result<Vec<_>>>()?;
    ProbeBudgetTable::from_probes(n)
}

/// Trekking length for `users` SUs to settle in the top channels.
pub fn t_tr(n: usize, theta: f64, delta3: f64, users: usize) -> Result<u64> {
    check_n(n)?;
    check_prob("theta", theta)?;
    check_prob("delta3", delta3)?;
    if users == 0 || users > n {
        return Err(Error::InvalidParameter(format!(
            "user count {users} must lie in [1, {n}]"
        )));
    }
    let per_pair = ceil_slots((delta3 / (n * users) as f64).ln() / (1.0 - theta).ln());
    Ok(per_pair * (n * (n - 1) / 2) as u64)
}

/// Best-channel-identification length; `delta` is the overall confidence and
/// is split by three internally. Independent of the user count.
pub fn t_bci(n: usize, theta: f64, delta: f64) -> Result<u64> {
    check_n(n)?;
    check_prob("theta", theta)?;
    check_prob("delta", delta)?;
    let per_pair = ceil_slots((delta / 3.0).ln() / (1.0 - theta).ln());
    Ok(per_pair * (n * (n - 1) / 2) as u64)
}

/// Number of TL/BCI alternations for an SU arriving at `t_en`; zero when it
/// arrives too late to ever switch.
pub fn x_switches(horizon: u64, t_cc: u64, t_bci: u64, t_tl: u64, t_en: u64) -> u64 {
    let used = t_cc + t_bci + t_en;
    if horizon <= used || t_tl + t_bci == 0 {
        return 0;
    }
    (horizon - used).div_ceil(t_tl + t_bci)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values below were evaluated by hand from the closed forms:
    //   ln(0.0125) / ln(1 - 0.1 * 0.875^7)  = 109.38  -> 110
    //   (16 / 0.0049) * ln(1280)             = 23362.009 -> 23363
    //   ln(0.003125) / ln(0.9) = 54.75 -> 55, times 28 = 1540
    //   ln(0.1) / ln(0.9) = 21.85 -> 22, times 28 = 616
    //   96460 / 1740 = 55.44 -> 56

    #[test]
    fn t_rh_reference() {
        assert_eq!(t_rh(8, 0.1, 0.1).unwrap(), 110);
    }

    #[test]
    fn t_rh_single_channel() {
        // Geometric wait: ln(0.1) / ln(0.5) = 3.32
        assert_eq!(t_rh(1, 0.5, 0.1).unwrap(), 4);
    }

    #[test]
    fn t_rh_monotone() {
        let mut prev = 0;
        for d in [0.5, 0.2, 0.1, 0.05, 0.01, 0.001] {
            let v = t_rh(8, 0.1, d).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(t_rh(8, 0.2, 0.1).unwrap() < t_rh(8, 0.1, 0.1).unwrap());
        assert!(t_rh(4, 0.1, 0.1).unwrap() < t_rh(8, 0.1, 0.1).unwrap());
    }

    #[test]
    fn t_sh_reference() {
        assert_eq!(t_sh(8, 0.07, 0.1).unwrap(), 23363);
    }

    #[test]
    fn t_sh_epsilon_scaling() {
        for eps in [0.05, 0.07, 0.1, 0.3] {
            let a = t_sh(8, eps, 0.1).unwrap() as i64;
            let b = t_sh(8, eps / 2.0, 0.1).unwrap() as i64;
            assert!((b - 4 * a).abs() <= 3, "eps {eps}: {b} vs 4*{a}");
        }
        assert!(t_sh(8, 0.1, 0.1).unwrap() < t_sh(8, 0.07, 0.1).unwrap());
        assert!(t_sh(8, 0.07, 0.2).unwrap() < t_sh(8, 0.07, 0.1).unwrap());
    }

    #[test]
    fn n_probe_reference() {
        assert_eq!(n_probe(0.8, 0.01).unwrap(), 3);
        assert_eq!(n_probe(0.5, 0.25).unwrap(), 2);
        assert_eq!(n_probe(1.0, 0.3).unwrap(), 1);
        assert!(n_probe(0.0, 0.3).is_err());
    }

    #[test]
    fn n_probe_monotone_in_mu() {
        let mut prev = u64::MAX;
        for i in 1..10 {
            let v = n_probe(i as f64 / 10.0, 0.01).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn m_table_prefix_sums() {
        let mu: Vec<f64> = (1..=8).rev().map(|i| i as f64 / 10.0).collect();
        let t = m_table(&mu, 0.01).unwrap();
        assert_eq!(t.m_budget()[0], 0);
        for i in 0..7 {
            assert_eq!(t.m_budget()[i + 1] - t.m_budget()[i], t.n_probe()[i]);
        }
        assert_eq!(t.budget(8), t.n_probe().iter().sum::<u64>());
    }

    #[test]
    fn pinned_fixture_table() {
        let t = ProbeBudgetTable::from_probes(vec![3, 4, 5, 7, 11, 13, 21, 44]).unwrap();
        assert_eq!(t.m_budget(), &[0, 3, 7, 12, 19, 30, 43, 64]);
    }

    #[test]
    fn t_tr_reference() {
        assert_eq!(t_tr(8, 0.1, 0.1, 4).unwrap(), 1540);
        assert_eq!(t_tr(1, 0.1, 0.1, 1).unwrap(), 0);
        let mut prev = 0;
        for n in 2..12 {
            let v = t_tr(n, 0.1, 0.1, 1).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn t_bci_reference() {
        assert_eq!(t_bci(8, 0.1, 0.3).unwrap(), 616);
        assert_eq!(t_bci(1, 0.1, 0.3).unwrap(), 0);
    }

    #[test]
    fn x_switches_reference() {
        assert_eq!(x_switches(100_000, 2000, 1540, 200, 0), 56);
        let x0 = x_switches(100_000, 2000, 1540, 200, 0);
        for t_en in [0, 1, 500, 5000, 50_000, 99_000, 200_000] {
            assert!(x_switches(100_000, 2000, 1540, 200, t_en) <= x0);
        }
        assert_eq!(x_switches(3000, 2000, 1540, 200, 0), 0);
    }

    #[test]
    fn params_split_delta() {
        let p = DurationParams::new(8, 0.1, 0.3, 0.07).unwrap();
        assert_eq!(p.t_rh(), 110);
        assert_eq!(p.t_sh(), 23363);
        assert_eq!(p.t_tr(4).unwrap(), 1540);
        assert!((p.delta_prime - 0.1 / 64.0).abs() < 1e-15);
    }
}
