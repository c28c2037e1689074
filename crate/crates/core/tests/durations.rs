//! Closed-form durations against independent hand evaluation, plus
//! probe-table invariants.

use osa_core::durations::{
    m_table, n_probe, o_min, t_bci, t_rh, t_sh, t_tr, x_switches, DurationParams, ProbeBudgetTable,
};
use proptest::prelude::*;

// Oracle: the same closed forms written out with plain f64 and ceil.
fn oracle_t_rh(n: f64, theta: f64, d1: f64) -> u64 {
    let p = theta * (1.0 - 1.0 / n).powf(n - 1.0);
    ((d1 / n).ln() / (1.0 - p).ln()).ceil() as u64
}

fn oracle_pair(theta: f64, d: f64) -> u64 {
    (d.ln() / (1.0 - theta).ln()).ceil() as u64
}

#[test]
fn random_hopping_length() {
    assert_eq!(t_rh(8, 0.1, 0.1).unwrap(), 110);
    assert_eq!(t_rh(8, 0.1, 0.1).unwrap(), oracle_t_rh(8.0, 0.1, 0.1));
    assert_eq!(t_rh(4, 0.2, 0.05).unwrap(), oracle_t_rh(4.0, 0.2, 0.05));
}

#[test]
fn sequential_hopping_length() {
    // (2 * 8 / 0.0049) * ln(128 / 0.1) = 23362.009..., so the ceiling is 23363.
    let exact = 16.0 / 0.0049 * (1280.0f64).ln();
    assert!(exact > 23362.0 && exact < 23362.02);
    assert_eq!(t_sh(8, 0.07, 0.1).unwrap(), 23363);
    assert_eq!(o_min(8, 0.07, 0.1), 2921);
}

#[test]
fn trekking_lengths() {
    assert_eq!(t_tr(8, 0.1, 0.1, 4).unwrap(), 55 * 28);
    assert_eq!(t_tr(8, 0.1, 0.1, 4).unwrap(), 1540);
    assert_eq!(oracle_pair(0.1, 0.1 / 32.0) * 28, 1540);
    assert_eq!(t_tr(1, 0.1, 0.1, 1).unwrap(), 0);
    assert_eq!(t_bci(8, 0.1, 0.3).unwrap(), 616);
    assert_eq!(oracle_pair(0.1, 0.1) * 28, 616);
}

#[test]
fn switch_count() {
    assert_eq!(x_switches(100_000, 2000, 1540, 200, 0), 56);
    // (100000 - 3540) / 1740 = 55.4
    assert_eq!((96_460f64 / 1740.0).ceil() as u64, 56);
    assert_eq!(x_switches(3000, 2000, 1540, 200, 0), 0);
}

#[test]
fn split_confidence() {
    let p = DurationParams::new(8, 0.1, 0.3, 0.07).unwrap();
    assert_eq!(p.t_rh(), 110);
    assert_eq!(p.t_tr(4).unwrap(), 1540);
    assert_eq!(p.t_bci(), 616);
    assert!((p.delta_prime - 0.1 / 64.0).abs() < 1e-15);
}

#[test]
fn rejects_out_of_domain() {
    assert!(t_rh(0, 0.1, 0.1).is_err());
    assert!(t_rh(8, 1.5, 0.1).is_err());
    assert!(t_sh(8, 0.0, 0.1).is_err());
    assert!(t_tr(8, 0.1, 0.1, 9).is_err());
    assert!(n_probe(0.0, 0.1).is_err());
}

#[test]
fn pinned_fixture_table() {
    let t = ProbeBudgetTable::from_probes(vec![3, 4, 5, 7, 11, 13, 21, 44]).unwrap();
    assert_eq!(t.m_budget(), &[0, 3, 7, 12, 19, 30, 43, 64]);
    assert_eq!(t.budget(8), 108);
}

proptest! {
    #[test]
    fn probe_count_is_minimal(mu in 0.01f64..0.99, dp in 1e-4f64..0.5) {
        let n = n_probe(mu, dp).unwrap();
        prop_assert!((1.0 - mu).powi(n as i32) <= dp);
        if n > 1 {
            prop_assert!((1.0 - mu).powi(n as i32 - 1) > dp);
        }
    }

    #[test]
    fn budgets_are_prefix_sums(mus in prop::collection::vec(0.05f64..0.95, 1..12), dp in 1e-3f64..0.3) {
        let mut ranked = mus.clone();
        ranked.sort_by(|a, b| b.total_cmp(a));
        let t = m_table(&ranked, dp).unwrap();
        let mut acc = 0;
        for (i, &nj) in t.n_probe().iter().enumerate() {
            prop_assert_eq!(t.m_budget()[i], acc);
            acc += nj;
        }
        prop_assert_eq!(t.budget(ranked.len()), acc);
        // Worse channels never get fewer probes.
        prop_assert!(t.n_probe().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn switches_cover_remaining_horizon(t in 5000u64..200_000, cc in 1u64..3000, bci in 1u64..2000, tl in 1u64..500) {
        let x = x_switches(t, cc, bci, tl, 0);
        let rest = t.saturating_sub(cc + bci);
        if rest > 0 {
            prop_assert!(x * (tl + bci) >= rest);
            prop_assert!((x - 1) * (tl + bci) < rest);
        } else {
            prop_assert_eq!(x, 0);
        }
    }
}
