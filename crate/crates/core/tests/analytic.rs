mod common;

use common::{brute_cowu_kqaoi, choose, enumerate_successes};
use kqaoi::analytic::*;
use kqaoi::optimizer::{optimal_p, RealGrid};
use kqaoi::{AgeCost, Error, ScenarioParams, SchemeSpec};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn chain_params(len: usize, ec: f64) -> ScenarioParams {
    ScenarioParams { packet_len_slots: len, erasure_prob: ec, ..ScenarioParams::default() }
}

#[test]
fn chain_matches_path_enumeration() {
    for w in 0..=3 {
        for len in 1..=3 {
            for &p in &[0.25, 0.5, 1.0] {
                for &ec in &[0.0, 0.3] {
                    let chain = CsmaChain::new(&chain_params(len, ec), w, p);
                    for lead in 0..=6 {
                        let got = chain.success_count_dist(lead as u32).pmf;
                        let want = enumerate_successes(w, len, p, ec, lead);
                        for (a, b) in got.iter().zip(&want) {
                            assert!((a - b).abs() <= 1e-12, "w={w} L={len} p={p} ec={ec} lead={lead}: {got:?} vs {want:?}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn chain_rows_and_vectors_are_stochastic() {
    for w in [1, 5, 30] {
        for &(len, p, ec) in &[(10, 0.0606, 0.0), (3, 0.3, 0.2), (1, 0.9, 0.05)] {
            let chain = CsmaChain::new(&chain_params(len, ec), w, p);
            for i in 0..chain.len() {
                let s: f64 = chain.row(i).targets().iter().map(|t| t.1).sum();
                assert!((s - 1.0).abs() <= 1e-10);
            }
            for z in [0, 7, 100, 1000] {
                assert!((chain.propagate(z).total() - 1.0).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn brute_force_cowu_small_networks() {
    for &(n, k, len, ec, th, lead) in &[(3, 1, 2, 0.0, 20.0, 8), (4, 2, 2, 0.3, 10.0, 9), (4, 3, 1, 0.1, 35.0, 6)] {
        let params = ScenarioParams {
            n_nodes: n,
            k,
            packet_len_slots: len,
            erasure_prob: ec,
            tx_prob: 0.4,
            ..ScenarioParams::default()
        };
        let got = cowu_expected_kqaoi(&params, th, lead as u32).unwrap();
        let want = brute_cowu_kqaoi(&params, th, lead, |_| 0.4);
        assert!(rel(got, want) < 1e-12, "{got} vs {want}");

        let oracle = ScenarioParams { oracle_p: true, ..params.clone() };
        let got = cowu_expected_kqaoi(&oracle, th, lead as u32).unwrap();
        let grid = RealGrid::persistence();
        let want = brute_cowu_kqaoi(&oracle, th, lead, |w| optimal_p(&oracle, w, &grid));
        assert!(rel(got, want) < 1e-12, "oracle: {got} vs {want}");
    }
}

#[test]
fn cowu_spec_examples() {
    let p = ScenarioParams::default();
    let v = cowu_expected_kqaoi(&p, 46.0, 150).unwrap();
    assert!(rel(v, 225.847166757901) < 1e-6, "{v}");
    assert_eq!(cowu_expected_kqaoi(&p, 50.0, 150).unwrap(), 1000.0);
    assert_eq!(cowu_expected_energy(&p, 50.0).unwrap(), 0.0);
    assert!(cowu_expected_kqaoi(&p, 46.0, 0).is_err());
    assert!(cowu_expected_kqaoi(&p, 51.0, 100).is_err());
}

#[test]
fn round_robin_and_genie_closed_forms() {
    let p = ScenarioParams::default();
    assert_eq!(rr_expected_kqaoi(&p).unwrap(), 505.0);
    assert!((rr_energy(&p).unwrap() - 17.6e-3).abs() < 1e-15);
    let lossy = ScenarioParams { erasure_prob: 0.1, ..p.clone() };
    assert!(rel(rr_expected_kqaoi(&lossy).unwrap(), 0.9 * 505.0 + 100.0) < 1e-14);
    let exp = ScenarioParams { age_cost: AgeCost::Exponential { alpha: 0.005 }, ..p.clone() };
    // sum_{w=1}^{100} (e^{0.05 w} - 1) / 100 as a geometric series
    let r = 0.05f64.exp();
    let want = (r * (r.powi(100) - 1.0) / (r - 1.0) - 100.0) / 100.0;
    assert!(rel(rr_expected_kqaoi(&exp).unwrap(), want) < 1e-12);
    assert!(rel(want, 29.2258395750804) < 1e-9);

    assert_eq!(genie_kqaoi(&p).unwrap(), 30.0);
    assert!((genie_energy(&p).unwrap() - 0.88e-3).abs() < 1e-15);
    let k1 = ScenarioParams { k: 1, ..exp };
    assert_eq!(genie_kqaoi(&k1).unwrap(), k1.capped_age_cost(10.0).unwrap());
}

#[test]
fn energy_examples() {
    let p = ScenarioParams::default();
    assert_eq!(csma_energy_with_p(&p, 0, 0.3).unwrap(), 0.0);
    // a lone node at p = 1 transmits once and never listens
    let e = csma_energy_with_p(&p, 1, 1.0).unwrap();
    assert!((e - 0.055 * 10.0 * 320e-6).abs() < 1e-18);
    assert!(matches!(csma_energy_with_p(&p, 2, 1.0), Err(Error::Singular(_))));
    let lossy = ScenarioParams { erasure_prob: 1.0, ..p.clone() };
    assert!(matches!(csma_energy_with_p(&lossy, 1, 0.5), Err(Error::Singular(_))));
}

/// Expected transmit and listen slots of `w` contenders from a first-step
/// analysis of the stage process: in stage `m` each slot is idle with
/// probability `(1-p)^m`, otherwise an `L`-slot transmission by `j >= 1`
/// nodes follows; the stage ends on a lone, unerased transmission.
fn stage_energy(params: &ScenarioParams, w: usize, p: f64) -> f64 {
    let len = params.packet_len_slots as f64;
    let ec = params.erasure_prob;
    let mut tx = 0.0;
    let mut rx = 0.0;
    for m in 1..=w {
        let mf = m as f64;
        let idle = (1.0 - p).powi(m as i32);
        let busy = 1.0 - idle;
        let lone = mf * p * (1.0 - p).powi(m as i32 - 1);
        let end = lone * (1.0 - ec) / busy;
        // expected busy periods per stage, expected idle slots per busy period
        let periods = 1.0 / end;
        let idles = idle / busy;
        let tx_per_period = mf * p / busy * len;
        tx += periods * tx_per_period;
        let awake_per_period = mf * (idles + len);
        rx += periods * awake_per_period - periods * tx_per_period;
    }
    (params.tx_power_watts * tx + params.rx_power_watts * rx) * params.slot_seconds
}

#[test]
fn energy_equals_stage_accounting() {
    for &(len, ec) in &[(10, 0.0), (10, 0.2), (3, 0.1), (1, 0.0)] {
        let params = chain_params(len, ec);
        for w in 1..=20 {
            for &p in &[0.02, 0.0606, 0.3, 0.8] {
                let got = csma_energy_with_p(&params, w, p).unwrap();
                let want = stage_energy(&params, w, p);
                assert!(rel(got, want) < 1e-10, "L={len} ec={ec} w={w} p={p}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn delay_examples() {
    let p = ScenarioParams::default();
    let grid = RealGrid::persistence();
    assert_eq!(optimal_p(&p, 1, &grid), 1.0);
    let d = expected_delay_with_p(&p, 1, 0.25).unwrap();
    assert!(rel(d, 320e-6 * (4.0 + 9.0)) < 1e-14);
    assert_eq!(expected_delay_with_p(&p, 3, 1.0).unwrap(), f64::INFINITY);
    let mut last = 1.0;
    for w in 1..=50 {
        let pw = optimal_p(&p, w, &grid);
        assert!(pw <= last, "p_opt not nonincreasing at w={w}");
        last = pw;
    }
}

#[test]
fn qwu_hit_law_is_conditional_law_in_disguise() {
    // choosing nu_s of N uniformly equals choosing nu of N then nu_s of those
    let (n, k) = (12usize, 4usize);
    for nu in 0..=n {
        for nus in 0..=nu {
            for c in 0..=nus.min(k) {
                let direct = choose(k as u64, c as u64) * choose((n - k) as u64, (nus - c) as u64) / choose(n as u64, nus as u64);
                let mut two_stage = 0.0;
                for j in 0..=nu.min(k) {
                    let first = choose(k as u64, j as u64) * choose((n - k) as u64, (nu - j) as u64) / choose(n as u64, nu as u64);
                    let second = choose(j as u64, c as u64) * choose((nu - j) as u64, (nus - c) as u64) / choose(nu as u64, nus as u64);
                    two_stage += first * second;
                }
                assert!((direct - two_stage).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn qwu_full_wake_equals_cowu_floor() {
    let p = ScenarioParams { n_nodes: 40, ..ScenarioParams::default() };
    for z in [50, 200, 400] {
        let a = qwu_expected_kqaoi(&p, 1.0, z).unwrap();
        let b = cowu_expected_kqaoi(&p, 0.0, z).unwrap();
        assert!(rel(a, b) < 1e-12);
    }
    assert!(rel(qwu_expected_energy(&p, 1.0).unwrap(), cowu_expected_energy(&p, 0.0).unwrap()) < 1e-14);
    assert_eq!(qwu_expected_kqaoi(&p, 0.0, 100).unwrap(), 1000.0);
}

#[test]
fn evaluate_dispatches() {
    let p = ScenarioParams::default();
    let pt = evaluate(&p, &SchemeSpec::RoundRobin).unwrap();
    assert_eq!(pt.expected_kqaoi, 505.0);
    assert!(evaluate(&p, &SchemeSpec::QWu { wake_prob: 1.5, lead_slots: 10 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn success_pmf_is_a_distribution(w in 0usize..25, len in 1usize..12, p in 0.01f64..1.0, ec in 0.0f64..0.9, z in 0u32..400) {
        let chain = CsmaChain::new(&chain_params(len, ec), w, p);
        let pmf = chain.success_count_dist(z).pmf;
        prop_assert_eq!(pmf.len(), w + 1);
        prop_assert!(pmf.iter().all(|&x| x >= -1e-15));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn more_lead_time_never_loses_successes(w in 1usize..15, p in 0.02f64..0.9, z in 0u32..300, dz in 1u32..100) {
        let chain = CsmaChain::new(&chain_params(10, 0.1), w, p);
        let mean = |z| chain.success_count_dist(z).pmf.iter().enumerate().map(|(i, x)| i as f64 * x).sum::<f64>();
        prop_assert!(mean(z + dz) >= mean(z) - 1e-12);
    }

    #[test]
    fn kqaoi_bounded_by_cost_range(th in 0.0f64..=50.0, z in 1u32..600, n in 5usize..40) {
        let p = ScenarioParams { n_nodes: n, ..ScenarioParams::default() };
        let v = cowu_expected_kqaoi(&p, th, z).unwrap();
        let lo = p.capped_age_cost(f64::from(z)).unwrap().min(1000.0);
        prop_assert!(v >= lo - 1e-9 && v <= 1000.0f64.max(f64::from(z)) + 1e-9);
    }

    #[test]
    fn energy_grows_as_threshold_drops(a in 0.0f64..=50.0, b in 0.0f64..=50.0) {
        let p = ScenarioParams { n_nodes: 30, ..ScenarioParams::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cowu_expected_energy(&p, lo).unwrap() >= cowu_expected_energy(&p, hi).unwrap() - 1e-15);
    }
}
