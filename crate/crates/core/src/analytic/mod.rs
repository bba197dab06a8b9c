//! Closed-form expected k-QAoI and energy for CoWu, round-robin, q-Wu and the
//! genie-aided schedule.
//!
//! CoWu and q-Wu share the same three-level expectation: over the number of
//! woken nodes, over how many of them finish before the deadline (from the
//! CSMA chain), and over how many of those finishers belong to the top-k.
//! Only the wake-count law and the top-k hit law differ between them.

mod chain;

pub use chain::{ChainState, CsmaChain, Row, StateVector, SuccessDistribution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{kqaoi_mix, ScenarioParams, SchemeSpec};
use crate::optimizer::{optimal_p, RealGrid};
use crate::prob::{binomial_pmf, hypergeometric_pmf};

/// Expected performance of one scheme configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemePoint {
    pub scheme: SchemeSpec,
    pub expected_kqaoi: f64,
    pub expected_energy_joules: f64,
}

/// Law of how many of the successful reports came from the top-k set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopKHits {
    /// Nodes wake on content, so the woken set holds the largest readings.
    Content,
    /// Nodes wake at random, so finishers are a uniform subset of all `N` nodes.
    Random,
}

/// `P_d(w)`: Binomial(N, P_w(threshold)).
pub fn wake_count_pmf(params: &ScenarioParams, threshold: f64) -> Result<Vec<f64>> {
    Ok(binomial_pmf(params.n_nodes, params.wake_probability(threshold)?))
}

/// Persistence used by `w` contenders: fixed, or the delay-optimal value when `oracle_p` is set.
pub fn persistence(params: &ScenarioParams, wake_count: usize) -> f64 {
    if params.oracle_p {
        optimal_p(params, wake_count, &RealGrid::persistence())
    } else {
        params.tx_prob
    }
}

/// [`persistence`] for every wake count `0..=max_wake`.
pub fn persistence_table(params: &ScenarioParams, max_wake: usize) -> Vec<f64> {
    if params.oracle_p {
        (0..=max_wake).into_par_iter().map(|w| persistence(params, w)).collect()
    } else {
        vec![params.tx_prob; max_wake + 1]
    }
}

pub fn build_chain(params: &ScenarioParams, wake_count: usize) -> CsmaChain {
    CsmaChain::new(params, wake_count, persistence(params, wake_count))
}

/// `P_k(r | w, w_s)` over `r = 0..=min(w_s, k)`.
pub fn topk_hit_pmf(k: usize, wake_count: usize, successes: usize) -> Result<Vec<f64>> {
    if successes > wake_count {
        return Err(domain(format!("{successes} successes exceed {wake_count} woken nodes")));
    }
    if wake_count <= k {
        let mut pmf = vec![0.0; successes + 1];
        pmf[successes] = 1.0;
        return Ok(pmf);
    }
    Ok(hypergeometric_pmf(wake_count, k, successes))
}

/// `P_y(c | nu_s)`: top-k members among `successes` nodes drawn uniformly from all `N`.
pub fn random_hit_pmf(params: &ScenarioParams, successes: usize) -> Result<Vec<f64>> {
    if successes > params.n_nodes {
        return Err(domain(format!("{successes} successes exceed N = {}", params.n_nodes)));
    }
    Ok(hypergeometric_pmf(params.n_nodes, params.k, successes))
}

/// Success-count distributions for every wake count at a fixed set of lead times.
#[derive(Debug, Clone)]
pub struct SuccessTable {
    lead_slots: Vec<u32>,
    // [w][lead index]
    by_wake: Vec<Vec<SuccessDistribution>>,
}

impl SuccessTable {
    /// Builds chains for `w = 0..=max_wake`, skipping wake counts with `skip[w]` set
    /// (their entries are left as point masses on zero successes).
    pub fn build(params: &ScenarioParams, max_wake: usize, lead_slots: &[u32], skip: Option<&[bool]>) -> Self {
        let ps = persistence_table(params, max_wake);
        let by_wake = (0..=max_wake)
            .into_par_iter()
            .map(|w| {
                if skip.is_some_and(|s| s[w]) {
                    let mut pmf = vec![0.0; w + 1];
                    pmf[0] = 1.0;
                    return lead_slots
                        .iter()
                        .map(|&z| SuccessDistribution { wake_count: w, lead_slots: z, pmf: pmf.clone() })
                        .collect();
                }
                CsmaChain::new(params, w, ps[w]).success_count_dists(lead_slots)
            })
            .collect();
        SuccessTable { lead_slots: lead_slots.to_vec(), by_wake }
    }

    pub fn lead_slots(&self) -> &[u32] {
        &self.lead_slots
    }

    pub fn max_wake(&self) -> usize {
        self.by_wake.len() - 1
    }

    pub fn get(&self, wake_count: usize, lead_index: usize) -> &SuccessDistribution {
        &self.by_wake[wake_count][lead_index]
    }

    /// `E[k-QAoI | w]` for every wake count and lead time: `[w][lead index]`.
    /// Sums run over `w_s` ascending, then `r` ascending.
    pub fn conditional_kqaoi(&self, params: &ScenarioParams, hits: TopKHits) -> Result<Vec<Vec<f64>>> {
        let k = params.k;
        let stale = params.capped_age_cost(params.age_penalty_slots)?;
        let fresh: Vec<f64> = self
            .lead_slots
            .iter()
            .map(|&z| params.capped_age_cost(f64::from(z)))
            .collect::<Result<_>>()?;
        (0..self.by_wake.len())
            .into_par_iter()
            .map(|w| {
                let hit_laws: Vec<Vec<f64>> = (0..=w)
                    .map(|ws| match hits {
                        TopKHits::Content => topk_hit_pmf(k, w, ws),
                        TopKHits::Random => random_hit_pmf(params, ws),
                    })
                    .collect::<Result<_>>()?;
                Ok((0..self.lead_slots.len())
                    .map(|zi| {
                        let pmf = &self.by_wake[w][zi].pmf;
                        let mut acc = 0.0;
                        for (ws, law) in hit_laws.iter().enumerate() {
                            let ps = pmf[ws];
                            for (r, pr) in law.iter().enumerate() {
                                acc += ps * pr * kqaoi_mix(k, r, fresh[zi], stale);
                            }
                        }
                        acc
                    })
                    .collect())
            })
            .collect()
    }
}

fn expect(pmf: &[f64], values: &[f64]) -> f64 {
    pmf.iter().zip(values).map(|(p, v)| p * v).sum()
}

fn scheme_kqaoi(params: &ScenarioParams, wake_pmf: &[f64], lead_slots: u32, hits: TopKHits) -> Result<f64> {
    if lead_slots == 0 {
        return Err(domain("lead_slots must be at least 1"));
    }
    let skip: Vec<bool> = wake_pmf.iter().map(|&p| p == 0.0).collect();
    let table = SuccessTable::build(params, params.n_nodes, &[lead_slots], Some(&skip));
    let cond = table.conditional_kqaoi(params, hits)?;
    let per_wake: Vec<f64> = cond.iter().map(|c| c[0]).collect();
    Ok(expect(wake_pmf, &per_wake))
}

/// Expected k-QAoI of CoWu with the given threshold and lead time.
pub fn cowu_expected_kqaoi(params: &ScenarioParams, threshold: f64, lead_slots: u32) -> Result<f64> {
    params.validate()?;
    let pd = wake_count_pmf(params, threshold)?;
    scheme_kqaoi(params, &pd, lead_slots, TopKHits::Content)
}

fn check_energy_inputs(ec: f64, p: f64) -> Result<()> {
    if ec >= 1.0 {
        return Err(Error::Singular("erasure probability 1: no packet is ever delivered".into()));
    }
    if !(p > 0.0) {
        return Err(Error::Singular("persistence 0: nobody ever transmits".into()));
    }
    Ok(())
}

/// Expected total node energy until `w` contenders have all delivered,
/// using persistence `p`. Transmit term: `L / ((1-e_c)(1-p)^(m-1))` slots per
/// stage; receive term: `(1-p)(L - (L-1)(1-p)^(m-1)) / ((1-e_c) p (1-p)^(m-1))`
/// slots per stage, i.e. the awake non-transmitting node-slots. Two or more
/// contenders at `p = 1` collide forever and are reported as singular.
pub fn csma_energy_with_p(params: &ScenarioParams, wake_count: usize, p: f64) -> Result<f64> {
    if wake_count == 0 {
        return Ok(0.0);
    }
    let ec = params.erasure_prob;
    check_energy_inputs(ec, p)?;
    let len = params.packet_len_slots as f64;
    let delta = params.slot_seconds;
    let mut tx = 0.0;
    let mut rx = 0.0;
    for m in 1..=wake_count {
        let quiet = (1.0 - p).powi(m as i32 - 1);
        if quiet == 0.0 {
            return Err(Error::Singular(format!("{m} contenders at persistence {p} always collide")));
        }
        tx += len / ((1.0 - ec) * quiet) * delta;
        rx += (1.0 - p) * (len - (len - 1.0) * quiet) / ((1.0 - ec) * p * quiet) * delta;
    }
    Ok(params.tx_power_watts * tx + params.rx_power_watts * rx)
}

/// `E_total(w | N)` under the scenario's persistence policy.
pub fn csma_energy_given_w(params: &ScenarioParams, wake_count: usize) -> Result<f64> {
    csma_energy_with_p(params, wake_count, persistence(params, wake_count))
}

/// `E_total(w | N)` for `w = 0..=max_wake`.
pub fn energy_by_wake_count(params: &ScenarioParams, max_wake: usize) -> Result<Vec<f64>> {
    let ps = persistence_table(params, max_wake);
    (0..=max_wake).map(|w| csma_energy_with_p(params, w, ps[w])).collect()
}

pub fn cowu_expected_energy(params: &ScenarioParams, threshold: f64) -> Result<f64> {
    params.validate()?;
    let pd = wake_count_pmf(params, threshold)?;
    expected_energy_under(params, &pd)
}

fn expected_energy_under(params: &ScenarioParams, wake_pmf: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (w, &pw) in wake_pmf.iter().enumerate() {
        if pw == 0.0 {
            continue;
        }
        acc += pw * csma_energy_given_w(params, w)?;
    }
    Ok(acc)
}

pub fn rr_expected_kqaoi(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    let len = params.packet_len_slots as f64;
    let mut sum = 0.0;
    for w in 1..=params.n_nodes {
        sum += params.capped_age_cost(w as f64 * len)?;
    }
    let ec = params.erasure_prob;
    Ok((1.0 - ec) * sum / params.n_nodes as f64 + ec * params.capped_age_cost(params.age_penalty_slots)?)
}

pub fn rr_energy(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    Ok(params.tx_power_watts * (params.n_nodes * params.packet_len_slots) as f64 * params.slot_seconds)
}

pub fn qwu_expected_kqaoi(params: &ScenarioParams, wake_prob: f64, lead_slots: u32) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&wake_prob) {
        return Err(domain(format!("wake probability {wake_prob} outside [0,1]")));
    }
    let px = binomial_pmf(params.n_nodes, wake_prob);
    scheme_kqaoi(params, &px, lead_slots, TopKHits::Random)
}

pub fn qwu_expected_energy(params: &ScenarioParams, wake_prob: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&wake_prob) {
        return Err(domain(format!("wake probability {wake_prob} outside [0,1]")));
    }
    expected_energy_under(params, &binomial_pmf(params.n_nodes, wake_prob))
}

/// Lower bound: the true top-k report back to back in the last `k L` slots.
pub fn genie_kqaoi(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    let len = params.packet_len_slots as f64;
    let mut sum = 0.0;
    for w in 1..=params.k {
        sum += params.capped_age_cost(w as f64 * len)?;
    }
    Ok(sum / params.k as f64)
}

pub fn genie_energy(params: &ScenarioParams) -> Result<f64> {
    params.validate()?;
    Ok(params.tx_power_watts * (params.k * params.packet_len_slots) as f64 * params.slot_seconds)
}

/// Expected time until `w` contenders have all delivered, with persistence `p`.
/// Infinite when two or more contenders use `p = 1`.
pub fn expected_delay_with_p(params: &ScenarioParams, wake_count: usize, p: f64) -> Result<f64> {
    if wake_count == 0 {
        return Ok(0.0);
    }
    check_energy_inputs(params.erasure_prob, p)?;
    Ok(delay_sum(params, wake_count, p))
}

pub(crate) fn delay_sum(params: &ScenarioParams, wake_count: usize, p: f64) -> f64 {
    let len = params.packet_len_slots as f64;
    let ec = params.erasure_prob;
    let mut acc = 0.0;
    for m in 1..=wake_count {
        let mf = m as f64;
        acc += (len - (len - 1.0) * (1.0 - p).powi(m as i32)) * params.slot_seconds
            / ((1.0 - ec) * mf * p * (1.0 - p).powi(m as i32 - 1));
    }
    acc
}

/// `T_d(w)` with the scenario's fixed persistence.
pub fn expected_delay(params: &ScenarioParams, wake_count: usize) -> Result<f64> {
    expected_delay_with_p(params, wake_count, params.tx_prob)
}

pub fn evaluate(params: &ScenarioParams, scheme: &SchemeSpec) -> Result<SchemePoint> {
    scheme.validate(params)?;
    let (expected_kqaoi, expected_energy_joules) = match *scheme {
        SchemeSpec::CoWu { threshold, lead_slots } => (
            cowu_expected_kqaoi(params, threshold, lead_slots)?,
            cowu_expected_energy(params, threshold)?,
        ),
        SchemeSpec::QWu { wake_prob, lead_slots } => (
            qwu_expected_kqaoi(params, wake_prob, lead_slots)?,
            qwu_expected_energy(params, wake_prob)?,
        ),
        SchemeSpec::RoundRobin => (rr_expected_kqaoi(params)?, rr_energy(params)?),
        SchemeSpec::Genie => (genie_kqaoi(params)?, genie_energy(params)?),
    };
    Ok(SchemePoint { scheme: *scheme, expected_kqaoi, expected_energy_joules })
}

/// CoWu k-QAoI over a (threshold, lead time) grid and energy per threshold,
/// sharing one chain pass per wake count.
#[derive(Debug, Clone)]
pub struct CowuSurface {
    lead_slots: Vec<u32>,
    kqaoi_given_wake: Vec<Vec<f64>>,
    energy_given_wake: Option<Vec<f64>>,
}

impl CowuSurface {
    /// `with_energy` fails on singular energy inputs; leave it off when only k-QAoI is needed.
    pub fn new(params: &ScenarioParams, lead_slots: &[u32], with_energy: bool) -> Result<Self> {
        params.validate()?;
        if lead_slots.contains(&0) {
            return Err(domain("lead_slots must be at least 1"));
        }
        let table = SuccessTable::build(params, params.n_nodes, lead_slots, None);
        let kqaoi_given_wake = table.conditional_kqaoi(params, TopKHits::Content)?;
        let energy_given_wake = if with_energy { Some(energy_by_wake_count(params, params.n_nodes)?) } else { None };
        Ok(CowuSurface { lead_slots: lead_slots.to_vec(), kqaoi_given_wake, energy_given_wake })
    }

    pub fn lead_slots(&self) -> &[u32] {
        &self.lead_slots
    }

    /// k-QAoI for each lead time, given the wake-count pmf of a threshold.
    pub fn kqaoi_row(&self, wake_pmf: &[f64]) -> Vec<f64> {
        (0..self.lead_slots.len())
            .map(|zi| {
                let mut acc = 0.0;
                for (w, &pw) in wake_pmf.iter().enumerate() {
                    acc += pw * self.kqaoi_given_wake[w][zi];
                }
                acc
            })
            .collect()
    }

    pub fn energy(&self, wake_pmf: &[f64]) -> Option<f64> {
        self.energy_given_wake.as_ref().map(|e| expect(wake_pmf, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AgeCost;

    fn fig3() -> ScenarioParams {
        ScenarioParams::default()
    }

    #[test]
    fn wake_count_pmf_examples() {
        let p = fig3();
        let pmf = wake_count_pmf(&p, 0.0).unwrap();
        assert_eq!(pmf[100], 1.0);
        assert!(pmf[..100].iter().all(|&x| x == 0.0));
        let pmf = wake_count_pmf(&p, 46.0).unwrap();
        assert!((pmf[8] - 0.14552).abs() < 5e-6);
        let small = ScenarioParams { n_nodes: 2, k: 1, ..p };
        let pmf = wake_count_pmf(&small, 25.0).unwrap();
        for (a, b) in pmf.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn topk_hit_examples() {
        assert_eq!(topk_hit_pmf(5, 3, 2).unwrap(), vec![0.0, 0.0, 1.0]);
        let pmf = topk_hit_pmf(5, 10, 4).unwrap();
        assert!((pmf[2] - 100.0 / 210.0).abs() < 1e-14);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(topk_hit_pmf(5, 3, 4).is_err());
    }

    #[test]
    fn energy_examples() {
        let p = fig3();
        assert_eq!(csma_energy_given_w(&p, 0).unwrap(), 0.0);
        let e = csma_energy_with_p(&p, 1, 0.5).unwrap();
        assert!((e - 1.92e-4).abs() < 1e-15, "{e}");
        // a lone contender at p = 1 never idles: transmit energy only
        let e = csma_energy_with_p(&p, 1, 1.0).unwrap();
        assert!((e - 0.055 * 10.0 * 320e-6).abs() < 1e-18);
        assert!(matches!(csma_energy_with_p(&p, 2, 1.0), Err(Error::Singular(_))));
        let lossy = ScenarioParams { erasure_prob: 1.0, ..fig3() };
        assert!(matches!(csma_energy_given_w(&lossy, 3), Err(Error::Singular(_))));
    }

    #[test]
    fn delay_examples() {
        let p = fig3();
        assert_eq!(expected_delay(&p, 0).unwrap(), 0.0);
        let lone = expected_delay_with_p(&p, 1, 1.0).unwrap();
        assert!((lone - 10.0 * 320e-6).abs() < 1e-18);
        let d = expected_delay(&p, 1).unwrap();
        let hand = (10.0 - 9.0 * 0.9394) / 0.0606 * 320e-6;
        assert!((d - hand).abs() < 1e-15);
        assert!((d - 8.16e-3).abs() < 1e-5);
        assert!(expected_delay_with_p(&p, 2, 1.0).unwrap().is_infinite());
        assert!(expected_delay_with_p(&p, 2, 0.0).is_err());
    }

    #[test]
    fn closed_form_baselines() {
        let p = fig3();
        assert_eq!(rr_expected_kqaoi(&p).unwrap(), 505.0);
        assert!((rr_energy(&p).unwrap() - 17.6e-3).abs() < 1e-15);
        let one = ScenarioParams { k: 1, ..fig3() };
        assert_eq!(genie_kqaoi(&one).unwrap(), 10.0);
        assert_eq!(genie_kqaoi(&p).unwrap(), 30.0);
        assert!((genie_energy(&p).unwrap() - 0.88e-3).abs() < 1e-15);
        let small = ScenarioParams { n_nodes: 5, ..fig3() };
        assert_eq!(genie_kqaoi(&small).unwrap(), genie_kqaoi(&p).unwrap());
        let k9 = ScenarioParams { k: 9, ..fig3() };
        assert_eq!(rr_expected_kqaoi(&k9).unwrap(), rr_expected_kqaoi(&p).unwrap());
    }

    #[test]
    fn nobody_wakes_at_top_threshold() {
        let p = fig3();
        assert_eq!(cowu_expected_kqaoi(&p, 50.0, 150).unwrap(), 1000.0);
        assert_eq!(cowu_expected_energy(&p, 50.0).unwrap(), 0.0);
        assert_eq!(qwu_expected_kqaoi(&p, 0.0, 150).unwrap(), 1000.0);
        assert_eq!(qwu_expected_energy(&p, 0.0).unwrap(), 0.0);
        let e = ScenarioParams { age_cost: AgeCost::Exponential { alpha: 0.02 }, ..fig3() };
        assert_eq!(cowu_expected_kqaoi(&e, 50.0, 10).unwrap(), e.capped_age_cost(1000.0).unwrap());
    }

    #[test]
    fn all_awake_qwu_equals_bottom_threshold_cowu() {
        let p = ScenarioParams { n_nodes: 12, k: 3, ..fig3() };
        for z in [20, 60, 200] {
            let a = qwu_expected_kqaoi(&p, 1.0, z).unwrap();
            let b = cowu_expected_kqaoi(&p, 0.0, z).unwrap();
            assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
        }
        assert_eq!(qwu_expected_energy(&p, 1.0).unwrap(), cowu_expected_energy(&p, 0.0).unwrap());
    }

    #[test]
    fn energy_nonincreasing_in_threshold() {
        let p = fig3();
        let mut last = f64::INFINITY;
        for i in 0..=50 {
            let e = cowu_expected_energy(&p, i as f64).unwrap();
            assert!(e <= last * (1.0 + 1e-12));
            last = e;
        }
    }

    #[test]
    fn surface_matches_pointwise() {
        let p = fig3();
        let zs = [50, 150, 400];
        let s = CowuSurface::new(&p, &zs, true).unwrap();
        let pd = wake_count_pmf(&p, 46.0).unwrap();
        let row = s.kqaoi_row(&pd);
        for (v, z) in row.iter().zip(zs) {
            let direct = cowu_expected_kqaoi(&p, 46.0, z).unwrap();
            assert!((v - direct).abs() < 1e-9 * direct);
        }
        let e = s.energy(&pd).unwrap();
        assert!((e - cowu_expected_energy(&p, 46.0).unwrap()).abs() < 1e-15);
    }
}
