//! Grid-search tuning of CoWu: delay-optimal persistence, minimum-energy
//! (threshold, lead time) under a k-QAoI cap, lead-time optima, and the
//! largest k that still beats given energy and k-QAoI caps.
//!
//! Every scan evaluates the closed forms only. Argmins break ties
//! deterministically, so results do not depend on evaluation order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, delay_sum, CowuSurface, SchemePoint};
use crate::error::{domain, Result};
use crate::model::{AgeCost, ScenarioParams, SchemeSpec};
use crate::prob::binomial_pmf;

/// Evenly spaced reals `min, min + step, ..., <= max`. Points are computed
/// from their index, never by accumulation, and rounded to 12 decimals so
/// that e.g. `0.05 * 3` is the double nearest to 0.15.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RealGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let g = RealGrid { min, max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(domain(format!("bad grid {}..{} step {}", self.min, self.max, self.step)));
        }
        Ok(())
    }

    /// Persistence grid 0.001..=1 step 0.001.
    pub fn persistence() -> Self {
        RealGrid { min: 0.001, max: 1.0, step: 0.001 }
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        let x = self.min + i as f64 * self.step;
        format!("{x:.12}").parse().unwrap_or(x)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntGrid {
    pub min: u32,
    pub max: u32,
    pub step: u32,
}

impl IntGrid {
    pub fn new(min: u32, max: u32, step: u32) -> Result<Self> {
        if step == 0 || min > max {
            return Err(domain(format!("bad grid {min}..{max} step {step}")));
        }
        Ok(IntGrid { min, max, step })
    }

    pub fn values(&self) -> Vec<u32> {
        (self.min..=self.max).step_by(self.step as usize).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub threshold: RealGrid,
    pub lead_slots: IntGrid,
    pub persistence: RealGrid,
}

impl Default for GridSpec {
    /// Threshold 0..=50 step 0.5, lead time 10..=1000 step 10.
    fn default() -> Self {
        GridSpec {
            threshold: RealGrid { min: 0.0, max: 50.0, step: 0.5 },
            lead_slots: IntGrid { min: 10, max: 1000, step: 10 },
            persistence: RealGrid::persistence(),
        }
    }
}

impl GridSpec {
    /// Coarser grid used for the maximum-k search: threshold step 2, lead time 50..=500 step 50.
    pub fn max_k() -> Self {
        GridSpec {
            threshold: RealGrid { min: 0.0, max: 50.0, step: 2.0 },
            lead_slots: IntGrid { min: 50, max: 500, step: 50 },
            persistence: RealGrid::persistence(),
        }
    }

    /// Same grid with thresholds rescaled onto the scenario's value range.
    fn thresholds(&self, params: &ScenarioParams) -> Vec<f64> {
        self.threshold
            .values()
            .into_iter()
            .map(|t| t.clamp(params.value_min, params.value_max))
            .collect()
    }
}

/// Delay-minimising persistence for `w` contenders over `grid`; smallest
/// value on ties, grid minimum when nobody contends.
pub fn optimal_p(params: &ScenarioParams, wake_count: usize, grid: &RealGrid) -> f64 {
    if wake_count == 0 {
        return grid.min;
    }
    let mut best = (f64::INFINITY, grid.min);
    for p in grid.values() {
        let d = delay_sum(params, wake_count, p);
        if d < best.0 {
            best = (d, p);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub feasible: bool,
    pub threshold: f64,
    pub lead_slots: u32,
    pub energy_joules: f64,
    pub kqaoi: f64,
    pub constraint: f64,
}

impl OptResult {
    fn infeasible(constraint: f64) -> Self {
        OptResult { feasible: false, threshold: f64::NAN, lead_slots: 0, energy_joules: f64::NAN, kqaoi: f64::NAN, constraint }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    threshold: f64,
    lead_slots: u32,
    energy: f64,
    kqaoi: f64,
}

/// Lower energy, then larger threshold, then shorter lead time.
fn better(a: &Candidate, b: &Candidate) -> bool {
    (a.energy, -a.threshold, a.lead_slots) < (b.energy, -b.threshold, b.lead_slots)
}

/// Energy and k-QAoI of every (threshold, lead) cell, thresholds in grid order.
struct CowuGridEval {
    thresholds: Vec<f64>,
    leads: Vec<u32>,
    energy: Vec<f64>,
    kqaoi: Vec<Vec<f64>>,
}

impl CowuGridEval {
    fn new(params: &ScenarioParams, grid: &GridSpec) -> Result<Self> {
        let leads = grid.lead_slots.values();
        let surface = CowuSurface::new(params, &leads, true)?;
        let thresholds = grid.thresholds(params);
        let rows: Vec<(f64, Vec<f64>)> = thresholds
            .par_iter()
            .map(|&th| {
                let pd = analytic::wake_count_pmf(params, th)?;
                Ok((surface.energy(&pd).expect("energy requested"), surface.kqaoi_row(&pd)))
            })
            .collect::<Result<_>>()?;
        let (energy, kqaoi) = rows.into_iter().unzip();
        Ok(CowuGridEval { thresholds, leads, energy, kqaoi })
    }

    fn cells(&self) -> impl Iterator<Item = Candidate> + '_ {
        self.thresholds.iter().enumerate().flat_map(move |(ti, &threshold)| {
            self.leads.iter().enumerate().map(move |(zi, &lead_slots)| Candidate {
                threshold,
                lead_slots,
                energy: self.energy[ti],
                kqaoi: self.kqaoi[ti][zi],
            })
        })
    }

    fn best_under(&self, kqaoi_cap: f64, energy_cap: f64) -> Option<Candidate> {
        self.cells()
            .filter(|c| c.kqaoi <= kqaoi_cap && c.energy <= energy_cap)
            .fold(None, |best: Option<Candidate>, c| match best {
                Some(b) if !better(&c, &b) => Some(b),
                _ => Some(c),
            })
    }
}

fn to_result(best: Option<Candidate>, constraint: f64) -> OptResult {
    match best {
        Some(c) => OptResult {
            feasible: true,
            threshold: c.threshold,
            lead_slots: c.lead_slots,
            energy_joules: c.energy,
            kqaoi: c.kqaoi,
            constraint,
        },
        None => OptResult::infeasible(constraint),
    }
}

/// Minimum-energy CoWu configuration whose expected k-QAoI does not exceed `kqaoi_cap`.
pub fn min_energy_params(params: &ScenarioParams, kqaoi_cap: f64, grid: &GridSpec) -> Result<OptResult> {
    if !(kqaoi_cap > 0.0) {
        return Err(domain(format!("k-QAoI cap must be positive, got {kqaoi_cap}")));
    }
    let eval = CowuGridEval::new(params, grid)?;
    Ok(to_result(eval.best_under(kqaoi_cap, f64::INFINITY), kqaoi_cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeFamily {
    CoWu,
    QWu,
}

/// (energy, k-QAoI) points of one family swept over its tunable (threshold
/// for CoWu, wake probability for q-Wu) at a fixed lead time, plus the
/// round-robin and genie points; sorted by energy.
pub fn achievable_region(
    params: &ScenarioParams,
    family: SchemeFamily,
    sweep: &RealGrid,
    lead_slots: u32,
) -> Result<Vec<SchemePoint>> {
    sweep.validate()?;
    let schemes: Vec<SchemeSpec> = sweep
        .values()
        .into_iter()
        .map(|x| match family {
            SchemeFamily::CoWu => SchemeSpec::CoWu { threshold: x.clamp(params.value_min, params.value_max), lead_slots },
            SchemeFamily::QWu => SchemeSpec::QWu { wake_prob: x.clamp(0.0, 1.0), lead_slots },
        })
        .chain([SchemeSpec::RoundRobin, SchemeSpec::Genie])
        .collect();
    let mut points: Vec<SchemePoint> =
        schemes.par_iter().map(|s| analytic::evaluate(params, s)).collect::<Result<_>>()?;
    points.sort_by(|a, b| {
        a.expected_energy_joules
            .total_cmp(&b.expected_energy_joules)
            .then(a.expected_kqaoi.total_cmp(&b.expected_kqaoi))
    });
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Exponential age-cost rate.
    Alpha,
    /// Failure penalty (slots).
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaOptPoint {
    pub value: f64,
    pub lead_slots: u32,
    pub kqaoi: f64,
}

/// For each swept value, the lead time on `lead_grid` minimising CoWu's
/// k-QAoI at the fixed `threshold` (shorter lead on ties).
pub fn zeta_opt_curve(
    params: &ScenarioParams,
    variable: SweepVariable,
    values: &[f64],
    threshold: f64,
    lead_grid: &IntGrid,
) -> Result<Vec<ZetaOptPoint>> {
    if values.is_empty() {
        return Err(domain("sweep needs at least one value"));
    }
    let leads = lead_grid.values();
    // chain passes do not depend on the cost function or penalty
    let table = analytic::SuccessTable::build(params, params.n_nodes, &leads, None);
    let pd = analytic::wake_count_pmf(params, threshold)?;
    values
        .par_iter()
        .map(|&value| {
            let scenario = match variable {
                SweepVariable::Alpha => ScenarioParams { age_cost: AgeCost::Exponential { alpha: value }, ..params.clone() },
                SweepVariable::Gamma => ScenarioParams { age_penalty_slots: value, ..params.clone() },
            };
            scenario.validate()?;
            let cond = table.conditional_kqaoi(&scenario, analytic::TopKHits::Content)?;
            let mut best: Option<(u32, f64)> = None;
            for (zi, &z) in leads.iter().enumerate() {
                let mut acc = 0.0;
                for (w, &pw) in pd.iter().enumerate() {
                    acc += pw * cond[w][zi];
                }
                if best.is_none_or(|(_, b)| acc < b) {
                    best = Some((z, acc));
                }
            }
            let (lead_slots, kqaoi) = best.expect("nonempty lead grid");
            Ok(ZetaOptPoint { value, lead_slots, kqaoi })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxKResult {
    /// 0 when even k = 1 is infeasible.
    pub max_k: usize,
    pub energy_cap: f64,
    pub kqaoi_cap: f64,
    pub witness: Option<OptResult>,
}

/// Largest k for which some grid cell meets both caps. `kqaoi_cap` maps k to
/// the k-QAoI cap. k is scanned upward from 1 and the scan stops at the first
/// infeasible k.
pub fn max_k(
    params: &ScenarioParams,
    energy_cap: f64,
    kqaoi_cap: impl Fn(usize) -> f64 + Sync,
    grid: &GridSpec,
) -> Result<MaxKResult> {
    if !(energy_cap > 0.0) {
        return Err(domain(format!("energy cap must be positive, got {energy_cap}")));
    }
    let leads = grid.lead_slots.values();
    let thresholds = grid.thresholds(params);
    let base = ScenarioParams { k: 1, ..params.clone() };
    base.validate()?;
    let table = analytic::SuccessTable::build(&base, base.n_nodes, &leads, None);
    let energy_by_w = analytic::energy_by_wake_count(&base, base.n_nodes)?;
    let pmfs: Vec<Vec<f64>> = thresholds
        .iter()
        .map(|&t| Ok(binomial_pmf(base.n_nodes, base.wake_probability(t)?)))
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = pmfs.iter().map(|pd| pd.iter().zip(&energy_by_w).map(|(p, e)| p * e).sum()).collect();

    let mut result = MaxKResult { max_k: 0, energy_cap, kqaoi_cap: kqaoi_cap(1), witness: None };
    for k in 1..=base.n_nodes {
        let scenario = ScenarioParams { k, ..base.clone() };
        let cap = kqaoi_cap(k);
        let cond = table.conditional_kqaoi(&scenario, analytic::TopKHits::Content)?;
        let mut best: Option<Candidate> = None;
        for (ti, &threshold) in thresholds.iter().enumerate() {
            if energies[ti] > energy_cap {
                continue;
            }
            for (zi, &lead_slots) in leads.iter().enumerate() {
                let kq: f64 = pmfs[ti].iter().enumerate().map(|(w, p)| p * cond[w][zi]).sum();
                let c = Candidate { threshold, lead_slots, energy: energies[ti], kqaoi: kq };
                if kq <= cap && best.as_ref().is_none_or(|b| better(&c, b)) {
                    best = Some(c);
                }
            }
        }
        match best {
            Some(c) => {
                result = MaxKResult { max_k: k, energy_cap, kqaoi_cap: cap, witness: Some(to_result(Some(c), cap)) };
            }
            None => break,
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(GridSpec::default().threshold.len(), 101);
        assert_eq!(GridSpec::default().lead_slots.values().len(), 100);
        assert_eq!(RealGrid::persistence().len(), 1000);
        assert_eq!(GridSpec::max_k().threshold.values().last(), Some(&50.0));
        assert_eq!(GridSpec::max_k().lead_slots.values(), vec![50, 100, 150, 200, 250, 300, 350, 400, 450, 500]);
        assert!(RealGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(IntGrid::new(1, 5, 0).is_err());
    }

    #[test]
    fn lone_contender_prefers_full_persistence() {
        let p = ScenarioParams::default();
        assert_eq!(optimal_p(&p, 1, &RealGrid::persistence()), 1.0);
        assert_eq!(optimal_p(&p, 0, &RealGrid::persistence()), 0.001);
    }

    #[test]
    fn optimal_p_matches_exhaustive_scan() {
        let p = ScenarioParams::default();
        let grid = RealGrid::persistence();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..1000 {
            let x = 0.001 + i as f64 * 0.001;
            let d = analytic::expected_delay_with_p(&p, 2, x).unwrap();
            if d < best.0 {
                best = (d, x);
            }
        }
        assert_eq!(optimal_p(&p, 2, &grid), best.1);
    }

    #[test]
    fn optimal_p_nonincreasing_in_wake_count() {
        let p = ScenarioParams::default();
        let grid = RealGrid::persistence();
        let ps: Vec<f64> = (1..=50).map(|w| optimal_p(&p, w, &grid)).collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0]), "{ps:?}");
    }

    #[test]
    fn all_fail_cap_is_met_by_empty_wakeup() {
        let p = ScenarioParams { n_nodes: 30, oracle_p: true, ..ScenarioParams::default() };
        let grid = GridSpec {
            threshold: RealGrid { min: 0.0, max: 50.0, step: 5.0 },
            lead_slots: IntGrid { min: 50, max: 200, step: 50 },
            ..GridSpec::default()
        };
        let r = min_energy_params(&p, p.stale_cost(), &grid).unwrap();
        assert!(r.feasible);
        assert_eq!(r.energy_joules, 0.0);
        assert_eq!(r.threshold, 50.0);
        assert_eq!(r.lead_slots, 50);
    }

    #[test]
    fn region_is_sorted_and_contains_endpoints() {
        let p = ScenarioParams { n_nodes: 20, ..ScenarioParams::default() };
        let pts = achievable_region(&p, SchemeFamily::CoWu, &RealGrid { min: 40.0, max: 50.0, step: 2.5 }, 100).unwrap();
        assert_eq!(pts.len(), 5 + 2);
        assert!(pts.windows(2).all(|w| w[0].expected_energy_joules <= w[1].expected_energy_joules));
        assert_eq!(pts[0].expected_energy_joules, 0.0);
        assert_eq!(pts[0].expected_kqaoi, 1000.0);
        assert!(pts.iter().any(|s| s.scheme == SchemeSpec::Genie && s.expected_kqaoi == 30.0));
    }

    #[test]
    fn empty_sweep_rejected() {
        let p = ScenarioParams::default();
        assert!(zeta_opt_curve(&p, SweepVariable::Gamma, &[], 46.0, &IntGrid::new(10, 100, 10).unwrap()).is_err());
    }
}
