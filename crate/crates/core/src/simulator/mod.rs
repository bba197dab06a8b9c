//! Slot-level Monte-Carlo of one collection episode per scheme, and a seeded
//! batch runner.
//!
//! Every node draws from its own ChaCha8 streams (reading, wake coin, MAC),
//! keyed by the episode seed and the node index, so a node's randomness does
//! not depend on what other nodes did or on how episodes are scheduled.

mod events;

pub use events::{Event, EventKind, EventLog};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::persistence_table;
use crate::error::{domain, Error, Result};
use crate::model::{ScenarioParams, SchemeSpec};

const PURPOSE_VALUE: u64 = 0;
const PURPOSE_WAKE: u64 = 1;
const PURPOSE_MAC: u64 = 2;
const NUM_PURPOSES: u64 = 3;

fn node_rng(seed: u64, node: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64 * NUM_PURPOSES + purpose);
    rng
}

/// Seed of episode `index` in a batch keyed by `master_seed`.
pub fn episode_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Result of one simulated episode. Slots are counted from the wake-up
/// signal (CoWu, q-Wu) or from the start of the schedule (RR, genie).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub sampled_values: Vec<f64>,
    /// Largest readings first; ties go to the lower node index.
    pub topk_indices: Vec<usize>,
    pub woke: Vec<bool>,
    pub success_slot: Vec<Option<u64>>,
    /// Age at the deadline of each node whose report arrived by then.
    pub deadline_age: Vec<Option<f64>>,
    pub attempts: Vec<u32>,
    pub kqaoi: f64,
    pub total_energy_joules: f64,
}

impl EpisodeOutcome {
    pub fn woken_count(&self) -> usize {
        self.woke.iter().filter(|&&w| w).count()
    }

    /// k-QAoI rebuilt from the per-node fields.
    pub fn recompute_kqaoi(&self, params: &ScenarioParams) -> Result<f64> {
        let mut acc = 0.0;
        for &n in &self.topk_indices {
            let age = self.deadline_age[n].unwrap_or(params.age_penalty_slots);
            acc += params.capped_age_cost(age)?;
        }
        Ok(acc / self.topk_indices.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Record every slot event.
    pub event_log: bool,
    /// Apply the erasure probability to genie transmissions as well.
    pub genie_erasures: bool,
}

/// Reusable simulation context; holds the per-wake-count persistence table.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ScenarioParams,
    options: SimOptions,
    persistence: Vec<f64>,
}

fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

impl Simulator {
    pub fn new(params: &ScenarioParams, options: SimOptions) -> Result<Self> {
        params.validate()?;
        Ok(Simulator {
            params: params.clone(),
            options,
            persistence: persistence_table(params, params.n_nodes),
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    fn sample_values(&self, seed: u64) -> Vec<f64> {
        let p = &self.params;
        (0..p.n_nodes)
            .map(|n| {
                let u: f64 = node_rng(seed, n, PURPOSE_VALUE).gen();
                p.value_min + u * (p.value_max - p.value_min)
            })
            .collect()
    }

    pub fn run(&self, scheme: &SchemeSpec, seed: u64) -> Result<(EpisodeOutcome, Option<EventLog>)> {
        scheme.validate(&self.params)?;
        let values = self.sample_values(seed);
        match *scheme {
            SchemeSpec::CoWu { threshold, lead_slots } => {
                let woke = values.iter().map(|&v| v >= threshold).collect();
                self.contend(values, woke, lead_slots, seed)
            }
            SchemeSpec::QWu { wake_prob, lead_slots } => {
                let woke = (0..self.params.n_nodes)
                    .map(|n| node_rng(seed, n, PURPOSE_WAKE).gen::<f64>() < wake_prob)
                    .collect();
                self.contend(values, woke, lead_slots, seed)
            }
            SchemeSpec::RoundRobin => self.round_robin(values, seed),
            SchemeSpec::Genie => self.genie(values, seed),
        }
    }

    /// p-persistent CSMA among the woken nodes until every one of them has
    /// delivered; the deadline falls `lead_slots` slots after wake-up.
    fn contend(
        &self,
        values: Vec<f64>,
        woke: Vec<bool>,
        lead_slots: u32,
        seed: u64,
    ) -> Result<(EpisodeOutcome, Option<EventLog>)> {
        let p = &self.params;
        let n = p.n_nodes;
        let mut log = self.options.event_log.then(EventLog::default);
        let mut backlog: Vec<usize> = (0..n).filter(|&i| woke[i]).collect();
        let w = backlog.len();
        let tx_prob = self.persistence[w];
        if w > 0 && p.erasure_prob >= 1.0 {
            return Err(Error::Singular("erasure probability 1: contention never ends".into()));
        }
        if w > 1 && tx_prob >= 1.0 {
            return Err(Error::Singular(format!("{w} contenders at persistence 1 always collide")));
        }
        if let Some(log) = log.as_mut() {
            for &i in &backlog {
                log.push(0, EventKind::Wake, i);
            }
        }
        let mut mac: Vec<Option<ChaCha8Rng>> =
            (0..n).map(|i| woke[i].then(|| node_rng(seed, i, PURPOSE_MAC))).collect();
        let mut success_slot = vec![None; n];
        let mut attempts = vec![0u32; n];
        let len = p.packet_len_slots as u64;
        let mut slot: u64 = 0;
        let mut senders = Vec::new();
        while !backlog.is_empty() {
            senders.clear();
            for &i in &backlog {
                let rng = mac[i].as_mut().expect("woken node has a MAC stream");
                if rng.gen::<f64>() < tx_prob {
                    senders.push(i);
                }
            }
            if senders.is_empty() {
                slot += 1;
                continue;
            }
            let end = slot + len;
            for &i in &senders {
                attempts[i] += 1;
                if let Some(log) = log.as_mut() {
                    log.push(slot, EventKind::Transmit, i);
                }
            }
            if let [only] = senders[..] {
                let rng = mac[only].as_mut().expect("woken node has a MAC stream");
                if rng.gen::<f64>() < p.erasure_prob {
                    if let Some(log) = log.as_mut() {
                        log.push(end, EventKind::Erasure, only);
                    }
                } else {
                    success_slot[only] = Some(end);
                    backlog.retain(|&i| i != only);
                    if let Some(log) = log.as_mut() {
                        log.push(end, EventKind::Ack, only);
                    }
                }
            } else if let Some(log) = log.as_mut() {
                for &i in &senders {
                    log.push(end, EventKind::Collision, i);
                }
            }
            slot = end;
        }

        let lead = u64::from(lead_slots);
        let deadline_age: Vec<Option<f64>> =
            success_slot.iter().map(|s| s.filter(|&t| t <= lead).map(|_| f64::from(lead_slots))).collect();
        let mut tx_slots = 0u64;
        let mut rx_slots = 0u64;
        for i in 0..n {
            if let Some(t) = success_slot[i] {
                let busy = u64::from(attempts[i]) * len;
                tx_slots += busy;
                rx_slots += t - busy;
            }
        }
        let energy = (p.tx_power_watts * tx_slots as f64 + p.rx_power_watts * rx_slots as f64) * p.slot_seconds;
        self.finish(values, woke, success_slot, deadline_age, attempts, energy, log)
    }

    fn round_robin(&self, values: Vec<f64>, seed: u64) -> Result<(EpisodeOutcome, Option<EventLog>)> {
        let p = &self.params;
        let n = p.n_nodes;
        let len = p.packet_len_slots as u64;
        let mut log = self.options.event_log.then(EventLog::default);
        let mut success_slot = vec![None; n];
        let mut deadline_age = vec![None; n];
        for j in 0..n {
            let start = j as u64 * len;
            let erased = node_rng(seed, j, PURPOSE_MAC).gen::<f64>() < p.erasure_prob;
            if let Some(log) = log.as_mut() {
                log.push(start, EventKind::Transmit, j);
                log.push(start + len, if erased { EventKind::Erasure } else { EventKind::Ack }, j);
            }
            if !erased {
                success_slot[j] = Some(start + len);
                deadline_age[j] = Some(((n - j) as u64 * len) as f64);
            }
        }
        let energy = p.tx_power_watts * (n as u64 * len) as f64 * p.slot_seconds;
        self.finish(values, vec![true; n], success_slot, deadline_age, vec![1; n], energy, log)
    }

    fn genie(&self, values: Vec<f64>, seed: u64) -> Result<(EpisodeOutcome, Option<EventLog>)> {
        let p = &self.params;
        let n = p.n_nodes;
        let len = p.packet_len_slots as u64;
        let k = p.k;
        let mut log = self.options.event_log.then(EventLog::default);
        let mut woke = vec![false; n];
        let mut success_slot = vec![None; n];
        let mut deadline_age = vec![None; n];
        let mut attempts = vec![0; n];
        for (rank, &i) in top_k(&values, k).iter().enumerate() {
            let start = rank as u64 * len;
            woke[i] = true;
            attempts[i] = 1;
            let erased =
                self.options.genie_erasures && node_rng(seed, i, PURPOSE_MAC).gen::<f64>() < p.erasure_prob;
            if let Some(log) = log.as_mut() {
                log.push(start, EventKind::Transmit, i);
                log.push(start + len, if erased { EventKind::Erasure } else { EventKind::Ack }, i);
            }
            if !erased {
                success_slot[i] = Some(start + len);
                deadline_age[i] = Some(((k - rank) as u64 * len) as f64);
            }
        }
        let energy = p.tx_power_watts * (k as u64 * len) as f64 * p.slot_seconds;
        self.finish(values, woke, success_slot, deadline_age, attempts, energy, log)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        sampled_values: Vec<f64>,
        woke: Vec<bool>,
        success_slot: Vec<Option<u64>>,
        deadline_age: Vec<Option<f64>>,
        attempts: Vec<u32>,
        total_energy_joules: f64,
        log: Option<EventLog>,
    ) -> Result<(EpisodeOutcome, Option<EventLog>)> {
        let topk_indices = top_k(&sampled_values, self.params.k);
        let mut out = EpisodeOutcome {
            sampled_values,
            topk_indices,
            woke,
            success_slot,
            deadline_age,
            attempts,
            kqaoi: 0.0,
            total_energy_joules,
        };
        out.kqaoi = out.recompute_kqaoi(&self.params)?;
        Ok((out, log))
    }

    pub fn batch(&self, scheme: &SchemeSpec, episodes: u64, master_seed: u64) -> Result<BatchStats> {
        if episodes == 0 {
            return Err(domain("a batch needs at least one episode"));
        }
        scheme.validate(&self.params)?;
        let runs: Vec<(f64, f64, usize)> = (0..episodes)
            .into_par_iter()
            .map(|e| {
                let (o, _) = self.run(scheme, episode_seed(master_seed, e))?;
                Ok((o.kqaoi, o.total_energy_joules, o.woken_count()))
            })
            .collect::<Result<_>>()?;
        let kq = summarize(runs.iter().map(|r| r.0));
        let en = summarize(runs.iter().map(|r| r.1));
        let wk = summarize(runs.iter().map(|r| r.2 as f64));
        Ok(BatchStats {
            episodes,
            mean_kqaoi: kq.0,
            se_kqaoi: kq.1,
            mean_energy_joules: en.0,
            se_energy_joules: en.1,
            mean_woken: wk.0,
            master_seed,
        })
    }
}

/// Mean and standard error, accumulated in iteration order.
fn summarize(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0u64;
    let mut sum = 0.0;
    for x in xs.clone() {
        n += 1;
        sum += x;
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub episodes: u64,
    pub mean_kqaoi: f64,
    pub se_kqaoi: f64,
    pub mean_energy_joules: f64,
    pub se_energy_joules: f64,
    pub mean_woken: f64,
    pub master_seed: u64,
}

pub fn run_cowu_episode(params: &ScenarioParams, threshold: f64, lead_slots: u32, seed: u64) -> Result<EpisodeOutcome> {
    let sim = Simulator::new(params, SimOptions::default())?;
    Ok(sim.run(&SchemeSpec::CoWu { threshold, lead_slots }, seed)?.0)
}

pub fn run_qwu_episode(params: &ScenarioParams, wake_prob: f64, lead_slots: u32, seed: u64) -> Result<EpisodeOutcome> {
    let sim = Simulator::new(params, SimOptions::default())?;
    Ok(sim.run(&SchemeSpec::QWu { wake_prob, lead_slots }, seed)?.0)
}

pub fn run_rr_episode(params: &ScenarioParams, seed: u64) -> Result<EpisodeOutcome> {
    let sim = Simulator::new(params, SimOptions::default())?;
    Ok(sim.run(&SchemeSpec::RoundRobin, seed)?.0)
}

pub fn run_genie_episode(params: &ScenarioParams, seed: u64) -> Result<EpisodeOutcome> {
    let sim = Simulator::new(params, SimOptions::default())?;
    Ok(sim.run(&SchemeSpec::Genie, seed)?.0)
}

pub fn run_batch(params: &ScenarioParams, scheme: &SchemeSpec, episodes: u64, master_seed: u64) -> Result<BatchStats> {
    Simulator::new(params, SimOptions::default())?.batch(scheme, episodes, master_seed)
}
