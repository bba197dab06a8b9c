//! Transient analysis of p-persistent CSMA with `w` one-shot contenders.
//!
//! State `(m, l)` means `m` nodes still hold their packet and the channel has
//! been busy for `l` slots of the current transmission; `(0, 0)` absorbs.
//! States are laid out as `(w, 0..L), (w-1, 0..L), ..., (1, 0..L), (0, 0)`,
//! so state `(m, l)` lives at index `(w - m) * L + l` and the success count
//! `w - m` can be read straight off the index.

use serde::{Deserialize, Serialize};

use crate::model::ScenarioParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub remaining: usize,
    pub elapsed: usize,
}

/// Outgoing transitions of one state; at most two targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    targets: [(usize, f64); 2],
    len: usize,
}

impl Row {
    fn one(to: usize) -> Self {
        Row { targets: [(to, 1.0), (0, 0.0)], len: 1 }
    }

    fn two(a: (usize, f64), b: (usize, f64)) -> Self {
        Row { targets: [a, b], len: 2 }
    }

    pub fn targets(&self) -> &[(usize, f64)] {
        &self.targets[..self.len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsmaChain {
    wake_count: usize,
    packet_len_slots: usize,
    tx_prob: f64,
    erasure_prob: f64,
    rows: Vec<Row>,
}

/// Probability of each chain state at some slot, in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Distribution of the number of contenders that finished within `lead_slots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessDistribution {
    pub wake_count: usize,
    pub lead_slots: u32,
    pub pmf: Vec<f64>,
}

impl CsmaChain {
    /// Chain for `wake_count` contenders using persistence `tx_prob`.
    pub fn new(params: &ScenarioParams, wake_count: usize, tx_prob: f64) -> Self {
        let len = params.packet_len_slots;
        let ec = params.erasure_prob;
        let p = tx_prob;
        let n_states = wake_count * len + 1;
        let mut rows = Vec::with_capacity(n_states);
        for m in (1..=wake_count).rev() {
            let base = (wake_count - m) * len;
            let idle = (1.0 - p).powi(m as i32);
            // lone transmitter, delivered without erasure
            let lone = (1.0 - ec) * m as f64 * p * (1.0 - p).powi(m as i32 - 1);
            if len == 1 {
                rows.push(Row::two((base + 1, lone), (base, 1.0 - lone)));
                continue;
            }
            rows.push(Row::two((base, idle), (base + 1, 1.0 - idle)));
            for l in 1..len - 1 {
                rows.push(Row::one(base + l + 1));
            }
            let success = lone / (1.0 - idle);
            rows.push(Row::two((base + len, success), (base, 1.0 - success)));
        }
        rows.push(Row::one(n_states - 1));
        CsmaChain { wake_count, packet_len_slots: len, tx_prob, erasure_prob: ec, rows }
    }

    pub fn wake_count(&self) -> usize {
        self.wake_count
    }

    pub fn tx_prob(&self) -> f64 {
        self.tx_prob
    }

    pub fn erasure_prob(&self) -> f64 {
        self.erasure_prob
    }

    pub fn packet_len_slots(&self) -> usize {
        self.packet_len_slots
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index_of(&self, state: ChainState) -> Option<usize> {
        if state.remaining == 0 {
            return (state.elapsed == 0).then_some(self.rows.len() - 1);
        }
        if state.remaining > self.wake_count || state.elapsed >= self.packet_len_slots {
            return None;
        }
        Some((self.wake_count - state.remaining) * self.packet_len_slots + state.elapsed)
    }

    pub fn state_at(&self, index: usize) -> ChainState {
        if index + 1 == self.rows.len() {
            return ChainState { remaining: 0, elapsed: 0 };
        }
        ChainState {
            remaining: self.wake_count - index / self.packet_len_slots,
            elapsed: index % self.packet_len_slots,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = ChainState> + '_ {
        (0..self.rows.len()).map(|i| self.state_at(i))
    }

    pub fn row(&self, index: usize) -> &Row {
        &self.rows[index]
    }

    /// Unit mass on `(w, 0)`.
    pub fn initial(&self) -> StateVector {
        let mut v = vec![0.0; self.rows.len()];
        v[0] = 1.0;
        StateVector(v)
    }

    pub fn step(&self, from: &StateVector, to: &mut StateVector) {
        to.0.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let mass = from.0[i];
            if mass == 0.0 {
                continue;
            }
            for &(j, pr) in row.targets() {
                to.0[j] += mass * pr;
            }
        }
    }

    pub fn propagate(&self, steps: u32) -> StateVector {
        let mut cur = self.initial();
        let mut next = StateVector(vec![0.0; self.rows.len()]);
        for _ in 0..steps {
            self.step(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Success-count pmf read off a state vector.
    pub fn success_pmf(&self, v: &StateVector) -> Vec<f64> {
        let len = self.packet_len_slots;
        let w = self.wake_count;
        let mut pmf: Vec<f64> = (0..w).map(|ws| v.0[ws * len..(ws + 1) * len].iter().sum()).collect();
        pmf.push(v.0[w * len]);
        pmf
    }

    pub fn success_count_dist(&self, lead_slots: u32) -> SuccessDistribution {
        SuccessDistribution {
            wake_count: self.wake_count,
            lead_slots,
            pmf: self.success_pmf(&self.propagate(lead_slots)),
        }
    }

    /// Distributions at several lead times from a single forward pass.
    /// Output order follows `lead_slots`.
    pub fn success_count_dists(&self, lead_slots: &[u32]) -> Vec<SuccessDistribution> {
        let mut order: Vec<usize> = (0..lead_slots.len()).collect();
        order.sort_by_key(|&i| lead_slots[i]);
        let mut out: Vec<Option<SuccessDistribution>> = vec![None; lead_slots.len()];
        let mut cur = self.initial();
        let mut next = StateVector(vec![0.0; self.rows.len()]);
        let mut t = 0u32;
        for i in order {
            while t < lead_slots[i] {
                self.step(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
                t += 1;
            }
            out[i] = Some(SuccessDistribution {
                wake_count: self.wake_count,
                lead_slots: t,
                pmf: self.success_pmf(&cur),
            });
        }
        out.into_iter().map(|d| d.expect("every lead time visited")).collect()
    }
}
