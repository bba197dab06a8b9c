#![allow(dead_code)]

use kqaoi::ScenarioParams;

/// Success-count pmf of `w` one-shot p-persistent CSMA contenders within
/// `lead` slots, by enumerating every per-node transmit decision at every
/// idle slot and every erasure outcome. Shares nothing with the chain code.
pub fn enumerate_successes(w: usize, len: usize, p: f64, ec: f64, lead: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; w + 1];
    walk(w, len, p, ec, lead, 0, 1.0, &mut pmf);
    pmf
}

#[allow(clippy::too_many_arguments)]
fn walk(m: usize, len: usize, p: f64, ec: f64, left: usize, done: usize, prob: f64, pmf: &mut [f64]) {
    if prob == 0.0 {
        return;
    }
    if m == 0 || left == 0 {
        pmf[done] += prob;
        return;
    }
    for mask in 0u32..(1 << m) {
        let tx = mask.count_ones() as usize;
        let mut pr = prob;
        for node in 0..m {
            pr *= if mask & (1 << node) != 0 { p } else { 1.0 - p };
        }
        if pr == 0.0 {
            continue;
        }
        if tx == 0 {
            walk(m, len, p, ec, left - 1, done, pr, pmf);
        } else if len > left {
            // the transmission cannot end before the deadline
            pmf[done] += pr;
        } else if tx == 1 {
            walk(m - 1, len, p, ec, left - len, done + 1, pr * (1.0 - ec), pmf);
            walk(m, len, p, ec, left - len, done, pr * ec, pmf);
        } else {
            walk(m, len, p, ec, left - len, done, pr, pmf);
        }
    }
}

pub fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Brute-force expected CoWu k-QAoI for small `N`: sums over every wake set
/// size with a direct binomial, over the enumerated success counts, and over
/// hits by direct counting of which finishers rank in the top k.
pub fn brute_cowu_kqaoi(params: &ScenarioParams, threshold: f64, lead: usize, tx_prob: impl Fn(usize) -> f64) -> f64 {
    let n = params.n_nodes;
    let k = params.k;
    let q = (params.value_max - threshold) / (params.value_max - params.value_min);
    let fresh = params.capped_age_cost(lead as f64).unwrap();
    let stale = params.capped_age_cost(params.age_penalty_slots).unwrap();
    let mut total = 0.0;
    for w in 0..=n {
        let pw = choose(n as u64, w as u64) * q.powi(w as i32) * (1.0 - q).powi((n - w) as i32);
        let succ = enumerate_successes(w, params.packet_len_slots, tx_prob(w), params.erasure_prob, lead);
        // woken nodes are the w largest readings; the top-k among them are
        // the min(w, k) largest, and finishers are a uniform subset of size ws
        let top = w.min(k);
        for (ws, &ps) in succ.iter().enumerate() {
            let mut cond = 0.0;
            for r in 0..=ws.min(top) {
                let hit = choose(top as u64, r as u64) * choose((w - top) as u64, (ws - r) as u64)
                    / choose(w as u64, ws as u64);
                cond += hit * (r as f64 * fresh + (k - r) as f64 * stale) / k as f64;
            }
            total += pw * ps * cond;
        }
    }
    total
}
