//! Scenario parameterisation, age-cost functions and the per-episode k-QAoI.
//!
//! All ages are measured in slots. A node in the top-k set at sampling time
//! has age `lead_slots` at the deadline if its report arrived in time and
//! `age_penalty_slots` otherwise; the cost function maps that age to a
//! penalty which is then capped at `age_cap`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Cost-of-update-delay function applied to an age in slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgeCost {
    Linear,
    Exponential { alpha: f64 },
}

impl AgeCost {
    /// `tau` for the linear cost, `exp(alpha * tau) - 1` for the exponential one.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(domain(format!("age must be nonnegative, got {tau}")));
        }
        Ok(match *self {
            AgeCost::Linear => tau,
            AgeCost::Exponential { alpha } => (alpha * tau).exp_m1(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AgeCost::Linear => Ok(()),
            AgeCost::Exponential { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            AgeCost::Exponential { alpha } => Err(Error::InvalidParams(format!(
                "exponential age cost needs alpha > 0, got {alpha}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AgeCost::Linear => "linear",
            AgeCost::Exponential { .. } => "exponential",
        }
    }
}

/// Full parameter tuple of one top-k collection scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_nodes: usize,
    pub k: usize,
    pub packet_len_slots: usize,
    pub slot_seconds: f64,
    pub tx_power_watts: f64,
    pub rx_power_watts: f64,
    pub erasure_prob: f64,
    /// CSMA persistence used when `oracle_p` is off.
    pub tx_prob: f64,
    pub value_min: f64,
    pub value_max: f64,
    pub age_penalty_slots: f64,
    pub age_cap: f64,
    pub age_cost: AgeCost,
    /// Use the delay-minimising persistence for the realised wake count
    /// instead of `tx_prob`.
    #[serde(default)]
    pub oracle_p: bool,
}

impl Default for ScenarioParams {
    /// 100 kbps radio: L = 10 slots of 320 us, 55 mW transmit, 50 mW receive,
    /// readings uniform on [0, 50], A_max = 5000. The remaining values
    /// (N = 100, k = 5, p = 0.0606, lossless, linear age, Gamma = 1000) are
    /// the baseline scenario most evaluations start from.
    fn default() -> Self {
        ScenarioParams {
            n_nodes: 100,
            k: 5,
            packet_len_slots: 10,
            slot_seconds: 320e-6,
            tx_power_watts: 0.055,
            rx_power_watts: 0.050,
            erasure_prob: 0.0,
            tx_prob: 0.0606,
            value_min: 0.0,
            value_max: 50.0,
            age_penalty_slots: 1000.0,
            age_cap: 5000.0,
            age_cost: AgeCost::Linear,
            oracle_p: false,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_nodes == 0 {
            return bad("n_nodes must be positive".into());
        }
        if self.k == 0 || self.k > self.n_nodes {
            return bad(format!("k must be in 1..={}, got {}", self.n_nodes, self.k));
        }
        if self.packet_len_slots == 0 {
            return bad("packet_len_slots must be positive".into());
        }
        for (name, v) in [
            ("slot_seconds", self.slot_seconds),
            ("tx_power_watts", self.tx_power_watts),
            ("rx_power_watts", self.rx_power_watts),
            ("age_cap", self.age_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.erasure_prob) {
            return bad(format!("erasure_prob must be in [0,1], got {}", self.erasure_prob));
        }
        if !(self.tx_prob > 0.0 && self.tx_prob <= 1.0) {
            return bad(format!("tx_prob must be in (0,1], got {}", self.tx_prob));
        }
        if !(self.value_min < self.value_max) || !self.value_min.is_finite() || !self.value_max.is_finite() {
            return bad(format!(
                "value range must satisfy min < max, got [{}, {}]",
                self.value_min, self.value_max
            ));
        }
        if !(self.age_penalty_slots >= 0.0) {
            return bad(format!("age_penalty_slots must be nonnegative, got {}", self.age_penalty_slots));
        }
        self.age_cost.validate()
    }

    pub fn age_cost(&self, tau: f64) -> Result<f64> {
        self.age_cost.eval(tau)
    }

    /// `min(f(tau), A_max)`.
    pub fn capped_age_cost(&self, tau: f64) -> Result<f64> {
        Ok(self.age_cost.eval(tau)?.min(self.age_cap))
    }

    /// Probability that a single reading is at least `threshold`, for readings
    /// uniform on `[value_min, value_max]`.
    pub fn wake_probability(&self, threshold: f64) -> Result<f64> {
        if !(threshold >= self.value_min && threshold <= self.value_max) {
            return Err(domain(format!(
                "threshold {threshold} outside [{}, {}]",
                self.value_min, self.value_max
            )));
        }
        Ok((self.value_max - threshold) / (self.value_max - self.value_min))
    }

    /// Realised k-QAoI when `succeeded` of the top-k nodes reported within `lead_slots`.
    pub fn kqaoi_of_counts(&self, succeeded: usize, lead_slots: f64) -> Result<f64> {
        if succeeded > self.k {
            return Err(domain(format!("{succeeded} successes exceed k = {}", self.k)));
        }
        let fresh = self.capped_age_cost(lead_slots)?;
        let stale = self.capped_age_cost(self.age_penalty_slots)?;
        Ok(kqaoi_mix(self.k, succeeded, fresh, stale))
    }

    /// Capped cost of the failure penalty, i.e. the k-QAoI when nobody reports.
    pub fn stale_cost(&self) -> f64 {
        self.age_cost
            .eval(self.age_penalty_slots)
            .map(|c| c.min(self.age_cap))
            .unwrap_or(self.age_cap)
    }

    /// Renders the flat `key = value` config format read by [`ScenarioParams::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("n_nodes", self.n_nodes.to_string());
        kv("k", self.k.to_string());
        kv("packet_len_slots", self.packet_len_slots.to_string());
        kv("slot_seconds", self.slot_seconds.to_string());
        kv("tx_power_watts", self.tx_power_watts.to_string());
        kv("rx_power_watts", self.rx_power_watts.to_string());
        kv("erasure_prob", self.erasure_prob.to_string());
        kv("tx_prob", self.tx_prob.to_string());
        kv("value_min", self.value_min.to_string());
        kv("value_max", self.value_max.to_string());
        kv("age_penalty_slots", self.age_penalty_slots.to_string());
        kv("age_cap", self.age_cap.to_string());
        kv("age_cost", self.age_cost.name().to_string());
        if let AgeCost::Exponential { alpha } = self.age_cost {
            kv("age_alpha", alpha.to_string());
        }
        kv("oracle_p", self.oracle_p.to_string());
        s
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = ScenarioParams::default();
        let mut kind: Option<String> = None;
        let mut alpha: Option<f64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
                v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
            }
            let res: std::result::Result<(), String> = (|| {
                match key {
                    "n_nodes" => p.n_nodes = num(value)?,
                    "k" => p.k = num(value)?,
                    "packet_len_slots" => p.packet_len_slots = num(value)?,
                    "slot_seconds" => p.slot_seconds = num(value)?,
                    "tx_power_watts" => p.tx_power_watts = num(value)?,
                    "rx_power_watts" => p.rx_power_watts = num(value)?,
                    "erasure_prob" => p.erasure_prob = num(value)?,
                    "tx_prob" => p.tx_prob = num(value)?,
                    "value_min" => p.value_min = num(value)?,
                    "value_max" => p.value_max = num(value)?,
                    "age_penalty_slots" => p.age_penalty_slots = num(value)?,
                    "age_cap" => p.age_cap = num(value)?,
                    "age_cost" => kind = Some(value.to_ascii_lowercase()),
                    "age_alpha" => alpha = Some(num(value)?),
                    "oracle_p" => p.oracle_p = num(value)?,
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            })();
            res.map_err(err)?;
        }
        p.age_cost = match (kind.as_deref(), alpha) {
            (None | Some("linear"), None) => AgeCost::Linear,
            (None | Some("linear"), Some(_)) => {
                return Err(Error::Config { line: 0, message: "age_alpha given for linear age cost".into() })
            }
            (Some("exponential"), Some(alpha)) => AgeCost::Exponential { alpha },
            (Some("exponential"), None) => {
                return Err(Error::Config { line: 0, message: "exponential age cost needs age_alpha".into() })
            }
            (Some(other), _) => {
                return Err(Error::Config { line: 0, message: format!("unknown age_cost `{other}`") })
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// `[r * fresh + (k - r) * stale] / k`
pub(crate) fn kqaoi_mix(k: usize, r: usize, fresh: f64, stale: f64) -> f64 {
    (r as f64 * fresh + (k - r) as f64 * stale) / k as f64
}

/// Wake-up scheme under evaluation together with its tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeSpec {
    /// Content-based wake-up: nodes reading at least `threshold` wake
    /// `lead_slots` before the deadline.
    CoWu { threshold: f64, lead_slots: u32 },
    /// Content-agnostic wake-up with per-node probability `wake_prob`.
    QWu { wake_prob: f64, lead_slots: u32 },
    /// All nodes scheduled TDMA-style in the last `N * L` slots.
    RoundRobin,
    /// Only the true top-k, scheduled back to back in the last `k * L` slots.
    Genie,
}

impl SchemeSpec {
    pub fn validate(&self, params: &ScenarioParams) -> Result<()> {
        match *self {
            SchemeSpec::CoWu { threshold, lead_slots } => {
                params.wake_probability(threshold)?;
                if lead_slots == 0 {
                    return Err(domain("CoWu lead_slots must be at least 1"));
                }
            }
            SchemeSpec::QWu { wake_prob, lead_slots } => {
                if !(0.0..=1.0).contains(&wake_prob) {
                    return Err(domain(format!("wake_prob must be in [0,1], got {wake_prob}")));
                }
                if lead_slots == 0 {
                    return Err(domain("q-Wu lead_slots must be at least 1"));
                }
            }
            SchemeSpec::RoundRobin | SchemeSpec::Genie => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeSpec::CoWu { .. } => "cowu",
            SchemeSpec::QWu { .. } => "qwu",
            SchemeSpec::RoundRobin => "rr",
            SchemeSpec::Genie => "genie",
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::CoWu { threshold, lead_slots } => write!(f, "cowu(vth={threshold}, zeta={lead_slots})"),
            SchemeSpec::QWu { wake_prob, lead_slots } => write!(f, "qwu(q={wake_prob}, zeta={lead_slots})"),
            SchemeSpec::RoundRobin => f.write_str("rr"),
            SchemeSpec::Genie => f.write_str("genie"),
        }
    }
}
