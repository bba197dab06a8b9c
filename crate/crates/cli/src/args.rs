use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kqaoi::optimizer::{GridSpec, IntGrid, RealGrid};
use kqaoi::{AgeCost, ScenarioParams, SchemeSpec};

#[derive(Debug, Parser)]
#[command(name = "kqaoi", version, about = "Timely top-k retrieval with content-based wake-up")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form expected k-QAoI and energy of one scheme.
    Analytic(AnalyticArgs),
    /// Monte-Carlo batch of one scheme.
    Simulate(SimulateArgs),
    /// One-dimensional sweep; CSV `x,kqaoi_theory,kqaoi_sim,energy_theory,energy_sim`.
    Sweep(SweepArgs),
    /// Grid-search optimizers.
    #[command(subcommand)]
    Optimize(OptimizeCommand),
    /// Regenerate the data behind one evaluation figure.
    Reproduce(ReproduceArgs),
    /// Re-execute the command recorded in a run manifest.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    Linear,
    Exponential,
}

/// Scenario flags; applied on top of `--config` when both are given.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// `key = value` scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Packet length in slots.
    #[arg(long)]
    pub l: Option<usize>,
    /// Slot duration in seconds.
    #[arg(long)]
    pub slot: Option<f64>,
    #[arg(long)]
    pub ptx: Option<f64>,
    #[arg(long)]
    pub prx: Option<f64>,
    /// Erasure probability.
    #[arg(long)]
    pub ec: Option<f64>,
    /// CSMA persistence.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Age penalty for undelivered top-k reports, in slots.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Cap on the per-node age cost.
    #[arg(long)]
    pub amax: Option<f64>,
    #[arg(long, value_enum)]
    pub cost: Option<CostKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Use the delay-optimal persistence for the realised wake count.
    #[arg(long)]
    pub oracle_p: bool,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioParams> {
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioParams::from_config_str(&text)?
            }
            None => ScenarioParams::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { p.$field = v; })*
            };
        }
        set!(n => n_nodes, k => k, l => packet_len_slots, slot => slot_seconds, ptx => tx_power_watts,
             prx => rx_power_watts, ec => erasure_prob, p => tx_prob, vmin => value_min, vmax => value_max,
             gamma => age_penalty_slots, amax => age_cap);
        match (self.cost, self.alpha) {
            (Some(CostKind::Linear), Some(_)) => bail!("--alpha only applies to --cost exponential"),
            (Some(CostKind::Linear), None) => p.age_cost = AgeCost::Linear,
            (Some(CostKind::Exponential), Some(alpha)) => p.age_cost = AgeCost::Exponential { alpha },
            (Some(CostKind::Exponential), None) => match p.age_cost {
                AgeCost::Exponential { .. } => {}
                AgeCost::Linear => bail!("--cost exponential needs --alpha"),
            },
            (None, Some(alpha)) => match p.age_cost {
                AgeCost::Exponential { .. } => p.age_cost = AgeCost::Exponential { alpha },
                AgeCost::Linear => bail!("--alpha needs --cost exponential"),
            },
            (None, None) => {}
        }
        if self.oracle_p {
            p.oracle_p = true;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Cowu,
    Rr,
    Qwu,
    Genie,
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    #[arg(long, value_enum, default_value = "cowu")]
    pub scheme: SchemeKind,
    /// CoWu threshold.
    #[arg(long)]
    pub vth: Option<f64>,
    /// Lead time (slots between wake-up and deadline).
    #[arg(long)]
    pub zeta: Option<u32>,
    /// q-Wu wake probability.
    #[arg(long)]
    pub q: Option<f64>,
}

impl SchemeArgs {
    pub fn resolve(&self) -> Result<SchemeSpec> {
        let (vth, zeta, q) = (self.vth, self.zeta, self.q);
        Ok(match self.scheme {
            SchemeKind::Cowu => {
                if q.is_some() {
                    bail!("--q does not apply to cowu");
                }
                SchemeSpec::CoWu {
                    threshold: vth.context("cowu needs --vth")?,
                    lead_slots: zeta.context("cowu needs --zeta")?,
                }
            }
            SchemeKind::Qwu => {
                if vth.is_some() {
                    bail!("--vth does not apply to qwu");
                }
                SchemeSpec::QWu { wake_prob: q.context("qwu needs --q")?, lead_slots: zeta.context("qwu needs --zeta")? }
            }
            SchemeKind::Rr | SchemeKind::Genie => {
                if vth.is_some() || zeta.is_some() || q.is_some() {
                    bail!("rr and genie take no --vth, --zeta or --q");
                }
                if self.scheme == SchemeKind::Rr {
                    SchemeSpec::RoundRobin
                } else {
                    SchemeSpec::Genie
                }
            }
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Print the result as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON result (plus manifest) to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-episode CSV (episode, seed, kqaoi, energy_joules, woken).
    #[arg(long)]
    pub episodes_csv: Option<PathBuf>,
    /// Slot event log of one episode, one `slot kind node` line per event.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    #[arg(long, default_value_t = 0, requires = "event_log")]
    pub log_episode: u64,
    /// Also write the BatchStats JSON (plus manifest) to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    Vth,
    Zeta,
    Q,
    Alpha,
    Gamma,
    Ec,
    N,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, value_enum)]
    pub vary: SweepVar,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
    /// Add simulation columns with this many episodes per point.
    #[arg(long)]
    pub sim_episodes: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Threshold grid `min:max:step`.
    #[arg(long)]
    pub vth_grid: Option<String>,
    /// Lead-time grid `min:max:step` (slots).
    #[arg(long)]
    pub zeta_grid: Option<String>,
}

fn triple(s: &str) -> Result<(String, String, String)> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [a, b, c] => Ok((a.into(), b.into(), c.into())),
        _ => bail!("grid `{s}` is not `min:max:step`"),
    }
}

pub fn real_grid(s: &str) -> Result<RealGrid> {
    let (a, b, c) = triple(s)?;
    Ok(RealGrid::new(a.parse()?, b.parse()?, c.parse()?)?)
}

pub fn int_grid(s: &str) -> Result<IntGrid> {
    let (a, b, c) = triple(s)?;
    Ok(IntGrid::new(a.parse()?, b.parse()?, c.parse()?)?)
}

impl GridArgs {
    pub fn resolve(&self, base: GridSpec) -> Result<GridSpec> {
        let mut g = base;
        if let Some(s) = &self.vth_grid {
            g.threshold = real_grid(s)?;
        }
        if let Some(s) = &self.zeta_grid {
            g.lead_slots = int_grid(s)?;
        }
        Ok(g)
    }
}

#[derive(Debug, Subcommand)]
pub enum OptimizeCommand {
    /// Minimum-energy (threshold, lead time) under a k-QAoI cap.
    Params {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// `rr` for the round-robin k-QAoI of the same scenario, or a number.
        #[arg(long, default_value = "rr")]
        constraint: String,
        /// Keep the fixed persistence instead of the wake-count optimum.
        #[arg(long)]
        fixed_p: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Optimal lead time against alpha or Gamma at a fixed threshold; CSV.
    Zeta {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        sweep: ZetaSweep,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value_t = 46.0)]
        vth: f64,
        #[arg(long, default_value = "10:1000:10")]
        zeta_grid: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Largest k meeting both an energy and a k-QAoI cap.
    Maxk {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Preset setting 1..=4; overrides cost, Gamma and e_c.
        #[arg(long)]
        setting: Option<u8>,
        /// Energy cap in joules; defaults to the RR energy.
        #[arg(long)]
        energy_cap: Option<f64>,
        /// k-QAoI cap; defaults to the RR k-QAoI.
        #[arg(long)]
        kqaoi_cap: Option<f64>,
        #[arg(long)]
        fixed_p: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZetaSweep {
    Alpha,
    Gamma,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub figure: u8,
    /// Output directory; defaults to $KQAOI_OUT_DIR, then the current directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Episodes per simulated point.
    #[arg(long, default_value_t = kqaoi::figures::DEFAULT_EPISODES)]
    pub episodes: u64,
    #[arg(long, default_value_t = kqaoi::figures::DEFAULT_SEED)]
    pub seed: u64,
    /// Theory series only.
    #[arg(long)]
    pub no_sim: bool,
}
