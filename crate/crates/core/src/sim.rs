//! Slot-accurate Monte-Carlo simulation of both polling protocols.
//!
//! Every try of every poll draws its randomness from its own ChaCha stream,
//! keyed by `(seed, cycle, slave, try)`. Cycles can therefore run in any order
//! or in parallel and still produce identical reports.
//!
//! Slot accounting:
//! - DLC1000: a try through `n_R` repeaters costs `2 (n_R + 1)` slots whether
//!   or not it succeeds.
//! - SFN: try `j` (counting from 0) runs the downlink with level `r_dl + j`
//!   and the uplink with level `r_ul + j`; each window is one slot longer than
//!   its level, so the try costs `2 (j + 1) + r_dl + r_ul` slots.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{PerMatrix, MASTER};
use crate::error::{Error, Result};
use crate::{dlc, sfn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dlc1000,
    Sfn,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dlc1000 => "DLC1000",
            Protocol::Sfn => "SFN",
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dlc1000" | "dlc" => Ok(Protocol::Dlc1000),
            "sfn" => Ok(Protocol::Sfn),
            other => Err(Error::InvalidParameter(format!(
                "unknown protocol {other:?}"
            ))),
        }
    }
}

/// Retry cap used by the reference field deployments.
pub const DEFAULT_MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub cycles: u64,
    pub max_retries: u32,
    /// DLC1000: most repeaters in a header. SFN: horizon of the analytic
    /// level search; `None` means one level per node.
    pub max_level: Option<usize>,
    pub slot_time: f64,
    pub seed: u64,
    /// Spread cycles over the rayon pool. Results do not depend on this.
    #[serde(default)]
    pub parallel: bool,
}

impl SimConfig {
    pub fn new(protocol: Protocol, cycles: u64, seed: u64) -> Self {
        Self {
            protocol,
            cycles,
            max_retries: DEFAULT_MAX_RETRIES,
            max_level: None,
            slot_time: 1.0,
            seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::InvalidParameter("cycles must be at least 1".into()));
        }
        if !(self.slot_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "slot time must be positive, got {}",
                self.slot_time
            )));
        }
        Ok(())
    }

    pub fn effective_max_level(&self, per: &PerMatrix) -> usize {
        match (self.protocol, self.max_level) {
            (_, Some(l)) => l,
            (Protocol::Dlc1000, None) => dlc::DEFAULT_MAX_LEVEL,
            (Protocol::Sfn, None) => sfn::default_horizon(per),
        }
    }
}

/// How the master polls one slave.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum PollPlan {
    Dlc1000 { repeaters: Vec<usize> },
    Sfn { r_dl: usize, r_ul: usize },
}

impl PollPlan {
    /// Slots consumed by try `j` (0-based).
    pub fn try_slots(&self, j: u32) -> u64 {
        match self {
            PollPlan::Dlc1000 { repeaters } => 2 * (repeaters.len() as u64 + 1),
            PollPlan::Sfn { r_dl, r_ul } => 2 * (j as u64 + 1) + (*r_dl + *r_ul) as u64,
        }
    }

    /// Slots consumed by a poll that used `tries` tries.
    pub fn poll_slots(&self, tries: u32) -> u64 {
        (0..tries).map(|j| self.try_slots(j)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlaveStats {
    pub slave: usize,
    pub plan: PollPlan,
    pub attempts: u64,
    pub successes: u64,
    pub give_ups: u64,
    pub slots: u64,
    /// Average slots per poll, failed polls included.
    pub mean_round_trip_slots: f64,
    /// `tries_histogram[k]` polls used `k + 1` tries.
    pub tries_histogram: Vec<u64>,
}

impl SlaveStats {
    pub fn reached(&self) -> bool {
        self.successes > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub protocol: Protocol,
    pub node_count: usize,
    pub cycles: u64,
    pub max_retries: u32,
    pub max_level: usize,
    pub slot_time: f64,
    pub per_slave: Vec<SlaveStats>,
    /// Mean time per cycle spent on slaves reached at least once.
    pub mean_cycle_duration: f64,
    pub reached_count: usize,
    pub total_slots: u64,
    pub seed_echo: u64,
}

impl SimReport {
    pub fn give_ups(&self) -> u64 {
        self.per_slave.iter().map(|s| s.give_ups).sum()
    }

    /// Fixed-width summary table.
    pub fn to_table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(
            out,
            "{} simulation: {} cycles, seed {}, max retries {}, max level {}",
            self.protocol.name(),
            self.cycles,
            self.seed_echo,
            self.max_retries,
            self.max_level
        )
        .unwrap();
        writeln!(
            out,
            "{:>6} {:>10} {:>10} {:>10} {:>8} {:>12} {:>12}",
            "slave", "levels", "attempts", "successes", "giveups", "slots/poll", "slots"
        )
        .unwrap();
        for s in &self.per_slave {
            let levels = match &s.plan {
                PollPlan::Dlc1000 { repeaters } => format!("{}", repeaters.len()),
                PollPlan::Sfn { r_dl, r_ul } => format!("{r_dl}/{r_ul}"),
            };
            writeln!(
                out,
                "{:>6} {:>10} {:>10} {:>10} {:>8} {:>12.3} {:>12}",
                s.slave,
                levels,
                s.attempts,
                s.successes,
                s.give_ups,
                s.mean_round_trip_slots,
                s.slots
            )
            .unwrap();
        }
        writeln!(
            out,
            "mean cycle duration {:.3} over {} of {} slaves, {} slots total",
            self.mean_cycle_duration,
            self.reached_count,
            self.node_count - 1,
            self.total_slots
        )
        .unwrap();
        out
    }
}

/// Independent stream for one try of one poll.
pub fn try_rng(seed: u64, cycle: u64, slave: usize, attempt: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&cycle.to_le_bytes());
    key[16..24].copy_from_slice(&(slave as u64).to_le_bytes());
    key[24..].copy_from_slice(&u64::from(attempt).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One DLC1000 try: every forward link, then every reverse link, must deliver.
pub fn sample_dlc_try(
    per: &PerMatrix,
    repeaters: &[usize],
    slave: usize,
    rng: &mut impl Rng,
) -> bool {
    let forward = std::iter::once(MASTER)
        .chain(repeaters.iter().copied())
        .chain(std::iter::once(slave));
    let hops: Vec<usize> = forward.collect();
    let links = hops
        .windows(2)
        .map(|w| (w[0], w[1]))
        .chain(hops.windows(2).rev().map(|w| (w[1], w[0])));
    for (from, to) in links {
        if rng.gen::<f64>() >= per.success(from, to) {
            return false;
        }
    }
    true
}

/// Floods a packet from `origin` for `window` slots. Returns the slot in which
/// `dest` first received it.
///
/// Nodes that first receive in slot `t` retransmit once in slot `t + 1`, as
/// long as that slot is inside the window; `dest` does not forward. A node
/// misses a slot only if every transmitter's link to it fails, with links
/// failing independently.
pub fn sample_flood(
    per: &PerMatrix,
    origin: usize,
    dest: usize,
    window: usize,
    rng: &mut impl Rng,
) -> Option<usize> {
    let n = per.node_count();
    let mut received = vec![false; n];
    received[origin] = true;
    let mut transmitters = vec![origin];
    let mut next = Vec::new();
    for slot in 0..window {
        next.clear();
        for node in 0..n {
            if received[node] {
                continue;
            }
            let miss: f64 = transmitters.iter().map(|&s| per.per(s, node)).product();
            if rng.gen::<f64>() >= miss {
                received[node] = true;
                if node == dest {
                    return Some(slot);
                }
                next.push(node);
            }
        }
        if next.is_empty() {
            return None;
        }
        std::mem::swap(&mut transmitters, &mut next);
    }
    None
}

/// One SFN try with downlink level `r_dl` and uplink level `r_ul`. The slave
/// answers only after the whole downlink window has elapsed.
pub fn sample_sfn_try(
    per: &PerMatrix,
    slave: usize,
    r_dl: usize,
    r_ul: usize,
    rng: &mut impl Rng,
) -> bool {
    sample_flood(per, MASTER, slave, r_dl + 1, rng).is_some()
        && sample_flood(per, slave, MASTER, r_ul + 1, rng).is_some()
}

/// Builds the per-slave poll plans the master would use.
pub fn plan_polls(per: &PerMatrix, cfg: &SimConfig) -> Result<Vec<PollPlan>> {
    let max_level = cfg.effective_max_level(per);
    Ok(match cfg.protocol {
        Protocol::Dlc1000 => dlc::cycle_analysis(per, max_level, cfg.slot_time)?
            .slaves
            .into_iter()
            .map(|s| PollPlan::Dlc1000 {
                repeaters: s.repeaters,
            })
            .collect(),
        Protocol::Sfn => sfn::cycle_analysis(per, cfg.slot_time, max_level)?
            .slaves
            .into_iter()
            .map(|s| PollPlan::Sfn {
                r_dl: s.r_dl,
                r_ul: s.r_ul,
            })
            .collect(),
    })
}

/// Runs one poll; returns `(tries, succeeded)`.
fn run_poll(
    per: &PerMatrix,
    plan: &PollPlan,
    slave: usize,
    cycle: u64,
    cfg: &SimConfig,
) -> (u32, bool) {
    for j in 0..=cfg.max_retries {
        let mut rng = try_rng(cfg.seed, cycle, slave, j);
        let ok = match plan {
            PollPlan::Dlc1000 { repeaters } => sample_dlc_try(per, repeaters, slave, &mut rng),
            PollPlan::Sfn { r_dl, r_ul } => {
                sample_sfn_try(per, slave, r_dl + j as usize, r_ul + j as usize, &mut rng)
            }
        };
        if ok {
            return (j + 1, true);
        }
    }
    (cfg.max_retries + 1, false)
}

/// Simulates `cfg.cycles` polling cycles using the given plans.
pub fn simulate_with_plans(
    per: &PerMatrix,
    plans: &[PollPlan],
    cfg: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    let slaves: Vec<usize> = per.slaves().collect();
    if plans.len() != slaves.len() {
        return Err(Error::InvalidParameter(format!(
            "{} poll plans for {} slaves",
            plans.len(),
            slaves.len()
        )));
    }
    let run_cycle = |cycle: u64| -> Vec<(u32, bool)> {
        slaves
            .iter()
            .zip(plans)
            .map(|(&s, plan)| run_poll(per, plan, s, cycle, cfg))
            .collect()
    };
    let records: Vec<Vec<(u32, bool)>> = if cfg.parallel {
        (0..cfg.cycles).into_par_iter().map(run_cycle).collect()
    } else {
        (0..cfg.cycles).map(run_cycle).collect()
    };

    let mut per_slave: Vec<SlaveStats> = slaves
        .iter()
        .zip(plans)
        .map(|(&slave, plan)| SlaveStats {
            slave,
            plan: plan.clone(),
            attempts: 0,
            successes: 0,
            give_ups: 0,
            slots: 0,
            mean_round_trip_slots: 0.0,
            tries_histogram: vec![0; cfg.max_retries as usize + 1],
        })
        .collect();
    for cycle in &records {
        for (stats, &(tries, ok)) in per_slave.iter_mut().zip(cycle) {
            stats.attempts += u64::from(tries);
            stats.slots += stats.plan.poll_slots(tries);
            stats.tries_histogram[tries as usize - 1] += 1;
            if ok {
                stats.successes += 1;
            } else {
                stats.give_ups += 1;
            }
        }
    }
    for stats in &mut per_slave {
        stats.mean_round_trip_slots = stats.slots as f64 / cfg.cycles as f64;
    }
    let total_slots = per_slave.iter().map(|s| s.slots).sum();
    let reached: Vec<&SlaveStats> = per_slave.iter().filter(|s| s.reached()).collect();
    let reached_slots: u64 = reached.iter().map(|s| s.slots).sum();
    Ok(SimReport {
        protocol: cfg.protocol,
        node_count: per.node_count(),
        cycles: cfg.cycles,
        max_retries: cfg.max_retries,
        max_level: cfg.effective_max_level(per),
        slot_time: cfg.slot_time,
        reached_count: reached.len(),
        mean_cycle_duration: reached_slots as f64 * cfg.slot_time / cfg.cycles as f64,
        per_slave,
        total_slots,
        seed_echo: cfg.seed,
    })
}

pub fn simulate(per: &PerMatrix, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let plans = plan_polls(per, cfg)?;
    simulate_with_plans(per, &plans, cfg)
}

pub fn simulate_dlc(per: &PerMatrix, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.protocol != Protocol::Dlc1000 {
        return Err(Error::InvalidParameter("config is not for DLC1000".into()));
    }
    simulate(per, cfg)
}

pub fn simulate_sfn(per: &PerMatrix, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.protocol != Protocol::Sfn {
        return Err(Error::InvalidParameter("config is not for SFN".into()));
    }
    simulate(per, cfg)
}

/// Empirical distribution of the level at which an escalating downlink first
/// reaches a slave.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelHistogram {
    pub slave: usize,
    pub trials: u64,
    /// `counts[r]` trials first succeeded at level `r`.
    pub counts: Vec<u64>,
    /// Trials with no success up to the horizon.
    pub exhausted: u64,
}

impl LevelHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }
}

/// Repeats the downlink with levels 0, 1, 2, ... up to `horizon` until
/// `slave` receives it, `trials` times.
pub fn level_histogram(
    per: &PerMatrix,
    slave: usize,
    horizon: usize,
    trials: u64,
    seed: u64,
    parallel: bool,
) -> Result<LevelHistogram> {
    if slave == MASTER || slave >= per.node_count() {
        return Err(Error::InvalidParameter(format!("{slave} is not a slave")));
    }
    let one = |trial: u64| -> Option<usize> {
        (0..=horizon).find(|&level| {
            let mut rng = try_rng(seed, trial, slave, level as u32);
            sample_flood(per, MASTER, slave, level + 1, &mut rng).is_some()
        })
    };
    let outcomes: Vec<Option<usize>> = if parallel {
        (0..trials).into_par_iter().map(one).collect()
    } else {
        (0..trials).map(one).collect()
    };
    let mut counts = vec![0u64; horizon + 1];
    let mut exhausted = 0;
    for o in outcomes {
        match o {
            Some(level) => counts[level] += 1,
            None => exhausted += 1,
        }
    }
    Ok(LevelHistogram {
        slave,
        trials,
        counts,
        exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relay_line() -> PerMatrix {
        PerMatrix::new(vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn perfect_pair_costs_two_slots() {
        let m = PerMatrix::uniform(2, 0.0).unwrap();
        for protocol in [Protocol::Dlc1000, Protocol::Sfn] {
            let r = simulate(&m, &SimConfig::new(protocol, 50, 9)).unwrap();
            assert_eq!(r.mean_cycle_duration, 2.0);
            assert_eq!(r.total_slots, 100);
            assert_eq!(r.per_slave[0].attempts, 50);
            assert_eq!(r.reached_count, 1);
        }
    }

    #[test]
    fn dead_link_gives_up_every_cycle() {
        let m = PerMatrix::from_text("0,1\n1,0").unwrap();
        let mut cfg = SimConfig::new(Protocol::Dlc1000, 20, 1);
        cfg.max_level = Some(0);
        let r = simulate_dlc(&m, &cfg).unwrap();
        assert_eq!(r.per_slave[0].give_ups, 20);
        assert_eq!(r.reached_count, 0);
        assert_eq!(r.mean_cycle_duration, 0.0);
        // three tries of two slots each, every cycle
        assert_eq!(r.total_slots, 20 * 3 * 2);
    }

    #[test]
    fn relay_line_polls_in_four_slots() {
        let r = simulate_sfn(&relay_line(), &SimConfig::new(Protocol::Sfn, 100, 4)).unwrap();
        let s = &r.per_slave[1];
        assert_eq!(s.plan, PollPlan::Sfn { r_dl: 1, r_ul: 1 });
        assert_eq!(s.attempts, 100);
        assert_eq!(s.slots, 400);
        assert_eq!(r.mean_cycle_duration, 6.0);
    }

    #[test]
    fn flood_respects_window_and_relays() {
        let m = relay_line();
        let mut rng = try_rng(0, 0, 0, 0);
        assert_eq!(sample_flood(&m, MASTER, 2, 1, &mut rng), None);
        assert_eq!(sample_flood(&m, MASTER, 2, 2, &mut rng), Some(1));
        assert_eq!(sample_flood(&m, 2, MASTER, 2, &mut rng), Some(1));
    }

    #[test]
    fn relay_reaches_second_hop() {
        // 0 -> 1 -> 2 only
        let m = PerMatrix::new(vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let mut rng = try_rng(0, 0, 0, 0);
        assert_eq!(sample_flood(&m, MASTER, 1, 5, &mut rng), Some(0));
        assert_eq!(sample_flood(&m, MASTER, 2, 5, &mut rng), Some(1));
    }

    #[test]
    fn sfn_try_cost_grows_with_retries() {
        let plan = PollPlan::Sfn { r_dl: 1, r_ul: 2 };
        assert_eq!(plan.try_slots(0), 5);
        assert_eq!(plan.try_slots(1), 7);
        assert_eq!(plan.poll_slots(3), 5 + 7 + 9);
        let plan = PollPlan::Dlc1000 {
            repeaters: vec![3, 4],
        };
        assert_eq!(plan.poll_slots(2), 12);
    }

    #[test]
    fn config_validation() {
        let m = PerMatrix::uniform(2, 0.0).unwrap();
        let mut cfg = SimConfig::new(Protocol::Sfn, 0, 1);
        assert!(simulate(&m, &cfg).is_err());
        cfg.cycles = 1;
        cfg.slot_time = 0.0;
        assert!(simulate(&m, &cfg).is_err());
        assert!(simulate_dlc(&m, &SimConfig::new(Protocol::Sfn, 1, 1)).is_err());
        assert!("token-ring".parse::<Protocol>().is_err());
        assert_eq!("DLC1000".parse::<Protocol>().unwrap(), Protocol::Dlc1000);
    }

    #[test]
    fn try_streams_differ() {
        let a: u64 = try_rng(1, 2, 3, 0).gen();
        let b: u64 = try_rng(1, 2, 3, 1).gen();
        let c: u64 = try_rng(1, 2, 3, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn level_histogram_on_relay_line() {
        let h = level_histogram(&relay_line(), 2, 3, 100, 5, false).unwrap();
        assert_eq!(h.counts, vec![0, 100, 0, 0]);
        assert_eq!(h.exhausted, 0);
    }
}
