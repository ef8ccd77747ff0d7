//! Expected polling-cycle duration under SFN flooding.
//!
//! In a single frequency network every node that correctly receives a packet
//! retransmits it exactly once, in the next slot, while the repeater level in
//! the header is still positive. Simultaneous transmitters are assumed
//! independent: a node misses the packet in a slot only if every transmitter
//! in that slot fails to reach it.
//!
//! [`flood`] propagates transmit and first-reception probabilities level by
//! level. [`level_distribution`] turns the cumulative reception curve of one
//! node into the distribution of the level at which a master that raises the
//! allowed level by one after every failure first succeeds. [`slave_analysis`]
//! picks downlink and uplink levels around the means of those distributions
//! and minimizes the expected poll duration.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{PerMatrix, MASTER};
use crate::error::{Error, Result};

/// Levels whose total transmit probability falls below this end the flood.
pub const FLOOD_CUTOFF: f64 = 1e-15;

/// Residual mass above which a level distribution is reported as truncated.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

/// Transmit and first-reception probabilities of one flood, indexed
/// `[node][level]`. Level `r` is slot `r` after the origin's transmission.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloodProfile {
    pub origin: usize,
    pub initial_tx: f64,
    /// Highest level requested.
    pub horizon: usize,
    pub tx: Vec<Vec<f64>>,
    pub rcv: Vec<Vec<f64>>,
    pub cumulative: Vec<Vec<f64>>,
}

impl FloodProfile {
    /// Number of levels actually computed; later levels carry no probability.
    pub fn levels(&self) -> usize {
        self.rcv[0].len()
    }

    pub fn rcv_at(&self, node: usize, level: usize) -> f64 {
        self.rcv[node].get(level).copied().unwrap_or(0.0)
    }

    pub fn tx_at(&self, node: usize, level: usize) -> f64 {
        self.tx[node].get(level).copied().unwrap_or(0.0)
    }

    /// Probability that `node` has received the packet by `level`.
    pub fn cumulative_at(&self, node: usize, level: usize) -> f64 {
        let row = &self.cumulative[node];
        row[level.min(row.len() - 1)]
    }
}

/// Floods a packet from `origin`, which transmits at level 0 with probability
/// `initial_tx`.
pub fn flood(
    per: &PerMatrix,
    origin: usize,
    initial_tx: f64,
    horizon: usize,
) -> Result<FloodProfile> {
    let n = per.node_count();
    if origin >= n {
        return Err(Error::InvalidParameter(format!(
            "origin {origin} out of range"
        )));
    }
    if !(initial_tx > 0.0 && initial_tx <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "initial transmit probability must be in (0, 1], got {initial_tx}"
        )));
    }
    let mut tx: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon + 1); n];
    let mut rcv: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon + 1); n];
    let mut tx_sum = vec![0.0; n];
    let mut rcv_sum = vec![0.0; n];
    let mut active: Vec<(usize, f64)> = Vec::with_capacity(n);

    for level in 0..=horizon {
        active.clear();
        for node in 0..n {
            let p = if level == 0 {
                if node == origin {
                    initial_tx
                } else {
                    0.0
                }
            } else {
                // levels 0..=level-2 only
                let earlier: f64 = tx[node][..level - 1].iter().sum();
                (1.0 - earlier) * rcv[node][level - 1]
            };
            tx[node].push(p);
            tx_sum[node] += p;
            if p > 0.0 {
                active.push((node, p));
            }
        }
        if level > 0 && active.iter().map(|&(_, p)| p).sum::<f64>() < FLOOD_CUTOFF {
            for node in 0..n {
                tx[node].pop();
            }
            break;
        }
        for node in 0..n {
            let p = if node == origin {
                0.0
            } else {
                let all_fail: f64 = active
                    .iter()
                    .filter(|&&(s, _)| s != node)
                    .map(|&(s, p)| 1.0 - p * per.success(s, node))
                    .product();
                (1.0 - rcv_sum[node]) * (1.0 - all_fail)
            };
            rcv[node].push(p);
            rcv_sum[node] += p;
        }
    }

    let cumulative = rcv
        .iter()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    debug_assert!(tx_sum.iter().all(|&s| s <= 1.0 + 1e-12));
    Ok(FloodProfile {
        origin,
        initial_tx,
        horizon,
        tx,
        rcv,
        cumulative,
    })
}

/// Distribution of the level at which the first successful attempt happens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDistribution {
    pub pi: Vec<f64>,
    /// Mean over the normalized `pi`.
    pub mean_level: f64,
    /// Probability that no attempt up to the horizon succeeds.
    pub truncated_mass: f64,
    /// Set when `truncated_mass` is too large for the mean to be trusted.
    pub truncated: bool,
    pub reachable: bool,
}

impl LevelDistribution {
    /// Builds the distribution from per-attempt success probabilities, where
    /// the attempt at level `r` succeeds with `success(r)` and the level rises
    /// by one after each failure.
    pub fn from_attempts(horizon: usize, success: impl Fn(usize) -> f64) -> Self {
        let mut pi = Vec::with_capacity(horizon + 1);
        let mut still_failing = 1.0;
        for r in 0..=horizon {
            let q = success(r);
            pi.push(still_failing * q);
            still_failing *= 1.0 - q;
        }
        let mass: f64 = pi.iter().sum();
        let reachable = mass > 0.0;
        let mean_level = if reachable {
            pi.iter()
                .enumerate()
                .map(|(r, p)| r as f64 * p)
                .sum::<f64>()
                / mass
        } else {
            0.0
        };
        Self {
            pi,
            mean_level,
            truncated_mass: still_failing,
            truncated: still_failing >= TRUNCATION_TOLERANCE,
            reachable,
        }
    }

    /// The two levels bracketing the mean (one when the mean is integral).
    pub fn candidate_levels(&self) -> Vec<usize> {
        let lo = self.mean_level.floor() as usize;
        let hi = self.mean_level.ceil() as usize;
        if lo == hi {
            vec![lo]
        } else {
            vec![lo, hi]
        }
    }
}

/// First-success level distribution of `target` in `profile`, up to the
/// profile's horizon.
pub fn level_distribution(profile: &FloodProfile, target: usize) -> Result<LevelDistribution> {
    if target == profile.origin || target >= profile.cumulative.len() {
        return Err(Error::InvalidParameter(format!(
            "target {target} must be a node other than the origin {}",
            profile.origin
        )));
    }
    Ok(LevelDistribution::from_attempts(profile.horizon, |r| {
        profile.cumulative_at(target, r)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfnCandidate {
    pub r_dl: usize,
    pub r_ul: usize,
    pub poll_success: f64,
    pub expected_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfnSlaveAnalysis {
    pub slave: usize,
    pub r_dl: usize,
    pub r_ul: usize,
    pub poll_success: f64,
    pub expected_duration: Option<f64>,
    pub downlink_mean: f64,
    pub uplink_mean: f64,
    pub candidates: Vec<SfnCandidate>,
}

impl SfnSlaveAnalysis {
    pub fn is_reachable(&self) -> bool {
        self.expected_duration.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfnCycleAnalysis {
    pub slaves: Vec<SfnSlaveAnalysis>,
    /// Sum over reachable slaves only.
    pub total: f64,
    pub unreachable: Vec<usize>,
}

impl SfnCycleAnalysis {
    pub fn is_complete(&self) -> bool {
        self.unreachable.is_empty()
    }

    pub fn cycle_duration(&self) -> f64 {
        if self.is_complete() {
            self.total
        } else {
            f64::INFINITY
        }
    }
}

/// Expected poll duration for levels `(r_dl, r_ul)` and per-poll success
/// probability `poll_success`.
pub fn expected_duration(
    poll_success: f64,
    r_dl: usize,
    r_ul: usize,
    slot_time: f64,
) -> Option<f64> {
    (poll_success > 0.0).then(|| (2 + r_dl + r_ul) as f64 * slot_time / poll_success)
}

/// Default horizon: one level per node.
pub fn default_horizon(per: &PerMatrix) -> usize {
    per.node_count()
}

/// Response flood of `slave`, conditioned on the slave holding the request.
pub fn uplink_flood(per: &PerMatrix, slave: usize, horizon: usize) -> Result<FloodProfile> {
    flood(per, slave, 1.0, horizon)
}

/// Probability that one poll of `slave` with levels `(r_dl, r_ul)` completes:
/// the request reaches the slave within `r_dl`, then the response reaches the
/// master within `r_ul`.
pub fn poll_success(
    downlink: &FloodProfile,
    uplink: &FloodProfile,
    r_dl: usize,
    r_ul: usize,
) -> f64 {
    downlink.cumulative_at(uplink.origin, r_dl) * uplink.cumulative_at(downlink.origin, r_ul)
}

fn check_params(per: &PerMatrix, slave: usize, slot_time: f64) -> Result<()> {
    if slave == MASTER || slave >= per.node_count() {
        return Err(Error::InvalidParameter(format!("{slave} is not a slave")));
    }
    if !(slot_time > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "slot time must be positive, got {slot_time}"
        )));
    }
    Ok(())
}

/// Like [`slave_analysis`] but reuses a precomputed master flood.
pub fn slave_analysis_with(
    per: &PerMatrix,
    downlink: &FloodProfile,
    slave: usize,
    slot_time: f64,
) -> Result<SfnSlaveAnalysis> {
    check_params(per, slave, slot_time)?;
    let horizon = downlink.horizon;
    let dl_dist = level_distribution(downlink, slave)?;
    let uplink = uplink_flood(per, slave, horizon)?;
    let ul_dist = level_distribution(&uplink, MASTER)?;
    let mut candidates = Vec::with_capacity(4);
    for r_dl in dl_dist.candidate_levels() {
        for r_ul in ul_dist.candidate_levels() {
            let p = poll_success(downlink, &uplink, r_dl, r_ul);
            candidates.push(SfnCandidate {
                r_dl,
                r_ul,
                poll_success: p,
                expected_duration: expected_duration(p, r_dl, r_ul, slot_time),
            });
        }
    }

    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if let Some(d) = c.expected_duration {
            if best.expected_duration.is_none_or(|b| d < b) {
                best = c;
            }
        }
    }
    Ok(SfnSlaveAnalysis {
        slave,
        r_dl: best.r_dl,
        r_ul: best.r_ul,
        poll_success: best.poll_success,
        expected_duration: best.expected_duration,
        downlink_mean: dl_dist.mean_level,
        uplink_mean: ul_dist.mean_level,
        candidates: candidates.clone(),
    })
}

/// Chooses downlink and uplink levels for `slave` and evaluates the poll.
pub fn slave_analysis(
    per: &PerMatrix,
    slave: usize,
    slot_time: f64,
    horizon: usize,
) -> Result<SfnSlaveAnalysis> {
    check_params(per, slave, slot_time)?;
    let downlink = flood(per, MASTER, 1.0, horizon)?;
    slave_analysis_with(per, &downlink, slave, slot_time)
}

/// Sum of per-slave minimum expected durations.
pub fn cycle_analysis(per: &PerMatrix, slot_time: f64, horizon: usize) -> Result<SfnCycleAnalysis> {
    let downlink = flood(per, MASTER, 1.0, horizon)?;
    let slaves = per
        .slaves()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| slave_analysis_with(per, &downlink, s, slot_time))
        .collect::<Result<Vec<_>>>()?;
    let total = slaves.iter().filter_map(|s| s.expected_duration).sum();
    let unreachable = slaves
        .iter()
        .filter(|s| !s.is_reachable())
        .map(|s| s.slave)
        .collect();
    Ok(SfnCycleAnalysis {
        slaves,
        total,
        unreachable,
    })
}
