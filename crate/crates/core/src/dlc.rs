//! Expected polling-cycle duration under DLC1000 dynamic source routing.
//!
//! The master picks an explicit repeater sequence for every slave; the
//! response retraces the same repeaters in reverse. A poll through `n_R`
//! repeaters occupies `2 (n_R + 1)` slots and succeeds only if every one of
//! the `2 (n_R + 1)` directed links delivers. Failed polls are retried on the
//! same path, so the number of tries is geometric and the expected duration is
//! `2 T_s (n_R + 1) / p`. The master chooses, per slave, the level with the
//! smallest expected duration.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{PerMatrix, MASTER};
use crate::error::{Error, Result};

/// Default cap on the number of repeaters the master may put in a header.
pub const DEFAULT_MAX_LEVEL: usize = 4;

/// Relative slack applied to search bounds so rounding never prunes an optimum.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlcPathResult {
    pub repeaters: Vec<usize>,
    /// Round-trip success probability of one try on this path.
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelOutcome {
    pub level: usize,
    pub repeaters: Vec<usize>,
    pub success_prob: f64,
    /// `None` when the path can never succeed.
    pub expected_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlcSlaveAnalysis {
    pub slave: usize,
    pub best_level: usize,
    pub repeaters: Vec<usize>,
    pub success_prob: f64,
    pub expected_duration: Option<f64>,
    pub per_level: Vec<LevelOutcome>,
}

impl DlcSlaveAnalysis {
    pub fn is_reachable(&self) -> bool {
        self.expected_duration.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlcCycleAnalysis {
    pub slaves: Vec<DlcSlaveAnalysis>,
    /// Sum over reachable slaves only.
    pub total: f64,
    pub unreachable: Vec<usize>,
}

impl DlcCycleAnalysis {
    /// True when every slave can be polled, i.e. `total` is the real cycle duration.
    pub fn is_complete(&self) -> bool {
        self.unreachable.is_empty()
    }

    /// The cycle duration, infinite if any slave is unreachable.
    pub fn cycle_duration(&self) -> f64 {
        if self.is_complete() {
            self.total
        } else {
            f64::INFINITY
        }
    }
}

fn check_path(per: &PerMatrix, repeaters: &[usize], slave: usize) -> Result<()> {
    let n = per.node_count();
    if slave == MASTER || slave >= n {
        return Err(Error::InvalidPath(format!(
            "destination {slave} is not a slave"
        )));
    }
    for (i, &r) in repeaters.iter().enumerate() {
        if r >= n {
            return Err(Error::InvalidPath(format!("repeater {r} out of range")));
        }
        if r == MASTER || r == slave {
            return Err(Error::InvalidPath(format!(
                "repeater {r} is an endpoint of the path"
            )));
        }
        if repeaters[..i].contains(&r) {
            return Err(Error::InvalidPath(format!("repeater {r} appears twice")));
        }
    }
    Ok(())
}

/// Product of the link success probabilities master -> repeaters -> slave and back.
fn path_product(per: &PerMatrix, repeaters: &[usize], slave: usize) -> f64 {
    let mut p = 1.0;
    let mut prev = MASTER;
    for &hop in repeaters.iter().chain(std::iter::once(&slave)) {
        p *= per.success(prev, hop);
        prev = hop;
    }
    for &hop in repeaters.iter().rev().chain(std::iter::once(&MASTER)) {
        p *= per.success(prev, hop);
        prev = hop;
    }
    p
}

/// Probability that one request/confirm exchange through `repeaters` succeeds.
pub fn round_trip_success(per: &PerMatrix, repeaters: &[usize], slave: usize) -> Result<f64> {
    check_path(per, repeaters, slave)?;
    Ok(path_product(per, repeaters, slave))
}

/// Expected time to complete a poll that succeeds with `success_prob` per try
/// and costs `2 (level + 1)` slots per try.
pub fn expected_duration(success_prob: f64, level: usize, slot_time: f64) -> Option<f64> {
    (success_prob > 0.0).then(|| 2.0 * slot_time * (level as f64 + 1.0) / success_prob)
}

/// Best repeater sequence of exactly `level` distinct relays for `slave`.
///
/// Ties go to the lexicographically smallest sequence. When no sequence can
/// succeed, the smallest sequence is returned with probability zero.
pub fn best_path(per: &PerMatrix, slave: usize, level: usize) -> Result<DlcPathResult> {
    let n = per.node_count();
    check_path(per, &[], slave)?;
    if level > n - 2 {
        return Err(Error::InvalidParameter(format!(
            "{level} repeaters requested but only {} relays exist",
            n - 2
        )));
    }
    let relays: Vec<usize> = (1..n).filter(|&v| v != slave).collect();
    let fallback = || DlcPathResult {
        repeaters: relays[..level].to_vec(),
        success_prob: 0.0,
    };
    let found = match level {
        0 => Some(DlcPathResult {
            repeaters: vec![],
            success_prob: path_product(per, &[], slave),
        }),
        1 | 2 => enumerate_short(per, slave, level, &relays),
        _ => PathSearch::new(per, slave, level, relays.clone()).run(),
    };
    Ok(found.unwrap_or_else(fallback))
}

fn enumerate_short(
    per: &PerMatrix,
    slave: usize,
    level: usize,
    relays: &[usize],
) -> Option<DlcPathResult> {
    let mut best: Option<DlcPathResult> = None;
    let mut consider = |repeaters: &[usize]| {
        let p = path_product(per, repeaters, slave);
        if best.as_ref().is_none_or(|b| p > b.success_prob) {
            best = Some(DlcPathResult {
                repeaters: repeaters.to_vec(),
                success_prob: p,
            });
        }
    };
    for &a in relays {
        if level == 1 {
            consider(&[a]);
            continue;
        }
        for &b in relays {
            if a != b {
                consider(&[a, b]);
            }
        }
    }
    best.filter(|b| b.success_prob > 0.0)
}

/// Round-trip weight of the undirected hop `a <-> b`.
#[inline]
fn hop_weight(per: &PerMatrix, a: usize, b: usize) -> f64 {
    per.success(a, b) * per.success(b, a)
}

/// Branch-and-bound over simple repeater sequences.
///
/// `to_slave[k][v]` is the best product of hop weights over walks of exactly
/// `k` hops from `v` to the slave through relays. Walks may revisit nodes, so
/// this bounds every simple completion from above. The walk achieving the
/// overall optimum seeds the incumbent when it happens to be simple.
struct PathSearch<'a> {
    per: &'a PerMatrix,
    slave: usize,
    level: usize,
    relays: Vec<usize>,
    to_slave: Vec<Vec<f64>>,
    best: Option<DlcPathResult>,
}

impl<'a> PathSearch<'a> {
    fn new(per: &'a PerMatrix, slave: usize, level: usize, relays: Vec<usize>) -> Self {
        let n = per.node_count();
        let mut to_slave = vec![vec![0.0; n]; level + 2];
        to_slave[0][slave] = 1.0;
        for k in 1..=level + 1 {
            for v in 0..n {
                to_slave[k][v] = if k == 1 {
                    if v == slave {
                        0.0
                    } else {
                        hop_weight(per, v, slave)
                    }
                } else {
                    relays
                        .iter()
                        .filter(|&&u| u != v)
                        .map(|&u| hop_weight(per, v, u) * to_slave[k - 1][u])
                        .fold(0.0, f64::max)
                };
            }
        }
        Self {
            per,
            slave,
            level,
            relays,
            to_slave,
            best: None,
        }
    }

    /// Reconstructs the optimal walk from the master, preferring smaller indices.
    fn best_walk(&self) -> Vec<usize> {
        let mut walk = Vec::with_capacity(self.level);
        let mut at = MASTER;
        for remaining in (1..=self.level).rev() {
            let mut pick = self.relays[0];
            let mut pick_val = -1.0;
            for &u in &self.relays {
                if u == at {
                    continue;
                }
                let v = hop_weight(self.per, at, u) * self.to_slave[remaining][u];
                if v > pick_val {
                    pick_val = v;
                    pick = u;
                }
            }
            walk.push(pick);
            at = pick;
        }
        walk
    }

    fn offer(&mut self, repeaters: &[usize]) {
        let p = path_product(self.per, repeaters, self.slave);
        let better = match &self.best {
            None => true,
            Some(b) => p > b.success_prob || (p == b.success_prob && repeaters < &b.repeaters[..]),
        };
        if better {
            self.best = Some(DlcPathResult {
                repeaters: repeaters.to_vec(),
                success_prob: p,
            });
        }
    }

    fn run(mut self) -> Option<DlcPathResult> {
        if self.to_slave[self.level + 1][MASTER] == 0.0 {
            return None;
        }
        let walk = self.best_walk();
        let simple = walk.iter().enumerate().all(|(i, v)| !walk[..i].contains(v));
        if simple {
            self.offer(&walk);
        }
        let mut used = vec![false; self.per.node_count()];
        let mut prefix = Vec::with_capacity(self.level);
        self.descend(&mut prefix, &mut used, MASTER, 1.0);
        self.best.filter(|b| b.success_prob > 0.0)
    }

    fn descend(&mut self, prefix: &mut Vec<usize>, used: &mut [bool], at: usize, product: f64) {
        if prefix.len() == self.level {
            self.offer(&prefix.clone());
            return;
        }
        let remaining_hops = self.level - prefix.len();
        for i in 0..self.relays.len() {
            let u = self.relays[i];
            if used[u] {
                continue;
            }
            let next = product * hop_weight(self.per, at, u);
            let bound = next * self.to_slave[remaining_hops][u];
            if bound == 0.0 {
                continue;
            }
            if let Some(b) = &self.best {
                if bound < b.success_prob * (1.0 - BOUND_SLACK) {
                    continue;
                }
            }
            used[u] = true;
            prefix.push(u);
            self.descend(prefix, used, u, next);
            prefix.pop();
            used[u] = false;
        }
    }
}

/// Evaluates every level up to `max_level` and keeps the fastest.
pub fn slave_analysis(
    per: &PerMatrix,
    slave: usize,
    max_level: usize,
    slot_time: f64,
) -> Result<DlcSlaveAnalysis> {
    if !(slot_time > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "slot time must be positive, got {slot_time}"
        )));
    }
    let top = max_level.min(per.node_count() - 2);
    let per_level = (0..=top)
        .map(|level| {
            let path = best_path(per, slave, level)?;
            Ok(LevelOutcome {
                level,
                expected_duration: expected_duration(path.success_prob, level, slot_time),
                repeaters: path.repeaters,
                success_prob: path.success_prob,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = &per_level[0];
    for outcome in &per_level[1..] {
        if let Some(d) = outcome.expected_duration {
            if best.expected_duration.is_none_or(|b| d < b) {
                best = outcome;
            }
        }
    }
    Ok(DlcSlaveAnalysis {
        slave,
        best_level: best.level,
        repeaters: best.repeaters.clone(),
        success_prob: best.success_prob,
        expected_duration: best.expected_duration,
        per_level: per_level.clone(),
    })
}

/// Sum of the per-slave minimum expected durations.
pub fn cycle_analysis(
    per: &PerMatrix,
    max_level: usize,
    slot_time: f64,
) -> Result<DlcCycleAnalysis> {
    let slaves = per
        .slaves()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| slave_analysis(per, s, max_level, slot_time))
        .collect::<Result<Vec<_>>>()?;
    let total = slaves.iter().filter_map(|s| s.expected_duration).sum();
    let unreachable = slaves
        .iter()
        .filter(|s| !s.is_reachable())
        .map(|s| s.slave)
        .collect();
    Ok(DlcCycleAnalysis {
        slaves,
        total,
        unreachable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_ring;

    fn line4() -> PerMatrix {
        // M - A - B - S, only neighbours hear each other
        let mut rows = vec![vec![1.0; 4]; 4];
        for i in 0..4 {
            rows[i][i] = 0.0;
            if i + 1 < 4 {
                rows[i][i + 1] = 0.0;
                rows[i + 1][i] = 0.0;
            }
        }
        PerMatrix::new(rows).unwrap()
    }

    #[test]
    fn direct_round_trip() {
        let m = PerMatrix::from_text("0,0.1\n0.2,0").unwrap();
        let p = round_trip_success(&m, &[], 1).unwrap();
        assert!((p - 0.72).abs() < 1e-15);
    }

    #[test]
    fn one_repeater_round_trip() {
        let m = PerMatrix::uniform(3, 0.1).unwrap();
        let p = round_trip_success(&m, &[1], 2).unwrap();
        assert!((p - 0.9f64.powi(4)).abs() < 1e-15);
        assert!((p - 0.6561).abs() < 1e-12);
    }

    #[test]
    fn dead_link_annihilates() {
        let m = line4();
        assert_eq!(round_trip_success(&m, &[2], 3).unwrap(), 0.0);
        assert_eq!(round_trip_success(&m, &[], 3).unwrap(), 0.0);
    }

    #[test]
    fn invalid_paths() {
        let m = line4();
        assert!(matches!(
            round_trip_success(&m, &[1, 1], 3),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            round_trip_success(&m, &[7], 3),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            round_trip_success(&m, &[0], 3),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            round_trip_success(&m, &[3], 3),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            round_trip_success(&m, &[], 0),
            Err(Error::InvalidPath(_))
        ));
    }

    #[test]
    fn best_path_on_line() {
        let m = line4();
        let r = best_path(&m, 3, 2).unwrap();
        assert_eq!(r.repeaters, vec![1, 2]);
        assert_eq!(r.success_prob, 1.0);

        let r = best_path(&m, 3, 0).unwrap();
        assert!(r.repeaters.is_empty());
        assert_eq!(r.success_prob, 0.0);

        // no one-repeater path exists, smallest candidate is returned
        let r = best_path(&m, 3, 1).unwrap();
        assert_eq!(r.repeaters, vec![1]);
        assert_eq!(r.success_prob, 0.0);
    }

    #[test]
    fn best_path_level_cap() {
        let m = line4();
        assert!(best_path(&m, 3, 3).is_err());
    }

    #[test]
    fn deep_search_on_long_line() {
        // M - 1 - 2 - 3 - 4 - 5 - S(6); only a four-relay path connects
        let n = 7;
        let mut rows = vec![vec![1.0; n]; n];
        for i in 0..n {
            rows[i][i] = 0.0;
            if i + 1 < n && i != 4 {
                rows[i][i + 1] = 0.05;
                rows[i + 1][i] = 0.05;
            }
        }
        // shortcut 3 -> 5 skips node 4
        rows[3][5] = 0.2;
        rows[5][3] = 0.2;
        let m = PerMatrix::new(rows).unwrap();
        let r = best_path(&m, 6, 4).unwrap();
        assert_eq!(r.repeaters, vec![1, 2, 3, 5]);
        let expected = 0.95f64.powi(8) * 0.8f64.powi(2);
        assert!((r.success_prob - expected).abs() < 1e-12);
        assert_eq!(best_path(&m, 6, 3).unwrap().success_prob, 0.0);
    }

    #[test]
    fn duration_arithmetic() {
        assert_eq!(expected_duration(0.5, 0, 1.0), Some(4.0));
        assert_eq!(expected_duration(1.0, 2, 0.5), Some(3.0));
        assert_eq!(expected_duration(0.0, 1, 1.0), None);
    }

    #[test]
    fn unreachable_slave() {
        let m = PerMatrix::from_text("0,1\n1,0").unwrap();
        let a = slave_analysis(&m, 1, 4, 1.0).unwrap();
        assert!(!a.is_reachable());
        assert_eq!(a.best_level, 0);
        let c = cycle_analysis(&m, 4, 1.0).unwrap();
        assert_eq!(c.unreachable, vec![1]);
        assert_eq!(c.total, 0.0);
        assert!(c.cycle_duration().is_infinite());
    }

    #[test]
    fn perfect_channels() {
        let m = PerMatrix::uniform(2, 0.0).unwrap();
        assert_eq!(cycle_analysis(&m, 4, 1.0).unwrap().total, 2.0);
        let m = generate_ring(3, 0.0, 0.0).unwrap();
        let c = cycle_analysis(&m, 4, 1.0).unwrap();
        assert_eq!(c.total, 4.0);
        assert!(c.slaves.iter().all(|s| s.best_level == 0));
    }

    #[test]
    fn level_ties_prefer_fewer_repeaters() {
        // p0 = 0.5 -> 4 slots; p1 = 1.0 -> 4 slots as well
        let m = PerMatrix::new(vec![
            vec![0.0, 0.0, 0.5],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let a = slave_analysis(&m, 2, 1, 1.0).unwrap();
        assert_eq!(a.per_level[0].expected_duration, Some(4.0));
        assert_eq!(a.per_level[1].expected_duration, Some(4.0));
        assert_eq!(a.best_level, 0);
    }

    #[test]
    fn slot_time_must_be_positive() {
        let m = PerMatrix::uniform(2, 0.0).unwrap();
        assert!(slave_analysis(&m, 1, 1, 0.0).is_err());
    }
}
