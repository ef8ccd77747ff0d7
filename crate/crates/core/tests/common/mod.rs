//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use plc_routing::channel::PerMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random PER matrix; roughly one link in eight is perfect and one in eight dead.
pub fn random_matrix(n: usize, seed: u64) -> PerMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    match rng.gen_range(0..8) {
                        0 => 0.0,
                        1 => 1.0,
                        _ => rng.gen::<f64>(),
                    }
                })
                .collect()
        })
        .collect();
    PerMatrix::new(rows).unwrap()
}

fn sequences(relays: &[usize], len: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    for &r in relays {
        if !prefix.contains(&r) {
            prefix.push(r);
            sequences(relays, len, prefix, out);
            prefix.pop();
        }
    }
}

/// Every ordered sequence of `len` distinct relays for `slave`.
pub fn all_paths(n: usize, slave: usize, len: usize) -> Vec<Vec<usize>> {
    let relays: Vec<usize> = (1..n).filter(|&v| v != slave).collect();
    let mut out = Vec::new();
    sequences(&relays, len, &mut Vec::new(), &mut out);
    out
}

/// Request out along the path, confirm back along its reverse.
pub fn path_success(per: &PerMatrix, path: &[usize], slave: usize) -> f64 {
    let mut hops = vec![0];
    hops.extend_from_slice(path);
    hops.push(slave);
    let mut p = 1.0;
    for w in hops.windows(2) {
        p *= 1.0 - per.per(w[0], w[1]);
    }
    for w in hops.windows(2).rev() {
        p *= 1.0 - per.per(w[1], w[0]);
    }
    p
}

pub fn brute_force_best(per: &PerMatrix, slave: usize, len: usize) -> f64 {
    all_paths(per.node_count(), slave, len)
        .iter()
        .map(|p| path_success(per, p, slave))
        .fold(0.0, f64::max)
}

/// Straight transcription of the flood recursion with no early stop.
/// Returns `(tx, rcv)` indexed `[level][node]`.
pub fn flood_oracle(
    per: &PerMatrix,
    origin: usize,
    initial_tx: f64,
    horizon: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = per.node_count();
    let mut tx = vec![vec![0.0; n]; horizon + 1];
    let mut rcv = vec![vec![0.0; n]; horizon + 1];
    for r in 0..=horizon {
        for s in 0..n {
            tx[r][s] = if r == 0 {
                if s == origin {
                    initial_tx
                } else {
                    0.0
                }
            } else {
                let mut sent = 0.0;
                for i in 0..r.saturating_sub(1) {
                    sent += tx[i][s];
                }
                (1.0 - sent) * rcv[r - 1][s]
            };
        }
        for s in 0..n {
            if s == origin {
                continue;
            }
            let mut got = 0.0;
            for v in 0..r {
                got += rcv[v][s];
            }
            let mut miss = 1.0;
            for other in 0..n {
                if other != s {
                    miss *= 1.0 - tx[r][other] * (1.0 - per.per(other, s));
                }
            }
            rcv[r][s] = (1.0 - got) * (1.0 - miss);
        }
    }
    (tx, rcv)
}

/// Retry series for a poll costing `cost` per try, summed over `terms` tries.
pub fn retry_series(cost: f64, p: f64, terms: usize) -> f64 {
    (0..terms)
        .map(|n| (n as f64 + 1.0) * p * (1.0 - p).powi(n as i32))
        .sum::<f64>()
        * cost
}
