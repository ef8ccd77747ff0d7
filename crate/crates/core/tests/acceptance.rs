//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported but do not fail `cargo test`; set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

mod common;

use std::time::{Duration, Instant};

use plc_routing::channel::{generate_ring, ChannelSpec, PerMatrix, MASTER};
use plc_routing::metrics::{routing_bits, routing_overhead};
use plc_routing::sim::{self, Protocol, SimConfig};
use plc_routing::{dlc, sfn};

use common::*;

/// Retry cap large enough that no simulated poll gives up, so the simulated
/// mean estimates the same quantity as the unbounded analytic series.
const UNBOUNDED_RETRIES: u32 = 10_000;
const CYCLES: u64 = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn path_oracle() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let n = 3 + (seed as usize % 6);
        let per = random_matrix(n, 1000 + seed);
        for slave in 1..n {
            for level in 0..=3.min(n - 2) {
                let got = dlc::best_path(&per, slave, level).unwrap();
                let want = brute_force_best(&per, slave, level);
                let replay = path_success(&per, &got.repeaters, slave);
                worst = worst
                    .max((got.success_prob - want).abs())
                    .max((replay - want).abs());
                checks += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && within(elapsed, Duration::from_secs(30)),
        format!("{checks} searches, worst gap {worst:.1e}, {elapsed:.2?}"),
    )
}

fn closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    for p in [0.1, 0.3, 0.5, 0.9] {
        for level in 0..4 {
            let closed = dlc::expected_duration(p, level, 1.0).unwrap();
            let series = retry_series(2.0 * (level as f64 + 1.0), p, 10_000);
            worst = worst.max((closed - series).abs());
        }
        for (r_dl, r_ul) in [(0, 0), (1, 2), (3, 3)] {
            let closed = sfn::expected_duration(p, r_dl, r_ul, 1.0).unwrap();
            let series = retry_series((2 + r_dl + r_ul) as f64, p, 10_000);
            worst = worst.max((closed - series).abs());
        }
    }
    outcome(worst <= 1e-9, format!("worst gap {worst:.1e}"))
}

fn ring10() -> PerMatrix {
    generate_ring(10, 0.1, 0.6).unwrap()
}

fn sim_config(protocol: Protocol, max_level: Option<usize>) -> SimConfig {
    let mut cfg = SimConfig::new(protocol, CYCLES, 2024);
    cfg.max_retries = UNBOUNDED_RETRIES;
    cfg.max_level = max_level;
    cfg
}

fn dlc_agreement() -> Outcome {
    let start = Instant::now();
    let per = ring10();
    let analytic = dlc::cycle_analysis(&per, 2, 1.0).unwrap();
    let report = sim::simulate_dlc(&per, &sim_config(Protocol::Dlc1000, Some(2))).unwrap();
    let diff = (analytic.total - report.mean_cycle_duration) / report.mean_cycle_duration;
    let elapsed = start.elapsed();
    outcome(
        diff.abs() <= 0.05 && report.give_ups() == 0 && within(elapsed, Duration::from_secs(60)),
        format!(
            "analytic {:.3}, simulated {:.3}, relative difference {:+.2}%, {elapsed:.2?}",
            analytic.total,
            report.mean_cycle_duration,
            diff * 100.0
        ),
    )
}

fn sfn_agreement() -> Outcome {
    let per = ring10();
    let horizon = sfn::default_horizon(&per);
    let analytic = sfn::cycle_analysis(&per, 1.0, horizon).unwrap();
    let report = sim::simulate_sfn(&per, &sim_config(Protocol::Sfn, None)).unwrap();
    let diff = (analytic.total - report.mean_cycle_duration) / report.mean_cycle_duration;
    let duration_ok = diff.abs() <= 0.15;

    let downlink = sfn::flood(&per, MASTER, 1.0, horizon).unwrap();
    let mut bins = 0;
    let mut misses = Vec::new();
    for slave in per.slaves() {
        let dist = sfn::level_distribution(&downlink, slave).unwrap();
        let hist = sim::level_histogram(&per, slave, horizon, CYCLES, 77, true).unwrap();
        let freq = hist.frequencies();
        for (r, (&p, &f)) in dist.pi.iter().zip(&freq).enumerate() {
            bins += 1;
            let se = (p * (1.0 - p) / CYCLES as f64).sqrt();
            let z = if se > 0.0 {
                (f - p).abs() / se
            } else if f == p {
                0.0
            } else {
                f64::INFINITY
            };
            if z > 3.0 {
                misses.push(format!(
                    "slave {slave} level {r}: pi {p:.4} vs {f:.4} (z {z:.1})"
                ));
            }
        }
    }
    let hist_ok = misses.is_empty();
    let mut detail = format!(
        "analytic {:.3}, simulated {:.3}, relative difference {:+.2}%; {}/{} histogram bins within 3 SE",
        analytic.total,
        report.mean_cycle_duration,
        diff * 100.0,
        bins - misses.len(),
        bins
    );
    if !hist_ok {
        detail.push_str(&format!("; outside: {}", misses.join(", ")));
    }
    outcome(duration_ok && hist_ok && report.give_ups() == 0, detail)
}

fn ordering() -> Outcome {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, spec) in ChannelSpec::defaults() {
        let per = spec.build().unwrap();
        let d = dlc::cycle_analysis(&per, dlc::DEFAULT_MAX_LEVEL, 1.0).unwrap();
        let s = sfn::cycle_analysis(&per, 1.0, sfn::default_horizon(&per)).unwrap();
        let ok = s.is_complete() && s.cycle_duration() < d.cycle_duration() && s.total < d.total;
        pass &= ok;
        rows.push(format!(
            "{name} {:.1} < {:.1}{}",
            s.total,
            d.total,
            if d.is_complete() {
                String::new()
            } else {
                format!(" ({} unreachable)", d.unreachable.len())
            }
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        pass && within(elapsed, Duration::from_secs(120)),
        format!("{}; {elapsed:.2?}", rows.join(", ")),
    )
}

fn overhead() -> Outcome {
    let d = routing_overhead(Protocol::Dlc1000, 64).unwrap();
    let s = routing_overhead(Protocol::Sfn, 64).unwrap();
    let exact = routing_bits(Protocol::Dlc1000) * 64 == 3 * d.packet_bits
        && routing_bits(Protocol::Sfn) * 64 == s.packet_bits
        && d.packet_bits == 512;
    let shown = (
        format!("{:.1}", d.overhead_ratio * 100.0),
        format!("{:.1}", s.overhead_ratio * 100.0),
    );
    outcome(
        exact && shown == ("4.7".into(), "1.6".into()),
        format!(
            "dlc1000 {}/{} = {}%, sfn {}/{} = {}%",
            d.routing_bits_per_packet,
            d.packet_bits,
            shown.0,
            s.routing_bits_per_packet,
            s.packet_bits,
            shown.1
        ),
    )
}

fn line(k: usize) -> PerMatrix {
    // nodes 0..=k on a line, only neighbours hear each other
    let n = k + 1;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j || i.abs_diff(j) == 1 {
                        0.0
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    PerMatrix::new(rows).unwrap()
}

fn flood_properties() -> Outcome {
    const EPS: f64 = 1e-12;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let per = random_matrix(5, 500 + seed);
        for origin in 0..5 {
            let f = sfn::flood(&per, origin, 1.0, 5).unwrap();
            for node in 0..5 {
                let rs: f64 = f.rcv[node].iter().sum();
                let ts: f64 = f.tx[node].iter().sum();
                let mono = f.cumulative[node].windows(2).all(|w| w[1] >= w[0] - EPS);
                if rs > 1.0 + EPS || ts > 1.0 + EPS || !mono {
                    failures.push(format!(
                        "conservation seed {seed} origin {origin} node {node}"
                    ));
                }
            }
            for i in 0..5 {
                for j in 0..5 {
                    if i == j || per.per(i, j) >= 1.0 {
                        continue;
                    }
                    let worse = per.with_link(i, j, (per.per(i, j) + 1.0) / 2.0).unwrap();
                    let g = sfn::flood(&worse, origin, 1.0, 5).unwrap();
                    for node in 0..5 {
                        for r in 0..=5 {
                            if g.cumulative_at(node, r) > f.cumulative_at(node, r) + EPS {
                                failures.push(format!(
                                    "degrading {i}->{j} raised node {node} level {r} (seed {seed} origin {origin})"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    for k in 2..=6 {
        let per = line(k);
        let f = sfn::flood(&per, 0, 1.0, k + 2).unwrap();
        for h in 1..=k {
            for r in 0..f.levels() {
                let want = if r == h - 1 { 1.0 } else { 0.0 };
                if f.rcv_at(h, r) != want {
                    failures.push(format!(
                        "line {k}: hop {h} level {r} got {}",
                        f.rcv_at(h, r)
                    ));
                }
            }
        }
    }
    let n = failures.len();
    failures.truncate(3);
    outcome(
        n == 0,
        if n == 0 {
            "20 seeded 5-node meshes and lines of 2 to 6 hops".to_string()
        } else {
            format!("{n} violations, e.g. {}", failures.join("; "))
        },
    )
}

fn determinism() -> Outcome {
    let mut same = true;
    for spec in [ChannelSpec::ring(10), ChannelSpec::rand_area(20, 20)] {
        let per = spec.build().unwrap();
        for protocol in [Protocol::Dlc1000, Protocol::Sfn] {
            let mut cfg = SimConfig::new(protocol, 2000, 99);
            cfg.parallel = false;
            let serial = sim::simulate(&per, &cfg).unwrap();
            let again = sim::simulate(&per, &cfg).unwrap();
            cfg.parallel = true;
            let parallel = sim::simulate(&per, &cfg).unwrap();
            let bytes = |r: &sim::SimReport| serde_json::to_vec(r).unwrap();
            same &= bytes(&serial) == bytes(&again) && bytes(&serial) == bytes(&parallel);
        }
    }
    outcome(
        same,
        "serial, repeated and parallel reports byte-identical on ring 10 and rand-area 20",
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("path oracle equivalence", path_oracle),
        ("closed-form identities", closed_forms),
        ("DLC1000 analytic vs simulation", dlc_agreement),
        ("SFN analytic vs simulation", sfn_agreement),
        ("protocol ordering", ordering),
        ("overhead exactness", overhead),
        ("flood-profile properties", flood_properties),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
