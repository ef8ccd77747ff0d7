//! Result documents and the tables rendered from them.
//!
//! Text tables round for readability; JSON documents carry every number at
//! full precision.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::PerMatrix;
use crate::dlc::{self, DlcCycleAnalysis};
use crate::error::Result;
use crate::metrics::{self, OverheadReport};
use crate::sfn::{self, SfnCycleAnalysis};
use crate::sim::{self, Protocol, SimConfig, SimReport};

/// `(analytic - simulated) / simulated`, negative when the simulation is slower.
pub fn relative_difference(analytic: f64, simulated: f64) -> Option<f64> {
    (simulated > 0.0 && analytic.is_finite()).then(|| (analytic - simulated) / simulated)
}

fn fmt_duration(total: f64, unreachable: usize, slaves: usize) -> String {
    if unreachable == 0 {
        format!("{total:.1}")
    } else {
        format!("{total:.1} ({} slaves)", slaves - unreachable)
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "inf".to_string(), |v| format!("{v:.prec$}"))
}

fn csv_row<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

/// Rows may differ in width: several tables share one output.
fn write_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv of utf-8 cells")
}

fn fmt_percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:+.1}%", v * 100.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisDoc {
    pub node_count: usize,
    pub slot_time: f64,
    pub max_level: usize,
    pub horizon: usize,
    pub dlc1000: Option<DlcCycleAnalysis>,
    pub sfn: Option<SfnCycleAnalysis>,
}

impl AnalysisDoc {
    pub fn compute(
        per: &PerMatrix,
        protocols: &[Protocol],
        max_level: usize,
        horizon: usize,
        slot_time: f64,
    ) -> Result<Self> {
        let dlc1000 = protocols
            .contains(&Protocol::Dlc1000)
            .then(|| dlc::cycle_analysis(per, max_level, slot_time))
            .transpose()?;
        let sfn = protocols
            .contains(&Protocol::Sfn)
            .then(|| sfn::cycle_analysis(per, slot_time, horizon))
            .transpose()?;
        Ok(Self {
            node_count: per.node_count(),
            slot_time,
            max_level,
            horizon,
            dlc1000,
            sfn,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let slaves = self.node_count - 1;
        if let Some(d) = &self.dlc1000 {
            writeln!(out, "DLC1000 (max repeater number {})", self.max_level).unwrap();
            writeln!(
                out,
                "{:>6} {:>6} {:>16} {:>10} {:>12}",
                "slave", "n_R", "repeaters", "p", "duration"
            )
            .unwrap();
            for s in &d.slaves {
                let path = s
                    .repeaters
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join("-");
                writeln!(
                    out,
                    "{:>6} {:>6} {:>16} {:>10.4} {:>12}",
                    s.slave,
                    s.best_level,
                    if path.is_empty() {
                        "direct".into()
                    } else {
                        path
                    },
                    s.success_prob,
                    fmt_opt(s.expected_duration, 3)
                )
                .unwrap();
            }
            writeln!(
                out,
                "total {}",
                fmt_duration(d.total, d.unreachable.len(), slaves)
            )
            .unwrap();
            if !d.unreachable.is_empty() {
                writeln!(out, "unreachable {:?}", d.unreachable).unwrap();
            }
            writeln!(out).unwrap();
        }
        if let Some(s) = &self.sfn {
            writeln!(out, "SFN (horizon {})", self.horizon).unwrap();
            writeln!(
                out,
                "{:>6} {:>6} {:>6} {:>10} {:>12}",
                "slave", "r_dl", "r_ul", "Pr(s)", "duration"
            )
            .unwrap();
            for a in &s.slaves {
                writeln!(
                    out,
                    "{:>6} {:>6} {:>6} {:>10.4} {:>12}",
                    a.slave,
                    a.r_dl,
                    a.r_ul,
                    a.poll_success,
                    fmt_opt(a.expected_duration, 3)
                )
                .unwrap();
            }
            writeln!(
                out,
                "total {}",
                fmt_duration(s.total, s.unreachable.len(), slaves)
            )
            .unwrap();
            if !s.unreachable.is_empty() {
                writeln!(out, "unreachable {:?}", s.unreachable).unwrap();
            }
            writeln!(out).unwrap();
        }
        if let (Some(d), Some(s)) = (&self.dlc1000, &self.sfn) {
            writeln!(out, "Average polling cycle duration").unwrap();
            writeln!(out, "{:>20} {:>20}", "SFN", "DLC1000").unwrap();
            writeln!(
                out,
                "{:>20} {:>20}",
                fmt_duration(s.total, s.unreachable.len(), slaves),
                fmt_duration(d.total, d.unreachable.len(), slaves)
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let dur = |d: Option<f64>| d.map_or_else(|| "inf".to_string(), |d| d.to_string());
        let mut rows = vec![csv_row([
            "protocol",
            "slave",
            "level_dl",
            "level_ul",
            "success_prob",
            "expected_duration",
        ])];
        if let Some(d) = &self.dlc1000 {
            for s in &d.slaves {
                let level = s.best_level.to_string();
                rows.push(vec![
                    "dlc1000".into(),
                    s.slave.to_string(),
                    level.clone(),
                    level,
                    s.success_prob.to_string(),
                    dur(s.expected_duration),
                ]);
            }
            rows.push(csv_row([
                "dlc1000",
                "total",
                "",
                "",
                "",
                &d.total.to_string(),
            ]));
        }
        if let Some(s) = &self.sfn {
            for a in &s.slaves {
                rows.push(vec![
                    "sfn".into(),
                    a.slave.to_string(),
                    a.r_dl.to_string(),
                    a.r_ul.to_string(),
                    a.poll_success.to_string(),
                    dur(a.expected_duration),
                ]);
            }
            rows.push(csv_row(["sfn", "total", "", "", "", &s.total.to_string()]));
        }
        write_csv(rows)
    }
}

/// A simulation together with the analytic figure it is checked against.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationDoc {
    pub config: SimConfig,
    pub analytic_total: f64,
    pub analytic_unreachable: Vec<usize>,
    pub relative_difference: Option<f64>,
    pub report: SimReport,
}

impl SimulationDoc {
    pub fn run(per: &PerMatrix, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let max_level = cfg.effective_max_level(per);
        let (analytic_total, analytic_unreachable, plans) = match cfg.protocol {
            Protocol::Dlc1000 => {
                let a = dlc::cycle_analysis(per, max_level, cfg.slot_time)?;
                let plans = a
                    .slaves
                    .iter()
                    .map(|s| sim::PollPlan::Dlc1000 {
                        repeaters: s.repeaters.clone(),
                    })
                    .collect::<Vec<_>>();
                (a.total, a.unreachable, plans)
            }
            Protocol::Sfn => {
                let a = sfn::cycle_analysis(per, cfg.slot_time, max_level)?;
                let plans = a
                    .slaves
                    .iter()
                    .map(|s| sim::PollPlan::Sfn {
                        r_dl: s.r_dl,
                        r_ul: s.r_ul,
                    })
                    .collect::<Vec<_>>();
                (a.total, a.unreachable, plans)
            }
        };
        let report = sim::simulate_with_plans(per, &plans, cfg)?;
        Ok(Self {
            config: cfg.clone(),
            relative_difference: relative_difference(analytic_total, report.mean_cycle_duration),
            analytic_total,
            analytic_unreachable,
            report,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = self.report.to_table();
        let slaves = self.report.node_count - 1;
        writeln!(
            out,
            "analytic {}  simulated {:.2} ({} slaves)  relative difference {}",
            fmt_duration(self.analytic_total, self.analytic_unreachable.len(), slaves),
            self.report.mean_cycle_duration,
            self.report.reached_count,
            fmt_percent(self.relative_difference)
        )
        .unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let r = &self.report;
        let mut rows = vec![
            csv_row([
                "protocol",
                "cycles",
                "seed",
                "analytic_total",
                "simulated_mean",
                "reached",
                "relative_difference",
                "total_slots",
            ]),
            vec![
                r.protocol.name().into(),
                r.cycles.to_string(),
                r.seed_echo.to_string(),
                self.analytic_total.to_string(),
                r.mean_cycle_duration.to_string(),
                r.reached_count.to_string(),
                self.relative_difference
                    .map_or(String::new(), |v| v.to_string()),
                r.total_slots.to_string(),
            ],
            csv_row([
                "slave",
                "attempts",
                "successes",
                "give_ups",
                "slots",
                "mean_round_trip_slots",
            ]),
        ];
        for s in &r.per_slave {
            rows.push(vec![
                s.slave.to_string(),
                s.attempts.to_string(),
                s.successes.to_string(),
                s.give_ups.to_string(),
                s.slots.to_string(),
                s.mean_round_trip_slots.to_string(),
            ]);
        }
        write_csv(rows)
    }
}

/// Analytic and simulated figures for one protocol on one model.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRow {
    /// Most repeaters any poll uses (DLC1000: the configured cap).
    pub max_repeater_number: usize,
    pub analytic_total: f64,
    pub analytic_unreachable: usize,
    pub simulated_mean: f64,
    pub simulated_reached: usize,
    pub relative_difference: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelRow {
    pub name: String,
    pub node_count: usize,
    pub dlc1000: ProtocolRow,
    pub sfn: ProtocolRow,
    pub dlc_signaling_bits_per_cycle: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSettings {
    pub max_level: usize,
    pub horizon: Option<usize>,
    pub slot_time: f64,
    pub cycles: u64,
    pub max_retries: u32,
    pub seed: u64,
    pub packet_bytes: u32,
    pub address_bits: u32,
    pub quality_bits: u32,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            max_level: dlc::DEFAULT_MAX_LEVEL,
            horizon: None,
            slot_time: 1.0,
            cycles: 1000,
            max_retries: sim::DEFAULT_MAX_RETRIES,
            seed: 1,
            packet_bytes: metrics::DEFAULT_PACKET_BYTES,
            address_bits: metrics::DLC_ADDRESS_BITS,
            quality_bits: metrics::DEFAULT_QUALITY_BITS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelOutcome {
    pub name: String,
    #[serde(flatten)]
    pub row: Option<ModelRow>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonDoc {
    pub settings: CompareSettings,
    pub models: Vec<ModelOutcome>,
    pub overhead: Vec<OverheadReport>,
}

fn compare_one(name: &str, per: &PerMatrix, st: &CompareSettings) -> Result<ModelRow> {
    let horizon = st.horizon.unwrap_or_else(|| sfn::default_horizon(per));
    let mut dlc_cfg = SimConfig::new(Protocol::Dlc1000, st.cycles, st.seed);
    dlc_cfg.max_retries = st.max_retries;
    dlc_cfg.max_level = Some(st.max_level);
    dlc_cfg.slot_time = st.slot_time;
    let mut sfn_cfg = dlc_cfg.clone();
    sfn_cfg.protocol = Protocol::Sfn;
    sfn_cfg.max_level = Some(horizon);

    let dlc_doc = SimulationDoc::run(per, &dlc_cfg)?;
    let sfn_doc = SimulationDoc::run(per, &sfn_cfg)?;
    let sfn_max = sfn_doc
        .report
        .per_slave
        .iter()
        .map(|s| match s.plan {
            sim::PollPlan::Sfn { r_dl, r_ul } => r_dl.max(r_ul),
            sim::PollPlan::Dlc1000 { .. } => 0,
        })
        .max()
        .unwrap_or(0);
    let row = |doc: &SimulationDoc, max_repeater_number| ProtocolRow {
        max_repeater_number,
        analytic_total: doc.analytic_total,
        analytic_unreachable: doc.analytic_unreachable.len(),
        simulated_mean: doc.report.mean_cycle_duration,
        simulated_reached: doc.report.reached_count,
        relative_difference: doc.relative_difference,
    };
    Ok(ModelRow {
        name: name.to_string(),
        node_count: per.node_count(),
        dlc1000: row(&dlc_doc, st.max_level),
        sfn: row(&sfn_doc, sfn_max),
        dlc_signaling_bits_per_cycle: metrics::signaling_volume(
            Protocol::Dlc1000,
            per.node_count(),
            st.address_bits,
            st.quality_bits,
        )?,
    })
}

impl ComparisonDoc {
    /// Runs both analyses and both simulations on every model. A model that
    /// fails to load or evaluate becomes a failure row; the rest still run.
    pub fn compute(
        models: Vec<(String, Result<PerMatrix>)>,
        settings: CompareSettings,
    ) -> Result<Self> {
        let outcomes = models
            .into_par_iter()
            .map(
                |(name, per)| match per.and_then(|m| compare_one(&name, &m, &settings)) {
                    Ok(row) => ModelOutcome {
                        name,
                        row: Some(row),
                        error: None,
                    },
                    Err(e) => ModelOutcome {
                        name,
                        row: None,
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect();
        let overhead = [Protocol::Dlc1000, Protocol::Sfn]
            .into_iter()
            .map(|p| {
                let mut r = metrics::routing_overhead(p, settings.packet_bytes)?;
                r.signaling_bits_per_poll_response = metrics::response_signaling_bits(
                    p,
                    settings.address_bits,
                    settings.quality_bits,
                );
                r.quality_bits = settings.quality_bits;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            settings,
            models: outcomes,
            overhead,
        })
    }

    pub fn failures(&self) -> usize {
        self.models.iter().filter(|m| m.error.is_some()).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (title, pick) in [
            ("Analytic and simulation results of DLC1000", true),
            ("Analytic and simulation results of SFN", false),
        ] {
            writeln!(out, "{title}").unwrap();
            writeln!(
                out,
                "{:<16} {:>10} {:>22} {:>22} {:>12}",
                "Channel model", "Max rep.", "Analytic", "Simulation", "Rel. diff"
            )
            .unwrap();
            for m in &self.models {
                let Some(row) = &m.row else {
                    writeln!(
                        out,
                        "{:<16} failed: {}",
                        m.name,
                        m.error.as_deref().unwrap_or("")
                    )
                    .unwrap();
                    continue;
                };
                let p = if pick { &row.dlc1000 } else { &row.sfn };
                let slaves = row.node_count - 1;
                let sim = if p.simulated_reached == slaves {
                    format!("{:.2}", p.simulated_mean)
                } else {
                    format!("{:.2} ({} slaves)", p.simulated_mean, p.simulated_reached)
                };
                writeln!(
                    out,
                    "{:<16} {:>10} {:>22} {:>22} {:>12}",
                    m.name,
                    p.max_repeater_number,
                    fmt_duration(p.analytic_total, p.analytic_unreachable, slaves),
                    sim,
                    fmt_percent(p.relative_difference)
                )
                .unwrap();
            }
            writeln!(out).unwrap();
        }

        writeln!(out, "Average duration of SFN and DLC1000").unwrap();
        writeln!(
            out,
            "{:<16} {:>22} {:>22}",
            "Channel model", "SFN", "DLC1000"
        )
        .unwrap();
        for m in &self.models {
            let Some(row) = &m.row else {
                writeln!(out, "{:<16} failed", m.name).unwrap();
                continue;
            };
            let slaves = row.node_count - 1;
            writeln!(
                out,
                "{:<16} {:>22} {:>22}",
                m.name,
                fmt_duration(row.sfn.analytic_total, row.sfn.analytic_unreachable, slaves),
                fmt_duration(
                    row.dlc1000.analytic_total,
                    row.dlc1000.analytic_unreachable,
                    slaves
                )
            )
            .unwrap();
        }
        writeln!(out).unwrap();

        writeln!(
            out,
            "Routing overhead ({}-byte packets)",
            self.settings.packet_bytes
        )
        .unwrap();
        writeln!(
            out,
            "{:<10} {:>14} {:>22} {:>26}",
            "Protocol", "Routing bits", "Routing bits / packet", "Signaling bits / response"
        )
        .unwrap();
        for o in &self.overhead {
            writeln!(
                out,
                "{:<10} {:>14} {:>21.1}% {:>26}",
                o.protocol.name(),
                o.routing_bits_per_packet,
                o.overhead_ratio * 100.0,
                o.signaling_bits_per_poll_response
            )
            .unwrap();
        }
        writeln!(
            out,
            "(signaling assumes {}-bit addresses and {}-bit channel quality, one report per response)",
            self.settings.address_bits, self.settings.quality_bits
        )
        .unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let mut rows = vec![csv_row([
            "model",
            "nodes",
            "protocol",
            "max_repeater_number",
            "analytic_total",
            "analytic_unreachable",
            "simulated_mean",
            "simulated_reached",
            "relative_difference",
            "error",
        ])];
        for m in &self.models {
            match &m.row {
                Some(row) => {
                    for (name, p) in [("dlc1000", &row.dlc1000), ("sfn", &row.sfn)] {
                        rows.push(vec![
                            m.name.clone(),
                            row.node_count.to_string(),
                            name.into(),
                            p.max_repeater_number.to_string(),
                            p.analytic_total.to_string(),
                            p.analytic_unreachable.to_string(),
                            p.simulated_mean.to_string(),
                            p.simulated_reached.to_string(),
                            p.relative_difference
                                .map_or(String::new(), |v| v.to_string()),
                            String::new(),
                        ]);
                    }
                }
                None => {
                    let mut row = vec![String::new(); 10];
                    row[0] = m.name.clone();
                    row[9] = m.error.clone().unwrap_or_default();
                    rows.push(row);
                }
            }
        }
        rows.push(csv_row([
            "protocol",
            "routing_bits",
            "packet_bits",
            "overhead_ratio",
            "signaling_bits_per_response",
        ]));
        for o in &self.overhead {
            rows.push(vec![
                o.protocol.name().into(),
                o.routing_bits_per_packet.to_string(),
                o.packet_bits.to_string(),
                o.overhead_ratio.to_string(),
                o.signaling_bits_per_poll_response.to_string(),
            ]);
        }
        write_csv(rows)
    }
}
