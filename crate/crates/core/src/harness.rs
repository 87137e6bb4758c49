//! Scenario catalog, report emission and availability sweeps.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{dc_availability, multi_path_availability, path_availability, AvailabilityReport};
use crate::config::{
    BearerConfig, LinkConfig, NodeConfig, ScenarioConfig, ScriptedAction, ScriptedEvent, SubflowSelection, SweepConfig,
    SweepPoint,
};
use crate::error::{ConfigError, HarnessError, RunError};
use crate::link::PhaseDistribution;
use crate::mptcp::{Priority, SchedulerMode, TerminationPoint};
use crate::sim::derive_seed;
use crate::topology::{ArchOption, BearerKind, NodeRole, RadioTech, SplitPoint, WlanAccess};
use crate::trace::{read_trace, CsvTraceWriter, NullSink, TraceRow};
use crate::world::{simulate, PathStats, SnChangeRecord, Totals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub totals: Totals,
    pub analytic: AvailabilityReport,
    pub empirical: AvailabilityReport,
    pub exact: AvailabilityReport,
    pub paths: Vec<PathStats>,
    pub sn_changes: Vec<SnChangeRecord>,
    pub trace_path: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// File stem for a scenario's outputs.
pub fn output_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Runs `cfg`, writing `<out>/<name>.csv` and `<out>/<name>.json`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport, HarnessError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let stem = output_stem(&cfg.name);
    let trace_path = out.join(format!("{stem}.csv"));
    let file = File::create(&trace_path).map_err(io_err(&trace_path))?;
    let mut writer = CsvTraceWriter::new(BufWriter::new(file))?;
    let summary = simulate(cfg, &mut writer)?;
    drop(writer.into_inner()?);

    let file = File::open(&trace_path).map_err(io_err(&trace_path))?;
    let rows = read_trace(BufReader::new(file)).map_err(RunError::from)?;
    cross_check(&summary.totals, &rows, cfg)?;

    let report = RunReport {
        config: cfg.clone(),
        totals: summary.totals,
        analytic: summary.analytic,
        empirical: summary.empirical,
        exact: summary.exact,
        paths: summary.paths,
        sn_changes: summary.sn_changes,
        trace_path,
    };
    let json_path = out.join(format!("{stem}.json"));
    let file = File::create(&json_path).map_err(io_err(&json_path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &report)
        .map_err(|e| RunError::Io { path: json_path.display().to_string(), source: e.into() })?;
    Ok(report)
}

/// Report totals must match the emitted trace to within rounding.
pub fn cross_check(totals: &Totals, rows: &[TraceRow], cfg: &ScenarioConfig) -> Result<(), RunError> {
    let bytes_per_mbps = cfg.sample_interval_s * 1e6 / 8.0;
    let useful: f64 = rows.iter().map(|r| r.throughput_mbps * bytes_per_mbps).sum();
    let redundant: f64 = rows.iter().map(|r| r.redundant_mbps * bytes_per_mbps).sum();
    let tol = rows.len().max(1) as f64;
    for (what, total, traced) in
        [("useful", totals.useful_bytes, useful), ("redundant", totals.redundant_bytes, redundant)]
    {
        if (total as f64 - traced).abs() > tol {
            return Err(RunError::CrossCheck(format!(
                "{what} bytes: report {total}, trace {traced:.1} over {} rows",
                rows.len()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub psi_s: f64,
    pub gamma_s: f64,
    pub theta_single: f64,
    pub theta_dc_analytic: f64,
    pub theta_dc_empirical: f64,
    /// Time-weighted union availability of the same run.
    pub theta_dc_exact: f64,
    /// Mean sample-based availability of the individual links.
    pub theta_single_empirical: f64,
}

/// One Duplicate-mode run per grid point; every access link of the base
/// scenario takes the point's ψ and γ. Points run in parallel.
pub fn run_availability_sweep(base: &ScenarioConfig) -> Result<Vec<SweepRow>, HarnessError> {
    let points = match &base.sweep {
        Some(s) if !s.points.is_empty() => s.points.clone(),
        _ => return Err(ConfigError::new("sweep.points", "sweep needs at least one point").into()),
    };
    base.validate()?;
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut cfg = base.clone();
            cfg.sweep = None;
            cfg.name = format!("{}-{i}", base.name);
            cfg.seed = derive_seed(base.seed, &format!("sweep/{i}"));
            cfg.mptcp.mode = SchedulerMode::Duplicate;
            for l in &mut cfg.links {
                l.psi_s = p.psi_s;
                l.gamma_s = p.gamma_s;
            }
            let s = simulate(&cfg, &mut NullSink)?;
            let theta = path_availability(p.psi_s, p.gamma_s)
                .map_err(|e| ConfigError::new(format!("sweep.points[{i}]"), e.to_string()))?;
            let n = s.empirical.paths.len();
            let thetas = vec![theta; n];
            Ok(SweepRow {
                psi_s: p.psi_s,
                gamma_s: p.gamma_s,
                theta_single: theta,
                theta_dc_analytic: multi_path_availability(&thetas).expect("valid"),
                theta_dc_empirical: s.empirical.theta_dc,
                theta_dc_exact: s.exact.theta_dc,
                theta_single_empirical: s.empirical.paths.iter().map(|p| p.theta).sum::<f64>() / n as f64,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "psi_s,gamma_s,theta_single,theta_dc_analytic,theta_dc_empirical,theta_dc_exact";

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.psi_s, r.gamma_s, r.theta_single, r.theta_dc_analytic, r.theta_dc_empirical, r.theta_dc_exact
        ));
    }
    out
}

/// Closed-form Θ_DC for two identical paths at each Θ.
pub fn analytic_dual_sweep(thetas: &[f64]) -> Vec<(f64, f64)> {
    thetas.iter().map(|&t| (t, dc_availability(t, t).expect("in range"))).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// The published result this scenario is meant to reproduce, in words.
    pub anchor: &'static str,
    /// Runs through `sweep` rather than `run`.
    pub sweep: bool,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "fig5a-sweep",
        description: "Duplicate-mode availability of two independent paths over a grid of single-path availabilities",
        anchor: "availability-vs-single-path-availability curve for single and dual connectivity",
        sweep: true,
    },
    CatalogEntry {
        name: "fig5b-aggregation",
        description: "LTE plus trusted Wi-Fi in aggregation mode; Wi-Fi appears at 5 s and fails at 20 s",
        anchor: "throughput trace, carrier aggregation mode",
        sweep: false,
    },
    CatalogEntry {
        name: "fig5b-backup",
        description: "WiGig regular with Wi-Fi backup; WiGig fails at 8 s and returns at 14 s",
        anchor: "throughput trace, backup mode under non-3GPP access",
        sweep: false,
    },
    CatalogEntry {
        name: "opt3x-scg-split",
        description: "Option 3x SCG split bearer with MPTCP at the serving gateway; NR leg drops out from 6 s to 8 s",
        anchor: "option 3x split bearer with the split at the SN",
        sweep: false,
    },
    CatalogEntry {
        name: "sn-change-atsgw-vs-atmn",
        description: "Same MCG split scenario with MPTCP at the SGW and at the MN; SN change at 5 s",
        anchor: "SN change interruption versus termination point",
        sweep: false,
    },
    CatalogEntry {
        name: "duplicate-reliability",
        description: "Two renewal-process cellular paths (psi 9 s, gamma 1 s) in duplicate mode for 600 s",
        anchor: "dual-path availability, same traffic over both paths",
        sweep: false,
    },
];

pub fn list_scenarios() -> &'static [CatalogEntry] {
    CATALOG
}

fn default_bearer(kind: BearerKind, split: Option<SplitPoint>) -> BearerConfig {
    BearerConfig { id: "default".into(), kind, split_point: split, qos_class: 9 }
}

fn fig5b_aggregation() -> ScenarioConfig {
    let mut c = ScenarioConfig::skeleton("fig5b-aggregation", ArchOption::Opt5);
    c.duration_s = 30.0;
    c.ue.ipv6_prefixes = 2;
    c.ue.carrier_aware_api = true;
    c.nodes.push(NodeConfig::radio("enb", NodeRole::Mn, RadioTech::ELte));
    c.nodes.push(NodeConfig::wlan("ap", RadioTech::WiFi, WlanAccess::Trusted));
    c.links.push(LinkConfig::always_up("lte", "enb", 40.0, 20.0));
    c.links.push(LinkConfig { initially_up: false, ..LinkConfig::always_up("wifi", "ap", 60.0, 5.0) });
    c.bearers.push(default_bearer(BearerKind::Mcg, None));
    c.events.push(ScriptedEvent::link(5.0, ScriptedAction::LinkUp, "wifi"));
    c.events.push(ScriptedEvent::link(20.0, ScriptedAction::LinkDown, "wifi"));
    c
}

fn fig5b_backup() -> ScenarioConfig {
    let mut c = ScenarioConfig::skeleton("fig5b-backup", ArchOption::Opt2);
    c.duration_s = 20.0;
    c.ue.ipv6_prefixes = 2;
    c.ue.carrier_aware_api = true;
    c.nodes.push(NodeConfig::radio("gnb", NodeRole::Mn, RadioTech::Nr));
    c.nodes.push(NodeConfig::wlan("ad", RadioTech::WiGig, WlanAccess::Trusted));
    c.nodes.push(NodeConfig::wlan("ap", RadioTech::WiFi, WlanAccess::Trusted));
    c.links.push(LinkConfig::always_up("nr", "gnb", 50.0, 8.0));
    c.links.push(LinkConfig::always_up("wigig", "ad", 100.0, 2.0));
    c.links.push(LinkConfig::always_up("wifi", "ap", 40.0, 10.0));
    c.bearers.push(default_bearer(BearerKind::Mcg, None));
    c.mptcp.mode = SchedulerMode::Backup;
    c.mptcp.subflows = vec![
        SubflowSelection { link: "wigig".into(), priority: Priority::Regular },
        SubflowSelection { link: "wifi".into(), priority: Priority::Backup },
    ];
    c.events.push(ScriptedEvent::link(8.0, ScriptedAction::LinkDown, "wigig"));
    c.events.push(ScriptedEvent::link(14.0, ScriptedAction::LinkUp, "wigig"));
    c
}

fn dual_cellular(name: &str, option: ArchOption, bearer: BearerConfig) -> ScenarioConfig {
    let mut c = ScenarioConfig::skeleton(name, option);
    c.nodes.push(NodeConfig::radio("enb", NodeRole::Mn, option.anchor_radio()));
    c.nodes.push(NodeConfig::radio("gnb", NodeRole::Sn, option.secondary_radio().expect("dual connectivity")));
    c.links.push(LinkConfig::always_up("lte", "enb", 40.0, 20.0));
    c.links.push(LinkConfig::always_up("nr", "gnb", 100.0, 8.0));
    c.bearers.push(bearer);
    c
}

fn opt3x_scg_split() -> ScenarioConfig {
    let mut c = dual_cellular(
        "opt3x-scg-split",
        ArchOption::Opt3x,
        default_bearer(BearerKind::ScgSplit, Some(SplitPoint::AtSn)),
    );
    c.mptcp.termination = TerminationPoint::AtSgw;
    c.events.push(ScriptedEvent::link(6.0, ScriptedAction::LinkDown, "nr"));
    c.events.push(ScriptedEvent::link(8.0, ScriptedAction::LinkUp, "nr"));
    c
}

/// The SN-change pair: identical except for the termination point.
pub fn sn_change_pair() -> [ScenarioConfig; 2] {
    let base = |term: TerminationPoint, suffix: &str| {
        let mut c = dual_cellular(
            &format!("sn-change-atsgw-vs-atmn-{suffix}"),
            ArchOption::Opt3,
            default_bearer(BearerKind::McgSplit, Some(SplitPoint::AtMn)),
        );
        c.mptcp.termination = term;
        c.mptcp.t_interrupt_ms = 1000.0;
        c.events.push(ScriptedEvent::sn_change(5.0));
        c
    };
    [base(TerminationPoint::AtSgw, "at_sgw"), base(TerminationPoint::AtMn, "at_mn")]
}

fn duplicate_reliability() -> ScenarioConfig {
    let mut c = dual_cellular(
        "duplicate-reliability",
        ArchOption::Opt3,
        default_bearer(BearerKind::McgSplit, Some(SplitPoint::AtMn)),
    );
    c.duration_s = 600.0;
    c.seed = 7;
    c.mptcp.termination = TerminationPoint::AtSgw;
    c.mptcp.mode = SchedulerMode::Duplicate;
    c.mptcp.demand_mbps = Some(1.2);
    for l in &mut c.links {
        l.psi_s = 9.0;
        l.gamma_s = 1.0;
        l.distribution = PhaseDistribution::Exponential;
    }
    c
}

/// Grid of single-path availabilities 0.5 … 0.99 with ψ + γ = 10 s.
pub const FIG5A_POINTS: [(f64, f64); 7] =
    [(5.0, 5.0), (6.0, 4.0), (7.0, 3.0), (8.0, 2.0), (9.0, 1.0), (9.5, 0.5), (9.9, 0.1)];

fn fig5a_sweep() -> ScenarioConfig {
    let mut c = duplicate_reliability();
    c.name = "fig5a-sweep".into();
    c.duration_s = 100_000.0;
    c.mptcp.demand_mbps = Some(0.024);
    c.sweep = Some(SweepConfig {
        points: FIG5A_POINTS.iter().map(|&(psi_s, gamma_s)| SweepPoint { psi_s, gamma_s }).collect(),
    });
    c
}

/// Configurations behind a catalog name; most names have exactly one.
pub fn canned(name: &str) -> Option<Vec<ScenarioConfig>> {
    Some(match name {
        "fig5a-sweep" => vec![fig5a_sweep()],
        "fig5b-aggregation" => vec![fig5b_aggregation()],
        "fig5b-backup" => vec![fig5b_backup()],
        "opt3x-scg-split" => vec![opt3x_scg_split()],
        "sn-change-atsgw-vs-atmn" => sn_change_pair().to_vec(),
        "duplicate-reliability" => vec![duplicate_reliability()],
        _ => return None,
    })
}

/// A catalog name or a path to a TOML scenario file.
pub fn load(arg: &str) -> Result<Vec<ScenarioConfig>, ConfigError> {
    if let Some(c) = canned(arg) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| ConfigError::new(arg, format!("not a canned scenario and not readable: {e}")))?;
    Ok(vec![ScenarioConfig::from_toml_str(&text)?])
}

/// Full validation including topology and connection setup.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    crate::world::prepare(cfg).map(|_| ())
}

/// Per-path samples of a trace, grouped by path id in first-seen order.
pub fn rows_by_path(rows: &[TraceRow]) -> Vec<(String, Vec<&TraceRow>)> {
    let mut out: Vec<(String, Vec<&TraceRow>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(id, _)| *id == r.path_id) {
            Some((_, v)) => v.push(r),
            None => out.push((r.path_id.clone(), vec![r])),
        }
    }
    out
}
