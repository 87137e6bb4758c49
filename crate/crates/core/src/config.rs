//! Scenario configuration files.
//!
//! Scenarios are TOML documents. Parsing is strict (unknown keys are
//! rejected) and every validation failure names the offending field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::link::{LinkAvailabilityParams, PhaseDistribution};
use crate::mptcp::{Priority, SchedulerMode, TerminationPoint};
use crate::sim::SimTime;
use crate::topology::{ArchOption, BearerKind, CoreDelays, NodeRole, RadioTech, SplitPoint, WlanAccess};

pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 0.5;

fn default_sample_interval() -> f64 {
    DEFAULT_SAMPLE_INTERVAL_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub arch_option: ArchOption,
    pub duration_s: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval_s: f64,
    #[serde(default)]
    pub ue: UeConfig,
    #[serde(default)]
    pub core: CoreDelays,
    pub mptcp: MptcpConfig,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
    pub bearers: Vec<BearerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ScriptedEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UeConfig {
    /// Independently routable IPv6 prefixes over the PDN connection.
    pub ipv6_prefixes: u8,
    /// The UE exposes its carriers to upper layers (multipath-aware API).
    pub carrier_aware_api: bool,
}

impl Default for UeConfig {
    fn default() -> Self {
        Self { ipv6_prefixes: 1, carrier_aware_api: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub role: NodeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio: Option<RadioTech>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wlan: Option<WlanAccess>,
}

impl NodeConfig {
    pub fn plain(id: &str, role: NodeRole) -> Self {
        Self { id: id.to_owned(), role, radio: None, wlan: None }
    }

    pub fn radio(id: &str, role: NodeRole, radio: RadioTech) -> Self {
        Self { radio: Some(radio), ..Self::plain(id, role) }
    }

    pub fn wlan(id: &str, radio: RadioTech, access: WlanAccess) -> Self {
        Self { radio: Some(radio), wlan: Some(access), ..Self::plain(id, NodeRole::WlanTermination) }
    }
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub id: String,
    /// Radio node this access link belongs to.
    pub node: String,
    pub psi_s: f64,
    pub gamma_s: f64,
    #[serde(default)]
    pub distribution: PhaseDistribution,
    pub capacity_mbps: f64,
    pub delay_ms: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub loss: f64,
    /// Reported only; the default scheduler ignores it.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub cost_per_mb: f64,
    /// `false` holds the link down until a scripted `link_up`.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub initially_up: bool,
}

impl LinkConfig {
    pub fn always_up(id: &str, node: &str, capacity_mbps: f64, delay_ms: f64) -> Self {
        Self {
            id: id.to_owned(),
            node: node.to_owned(),
            psi_s: 1.0,
            gamma_s: 0.0,
            distribution: PhaseDistribution::Exponential,
            capacity_mbps,
            delay_ms,
            loss: 0.0,
            cost_per_mb: 0.0,
            initially_up: true,
        }
    }

    pub fn availability(&self) -> LinkAvailabilityParams {
        LinkAvailabilityParams::new(self.psi_s, self.gamma_s, self.distribution)
    }
}

fn default_qos() -> u8 {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BearerConfig {
    pub id: String,
    pub kind: BearerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_point: Option<SplitPoint>,
    #[serde(default = "default_qos")]
    pub qos_class: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubflowSelection {
    pub link: String,
    #[serde(default)]
    pub priority: Priority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MptcpConfig {
    pub mode: SchedulerMode,
    pub termination: TerminationPoint,
    /// Bearer the connection rides on; first bearer when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bearer: Option<String>,
    pub detection_latency_ms: f64,
    pub t_interrupt_ms: f64,
    pub segment_bytes: u32,
    pub reorder_capacity: usize,
    /// Offered load; absent means a saturated sender.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demand_mbps: Option<f64>,
    /// Restricts and orders the sub-flows; all candidate paths when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub subflows: Vec<SubflowSelection>,
}

impl Default for MptcpConfig {
    fn default() -> Self {
        Self {
            mode: SchedulerMode::Aggregate,
            termination: TerminationPoint::EndToEnd,
            bearer: None,
            detection_latency_ms: 200.0,
            t_interrupt_ms: 50.0,
            segment_bytes: 1500,
            reorder_capacity: 1024,
            demand_mbps: None,
            subflows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedAction {
    LinkDown,
    LinkUp,
    SnChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEvent {
    pub at_s: f64,
    pub action: ScriptedAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    /// `sn_change` only: radio parameters of the new SN leg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<f64>,
}

impl ScriptedEvent {
    pub fn link(at_s: f64, action: ScriptedAction, link: &str) -> Self {
        Self { at_s, action, link: Some(link.to_owned()), capacity_mbps: None, delay_ms: None }
    }

    pub fn sn_change(at_s: f64) -> Self {
        Self { at_s, action: ScriptedAction::SnChange, link: None, capacity_mbps: None, delay_ms: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub psi_s: f64,
    pub gamma_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Applied to every access link of the base scenario, one run per point.
    pub points: Vec<SweepPoint>,
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn e(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::new(path, message)
}

impl ScenarioConfig {
    /// Minimal standalone scenario with the fixed UE / server / gateway nodes.
    pub fn skeleton(name: &str, option: ArchOption) -> Self {
        Self {
            name: name.to_owned(),
            seed: 1,
            arch_option: option,
            duration_s: 10.0,
            sample_interval_s: DEFAULT_SAMPLE_INTERVAL_S,
            ue: UeConfig::default(),
            core: CoreDelays::default(),
            mptcp: MptcpConfig::default(),
            nodes: vec![
                NodeConfig::plain("ue", NodeRole::Ue),
                NodeConfig::plain("server", NodeRole::AppServer),
                NodeConfig::plain("gw", NodeRole::CoreGateway),
            ],
            links: Vec::new(),
            bearers: Vec::new(),
            events: Vec::new(),
            sweep: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| {
            let msg = e.message().to_owned();
            let path = match e.span() {
                Some(span) => {
                    let line = s[..span.start.min(s.len())].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "<document>".to_owned(),
            };
            ConfigError::new(path, msg)
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }

    pub fn sample_interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.sample_interval_s)
    }

    /// Field-level checks that need no topology.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(e("name", "must not be empty"));
        }
        if !positive(self.duration_s) {
            return Err(e("duration_s", "must be > 0"));
        }
        if !positive(self.sample_interval_s) || self.sample_interval().as_micros() == 0 {
            return Err(e("sample_interval_s", "must be > 0"));
        }
        if !self.duration().as_micros().is_multiple_of(self.sample_interval().as_micros()) {
            return Err(e("duration_s", "must be a whole number of sample intervals"));
        }
        for (i, l) in self.links.iter().enumerate() {
            let p = |f: &str| format!("links[{i}].{f}");
            if !positive(l.psi_s) {
                return Err(e(p("psi_s"), "mean uptime must be > 0"));
            }
            if !non_negative(l.gamma_s) {
                return Err(e(p("gamma_s"), "mean downtime must be >= 0"));
            }
            if !positive(l.capacity_mbps) {
                return Err(e(p("capacity_mbps"), "must be > 0"));
            }
            if !non_negative(l.delay_ms) {
                return Err(e(p("delay_ms"), "must be >= 0"));
            }
            if !(0.0..=1.0).contains(&l.loss) {
                return Err(e(p("loss"), "must lie in [0, 1]"));
            }
            if !non_negative(l.cost_per_mb) {
                return Err(e(p("cost_per_mb"), "must be >= 0"));
            }
        }
        let m = &self.mptcp;
        if !non_negative(m.detection_latency_ms) {
            return Err(e("mptcp.detection_latency_ms", "must be >= 0"));
        }
        if !non_negative(m.t_interrupt_ms) {
            return Err(e("mptcp.t_interrupt_ms", "must be >= 0"));
        }
        if m.segment_bytes == 0 || m.segment_bytes > 65_535 {
            return Err(e("mptcp.segment_bytes", "must lie in 1..=65535"));
        }
        if m.reorder_capacity == 0 {
            return Err(e("mptcp.reorder_capacity", "must be > 0"));
        }
        if let Some(d) = m.demand_mbps {
            if !non_negative(d) {
                return Err(e("mptcp.demand_mbps", "must be >= 0"));
            }
        }
        for (i, s) in m.subflows.iter().enumerate() {
            if !self.links.iter().any(|l| l.id == s.link) {
                return Err(e(format!("mptcp.subflows[{i}].link"), format!("unknown link `{}`", s.link)));
            }
            if m.subflows[..i].iter().any(|o| o.link == s.link) {
                return Err(e(format!("mptcp.subflows[{i}].link"), "listed twice"));
            }
        }
        if !self.core.internet_delay_ms.is_finite()
            || self.core.internet_delay_ms < 0.0
            || self.core.s1_delay_ms < 0.0
            || self.core.backhaul_delay_ms < 0.0
            || self.core.epdg_delay_ms < 0.0
            || self.core.wt_delay_ms < 0.0
            || !self.core.s1_delay_ms.is_finite()
            || !self.core.backhaul_delay_ms.is_finite()
            || !self.core.epdg_delay_ms.is_finite()
            || !self.core.wt_delay_ms.is_finite()
        {
            return Err(e("core", "hop delays must be finite and >= 0"));
        }
        if let Some(c) = self.core.backhaul_capacity_mbps {
            if !positive(c) {
                return Err(e("core.backhaul_capacity_mbps", "must be > 0"));
            }
        }
        self.validate_events()?;
        if let Some(sweep) = &self.sweep {
            if sweep.points.is_empty() {
                return Err(e("sweep.points", "must not be empty"));
            }
            for (i, pt) in sweep.points.iter().enumerate() {
                if !positive(pt.psi_s) {
                    return Err(e(format!("sweep.points[{i}].psi_s"), "must be > 0"));
                }
                if !non_negative(pt.gamma_s) {
                    return Err(e(format!("sweep.points[{i}].gamma_s"), "must be >= 0"));
                }
            }
        }
        Ok(())
    }

    fn validate_events(&self) -> Result<(), ConfigError> {
        // expected next action per link, in time order
        let mut up: BTreeMap<&str, bool> = self.links.iter().map(|l| (l.id.as_str(), l.initially_up)).collect();
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by(|&a, &b| self.events[a].at_s.total_cmp(&self.events[b].at_s));
        for i in order {
            let ev = &self.events[i];
            let p = |f: &str| format!("events[{i}].{f}");
            if !ev.at_s.is_finite() || ev.at_s < 0.0 || ev.at_s > self.duration_s {
                return Err(e(p("at_s"), "must lie within [0, duration_s]"));
            }
            match ev.action {
                ScriptedAction::LinkDown | ScriptedAction::LinkUp => {
                    let Some(link) = ev.link.as_deref() else {
                        return Err(e(p("link"), "required for link actions"));
                    };
                    let Some(state) = up.get_mut(link) else {
                        return Err(e(p("link"), format!("unknown link `{link}`")));
                    };
                    let want_up = ev.action == ScriptedAction::LinkUp;
                    if *state == want_up {
                        return Err(e(
                            p("action"),
                            format!("link `{link}` is already scripted {}", if want_up { "up" } else { "down" }),
                        ));
                    }
                    *state = want_up;
                    if ev.capacity_mbps.is_some() || ev.delay_ms.is_some() {
                        return Err(e(p("action"), "capacity/delay overrides apply to sn_change only"));
                    }
                }
                ScriptedAction::SnChange => {
                    if ev.link.is_some() {
                        return Err(e(p("link"), "sn_change always targets the SN leg"));
                    }
                    if let Some(c) = ev.capacity_mbps {
                        if !positive(c) {
                            return Err(e(p("capacity_mbps"), "must be > 0"));
                        }
                    }
                    if let Some(d) = ev.delay_ms {
                        if !non_negative(d) {
                            return Err(e(p("delay_ms"), "must be >= 0"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
