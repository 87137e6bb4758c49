//! Architecture options, nodes, bearers and the paths a bearer may use.
//!
//! A path runs from the application server to the UE as a hop list. Exactly
//! one hop per path is an access link with its own up/down process; every
//! other hop (internet, S1/NG, Xx/Xn backhaul, ePDG, WT) is a fixed delay.
//! Paths are identified by the id of their access link.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::ConfigError;
use crate::link::LinkState;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchOption {
    Opt2,
    Opt3,
    Opt3A,
    Opt3x,
    Opt4,
    Opt4A,
    Opt5,
    Opt7,
    Opt7A,
    Opt7x,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoreNetwork {
    Epc,
    FiveGc,
}

impl ArchOption {
    pub const ALL: [ArchOption; 10] = [
        ArchOption::Opt2,
        ArchOption::Opt3,
        ArchOption::Opt3A,
        ArchOption::Opt3x,
        ArchOption::Opt4,
        ArchOption::Opt4A,
        ArchOption::Opt5,
        ArchOption::Opt7,
        ArchOption::Opt7A,
        ArchOption::Opt7x,
    ];

    pub fn core(self) -> CoreNetwork {
        use ArchOption::*;
        match self {
            Opt3 | Opt3A | Opt3x => CoreNetwork::Epc,
            _ => CoreNetwork::FiveGc,
        }
    }

    /// Radio technology of the anchor (master) node.
    pub fn anchor_radio(self) -> RadioTech {
        use ArchOption::*;
        match self {
            Opt3 | Opt3A | Opt3x => RadioTech::Lte,
            Opt2 | Opt4 | Opt4A => RadioTech::Nr,
            Opt5 | Opt7 | Opt7A | Opt7x => RadioTech::ELte,
        }
    }

    /// Radio technology of the secondary node, `None` for standalone options.
    pub fn secondary_radio(self) -> Option<RadioTech> {
        use ArchOption::*;
        match self {
            Opt2 | Opt5 => None,
            Opt3 | Opt3A | Opt3x | Opt7 | Opt7A | Opt7x => Some(RadioTech::Nr),
            Opt4 | Opt4A => Some(RadioTech::ELte),
        }
    }

    pub fn is_dual_connectivity(self) -> bool {
        self.secondary_radio().is_some()
    }

    /// Whether the core reaches the SN directly (A and x variants) rather
    /// than through the anchor.
    pub fn direct_sn_user_plane(self) -> bool {
        use ArchOption::*;
        matches!(self, Opt3A | Opt3x | Opt4A | Opt7A | Opt7x)
    }
}

impl fmt::Display for ArchOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum");
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Ue,
    Mn,
    Sn,
    CoreGateway,
    AppServer,
    WlanTermination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadioTech {
    Lte,
    #[serde(rename = "elte")]
    ELte,
    Nr,
    #[serde(rename = "wifi")]
    WiFi,
    #[serde(rename = "wigig")]
    WiGig,
}

/// How a WLAN termination reaches the data source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WlanAccess {
    /// Trusted non-3GPP access, attached directly to the core gateway.
    Trusted,
    /// Untrusted non-3GPP access, reached through an ePDG.
    Untrusted,
    /// Aggregated below the anchor's PDCP (eLWA); traffic originates at the MN.
    Elwa,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub role: NodeRole,
    pub radio: Option<RadioTech>,
    pub wlan: Option<WlanAccess>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BearerKind {
    Mcg,
    Scg,
    McgSplit,
    ScgSplit,
    SwitchedLwa,
    SplitLwa,
}

impl BearerKind {
    pub const ALL: [BearerKind; 6] = [
        BearerKind::Mcg,
        BearerKind::Scg,
        BearerKind::McgSplit,
        BearerKind::ScgSplit,
        BearerKind::SwitchedLwa,
        BearerKind::SplitLwa,
    ];

    pub fn is_split(self) -> bool {
        matches!(self, BearerKind::McgSplit | BearerKind::ScgSplit | BearerKind::SplitLwa)
    }

    /// Split point assumed when the config leaves it out.
    pub fn default_split_point(self) -> SplitPoint {
        match self {
            BearerKind::McgSplit | BearerKind::SplitLwa => SplitPoint::AtMn,
            BearerKind::ScgSplit => SplitPoint::AtSn,
            _ => SplitPoint::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPoint {
    None,
    AtGatewayPacketLevel,
    AtMn,
    AtSn,
}

impl SplitPoint {
    pub const ALL: [SplitPoint; 4] =
        [SplitPoint::None, SplitPoint::AtGatewayPacketLevel, SplitPoint::AtMn, SplitPoint::AtSn];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bearer {
    pub id: String,
    pub kind: BearerKind,
    pub split_point: SplitPoint,
    pub qos_class: u8,
}

/// Checks one bearer against an architecture option.
///
/// Returns the violated constraint on rejection.
pub fn bearer_compatibility(option: ArchOption, kind: BearerKind, split: SplitPoint) -> Result<(), &'static str> {
    use ArchOption::*;
    let split_ok = match kind {
        BearerKind::Mcg | BearerKind::Scg | BearerKind::SwitchedLwa => split == SplitPoint::None,
        BearerKind::McgSplit => matches!(split, SplitPoint::AtMn | SplitPoint::AtGatewayPacketLevel),
        BearerKind::ScgSplit => split == SplitPoint::AtSn,
        BearerKind::SplitLwa => split == SplitPoint::AtMn,
    };
    if !split_ok {
        return Err("split point does not apply to this bearer kind");
    }
    if split == SplitPoint::AtSn && !matches!(option, Opt3x | Opt7x) {
        return Err("split at SN requires option 3x or 7x");
    }
    if split == SplitPoint::AtGatewayPacketLevel && !matches!(option, Opt3 | Opt7) {
        return Err("packet-level split at the gateway requires option 3 or 7");
    }
    match kind {
        BearerKind::Scg | BearerKind::McgSplit | BearerKind::ScgSplit if !option.is_dual_connectivity() => {
            Err("secondary-cell-group bearers require a dual-connectivity option")
        }
        BearerKind::Scg if !option.direct_sn_user_plane() => {
            Err("SCG bearer requires a direct core-to-SN user plane (A or x variant)")
        }
        _ => Ok(()),
    }
}

/// Per-UE bearer coexistence rules.
pub fn bearer_set_compatibility(kinds: &[BearerKind]) -> Result<(), &'static str> {
    let has = |k| kinds.contains(&k);
    if has(BearerKind::McgSplit) && has(BearerKind::ScgSplit) {
        return Err("MCG split and SCG split bearers cannot be configured simultaneously");
    }
    if has(BearerKind::McgSplit) && has(BearerKind::Scg) {
        return Err("MCG split and SCG bearers cannot be configured simultaneously");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathVariant {
    CellularMn,
    CellularSn,
    WlanViaCoreTrusted,
    WlanViaCoreUntrusted,
    WlanViaAnchorElwa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pub from: String,
    pub to: String,
    pub delay: SimTime,
    /// `None` means unconstrained.
    pub capacity_mbps: Option<f64>,
    /// Set on the access hop only.
    pub link: Option<String>,
    pub backhaul: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDescriptor {
    /// Id of the access link; unique among the sub-flows of a connection.
    pub id: String,
    pub variant: PathVariant,
    pub hops: Vec<Hop>,
    /// Per-PDU encapsulation overhead on the access hop (LWAAP for eLWA).
    pub overhead_bytes: u32,
    /// First radio-side node the traffic enters from the core.
    pub entry: String,
}

impl PathDescriptor {
    pub fn access_link(&self) -> &str {
        &self.id
    }

    /// First radio-side node the traffic enters (MN, SN, or WLAN termination).
    pub fn entry_node(&self) -> &str {
        &self.entry
    }

    /// Node whose radio serves the UE on this path.
    pub fn radio_node(&self) -> &str {
        self.hops.last().map(|h| h.from.as_str()).unwrap_or("")
    }

    pub fn passes(&self, node: &str) -> bool {
        self.hops.iter().any(|h| h.from == node || h.to == node)
    }

    /// The part of the path downstream of `node`.
    pub fn from_node(&self, node: &str) -> Option<PathDescriptor> {
        let idx = self.hops.iter().position(|h| h.from == node)?;
        Some(PathDescriptor { hops: self.hops[idx..].to_vec(), ..self.clone() })
    }

    /// Sum of non-access hop delays.
    pub fn fixed_delay(&self) -> SimTime {
        self.hops.iter().filter(|h| h.link.is_none()).fold(SimTime::ZERO, |a, h| a + h.delay)
    }

    pub fn one_way_delay(&self) -> SimTime {
        self.hops.iter().fold(SimTime::ZERO, |a, h| a + h.delay)
    }

    pub fn backhaul_delay(&self) -> SimTime {
        self.hops.iter().filter(|h| h.backhaul).fold(SimTime::ZERO, |a, h| a + h.delay)
    }

    pub fn bottleneck_mbps(&self) -> f64 {
        self.hops.iter().filter_map(|h| h.capacity_mbps).fold(f64::INFINITY, f64::min)
    }

    /// Capacity of the constrained non-access hops, if any.
    pub fn fixed_bottleneck_mbps(&self) -> Option<f64> {
        self.hops.iter().filter(|h| h.link.is_none()).filter_map(|h| h.capacity_mbps).reduce(f64::min)
    }
}

/// Fixed delays of the non-access hops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoreDelays {
    pub internet_delay_ms: f64,
    pub s1_delay_ms: f64,
    pub backhaul_delay_ms: f64,
    /// `None`: infinite-capacity backhaul.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backhaul_capacity_mbps: Option<f64>,
    pub epdg_delay_ms: f64,
    /// WT hop for eLWA; 0 models the collocated deployment.
    pub wt_delay_ms: f64,
    pub lwaap_overhead_bytes: u32,
}

impl Default for CoreDelays {
    fn default() -> Self {
        Self {
            internet_delay_ms: 5.0,
            s1_delay_ms: 2.0,
            backhaul_delay_ms: 5.0,
            backhaul_capacity_mbps: None,
            epdg_delay_ms: 5.0,
            wt_delay_ms: 0.0,
            lwaap_overhead_bytes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessLink {
    pub id: String,
    pub node: String,
    pub capacity_mbps: f64,
    pub delay: SimTime,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub option: ArchOption,
    pub nodes: Vec<Node>,
    pub links: Vec<AccessLink>,
    pub bearers: Vec<Bearer>,
    pub delays: CoreDelays,
    bearer_paths: Vec<Vec<PathDescriptor>>,
}

/// Hop label for the untrusted-access gateway; not a configurable node.
pub const EPDG_LABEL: &str = "epdg";

fn err(path: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(path, msg)
}

/// Builds and validates the node graph described by `config`.
pub fn build_topology(config: &ScenarioConfig) -> Result<Topology, ConfigError> {
    let option = config.arch_option;
    let mut nodes = Vec::with_capacity(config.nodes.len());
    let mut ids = BTreeSet::new();
    for (i, n) in config.nodes.iter().enumerate() {
        let p = format!("nodes[{i}]");
        if n.id.is_empty() || !ids.insert(n.id.clone()) {
            return Err(err(format!("{p}.id"), "node ids must be non-empty and unique"));
        }
        if n.id == EPDG_LABEL {
            return Err(err(format!("{p}.id"), format!("`{EPDG_LABEL}` is reserved")));
        }
        match n.role {
            NodeRole::Mn | NodeRole::Sn | NodeRole::WlanTermination if n.radio.is_none() => {
                return Err(err(format!("{p}.radio"), "radio nodes must declare a radio technology"));
            }
            NodeRole::WlanTermination => {
                if !matches!(n.radio, Some(RadioTech::WiFi | RadioTech::WiGig)) {
                    return Err(err(format!("{p}.radio"), "WLAN terminations use wifi or wigig"));
                }
                if n.wlan.is_none() {
                    return Err(err(format!("{p}.wlan"), "WLAN terminations must declare an access mode"));
                }
            }
            NodeRole::Mn if n.radio != Some(option.anchor_radio()) => {
                return Err(err(
                    format!("{p}.radio"),
                    format!("option {option} anchors on {:?}", option.anchor_radio()),
                ));
            }
            NodeRole::Sn if n.radio != option.secondary_radio() => {
                return Err(err(
                    format!("{p}.radio"),
                    match option.secondary_radio() {
                        Some(r) => format!("option {option} uses a {r:?} secondary node"),
                        None => format!("option {option} is standalone and has no secondary node"),
                    },
                ));
            }
            _ => {}
        }
        if n.wlan.is_some() && n.role != NodeRole::WlanTermination {
            return Err(err(format!("{p}.wlan"), "only WLAN terminations take an access mode"));
        }
        nodes.push(Node { id: n.id.clone(), role: n.role, radio: n.radio, wlan: n.wlan });
    }

    let count = |r| nodes.iter().filter(|n: &&Node| n.role == r).count();
    for (role, label) in [
        (NodeRole::Ue, "UE"),
        (NodeRole::AppServer, "application server"),
        (NodeRole::CoreGateway, "core gateway"),
        (NodeRole::Mn, "master node"),
    ] {
        if count(role) != 1 {
            return Err(err("nodes", format!("exactly one {label} is required")));
        }
    }
    let sn_count = count(NodeRole::Sn);
    if option.is_dual_connectivity() && sn_count != 1 {
        return Err(err("nodes", format!("option {option} needs exactly one secondary node")));
    }
    if !option.is_dual_connectivity() && sn_count != 0 {
        return Err(err("nodes", format!("option {option} is standalone; remove the secondary node")));
    }

    let mut links = Vec::with_capacity(config.links.len());
    let mut link_ids = BTreeSet::new();
    for (i, l) in config.links.iter().enumerate() {
        let p = format!("links[{i}]");
        if l.id.is_empty() || !link_ids.insert(l.id.clone()) {
            return Err(err(format!("{p}.id"), "link ids must be non-empty and unique"));
        }
        let Some(node) = nodes.iter().find(|n| n.id == l.node) else {
            return Err(err(format!("{p}.node"), format!("unknown node `{}`", l.node)));
        };
        if !matches!(node.role, NodeRole::Mn | NodeRole::Sn | NodeRole::WlanTermination) {
            return Err(err(format!("{p}.node"), "access links attach to MN, SN or WLAN terminations"));
        }
        if links.iter().any(|a: &AccessLink| a.node == l.node) {
            return Err(err(format!("{p}.node"), format!("node `{}` already has an access link", l.node)));
        }
        links.push(AccessLink {
            id: l.id.clone(),
            node: l.node.clone(),
            capacity_mbps: l.capacity_mbps,
            delay: SimTime::from_millis_f64(l.delay_ms),
        });
    }
    for n in &nodes {
        if matches!(n.role, NodeRole::Mn | NodeRole::Sn | NodeRole::WlanTermination)
            && !links.iter().any(|l| l.node == n.id)
        {
            return Err(err("links", format!("radio node `{}` has no access link", n.id)));
        }
    }

    if config.bearers.is_empty() {
        return Err(err("bearers", "at least one bearer is required"));
    }
    let mut bearers = Vec::with_capacity(config.bearers.len());
    let mut bearer_ids = BTreeSet::new();
    for (i, b) in config.bearers.iter().enumerate() {
        let p = format!("bearers[{i}]");
        if b.id.is_empty() || !bearer_ids.insert(b.id.clone()) {
            return Err(err(format!("{p}.id"), "bearer ids must be non-empty and unique"));
        }
        let split = b.split_point.unwrap_or_else(|| b.kind.default_split_point());
        bearer_compatibility(option, b.kind, split)
            .map_err(|m| err(format!("{p}.kind"), format!("{:?} under {option}: {m}", b.kind)))?;
        if matches!(b.kind, BearerKind::SwitchedLwa | BearerKind::SplitLwa)
            && !nodes.iter().any(|n| n.wlan == Some(WlanAccess::Elwa))
        {
            return Err(err(format!("{p}.kind"), "LWA bearers need an eLWA WLAN termination"));
        }
        bearers.push(Bearer { id: b.id.clone(), kind: b.kind, split_point: split, qos_class: b.qos_class });
    }
    let kinds: Vec<_> = bearers.iter().map(|b| b.kind).collect();
    bearer_set_compatibility(&kinds).map_err(|m| err("bearers", m))?;

    let mut topo = Topology { option, nodes, links, bearers, delays: config.core, bearer_paths: Vec::new() };
    let resolved = topo.bearers.iter().map(|b| topo.resolve_bearer_paths(b)).collect::<Vec<_>>();
    for (i, paths) in resolved.iter().enumerate() {
        if paths.is_empty() {
            return Err(err(format!("bearers[{i}]"), "bearer resolves to no path"));
        }
    }
    topo.bearer_paths = resolved;
    Ok(topo)
}

impl Topology {
    pub fn node(&self, role: NodeRole) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == role)
    }

    pub fn mn(&self) -> &Node {
        self.node(NodeRole::Mn).expect("validated")
    }

    pub fn sn(&self) -> Option<&Node> {
        self.node(NodeRole::Sn)
    }

    pub fn link_of(&self, node: &str) -> Option<&AccessLink> {
        self.links.iter().find(|l| l.node == node)
    }

    pub fn bearer(&self, id: &str) -> Option<&Bearer> {
        self.bearers.iter().find(|b| b.id == id)
    }

    fn access_hop(&self, node: &str) -> Hop {
        let link = self.link_of(node).expect("validated");
        Hop {
            from: node.to_owned(),
            to: self.node(NodeRole::Ue).expect("validated").id.clone(),
            delay: link.delay,
            capacity_mbps: Some(link.capacity_mbps),
            link: Some(link.id.clone()),
            backhaul: false,
        }
    }

    fn fixed_hop(&self, from: &str, to: &str, delay_ms: f64) -> Hop {
        Hop {
            from: from.to_owned(),
            to: to.to_owned(),
            delay: SimTime::from_millis_f64(delay_ms),
            capacity_mbps: None,
            link: None,
            backhaul: false,
        }
    }

    fn backhaul_hop(&self, from: &str, to: &str) -> Hop {
        Hop {
            capacity_mbps: self.delays.backhaul_capacity_mbps,
            backhaul: true,
            ..self.fixed_hop(from, to, self.delays.backhaul_delay_ms)
        }
    }

    fn gateway(&self) -> &str {
        &self.node(NodeRole::CoreGateway).expect("validated").id
    }

    fn core_prefix(&self) -> Vec<Hop> {
        let server = &self.node(NodeRole::AppServer).expect("validated").id;
        vec![self.fixed_hop(server, self.gateway(), self.delays.internet_delay_ms)]
    }

    /// Core → MN → UE.
    pub fn mn_path(&self) -> PathDescriptor {
        let mn = self.mn().id.clone();
        let mut hops = self.core_prefix();
        hops.push(self.fixed_hop(self.gateway(), &mn, self.delays.s1_delay_ms));
        hops.push(self.access_hop(&mn));
        self.descriptor(&mn, PathVariant::CellularMn, hops, 0)
    }

    /// Core → MN → (backhaul) → SN → UE.
    pub fn mn_to_sn_path(&self) -> Option<PathDescriptor> {
        let sn = self.sn()?.id.clone();
        let mn = self.mn().id.clone();
        let mut hops = self.core_prefix();
        hops.push(self.fixed_hop(self.gateway(), &mn, self.delays.s1_delay_ms));
        hops.push(self.backhaul_hop(&mn, &sn));
        hops.push(self.access_hop(&sn));
        Some(self.descriptor(&sn, PathVariant::CellularSn, hops, 0))
    }

    /// Core → SN → UE, only where the core reaches the SN directly.
    pub fn sn_direct_path(&self) -> Option<PathDescriptor> {
        if !self.option.direct_sn_user_plane() {
            return None;
        }
        let sn = self.sn()?.id.clone();
        let mut hops = self.core_prefix();
        hops.push(self.fixed_hop(self.gateway(), &sn, self.delays.s1_delay_ms));
        hops.push(self.access_hop(&sn));
        Some(self.descriptor(&sn, PathVariant::CellularSn, hops, 0))
    }

    /// Core → SN → (backhaul) → MN → UE.
    pub fn sn_to_mn_path(&self) -> Option<PathDescriptor> {
        let sn = self.sn()?.id.clone();
        let mn = self.mn().id.clone();
        let mut hops = self.core_prefix();
        hops.push(self.fixed_hop(self.gateway(), &sn, self.delays.s1_delay_ms));
        hops.push(self.backhaul_hop(&sn, &mn));
        hops.push(self.access_hop(&mn));
        Some(self.descriptor(&mn, PathVariant::CellularMn, hops, 0))
    }

    /// The natural SN route: direct when the option allows it, else via the anchor.
    pub fn sn_path(&self) -> Option<PathDescriptor> {
        self.sn_direct_path().or_else(|| self.mn_to_sn_path())
    }

    /// WLAN paths anchored at the core (trusted or untrusted access).
    pub fn wlan_core_paths(&self) -> Vec<PathDescriptor> {
        self.nodes
            .iter()
            .filter_map(|n| {
                let mut hops = self.core_prefix();
                let variant = match n.wlan? {
                    WlanAccess::Trusted => {
                        hops.push(self.fixed_hop(self.gateway(), &n.id, self.delays.s1_delay_ms));
                        PathVariant::WlanViaCoreTrusted
                    }
                    WlanAccess::Untrusted => {
                        hops.push(self.fixed_hop(self.gateway(), EPDG_LABEL, self.delays.epdg_delay_ms));
                        hops.push(self.fixed_hop(EPDG_LABEL, &n.id, self.delays.s1_delay_ms));
                        PathVariant::WlanViaCoreUntrusted
                    }
                    WlanAccess::Elwa => return None,
                };
                hops.push(self.access_hop(&n.id));
                Some(self.descriptor(&n.id, variant, hops, 0))
            })
            .collect()
    }

    /// Core → anchor → WT → UE; PDUs carry LWAAP overhead on the WLAN hop.
    pub fn elwa_path(&self) -> Option<PathDescriptor> {
        let wt = self.nodes.iter().find(|n| n.wlan == Some(WlanAccess::Elwa))?;
        let mn = self.mn().id.clone();
        let mut hops = self.core_prefix();
        hops.push(self.fixed_hop(self.gateway(), &mn, self.delays.s1_delay_ms));
        hops.push(self.fixed_hop(&mn, &wt.id, self.delays.wt_delay_ms));
        hops.push(self.access_hop(&wt.id));
        Some(self.descriptor(&wt.id, PathVariant::WlanViaAnchorElwa, hops, self.delays.lwaap_overhead_bytes))
    }

    fn descriptor(&self, node: &str, variant: PathVariant, hops: Vec<Hop>, overhead: u32) -> PathDescriptor {
        let id = self.link_of(node).expect("validated").id.clone();
        // hops[0] is server→gateway, hops[1] gateway→first node
        let entry = hops.iter().skip(1).map(|h| h.to.clone()).find(|n| n != EPDG_LABEL).unwrap_or_default();
        PathDescriptor { id, variant, hops, overhead_bytes: overhead, entry }
    }

    fn resolve_bearer_paths(&self, bearer: &Bearer) -> Vec<PathDescriptor> {
        let paths: Vec<Option<PathDescriptor>> = match bearer.kind {
            BearerKind::Mcg => vec![Some(self.mn_path())],
            BearerKind::Scg => vec![self.sn_path()],
            BearerKind::McgSplit => vec![Some(self.mn_path()), self.mn_to_sn_path()],
            BearerKind::ScgSplit => vec![self.sn_direct_path(), self.sn_to_mn_path()],
            BearerKind::SwitchedLwa => vec![self.elwa_path()],
            BearerKind::SplitLwa => vec![Some(self.mn_path()), self.elwa_path()],
        };
        paths.into_iter().collect::<Option<Vec<_>>>().unwrap_or_default()
    }

    /// Ordered paths a bearer's traffic may take.
    pub fn paths_for_bearer(&self, bearer_id: &str) -> Result<&[PathDescriptor], ConfigError> {
        let idx = self
            .bearers
            .iter()
            .position(|b| b.id == bearer_id)
            .ok_or_else(|| err("bearer", format!("unknown bearer `{bearer_id}`")))?;
        Ok(&self.bearer_paths[idx])
    }

    /// Every distinct path the topology can offer: bearer paths, the default
    /// per-cell-group routes, and WLAN routes.
    pub fn all_paths(&self) -> Vec<PathDescriptor> {
        let mut out: Vec<PathDescriptor> = Vec::new();
        let mut push = |p: PathDescriptor| {
            if !out.iter().any(|q| q.id == p.id && q.hops == p.hops) {
                out.push(p);
            }
        };
        for paths in &self.bearer_paths {
            paths.iter().cloned().for_each(&mut push);
        }
        push(self.mn_path());
        if let Some(p) = self.sn_path() {
            push(p);
        }
        self.wlan_core_paths().into_iter().for_each(&mut push);
        if let Some(p) = self.elwa_path() {
            push(p);
        }
        out
    }

    /// Snapshot of the inputs a split/scheduling decision may use at `t`.
    pub fn split_decision_inputs<V: NetworkView>(&self, view: &V, t: SimTime) -> RoutingContext {
        routing_context(&self.all_paths(), view, t)
    }
}

/// Routing inputs for an explicit set of paths.
pub fn routing_context<V: NetworkView>(paths: &[PathDescriptor], view: &V, t: SimTime) -> RoutingContext {
    let paths = paths
        .iter()
        .map(|p| {
            let state = view.link_state(&p.id);
            let up = state.map(|s| s.up).unwrap_or(false);
            let cap = state.map(|s| s.effective_capacity_mbps()).unwrap_or(0.0);
            let cap = p.fixed_bottleneck_mbps().map_or(cap, |b| cap.min(b));
            PathContext {
                path_id: p.id.clone(),
                variant: p.variant,
                feasible: up,
                capacity_mbps: cap,
                queue_bytes: view.queue_bytes(&p.id),
                backhaul_delay: p.backhaul_delay(),
                one_way_delay: p.fixed_delay() + state.map(|s| s.delay).unwrap_or(SimTime::ZERO),
            }
        })
        .collect();
    RoutingContext { t, paths }
}

/// Read access to live network state for [`Topology::split_decision_inputs`].
pub trait NetworkView {
    fn link_state(&self, link_id: &str) -> Option<&LinkState>;
    fn queue_bytes(&self, path_id: &str) -> u64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathContext {
    pub path_id: String,
    pub variant: PathVariant,
    pub feasible: bool,
    pub capacity_mbps: f64,
    pub queue_bytes: u64,
    pub backhaul_delay: SimTime,
    pub one_way_delay: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutingContext {
    pub t: SimTime,
    pub paths: Vec<PathContext>,
}

impl RoutingContext {
    pub fn path(&self, id: &str) -> Option<&PathContext> {
        self.paths.iter().find(|p| p.path_id == id)
    }

    pub fn feasible_count(&self) -> usize {
        self.paths.iter().filter(|p| p.feasible).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BearerConfig, LinkConfig, NodeConfig, ScenarioConfig};
    use std::collections::HashMap;

    fn dc_config(option: ArchOption, bearers: &[(BearerKind, Option<SplitPoint>)]) -> ScenarioConfig {
        let mut c = ScenarioConfig::skeleton("t", option);
        let (mn_radio, sn_radio) = (option.anchor_radio(), option.secondary_radio());
        c.nodes.push(NodeConfig::radio("mn", NodeRole::Mn, mn_radio));
        c.links.push(LinkConfig::always_up("lte", "mn", 50.0, 20.0));
        if let Some(r) = sn_radio {
            c.nodes.push(NodeConfig::radio("sn", NodeRole::Sn, r));
            c.links.push(LinkConfig::always_up("nr", "sn", 100.0, 10.0));
        }
        c.bearers = bearers
            .iter()
            .enumerate()
            .map(|(i, &(kind, split))| BearerConfig { id: format!("b{i}"), kind, split_point: split, qos_class: 9 })
            .collect();
        c
    }

    #[test]
    fn opt3x_scg_split_enters_at_sn() {
        let topo = build_topology(&dc_config(ArchOption::Opt3x, &[(BearerKind::ScgSplit, None)])).unwrap();
        let b = &topo.bearers[0];
        assert_eq!(b.split_point, SplitPoint::AtSn);
        let paths = topo.paths_for_bearer("b0").unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.entry_node() == "sn"));
        assert_eq!(paths[0].id, "nr");
        assert_eq!(paths[1].id, "lte");
    }

    #[test]
    fn opt2_single_path() {
        let mut c = ScenarioConfig::skeleton("t", ArchOption::Opt2);
        c.nodes.push(NodeConfig::radio("gnb", NodeRole::Mn, RadioTech::Nr));
        c.links.push(LinkConfig::always_up("nr", "gnb", 100.0, 5.0));
        c.bearers.push(BearerConfig { id: "drb".into(), kind: BearerKind::Mcg, split_point: None, qos_class: 9 });
        let topo = build_topology(&c).unwrap();
        let paths = topo.paths_for_bearer("drb").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].variant, PathVariant::CellularMn);
    }

    #[test]
    fn opt3a_rejects_scg_split() {
        let e = build_topology(&dc_config(ArchOption::Opt3A, &[(BearerKind::ScgSplit, None)])).unwrap_err();
        assert_eq!(e.path, "bearers[0].kind");
        assert!(e.message.contains("3x or 7x"), "{e}");
    }

    #[test]
    fn mcg_split_under_opt3_enters_at_mn() {
        let topo = build_topology(&dc_config(ArchOption::Opt3, &[(BearerKind::McgSplit, None)])).unwrap();
        let paths = topo.paths_for_bearer("b0").unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.entry_node() == "mn"));
        assert_eq!(paths[1].backhaul_delay(), SimTime::from_millis(5));
    }

    #[test]
    fn unknown_bearer() {
        let topo = build_topology(&dc_config(ArchOption::Opt3, &[(BearerKind::Mcg, None)])).unwrap();
        assert!(topo.paths_for_bearer("nope").is_err());
    }

    #[test]
    fn mcg_bearer_single_path_via_mn() {
        let topo = build_topology(&dc_config(ArchOption::Opt3, &[(BearerKind::Mcg, None)])).unwrap();
        let paths = topo.paths_for_bearer("b0").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].entry_node(), "mn");
        assert_eq!(paths[0].one_way_delay(), SimTime::from_millis(5 + 2 + 20));
    }

    #[test]
    fn coexistence_rules() {
        let e = build_topology(&dc_config(
            ArchOption::Opt3x,
            &[(BearerKind::McgSplit, None), (BearerKind::ScgSplit, None)],
        ))
        .unwrap_err();
        assert!(e.message.contains("simultaneously"));
        let e = build_topology(&dc_config(ArchOption::Opt3A, &[(BearerKind::McgSplit, None), (BearerKind::Scg, None)]))
            .unwrap_err();
        assert!(e.message.contains("simultaneously"));
    }

    #[test]
    fn wrong_anchor_radio_rejected() {
        let mut c = dc_config(ArchOption::Opt4, &[(BearerKind::Mcg, None)]);
        c.nodes[3].radio = Some(RadioTech::Lte);
        let e = build_topology(&c).unwrap_err();
        assert_eq!(e.path, "nodes[3].radio");
    }

    #[test]
    fn untrusted_wlan_adds_epdg_hop() {
        let mut c = dc_config(ArchOption::Opt3, &[(BearerKind::Mcg, None)]);
        c.nodes.push(NodeConfig::wlan("wt", RadioTech::WiFi, WlanAccess::Untrusted));
        c.links.push(LinkConfig::always_up("wifi", "wt", 30.0, 3.0));
        let topo = build_topology(&c).unwrap();
        let p = &topo.wlan_core_paths()[0];
        assert_eq!(p.variant, PathVariant::WlanViaCoreUntrusted);
        assert!(p.passes("epdg"));
        assert_eq!(p.one_way_delay(), SimTime::from_millis(5 + 5 + 2 + 3));
    }

    #[test]
    fn elwa_originates_at_anchor_with_overhead() {
        let mut c = dc_config(ArchOption::Opt2, &[(BearerKind::SplitLwa, None)]);
        c.nodes.push(NodeConfig::wlan("wt", RadioTech::WiFi, WlanAccess::Elwa));
        c.links.push(LinkConfig::always_up("wifi", "wt", 30.0, 3.0));
        c.core.wt_delay_ms = 4.0;
        let topo = build_topology(&c).unwrap();
        let paths = topo.paths_for_bearer("b0").unwrap();
        assert_eq!(paths.len(), 2);
        let w = &paths[1];
        assert_eq!(w.variant, PathVariant::WlanViaAnchorElwa);
        assert_eq!(w.entry_node(), "mn");
        assert!(w.overhead_bytes > 0);
        assert_eq!(w.one_way_delay(), SimTime::from_millis(5 + 2 + 4 + 3));
    }

    struct View {
        links: HashMap<String, LinkState>,
    }

    impl NetworkView for View {
        fn link_state(&self, id: &str) -> Option<&LinkState> {
            self.links.get(id)
        }
        fn queue_bytes(&self, _: &str) -> u64 {
            0
        }
    }

    fn view(lte_up: bool, nr_up: bool) -> View {
        let mut links = HashMap::new();
        let mut lte = LinkState::new(50.0, SimTime::from_millis(20), 0.0);
        lte.up = lte_up;
        let mut nr = LinkState::new(100.0, SimTime::from_millis(10), 0.0);
        nr.up = nr_up;
        links.insert("lte".into(), lte);
        links.insert("nr".into(), nr);
        View { links }
    }

    #[test]
    fn routing_context_reflects_link_state() {
        let mut c = dc_config(ArchOption::Opt3, &[(BearerKind::McgSplit, None)]);
        c.core.backhaul_delay_ms = 10.0;
        let topo = build_topology(&c).unwrap();
        let ctx = topo.split_decision_inputs(&view(true, true), SimTime::ZERO);
        assert_eq!(ctx.feasible_count(), 2);
        assert_eq!(ctx.path("nr").unwrap().backhaul_delay, SimTime::from_millis(10));
        assert_eq!(ctx.path("nr").unwrap().queue_bytes, 0);

        let ctx = topo.split_decision_inputs(&view(true, false), SimTime::ZERO);
        assert!(!ctx.path("nr").unwrap().feasible);
        assert_eq!(ctx.path("nr").unwrap().capacity_mbps, 0.0);
        assert!(ctx.path("lte").unwrap().feasible);
    }

    #[test]
    fn finite_backhaul_caps_context_capacity() {
        let mut c = dc_config(ArchOption::Opt3, &[(BearerKind::McgSplit, None)]);
        c.core.backhaul_capacity_mbps = Some(40.0);
        let topo = build_topology(&c).unwrap();
        let ctx = topo.split_decision_inputs(&view(true, true), SimTime::ZERO);
        assert_eq!(ctx.path("nr").unwrap().capacity_mbps, 40.0);
    }
}
