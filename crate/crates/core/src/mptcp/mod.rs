//! Multipath TCP connection model.
//!
//! The sender is a rate-based fluid model: each sub-flow drains its queue at
//! the path bottleneck rate and is bounded by a fixed window (about twice the
//! path bandwidth-delay product). There is no congestion control. A shared
//! receive window of `reorder_capacity` segments bounds how far new data may
//! run ahead of the receiver's in-order point.

mod reorder;
mod scheduler;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use reorder::{Insert, ReorderBuffer};
pub use scheduler::{min_score, BackupScheduler, MinDelayScheduler, PathScheduler, RedundantScheduler};

use crate::config::{MptcpConfig, UeConfig};
use crate::error::ConfigError;
use crate::link::serialization_time;
use crate::sim::SimTime;
use crate::topology::{BearerKind, CoreNetwork, NodeRole, PathDescriptor, RoutingContext, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationPoint {
    /// MPTCP proxy in the serving gateway.
    AtSgw,
    /// The anchor MN terminates TCP and opens the sub-flows.
    AtMn,
    /// UE and server run MPTCP over independently routable IPv6 prefixes.
    #[default]
    EndToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    #[default]
    Aggregate,
    Backup,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    #[default]
    Regular,
    Backup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubflowState {
    Establishing,
    Active,
    Degraded,
    Closed,
}

#[derive(Debug, Clone)]
struct SendRecord {
    sent_at: Option<SimTime>,
}

#[derive(Debug, Clone)]
pub struct Subflow {
    pub id: usize,
    pub path: PathDescriptor,
    pub state: SubflowState,
    pub priority: Priority,
    pub bytes_sent: u64,
    pub bytes_acked: u64,
    pub srtt_ms: f64,
    base_rtt: SimTime,
    window: usize,
    segment_bytes: u32,
    queue: VecDeque<u64>,
    /// Assigned to this sub-flow and not yet acknowledged (queued or in flight).
    unacked: BTreeMap<u64, SendRecord>,
    transmitting: bool,
    /// Incarnation counter; events stamped with an older value are stale.
    epoch: u64,
}

impl Subflow {
    fn new(id: usize, path: PathDescriptor, priority: Priority, segment_bytes: u32) -> Self {
        let wire = segment_bytes + path.overhead_bytes;
        let cap = path.bottleneck_mbps();
        let base_rtt = path.one_way_delay() + path.one_way_delay() + serialization_time(wire, cap);
        let bdp_segments = cap * 1e6 * base_rtt.as_secs_f64() / (8.0 * segment_bytes as f64);
        let window = (2.0 * bdp_segments).ceil() as usize + 4;
        Self {
            id,
            path,
            state: SubflowState::Establishing,
            priority,
            bytes_sent: 0,
            bytes_acked: 0,
            srtt_ms: base_rtt.as_millis_f64(),
            base_rtt,
            window,
            segment_bytes,
            queue: VecDeque::new(),
            unacked: BTreeMap::new(),
            transmitting: false,
            epoch: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == SubflowState::Active
    }

    pub fn has_window(&self) -> bool {
        self.unacked.len() < self.window
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn base_rtt(&self) -> SimTime {
        self.base_rtt
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queue.len() as u64 * self.segment_bytes as u64
    }

    pub fn outstanding(&self) -> usize {
        self.unacked.len()
    }

    pub fn is_transmitting(&self) -> bool {
        self.transmitting
    }

    /// Bytes on the access hop for one segment.
    pub fn wire_bytes(&self) -> u32 {
        self.segment_bytes + self.path.overhead_bytes
    }
}

/// What the receiver did with an arriving segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliverOutcome {
    /// First copy of this data sequence number to reach the receiver.
    pub fresh: bool,
    /// Bytes released in order to the application.
    pub app_bytes: u64,
    /// Sequence numbers skipped after reorder-buffer overflow.
    pub overflow_dropped: Vec<u64>,
    /// Cumulative data-level acknowledgement after this arrival.
    pub data_ack: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnChangeOutcome {
    pub subflow: Option<usize>,
    pub interruption: SimTime,
    /// Segments moved back to the connection for rescheduling.
    pub rescheduled: usize,
}

pub struct MptcpConnection {
    pub termination: TerminationPoint,
    pub mode: SchedulerMode,
    pub bearer: String,
    pub subflows: Vec<Subflow>,
    pub segment_bytes: u32,
    pub detection_latency: SimTime,
    pub t_interrupt: SimTime,
    scheduler: Box<dyn PathScheduler>,
    sn_node: Option<String>,
    // sender
    next_seq: u64,
    /// `None` = saturated sender; otherwise segments the application has queued.
    backlog: Option<u64>,
    retx: BTreeSet<u64>,
    sacked: BTreeSet<u64>,
    data_ack: u64,
    receive_window: u64,
    // receiver
    reorder: ReorderBuffer<()>,
    app_bytes: u64,
    overflow_drops: u64,
}

impl std::fmt::Debug for MptcpConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MptcpConnection")
            .field("termination", &self.termination)
            .field("mode", &self.mode)
            .field("subflows", &self.subflows.len())
            .field("next_seq", &self.next_seq)
            .field("data_ack", &self.data_ack)
            .finish()
    }
}

fn cfg_err(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(path, msg)
}

/// Paths the connection's sub-flows will use, before any explicit selection.
pub fn candidate_paths(
    term: TerminationPoint,
    bearer_id: &str,
    topo: &Topology,
) -> Result<Vec<PathDescriptor>, ConfigError> {
    let bearer =
        topo.bearer(bearer_id).ok_or_else(|| cfg_err("mptcp.bearer", format!("unknown bearer `{bearer_id}`")))?;
    let mut paths = topo.paths_for_bearer(bearer_id)?.to_vec();
    match term {
        TerminationPoint::AtSgw | TerminationPoint::AtMn => {
            if topo.option.core() != CoreNetwork::Epc {
                return Err(cfg_err(
                    "mptcp.termination",
                    format!("gateway/MN termination needs an EPC option (3, 3a, 3x), not {}", topo.option),
                ));
            }
            if term == TerminationPoint::AtMn && matches!(bearer.kind, BearerKind::Scg | BearerKind::ScgSplit) {
                return Err(cfg_err("mptcp.termination", format!("{:?} bearer does not enter at the MN", bearer.kind)));
            }
            // the terminating node opens sub-flows towards both MN and SN
            if topo.option.is_dual_connectivity() && paths.len() == 1 {
                let extra = match (bearer.kind, term) {
                    (BearerKind::Mcg, TerminationPoint::AtSgw) => topo.sn_path(),
                    (BearerKind::Mcg, TerminationPoint::AtMn) => topo.mn_to_sn_path(),
                    (BearerKind::Scg, _) => Some(topo.mn_path()),
                    _ => None,
                };
                paths.extend(extra);
            }
            let origin = match term {
                TerminationPoint::AtSgw => topo.node(NodeRole::CoreGateway).expect("validated").id.clone(),
                _ => topo.mn().id.clone(),
            };
            paths = paths
                .iter()
                .map(|p| {
                    p.from_node(&origin).ok_or_else(|| {
                        cfg_err("mptcp.termination", format!("path `{}` does not traverse `{origin}`", p.id))
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        TerminationPoint::EndToEnd => paths.extend(topo.wlan_core_paths()),
    }
    let mut seen = BTreeSet::new();
    paths.retain(|p| seen.insert(p.id.clone()));
    Ok(paths)
}

/// Opens the connection described by `cfg` over `topo`.
///
/// Sub-flows start in `Establishing`; see [`MptcpConnection::start`].
pub fn open_connection(topo: &Topology, cfg: &MptcpConfig, ue: &UeConfig) -> Result<MptcpConnection, ConfigError> {
    let bearer_id = cfg.bearer.clone().unwrap_or_else(|| topo.bearers[0].id.clone());
    let candidates = candidate_paths(cfg.termination, &bearer_id, topo)?;
    let selected: Vec<(PathDescriptor, Priority)> = if cfg.subflows.is_empty() {
        candidates.into_iter().map(|p| (p, Priority::Regular)).collect()
    } else {
        cfg.subflows
            .iter()
            .enumerate()
            .map(|(i, s)| {
                candidates.iter().find(|p| p.id == s.link).map(|p| (p.clone(), s.priority)).ok_or_else(|| {
                    cfg_err(
                        &format!("mptcp.subflows[{i}].link"),
                        format!("link `{}` is not on any path of this connection", s.link),
                    )
                })
            })
            .collect::<Result<_, _>>()?
    };
    if cfg.mode == SchedulerMode::Backup && selected.len() > 1 && !selected.iter().any(|(_, p)| *p == Priority::Regular)
    {
        return Err(cfg_err("mptcp.subflows", "backup mode needs at least one regular sub-flow"));
    }
    if cfg.termination == TerminationPoint::EndToEnd && selected.len() > 1 && ue.ipv6_prefixes < 2 {
        return Err(cfg_err(
            "ue.ipv6_prefixes",
            "end-to-end multipath needs at least two independently routable prefixes",
        ));
    }
    let subflows =
        selected.into_iter().enumerate().map(|(i, (p, prio))| Subflow::new(i, p, prio, cfg.segment_bytes)).collect();
    let scheduler: Box<dyn PathScheduler> = match cfg.mode {
        SchedulerMode::Aggregate => Box::new(MinDelayScheduler),
        SchedulerMode::Backup => Box::new(BackupScheduler),
        SchedulerMode::Duplicate => Box::new(RedundantScheduler),
    };
    Ok(MptcpConnection {
        termination: cfg.termination,
        mode: cfg.mode,
        bearer: bearer_id,
        subflows,
        segment_bytes: cfg.segment_bytes,
        detection_latency: SimTime::from_millis_f64(cfg.detection_latency_ms),
        t_interrupt: SimTime::from_millis_f64(cfg.t_interrupt_ms),
        scheduler,
        sn_node: topo.sn().map(|n| n.id.clone()),
        next_seq: 0,
        backlog: cfg.demand_mbps.map(|_| 0),
        retx: BTreeSet::new(),
        sacked: BTreeSet::new(),
        data_ack: 0,
        receive_window: cfg.reorder_capacity as u64,
        reorder: ReorderBuffer::new(cfg.reorder_capacity),
        app_bytes: 0,
        overflow_drops: 0,
    })
}

impl MptcpConnection {
    /// Replaces the scheduling policy for the connection's mode.
    pub fn set_scheduler(&mut self, scheduler: Box<dyn PathScheduler>) {
        self.scheduler = scheduler;
    }

    /// Begins the handshake on every sub-flow whose link is up.
    ///
    /// Returns `(subflow, delay, epoch)` for each establishment timer to arm.
    pub fn start(&mut self, link_up: impl Fn(&str) -> bool) -> Vec<(usize, SimTime, u64)> {
        let mut timers = Vec::new();
        for sf in &mut self.subflows {
            if link_up(&sf.path.id) {
                sf.state = SubflowState::Establishing;
                timers.push((sf.id, sf.base_rtt, sf.epoch));
            } else {
                sf.state = SubflowState::Degraded;
            }
        }
        timers
    }

    pub fn any_active(&self) -> bool {
        self.subflows.iter().any(Subflow::is_active)
    }

    pub fn subflow_for_link(&self, link: &str) -> Option<usize> {
        self.subflows.iter().position(|s| s.path.id == link)
    }

    /// The sub-flow served by the SN radio, if the connection has one.
    pub fn sn_subflow(&self) -> Option<usize> {
        let sn = self.sn_node.as_deref()?;
        self.subflows.iter().position(|s| s.path.radio_node() == sn)
    }

    pub fn app_bytes_delivered(&self) -> u64 {
        self.app_bytes
    }

    pub fn app_segments_delivered(&self) -> u64 {
        self.reorder.expected()
    }

    pub fn overflow_drops(&self) -> u64 {
        self.overflow_drops
    }

    pub fn next_new_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn pending_retransmissions(&self) -> usize {
        self.retx.len()
    }

    /// Application produced `n` more segments (demand-limited sender).
    pub fn offer(&mut self, n: u64) {
        if let Some(b) = self.backlog.as_mut() {
            *b += n;
        }
    }

    fn is_acked(&self, seq: u64) -> bool {
        seq < self.data_ack || self.sacked.contains(&seq)
    }

    fn candidate_segment(&mut self) -> Option<(u64, bool)> {
        while let Some(&seq) = self.retx.first() {
            if self.is_acked(seq) {
                self.retx.remove(&seq);
            } else {
                return Some((seq, true));
            }
        }
        let has_data = self.backlog.is_none_or(|b| b > 0);
        let in_window = self.next_seq < self.data_ack + self.receive_window;
        (has_data && in_window).then_some((self.next_seq, false))
    }

    /// Sub-flows the next segment should be sent on.
    pub fn select_subflow(&self, ctx: &RoutingContext) -> Vec<usize> {
        self.scheduler.select(&self.subflows, ctx)
    }

    /// Assigns as many pending segments as the scheduler admits.
    ///
    /// Returns the sub-flows that received work, each at most once.
    pub fn pump(&mut self, ctx: &RoutingContext) -> Vec<usize> {
        let mut touched = BTreeSet::new();
        while let Some((seq, is_retx)) = self.candidate_segment() {
            let sel = self.select_subflow(ctx);
            if sel.is_empty() {
                break;
            }
            if is_retx {
                self.retx.remove(&seq);
            } else {
                self.next_seq += 1;
                if let Some(b) = self.backlog.as_mut() {
                    *b -= 1;
                }
            }
            for i in sel {
                let sf = &mut self.subflows[i];
                if sf.unacked.contains_key(&seq) {
                    continue;
                }
                sf.unacked.insert(seq, SendRecord { sent_at: None });
                sf.queue.push_back(seq);
                touched.insert(i);
            }
        }
        touched.into_iter().collect()
    }

    /// Head-of-queue segment ready to go out on `sf`, if it may transmit.
    pub fn peek_tx(&self, sf: usize) -> Option<u64> {
        let s = &self.subflows[sf];
        if s.transmitting || !s.is_active() {
            return None;
        }
        s.queue.front().copied()
    }

    /// Marks the head segment as sent at `now`.
    pub fn commit_tx(&mut self, sf: usize, now: SimTime) -> u64 {
        let s = &mut self.subflows[sf];
        let seq = s.queue.pop_front().expect("peeked");
        s.transmitting = true;
        s.bytes_sent += s.segment_bytes as u64;
        if let Some(rec) = s.unacked.get_mut(&seq) {
            rec.sent_at = Some(now);
        }
        seq
    }

    pub fn tx_done(&mut self, sf: usize, epoch: u64) {
        let s = &mut self.subflows[sf];
        if s.epoch == epoch {
            s.transmitting = false;
        }
    }

    /// Receiver side: a copy of `seq` arrived over `sf`.
    pub fn deliver(&mut self, seq: u64) -> DeliverOutcome {
        match self.reorder.insert(seq, ()) {
            Insert::Duplicate => DeliverOutcome {
                fresh: false,
                app_bytes: 0,
                overflow_dropped: Vec::new(),
                data_ack: self.reorder.expected(),
            },
            Insert::Accepted { released, dropped } => {
                let bytes = released.len() as u64 * self.segment_bytes as u64;
                self.app_bytes += bytes;
                self.overflow_drops += dropped.len() as u64;
                DeliverOutcome {
                    fresh: true,
                    app_bytes: bytes,
                    overflow_dropped: dropped,
                    data_ack: self.reorder.expected(),
                }
            }
        }
    }

    /// Sender side: acknowledgement for `seq` returned over `sf`.
    pub fn on_ack(&mut self, sf: usize, seq: u64, data_ack: u64, now: SimTime) {
        if data_ack > self.data_ack {
            self.data_ack = data_ack;
            let keep = self.sacked.split_off(&data_ack);
            self.sacked = keep;
        }
        if seq >= self.data_ack {
            self.sacked.insert(seq);
        }
        self.retx.remove(&seq);
        let s = &mut self.subflows[sf];
        if let Some(rec) = s.unacked.remove(&seq) {
            s.bytes_acked += s.segment_bytes as u64;
            if let Some(sent) = rec.sent_at {
                let sample = (now - sent).as_millis_f64();
                s.srtt_ms = 0.875 * s.srtt_ms + 0.125 * sample;
            }
        }
    }

    /// A transmission of `seq` on `sf` was lost; reschedule it.
    pub fn on_loss(&mut self, sf: usize, seq: u64) {
        if self.subflows[sf].unacked.remove(&seq).is_some() && !self.is_acked(seq) {
            self.retx.insert(seq);
        }
    }

    fn outstanding_elsewhere(&self, sf: usize, seq: u64) -> bool {
        self.subflows.iter().any(|s| s.id != sf && s.state != SubflowState::Degraded && s.unacked.contains_key(&seq))
    }

    /// Moves everything assigned to `sf` back to the connection.
    fn reclaim(&mut self, sf: usize) -> usize {
        let taken = std::mem::take(&mut self.subflows[sf].unacked);
        let s = &mut self.subflows[sf];
        s.queue.clear();
        s.transmitting = false;
        s.epoch += 1;
        let mut n = 0;
        for seq in taken.into_keys() {
            if !self.is_acked(seq) && !self.outstanding_elsewhere(sf, seq) {
                self.retx.insert(seq);
                n += 1;
            }
        }
        n
    }

    /// Failure detected on `sf` (the detection latency has elapsed).
    ///
    /// Unacknowledged data is rescheduled on the surviving sub-flows. The
    /// sub-flow is degraded only if its link is still down.
    pub fn on_path_failure(&mut self, sf: usize, link_still_down: bool) -> usize {
        if link_still_down {
            self.subflows[sf].state = SubflowState::Degraded;
        }
        self.reclaim(sf)
    }

    /// The link under `sf` came back. Returns `(handshake delay, epoch)` when
    /// the sub-flow must re-establish.
    pub fn on_path_recovery(&mut self, sf: usize) -> Option<(SimTime, u64)> {
        let s = &mut self.subflows[sf];
        if s.state != SubflowState::Degraded {
            return None;
        }
        s.state = SubflowState::Establishing;
        s.epoch += 1;
        Some((s.base_rtt, s.epoch))
    }

    /// Handshake or interruption timer fired.
    pub fn on_established(&mut self, sf: usize, epoch: u64, link_up: bool) -> bool {
        let s = &mut self.subflows[sf];
        if s.epoch != epoch || s.state != SubflowState::Establishing {
            return false;
        }
        s.state = if link_up { SubflowState::Active } else { SubflowState::Degraded };
        link_up
    }

    /// The UE moved to a new SN.
    ///
    /// With MN termination, data is steered through the MN and the SN leg
    /// continues without interruption. Otherwise the SN sub-flow is blocked
    /// for `t_interrupt` and re-established on the new leg. The caller arms
    /// the re-establishment timer when `interruption > 0`.
    pub fn sn_change(&mut self, new_sn_path: Option<PathDescriptor>) -> SnChangeOutcome {
        let none = SnChangeOutcome { subflow: None, interruption: SimTime::ZERO, rescheduled: 0 };
        if self.subflows.len() < 2 {
            return none;
        }
        let Some(sf) = self.sn_subflow() else {
            return none;
        };
        let rescheduled = self.reclaim(sf);
        let s = &mut self.subflows[sf];
        if let Some(p) = new_sn_path {
            s.path = p;
        }
        let interruption = match self.termination {
            TerminationPoint::AtMn => SimTime::ZERO,
            TerminationPoint::AtSgw | TerminationPoint::EndToEnd => {
                if s.state == SubflowState::Active || s.state == SubflowState::Establishing {
                    s.state = SubflowState::Establishing;
                }
                self.t_interrupt
            }
        };
        SnChangeOutcome { subflow: Some(sf), interruption, rescheduled }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BearerConfig, LinkConfig, NodeConfig, ScenarioConfig, SubflowSelection};
    use crate::topology::{build_topology, ArchOption, RadioTech, WlanAccess};

    fn topo_with(option: ArchOption, kind: BearerKind) -> Topology {
        let mut c = ScenarioConfig::skeleton("t", option);
        c.nodes.push(NodeConfig::radio("mn", NodeRole::Mn, option.anchor_radio()));
        c.links.push(LinkConfig::always_up("lte", "mn", 50.0, 20.0));
        if let Some(r) = option.secondary_radio() {
            c.nodes.push(NodeConfig::radio("sn", NodeRole::Sn, r));
            c.links.push(LinkConfig::always_up("nr", "sn", 100.0, 10.0));
        }
        c.bearers.push(BearerConfig { id: "b".into(), kind, split_point: None, qos_class: 9 });
        build_topology(&c).unwrap()
    }

    fn mptcp(term: TerminationPoint, mode: SchedulerMode) -> MptcpConfig {
        MptcpConfig { termination: term, mode, ..MptcpConfig::default() }
    }

    fn two_prefix_ue() -> UeConfig {
        UeConfig { ipv6_prefixes: 2, carrier_aware_api: true }
    }

    #[test]
    fn sgw_termination_with_scg_bearer_opens_mn_and_sn_subflows() {
        let topo = topo_with(ArchOption::Opt3A, BearerKind::Scg);
        let conn =
            open_connection(&topo, &mptcp(TerminationPoint::AtSgw, SchedulerMode::Aggregate), &UeConfig::default())
                .unwrap();
        assert_eq!(conn.subflows.len(), 2);
        let entries: BTreeSet<&str> = conn.subflows.iter().map(|s| s.path.entry_node()).collect();
        assert_eq!(entries, BTreeSet::from(["mn", "sn"]));
        assert!(conn.subflows.iter().all(|s| s.path.hops[0].from == "gw"));
        assert!(conn.subflows.iter().all(|s| s.state == SubflowState::Establishing));
    }

    #[test]
    fn mn_termination_with_mcg_split_enters_at_mn() {
        let topo = topo_with(ArchOption::Opt3, BearerKind::McgSplit);
        let conn =
            open_connection(&topo, &mptcp(TerminationPoint::AtMn, SchedulerMode::Aggregate), &UeConfig::default())
                .unwrap();
        assert_eq!(conn.subflows.len(), 2);
        assert!(conn.subflows.iter().all(|s| s.path.hops[0].from == "mn"));
    }

    #[test]
    fn end_to_end_single_path_is_plain_tcp() {
        let topo = topo_with(ArchOption::Opt2, BearerKind::Mcg);
        let conn =
            open_connection(&topo, &mptcp(TerminationPoint::EndToEnd, SchedulerMode::Aggregate), &UeConfig::default())
                .unwrap();
        assert_eq!(conn.subflows.len(), 1);
    }

    #[test]
    fn gateway_termination_needs_epc() {
        let topo = topo_with(ArchOption::Opt7, BearerKind::McgSplit);
        let e = open_connection(&topo, &mptcp(TerminationPoint::AtSgw, SchedulerMode::Aggregate), &UeConfig::default())
            .unwrap_err();
        assert_eq!(e.path, "mptcp.termination");
    }

    #[test]
    fn end_to_end_multipath_needs_two_prefixes() {
        let mut c = ScenarioConfig::skeleton("t", ArchOption::Opt2);
        c.nodes.push(NodeConfig::radio("gnb", NodeRole::Mn, RadioTech::Nr));
        c.nodes.push(NodeConfig::wlan("ap", RadioTech::WiFi, WlanAccess::Trusted));
        c.links.push(LinkConfig::always_up("nr", "gnb", 100.0, 5.0));
        c.links.push(LinkConfig::always_up("wifi", "ap", 50.0, 3.0));
        c.bearers.push(BearerConfig { id: "b".into(), kind: BearerKind::Mcg, split_point: None, qos_class: 9 });
        let topo = build_topology(&c).unwrap();
        let m = mptcp(TerminationPoint::EndToEnd, SchedulerMode::Aggregate);
        assert_eq!(open_connection(&topo, &m, &UeConfig::default()).unwrap_err().path, "ue.ipv6_prefixes");
        let conn = open_connection(&topo, &m, &two_prefix_ue()).unwrap();
        assert_eq!(conn.subflows.iter().map(|s| s.path.id.as_str()).collect::<Vec<_>>(), vec!["nr", "wifi"]);

        let m =
            MptcpConfig { subflows: vec![SubflowSelection { link: "lte".into(), priority: Priority::Regular }], ..m };
        assert_eq!(open_connection(&topo, &m, &two_prefix_ue()).unwrap_err().path, "mptcp.subflows[0].link");
    }

    fn activated(mode: SchedulerMode, prios: [Priority; 2]) -> MptcpConnection {
        let topo = topo_with(ArchOption::Opt3, BearerKind::McgSplit);
        let m = MptcpConfig {
            subflows: vec![
                SubflowSelection { link: "lte".into(), priority: prios[0] },
                SubflowSelection { link: "nr".into(), priority: prios[1] },
            ],
            ..mptcp(TerminationPoint::AtMn, mode)
        };
        let mut conn = open_connection(&topo, &m, &UeConfig::default()).unwrap();
        for (sf, _, epoch) in conn.start(|_| true) {
            assert!(conn.on_established(sf, epoch, true));
        }
        conn
    }

    #[test]
    fn backup_mode_prefers_regular_then_falls_back() {
        let ctx = RoutingContext::default();
        let mut conn = activated(SchedulerMode::Backup, [Priority::Regular, Priority::Backup]);
        assert_eq!(conn.select_subflow(&ctx), vec![0]);
        conn.on_path_failure(0, true);
        assert_eq!(conn.select_subflow(&ctx), vec![1]);
        let (_, epoch) = conn.on_path_recovery(0).unwrap();
        assert_eq!(conn.select_subflow(&ctx), vec![1]);
        conn.on_established(0, epoch, true);
        assert_eq!(conn.select_subflow(&ctx), vec![0]);
    }

    #[test]
    fn duplicate_mode_selects_all_active() {
        let ctx = RoutingContext::default();
        let mut conn = activated(SchedulerMode::Duplicate, [Priority::Regular; 2]);
        assert_eq!(conn.select_subflow(&ctx), vec![0, 1]);
        conn.on_path_failure(1, true);
        assert_eq!(conn.select_subflow(&ctx), vec![0]);
        conn.on_path_failure(0, true);
        assert!(conn.select_subflow(&ctx).is_empty());
    }

    #[test]
    fn aggregate_prefers_lower_delay_then_fills_both() {
        let ctx = RoutingContext::default();
        let mut conn = activated(SchedulerMode::Aggregate, [Priority::Regular; 2]);
        // the NR leg has the lower base RTT
        assert!(conn.subflows[1].srtt_ms < conn.subflows[0].srtt_ms);
        assert_eq!(conn.select_subflow(&ctx), vec![1]);
        let touched = conn.pump(&ctx);
        assert_eq!(touched, vec![0, 1]);
        assert!(!conn.subflows[0].has_window() && !conn.subflows[1].has_window());
        let total = conn.subflows[0].outstanding() + conn.subflows[1].outstanding();
        assert_eq!(conn.next_new_seq() as usize, total);
    }

    #[test]
    fn failure_reschedules_unacked_on_survivor() {
        let ctx = RoutingContext::default();
        let mut conn = activated(SchedulerMode::Aggregate, [Priority::Regular; 2]);
        conn.pump(&ctx);
        let lost = conn.subflows[1].outstanding();
        assert_eq!(conn.on_path_failure(1, true), lost);
        assert_eq!(conn.pending_retransmissions(), lost);
        assert_eq!(conn.subflows[1].state, SubflowState::Degraded);
        // ack everything on the survivor so it has room again
        let seqs: Vec<u64> = conn.subflows[0].unacked.keys().copied().collect();
        for s in seqs {
            conn.on_ack(0, s, 0, SimTime::from_millis(60));
        }
        let touched = conn.pump(&ctx);
        assert_eq!(touched, vec![0]);
        assert_eq!(conn.pending_retransmissions(), lost.saturating_sub(conn.subflows[0].window()));
    }

    #[test]
    fn sn_change_interruption_depends_on_termination() {
        let mut sgw = {
            let topo = topo_with(ArchOption::Opt3, BearerKind::McgSplit);
            let mut c =
                open_connection(&topo, &mptcp(TerminationPoint::AtSgw, SchedulerMode::Aggregate), &UeConfig::default())
                    .unwrap();
            c.start(|_| true);
            c
        };
        let out = sgw.sn_change(None);
        assert_eq!(out.interruption, SimTime::from_millis(50));
        assert_eq!(out.subflow, Some(1));

        let mut mn = activated(SchedulerMode::Aggregate, [Priority::Regular; 2]);
        let out = mn.sn_change(None);
        assert_eq!(out.interruption, SimTime::ZERO);
        assert_eq!(mn.subflows[1].state, SubflowState::Active);

        let topo = topo_with(ArchOption::Opt2, BearerKind::Mcg);
        let mut single =
            open_connection(&topo, &mptcp(TerminationPoint::EndToEnd, SchedulerMode::Aggregate), &UeConfig::default())
                .unwrap();
        assert_eq!(single.sn_change(None).interruption, SimTime::ZERO);
    }

    #[test]
    fn receive_window_bounds_new_data() {
        let ctx = RoutingContext::default();
        let topo = topo_with(ArchOption::Opt3, BearerKind::McgSplit);
        let m = MptcpConfig { reorder_capacity: 10, ..mptcp(TerminationPoint::AtMn, SchedulerMode::Aggregate) };
        let mut conn = open_connection(&topo, &m, &UeConfig::default()).unwrap();
        for (sf, _, epoch) in conn.start(|_| true) {
            conn.on_established(sf, epoch, true);
        }
        conn.pump(&ctx);
        assert_eq!(conn.next_new_seq(), 10);
    }

    #[test]
    fn deliver_dedups_and_orders() {
        let topo = topo_with(ArchOption::Opt2, BearerKind::Mcg);
        let mut conn =
            open_connection(&topo, &mptcp(TerminationPoint::EndToEnd, SchedulerMode::Duplicate), &UeConfig::default())
                .unwrap();
        let a = conn.deliver(1);
        assert!(a.fresh && a.app_bytes == 0);
        let b = conn.deliver(0);
        assert_eq!(b.app_bytes, 3000);
        assert_eq!(b.data_ack, 2);
        assert!(!conn.deliver(1).fresh);
        assert_eq!(conn.app_bytes_delivered(), 3000);
    }
}
