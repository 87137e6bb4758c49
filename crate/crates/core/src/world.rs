//! One scenario run: links, the MPTCP connection and the sampler on a single engine.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    analytic_report, AvailabilityAccumulator, AvailabilityReport, AvailabilitySource, PathAvailability,
    ThroughputSampler, UpTimeTracker,
};
use crate::config::{ScenarioConfig, ScriptedAction};
use crate::error::{ConfigError, HarnessError, RunError};
use crate::link::{serialization_time, Link, LinkState, Transition, TransmitOutcome};
use crate::mptcp::{open_connection, MptcpConnection, Priority};
use crate::sim::{Engine, Handler, SimEvent, SimTime, SimulationReport};
use crate::topology::{build_topology, routing_context, NetworkView, PathDescriptor, PathVariant, Topology};
use crate::trace::TraceSink;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    LinkRenewal { link: usize, generation: u64, transition: Transition },
    Scripted(usize),
    TxComplete { sf: usize, epoch: u64 },
    SegmentArrival { sf: usize, seq: u64, link_epoch: u64 },
    AckArrival { sf: usize, seq: u64, data_ack: u64, link_epoch: u64 },
    FailureDetected { sf: usize },
    Established { sf: usize, epoch: u64 },
    LossDetected { sf: usize, seq: u64, epoch: u64 },
    AppData,
    SampleTick,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Released in order to the receiving application.
    pub app_bytes: u64,
    pub useful_bytes: u64,
    pub redundant_bytes: u64,
    pub segments_sent: u64,
    pub segments_lost: u64,
    pub overflow_drops: u64,
    /// Sample intervals in which data was pending but nothing reached the application.
    pub stall_time_s: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub path_id: String,
    pub variant: PathVariant,
    pub priority: Priority,
    pub useful_bytes: u64,
    pub redundant_bytes: u64,
    /// Longest spell between first-copy deliveries on this path.
    pub max_delivery_gap_s: f64,
    /// Time-weighted fraction of the run the link was up.
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnChangeRecord {
    pub t_s: f64,
    pub path_id: Option<String>,
    pub interruption_ms: f64,
    pub rescheduled: usize,
    /// Time from the change to the next first-copy delivery on the SN path.
    pub resume_after_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub totals: Totals,
    pub analytic: AvailabilityReport,
    /// Fraction of sample ticks each path was up.
    pub empirical: AvailabilityReport,
    /// Exact time-weighted availability.
    pub exact: AvailabilityReport,
    pub paths: Vec<PathStats>,
    pub sn_changes: Vec<SnChangeRecord>,
    pub sim: SimulationReport,
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    links: Vec<Link>,
    link_index: HashMap<String, usize>,
    sn_link: Option<usize>,
    paths: Vec<PathDescriptor>,
    sf_link: Vec<usize>,
    conn: MptcpConnection,
    sampler: ThroughputSampler,
    acc: AvailabilityAccumulator,
    uptime: UpTimeTracker,
    sink: &'a mut dyn TraceSink,
    app_period: Option<SimTime>,
    end: SimTime,
    finished: bool,
    totals: Totals,
    path_useful: Vec<u64>,
    path_redundant: Vec<u64>,
    last_fresh: Vec<Option<SimTime>>,
    max_gap: Vec<SimTime>,
    last_app_bytes: u64,
    sn_changes: Vec<SnChangeRecord>,
    /// (record index, sub-flow, change time) awaiting the next SN delivery.
    pending_resume: Vec<(usize, usize, SimTime)>,
}

impl NetworkView for World<'_> {
    fn link_state(&self, link_id: &str) -> Option<&LinkState> {
        self.link_index.get(link_id).map(|&i| &self.links[i].state)
    }

    fn queue_bytes(&self, path_id: &str) -> u64 {
        self.conn.subflow_for_link(path_id).map_or(0, |i| self.conn.subflows[i].queued_bytes())
    }
}

impl World<'_> {
    fn kick(&mut self, eng: &mut Engine<Ev>) {
        let ctx = routing_context(&self.paths, &*self, eng.now());
        self.conn.pump(&ctx);
        for sf in 0..self.conn.subflows.len() {
            self.try_send(sf, eng);
        }
    }

    fn try_send(&mut self, sf: usize, eng: &mut Engine<Ev>) {
        if self.conn.peek_tx(sf).is_none() {
            return;
        }
        let li = self.sf_link[sf];
        if !self.links[li].is_up() {
            return;
        }
        let seq = self.conn.commit_tx(sf, eng.now());
        let s = &self.conn.subflows[sf];
        let wire = s.wire_bytes();
        let link = &mut self.links[li];
        let cap = s.path.fixed_bottleneck_mbps().map_or(link.state.capacity_mbps, |b| b.min(link.state.capacity_mbps));
        let ser = serialization_time(wire, cap);
        eng.schedule_in(ser, Ev::TxComplete { sf, epoch: s.epoch() });
        self.totals.segments_sent += 1;
        match link.transmit(wire) {
            TransmitOutcome::Delivered { .. } => {
                let latency = ser + s.path.fixed_delay() + link.state.delay;
                eng.schedule_in(latency, Ev::SegmentArrival { sf, seq, link_epoch: link.epoch() });
            }
            TransmitOutcome::Lost | TransmitOutcome::Blocked => {
                self.totals.segments_lost += 1;
                eng.note_dropped();
                eng.schedule_in(ser + s.base_rtt(), Ev::LossDetected { sf, seq, epoch: s.epoch() });
            }
        }
    }

    fn one_way(&self, sf: usize) -> SimTime {
        self.conn.subflows[sf].path.fixed_delay() + self.links[self.sf_link[sf]].state.delay
    }

    fn on_link_change(&mut self, li: usize, eng: &mut Engine<Ev>) {
        let now = eng.now();
        let up = self.links[li].is_up();
        for sf in 0..self.conn.subflows.len() {
            if self.sf_link[sf] != li {
                continue;
            }
            self.uptime.set(now, sf, up);
            if !up {
                eng.schedule_in(self.conn.detection_latency, Ev::FailureDetected { sf });
            } else if let Some((delay, epoch)) = self.conn.on_path_recovery(sf) {
                eng.schedule_in(delay, Ev::Established { sf, epoch });
            }
        }
        if up {
            self.kick(eng);
        }
    }

    fn schedule_renewal(&self, li: usize, next: Option<(SimTime, Transition)>, eng: &mut Engine<Ev>) {
        if let Some((at, transition)) = next {
            let generation = self.links[li].generation();
            eng.schedule_in(at - eng.now(), Ev::LinkRenewal { link: li, generation, transition });
        }
    }

    fn link_err(&self, li: usize, e: impl std::fmt::Display) -> RunError {
        RunError::Link { link: self.links[li].id.clone(), message: e.to_string() }
    }

    fn scripted(&mut self, i: usize, eng: &mut Engine<Ev>) -> Result<(), RunError> {
        let ev = &self.cfg.events[i];
        match ev.action {
            ScriptedAction::LinkDown | ScriptedAction::LinkUp => {
                let id = ev.link.as_deref().unwrap_or_default();
                let li = *self
                    .link_index
                    .get(id)
                    .ok_or_else(|| RunError::Link { link: id.to_owned(), message: "unknown link".into() })?;
                let step = self.links[li]
                    .force(eng.now(), ev.action == ScriptedAction::LinkUp)
                    .map_err(|e| self.link_err(li, e))?;
                if step.changed {
                    self.on_link_change(li, eng);
                }
                self.schedule_renewal(li, step.next, eng);
            }
            ScriptedAction::SnChange => {
                let Some(li) = self.sn_link else { return Ok(()) };
                let link = &mut self.links[li];
                if let Some(c) = ev.capacity_mbps {
                    link.state.capacity_mbps = c;
                }
                if let Some(d) = ev.delay_ms {
                    link.state.delay = SimTime::from_millis_f64(d);
                }
                link.reset_in_flight();
                let out = self.conn.sn_change(None);
                if let Some(sf) = out.subflow {
                    if out.interruption > SimTime::ZERO {
                        let epoch = self.conn.subflows[sf].epoch();
                        eng.schedule_in(out.interruption, Ev::Established { sf, epoch });
                    }
                    self.pending_resume.push((self.sn_changes.len(), sf, eng.now()));
                }
                self.sn_changes.push(SnChangeRecord {
                    t_s: eng.now().as_secs_f64(),
                    path_id: out.subflow.map(|sf| self.conn.subflows[sf].path.id.clone()),
                    interruption_ms: out.interruption.as_millis_f64(),
                    rescheduled: out.rescheduled,
                    resume_after_s: None,
                });
                self.kick(eng);
            }
        }
        Ok(())
    }

    fn arrival(&mut self, sf: usize, seq: u64, link_epoch: u64, eng: &mut Engine<Ev>) {
        let now = eng.now();
        if self.links[self.sf_link[sf]].epoch() != link_epoch {
            // the link went down while the segment was in flight
            self.totals.segments_lost += 1;
            eng.note_dropped();
            return;
        }
        eng.note_delivered();
        let out = self.conn.deliver(seq);
        let bytes = self.conn.segment_bytes as u64;
        self.totals.overflow_drops += out.overflow_dropped.len() as u64;
        if out.fresh {
            self.sampler.record_useful(sf, bytes);
            self.path_useful[sf] += bytes;
            self.totals.useful_bytes += bytes;
            if let Some(last) = self.last_fresh[sf] {
                self.max_gap[sf] = self.max_gap[sf].max(now - last);
            }
            self.last_fresh[sf] = Some(now);
            let sn_changes = &mut self.sn_changes;
            self.pending_resume.retain(|&(rec, s, at)| {
                if s == sf {
                    sn_changes[rec].resume_after_s = Some((now - at).as_secs_f64());
                    false
                } else {
                    true
                }
            });
        } else {
            self.sampler.record_redundant(sf, bytes);
            self.path_redundant[sf] += bytes;
            self.totals.redundant_bytes += bytes;
        }
        let delay = self.one_way(sf);
        eng.schedule_in(delay, Ev::AckArrival { sf, seq, data_ack: out.data_ack, link_epoch });
    }

    fn tick(&mut self, eng: &mut Engine<Ev>) -> Result<(), RunError> {
        let now = eng.now();
        let n = self.conn.subflows.len();
        let up: Vec<bool> = (0..n).map(|i| self.links[self.sf_link[i]].is_up()).collect();
        let active: Vec<bool> = self.conn.subflows.iter().map(|s| s.is_active()).collect();
        let sample = self.sampler.sample(now, &up, &active);
        self.acc.add(&sample);
        let app = self.conn.app_bytes_delivered();
        let pending = self.conn.next_new_seq() > self.conn.app_segments_delivered()
            || self.conn.pending_retransmissions() > 0
            || self.app_period.is_none();
        if app == self.last_app_bytes && pending {
            self.totals.stall_time_s += self.sampler.interval().as_secs_f64();
        }
        self.last_app_bytes = app;
        self.sink.write_sample(&sample)?;
        let next = now + self.sampler.interval();
        if next <= self.end {
            eng.schedule_in(self.sampler.interval(), Ev::SampleTick);
        } else {
            self.finished = true;
        }
        Ok(())
    }
}

impl Handler<Ev> for World<'_> {
    type Error = RunError;

    fn handle(&mut self, eng: &mut Engine<Ev>, event: SimEvent<Ev>) -> Result<(), RunError> {
        if self.finished {
            return Ok(());
        }
        match event.kind {
            Ev::LinkRenewal { link, generation, transition } => {
                let step = self.links[link]
                    .on_renewal(eng.now(), generation, transition)
                    .map_err(|e| self.link_err(link, e))?;
                if step.changed {
                    self.on_link_change(link, eng);
                }
                self.schedule_renewal(link, step.next, eng);
            }
            Ev::Scripted(i) => self.scripted(i, eng)?,
            Ev::TxComplete { sf, epoch } => {
                self.conn.tx_done(sf, epoch);
                self.try_send(sf, eng);
            }
            Ev::SegmentArrival { sf, seq, link_epoch } => self.arrival(sf, seq, link_epoch, eng),
            Ev::AckArrival { sf, seq, data_ack, link_epoch } => {
                if self.links[self.sf_link[sf]].epoch() == link_epoch {
                    self.conn.on_ack(sf, seq, data_ack, eng.now());
                    self.kick(eng);
                }
            }
            Ev::FailureDetected { sf } => {
                let down = !self.links[self.sf_link[sf]].is_up();
                self.conn.on_path_failure(sf, down);
                self.kick(eng);
            }
            Ev::Established { sf, epoch } => {
                let up = self.links[self.sf_link[sf]].is_up();
                if self.conn.on_established(sf, epoch, up) {
                    self.kick(eng);
                }
            }
            Ev::LossDetected { sf, seq, epoch } => {
                if self.conn.subflows[sf].epoch() == epoch {
                    self.conn.on_loss(sf, seq);
                    self.kick(eng);
                }
            }
            Ev::AppData => {
                self.conn.offer(1);
                if let Some(p) = self.app_period {
                    eng.schedule_in(p, Ev::AppData);
                }
                self.kick(eng);
            }
            Ev::SampleTick => self.tick(eng)?,
        }
        Ok(())
    }
}

/// Validates `cfg` against its topology and opens the connection.
pub fn prepare(cfg: &ScenarioConfig) -> Result<(Topology, MptcpConnection), ConfigError> {
    cfg.validate()?;
    let topo = build_topology(cfg)?;
    let conn = open_connection(&topo, &cfg.mptcp, &cfg.ue)?;
    if topo.sn().is_none() {
        if let Some(i) = cfg.events.iter().position(|e| e.action == ScriptedAction::SnChange) {
            return Err(ConfigError::new(format!("events[{i}].action"), "sn_change needs a dual-connectivity option"));
        }
    }
    Ok((topo, conn))
}

/// Runs `cfg` to completion, streaming one sample per tick into `sink`.
pub fn simulate(cfg: &ScenarioConfig, sink: &mut dyn TraceSink) -> Result<RunSummary, HarnessError> {
    let (topo, conn) = prepare(cfg)?;
    let links: Vec<Link> = cfg
        .links
        .iter()
        .map(|l| {
            let state = LinkState::new(l.capacity_mbps, SimTime::from_millis_f64(l.delay_ms), l.loss);
            Link::new(&l.id, l.availability(), state, cfg.seed)
        })
        .collect();
    let link_index: HashMap<String, usize> = links.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();
    let sf_link: Vec<usize> = conn.subflows.iter().map(|s| link_index[&s.path.id]).collect();
    let sn_link = topo.sn().and_then(|n| topo.link_of(&n.id)).map(|l| link_index[&l.id]);
    let paths: Vec<PathDescriptor> = conn.subflows.iter().map(|s| s.path.clone()).collect();
    let n = paths.len();
    let interval = cfg.sample_interval();
    let app_period =
        cfg.mptcp.demand_mbps.filter(|d| *d > 0.0).map(|d| {
            SimTime::from_secs_f64(cfg.mptcp.segment_bytes as f64 * 8.0 / (d * 1e6)).max(SimTime::from_micros(1))
        });

    let mut eng = Engine::new();
    let mut world = World {
        cfg,
        links,
        link_index,
        sn_link,
        sampler: ThroughputSampler::new(paths.iter().map(|p| p.id.clone()).collect(), interval),
        paths,
        sf_link,
        conn,
        acc: AvailabilityAccumulator::default(),
        uptime: UpTimeTracker::new(&vec![false; n], SimTime::ZERO),
        sink,
        app_period,
        end: cfg.duration(),
        finished: false,
        totals: Totals::default(),
        path_useful: vec![0; n],
        path_redundant: vec![0; n],
        last_fresh: vec![None; n],
        max_gap: vec![SimTime::ZERO; n],
        last_app_bytes: 0,
        sn_changes: Vec::new(),
        pending_resume: Vec::new(),
    };

    for (li, l) in cfg.links.iter().enumerate() {
        let next = world.links[li].start(SimTime::ZERO, l.initially_up);
        world.schedule_renewal(li, next, &mut eng);
    }
    for sf in 0..n {
        world.uptime.set(SimTime::ZERO, sf, world.links[world.sf_link[sf]].is_up());
    }
    let links = &world.links;
    let timers = world.conn.start(|id| links.iter().any(|l| l.id == id && l.is_up()));
    for (sf, delay, epoch) in timers {
        eng.schedule_in(delay, Ev::Established { sf, epoch });
    }
    for (i, e) in cfg.events.iter().enumerate() {
        eng.schedule_in(SimTime::from_secs_f64(e.at_s), Ev::Scripted(i));
    }
    if app_period.is_some() {
        eng.schedule_in(SimTime::ZERO, Ev::AppData);
    }
    eng.schedule_in(interval, Ev::SampleTick);

    let sim = eng.run_until(world.end, &mut world).map_err(RunError::from)?;
    world.sink.finish()?;

    let end = world.end;
    let (per_path, any) = world.uptime.fractions(SimTime::ZERO, end);
    let ids: Vec<String> = world.paths.iter().map(|p| p.id.clone()).collect();
    let exact = AvailabilityReport {
        paths: ids.iter().zip(&per_path).map(|(id, &theta)| PathAvailability { path_id: id.clone(), theta }).collect(),
        theta_dc: any,
        source: AvailabilitySource::Empirical,
    };
    let params: Vec<(String, _)> =
        world.sf_link.iter().map(|&li| (world.links[li].id.clone(), world.links[li].params)).collect();
    let analytic = analytic_report(&params).map_err(|e| RunError::CrossCheck(e.to_string()))?;
    let empirical = world.acc.report().map_err(|e| RunError::CrossCheck(e.to_string()))?;

    let mut totals = world.totals.clone();
    totals.app_bytes = world.conn.app_bytes_delivered();
    totals.events = sim.events_processed;
    let paths = (0..n)
        .map(|i| PathStats {
            path_id: ids[i].clone(),
            variant: world.paths[i].variant,
            priority: world.conn.subflows[i].priority,
            useful_bytes: world.path_useful[i],
            redundant_bytes: world.path_redundant[i],
            max_delivery_gap_s: world.max_gap[i].as_secs_f64(),
            availability: per_path[i],
        })
        .collect();
    Ok(RunSummary { totals, analytic, empirical, exact, paths, sn_changes: world.sn_changes, sim })
}
