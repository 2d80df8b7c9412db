use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use sha2::{Digest, Sha256};

use super::us_to_ticks;
use crate::linkmodel::{DelayProfile, DelayRng, LinkModelError};
use crate::routing::{resolve_path, RoutingError, RoutingTables};
use crate::topology::{LinkId, NodeId, Topology};

pub type Tick = u64;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1000;
pub const DEFAULT_TTL: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    IcmpEcho,
    IcmpEchoReply,
    Probe,
    /// Reply to a probe, from the hop where its TTL ran out or from the
    /// destination.
    ProbeReply,
    Data,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::IcmpEcho => "icmp-echo",
            PacketKind::IcmpEchoReply => "icmp-echo-reply",
            PacketKind::Probe => "probe",
            PacketKind::ProbeReply => "probe-ttl-expired-reply",
            PacketKind::Data => "data",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: u64,
    pub kind: PacketKind,
    pub size_bytes: u32,
    pub ttl: u8,
    pub src: NodeId,
    pub dst: NodeId,
    pub sent_at: Tick,
    pub flow: Option<u32>,
    /// Opaque to the engine; copied from a request into its reply.
    pub tag: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PacketArrival { packet: u64 },
    PacketDeparture { node: usize, link: usize },
    ProbeTimeout { tag: u64 },
    FlowTick { tag: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: Tick,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Emit,
    Deliver,
    Expire,
    Drop,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Emit => "emit",
            TraceKind::Deliver => "deliver",
            TraceKind::Expire => "expire",
            TraceKind::Drop => "drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: Tick,
    pub node: NodeId,
    pub kind: TraceKind,
    pub packet: u64,
    pub packet_kind: PacketKind,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.time,
            self.node,
            self.kind.as_str(),
            self.packet,
            self.packet_kind.as_str()
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub emitted: u64,
    pub delivered: u64,
    /// Packets whose TTL ran out short of the destination.
    pub expired: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl Counters {
    pub fn conserved(&self) -> bool {
        self.emitted == self.delivered + self.expired + self.dropped + self.in_flight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub counters: Counters,
    /// Hex SHA-256 over the trace lines.
    pub trace_hash: String,
    pub trace: Vec<TraceRecord>,
    /// Events were still pending at the horizon.
    pub truncated: bool,
    pub end_time: Tick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub queue_capacity: usize,
    pub probe_timeout_us: f64,
    /// Keep trace records in memory; the hash is computed either way.
    pub keep_trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            probe_timeout_us: 1_000_000.0,
            keep_trace: false,
        }
    }
}

/// Experiment logic driving a run.
pub trait Agent {
    fn on_tick(&mut self, _tag: u64, _sim: &mut Simulator<'_>) {}
    fn on_timeout(&mut self, _tag: u64, _sim: &mut Simulator<'_>) {}
    fn on_delivery(&mut self, _packet: &PacketRecord, _sim: &mut Simulator<'_>) {}
    fn on_drop(&mut self, _packet: &PacketRecord, _sim: &mut Simulator<'_>) {}
}

struct Route {
    nodes: Vec<usize>,
    links: Vec<usize>,
}

struct InFlight {
    rec: PacketRecord,
    route: Rc<Route>,
    pos: usize,
}

#[derive(Default)]
struct Port {
    queue: VecDeque<(u64, Tick)>,
    busy: bool,
}

/// One single-threaded run over a fixed network.
pub struct Simulator<'a> {
    topo: &'a Topology,
    tables: &'a RoutingTables,
    opts: SimOptions,
    rng: DelayRng,
    now: Tick,
    seq: u64,
    next_packet: u64,
    queue: BinaryHeap<Reverse<Event>>,
    packets: HashMap<u64, InFlight>,
    ports: HashMap<(usize, usize), Port>,
    routes: HashMap<(usize, usize), Rc<Route>>,
    link_pos: HashMap<LinkId, usize>,
    forward_base_us: Vec<f64>,
    prop_ticks: Vec<Tick>,
    routing: Vec<bool>,
    counters: Counters,
    hasher: Sha256,
    trace: Vec<TraceRecord>,
    pending_drops: Vec<PacketRecord>,
    jitter: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Delay(#[from] LinkModelError),
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(String),
}

impl<'a> Simulator<'a> {
    pub fn new(
        topo: &'a Topology,
        tables: &'a RoutingTables,
        profile: &DelayProfile,
        seed: u64,
        opts: SimOptions,
    ) -> Result<Self, LinkModelError> {
        profile.check()?;
        let mut forward_base_us = Vec::with_capacity(topo.nodes().len());
        for n in topo.nodes() {
            let base = match n.delay_override_us {
                Some(d) => d,
                None => profile.base_forward_us(n.kind)?,
            };
            forward_base_us.push(base);
        }
        let prop_ticks = topo
            .links()
            .iter()
            .map(|l| us_to_ticks(crate::linkmodel::propagation_delay(l, profile)))
            .collect();
        Ok(Simulator {
            topo,
            tables,
            opts,
            rng: DelayRng::new(seed),
            now: 0,
            seq: 0,
            next_packet: 0,
            queue: BinaryHeap::new(),
            packets: HashMap::new(),
            ports: HashMap::new(),
            routes: HashMap::new(),
            link_pos: topo.links().iter().enumerate().map(|(i, l)| (l.id, i)).collect(),
            forward_base_us,
            pending_drops: Vec::new(),
            prop_ticks,
            routing: topo.nodes().iter().map(|n| n.kind.is_routing()).collect(),
            counters: Counters::default(),
            hasher: Sha256::new(),
            trace: Vec::new(),
            jitter: profile.jitter_fraction,
        })
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    pub fn topology(&self) -> &Topology {
        self.topo
    }

    fn schedule(&mut self, time: Tick, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event { time, seq: self.seq, kind }));
    }

    pub fn schedule_tick(&mut self, at: Tick, tag: u64) {
        self.schedule(at, EventKind::FlowTick { tag });
    }

    pub fn schedule_timeout(&mut self, at: Tick, tag: u64) {
        self.schedule(at, EventKind::ProbeTimeout { tag });
    }

    fn record(&mut self, kind: TraceKind, node: usize, rec: &PacketRecord) {
        let r = TraceRecord {
            time: self.now,
            node: self.topo.nodes()[node].id.clone(),
            kind,
            packet: rec.id,
            packet_kind: rec.kind,
        };
        self.hasher.update(r.to_string().as_bytes());
        self.hasher.update(b"\n");
        if self.opts.keep_trace {
            self.trace.push(r);
        }
    }

    fn route(&mut self, src: usize, dst: usize) -> Result<Rc<Route>, RoutingError> {
        if let Some(r) = self.routes.get(&(src, dst)) {
            return Ok(r.clone());
        }
        let nodes = self.topo.nodes();
        let path = resolve_path(self.tables, self.topo, &nodes[src].id, &nodes[dst].id)?;
        let route = Rc::new(Route {
            nodes: path
                .nodes
                .iter()
                .map(|n| self.topo.index_of(n).expect("paths name known nodes"))
                .collect(),
            links: path.links.iter().map(|l| self.link_pos[l]).collect(),
        });
        self.routes.insert((src, dst), route.clone());
        Ok(route)
    }

    fn index(&self, id: &NodeId) -> Result<usize, RoutingError> {
        self.topo.index_of(id).ok_or_else(|| RoutingError::UnknownNode(id.clone()))
    }

    /// Checks that `src` can reach `dst` and back.
    pub fn check_reachable(&mut self, src: &NodeId, dst: &NodeId) -> Result<(), RoutingError> {
        let (s, d) = (self.index(src)?, self.index(dst)?);
        self.route(s, d)?;
        self.route(d, s)?;
        Ok(())
    }

    fn forward_delay(&mut self, node: usize) -> Tick {
        let base = self.forward_base_us[node];
        us_to_ticks(crate::linkmodel::jittered(base, self.jitter, &mut self.rng))
    }

    /// Emits a packet from `src` now, without forwarding delay at `src`.
    pub fn send(
        &mut self,
        kind: PacketKind,
        src: &NodeId,
        dst: &NodeId,
        size_bytes: u32,
        ttl: u8,
        tag: u64,
        flow: Option<u32>,
    ) -> Result<u64, RoutingError> {
        let (s, d) = (self.index(src)?, self.index(dst)?);
        let route = self.route(s, d)?;
        Ok(self.emit(kind, s, d, route, size_bytes, ttl, tag, flow, self.now))
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        kind: PacketKind,
        src: usize,
        dst: usize,
        route: Rc<Route>,
        size_bytes: u32,
        ttl: u8,
        tag: u64,
        flow: Option<u32>,
        ready_at: Tick,
    ) -> u64 {
        let id = self.next_packet;
        self.next_packet += 1;
        let nodes = self.topo.nodes();
        let rec = PacketRecord {
            id,
            kind,
            size_bytes,
            ttl,
            src: nodes[src].id.clone(),
            dst: nodes[dst].id.clone(),
            sent_at: self.now,
            flow,
            tag,
        };
        self.counters.emitted += 1;
        self.record(TraceKind::Emit, src, &rec);
        let single = route.links.is_empty();
        self.packets.insert(id, InFlight { rec, route, pos: 0 });
        if single {
            self.schedule(ready_at, EventKind::PacketArrival { packet: id });
        } else {
            self.enqueue(id, src, ready_at);
        }
        id
    }

    fn enqueue(&mut self, id: u64, node: usize, ready_at: Tick) {
        let (link, size) = {
            let p = &self.packets[&id];
            (p.route.links[p.pos], p.rec.size_bytes)
        };
        let full = self
            .ports
            .get(&(node, link))
            .is_some_and(|p| p.queue.len() >= self.opts.queue_capacity);
        if full {
            let p = self.packets.remove(&id).expect("queued packet exists");
            self.counters.dropped += 1;
            self.record(TraceKind::Drop, node, &p.rec);
            self.pending_drops.push(p.rec);
            return;
        }
        let ser = self.serialization(link, size);
        let port = self.ports.entry((node, link)).or_default();
        port.queue.push_back((id, ready_at));
        if !port.busy {
            port.busy = true;
            let done = ready_at.max(self.now) + ser;
            self.schedule(done, EventKind::PacketDeparture { node, link });
        }
    }

    fn serialization(&self, link: usize, bytes: u32) -> Tick {
        let rate = self.topo.links()[link].rate_bps as u128;
        ((8 * bytes as u128 * 1_000_000_000 + rate / 2) / rate) as Tick
    }

    fn depart(&mut self, node: usize, link: usize) {
        let port = self.ports.get_mut(&(node, link)).expect("departing port exists");
        let (id, _) = port.queue.pop_front().expect("busy port has a head");
        let next = port.queue.front().copied();
        if next.is_none() {
            port.busy = false;
        }
        if let Some((nid, ready)) = next {
            let size = self.packets[&nid].rec.size_bytes;
            let done = ready.max(self.now) + self.serialization(link, size);
            self.schedule(done, EventKind::PacketDeparture { node, link });
        }
        if let Some(p) = self.packets.get_mut(&id) {
            p.pos += 1;
        }
        let at = self.now + self.prop_ticks[link];
        self.schedule(at, EventKind::PacketArrival { packet: id });
    }

    fn arrive(&mut self, id: u64, agent: &mut dyn Agent) {
        let (node, last, src_idx, kind) = {
            let p = &self.packets[&id];
            let node = p.route.nodes[p.pos];
            (node, p.pos + 1 == p.route.nodes.len(), p.route.nodes[0], p.rec.kind)
        };
        if last {
            let p = self.packets.remove(&id).expect("arriving packet exists");
            self.counters.delivered += 1;
            self.record(TraceKind::Deliver, node, &p.rec);
            match kind {
                PacketKind::IcmpEcho => self.reply(node, src_idx, PacketKind::IcmpEchoReply, &p.rec),
                PacketKind::Probe => self.reply(node, src_idx, PacketKind::ProbeReply, &p.rec),
                _ => {}
            }
            agent.on_delivery(&p.rec, self);
            return;
        }
        if self.routing[node] && node != src_idx {
            let p = self.packets.get_mut(&id).expect("arriving packet exists");
            p.rec.ttl = p.rec.ttl.saturating_sub(1);
            if p.rec.ttl == 0 {
                let p = self.packets.remove(&id).expect("arriving packet exists");
                self.counters.expired += 1;
                self.record(TraceKind::Expire, node, &p.rec);
                if kind == PacketKind::Probe {
                    self.reply(node, src_idx, PacketKind::ProbeReply, &p.rec);
                }
                return;
            }
        }
        let ready = self.now + self.forward_delay(node);
        self.enqueue(id, node, ready);
    }

    fn reply(&mut self, from: usize, to: usize, kind: PacketKind, req: &PacketRecord) {
        let Ok(route) = self.route(from, to) else {
            // no way back: the request is answered into the void
            return;
        };
        let ready = if from == to {
            self.now
        } else {
            self.now + self.forward_delay(from)
        };
        self.emit(kind, from, to, route, req.size_bytes, DEFAULT_TTL, req.tag, req.flow, ready);
    }

    /// Processes events in (time, sequence) order until none remain or the
    /// next one lies beyond `horizon`.
    pub fn run(&mut self, agent: &mut dyn Agent, horizon: Tick) -> RunSummary {
        let mut truncated = false;
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time > horizon {
                truncated = true;
                break;
            }
            self.queue.pop();
            self.now = ev.time;
            match ev.kind {
                EventKind::PacketArrival { packet } => self.arrive(packet, agent),
                EventKind::PacketDeparture { node, link } => self.depart(node, link),
                EventKind::ProbeTimeout { tag } => agent.on_timeout(tag, self),
                EventKind::FlowTick { tag } => agent.on_tick(tag, self),
            }
            for rec in std::mem::take(&mut self.pending_drops) {
                agent.on_drop(&rec, self);
            }
        }
        let mut counters = self.counters;
        counters.in_flight = self.packets.len() as u64;
        RunSummary {
            counters,
            trace_hash: hex::encode(self.hasher.clone().finalize()),
            trace: std::mem::take(&mut self.trace),
            truncated,
            end_time: self.now,
        }
    }
}
