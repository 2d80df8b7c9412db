use crate::linkmodel::DelayProfile;
use crate::routing::{resolve_path, RoutingTables};
use crate::topology::{NodeId, Topology};

use super::engine::{Agent, PacketKind, PacketRecord, RunSummary, SimError, SimOptions, Simulator, Tick, DEFAULT_TTL};
use super::{ticks_to_us, us_to_ticks};

/// Echo and probe payload size.
pub const PROBE_BYTES: u32 = 64;

/// Everything a run reads and never changes.
#[derive(Clone, Copy)]
pub struct Network<'a> {
    pub topo: &'a Topology,
    pub tables: &'a RoutingTables,
    pub profile: &'a DelayProfile,
}

impl<'a> Network<'a> {
    fn simulator(&self, seed: u64, opts: &SimOptions) -> Result<Simulator<'a>, SimError> {
        Ok(Simulator::new(self.topo, self.tables, self.profile, seed, opts.clone())?)
    }
}

fn min_mean_max(xs: impl Iterator<Item = f64>) -> Option<(f64, f64, f64)> {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
        n += 1;
    }
    (n > 0).then(|| (lo, sum / n as f64, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingStats {
    pub src: NodeId,
    pub dst: NodeId,
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    /// Echoes still unanswered with a packet in the network at the horizon.
    pub in_flight: u64,
    pub loss_rate: f64,
    /// Per echo, `None` if unanswered.
    pub rtt_us: Vec<Option<f64>>,
    pub run: RunSummary,
}

impl PingStats {
    pub fn rtt_min_mean_max(&self) -> Option<(f64, f64, f64)> {
        min_mean_max(self.rtt_us.iter().flatten().copied())
    }
}

struct PingAgent {
    src: NodeId,
    dst: NodeId,
    count: u64,
    interval: Tick,
    sent_at: Vec<Option<Tick>>,
    rtt: Vec<Option<Tick>>,
}

impl Agent for PingAgent {
    fn on_tick(&mut self, tag: u64, sim: &mut Simulator<'_>) {
        if sim
            .send(PacketKind::IcmpEcho, &self.src, &self.dst, PROBE_BYTES, DEFAULT_TTL, tag, None)
            .is_ok()
        {
            self.sent_at[tag as usize] = Some(sim.now());
        }
        if tag + 1 < self.count {
            sim.schedule_tick(sim.now() + self.interval, tag + 1);
        }
    }

    fn on_delivery(&mut self, p: &PacketRecord, sim: &mut Simulator<'_>) {
        if p.kind != PacketKind::IcmpEchoReply || p.dst != self.src {
            return;
        }
        let i = p.tag as usize;
        if let (Some(Some(sent)), Some(slot @ None)) = (self.sent_at.get(i), self.rtt.get_mut(i)) {
            *slot = Some(sim.now() - sent);
        }
    }
}

/// `count` echoes from `src` to `dst`, one every `interval_us`, each given
/// the probe timeout to come back.
pub fn run_ping(
    net: &Network<'_>,
    src: &NodeId,
    dst: &NodeId,
    count: u64,
    interval_us: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<PingStats, SimError> {
    if count == 0 {
        return Err(SimError::InvalidParameter("ping count must be at least 1".into()));
    }
    if !(interval_us >= 0.0) {
        return Err(SimError::InvalidParameter("ping interval must be >= 0".into()));
    }
    let mut sim = net.simulator(seed, opts)?;
    sim.check_reachable(src, dst)?;
    let interval = us_to_ticks(interval_us);
    let mut agent = PingAgent {
        src: src.clone(),
        dst: dst.clone(),
        count,
        interval,
        sent_at: vec![None; count as usize],
        rtt: vec![None; count as usize],
    };
    sim.schedule_tick(0, 0);
    let horizon = interval * (count - 1) + us_to_ticks(opts.probe_timeout_us);
    let run = sim.run(&mut agent, horizon);

    let sent = agent.sent_at.iter().flatten().count() as u64;
    let received = agent.rtt.iter().flatten().count() as u64;
    let in_flight = run.counters.in_flight.min(sent - received);
    let lost = sent - received - in_flight;
    Ok(PingStats {
        src: src.clone(),
        dst: dst.clone(),
        sent,
        received,
        lost,
        in_flight,
        loss_rate: if sent == 0 { 0.0 } else { lost as f64 / sent as f64 },
        rtt_us: agent.rtt.iter().map(|r| r.map(ticks_to_us)).collect(),
        run,
    })
}

/// Per-hop RTT samples, laid out `[iteration][hop][probe]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub src: NodeId,
    pub dst: NodeId,
    /// Routing node answering each hop index, 1-based in reports.
    pub hops: Vec<NodeId>,
    pub iterations: usize,
    pub probes: usize,
    /// RTT in µs, `None` for a probe that timed out.
    pub samples: Vec<Option<f64>>,
    /// Node each reply came from.
    pub repliers: Vec<Option<NodeId>>,
    /// One-way propagation from the source to each hop (µs).
    pub hop_propagation_us: Vec<f64>,
    pub run: RunSummary,
}

impl TraceResult {
    fn index(&self, iteration: usize, hop: usize, probe: usize) -> usize {
        (iteration * self.hops.len() + hop) * self.probes + probe
    }

    pub fn sample(&self, iteration: usize, hop: usize, probe: usize) -> Option<f64> {
        self.samples[self.index(iteration, hop, probe)]
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// All samples of one hop (0-based), in iteration then probe order.
    pub fn hop_samples(&self, hop: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.iterations).flat_map(move |i| (0..self.probes).map(move |p| self.sample(i, hop, p)))
    }
}

struct TraceAgent {
    src: NodeId,
    dst: NodeId,
    hops: usize,
    probes: usize,
    total: usize,
    current: usize,
    sent_at: Tick,
    timeout: Tick,
    samples: Vec<Option<Tick>>,
    repliers: Vec<Option<NodeId>>,
}

impl TraceAgent {
    fn launch(&mut self, sim: &mut Simulator<'_>) {
        while self.current < self.total {
            let hop = (self.current / self.probes) % self.hops;
            let ttl = (hop + 1).min(u8::MAX as usize) as u8;
            let tag = self.current as u64;
            self.sent_at = sim.now();
            if sim.send(PacketKind::Probe, &self.src, &self.dst, PROBE_BYTES, ttl, tag, None).is_ok() {
                sim.schedule_timeout(sim.now() + self.timeout, tag);
                return;
            }
            self.current += 1;
        }
    }
}

impl Agent for TraceAgent {
    fn on_tick(&mut self, _tag: u64, sim: &mut Simulator<'_>) {
        self.launch(sim);
    }

    fn on_timeout(&mut self, tag: u64, sim: &mut Simulator<'_>) {
        if tag as usize == self.current {
            self.current += 1;
            self.launch(sim);
        }
    }

    fn on_delivery(&mut self, p: &PacketRecord, sim: &mut Simulator<'_>) {
        if p.kind != PacketKind::ProbeReply || p.dst != self.src || p.tag as usize != self.current {
            return;
        }
        self.samples[self.current] = Some(sim.now() - self.sent_at);
        self.repliers[self.current] = Some(p.src.clone());
        self.current += 1;
        self.launch(sim);
    }
}

/// Sequential traceroute: for each iteration and hop, `probes` probes with
/// TTL = hop index; each waits for its reply or the timeout before the next
/// one leaves.
pub fn run_traceroute(
    net: &Network<'_>,
    src: &NodeId,
    dst: &NodeId,
    iterations: usize,
    probes: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<TraceResult, SimError> {
    if iterations == 0 || probes == 0 {
        return Err(SimError::InvalidParameter("iterations and probes must be at least 1".into()));
    }
    let path = resolve_path(net.tables, net.topo, src, dst)?;
    let mut sim = net.simulator(seed, opts)?;
    sim.check_reachable(src, dst)?;
    let hops = path.l3_hops.clone();
    let hop_propagation_us = (1..=hops.len())
        .map(|h| {
            let sub = path.prefix_to_hop(net.topo, h).expect("hop index in range");
            sub.links
                .iter()
                .filter_map(|l| net.topo.link(*l))
                .map(|l| crate::linkmodel::propagation_delay(l, net.profile))
                .sum()
        })
        .collect();
    let total = iterations * hops.len() * probes;
    let mut agent = TraceAgent {
        src: src.clone(),
        dst: dst.clone(),
        hops: hops.len().max(1),
        probes,
        total,
        current: 0,
        sent_at: 0,
        timeout: us_to_ticks(opts.probe_timeout_us),
        samples: vec![None; total],
        repliers: vec![None; total],
    };
    if total > 0 {
        sim.schedule_tick(0, 0);
    }
    let run = sim.run(&mut agent, Tick::MAX);
    Ok(TraceResult {
        src: src.clone(),
        dst: dst.clone(),
        hops,
        iterations,
        probes,
        samples: agent.samples.iter().map(|s| s.map(ticks_to_us)).collect(),
        repliers: agent.repliers,
        hop_propagation_us,
        run,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    pub sent: u64,
    pub received: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub lost: u64,
    pub loss_rate: f64,
    pub offered_bps: f64,
    /// Received bits over the span between first and last arrival.
    pub throughput_bps: f64,
    /// Largest deviation of an inter-arrival gap from the send interval (µs).
    pub max_jitter_us: f64,
    pub latency_us: Option<(f64, f64, f64)>,
    pub run: RunSummary,
}

struct StreamAgent {
    src: NodeId,
    dst: NodeId,
    bytes: u32,
    interval: Tick,
    total: u64,
    sent: u64,
    arrivals: Vec<(u64, Tick)>,
}

impl Agent for StreamAgent {
    fn on_tick(&mut self, tag: u64, sim: &mut Simulator<'_>) {
        if sim
            .send(PacketKind::Data, &self.src, &self.dst, self.bytes, DEFAULT_TTL, tag, Some(0))
            .is_ok()
        {
            self.sent += 1;
        }
        if tag + 1 < self.total {
            sim.schedule_tick((tag + 1) * self.interval, tag + 1);
        }
    }

    fn on_delivery(&mut self, p: &PacketRecord, sim: &mut Simulator<'_>) {
        if p.kind == PacketKind::Data && p.dst == self.dst {
            self.arrivals.push((p.tag, sim.now()));
        }
    }
}

/// Constant-bit-rate train of `packet_bytes` packets at `rate_bps` for
/// `duration_us`.
pub fn run_stream(
    net: &Network<'_>,
    src: &NodeId,
    dst: &NodeId,
    rate_bps: u64,
    packet_bytes: u32,
    duration_us: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<StreamStats, SimError> {
    if rate_bps == 0 || packet_bytes == 0 || !(duration_us > 0.0) {
        return Err(SimError::InvalidParameter(
            "stream rate, packet size and duration must be positive".into(),
        ));
    }
    let mut sim = net.simulator(seed, opts)?;
    sim.check_reachable(src, dst)?;
    let interval = ((8 * packet_bytes as u128 * 1_000_000_000) / rate_bps as u128).max(1) as Tick;
    let duration = us_to_ticks(duration_us);
    let total = duration.div_ceil(interval);
    let mut agent = StreamAgent {
        src: src.clone(),
        dst: dst.clone(),
        bytes: packet_bytes,
        interval,
        total,
        sent: 0,
        arrivals: Vec::new(),
    };
    if total > 0 {
        sim.schedule_tick(0, 0);
    }
    let run = sim.run(&mut agent, duration + us_to_ticks(opts.probe_timeout_us));

    let received = agent.arrivals.len() as u64;
    let bits = 8.0 * packet_bytes as f64;
    let throughput_bps = match (agent.arrivals.first(), agent.arrivals.last()) {
        (Some(a), Some(b)) if b.1 > a.1 => (received - 1) as f64 * bits / ((b.1 - a.1) as f64 * 1e-9),
        _ => 0.0,
    };
    let max_jitter_us = agent
        .arrivals
        .windows(2)
        .map(|w| ticks_to_us((w[1].1 - w[0].1).abs_diff(interval)))
        .fold(0.0, f64::max);
    let latency_us = min_mean_max(agent.arrivals.iter().map(|&(tag, at)| ticks_to_us(at - tag * interval)));
    let in_flight = run.counters.in_flight;
    let dropped = run.counters.dropped;
    let lost = agent.sent - received - in_flight;
    Ok(StreamStats {
        sent: agent.sent,
        received,
        dropped,
        in_flight,
        lost,
        loss_rate: if agent.sent == 0 { 0.0 } else { lost as f64 / agent.sent as f64 },
        offered_bps: bits * 1e9 / interval as f64,
        throughput_bps,
        max_jitter_us,
        latency_us,
        run,
    })
}
