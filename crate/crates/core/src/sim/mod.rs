//! Discrete-event packet engine with per-port FIFO queues, plus the ping,
//! traceroute and constant-bit-rate stream experiments built on it.
//!
//! Time is kept in integer nanosecond ticks; results are reported in
//! microseconds. Every hop costs forwarding delay at the sending node, then
//! serialization onto the link, then propagation along it. Traffic leaving
//! its source skips the forwarding delay, replies do not.

mod engine;
mod experiments;
mod stats;

pub use engine::{
    Agent, Counters, Event, EventKind, PacketKind, PacketRecord, RunSummary, SimError, SimOptions, Simulator, Tick, TraceKind,
    TraceRecord, DEFAULT_QUEUE_CAPACITY, DEFAULT_TTL,
};
pub use experiments::{run_ping, run_stream, run_traceroute, Network, PingStats, StreamStats, TraceResult, PROBE_BYTES};
pub use stats::{summarize, HopRow, IterationRow, Summary};

pub fn us_to_ticks(us: f64) -> Tick {
    (us * 1000.0).round().max(0.0) as Tick
}

pub fn ticks_to_us(t: Tick) -> f64 {
    t as f64 / 1000.0
}

#[cfg(test)]
mod tests;
