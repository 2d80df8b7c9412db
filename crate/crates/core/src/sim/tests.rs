use super::*;
use crate::addressing::assign_addresses;
use crate::linkmodel::{propagation_delay, DelayProfile};
use crate::routing::{compute_tables, resolve_path, RoutingTables};
use crate::topology::{build_cell, LinkSpec, Medium, NodeId, NodeKind, NodeSpec, Provisioning, Topology};

struct Idle;
impl Agent for Idle {}

fn tables(t: &Topology) -> RoutingTables {
    let p = assign_addresses(t, "10.0.0.0/16".parse().unwrap()).unwrap();
    compute_tables(t, &p).unwrap()
}

fn e2e() -> Topology {
    build_cell(3, 1, 3, Provisioning::CouplerTdm)
        .unwrap()
        .attach_core_chain(&[50.0, 50.0])
        .unwrap()
}

fn pair() -> Topology {
    Topology::new(
        Provisioning::CouplerTdm,
        vec![NodeSpec::new("a", NodeKind::WdmCoreNode), NodeSpec::new("b", NodeKind::WdmCoreNode)],
        vec![LinkSpec::new(0, "a", "b", Medium::OpticalFiber, 0.0)],
    )
}

fn id(s: &str) -> NodeId {
    NodeId::new(s)
}

#[test]
fn empty_run_has_empty_trace() {
    let t = pair();
    let r = tables(&t);
    let mut sim = Simulator::new(&t, &r, &DelayProfile::zero(), 1, SimOptions::default()).unwrap();
    let s = sim.run(&mut Idle, Tick::MAX);
    assert_eq!(s.counters, Counters::default());
    assert!(s.trace.is_empty() && !s.truncated);
    // sha256 of nothing
    assert_eq!(s.trace_hash, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

#[test]
fn serialization_only_rtt() {
    let t = pair();
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::zero() };
    let s = run_ping(&net, &id("a"), &id("b"), 1, 0.0, 1, &SimOptions::default()).unwrap();
    // 512 bits at 10 Gb/s is 51.2 ns, rounded to 51 each way
    assert_eq!(s.rtt_us, vec![Some(0.102)]);
    assert!(s.run.counters.conserved());
    assert_eq!(s.run.counters.delivered, 2);
}

#[test]
fn self_ping_is_instant() {
    let t = e2e();
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::default() };
    let s = run_ping(&net, &id("r1-g1-s2"), &id("r1-g1-s2"), 3, 10.0, 1, &SimOptions::default()).unwrap();
    assert_eq!(s.rtt_us, vec![Some(0.0); 3]);
    assert_eq!(s.loss_rate, 0.0);
}

#[test]
fn same_seed_same_hash() {
    let t = e2e();
    let r = tables(&t);
    let profile = DelayProfile::default();
    let net = Network { topo: &t, tables: &r, profile: &profile };
    let run = |seed| {
        run_traceroute(&net, &id("r1-g1-s2"), &id("display"), 2, 3, seed, &SimOptions::default()).unwrap()
    };
    let (a, b, c) = (run(7), run(7), run(8));
    assert_eq!(a.run.trace_hash, b.run.trace_hash);
    assert_eq!(a.samples, b.samples);
    assert_ne!(a.run.trace_hash, c.run.trace_hash);
}

#[test]
fn tail_drop_conserves_packets() {
    let t = Topology::new(
        Provisioning::CouplerTdm,
        vec![NodeSpec::new("a", NodeKind::WdmCoreNode), NodeSpec::new("b", NodeKind::WdmCoreNode)],
        vec![LinkSpec::new(0, "a", "b", Medium::OpticalFiber, 1.0).with_rate(1_000_000)],
    );
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::zero() };
    let opts = SimOptions { queue_capacity: 1, keep_trace: true, ..SimOptions::default() };
    let s = run_stream(&net, &id("a"), &id("b"), 10_000_000, 125, 10_000.0, 1, &opts).unwrap();
    let c = s.run.counters;
    assert!(c.dropped > 0 && s.loss_rate > 0.0);
    assert!(c.conserved());
    let count = |k| s.run.trace.iter().filter(|r| r.kind == k).count() as u64;
    assert_eq!(count(TraceKind::Emit), c.emitted);
    assert_eq!(count(TraceKind::Deliver), c.delivered);
    assert_eq!(count(TraceKind::Drop), c.dropped);
    assert_eq!(count(TraceKind::Expire), c.expired);
    assert_eq!(s.sent, s.received + s.lost + s.in_flight);
}

/// Hop RTT rebuilt from the pieces: one-way link costs twice, every interior
/// node's forwarding twice, the replier's once, each rounded to whole ns.
fn oracle_rtt_ticks(t: &Topology, r: &RoutingTables, profile: &DelayProfile, src: &str, dst: &str, hop: usize) -> Tick {
    let path = resolve_path(r, t, &id(src), &id(dst)).unwrap().prefix_to_hop(t, hop).unwrap();
    let mut link_ticks = 0;
    for l in &path.links {
        let l = t.link(*l).unwrap();
        let ser = (8 * PROBE_BYTES as u64 * 1_000_000_000 + l.rate_bps / 2) / l.rate_bps;
        link_ticks += us_to_ticks(propagation_delay(l, profile)) + ser;
    }
    let fwd = |n: &NodeId| us_to_ticks(profile.base_forward_us(t.node(n).unwrap().kind).unwrap());
    let interior: Tick = path.nodes[1..path.nodes.len() - 1].iter().map(fwd).sum();
    2 * link_ticks + 2 * interior + fwd(path.nodes.last().unwrap())
}

#[test]
fn deterministic_traceroute_matches_oracle() {
    let t = e2e();
    let r = tables(&t);
    let profile = DelayProfile::deterministic();
    let net = Network { topo: &t, tables: &r, profile: &profile };
    let tr = run_traceroute(&net, &id("r1-g1-s2"), &id("display"), 3, 2, 1, &SimOptions::default()).unwrap();
    assert_eq!(tr.hops.len(), 5);
    for h in 0..tr.hops.len() {
        let want = ticks_to_us(oracle_rtt_ticks(&t, &r, &profile, "r1-g1-s2", "display", h + 1));
        for i in 0..tr.iterations {
            for p in 0..tr.probes {
                assert_eq!(tr.sample(i, h, p), Some(want), "hop {h}");
            }
        }
        assert_eq!(tr.repliers[h * tr.probes].as_ref(), Some(&tr.hops[h]));
        if h > 0 {
            assert!(tr.sample(0, h, 0) > tr.sample(0, h - 1, 0));
        }
    }
    let sum = summarize(&tr);
    assert!(sum.hops.iter().all(|row| row.min_us == row.max_us && row.samples == 6));
    assert!((tr.hop_propagation_us[4] - 490.049).abs() < 1e-6);
}

#[test]
fn ping_agrees_with_last_hop() {
    let t = e2e();
    let r = tables(&t);
    let profile = DelayProfile::deterministic();
    let net = Network { topo: &t, tables: &r, profile: &profile };
    let opts = SimOptions::default();
    let tr = run_traceroute(&net, &id("r2-g1-s3"), &id("display"), 1, 1, 1, &opts).unwrap();
    let ping = run_ping(&net, &id("r2-g1-s3"), &id("display"), 1, 0.0, 1, &opts).unwrap();
    assert_eq!(ping.rtt_us[0], tr.sample(0, tr.hops.len() - 1, 0));
}

#[test]
fn bottleneck_caps_throughput() {
    let base = e2e();
    let links = base
        .links()
        .iter()
        .cloned()
        .map(|l| if l.endpoints.iter().any(|e| e.as_str() == "display") { l.with_rate(1_000_000_000) } else { l })
        .collect();
    let t = Topology::new(base.provisioning(), base.nodes().to_vec(), links);
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::deterministic() };
    let opts = SimOptions { queue_capacity: 16, ..SimOptions::default() };
    let s = run_stream(&net, &id("r1-g1-s2"), &id("display"), 2_000_000_000, 1200, 5_000.0, 1, &opts).unwrap();
    assert!(s.dropped > 0 && s.loss_rate > 0.0);
    assert!(s.throughput_bps <= 1e9 * 1.001, "{}", s.throughput_bps);
    assert!(s.run.counters.conserved());
}

#[test]
fn steady_stream_is_lossless() {
    let t = e2e();
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::deterministic() };
    let s = run_stream(&net, &id("r1-g1-s2"), &id("display"), 5_000_000, 1200, 100_000.0, 1, &SimOptions::default())
        .unwrap();
    // 1920 µs apart, 100 ms
    assert_eq!(s.sent, 53);
    assert_eq!((s.received, s.lost), (53, 0));
    assert!(s.max_jitter_us < 1e-9);
    assert!((s.throughput_bps - 5e6).abs() < 1.0);
}

#[test]
fn bad_parameters() {
    let t = pair();
    let r = tables(&t);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::zero() };
    let o = SimOptions::default();
    assert!(matches!(run_ping(&net, &id("a"), &id("b"), 0, 1.0, 1, &o), Err(SimError::InvalidParameter(_))));
    assert!(matches!(run_stream(&net, &id("a"), &id("b"), 0, 1, 1.0, 1, &o), Err(SimError::InvalidParameter(_))));
    assert!(matches!(run_traceroute(&net, &id("a"), &id("b"), 1, 0, 1, &o), Err(SimError::InvalidParameter(_))));
    assert!(matches!(run_ping(&net, &id("a"), &id("zz"), 1, 1.0, 1, &o), Err(SimError::Routing(_))));
}

#[test]
fn ping_over_failed_link_is_unreachable() {
    let t = pair().fail_link(crate::topology::LinkId(0)).unwrap();
    let p = assign_addresses(&t, "10.0.0.0/16".parse().unwrap()).unwrap();
    let r = crate::routing::compute_tables_lenient(&t, &p);
    let net = Network { topo: &t, tables: &r, profile: &DelayProfile::zero() };
    assert!(matches!(
        run_ping(&net, &id("a"), &id("b"), 1, 1.0, 1, &SimOptions::default()),
        Err(SimError::Routing(_))
    ));
}
