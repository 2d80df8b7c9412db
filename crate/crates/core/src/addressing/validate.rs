use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::{overlaps, AddressPlan, SubnetRole};
use crate::topology::{Failure, NodeId, NodeKind, Topology, ValidationReport};

fn fail(message: impl Into<String>, elements: impl IntoIterator<Item = impl ToString>) -> Failure {
    Failure {
        message: message.into(),
        elements: elements.into_iter().map(|e| e.to_string()).collect(),
    }
}

pub fn validate_plan(p: &AddressPlan, t: &Topology) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.push("subnet-overlap", overlap(p));
    report.push("duplicate-address", duplicates(p));
    report.push("missing-gateway", gateways(p, t));
    report.push("address-off-link", off_link(p, t));
    report
}

fn overlap(p: &AddressPlan) -> Vec<Failure> {
    let mut out = Vec::new();
    for (i, a) in p.subnets.iter().enumerate() {
        for b in &p.subnets[i + 1..] {
            if overlaps(a.prefix, b.prefix) {
                out.push(fail("overlapping subnets", [a.prefix, b.prefix]));
            }
        }
    }
    out
}

fn duplicates(p: &AddressPlan) -> Vec<Failure> {
    let mut holders: BTreeMap<Ipv4Addr, Vec<&NodeId>> = BTreeMap::new();
    for (n, ifs) in &p.interfaces {
        for i in ifs {
            holders.entry(i.address).or_default().push(n);
        }
    }
    holders
        .into_iter()
        .filter(|(_, h)| h.len() > 1)
        .map(|(a, h)| {
            let mut el = vec![a.to_string()];
            el.extend(h.iter().map(|n| n.to_string()));
            fail("address held more than once", el)
        })
        .collect()
}

fn gateways(p: &AddressPlan, t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for n in t.servers() {
        let Some(rack) = n.rack.as_deref() else { continue };
        let intra = p.intra_rack_subnet(rack);
        let ifs = p.interfaces_of(&n.id);
        let on_intra = intra.is_some_and(|s| ifs.iter().any(|i| i.subnet == s));
        if !on_intra {
            out.push(fail("server has no rack address", [&n.id]));
            continue;
        }
        match n.kind {
            NodeKind::GatewayServer => {
                let outward = ifs
                    .iter()
                    .any(|i| p.subnets.get(i.subnet).is_some_and(|s| s.role != SubnetRole::IntraRack));
                if !outward {
                    out.push(fail("gateway-server lacks an inter-rack or OLT-facing address", [&n.id]));
                }
            }
            _ => {
                let Some(gw) = p.default_gateways.get(&n.id) else {
                    out.push(fail("server has no default gateway", [&n.id]));
                    continue;
                };
                let inside = ifs
                    .iter()
                    .filter_map(|i| p.subnets.get(i.subnet))
                    .any(|s| s.prefix.contains(gw));
                let owner_is_gateway = p
                    .owner_of(*gw)
                    .and_then(|o| t.node(o))
                    .is_some_and(|o| o.kind == NodeKind::GatewayServer && o.rack.as_deref() == Some(rack));
                if !inside || !owner_is_gateway {
                    out.push(fail(format!("default gateway {gw} is not the rack gateway on-link"), [&n.id]));
                }
            }
        }
    }
    out
}

fn off_link(p: &AddressPlan, t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for (n, ifs) in &p.interfaces {
        for i in ifs {
            let Some(s) = p.subnets.get(i.subnet) else {
                out.push(fail(format!("{} points at a missing subnet", i.name), [n]));
                continue;
            };
            let p30 = s.prefix.prefix_len() <= 30;
            let edge = p30 && (i.address == s.prefix.network() || i.address == s.prefix.broadcast());
            if !s.prefix.contains(&i.address) || edge {
                out.push(fail(format!("{} not a host address of {}", i.address, s.prefix), [n]));
            }
            if !s.members.contains(n) {
                out.push(fail(format!("{} is not on segment {}", n, s.prefix), [n]));
            }
        }
    }
    for n in t.nodes() {
        if n.kind.is_routing() && p.interfaces_of(&n.id).is_empty() {
            out.push(fail("routing node has no address", [&n.id]));
        }
    }
    // both ends of every segment must share its subnet
    for seg in t.segments() {
        let shared = p.subnets.iter().enumerate().any(|(idx, s)| {
            s.members == seg.members && seg.members.iter().all(|m| p.interface_on(m, idx).is_some())
        });
        if !shared {
            out.push(fail("segment members share no subnet", &seg.members));
        }
    }
    out
}
