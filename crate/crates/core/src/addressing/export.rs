use std::fmt::Write;

use super::{AddressPlan, AddressingError};
use crate::routing::{compute_tables_lenient, NextHop};
use crate::topology::{NodeId, Topology};

/// Line-oriented configuration of one node:
///
/// ```text
/// # node r1-g1-s1 gateway-server
/// iface eth0 addr 10.0.0.1/24
/// route 10.0.1.0/24 via 10.0.3.2
/// route 0.0.0.0/0 via 10.0.0.1
/// ```
///
/// Connected subnets are implied by the `iface` lines. Routes whose next hop
/// is the node's default gateway are folded into the default route.
pub fn export_node_config(p: &AddressPlan, t: &Topology, node: &NodeId) -> Result<String, AddressingError> {
    let spec = t.node(node).ok_or_else(|| AddressingError::UnknownNode(node.clone()))?;
    let ifs = p.interfaces_of(node);
    if ifs.is_empty() {
        return Err(AddressingError::UnaddressedNode(node.clone()));
    }
    let tables = compute_tables_lenient(t, p);

    let mut out = String::new();
    writeln!(out, "# node {} {}", node, spec.kind).unwrap();
    for i in ifs {
        let len = p.subnets[i.subnet].prefix.prefix_len();
        writeln!(out, "iface {} addr {}/{}", i.name, i.address, len).unwrap();
    }
    let gw = p.default_gateways.get(node).copied();
    for r in tables.table(node) {
        let NextHop::Via { address, .. } = &r.next_hop else { continue };
        if r.prefix.prefix_len() == 0 || Some(*address) == gw {
            continue;
        }
        writeln!(out, "route {} via {}", r.prefix, address).unwrap();
    }
    if let Some(gw) = gw {
        writeln!(out, "route 0.0.0.0/0 via {gw}").unwrap();
    }
    Ok(out)
}
