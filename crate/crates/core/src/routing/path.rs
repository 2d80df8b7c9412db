use std::net::Ipv4Addr;

use super::{NextHop, RoutingError, RoutingTables};
use crate::topology::{LinkId, NodeId, Topology};

/// A resolved end-to-end path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    /// Every node crossed, transparent devices included, `src` first.
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// Routing nodes after `src`, ending with `dst`.
    pub l3_hops: Vec<NodeId>,
    pub length_mm: u64,
}

impl Path {
    pub fn hop_count(&self) -> usize {
        self.l3_hops.len()
    }

    pub fn reversed(&self) -> Path {
        let mut l3_hops = Vec::new();
        if let Some((_, inner)) = self.l3_hops.split_last() {
            l3_hops.extend(inner.iter().rev().cloned());
            l3_hops.push(self.nodes[0].clone());
        }
        Path {
            nodes: self.nodes.iter().rev().cloned().collect(),
            links: self.links.iter().rev().copied().collect(),
            l3_hops,
            length_mm: self.length_mm,
        }
    }

    /// Sub-path from the source to `hop` (1-based L3 hop index).
    pub fn prefix_to_hop(&self, t: &Topology, hop: usize) -> Option<Path> {
        let target = self.l3_hops.get(hop.checked_sub(1)?)?;
        let end = self.nodes.iter().position(|n| n == target)?;
        let links = self.links[..end].to_vec();
        let length_mm = links.iter().filter_map(|l| t.link(*l)).map(|l| l.length_mm()).sum();
        Some(Path {
            nodes: self.nodes[..=end].to_vec(),
            links,
            l3_hops: self.l3_hops[..hop].to_vec(),
            length_mm,
        })
    }
}

/// Walks next hops for one destination address.
fn walk(tables: &RoutingTables, src: &NodeId, dst: &NodeId, addr: Ipv4Addr, limit: usize) -> Result<Path, RoutingError> {
    let no_route = || RoutingError::NoRoute {
        src: src.clone(),
        dst: dst.clone(),
    };
    let mut path = Path {
        nodes: vec![src.clone()],
        links: Vec::new(),
        l3_hops: Vec::new(),
        length_mm: 0,
    };
    let mut cur = src.clone();
    let mut steps = 0;
    while cur != *dst {
        if steps > limit {
            return Err(RoutingError::LoopDetected {
                src: src.clone(),
                dst: dst.clone(),
            });
        }
        steps += 1;
        let route = tables.lookup(&cur, addr).ok_or_else(no_route)?;
        let next = match &route.next_hop {
            NextHop::Connected => tables.owner(addr).ok_or_else(no_route)?.clone(),
            NextHop::Via { node, .. } => node.clone(),
        };
        let hop = tables.hop(&cur, &next).ok_or_else(no_route)?;
        path.nodes.extend(hop.via.iter().cloned());
        path.nodes.push(next.clone());
        path.links.extend(hop.links.iter().copied());
        path.l3_hops.push(next.clone());
        path.length_mm += hop.length_mm;
        cur = next;
    }
    Ok(path)
}

/// Path from `src` to `dst` by iterated longest-prefix lookup. When `dst`
/// has several addresses the shortest resulting path is used (hops, then
/// length, then plan order).
pub fn resolve_path(tables: &RoutingTables, t: &Topology, src: &NodeId, dst: &NodeId) -> Result<Path, RoutingError> {
    for n in [src, dst] {
        if t.node(n).is_none() {
            return Err(RoutingError::UnknownNode(n.clone()));
        }
        if tables.addresses(n).is_empty() {
            return Err(RoutingError::UnaddressedNode(n.clone()));
        }
    }
    if src == dst {
        return Ok(Path {
            nodes: vec![src.clone()],
            links: Vec::new(),
            l3_hops: Vec::new(),
            length_mm: 0,
        });
    }
    let limit = tables.routes.len();
    let mut best: Option<Path> = None;
    let mut last_err = None;
    for &addr in tables.addresses(dst) {
        match walk(tables, src, dst, addr, limit) {
            Ok(p) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| (p.hop_count(), p.length_mm) < (b.hop_count(), b.length_mm));
                if better {
                    best = Some(p);
                }
            }
            Err(e @ RoutingError::LoopDetected { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one address was tried"))
}
