use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::addressing::AddressPlan;
use crate::topology::{LinkId, NodeId, NodeKind, Topology};

/// Rack-to-rack route: leaves `src_rack` at one of its servers and enters
/// `dst_rack` at one of its servers, touching neither rack in between.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RackRoute {
    /// Routing nodes, first in the source rack, last in the destination rack.
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub hops: u32,
    pub length_mm: u64,
    pub via_olt: bool,
}

struct Net<'a> {
    t: &'a Topology,
    nodes: Vec<NodeId>,
    /// Neighbour, links, length; sorted by neighbour id.
    adj: Vec<Vec<(usize, Vec<LinkId>, u64)>>,
}

type State = (usize, bool);

impl<'a> Net<'a> {
    fn new(t: &'a Topology, p: &AddressPlan) -> Self {
        let nodes: Vec<NodeId> = p.interfaces.keys().filter(|n| t.node(n).is_some()).cloned().collect();
        let index: HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for a in t.l3_adjacencies() {
            let (Some(&i), Some(&j)) = (index.get(&a.a), index.get(&a.b)) else { continue };
            adj[i].push((j, a.links.clone(), a.length_mm));
            adj[j].push((i, a.links.iter().rev().copied().collect(), a.length_mm));
        }
        for list in &mut adj {
            list.sort_by(|x, y| nodes[x.0].cmp(&nodes[y.0]));
        }
        Net { t, nodes, adj }
    }

    fn rack(&self, i: usize) -> Option<&str> {
        self.t.node(&self.nodes[i]).and_then(|n| n.rack.as_deref())
    }

    fn is_olt(&self, i: usize) -> bool {
        self.t.node(&self.nodes[i]).is_some_and(|n| n.kind == NodeKind::Olt)
    }

    /// Cheapest route avoiding `forbidden`; with `need_olt`, only routes
    /// through an OLT count.
    fn search(&self, src: &str, dst: &str, forbidden: &BTreeSet<LinkId>, need_olt: bool) -> Option<RackRoute> {
        let mut dist: HashMap<State, (u32, u64)> = HashMap::new();
        let mut pred: HashMap<State, (State, usize)> = HashMap::new();
        let mut heap = BinaryHeap::new();
        for i in 0..self.nodes.len() {
            if self.rack(i) == Some(src) {
                dist.insert((i, false), (0, 0));
                heap.push(Reverse(((0u32, 0u64), i, false)));
            }
        }
        // (cost, terminal node, predecessor state, edge index)
        let mut best: Option<((u32, u64), usize, State, usize)> = None;
        while let Some(Reverse((c, u, flag))) = heap.pop() {
            if dist.get(&(u, flag)) != Some(&c) {
                continue;
            }
            for (e, (v, links, len)) in self.adj[u].iter().enumerate() {
                if links.iter().any(|l| forbidden.contains(l)) {
                    continue;
                }
                let nc = (c.0 + 1, c.1 + len);
                match self.rack(*v) {
                    Some(r) if r == src => continue,
                    Some(r) if r == dst => {
                        if need_olt && !flag {
                            continue;
                        }
                        let cand = (nc, *v, (u, flag), e);
                        let better = best
                            .as_ref()
                            .is_none_or(|b| (nc, &self.nodes[*v]) < (b.0, &self.nodes[b.1]));
                        if better {
                            best = Some(cand);
                        }
                    }
                    _ => {
                        let nf = flag || self.is_olt(*v);
                        if dist.get(&(*v, nf)).is_none_or(|d| nc < *d) {
                            dist.insert((*v, nf), nc);
                            pred.insert((*v, nf), ((u, flag), e));
                            heap.push(Reverse((nc, *v, nf)));
                        }
                    }
                }
            }
        }

        let (cost, end, mut state, mut edge) = best?;
        let mut idx = vec![end];
        let mut links_rev: Vec<Vec<LinkId>> = Vec::new();
        loop {
            links_rev.push(self.adj[state.0][edge].1.clone());
            idx.push(state.0);
            match pred.get(&state) {
                Some(&(p, e)) => {
                    state = p;
                    edge = e;
                }
                None => break,
            }
        }
        idx.reverse();
        let distinct: BTreeSet<usize> = idx.iter().copied().collect();
        if distinct.len() != idx.len() {
            return None;
        }
        Some(RackRoute {
            via_olt: idx.iter().any(|&i| self.is_olt(i)),
            nodes: idx.iter().map(|&i| self.nodes[i].clone()).collect(),
            links: links_rev.into_iter().rev().flatten().collect(),
            hops: cost.0,
            length_mm: cost.1,
        })
    }
}

/// Up to `k` link-disjoint rack-level routes ranked by hop count then fibre
/// length. Routes are picked greedily, cheapest first; when `k ≥ 2` and none
/// of the picks crosses the OLT, the cheapest OLT route disjoint from the
/// first pick takes the last slot.
pub fn alternative_paths(t: &Topology, p: &AddressPlan, src_rack: &str, dst_rack: &str, k: usize) -> Vec<RackRoute> {
    if k == 0 || src_rack == dst_rack {
        return Vec::new();
    }
    let net = Net::new(t, p);
    let mut routes: Vec<RackRoute> = Vec::new();
    let mut forbidden = BTreeSet::new();
    while routes.len() < k {
        let Some(r) = net.search(src_rack, dst_rack, &forbidden, false) else { break };
        forbidden.extend(r.links.iter().copied());
        routes.push(r);
    }
    if k >= 2 && !routes.is_empty() && !routes.iter().any(|r| r.via_olt) {
        let first: BTreeSet<LinkId> = routes[0].links.iter().copied().collect();
        if let Some(r) = net.search(src_rack, dst_rack, &first, true) {
            if routes.len() == k {
                routes.pop();
            }
            routes.push(r);
        }
    }
    routes.sort_by_key(|r| (r.hops, r.length_mm));
    routes
}
