//! Routing-node adjacency across transparent layer-2 devices.
//!
//! Switches, media converters and ONUs forward everything. A coupler or AWGR
//! only forwards between its OLT-side trunk and an ONU-side branch, so two
//! racks on the same splitter are not adjacent to each other, only to the OLT.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::{LinkId, NodeId, NodeKind, Topology};

/// Two routing nodes that can reach each other at layer 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    /// Lower node id.
    pub a: NodeId,
    pub b: NodeId,
    /// Links from `a` to `b`, in order.
    pub links: Vec<LinkId>,
    /// Transparent devices between `a` and `b`, in order.
    pub via: Vec<NodeId>,
    pub length_mm: u64,
}

/// Routing nodes sharing one broadcast domain; becomes one subnet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub members: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

type State = (usize, usize); // (node index, link position it was entered by)

fn usable(t: &Topology, pos: usize, include_down: bool) -> bool {
    include_down || t.links()[pos].is_up()
}

/// Whether a splitter at `node` may pass traffic in on `a` and out on `b`.
fn splitter_allows(t: &Topology, node: &NodeId, a: usize, b: usize) -> bool {
    let to_olt = |pos: usize| {
        t.links()[pos]
            .other(node)
            .and_then(|o| t.node(o))
            .is_some_and(|n| n.kind == NodeKind::Olt)
    };
    to_olt(a) || to_olt(b)
}

/// Best layer-2 path from routing node `src` to every routing node it reaches.
fn reach_from(t: &Topology, src: usize, include_down: bool) -> BTreeMap<usize, (u64, u32, Vec<usize>)> {
    let nodes = t.nodes();
    let src_id = &nodes[src].id;
    let mut found: BTreeMap<usize, (u64, u32, Vec<usize>)> = BTreeMap::new();
    let mut best: HashMap<State, (u64, u32)> = HashMap::new();
    let mut pred: HashMap<State, Option<State>> = HashMap::new();
    let mut heap = BinaryHeap::new();

    let path_to = |pred: &HashMap<State, Option<State>>, mut s: State| {
        let mut links = vec![s.1];
        while let Some(Some(p)) = pred.get(&s) {
            links.push(p.1);
            s = *p;
        }
        links.reverse();
        links
    };
    let offer = |found: &mut BTreeMap<usize, (u64, u32, Vec<usize>)>, dst: usize, len: u64, hops: u32, links: Vec<usize>| {
        let better = found.get(&dst).is_none_or(|&(l, h, _)| (len, hops) < (l, h));
        if better {
            found.insert(dst, (len, hops, links));
        }
    };

    for &pos in t.incident_positions(src) {
        if !usable(t, pos, include_down) {
            continue;
        }
        let l = &t.links()[pos];
        let Some(x) = l.other(src_id).and_then(|o| t.index_of(o)) else { continue };
        if x == src {
            continue;
        }
        let len = l.length_mm();
        if nodes[x].kind.is_routing() {
            offer(&mut found, x, len, 1, vec![pos]);
        } else if best.get(&(x, pos)).is_none_or(|&c| (len, 1) < c) {
            best.insert((x, pos), (len, 1));
            pred.insert((x, pos), None);
            heap.push(Reverse((len, 1u32, x, pos)));
        }
    }

    while let Some(Reverse((len, hops, x, lin))) = heap.pop() {
        if best.get(&(x, lin)) != Some(&(len, hops)) {
            continue;
        }
        let x_id = &nodes[x].id;
        let splitter = nodes[x].kind.is_splitter();
        for &pos in t.incident_positions(x) {
            if pos == lin || !usable(t, pos, include_down) {
                continue;
            }
            if splitter && !splitter_allows(t, x_id, lin, pos) {
                continue;
            }
            let l = &t.links()[pos];
            let Some(y) = l.other(x_id).and_then(|o| t.index_of(o)) else { continue };
            if y == src {
                continue;
            }
            let cost = (len + l.length_mm(), hops + 1);
            if nodes[y].kind.is_routing() {
                let mut links = path_to(&pred, (x, lin));
                links.push(pos);
                offer(&mut found, y, cost.0, cost.1, links);
            } else if best.get(&(y, pos)).is_none_or(|&c| cost < c) {
                best.insert((y, pos), cost);
                pred.insert((y, pos), Some((x, lin)));
                heap.push(Reverse((cost.0, cost.1, y, pos)));
            }
        }
    }
    found
}

pub(super) fn adjacencies(t: &Topology, include_down: bool) -> Vec<Adjacency> {
    let nodes = t.nodes();
    let mut out = Vec::new();
    for (u, spec) in nodes.iter().enumerate() {
        if !spec.kind.is_routing() || t.index_of(&spec.id) != Some(u) {
            continue;
        }
        for (v, (length_mm, _, positions)) in reach_from(t, u, include_down) {
            if nodes[v].id <= spec.id {
                continue;
            }
            let mut via = Vec::new();
            let mut cur = spec.id.clone();
            for &pos in &positions[..positions.len() - 1] {
                let next = t.links()[pos].other(&cur).expect("path links are incident").clone();
                via.push(next.clone());
                cur = next;
            }
            out.push(Adjacency {
                a: spec.id.clone(),
                b: nodes[v].id.clone(),
                links: positions.iter().map(|&p| t.links()[p].id).collect(),
                via,
                length_mm,
            });
        }
    }
    out.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub(super) fn segments(t: &Topology) -> Vec<Segment> {
    let nodes = t.nodes();
    let links = t.links();
    // links sharing a transparent endpoint belong to one layer-2 component
    let mut parent: Vec<usize> = (0..links.len()).collect();
    for (idx, n) in nodes.iter().enumerate() {
        if n.kind.is_routing() {
            continue;
        }
        let inc = t.incident_positions(idx);
        for w in inc.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a.max(b)] = a.min(b);
        }
    }

    let mut members: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    let mut comp_links: BTreeMap<usize, Vec<LinkId>> = BTreeMap::new();
    for (pos, l) in links.iter().enumerate() {
        if l.endpoints.iter().any(|e| t.node(e).is_none()) {
            continue;
        }
        let c = find(&mut parent, pos);
        comp_links.entry(c).or_default().push(l.id);
        for e in &l.endpoints {
            if t.node(e).is_some_and(|n| n.kind.is_routing()) {
                let m = members.entry(c).or_default();
                if !m.contains(e) {
                    m.push(e.clone());
                }
            }
        }
    }

    let link_pos: HashMap<LinkId, usize> = links.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
    let mut by_comp: BTreeMap<usize, Vec<Adjacency>> = BTreeMap::new();
    for adj in adjacencies(t, true) {
        let c = find(&mut parent, link_pos[&adj.links[0]]);
        by_comp.entry(c).or_default().push(adj);
    }

    let mut out = Vec::new();
    for (c, mut m) in members {
        m.sort();
        let adjs = by_comp.remove(&c).unwrap_or_default();
        let k = m.len();
        if adjs.len() == k * (k - 1) / 2 {
            out.push(Segment {
                members: m,
                links: comp_links.remove(&c).unwrap_or_default(),
            });
        } else {
            for adj in adjs {
                out.push(Segment {
                    members: vec![adj.a, adj.b],
                    links: adj.links,
                });
            }
        }
    }
    out
}
