//! Reference answers computed straight from the link list, sharing no code
//! with the library's layer-3 machinery.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use ponsim::topology::{NodeId, NodeKind, Topology};

/// Fewest layer-3 hops from `src` to every routing node it can reach.
///
/// 0-1 BFS over (node, arriving link): entering a routing node costs one,
/// anything else is free. A splitter only passes traffic when one of the two
/// links it joins leads to an OLT.
pub fn l3_hops_from(t: &Topology, src: &NodeId) -> BTreeMap<NodeId, u32> {
    let nodes = t.nodes();
    let idx: HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let mut inc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for (li, l) in t.links().iter().enumerate() {
        if l.down {
            continue;
        }
        let (Some(&a), Some(&b)) = (idx.get(&l.endpoints[0]), idx.get(&l.endpoints[1])) else { continue };
        inc[a].push((li, b));
        inc[b].push((li, a));
    }
    let kind = |i: usize| nodes[i].kind;
    let routing = |k: NodeKind| matches!(
        k,
        NodeKind::Server | NodeKind::GatewayServer | NodeKind::Olt | NodeKind::WdmCoreNode | NodeKind::EndpointHost
    );
    let olt_link = |li: usize| {
        t.links()[li]
            .endpoints
            .iter()
            .any(|e| idx.get(e).is_some_and(|&i| kind(i) == NodeKind::Olt))
    };

    let s = idx[src];
    // state: (node, arriving link or usize::MAX at a routing node)
    let mut best: HashMap<(usize, usize), u32> = HashMap::new();
    let mut dq = VecDeque::new();
    best.insert((s, usize::MAX), 0);
    dq.push_back((0u32, s, usize::MAX));
    while let Some((d, v, via)) = dq.pop_front() {
        if best.get(&(v, via)).is_some_and(|&b| b < d) {
            continue;
        }
        for &(li, w) in &inc[v] {
            if via != usize::MAX {
                if li == via {
                    continue;
                }
                if matches!(kind(v), NodeKind::Coupler | NodeKind::Awgr) && !olt_link(li) && !olt_link(via) {
                    continue;
                }
            }
            let (nd, state) = if routing(kind(w)) { (d + 1, (w, usize::MAX)) } else { (d, (w, li)) };
            if best.get(&state).is_none_or(|&b| nd < b) {
                best.insert(state, nd);
                if nd == d {
                    dq.push_front((nd, state.0, state.1));
                } else {
                    dq.push_back((nd, state.0, state.1));
                }
            }
        }
    }
    best.into_iter()
        .filter(|((v, via), _)| *via == usize::MAX && *v != s)
        .map(|((v, _), d)| (nodes[v].id.clone(), d))
        .collect()
}

/// Lexicographic (hops, millimetres) shortest distances over a graph in
/// which every node routes.
pub fn hops_and_length_from(t: &Topology, src: &NodeId) -> BTreeMap<NodeId, (u32, u64)> {
    let mut dist: BTreeMap<NodeId, (u32, u64)> = BTreeMap::new();
    dist.insert(src.clone(), (0, 0));
    // Bellman-Ford: small graphs, and nothing like the library's Dijkstra
    for _ in 0..t.nodes().len() {
        let mut changed = false;
        for l in t.links().iter().filter(|l| !l.down) {
            let mm = (l.length_km * 1e6).round() as u64;
            for (a, b) in [(&l.endpoints[0], &l.endpoints[1]), (&l.endpoints[1], &l.endpoints[0])] {
                if let Some(&(h, m)) = dist.get(a) {
                    let cand = (h + 1, m + mm);
                    if dist.get(b).is_none_or(|&cur| cand < cur) {
                        dist.insert(b.clone(), cand);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist.remove(src);
    dist
}

fn is_routing(k: NodeKind) -> bool {
    matches!(
        k,
        NodeKind::Server | NodeKind::GatewayServer | NodeKind::Olt | NodeKind::WdmCoreNode | NodeKind::EndpointHost
    )
}

/// Routing-node adjacency through transparent devices only, with the
/// shortest fibre length behind each pair.
pub fn l3_graph(t: &Topology) -> BTreeMap<NodeId, BTreeMap<NodeId, u64>> {
    let nodes = t.nodes();
    let idx: HashMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let mut inc: Vec<Vec<(usize, usize, u64)>> = vec![Vec::new(); nodes.len()];
    for (li, l) in t.links().iter().enumerate() {
        if l.down {
            continue;
        }
        let (Some(&a), Some(&b)) = (idx.get(&l.endpoints[0]), idx.get(&l.endpoints[1])) else { continue };
        let mm = (l.length_km * 1e6).round() as u64;
        inc[a].push((li, b, mm));
        inc[b].push((li, a, mm));
    }
    let olt_link = |li: usize| {
        t.links()[li]
            .endpoints
            .iter()
            .any(|e| idx.get(e).is_some_and(|&i| nodes[i].kind == NodeKind::Olt))
    };
    let mut g: BTreeMap<NodeId, BTreeMap<NodeId, u64>> = BTreeMap::new();
    for (s, n) in nodes.iter().enumerate().filter(|(_, n)| is_routing(n.kind)) {
        let out = g.entry(n.id.clone()).or_default();
        // exhaustive walk over transparent states; graphs here are tiny
        let mut stack: Vec<(usize, usize, u64, Vec<usize>)> = inc[s].iter().map(|&(li, w, mm)| (w, li, mm, vec![li])).collect();
        while let Some((v, via, mm, used)) = stack.pop() {
            if is_routing(nodes[v].kind) {
                if v != s {
                    let e = out.entry(nodes[v].id.clone()).or_insert(u64::MAX);
                    *e = (*e).min(mm);
                }
                continue;
            }
            for &(li, w, l_mm) in &inc[v] {
                if li == via || used.contains(&li) {
                    continue;
                }
                if matches!(nodes[v].kind, NodeKind::Coupler | NodeKind::Awgr) && !olt_link(li) && !olt_link(via) {
                    continue;
                }
                let mut u = used.clone();
                u.push(li);
                stack.push((w, li, mm + l_mm, u));
            }
        }
    }
    g
}

/// Links of the trunks joining racks: anything touching a media converter,
/// or a direct server-to-server link across racks.
pub fn inter_rack_links(t: &Topology) -> Vec<ponsim::topology::LinkId> {
    t.links()
        .iter()
        .filter(|l| {
            let n: Vec<_> = l.endpoints.iter().filter_map(|e| t.node(e)).collect();
            n.iter().any(|n| n.kind == NodeKind::MediaConverter)
                || (n.len() == 2 && n[0].rack.is_some() && n[1].rack.is_some() && n[0].rack != n[1].rack)
        })
        .map(|l| l.id)
        .collect()
}
