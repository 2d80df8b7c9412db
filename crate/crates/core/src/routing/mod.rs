//! Static routing: per-node longest-prefix tables, iterated next-hop path
//! resolution, ranked alternative rack-to-rack routes and recomputation over
//! failed links.
//!
//! Route cost is (layer-3 hops, fibre length). Equal-cost candidates go to the
//! lowest next-hop node id.

mod alternatives;
mod path;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;

use crate::addressing::AddressPlan;
use crate::topology::{Adjacency, LinkId, NodeId, Topology};

pub use alternatives::{alternative_paths, RackRoute};
pub use path::{resolve_path, Path};

/// Ranked alternatives kept per rack pair in [`RoutingTables::alternatives`].
pub const DEFAULT_ALTERNATIVES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextHop {
    Connected,
    Via { node: NodeId, address: Ipv4Addr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub prefix: Ipv4Net,
    pub next_hop: NextHop,
    pub interface: String,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.next_hop {
            NextHop::Connected => write!(f, "route {} dev {}", self.prefix, self.interface),
            NextHop::Via { address, .. } => write!(f, "route {} via {}", self.prefix, address),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RoutingError {
    #[error("{node} cannot reach subnet {subnet}")]
    UnreachableSubnet { subnet: Ipv4Net, node: NodeId },
    #[error("no route from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId },
    #[error("routing loop between {src} and {dst}")]
    LoopDetected { src: NodeId, dst: NodeId },
    #[error("no node named {0}")]
    UnknownNode(NodeId),
    #[error("{0} has no address")]
    UnaddressedNode(NodeId),
}

/// Layer-2 expansion of one L3 adjacency, oriented from `from`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Hop {
    pub links: Vec<LinkId>,
    pub via: Vec<NodeId>,
    pub length_mm: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTables {
    /// Per node, most specific prefix first; a default route, when present,
    /// comes last.
    pub routes: BTreeMap<NodeId, Vec<Route>>,
    pub alternatives: BTreeMap<(String, String), Vec<RackRoute>>,
    /// Subnets no node of the largest connected component can reach.
    pub unreachable: Vec<Ipv4Net>,
    alternatives_k: usize,
    hops: HashMap<(NodeId, NodeId), Hop>,
    owners: BTreeMap<Ipv4Addr, NodeId>,
    addresses: BTreeMap<NodeId, Vec<Ipv4Addr>>,
}

impl RoutingTables {
    pub fn table(&self, node: &NodeId) -> &[Route] {
        self.routes.get(node).map_or(&[], Vec::as_slice)
    }

    /// Longest-prefix match.
    pub fn lookup(&self, node: &NodeId, addr: Ipv4Addr) -> Option<&Route> {
        self.table(node).iter().find(|r| r.prefix.contains(&addr))
    }

    pub(crate) fn hop(&self, from: &NodeId, to: &NodeId) -> Option<&Hop> {
        self.hops.get(&(from.clone(), to.clone()))
    }

    pub(crate) fn owner(&self, addr: Ipv4Addr) -> Option<&NodeId> {
        self.owners.get(&addr)
    }

    pub(crate) fn addresses(&self, node: &NodeId) -> &[Ipv4Addr] {
        self.addresses.get(node).map_or(&[], Vec::as_slice)
    }

    /// Table of `node` in the `route <prefix> via <next-hop>` grammar.
    pub fn render(&self, node: &NodeId) -> String {
        self.table(node).iter().map(|r| format!("{r}\n")).collect()
    }
}

fn hops_from(adjs: &[Adjacency]) -> HashMap<(NodeId, NodeId), Hop> {
    let mut out = HashMap::new();
    for a in adjs {
        out.insert(
            (a.a.clone(), a.b.clone()),
            Hop {
                links: a.links.clone(),
                via: a.via.clone(),
                length_mm: a.length_mm,
            },
        );
        out.insert(
            (a.b.clone(), a.a.clone()),
            Hop {
                links: a.links.iter().rev().copied().collect(),
                via: a.via.iter().rev().cloned().collect(),
                length_mm: a.length_mm,
            },
        );
    }
    out
}

type Cost = (u32, u64);

/// What the route computation derives from (topology, plan) before any table
/// is filled in.
struct Graph<'a> {
    plan: &'a AddressPlan,
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    /// Neighbour, link length, sorted by neighbour id.
    adj: Vec<Vec<(usize, u64)>>,
    hops: HashMap<(NodeId, NodeId), Hop>,
}

impl<'a> Graph<'a> {
    fn new(t: &Topology, plan: &'a AddressPlan) -> Self {
        let nodes: Vec<NodeId> = plan.interfaces.keys().filter(|n| t.node(n).is_some()).cloned().collect();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let adjs = t.l3_adjacencies();
        let mut adj = vec![Vec::new(); nodes.len()];
        for a in &adjs {
            let (Some(&i), Some(&j)) = (index.get(&a.a), index.get(&a.b)) else { continue };
            if plan.shared_subnet(&a.a, &a.b).is_none() {
                continue;
            }
            adj[i].push((j, a.length_mm));
            adj[j].push((i, a.length_mm));
        }
        for list in &mut adj {
            list.sort_by(|x, y| nodes[x.0].cmp(&nodes[y.0]));
        }
        Graph {
            plan,
            nodes,
            index,
            adj,
            hops: hops_from(&adjs),
        }
    }

    /// Whether `node` has a working interface on subnet `s`.
    fn attached(&self, t: &Topology, node: &NodeId, s: usize) -> bool {
        if self.plan.interface_on(node, s).is_none() {
            return false;
        }
        let sub = &self.plan.subnets[s];
        if sub.members.len() == 1 {
            return sub
                .links
                .iter()
                .filter_map(|l| t.link(*l))
                .any(|l| l.is_up() && l.endpoints.contains(node));
        }
        sub.members
            .iter()
            .any(|m| m != node && self.hops.contains_key(&(node.clone(), m.clone())))
    }

    fn distances(&self, sources: &[usize]) -> Vec<Option<Cost>> {
        let mut dist: Vec<Option<Cost>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = Some((0, 0));
            heap.push(Reverse(((0u32, 0u64), s)));
        }
        while let Some(Reverse((c, u))) = heap.pop() {
            if dist[u] != Some(c) {
                continue;
            }
            for &(v, len) in &self.adj[u] {
                let nc = (c.0 + 1, c.1 + len);
                if dist[v].is_none_or(|d| nc < d) {
                    dist[v] = Some(nc);
                    heap.push(Reverse((nc, v)));
                }
            }
        }
        dist
    }

    /// Connected components, largest first, ties to the lowest member id.
    fn components(&self) -> Vec<BTreeSet<usize>> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            out.push(comp);
        }
        out.sort_by_key(|c| Reverse(c.len()));
        out
    }
}

fn build(t: &Topology, p: &AddressPlan, alternatives_k: usize) -> (RoutingTables, Vec<(Ipv4Net, NodeId)>) {
    let g = Graph::new(t, p);
    let mut routes: BTreeMap<NodeId, Vec<Route>> = g.nodes.iter().map(|n| (n.clone(), Vec::new())).collect();
    let mut missing = Vec::new();

    for (s, sub) in p.subnets.iter().enumerate() {
        let sources: Vec<usize> = sub
            .members
            .iter()
            .filter(|m| g.attached(t, m, s))
            .filter_map(|m| g.index.get(m).copied())
            .collect();
        let dist = g.distances(&sources);
        for (v, id) in g.nodes.iter().enumerate() {
            let entry = if sources.contains(&v) {
                let iface = p.interface_on(id, s).expect("attached nodes hold an address");
                Some(Route {
                    prefix: sub.prefix,
                    next_hop: NextHop::Connected,
                    interface: iface.name.clone(),
                })
            } else if let Some(d) = dist[v] {
                // neighbours are sorted by id, so the first minimum wins ties
                let (u, _) = g.adj[v]
                    .iter()
                    .filter_map(|&(u, len)| dist[u].map(|du| (u, (du.0 + 1, du.1 + len))))
                    .find(|&(_, c)| c == d)
                    .expect("a finite distance has a predecessor");
                let nh = &g.nodes[u];
                let shared = p.shared_subnet(id, nh).expect("graph edges share a subnet");
                Some(Route {
                    prefix: sub.prefix,
                    next_hop: NextHop::Via {
                        node: nh.clone(),
                        address: p.interface_on(nh, shared).expect("shared").address,
                    },
                    interface: p.interface_on(id, shared).expect("shared").name.clone(),
                })
            } else {
                missing.push((sub.prefix, id.clone()));
                None
            };
            if let Some(r) = entry {
                routes.get_mut(id).expect("every node has a table").push(r);
            }
        }
    }

    for (node, table) in routes.iter_mut() {
        table.sort_by(|a, b| {
            (Reverse(a.prefix.prefix_len()), a.prefix.network()).cmp(&(Reverse(b.prefix.prefix_len()), b.prefix.network()))
        });
        if let Some(&gw) = p.default_gateways.get(node) {
            let Some(owner) = p.owner_of(gw) else { continue };
            let Some(shared) = p.shared_subnet(node, owner) else { continue };
            table.push(Route {
                prefix: Ipv4Net::default(),
                next_hop: NextHop::Via {
                    node: owner.clone(),
                    address: gw,
                },
                interface: p.interface_on(node, shared).expect("shared").name.clone(),
            });
        }
    }

    let main = g.components().into_iter().next().unwrap_or_default();
    let main_ids: BTreeSet<&NodeId> = main.iter().map(|&i| &g.nodes[i]).collect();
    let unreachable: Vec<Ipv4Net> = p
        .subnets
        .iter()
        .enumerate()
        .filter(|(s, sub)| {
            !sub.members.iter().any(|m| main_ids.contains(m) && g.attached(t, m, *s))
        })
        .map(|(_, sub)| sub.prefix)
        .collect();

    let owners = p
        .interfaces
        .iter()
        .flat_map(|(n, ifs)| ifs.iter().map(move |i| (i.address, n.clone())))
        .collect();
    let addresses = p.interfaces.iter().map(|(n, ifs)| (n.clone(), ifs.iter().map(|i| i.address).collect())).collect();

    let mut alternatives = BTreeMap::new();
    let racks: Vec<String> = t.racks().into_iter().collect();
    for a in &racks {
        for b in &racks {
            if a != b {
                alternatives.insert((a.clone(), b.clone()), alternative_paths(t, p, a, b, alternatives_k));
            }
        }
    }

    let tables = RoutingTables {
        routes,
        alternatives,
        unreachable,
        alternatives_k,
        hops: g.hops,
        owners,
        addresses,
    };
    (tables, missing)
}

/// Tables for every addressed node towards every subnet. Fails if any node
/// cannot reach some subnet over up links.
pub fn compute_tables(t: &Topology, p: &AddressPlan) -> Result<RoutingTables, RoutingError> {
    let (tables, missing) = build(t, p, DEFAULT_ALTERNATIVES);
    match missing.into_iter().next() {
        Some((subnet, node)) => Err(RoutingError::UnreachableSubnet { subnet, node }),
        None => Ok(tables),
    }
}

/// Recomputes `prev` for the link state of `t`. Never fails: destinations
/// that cannot be reached get no entry, and subnets cut off from the largest
/// component are listed in [`RoutingTables::unreachable`].
pub fn reroute_on_failure(prev: &RoutingTables, t: &Topology, p: &AddressPlan) -> RoutingTables {
    build(t, p, prev.alternatives_k).0
}

/// Same as [`reroute_on_failure`] without a previous table.
pub fn compute_tables_lenient(t: &Topology, p: &AddressPlan) -> RoutingTables {
    build(t, p, DEFAULT_ALTERNATIVES).0
}
