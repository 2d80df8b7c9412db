//! Typed graph of a PON-cell data centre and its attached IP/WDM core chain.
//!
//! A [`Topology`] is an immutable value: mutating operations such as
//! [`Topology::fail_link`] return a new topology. It may hold structurally
//! invalid data (dangling references, duplicate ids) so that
//! [`Topology::validate`] can report on imported documents; builder output
//! always validates cleanly.

mod builder;
mod l3;
mod validate;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use builder::{build_cell, CellSpec, Wiring};
pub use l3::{Adjacency, Segment};
pub use validate::{CheckResult, Failure, ValidationReport};

/// Default line rate of rack and lab links (the Cisco switch ports).
pub const DEFAULT_RATE_BPS: u64 = 10_000_000_000;

/// Node identifier, unique across a topology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Link identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "link#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Server,
    GatewayServer,
    ElectronicSwitch,
    MediaConverter,
    Onu,
    Olt,
    Coupler,
    Awgr,
    WdmCoreNode,
    EndpointHost,
}

impl NodeKind {
    pub const ALL: [NodeKind; 10] = [
        NodeKind::Server,
        NodeKind::GatewayServer,
        NodeKind::ElectronicSwitch,
        NodeKind::MediaConverter,
        NodeKind::Onu,
        NodeKind::Olt,
        NodeKind::Coupler,
        NodeKind::Awgr,
        NodeKind::WdmCoreNode,
        NodeKind::EndpointHost,
    ];

    /// Nodes that terminate IP and count as traceroute hops. Everything else
    /// is forwarded transparently at layer 2.
    pub fn is_routing(self) -> bool {
        matches!(
            self,
            NodeKind::Server
                | NodeKind::GatewayServer
                | NodeKind::Olt
                | NodeKind::WdmCoreNode
                | NodeKind::EndpointHost
        )
    }

    /// Servers carry rack and group membership.
    pub fn is_server(self) -> bool {
        matches!(self, NodeKind::Server | NodeKind::GatewayServer)
    }

    /// Passive point-to-multipoint devices between ONUs and the OLT.
    pub fn is_splitter(self) -> bool {
        matches!(self, NodeKind::Coupler | NodeKind::Awgr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Server => "server",
            NodeKind::GatewayServer => "gateway-server",
            NodeKind::ElectronicSwitch => "electronic-switch",
            NodeKind::MediaConverter => "media-converter",
            NodeKind::Onu => "onu",
            NodeKind::Olt => "olt",
            NodeKind::Coupler => "coupler",
            NodeKind::Awgr => "awgr",
            NodeKind::WdmCoreNode => "wdm-core-node",
            NodeKind::EndpointHost => "endpoint-host",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Medium {
    Electrical,
    OpticalFiber,
    OpticalBackplane,
}

/// How the racks of a cell reach the OLT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provisioning {
    CouplerTdm,
    AwgrWdm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rack: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u32>,
    /// Replaces the per-kind forwarding delay of the delay profile (µs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_override_us: Option<f64>,
}

impl NodeSpec {
    pub fn new(id: impl Into<NodeId>, kind: NodeKind) -> Self {
        NodeSpec {
            id: id.into(),
            kind,
            rack: None,
            group: None,
            delay_override_us: None,
        }
    }

    pub fn server(id: impl Into<NodeId>, kind: NodeKind, rack: &str, group: u32) -> Self {
        NodeSpec {
            rack: Some(rack.to_owned()),
            group: Some(group),
            ..NodeSpec::new(id, kind)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: LinkId,
    pub endpoints: [NodeId; 2],
    pub medium: Medium,
    pub length_km: f64,
    pub rate_bps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelengths: Option<u32>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub down: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl LinkSpec {
    pub fn new(id: u32, a: impl Into<NodeId>, b: impl Into<NodeId>, medium: Medium, length_km: f64) -> Self {
        LinkSpec {
            id: LinkId(id),
            endpoints: [a.into(), b.into()],
            medium,
            length_km,
            rate_bps: DEFAULT_RATE_BPS,
            wavelengths: None,
            down: false,
        }
    }

    pub fn with_rate(mut self, rate_bps: u64) -> Self {
        self.rate_bps = rate_bps;
        self
    }

    pub fn with_wavelengths(mut self, n: u32) -> Self {
        self.wavelengths = Some(n);
        self
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: &NodeId) -> Option<&NodeId> {
        if &self.endpoints[0] == node {
            Some(&self.endpoints[1])
        } else if &self.endpoints[1] == node {
            Some(&self.endpoints[0])
        } else {
            None
        }
    }

    pub fn is_up(&self) -> bool {
        !self.down
    }

    /// Length in whole millimetres, the integer key used for route costs.
    pub(crate) fn length_mm(&self) -> u64 {
        (self.length_km.max(0.0) * 1e6).round() as u64
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid span {index}: {km} km (spans must be > 0)")]
    InvalidSpan { index: usize, km: f64 },
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("topology has no OLT to root the core chain at")]
    MissingOlt,
    #[error("topology has {0} OLTs; the core chain needs exactly one root")]
    AmbiguousOlt(usize),
    #[error("node id `{0}` already exists")]
    DuplicateNode(NodeId),
    #[error("malformed topology document: {0}")]
    Parse(String),
}

/// Serialized shape of a topology document.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    provisioning: Provisioning,
    #[serde(default)]
    nodes: Vec<NodeSpec>,
    #[serde(default)]
    links: Vec<LinkSpec>,
}

#[derive(Debug, Clone)]
pub struct Topology {
    provisioning: Provisioning,
    nodes: Vec<NodeSpec>,
    links: Vec<LinkSpec>,
    warnings: Vec<String>,
    node_index: HashMap<NodeId, usize>,
    link_index: HashMap<LinkId, usize>,
    // link positions incident to each node, in link order
    incidence: Vec<Vec<usize>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.provisioning == other.provisioning
            && self.nodes == other.nodes
            && self.links == other.links
    }
}

impl Topology {
    /// Assembles a topology without checking it. Use [`Topology::validate`]
    /// on anything that did not come from the builder.
    pub fn new(provisioning: Provisioning, nodes: Vec<NodeSpec>, links: Vec<LinkSpec>) -> Self {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            node_index.entry(n.id.clone()).or_insert(i);
        }
        let mut link_index = HashMap::with_capacity(links.len());
        let mut incidence = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            link_index.entry(l.id).or_insert(i);
            let a = node_index.get(&l.endpoints[0]);
            let b = node_index.get(&l.endpoints[1]);
            if let (Some(&a), Some(&b)) = (a, b) {
                incidence[a].push(i);
                if a != b {
                    incidence[b].push(i);
                }
            }
        }
        Topology {
            provisioning,
            nodes,
            links,
            warnings: Vec::new(),
            node_index,
            link_index,
            incidence,
        }
    }

    pub fn provisioning(&self) -> Provisioning {
        self.provisioning
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    /// Builder warnings, e.g. a mesh request that fell back to ring wiring.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeSpec> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn link(&self, id: LinkId) -> Option<&LinkSpec> {
        self.link_index.get(&id).map(|&i| &self.links[i])
    }

    pub(crate) fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// Incident links of the node at position `idx`, up or down.
    pub(crate) fn incident(&self, idx: usize) -> impl Iterator<Item = &LinkSpec> {
        self.incidence[idx].iter().map(move |&i| &self.links[i])
    }

    pub(crate) fn incident_positions(&self, idx: usize) -> &[usize] {
        &self.incidence[idx]
    }

    /// Up-link neighbours of `id`, in link order.
    pub fn neighbors(&self, id: &NodeId) -> Vec<(LinkId, &NodeId)> {
        let Some(idx) = self.index_of(id) else {
            return Vec::new();
        };
        self.incident(idx)
            .filter(|l| l.is_up())
            .filter_map(|l| l.other(id).map(|o| (l.id, o)))
            .collect()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// Servers and gateway-servers.
    pub fn servers(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.kind.is_server())
    }

    pub fn racks(&self) -> BTreeSet<String> {
        self.servers().filter_map(|n| n.rack.clone()).collect()
    }

    /// Gateway-server of `rack`, if the rack has exactly one.
    pub fn gateway_of(&self, rack: &str) -> Option<&NodeSpec> {
        let mut gws = self
            .nodes_of_kind(NodeKind::GatewayServer)
            .filter(|n| n.rack.as_deref() == Some(rack));
        let first = gws.next()?;
        gws.next().is_none().then_some(first)
    }

    pub fn down_links(&self) -> impl Iterator<Item = &LinkSpec> {
        self.links.iter().filter(|l| l.down)
    }

    /// Marks `link` down. Down links are kept for reporting but ignored by
    /// adjacency and routing.
    pub fn fail_link(&self, link: LinkId) -> Result<Topology, TopologyError> {
        self.set_link_state(link, true)
    }

    /// Inverse of [`Topology::fail_link`].
    pub fn restore_link(&self, link: LinkId) -> Result<Topology, TopologyError> {
        self.set_link_state(link, false)
    }

    fn set_link_state(&self, link: LinkId, down: bool) -> Result<Topology, TopologyError> {
        let &i = self.link_index.get(&link).ok_or(TopologyError::UnknownLink(link))?;
        let mut t = self.clone();
        t.links[i].down = down;
        Ok(t)
    }

    /// Every link incident to any node of `rack`.
    pub fn rack_links(&self, rack: &str) -> Vec<LinkId> {
        let members: BTreeSet<&NodeId> = self
            .servers()
            .filter(|n| n.rack.as_deref() == Some(rack))
            .map(|n| &n.id)
            .collect();
        self.links
            .iter()
            .filter(|l| members.contains(&l.endpoints[0]) || members.contains(&l.endpoints[1]))
            .map(|l| l.id)
            .collect()
    }

    /// Appends a linear chain of WDM core nodes rooted at the cell's OLT, one
    /// fibre link per span, with an endpoint host hung off the terminal node.
    pub fn attach_core_chain(&self, spans_km: &[f64]) -> Result<Topology, TopologyError> {
        if spans_km.is_empty() {
            return Err(TopologyError::InvalidParameter(
                "core chain needs at least one span".into(),
            ));
        }
        for (index, &km) in spans_km.iter().enumerate() {
            if !(km > 0.0) || !km.is_finite() {
                return Err(TopologyError::InvalidSpan { index, km });
            }
        }
        let olts: Vec<&NodeSpec> = self.nodes_of_kind(NodeKind::Olt).collect();
        let root = match olts.as_slice() {
            [] => return Err(TopologyError::MissingOlt),
            [one] => one.id.clone(),
            many => return Err(TopologyError::AmbiguousOlt(many.len())),
        };

        let mut nodes = self.nodes.clone();
        let mut links = self.links.clone();
        let mut next_link = links.iter().map(|l| l.id.0 + 1).max().unwrap_or(0);
        let add_node = |nodes: &mut Vec<NodeSpec>, spec: NodeSpec| {
            if self.node_index.contains_key(&spec.id) {
                return Err(TopologyError::DuplicateNode(spec.id));
            }
            nodes.push(spec);
            Ok(())
        };

        let mut prev = root;
        for (i, &km) in spans_km.iter().enumerate() {
            let id = NodeId::new(format!("core{}", i + 1));
            add_node(&mut nodes, NodeSpec::new(id.clone(), NodeKind::WdmCoreNode))?;
            links.push(
                LinkSpec::new(next_link, prev, id.clone(), Medium::OpticalFiber, km)
                    .with_wavelengths(builder::CORE_WAVELENGTHS),
            );
            next_link += 1;
            prev = id;
        }
        let host = NodeId::new("display");
        add_node(&mut nodes, NodeSpec::new(host.clone(), NodeKind::EndpointHost))?;
        links.push(
            LinkSpec::new(next_link, prev, host, Medium::Electrical, 0.0)
                .with_rate(builder::HOST_RATE_BPS),
        );

        let mut t = Topology::new(self.provisioning, nodes, links);
        t.warnings = self.warnings.clone();
        Ok(t)
    }

    /// Total length of the WDM core chain links (km).
    pub fn core_chain_km(&self) -> f64 {
        self.links
            .iter()
            .filter(|l| {
                l.endpoints
                    .iter()
                    .any(|e| self.node(e).map(|n| n.kind) == Some(NodeKind::WdmCoreNode))
                    && l.medium == Medium::OpticalFiber
            })
            .map(|l| l.length_km)
            .sum()
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Adjacencies between routing nodes across transparent layer-2 devices,
    /// over up links only.
    pub fn l3_adjacencies(&self) -> Vec<Adjacency> {
        l3::adjacencies(self, false)
    }

    /// Broadcast segments used for address planning. Link state is ignored so
    /// the plan does not move when links fail.
    pub fn segments(&self) -> Vec<Segment> {
        l3::segments(self)
    }

    pub fn to_toml(&self) -> String {
        let doc = TopologyDoc {
            provisioning: self.provisioning,
            nodes: self.nodes.clone(),
            links: self.links.clone(),
        };
        toml::to_string(&doc).expect("topology documents always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Topology, TopologyError> {
        let doc: TopologyDoc = toml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Ok(Topology::new(doc.provisioning, doc.nodes, doc.links))
    }
}
