//! Reference builder for PON cells.
//!
//! Wiring rules, per rack `rN`:
//! - every server joins the rack switch `rN-sw` over a zero-length electrical link;
//! - group 1 is OLT-facing; its first server is the rack's gateway-server and
//!   reaches the OLT through `rN-onu` and the cell's coupler or AWGR;
//! - each remaining group lends its first server as the relay towards one peer
//!   rack. With a single group per rack the gateway carries the relay role too;
//! - every inter-rack trunk is relay → media converter → fibre → media
//!   converter → relay, unless media converters are disabled.

use serde::{Deserialize, Serialize};

use super::{LinkSpec, Medium, NodeId, NodeKind, NodeSpec, Provisioning, Topology, TopologyError};

/// Fibre between two racks' media converters.
pub(crate) const TRUNK_KM: f64 = 0.02;
/// ONU → splitter and splitter → OLT drop fibres.
pub(crate) const PON_DROP_KM: f64 = 0.005;
/// C-band DWDM channel count.
pub(crate) const CORE_WAVELENGTHS: u32 = 80;
pub(crate) const HOST_RATE_BPS: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wiring {
    #[default]
    Mesh,
    Ring,
}

/// Parameters of [`build_cell`], also the `topology.builder` scenario section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CellSpec {
    pub racks: u32,
    pub groups_per_rack: u32,
    pub servers_per_group: u32,
    pub provisioning: Provisioning,
    #[serde(default)]
    pub wiring: Wiring,
    #[serde(default = "default_true")]
    pub media_converters: bool,
}

fn default_true() -> bool {
    true
}

impl CellSpec {
    pub fn new(racks: u32, groups_per_rack: u32, servers_per_group: u32, provisioning: Provisioning) -> Self {
        CellSpec {
            racks,
            groups_per_rack,
            servers_per_group,
            provisioning,
            wiring: Wiring::Mesh,
            media_converters: true,
        }
    }

    /// Three racks of three servers, one multi-role group per rack, coupler PON.
    pub fn paper_3x3() -> Self {
        CellSpec::new(3, 1, 3, Provisioning::CouplerTdm)
    }

    /// Rack pairs joined by a trunk, and whether a mesh request had to fall
    /// back to a ring.
    pub fn trunks(&self) -> (Vec<(u32, u32)>, bool) {
        let r = self.racks;
        let mesh_ok = self.groups_per_rack == 1 || self.groups_per_rack - 1 >= r.saturating_sub(1);
        let ring = |r: u32| -> Vec<(u32, u32)> {
            match r {
                0 | 1 => Vec::new(),
                2 => vec![(1, 2)],
                _ => {
                    let mut pairs: Vec<(u32, u32)> = (1..=r)
                        .map(|a| {
                            let b = a % r + 1;
                            (a.min(b), a.max(b))
                        })
                        .collect();
                    pairs.sort_unstable();
                    pairs
                }
            }
        };
        match self.wiring {
            Wiring::Ring => (ring(r), false),
            Wiring::Mesh if mesh_ok => {
                let pairs = (1..=r).flat_map(|a| (a + 1..=r).map(move |b| (a, b))).collect();
                (pairs, false)
            }
            Wiring::Mesh => (ring(r), true),
        }
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        for (name, v) in [
            ("racks", self.racks),
            ("groups-per-rack", self.groups_per_rack),
            ("servers-per-group", self.servers_per_group),
        ] {
            if v == 0 {
                return Err(TopologyError::InvalidParameter(format!("{name} must be at least 1")));
            }
        }

        let mut nodes = Vec::new();
        let mut links = Vec::new();
        let mut next_link = 0u32;
        let mut link = |links: &mut Vec<LinkSpec>, a: &NodeId, b: &NodeId, medium: Medium, km: f64| {
            links.push(LinkSpec::new(next_link, a.clone(), b.clone(), medium, km));
            next_link += 1;
            links.len() - 1
        };

        for r in 1..=self.racks {
            let rack = rack_name(r);
            for g in 1..=self.groups_per_rack {
                for s in 1..=self.servers_per_group {
                    let kind = if g == 1 && s == 1 { NodeKind::GatewayServer } else { NodeKind::Server };
                    nodes.push(NodeSpec::server(server_id(r, g, s), kind, &rack, g));
                }
            }
            nodes.push(NodeSpec::new(switch_id(r), NodeKind::ElectronicSwitch));
            nodes.push(NodeSpec::new(onu_id(r), NodeKind::Onu));
        }
        let splitter = match self.provisioning {
            Provisioning::CouplerTdm => NodeSpec::new("coupler", NodeKind::Coupler),
            Provisioning::AwgrWdm => NodeSpec::new("awgr", NodeKind::Awgr),
        };
        let splitter_id = splitter.id.clone();
        nodes.push(splitter);
        let olt = NodeId::new("olt");
        nodes.push(NodeSpec::new(olt.clone(), NodeKind::Olt));

        for r in 1..=self.racks {
            for g in 1..=self.groups_per_rack {
                for s in 1..=self.servers_per_group {
                    link(&mut links, &server_id(r, g, s), &switch_id(r), Medium::Electrical, 0.0);
                }
            }
        }
        for r in 1..=self.racks {
            link(&mut links, &server_id(r, 1, 1), &onu_id(r), Medium::Electrical, 0.0);
        }
        let wdm = self.provisioning == Provisioning::AwgrWdm;
        for r in 1..=self.racks {
            let i = link(&mut links, &onu_id(r), &splitter_id, Medium::OpticalFiber, PON_DROP_KM);
            if wdm {
                links[i].wavelengths = Some(CORE_WAVELENGTHS);
            }
        }
        let i = link(&mut links, &splitter_id, &olt, Medium::OpticalFiber, PON_DROP_KM);
        if wdm {
            links[i].wavelengths = Some(CORE_WAVELENGTHS);
        }

        let (trunks, fell_back) = self.trunks();
        for &(a, b) in &trunks {
            let ra = self.relay_for(a, b, &trunks);
            let rb = self.relay_for(b, a, &trunks);
            if self.media_converters {
                let ma = NodeId::new(format!("{}-{}-mc1", rack_name(a), rack_name(b)));
                let mb = NodeId::new(format!("{}-{}-mc2", rack_name(a), rack_name(b)));
                nodes.push(NodeSpec::new(ma.clone(), NodeKind::MediaConverter));
                nodes.push(NodeSpec::new(mb.clone(), NodeKind::MediaConverter));
                link(&mut links, &ra, &ma, Medium::Electrical, 0.0);
                link(&mut links, &ma, &mb, Medium::OpticalFiber, TRUNK_KM);
                link(&mut links, &mb, &rb, Medium::Electrical, 0.0);
            } else {
                link(&mut links, &ra, &rb, Medium::OpticalFiber, TRUNK_KM);
            }
        }

        let mut t = Topology::new(self.provisioning, nodes, links);
        if fell_back {
            t.push_warning(format!(
                "infeasible-wiring: {} relay group(s) per rack cannot mesh {} racks; wired as a ring",
                self.groups_per_rack - 1,
                self.racks
            ));
        }
        Ok(t)
    }

    /// Relay server of `rack` for its trunk towards `peer`.
    fn relay_for(&self, rack: u32, peer: u32, trunks: &[(u32, u32)]) -> NodeId {
        if self.groups_per_rack == 1 {
            return server_id(rack, 1, 1);
        }
        let mut peers: Vec<u32> = trunks
            .iter()
            .filter_map(|&(a, b)| match (a == rack, b == rack) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect();
        peers.sort_unstable();
        let pos = peers.iter().position(|&p| p == peer).unwrap_or(0) as u32;
        server_id(rack, 2 + pos % (self.groups_per_rack - 1), 1)
    }
}

/// Builds a cell with default wiring (mesh, media converters on).
pub fn build_cell(
    racks: u32,
    groups_per_rack: u32,
    servers_per_group: u32,
    provisioning: Provisioning,
) -> Result<Topology, TopologyError> {
    CellSpec::new(racks, groups_per_rack, servers_per_group, provisioning).build()
}

pub(crate) fn rack_name(r: u32) -> String {
    format!("r{r}")
}

fn server_id(r: u32, g: u32, s: u32) -> NodeId {
    NodeId::new(format!("r{r}-g{g}-s{s}"))
}

fn switch_id(r: u32) -> NodeId {
    NodeId::new(format!("r{r}-sw"))
}

fn onu_id(r: u32) -> NodeId {
    NodeId::new(format!("r{r}-onu"))
}
