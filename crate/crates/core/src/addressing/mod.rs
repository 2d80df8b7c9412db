//! IPv4 address plans: one subnet per rack, one per point-to-point optical
//! segment, with relay and gateway servers holding one address per segment.

mod export;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::topology::{LinkId, NodeId, NodeKind, Segment, Topology};

pub use export::export_node_config;
pub use validate::validate_plan;

pub const DEFAULT_BASE_PREFIX: &str = "10.0.0.0/16";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubnetRole {
    IntraRack,
    InterRack,
    Core,
}

impl SubnetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SubnetRole::IntraRack => "intra-rack",
            SubnetRole::InterRack => "inter-rack",
            SubnetRole::Core => "core",
        }
    }
}

impl fmt::Display for SubnetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subnet {
    pub prefix: Ipv4Net,
    pub role: SubnetRole,
    /// Rack of an intra-rack subnet.
    pub rack: Option<String>,
    /// Routing nodes on the segment, sorted.
    pub members: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interface {
    pub name: String,
    pub address: Ipv4Addr,
    /// Index into [`AddressPlan::subnets`].
    pub subnet: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressPlan {
    pub subnets: Vec<Subnet>,
    pub interfaces: BTreeMap<NodeId, Vec<Interface>>,
    pub default_gateways: BTreeMap<NodeId, Ipv4Addr>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AddressingError {
    #[error("{base} cannot hold the {required} subnets this topology needs")]
    PrefixExhausted { base: Ipv4Net, required: usize },
    #[error("no rack named {0}")]
    UnknownRack(String),
    #[error("no node named {0}")]
    UnknownNode(NodeId),
    #[error("{0} has no address")]
    UnaddressedNode(NodeId),
}

/// Knobs of the `addressing` scenario section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AddressingOptions {
    #[serde(default = "default_base")]
    pub base_prefix: Ipv4Net,
    /// Fixed prefixes for chosen racks. Pins are taken as given, overlaps
    /// included; validation reports them.
    #[serde(default)]
    pub rack_subnets: BTreeMap<String, Ipv4Net>,
}

fn default_base() -> Ipv4Net {
    DEFAULT_BASE_PREFIX.parse().expect("valid default prefix")
}

impl Default for AddressingOptions {
    fn default() -> Self {
        AddressingOptions {
            base_prefix: default_base(),
            rack_subnets: BTreeMap::new(),
        }
    }
}

impl AddressPlan {
    pub fn interfaces_of(&self, node: &NodeId) -> &[Interface] {
        self.interfaces.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn addresses_of(&self, node: &NodeId) -> Vec<Ipv4Addr> {
        self.interfaces_of(node).iter().map(|i| i.address).collect()
    }

    /// Node holding `addr`; the first one if the plan is inconsistent.
    pub fn owner_of(&self, addr: Ipv4Addr) -> Option<&NodeId> {
        self.interfaces
            .iter()
            .find(|(_, ifs)| ifs.iter().any(|i| i.address == addr))
            .map(|(n, _)| n)
    }

    pub fn interface_on(&self, node: &NodeId, subnet: usize) -> Option<&Interface> {
        self.interfaces_of(node).iter().find(|i| i.subnet == subnet)
    }

    /// First subnet both nodes hold an address in.
    pub fn shared_subnet(&self, a: &NodeId, b: &NodeId) -> Option<usize> {
        let theirs: BTreeSet<usize> = self.interfaces_of(b).iter().map(|i| i.subnet).collect();
        self.interfaces_of(a).iter().map(|i| i.subnet).find(|s| theirs.contains(s))
    }

    pub fn subnets_with_role(&self, role: SubnetRole) -> impl Iterator<Item = &Subnet> {
        self.subnets.iter().filter(move |s| s.role == role)
    }

    pub fn intra_rack_subnet(&self, rack: &str) -> Option<usize> {
        self.subnets
            .iter()
            .position(|s| s.role == SubnetRole::IntraRack && s.rack.as_deref() == Some(rack))
    }

    /// Nodes with more than one address.
    pub fn multi_homed(&self) -> Vec<&NodeId> {
        self.interfaces
            .iter()
            .filter(|(_, ifs)| ifs.len() > 1)
            .map(|(n, _)| n)
            .collect()
    }
}

fn role_of(t: &Topology, seg: &Segment) -> (SubnetRole, Option<String>) {
    let specs: Vec<_> = seg.members.iter().filter_map(|m| t.node(m)).collect();
    let racks: BTreeSet<Option<&str>> = specs.iter().map(|n| n.rack.as_deref()).collect();
    let all_servers = specs.iter().all(|n| n.kind.is_server());
    match (all_servers, racks.len()) {
        (true, 1) => (
            SubnetRole::IntraRack,
            racks.into_iter().next().flatten().map(str::to_owned),
        ),
        (true, 2) if specs.len() == 2 => (SubnetRole::InterRack, None),
        _ => (SubnetRole::Core, None),
    }
}

/// Smallest prefix length whose block holds `hosts` plus network and broadcast.
fn fit_len(hosts: usize) -> u8 {
    let mut bits = 2u8;
    while (1usize << bits) < hosts + 2 {
        bits += 1;
    }
    32 - bits
}

fn overlaps(a: Ipv4Net, b: Ipv4Net) -> bool {
    a.contains(&b.network()) || b.contains(&a.network())
}

pub fn assign_addresses(t: &Topology, base_prefix: Ipv4Net) -> Result<AddressPlan, AddressingError> {
    assign_addresses_with(
        t,
        &AddressingOptions {
            base_prefix,
            rack_subnets: BTreeMap::new(),
        },
    )
}

/// Carves subnets from the base prefix in a fixed order (rack subnets by rack
/// id, then every other segment by its lowest link id) and numbers hosts from
/// the bottom of each block: the gateway of a rack subnet first, the OLT
/// first on segments that include it, everyone else by node id.
pub fn assign_addresses_with(t: &Topology, opts: &AddressingOptions) -> Result<AddressPlan, AddressingError> {
    let racks = t.racks();
    if let Some(r) = opts.rack_subnets.keys().find(|r| !racks.contains(*r)) {
        return Err(AddressingError::UnknownRack(r.clone()));
    }

    let mut segs: Vec<(SubnetRole, Option<String>, Segment)> = t
        .segments()
        .into_iter()
        .map(|s| {
            let (role, rack) = role_of(t, &s);
            (role, rack, s)
        })
        .collect();
    segs.sort_by(|a, b| {
        let key = |x: &(SubnetRole, Option<String>, Segment)| {
            let intra = x.0 == SubnetRole::IntraRack;
            (!intra, if intra { x.1.clone() } else { None }, x.2.links.iter().min().copied())
        };
        key(a).cmp(&key(b))
    });

    let base = opts.base_prefix.trunc();
    let required = segs.len();
    let exhausted = || AddressingError::PrefixExhausted { base, required };
    let pinned: Vec<Ipv4Net> = opts.rack_subnets.values().map(|p| p.trunc()).collect();
    let mut cursor = u64::from(u32::from(base.network()));
    let end = u64::from(u32::from(base.broadcast()));

    let mut plan = AddressPlan::default();
    for (role, rack, seg) in segs {
        let pin = rack.as_ref().and_then(|r| opts.rack_subnets.get(r)).map(|p| p.trunc());
        let prefix = match pin {
            Some(p) => p,
            None => {
                let len = match role {
                    SubnetRole::IntraRack => fit_len(seg.members.len()).min(24),
                    _ => fit_len(seg.members.len()).min(30),
                };
                if len < base.prefix_len() {
                    return Err(exhausted());
                }
                let size = 1u64 << (32 - len);
                loop {
                    cursor = cursor.div_ceil(size) * size;
                    if cursor + size - 1 > end {
                        return Err(exhausted());
                    }
                    let cand = Ipv4Net::new(Ipv4Addr::from(cursor as u32), len).expect("valid length");
                    match pinned.iter().find(|p| overlaps(**p, cand)) {
                        Some(p) => cursor = u64::from(u32::from(p.broadcast())) + 1,
                        None => break,
                    }
                }
                let cand = Ipv4Net::new(Ipv4Addr::from(cursor as u32), len).expect("valid length");
                cursor += size;
                cand
            }
        };

        let first = |id: &NodeId| {
            t.node(id).is_some_and(|n| match role {
                SubnetRole::IntraRack => n.kind == NodeKind::GatewayServer,
                _ => n.kind == NodeKind::Olt,
            })
        };
        let mut order = seg.members.clone();
        order.sort_by(|a, b| (!first(a), a).cmp(&(!first(b), b)));

        let idx = plan.subnets.len();
        let mut hosts = prefix.hosts();
        for m in &order {
            let Some(address) = hosts.next() else {
                return Err(exhausted());
            };
            let ifs = plan.interfaces.entry(m.clone()).or_default();
            ifs.push(Interface {
                name: format!("eth{}", ifs.len()),
                address,
                subnet: idx,
            });
        }
        plan.subnets.push(Subnet {
            prefix,
            role,
            rack,
            members: seg.members,
            links: seg.links,
        });
    }

    for n in t.nodes() {
        let gw = match n.kind {
            NodeKind::Server => n.rack.as_deref().and_then(|r| {
                let gw = t.gateway_of(r)?;
                let s = plan.intra_rack_subnet(r)?;
                plan.interface_on(&n.id, s)?;
                plan.interface_on(&gw.id, s).map(|i| i.address)
            }),
            NodeKind::EndpointHost => match plan.interfaces_of(&n.id) {
                [only] => plan.subnets[only.subnet]
                    .members
                    .iter()
                    .find(|m| **m != n.id)
                    .and_then(|m| plan.interface_on(m, only.subnet))
                    .map(|i| i.address),
                _ => None,
            },
            _ => None,
        };
        if let Some(a) = gw {
            plan.default_gateways.insert(n.id.clone(), a);
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_cell, CellSpec, Medium, Provisioning};
    use proptest::prelude::*;

    fn base() -> Ipv4Net {
        DEFAULT_BASE_PREFIX.parse().unwrap()
    }

    #[test]
    fn reference_cell_plan() {
        let t = build_cell(3, 1, 3, Provisioning::CouplerTdm).unwrap();
        let p = assign_addresses(&t, base()).unwrap();
        assert_eq!(p.subnets_with_role(SubnetRole::IntraRack).count(), 3);
        assert_eq!(p.subnets_with_role(SubnetRole::InterRack).count(), 3);
        assert_eq!(p.subnets_with_role(SubnetRole::Core).count(), 3);
        assert_eq!(p.subnets[0].prefix.to_string(), "10.0.0.0/24");
        assert_eq!(p.subnets[0].rack.as_deref(), Some("r1"));
        let gw = NodeId::from("r1-g1-s1");
        let ifs = p.interfaces_of(&gw);
        assert_eq!(ifs[0].address, Ipv4Addr::new(10, 0, 0, 1));
        // intra, two trunks, PON leg
        assert_eq!(ifs.len(), 4);
        let s2 = NodeId::from("r1-g1-s2");
        assert_eq!(p.addresses_of(&s2), vec![Ipv4Addr::new(10, 0, 0, 2)]);
        assert_eq!(p.default_gateways[&s2], Ipv4Addr::new(10, 0, 0, 1));
        assert!(!p.default_gateways.contains_key(&gw));
        assert!(p.subnets[3..].iter().all(|s| s.prefix.prefix_len() == 30));
    }

    #[test]
    fn single_rack_has_one_rack_subnet() {
        let t = build_cell(1, 1, 1, Provisioning::CouplerTdm).unwrap();
        let p = assign_addresses(&t, base()).unwrap();
        let non_core = p.subnets.iter().filter(|s| s.role != SubnetRole::Core).count();
        assert_eq!(non_core, 1);
        // only the OLT-facing gateway and the OLT itself sit on two subnets
        let multi: Vec<_> = p.multi_homed().into_iter().map(|n| n.as_str()).collect();
        assert_eq!(multi, vec!["r1-g1-s1"]);
    }

    /// Subnet count from the wiring itself: one per rack switch, one per
    /// inter-rack fibre trunk, one per PON drop, one per core or host link.
    fn counted_subnets(t: &Topology) -> usize {
        let switches = t.nodes_of_kind(NodeKind::ElectronicSwitch).count();
        let trunks = t
            .links()
            .iter()
            .filter(|l| l.endpoints.iter().all(|e| e.as_str().contains("-mc")))
            .count();
        let drops = t
            .links()
            .iter()
            .filter(|l| l.endpoints.iter().any(|e| t.node(e).unwrap().kind == NodeKind::Onu) && l.medium == Medium::OpticalFiber)
            .count();
        let core = t
            .links()
            .iter()
            .filter(|l| l.endpoints.iter().any(|e| t.node(e).unwrap().kind == NodeKind::WdmCoreNode))
            .count();
        switches + trunks + drops + core
    }

    #[test]
    fn four_rack_mesh_count() {
        let t = build_cell(4, 1, 2, Provisioning::CouplerTdm).unwrap();
        let p = assign_addresses(&t, base()).unwrap();
        assert_eq!(p.subnets.len(), counted_subnets(&t));
        assert_eq!(p.subnets_with_role(SubnetRole::InterRack).count(), 6);
        assert_eq!(p.subnets.len(), 4 + 6 + 4);
        let e2e = t.attach_core_chain(&[50.0, 50.0]).unwrap();
        let p = assign_addresses(&e2e, base()).unwrap();
        assert_eq!(p.subnets.len(), counted_subnets(&e2e));
    }

    #[test]
    fn relays_carry_trunk_addresses() {
        let t = build_cell(3, 3, 2, Provisioning::AwgrWdm).unwrap();
        let p = assign_addresses(&t, base()).unwrap();
        let relay = NodeId::from("r1-g2-s1");
        let roles: Vec<_> = p.interfaces_of(&relay).iter().map(|i| p.subnets[i.subnet].role).collect();
        assert_eq!(roles, vec![SubnetRole::IntraRack, SubnetRole::InterRack]);
        assert_eq!(p.interfaces_of(&NodeId::from("r1-g1-s1")).len(), 2);
    }

    #[test]
    fn exhaustion() {
        let t = build_cell(3, 1, 3, Provisioning::CouplerTdm).unwrap();
        let err = assign_addresses(&t, "10.0.0.0/24".parse().unwrap()).unwrap_err();
        assert!(matches!(err, AddressingError::PrefixExhausted { required: 9, .. }));
        assert!(assign_addresses(&t, "10.0.0.0/22".parse().unwrap()).is_ok());
    }

    #[test]
    fn pins_are_respected_and_skipped() {
        let t = build_cell(2, 1, 2, Provisioning::CouplerTdm).unwrap();
        let opts = AddressingOptions {
            base_prefix: base(),
            rack_subnets: [("r2".to_string(), "10.0.0.0/24".parse().unwrap())].into(),
        };
        let p = assign_addresses_with(&t, &opts).unwrap();
        let r1 = p.intra_rack_subnet("r1").unwrap();
        let r2 = p.intra_rack_subnet("r2").unwrap();
        assert_eq!(p.subnets[r2].prefix.to_string(), "10.0.0.0/24");
        assert_eq!(p.subnets[r1].prefix.to_string(), "10.0.1.0/24");
        let bad = AddressingOptions {
            rack_subnets: [("r9".to_string(), "10.0.0.0/24".parse().unwrap())].into(),
            ..AddressingOptions::default()
        };
        assert_eq!(assign_addresses_with(&t, &bad), Err(AddressingError::UnknownRack("r9".into())));
    }

    #[test]
    fn plan_is_deterministic() {
        let spec = CellSpec::new(3, 2, 2, Provisioning::AwgrWdm);
        let a = assign_addresses(&spec.build().unwrap(), base()).unwrap();
        let b = assign_addresses(&spec.build().unwrap(), base()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_lengths() {
        assert_eq!(fit_len(1), 30);
        assert_eq!(fit_len(2), 30);
        assert_eq!(fit_len(3), 29);
        assert_eq!(fit_len(254), 24);
        assert_eq!(fit_len(255), 23);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn builder_plans_validate(r in 1u32..6, g in 1u32..5, s in 1u32..4, awgr in any::<bool>()) {
            let prov = if awgr { Provisioning::AwgrWdm } else { Provisioning::CouplerTdm };
            let t = build_cell(r, g, s, prov).unwrap();
            let p = assign_addresses(&t, base()).unwrap();
            let report = validate_plan(&p, &t);
            prop_assert!(report.is_ok(), "{report}");
            prop_assert_eq!(p.subnets.len(), counted_subnets(&t));
        }
    }
}
