//! Per-invariant validation reports.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use super::{LinkSpec, Medium, NodeId, NodeKind, Topology};

/// One offending element set.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub message: String,
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub failures: Vec<Failure>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Pass/fail per named check. Shared by topology and address-plan validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&'static str, &Failure)> {
        self.checks
            .iter()
            .flat_map(|c| c.failures.iter().map(move |f| (c.name, f)))
    }

    pub(crate) fn push(&mut self, name: &'static str, failures: Vec<Failure>) {
        self.checks.push(CheckResult { name, failures });
    }

    pub fn merge(mut self, other: ValidationReport) -> ValidationReport {
        self.checks.extend(other.checks);
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed() {
                writeln!(f, "PASS {}", c.name)?;
            } else {
                writeln!(f, "FAIL {}", c.name)?;
                for fail in &c.failures {
                    writeln!(f, "  {}: {}", fail.message, fail.elements.join(", "))?;
                }
            }
        }
        Ok(())
    }
}

fn fail(message: impl Into<String>, elements: impl IntoIterator<Item = impl ToString>) -> Failure {
    Failure {
        message: message.into(),
        elements: elements.into_iter().map(|e| e.to_string()).collect(),
    }
}

pub(super) fn validate(t: &Topology) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.push("unique-ids", unique_ids(t));
    report.push("dangling-references", dangling(t));
    report.push("link-fields", link_fields(t));
    report.push("rack-group-fields", rack_group_fields(t));
    report.push("connectivity", connectivity(t));
    report.push("gateway-uniqueness", gateway_uniqueness(t));
    report.push("inter-rack-links", inter_rack_links(t));
    report.push("olt-facing-group", olt_facing_group(t));
    report
}

fn unique_ids(t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let dup_nodes: BTreeSet<&NodeId> = t.nodes().iter().filter(|n| !seen.insert(&n.id)).map(|n| &n.id).collect();
    if !dup_nodes.is_empty() {
        out.push(fail("duplicate node id", dup_nodes));
    }
    let mut seen = HashSet::new();
    let dup_links: BTreeSet<_> = t.links().iter().filter(|l| !seen.insert(l.id)).map(|l| l.id).collect();
    if !dup_links.is_empty() {
        out.push(fail("duplicate link id", dup_links));
    }
    out
}

fn dangling(t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for l in t.links() {
        for e in &l.endpoints {
            if t.node(e).is_none() {
                out.push(fail(format!("{} references missing node", l.id), [e]));
            }
        }
    }
    out
}

fn link_fields(t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for l in t.links() {
        if l.endpoints[0] == l.endpoints[1] {
            out.push(fail("self-loop", [l.id]));
        }
        if !(l.length_km >= 0.0) || !l.length_km.is_finite() {
            out.push(fail("negative or non-finite length", [l.id]));
        }
        if l.rate_bps == 0 {
            out.push(fail("zero rate", [l.id]));
        }
        if l.wavelengths == Some(0) {
            out.push(fail("zero wavelength capacity", [l.id]));
        }
        if l.length_km > 0.0 && l.medium != Medium::OpticalFiber {
            out.push(fail("non-zero length on a non-fibre link", [l.id]));
        }
    }
    out
}

fn rack_group_fields(t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for n in t.nodes() {
        let has = n.rack.is_some() && n.group.is_some();
        let none = n.rack.is_none() && n.group.is_none();
        if n.kind.is_server() && !has {
            out.push(fail("server without rack/group", [&n.id]));
        } else if !n.kind.is_server() && !none {
            out.push(fail(format!("{} carries rack/group", n.kind), [&n.id]));
        }
        if n.delay_override_us.is_some_and(|d| !(d >= 0.0)) {
            out.push(fail("negative delay override", [&n.id]));
        }
    }
    out
}

fn connectivity(t: &Topology) -> Vec<Failure> {
    let Some(first) = t.nodes().first() else {
        return Vec::new();
    };
    let mut seen: HashSet<&NodeId> = HashSet::from([&first.id]);
    let mut queue = VecDeque::from([&first.id]);
    while let Some(n) = queue.pop_front() {
        for (_, m) in t.neighbors(n) {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    let unreached: BTreeSet<&NodeId> = t.nodes().iter().map(|n| &n.id).filter(|id| !seen.contains(id)).collect();
    if unreached.is_empty() {
        Vec::new()
    } else {
        vec![fail(format!("unreachable from {}", first.id), unreached)]
    }
}

fn gateway_uniqueness(t: &Topology) -> Vec<Failure> {
    let mut per_rack: BTreeMap<&str, Vec<&NodeId>> = BTreeMap::new();
    for n in t.servers() {
        if let Some(r) = n.rack.as_deref() {
            let e = per_rack.entry(r).or_default();
            if n.kind == NodeKind::GatewayServer {
                e.push(&n.id);
            }
        }
    }
    per_rack
        .into_iter()
        .filter(|(_, gws)| gws.len() != 1)
        .map(|(rack, gws)| {
            let mut elements = vec![rack.to_owned()];
            elements.extend(gws.iter().map(|g| g.to_string()));
            fail(format!("rack has {} gateway-servers", gws.len()), elements)
        })
        .collect()
}

/// Follows `link` away from `from` through degree-2 media converters and
/// returns the first node that is not one.
fn effective_end<'a>(t: &'a Topology, from: &NodeId, link: &'a LinkSpec) -> Option<&'a NodeId> {
    let mut prev = from;
    let mut via = link;
    let mut cur = link.other(from)?;
    for _ in 0..t.nodes().len() {
        let node = t.node(cur)?;
        if node.kind != NodeKind::MediaConverter {
            return Some(cur);
        }
        let idx = t.index_of(cur)?;
        let next = t.incident(idx).find(|l| l.id != via.id && l.other(cur) != Some(prev));
        let next = next?;
        prev = cur;
        via = next;
        cur = next.other(prev)?;
    }
    None
}

fn inter_rack_links(t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    for l in t.links().iter().filter(|l| l.medium == Medium::OpticalFiber) {
        let [a, b] = &l.endpoints;
        if t.node(a).is_none() || t.node(b).is_none() {
            continue;
        }
        let (Some(ea), Some(eb)) = (effective_end(t, b, l), effective_end(t, a, l)) else {
            continue;
        };
        let (na, nb) = (t.node(ea).unwrap(), t.node(eb).unwrap());
        if na.kind.is_server() && nb.kind.is_server() && na.rack == nb.rack {
            out.push(fail("optical link joins servers of the same rack", [l.id.to_string(), ea.to_string(), eb.to_string()]));
        }
    }
    out
}

fn olt_facing_group(t: &Topology) -> Vec<Failure> {
    if t.nodes_of_kind(NodeKind::Onu).next().is_none() {
        return Vec::new();
    }
    let mut facing: BTreeMap<String, BTreeSet<u32>> = t.racks().into_iter().map(|r| (r, BTreeSet::new())).collect();
    for n in t.servers() {
        let idx = t.index_of(&n.id).unwrap();
        let to_onu = t.incident(idx).any(|l| {
            effective_end(t, &n.id, l).and_then(|e| t.node(e)).map(|e| e.kind) == Some(NodeKind::Onu)
        });
        if to_onu {
            if let (Some(r), Some(g)) = (&n.rack, n.group) {
                facing.entry(r.clone()).or_default().insert(g);
            }
        }
    }
    facing
        .into_iter()
        .filter(|(_, groups)| groups.len() != 1)
        .map(|(rack, groups)| fail(format!("rack has {} OLT-facing groups", groups.len()), [rack]))
        .collect()
}
