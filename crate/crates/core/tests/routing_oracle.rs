mod common;

use ponsim::addressing::assign_addresses;
use ponsim::routing::{compute_tables_lenient, reroute_on_failure, resolve_path};
use ponsim::topology::{CellSpec, LinkSpec, Medium, NodeId, NodeKind, NodeSpec, Provisioning, Topology, Wiring};
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = CellSpec> {
    (1u32..=5, 1u32..=4, 1u32..=3, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(r, g, s, awgr, ring, mc)| {
        let prov = if awgr { Provisioning::AwgrWdm } else { Provisioning::CouplerTdm };
        let mut c = CellSpec::new(r, g, s, prov);
        c.wiring = if ring { Wiring::Ring } else { Wiring::Mesh };
        c.media_converters = mc;
        c
    })
}

fn addressed(t: &Topology, p: &ponsim::addressing::AddressPlan) -> Vec<NodeId> {
    t.nodes().iter().filter(|n| !p.interfaces_of(&n.id).is_empty()).map(|n| n.id.clone()).collect()
}

/// Every addressed pair resolves, with the oracle's hop count, or neither
/// side finds a route.
fn agree(t: &Topology) -> Result<(), TestCaseError> {
    let p = assign_addresses(t, "10.0.0.0/16".parse().unwrap()).unwrap();
    let r = compute_tables_lenient(t, &p);
    let nodes = addressed(t, &p);
    for a in &nodes {
        let want = common::l3_hops_from(t, a);
        for b in nodes.iter().filter(|b| *b != a) {
            match (resolve_path(&r, t, a, b), want.get(b)) {
                (Ok(path), Some(&h)) => prop_assert_eq!(path.hop_count() as u32, h, "{} -> {}", a, b),
                (Err(_), None) => {}
                (got, w) => prop_assert!(false, "{a} -> {b}: {got:?} vs oracle {w:?}"),
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn cell_hop_counts_match_bfs(spec in cell(), core in any::<bool>()) {
        let mut t = spec.build().unwrap();
        if core {
            t = t.attach_core_chain(&[20.0, 30.0]).unwrap();
        }
        agree(&t)?;
    }

    #[test]
    fn random_core_graphs(n in 2usize..=20, extra in proptest::collection::vec((0usize..20, 0usize..20, 1u32..200), 0..25),
                          spans in proptest::collection::vec(1u32..200, 19)) {
        // a random spanning tree plus extra chords
        let ids: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
        let nodes = ids.iter().map(|id| NodeSpec::new(id.as_str(), NodeKind::WdmCoreNode)).collect();
        let mut links = Vec::new();
        for i in 1..n {
            let parent = (spans[i - 1] as usize) % i;
            links.push(LinkSpec::new(links.len() as u32, ids[parent].as_str(), ids[i].as_str(), Medium::OpticalFiber, spans[i - 1] as f64));
        }
        for (a, b, km) in extra {
            let (a, b) = (a % n, b % n);
            if a != b {
                links.push(LinkSpec::new(links.len() as u32, ids[a].as_str(), ids[b].as_str(), Medium::OpticalFiber, km as f64));
            }
        }
        let t = Topology::new(Provisioning::CouplerTdm, nodes, links);
        let p = assign_addresses(&t, "10.0.0.0/16".parse().unwrap()).unwrap();
        let r = compute_tables_lenient(&t, &p);
        for a in t.nodes() {
            let want = common::hops_and_length_from(&t, &a.id);
            prop_assert_eq!(want.len(), n - 1);
            for (b, &(h, mm)) in &want {
                let path = resolve_path(&r, &t, &a.id, b).unwrap();
                prop_assert_eq!((path.hop_count() as u32, path.length_mm), (h, mm), "{} -> {}", a.id, b);
            }
        }
    }
}

#[test]
fn every_single_link_failure_matches_oracle() {
    let t = CellSpec::paper_3x3().build().unwrap().attach_core_chain(&[50.0, 50.0]).unwrap();
    let p = assign_addresses(&t, "10.0.0.0/16".parse().unwrap()).unwrap();
    let base = compute_tables_lenient(&t, &p);
    for l in t.links() {
        let failed = t.fail_link(l.id).unwrap();
        let r = reroute_on_failure(&base, &failed, &p);
        let nodes = addressed(&failed, &p);
        for a in &nodes {
            let want = common::l3_hops_from(&failed, a);
            for b in nodes.iter().filter(|b| *b != a) {
                let got = resolve_path(&r, &failed, a, b).ok().map(|p| p.hop_count() as u32);
                assert_eq!(got, want.get(b).copied(), "link {} down: {a} -> {b}", l.id.0);
            }
        }
    }
}
