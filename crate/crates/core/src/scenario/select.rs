use crate::addressing::AddressPlan;
use crate::topology::{NodeId, NodeKind, Topology};

use super::ScenarioError;

/// Nodes picked by a selector, in topology order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub nodes: Vec<NodeId>,
    /// The selector was a pattern that matched no addressed node.
    pub empty_pattern: bool,
}

fn is_pattern(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

/// Resolves `all`, `servers`, `gateways`, `core`, a node id or a glob over
/// node ids. Only addressed nodes are ever selected.
pub fn select_nodes(t: &Topology, plan: &AddressPlan, selector: &str) -> Result<Selection, ScenarioError> {
    let addressed = |n: &&crate::topology::NodeSpec| !plan.interfaces_of(&n.id).is_empty();
    let pick = |f: &dyn Fn(&crate::topology::NodeSpec) -> bool| -> Vec<NodeId> {
        t.nodes().iter().filter(addressed).filter(|n| f(n)).map(|n| n.id.clone()).collect()
    };
    let nodes = match selector {
        "all" => pick(&|_| true),
        "servers" => pick(&|n| n.kind.is_server()),
        "gateways" => pick(&|n| n.kind == NodeKind::GatewayServer),
        "core" => pick(&|n| matches!(n.kind, NodeKind::WdmCoreNode | NodeKind::EndpointHost)),
        s if is_pattern(s) => {
            let pat = glob::Pattern::new(s).map_err(|_| ScenarioError::UnknownSelector(s.to_owned()))?;
            let nodes = pick(&|n| pat.matches(n.id.as_str()));
            return Ok(Selection {
                empty_pattern: nodes.is_empty(),
                nodes,
            });
        }
        s => match t.node(&NodeId::new(s)) {
            Some(n) if addressed(&n) => vec![n.id.clone()],
            _ => return Err(ScenarioError::UnknownSelector(s.to_owned())),
        },
    };
    Ok(Selection {
        nodes,
        empty_pattern: false,
    })
}
