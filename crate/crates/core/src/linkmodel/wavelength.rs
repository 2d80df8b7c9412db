use std::collections::{BTreeMap, BTreeSet};

use super::LinkModelError;
use crate::topology::{LinkId, Topology};

pub type FlowId = u32;

/// Flow id → (wavelength index, fibre segments it occupies).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WavelengthAssignment {
    pub flows: BTreeMap<FlowId, (u32, Vec<LinkId>)>,
}

impl WavelengthAssignment {
    pub fn wavelength_of(&self, flow: FlowId) -> Option<u32> {
        self.flows.get(&flow).map(|(w, _)| *w)
    }

    /// Pairs of distinct flows that share a segment and a wavelength.
    pub fn conflicts(&self) -> Vec<(FlowId, FlowId, LinkId)> {
        let list: Vec<_> = self.flows.iter().collect();
        let mut out = Vec::new();
        for (i, (fa, (wa, sa))) in list.iter().enumerate() {
            for (fb, (wb, sb)) in &list[i + 1..] {
                if wa != wb {
                    continue;
                }
                if let Some(s) = sa.iter().find(|s| sb.contains(s)) {
                    out.push((**fa, **fb, *s));
                }
            }
        }
        out
    }
}

/// Wavelength capacity of every link that declares one.
pub fn segment_capacities(t: &Topology) -> BTreeMap<LinkId, u32> {
    t.links()
        .iter()
        .filter_map(|l| l.wavelengths.map(|w| (l.id, w)))
        .collect()
}

/// First-fit assignment with wavelength continuity along each path, flows
/// taken in ascending id order.
pub fn assign_wavelengths(
    flows: &[(FlowId, Vec<LinkId>)],
    capacities: &BTreeMap<LinkId, u32>,
) -> Result<WavelengthAssignment, LinkModelError> {
    let mut order: Vec<&(FlowId, Vec<LinkId>)> = flows.iter().collect();
    order.sort_by_key(|(id, _)| *id);

    let mut used: BTreeMap<LinkId, BTreeSet<u32>> = BTreeMap::new();
    let mut out = WavelengthAssignment::default();
    for (flow, path) in order {
        for s in path {
            if !capacities.contains_key(s) {
                return Err(LinkModelError::UnknownSegment { segment: *s, flow: *flow });
            }
        }
        let limit = path.iter().map(|s| capacities[s]).min().unwrap_or(0);
        let free = (0..limit).find(|w| path.iter().all(|s| !used.get(s).is_some_and(|u| u.contains(w))));
        let Some(w) = free else {
            // report the segment closest to saturation
            let segment = *path
                .iter()
                .min_by_key(|s| {
                    let taken = used.get(*s).map_or(0, |u| u.len() as u32);
                    (capacities[*s].saturating_sub(taken), **s)
                })
                .ok_or(LinkModelError::UnknownSegment { segment: LinkId(u32::MAX), flow: *flow })?;
            return Err(LinkModelError::CapacityExceeded { segment, flow: *flow });
        };
        for s in path {
            used.entry(*s).or_default().insert(w);
        }
        out.flows.insert(*flow, (w, path.clone()));
    }
    Ok(out)
}
