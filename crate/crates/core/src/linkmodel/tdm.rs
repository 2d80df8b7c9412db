use std::collections::BTreeMap;

use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub onu: NodeId,
    pub start_us: u64,
    pub duration_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdmGrantSchedule {
    pub frame_length_us: u64,
    pub grants: Vec<Grant>,
}

impl TdmGrantSchedule {
    pub fn total_us(&self) -> u64 {
        self.grants.iter().map(|g| g.duration_us).sum()
    }

    pub fn grant_of(&self, onu: &str) -> Option<&Grant> {
        self.grants.iter().find(|g| g.onu.as_str() == onu)
    }
}

/// Upstream grants for one frame on a TDM coupler.
///
/// Each ONU gets the airtime its demand needs; if the frame cannot carry
/// everything, airtime is shared in proportion to demand. Durations are
/// rounded to whole microseconds by largest remainder (ties to the lower onu
/// id) and packed from offset 0 in onu-id order.
pub fn tdm_schedule(
    demands: &BTreeMap<NodeId, u64>,
    line_rate_bps: u64,
    frame_length_us: u64,
) -> TdmGrantSchedule {
    assert!(line_rate_bps > 0, "line rate must be positive");
    assert!(frame_length_us > 0, "frame length must be positive");

    let total: u128 = demands.values().map(|&d| d as u128).sum();
    let capacity = frame_length_us as u128 * line_rate_bps as u128;
    // ideal duration of each ONU as num / den µs
    let (nums, den): (Vec<u128>, u128) = if total * 1_000_000 > capacity {
        (
            demands.values().map(|&d| frame_length_us as u128 * d as u128).collect(),
            total,
        )
    } else {
        (
            demands.values().map(|&d| d as u128 * 1_000_000).collect(),
            line_rate_bps as u128,
        )
    };
    let sum: u128 = nums.iter().sum();
    let target = if den == 0 { 0 } else { (2 * sum + den) / (2 * den) };
    let target = target.min(frame_length_us as u128);

    let mut dur: Vec<u128> = nums.iter().map(|n| if den == 0 { 0 } else { n / den }).collect();
    let mut spare = target - dur.iter().sum::<u128>();
    let mut by_rem: Vec<usize> = (0..nums.len()).collect();
    by_rem.sort_by(|&a, &b| (nums[b] % den.max(1)).cmp(&(nums[a] % den.max(1))).then(a.cmp(&b)));
    for i in by_rem {
        if spare == 0 {
            break;
        }
        if nums[i] % den.max(1) == 0 {
            continue;
        }
        dur[i] += 1;
        spare -= 1;
    }

    let mut grants = Vec::new();
    let mut at = 0u64;
    for ((onu, _), d) in demands.iter().zip(dur) {
        if d == 0 {
            continue;
        }
        let d = d as u64;
        grants.push(Grant {
            onu: onu.clone(),
            start_us: at,
            duration_us: d,
        });
        at += d;
    }
    TdmGrantSchedule {
        frame_length_us,
        grants,
    }
}
