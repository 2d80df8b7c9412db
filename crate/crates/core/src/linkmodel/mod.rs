//! Delay and capacity models: propagation, serialization, per-device
//! forwarding delay with seeded jitter, TDM grant scheduling on couplers and
//! first-fit wavelength assignment on WDM segments.

mod delay;
mod tdm;
mod wavelength;

pub use delay::{
    node_forward_delay, propagation_delay, serialization_delay, DelayProfile, DelayRng,
    DEFAULT_PROPAGATION_US_PER_KM,
};
pub(crate) use delay::jittered;
pub use tdm::{tdm_schedule, Grant, TdmGrantSchedule};
pub use wavelength::{assign_wavelengths, segment_capacities, FlowId, WavelengthAssignment};

use crate::topology::{LinkId, NodeKind};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LinkModelError {
    #[error("delay profile has no forwarding delay for {0}")]
    UnknownKind(NodeKind),
    #[error("invalid delay profile: {0}")]
    InvalidProfile(String),
    #[error("wavelength capacity exceeded on {segment} (flow {flow})")]
    CapacityExceeded { segment: LinkId, flow: FlowId },
    #[error("flow {flow} references unknown segment {segment}")]
    UnknownSegment { segment: LinkId, flow: FlowId },
}
