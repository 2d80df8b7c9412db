//! Deterministic discrete-event simulator for server-centric PON data-centre
//! networks with an attached IP-over-WDM core chain.

pub mod topology;
pub mod linkmodel;
pub mod addressing;
pub mod routing;
pub mod sim;
pub mod scenario;
