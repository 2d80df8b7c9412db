use std::collections::BTreeMap;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LinkModelError;
use crate::topology::{LinkSpec, NodeKind};

/// Silica fibre, group index ≈ 1.47.
pub const DEFAULT_PROPAGATION_US_PER_KM: f64 = 4.9;

/// Latency constants shared by every delay computation.
///
/// The per-kind forwarding delays are calibration knobs, not measurements:
/// they were fitted so a traceroute across the reference cell lands its
/// measured hops inside the 144 to 857 µs RTT band reported for the lab build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DelayProfile {
    pub propagation_us_per_km: f64,
    pub forward_us: BTreeMap<NodeKind, f64>,
    /// Multiplicative uniform jitter on forwarding delays, in `[0, 1)`.
    pub jitter_fraction: f64,
    pub seed: u64,
}

impl Default for DelayProfile {
    fn default() -> Self {
        let forward_us = [
            (NodeKind::Server, 100.0),
            (NodeKind::GatewayServer, 140.0),
            (NodeKind::ElectronicSwitch, 5.0),
            (NodeKind::MediaConverter, 2.0),
            (NodeKind::Onu, 10.0),
            (NodeKind::Olt, 10.0),
            (NodeKind::Coupler, 0.0),
            (NodeKind::Awgr, 0.0),
            (NodeKind::WdmCoreNode, 20.0),
            (NodeKind::EndpointHost, 50.0),
        ]
        .into_iter()
        .collect();
        DelayProfile {
            propagation_us_per_km: DEFAULT_PROPAGATION_US_PER_KM,
            forward_us,
            jitter_fraction: 0.05,
            seed: 1,
        }
    }
}

impl DelayProfile {
    /// The calibrated profile with jitter switched off.
    pub fn deterministic() -> Self {
        DelayProfile {
            jitter_fraction: 0.0,
            ..DelayProfile::default()
        }
    }

    /// Every forwarding delay set to zero, no jitter.
    pub fn zero() -> Self {
        DelayProfile {
            forward_us: NodeKind::ALL.into_iter().map(|k| (k, 0.0)).collect(),
            jitter_fraction: 0.0,
            ..DelayProfile::default()
        }
    }

    pub fn check(&self) -> Result<(), LinkModelError> {
        if !(self.propagation_us_per_km > 0.0) || !self.propagation_us_per_km.is_finite() {
            return Err(LinkModelError::InvalidProfile(
                "propagation constant must be > 0".into(),
            ));
        }
        if let Some((k, d)) = self.forward_us.iter().find(|(_, d)| !(**d >= 0.0) || !d.is_finite()) {
            return Err(LinkModelError::InvalidProfile(format!(
                "forwarding delay of {k} is {d}"
            )));
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return Err(LinkModelError::InvalidProfile(
                "jitter fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn base_forward_us(&self, kind: NodeKind) -> Result<f64, LinkModelError> {
        self.forward_us
            .get(&kind)
            .copied()
            .ok_or(LinkModelError::UnknownKind(kind))
    }
}

/// One-way propagation delay of `link` (µs).
pub fn propagation_delay(link: &LinkSpec, profile: &DelayProfile) -> f64 {
    link.length_km * profile.propagation_us_per_km
}

/// Time to clock `bytes` onto a line of `rate_bps` (µs).
pub fn serialization_delay(bytes: u64, rate_bps: u64) -> f64 {
    assert!(rate_bps > 0, "line rate must be positive");
    (8 * bytes) as f64 * 1e6 / rate_bps as f64
}

/// Seeded jitter source owned by a single simulation run.
#[derive(Debug, Clone)]
pub struct DelayRng {
    inner: ChaCha8Rng,
}

impl DelayRng {
    pub fn new(seed: u64) -> Self {
        DelayRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)` from the top 53 bits of the next word.
    pub fn next_unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Forwarding delay of a `kind` device: base × (1 + u), u uniform in
/// `[-jitter, +jitter)`. Consumes one draw even without jitter so the draw
/// sequence does not depend on the profile.
pub fn node_forward_delay(
    kind: NodeKind,
    profile: &DelayProfile,
    rng: &mut DelayRng,
) -> Result<f64, LinkModelError> {
    let base = profile.base_forward_us(kind)?;
    Ok(jittered(base, profile.jitter_fraction, rng))
}

pub(crate) fn jittered(base: f64, jitter: f64, rng: &mut DelayRng) -> f64 {
    let u = rng.next_unit();
    if jitter == 0.0 {
        return base;
    }
    base * (1.0 + jitter * (2.0 * u - 1.0))
}
