//! Scenario documents: one TOML file that fixes a network, its delays and a
//! list of experiments. Loading, validation, running and export all start
//! here.
//!
//! ```toml
//! name = "demo"
//!
//! [topology.builder]
//! racks = 3
//! groups-per-rack = 1
//! servers-per-group = 3
//! provisioning = "coupler-tdm"
//!
//! [core]
//! spans-km = [50.0, 50.0]
//!
//! [delays]
//! jitter-fraction = 0.05
//! seed = 1
//!
//! [[experiments]]
//! kind = "traceroute"
//! src = "r1-g1-s2"
//! dst = "display"
//! ```

mod run;
mod select;

/// Scenario documents shipped with the crate, by name.
pub mod presets {
    pub const PAPER_3X3: &str = include_str!("../../scenarios/paper-3x3.toml");
    pub const PAPER_E2E: &str = include_str!("../../scenarios/paper-e2e.toml");
    pub const AWGR_CELL: &str = include_str!("../../scenarios/awgr-cell.toml");

    pub const ALL: [(&str, &str); 3] = [("paper-3x3", PAPER_3X3), ("paper-e2e", PAPER_E2E), ("awgr-cell", AWGR_CELL)];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }
}

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use crate::addressing::{assign_addresses_with, validate_plan, AddressPlan, AddressingError, AddressingOptions};
use crate::linkmodel::{DelayProfile, LinkModelError};
use crate::routing::{compute_tables_lenient, RoutingError, RoutingTables};
use crate::sim::{SimError, SimOptions, DEFAULT_QUEUE_CAPACITY};
use crate::topology::{
    CellSpec, Failure, LinkSpec, NodeId, NodeKind, NodeSpec, Provisioning, Topology, TopologyError, ValidationReport,
};

pub use run::{run_scenario, ExperimentResult, OutputFile, RunOutput, SUMMARY_FILE, TRACEROUTE_COLUMNS};
pub use select::{select_nodes, Selection};

/// Seed used when a document has no `[delays]` section at all.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Addressing(#[from] AddressingError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Delay(#[from] LinkModelError),
    #[error("scenario does not validate:\n{0}")]
    Validation(ValidationReport),
    #[error("experiment {index} failed: {source}")]
    Experiment { index: usize, source: SimError },
    #[error("unknown node selector `{0}`")]
    UnknownSelector(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ScenarioError {
    /// Document errors are told apart from networks that fail validation.
    pub fn is_document_error(&self) -> bool {
        matches!(self, ScenarioError::Parse { .. } | ScenarioError::Invalid(_) | ScenarioError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySection,
    #[serde(default)]
    pub core: Option<CoreSection>,
    #[serde(default)]
    pub addressing: AddressingOptions,
    #[serde(default)]
    pub delays: Option<DelaysSection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `builder` or an explicit `provisioning` + `nodes` + `links` list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TopologySection {
    pub builder: Option<CellSpec>,
    pub provisioning: Option<Provisioning>,
    pub nodes: Option<Vec<NodeSpec>>,
    pub links: Option<Vec<LinkSpec>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CoreSection {
    pub spans_km: Vec<f64>,
}

/// Overrides on top of the calibrated [`DelayProfile`].
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DelaysSection {
    pub propagation_us_per_km: Option<f64>,
    #[serde(default)]
    pub forward_us: BTreeMap<NodeKind, f64>,
    pub jitter_fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimSection {
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
    #[serde(default = "default_timeout")]
    pub probe_timeout_us: f64,
}

fn default_queue() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

fn default_timeout() -> f64 {
    SimOptions::default().probe_timeout_us
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            queue_capacity: default_queue(),
            probe_timeout_us: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Also write each experiment's event trace.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Ping(PingSpec),
    Traceroute(TracerouteSpec),
    Stream(StreamSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Ping(_) => "ping",
            ExperimentSpec::Traceroute(_) => "traceroute",
            ExperimentSpec::Stream(_) => "stream",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSet {
    /// Every ordered pair of distinct servers.
    AllServers,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PingSpec {
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub pairs: Option<PairSet>,
    #[serde(default = "default_count")]
    pub count: u64,
    #[serde(default = "default_interval")]
    pub interval_us: f64,
}

fn default_count() -> u64 {
    10
}

fn default_interval() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TracerouteSpec {
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_iterations() -> usize {
    10
}

fn default_probes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StreamSpec {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: u64,
    #[serde(default = "default_packet")]
    pub packet_bytes: u32,
    pub duration_us: f64,
}

fn default_packet() -> u32 {
    1200
}

fn location(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| location(text, s.start));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().trim().to_owned(),
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_owned(),
            source,
        })?;
        ScenarioConfig::parse(&text)
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let t = &self.topology;
        let explicit = t.nodes.is_some() || t.links.is_some() || t.provisioning.is_some();
        match (&t.builder, explicit) {
            (Some(_), true) => {
                return Err(ScenarioError::Invalid(
                    "topology has both builder parameters and an explicit node/link list".into(),
                ))
            }
            (None, false) => {
                return Err(ScenarioError::Invalid(
                    "topology needs builder parameters or an explicit node/link list".into(),
                ))
            }
            (None, true) if t.provisioning.is_none() || t.nodes.is_none() => {
                return Err(ScenarioError::Invalid("explicit topology needs provisioning and nodes".into()))
            }
            _ => {}
        }
        if let Some(d) = &self.delays {
            let jitter = d.jitter_fraction.unwrap_or(DelayProfile::default().jitter_fraction);
            if jitter > 0.0 && d.seed.is_none() {
                return Err(ScenarioError::Invalid(format!(
                    "delays.seed is required when jitter-fraction is {jitter} (> 0)"
                )));
            }
        }
        for (i, e) in self.experiments.iter().enumerate() {
            if let ExperimentSpec::Ping(p) = e {
                let single = p.src.is_some() || p.dst.is_some();
                if single == p.pairs.is_some() || (single && (p.src.is_none() || p.dst.is_none())) {
                    return Err(ScenarioError::Invalid(format!(
                        "experiment {}: ping takes either src and dst or pairs",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// The seed runs start from: the override, else the document's.
    pub fn seed(&self, seed_override: Option<u64>) -> u64 {
        seed_override
            .or(self.delays.as_ref().and_then(|d| d.seed))
            .unwrap_or(DEFAULT_SEED)
    }

    pub fn profile(&self, seed_override: Option<u64>) -> Result<DelayProfile, ScenarioError> {
        let mut p = DelayProfile::default();
        if let Some(d) = &self.delays {
            if let Some(v) = d.propagation_us_per_km {
                p.propagation_us_per_km = v;
            }
            if let Some(v) = d.jitter_fraction {
                p.jitter_fraction = v;
            }
            p.forward_us.extend(d.forward_us.iter().map(|(k, v)| (*k, *v)));
        }
        p.seed = self.seed(seed_override);
        p.check()?;
        Ok(p)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            queue_capacity: self.sim.queue_capacity,
            probe_timeout_us: self.sim.probe_timeout_us,
            keep_trace: self.output.trace,
        }
    }

    pub fn build_topology(&self) -> Result<Topology, ScenarioError> {
        let t = &self.topology;
        let base = match &t.builder {
            Some(spec) => spec.build()?,
            None => Topology::new(
                t.provisioning.expect("checked at parse time"),
                t.nodes.clone().unwrap_or_default(),
                t.links.clone().unwrap_or_default(),
            ),
        };
        match &self.core {
            Some(c) if !c.spans_km.is_empty() => Ok(base.attach_core_chain(&c.spans_km)?),
            _ => Ok(base),
        }
    }
}

/// A scenario's network, built and checked.
#[derive(Debug, Clone)]
pub struct Built {
    pub topology: Topology,
    pub plan: AddressPlan,
    pub tables: RoutingTables,
    pub report: ValidationReport,
}

impl Built {
    pub fn is_ok(&self) -> bool {
        self.report.is_ok()
    }
}

fn endpoint_failures(cfg: &ScenarioConfig, plan: &AddressPlan, t: &Topology) -> Vec<Failure> {
    let mut out = Vec::new();
    let mut check = |i: usize, n: &NodeId| {
        if t.node(n).is_none() {
            out.push(Failure {
                message: format!("experiment {} names an unknown node", i + 1),
                elements: vec![n.to_string()],
            });
        } else if plan.interfaces_of(n).is_empty() {
            out.push(Failure {
                message: format!("experiment {} names a node without an address", i + 1),
                elements: vec![n.to_string()],
            });
        }
    };
    for (i, e) in cfg.experiments.iter().enumerate() {
        match e {
            ExperimentSpec::Ping(p) => {
                for n in p.src.iter().chain(p.dst.iter()) {
                    check(i, n);
                }
            }
            ExperimentSpec::Traceroute(s) => {
                check(i, &s.src);
                check(i, &s.dst);
            }
            ExperimentSpec::Stream(s) => {
                check(i, &s.src);
                check(i, &s.dst);
            }
        }
    }
    out
}

/// Builds the network and runs every topology, address-plan, reachability and
/// experiment-endpoint check. Failures land in the report; only problems that
/// stop the network from being built at all are errors.
pub fn build(cfg: &ScenarioConfig) -> Result<Built, ScenarioError> {
    let topology = cfg.build_topology()?;
    cfg.profile(None)?;
    let mut report = topology.validate();
    let plan = assign_addresses_with(&topology, &cfg.addressing)?;
    report = report.merge(validate_plan(&plan, &topology));
    let tables = compute_tables_lenient(&topology, &plan);
    report.push(
        "subnet-reachability",
        tables
            .unreachable
            .iter()
            .map(|s| Failure {
                message: "subnet unreachable from the routed core".into(),
                elements: vec![s.to_string()],
            })
            .collect(),
    );
    report.push("experiment-endpoints", endpoint_failures(cfg, &plan, &topology));
    Ok(Built {
        topology,
        plan,
        tables,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "m"
[topology.builder]
racks = 2
groups-per-rack = 1
servers-per-group = 2
provisioning = "coupler-tdm"
"#;

    #[test]
    fn minimal_document() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        assert!(cfg.experiments.is_empty());
        assert_eq!(cfg.seed(None), DEFAULT_SEED);
        assert_eq!(cfg.seed(Some(9)), 9);
        let b = build(&cfg).unwrap();
        assert!(b.is_ok(), "{}", b.report);
    }

    #[test]
    fn parse_error_has_location() {
        let text = "name = \"x\"\n[topology.builder]\nracks = = 3\n";
        match ScenarioConfig::parse(text) {
            Err(ScenarioError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = format!("{MINIMAL}\n[sim]\nqueue = 3\n");
        assert!(matches!(ScenarioConfig::parse(&text), Err(ScenarioError::Parse { line: 10, .. })));
    }

    #[test]
    fn builder_and_explicit_are_exclusive() {
        let both = MINIMAL.replacen("[topology.builder]", "[topology]\nprovisioning = \"coupler-tdm\"\nnodes = []\n[topology.builder]", 1);
        assert!(matches!(ScenarioConfig::parse(&both), Err(ScenarioError::Invalid(_))));
        let neither = "name = \"x\"\n[topology]\n";
        assert!(matches!(ScenarioConfig::parse(neither), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn jitter_requires_seed() {
        let text = format!("{MINIMAL}[delays]\njitter-fraction = 0.1\n");
        assert!(matches!(ScenarioConfig::parse(&text), Err(ScenarioError::Invalid(_))));
        let text = format!("{MINIMAL}[delays]\njitter-fraction = 0.0\n");
        assert!(ScenarioConfig::parse(&text).is_ok());
        let text = format!("{MINIMAL}[delays]\nseed = 4\n[delays.forward-us]\nolt = 3.5\n");
        let p = ScenarioConfig::parse(&text).unwrap().profile(None).unwrap();
        assert_eq!((p.seed, p.base_forward_us(NodeKind::Olt).unwrap()), (4, 3.5));
    }

    #[test]
    fn experiments_are_tagged() {
        let text = format!(
            "{MINIMAL}[[experiments]]\nkind = \"ping\"\npairs = \"all-servers\"\n\
             [[experiments]]\nkind = \"stream\"\nsrc = \"r1-g1-s2\"\ndst = \"r2-g1-s2\"\nrate-bps = 1000\nduration-us = 10.0\n"
        );
        let cfg = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(cfg.experiments.iter().map(ExperimentSpec::kind).collect::<Vec<_>>(), ["ping", "stream"]);
        let bad = format!("{MINIMAL}[[experiments]]\nkind = \"ping\"\nsrc = \"a\"\n");
        assert!(matches!(ScenarioConfig::parse(&bad), Err(ScenarioError::Invalid(_))));
        let unknown = format!("{MINIMAL}[[experiments]]\nkind = \"iperf\"\n");
        assert!(matches!(ScenarioConfig::parse(&unknown), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn bad_endpoint_fails_validation() {
        let text = format!("{MINIMAL}[[experiments]]\nkind = \"traceroute\"\nsrc = \"r1-g1-s2\"\ndst = \"r1-sw\"\n");
        let b = build(&ScenarioConfig::parse(&text).unwrap()).unwrap();
        let c = b.report.check("experiment-endpoints").unwrap();
        assert_eq!(c.failures.len(), 1);
        assert_eq!(c.failures[0].elements, vec!["r1-sw"]);
    }

    #[test]
    fn overlapping_pins_fail_validation() {
        let text = format!(
            "{MINIMAL}[addressing.rack-subnets]\nr1 = \"10.0.0.0/24\"\nr2 = \"10.0.0.128/25\"\n"
        );
        let b = build(&ScenarioConfig::parse(&text).unwrap()).unwrap();
        assert!(!b.is_ok());
        assert!(!b.report.check("subnet-overlap").unwrap().passed());
    }

    #[test]
    fn presets_validate() {
        for (name, text) in presets::ALL {
            let cfg = ScenarioConfig::parse(text).unwrap();
            assert_eq!(cfg.name, name);
            let b = build(&cfg).unwrap();
            assert!(b.is_ok(), "{name}\n{}", b.report);
        }
    }
}
