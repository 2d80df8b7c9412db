use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{build, ExperimentSpec, PairSet, ScenarioConfig, ScenarioError};
use crate::linkmodel::DelayProfile;
use crate::sim::{
    run_ping, run_stream, run_traceroute, summarize, Network, PingStats, RunSummary, SimError, SimOptions, StreamStats,
    TraceResult,
};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentResult {
    /// One entry per ordered pair.
    Ping(Vec<PingStats>),
    Traceroute(TraceResult),
    Stream(StreamStats),
}

impl ExperimentResult {
    pub fn runs(&self) -> Vec<&RunSummary> {
        match self {
            ExperimentResult::Ping(v) => v.iter().map(|p| &p.run).collect(),
            ExperimentResult::Traceroute(t) => vec![&t.run],
            ExperimentResult::Stream(s) => vec![&s.run],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    pub results: Vec<ExperimentResult>,
    /// One CSV per experiment, plus traces when asked for.
    pub files: Vec<OutputFile>,
    pub summary: String,
}

pub const SUMMARY_FILE: &str = "summary.txt";

impl RunOutput {
    /// Writes `summary.txt` and every file into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| ScenarioError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let summary = dir.join(SUMMARY_FILE);
        std::fs::write(&summary, &self.summary).map_err(io(&summary))?;
        written.push(summary);
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Seed of sub-run `sub` of experiment `index`: consecutive offsets from the
/// scenario seed, so reruns with one seed reproduce every run.
fn run_seed(seed: u64, index: usize, sub: usize) -> u64 {
    seed.wrapping_add(((index as u64) << 32) + sub as u64)
}

fn us(x: f64) -> String {
    format!("{x:.3}")
}

fn opt_us(x: Option<f64>) -> String {
    x.map(us).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn ping_csv(v: &[PingStats]) -> Vec<u8> {
    csv_bytes(
        &["src", "dst", "sent", "received", "lost", "in-flight", "loss-rate", "rtt-min-us", "rtt-mean-us", "rtt-max-us"],
        v.iter().map(|p| {
            let mmm = p.rtt_min_mean_max();
            vec![
                p.src.to_string(),
                p.dst.to_string(),
                p.sent.to_string(),
                p.received.to_string(),
                p.lost.to_string(),
                p.in_flight.to_string(),
                format!("{:.6}", p.loss_rate),
                opt_us(mmm.map(|m| m.0)),
                opt_us(mmm.map(|m| m.1)),
                opt_us(mmm.map(|m| m.2)),
            ]
        }),
    )
}

pub const TRACEROUTE_COLUMNS: [&str; 5] = ["iteration", "hop-index", "hop-node", "probe-index", "rtt-us"];

fn traceroute_csv(t: &TraceResult) -> Vec<u8> {
    let mut rows = Vec::with_capacity(t.sample_count());
    for i in 0..t.iterations {
        for (h, node) in t.hops.iter().enumerate() {
            for p in 0..t.probes {
                rows.push(vec![
                    (i + 1).to_string(),
                    (h + 1).to_string(),
                    node.to_string(),
                    (p + 1).to_string(),
                    opt_us(t.sample(i, h, p)),
                ]);
            }
        }
    }
    csv_bytes(&TRACEROUTE_COLUMNS, rows)
}

fn stream_csv(src: &NodeId, dst: &NodeId, s: &StreamStats) -> Vec<u8> {
    let lat = s.latency_us;
    csv_bytes(
        &[
            "src",
            "dst",
            "offered-bps",
            "sent",
            "received",
            "dropped",
            "lost",
            "in-flight",
            "loss-rate",
            "throughput-bps",
            "max-jitter-us",
            "latency-min-us",
            "latency-mean-us",
            "latency-max-us",
        ],
        [vec![
            src.to_string(),
            dst.to_string(),
            format!("{:.3}", s.offered_bps),
            s.sent.to_string(),
            s.received.to_string(),
            s.dropped.to_string(),
            s.lost.to_string(),
            s.in_flight.to_string(),
            format!("{:.6}", s.loss_rate),
            format!("{:.3}", s.throughput_bps),
            us(s.max_jitter_us),
            opt_us(lat.map(|l| l.0)),
            opt_us(lat.map(|l| l.1)),
            opt_us(lat.map(|l| l.2)),
        ]],
    )
}

fn trace_text(runs: &[&RunSummary]) -> Vec<u8> {
    let mut s = String::new();
    for r in runs {
        for rec in &r.trace {
            let _ = writeln!(s, "{rec}");
        }
    }
    s.into_bytes()
}

fn summarize_one(out: &mut String, index: usize, spec: &ExperimentSpec, result: &ExperimentResult) {
    let _ = write!(out, "\n[{index}] {}", spec.kind());
    match result {
        ExperimentResult::Ping(v) => {
            let sent: u64 = v.iter().map(|p| p.sent).sum();
            let received: u64 = v.iter().map(|p| p.received).sum();
            let lost: u64 = v.iter().map(|p| p.lost).sum();
            let worst = v.iter().map(|p| p.loss_rate).fold(0.0, f64::max);
            let rtt_max = v.iter().filter_map(|p| p.rtt_min_mean_max()).map(|m| m.2).reduce(f64::max);
            let _ = writeln!(out, " pairs={}", v.len());
            let _ = writeln!(out, "sent {sent} received {received} lost {lost}");
            let _ = writeln!(out, "worst-pair-loss-rate {worst:.6}");
            let _ = writeln!(out, "rtt-max-us {}", opt_us(rtt_max));
        }
        ExperimentResult::Traceroute(t) => {
            let _ = writeln!(
                out,
                " {} -> {} iterations={} hops={} probes={} samples={}",
                t.src,
                t.dst,
                t.iterations,
                t.hops.len(),
                t.probes,
                t.sample_count()
            );
            let s = summarize(t);
            let _ = writeln!(out, "hop node samples min-us mean-us max-us");
            for h in &s.hops {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    h.hop_index,
                    h.node,
                    h.samples,
                    us(h.min_us),
                    us(h.mean_us),
                    us(h.max_us)
                );
            }
            let _ = writeln!(out, "rtt-max-us {}", opt_us(s.global_max_us()));
        }
        ExperimentResult::Stream(s) => {
            let _ = writeln!(out);
            let _ = writeln!(out, "sent {} received {} dropped {} lost {}", s.sent, s.received, s.dropped, s.lost);
            let _ = writeln!(out, "offered-bps {:.3} throughput-bps {:.3}", s.offered_bps, s.throughput_bps);
            let _ = writeln!(out, "max-jitter-us {}", us(s.max_jitter_us));
        }
    }
    let runs = result.runs();
    let conserved = runs.iter().all(|r| r.counters.conserved());
    let _ = writeln!(out, "conserved {conserved}");
    if let [one] = runs.as_slice() {
        let _ = writeln!(out, "trace-sha256 {}", one.trace_hash);
    }
}

fn run_one(
    net: &Network<'_>,
    spec: &ExperimentSpec,
    servers: &[NodeId],
    seed: u64,
    index: usize,
    opts: &SimOptions,
) -> Result<ExperimentResult, SimError> {
    Ok(match spec {
        ExperimentSpec::Ping(p) => {
            let pairs: Vec<(NodeId, NodeId)> = match (&p.pairs, &p.src, &p.dst) {
                (Some(PairSet::AllServers), _, _) => servers
                    .iter()
                    .flat_map(|a| servers.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone())))
                    .collect(),
                (None, Some(s), Some(d)) => vec![(s.clone(), d.clone())],
                _ => unreachable!("checked at parse time"),
            };
            let mut v = Vec::with_capacity(pairs.len());
            for (k, (a, b)) in pairs.iter().enumerate() {
                v.push(run_ping(net, a, b, p.count, p.interval_us, run_seed(seed, index, k), opts)?);
            }
            ExperimentResult::Ping(v)
        }
        ExperimentSpec::Traceroute(t) => ExperimentResult::Traceroute(run_traceroute(
            net,
            &t.src,
            &t.dst,
            t.iterations,
            t.probes,
            run_seed(seed, index, 0),
            opts,
        )?),
        ExperimentSpec::Stream(s) => ExperimentResult::Stream(run_stream(
            net,
            &s.src,
            &s.dst,
            s.rate_bps,
            s.packet_bytes,
            s.duration_us,
            run_seed(seed, index, 0),
            opts,
        )?),
    })
}

/// Validates, then runs every experiment in order. The output depends only
/// on the document and the seed.
pub fn run_scenario(cfg: &ScenarioConfig, seed_override: Option<u64>) -> Result<RunOutput, ScenarioError> {
    let built = build(cfg)?;
    if !built.is_ok() {
        return Err(ScenarioError::Validation(built.report));
    }
    let profile: DelayProfile = cfg.profile(seed_override)?;
    let seed = profile.seed;
    let opts = cfg.sim_options();
    let net = Network {
        topo: &built.topology,
        tables: &built.tables,
        profile: &profile,
    };
    let servers: Vec<NodeId> = built.topology.servers().map(|n| n.id.clone()).collect();

    let mut summary = String::new();
    let _ = writeln!(summary, "ponsim run report");
    let _ = writeln!(summary, "scenario {}", if cfg.name.is_empty() { "-" } else { &cfg.name });
    let _ = writeln!(summary, "seed {seed}");
    let _ = writeln!(summary, "experiments {}", cfg.experiments.len());

    let mut results = Vec::new();
    let mut files = Vec::new();
    for (i, spec) in cfg.experiments.iter().enumerate() {
        let index = i + 1;
        let result = run_one(&net, spec, &servers, seed, i, &opts)
            .map_err(|source| ScenarioError::Experiment { index, source })?;
        let csv = match (&result, spec) {
            (ExperimentResult::Ping(v), _) => ping_csv(v),
            (ExperimentResult::Traceroute(t), _) => traceroute_csv(t),
            (ExperimentResult::Stream(s), ExperimentSpec::Stream(sp)) => stream_csv(&sp.src, &sp.dst, s),
            _ => unreachable!("result kind follows the experiment kind"),
        };
        let stem = format!("{index:02}-{}", spec.kind());
        files.push(OutputFile {
            name: format!("{stem}.csv"),
            contents: csv,
        });
        if opts.keep_trace {
            files.push(OutputFile {
                name: format!("{stem}.trace"),
                contents: trace_text(&result.runs()),
            });
        }
        summarize_one(&mut summary, index, spec, &result);
        results.push(result);
    }
    Ok(RunOutput {
        seed,
        results,
        files,
        summary,
    })
}
