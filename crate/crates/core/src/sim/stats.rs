use crate::topology::NodeId;

use super::TraceResult;

#[derive(Debug, Clone, PartialEq)]
pub struct HopRow {
    /// 1-based.
    pub hop_index: usize,
    pub node: NodeId,
    pub samples: usize,
    pub min_us: f64,
    pub mean_us: f64,
    pub max_us: f64,
}

/// Mean RTT of one hop within one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    /// 1-based.
    pub iteration: usize,
    pub hop_index: usize,
    pub mean_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub hops: Vec<HopRow>,
    pub series: Vec<IterationRow>,
}

impl Summary {
    pub fn global_max_us(&self) -> Option<f64> {
        self.hops.iter().map(|h| h.max_us).reduce(f64::max)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Per-hop min/mean/max over every answered probe, and per-iteration hop
/// means. Timed-out probes are left out; a hop with no answers reports zeros.
pub fn summarize(r: &TraceResult) -> Summary {
    let mut out = Summary::default();
    for (h, node) in r.hops.iter().enumerate() {
        let xs: Vec<f64> = r.hop_samples(h).flatten().collect();
        let (min_us, max_us) = if xs.is_empty() {
            (0.0, 0.0)
        } else {
            (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        };
        out.hops.push(HopRow {
            hop_index: h + 1,
            node: node.clone(),
            samples: xs.len(),
            min_us,
            mean_us: mean(&xs),
            max_us,
        });
    }
    for i in 0..r.iterations {
        for h in 0..r.hops.len() {
            let xs: Vec<f64> = (0..r.probes).filter_map(|p| r.sample(i, h, p)).collect();
            out.series.push(IterationRow {
                iteration: i + 1,
                hop_index: h + 1,
                mean_us: mean(&xs),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::engine::{Counters, RunSummary};
    use super::*;

    fn result(iterations: usize, hops: usize, probes: usize, samples: Vec<Option<f64>>) -> TraceResult {
        TraceResult {
            src: "a".into(),
            dst: "z".into(),
            hops: (0..hops).map(|h| NodeId::new(format!("h{h}"))).collect(),
            iterations,
            probes,
            repliers: vec![None; samples.len()],
            samples,
            hop_propagation_us: vec![0.0; hops],
            run: RunSummary {
                counters: Counters::default(),
                trace_hash: String::new(),
                trace: Vec::new(),
                truncated: false,
                end_time: 0,
            },
        }
    }

    #[test]
    fn zeros() {
        let s = summarize(&result(3, 2, 2, vec![Some(0.0); 12]));
        assert!(s.hops.iter().all(|h| h.min_us == 0.0 && h.mean_us == 0.0 && h.max_us == 0.0));
        assert_eq!(s.series.len(), 6);
    }

    #[test]
    fn two_by_two_by_one() {
        // iteration 1: hop1 100, hop2 300; iteration 2: hop1 140, hop2 200
        let s = summarize(&result(2, 2, 1, vec![Some(100.0), Some(300.0), Some(140.0), Some(200.0)]));
        assert_eq!((s.hops[0].min_us, s.hops[0].mean_us, s.hops[0].max_us), (100.0, 120.0, 140.0));
        assert_eq!((s.hops[1].min_us, s.hops[1].mean_us, s.hops[1].max_us), (200.0, 250.0, 300.0));
        assert_eq!(s.series[3], IterationRow { iteration: 2, hop_index: 2, mean_us: 200.0 });
        assert_eq!(s.global_max_us(), Some(300.0));
    }

    #[test]
    fn lost_probes_are_skipped() {
        let s = summarize(&result(1, 1, 3, vec![Some(10.0), None, Some(20.0)]));
        assert_eq!(s.hops[0].samples, 2);
        assert_eq!(s.hops[0].mean_us, 15.0);
    }
}
