//! Deliberately naive recomputation of the ledger statistics: plain loops,
//! plain `f64` accumulation, hash-map cost lookups. Shares no code with the
//! ledger itself so the two can cross-check each other.

use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawEpoch {
    pub s: u32,
    pub pi: u32,
    pub p: u32,
    pub tau: u32,
    pub d: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RawCosts {
    /// `(place, station) -> A`
    pub a: HashMap<(u32, u32), f64>,
    /// `(station, place) -> B`
    pub b: HashMap<(u32, u32), f64>,
    pub stations: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleStats {
    pub direct: f64,
    pub departed: f64,
    pub residual: f64,
    pub shifted: f64,
    pub decomposed: f64,
    pub decomposed_unweighted: f64,
}

pub fn naive_stats(epochs: &[RawEpoch], costs: &RawCosts, n: usize) -> OracleStats {
    let a = |p: u32, s: u32| costs.a[&(p, s)];
    let b = |s: u32, p: u32| costs.b[&(s, p)];
    let nf = n as f64;

    let mut q: HashMap<u32, f64> = HashMap::new();
    for e in &epochs[..n] {
        *q.entry(e.tau).or_insert(0.0) += 1.0;
    }

    let mut direct = 0.0;
    let mut departed = 0.0;
    let mut residual = 0.0;
    let mut shifted = 0.0;
    let mut decomposed = 0.0;
    let mut unweighted = 0.0;
    for t in 0..n {
        let e = epochs[t];
        let cost = a(e.p, e.tau) + b(e.s, e.pi);
        direct += cost;
        let gone = matches!(e.d, Some(d) if d < n);
        if gone {
            departed += cost;
        } else {
            residual += cost;
        }
        shifted += b(e.s, e.pi);
        decomposed += b(e.s, e.pi);
        unweighted += b(e.s, e.pi);
        if gone {
            let next_station = epochs[e.d.unwrap()].tau;
            shifted += a(e.pi, next_station);
            for s in &costs.stations {
                decomposed += q.get(s).copied().unwrap_or(0.0) / nf * a(e.pi, *s);
            }
        }
        for s in &costs.stations {
            unweighted += a(e.pi, *s);
        }
    }
    OracleStats {
        direct: direct / nf,
        departed: departed / nf,
        residual: residual / nf,
        shifted: shifted / nf,
        decomposed: decomposed / nf,
        decomposed_unweighted: unweighted / nf,
    }
}
