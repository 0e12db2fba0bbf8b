//! Plain-text epoch dump: self-contained (cost tables included) so it can be
//! re-checked without the layout that produced it.
//!
//! ```text
//! rmfs-epochs 1
//! pods 6
//! places 0 1 2
//! stations 0 1
//! A 0 2 5        # one row per place, one column per station
//! B 0 2 5        # same shape, B(station, place) stored by place
//! epochs 2
//! 0 1 0 2 0 1    # t S pi P tau D ("-" when not departed)
//! 1 0 2 0 1 -
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ids::{StationId, WaypointId};
use crate::ledger::oracle::{self, OracleStats, RawCosts, RawEpoch};
use crate::ledger::{CostFunctions, CostLedger, LedgerError};

const MAGIC: &str = "rmfs-epochs 1";

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("empty dump")]
    Empty,
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("record {0} missing")]
    RecordMissing(usize),
    #[error("trailing data after {0} records")]
    Trailing(usize),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochDump {
    pub pod_count: usize,
    pub places: Vec<u32>,
    pub stations: Vec<u32>,
    /// `a[place][station]`
    pub a: Vec<Vec<f64>>,
    /// `b[place][station]`
    pub b: Vec<Vec<f64>>,
    pub epochs: Vec<RawEpoch>,
}

impl EpochDump {
    pub fn from_ledger(ledger: &CostLedger) -> Self {
        let costs = ledger.costs();
        let table = |f: &dyn Fn(WaypointId, StationId) -> f64| {
            costs
                .places()
                .iter()
                .map(|p| costs.stations().iter().map(|s| f(*p, *s)).collect())
                .collect()
        };
        Self {
            pod_count: ledger.pod_count(),
            places: costs.places().iter().map(|p| p.0).collect(),
            stations: costs.stations().iter().map(|s| s.0).collect(),
            a: table(&|p, s| costs.to_station(p, s).unwrap_or(0.0)),
            b: table(&|p, s| costs.from_station(s, p).unwrap_or(0.0)),
            epochs: ledger
                .epochs()
                .iter()
                .map(|e| RawEpoch {
                    s: e.from_station.0,
                    pi: e.assigned_place.0,
                    p: e.departure_place.0,
                    tau: e.departure_station.0,
                    d: e.departs_at,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "pods {}", self.pod_count);
        let _ = writeln!(out, "places {}", join(&self.places));
        let _ = writeln!(out, "stations {}", join(&self.stations));
        for (tag, table) in [("A", &self.a), ("B", &self.b)] {
            for (place, row) in self.places.iter().zip(table) {
                let vals: Vec<_> = row.iter().map(f64::to_string).collect();
                let _ = writeln!(out, "{tag} {place} {}", vals.join(" "));
            }
        }
        let _ = writeln!(out, "epochs {}", self.epochs.len());
        for (t, e) in self.epochs.iter().enumerate() {
            let d = e.d.map_or("-".to_owned(), |d| d.to_string());
            let _ = writeln!(out, "{t} {} {} {} {} {d}", e.s, e.pi, e.p, e.tau);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DumpError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, first) = lines.next().ok_or(DumpError::Empty)?;
        if first != MAGIC {
            return Err(syntax(line, format!("expected {MAGIC:?}")));
        }

        let mut header = |key: &str| -> Result<(usize, Vec<&str>), DumpError> {
            let (line, l) = lines
                .next()
                .ok_or_else(|| syntax(0, format!("missing {key} line")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(syntax(line, format!("expected {key}")));
            }
            Ok((line, it.collect()))
        };

        let (line, v) = header("pods")?;
        let pod_count = single(line, &v)?;
        let (line, v) = header("places")?;
        let places: Vec<u32> = numbers(line, &v)?;
        let (line, v) = header("stations")?;
        let stations: Vec<u32> = numbers(line, &v)?;
        if places.is_empty() || stations.is_empty() {
            return Err(syntax(line, "no places or stations".into()));
        }
        let mut tables = [Vec::new(), Vec::new()];
        for (k, tag) in ["A", "B"].into_iter().enumerate() {
            for place in &places {
                let (line, v) = header(tag)?;
                let (head, vals) = v
                    .split_first()
                    .ok_or_else(|| syntax(line, "missing place".into()))?;
                if head.parse::<u32>().ok() != Some(*place) {
                    return Err(syntax(line, format!("expected row for place {place}")));
                }
                let row: Vec<f64> = numbers(line, vals)?;
                if row.len() != stations.len() {
                    return Err(syntax(line, format!("expected {} costs", stations.len())));
                }
                tables[k].push(row);
            }
        }
        let (line, v) = header("epochs")?;
        let count: usize = single(line, &v)?;
        let [a, b] = tables;

        let mut epochs = Vec::with_capacity(count.min(1 << 16));
        for t in 0..count {
            let (line, l) = lines.next().ok_or(DumpError::RecordMissing(t))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 6 {
                return Err(syntax(line, "expected t S pi P tau D".into()));
            }
            if f[0].parse::<usize>().ok() != Some(t) {
                return Err(DumpError::RecordMissing(t));
            }
            let nums: Vec<u32> = numbers(line, &f[1..5])?;
            let d = match f[5] {
                "-" => None,
                s => Some(s.parse().map_err(|_| syntax(line, format!("bad D {s:?}")))?),
            };
            epochs.push(RawEpoch {
                s: nums[0],
                pi: nums[1],
                p: nums[2],
                tau: nums[3],
                d,
            });
        }
        if lines.next().is_some() {
            return Err(DumpError::Trailing(count));
        }
        Ok(Self {
            pod_count,
            places,
            stations,
            a,
            b,
            epochs,
        })
    }

    pub fn cost_functions(&self) -> Result<CostFunctions, LedgerError> {
        CostFunctions::from_tables(
            self.places.iter().map(|p| WaypointId(*p)).collect(),
            self.stations.iter().map(|s| StationId(*s)).collect(),
            self.a.concat(),
            self.b.concat(),
        )
    }

    /// Rebuilds the ledger, re-validating every record and link.
    pub fn to_ledger(&self) -> Result<CostLedger, LedgerError> {
        let mut ledger = CostLedger::new(self.cost_functions()?, self.pod_count);
        for e in &self.epochs {
            ledger.record_epoch(
                StationId(e.s),
                WaypointId(e.pi),
                WaypointId(e.p),
                StationId(e.tau),
            )?;
        }
        for (t, e) in self.epochs.iter().enumerate() {
            if let Some(d) = e.d {
                ledger.link_departure(t, d)?;
            }
        }
        Ok(ledger)
    }

    pub fn raw_costs(&self) -> RawCosts {
        let mut a = HashMap::new();
        let mut b = HashMap::new();
        for (i, p) in self.places.iter().enumerate() {
            for (j, s) in self.stations.iter().enumerate() {
                a.insert((*p, *s), self.a[i][j]);
                b.insert((*s, *p), self.b[i][j]);
            }
        }
        RawCosts {
            a,
            b,
            stations: self.stations.clone(),
        }
    }
}

fn syntax(line: usize, msg: String) -> DumpError {
    DumpError::Syntax { line, msg }
}

fn numbers<T: std::str::FromStr>(line: usize, v: &[&str]) -> Result<Vec<T>, DumpError> {
    v.iter()
        .map(|s| s.parse().map_err(|_| syntax(line, format!("bad number {s:?}"))))
        .collect()
}

fn single<T: std::str::FromStr>(line: usize, v: &[&str]) -> Result<T, DumpError> {
    match numbers(line, v)?.pop() {
        Some(x) if v.len() == 1 => Ok(x),
        _ => Err(syntax(line, "expected one value".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub statistic: &'static str,
    pub ledger: f64,
    pub oracle: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub n: usize,
    pub deviations: Vec<Deviation>,
}

impl VerifyReport {
    pub fn max_relative(&self) -> f64 {
        self.deviations.iter().map(|d| d.relative).fold(0.0, f64::max)
    }
}

pub fn relative_deviation(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        (x - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
    }
}

/// Recomputes every statistic over the whole dump with the naive oracle and
/// compares against the ledger implementation.
pub fn verify(dump: &EpochDump) -> Result<VerifyReport, DumpError> {
    let n = dump.epochs.len();
    if n == 0 {
        return Err(DumpError::Ledger(LedgerError::EmptyLedger));
    }
    let ledger = dump.to_ledger()?;
    let r = ledger.report(n)?;
    let o: OracleStats = oracle::naive_stats(&dump.epochs, &dump.raw_costs(), n);
    let pairs = [
        ("direct_avg", r.direct_avg, o.direct),
        ("departed_part", r.departed_part, o.departed),
        ("residual_part", r.residual_part, o.residual),
        ("shifted_avg", r.shifted_avg, o.shifted),
        ("decomposed_est", r.decomposed_est, o.decomposed),
        ("decomposed_unweighted", r.decomposed_unweighted, o.decomposed_unweighted),
    ];
    Ok(VerifyReport {
        n,
        deviations: pairs
            .into_iter()
            .map(|(statistic, ledger, oracle)| Deviation {
                statistic,
                ledger,
                oracle,
                relative: relative_deviation(ledger, oracle),
            })
            .collect(),
    })
}

pub fn verify_text(text: &str) -> Result<VerifyReport, DumpError> {
    verify(&EpochDump::parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CostLedger {
        let costs = CostFunctions::from_fns(
            vec![WaypointId(0), WaypointId(2)],
            vec![StationId(0), StationId(1)],
            |p, s| f64::from(p.0 + s.0) + 0.5,
            |s, p| f64::from(p.0 * 2 + s.0),
        )
        .unwrap();
        let mut l = CostLedger::new(costs, 2);
        let places = [0, 2, 0, 2, 2, 0];
        for (t, pl) in places.iter().enumerate() {
            l.record_epoch(
                StationId((t % 2) as u32),
                WaypointId(*pl),
                WaypointId(places[(t + 1) % 6]),
                StationId(((t / 2) % 2) as u32),
            )
            .unwrap();
        }
        l.link_departure(0, 2).unwrap();
        l.link_departure(1, 3).unwrap();
        l.link_departure(2, 5).unwrap();
        l
    }

    #[test]
    fn round_trip_text() {
        let dump = EpochDump::from_ledger(&sample());
        let text = dump.to_text();
        assert_eq!(EpochDump::parse(&text).unwrap(), dump);
        let rebuilt = dump.to_ledger().unwrap();
        assert_eq!(rebuilt.epochs(), sample().epochs());
    }

    #[test]
    fn verify_agrees_with_oracle() {
        let text = EpochDump::from_ledger(&sample()).to_text();
        let rep = verify_text(&text).unwrap();
        assert_eq!(rep.n, 6);
        assert!(rep.max_relative() <= 1e-9, "{rep:?}");
    }

    #[test]
    fn truncated_names_the_missing_record() {
        let text = EpochDump::from_ledger(&sample()).to_text();
        let cut: Vec<&str> = text.lines().collect();
        let cut = cut[..cut.len() - 2].join("\n");
        let err = EpochDump::parse(&cut).unwrap_err();
        assert_eq!(err, DumpError::RecordMissing(4));
        assert_eq!(err.to_string(), "record 4 missing");
    }

    #[test]
    fn empty_and_zero_epoch_dumps_error() {
        assert_eq!(EpochDump::parse(""), Err(DumpError::Empty));
        assert_eq!(EpochDump::parse("\n  \n"), Err(DumpError::Empty));
        let mut dump = EpochDump::from_ledger(&sample());
        dump.epochs.clear();
        assert!(verify_text(&dump.to_text()).is_err());
    }

    #[test]
    fn garbage_rejected_with_line_number() {
        let text = EpochDump::from_ledger(&sample()).to_text();
        let bad = text.replacen("pods 2", "pods two", 1);
        assert!(matches!(
            EpochDump::parse(&bad),
            Err(DumpError::Syntax { line: 2, .. })
        ));
        let doubled = text.replace("\n0 0 0 2 0 2\n", "\n0 0 0 2 0 3\n");
        assert!(verify_text(&doubled).is_err());
    }
}
