//! Long-form CSV traces: one `slot,node,backlog,arrivals` row per relay per slot.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::TraceRow;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    slot: u64,
    node: usize,
    backlog: u32,
    arrivals: u32,
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        for (k, (&backlog, &arrivals)) in row.backlog.iter().zip(&row.arrivals).enumerate() {
            w.serialize(Record {
                slot: row.slot,
                node: k + 1,
                backlog,
                arrivals,
            })?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`write_trace`]; rows must come grouped by slot with nodes in order.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, TraceError> {
    let mut rows: Vec<TraceRow> = Vec::new();
    for rec in csv::Reader::from_reader(input).deserialize() {
        let rec: Record = rec?;
        match rows.last_mut() {
            Some(last) if last.slot == rec.slot => {
                if rec.node != last.backlog.len() + 1 {
                    return Err(TraceError::Malformed(format!("slot {} node {} out of order", rec.slot, rec.node)));
                }
                last.backlog.push(rec.backlog);
                last.arrivals.push(rec.arrivals);
            }
            _ => {
                if rec.node != 1 {
                    return Err(TraceError::Malformed(format!("slot {} starts at node {}", rec.slot, rec.node)));
                }
                rows.push(TraceRow {
                    slot: rec.slot,
                    backlog: vec![rec.backlog],
                    arrivals: vec![rec.arrivals],
                });
            }
        }
    }
    Ok(rows)
}

/// Post-warmup averages recomputed from a trace, in the same arithmetic as
/// the simulator so they match its summary bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSummary {
    pub avg_total_backlog: f64,
    pub avg_backlog: Vec<f64>,
    pub arrived: u64,
}

pub fn summarize(rows: &[TraceRow], warmup: u64) -> TraceSummary {
    let n = rows.first().map_or(0, |r| r.backlog.len());
    let mut total = 0u64;
    let mut per_node = vec![0u64; n];
    let mut measured = 0u64;
    let mut arrived = 0u64;
    for row in rows {
        arrived += row.arrivals.iter().map(|&a| a as u64).sum::<u64>();
        if row.slot < warmup {
            continue;
        }
        measured += 1;
        for (acc, &x) in per_node.iter_mut().zip(&row.backlog) {
            *acc += x as u64;
            total += x as u64;
        }
    }
    let m = measured.max(1) as f64;
    TraceSummary {
        avg_total_backlog: total as f64 / m,
        avg_backlog: per_node.iter().map(|&x| x as f64 / m).collect(),
        arrived,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            TraceRow {
                slot: 0,
                backlog: vec![0, 0],
                arrivals: vec![1, 0],
            },
            TraceRow {
                slot: 1,
                backlog: vec![1, 0],
                arrivals: vec![0, 1],
            },
        ];
        let mut buf = Vec::new();
        write_trace(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("slot,node,backlog,arrivals\n0,1,0,1\n"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
        let s = summarize(&rows, 1);
        assert_eq!(s.avg_total_backlog, 1.0);
        assert_eq!(s.arrived, 2);
    }

    #[test]
    fn rejects_shuffled_rows() {
        let text = "slot,node,backlog,arrivals\n0,2,0,0\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(TraceError::Malformed(_))));
    }
}
