//! Strict file ingestion: count paths and event traces.

use queue_infer::simulator::{ContinuousTrace, CountPaths, PathMeta};
use queue_infer::Error;

/// Parse a count-path CSV with header `t,A,D`; the time index must start at
/// 1 and increase by exactly 1 per row.
pub fn ingest_counts(text: &str, source: &str) -> Result<CountPaths, Error> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t,A,D" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header 't,A,D', got '{header}'"),
            })
        }
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    }
    let mut arrivals = Vec::new();
    let mut departures = Vec::new();
    let mut expected_t = 1usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let t: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("time index '{}' is not a positive integer", fields[0]),
        })?;
        if t != expected_t {
            return Err(Error::Parse {
                line: line_no,
                message: format!("non-contiguous time index: expected {expected_t}, got {t}"),
            });
        }
        expected_t += 1;
        let a: u32 = fields[1].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("arrival count '{}' is not a nonnegative integer", fields[1]),
        })?;
        let d: u32 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("departure count '{}' is not a nonnegative integer", fields[2]),
        })?;
        arrivals.push(a);
        departures.push(d);
    }
    if arrivals.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    let meta = PathMeta { source: Some(source.to_string()), ..PathMeta::default() };
    CountPaths::new(arrivals, departures, meta)
}

/// Parse an event-trace CSV with header `kind,time`, kinds `arrival` and
/// `departure`. The horizon must strictly dominate every event time.
pub fn ingest_trace(text: &str, horizon: Option<f64>, h: f64) -> Result<ContinuousTrace, Error> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "kind,time" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header 'kind,time', got '{header}'"),
            })
        }
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    }
    let mut arrivals = Vec::new();
    let mut departures = Vec::new();
    let mut max_time = 0.0f64;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (kind, time) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected 'kind,time'".into(),
        })?;
        let t: f64 = time.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("time '{time}' is not a number"),
        })?;
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("time {t} must be finite and nonnegative"),
            });
        }
        max_time = max_time.max(t);
        match kind.trim() {
            "arrival" => arrivals.push(t),
            "departure" => departures.push(t),
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown event kind '{other}'"),
                })
            }
        }
    }
    // Default horizon: the smallest slot-grid multiple strictly beyond the
    // last event, so every event fits a half-open bin.
    let horizon = horizon.unwrap_or_else(|| ((max_time / h).floor() + 1.0) * h);
    ContinuousTrace::new(arrivals, departures, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_counts_parse() {
        let paths = ingest_counts("t,A,D\n1,2,0\n2,0,1\n3,1,1\n", "test").unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(paths.arrivals, vec![2, 0, 1]);
        assert_eq!(paths.departures, vec![0, 1, 1]);
    }

    #[test]
    fn negative_count_is_a_parse_error_with_line() {
        let err = ingest_counts("t,A,D\n1,1,0\n2,-1,0\n", "test").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("-1"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn time_gap_is_non_contiguous() {
        let err = ingest_counts("t,A,D\n1,1,0\n2,0,0\n4,0,0\n", "test").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("non-contiguous time index"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trace_parses_and_infers_horizon() {
        let trace =
            ingest_trace("kind,time\narrival,0.05\narrival,0.17\ndeparture,0.30\n", None, 0.1)
                .unwrap();
        assert_eq!(trace.arrival_times.len(), 2);
        assert_eq!(trace.departure_times.len(), 1);
        assert!(trace.horizon > 0.30);
    }
}
