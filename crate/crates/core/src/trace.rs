//! Run records and their CSV form.
//!
//! `events.csv`: `task_id,k,request_time,write_time,staleness,objective_after`
//! (one row per accepted update, `objective_after` empty when not sampled).
//! `summary.csv`: a single row of
//! `mode,T,d,n,offset,makespan,final_objective,measured_tau,seed`.
//! Times are seconds with exactly nine decimals, so nanosecond virtual
//! timestamps survive a round trip.

use std::fs;
use std::path::Path;

use crate::data::csv_error;
use crate::error::{Error, Result};
use crate::model::MtlProblem;
use crate::numerics::DenseMatrix;
use crate::runtime::{ns_to_secs, Mode, RunConfig, UpdateEvent};

pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const EVENTS_HEADER: [&str; 6] = [
    "task_id",
    "k",
    "request_time",
    "write_time",
    "staleness",
    "objective_after",
];
pub const SUMMARY_HEADER: [&str; 9] = [
    "mode",
    "T",
    "d",
    "n",
    "offset",
    "makespan",
    "final_objective",
    "measured_tau",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemShape {
    pub t_count: usize,
    pub dim: usize,
    /// Largest per-task sample count.
    pub samples: usize,
}

impl ProblemShape {
    pub fn of(problem: &MtlProblem) -> Self {
        Self {
            t_count: problem.task_count(),
            dim: problem.dim(),
            samples: problem.max_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_v: DenseMatrix,
    pub final_w: DenseMatrix,
    /// Sorted by `k`.
    pub events: Vec<UpdateEvent>,
    pub makespan_ns: u64,
    pub per_task_update_counts: Vec<usize>,
    pub final_objective: f64,
    /// Objective at the starting point `V = 0`.
    pub initial_objective: f64,
    pub measured_tau: usize,
    pub config_echo: RunConfig,
    pub shape: ProblemShape,
}

impl RunResult {
    pub fn makespan(&self) -> f64 {
        ns_to_secs(self.makespan_ns)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            mode: self.config_echo.mode,
            t_count: self.shape.t_count,
            dim: self.shape.dim,
            samples: self.shape.samples,
            offset: self.config_echo.delay_model.offset,
            makespan_ns: self.makespan_ns,
            final_objective: self.final_objective,
            measured_tau: self.measured_tau,
            seed: self.config_echo.seed,
        }
    }

    /// Objective after each update, carrying the latest sample forward
    /// between sampled updates. Length equals the number of events.
    pub fn objective_curve(&self) -> Vec<f64> {
        let mut last = self.initial_objective;
        self.events
            .iter()
            .map(|e| {
                if let Some(o) = e.objective_after {
                    last = o;
                }
                last
            })
            .collect()
    }
}

/// The `summary.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub t_count: usize,
    pub dim: usize,
    pub samples: usize,
    pub offset: f64,
    pub makespan_ns: u64,
    pub final_objective: f64,
    pub measured_tau: usize,
    pub seed: u64,
}

impl RunSummary {
    pub fn makespan(&self) -> f64 {
        ns_to_secs(self.makespan_ns)
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.mode.to_string(),
            self.t_count.to_string(),
            self.dim.to_string(),
            self.samples.to_string(),
            self.offset.to_string(),
            format_ns(self.makespan_ns),
            self.final_objective.to_string(),
            self.measured_tau.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Seconds with nine decimals: `12.000000500`.
pub fn format_ns(ns: u64) -> String {
    format!("{}.{:09}", ns / 1_000_000_000, ns % 1_000_000_000)
}

pub fn parse_ns(s: &str) -> Option<u64> {
    let (whole, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
    if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = whole.parse().ok()?;
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<9}").parse().ok()?
    };
    whole.checked_mul(1_000_000_000)?.checked_add(frac)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

pub fn write_events(events: &[UpdateEvent], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EVENTS_HEADER).map_err(|e| csv_error(path, e))?;
    for e in events {
        w.write_record([
            e.task_id.to_string(),
            e.k.to_string(),
            format_ns(e.request_ns),
            format_ns(e.write_ns),
            e.staleness.to_string(),
            e.objective_after.map(|o| o.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    write_summaries(std::slice::from_ref(summary), path)
}

/// Several summary rows under one header, as in a parameter sweep.
pub fn write_summaries(summaries: &[RunSummary], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_error(path, e))?;
    for s in summaries {
        w.write_record(s.to_record()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `events.csv` and `summary.csv` into `dir` (created if missing).
pub fn export_csv(result: &RunResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_events(&result.events, &dir.join(EVENTS_FILE))?;
    write_summary(&result.summary(), &dir.join(SUMMARY_FILE))
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad or missing {name}"),
        })
}

fn time_field(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<u64> {
    rec.get(i).and_then(parse_ns).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad or missing {name}"),
    })
}

fn check_header(path: &Path, reader: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

pub fn parse_summary(path: impl AsRef<Path>) -> Result<RunSummary> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(path, &mut reader, &SUMMARY_HEADER)?;
    let mut rows = reader.records();
    let rec = rows
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: "summary has no data row".into(),
        })?
        .map_err(|e| csv_error(path, e))?;
    if rows.next().is_some() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 3,
            message: "summary must contain exactly one row".into(),
        });
    }
    let mode: String = field(path, 2, &rec, 0, "mode")?;
    Ok(RunSummary {
        mode: mode.parse()?,
        t_count: field(path, 2, &rec, 1, "T")?,
        dim: field(path, 2, &rec, 2, "d")?,
        samples: field(path, 2, &rec, 3, "n")?,
        offset: field(path, 2, &rec, 4, "offset")?,
        makespan_ns: time_field(path, 2, &rec, 5, "makespan")?,
        final_objective: field(path, 2, &rec, 6, "final_objective")?,
        measured_tau: field(path, 2, &rec, 7, "measured_tau")?,
        seed: field(path, 2, &rec, 8, "seed")?,
    })
}

pub fn parse_events(path: impl AsRef<Path>) -> Result<Vec<UpdateEvent>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    check_header(path, &mut reader, &EVENTS_HEADER)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let objective_after = match rec.get(5).map(str::trim) {
            None | Some("") => None,
            Some(_) => Some(field(path, line, &rec, 5, "objective_after")?),
        };
        out.push(UpdateEvent {
            task_id: field(path, line, &rec, 0, "task_id")?,
            k: field(path, line, &rec, 1, "k")?,
            request_ns: time_field(path, line, &rec, 2, "request_time")?,
            write_ns: time_field(path, line, &rec, 3, "write_time")?,
            staleness: field(path, line, &rec, 4, "staleness")?,
            objective_after,
        });
    }
    Ok(out)
}

/// Side-by-side view of two runs on the same problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    /// `makespan(a) / makespan(b)`; 1 when both are zero.
    pub makespan_ratio: f64,
    /// `final_objective(a) − final_objective(b)`.
    pub objective_difference: f64,
    pub curve_a: Vec<f64>,
    pub curve_b: Vec<f64>,
}

pub fn compare_report(a: &RunResult, b: &RunResult) -> Result<ComparisonSummary> {
    if a.shape != b.shape {
        return Err(Error::Argument(format!(
            "cannot compare runs on different problems: {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let makespan_ratio = if a.makespan_ns == b.makespan_ns {
        1.0
    } else {
        a.makespan_ns as f64 / b.makespan_ns as f64
    };
    Ok(ComparisonSummary {
        makespan_ratio,
        objective_difference: a.final_objective - b.final_objective,
        curve_a: a.objective_curve(),
        curve_b: b.objective_curve(),
    })
}

/// `update,objective_a,objective_b`; the shorter curve leaves blanks.
pub fn write_comparison(report: &ComparisonSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["update", "objective_a", "objective_b"])
        .map_err(|e| csv_error(path, e))?;
    let len = report.curve_a.len().max(report.curve_b.len());
    let cell = |c: &[f64], i: usize| c.get(i).map(|v| v.to_string()).unwrap_or_default();
    for i in 0..len {
        w.write_record([(i + 1).to_string(), cell(&report.curve_a, i), cell(&report.curve_b, i)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_format_round_trips() {
        for ns in [0, 1, 999_999_999, 1_000_000_000, 12_000_000_500, u64::MAX / 2] {
            assert_eq!(parse_ns(&format_ns(ns)), Some(ns));
        }
        assert_eq!(format_ns(12_000_000_500), "12.000000500");
        assert_eq!(parse_ns("3.5"), Some(3_500_000_000));
        assert_eq!(parse_ns("3"), Some(3_000_000_000));
        assert_eq!(parse_ns("1.0000000001"), None);
        assert_eq!(parse_ns("-1.0"), None);
    }

    #[test]
    fn empty_events_file_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        write_events(&[], &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "task_id,k,request_time,write_time,staleness,objective_after\n"
        );
        assert!(parse_events(&path).unwrap().is_empty());
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            UpdateEvent {
                task_id: 1,
                k: 0,
                request_ns: 0,
                write_ns: 5_000_012_345,
                staleness: 0,
                objective_after: None,
            },
            UpdateEvent {
                task_id: 0,
                k: 1,
                request_ns: 7,
                write_ns: 6_000_000_000,
                staleness: 1,
                objective_after: Some(0.1 + 0.2),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        write_events(&events, &path).unwrap();
        assert_eq!(parse_events(&path).unwrap(), events);
    }

    #[test]
    fn summary_rejects_extra_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SUMMARY_FILE);
        let s = RunSummary {
            mode: Mode::Smtl,
            t_count: 3,
            dim: 4,
            samples: 5,
            offset: 2.5,
            makespan_ns: 10,
            final_objective: 1.0 / 3.0,
            measured_tau: 0,
            seed: 42,
        };
        write_summary(&s, &path).unwrap();
        assert_eq!(parse_summary(&path).unwrap(), s);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("amtl,3,4,5,2.5,0.000000010,1,0,42\n");
        fs::write(&path, text).unwrap();
        assert!(parse_summary(&path).is_err());
    }

    #[test]
    fn export_to_unwritable_path_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_events(&[], &blocker.join("events.csv")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
