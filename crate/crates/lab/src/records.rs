//! CSV outputs. Each row reaches the file in a single `write_all`, so an
//! interrupted run leaves a file whose complete lines are all valid records.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::{LabError, LabResult};

pub const TRAJECTORY_HEADER: [&str; 4] = ["replica_id", "t_macro", "observable_name", "value"];

pub const SUMMARY_HEADER: [&str; 12] = [
    "run_id",
    "gamma",
    "n",
    "epsilon",
    "gamma_sq",
    "eps_mismatch",
    "observable",
    "mean",
    "stderr",
    "tau",
    "samples",
    "replicas",
];

pub const PLOT_HEADER: [&str; 3] = ["x", "y", "yerr"];

/// Append-only CSV file with a header row.
#[derive(Debug)]
pub struct CsvSink {
    file: File,
    columns: usize,
}

fn encode<I, S>(row: I) -> LabResult<(Vec<u8>, usize)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let fields: Vec<S> = row.into_iter().collect();
    w.write_record(&fields)?;
    let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
    Ok((bytes, fields.len()))
}

impl CsvSink {
    pub fn create(path: &Path, header: &[&str]) -> LabResult<Self> {
        let mut file = OpenOptions::new().write(true).create(true).truncate(true).open(path)?;
        let (bytes, columns) = encode(header)?;
        file.write_all(&bytes)?;
        Ok(Self { file, columns })
    }

    pub fn write_row<I, S>(&mut self, row: I) -> LabResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let (bytes, n) = encode(row)?;
        if n != self.columns {
            return Err(LabError::Param(format!("row has {n} fields, header has {}", self.columns)));
        }
        self.file.write_all(&bytes)?;
        Ok(())
    }

    pub fn flush(&mut self) -> LabResult<()> {
        self.file.flush()?;
        Ok(())
    }
}

/// One observable value along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub replica: u64,
    pub t_macro: f64,
    pub name: String,
    pub value: f64,
}

impl TrajectoryRow {
    pub fn fields(&self) -> [String; 4] {
        [self.replica.to_string(), fmt_real(self.t_macro), self.name.clone(), fmt_real(self.value)]
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// `x,y,yerr` rows for external plotting.
pub fn write_plot_data(path: &Path, points: &[(f64, f64, f64)]) -> LabResult<()> {
    let mut sink = CsvSink::create(path, &PLOT_HEADER)?;
    for &(x, y, e) in points {
        sink.write_row([fmt_real(x), fmt_real(y), fmt_real(e)])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_and_arity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut sink = CsvSink::create(&path, &TRAJECTORY_HEADER).unwrap();
        let row = TrajectoryRow { replica: 3, t_macro: 0.5, name: "pair:re:1,0".into(), value: -1.25 };
        sink.write_row(row.fields()).unwrap();
        assert!(sink.write_row(["a", "b"]).is_err());
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "replica_id,t_macro,observable_name,value\n3,0.5,\"pair:re:1,0\",-1.25\n");
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }
}
