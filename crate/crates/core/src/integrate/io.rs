//! Trajectory CSV files: header `t,p_0..,q_0..`, one row per grid point.

use std::path::Path;

use super::{State, TimeGrid, Trajectory};
use crate::error::{Error, Result};

impl Trajectory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("p_{i}")));
        header.extend((0..d).map(|i| format!("q_{i}")));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (n, s) in self.states.iter().enumerate() {
            let row: Vec<String> = std::iter::once(self.grid.time(n))
                .chain(s.p.iter().copied())
                .chain(s.q.iter().copied())
                .map(|v| format!("{v:.16e}"))
                .collect();
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let width = r.headers().map_err(|e| csv_error(path, e))?.len();
        if width < 3 || width % 2 == 0 {
            return Err(Error::format(path, format!("unexpected column count {width}")));
        }
        let d = (width - 1) / 2;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::format(path, e.to_string()))?;
            times.push(vals[0]);
            states.push(State::new(vals[1..=d].to_vec(), vals[d + 1..].to_vec()));
        }
        if times.len() < 2 {
            let grid = TimeGrid::new(*times.first().ok_or_else(|| Error::format(path, "no rows"))?, 1.0, 0)?;
            return Trajectory::new(grid, states);
        }
        let steps = times.len() - 1;
        let step = (times[steps] - times[0]) / steps as f64;
        let grid = TimeGrid::new(times[0], step, steps).map_err(|e| Error::format(path, e.to_string()))?;
        for (n, &t) in times.iter().enumerate() {
            if (t - grid.time(n)).abs() > 1e-12 * t.abs().max(step) {
                return Err(Error::format(path, format!("row {n} breaks uniform spacing")));
            }
        }
        Trajectory::new(grid, states).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        }
    } else {
        Error::format(path, e.to_string())
    }
}
