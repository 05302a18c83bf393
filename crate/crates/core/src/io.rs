//! Artifact writers. Binary snapshots are little-endian:
//!
//! ```text
//! u64 N        modes
//! u64 N_t      time steps
//! f64 T        horizon
//! f64 × (N_t+1)·N   coefficients, time-major
//! ```
//!
//! Adjoint snapshots store `p` in that layout and then append
//! `u64 N_K` and the dense `q` blocks, `f64 × N_t·N·N_K`, cell-major and
//! row-major within a cell.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::adjoint::AdjointPair;
use crate::error::{Error, Result};
use crate::forward::StateTrajectory;
use crate::time::TimeGrid;

fn header(w: &mut impl Write, n: usize, grid: &TimeGrid) -> Result<()> {
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(grid.n_steps as u64).to_le_bytes())?;
    w.write_all(&grid.horizon.to_le_bytes())?;
    Ok(())
}

fn floats(w: &mut impl Write, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_trajectory_binary(w: &mut impl Write, traj: &StateTrajectory) -> Result<()> {
    header(w, traj.n_modes, &traj.grid)?;
    floats(w, traj.coeffs.iter().copied())
}

pub fn write_adjoint_binary(w: &mut impl Write, pair: &AdjointPair) -> Result<()> {
    let n = pair.n_modes;
    header(w, n, &pair.grid)?;
    floats(w, pair.p.iter().copied())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    for cell in 0..pair.grid.n_steps {
        floats(w, (0..n * n).map(|i| pair.q_entry(cell, i / n, i % n)))?;
    }
    Ok(())
}

/// A decoded trajectory snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n_modes: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub coeffs: Vec<f64>,
}

pub fn read_trajectory_binary(r: &mut impl Read) -> Result<Snapshot> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n_modes = u64::from_le_bytes(next(r)?) as usize;
    let n_steps = u64::from_le_bytes(next(r)?) as usize;
    let horizon = f64::from_le_bytes(next(r)?);
    let len = n_modes
        .checked_mul(n_steps + 1)
        .ok_or_else(|| Error::Shape("snapshot header overflows".into()))?;
    let coeffs = (0..len).map(|_| next(r).map(f64::from_le_bytes)).collect::<Result<_>>()?;
    Ok(Snapshot { n_modes, n_steps, horizon, coeffs })
}

#[derive(Serialize)]
struct CoefficientRow {
    time: f64,
    mode: usize,
    coefficient: f64,
}

pub fn write_trajectory_csv(path: &Path, traj: &StateTrajectory) -> Result<()> {
    let rows = (0..=traj.grid.n_steps).flat_map(|n| {
        traj.at(n)
            .iter()
            .enumerate()
            .map(move |(mode, &coefficient)| CoefficientRow { time: traj.grid.time(n), mode, coefficient })
    });
    write_csv(path, rows)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_binary(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}
