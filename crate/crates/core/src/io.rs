//! Plot-ready CSV and JSON output, and parsers that read it back.
//!
//! Floats are written in shortest round-trip form with `\n` line endings, so
//! identical runs produce byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bounds::{eta_with_argmax, BoundCurve, Proposition};
use crate::engine::Trajectory;
use crate::error::Result;
use crate::montecarlo::ExperimentReport;
use crate::operators::SetDistanceMode;

/// One row of `trajectories.csv`. Columns after `beta` are empty at the
/// final iteration, where no update has happened yet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub trial: usize,
    pub ell: usize,
    pub block: usize,
    pub dist: f64,
    pub fpr_summand: Option<f64>,
    pub cum_fpr: Option<f64>,
    pub beta: u32,
    pub mask: Option<u8>,
    pub sigma: Option<f64>,
}

/// One row of `bounds.csv`. `delta` carries the per-iteration failure
/// probability for curves whose confidence varies with `ell`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub ell: usize,
    pub bound: f64,
    pub proposition: Proposition,
    pub block: usize,
    pub delta: Option<f64>,
    pub theta_prime: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma_mode: Option<SetDistanceMode>,
}

/// One row of `eta.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub block: usize,
    pub ell: usize,
    pub eta: f64,
    /// Moment order attaining the supremum.
    pub k: f64,
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Rows of one trajectory at `ell = 0, stride, 2 stride, ...` and always at
/// the horizon.
pub fn trajectory_rows(trial: usize, traj: &Trajectory, stride: usize) -> Vec<TrajectoryRow> {
    let n = traj.n_blocks();
    let l = traj.horizon();
    let stride = stride.max(1);
    let mut ells: Vec<usize> = (0..=l).step_by(stride).collect();
    if ells.last() != Some(&l) {
        ells.push(l);
    }
    let mut rows = Vec::with_capacity(ells.len() * n);
    for ell in ells {
        for i in 0..n {
            let live = ell < l;
            rows.push(TrajectoryRow {
                trial,
                ell,
                block: i,
                dist: traj.dist(ell, i),
                fpr_summand: live.then(|| traj.fpr_summand(ell, i)),
                cum_fpr: live.then(|| traj.cum_fpr(ell, i)),
                beta: traj.beta(ell, i),
                mask: live.then(|| u8::from(traj.mask(ell, i))),
                sigma: live.then(|| traj.sigma(ell, i)),
            });
        }
    }
    rows
}

/// Writes trajectories numbered `0, 1, ...` in order.
pub fn write_trajectories<W: Write>(w: W, trajs: &[Trajectory], stride: usize) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["trial", "ell", "block", "dist", "fpr_summand", "cum_fpr", "beta", "mask", "sigma"])?;
    for (t, traj) in trajs.iter().enumerate() {
        for row in trajectory_rows(t, traj, stride) {
            wtr.serialize(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trajectories<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    read_rows(r)
}

pub fn bound_rows(curve: &BoundCurve) -> Vec<BoundRow> {
    curve
        .values
        .iter()
        .enumerate()
        .map(|(ell, v)| BoundRow {
            ell,
            bound: *v,
            proposition: curve.proposition,
            block: curve.block,
            delta: curve.delta.at(ell),
            theta_prime: curve.theta_prime,
            epsilon: curve.epsilon,
            sigma_mode: curve.sigma_mode,
        })
        .collect()
}

pub fn write_bounds<W: Write>(w: W, curves: &[BoundCurve]) -> Result<()> {
    let mut wtr = writer(w);
    // the header is written explicitly so an empty file still names its columns
    wtr.write_record(["ell", "bound", "proposition", "block", "delta", "theta_prime", "epsilon", "sigma_mode"])?;
    for c in curves {
        for row in bound_rows(c) {
            wtr.serialize(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_bounds<R: Read>(r: R) -> Result<Vec<BoundRow>> {
    read_rows(r)
}

/// `eta(ell)` for `ell = 0..=horizon` and each `(zeta, p)` pair, one per
/// block.
pub fn eta_rows(params: &[(f64, f64)], horizon: usize) -> Vec<EtaRow> {
    let mut rows = Vec::with_capacity(params.len() * (horizon + 1));
    for (block, &(zeta, p)) in params.iter().enumerate() {
        for ell in 0..=horizon {
            let (eta, k) = eta_with_argmax(zeta, p, ell);
            rows.push(EtaRow { block, ell, eta, k });
        }
    }
    rows
}

pub fn write_eta<W: Write>(w: W, rows: &[EtaRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["block", "ell", "eta", "k"])?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_eta<R: Read>(r: R) -> Result<Vec<EtaRow>> {
    read_rows(r)
}

pub fn write_report<W: Write>(mut w: W, report: &ExperimentReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_report(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}
