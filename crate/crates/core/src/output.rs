//! Run directory files: `series.csv`, `fields.csv`, `report.txt`, `config.echo`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::spatial::SpatialSpace;
use crate::stepper::Trajectory;

pub const SERIES_HEADER: &str = "k,t,entropy,dissipation,mass1,mass2,l1_reaction_neg,w_h1_sq,newton_iters";

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn series_csv(traj: &Trajectory) -> String {
    let mut s = String::from(SERIES_HEADER);
    s.push('\n');
    for r in &traj.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            num(r.t),
            num(r.entropy),
            num(r.dissipation),
            num(r.mass[0]),
            num(r.mass[1]),
            num(r.l1_reaction_neg()),
            num(r.w_h1_sq),
            r.newton_iters
        );
    }
    s
}

pub fn fields_csv(traj: &Trajectory, space: &SpatialSpace, snapshots: &[usize]) -> String {
    let coords = ["x", "y"];
    let mut s = String::from("k,node");
    for c in coords.iter().take(space.dim()) {
        s.push(',');
        s.push_str(c);
    }
    s.push_str(",u1,u2\n");
    let available = if traj.records.is_empty() { 0 } else { traj.steps() + 1 };
    for &k in snapshots.iter().filter(|&&k| k < available) {
        let u = traj.u(k);
        for (q, x) in space.points().iter().enumerate() {
            let _ = write!(s, "{k},{q}");
            for xd in x {
                let _ = write!(s, ",{}", num(*xd));
            }
            let _ = writeln!(s, ",{},{}", num(u[0][q]), num(u[1][q]));
        }
    }
    s
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| Error::Io { path, source })
}

/// Writes the four run files into `dir`, creating it if needed.
pub fn emit_outputs(cfg: &RunConfig, space: &SpatialSpace, traj: &Trajectory, report: &str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(dir, "series.csv", &series_csv(traj))?;
    write(dir, "fields.csv", &fields_csv(traj, space, &cfg.snapshot_steps()))?;
    write(dir, "report.txt", report)?;
    write(dir, "config.echo", &cfg.to_toml())
}
