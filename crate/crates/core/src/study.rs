//! Refinement studies in `(τ, ε, n)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{check_trajectory, cumulative, weak_residual, TestFunction};
use crate::duality::duality_norm;
use crate::error::{invalid, Result};

/// Galerkin dimension cap for refined levels.
pub const N_CAP: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelResult {
    pub level: u32,
    pub tau: f64,
    pub eps: f64,
    pub n: usize,
    pub final_entropy: f64,
    pub cumulative_dissipation: f64,
    pub invariants_passed: bool,
    pub duality: [f64; 2],
    /// One entry per member of [`TestFunction::standard_family`].
    pub weak: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyTable {
    pub levels: Vec<LevelResult>,
}

impl StudyTable {
    /// `(max − min)/max` of each species' duality norm over the levels.
    pub fn duality_band(&self) -> [f64; 2] {
        [0, 1].map(|i| {
            let v: Vec<f64> = self.levels.iter().map(|l| l.duality[i]).collect();
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            (hi - lo) / hi
        })
    }

    /// Relative change from the first to the last level.
    pub fn duality_trend(&self) -> [f64; 2] {
        [0, 1].map(|i| {
            let a = self.levels.first().map_or(f64::NAN, |l| l.duality[i]);
            let b = self.levels.last().map_or(f64::NAN, |l| l.duality[i]);
            (b - a) / a
        })
    }

    /// Smallest ratio `|defect_ℓ| / |defect_{ℓ+1}|` over test functions, species and levels.
    pub fn weak_min_ratio(&self) -> f64 {
        let mut r = f64::INFINITY;
        for w in self.levels.windows(2) {
            for (a, b) in w[0].weak.iter().zip(&w[1].weak) {
                for i in 0..2 {
                    r = r.min(a[i].abs() / b[i].abs());
                }
            }
        }
        r
    }
}

impl fmt::Display for StudyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "level tau eps n final_entropy cum_dissipation invariants duality1 duality2 max_weak_defect"
        )?;
        for l in &self.levels {
            let weak = l.weak.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            writeln!(
                f,
                "{} {:.6e} {:.6e} {} {:.10e} {:.10e} {} {:.10e} {:.10e} {:.6e}",
                l.level,
                l.tau,
                l.eps,
                l.n,
                l.final_entropy,
                l.cumulative_dissipation,
                if l.invariants_passed { "pass" } else { "FAIL" },
                l.duality[0],
                l.duality[1],
                weak
            )?;
        }
        Ok(())
    }
}

pub fn run_level(base: &RunConfig, level: u32) -> Result<LevelResult> {
    let cfg = base.refined(level, N_CAP);
    let problem = cfg.build_problem()?;
    let u0 = cfg.initial_data(problem.space())?;
    let traj = problem.run_trajectory(u0).map_err(|f| f.error)?;
    let report = check_trajectory(&problem, &traj);
    let weak = TestFunction::standard_family()
        .iter()
        .map(|tf| weak_residual(&problem, &traj, tf))
        .collect::<Result<Vec<_>>>()?;
    let last = traj.records.last().map_or(f64::NAN, |r| r.entropy);
    Ok(LevelResult {
        level,
        tau: problem.tau(),
        eps: cfg.eps,
        n: cfg.n,
        final_entropy: last,
        cumulative_dissipation: cumulative(&problem, &traj).dissipation,
        invariants_passed: report.all_passed(),
        duality: duality_norm(&problem, &traj),
        weak,
    })
}

/// Levels run in parallel; each is an independent trajectory.
pub fn convergence_study(base: &RunConfig, levels: usize) -> Result<StudyTable> {
    if levels < 2 {
        return Err(invalid("a convergence study needs at least 2 levels"));
    }
    let base = Arc::new(base.clone());
    let mut out: Vec<LevelResult> = (0..levels as u32)
        .into_par_iter()
        .map(|l| run_level(&base, l))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|l| l.level);
    Ok(StudyTable { levels: out })
}
