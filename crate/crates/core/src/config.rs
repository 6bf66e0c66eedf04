//! Flat `key = value` run configuration.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{regularize, CoefficientSet, PowerLawCoefficients};
use crate::error::{Error, Result};
use crate::spatial::{FdGrid, SpatialSpace};
use crate::stepper::{uniform_schedule, Problem, SolveConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum U0Kind {
    /// `u0_params = [c1, c2]`
    Constant,
    /// `u_i = b_i + a_i Π_d cos(π x_d / L_d)`, `u0_params = [b1, a1, b2, a2]`
    CosineBump,
    /// Two columns of nodal values in quadrature-node order.
    File,
    /// `u_i = b_i + Σ_{m=1}^{4} c_{im} Π_d cos(mπ x_d / L_d)` with `c_{im}` uniform in
    /// `[−a_i/4, a_i/4]` drawn from `seed`; `u0_params = [b1, a1, b2, a2]`.
    Random,
}

fn d_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "S11")]
    pub s11: f64,
    #[serde(rename = "S12")]
    pub s12: f64,
    #[serde(rename = "S21")]
    pub s21: f64,
    #[serde(rename = "S22")]
    pub s22: f64,
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma21: f64,
    pub sigma22: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "A11")]
    pub a11: f64,
    #[serde(rename = "A12")]
    pub a12: f64,
    #[serde(rename = "A21")]
    pub a21: f64,
    #[serde(rename = "A22")]
    pub a22: f64,
    pub alpha11: f64,
    pub alpha12: f64,
    pub alpha21: f64,
    pub alpha22: f64,
    pub eps: f64,

    pub dim: usize,
    #[serde(rename = "L", default = "d_one")]
    pub l: f64,
    #[serde(rename = "L1", skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(rename = "L2", skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    pub n: usize,
    pub fd_points: usize,

    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub sigma_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,

    pub u0_kind: U0Kind,
    pub u0_params: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0_file: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<usize>>,
    pub check_invariants: bool,
    pub study_levels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r1: 0.0,
            r2: 0.0,
            s11: 0.0,
            s12: 0.0,
            s21: 0.0,
            s22: 0.0,
            sigma11: 1.0,
            sigma12: 1.0,
            sigma21: 1.0,
            sigma22: 1.0,
            d1: 1.0,
            d2: 1.0,
            a11: 0.0,
            a12: 1.0,
            a21: 1.0,
            a22: 0.0,
            alpha11: 1.0,
            alpha12: 0.5,
            alpha21: 0.5,
            alpha22: 1.0,
            eps: 1e-4,
            dim: 1,
            l: 1.0,
            l1: None,
            l2: None,
            n: 16,
            fd_points: 64,
            t: 0.1,
            steps: 100,
            sigma_steps: 11,
            newton_tol: 1e-11,
            newton_max_iter: 50,
            u0_kind: U0Kind::CosineBump,
            u0_params: vec![1.0, 0.5, 1.0, -0.5],
            u0_file: None,
            seed: 0,
            snapshots: None,
            check_invariants: true,
            study_levels: 3,
            out: None,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    /// Resolved configuration in the same flat format.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn power_law(&self) -> PowerLawCoefficients {
        PowerLawCoefficients {
            r: [self.r1, self.r2],
            s: [[self.s11, self.s12], [self.s21, self.s22]],
            sigma: [[self.sigma11, self.sigma12], [self.sigma21, self.sigma22]],
            d: [self.d1, self.d2],
            a: [[self.a11, self.a12], [self.a21, self.a22]],
            alpha: [[self.alpha11, self.alpha12], [self.alpha21, self.alpha22]],
        }
    }

    pub fn coefficients(&self) -> CoefficientSet {
        CoefficientSet::PowerLaw(self.power_law())
    }

    pub fn extents(&self) -> Result<Vec<f64>> {
        match self.dim {
            1 => Ok(vec![self.l1.unwrap_or(self.l)]),
            2 => Ok(vec![self.l1.unwrap_or(self.l), self.l2.unwrap_or(self.l)]),
            d => Err(cfg_err(format!("dim must be 1 or 2, got {d}"))),
        }
    }

    pub fn space(&self) -> Result<SpatialSpace> {
        SpatialSpace::new(&self.extents()?, self.n)
    }

    pub fn fd_grid(&self) -> Result<FdGrid> {
        let e = self.extents()?;
        FdGrid::new(&e, &vec![self.fd_points; e.len()])
    }

    pub fn solve_config(&self) -> SolveConfig {
        let mut c = SolveConfig::new(self.t, self.steps, self.eps);
        c.sigma_schedule = uniform_schedule(self.sigma_steps);
        c.newton_tol = self.newton_tol;
        c.newton_max_iter = self.newton_max_iter;
        c
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let space = Arc::new(self.space()?);
        let reg = Arc::new(regularize(&self.coefficients(), self.eps)?);
        Problem::new(self.solve_config(), space, reg)
    }

    /// Snapshot steps, by default `{0, N/4, N/2, 3N/4, N}`.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.steps;
        let mut s = match &self.snapshots {
            Some(v) => v.iter().copied().filter(|&k| k <= n).collect(),
            None => vec![0, n / 4, n / 2, 3 * n / 4, n],
        };
        s.sort_unstable();
        s.dedup();
        s
    }

    fn params4(&self) -> Result<[f64; 4]> {
        match self.u0_params.as_slice() {
            &[b1, a1, b2, a2] => Ok([b1, a1, b2, a2]),
            p => Err(cfg_err(format!("u0_params needs 4 values for {:?}, got {}", self.u0_kind, p.len()))),
        }
    }

    /// Initial nodal data on the quadrature nodes of `space`.
    pub fn initial_data(&self, space: &SpatialSpace) -> Result<[Vec<f64>; 2]> {
        let ext = space.extents().to_vec();
        let cosines = |x: &[f64], m: f64| -> f64 {
            x.iter()
                .zip(&ext)
                .map(|(xd, l)| (m * std::f64::consts::PI * xd / l).cos())
                .product()
        };
        let pts = space.points();
        let out = match self.u0_kind {
            U0Kind::Constant => match self.u0_params.as_slice() {
                &[c1, c2] => [vec![c1; pts.len()], vec![c2; pts.len()]],
                p => return Err(cfg_err(format!("constant u0 needs 2 parameters, got {}", p.len()))),
            },
            U0Kind::CosineBump => {
                let [b1, a1, b2, a2] = self.params4()?;
                [
                    pts.iter().map(|x| b1 + a1 * cosines(x, 1.0)).collect(),
                    pts.iter().map(|x| b2 + a2 * cosines(x, 1.0)).collect(),
                ]
            }
            U0Kind::Random => {
                let [b1, a1, b2, a2] = self.params4()?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut amp = [[0.0; 4]; 2];
                for (row, a) in amp.iter_mut().zip([a1, a2]) {
                    for c in row.iter_mut() {
                        *c = rng.gen_range(-0.25..=0.25) * a;
                    }
                }
                let field = |b: f64, row: &[f64; 4]| -> Vec<f64> {
                    pts.iter()
                        .map(|x| {
                            b + row
                                .iter()
                                .enumerate()
                                .map(|(m, c)| c * cosines(x, (m + 1) as f64))
                                .sum::<f64>()
                        })
                        .collect()
                };
                [field(b1, &amp[0]), field(b2, &amp[1])]
            }
            U0Kind::File => {
                let path = self
                    .u0_file
                    .as_ref()
                    .ok_or_else(|| cfg_err("u0_kind = file requires u0_file"))?;
                read_nodal_file(Path::new(path), pts.len())?
            }
        };
        if out.iter().flatten().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(cfg_err("initial data must be finite and nonnegative"));
        }
        Ok(out)
    }

    /// Constant initial state, if the initial data is spatially constant by kind.
    pub fn constant_u0(&self) -> Option<[f64; 2]> {
        match (self.u0_kind, self.u0_params.as_slice()) {
            (U0Kind::Constant, &[c1, c2]) => Some([c1, c2]),
            _ => None,
        }
    }

    /// Refinement level `ℓ`: `(τ/2^ℓ, ε/4^ℓ, min(n·2^ℓ, n_cap))`.
    pub fn refined(&self, level: u32, n_cap: usize) -> RunConfig {
        let mut c = self.clone();
        c.steps = self.steps << level;
        c.eps = self.eps / 4f64.powi(level as i32);
        c.n = (self.n << level).min(n_cap.max(self.n));
        c
    }
}

fn read_nodal_file(path: &Path, expected: usize) -> Result<[Vec<f64>; 2]> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut u = [Vec::new(), Vec::new()];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| cfg_err(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        if vals.len() != 2 {
            return Err(cfg_err(format!("{}:{}: expected two columns", path.display(), ln + 1)));
        }
        u[0].push(vals[0]);
        u[1].push(vals[1]);
    }
    if u[0].len() != expected {
        return Err(cfg_err(format!(
            "{}: {} rows, quadrature has {expected} nodes",
            path.display(),
            u[0].len()
        )));
    }
    Ok(u)
}
