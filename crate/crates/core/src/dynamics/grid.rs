//! Single-particle propagation on a uniform grid with the delta wall
//! replaced by a normalized Gaussian of width `sigma`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{thin, SeriesPoint, SweepResult, C64};
use crate::error::{Error, Result};
use crate::model::{BoxParams, CyclePoint, CycleSpec, WallConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of intervals across the box; Dirichlet values at both ends.
    pub intervals: usize,
    pub dt: f64,
    pub sigma: f64,
    /// Box modes reported at the end.
    pub modes: usize,
}

impl GridSpec {
    /// Finest allowed spacing for `sigma`, with a time step resolving the
    /// first `modes` box energies.
    pub fn for_sigma(params: &BoxParams, sigma: f64, modes: usize) -> Self {
        let intervals = (4.0 * params.length / sigma).ceil() as usize;
        let e_top = params.epsilon() * (modes * modes) as f64;
        GridSpec {
            intervals,
            dt: 0.05 * params.hbar / e_top,
            sigma,
            modes,
        }
    }

    pub fn spacing(&self, params: &BoxParams) -> f64 {
        params.length / self.intervals as f64
    }

    pub fn validate(&self, params: &BoxParams) -> Result<()> {
        params.validate()?;
        if !(self.sigma > 0.0 && self.sigma <= 0.02 * params.length) {
            return Err(Error::invalid(format!(
                "sigma must lie in (0, 0.02 L], got {}",
                self.sigma
            )));
        }
        let dx = self.spacing(params);
        if dx > 0.25 * self.sigma * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "grid spacing {dx} exceeds sigma / 4 = {}",
                0.25 * self.sigma
            )));
        }
        if self.modes == 0 || self.modes >= self.intervals {
            return Err(Error::invalid(
                "reported modes must be between 1 and the interior point count",
            ));
        }
        let e_top = params.epsilon() * (self.modes * self.modes) as f64;
        if !(self.dt > 0.0 && self.dt * e_top / params.hbar <= 0.5) {
            return Err(Error::invalid(format!(
                "time step {} does not resolve mode {} (dt E / hbar must be <= 0.5)",
                self.dt, self.modes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// The capped cycle at uniform parameter speed over `total_time`.
    Cycle { spec: CycleSpec, total_time: f64 },
    /// A fixed finite wall held for `duration`.
    Static { wall: WallConfig, duration: f64 },
}

impl Schedule {
    fn duration(&self) -> f64 {
        match *self {
            Schedule::Cycle { total_time, .. } => total_time,
            Schedule::Static { duration, .. } => duration,
        }
    }

    fn wall_at(&self, t: f64) -> Result<WallConfig> {
        match self {
            Schedule::Cycle { spec, total_time } => {
                let u = (3.0 * t / total_time).clamp(0.0, 3.0);
                spec.resolve_capped(CyclePoint::from_cycle_parameter(u)?)
            }
            Schedule::Static { wall, .. } => Ok(*wall),
        }
    }
}

/// Kinetic off-diagonal and per-point diagonal of the grid Hamiltonian.
fn hamiltonian(params: &BoxParams, grid: &GridSpec, wall: &WallConfig) -> Result<(f64, Vec<f64>)> {
    let Some(g) = wall.strength.finite() else {
        return Err(Error::invalid("the grid propagator needs a finite wall"));
    };
    let dx = grid.spacing(params);
    let kin = params.hbar * params.hbar / (params.mass * dx * dx);
    let amp = g / (grid.sigma * (2.0 * PI).sqrt());
    let diag = (1..grid.intervals)
        .map(|j| {
            let y = (j as f64 * dx - wall.position) / grid.sigma;
            kin + amp * (-0.5 * y * y).exp()
        })
        .collect();
    Ok((-0.5 * kin, diag))
}

/// Solves `(1 + i a H) x = (1 - i a H) psi` in place, `H` tridiagonal with
/// constant off-diagonal.
fn crank_nicolson(off: f64, diag: &[f64], a: f64, psi: &mut [C64], scratch: &mut [C64]) {
    let n = psi.len();
    let i = C64::new(0.0, 1.0);
    let rhs: Vec<C64> = (0..n)
        .map(|j| {
            let mut h = psi[j] * diag[j];
            if j > 0 {
                h += psi[j - 1] * off;
            }
            if j + 1 < n {
                h += psi[j + 1] * off;
            }
            psi[j] - i * a * h
        })
        .collect();
    let b = i * a * off;
    // Thomas elimination; scratch holds the modified super-diagonal
    let mut prev = C64::from(0.0);
    for j in 0..n {
        let d = C64::from(1.0) + i * a * diag[j]
            - if j > 0 {
                b * scratch[j - 1]
            } else {
                C64::from(0.0)
            };
        scratch[j] = b / d;
        psi[j] = (rhs[j] - if j > 0 { b * prev } else { C64::from(0.0) }) / d;
        prev = psi[j];
    }
    for j in (0..n - 1).rev() {
        let next = psi[j + 1];
        psi[j] -= scratch[j] * next;
    }
}

fn sine_mode(n: usize, intervals: usize) -> Vec<f64> {
    let norm = (2.0 / intervals as f64).sqrt();
    (1..intervals)
        .map(|j| norm * (PI * (n * j) as f64 / intervals as f64).sin())
        .collect()
}

fn mode_populations(psi: &[C64], grid: &GridSpec) -> Vec<f64> {
    (1..=grid.modes)
        .map(|n| {
            sine_mode(n, grid.intervals)
                .iter()
                .zip(psi)
                .map(|(s, z)| z * *s)
                .sum::<C64>()
                .norm_sqr()
        })
        .collect()
}

fn expectation(off: f64, diag: &[f64], psi: &[C64]) -> f64 {
    let n = psi.len();
    (0..n)
        .map(|j| {
            let mut h = psi[j] * diag[j];
            if j > 0 {
                h += psi[j - 1] * off;
            }
            if j + 1 < n {
                h += psi[j + 1] * off;
            }
            (psi[j].conj() * h).re
        })
        .sum()
}

/// Propagates the discrete box mode `initial` through `schedule`.
///
/// Populations are projections onto the discrete sine modes, which are the
/// exact eigenvectors of the empty grid box. The target is mode 2 for a
/// cycle and the initial mode for a static wall.
pub fn gaussian_wall_propagate(
    params: &BoxParams,
    schedule: &Schedule,
    grid: &GridSpec,
    initial: usize,
) -> Result<SweepResult> {
    grid.validate(params)?;
    if initial == 0 || initial > grid.modes {
        return Err(Error::invalid(format!(
            "initial mode must lie in 1..={}",
            grid.modes
        )));
    }
    let total = schedule.duration();
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be non-negative, got {total}"
        )));
    }
    if let Schedule::Cycle { spec, .. } = schedule {
        spec.validate(params)?;
        if total == 0.0 {
            return Err(Error::invalid("cycle duration must be positive"));
        }
    }
    let mut psi: Vec<C64> = sine_mode(initial, grid.intervals)
        .into_iter()
        .map(C64::from)
        .collect();
    let mut scratch = vec![C64::from(0.0); psi.len()];
    let (off, diag0) = hamiltonian(params, grid, &schedule.wall_at(0.0)?)?;
    let e_start = expectation(off, &diag0, &psi);

    let steps = (total / grid.dt).ceil() as usize;
    let dt = if steps > 0 { total / steps as f64 } else { 0.0 };
    let record = (steps / 400).max(1);
    let mut series = vec![SeriesPoint {
        time: 0.0,
        cycle_parameter: 0.0,
        populations: mode_populations(&psi, grid),
    }];
    let u_of = |t: f64| match schedule {
        Schedule::Cycle { .. } => 3.0 * t / total,
        Schedule::Static { .. } => 0.0,
    };
    let mut diag = diag0;
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        if let Schedule::Cycle { .. } = schedule {
            diag = hamiltonian(params, grid, &schedule.wall_at(t_mid)?)?.1;
        }
        crank_nicolson(off, &diag, 0.5 * dt / params.hbar, &mut psi, &mut scratch);
        if (k + 1) % record == 0 || k + 1 == steps {
            let t = (k + 1) as f64 * dt;
            series.push(SeriesPoint {
                time: t,
                cycle_parameter: u_of(t),
                populations: mode_populations(&psi, grid),
            });
        }
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Integration {
            at: u_of(total),
            message: format!("norm drifted to {norm}"),
        });
    }
    let (off, diag_end) = hamiltonian(params, grid, &schedule.wall_at(total)?)?;
    let populations = mode_populations(&psi, grid);
    let target = match schedule {
        Schedule::Cycle { .. } => 2.min(grid.modes),
        Schedule::Static { .. } => initial,
    };
    Ok(SweepResult {
        labels: (1..=grid.modes).map(|n| n.to_string()).collect(),
        fidelity: populations[target - 1],
        target: target.to_string(),
        populations,
        absorbed_energy: expectation(off, &diag_end, &psi) - e_start,
        norm,
        steps,
        rejected: 0,
        series: thin(series, 401),
    })
}

/// Lowest eigenvalue of the grid Hamiltonian with a static Gaussian wall,
/// by Sturm-sequence bisection.
pub fn gaussian_ground_energy(
    params: &BoxParams,
    wall: &WallConfig,
    sigma: f64,
    intervals: usize,
) -> Result<f64> {
    let grid = GridSpec {
        intervals,
        dt: f64::MIN_POSITIVE,
        sigma,
        modes: 1,
    };
    grid.validate(params)?;
    let (off, diag) = hamiltonian(params, &grid, wall)?;
    // eigenvalues below x
    let count = |x: f64| -> usize {
        let mut q = 1.0;
        let mut below = 0;
        for (j, &d) in diag.iter().enumerate() {
            q = d - x - if j > 0 { off * off / q } else { 0.0 };
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                below += 1;
            }
        }
        below
    };
    let mut lo = 0.0;
    let mut hi = diag.iter().copied().fold(0.0, f64::max) + 2.0 * off.abs();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
