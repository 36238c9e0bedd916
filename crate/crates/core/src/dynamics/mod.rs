//! Adiabatic versus diabatic traversal: Landau–Zener estimates, a two-level
//! sweep integrator, the many-body cycle sweep and a grid propagator for a
//! Gaussian wall.

mod grid;
mod sweep;

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{gaussian_ground_energy, gaussian_wall_propagate, GridSpec, Schedule};
pub use sweep::{capped_min_gap, cycle_sweep, SweepOptions};

pub(crate) type C64 = Complex<f64>;

/// A linear avoided crossing `H = [[a(s-s*)/2, gap/2], [gap/2, -a(s-s*)/2]]`
/// swept at `s = rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelCrossing {
    /// Minimal splitting.
    pub gap: f64,
    /// `|d(E1 - E2)/ds|` of the diabats.
    pub slope: f64,
    /// `ds/dt`.
    pub rate: f64,
    pub hbar: f64,
}

impl TwoLevelCrossing {
    pub fn new(gap: f64, slope: f64, rate: f64) -> Result<Self> {
        let c = TwoLevelCrossing {
            gap,
            slope,
            rate,
            hbar: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    /// Unit slope and rate with adiabaticity parameter `gamma`.
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        Self::new(2.0 * gamma.sqrt(), 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            return Err(Error::invalid(format!(
                "gap must be non-negative, got {}",
                self.gap
            )));
        }
        for (name, v) in [
            ("slope", self.slope),
            ("rate", self.rate),
            ("hbar", self.hbar),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `(gap/2)^2 / (hbar slope rate)`
    pub fn gamma(&self) -> f64 {
        let h = 0.5 * self.gap;
        h * h / (self.hbar * self.slope * self.rate)
    }
}

/// Probability of staying on the diabat, `exp(-2 pi gamma)`.
pub fn lz_probability(c: &TwoLevelCrossing) -> f64 {
    (-2.0 * PI * c.gamma()).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub cycle_parameter: f64,
    pub populations: Vec<f64>,
}

/// Outcome of a time-dependent traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub labels: Vec<String>,
    pub populations: Vec<f64>,
    pub target: String,
    pub fidelity: f64,
    pub absorbed_energy: f64,
    pub norm: f64,
    pub steps: usize,
    pub rejected: usize,
    pub series: Vec<SeriesPoint>,
}

/// `exp(-i tau H)` for Hermitian `H`.
pub(crate) fn expm_hermitian(h: &DMatrix<C64>, tau: f64) -> DMatrix<C64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * tau)),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Thins a series to at most `cap` points, keeping both ends.
pub(crate) fn thin(series: Vec<SeriesPoint>, cap: usize) -> Vec<SeriesPoint> {
    if series.len() <= cap || cap < 2 {
        return series;
    }
    let n = series.len();
    let mut keep: Vec<usize> = (0..cap).map(|i| i * (n - 1) / (cap - 1)).collect();
    keep.dedup();
    let mut it = keep.into_iter().peekable();
    series
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            if it.peek() == Some(&i) {
                it.next();
                Some(p)
            } else {
                None
            }
        })
        .collect()
}

/// Asymptotic diabat a two-level sweep starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diabat {
    /// Lower before the crossing, upper after it.
    First,
    Second,
}

pub fn integrate_two_level(c: &TwoLevelCrossing, window: f64) -> Result<SweepResult> {
    integrate_two_level_from(c, window, Diabat::First)
}

/// Integrates the sweep over `s - s* in [-window, window]`.
///
/// Populations are read in the adiabatic basis at the window edges, which
/// coincides with the asymptotic diabats up to corrections far below the
/// oscillating tails of the diabatic populations inside a finite window.
pub fn integrate_two_level_from(
    c: &TwoLevelCrossing,
    window: f64,
    start: Diabat,
) -> Result<SweepResult> {
    c.validate()?;
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid(format!(
            "window must be positive, got {window}"
        )));
    }
    if c.slope * window < 20.0 * c.gap {
        return Err(Error::invalid(format!(
            "window too narrow: slope * window = {} < 20 * gap = {}",
            c.slope * window,
            20.0 * c.gap
        )));
    }
    let total = 2.0 * window / c.rate;
    let ham = |t: f64| -> DMatrix<C64> {
        let d = 0.5 * c.slope * (c.rate * t - window);
        let o = 0.5 * c.gap;
        DMatrix::from_row_slice(
            2,
            2,
            &[C64::from(d), C64::from(o), C64::from(o), C64::from(-d)],
        )
    };
    let adiabatic = |t: f64| nalgebra::SymmetricEigen::new(ham(t));
    // eigenvector of the larger (index of max eigenvalue) or smaller value
    let pick = |eig: &nalgebra::SymmetricEigen<C64, nalgebra::Dyn>, upper: bool| -> DVector<C64> {
        let (i0, i1) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        eig.eigenvectors
            .column(if upper { i1 } else { i0 })
            .into_owned()
    };
    let e0 = adiabatic(0.0);
    let mut psi = pick(&e0, start == Diabat::Second);
    let energy = |t: f64, v: &DVector<C64>| (v.adjoint() * ham(t) * v)[(0, 0)].re;
    let e_start = energy(0.0, &psi);

    let step = |t: f64, dt: f64, v: &DVector<C64>| -> DVector<C64> {
        let r = 3f64.sqrt() / 6.0;
        let h1 = ham(t + (0.5 - r) * dt);
        let h2 = ham(t + (0.5 + r) * dt);
        let comm = &h2 * &h1 - &h1 * &h2;
        let heff =
            (&h1 + &h2) * C64::from(0.5) + comm * C64::new(0.0, 3f64.sqrt() * dt / (12.0 * c.hbar));
        expm_hermitian(&heff, dt / c.hbar) * v
    };

    let tol = 1e-12;
    let scale = 0.5 * c.slope * window + 0.5 * c.gap;
    let mut dt = (0.1 * c.hbar / scale).min(total);
    let (mut t, mut steps, mut rejected) = (0.0, 0usize, 0usize);
    while t < total {
        dt = dt.min(total - t);
        let full = step(t, dt, &psi);
        let mid = step(t, 0.5 * dt, &psi);
        let half = step(t + 0.5 * dt, 0.5 * dt, &mid);
        let err = (&full - &half).norm();
        if err <= tol || dt < 1e-14 * total {
            psi = half;
            t += dt;
            steps += 1;
            dt *= (0.9 * (tol / err.max(1e-300)).powf(0.2)).clamp(0.2, 2.0);
        } else {
            rejected += 1;
            dt *= (0.9 * (tol / err).powf(0.2)).clamp(0.2, 0.9);
        }
    }
    let e1 = adiabatic(total);
    let upper = pick(&e1, true);
    let lower = pick(&e1, false);
    let p_first = (upper.adjoint() * &psi)[(0, 0)].norm_sqr();
    let p_second = (lower.adjoint() * &psi)[(0, 0)].norm_sqr();
    let fidelity = match start {
        Diabat::First => p_first,
        Diabat::Second => p_second,
    };
    Ok(SweepResult {
        labels: vec!["first_diabat".into(), "second_diabat".into()],
        populations: vec![p_first, p_second],
        target: match start {
            Diabat::First => "first_diabat".into(),
            Diabat::Second => "second_diabat".into(),
        },
        fidelity,
        absorbed_energy: energy(total, &psi) - e_start,
        norm: psi.norm(),
        steps,
        rejected,
        series: Vec::new(),
    })
}
