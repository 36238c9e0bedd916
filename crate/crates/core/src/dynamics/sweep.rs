//! Time-dependent traversal of the cycle in the instantaneous Fock
//! eigenbasis.
//!
//! Between two parameter values the eigenbasis rotates by the orthogonal
//! transfer matrix `Q = C_new^T O C_old`, with `O` the overlap of the Fock
//! bases built on the two sets of single-particle modes. Writing
//! `Q = exp(G)` and letting the basis rotate uniformly across the step, the
//! coefficients obey `dc/dsigma = (G - i tau E / hbar) c`, which is
//! integrated with one exact exponential at the midpoint energies.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{expm_hermitian, thin, SeriesPoint, SweepResult, C64};
use crate::error::{Error, Result};
use crate::manybody::{fock_hamiltonian, sorted_eigen, FockState, ModeSet};
use crate::model::{BoxParams, CyclePoint, CycleSpec, Stage, WallConfig};
use crate::spectrum::{overlap2, solve_levels, SpWavefunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Local error bound per accepted step.
    pub tolerance: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Most recorded series points.
    pub series_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tolerance: 1e-8,
            initial_step: 1e-3,
            max_step: 0.02,
            min_step: 1e-13,
            max_steps: 2_000_000,
            series_cap: 400,
        }
    }
}

/// Eigen-decomposition of the capped Hamiltonian at one cycle parameter.
struct Frame {
    u: f64,
    modes: Vec<SpWavefunction>,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

/// A frame with its eigenvectors reordered and signed to continue the
/// previous one.
struct Tracked {
    frame: Frame,
    order: Vec<usize>,
    signs: Vec<f64>,
}

impl Tracked {
    fn energy(&self, k: usize) -> f64 {
        self.frame.energies[self.order[k]]
    }

    /// Coefficients in the frame's ascending-energy order.
    fn to_sorted(&self, c: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(c.len());
        for k in 0..c.len() {
            out[self.order[k]] = c[k] * self.signs[k];
        }
        out
    }
}

struct Sweeper<'a> {
    params: &'a BoxParams,
    spec: &'a CycleSpec,
    basis: &'a [FockState],
    lambda: f64,
    levels: usize,
    time_per_u: f64,
    denominators: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn permanent(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] + m[0][1] * m[1][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != j)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                m[0][j] * permanent(&minor)
            })
            .sum(),
    }
}

/// `log Q` for orthogonal `Q` without eigenvalues near `-1`, via
/// `G = A f(S)` with `S, A` the symmetric and antisymmetric parts and
/// `f(cos t) = t / sin t`.
fn log_orthogonal(q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let s = (q + q.transpose()) * 0.5;
    let a = (q - q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    if eig.eigenvalues.iter().any(|&c| c < -0.5) {
        return None;
    }
    let f = eig.eigenvalues.map(|c| {
        let c = c.min(1.0);
        let t = c.acos();
        if t < 1e-4 {
            1.0 + t * t / 6.0
        } else {
            t / t.sin()
        }
    });
    let v = &eig.eigenvectors;
    let g = a * (v * DMatrix::from_diagonal(&f) * v.transpose());
    Some((&g - g.transpose()) * 0.5)
}

/// Orthogonal polar factor and the smallest singular value.
fn polar(t: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = t.clone().svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (svd.u.unwrap() * svd.v_t.unwrap(), smin)
}

impl<'a> Sweeper<'a> {
    fn wall(&self, u: f64) -> Result<WallConfig> {
        self.spec
            .resolve_capped(CyclePoint::from_cycle_parameter(u)?)
    }

    fn frame(&self, u: f64) -> Result<Frame> {
        let wall = self.wall(u)?;
        let levels = solve_levels(self.params, &wall, self.levels)?;
        let set = if self.lambda == 0.0 || self.basis[0].particles() == 1 {
            ModeSet::from_levels(self.params, &wall, &levels)?
        } else {
            ModeSet::new(self.params, &wall, self.levels)?
        };
        let h = fock_hamiltonian(&set, self.lambda, self.basis)?;
        let (energies, vectors) = sorted_eigen(h);
        let modes = (1..=self.levels).map(|n| *set.wavefunction(n)).collect();
        Ok(Frame {
            u,
            modes,
            energies,
            vectors,
        })
    }

    fn fock_overlap(&self, new: &Frame, old: &Frame) -> Result<DMatrix<f64>> {
        let m = self.levels;
        let mut sp = vec![vec![0.0; m]; m];
        for (a, row) in sp.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = overlap2(&new.modes[a], &old.modes[b])?;
            }
        }
        let n = self.basis.len();
        let mut o = DMatrix::zeros(n, n);
        for i in 0..n {
            let bra = self.basis[i].occupations();
            for j in 0..n {
                let ket = self.basis[j].occupations();
                let sub: Vec<Vec<f64>> = bra
                    .iter()
                    .map(|&a| ket.iter().map(|&b| sp[a - 1][b - 1]).collect())
                    .collect();
                o[(i, j)] = permanent(&sub) / (self.denominators[i] * self.denominators[j]);
            }
        }
        Ok(o)
    }

    /// Continues `old` into `frame`, or `None` when the basis moved too far.
    fn track(
        &self,
        old: &Tracked,
        frame: Frame,
        populations: &[f64],
    ) -> Result<Option<(Tracked, DMatrix<f64>)>> {
        let n = self.basis.len();
        let o = self.fock_overlap(&frame, &old.frame)?;
        let t = frame.vectors.transpose() * o * &old.frame.vectors;
        // column k: overlaps of the new sorted states with old tracked state k
        let col = |k: usize| -> Vec<f64> {
            (0..n)
                .map(|j| t[(j, old.order[k])] * old.signs[k])
                .collect()
        };
        let mut by_strength: Vec<(usize, f64)> = (0..n)
            .map(|k| (k, col(k).iter().fold(0.0f64, |m, v| m.max(v.abs()))))
            .collect();
        by_strength.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut order = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        for &(k, _) in &by_strength {
            let c = col(k);
            let best = (0..n)
                .filter(|&j| !taken[j])
                .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
                .unwrap();
            if c[best].abs() < 0.5 && populations[k] > 1e-10 {
                return Ok(None);
            }
            order[k] = best;
            taken[best] = true;
        }
        let signs: Vec<f64> = (0..n)
            .map(|k| if col(k)[order[k]] < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let tracked_t = DMatrix::from_fn(n, n, |k, l| {
            signs[k] * t[(order[k], old.order[l])] * old.signs[l]
        });
        let (q, smin) = polar(&tracked_t);
        if smin < 0.5 {
            return Ok(None);
        }
        Ok(Some((
            Tracked {
                frame,
                order,
                signs,
            },
            q,
        )))
    }

    fn propagate(
        &self,
        old: &Tracked,
        new: &Tracked,
        q: &DMatrix<f64>,
        c: &DVector<C64>,
    ) -> Option<DVector<C64>> {
        let g = log_orthogonal(q)?;
        let tau = (new.frame.u - old.frame.u) * self.time_per_u / self.params.hbar;
        let n = c.len();
        let h = DMatrix::from_fn(n, n, |i, j| {
            let mut v = C64::new(0.0, g[(i, j)]);
            if i == j {
                v += 0.5 * tau * (old.energy(i) + new.energy(i));
            }
            v
        });
        Some(expm_hermitian(&h, 1.0) * c)
    }

    /// One attempted step: the two-half-step result and its error estimate.
    fn attempt(
        &self,
        cur: &Tracked,
        c: &DVector<C64>,
        du: f64,
    ) -> Result<Option<(Tracked, DVector<C64>, f64)>> {
        let pops: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
        let u1 = (cur.frame.u + du).min(3.0);
        let um = 0.5 * (cur.frame.u + u1);
        let Some((end_direct, q_direct)) = self.track(cur, self.frame(u1)?, &pops)? else {
            return Ok(None);
        };
        let Some(full) = self.propagate(cur, &end_direct, &q_direct, c) else {
            return Ok(None);
        };
        let Some((mid, q1)) = self.track(cur, self.frame(um)?, &pops)? else {
            return Ok(None);
        };
        let Some(c_mid) = self.propagate(cur, &mid, &q1, c) else {
            return Ok(None);
        };
        let pops_mid: Vec<f64> = c_mid.iter().map(|z| z.norm_sqr()).collect();
        let Some((end, q2)) = self.track(&mid, self.frame(u1)?, &pops_mid)? else {
            return Ok(None);
        };
        let Some(half) = self.propagate(&mid, &end, &q2, &c_mid) else {
            return Ok(None);
        };
        let err = (end_direct.to_sorted(&full) - end.to_sorted(&half)).norm();
        Ok(Some((end, half, err)))
    }
}

fn dominant_label(basis: &[FockState], v: nalgebra::DVectorView<f64>) -> String {
    let i = v.iamax();
    basis[i].label()
}

/// Integrates the capped cycle over total time `total_time`, starting in the
/// ground state, and reports populations of the final eigenstates.
pub fn cycle_sweep(
    params: &BoxParams,
    spec: &CycleSpec,
    lambda: f64,
    basis: &[FockState],
    total_time: f64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    spec.validate(params)?;
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::invalid(format!(
            "total time must be positive, got {total_time}"
        )));
    }
    let Some(first) = basis.first() else {
        return Err(Error::invalid("empty basis"));
    };
    let particles = first.particles();
    let levels = basis.iter().map(FockState::max_level).max().unwrap();
    let sweeper = Sweeper {
        params,
        spec,
        basis,
        lambda,
        levels,
        time_per_u: total_time / 3.0,
        denominators: basis
            .iter()
            .map(|s| {
                s.counts()
                    .iter()
                    .map(|&(_, c)| factorial(c))
                    .product::<f64>()
                    .sqrt()
            })
            .collect(),
    };
    let n = basis.len();
    let start = sweeper.frame(0.0)?;
    let e_start = start.energies[0];
    let mut cur = Tracked {
        frame: start,
        order: (0..n).collect(),
        signs: vec![1.0; n],
    };
    let mut c = DVector::from_element(n, C64::from(0.0));
    c[0] = C64::from(1.0);

    let mut du = opts.initial_step;
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut series = vec![SeriesPoint {
        time: 0.0,
        cycle_parameter: 0.0,
        populations: cur.to_sorted(&c).iter().map(|z| z.norm_sqr()).collect(),
    }];
    while cur.frame.u < 3.0 {
        if steps + rejected >= opts.max_steps {
            return Err(Error::ResourceLimit(format!(
                "cycle sweep exceeded {} steps at cycle parameter {}",
                opts.max_steps, cur.frame.u
            )));
        }
        du = du.min(opts.max_step).min(3.0 - cur.frame.u);
        let at = cur.frame.u;
        match sweeper
            .attempt(&cur, &c, du)
            .map_err(|e| e.context(format!("cycle parameter {at}")))?
        {
            Some((next, c_next, err)) if err <= opts.tolerance || du <= opts.min_step => {
                cur = next;
                c = c_next;
                steps += 1;
                let u = cur.frame.u;
                series.push(SeriesPoint {
                    time: u * sweeper.time_per_u,
                    cycle_parameter: u,
                    populations: cur.to_sorted(&c).iter().map(|z| z.norm_sqr()).collect(),
                });
                let grow = 0.9 * (opts.tolerance / err.max(1e-300)).cbrt();
                du *= grow.clamp(0.2, 2.0);
            }
            Some((_, _, err)) => {
                rejected += 1;
                du *= (0.9 * (opts.tolerance / err).cbrt()).clamp(0.1, 0.9);
            }
            None => {
                rejected += 1;
                if du <= opts.min_step {
                    return Err(Error::Integration {
                        at,
                        message: "eigenvector continuity could not be established".into(),
                    });
                }
                du *= 0.5;
            }
        }
    }
    let sorted = cur.to_sorted(&c);
    let populations: Vec<f64> = sorted.iter().map(|z| z.norm_sqr()).collect();
    let labels: Vec<String> = (0..n)
        .map(|k| dominant_label(basis, cur.frame.vectors.column(k)))
        .collect();
    let goal = FockState::uniform(2, particles);
    let goal_idx = basis
        .iter()
        .position(|s| *s == goal)
        .ok_or_else(|| Error::invalid(format!("basis does not contain {goal}")))?;
    let target = cur.frame.vectors.row(goal_idx).transpose().iamax();
    let absorbed = populations
        .iter()
        .zip(cur.frame.energies.iter())
        .map(|(p, e)| p * e)
        .sum::<f64>()
        - e_start;
    Ok(SweepResult {
        labels,
        target: goal.label(),
        fidelity: populations[target],
        absorbed_energy: absorbed,
        norm: sorted.norm(),
        populations,
        steps,
        rejected,
        series: thin(series, opts.series_cap),
    })
}

/// Smallest splitting between levels `lower` and `lower + 1` during stage
/// II with the wall capped at `g_cap`, as `(cycle parameter, gap)`.
pub fn capped_min_gap(params: &BoxParams, spec: &CycleSpec, lower: usize) -> Result<(f64, f64)> {
    spec.validate(params)?;
    if lower == 0 {
        return Err(Error::invalid("levels are 1-based"));
    }
    let gap = |s: f64| -> Result<f64> {
        let wall = spec.resolve_capped(CyclePoint {
            stage: Stage::II,
            s,
        })?;
        let lv = solve_levels(params, &wall, lower + 1)?;
        Ok(lv[lower].energy - lv[lower - 1].energy)
    };
    let n = 400;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let g = gap(s)?;
        if g < best.1 {
            best = (s, g);
        }
    }
    let h = 1.0 / n as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (gap(x1)?, gap(x2)?);
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = gap(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = gap(x2)?;
        }
    }
    let s = 0.5 * (a + b);
    let g = gap(s)?.min(best.1);
    Ok((
        CyclePoint {
            stage: Stage::II,
            s,
        }
        .cycle_parameter(),
        g,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::enumerate_states;

    fn p() -> BoxParams {
        BoxParams::default()
    }

    #[test]
    fn permanent_small_cases() {
        assert_eq!(permanent(&[vec![1.0, 2.0], vec![3.0, 4.0]]), 10.0);
        let m = vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ];
        assert_eq!(permanent(&m), 450.0);
    }

    #[test]
    fn log_of_rotation() {
        let t: f64 = 0.7;
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0],
        );
        let g = log_orthogonal(&q).unwrap();
        assert!((g[(1, 0)] - t).abs() < 1e-14 && (g[(0, 1)] + t).abs() < 1e-14);
        assert!(g[(2, 2)].abs() < 1e-15);
    }

    #[test]
    fn mini_gap_shrinks_with_the_cap() {
        let mut last = f64::INFINITY;
        for cap in [1e2, 1e3, 1e4] {
            let spec = CycleSpec {
                g_cap: cap,
                ..CycleSpec::canonical(&p())
            };
            let (u, g) = capped_min_gap(&p(), &spec, 1).unwrap();
            assert!((u - 1.5).abs() < 1e-3, "{u}");
            assert!(g < last && g > 0.0);
            last = g;
        }
    }

    #[test]
    fn sudden_sweep_leaves_the_state_alone() {
        // a sudden high wall excites modes with a 1/n tail, so the cap is
        // kept low enough for the truncated basis to hold the state
        let spec = CycleSpec {
            g_cap: 100.0,
            ..CycleSpec::canonical(&p())
        };
        let basis = enumerate_states(1, 24).unwrap();
        let r = cycle_sweep(&p(), &spec, 0.0, &basis, 1e-4, &SweepOptions::default()).unwrap();
        assert!(r.populations[0] > 0.99, "{:?}", &r.populations[..3]);
        assert!((r.norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn diabatic_window_inverts_one_particle() {
        let basis = enumerate_states(1, 8).unwrap();
        let r = cycle_sweep(
            &p(),
            &CycleSpec::canonical(&p()),
            0.0,
            &basis,
            100.0,
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(r.target, "2");
        assert!(r.fidelity > 0.9, "{:?}", &r.populations[..3]);
        let three = 3.0 * p().epsilon();
        assert!((r.absorbed_energy - three).abs() < 0.05 * three);
        let total: f64 = r.populations.iter().sum();
        assert!((total - 1.0).abs() < 1e-8);
    }
}
