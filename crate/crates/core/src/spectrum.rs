//! Single-particle spectrum of the box with a delta wall.
//!
//! For a finite wall the wavenumbers are the positive roots of
//!
//! ```text
//! F(k) = k sin(kL) + c sin(kX) sin(k(L - X)),   c = 2 m g / hbar^2
//! ```
//!
//! which follows from continuity at `X` and the derivative jump
//! `psi'(X+) - psi'(X-) = c psi(X)`. Dividing by `sin(kX) sin(k(L-X))` gives a
//! function that is strictly decreasing between the poles `j pi / X` and
//! `j pi / (L - X)`, so the n-th root lies in `(p_{n-1}, p_n]` where `p` is the
//! sorted union of those poles, i.e. the spectrum of the impenetrable wall.
//! A coincident pair of poles is a root for every `g`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScanTrace};
use crate::model::{BoxParams, WallConfig, WallStrength};
use crate::trig::{int_piece_product, int_sin4, TrigPiece};

/// Relative tolerance under which two impenetrable-wall levels count as
/// degenerate.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest accepted `|F(k)| / (k + c)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Well {
    Left,
    Right,
}

/// Which mode a level is: spread over the box (finite wall) or the j-th mode
/// of one sub-well (impenetrable wall).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Character {
    Extended,
    Left(u32),
    Right(u32),
}

impl Character {
    pub fn well(&self) -> Option<Well> {
        match self {
            Character::Extended => None,
            Character::Left(_) => Some(Well::Left),
            Character::Right(_) => Some(Well::Right),
        }
    }

    /// Wavenumber of a sub-well mode for a wall at `position`.
    pub fn wavenumber(&self, params: &BoxParams, position: f64) -> Option<f64> {
        match *self {
            Character::Extended => None,
            Character::Left(j) => Some(j as f64 * PI / position),
            Character::Right(j) => Some(j as f64 * PI / (params.length - position)),
        }
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Character::Extended => f.write_str("extended"),
            Character::Left(j) => write!(f, "L{j}"),
            Character::Right(j) => write!(f, "R{j}"),
        }
    }
}

/// One adiabatic eigenpair's spectral data. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpLevel {
    pub index: usize,
    pub k: f64,
    pub energy: f64,
    pub character: Character,
    pub residual: f64,
}

impl SpLevel {
    pub fn k_bar(&self, params: &BoxParams) -> f64 {
        self.k * params.length / PI
    }
}

/// Lowest `count` levels of the impenetrable wall at `position`, sorted by
/// wavenumber with LEFT before RIGHT at exact ties.
pub fn infinite_union(params: &BoxParams, position: f64, count: usize) -> Vec<(f64, Character)> {
    let left = PI / position;
    let right = PI / (params.length - position);
    let mut out = Vec::with_capacity(count);
    let (mut jl, mut jr) = (1u32, 1u32);
    while out.len() < count {
        let kl = jl as f64 * left;
        let kr = jr as f64 * right;
        if kl <= kr * (1.0 + TIE_TOLERANCE) {
            out.push((kl, Character::Left(jl)));
            jl += 1;
        } else {
            out.push((kr, Character::Right(jr)));
            jr += 1;
        }
    }
    out
}

pub(crate) fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

fn quantization(k: f64, c: f64, l: f64, x: f64) -> f64 {
    k * (k * l).sin() + c * (k * x).sin() * (k * (l - x)).sin()
}

fn scan_trace(level: usize, lo: f64, hi: f64, c: f64, l: f64, x: f64) -> ScanTrace {
    let samples = (0..=32)
        .map(|i| {
            let k = lo + (hi - lo) * i as f64 / 32.0;
            (k, quantization(k, c, l, x))
        })
        .collect();
    ScanTrace {
        level,
        bracket: (lo, hi),
        samples,
    }
}

/// The `count` lowest adiabatic levels at `wall`.
pub fn solve_levels(params: &BoxParams, wall: &WallConfig, count: usize) -> Result<Vec<SpLevel>> {
    params.validate()?;
    wall.validate(params)?;
    if count == 0 {
        return Err(Error::invalid("level count must be at least 1"));
    }
    let x = wall.position;
    let l = params.length;
    let poles = infinite_union(params, x, count);

    let g = match wall.strength {
        WallStrength::Infinite => {
            return Ok(poles
                .into_iter()
                .enumerate()
                .map(|(i, (k, character))| SpLevel {
                    index: i + 1,
                    k,
                    energy: params.energy_of(k),
                    character,
                    residual: 0.0,
                })
                .collect());
        }
        WallStrength::Finite(g) => g,
    };
    let c = params.jump_constant(g);

    let mut levels = Vec::with_capacity(count);
    for n in 1..=count {
        let hi = poles[n - 1].0;
        let lo_pole = if n == 1 { 0.0 } else { poles[n - 2].0 };
        let k = if n > 1 && is_tie(lo_pole, hi) {
            // sin(kX) = sin(k(L-X)) = 0: the level does not feel the wall
            hi
        } else {
            let free = n as f64 * PI / l;
            let lo = lo_pole.max(free).min(hi);
            bisect_level(lo, hi, c, l, x)
        };
        let residual = quantization(k, c, l, x).abs() / (k + c);
        if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
            return Err(Error::SolverFailure {
                message: format!("residual {residual:.3e} above tolerance for level {n}"),
                trace: scan_trace(n, lo_pole, hi, c, l, x),
            });
        }
        levels.push(SpLevel {
            index: n,
            k,
            energy: params.energy_of(k),
            character: Character::Extended,
            residual,
        });
    }
    Ok(levels)
}

/// Bisection on the sign of `F / (sin(kX) sin(k(L-X)))`, which is positive
/// left of the root and negative right of it inside a pole bracket. A bracket
/// that violates this shows up as a residual failure in the caller.
fn bisect_level(lo: f64, hi: f64, c: f64, l: f64, x: f64) -> f64 {
    if hi <= lo {
        return hi;
    }
    let mid = 0.5 * (lo + hi);
    let sign = ((mid * x).sin() * (mid * (l - x)).sin()).signum();
    let g = |k: f64| sign * quantization(k, c, l, x);

    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let v = g(m);
        if v > 0.0 {
            a = m;
        } else if v < 0.0 {
            b = m;
        } else {
            return m;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Normalized eigenfunction
/// `A sin(kx)` on `[0, X]`, `B sin(k(L - x))` on `[X, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpWavefunction {
    pub level: SpLevel,
    pub amp_left: f64,
    pub amp_right: f64,
    pub wall: WallConfig,
    pub length: f64,
}

impl SpWavefunction {
    pub fn k(&self) -> f64 {
        self.level.k
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.level.k;
        if x <= self.wall.position {
            self.amp_left * (k * x).sin()
        } else {
            self.amp_right * (k * (self.length - x)).sin()
        }
    }

    pub fn value_at_wall(&self) -> f64 {
        self.amp_left * (self.level.k * self.wall.position).sin()
    }

    /// Derivative at the left edge of the support (`0`, or `X` for a
    /// right-well mode).
    pub fn edge_derivative(&self) -> f64 {
        let k = self.level.k;
        match self.level.character {
            Character::Right(_) => {
                -self.amp_right * k * (k * (self.length - self.wall.position)).cos()
            }
            _ => self.amp_left * k,
        }
    }

    /// Closed-form `int psi^2`.
    pub fn norm_squared(&self) -> f64 {
        segment_norms(
            self.level.k,
            self.wall.position,
            self.length,
            self.amp_left,
            self.amp_right,
        )
    }

    fn pieces(&self) -> (TrigPiece, TrigPiece) {
        let k = self.level.k;
        let kl = k * self.length;
        let left = TrigPiece {
            k,
            alpha: self.amp_left,
            beta: 0.0,
        };
        // B sin(k(L - x)) = B sin(kL) cos(kx) - B cos(kL) sin(kx)
        let right = TrigPiece {
            k,
            alpha: -self.amp_right * kl.cos(),
            beta: self.amp_right * kl.sin(),
        };
        (left, right)
    }
}

fn segment_norms(k: f64, x: f64, l: f64, a: f64, b: f64) -> f64 {
    let left = 0.5 * x - (2.0 * k * x).sin() / (4.0 * k);
    let right = 0.5 * (l - x) - (2.0 * k * (l - x)).sin() / (4.0 * k);
    a * a * left + b * b * right
}

/// Normalized eigenfunction of `level`, which must come from
/// [`solve_levels`] at the same `(params, wall)`.
pub fn wavefunction(
    level: &SpLevel,
    params: &BoxParams,
    wall: &WallConfig,
) -> Result<SpWavefunction> {
    wall.validate(params)?;
    let l = params.length;
    let x = wall.position;
    let k = level.k;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!(
            "level wavenumber must be positive, got {k}"
        )));
    }
    let (amp_left, amp_right) = match wall.strength {
        WallStrength::Infinite => {
            let expected = level.character.wavenumber(params, x).ok_or_else(|| {
                Error::invalid("an extended level cannot belong to an impenetrable wall")
            })?;
            if !is_tie(expected, k) {
                return Err(Error::invalid(format!(
                    "level {} with k = {k} does not match {} at X = {x}",
                    level.index, level.character
                )));
            }
            match level.character {
                Character::Left(_) => ((2.0 / x).sqrt(), 0.0),
                Character::Right(j) => {
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    (0.0, sign * (2.0 / (l - x)).sqrt())
                }
                Character::Extended => unreachable!(),
            }
        }
        WallStrength::Finite(g) => {
            if level.character != Character::Extended {
                return Err(Error::invalid(
                    "a sub-well level cannot belong to a finite wall",
                ));
            }
            let c = params.jump_constant(g);
            let residual = quantization(k, c, l, x).abs() / (k + c);
            if residual > 1e-8 {
                return Err(Error::invalid(format!(
                    "level {} (k = {k}) is not an eigenvalue at this wall: residual {residual:.3e}",
                    level.index
                )));
            }
            let (sl, cl) = (k * x).sin_cos();
            let (sr, cr) = (k * (l - x)).sin_cos();
            // continuity or derivative jump, whichever is better conditioned
            let b = if sr.abs() >= cr.abs() {
                sl / sr
            } else {
                -(k * cl + c * sl) / (k * cr)
            };
            let scale = segment_norms(k, x, l, 1.0, b).sqrt().recip();
            (scale, b * scale)
        }
    };
    Ok(SpWavefunction {
        level: *level,
        amp_left,
        amp_right,
        wall: *wall,
        length: l,
    })
}

/// Levels and normalized wavefunctions in one call.
pub fn wavefunctions(
    params: &BoxParams,
    wall: &WallConfig,
    count: usize,
) -> Result<Vec<SpWavefunction>> {
    solve_levels(params, wall, count)?
        .iter()
        .map(|lv| wavefunction(lv, params, wall))
        .collect()
}

fn same_wall(a: &SpWavefunction, b: &SpWavefunction) -> bool {
    a.wall == b.wall && a.length == b.length
}

/// `int_0^L psi_a psi_b psi_c psi_d dx` in closed form.
pub fn overlap4(
    a: &SpWavefunction,
    b: &SpWavefunction,
    c: &SpWavefunction,
    d: &SpWavefunction,
) -> Result<f64> {
    if !(same_wall(a, b) && same_wall(a, c) && same_wall(a, d)) {
        return Err(Error::invalid(
            "overlap4 needs four wavefunctions of the same wall",
        ));
    }
    Ok(overlap4_unchecked([a, b, c, d]))
}

pub(crate) fn overlap4_unchecked(f: [&SpWavefunction; 4]) -> f64 {
    let k = [f[0].k(), f[1].k(), f[2].k(), f[3].k()];
    let x = f[0].wall.position;
    let l = f[0].length;
    let al: f64 = f.iter().map(|w| w.amp_left).product();
    let ar: f64 = f.iter().map(|w| w.amp_right).product();
    let mut total = 0.0;
    if al != 0.0 {
        total += al * int_sin4(k, x);
    }
    if ar != 0.0 {
        total += ar * int_sin4(k, l - x);
    }
    total
}

/// `int_0^L psi_a psi_b dx`; the two walls may differ.
pub fn overlap2(a: &SpWavefunction, b: &SpWavefunction) -> Result<f64> {
    if a.length != b.length {
        return Err(Error::invalid(
            "overlap2 needs wavefunctions of the same box",
        ));
    }
    let l = a.length;
    let (xa, xb) = (a.wall.position, b.wall.position);
    let (pa_left, pa_right) = a.pieces();
    let (pb_left, pb_right) = b.pieces();
    let (lo, hi) = if xa <= xb { (xa, xb) } else { (xb, xa) };
    let mut total = 0.0;
    for (p, q) in [(0.0, lo), (lo, hi), (hi, l)] {
        if q <= p {
            continue;
        }
        let mid = 0.5 * (p + q);
        let fa = if mid < xa { pa_left } else { pa_right };
        let fb = if mid < xb { pb_left } else { pb_right };
        total += int_piece_product(fa, fb, p, q);
    }
    Ok(total)
}

/// Hellmann–Feynman slope `dE_n / dg = psi_n(X)^2` of a finite-wall level.
pub fn hf_derivative(level: &SpLevel, params: &BoxParams, wall: &WallConfig) -> Result<f64> {
    if wall.strength.is_infinite() {
        return Err(Error::Unsupported(
            "the strength derivative is undefined for an impenetrable wall".into(),
        ));
    }
    let wf = wavefunction(level, params, wall)?;
    let v = wf.value_at_wall();
    Ok(v * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const X0: f64 = 0.4703;

    fn p() -> BoxParams {
        BoxParams::default()
    }

    /// Independent root oracle: dense scan of F for sign changes, refined by
    /// bisection on F itself.
    fn scan_roots(c: f64, x: f64, count: usize) -> Vec<f64> {
        let l = 1.0;
        let f = |k: f64| k * (k * l).sin() + c * (k * x).sin() * (k * (l - x)).sin();
        let h = 1e-4;
        let mut roots = Vec::new();
        let mut k = h;
        while roots.len() < count {
            let (fa, fb) = (f(k), f(k + h));
            if fa == 0.0 {
                roots.push(k);
            } else if fa * fb < 0.0 {
                let (mut a, mut b) = (k, k + h);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if f(a) * f(m) <= 0.0 {
                        b = m
                    } else {
                        a = m
                    }
                }
                roots.push(0.5 * (a + b));
            }
            k += h;
        }
        roots
    }

    #[test]
    fn empty_box_levels() {
        let lv = solve_levels(&p(), &WallConfig::finite(0.0, 0.37), 4).unwrap();
        for (i, l) in lv.iter().enumerate() {
            assert_relative_eq!(l.k_bar(&p()), (i + 1) as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn infinite_wall_union() {
        let lv = solve_levels(&p(), &WallConfig::infinite(X0), 4).unwrap();
        let expect = [1.0 / (1.0 - X0), 1.0 / X0, 2.0 / (1.0 - X0), 2.0 / X0];
        for (l, e) in lv.iter().zip(expect) {
            assert_relative_eq!(l.k_bar(&p()), e, max_relative = 1e-14);
        }
        assert_eq!(lv[0].character, Character::Right(1));
        assert_eq!(lv[1].character, Character::Left(1));
        assert_eq!(lv[3].character, Character::Left(2));
        assert_relative_eq!(lv[0].k_bar(&p()), 1.887861053426468, max_relative = 1e-12);
    }

    #[test]
    fn ties_put_left_first() {
        let lv = solve_levels(&p(), &WallConfig::infinite(0.5), 4).unwrap();
        assert_eq!(lv[0].character, Character::Left(1));
        assert_eq!(lv[1].character, Character::Right(1));
        assert_eq!(lv[0].k, lv[1].k);
        let lv = solve_levels(&p(), &WallConfig::infinite(1.0 / 3.0), 6).unwrap();
        let tie: Vec<_> = lv
            .iter()
            .filter(|l| is_tie(l.k, 3.0 * PI))
            .map(|l| l.character)
            .collect();
        assert_eq!(tie, vec![Character::Left(1), Character::Right(2)]);
    }

    #[test]
    fn finite_wall_matches_scan_oracle() {
        // g = 10 internal units, X = L/2
        let lv = solve_levels(&p(), &WallConfig::finite(10.0, 0.5), 2).unwrap();
        let oracle = scan_roots(20.0, 0.5, 2);
        let upper = infinite_union(&p(), 0.5, 2);
        for (n, l) in lv.iter().enumerate() {
            assert!(l.residual <= 1e-10);
            assert!(l.k >= (n + 1) as f64 * PI);
            assert!(l.k <= upper[n].0 * (1.0 + 1e-15));
            assert_relative_eq!(l.k, oracle[n], max_relative = 1e-10);
        }
        // first root strictly inside its bracket
        assert!(lv[0].k > PI && lv[0].k < upper[0].0);
        // the odd level has a node at the wall
        assert_relative_eq!(lv[1].k, 2.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn generic_wall_matches_scan_oracle() {
        for &(g, x) in &[(0.3, 0.3), (5.0, X0), (40.0, 0.71), (1e3, X0)] {
            let lv = solve_levels(&p(), &WallConfig::finite(g, x), 6).unwrap();
            let oracle = scan_roots(2.0 * g, x, 6);
            for (l, o) in lv.iter().zip(&oracle) {
                assert_relative_eq!(l.k, *o, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn huge_wall_approaches_union() {
        let finite = solve_levels(&p(), &WallConfig::finite(1e6, X0), 8).unwrap();
        let inf = solve_levels(&p(), &WallConfig::infinite(X0), 8).unwrap();
        for (a, b) in finite.iter().zip(&inf) {
            assert!(a.k < b.k);
            assert!((a.k_bar(&p()) - b.k_bar(&p())).abs() < 5e-5);
            assert!(a.residual <= RESIDUAL_TOLERANCE);
        }
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(solve_levels(&p(), &WallConfig::finite(1.0, 0.5), 0).is_err());
        assert!(solve_levels(&p(), &WallConfig::finite(1.0, 1.5), 3).is_err());
    }

    #[test]
    fn wavefunction_examples() {
        let wall = WallConfig::finite(0.0, 0.37);
        for lv in solve_levels(&p(), &wall, 4).unwrap() {
            let wf = wavefunction(&lv, &p(), &wall).unwrap();
            for &x in &[0.1, 0.37, 0.5, 0.9] {
                let free = 2f64.sqrt() * (lv.index as f64 * PI * x).sin();
                assert!((wf.value(x) - free).abs() < 1e-12);
            }
        }

        let wall = WallConfig::infinite(X0);
        let lv = solve_levels(&p(), &wall, 2).unwrap();
        let r1 = wavefunction(&lv[0], &p(), &wall).unwrap();
        assert_eq!(r1.amp_left, 0.0);
        assert_relative_eq!(r1.amp_right, (2.0 / (1.0 - X0)).sqrt());
        let l1 = wavefunction(&lv[1], &p(), &wall).unwrap();
        assert_eq!(l1.amp_right, 0.0);

        let wall = WallConfig::finite(10.0, 0.5);
        let lv = solve_levels(&p(), &wall, 1).unwrap();
        let wf = wavefunction(&lv[0], &p(), &wall).unwrap();
        let gl = gauss_quad::GaussLegendre::new(80).unwrap();
        let norm = gl.integrate(0.0, 0.5, |x| wf.value(x).powi(2))
            + gl.integrate(0.5, 1.0, |x| wf.value(x).powi(2));
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wavefunction_rejects_foreign_levels() {
        let lv = solve_levels(&p(), &WallConfig::finite(3.0, 0.4), 2).unwrap();
        assert!(wavefunction(&lv[0], &p(), &WallConfig::finite(7.0, 0.4)).is_err());
        assert!(wavefunction(&lv[0], &p(), &WallConfig::infinite(0.4)).is_err());
    }

    #[test]
    fn canonical_sign_and_continuity() {
        for wall in [
            WallConfig::finite(2.0, X0),
            WallConfig::finite(1e4, X0),
            WallConfig::finite(50.0, 0.5),
            WallConfig::infinite(X0),
            WallConfig::infinite(0.3),
        ] {
            for wf in wavefunctions(&p(), &wall, 8).unwrap() {
                assert!(wf.edge_derivative() > 0.0, "{:?}", wf.level);
                let x = wall.position;
                let right = wf.amp_right * (wf.k() * (1.0 - x)).sin();
                assert!((wf.value_at_wall() - right).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn overlap4_examples() {
        let wall = WallConfig::infinite(X0);
        let wf = wavefunctions(&p(), &wall, 2).unwrap();
        let (r1, l1) = (&wf[0], &wf[1]);
        assert_eq!(overlap4(r1, l1, r1, r1).unwrap(), 0.0);

        let wf = wavefunctions(&p(), &WallConfig::finite(0.0, 0.5), 2).unwrap();
        assert_relative_eq!(
            overlap4(&wf[0], &wf[0], &wf[0], &wf[0]).unwrap(),
            1.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            overlap4(&wf[0], &wf[0], &wf[1], &wf[1]).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let other = wavefunctions(&p(), &WallConfig::finite(1.0, 0.5), 1).unwrap();
        assert!(overlap4(&wf[0], &wf[0], &wf[0], &other[0]).is_err());
    }

    #[test]
    fn overlap4_matches_quadrature() {
        let wall = WallConfig::finite(7.5, 0.3);
        let wf = wavefunctions(&p(), &wall, 5).unwrap();
        let gl = gauss_quad::GaussLegendre::new(100).unwrap();
        for idx in [[0, 1, 2, 3], [4, 4, 1, 0], [2, 2, 2, 2], [0, 3, 3, 4]] {
            let f = |x: f64| idx.iter().map(|&i| wf[i].value(x)).product::<f64>();
            let q = gl.integrate(0.0, 0.3, f) + gl.integrate(0.3, 1.0, f);
            let v = overlap4(&wf[idx[0]], &wf[idx[1]], &wf[idx[2]], &wf[idx[3]]).unwrap();
            assert!((v - q).abs() < 1e-11, "{idx:?}: {v} vs {q}");
        }
    }

    #[test]
    fn overlap2_across_walls_matches_quadrature() {
        let a = wavefunctions(&p(), &WallConfig::finite(30.0, 0.45), 3).unwrap();
        let b = wavefunctions(&p(), &WallConfig::finite(31.0, 0.47), 3).unwrap();
        let gl = gauss_quad::GaussLegendre::new(100).unwrap();
        for ai in &a {
            for bj in &b {
                let f = |x: f64| ai.value(x) * bj.value(x);
                let q = gl.integrate(0.0, 0.45, f)
                    + gl.integrate(0.45, 0.47, f)
                    + gl.integrate(0.47, 1.0, f);
                assert!((overlap2(ai, bj).unwrap() - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hf_examples() {
        let wall = WallConfig::finite(0.0, 0.5);
        let lv = solve_levels(&p(), &wall, 2).unwrap();
        assert_relative_eq!(
            hf_derivative(&lv[0], &p(), &wall).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert!(hf_derivative(&lv[1], &p(), &wall).unwrap().abs() < 1e-12);
        let inf = WallConfig::infinite(0.5);
        let lv = solve_levels(&p(), &inf, 1).unwrap();
        assert!(matches!(
            hf_derivative(&lv[0], &p(), &inf),
            Err(Error::Unsupported(_))
        ));

        let g = 5.0;
        let h = 1e-4;
        let e = |g: f64| solve_levels(&p(), &WallConfig::finite(g, X0), 1).unwrap()[0].energy;
        let fd = (e(g + h) - e(g - h)) / (2.0 * h);
        let wall = WallConfig::finite(g, X0);
        let hf = hf_derivative(&solve_levels(&p(), &wall, 1).unwrap()[0], &p(), &wall).unwrap();
        assert!((fd - hf).abs() < 1e-6);
    }

    #[test]
    fn persistent_level_at_rational_position() {
        // X = L/3: k = 3 pi zeroes both sines
        for g in [0.0, 1.0, 100.0, 1e5] {
            let lv = solve_levels(&p(), &WallConfig::finite(g, 1.0 / 3.0), 4).unwrap();
            assert!(
                lv.iter().any(|l| (l.k - 3.0 * PI).abs() < 1e-12 * 3.0 * PI),
                "g = {g}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn brackets_and_monotone_flow(x in 0.05f64..0.95, g1 in 0.0f64..200.0, dg in 0.0f64..200.0) {
            let m = 6;
            let inf = infinite_union(&p(), x, m);
            let a = solve_levels(&p(), &WallConfig::finite(g1, x), m).unwrap();
            let b = solve_levels(&p(), &WallConfig::finite(g1 + dg, x), m).unwrap();
            for n in 0..m {
                let free = (n + 1) as f64 * PI;
                prop_assert!(a[n].k >= free * (1.0 - 1e-14));
                prop_assert!(a[n].k <= inf[n].0 * (1.0 + 1e-14));
                prop_assert!(b[n].k >= a[n].k * (1.0 - 1e-14));
                prop_assert!(a[n].residual <= RESIDUAL_TOLERANCE);
                if n > 0 { prop_assert!(a[n].k >= a[n - 1].k); }
            }
        }

        #[test]
        fn gram_matrix_is_identity(x in 0.05f64..0.95, lg in -2.0f64..5.0, inf in any::<bool>()) {
            let wall = if inf { WallConfig::infinite(x) } else { WallConfig::finite(10f64.powf(lg), x) };
            let wf = wavefunctions(&p(), &wall, 6).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    let o = overlap2(&wf[i], &wf[j]).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((o - expect).abs() < 1e-8, "({i},{j}) = {o}");
                }
            }
        }

        #[test]
        fn root_count_below_cutoff_matches_brackets(x in 0.05f64..0.95, g in 0.0f64..500.0, cutoff in 5.0f64..40.0) {
            let lv = solve_levels(&p(), &WallConfig::finite(g, x), 30).unwrap();
            let found = lv.iter().filter(|l| l.k < cutoff).count();
            let free = (cutoff / PI).ceil() as usize - 1;
            let walled = infinite_union(&p(), x, 40).iter().filter(|(k, _)| *k < cutoff).count();
            prop_assert!(found <= free && found >= walled);
        }
    }
}
