//! Box geometry, units, wall configurations and the three-stage cycle.
//!
//! The cycle inserts a wall at `x0` (stage I, strength ramped from zero to
//! infinity), drags the impenetrable wall to `x1` (stage II) and removes it
//! again (stage III). Every other module consumes the records defined here.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and units of the box. Internal defaults are `hbar = m = L = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxParams {
    pub length: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Default for BoxParams {
    fn default() -> Self {
        BoxParams {
            length: 1.0,
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

impl BoxParams {
    pub fn new(length: f64, mass: f64, hbar: f64) -> Result<Self> {
        let params = BoxParams { length, mass, hbar };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("mass", self.mass),
            ("hbar", self.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "box {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Ground-state energy of the empty box, `(hbar pi / L)^2 / 2m`.
    pub fn epsilon(&self) -> f64 {
        let p = self.hbar * PI / self.length;
        p * p / (2.0 * self.mass)
    }

    /// Coefficient of the derivative jump across the wall, `2 m g / hbar^2`.
    pub fn jump_constant(&self, g: f64) -> f64 {
        2.0 * self.mass * g / (self.hbar * self.hbar)
    }

    pub fn energy_of(&self, k: f64) -> f64 {
        let p = self.hbar * k;
        p * p / (2.0 * self.mass)
    }

    pub fn wavenumber_of(&self, energy: f64) -> f64 {
        (2.0 * self.mass * energy).sqrt() / self.hbar
    }

    /// Natural strength unit `hbar^2 / (m L)`.
    pub fn strength_unit(&self) -> f64 {
        self.hbar * self.hbar / (self.mass * self.length)
    }
}

/// Free-function form of [`BoxParams::epsilon`].
pub fn epsilon(params: &BoxParams) -> f64 {
    params.epsilon()
}

/// `sqrt(E / (N epsilon))`, the per-particle wavenumber in units of the
/// empty-box ground state.
pub fn normalized_wavenumber(energy: f64, particles: usize, params: &BoxParams) -> Result<f64> {
    if particles == 0 {
        return Err(Error::invalid("particle count must be at least 1"));
    }
    if energy.is_nan() || energy < 0.0 {
        return Err(Error::invalid(format!(
            "energy must be non-negative, got {energy}"
        )));
    }
    Ok((energy / (particles as f64 * params.epsilon())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallStrength {
    Finite(f64),
    Infinite,
}

impl WallStrength {
    pub fn is_infinite(&self) -> bool {
        matches!(self, WallStrength::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            WallStrength::Finite(g) => Some(g),
            WallStrength::Infinite => None,
        }
    }

    /// Parses a number or one of `inf`, `infinite`, `infinity`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "+inf" | "infinite" | "infinity") {
            return Ok(WallStrength::Infinite);
        }
        let g: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse wall strength {s:?}")))?;
        if g.is_infinite() && g > 0.0 {
            return Ok(WallStrength::Infinite);
        }
        Ok(WallStrength::Finite(g))
    }
}

impl fmt::Display for WallStrength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WallStrength::Finite(g) => write!(f, "{g}"),
            WallStrength::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallConfig {
    pub strength: WallStrength,
    pub position: f64,
}

impl WallConfig {
    pub fn finite(g: f64, position: f64) -> Self {
        WallConfig {
            strength: WallStrength::Finite(g),
            position,
        }
    }

    pub fn infinite(position: f64) -> Self {
        WallConfig {
            strength: WallStrength::Infinite,
            position,
        }
    }

    pub fn validate(&self, params: &BoxParams) -> Result<()> {
        let x = self.position;
        if !(x > 0.0 && x < params.length) {
            return Err(Error::invalid(format!(
                "wall position must lie strictly inside (0, {}), got {x}",
                params.length
            )));
        }
        if let WallStrength::Finite(g) = self.strength {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::invalid(format!(
                    "wall strength must be finite and non-negative, got {g}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
    III,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::I, Stage::II, Stage::III];

    pub fn ordinal(self) -> usize {
        match self {
            Stage::I => 0,
            Stage::II => 1,
            Stage::III => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Stage::I),
            "II" | "2" => Ok(Stage::II),
            "III" | "3" => Ok(Stage::III),
            other => Err(Error::invalid(format!("unknown stage {other:?}"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::I => "I",
            Stage::II => "II",
            Stage::III => "III",
        })
    }
}

/// A point on the cycle: a stage plus the progress `s` within it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub stage: Stage,
    pub s: f64,
}

impl CyclePoint {
    pub fn new(stage: Stage, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!(
                "cycle progress must lie in [0, 1], got {s}"
            )));
        }
        Ok(CyclePoint { stage, s })
    }

    /// Global cycle parameter in `[0, 3]`.
    pub fn cycle_parameter(&self) -> f64 {
        self.stage.ordinal() as f64 + self.s
    }

    /// Inverse of [`cycle_parameter`](Self::cycle_parameter). Stage
    /// boundaries resolve to the end of the earlier stage.
    pub fn from_cycle_parameter(u: f64) -> Result<Self> {
        if !(0.0..=3.0).contains(&u) {
            return Err(Error::invalid(format!(
                "cycle parameter must lie in [0, 3], got {u}"
            )));
        }
        let (stage, s) = if u <= 1.0 {
            (Stage::I, u)
        } else if u <= 2.0 {
            (Stage::II, u - 1.0)
        } else {
            (Stage::III, u - 2.0)
        };
        Ok(CyclePoint { stage, s })
    }
}

/// Monotone bijection `[0, 1) -> [0, inf)` driving the wall strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ramp {
    /// `g_scale * s / (1 - s)`
    #[default]
    Rational,
    /// `g_scale * tan(pi s / 2)`
    Tangent,
}

impl Ramp {
    pub fn value(self, s: f64, g_scale: f64) -> f64 {
        if s >= 1.0 {
            return f64::INFINITY;
        }
        match self {
            Ramp::Rational => g_scale * s / (1.0 - s),
            Ramp::Tangent => g_scale * (0.5 * PI * s).tan(),
        }
    }

    pub fn inverse(self, g: f64, g_scale: f64) -> f64 {
        if g.is_infinite() {
            return 1.0;
        }
        let r = g / g_scale;
        match self {
            Ramp::Rational => r / (1.0 + r),
            Ramp::Tangent => r.atan() * 2.0 / PI,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rational" => Ok(Ramp::Rational),
            "tangent" | "tan" => Ok(Ramp::Tangent),
            other => Err(Error::invalid(format!("unknown ramp {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ramp::Rational => "rational",
            Ramp::Tangent => "tangent",
        }
    }
}

/// Parameterization of the adiabatic cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub x0: f64,
    pub x1: f64,
    pub g_scale: f64,
    /// Finite stand-in for the impenetrable wall, used by the dynamics.
    pub g_cap: f64,
    pub samples_per_stage: usize,
    pub ramp: Ramp,
}

/// Wall position used for the reference figures, as a fraction of `L`.
pub const CANONICAL_X0_FRACTION: f64 = 0.4703;

impl CycleSpec {
    /// `x0 = 0.4703 L`, `x1 = L - x0`.
    pub fn canonical(params: &BoxParams) -> Self {
        let x0 = CANONICAL_X0_FRACTION * params.length;
        CycleSpec {
            x0,
            x1: params.length - x0,
            g_scale: 10.0 * params.strength_unit(),
            g_cap: 1.0e4 * params.strength_unit(),
            samples_per_stage: 100,
            ramp: Ramp::Rational,
        }
    }

    pub fn with_positions(mut self, x0: f64, x1: f64) -> Self {
        self.x0 = x0;
        self.x1 = x1;
        self
    }

    pub fn reversed(mut self) -> Self {
        std::mem::swap(&mut self.x0, &mut self.x1);
        self
    }

    pub fn validate(&self, params: &BoxParams) -> Result<()> {
        params.validate()?;
        let l = params.length;
        for (name, x) in [("x0", self.x0), ("x1", self.x1)] {
            if !(x > 0.0 && x < l) {
                return Err(Error::invalid(format!(
                    "{name} must lie strictly inside (0, {l}), got {x}"
                )));
            }
        }
        if !(self.g_scale.is_finite() && self.g_scale > 0.0) {
            return Err(Error::invalid(format!(
                "g_scale must be positive, got {}",
                self.g_scale
            )));
        }
        if !(self.g_cap.is_finite() && self.g_cap > 0.0) {
            return Err(Error::invalid(format!(
                "g_cap must be positive and finite, got {}",
                self.g_cap
            )));
        }
        if self.samples_per_stage == 0 {
            return Err(Error::invalid("samples_per_stage must be positive"));
        }
        Ok(())
    }

    /// True iff `2L/5 < x0 < L/2 < x1 < 3L/5`.
    pub fn is_canonical(&self, params: &BoxParams) -> bool {
        let l = params.length;
        0.4 * l < self.x0 && self.x0 < 0.5 * l && 0.5 * l < self.x1 && self.x1 < 0.6 * l
    }

    pub fn ramp_value(&self, s: f64) -> f64 {
        self.ramp.value(s, self.g_scale)
    }

    /// Stage-II wall position at progress `s`.
    pub fn position_at(&self, s: f64) -> f64 {
        if s >= 1.0 {
            self.x1
        } else {
            self.x0 + (self.x1 - self.x0) * s
        }
    }

    /// Wall configuration at a cycle point, with the exact infinite wall at
    /// the end of stage I, through stage II and at the start of stage III.
    pub fn resolve(&self, point: CyclePoint) -> Result<WallConfig> {
        let CyclePoint { stage, s } = point;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!(
                "cycle progress must lie in [0, 1], got {s}"
            )));
        }
        Ok(match stage {
            Stage::I if s >= 1.0 => WallConfig::infinite(self.x0),
            Stage::I => WallConfig::finite(self.ramp_value(s), self.x0),
            Stage::II => WallConfig::infinite(self.position_at(s)),
            Stage::III if s <= 0.0 => WallConfig::infinite(self.x1),
            Stage::III => WallConfig::finite(self.ramp_value(1.0 - s), self.x1),
        })
    }

    /// Like [`resolve`](Self::resolve) but with the infinite wall replaced
    /// by `g_cap`; stage I reaches `g_cap` exactly at `s = 1`.
    pub fn resolve_capped(&self, point: CyclePoint) -> Result<WallConfig> {
        let CyclePoint { stage, s } = point;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!(
                "cycle progress must lie in [0, 1], got {s}"
            )));
        }
        let s_cap = self.ramp.inverse(self.g_cap, self.g_scale);
        let capped = |t: f64| self.ramp_value(t * s_cap).min(self.g_cap);
        Ok(match stage {
            Stage::I if s >= 1.0 => WallConfig::finite(self.g_cap, self.x0),
            Stage::I => WallConfig::finite(capped(s), self.x0),
            Stage::II => WallConfig::finite(self.g_cap, self.position_at(s)),
            Stage::III if s <= 0.0 => WallConfig::finite(self.g_cap, self.x1),
            Stage::III => WallConfig::finite(capped(1.0 - s), self.x1),
        })
    }
}

/// Free-function form of [`CycleSpec::resolve`].
pub fn resolve(point: CyclePoint, spec: &CycleSpec) -> Result<WallConfig> {
    spec.resolve(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec() -> CycleSpec {
        CycleSpec::canonical(&BoxParams::default())
    }

    #[test]
    fn resolve_examples() {
        let spec = spec();
        let w = spec
            .resolve(CyclePoint::new(Stage::I, 0.0).unwrap())
            .unwrap();
        assert_eq!(w, WallConfig::finite(0.0, spec.x0));
        let w = spec
            .resolve(CyclePoint::new(Stage::II, 1.0).unwrap())
            .unwrap();
        assert_eq!(w, WallConfig::infinite(spec.x1));
        let w = spec
            .resolve(CyclePoint::new(Stage::III, 1.0).unwrap())
            .unwrap();
        assert_eq!(w, WallConfig::finite(0.0, spec.x1));
    }

    #[test]
    fn stage_boundaries_agree() {
        let spec = spec();
        let r = |st, s| spec.resolve(CyclePoint { stage: st, s }).unwrap();
        assert_eq!(r(Stage::I, 1.0), r(Stage::II, 0.0));
        assert_eq!(r(Stage::II, 1.0), r(Stage::III, 0.0));
        let c = |st, s| spec.resolve_capped(CyclePoint { stage: st, s }).unwrap();
        assert_eq!(c(Stage::I, 1.0), c(Stage::II, 0.0));
        assert_eq!(c(Stage::II, 1.0), c(Stage::III, 0.0));
        assert_eq!(c(Stage::I, 0.0).strength, WallStrength::Finite(0.0));
    }

    #[test]
    fn out_of_range_progress_is_rejected() {
        assert!(CyclePoint::new(Stage::I, 1.5).is_err());
        assert!(spec()
            .resolve(CyclePoint {
                stage: Stage::II,
                s: -0.1
            })
            .is_err());
        assert!(CyclePoint::from_cycle_parameter(3.2).is_err());
    }

    #[test]
    fn epsilon_examples() {
        let pi2 = PI * PI;
        assert_relative_eq!(BoxParams::new(1.0, 1.0, 1.0).unwrap().epsilon(), pi2 / 2.0);
        assert_relative_eq!(BoxParams::new(2.0, 1.0, 1.0).unwrap().epsilon(), pi2 / 8.0);
        assert_relative_eq!(BoxParams::new(1.0, 0.5, 1.0).unwrap().epsilon(), pi2);
        assert!(BoxParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn normalized_wavenumber_examples() {
        let p = BoxParams::default();
        let e = p.epsilon();
        assert_relative_eq!(normalized_wavenumber(e, 1, &p).unwrap(), 1.0);
        assert_relative_eq!(normalized_wavenumber(4.0 * e, 1, &p).unwrap(), 2.0);
        for n in 1..6 {
            assert_relative_eq!(
                normalized_wavenumber(n as f64 * 4.0 * e, n, &p).unwrap(),
                2.0
            );
        }
        assert!(normalized_wavenumber(-1.0, 1, &p).is_err());
        assert!(normalized_wavenumber(1.0, 0, &p).is_err());
    }

    #[test]
    fn canonical_flag() {
        let p = BoxParams::default();
        assert!(spec().is_canonical(&p));
        assert!(!spec().with_positions(0.3, 0.7).is_canonical(&p));
    }

    #[test]
    fn wall_strength_parsing() {
        assert_eq!(WallStrength::parse("inf").unwrap(), WallStrength::Infinite);
        assert_eq!(
            WallStrength::parse("2.5").unwrap(),
            WallStrength::Finite(2.5)
        );
        assert!(WallStrength::parse("abc").is_err());
        assert!(WallConfig::finite(-1.0, 0.5)
            .validate(&BoxParams::default())
            .is_err());
        assert!(WallConfig::finite(1.0, 1.0)
            .validate(&BoxParams::default())
            .is_err());
    }

    proptest! {
        #[test]
        fn wavenumber_of_box_levels(n in 1usize..40, particles in 1usize..12) {
            let p = BoxParams::default();
            let e = (n * n * particles) as f64 * p.epsilon();
            let kb = normalized_wavenumber(e, particles, &p).unwrap();
            prop_assert!((kb - n as f64).abs() <= 1e-12 * n as f64);
        }

        #[test]
        fn resolved_path_is_continuous(
            x0 in 0.05f64..0.95, x1 in 0.05f64..0.95, samples in 4usize..60, tangent in any::<bool>()
        ) {
            let p = BoxParams::default();
            let mut spec = CycleSpec::canonical(&p).with_positions(x0, x1);
            if tangent { spec.ramp = Ramp::Tangent; }
            let mut prev: Option<WallConfig> = None;
            let mut prev_u = 0.0;
            for i in 0..=(3 * samples) {
                let u = i as f64 / samples as f64;
                let w = spec.resolve(CyclePoint::from_cycle_parameter(u).unwrap()).unwrap();
                if let Some(q) = prev {
                    let dx = (w.position - q.position).abs();
                    prop_assert!(dx <= (x1 - x0).abs() * (u - prev_u) + 1e-12);
                    if let (Some(a), Some(b)) = (w.strength.finite(), q.strength.finite()) {
                        // finite jumps only come from the ramp, which is monotone
                        prop_assert!(a.is_finite() && b.is_finite());
                    }
                }
                prev = Some(w);
                prev_u = u;
            }
        }

        #[test]
        fn ramp_is_increasing_and_invertible(a in 0.0f64..0.999, b in 0.0f64..0.999, tangent in any::<bool>()) {
            let ramp = if tangent { Ramp::Tangent } else { Ramp::Rational };
            prop_assert_eq!(ramp.value(0.0, 3.0), 0.0);
            if a < b {
                prop_assert!(ramp.value(a, 3.0) < ramp.value(b, 3.0));
            }
            let g = ramp.value(a, 3.0);
            prop_assert!((ramp.inverse(g, 3.0) - a).abs() < 1e-9);
        }
    }
}
