//! Plain-text output helpers and the figure tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::holonomy;
use crate::manybody::{enumerate_states, noninteracting_flow, FockState};
use crate::model::{BoxParams, CycleSpec, WallStrength};

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    }
}

pub fn fmt_strength(g: WallStrength) -> String {
    match g {
        WallStrength::Finite(g) => fmt_g(g),
        WallStrength::Infinite => "inf".into(),
    }
}

pub const FIGURE_COLUMNS: [&str; 8] = ["t", "stage", "s", "X", "g", "state", "highlight", "k_bar"];

/// Single-particle levels drawn in every figure.
pub const FIGURE_LEVELS: usize = 4;

/// Particle number shown in figure `number` (2 to 5).
pub fn figure_particles(number: usize) -> Result<usize> {
    match number {
        2..=5 => Ok(number - 1),
        _ => Err(Error::invalid(format!(
            "figures 2 to 5 are available, got {number}"
        ))),
    }
}

/// Cycle used by all figures: `x0 = 0.4703 L`, `x1 = L - x0`.
pub fn figure_spec(params: &BoxParams) -> CycleSpec {
    let x0 = 0.4703 * params.length;
    CycleSpec::canonical(params).with_positions(x0, params.length - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub t: f64,
    pub stage: String,
    pub s: f64,
    pub x: f64,
    pub g: WallStrength,
    pub state: FockState,
    /// Uniform states `|n...n>` are drawn solid.
    pub highlight: bool,
    pub k_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    pub number: usize,
    pub particles: usize,
    pub spec: CycleSpec,
    pub states: Vec<FockState>,
    pub final_states: Vec<FockState>,
    /// Grouped by state, then along the cycle.
    pub rows: Vec<FigureRow>,
}

/// k-bar against cycle parameter for every Fock state on the lowest four
/// levels.
pub fn reproduce_figure(params: &BoxParams, number: usize) -> Result<FigureTable> {
    let particles = figure_particles(number)?;
    let spec = figure_spec(params);
    let states = enumerate_states(particles, FIGURE_LEVELS)?;
    let flow = noninteracting_flow(params, &spec, &states, None)?;
    let mut rows = Vec::with_capacity(states.len() * flow.points.len());
    for (i, state) in states.iter().enumerate() {
        let k_bar = flow.k_bar(i);
        let highlight = state.counts().len() == 1;
        for (j, (p, w)) in flow.points.iter().zip(&flow.walls).enumerate() {
            rows.push(FigureRow {
                t: p.cycle_parameter(),
                stage: p.stage.to_string(),
                s: p.s,
                x: w.position,
                g: w.strength,
                state: state.clone(),
                highlight,
                k_bar: k_bar[j],
            });
        }
    }
    Ok(FigureTable {
        number,
        particles,
        spec,
        states,
        final_states: flow.final_states,
        rows,
    })
}

impl FigureTable {
    pub fn to_csv(&self) -> String {
        let mut out = FIGURE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_g(r.t),
                r.stage,
                fmt_g(r.s),
                fmt_g(r.x),
                fmt_strength(r.g),
                r.state.label(),
                u8::from(r.highlight),
                fmt_g(r.k_bar)
            );
        }
        out
    }

    pub fn rows_for<'a>(
        &'a self,
        state: &'a FockState,
    ) -> impl Iterator<Item = &'a FigureRow> + 'a {
        self.rows.iter().filter(move |r| &r.state == state)
    }

    /// Schema and endpoint checks: `t` increasing per state, `s` increasing
    /// within each stage, uniform threads starting at `k_bar = n` and ending
    /// at the single-particle holonomy image.
    pub fn check(&self, params: &BoxParams) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(format!("figure {}: {msg}", self.number)));
        let perm = holonomy(params, &self.spec, FIGURE_LEVELS)?;
        for state in &self.states {
            let rows: Vec<&FigureRow> = self.rows_for(state).collect();
            if rows.is_empty() {
                return fail(format!("no rows for {state}"));
            }
            for w in rows.windows(2) {
                if w[1].t <= w[0].t || (w[0].stage == w[1].stage && w[1].s <= w[0].s) {
                    return fail(format!(
                        "cycle parameter not increasing for {state} at t = {}",
                        w[0].t
                    ));
                }
            }
            let counts = state.counts();
            if counts.len() == 1 {
                let n = counts[0].0;
                let (first, last) = (rows[0].k_bar, rows[rows.len() - 1].k_bar);
                if (first - n as f64).abs() > 1e-9 {
                    return fail(format!("{state} starts at k_bar {first}"));
                }
                let image = perm
                    .apply(n)
                    .ok_or_else(|| Error::invalid(format!("level {n} outside the holonomy")))?;
                if (last - image as f64).abs() > 1e-9 {
                    return fail(format!("{state} ends at k_bar {last}, expected {image}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_formatting() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(0.1 + 0.2), "0.3");
        assert_eq!(fmt_g(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_g(1e-5), "1e-05");
        assert_eq!(fmt_g(1.5e-4), "0.00015");
        assert_eq!(fmt_g(123456789012.0), "123456789012");
        assert_eq!(fmt_g(1234567890123.0), "1.23456789012e+12");
        assert_eq!(fmt_g(f64::INFINITY), "inf");
    }

    #[test]
    fn figure_two_endpoints() {
        let p = BoxParams::default();
        let fig = reproduce_figure(&p, 2).unwrap();
        fig.check(&p).unwrap();
        let ends: Vec<String> = fig.final_states.iter().map(|s| s.label()).collect();
        assert_eq!(ends, ["2", "1", "4", "3"]);
        let csv = fig.to_csv();
        assert!(csv.starts_with("t,stage,s,X,g,state,highlight,k_bar\n0,I,0,0.4703,0,1,1,1\n"));
        assert_eq!(csv.lines().count(), 1 + 4 * 301);
    }

    #[test]
    fn unknown_figure() {
        assert!(reproduce_figure(&BoxParams::default(), 6).is_err());
    }
}
