use boxcycle::dynamics::{
    cycle_sweep, gaussian_wall_propagate, integrate_two_level, lz_probability, GridSpec, Schedule,
    SweepOptions, SweepResult, TwoLevelCrossing,
};
use boxcycle::manybody::{
    enumerate_states, find_gaps, manybody_holonomy, noninteracting_flow, selection_rule,
    two_body_element, FockState, ModeSet,
};
use boxcycle::report::{fmt_g, fmt_strength, reproduce_figure};
use boxcycle::{holonomy, sample_flow, solve_levels};
use serde::Serialize;

use crate::config::Config;
use crate::output::{to_csv, to_json, Outputs};
use crate::{CliError, Command, ManyBodyArgs};

const LZ_GAMMAS: [f64; 6] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];

fn apply_body(cfg: &mut Config, body: &ManyBodyArgs) -> Result<(), CliError> {
    if let Some(n) = body.particles {
        cfg.set("particles.N", &n.to_string())?;
    }
    if let Some(c) = body.cutoff {
        cfg.set("basis.cutoff", &c.to_string())?;
    }
    if let Some(l) = body.lambda {
        cfg.set("interaction.lambda", &l.to_string())?;
    }
    Ok(())
}

fn parse_states(list: &[String], particles: usize) -> Result<Vec<FockState>, CliError> {
    let states: Vec<FockState> = list
        .iter()
        .map(|s| s.parse::<FockState>())
        .collect::<Result<_, _>>()?;
    if let Some(bad) = states.iter().find(|s| s.particles() != particles) {
        return Err(CliError::Config(format!(
            "state {bad} does not hold {particles} particles"
        )));
    }
    Ok(states)
}

/// Explicit states, or every state below the cutoff.
fn basis_or_states(cfg: &Config, body: &ManyBodyArgs) -> Result<Vec<FockState>, CliError> {
    let n = cfg.particles()?;
    if body.states.is_empty() {
        Ok(enumerate_states(n, cfg.cutoff()?)?)
    } else {
        parse_states(&body.states, n)
    }
}

#[derive(Serialize)]
struct CrossingJson {
    #[serde(rename = "X_star")]
    x_star: f64,
    j_left: u32,
    j_right: u32,
}

#[derive(Serialize)]
struct HolonomyJson {
    permutation: Vec<usize>,
    closed: bool,
    crossings: Vec<CrossingJson>,
}

#[derive(Serialize)]
struct StateMapJson<'a> {
    particles: usize,
    mode: &'static str,
    lambda: f64,
    map: std::collections::BTreeMap<String, String>,
    entries: &'a [boxcycle::manybody::HolonomyEntry],
}

#[derive(Serialize)]
struct MatrixMeta {
    wall_g: String,
    wall_x: f64,
}

fn write_sweep(out: &mut Outputs, name: &str, mut result: SweepResult) -> Result<(), CliError> {
    let rows = result.series.iter().flat_map(|p| {
        p.populations.iter().enumerate().map(move |(i, pop)| {
            vec![
                fmt_g(p.time),
                fmt_g(p.cycle_parameter),
                (i + 1).to_string(),
                fmt_g(*pop),
            ]
        })
    });
    let csv = to_csv(
        &["time", "cycle_parameter", "index", "population"],
        rows.collect::<Vec<_>>(),
    );
    out.write(&format!("{name}_series.csv"), "csv", &csv)?;
    result.series.clear();
    out.write(&format!("{name}.json"), "json", &to_json(&result))
}

pub fn execute(command: Command, cfg: &mut Config, out: &mut Outputs) -> Result<(), CliError> {
    match command {
        Command::Spectrum { m } => {
            if let Some(m) = m {
                cfg.set("levels.M", &m.to_string())?;
            }
            let params = cfg.params()?;
            let wall = cfg.wall()?;
            let levels = solve_levels(&params, &wall, cfg.levels()?)?;
            let rows = levels.iter().map(|l| {
                vec![
                    fmt_strength(wall.strength),
                    fmt_g(wall.position),
                    l.index.to_string(),
                    fmt_g(l.k),
                    fmt_g(l.k_bar(&params)),
                    fmt_g(l.energy),
                    l.character.to_string(),
                    fmt_g(l.residual),
                ]
            });
            let csv = to_csv(
                &["g", "X", "n", "k", "k_bar", "E", "character", "residual"],
                rows.collect::<Vec<_>>(),
            );
            out.write("spectrum.csv", "csv", &csv)
        }
        Command::Flow { m } => {
            if let Some(m) = m {
                cfg.set("levels.M", &m.to_string())?;
            }
            let params = cfg.params()?;
            let table = sample_flow(&params, &cfg.spec()?, cfg.levels()?)?;
            let mut rows = Vec::new();
            for t in 0..table.levels_per_sample {
                for (s, k) in table.samples.iter().zip(table.thread_k_bar(t)) {
                    rows.push(vec![
                        s.point.stage.to_string(),
                        fmt_g(s.point.s),
                        fmt_g(s.wall.position),
                        fmt_strength(s.wall.strength),
                        (t + 1).to_string(),
                        fmt_g(k),
                    ]);
                }
            }
            let csv = to_csv(&["stage", "s", "X", "g", "thread_id", "k_bar"], rows);
            out.write("flow.csv", "csv", &csv)
        }
        Command::Holonomy { m, mode, body } => {
            if let Some(m) = m {
                cfg.set("levels.M", &m.to_string())?;
            }
            if let Some(mode) = mode {
                cfg.set("holonomy.mode", &mode)?;
            }
            apply_body(cfg, &body)?;
            let params = cfg.params()?;
            let spec = cfg.spec()?;
            if body.particles.is_none() && body.states.is_empty() {
                let perm = holonomy(&params, &spec, cfg.levels()?)?;
                let json = HolonomyJson {
                    permutation: perm.images.clone(),
                    closed: perm.is_closed(),
                    crossings: perm
                        .steps
                        .iter()
                        .map(|s| CrossingJson {
                            x_star: s.event.x_star,
                            j_left: s.event.j_left,
                            j_right: s.event.j_right,
                        })
                        .collect(),
                };
                return out.write("holonomy.json", "json", &to_json(&json));
            }
            let n = cfg.particles()?;
            let states = if body.states.is_empty() {
                vec![FockState::uniform(1, n)]
            } else {
                parse_states(&body.states, n)?
            };
            let mode = cfg.mode()?;
            let lambda = cfg.lambda()?;
            let entries = manybody_holonomy(&params, &spec, &states, lambda, mode)?;
            let json = StateMapJson {
                particles: n,
                mode: mode.name(),
                lambda,
                map: entries
                    .iter()
                    .map(|e| (e.initial.label(), e.final_state.label()))
                    .collect(),
                entries: &entries,
            };
            out.write("holonomy.json", "json", &to_json(&json))
        }
        Command::FockFlow { body } => {
            apply_body(cfg, &body)?;
            let params = cfg.params()?;
            let states = basis_or_states(cfg, &body)?;
            let lambda = cfg.lambda()?;
            let flow = noninteracting_flow(&params, &cfg.spec()?, &states, Some(lambda))?;
            let shifts = flow.shifts.as_ref().unwrap();
            let mut rows = Vec::new();
            for (i, state) in states.iter().enumerate() {
                let k_bar = flow.k_bar(i);
                for (j, p) in flow.points.iter().enumerate() {
                    let e0 = flow.energies[i][j];
                    rows.push(vec![
                        p.stage.to_string(),
                        fmt_g(p.s),
                        state.label(),
                        fmt_g(k_bar[j]),
                        fmt_g(e0),
                        fmt_g(e0 + shifts[i][j]),
                    ]);
                }
            }
            let csv = to_csv(
                &["stage", "s", "state_label", "k_bar", "E0", "E_perturbed"],
                rows,
            );
            out.write("fock_flow.csv", "csv", &csv)
        }
        Command::Gaps { body } => {
            apply_body(cfg, &body)?;
            let params = cfg.params()?;
            let states = basis_or_states(cfg, &body)?;
            let gaps = find_gaps(&params, &cfg.spec()?, &states, cfg.lambda()?)?;
            out.write("gaps.json", "json", &to_json(&gaps))
        }
        Command::Matrix { body } => {
            apply_body(cfg, &body)?;
            let params = cfg.params()?;
            let wall = cfg.wall()?;
            let states = basis_or_states(cfg, &body)?;
            let top = states.iter().map(FockState::max_level).max().unwrap_or(1);
            let modes = ModeSet::new(&params, &wall, top)?;
            let lambda = cfg.lambda()?;
            let mut rows = Vec::new();
            for (i, bra) in states.iter().enumerate() {
                for ket in &states[i..] {
                    let v = two_body_element(bra, ket, lambda, &modes)?;
                    rows.push(vec![
                        bra.label(),
                        ket.label(),
                        u8::from(selection_rule(bra, ket)).to_string(),
                        fmt_g(v),
                    ]);
                }
            }
            out.write(
                "matrix.csv",
                "csv",
                &to_csv(&["bra", "ket", "allowed", "element"], rows),
            )?;
            let meta = MatrixMeta {
                wall_g: fmt_strength(wall.strength),
                wall_x: wall.position,
            };
            out.write("matrix.json", "json", &to_json(&meta))
        }
        Command::Lz { gammas, window } => {
            let gammas = if gammas.is_empty() {
                LZ_GAMMAS.to_vec()
            } else {
                gammas
            };
            let mut rows = Vec::new();
            for g in gammas {
                let c = TwoLevelCrossing::from_gamma(g)?;
                let p = lz_probability(&c);
                let r = integrate_two_level(&c, window * c.gap.max(f64::MIN_POSITIVE) / c.slope)?;
                let num = r.populations[0];
                rows.push(vec![
                    fmt_g(g),
                    fmt_g(p),
                    fmt_g(num),
                    fmt_g((num - p).abs() / p),
                ]);
            }
            out.write(
                "lz.csv",
                "csv",
                &to_csv(&["gamma", "p_closed_form", "p_integrated", "rel_err"], rows),
            )
        }
        Command::Sweep { body, total_time } => {
            apply_body(cfg, &body)?;
            if let Some(t) = total_time {
                cfg.set("sweep.T", &t.to_string())?;
            }
            let params = cfg.params()?;
            let basis = enumerate_states(cfg.particles()?, cfg.cutoff()?)?;
            let opts = SweepOptions {
                tolerance: cfg.tolerance()?,
                ..SweepOptions::default()
            };
            let r = cycle_sweep(
                &params,
                &cfg.spec()?,
                cfg.lambda()?,
                &basis,
                cfg.total_time()?,
                &opts,
            )?;
            write_sweep(out, "sweep", r)
        }
        Command::Propagate {
            total_time,
            sigma,
            modes,
        } => {
            if let Some(t) = total_time {
                cfg.set("sweep.T", &t.to_string())?;
            }
            if let Some(s) = sigma {
                cfg.set("grid.sigma", &s.to_string())?;
            }
            if let Some(m) = modes {
                cfg.set("grid.modes", &m.to_string())?;
            }
            let params = cfg.params()?;
            let grid = GridSpec::for_sigma(&params, cfg.sigma()?, cfg.grid_modes()?);
            let schedule = Schedule::Cycle {
                spec: cfg.spec()?,
                total_time: cfg.total_time()?,
            };
            let r = gaussian_wall_propagate(&params, &schedule, &grid, 1)?;
            write_sweep(out, "propagate", r)
        }
        Command::ReproduceFigure { number } => {
            let params = cfg.params()?;
            let fig = reproduce_figure(&params, number)?;
            fig.check(&params)?;
            out.write(&format!("figure_{number}.csv"), "csv", &fig.to_csv())
        }
    }
}
