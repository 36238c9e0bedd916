//! Noninteracting Fock threads along the cycle, their crossings, and the
//! many-body holonomy under different traversal rules.
//!
//! A thread is labelled by the single-particle levels its particles occupy
//! at the start of the cycle. Each particle follows its single-particle
//! thread: the same sorted position in stage I, a fixed sub-well mode in
//! stage II and the holonomy image in stage III.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    contributing_terms, enumerate_states_limited, selection_rule, two_body_element, FockState,
    ModeSet,
};
use crate::error::{Error, Result};
use crate::flow::{cycle_grid, holonomy};
use crate::model::{BoxParams, CyclePoint, CycleSpec, Stage, WallConfig, WallStrength};
use crate::spectrum::{infinite_union, solve_levels, Character, SpLevel, Well};

/// Single-particle threads `1..=threads` of one cycle.
#[derive(Debug, Clone)]
pub struct ThreadModel {
    params: BoxParams,
    spec: CycleSpec,
    characters: Vec<Character>,
    images: Vec<usize>,
}

/// Where every thread sits at one cycle point.
#[derive(Debug, Clone)]
pub struct PointView {
    pub point: CyclePoint,
    pub wall: WallConfig,
    /// 1-based level position of thread `n` at `positions[n - 1]`.
    pub positions: Vec<usize>,
    pub levels: Vec<SpLevel>,
}

impl PointView {
    /// Energy of a thread state.
    pub fn energy(&self, thread: &FockState) -> f64 {
        thread
            .occupations()
            .iter()
            .map(|&n| self.levels[self.positions[n - 1] - 1].energy)
            .sum()
    }

    /// The thread state expressed in instantaneous level indices.
    pub fn instantaneous(&self, thread: &FockState) -> FockState {
        thread.map(|n| self.positions[n - 1])
    }
}

/// Labels an instantaneous state, by sub-well modes when the wall is
/// impenetrable.
pub fn describe(state: &FockState, levels: &[SpLevel]) -> String {
    if levels
        .first()
        .is_some_and(|l| l.character != Character::Extended)
    {
        let parts: Vec<String> = state
            .occupations()
            .iter()
            .map(|&n| levels[n - 1].character.to_string())
            .collect();
        parts.join("-")
    } else {
        state.label()
    }
}

impl ThreadModel {
    pub fn new(params: &BoxParams, spec: &CycleSpec, threads: usize) -> Result<Self> {
        let perm = holonomy(params, spec, threads)?;
        let characters = infinite_union(params, spec.x0, threads)
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        Ok(ThreadModel {
            params: *params,
            spec: *spec,
            characters,
            images: perm.images,
        })
    }

    pub fn threads(&self) -> usize {
        self.images.len()
    }

    pub fn params(&self) -> &BoxParams {
        &self.params
    }

    pub fn spec(&self) -> &CycleSpec {
        &self.spec
    }

    /// Instantaneous state of a thread at the end of the cycle.
    pub fn final_state(&self, thread: &FockState) -> FockState {
        thread.map(|n| self.images[n - 1])
    }

    /// Lowest energy single-particle thread `n` reaches anywhere on the cycle.
    fn min_energy(&self, n: usize) -> f64 {
        let p = n.min(self.images[n - 1]) as f64;
        p * p * self.params.epsilon()
    }

    pub fn view(&self, point: CyclePoint) -> Result<PointView> {
        let wall = self.spec.resolve(point)?;
        let positions: Vec<usize> = match point.stage {
            Stage::I => (1..=self.threads()).collect(),
            Stage::III => self.images.clone(),
            Stage::II => {
                let mut count = 2 * self.threads() + 2;
                loop {
                    let union = infinite_union(&self.params, wall.position, count);
                    let found: Option<Vec<usize>> = self
                        .characters
                        .iter()
                        .map(|c| union.iter().position(|(_, u)| u == c).map(|i| i + 1))
                        .collect();
                    if let Some(p) = found {
                        break p;
                    }
                    count *= 2;
                }
            }
        };
        let top = positions.iter().copied().max().unwrap_or(1);
        let levels = solve_levels(&self.params, &wall, top)
            .map_err(|e| e.context(format!("stage {} at s = {}", point.stage, point.s)))?;
        Ok(PointView {
            point,
            wall,
            positions,
            levels,
        })
    }

    fn grid(&self, stage: Stage) -> Result<Vec<PointView>> {
        let n = self.spec.samples_per_stage;
        (0..=n)
            .into_par_iter()
            .map(|i| {
                self.view(CyclePoint {
                    stage,
                    s: i as f64 / n as f64,
                })
            })
            .collect()
    }

    /// Parameters in `stage` where the energies of `a` and `b` change order.
    fn crossings(&self, grid: &[PointView], a: &FockState, b: &FockState) -> Result<Vec<f64>> {
        let stage = grid[0].point.stage;
        let d: Vec<f64> = grid.iter().map(|v| v.energy(a) - v.energy(b)).collect();
        let mut out = Vec::new();
        for i in 0..d.len() - 1 {
            if d[i] == 0.0 {
                if i > 0 && d[i - 1] * d[i + 1] < 0.0 {
                    out.push(grid[i].point.s);
                }
                continue;
            }
            if d[i] * d[i + 1] >= 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (grid[i].point.s, grid[i + 1].point.s);
            let sign_lo = d[i].signum();
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = self.view(CyclePoint { stage, s: mid })?;
                let dm = v.energy(a) - v.energy(b);
                if dm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if dm.signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapClass {
    ExactCrossing,
    TunnelingSuppressed,
    SelectionForbiddenFirstOrder,
    Avoided,
}

impl GapClass {
    pub fn name(self) -> &'static str {
        match self {
            GapClass::ExactCrossing => "EXACT_CROSSING",
            GapClass::TunnelingSuppressed => "TUNNELING_SUPPRESSED",
            GapClass::SelectionForbiddenFirstOrder => "SELECTION_FORBIDDEN_FIRST_ORDER",
            GapClass::Avoided => "AVOIDED",
        }
    }
}

impl fmt::Display for GapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A degeneracy of two noninteracting Fock levels and how the interaction
/// treats it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub stage: Stage,
    pub s: f64,
    pub cycle_parameter: f64,
    pub position: f64,
    pub strength: WallStrength,
    /// Instantaneous level indices.
    pub bra: FockState,
    pub ket: FockState,
    pub bra_label: String,
    pub ket_label: String,
    /// Thread labels, when the crossing was found by following threads.
    pub bra_thread: Option<FockState>,
    pub ket_thread: Option<FockState>,
    /// `|<bra|V|ket>|` at the crossing.
    pub coupling: f64,
    pub classification: GapClass,
    /// Half the noninteracting splitting of the same pair with the wall
    /// capped at `g_cap`, for crossings at the impenetrable wall.
    pub finite_coupling: Option<f64>,
    /// Degenerate-perturbation gap `2 |V|`.
    pub gap_estimate: f64,
}

fn left_count(state: &FockState, levels: &[SpLevel]) -> usize {
    state
        .occupations()
        .iter()
        .filter(|&&n| levels[n - 1].character.well() == Some(Well::Left))
        .count()
}

/// Classifies the crossing of `bra` and `ket` (instantaneous indices) at
/// `point`.
pub fn classify_gap(
    params: &BoxParams,
    spec: &CycleSpec,
    point: CyclePoint,
    bra: &FockState,
    ket: &FockState,
    lambda: f64,
) -> Result<GapReport> {
    if bra.particles() != ket.particles() {
        return Err(Error::invalid(
            "bra and ket have different particle numbers",
        ));
    }
    if bra == ket {
        return Err(Error::invalid("a state cannot cross itself"));
    }
    let wall = spec.resolve(point)?;
    let top = bra.max_level().max(ket.max_level());
    let modes = ModeSet::uncached(params, &wall, top)?;
    let levels = modes.levels();
    let (eb, ek) = (bra.energy(&levels), ket.energy(&levels));
    let scale = eb.abs().max(ek.abs()).max(params.epsilon());
    if (eb - ek).abs() > 1e-7 * scale {
        return Err(Error::invalid(format!(
            "{bra} and {ket} are not degenerate at this point: E = {eb} vs {ek}"
        )));
    }
    let coupling = two_body_element(bra, ket, lambda, &modes)?.abs();
    let allowed = selection_rule(bra, ket);
    let floor = 1e-12 * lambda.abs() / params.length;
    let unresolved = || Error::Unresolved {
        at: point.cycle_parameter(),
        message: format!(
            "coupling of {bra} and {ket} is {coupling:.3e}, below the numerical floor"
        ),
    };
    let classification = if lambda == 0.0 {
        GapClass::ExactCrossing
    } else if wall.strength.is_infinite() {
        let same_well = contributing_terms(bra, ket).iter().any(|t| {
            let w = levels[t.modes[0] - 1].character.well();
            t.modes.iter().all(|&m| levels[m - 1].character.well() == w)
        });
        if !allowed {
            if left_count(bra, &levels) != left_count(ket, &levels) {
                GapClass::ExactCrossing
            } else {
                GapClass::SelectionForbiddenFirstOrder
            }
        } else if !same_well {
            GapClass::TunnelingSuppressed
        } else if coupling > floor {
            GapClass::Avoided
        } else {
            return Err(unresolved());
        }
    } else if !allowed {
        GapClass::SelectionForbiddenFirstOrder
    } else if coupling > floor {
        GapClass::Avoided
    } else {
        return Err(unresolved());
    };
    let finite_coupling = if wall.strength.is_infinite() {
        let capped = solve_levels(params, &WallConfig::finite(spec.g_cap, wall.position), top)?;
        Some(0.5 * (bra.energy(&capped) - ket.energy(&capped)).abs())
    } else {
        None
    };
    Ok(GapReport {
        stage: point.stage,
        s: point.s,
        cycle_parameter: point.cycle_parameter(),
        position: wall.position,
        strength: wall.strength,
        bra: bra.clone(),
        ket: ket.clone(),
        bra_label: describe(bra, &levels),
        ket_label: describe(ket, &levels),
        bra_thread: None,
        ket_thread: None,
        coupling,
        classification,
        finite_coupling,
        gap_estimate: 2.0 * coupling,
    })
}

fn classify_threads(
    model: &ThreadModel,
    point: CyclePoint,
    a: &FockState,
    b: &FockState,
    lambda: f64,
) -> Result<GapReport> {
    let view = model.view(point)?;
    let mut r = classify_gap(
        &model.params,
        &model.spec,
        point,
        &view.instantaneous(a),
        &view.instantaneous(b),
        lambda,
    )?;
    r.bra_thread = Some(a.clone());
    r.ket_thread = Some(b.clone());
    Ok(r)
}

/// Every crossing among the threads of `states`, classified and sorted along
/// the cycle.
pub fn find_gaps(
    params: &BoxParams,
    spec: &CycleSpec,
    states: &[FockState],
    lambda: f64,
) -> Result<Vec<GapReport>> {
    let top = states.iter().map(FockState::max_level).max().unwrap_or(1);
    let model = ThreadModel::new(params, spec, top)?;
    let mut out = Vec::new();
    for stage in Stage::ALL {
        let grid = model.grid(stage)?;
        let pairs: Vec<(usize, usize)> = (0..states.len())
            .flat_map(|i| (i + 1..states.len()).map(move |j| (i, j)))
            .collect();
        let found: Vec<Vec<GapReport>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                model
                    .crossings(&grid, &states[i], &states[j])?
                    .into_iter()
                    .map(|s| {
                        classify_threads(
                            &model,
                            CyclePoint { stage, s },
                            &states[i],
                            &states[j],
                            lambda,
                        )
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        out.extend(found.into_iter().flatten());
    }
    out.sort_by(|a, b| a.cycle_parameter.total_cmp(&b.cycle_parameter));
    Ok(out)
}

/// Noninteracting energies of Fock threads on the uniform cycle grid, with
/// optional first-order interaction shifts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockFlow {
    pub params: BoxParams,
    pub particles: usize,
    pub states: Vec<FockState>,
    pub points: Vec<CyclePoint>,
    pub walls: Vec<WallConfig>,
    /// `energies[state][sample]`
    pub energies: Vec<Vec<f64>>,
    /// `shifts[state][sample]`, present when a coupling was given.
    pub shifts: Option<Vec<Vec<f64>>>,
    pub final_states: Vec<FockState>,
}

impl FockFlow {
    pub fn k_bar(&self, state: usize) -> Vec<f64> {
        let unit = self.particles as f64 * self.params.epsilon();
        self.energies[state]
            .iter()
            .map(|e| (e / unit).sqrt())
            .collect()
    }
}

pub fn noninteracting_flow(
    params: &BoxParams,
    spec: &CycleSpec,
    states: &[FockState],
    lambda: Option<f64>,
) -> Result<FockFlow> {
    let Some(first) = states.first() else {
        return Err(Error::invalid("no states to follow"));
    };
    let particles = first.particles();
    if states.iter().any(|s| s.particles() != particles) {
        return Err(Error::invalid("all states need the same particle number"));
    }
    let top = states.iter().map(FockState::max_level).max().unwrap();
    let model = ThreadModel::new(params, spec, top)?;
    let points = cycle_grid(spec.samples_per_stage);
    let columns: Vec<(WallConfig, Vec<f64>, Option<Vec<f64>>)> = points
        .par_iter()
        .map(|&p| {
            let view = model.view(p)?;
            let energies = states.iter().map(|s| view.energy(s)).collect();
            let shifts = match lambda {
                Some(lambda) => {
                    let modes = ModeSet::from_levels(params, &view.wall, &view.levels)?;
                    Some(
                        states
                            .iter()
                            .map(|s| {
                                two_body_element(
                                    &view.instantaneous(s),
                                    &view.instantaneous(s),
                                    lambda,
                                    &modes,
                                )
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                None => None,
            };
            Ok((view.wall, energies, shifts))
        })
        .collect::<Result<_>>()?;
    let transpose = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..states.len())
            .map(|i| (0..points.len()).map(|j| f(i, j)).collect())
            .collect()
    };
    let energies = transpose(&|i, j| columns[j].1[i]);
    let shifts = lambda.map(|_| transpose(&|i, j| columns[j].2.as_ref().unwrap()[i]));
    Ok(FockFlow {
        params: *params,
        particles,
        states: states.to_vec(),
        points,
        walls: columns.iter().map(|c| c.0).collect(),
        energies,
        shifts,
        final_states: states.iter().map(|s| model.final_state(s)).collect(),
    })
}

/// Which crossings an adiabatic traversal follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HolonomyMode {
    /// Every crossing is passed diabatically.
    Noninteracting,
    /// Follows first-order avoided crossings only.
    WeakAdiabatic,
    /// Also follows gaps that open at second order.
    ModerateAdiabatic,
}

impl HolonomyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "noninteracting" | "none" => Ok(HolonomyMode::Noninteracting),
            "weak" | "weak-adiabatic" => Ok(HolonomyMode::WeakAdiabatic),
            "moderate" | "moderate-adiabatic" => Ok(HolonomyMode::ModerateAdiabatic),
            _ => Err(Error::invalid(format!(
                "unknown holonomy mode {s:?} (noninteracting, weak-adiabatic, moderate-adiabatic)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HolonomyMode::Noninteracting => "NONINTERACTING",
            HolonomyMode::WeakAdiabatic => "WEAK_ADIABATIC",
            HolonomyMode::ModerateAdiabatic => "MODERATE_ADIABATIC",
        }
    }

    fn follows(self, class: GapClass) -> bool {
        match self {
            HolonomyMode::Noninteracting => false,
            HolonomyMode::WeakAdiabatic => class == GapClass::Avoided,
            HolonomyMode::ModerateAdiabatic => {
                matches!(
                    class,
                    GapClass::Avoided | GapClass::SelectionForbiddenFirstOrder
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEvent {
    pub report: GapReport,
    pub followed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyEntry {
    pub initial: FockState,
    /// Instantaneous state at the end of the cycle.
    #[serde(rename = "final")]
    pub final_state: FockState,
    pub events: Vec<PathEvent>,
}

/// Maps each initial state to the state the cycle delivers it to.
pub fn manybody_holonomy(
    params: &BoxParams,
    spec: &CycleSpec,
    states: &[FockState],
    lambda: f64,
    mode: HolonomyMode,
) -> Result<Vec<HolonomyEntry>> {
    states
        .iter()
        .map(|s| follow_state(params, spec, s, lambda, mode))
        .collect()
}

fn follow_state(
    params: &BoxParams,
    spec: &CycleSpec,
    state: &FockState,
    lambda: f64,
    mode: HolonomyMode,
) -> Result<HolonomyEntry> {
    let start = ThreadModel::new(params, spec, state.max_level())?;
    if mode == HolonomyMode::Noninteracting {
        return Ok(HolonomyEntry {
            initial: state.clone(),
            final_state: start.final_state(state),
            events: Vec::new(),
        });
    }
    let mut bound = 0.0f64;
    for stage in Stage::ALL {
        for v in start.grid(stage)? {
            bound = bound.max(v.energy(state));
        }
    }
    for _ in 0..8 {
        let (entry, peak) = follow_within(params, spec, state, lambda, mode, bound)?;
        if peak <= bound {
            return Ok(entry);
        }
        bound = peak;
    }
    Err(Error::ResourceLimit(format!(
        "thread window for {state} did not settle below energy {bound}"
    )))
}

/// Threads needed so that no thread outside can reach energy `bound`.
fn thread_reach(params: &BoxParams, spec: &CycleSpec, particles: usize, bound: f64) -> usize {
    let l = params.length;
    let r = [
        spec.x1 / spec.x0,
        spec.x0 / spec.x1,
        (l - spec.x0) / (l - spec.x1),
        (l - spec.x1) / (l - spec.x0),
    ]
    .into_iter()
    .fold(1.0, f64::max);
    let room = (bound / params.epsilon() - (particles as f64 - 1.0)).max(0.0);
    (r * (room.sqrt() + 2.0)).ceil() as usize
}

fn follow_within(
    params: &BoxParams,
    spec: &CycleSpec,
    state: &FockState,
    lambda: f64,
    mode: HolonomyMode,
    bound: f64,
) -> Result<(HolonomyEntry, f64)> {
    let n = state.particles();
    let threads = thread_reach(params, spec, n, bound).max(state.max_level());
    let model = ThreadModel::new(params, spec, threads)?;
    let floor = (n as f64 - 1.0) * params.epsilon();
    let partners: Vec<FockState> = enumerate_states_limited(n, threads, usize::MAX)?
        .into_iter()
        .filter(|p| {
            let least: f64 = p.occupations().iter().map(|&m| model.min_energy(m)).sum();
            least <= bound
                && p.occupations()
                    .iter()
                    .all(|&m| model.min_energy(m) + floor <= bound)
        })
        .collect();

    let mut current = state.clone();
    let mut events = Vec::new();
    let mut peak = 0.0f64;
    for stage in Stage::ALL {
        let grid = model.grid(stage)?;
        let mut cache: HashMap<(FockState, FockState), Vec<f64>> = HashMap::new();
        let mut visited = vec![current.clone()];
        let mut from = f64::NEG_INFINITY;
        loop {
            let mut hits: Vec<(f64, FockState)> = Vec::new();
            for p in partners.iter().filter(|p| **p != current) {
                let key = (current.clone(), p.clone());
                if !cache.contains_key(&key) {
                    let found = model.crossings(&grid, &current, p)?;
                    cache.insert(key.clone(), found);
                }
                for &s in &cache[&key] {
                    if s > from + 1e-10 {
                        hits.push((s, p.clone()));
                    }
                }
            }
            let Some(first) = hits.iter().map(|h| h.0).reduce(f64::min) else {
                break;
            };
            let point = CyclePoint { stage, s: first };
            let mut followable = Vec::new();
            let mut group: Vec<&FockState> = hits
                .iter()
                .filter(|h| h.0 <= first + 1e-9)
                .map(|h| &h.1)
                .collect();
            group.sort();
            group.dedup();
            for p in group {
                let report = classify_threads(&model, point, &current, p, lambda)?;
                let follow = mode.follows(report.classification);
                if follow {
                    followable.push(p.clone());
                }
                events.push(PathEvent {
                    report,
                    followed: follow,
                });
            }
            if followable.len() > 1 {
                return Err(Error::Unresolved {
                    at: point.cycle_parameter(),
                    message: format!(
                        "{current} meets {} followable partners at once",
                        followable.len()
                    ),
                });
            }
            if let Some(next) = followable.pop() {
                current = next;
                visited.push(current.clone());
            }
            from = first;
        }
        for v in &grid {
            for t in &visited {
                peak = peak.max(v.energy(t));
            }
        }
    }
    let entry = HolonomyEntry {
        initial: state.clone(),
        final_state: model.final_state(&current),
        events,
    };
    Ok((entry, peak))
}
