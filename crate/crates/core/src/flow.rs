//! Level tracking around the cycle and the holonomy it induces.
//!
//! Inside stages I and III the wall strength changes monotonically and the
//! levels never cross, so identity is the sorted index. In stage II the wall
//! is impenetrable and every level is a sub-well mode whose character is
//! exact; identity follows the character. Crossings happen only in stage II,
//! where a left mode `j` and a right mode `j'` meet at `X* = j L / (j + j')`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoxParams, CyclePoint, CycleSpec, Stage, WallConfig};
use crate::spectrum::{infinite_union, is_tie, solve_levels, Character, SpLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub point: CyclePoint,
    pub wall: WallConfig,
    pub levels: Vec<SpLevel>,
}

/// Sampled single-particle levels along the cycle.
///
/// `connectivity[i][a]` is the position at sample `i + 1` of the level found
/// at position `a` of sample `i` (0-based).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTable {
    pub params: BoxParams,
    pub spec: CycleSpec,
    pub levels_per_sample: usize,
    pub samples: Vec<FlowSample>,
    pub connectivity: Vec<Vec<usize>>,
    /// Stage-II boundaries where a mode left the tracked window and the
    /// leftovers were paired by order.
    pub window_exchanges: usize,
}

impl FlowTable {
    pub fn cycle_parameters(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.point.cycle_parameter())
            .collect()
    }

    /// 0-based position of a thread (identified by its starting position)
    /// at every sample.
    pub fn thread_positions(&self, thread: usize) -> Vec<usize> {
        let mut pos = thread;
        let mut out = Vec::with_capacity(self.samples.len());
        out.push(pos);
        for map in &self.connectivity {
            pos = map[pos];
            out.push(pos);
        }
        out
    }

    pub fn thread_energy(&self, thread: usize) -> Vec<f64> {
        self.thread_positions(thread)
            .into_iter()
            .zip(&self.samples)
            .map(|(p, s)| s.levels[p].energy)
            .collect()
    }

    pub fn thread_k_bar(&self, thread: usize) -> Vec<f64> {
        self.thread_positions(thread)
            .into_iter()
            .zip(&self.samples)
            .map(|(p, s)| s.levels[p].k_bar(&self.params))
            .collect()
    }

    /// Final 1-based index of each thread.
    pub fn endpoint_map(&self) -> Vec<usize> {
        (0..self.levels_per_sample)
            .map(|t| self.thread_positions(t).last().copied().unwrap_or(t) + 1)
            .collect()
    }

    /// Largest change of `k_bar` between adjacent samples along any thread.
    pub fn max_thread_jump(&self) -> f64 {
        (0..self.levels_per_sample)
            .map(|t| {
                self.thread_k_bar(t)
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub samples_per_stage: usize,
    /// Refine until no thread moves by more than this in `k_bar`.
    pub max_jump: Option<f64>,
    pub max_passes: usize,
}

impl FlowOptions {
    pub fn from_spec(spec: &CycleSpec) -> Self {
        FlowOptions {
            samples_per_stage: spec.samples_per_stage,
            max_jump: None,
            max_passes: 40,
        }
    }
}

/// Uniform sampling of the three stages: `s = i/S` for `i = 0..=S` in stage
/// I and `i = 1..=S` in stages II and III, so boundaries appear once.
pub fn cycle_grid(samples_per_stage: usize) -> Vec<CyclePoint> {
    let n = samples_per_stage;
    let mut pts = Vec::with_capacity(3 * n + 1);
    for stage in Stage::ALL {
        let first = if stage == Stage::I { 0 } else { 1 };
        for i in first..=n {
            pts.push(CyclePoint {
                stage,
                s: i as f64 / n as f64,
            });
        }
    }
    pts
}

pub fn sample_flow(params: &BoxParams, spec: &CycleSpec, m: usize) -> Result<FlowTable> {
    sample_flow_with(params, spec, m, FlowOptions::from_spec(spec))
}

pub fn sample_flow_with(
    params: &BoxParams,
    spec: &CycleSpec,
    m: usize,
    opts: FlowOptions,
) -> Result<FlowTable> {
    spec.validate(params)?;
    if m == 0 {
        return Err(Error::invalid("level count must be at least 1"));
    }
    if opts.samples_per_stage == 0 {
        return Err(Error::invalid("samples_per_stage must be positive"));
    }
    let mut samples = solve_points(params, spec, m, &cycle_grid(opts.samples_per_stage))?;

    for _ in 0..opts.max_passes {
        let mut inserts = Vec::new();
        for i in 0..samples.len() - 1 {
            let (a, b) = (&samples[i], &samples[i + 1]);
            let refuse = link(a, b).is_none();
            let too_far = opts
                .max_jump
                .is_some_and(|limit| max_jump(params, a, b, link(a, b).as_deref()) > limit);
            if refuse || too_far {
                inserts.push((i, midpoint(a.point, b.point)));
            }
        }
        if inserts.is_empty() {
            break;
        }
        let points: Vec<CyclePoint> = inserts.iter().map(|&(_, p)| p).collect();
        let fresh = solve_points(params, spec, m, &points)?;
        for ((i, _), sample) in inserts.into_iter().zip(fresh).rev() {
            samples.insert(i + 1, sample);
        }
    }

    let mut connectivity = Vec::with_capacity(samples.len() - 1);
    let mut window_exchanges = 0;
    for w in samples.windows(2) {
        let (map, exchanged) = match link(&w[0], &w[1]) {
            Some(map) => (map, false),
            None => {
                return Err(Error::Ambiguous(format!(
                    "level tracking refused between cycle parameters {:.12} and {:.12}",
                    w[0].point.cycle_parameter(),
                    w[1].point.cycle_parameter()
                )))
            }
        };
        let exchanged = exchanged || character_window_changed(&w[0], &w[1]);
        window_exchanges += exchanged as usize;
        connectivity.push(map);
    }

    Ok(FlowTable {
        params: *params,
        spec: *spec,
        levels_per_sample: m,
        samples,
        connectivity,
        window_exchanges,
    })
}

fn solve_points(
    params: &BoxParams,
    spec: &CycleSpec,
    m: usize,
    points: &[CyclePoint],
) -> Result<Vec<FlowSample>> {
    points
        .par_iter()
        .map(|&point| {
            let wall = spec.resolve(point)?;
            let levels = solve_levels(params, &wall, m)
                .map_err(|e| e.context(format!("stage {} at s = {}", point.stage, point.s)))?;
            Ok(FlowSample {
                point,
                wall,
                levels,
            })
        })
        .collect()
}

fn midpoint(a: CyclePoint, b: CyclePoint) -> CyclePoint {
    if a.stage == b.stage {
        CyclePoint {
            stage: a.stage,
            s: 0.5 * (a.s + b.s),
        }
    } else {
        CyclePoint {
            stage: b.stage,
            s: 0.5 * b.s,
        }
    }
}

fn is_walled(sample: &FlowSample) -> bool {
    sample.wall.strength.is_infinite()
}

/// Connectivity between adjacent samples, or `None` when nearest-neighbour
/// tracking refuses (a level moved by more than half the local spacing).
fn link(a: &FlowSample, b: &FlowSample) -> Option<Vec<usize>> {
    if is_walled(a) && is_walled(b) {
        return Some(match_characters(&a.levels, &b.levels));
    }
    let m = a.levels.len();
    for n in 0..m {
        let jump = (b.levels[n].k - a.levels[n].k).abs();
        let spacing = [a, b]
            .iter()
            .filter(|s| !is_walled(s))
            .map(|s| local_spacing(&s.levels, n))
            .fold(f64::INFINITY, f64::min);
        if jump > 0.5 * spacing {
            return None;
        }
    }
    Some((0..m).collect())
}

fn local_spacing(levels: &[SpLevel], n: usize) -> f64 {
    let mut gap = f64::INFINITY;
    if n > 0 {
        gap = gap.min(levels[n].k - levels[n - 1].k);
    }
    if n + 1 < levels.len() {
        gap = gap.min(levels[n + 1].k - levels[n].k);
    }
    gap
}

fn match_characters(a: &[SpLevel], b: &[SpLevel]) -> Vec<usize> {
    let mut map = vec![usize::MAX; a.len()];
    let mut used = vec![false; b.len()];
    for (i, la) in a.iter().enumerate() {
        if let Some(j) = b.iter().position(|lb| lb.character == la.character) {
            map[i] = j;
            used[j] = true;
        }
    }
    let mut free = (0..b.len()).filter(|&j| !used[j]);
    for slot in map.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = free.next().expect("bijection on equal-sized windows");
    }
    map
}

fn character_window_changed(a: &FlowSample, b: &FlowSample) -> bool {
    is_walled(a)
        && is_walled(b)
        && a.levels
            .iter()
            .any(|la| !b.levels.iter().any(|lb| lb.character == la.character))
}

fn max_jump(params: &BoxParams, a: &FlowSample, b: &FlowSample, map: Option<&[usize]>) -> f64 {
    let identity: Vec<usize> = (0..a.levels.len()).collect();
    let map = map.unwrap_or(&identity);
    a.levels
        .iter()
        .zip(map)
        .map(|(la, &j)| (b.levels[j].k_bar(params) - la.k_bar(params)).abs())
        .fold(0.0, f64::max)
}

/// A stage-II degeneracy between left mode `j_left` and right mode `j_right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub stage: Stage,
    pub x_star: f64,
    /// `X* / L` as the exact fraction `j_left / (j_left + j_right)`.
    pub ratio: (u32, u32),
    pub j_left: u32,
    pub j_right: u32,
    /// Exact at the impenetrable wall; any finite wall turns it into an
    /// avoided crossing.
    pub exact: bool,
    /// 1-based sorted positions of the pair just before it meets.
    pub positions: (usize, usize),
}

impl CrossingEvent {
    fn new(params: &BoxParams, j_left: u32, j_right: u32) -> Self {
        let den = j_left + j_right;
        CrossingEvent {
            stage: Stage::II,
            x_star: params.length * j_left as f64 / den as f64,
            ratio: (j_left, den),
            j_left,
            j_right,
            exact: true,
            positions: (den as usize - 1, den as usize),
        }
    }

    pub fn pair(&self) -> (Character, Character) {
        (Character::Left(self.j_left), Character::Right(self.j_right))
    }

    fn cmp_position(&self, other: &Self) -> Ordering {
        let a = self.ratio.0 as u64 * other.ratio.1 as u64;
        let b = other.ratio.0 as u64 * self.ratio.1 as u64;
        a.cmp(&b).then(self.j_left.cmp(&other.j_left))
    }
}

/// Whether `j L / den` lies strictly inside `(lo, hi)`.
fn strictly_inside(params: &BoxParams, j: u32, den: u32, lo: f64, hi: f64) -> bool {
    let num = j as f64 * params.length;
    let den = den as f64;
    den * lo < num && num < den * hi
}

fn lands_on(params: &BoxParams, j: u32, den: u32, x: f64) -> bool {
    j as f64 * params.length == den as f64 * x
}

fn events_between(params: &BoxParams, lo: f64, hi: f64, max_sum: usize) -> Vec<CrossingEvent> {
    let mut out = Vec::new();
    for sum in 2..=max_sum as u32 {
        for j in 1..sum {
            if strictly_inside(params, j, sum, lo, hi) {
                out.push(CrossingEvent::new(params, j, sum - j));
            }
        }
    }
    out.sort_by(|a, b| a.cmp_position(b));
    out
}

/// Stage-II crossings among the lowest `m` levels, sorted by `X*`.
pub fn crossing_catalog(params: &BoxParams, spec: &CycleSpec, m: usize) -> Vec<CrossingEvent> {
    let lo = spec.x0.min(spec.x1);
    let hi = spec.x0.max(spec.x1);
    events_between(params, lo, hi, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomyStep {
    pub event: CrossingEvent,
    /// Sorted positions exchanged by this crossing.
    pub positions: (usize, usize),
}

/// Initial-to-final level map of one traversal of the cycle.
///
/// `images[n - 1]` is the final 1-based index of the level that started at
/// index `n`. When the lowest `m` levels do not map onto themselves some
/// images exceed `m` and the map is not a permutation of `{1..m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyPermutation {
    pub images: Vec<usize>,
    pub steps: Vec<HolonomyStep>,
}

impl HolonomyPermutation {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn apply(&self, n: usize) -> Option<usize> {
        n.checked_sub(1).and_then(|i| self.images.get(i).copied())
    }

    /// True iff the images are a permutation of `{1..m}`.
    pub fn is_closed(&self) -> bool {
        let m = self.images.len();
        let mut seen = vec![false; m];
        for &i in &self.images {
            if i == 0 || i > m || seen[i - 1] {
                return false;
            }
            seen[i - 1] = true;
        }
        true
    }

    /// `then ∘ self`, defined where `then` covers every image of `self`.
    pub fn then(&self, then: &HolonomyPermutation) -> Option<Vec<usize>> {
        self.images.iter().map(|&i| then.apply(i)).collect()
    }

    pub fn inverse(&self) -> Option<Vec<usize>> {
        if !self.is_closed() {
            return None;
        }
        let mut inv = vec![0; self.images.len()];
        for (n, &i) in self.images.iter().enumerate() {
            inv[i - 1] = n + 1;
        }
        Some(inv)
    }

    /// `+1` or `-1` for a closed permutation.
    pub fn parity(&self) -> Option<i8> {
        if !self.is_closed() {
            return None;
        }
        let mut seen = vec![false; self.images.len()];
        let mut sign = 1i8;
        for start in 0..self.images.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i] - 1;
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        Some(sign)
    }
}

/// 1-based sorted position of a sub-well mode at wall position `x`.
fn position_in_union(params: &BoxParams, x: f64, ch: Character) -> Result<usize> {
    let k = ch
        .wavenumber(params, x)
        .ok_or_else(|| Error::invalid("extended levels have no impenetrable-wall position"))?;
    let mut below = 0usize;
    for side in [Character::Left(1), Character::Right(1)] {
        let mut j = 1u32;
        loop {
            let other = match side {
                Character::Left(_) => Character::Left(j),
                _ => Character::Right(j),
            };
            let ko = other.wavenumber(params, x).unwrap();
            if other != ch && is_tie(ko, k) {
                return Err(Error::Ambiguous(format!(
                    "{ch} is degenerate with {other} at X = {x}"
                )));
            }
            if ko >= k {
                break;
            }
            below += 1;
            j += 1;
        }
    }
    Ok(below + 1)
}

/// Holonomy of the lowest `m` levels, from the reordering of the
/// impenetrable-wall spectrum between `x0` and `x1`.
pub fn holonomy(params: &BoxParams, spec: &CycleSpec, m: usize) -> Result<HolonomyPermutation> {
    spec.validate(params)?;
    if m == 0 {
        return Err(Error::invalid("level count must be at least 1"));
    }
    let start = infinite_union(params, spec.x0, m + 1);
    for i in 0..m {
        if is_tie(start[i].0, start[i + 1].0) {
            return Err(Error::Ambiguous(format!(
                "levels {} and {} cross exactly at the stage boundary x0 = {}",
                i + 1,
                i + 2,
                spec.x0
            )));
        }
    }
    let images = start[..m]
        .iter()
        .map(|&(_, ch)| position_in_union(params, spec.x1, ch))
        .collect::<Result<Vec<_>>>()?;

    let reach = images.iter().copied().max().unwrap_or(0).max(m);
    let lo = spec.x0.min(spec.x1);
    let hi = spec.x0.max(spec.x1);
    for sum in 2..=reach as u32 {
        for j in 1..sum {
            if lands_on(params, j, sum, spec.x0) || lands_on(params, j, sum, spec.x1) {
                return Err(Error::Ambiguous(format!(
                    "L{j}/R{} crossing sits on a stage boundary",
                    sum - j
                )));
            }
        }
    }
    let mut events = events_between(params, lo, hi, reach);
    if spec.x1 < spec.x0 {
        events.reverse();
    }
    let steps = events
        .into_iter()
        .map(|event| HolonomyStep {
            event,
            positions: event.positions,
        })
        .collect();
    Ok(HolonomyPermutation { images, steps })
}

/// Replays the transpositions of a holonomy on positions `1..=reach`.
pub fn replay_steps(perm: &HolonomyPermutation) -> Vec<usize> {
    let reach = perm
        .steps
        .iter()
        .map(|s| s.positions.1)
        .chain(perm.images.iter().copied())
        .max()
        .unwrap_or(0)
        .max(perm.images.len());
    // arrangement[p] = thread currently at position p + 1
    let mut arrangement: Vec<usize> = (0..reach).collect();
    for step in &perm.steps {
        arrangement.swap(step.positions.0 - 1, step.positions.1 - 1);
    }
    let mut images = vec![0; perm.images.len()];
    for (p, &thread) in arrangement.iter().enumerate() {
        if thread < images.len() {
            images[thread] = p + 1;
        }
    }
    images
}
