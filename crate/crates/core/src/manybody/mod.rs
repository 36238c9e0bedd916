//! Bosonic Fock machinery over the single-particle adiabatic levels.
//!
//! The contact interaction is assembled in second quantization,
//!
//! ```text
//! V = (lambda / 2) sum_{abcd} I_abcd a†_a a†_b a_d a_c,   I_abcd = int psi_a psi_b psi_c psi_d
//! ```
//!
//! between unit-normalized symmetric occupation states.

mod threads;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoxParams, WallConfig};
use crate::spectrum::{overlap4_unchecked, solve_levels, wavefunction, SpLevel, SpWavefunction};

pub use threads::{
    classify_gap, find_gaps, manybody_holonomy, noninteracting_flow, FockFlow, GapClass, GapReport,
    HolonomyEntry, HolonomyMode, PathEvent, ThreadModel,
};

/// Largest basis [`enumerate_states`] builds.
pub const DEFAULT_BASIS_LIMIT: usize = 200_000;

/// `N` bosons as a sorted multiset of 1-based level indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FockState {
    occupations: Vec<usize>,
}

impl FockState {
    pub fn new(mut occupations: Vec<usize>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::invalid("a Fock state needs at least one particle"));
        }
        if occupations.contains(&0) {
            return Err(Error::invalid("level indices are 1-based"));
        }
        occupations.sort_unstable();
        Ok(FockState { occupations })
    }

    /// `|n n ... n>` with `particles` bosons.
    pub fn uniform(level: usize, particles: usize) -> Self {
        assert!(level >= 1 && particles >= 1);
        FockState {
            occupations: vec![level; particles],
        }
    }

    pub fn particles(&self) -> usize {
        self.occupations.len()
    }

    pub fn occupations(&self) -> &[usize] {
        &self.occupations
    }

    pub fn max_level(&self) -> usize {
        *self.occupations.last().unwrap()
    }

    /// `(level, multiplicity)` pairs in ascending level order.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &n in &self.occupations {
            match out.last_mut() {
                Some((m, c)) if *m == n => *c += 1,
                _ => out.push((n, 1)),
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.occupations.iter().map(|n| n.to_string()).collect();
        parts.join("-")
    }

    /// Relabels every particle and re-sorts.
    pub fn map(&self, f: impl Fn(usize) -> usize) -> FockState {
        let mut occupations: Vec<usize> = self.occupations.iter().map(|&n| f(n)).collect();
        occupations.sort_unstable();
        FockState { occupations }
    }

    /// Number of particles of `self` left unmatched by `other`.
    pub fn mismatches(&self, other: &FockState) -> usize {
        let (a, b) = (&self.occupations, &other.occupations);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() - common
    }

    /// Noninteracting energy over `levels` (index `n` is `levels[n - 1]`).
    pub fn energy(&self, levels: &[SpLevel]) -> f64 {
        self.occupations.iter().map(|&n| levels[n - 1].energy).sum()
    }

    fn box_energy_units(&self) -> usize {
        self.occupations.iter().map(|n| n * n).sum()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for FockState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('|').trim_end_matches('>');
        let parts: Vec<&str> = if s.contains(['-', ',', ' ']) {
            s.split(['-', ',', ' ']).filter(|p| !p.is_empty()).collect()
        } else {
            // compact form "113" for single-digit levels
            s.split("").filter(|p| !p.is_empty()).collect()
        };
        let occ = parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad Fock state label {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FockState::new(occ)
    }
}

impl From<FockState> for String {
    fn from(s: FockState) -> String {
        s.label()
    }
}

impl TryFrom<String> for FockState {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of `N`-boson states over `cutoff` levels.
pub fn basis_size(particles: usize, cutoff: usize) -> Option<usize> {
    if particles == 0 || cutoff == 0 {
        return Some(0);
    }
    binomial((particles + cutoff - 1) as u128, particles as u128)
        .and_then(|c| usize::try_from(c).ok())
}

pub fn enumerate_states(particles: usize, cutoff: usize) -> Result<Vec<FockState>> {
    enumerate_states_limited(particles, cutoff, DEFAULT_BASIS_LIMIT)
}

/// All multisets of size `particles` over `1..=cutoff`, ordered by empty-box
/// energy then lexicographically.
pub fn enumerate_states_limited(
    particles: usize,
    cutoff: usize,
    limit: usize,
) -> Result<Vec<FockState>> {
    if particles == 0 || cutoff == 0 {
        return Err(Error::invalid(
            "particle count and level cutoff must be at least 1",
        ));
    }
    match basis_size(particles, cutoff) {
        Some(n) if n <= limit => {}
        size => {
            return Err(Error::ResourceLimit(format!(
                "basis of {particles} bosons over {cutoff} levels has {} states, limit is {limit}",
                size.map_or("more than 2^64".to_string(), |n| n.to_string())
            )))
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![1usize; particles];
    loop {
        out.push(FockState {
            occupations: cur.clone(),
        });
        // next non-decreasing sequence
        let Some(i) = (0..particles).rev().find(|&i| cur[i] < cutoff) else {
            break;
        };
        let v = cur[i] + 1;
        for c in &mut cur[i..] {
            *c = v;
        }
    }
    out.sort_by(|a, b| {
        a.box_energy_units()
            .cmp(&b.box_energy_units())
            .then_with(|| a.occupations.cmp(&b.occupations))
    });
    Ok(out)
}

/// True when `V` can couple the two states at first order.
pub fn selection_rule(bra: &FockState, ket: &FockState) -> bool {
    bra.particles() == ket.particles() && bra.mismatches(ket) <= 2
}

/// Single-particle modes at one wall with their four-mode overlaps.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub wall: WallConfig,
    wavefunctions: Vec<SpWavefunction>,
    integrals: Option<HashMap<[usize; 4], f64>>,
}

impl ModeSet {
    /// The lowest `count` modes with every distinct overlap precomputed.
    pub fn new(params: &BoxParams, wall: &WallConfig, count: usize) -> Result<Self> {
        let mut set = Self::uncached(params, wall, count)?;
        set.fill_cache();
        Ok(set)
    }

    /// Same modes; overlaps are evaluated on demand.
    pub fn uncached(params: &BoxParams, wall: &WallConfig, count: usize) -> Result<Self> {
        let levels = solve_levels(params, wall, count)?;
        Self::from_levels(params, wall, &levels)
    }

    pub fn from_levels(params: &BoxParams, wall: &WallConfig, levels: &[SpLevel]) -> Result<Self> {
        let wavefunctions = levels
            .iter()
            .map(|l| wavefunction(l, params, wall))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeSet {
            wall: *wall,
            wavefunctions,
            integrals: None,
        })
    }

    fn fill_cache(&mut self) {
        let m = self.wavefunctions.len();
        let mut keys = Vec::new();
        for a in 1..=m {
            for b in a..=m {
                for c in b..=m {
                    for d in c..=m {
                        keys.push([a, b, c, d]);
                    }
                }
            }
        }
        let values: Vec<f64> = keys.par_iter().map(|&k| self.compute(k)).collect();
        self.integrals = Some(keys.into_iter().zip(values).collect());
    }

    fn compute(&self, k: [usize; 4]) -> f64 {
        let w = &self.wavefunctions;
        overlap4_unchecked([&w[k[0] - 1], &w[k[1] - 1], &w[k[2] - 1], &w[k[3] - 1]])
    }

    pub fn len(&self) -> usize {
        self.wavefunctions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavefunctions.is_empty()
    }

    pub fn wavefunction(&self, n: usize) -> &SpWavefunction {
        &self.wavefunctions[n - 1]
    }

    pub fn level(&self, n: usize) -> &SpLevel {
        &self.wavefunctions[n - 1].level
    }

    pub fn levels(&self) -> Vec<SpLevel> {
        self.wavefunctions.iter().map(|w| w.level).collect()
    }

    /// `I_abcd` for 1-based indices.
    pub fn integral(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let mut key = [a, b, c, d];
        key.sort_unstable();
        match &self.integrals {
            Some(map) => map[&key],
            None => self.compute(key),
        }
    }

    fn check(&self, state: &FockState) -> Result<()> {
        if state.max_level() > self.len() {
            return Err(Error::invalid(format!(
                "state {state} references level {} but only {} modes are available",
                state.max_level(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// One term `a†_a a†_b a_d a_c` connecting ket to bra, with its bosonic
/// amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub modes: [usize; 4],
    pub amplitude: f64,
}

fn remove_one(v: &mut Vec<usize>, n: usize) -> bool {
    match v.iter().position(|&m| m == n) {
        Some(i) => {
            v.remove(i);
            true
        }
        None => false,
    }
}

/// Every contributing term of `<bra| a†_a a†_b a_d a_c |ket>`.
pub(crate) fn contributing_terms(bra: &FockState, ket: &FockState) -> Vec<Term> {
    let mut out = Vec::new();
    if bra.particles() != ket.particles() || bra.mismatches(ket) > 2 {
        return out;
    }
    let counts = ket.counts();
    for &(c, nc) in &counts {
        for &(d, nd) in &counts {
            let nd_after = if c == d { nd - 1 } else { nd };
            if nd_after == 0 {
                continue;
            }
            let lowered = (nc as f64).sqrt() * (nd_after as f64).sqrt();
            let mut mid = ket.occupations.clone();
            remove_one(&mut mid, c);
            remove_one(&mut mid, d);
            let mut rest = bra.occupations.clone();
            if !mid.iter().all(|&n| remove_one(&mut rest, n)) {
                continue;
            }
            let (a, b) = (rest[0], rest[1]);
            let orders: &[(usize, usize)] = if a == b { &[(a, a)] } else { &[(a, b), (b, a)] };
            for &(a, b) in orders {
                let mb = mid.iter().filter(|&&n| n == b).count();
                let ma = mid.iter().filter(|&&n| n == a).count() + (a == b) as usize;
                let raised = ((mb + 1) as f64).sqrt() * ((ma + 1) as f64).sqrt();
                out.push(Term {
                    modes: [a, b, c, d],
                    amplitude: lowered * raised,
                });
            }
        }
    }
    out
}

/// `<bra|V|ket>` for the contact interaction of strength `lambda`.
pub fn two_body_element(
    bra: &FockState,
    ket: &FockState,
    lambda: f64,
    modes: &ModeSet,
) -> Result<f64> {
    if bra.particles() != ket.particles() {
        return Err(Error::invalid(format!(
            "particle numbers differ: {} vs {}",
            bra.particles(),
            ket.particles()
        )));
    }
    modes.check(bra)?;
    modes.check(ket)?;
    let sum: f64 = contributing_terms(bra, ket)
        .iter()
        .map(|t| t.amplitude * modes.integral(t.modes[0], t.modes[1], t.modes[2], t.modes[3]))
        .sum();
    Ok(0.5 * lambda * sum)
}

/// First-order energy shift `<s|V|s>`.
pub fn first_order_shift(state: &FockState, lambda: f64, modes: &ModeSet) -> Result<f64> {
    two_body_element(state, state, lambda, modes)
}

/// `H_ij = delta_ij E0_i + <i|V|j>` over `basis`.
pub fn fock_hamiltonian(modes: &ModeSet, lambda: f64, basis: &[FockState]) -> Result<DMatrix<f64>> {
    for s in basis {
        modes.check(s)?;
    }
    if let Some(s) = basis.iter().find(|s| s.particles() != basis[0].particles()) {
        return Err(Error::invalid(format!(
            "state {s} has a different particle number"
        )));
    }
    let levels = modes.levels();
    let n = basis.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i..n {
                if !selection_rule(&basis[i], &basis[j]) {
                    continue;
                }
                let mut v = if lambda == 0.0 {
                    0.0
                } else {
                    two_body_element(&basis[i], &basis[j], lambda, modes).unwrap()
                };
                if i == j {
                    v += basis[i].energy(&levels);
                }
                row.push((j, v));
            }
            row
        })
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn sorted_eigen(h: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// First-order estimate of how strongly a state mixes with the states a
/// truncated basis leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub cutoff: usize,
    pub probe_cutoff: usize,
    /// Largest `|<t|V|s>|` over tail states `t`.
    pub max_tail_coupling: f64,
    /// Largest `|<t|V|s>| / (E_t - E_s)`.
    pub max_tail_mixing: f64,
}

/// Probes the states that become available when the cutoff grows to
/// `probe_cutoff` (the modes must cover it).
pub fn truncation_estimate(
    state: &FockState,
    lambda: f64,
    modes: &ModeSet,
    cutoff: usize,
    probe_cutoff: usize,
) -> Result<TruncationReport> {
    modes.check(state)?;
    if probe_cutoff > modes.len() || probe_cutoff <= cutoff {
        return Err(Error::invalid(
            "probe cutoff must exceed the cutoff and fit the modes",
        ));
    }
    let levels = modes.levels();
    let e0 = state.energy(&levels);
    let mut report = TruncationReport {
        cutoff,
        probe_cutoff,
        max_tail_coupling: 0.0,
        max_tail_mixing: 0.0,
    };
    // the tail states V reaches differ from `state` in at most two particles
    let n = state.particles();
    let keep: Vec<Vec<usize>> = drop_up_to_two(state.occupations());
    for kept in keep {
        let free = n - kept.len();
        for extra in enumerate_states_limited(free, probe_cutoff, usize::MAX)? {
            if extra.max_level() <= cutoff {
                continue;
            }
            let mut occ = kept.clone();
            occ.extend_from_slice(extra.occupations());
            let t = FockState::new(occ)?;
            let v = two_body_element(&t, state, lambda, modes)?.abs();
            let de = (t.energy(&levels) - e0).abs();
            report.max_tail_coupling = report.max_tail_coupling.max(v);
            if de > 0.0 {
                report.max_tail_mixing = report.max_tail_mixing.max(v / de);
            }
        }
    }
    Ok(report)
}

fn drop_up_to_two(occ: &[usize]) -> Vec<Vec<usize>> {
    let n = occ.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v: Vec<usize> = (0..n)
                .filter(|&k| k != i && k != j)
                .map(|k| occ[k])
                .collect();
            out.push(v);
        }
        if n == 1 {
            out.push(Vec::new());
        }
    }
    if n >= 2 {
        for i in 0..n {
            let v: Vec<usize> = (0..n).filter(|&k| k != i).map(|k| occ[k]).collect();
            out.push(v);
        }
    }
    out.sort();
    out.dedup();
    out
}
