//! Game definitions for every pipeline stage, the JSON schema, and the
//! cycle-class validator.

use crate::pwa::Pwa;
use crate::rational::{Ext, Q};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type LocId = String;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid game: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Stage {
    #[serde(rename = "RPTG")]
    Rptg,
    #[serde(rename = "DwellPTG")]
    DwellPtg,
    #[serde(rename = "FRPTG")]
    Frptg,
    #[serde(rename = "ResetFreeFRPTG")]
    ResetFreeFrptg,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Rptg => "RPTG",
            Stage::DwellPtg => "DwellPTG",
            Stage::Frptg => "FRPTG",
            Stage::ResetFreeFrptg => "ResetFreeFRPTG",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Player {
    P1,
    P2,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ResetKind {
    #[serde(rename = "none")]
    NoReset,
    #[serde(rename = "full")]
    FullReset,
    #[serde(rename = "fractional")]
    FractionalReset,
}

impl ResetKind {
    pub fn is_reset(&self) -> bool {
        !matches!(self, ResetKind::NoReset)
    }

    /// Applies the reset to a valuation.
    pub fn apply(&self, x: &Q) -> Q {
        match self {
            ResetKind::NoReset => x.clone(),
            ResetKind::FullReset => Q::zero(),
            ResetKind::FractionalReset => x.fract(),
        }
    }
}

/// Interval clock constraint `lo ⋈ x ⋈ hi`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Guard {
    pub lo: Q,
    #[serde(default)]
    pub lo_strict: bool,
    pub hi: Q,
    #[serde(default)]
    pub hi_strict: bool,
}

impl Guard {
    pub fn closed(lo: Q, hi: Q) -> Guard {
        Guard { lo, lo_strict: false, hi, hi_strict: false }
    }

    pub fn point(c: Q) -> Guard {
        Guard { lo: c.clone(), lo_strict: false, hi: c, hi_strict: false }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi && !self.lo_strict && !self.hi_strict
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_strict || self.hi_strict))
    }

    pub fn contains(&self, x: &Q) -> bool {
        let lo_ok = if self.lo_strict { *x > self.lo } else { *x >= self.lo };
        let hi_ok = if self.hi_strict { *x < self.hi } else { *x <= self.hi };
        lo_ok && hi_ok
    }

    /// Closure endpoints (the interval used by the closed-envelope value
    /// computation).
    pub fn closure(&self) -> (Q, Q) {
        (self.lo.clone(), self.hi.clone())
    }

    pub fn intersect(&self, other: &Guard) -> Guard {
        let (lo, lo_strict) = if self.lo > other.lo {
            (self.lo.clone(), self.lo_strict)
        } else if other.lo > self.lo {
            (other.lo.clone(), other.lo_strict)
        } else {
            (self.lo.clone(), self.lo_strict || other.lo_strict)
        };
        let (hi, hi_strict) = if self.hi < other.hi {
            (self.hi.clone(), self.hi_strict)
        } else if other.hi < self.hi {
            (other.hi.clone(), other.hi_strict)
        } else {
            (self.hi.clone(), self.hi_strict || other.hi_strict)
        };
        Guard { lo, lo_strict, hi, hi_strict }
    }

    /// Shifts both bounds by `-k`, clamping the lower bound at 0 (a strict
    /// lower bound that clamps becomes closed).
    pub fn shift_down(&self, k: &Q) -> Guard {
        let mut lo = &self.lo - k;
        let mut lo_strict = self.lo_strict;
        if lo.is_negative() {
            lo = Q::zero();
            lo_strict = false;
        }
        Guard { lo, lo_strict, hi: &self.hi - k, hi_strict: self.hi_strict }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "x={}", self.lo);
        }
        let l = if self.lo_strict { "<" } else { "<=" };
        let h = if self.hi_strict { "<" } else { "<=" };
        write!(f, "{}{l}x{h}{}", self.lo, self.hi)
    }
}

/// Per-location bound on the time spent before leaving; `max: None` means
/// unrestricted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Dwell {
    pub min: Q,
    pub max: Option<Q>,
}

impl Dwell {
    pub fn unbounded() -> Dwell {
        Dwell { min: Q::zero(), max: None }
    }

    pub fn urgent() -> Dwell {
        Dwell { min: Q::zero(), max: Some(Q::zero()) }
    }

    pub fn window(min: Q, max: Q) -> Dwell {
        Dwell { min, max: Some(max) }
    }

    pub fn is_urgent(&self) -> bool {
        self.min.is_zero() && self.max.as_ref().map(|m| m.is_zero()).unwrap_or(false)
    }

    pub fn is_unbounded(&self) -> bool {
        self.min.is_zero() && self.max.is_none()
    }

    pub fn allows(&self, t: &Q) -> bool {
        *t >= self.min && self.max.as_ref().map(|m| t <= m).unwrap_or(true)
    }
}

#[derive(Clone, Debug)]
pub struct Location {
    pub id: LocId,
    pub owner: Player,
    pub price: i64,
    pub dwell: Dwell,
    pub is_target: bool,
    pub goal: Option<Pwa>,
    /// Reset-unrolling copy index; present only at the reset-free stage.
    pub copy: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub id: String,
    pub src: LocId,
    pub guard: Guard,
    pub reset: ResetKind,
    pub dst: LocId,
}

#[derive(Clone, Debug)]
pub struct Game {
    pub stage: Stage,
    pub delta: Q,
    pub clock_bound: u32,
    pub locations: Vec<Location>,
    pub transitions: Vec<Transition>,
    pub initial: Vec<LocId>,
}

impl Game {
    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn transitions_from<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Transition> {
        self.transitions.iter().filter(move |t| t.src == id)
    }

    pub fn price(&self, id: &str) -> Q {
        Q::int(self.location(id).map(|l| l.price).unwrap_or(0))
    }

    /// Largest |price| as a rational.
    pub fn max_abs_price(&self) -> Q {
        Q::int(self.locations.iter().map(|l| l.price.abs()).max().unwrap_or(0))
    }

    /// Largest |slope| over all goal functions.
    pub fn max_goal_slope(&self) -> Q {
        let mut m = Q::zero();
        for l in &self.locations {
            if let Some(g) = &l.goal {
                for s in g.segments() {
                    if let Some(sl) = s.slope() {
                        m = m.max(sl.abs());
                    }
                }
            }
        }
        m
    }

    fn check_structure(&self) -> Result<(), ModelError> {
        if self.locations.is_empty() {
            return Err(invalid("empty locations list"));
        }
        if self.delta <= Q::zero() || self.delta >= Q::one() {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let mut ids = BTreeSet::new();
        for l in &self.locations {
            if !ids.insert(l.id.clone()) {
                return Err(invalid(format!("duplicate location id {}", l.id)));
            }
            if l.is_target && l.goal.is_none() {
                return Err(invalid(format!("target {} lacks a goal function", l.id)));
            }
            if !l.is_target && l.goal.is_some() {
                return Err(invalid(format!("non-target {} carries a goal function", l.id)));
            }
            if l.dwell.min.is_negative()
                || l.dwell.max.as_ref().map(|m| *m < l.dwell.min).unwrap_or(false)
            {
                return Err(invalid(format!("location {} has an invalid dwell window", l.id)));
            }
        }
        let mut tids = BTreeSet::new();
        for t in &self.transitions {
            if !tids.insert(t.id.clone()) {
                return Err(invalid(format!("duplicate transition id {}", t.id)));
            }
            if !ids.contains(&t.src) {
                return Err(invalid(format!("transition {} from unknown location {}", t.id, t.src)));
            }
            if !ids.contains(&t.dst) {
                return Err(invalid(format!("transition {} to unknown location {}", t.id, t.dst)));
            }
            if self.location(&t.src).unwrap().is_target {
                return Err(invalid(format!("target {} has an outgoing transition", t.src)));
            }
            if t.guard.is_empty() {
                return Err(invalid(format!("transition {} has an empty guard", t.id)));
            }
        }
        for init in &self.initial {
            if !ids.contains(init) {
                return Err(invalid(format!("unknown initial location {init}")));
            }
        }
        if self.stage == Stage::Rptg {
            for t in &self.transitions {
                if !t.guard.lo.is_integer() || !t.guard.hi.is_integer() {
                    return Err(invalid(format!(
                        "transition {}: guard endpoints must be integers at this stage",
                        t.id
                    )));
                }
                if t.reset == ResetKind::FractionalReset {
                    return Err(invalid(format!(
                        "transition {}: fractional resets are not allowed at this stage",
                        t.id
                    )));
                }
            }
        }
        if self.stage == Stage::ResetFreeFrptg {
            for l in &self.locations {
                if l.copy.is_none() {
                    return Err(invalid(format!("location {} lacks a copy index", l.id)));
                }
            }
            for t in &self.transitions {
                let cs = self.location(&t.src).unwrap().copy.unwrap();
                let cd = self.location(&t.dst).unwrap().copy.unwrap();
                if t.reset.is_reset() {
                    if cd != cs + 1 {
                        return Err(invalid(format!(
                            "reset transition {} must cross to the next copy",
                            t.id
                        )));
                    }
                } else if cs != cd {
                    return Err(invalid(format!(
                        "transition {} crosses copies without a reset",
                        t.id
                    )));
                }
            }
        }
        Ok(())
    }
}

// ----------------------------------------------------------------------
// JSON schema
// ----------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GameFile {
    stage: Stage,
    delta: Q,
    clock_bound: u32,
    locations: Vec<LocationFile>,
    transitions: Vec<TransitionFile>,
    #[serde(default)]
    initial: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LocationFile {
    id: String,
    owner: Player,
    price: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dwell: Option<DwellFile>,
    #[serde(default)]
    target: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal_fn: Option<Vec<(Q, Ext)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    copy: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DwellFile {
    Keyword(String),
    Window { min: Q, #[serde(default)] max: Option<Q> },
}

#[derive(Serialize, Deserialize)]
struct TransitionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<Guard>,
    #[serde(default = "default_reset")]
    reset: ResetKind,
    dst: String,
}

fn default_reset() -> ResetKind {
    ResetKind::NoReset
}

/// Parses a game from its JSON encoding, normalizing guards against the
/// clock bound and padding goal functions to the domain the pipeline needs.
pub fn parse_game(text: &[u8]) -> Result<Game, ModelError> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    let file: GameFile = serde_path_to_error::deserialize(de).map_err(|e| ModelError::Parse {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })?;

    let bound = Q::int(file.clock_bound as i64);
    let goal_end = Q::int(file.clock_bound as i64 + 2);
    let mut locations = Vec::new();
    for lf in &file.locations {
        let dwell = match &lf.dwell {
            None => Dwell::unbounded(),
            Some(DwellFile::Keyword(k)) if k == "urgent" => Dwell::urgent(),
            Some(DwellFile::Keyword(k)) => {
                return Err(ModelError::Parse {
                    path: format!("locations[{}].dwell", lf.id),
                    msg: format!("unknown dwell keyword {k:?}"),
                })
            }
            Some(DwellFile::Window { min, max }) => Dwell { min: min.clone(), max: max.clone() },
        };
        let goal = match &lf.goal_fn {
            None => None,
            Some(bps) => {
                let pts: Vec<(Q, Ext)> = bps.to_vec();
                if pts.is_empty() {
                    return Err(ModelError::Parse {
                        path: format!("locations[{}].goal_fn", lf.id),
                        msg: "empty breakpoint list".into(),
                    });
                }
                if pts.iter().any(|(_, v)| *v == Ext::MinusInf) {
                    return Err(ModelError::Parse {
                        path: format!("locations[{}].goal_fn", lf.id),
                        msg: "goal functions may not take -inf".into(),
                    });
                }
                let mut f = Pwa::from_points(pts);
                let (lo, hi) = f.domain();
                if lo > Q::zero() {
                    return Err(ModelError::Parse {
                        path: format!("locations[{}].goal_fn", lf.id),
                        msg: "goal function must start at 0".into(),
                    });
                }
                if hi < goal_end {
                    // pad with the terminal value; entries past the declared
                    // domain arise from perturbation overshoot and copy
                    // re-indexing
                    let last = f.evaluate(&hi).unwrap();
                    f = f.extend(&lo, &goal_end, &last);
                }
                Some(f)
            }
        };
        locations.push(Location {
            id: lf.id.clone(),
            owner: lf.owner,
            price: lf.price,
            dwell,
            is_target: lf.target,
            goal,
            copy: lf.copy,
        });
    }

    let full = Guard::closed(Q::zero(), bound.clone());
    let mut transitions = Vec::new();
    for (i, tf) in file.transitions.iter().enumerate() {
        let guard = match &tf.guard {
            None => full.clone(),
            Some(g) => g.intersect(&full),
        };
        transitions.push(Transition {
            id: tf.id.clone().unwrap_or_else(|| format!("t{i}")),
            src: tf.src.clone(),
            guard,
            reset: tf.reset,
            dst: tf.dst.clone(),
        });
    }

    let game = Game {
        stage: file.stage,
        delta: file.delta,
        clock_bound: file.clock_bound,
        locations,
        transitions,
        initial: file.initial,
    };
    game.check_structure()?;
    Ok(game)
}

/// Serializes a game back to the JSON schema; `parse_game` of the output
/// reproduces the game exactly.
pub fn serialize_game(game: &Game) -> String {
    let file = GameFile {
        stage: game.stage,
        delta: game.delta.clone(),
        clock_bound: game.clock_bound,
        locations: game
            .locations
            .iter()
            .map(|l| LocationFile {
                id: l.id.clone(),
                owner: l.owner,
                price: l.price,
                dwell: if l.dwell.is_unbounded() {
                    None
                } else if l.dwell.is_urgent() {
                    Some(DwellFile::Keyword("urgent".into()))
                } else {
                    Some(DwellFile::Window { min: l.dwell.min.clone(), max: l.dwell.max.clone() })
                },
                target: l.is_target,
                goal_fn: l.goal.as_ref().map(|g| g.breakpoints().to_vec()),
                copy: l.copy,
            })
            .collect(),
        transitions: game
            .transitions
            .iter()
            .map(|t| TransitionFile {
                id: Some(t.id.clone()),
                src: t.src.clone(),
                guard: Some(t.guard.clone()),
                reset: t.reset,
                dst: t.dst.clone(),
            })
            .collect(),
        initial: game.initial.clone(),
    };
    serde_json::to_string_pretty(&file).expect("game serialization cannot fail")
}

// ----------------------------------------------------------------------
// validation: cycle classes
// ----------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum DiagClass {
    UnboundedClock,
    ResetFreeNegativeCycle,
    NonZenoNegativeCycle,
    BlockingCycle,
}

/// A concrete lap around a cycle: start configuration plus timed moves.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub start_loc: LocId,
    pub start_x: Q,
    pub moves: Vec<(Q, String)>,
    pub lap_cost: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub class: DiagClass,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Checks the game against the solvable class. Diagnostics of class
/// `NonZenoNegativeCycle` make the game unsolvable (negative cost can be
/// pumped forever); the others are informational.
///
/// Cycle costs are minimized over a corner-point grid (guard endpoints plus
/// small multiples of delta); for one bounded clock this grid contains the
/// vertices of every lap polytope, so the check is sound. Completeness for
/// arbitrary inputs is not claimed.
pub fn validate_game(game: &Game) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = game.check_structure() {
        out.push(Diagnostic {
            class: DiagClass::UnboundedClock,
            message: e.to_string(),
            witness: None,
        });
        return out;
    }

    let cycles = elementary_cycles(game);
    for cycle in &cycles {
        analyze_cycle(game, cycle, &mut out);
    }
    out.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    out
}

/// Elementary location cycles as transition index sequences.
fn elementary_cycles(game: &Game) -> Vec<Vec<usize>> {
    let ids: Vec<&LocId> = {
        let mut v: Vec<&LocId> = game.locations.iter().map(|l| &l.id).collect();
        v.sort();
        v
    };
    let index: BTreeMap<&LocId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let edges: Vec<(usize, usize, usize)> = game
        .transitions
        .iter()
        .enumerate()
        .map(|(ti, t)| (index[&t.src], index[&t.dst], ti))
        .collect();

    const CYCLE_CAP: usize = 20_000;
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    // rooted DFS: cycles whose smallest node is the root, visited once each
    for root in 0..ids.len() {
        let mut stack: Vec<(usize, Vec<usize>, BTreeSet<usize>)> =
            vec![(root, Vec::new(), BTreeSet::from([root]))];
        while let Some((node, path, seen)) = stack.pop() {
            for &(s, d, ti) in &edges {
                if s != node {
                    continue;
                }
                if d == root {
                    let mut c = path.clone();
                    c.push(ti);
                    cycles.push(c);
                    if cycles.len() >= CYCLE_CAP {
                        return cycles;
                    }
                } else if d > root && !seen.contains(&d) {
                    let mut p = path.clone();
                    p.push(ti);
                    let mut s2 = seen.clone();
                    s2.insert(d);
                    stack.push((d, p, s2));
                }
            }
        }
    }
    cycles
}

/// Exit-valuation candidates for corner-point lap minimization.
fn corner_candidates(game: &Game, cycle: &[usize]) -> Vec<Q> {
    let mut base: BTreeSet<Q> = BTreeSet::new();
    base.insert(Q::zero());
    base.insert(Q::int(game.clock_bound as i64));
    for &ti in cycle {
        let g = &game.transitions[ti].guard;
        base.insert(g.lo.clone());
        base.insert(g.hi.clone());
    }
    let mut out = BTreeSet::new();
    let k = cycle.len() as i64 + 1;
    let bound = Q::int(game.clock_bound as i64);
    for b in &base {
        for j in 0..=k {
            for sign in [1i64, -1] {
                let c = b + &(&Q::int(sign * j) * &game.delta);
                if c >= Q::zero() && c <= bound {
                    out.insert(c.fract());
                    out.insert(c);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Minimum delay required before leaving `loc` (stage rules plus dwell).
fn min_exit_delay(game: &Game, loc: &Location) -> Q {
    let mut m = loc.dwell.min.clone();
    if game.stage == Stage::Rptg && loc.owner == Player::P1 && m < game.delta {
        m = game.delta.clone();
    }
    m
}

fn max_exit_delay(loc: &Location) -> Option<Q> {
    loc.dwell.max.clone()
}

/// DP over corner candidates: minimizes `objective` (cost or time) for one
/// lap of the cycle. Returns (value, start valuation, exit valuations).
fn minimize_lap(
    game: &Game,
    cycle: &[usize],
    minimize_time: bool,
    starts: &[Q],
) -> Option<(Q, Q, Vec<Q>)> {
    let candidates = corner_candidates(game, cycle);
    let mut best: Option<(Q, Q, Vec<Q>)> = None;
    for start in starts {
        // layered DP: state = exit valuation index after step i
        // value[(i, c)] = min objective over prefixes ending with exit c
        let mut layer: BTreeMap<usize, (Q, Vec<Q>)> = BTreeMap::new();
        // step 0 from `start`
        for (ci, c) in candidates.iter().enumerate() {
            let ti = cycle[0];
            let t = &game.transitions[ti];
            let loc = game.location(&t.src).unwrap();
            if !t.guard.contains(c) {
                continue;
            }
            let wait = c - start;
            if wait.is_negative() || wait < min_exit_delay(game, loc) {
                continue;
            }
            if let Some(mx) = max_exit_delay(loc) {
                if wait > mx {
                    continue;
                }
            }
            let cost = if minimize_time { wait.clone() } else { &wait * &game.price(&t.src) };
            let entry = layer.entry(ci).or_insert((cost.clone(), vec![c.clone()]));
            if cost < entry.0 {
                *entry = (cost, vec![c.clone()]);
            }
        }
        for step in 1..cycle.len() {
            let ti = cycle[step];
            let t = &game.transitions[ti];
            let loc = game.location(&t.src).unwrap();
            let prev_reset = game.transitions[cycle[step - 1]].reset;
            let mut next: BTreeMap<usize, (Q, Vec<Q>)> = BTreeMap::new();
            for (pci, (pval, ppath)) in &layer {
                let entry_val = prev_reset.apply(&candidates[*pci]);
                for (ci, c) in candidates.iter().enumerate() {
                    if !t.guard.contains(c) {
                        continue;
                    }
                    let wait = c - &entry_val;
                    if wait.is_negative() || wait < min_exit_delay(game, loc) {
                        continue;
                    }
                    if let Some(mx) = max_exit_delay(loc) {
                        if wait > mx {
                            continue;
                        }
                    }
                    let step_cost =
                        if minimize_time { wait.clone() } else { &wait * &game.price(&t.src) };
                    let total = pval + &step_cost;
                    let better = match next.get(&ci) {
                        None => true,
                        Some((v, _)) => total < *v,
                    };
                    if better {
                        let mut path = ppath.clone();
                        path.push(c.clone());
                        next.insert(ci, (total, path));
                    }
                }
            }
            layer = next;
            if layer.is_empty() {
                break;
            }
        }
        for (_, (v, path)) in &layer {
            let better = match &best {
                None => true,
                Some((bv, _, _)) => *v < *bv,
            };
            if better {
                best = Some((v.clone(), start.clone(), path.clone()));
            }
        }
    }
    best
}

fn analyze_cycle(game: &Game, cycle: &[usize], out: &mut Vec<Diagnostic>) {
    let has_reset = cycle.iter().any(|&ti| game.transitions[ti].reset.is_reset());
    let has_point = cycle.iter().any(|&ti| game.transitions[ti].guard.is_point());
    let locs: Vec<String> =
        cycle.iter().map(|&ti| game.transitions[ti].src.clone()).collect();
    let name = locs.join(" -> ");

    let starts: Vec<Q> = if has_reset {
        // the canonical lap starts right after the cycle's last reset; 0 and
        // candidate fractional parts cover full and fractional resets
        let mut s = vec![Q::zero()];
        if cycle.iter().any(|&ti| game.transitions[ti].reset == ResetKind::FractionalReset) {
            s.extend(corner_candidates(game, cycle).into_iter().filter(|c| *c < Q::one()));
        }
        s
    } else {
        corner_candidates(game, cycle)
    };

    let min_cost = minimize_lap(game, cycle, false, &starts);
    let min_time = minimize_lap(game, cycle, true, &starts);

    match (&min_cost, &min_time) {
        (Some((cost, start, exits)), _) if cost.is_negative() => {
            let witness = build_witness(game, cycle, start, exits);
            if has_reset {
                out.push(Diagnostic {
                    class: DiagClass::NonZenoNegativeCycle,
                    message: format!(
                        "cycle {name} resets the clock and a lap can accumulate cost {cost}"
                    ),
                    witness: Some(witness),
                });
            } else if !has_point {
                out.push(Diagnostic {
                    class: DiagClass::ResetFreeNegativeCycle,
                    message: format!(
                        "reset-free cycle {name} without point constraints has first-lap cost {cost}"
                    ),
                    witness: Some(witness),
                });
            }
        }
        _ => {}
    }

    match &min_time {
        None => out.push(Diagnostic {
            class: DiagClass::BlockingCycle,
            message: format!("cycle {name} cannot complete a lap"),
            witness: None,
        }),
        Some((t, _, _)) if !has_reset && !t.is_zero() => out.push(Diagnostic {
            class: DiagClass::BlockingCycle,
            message: format!(
                "reset-free cycle {name} needs {t} time per lap and cannot repeat forever"
            ),
            witness: None,
        }),
        _ => {}
    }
}

fn build_witness(game: &Game, cycle: &[usize], start: &Q, exits: &[Q]) -> Witness {
    let mut moves = Vec::new();
    let mut x = start.clone();
    let mut cost = Q::zero();
    for (i, &ti) in cycle.iter().enumerate() {
        let t = &game.transitions[ti];
        let wait = &exits[i] - &x;
        cost += &wait * &game.price(&t.src);
        moves.push((wait, t.id.clone()));
        x = t.reset.apply(&exits[i]);
    }
    Witness {
        start_loc: game.transitions[cycle[0]].src.clone(),
        start_x: start.clone(),
        moves,
        lap_cost: cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn two_loc_cycle(prices: (i64, i64), reset: bool) -> Game {
        let text = format!(
            r#"{{
                "stage": "RPTG",
                "delta": "1/8",
                "clock_bound": 1,
                "locations": [
                    {{"id": "C1", "owner": "P2", "price": {}}},
                    {{"id": "C2", "owner": "P2", "price": {}}},
                    {{"id": "T", "owner": "P2", "price": 0, "target": true, "goal_fn": [[0, 0], [1, 0]]}}
                ],
                "transitions": [
                    {{"src": "C1", "guard": {{"lo": 0, "hi": 1}}, "dst": "C2"}},
                    {{"src": "C2", "guard": {{"lo": 1, "hi": 1}}, "reset": "{}", "dst": "C1"}},
                    {{"src": "C1", "guard": {{"lo": 0, "hi": 1}}, "dst": "T"}}
                ],
                "initial": ["C1"]
            }}"#,
            prices.0,
            prices.1,
            if reset { "full" } else { "none" }
        );
        parse_game(text.as_bytes()).unwrap()
    }

    #[test]
    fn positive_cycle_passes() {
        let g = two_loc_cycle((1, 1), true);
        let diags = validate_game(&g);
        assert!(
            !diags.iter().any(|d| d.class == DiagClass::NonZenoNegativeCycle),
            "{diags:?}"
        );
    }

    #[test]
    fn negative_reset_cycle_rejected_with_witness() {
        let g = two_loc_cycle((-1, -1), true);
        let diags = validate_game(&g);
        let d = diags
            .iter()
            .find(|d| d.class == DiagClass::NonZenoNegativeCycle)
            .expect("negative cycle diagnostic");
        let w = d.witness.as_ref().unwrap();
        assert!(w.lap_cost.is_negative());
        assert_eq!(w.moves.len(), 2);
    }

    #[test]
    fn acyclic_game_is_clean() {
        let text = r#"{
            "stage": "DwellPTG",
            "delta": "1/8",
            "clock_bound": 1,
            "locations": [
                {"id": "A", "owner": "P1", "price": 2},
                {"id": "B", "owner": "P2", "price": -1},
                {"id": "T", "owner": "P2", "price": 0, "target": true, "goal_fn": [[0, 3], ["1/2", 0], [1, 0]]}
            ],
            "transitions": [
                {"src": "A", "dst": "B"},
                {"src": "B", "dst": "T"}
            ],
            "initial": ["A"]
        }"#;
        let g = parse_game(text.as_bytes()).unwrap();
        assert!(validate_game(&g).is_empty());
    }

    #[test]
    fn parse_rejects_bad_inputs() {
        let empty = r#"{"stage": "RPTG", "delta": "1/8", "clock_bound": 1,
                        "locations": [], "transitions": [], "initial": []}"#;
        assert!(parse_game(empty.as_bytes()).is_err());

        let noninteger = r#"{"stage": "RPTG", "delta": "1/8", "clock_bound": 1,
            "locations": [{"id": "A", "owner": "P1", "price": 0},
                          {"id": "T", "owner": "P2", "price": 0, "target": true, "goal_fn": [[0,0],[1,0]]}],
            "transitions": [{"src": "A", "guard": {"lo": "1/2", "hi": 1}, "dst": "T"}],
            "initial": ["A"]}"#;
        assert!(parse_game(noninteger.as_bytes()).is_err());

        let bad_path = r#"{"stage": "RPTG", "delta": "1/8", "clock_bound": 1,
            "locations": [{"id": "A", "owner": "P3", "price": 0}],
            "transitions": [], "initial": []}"#;
        match parse_game(bad_path.as_bytes()) {
            Err(ModelError::Parse { path, .. }) => assert!(path.contains("locations"), "{path}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_exact() {
        let g = two_loc_cycle((1, -2), true);
        let text = serialize_game(&g);
        let g2 = parse_game(text.as_bytes()).unwrap();
        assert_eq!(serialize_game(&g2), text);
        assert_eq!(g2.delta, Q::new(1, 8));
    }

    #[test]
    fn guard_shift_clamps_at_zero() {
        let g = Guard { lo: Q::zero(), lo_strict: true, hi: Q::int(2), hi_strict: true };
        let s = g.shift_down(&Q::new(1, 8));
        assert_eq!(s.lo, Q::zero());
        assert!(!s.lo_strict);
        assert_eq!(s.hi, Q::new(15, 8));
        assert!(s.hi_strict);
    }

    #[test]
    fn validate_is_deterministic() {
        let g = two_loc_cycle((-1, -1), true);
        let a = format!("{:?}", validate_game(&g));
        let b = format!("{:?}", validate_game(&g));
        assert_eq!(a, b);
    }
}
