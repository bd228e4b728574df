//! The three cost-preserving game rewrites and the maps that pull plays,
//! strategies, and value functions back to the original coordinates.
//!
//! 1. Robust game -> dwell-time game: every controller edge is replaced by a
//!    gadget with an urgent hub and two bounded-dwell branches that realize
//!    the perturbation range; guards shift down by delta.
//! 2. Dwell-time game -> banded game: one copy per integer clock band keeps
//!    the local clock inside `[0, 1+delta]`; full-reset wrap edges cross
//!    bands at integers, and bounded-dwell locations escape across a band
//!    via fractional resets into an urgent escort.
//! 3. Banded game -> reset-free unrolling: one copy per reset budget; reset
//!    edges cross to the next copy, and the budget's end feeds a sink whose
//!    cost is `+inf`.

use crate::model::{
    Dwell, Game, Guard, LocId, Location, Player, ResetKind, Stage, Transition,
};
use crate::pwa::Pwa;
use crate::rational::{Ext, Q};
use crate::semantics::{PlaySpec, TimedMove};
use crate::strategy::{Move, Row, Strategy};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("transformation expects stage {0}, got {1}")]
    WrongStage(Stage, Stage),
    #[error("delta must satisfy 0 < delta < 1, got {0}")]
    BadDelta(Q),
    #[error("configuration ({0}, {1}) outside the map's domain")]
    OutsideMap(LocId, Q),
    #[error("cannot map play: {0}")]
    PlayMap(String),
}

/// Total mapping between configurations of adjacent pipeline stages.
#[derive(Clone, Debug)]
pub struct StateMap {
    pub from: Stage,
    pub to: Stage,
    kind: MapKind,
}

#[derive(Clone, Debug)]
enum MapKind {
    /// Stage 1: original locations map identically; gadget internals have no
    /// preimage.
    DwellGadgets { delta: Q, original_p1_edges: BTreeSet<String> },
    /// Stage 2: `(l, x) -> (l@b, x - b)` for the band `b = floor(x)`.
    Bands { bound: u32 },
    /// Stage 3: `(l, x) -> (l$0, x)`; plays advance one copy per reset.
    Unroll { copies: u32 },
}

fn band_id(l: &str, b: i64) -> String {
    format!("{l}@{b}")
}

fn escort_id(l: &str, b: i64) -> String {
    format!("{l}@{b}.z")
}

fn copy_id(l: &str, j: u32) -> String {
    format!("{l}${j}")
}

pub const SINK_ID: &str = "S";

// ----------------------------------------------------------------------
// transformation 1: robust -> dwell-time
// ----------------------------------------------------------------------

/// Shifts a guard for the gadget entry: points move down by delta (clamped
/// at zero), interval bounds shift down componentwise.
fn entry_guard(g: &Guard, delta: &Q) -> Guard {
    if g.is_point() {
        let c = (&g.lo - delta).max(Q::zero());
        return Guard::point(c);
    }
    g.shift_down(delta)
}

pub fn to_dwell_ptg(game: &Game) -> Result<(Game, StateMap), TransformError> {
    if game.stage != Stage::Rptg {
        return Err(TransformError::WrongStage(Stage::Rptg, game.stage));
    }
    let delta = game.delta.clone();
    if delta <= Q::zero() || delta >= Q::one() {
        return Err(TransformError::BadDelta(delta));
    }
    let wide = Guard::closed(Q::zero(), Q::int(game.clock_bound as i64 + 1));

    let mut locations = game.locations.clone();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut original_p1_edges = BTreeSet::new();

    for t in &game.transitions {
        let src_owner = game.location(&t.src).expect("validated").owner;
        if src_owner == Player::P2 {
            transitions.push(t.clone());
            continue;
        }
        original_p1_edges.insert(t.id.clone());
        let price = game.location(&t.src).unwrap().price;
        let hub = format!("{}|{}", t.src, t.id);
        let minus = format!("{hub}-");
        let plus = format!("{hub}+");
        locations.push(Location {
            id: hub.clone(),
            owner: Player::P2,
            price,
            dwell: Dwell::urgent(),
            is_target: false,
            goal: None,
            copy: None,
        });
        locations.push(Location {
            id: minus.clone(),
            owner: Player::P2,
            price,
            dwell: Dwell::window(Q::zero(), delta.clone()),
            is_target: false,
            goal: None,
            copy: None,
        });
        locations.push(Location {
            id: plus.clone(),
            owner: Player::P2,
            price,
            dwell: Dwell::window(delta.clone(), &delta + &delta),
            is_target: false,
            goal: None,
            copy: None,
        });
        transitions.push(Transition {
            id: format!("{}.in", t.id),
            src: t.src.clone(),
            guard: entry_guard(&t.guard, &delta),
            reset: ResetKind::NoReset,
            dst: hub.clone(),
        });
        transitions.push(Transition {
            id: format!("{}.lo", t.id),
            src: hub.clone(),
            guard: wide.clone(),
            reset: ResetKind::NoReset,
            dst: minus.clone(),
        });
        transitions.push(Transition {
            id: format!("{}.hi", t.id),
            src: hub.clone(),
            guard: wide.clone(),
            reset: ResetKind::NoReset,
            dst: plus.clone(),
        });
        transitions.push(Transition {
            id: format!("{}.lo.out", t.id),
            src: minus,
            guard: wide.clone(),
            reset: t.reset,
            dst: t.dst.clone(),
        });
        transitions.push(Transition {
            id: format!("{}.hi.out", t.id),
            src: plus,
            guard: wide.clone(),
            reset: t.reset,
            dst: t.dst.clone(),
        });
    }

    let out = Game {
        stage: Stage::DwellPtg,
        delta: delta.clone(),
        clock_bound: game.clock_bound,
        locations,
        transitions,
        initial: game.initial.clone(),
    };
    Ok((out, StateMap { from: Stage::Rptg, to: Stage::DwellPtg, kind: MapKind::DwellGadgets { delta, original_p1_edges } }))
}

// ----------------------------------------------------------------------
// transformation 2: dwell-time -> banded with fractional resets
// ----------------------------------------------------------------------

/// Slice of a goal function for band `b`: `x -> goal(x + b)` on `[0, 2]`,
/// padding with the terminal value where the declared function ends early.
fn slice_goal(goal: &Pwa, b: i64) -> Pwa {
    let lo = Q::int(b);
    let hi = &lo + &Q::int(2);
    let (_, end) = goal.domain();
    let cap = hi.clone().min(end);
    let sliced = goal.restrict(&lo, &cap).expect("goal covers every band");
    let pts = sliced
        .breakpoints()
        .iter()
        .map(|(x, v)| (x - &lo, v.clone()))
        .collect();
    let mut out = Pwa::from_points(pts);
    for (x, v, tag) in sliced.overrides() {
        out = out.with_override(x - &lo, v.clone(), tag.clone());
    }
    let (olo, ohi) = out.domain();
    if ohi < Q::int(2) {
        let last = out.evaluate(&ohi).unwrap();
        out = out.extend(&olo, &Q::int(2), &last);
    }
    out
}

pub fn to_frptg(game: &Game) -> Result<(Game, StateMap), TransformError> {
    if game.stage != Stage::DwellPtg {
        return Err(TransformError::WrongStage(Stage::DwellPtg, game.stage));
    }
    let m = game.clock_bound as i64;
    let band_guard = Guard { lo: Q::zero(), lo_strict: false, hi: Q::one(), hi_strict: true };
    let frac_guard = Guard::closed(Q::one(), Q::int(2));
    let wrap_guard = Guard::point(Q::one());

    let mut locations: Vec<Location> = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();

    // copies of every location per band, goal functions re-indexed
    for l in &game.locations {
        for b in 0..=m {
            locations.push(Location {
                id: band_id(&l.id, b),
                owner: l.owner,
                price: l.price,
                dwell: l.dwell.clone(),
                is_target: l.is_target,
                goal: l.goal.as_ref().map(|g| slice_goal(g, b)),
                copy: None,
            });
        }
        // urgent escorts carry a bounded-dwell wait across a band edge
        if needs_escort(l) {
            for b in 1..=m {
                locations.push(Location {
                    id: escort_id(&l.id, b),
                    owner: l.owner,
                    price: l.price,
                    dwell: Dwell::urgent(),
                    is_target: false,
                    goal: None,
                    copy: None,
                });
            }
        }
    }

    // banded images of every edge (from copies and escorts alike)
    for t in &game.transitions {
        let src = game.location(&t.src).expect("validated");
        for b in 0..=m {
            let g = t.guard.shift_down(&Q::int(b)).intersect(&band_guard);
            if g.is_empty() {
                continue;
            }
            let dst_band = if t.reset == ResetKind::FullReset { 0 } else { b };
            transitions.push(Transition {
                id: format!("{}@{b}", t.id),
                src: band_id(&t.src, b),
                guard: g.clone(),
                reset: t.reset,
                dst: band_id(&t.dst, dst_band),
            });
            if needs_escort(src) && b >= 1 {
                transitions.push(Transition {
                    id: format!("{}@{b}.z", t.id),
                    src: escort_id(&t.src, b),
                    guard: g,
                    reset: t.reset,
                    dst: band_id(&t.dst, dst_band),
                });
            }
        }
    }

    // band crossings: wraps for unrestricted dwell, fractional escapes for
    // bounded dwell. Waiting in the source game is always part of a legal
    // move, so crossings exist only up to the last band where some real
    // edge is still enabled; anything further would let a player stall
    // into a dead band.
    for l in &game.locations {
        if l.is_target {
            continue;
        }
        let live_band = (0..=m)
            .rev()
            .find(|b| {
                game.transitions_from(&l.id).any(|t| {
                    !t.guard.shift_down(&Q::int(*b)).intersect(&band_guard).is_empty()
                })
            })
            .unwrap_or(0);
        for b in 0..live_band {
            if l.dwell.is_unbounded() {
                transitions.push(Transition {
                    id: format!("{}.wrap", band_id(&l.id, b)),
                    src: band_id(&l.id, b),
                    guard: wrap_guard.clone(),
                    reset: ResetKind::FullReset,
                    dst: band_id(&l.id, b + 1),
                });
            } else if needs_escort(l) {
                transitions.push(Transition {
                    id: format!("{}.frac", band_id(&l.id, b)),
                    src: band_id(&l.id, b),
                    guard: frac_guard.clone(),
                    reset: ResetKind::FractionalReset,
                    dst: escort_id(&l.id, b + 1),
                });
            }
        }
    }

    let initial = game.initial.iter().map(|l| band_id(l, 0)).collect();
    let mut out = Game {
        stage: Stage::Frptg,
        delta: game.delta.clone(),
        clock_bound: game.clock_bound,
        locations,
        transitions,
        initial,
    };
    // every band of a non-gadget location stays (value functions are pulled
    // back band by band); gadget internals survive only where reachable
    let mut roots: BTreeSet<LocId> = out.initial.iter().cloned().collect();
    for l in &game.locations {
        let principal = l.is_target || l.owner == Player::P1 || l.dwell.is_unbounded();
        if principal {
            for b in 0..=m {
                roots.insert(band_id(&l.id, b));
            }
        }
    }
    prune_unreachable(&mut out, roots);
    Ok((out, StateMap { from: Stage::DwellPtg, to: Stage::Frptg, kind: MapKind::Bands { bound: game.clock_bound } }))
}

fn needs_escort(l: &Location) -> bool {
    !l.is_target
        && !l.dwell.is_urgent()
        && l.dwell.max.as_ref().map(|m| !m.is_zero()).unwrap_or(false)
}

/// Drops locations unreachable from the given roots (edge relation only).
fn prune_unreachable(game: &mut Game, roots: BTreeSet<LocId>) {
    if roots.is_empty() {
        return;
    }
    let mut reach: BTreeSet<LocId> = roots;
    loop {
        let mut grew = false;
        for t in &game.transitions {
            if reach.contains(&t.src) && !reach.contains(&t.dst) {
                reach.insert(t.dst.clone());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    game.locations.retain(|l| reach.contains(&l.id));
    game.transitions.retain(|t| reach.contains(&t.src) && reach.contains(&t.dst));
}

// ----------------------------------------------------------------------
// transformation 3: banded -> reset-free unrolling
// ----------------------------------------------------------------------

pub fn to_reset_free(game: &Game) -> Result<(Game, StateMap), TransformError> {
    if game.stage != Stage::Frptg {
        return Err(TransformError::WrongStage(Stage::Frptg, game.stage));
    }
    let n = game.transitions.iter().filter(|t| t.reset.is_reset()).count() as u32;

    let mut locations: Vec<Location> = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();
    for j in 0..=n {
        for l in &game.locations {
            locations.push(Location {
                id: copy_id(&l.id, j),
                owner: l.owner,
                price: l.price,
                dwell: l.dwell.clone(),
                is_target: l.is_target,
                goal: l.goal.clone(),
                copy: Some(j),
            });
        }
        for t in &game.transitions {
            let dst = if t.reset.is_reset() {
                if j == n {
                    SINK_ID.to_string()
                } else {
                    copy_id(&t.dst, j + 1)
                }
            } else {
                copy_id(&t.dst, j)
            };
            transitions.push(Transition {
                id: format!("{}${j}", t.id),
                src: copy_id(&t.src, j),
                guard: t.guard.clone(),
                reset: t.reset,
                dst,
            });
        }
    }
    locations.push(Location {
        id: SINK_ID.to_string(),
        owner: Player::P2,
        price: 0,
        dwell: Dwell::unbounded(),
        is_target: true,
        goal: Some(Pwa::constant(Q::zero(), Q::int(game.clock_bound as i64 + 2), Ext::PlusInf)),
        copy: Some(n + 1),
    });

    let initial = game.initial.iter().map(|l| copy_id(l, 0)).collect();
    let mut out = Game {
        stage: Stage::ResetFreeFrptg,
        delta: game.delta.clone(),
        clock_bound: game.clock_bound,
        locations,
        transitions,
        initial,
    };
    // the whole first copy stays (its functions are the reported values);
    // deeper copies survive only where resets can actually reach them
    let mut roots: BTreeSet<LocId> =
        game.locations.iter().map(|l| copy_id(&l.id, 0)).collect();
    roots.extend(out.initial.iter().cloned());
    prune_unreachable(&mut out, roots);
    Ok((out, StateMap { from: Stage::Frptg, to: Stage::ResetFreeFrptg, kind: MapKind::Unroll { copies: n + 1 } }))
}

// ----------------------------------------------------------------------
// configuration maps
// ----------------------------------------------------------------------

impl StateMap {
    /// Maps a source-stage configuration forward.
    pub fn map_config(&self, loc: &str, x: &Q) -> Result<(LocId, Q), TransformError> {
        match &self.kind {
            MapKind::DwellGadgets { .. } => Ok((loc.to_string(), x.clone())),
            MapKind::Bands { bound } => {
                let b = x.floor_i64().min(*bound as i64).max(0);
                Ok((band_id(loc, b), x - &Q::int(b)))
            }
            MapKind::Unroll { .. } => Ok((copy_id(loc, 0), x.clone())),
        }
    }

    /// Maps a target-stage configuration back where a preimage exists.
    pub fn map_config_back(&self, loc: &str, x: &Q) -> Result<(LocId, Q), TransformError> {
        match &self.kind {
            MapKind::DwellGadgets { .. } => {
                if loc.contains('|') {
                    return Err(TransformError::OutsideMap(loc.to_string(), x.clone()));
                }
                Ok((loc.to_string(), x.clone()))
            }
            MapKind::Bands { .. } => match loc.rsplit_once('@') {
                Some((base, band)) => {
                    let band: i64 = band
                        .trim_end_matches(".z")
                        .parse()
                        .map_err(|_| TransformError::OutsideMap(loc.to_string(), x.clone()))?;
                    Ok((base.to_string(), x + &Q::int(band)))
                }
                None => Err(TransformError::OutsideMap(loc.to_string(), x.clone())),
            },
            MapKind::Unroll { .. } => match loc.rsplit_once('$') {
                Some((base, _)) => Ok((base.to_string(), x.clone())),
                None => Err(TransformError::OutsideMap(loc.to_string(), x.clone())),
            },
        }
    }
}

/// Maps a source-stage play to the target stage, step by step; the mapped
/// play replays to the same accumulated cost.
pub fn map_play(
    map: &StateMap,
    src_game: &Game,
    dst_game: &Game,
    play: &PlaySpec,
) -> Result<PlaySpec, TransformError> {
    match &map.kind {
        MapKind::DwellGadgets { delta, original_p1_edges } => {
            let mut steps = Vec::new();
            let mut loc = play.start_loc.clone();
            for mv in &play.steps {
                let t = src_game
                    .transition(&mv.edge)
                    .ok_or_else(|| TransformError::PlayMap(format!("unknown edge {}", mv.edge)))?;
                if original_p1_edges.contains(&mv.edge) {
                    let gamma = mv.gamma.clone().unwrap_or_else(Q::zero);
                    if mv.t < *delta {
                        return Err(TransformError::PlayMap(format!(
                            "controller delay {} below delta",
                            mv.t
                        )));
                    }
                    steps.push(TimedMove {
                        t: &mv.t - delta,
                        edge: format!("{}.in", mv.edge),
                        gamma: None,
                    });
                    let (branch, exit) = if gamma.is_negative() {
                        (format!("{}.lo", mv.edge), format!("{}.lo.out", mv.edge))
                    } else {
                        (format!("{}.hi", mv.edge), format!("{}.hi.out", mv.edge))
                    };
                    steps.push(TimedMove { t: Q::zero(), edge: branch, gamma: None });
                    steps.push(TimedMove { t: delta + &gamma, edge: exit, gamma: None });
                } else {
                    steps.push(mv.clone());
                }
                loc = t.dst.clone();
            }
            let _ = loc;
            Ok(PlaySpec {
                start_loc: play.start_loc.clone(),
                start_x: play.start_x.clone(),
                steps,
            })
        }
        MapKind::Bands { bound } => {
            let mut steps = Vec::new();
            let (mut loc, mut local) = map.map_config(&play.start_loc, &play.start_x)?;
            let mut band = play.start_x.floor_i64().min(*bound as i64).max(0);
            let mut src_loc = play.start_loc.clone();
            let mut src_x = play.start_x.clone();
            for mv in &play.steps {
                let t = src_game
                    .transition(&mv.edge)
                    .ok_or_else(|| TransformError::PlayMap(format!("unknown edge {}", mv.edge)))?;
                let src = src_game.location(&src_loc).expect("validated");
                let exit = &src_x + &mv.t;
                if src.dwell.is_unbounded() && !src.is_target {
                    // hop across bands with wrap edges
                    while exit >= Q::int(band + 1) && band < *bound as i64 {
                        let hop = &Q::int(band + 1) - &(&Q::int(band) + &local);
                        steps.push(TimedMove {
                            t: hop,
                            edge: format!("{}.wrap", band_id(&src_loc, band)),
                            gamma: None,
                        });
                        band += 1;
                        local = Q::zero();
                    }
                    let wait = &exit - &Q::int(band) - &local;
                    steps.push(TimedMove {
                        t: wait,
                        edge: format!("{}@{band}", mv.edge),
                        gamma: None,
                    });
                } else {
                    let local_exit = &local + &mv.t;
                    if local_exit < Q::one() {
                        steps.push(TimedMove {
                            t: mv.t.clone(),
                            edge: format!("{}@{band}", mv.edge),
                            gamma: None,
                        });
                    } else {
                        // bounded wait crossing the band edge: fractional
                        // escape, then exit from the escort
                        steps.push(TimedMove {
                            t: mv.t.clone(),
                            edge: format!("{}.frac", band_id(&src_loc, band)),
                            gamma: None,
                        });
                        band += 1;
                        steps.push(TimedMove {
                            t: Q::zero(),
                            edge: format!("{}@{band}.z", mv.edge),
                            gamma: None,
                        });
                    }
                }
                // post-step bookkeeping
                src_x = t.reset.apply(&exit);
                src_loc = t.dst.clone();
                if t.reset == ResetKind::FullReset {
                    band = 0;
                    local = Q::zero();
                } else if t.reset == ResetKind::FractionalReset {
                    local = src_x.clone();
                } else {
                    local = &exit - &Q::int(band);
                }
                loc = band_id(&src_loc, band);
            }
            let _ = loc;
            let _ = dst_game;
            let (sl, sx) = map.map_config(&play.start_loc, &play.start_x)?;
            Ok(PlaySpec { start_loc: sl, start_x: sx, steps })
        }
        MapKind::Unroll { copies } => {
            let mut steps = Vec::new();
            let mut j = 0u32;
            for mv in &play.steps {
                let t = src_game
                    .transition(&mv.edge)
                    .ok_or_else(|| TransformError::PlayMap(format!("unknown edge {}", mv.edge)))?;
                steps.push(TimedMove {
                    t: mv.t.clone(),
                    edge: format!("{}${j}", mv.edge),
                    gamma: None,
                });
                if t.reset.is_reset() {
                    j += 1;
                    if j >= *copies {
                        return Err(TransformError::PlayMap(format!(
                            "play exceeds the reset budget of {copies} copies"
                        )));
                    }
                }
            }
            Ok(PlaySpec {
                start_loc: copy_id(&play.start_loc, 0),
                start_x: play.start_x.clone(),
                steps,
            })
        }
    }
}

// ----------------------------------------------------------------------
// strategy pull-back
// ----------------------------------------------------------------------

/// Pulls a strategy on the target stage back to the source stage.
///
/// * Unrolling: per location and entry interval, the deepest copy that can
///   still win supplies the move (its continuation uses the fewest resets).
/// * Bands: band tables are re-assembled over `[b, b+1)` and wrap, escape,
///   and escort moves are flattened into single delays.
/// * Gadgets: delays grow by delta and gadget-entry edges become their
///   original edges; gadget-internal rows disappear (the perturbation is the
///   adversary's, not a location).
pub fn map_strategy_back(
    map: &StateMap,
    src_game: &Game,
    dst_game: &Game,
    strat: &Strategy,
    solved: Option<&BTreeMap<LocId, Pwa>>,
) -> Result<Strategy, TransformError> {
    match &map.kind {
        MapKind::Unroll { copies } => {
            let mut out = Strategy::default();
            for l in &src_game.locations {
                if l.is_target {
                    continue;
                }
                let table = pull_rows_unroll(l, *copies, dst_game, strat, solved);
                match l.owner {
                    Player::P1 => {
                        out.rows.insert(l.id.clone(), table);
                    }
                    Player::P2 => {
                        out.adversary_rows.insert(l.id.clone(), table);
                    }
                }
            }
            Ok(out)
        }
        MapKind::Bands { bound } => {
            let mut out = Strategy::default();
            for l in &src_game.locations {
                if l.is_target {
                    continue;
                }
                let mut table: Vec<Row> = Vec::new();
                for b in 0..=(*bound as i64) {
                    let id = band_id(&l.id, b);
                    let rows = strat
                        .rows
                        .get(&id)
                        .or_else(|| strat.adversary_rows.get(&id))
                        .cloned()
                        .unwrap_or_default();
                    for row in rows {
                        if let Some(r) = flatten_band_row(dst_game, strat, &l.id, b, &row) {
                            table.push(r);
                        }
                    }
                }
                table.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
                match l.owner {
                    Player::P1 => {
                        out.rows.insert(l.id.clone(), table);
                    }
                    Player::P2 => {
                        out.adversary_rows.insert(l.id.clone(), table);
                    }
                }
            }
            Ok(out)
        }
        MapKind::DwellGadgets { delta, original_p1_edges } => {
            let mut out = Strategy::default();
            for (loc, rows) in &strat.rows {
                if loc.contains('|') {
                    continue;
                }
                let mapped: Vec<Row> = rows
                    .iter()
                    .map(|row| {
                        let mut r = row.clone();
                        let edge = r.mv.edge().to_string();
                        let orig = edge.strip_suffix(".in").map(|s| s.to_string());
                        match (&mut r.mv, orig) {
                            (Move::DelayUntil { v, edge }, Some(o))
                                if original_p1_edges.contains(&o) =>
                            {
                                *v = &*v + delta;
                                *edge = o;
                            }
                            (Move::DelayFor { d, edge }, Some(o))
                                if original_p1_edges.contains(&o) =>
                            {
                                *d = &*d + delta;
                                *edge = o;
                            }
                            (mv @ Move::Immediate { .. }, Some(o))
                                if original_p1_edges.contains(&o) =>
                            {
                                *mv = Move::DelayFor { d: delta.clone(), edge: o };
                            }
                            _ => {}
                        }
                        r
                    })
                    .collect();
                out.rows.insert(loc.clone(), mapped);
            }
            for (loc, rows) in &strat.adversary_rows {
                if loc.contains('|') {
                    continue;
                }
                out.adversary_rows.insert(loc.clone(), rows.clone());
            }
            Ok(out)
        }
    }
}

/// The deepest-winning-copy rule for one location: sub-intervals where a
/// deeper copy's function is finite take that copy's rows.
fn pull_rows_unroll(
    l: &Location,
    copies: u32,
    dst_game: &Game,
    strat: &Strategy,
    solved: Option<&BTreeMap<LocId, Pwa>>,
) -> Vec<Row> {
    let strip = |edge: &str| -> String {
        edge.rsplit_once('$').map(|(b, _)| b.to_string()).unwrap_or_else(|| edge.to_string())
    };
    let rows_of = |id: &str| -> Vec<Row> {
        strat
            .rows
            .get(id)
            .or_else(|| strat.adversary_rows.get(id))
            .cloned()
            .unwrap_or_default()
    };

    // boundary points of all copies' rows and functions
    let mut cuts: BTreeSet<Q> = BTreeSet::new();
    for j in 0..copies {
        let id = copy_id(&l.id, j);
        for r in rows_of(&id) {
            cuts.insert(r.lo.clone());
            cuts.insert(r.hi.clone());
        }
        if let Some(map) = solved {
            if let Some(f) = map.get(&id) {
                for (x, _) in f.breakpoints() {
                    cuts.insert(x.clone());
                }
            }
        }
    }
    if cuts.is_empty() {
        return Vec::new();
    }
    let cuts: Vec<Q> = cuts.into_iter().collect();
    let mut out: Vec<Row> = Vec::new();
    let deepest_finite = |x: &Q| -> Option<u32> {
        let map = solved?;
        (0..copies)
            .rev()
            .find(|j| {
                map.get(&copy_id(&l.id, *j))
                    .and_then(|f| f.evaluate(x).ok())
                    .map(|v| v.is_finite())
                    .unwrap_or(false)
            })
    };
    let mut push = |lo: Q, hi: Q, hi_closed: bool, mv: Move| {
        if let Some(last) = out.last_mut() {
            if last.mv == mv && last.hi == lo {
                last.hi = hi;
                last.hi_closed = hi_closed;
                return;
            }
        }
        out.push(Row { lo, hi, hi_closed, mv });
    };
    for w in cuts.windows(2) {
        let probe = Q::midpoint(&w[0], &w[1]);
        let j = match deepest_finite(&probe) {
            Some(j) => j,
            None => match solved {
                Some(_) => continue,
                None => 0,
            },
        };
        if let Some(row) = rows_of(&copy_id(&l.id, j)).iter().find(|r| r.contains(&probe)) {
            let mut mv = row.mv.clone();
            match &mut mv {
                Move::DelayUntil { edge, .. }
                | Move::DelayFor { edge, .. }
                | Move::Immediate { edge } => *edge = strip(edge),
            }
            push(w[0].clone(), w[1].clone(), w[1] == *cuts.last().unwrap(), mv);
        }
    }
    // point rows at the cut points themselves
    for x in &cuts {
        if out.iter().any(|r| r.contains(x)) {
            continue;
        }
        let j = deepest_finite(x).unwrap_or(0);
        if let Some(row) = rows_of(&copy_id(&l.id, j)).iter().find(|r| r.contains(x)) {
            let mut mv = row.mv.clone();
            match &mut mv {
                Move::DelayUntil { edge, .. }
                | Move::DelayFor { edge, .. }
                | Move::Immediate { edge } => *edge = strip(edge),
            }
            out.push(Row { lo: x.clone(), hi: x.clone(), hi_closed: true, mv });
        }
    }
    let _ = dst_game;
    out.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
    out
}

/// Rewrites one band-local row into original coordinates, flattening wrap
/// chains, fractional escapes, and escort exits into a single move.
fn flatten_band_row(
    dst_game: &Game,
    strat: &Strategy,
    base: &str,
    band: i64,
    row: &Row,
) -> Option<Row> {
    let offset = Q::int(band);
    let lo = &row.lo + &offset;
    let hi = &row.hi + &offset;
    // entry rows live on [0, 1); anything beyond is transient overshoot
    if row.lo >= Q::one() {
        return None;
    }

    let mut band = band;
    let mut mv = row.mv.clone();
    // follow the chain until the move is a plain edge image
    for _ in 0..64 {
        let edge_id = mv.edge().to_string();
        if let Some(rest) = edge_id.strip_suffix(".wrap") {
            // wait to the band edge, then continue per the next band's rows
            let _ = rest;
            band += 1;
            let next_id = format!("{base}@{band}");
            let next = strat
                .rows
                .get(&next_id)
                .or_else(|| strat.adversary_rows.get(&next_id))
                .and_then(|rows| rows.iter().find(|r| r.contains(&Q::zero())))?;
            mv = next.mv.clone();
            continue;
        }
        if edge_id.ends_with(".frac") {
            // the escape's waiting target lies beyond the band edge; the
            // escort leaves immediately after the fractional reset
            let v = match &mv {
                Move::DelayUntil { v, .. } => v.clone(),
                Move::DelayFor { d, .. } => &row.lo + d,
                Move::Immediate { .. } => row.lo.clone(),
            };
            band += 1;
            let escort = format!("{base}@{band}.z");
            let landing = &v - &Q::one();
            let next = strat
                .rows
                .get(&escort)
                .or_else(|| strat.adversary_rows.get(&escort))
                .and_then(|rows| rows.iter().find(|r| r.contains(&landing)))?;
            let exit_edge = next.mv.edge().to_string();
            let orig = exit_edge
                .rsplit_once('@')
                .map(|(b, _)| b.to_string())
                .unwrap_or(exit_edge);
            mv = Move::DelayUntil { v: &v + &Q::int(band - 1), edge: orig };
            // the target is already in original coordinates
            return Some(Row { lo, hi, hi_closed: row.hi_closed, mv });
        }
        break;
    }

    let edge_id = mv.edge().to_string();
    let orig = edge_id
        .rsplit_once('@')
        .map(|(b, _)| b.to_string())
        .unwrap_or_else(|| edge_id.clone());
    let _ = dst_game;
    let shifted = match mv {
        Move::DelayUntil { v, .. } => Move::DelayUntil { v: &v + &Q::int(band), edge: orig },
        Move::DelayFor { d, .. } => Move::DelayFor { d, edge: orig },
        Move::Immediate { .. } => {
            if band > 0 && row.lo.is_zero() {
                Move::DelayUntil { v: Q::int(band), edge: orig }
            } else {
                Move::Immediate { edge: orig }
            }
        }
    };
    Some(Row { lo, hi, hi_closed: row.hi_closed, mv: shifted })
}

/// Per-location value functions pulled back one stage.
pub fn pull_back_functions(
    map: &StateMap,
    src_game: &Game,
    solved: &BTreeMap<LocId, Pwa>,
) -> BTreeMap<LocId, Pwa> {
    match &map.kind {
        MapKind::Unroll { .. } => {
            let mut out = BTreeMap::new();
            for l in &src_game.locations {
                if let Some(f) = solved.get(&copy_id(&l.id, 0)) {
                    out.insert(l.id.clone(), f.clone());
                }
            }
            out
        }
        MapKind::Bands { bound } => {
            let mut out = BTreeMap::new();
            let one = Q::one();
            for l in &src_game.locations {
                let mut acc: Option<Pwa> = None;
                for b in 0..=(*bound as i64) {
                    let id = band_id(&l.id, b);
                    let f = match solved.get(&id) {
                        Some(f) => f.clone(),
                        None => Pwa::constant(Q::zero(), one.clone(), Ext::PlusInf),
                    };
                    let top = if b == *bound as i64 { f.domain().1.min(one.clone()) } else { one.clone() };
                    let piece = f.restrict(&Q::zero(), &top).expect("band domain");
                    // next band's value wins at the integer seam
                    let piece = if b < *bound as i64 {
                        let next = solved
                            .get(&band_id(&l.id, b + 1))
                            .and_then(|g| g.evaluate(&Q::zero()).ok());
                        match next {
                            Some(v) if piece.evaluate(&one).ok() != Some(v.clone()) && v.is_finite() => {
                                piece.with_override(one.clone(), v, crate::pwa::Tag::None)
                            }
                            _ => piece,
                        }
                    } else {
                        piece
                    };
                    // shift into original coordinates
                    let shifted_pts: Vec<(Q, Ext)> = piece
                        .breakpoints()
                        .iter()
                        .map(|(x, v)| (x + &Q::int(b), v.clone()))
                        .collect();
                    let mut shifted = Pwa::from_points(shifted_pts);
                    for (x, v, tag) in piece.overrides() {
                        shifted = shifted.with_override(x + &Q::int(b), v.clone(), tag.clone());
                    }
                    acc = Some(match acc {
                        None => shifted,
                        Some(prev) => prev.concat(&shifted).unwrap_or_else(|_| {
                            splice_jump(prev, shifted)
                        }),
                    });
                }
                if let Some(f) = acc {
                    out.insert(l.id.clone(), f);
                }
            }
            out
        }
        MapKind::DwellGadgets { .. } => solved
            .iter()
            .filter(|(id, _)| !id.contains('|'))
            .map(|(id, f)| (id.clone(), f.clone()))
            .collect(),
    }
}

/// Joins band pieces whose seam values disagree (the right band's value is
/// attained at the integer).
fn splice_jump(left: Pwa, right: Pwa) -> Pwa {
    let (_, m) = left.domain();
    let lv = left.evaluate(&m).unwrap();
    let rv = right.evaluate(&m).unwrap();
    let l = left.restrict(&left.domain().0, &m).unwrap();
    let out = l.concat(&right).ok();
    match out {
        Some(f) => f,
        None => {
            // build manually: keep both limits, the right value attained
            let mut pts = left.breakpoints().to_vec();
            let mut pop_at_m = 0;
            while pts.last().map(|p| p.0 == m).unwrap_or(false) {
                pts.pop();
                pop_at_m += 1;
            }
            let _ = pop_at_m;
            let llim = lv.clone();
            let mut all = pts;
            if llim.is_finite() && rv.is_finite() && llim != rv {
                all.push((m.clone(), llim));
            }
            for p in right.breakpoints() {
                if all.last().map(|q| q == p).unwrap_or(false) {
                    continue;
                }
                all.push(p.clone());
            }
            let mut f = Pwa::from_points(all);
            for (x, v, tag) in left.overrides().iter().chain(right.overrides()) {
                if *x != m {
                    f = f.with_override(x.clone(), v.clone(), tag.clone());
                }
            }
            f
        }
    }
}

/// Sidecar description of a map for the transform subcommand.
#[derive(Serialize)]
pub struct MapTable {
    pub from: Stage,
    pub to: Stage,
    pub rule: String,
}

pub fn describe_map(map: &StateMap) -> MapTable {
    let rule = match &map.kind {
        MapKind::DwellGadgets { delta, .. } => format!(
            "original locations map identically; controller edge e from A gains \
             an urgent hub A|e and branches A|e- (dwell [0,{delta}]) and A|e+ \
             (dwell [{delta},{}]); delays shrink by {delta}",
            delta + delta
        ),
        MapKind::Bands { bound } => format!(
            "(l, x) -> (l@b, x-b) for b = floor(x), bands 0..={bound}; wrap edges \
             cross bands at x=1, bounded-dwell crossings use fractional resets \
             into urgent escorts l@b.z"
        ),
        MapKind::Unroll { copies } => format!(
            "(l, x) -> (l$0, x); reset edges advance one copy, {copies} copies \
             total, the last reset feeds the sink {SINK_ID}"
        ),
    };
    MapTable { from: map.from, to: map.to, rule }
}
