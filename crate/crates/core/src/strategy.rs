//! Strategies: per-location interval tables with one move per interval,
//! extraction from solved provenance, and the acceptability audit.

use crate::model::{Game, LocId, Player, Stage};
use crate::pwa::Tag;
use crate::rational::{Ext, Q};
use crate::semantics::{self, EvalOptions};
use crate::solver::SolveResult;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A prescribed move for an interval of entry valuations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Move {
    /// Wait until the clock reaches `v`, then take `edge`.
    DelayUntil { v: Q, edge: String },
    /// Wait exactly `d`, then take `edge`.
    DelayFor { d: Q, edge: String },
    /// Take `edge` with no delay.
    Immediate { edge: String },
}

impl Move {
    pub fn edge(&self) -> &str {
        match self {
            Move::DelayUntil { edge, .. } | Move::DelayFor { edge, .. } | Move::Immediate { edge } => edge,
        }
    }

    /// Concrete delay from valuation `x`; `None` if the move is stale
    /// (a delay target already passed).
    pub fn delay_from(&self, x: &Q) -> Option<Q> {
        match self {
            Move::DelayUntil { v, .. } => {
                if v >= x {
                    Some(v - x)
                } else {
                    None
                }
            }
            Move::DelayFor { d, .. } => Some(d.clone()),
            Move::Immediate { .. } => Some(Q::zero()),
        }
    }
}

/// Half-open interval `[lo, hi)`, closed when `hi_closed` (used for the last
/// interval of a block and for point rows).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub lo: Q,
    pub hi: Q,
    pub hi_closed: bool,
    #[serde(rename = "move")]
    pub mv: Move,
}

impl Row {
    pub fn contains(&self, x: &Q) -> bool {
        *x >= self.lo && (*x < self.hi || (self.hi_closed && *x == self.hi))
    }
}

/// Interval tables per location. Controller rows drive player 1; the
/// maximizer's prescriptions are kept in a separate table so audits can
/// replay the worst case the solver believed in.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Strategy {
    pub rows: BTreeMap<LocId, Vec<Row>>,
    pub adversary_rows: BTreeMap<LocId, Vec<Row>>,
}

impl Strategy {
    pub fn lookup(&self, loc: &str, x: &Q) -> Option<&Row> {
        self.rows.get(loc).and_then(|rows| rows.iter().find(|r| r.contains(x)))
    }

    pub fn lookup_adversary(&self, loc: &str, x: &Q) -> Option<&Row> {
        self.adversary_rows.get(loc).and_then(|rows| rows.iter().find(|r| r.contains(x)))
    }

    /// Largest number of intervals any location uses within one unit of
    /// clock span (the paper's N attribute).
    pub fn witnessed_n(&self) -> usize {
        self.rows
            .values()
            .chain(self.adversary_rows.values())
            .map(|rows| rows.len())
            .max()
            .unwrap_or(0)
    }
}

// ----------------------------------------------------------------------
// extraction
// ----------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("segment without provenance at {0} in {1}")]
    MissingProvenance(Q, LocId),
    #[error("no such edge index {0} at {1}")]
    UnknownEdge(usize, LocId),
}

/// Reads the provenance-tagged optimal-cost functions of a solve into
/// interval tables. Minimizer rows live in `rows`, maximizer rows in
/// `adversary_rows`.
pub fn extract(game: &Game, sr: &SolveResult) -> Result<Strategy, StrategyError> {
    let mut strat = Strategy::default();
    for (loc_id, fun) in &sr.optcost {
        let loc = match game.location(loc_id) {
            Some(l) => l,
            None => continue,
        };
        if loc.is_target {
            continue;
        }
        let edge_ids = &sr.edge_order[loc_id];
        let mut rows: Vec<Row> = Vec::new();
        let push = |rows: &mut Vec<Row>, lo: Q, hi: Q, hi_closed: bool, mv: Move| {
            if lo > hi {
                return;
            }
            if let Some(last) = rows.last_mut() {
                if last.mv == mv && last.hi == lo {
                    last.hi = hi;
                    last.hi_closed = hi_closed;
                    return;
                }
            }
            rows.push(Row { lo, hi, hi_closed, mv });
        };
        let resolve = |via: usize| -> Result<String, StrategyError> {
            edge_ids
                .get(via)
                .cloned()
                .ok_or_else(|| StrategyError::UnknownEdge(via, loc_id.clone()))
        };
        let segs = fun.segments();
        for (i, seg) in segs.iter().enumerate() {
            if !seg.is_finite() {
                continue;
            }
            let last = i + 1 == segs.len() || !segs[i + 1].is_finite();
            match &seg.tag {
                Tag::Source(e) => {
                    let edge = resolve(*e)?;
                    push(&mut rows, seg.lo.clone(), seg.hi.clone(), last, Move::Immediate { edge });
                }
                Tag::Delay { until, via } => {
                    let edge = resolve(*via)?;
                    push(
                        &mut rows,
                        seg.lo.clone(),
                        seg.hi.clone(),
                        last,
                        Move::DelayUntil { v: until.clone(), edge },
                    );
                }
                Tag::DelayFor { dur, via } => {
                    let edge = resolve(*via)?;
                    push(
                        &mut rows,
                        seg.lo.clone(),
                        seg.hi.clone(),
                        last,
                        Move::DelayFor { d: dur.clone(), edge },
                    );
                }
                Tag::None => {
                    return Err(StrategyError::MissingProvenance(seg.lo.clone(), loc_id.clone()))
                }
            }
        }
        // isolated point values get point rows
        for (x, v, tag) in fun.overrides() {
            if !v.is_finite() {
                continue;
            }
            let mv = match tag {
                Tag::Source(e) => Move::Immediate { edge: resolve(*e)? },
                Tag::Delay { until, via } => {
                    Move::DelayUntil { v: until.clone(), edge: resolve(*via)? }
                }
                Tag::DelayFor { dur, via } => {
                    Move::DelayFor { d: dur.clone(), edge: resolve(*via)? }
                }
                Tag::None => return Err(StrategyError::MissingProvenance(x.clone(), loc_id.clone())),
            };
            rows.push(Row { lo: x.clone(), hi: x.clone(), hi_closed: true, mv });
        }
        rows.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
        match loc.owner {
            Player::P1 => {
                strat.rows.insert(loc_id.clone(), rows);
            }
            Player::P2 => {
                strat.adversary_rows.insert(loc_id.clone(), rows);
            }
        }
    }
    apply_strictness_retreats(game, sr, &mut strat);
    Ok(strat)
}

/// Nudges rows whose prescribed exit point sits on a strict guard bound:
/// the exit retreats by `epsilon / (n * (m_max + 1))` into the guard's
/// interior, where `n` is the solved component's location count and `m_max`
/// the steepest slope involved.
fn apply_strictness_retreats(game: &Game, sr: &SolveResult, strat: &mut Strategy) {
    let fix_rows = |retreat: &Q, rows: &mut Vec<Row>| {
        if retreat.is_zero() {
            return;
        }
        let mut extra: Vec<Row> = Vec::new();
        for row in rows.iter_mut() {
            let edge_id = row.mv.edge().to_string();
            let guard = match game.transition(&edge_id) {
                Some(t) => t.guard.clone(),
                None => continue,
            };
            let row_lo = row.lo.clone();
            let row_covers_lo = row.contains(&guard.lo);
            match &mut row.mv {
                Move::DelayUntil { v, .. } => {
                    if guard.hi_strict && *v == guard.hi {
                        let nv = &*v - retreat;
                        if guard.contains(&nv) {
                            *v = nv;
                        }
                    } else if guard.lo_strict && *v == guard.lo {
                        let nv = &*v + retreat;
                        if guard.contains(&nv) {
                            *v = nv;
                        }
                    }
                }
                Move::Immediate { edge } => {
                    // taking the edge exactly on a strict lower bound is
                    // illegal; wait out the retreat step first
                    if guard.lo_strict && row_lo == guard.lo {
                        let nv = &guard.lo + retreat;
                        if guard.contains(&nv) && row_covers_lo {
                            extra.push(Row {
                                lo: row_lo.clone(),
                                hi: row_lo.clone(),
                                hi_closed: true,
                                mv: Move::DelayUntil { v: nv, edge: edge.clone() },
                            });
                        }
                    }
                }
                Move::DelayFor { .. } => {}
            }
        }
        rows.extend(extra);
        rows.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
    };
    let zero = Q::zero();
    for (loc, rows) in strat.rows.iter_mut() {
        fix_rows(sr.retreat_step.get(loc).unwrap_or(&zero), rows);
    }
    for (loc, rows) in strat.adversary_rows.iter_mut() {
        fix_rows(sr.retreat_step.get(loc).unwrap_or(&zero), rows);
    }
}

// ----------------------------------------------------------------------
// audit
// ----------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct AuditViolation {
    pub loc: LocId,
    pub x: Q,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub structural_violations: Vec<AuditViolation>,
    pub optimality_violations: Vec<AuditViolation>,
    pub samples_checked: usize,
    pub witnessed_n: usize,
    /// The adversary search is exact only when worst cases sit on the
    /// candidate grid (breakpoints of the solved functions plus the
    /// perturbation extremes); elsewhere it is a lower bound.
    pub adversary_grid_caveat: bool,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.structural_violations.is_empty() && self.optimality_violations.is_empty()
    }
}

/// Checks a strategy against its solve: structural shape (interval tables,
/// guard satisfiability of every move) and eps-optimality at sampled entry
/// valuations under the adversary search.
pub fn audit(
    game: &Game,
    strat: &Strategy,
    sr: &SolveResult,
    epsilon: &Q,
    samples: usize,
    seed: u64,
) -> AuditReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut structural = Vec::new();
    for (loc_id, rows) in strat.rows.iter().chain(strat.adversary_rows.iter()) {
        let mut prev_hi: Option<Q> = None;
        for row in rows {
            if row.lo > row.hi {
                structural.push(AuditViolation {
                    loc: loc_id.clone(),
                    x: row.lo.clone(),
                    detail: "empty interval".into(),
                });
            }
            if let Some(ph) = &prev_hi {
                if row.lo < *ph {
                    structural.push(AuditViolation {
                        loc: loc_id.clone(),
                        x: row.lo.clone(),
                        detail: "overlapping intervals".into(),
                    });
                }
            }
            prev_hi = Some(row.hi.clone());
            // the prescribed move must satisfy its guard from somewhere in
            // the interval
            let edge = match game.transition(row.mv.edge()) {
                Some(t) => t,
                None => {
                    structural.push(AuditViolation {
                        loc: loc_id.clone(),
                        x: row.lo.clone(),
                        detail: format!("unknown edge {}", row.mv.edge()),
                    });
                    continue;
                }
            };
            let probe = if row.hi_closed { row.hi.clone() } else { Q::midpoint(&row.lo, &row.hi) };
            let exit = match &row.mv {
                Move::DelayUntil { v, .. } => v.clone(),
                Move::DelayFor { d, .. } => &probe + d,
                Move::Immediate { .. } => probe.clone(),
            };
            if !edge.guard.contains(&exit) {
                structural.push(AuditViolation {
                    loc: loc_id.clone(),
                    x: probe,
                    detail: format!("move exits at {exit} outside guard {}", edge.guard),
                });
            }
        }
    }

    let mut optimality = Vec::new();
    let mut checked = 0usize;
    let opts = EvalOptions::from_solve(game, sr);
    let locs: Vec<&LocId> = strat.rows.keys().collect();
    if !locs.is_empty() {
        for _ in 0..samples {
            let loc = locs[rng.random_range(0..locs.len())];
            let fun = &sr.optcost[loc.as_str()];
            let (lo, hi) = fun.domain();
            // sample a breakpoint or a segment midpoint
            let bps = fun.breakpoints();
            let idx = rng.random_range(0..bps.len().saturating_mul(2));
            let x = if idx % 2 == 0 {
                bps[idx / 2].0.clone()
            } else {
                let a = &bps[idx / 2].0;
                let b = &bps[(idx / 2 + 1).min(bps.len() - 1)].0;
                Q::midpoint(a, b)
            };
            if x < lo || x > hi {
                continue;
            }
            let bound = match fun.evaluate(&x) {
                Ok(Ext::Fin(v)) => v,
                _ => continue, // unwinnable region: nothing to check
            };
            checked += 1;
            let outcome = semantics::evaluate_strategy(game, strat, (*loc).clone(), x.clone(), &opts);
            let limit = Ext::Fin(&bound + epsilon);
            if outcome.worst_cost > limit {
                optimality.push(AuditViolation {
                    loc: (*loc).clone(),
                    x,
                    detail: format!(
                        "realized {} exceeds optimal {} + epsilon {}",
                        outcome.worst_cost, bound, epsilon
                    ),
                });
            }
        }
    }

    AuditReport {
        structural_violations: structural,
        optimality_violations: optimality,
        samples_checked: checked,
        witnessed_n: strat.witnessed_n(),
        adversary_grid_caveat: game.stage == Stage::Rptg,
    }
}
