//! Bottom-up solver for reset-free games: guard handling, the minimizer's
//! waiting pass, the three maximizer dwell variants, and the
//! minimum-price-location split.

use crate::model::{Game, LocId, Location, Player, Stage, Transition};
use crate::pwa::{
    bounded_wait_max, exterior, inf_regions, interior, overlay_inf, replace_inf,
    waiting_envelope, Pwa, PwaError, Sense, Span, Tag,
};
use crate::rational::{Ext, Q};
use crate::strategy::Strategy;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("solver expects a reset-free game, got stage {0}")]
    WrongStage(Stage),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(Q),
    #[error(transparent)]
    Pwa(#[from] PwaError),
    #[error("location {0}: maximizer fixpoint did not stabilize within {1} rounds")]
    FixpointDiverged(LocId, usize),
    #[error("strategy extraction failed: {0}")]
    Extraction(String),
    #[error("location {0} has an unsupported dwell window for its owner")]
    BadDwell(LocId),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub per_location_segments: BTreeMap<LocId, usize>,
    pub total_segments: usize,
    pub total_replacements: usize,
    pub max_recursion_depth: usize,
    pub envelope_excess_crossings: usize,
    pub fixpoint_rounds: usize,
}

/// Everything a solve produces: per-location optimal-cost functions with
/// provenance, the extracted strategy, and accounting.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub optcost: BTreeMap<LocId, Pwa>,
    pub strategy: Strategy,
    pub stats: SolveStats,
    /// Per location: the edge id behind each `Tag::Source` index.
    pub edge_order: BTreeMap<LocId, Vec<String>>,
    /// Per location: the nudge applied to exits pinned on strict bounds.
    pub retreat_step: BTreeMap<LocId, Q>,
}

struct Ctx<'g> {
    game: &'g Game,
    epsilon: Q,
    dom: (Q, Q),
    stats: SolveStats,
    edge_order: BTreeMap<LocId, Vec<String>>,
    retreat_step: BTreeMap<LocId, Q>,
}

/// Solves a reset-free game: copies are solved deepest-first, and inside a
/// copy strongly-connected components are solved in reverse topological
/// order, splitting on the cheapest location where cycles exist.
pub fn solve(game: &Game, epsilon: &Q) -> Result<SolveResult, SolveError> {
    if game.stage != Stage::ResetFreeFrptg {
        return Err(SolveError::WrongStage(game.stage));
    }
    if *epsilon <= Q::zero() {
        return Err(SolveError::BadEpsilon(epsilon.clone()));
    }
    let dom = (Q::zero(), Q::one() + &game.delta);
    let mut ctx = Ctx {
        game,
        epsilon: epsilon.clone(),
        dom: dom.clone(),
        stats: SolveStats::default(),
        edge_order: BTreeMap::new(),
        retreat_step: BTreeMap::new(),
    };

    // targets anchor the recursion in every copy
    let mut solved: BTreeMap<LocId, Pwa> = BTreeMap::new();
    for l in &game.locations {
        if l.is_target {
            let goal = l.goal.as_ref().expect("validated target");
            solved.insert(l.id.clone(), goal.restrict(&dom.0, &dom.1)?);
        }
    }

    let mut copies: BTreeSet<u32> = game.locations.iter().filter_map(|l| l.copy).collect();
    if copies.is_empty() {
        copies.insert(0);
    }
    for copy in copies.iter().rev() {
        let locs: BTreeSet<LocId> = game
            .locations
            .iter()
            .filter(|l| !l.is_target && l.copy.unwrap_or(0) == *copy)
            .map(|l| l.id.clone())
            .collect();
        let fns = solve_set(&mut ctx, &locs, &solved, &BTreeMap::new(), 0)?;
        solved.extend(fns);
    }

    for (id, f) in &solved {
        let n = f.segment_count();
        ctx.stats.per_location_segments.insert(id.clone(), n);
        ctx.stats.total_segments += n;
    }

    let mut result = SolveResult {
        optcost: solved,
        strategy: Strategy::default(),
        stats: ctx.stats,
        edge_order: ctx.edge_order,
        retreat_step: ctx.retreat_step,
    };
    result.strategy =
        crate::strategy::extract(game, &result).map_err(|e| SolveError::Extraction(e.to_string()))?;
    Ok(result)
}

/// Solves the locations in `locs`, assuming `env` holds the functions of
/// every location outside the set and `redirect` overrides specific edges'
/// continuation functions.
fn solve_set(
    ctx: &mut Ctx,
    locs: &BTreeSet<LocId>,
    env: &BTreeMap<LocId, Pwa>,
    redirect: &BTreeMap<String, Pwa>,
    depth: usize,
) -> Result<BTreeMap<LocId, Pwa>, SolveError> {
    ctx.stats.max_recursion_depth = ctx.stats.max_recursion_depth.max(depth);
    let mut solved: BTreeMap<LocId, Pwa> = BTreeMap::new();
    for scc in sccs_reverse_topo(ctx.game, locs, redirect) {
        let mut env2 = env.clone();
        env2.extend(solved.clone());
        let fns = if scc.len() == 1 && !has_internal_edge(ctx.game, &scc, redirect) {
            let id = scc.first().unwrap().clone();
            let f = compute_optcost(ctx, &id, &env2, redirect, depth)?;
            BTreeMap::from([(id, f)])
        } else {
            solve_scc_split(ctx, &scc, &env2, redirect, depth)?
        };
        solved.extend(fns);
    }
    Ok(solved)
}

fn has_internal_edge(
    game: &Game,
    set: &BTreeSet<LocId>,
    redirect: &BTreeMap<String, Pwa>,
) -> bool {
    game.transitions
        .iter()
        .any(|t| set.contains(&t.src) && set.contains(&t.dst) && !redirect.contains_key(&t.id))
}

/// Strongly connected components of the subgraph on `locs` (redirected
/// edges leave the subgraph), in reverse topological order.
fn sccs_reverse_topo(
    game: &Game,
    locs: &BTreeSet<LocId>,
    redirect: &BTreeMap<String, Pwa>,
) -> Vec<BTreeSet<LocId>> {
    let nodes: Vec<&LocId> = locs.iter().collect();
    let index: BTreeMap<&LocId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for t in &game.transitions {
        if redirect.contains_key(&t.id) {
            continue;
        }
        if let (Some(&a), Some(&b)) = (index.get(&t.src), index.get(&t.dst)) {
            adj[a].push(b);
        }
    }
    for row in adj.iter_mut() {
        row.sort();
        row.dedup();
    }

    // Tarjan, iterative
    let n = nodes.len();
    let mut idx = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut comps: Vec<BTreeSet<LocId>> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if idx[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pi)) = call.last_mut() {
            if *pi == 0 {
                idx[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *pi < adj[v].len() {
                let w = adj[v][*pi];
                *pi += 1;
                if idx[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(idx[w]);
                }
            } else {
                if low[v] == idx[v] {
                    let mut comp = BTreeSet::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.insert(nodes[w].clone());
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
                call.pop();
                if let Some(&mut (parent, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    // Tarjan emits components in reverse topological order already
    comps
}

/// The split on the cheapest location of a cyclic component: the component
/// is solved once with revisits of the cheapest location priced at +inf,
/// the cheapest location is computed from that, and the component is solved
/// again with the computed function plugged in.
fn solve_scc_split(
    ctx: &mut Ctx,
    scc: &BTreeSet<LocId>,
    env: &BTreeMap<LocId, Pwa>,
    redirect: &BTreeMap<String, Pwa>,
    depth: usize,
) -> Result<BTreeMap<LocId, Pwa>, SolveError> {
    let l_min = scc
        .iter()
        .min_by_key(|id| (ctx.game.location(id).unwrap().price, (*id).clone()))
        .unwrap()
        .clone();
    let rest: BTreeSet<LocId> = scc.iter().filter(|id| **id != l_min).cloned().collect();
    let plus_inf = Pwa::constant(ctx.dom.0.clone(), ctx.dom.1.clone(), Ext::PlusInf);

    let edges_into_lmin: Vec<String> = ctx
        .game
        .transitions
        .iter()
        .filter(|t| scc.contains(&t.src) && t.dst == l_min && !redirect.contains_key(&t.id))
        .map(|t| t.id.clone())
        .collect();

    // revisits forbidden: edges into the cheapest location lead nowhere
    let mut redirect_inf = redirect.clone();
    for e in &edges_into_lmin {
        redirect_inf.insert(e.clone(), plus_inf.clone());
    }
    let f1 = solve_set(ctx, &rest, env, &redirect_inf, depth + 1)?;

    let mut env1 = env.clone();
    env1.extend(f1);
    let mut f_lmin = compute_optcost(ctx, &l_min, &env1, &redirect_inf, depth)?;

    let solve_rest = |ctx: &mut Ctx, f_lmin: &Pwa| -> Result<BTreeMap<LocId, Pwa>, SolveError> {
        let mut redirect_l = redirect.clone();
        for e in &edges_into_lmin {
            redirect_l.insert(e.clone(), f_lmin.clone());
        }
        solve_set(ctx, &rest, env, &redirect_l, depth + 1)
    };
    let mut f0 = solve_rest(ctx, &f_lmin)?;

    // when the cheapest location maximizes, its value may interact with the
    // component it feeds; iterate to a fixpoint, bounded by the segment
    // budget of the inputs
    if ctx.game.location(&l_min).unwrap().owner == Player::P2 {
        let budget = 2 + env.values().map(|f| f.segment_count()).sum::<usize>()
            + ctx.game.locations.len();
        let mut rounds = 0usize;
        loop {
            let mut env0 = env.clone();
            env0.extend(f0.clone());
            env0.insert(l_min.clone(), f_lmin.clone());
            let mut redirect_self = redirect.clone();
            let check = compute_optcost_in(ctx, &l_min, &env0, &mut redirect_self, depth)?;
            if check.geometry() == f_lmin.geometry() {
                break;
            }
            rounds += 1;
            ctx.stats.fixpoint_rounds += 1;
            if rounds > budget {
                return Err(SolveError::FixpointDiverged(l_min, budget));
            }
            f_lmin = check;
            f0 = solve_rest(ctx, &f_lmin)?;
        }
    }

    f0.insert(l_min, f_lmin);
    Ok(f0)
}

fn compute_optcost(
    ctx: &mut Ctx,
    loc_id: &str,
    env: &BTreeMap<LocId, Pwa>,
    redirect: &BTreeMap<String, Pwa>,
    depth: usize,
) -> Result<Pwa, SolveError> {
    let mut r = redirect.clone();
    compute_optcost_in(ctx, loc_id, env, &mut r, depth)
}

/// Computes one location's function from its successors' functions.
fn compute_optcost_in(
    ctx: &mut Ctx,
    loc_id: &str,
    env: &BTreeMap<LocId, Pwa>,
    redirect: &mut BTreeMap<String, Pwa>,
    _depth: usize,
) -> Result<Pwa, SolveError> {
    let game = ctx.game;
    let loc = game.location(loc_id).expect("known location");
    let plus_inf = || Pwa::constant(ctx.dom.0.clone(), ctx.dom.1.clone(), Ext::PlusInf);

    let succ: Vec<(&Transition, Pwa)> = game
        .transitions_from(loc_id)
        .map(|t| {
            let f = redirect
                .get(&t.id)
                .cloned()
                .or_else(|| env.get(&t.dst).cloned())
                .unwrap_or_else(plus_inf);
            (t, f)
        })
        .collect();
    ctx.edge_order
        .insert(loc_id.to_string(), succ.iter().map(|(t, _)| t.id.clone()).collect());

    let price = game.price(loc_id);
    let result = match loc.owner {
        Player::P1 => compute_optcost_p1(ctx, loc, &price, &succ)?,
        Player::P2 => compute_optcost_p2(ctx, loc, &price, &succ)?,
    };
    if std::env::var("RPTG_DEBUG").map(|v| v == loc_id).unwrap_or(false) {
        eprintln!("loc {loc_id} out={result:?}");
        for seg in result.segments() {
            eprintln!("  seg [{},{}] {:?}->{:?} {:?}", seg.lo, seg.hi, seg.lo_value, seg.hi_value, seg.tag);
        }
        for (t, f) in &succ {
            eprintln!("  edge {} {} succ={f:?}", t.id, t.guard);
            for seg in f.segments() {
                eprintln!("    [{},{}] {:?}->{:?} {:?}", seg.lo, seg.hi, seg.lo_value, seg.hi_value, seg.tag);
            }
        }
    }

    // retreat step for strict-bound exits: epsilon split over the component
    // size and the steepest slope involved
    let mut m_max = price.abs();
    for (_, f) in &succ {
        for s in f.segments() {
            if let Some(sl) = s.slope() {
                m_max = m_max.max(sl.abs());
            }
        }
    }
    let n = Q::one(); // per-location budget; components are split per SCC
    let t = &ctx.epsilon / &(&n * &(&m_max + &Q::one()));
    ctx.retreat_step.insert(loc_id.to_string(), t);

    ctx.stats.total_replacements += result
        .segments()
        .iter()
        .filter(|s| matches!(s.tag, Tag::Delay { .. } | Tag::DelayFor { .. }))
        .count();
    Ok(result)
}

/// The minimizing case: restrict each successor function to its guard,
/// superimpose, take the lower envelope, and run the waiting pass over the
/// whole admissible window (guards keep waiting out of forbidden regions).
fn compute_optcost_p1(
    ctx: &mut Ctx,
    _loc: &Location,
    price: &Q,
    succ: &[(&Transition, Pwa)],
) -> Result<Pwa, SolveError> {
    let (lo, hi) = ctx.dom.clone();
    if succ.is_empty() {
        return Ok(Pwa::constant(lo, hi, Ext::PlusInf));
    }
    let mut admissible = Vec::new();
    let mut win_spans: Vec<Span> = Vec::new();
    for (t, f) in succ {
        // regions the minimizer can steer into a -inf continuation win
        for r in inf_regions(f, false) {
            if let Some(mapped) = map_region_through_edge(t, &r, &ctx.dom) {
                win_spans.push(mapped.reach_back(&Q::zero(), None, &lo));
            }
        }
        let clamped = replace_inf(f, false, &Ext::PlusInf);
        admissible.push(handle_guards(t, &clamped, &ctx.dom, &Ext::PlusInf)?);
    }
    let f = interior(&admissible)?;
    account_crossings(ctx, &admissible, &f);
    let replaced = waiting_envelope(&f, price, &lo, &hi, Sense::Min)?;
    let out = if win_spans.is_empty() {
        replaced
    } else {
        overlay_inf(&replaced, &win_spans, false)
    };
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// The maximizing case: upper envelope of the admissible functions, then
/// the dwell-shaped waiting adjustment (none when urgent, a bounded wait for
/// small windows, an unrestricted wait otherwise), a forced minimum wait
/// applied as a shift, and +inf where no move is ever available.
fn compute_optcost_p2(
    ctx: &mut Ctx,
    loc: &Location,
    price: &Q,
    succ: &[(&Transition, Pwa)],
) -> Result<Pwa, SolveError> {
    let (lo, hi) = ctx.dom.clone();
    if succ.is_empty() {
        return Ok(Pwa::constant(lo, hi, Ext::PlusInf));
    }
    let dwell = &loc.dwell;
    let dmin = dwell.min.clone();
    let dmax = dwell.max.clone();

    // exits may overshoot the reporting domain by the dwell width
    let hi_ext = match &dmax {
        Some(m) if !m.is_zero() => &hi + m,
        _ => hi.clone(),
    };
    let dom_ext = (lo.clone(), hi_ext.clone());

    let mut admissible = Vec::new();
    let mut win_spans: Vec<Span> = Vec::new();
    for (t, f) in succ {
        // exits into a +inf continuation are wins for the maximizer; they
        // are clamped out of the envelope inputs and overlaid afterwards
        for r in inf_regions(f, true) {
            if let Some(mapped) = map_region_through_edge(t, &r, &dom_ext) {
                win_spans.push(mapped.reach_back(&dmin, dmax.as_ref(), &lo));
            }
        }
        let clamped = replace_inf(f, true, &Ext::MinusInf);
        admissible.push(handle_guards(t, &clamped, &dom_ext, &Ext::MinusInf)?);
    }
    let f = exterior(&admissible)?;
    account_crossings(ctx, &admissible, &f);

    let waited = if dwell.is_urgent() {
        f
    } else {
        // a forced minimum wait is a shift; the remaining slack is a
        // bounded or unrestricted wait on the shifted function
        let shifted = if dmin.is_zero() {
            f
        } else {
            f.shift_by_delay(&dmin, price)?
        };
        let (slo, shi) = shifted.domain();
        let out = match &dmax {
            None => waiting_envelope(&shifted, price, &slo, &shi, Sense::Max)?,
            Some(m) => {
                let slack = m - &dmin;
                if slack.is_zero() {
                    shifted
                } else {
                    bounded_wait_max(&shifted, price, &slack, &slo, &shi)?
                }
            }
        };
        out
    };
    // report on the solve domain, +inf where the location can no longer act
    let (wlo, whi) = waited.domain();
    let mut out = if whi < hi {
        waited.extend(&wlo, &hi, &Ext::PlusInf)
    } else if whi > hi {
        waited.restrict(&wlo, &hi)?
    } else {
        waited
    };
    // leftover fill marks regions where no move is ever available: the
    // play is stuck there and never reaches a target (goal functions never
    // take -inf, so no genuine minus-infinite value can remain)
    out = replace_inf(&out, false, &Ext::PlusInf);
    if !win_spans.is_empty() {
        out = overlay_inf(&out, &win_spans, true);
    }
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// Maps a region of a successor function back through an edge: where must
/// the exit valuation lie so the continuation lands in the region?
fn map_region_through_edge(t: &Transition, region: &Span, dom: &(Q, Q)) -> Option<Span> {
    use crate::model::ResetKind::*;
    let (glo, ghi) = t.guard.closure();
    let guard_span = Span {
        lo: glo.max(dom.0.clone()),
        lo_strict: t.guard.lo_strict,
        hi: ghi.min(dom.1.clone()),
        hi_strict: t.guard.hi_strict,
    };
    if guard_span.is_empty() && !guard_span.contains(&guard_span.lo) {
        return None;
    }
    let landed = match t.reset {
        NoReset => region.clone(),
        FullReset => {
            if region.contains(&Q::zero()) {
                guard_span.clone()
            } else {
                return None;
            }
        }
        FractionalReset => {
            // exits in [1, 2) land at x - 1
            let one = Q::one();
            Span {
                lo: &region.lo + &one,
                lo_strict: region.lo_strict,
                hi: &region.hi + &one,
                hi_strict: region.hi_strict,
            }
        }
    };
    // intersect with the guard span
    let (lo, lo_strict) = if landed.lo > guard_span.lo {
        (landed.lo.clone(), landed.lo_strict)
    } else if guard_span.lo > landed.lo {
        (guard_span.lo.clone(), guard_span.lo_strict)
    } else {
        (landed.lo.clone(), landed.lo_strict || guard_span.lo_strict)
    };
    let (hi, hi_strict) = if landed.hi < guard_span.hi {
        (landed.hi.clone(), landed.hi_strict)
    } else if guard_span.hi < landed.hi {
        (guard_span.hi.clone(), guard_span.hi_strict)
    } else {
        (landed.hi.clone(), landed.hi_strict || guard_span.hi_strict)
    };
    let s = Span { lo, lo_strict, hi, hi_strict };
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

fn account_crossings(ctx: &mut Ctx, inputs: &[Pwa], out: &Pwa) {
    let in_total: usize = inputs.iter().map(|f| f.segment_count()).sum();
    ctx.stats.envelope_excess_crossings += out.segment_count().saturating_sub(in_total);
}

/// Restricts a successor function to an edge's admissible exits on `dom`,
/// filling the rest with `fill`: full resets contribute the continuation at
/// 0, fractional resets the continuation at `x - 1` on `[1, ..]`, point
/// guards a single point.
pub fn handle_guards(
    t: &Transition,
    succ: &Pwa,
    dom: &(Q, Q),
    fill: &Ext,
) -> Result<Pwa, SolveError> {
    use crate::model::ResetKind::*;
    let (lo, hi) = dom.clone();
    let (glo, ghi) = t.guard.closure();
    let a = glo.max(lo.clone());
    let b = ghi.min(hi.clone());
    let blank = Pwa::constant(lo.clone(), hi.clone(), fill.clone());
    if a > b {
        return Ok(blank);
    }

    let (slo, shi) = succ.domain();
    let value_at = |x: &Q| -> Result<Ext, SolveError> {
        let landed = match t.reset {
            NoReset => x.clone(),
            FullReset => Q::zero(),
            FractionalReset => {
                if *x >= Q::one() {
                    x - &Q::one()
                } else {
                    x.clone()
                }
            }
        };
        if landed < slo || landed > shi {
            return Ok(fill.clone());
        }
        Ok(succ.evaluate(&landed)?)
    };

    if a == b {
        let v = value_at(&a)?;
        if v == *fill {
            return Ok(blank);
        }
        return Ok(blank.with_override(a, v, Tag::None));
    }

    let body = match t.reset {
        NoReset => {
            let b2 = b.clone().min(shi.clone());
            if a > b2 {
                return Ok(blank);
            }
            if a == b2 {
                let v = value_at(&a)?;
                if v == *fill {
                    return Ok(blank);
                }
                return Ok(blank.with_override(a, v, Tag::None));
            }
            succ.restrict(&a, &b2)?
        }
        FullReset => {
            let v = succ.evaluate(&Q::zero())?;
            Pwa::constant(a.clone(), b.clone(), v)
        }
        FractionalReset => {
            // pieces by integer part; the solve domain stays below 2
            let one = Q::one();
            let mut pieces: Vec<Pwa> = Vec::new();
            if a < one {
                let cut = b.clone().min(one.clone()).min(shi.clone());
                if a < cut {
                    pieces.push(succ.restrict(&a, &cut)?);
                }
            }
            if b >= one {
                let from = a.clone().max(one.clone());
                let cut = (&b - &one).min(shi.clone());
                if &from - &one <= cut {
                    let base = succ.restrict(&(&from - &one), &cut)?;
                    let shifted_pts: Vec<(Q, Ext)> = base
                        .breakpoints()
                        .iter()
                        .map(|(x, v)| (x + &one, v.clone()))
                        .collect();
                    let mut sh = Pwa::from_points(shifted_pts);
                    for (x, v, tag) in base.overrides() {
                        sh = sh.with_override(x + &one, v.clone(), tag.clone());
                    }
                    pieces.push(sh);
                }
            }
            match pieces.len() {
                0 => return Ok(blank),
                1 => pieces.pop().unwrap(),
                _ => {
                    let right = pieces.pop().unwrap();
                    let left = pieces.pop().unwrap();
                    // the two halves agree at 1 when frac is the identity
                    left.concat(&right).unwrap_or_else(|_| {
                        let mut fs = vec![
                            left.extend(&lo, &hi, fill),
                            right.extend(&lo, &hi, fill),
                        ];
                        let min = *fill == Ext::PlusInf;
                        let f0 = fs.remove(0);
                        let f1 = fs.remove(0);
                        if min {
                            f0.min_with(&f1).expect("same domain")
                        } else {
                            f0.max_with(&f1).expect("same domain")
                        }
                    })
                }
            }
        }
    };
    let (blo, bhi) = body.domain();
    if blo == lo && bhi == hi {
        Ok(body)
    } else {
        Ok(body.extend(&lo, &hi, fill))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Guard, ResetKind};

    fn q(p: i64, d: i64) -> Q {
        Q::new(p, d)
    }

    fn qi(n: i64) -> Q {
        Q::int(n)
    }

    fn fin(p: i64, d: i64) -> Ext {
        Ext::Fin(Q::new(p, d))
    }

    fn edge(id: &str, guard: Guard, reset: ResetKind) -> Transition {
        Transition { id: id.into(), src: "l".into(), guard, reset, dst: "m".into() }
    }

    #[test]
    fn handle_guards_point_and_reset() {
        let dom = (qi(0), q(9, 8));
        let succ = Pwa::affine(qi(0), q(9, 8), &qi(-1), &qi(2));
        // point guard contributes a single point
        let t = edge("e", Guard::point(q(1, 2)), ResetKind::NoReset);
        let adm = handle_guards(&t, &succ, &dom, &Ext::PlusInf).unwrap();
        assert_eq!(adm.evaluate(&q(1, 2)).unwrap(), fin(3, 2));
        assert_eq!(adm.evaluate(&q(1, 4)).unwrap(), Ext::PlusInf);
        // full reset contributes the value at zero on the whole guard
        let t = edge("e", Guard::closed(qi(0), qi(1)), ResetKind::FullReset);
        let adm = handle_guards(&t, &succ, &dom, &Ext::PlusInf).unwrap();
        assert_eq!(adm.evaluate(&q(3, 4)).unwrap(), fin(2, 1));
        // fractional reset: x -> succ(x - 1) above 1
        let t = edge(
            "e",
            Guard { lo: qi(1), lo_strict: false, hi: qi(2), hi_strict: false },
            ResetKind::FractionalReset,
        );
        let adm = handle_guards(&t, &succ, &dom, &Ext::MinusInf).unwrap();
        assert_eq!(adm.evaluate(&q(9, 8)).unwrap(), Ext::Fin(&qi(2) - &q(1, 8)));
        assert_eq!(adm.evaluate(&q(1, 2)).unwrap(), Ext::MinusInf);
    }
}
