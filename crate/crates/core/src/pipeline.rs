//! End-to-end orchestration: rewrite a game stage by stage down to the
//! reset-free form, solve it, and pull values and strategies back to the
//! coordinates of the input stage.

use crate::model::{Game, LocId, Stage};
use crate::pwa::Pwa;
use crate::rational::Q;
use crate::solver::{self, SolveError, SolveResult};
use crate::strategy::Strategy;
use crate::transform::{self, StateMap, TransformError};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

pub struct PipelineResult {
    /// The chain of games from the input stage to the reset-free stage;
    /// `games[0]` is the input, `maps[i]` connects `games[i]` to
    /// `games[i+1]`.
    pub games: Vec<Game>,
    pub maps: Vec<StateMap>,
    pub solve: SolveResult,
    /// Optimal-cost functions in the coordinates of the input stage.
    pub optcost: BTreeMap<LocId, Pwa>,
    /// Strategy in the coordinates of the input stage.
    pub strategy: Strategy,
}

impl PipelineResult {
    pub fn reset_free(&self) -> &Game {
        self.games.last().unwrap()
    }
}

/// Runs the remaining transformations for the input's stage, solves, and
/// pulls the results back.
pub fn solve_pipeline(game: &Game, epsilon: &Q) -> Result<PipelineResult, PipelineError> {
    let mut games = vec![game.clone()];
    let mut maps: Vec<StateMap> = Vec::new();
    if games.last().unwrap().stage == Stage::Rptg {
        let (g, m) = transform::to_dwell_ptg(games.last().unwrap())?;
        games.push(g);
        maps.push(m);
    }
    if games.last().unwrap().stage == Stage::DwellPtg {
        let (g, m) = transform::to_frptg(games.last().unwrap())?;
        games.push(g);
        maps.push(m);
    }
    if games.last().unwrap().stage == Stage::Frptg {
        let (g, m) = transform::to_reset_free(games.last().unwrap())?;
        games.push(g);
        maps.push(m);
    }

    let solve = solver::solve(games.last().unwrap(), epsilon)?;

    // pull functions and the strategy back stage by stage
    let mut fns = solve.optcost.clone();
    let mut strat = solve.strategy.clone();
    let mut solved_for_unroll = Some(solve.optcost.clone());
    for (i, map) in maps.iter().enumerate().rev() {
        let src_game = &games[i];
        let dst_game = &games[i + 1];
        strat = transform::map_strategy_back(
            map,
            src_game,
            dst_game,
            &strat,
            solved_for_unroll.as_ref(),
        )?;
        fns = transform::pull_back_functions(map, src_game, &fns);
        solved_for_unroll = None;
    }

    Ok(PipelineResult { games, maps, solve, optcost: fns, strategy: strat })
}
