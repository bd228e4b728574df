//! Deterministic random game generation within the solvable class, used by
//! the fixtures subcommand and the randomized test suites.

use crate::model::{
    self, DiagClass, Dwell, Game, Guard, Location, Player, ResetKind, Stage, Transition,
};
use crate::pwa::Pwa;
use crate::rational::{Ext, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct FixtureParams {
    pub locations: usize,
    pub price_min: i64,
    pub price_max: i64,
    pub guard_bound: i64,
    pub delta: Q,
}

impl Default for FixtureParams {
    fn default() -> FixtureParams {
        FixtureParams {
            locations: 4,
            price_min: -3,
            price_max: 3,
            guard_bound: 2,
            delta: Q::new(1, 8),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixtureBatch {
    pub games: Vec<Game>,
    pub attempts: usize,
    pub rejected: usize,
}

impl FixtureBatch {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.games.len() as f64 / self.attempts as f64
        }
    }
}

/// Draws `count` validated games; candidates with a negative pumpable cycle
/// are rejected and redrawn.
pub fn generate(seed: u64, count: usize, params: &FixtureParams) -> FixtureBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut games = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let mut rejected = 0usize;
    while games.len() < count && attempts < count * 200 + 50 {
        attempts += 1;
        let g = candidate(&mut rng, params);
        let diags = model::validate_game(&g);
        if diags.iter().any(|d| d.class == DiagClass::NonZenoNegativeCycle) {
            rejected += 1;
            continue;
        }
        games.push(g);
    }
    FixtureBatch { games, attempts, rejected }
}

fn rand_q(rng: &mut ChaCha8Rng, num_bound: i64, den: i64) -> Q {
    Q::new(rng.random_range(0..=num_bound * den), den)
}

fn candidate(rng: &mut ChaCha8Rng, p: &FixtureParams) -> Game {
    let bound = p.guard_bound.max(1);
    let n = p.locations.max(2);
    let mut locations: Vec<Location> = Vec::new();

    // one target with a random piecewise goal over small dyadic breakpoints
    let goal = {
        let mut xs: Vec<Q> = vec![Q::zero()];
        let steps = rng.random_range(1..=3usize);
        for _ in 0..steps {
            xs.push(rand_q(rng, bound, 4));
        }
        xs.push(Q::int(bound + 2));
        xs.sort();
        xs.dedup();
        let pts: Vec<(Q, Ext)> = xs
            .into_iter()
            .map(|x| (x, Ext::Fin(Q::new(rng.random_range(0..=8), 2))))
            .collect();
        Pwa::from_points(pts)
    };
    locations.push(Location {
        id: "T".into(),
        owner: Player::P2,
        price: 0,
        dwell: Dwell::unbounded(),
        is_target: true,
        goal: Some(goal),
        copy: None,
    });

    for i in 0..n - 1 {
        locations.push(Location {
            id: format!("L{i}"),
            owner: if rng.random_bool(0.5) { Player::P1 } else { Player::P2 },
            price: rng.random_range(p.price_min..=p.price_max),
            dwell: Dwell::unbounded(),
            is_target: false,
            goal: None,
            copy: None,
        });
    }

    let mut transitions: Vec<Transition> = Vec::new();
    let mut tid = 0usize;
    let mut push_edge = |transitions: &mut Vec<Transition>, src: String, dst: String, rng: &mut ChaCha8Rng| {
        let a = rng.random_range(0..=bound);
        let b = rng.random_range(a..=bound);
        // closed interval guards; occasionally a point, never x=0 on a
        // controller edge (dead under the minimum-delay rule)
        let point = rng.random_bool(0.2) && !(a == 0 && b == 0);
        let guard = if point {
            let c = rng.random_range(a.max(1)..=bound);
            Guard::point(Q::int(c))
        } else {
            Guard::closed(Q::int(a), Q::int(b))
        };
        let reset = if rng.random_bool(0.25) { ResetKind::FullReset } else { ResetKind::NoReset };
        transitions.push(Transition {
            id: format!("t{tid}"),
            src,
            guard,
            reset,
            dst,
        });
        tid += 1;
    };

    // a spine guarantees a path to the target
    for i in 0..n - 1 {
        let src = format!("L{i}");
        let dst = if i + 1 == n - 1 { "T".to_string() } else { format!("L{}", i + 1) };
        push_edge(&mut transitions, src, dst, rng);
    }
    // extra edges, possibly cyclic
    let extras = rng.random_range(0..=n);
    for _ in 0..extras {
        let src = format!("L{}", rng.random_range(0..n - 1));
        let d = rng.random_range(0..n);
        let dst = if d == n - 1 { "T".to_string() } else { format!("L{d}") };
        push_edge(&mut transitions, src, dst, rng);
    }

    // controller edges with x=0 point guards are dead under the minimum
    // delay; drop any that slipped through
    let p1_ids: Vec<String> = locations
        .iter()
        .filter(|l| l.owner == Player::P1)
        .map(|l| l.id.clone())
        .collect();
    transitions.retain(|t| {
        !(p1_ids.contains(&t.src) && t.guard.is_point() && t.guard.lo.is_zero())
    });

    Game {
        stage: Stage::Rptg,
        delta: p.delta.clone(),
        clock_bound: bound as u32,
        locations,
        transitions,
        initial: vec!["L0".into()],
    }
}

/// A random legal play of bounded length, biased toward reaching a target;
/// used by the cost-preservation suites.
pub fn random_play(
    game: &Game,
    rng: &mut ChaCha8Rng,
    max_steps: usize,
    max_resets: usize,
) -> crate::semantics::PlaySpec {
    use crate::semantics::{step, Configuration, PlaySpec, TimedMove};
    let start_loc = game
        .initial
        .first()
        .cloned()
        .unwrap_or_else(|| game.locations[0].id.clone());
    let mut c = Configuration::start(start_loc.clone(), Q::zero());
    let mut steps = Vec::new();
    let mut resets = 0usize;
    let den = 8i64;
    for _ in 0..max_steps {
        let loc = match game.location(&c.loc) {
            Some(l) => l,
            None => break,
        };
        if loc.is_target {
            break;
        }
        // candidate moves: for each edge, a few exit points on a small grid
        let mut options: Vec<TimedMove> = Vec::new();
        for t in game.transitions_from(&c.loc) {
            if t.reset.is_reset() && resets >= max_resets {
                continue;
            }
            let (glo, ghi) = t.guard.closure();
            let lo = glo.max(c.x.clone());
            if lo > ghi {
                continue;
            }
            for _ in 0..3 {
                let span = &ghi - &lo;
                let pick = if span.is_zero() {
                    lo.clone()
                } else {
                    let ticks = (&span * &Q::int(den)).floor_i64().max(1);
                    &lo + &Q::new(rng.random_range(0..=ticks), den)
                };
                if !t.guard.contains(&pick) {
                    continue;
                }
                let delay = &pick - &c.x;
                let robust_p1 =
                    game.stage == Stage::Rptg && loc.owner == Player::P1;
                if robust_p1 && delay < game.delta {
                    continue;
                }
                if !robust_p1 && !loc.dwell.allows(&delay) {
                    continue;
                }
                let gamma = if robust_p1 {
                    let k = (&game.delta * &Q::int(den)).floor_i64();
                    Some(Q::new(rng.random_range(-k..=k), den))
                } else {
                    None
                };
                options.push(TimedMove { t: delay, edge: t.id.clone(), gamma });
            }
        }
        if options.is_empty() {
            break;
        }
        // prefer progress toward the target late in the play
        let mv = options.swap_remove(rng.random_range(0..options.len()));
        match step(game, &c, &mv) {
            Ok(next) => {
                if game.transition(&mv.edge).map(|t| t.reset.is_reset()).unwrap_or(false) {
                    resets += 1;
                }
                steps.push(mv);
                c = next;
            }
            Err(_) => continue,
        }
    }
    PlaySpec { start_loc, start_x: Q::zero(), steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let p = FixtureParams::default();
        let a = generate(7, 3, &p);
        let b = generate(7, 3, &p);
        let sa: Vec<String> = a.games.iter().map(model::serialize_game).collect();
        let sb: Vec<String> = b.games.iter().map(model::serialize_game).collect();
        assert_eq!(sa, sb);
        assert_eq!(a.games.len(), 3);
    }

    #[test]
    fn nonnegative_prices_never_rejected() {
        let p = FixtureParams { price_min: 0, price_max: 3, ..Default::default() };
        let batch = generate(11, 5, &p);
        assert_eq!(batch.rejected, 0);
        assert_eq!(batch.games.len(), 5);
    }

    #[test]
    fn plays_replay_cleanly() {
        use crate::semantics::replay;
        let p = FixtureParams::default();
        let batch = generate(3, 2, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for g in &batch.games {
            for _ in 0..20 {
                let play = random_play(g, &mut rng, 8, 2);
                replay(g, &play).expect("generated plays are legal");
            }
        }
    }
}
