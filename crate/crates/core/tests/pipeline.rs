//! End-to-end checks of the transformation pipeline on small hand-built
//! games with known values.

use rptg_core::model::parse_game;
use rptg_core::pipeline::solve_pipeline;
use rptg_core::rational::{Ext, Q};
use rptg_core::semantics::{oracle_optcost, replay, PlaySpec, TimedMove};
use rptg_core::transform::{map_play, to_dwell_ptg, to_frptg, to_reset_free};

fn q(p: i64, d: i64) -> Q {
    Q::new(p, d)
}

fn qi(n: i64) -> Q {
    Q::int(n)
}

/// Two locations feeding a target: the maximizer location A (price -1) can
/// go to B or wait to the target at x=1; B (price 1) waits toward the cheap
/// part of the goal.
fn cost_functions_game() -> rptg_core::model::Game {
    let text = r#"{
        "stage": "DwellPTG",
        "delta": "1/8",
        "clock_bound": 1,
        "locations": [
            {"id": "A", "owner": "P2", "price": -1},
            {"id": "B", "owner": "P1", "price": 1},
            {"id": "T", "owner": "P2", "price": 0, "target": true,
             "goal_fn": [[0, 3], ["1/2", 0], [1, 0]]}
        ],
        "transitions": [
            {"id": "a_to_b", "src": "A", "guard": {"lo": 0, "hi": 1}, "dst": "B"},
            {"id": "a_to_t", "src": "A", "guard": {"lo": 1, "hi": 1}, "dst": "T"},
            {"id": "b_to_t", "src": "B", "guard": {"lo": 0, "hi": 1}, "dst": "T"}
        ],
        "initial": ["A"]
    }"#;
    parse_game(text.as_bytes()).unwrap()
}

#[test]
fn worked_example_values() {
    let g = cost_functions_game();
    let r = solve_pipeline(&g, &q(1, 10)).unwrap();
    let b = &r.optcost["B"];
    assert_eq!(b.evaluate(&qi(0)).unwrap(), Ext::Fin(q(1, 2)));
    assert_eq!(b.evaluate(&q(1, 4)).unwrap(), Ext::Fin(q(1, 4)));
    assert_eq!(b.evaluate(&q(1, 2)).unwrap(), Ext::Fin(qi(0)));
    assert_eq!(b.evaluate(&q(3, 4)).unwrap(), Ext::Fin(qi(0)));
    assert_eq!(b.evaluate(&qi(1)).unwrap(), Ext::Fin(qi(0)));
    let a = &r.optcost["A"];
    for x in [qi(0), q(1, 4), q(1, 2), q(7, 8), qi(1)] {
        assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap(), "at {x}");
    }
}

#[test]
fn pipeline_matches_oracle_on_worked_example() {
    let g = cost_functions_game();
    let r = solve_pipeline(&g, &q(1, 10)).unwrap();
    let oracle = oracle_optcost(&g, 16).unwrap();
    for loc in ["A", "B"] {
        for i in 0..=16usize {
            let x = Q::new(i as i64, 16);
            let solver_v = r.optcost[loc].evaluate(&x).unwrap();
            let oracle_v = oracle.value(loc, i);
            match (&solver_v, oracle_v) {
                (Ext::Fin(a), Ext::Fin(b)) => {
                    assert!(
                        (a - b).abs() <= q(1, 4),
                        "{loc} at {x}: solver {a} vs oracle {b}"
                    );
                }
                (a, b) => assert_eq!(a.clone(), b.clone(), "{loc} at {x}"),
            }
        }
    }
}

#[test]
fn play_maps_preserve_cost() {
    let text = r#"{
        "stage": "RPTG",
        "delta": "1/8",
        "clock_bound": 2,
        "locations": [
            {"id": "A", "owner": "P1", "price": 2},
            {"id": "B", "owner": "P2", "price": -1},
            {"id": "T", "owner": "P2", "price": 0, "target": true,
             "goal_fn": [[0, 3], [1, 0], [2, 0]]}
        ],
        "transitions": [
            {"id": "e1", "src": "A", "guard": {"lo": 1, "hi": 1}, "reset": "full", "dst": "B"},
            {"id": "e2", "src": "B", "guard": {"lo": 0, "hi": 2}, "dst": "T"},
            {"id": "e3", "src": "B", "guard": {"lo": 1, "hi": 2}, "dst": "A"}
        ],
        "initial": ["A"]
    }"#;
    let rptg = parse_game(text.as_bytes()).unwrap();
    let play = PlaySpec {
        start_loc: "A".into(),
        start_x: qi(0),
        steps: vec![
            TimedMove { t: qi(1), edge: "e1".into(), gamma: Some(q(1, 8)) },
            TimedMove { t: q(11, 8), edge: "e2".into(), gamma: None },
        ],
    };
    let base = replay(&rptg, &play).unwrap();
    assert!(base.reached_target);
    // cost: (1 + 1/8)*2 at A, 11/8 * -1 at B, goal(3/2) = 0... goal at 3/2
    // interpolates to 0 only from 1 on; landing x = 1/8 + 11/8 = 3/2
    assert_eq!(base.total, Ext::Fin(&(&q(9, 8) * &qi(2)) - &q(11, 8)));

    let (ptg, m1) = to_dwell_ptg(&rptg).unwrap();
    let p1 = map_play(&m1, &rptg, &ptg, &play).unwrap();
    let r1 = replay(&ptg, &p1).unwrap();
    assert_eq!(r1.total, base.total, "dwell-stage cost drifted");

    let (frptg, m2) = to_frptg(&ptg).unwrap();
    let p2 = map_play(&m2, &ptg, &frptg, &p1).unwrap();
    let r2 = replay(&frptg, &p2).unwrap();
    assert_eq!(r2.total, base.total, "banded-stage cost drifted");

    let (rf, m3) = to_reset_free(&frptg).unwrap();
    let p3 = map_play(&m3, &frptg, &rf, &p2).unwrap();
    let r3 = replay(&rf, &p3).unwrap();
    assert_eq!(r3.total, base.total, "reset-free cost drifted");

    // clock values along the banded replay stay within a band
    for c in &r2.configs {
        assert!(c.x <= &qi(1) + &(&q(1, 8) + &q(1, 8)), "band clock escaped: {}", c.x);
    }
}

#[test]
fn full_robust_pipeline_against_oracle() {
    let text = r#"{
        "stage": "RPTG",
        "delta": "1/4",
        "clock_bound": 1,
        "locations": [
            {"id": "A", "owner": "P1", "price": 2},
            {"id": "T", "owner": "P2", "price": 0, "target": true,
             "goal_fn": [[0, 3], [1, 0], [2, 0]]}
        ],
        "transitions": [
            {"id": "e", "src": "A", "guard": {"lo": 0, "hi": 1}, "dst": "T"}
        ],
        "initial": ["A"]
    }"#;
    let g = parse_game(text.as_bytes()).unwrap();
    let r = solve_pipeline(&g, &q(1, 10)).unwrap();
    let oracle = oracle_optcost(&g, 16).unwrap();
    for i in 0..=16usize {
        let x = Q::new(i as i64, 16);
        let s = r.optcost["A"].evaluate(&x).unwrap();
        let o = oracle.value("A", i);
        match (&s, o) {
            (Ext::Fin(a), Ext::Fin(b)) => {
                assert!((a - b).abs() <= q(2, 4), "A at {x}: solver {a} vs oracle {b}")
            }
            (a, b) => assert_eq!(a.clone(), b.clone(), "A at {x}"),
        }
    }
}
