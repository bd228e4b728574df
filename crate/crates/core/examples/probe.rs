use rptg_core::fixtures::{generate, FixtureParams};
use rptg_core::pipeline::solve_pipeline;
use rptg_core::rational::{Ext, Q};
use rptg_core::semantics::oracle_optcost;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let k: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(32);
    let mut params = FixtureParams::default();
    params.locations = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(4);
    if let Some(d) = args.get(5) { params.delta = d.parse().unwrap(); }
    let batch = generate(seed, count, &params);
    println!("generated {} games ({} attempts, {} rejected)", batch.games.len(), batch.attempts, batch.rejected);
    let mut failures = 0;
    for (gi, g) in batch.games.iter().enumerate() {
        std::fs::write(format!("/tmp/probe_game_{gi}.json"), rptg_core::model::serialize_game(g)).ok();
        let t0 = Instant::now();
        let r = match solve_pipeline(g, &Q::new(1, 10)) {
            Ok(r) => r,
            Err(e) => { println!("game {gi}: SOLVE ERROR {e}"); failures += 1; continue; }
        };
        let t1 = t0.elapsed();
        let o = match oracle_optcost(g, k) {
            Ok(o) => o,
            Err(e) => { println!("game {gi}: ORACLE ERROR {e}"); failures += 1; continue; }
        };
        let t2 = t0.elapsed();
        // Lipschitz-style tolerance
        let s = g.max_abs_price().max(g.max_goal_slope());
        let steps = Q::int((r.reset_free().locations.len() + 2) as i64);
        let c = &(&Q::int(2) * &s) * &steps;
        let tol = &c / &Q::int(k as i64);
        let mut bad = 0;
        for l in &g.locations {
            if l.is_target { continue; }
            let f = match r.optcost.get(&l.id) { Some(f) => f, None => { println!("game {gi}: missing {}", l.id); failures += 1; continue; } };
            for i in 0..=(g.clock_bound as usize * k as usize) {
                let x = Q::new(i as i64, k as i64);
                let sv = f.evaluate(&x).unwrap_or(Ext::PlusInf);
                let ov = o.value(&l.id, i);
                let ok = match (&sv, ov) {
                    (Ext::Fin(a), Ext::Fin(b)) => (a - b).abs() <= tol,
                    (a, b) => *a == *b,
                };
                if !ok {
                    if bad < 3 {
                        println!("game {gi} {} at {x}: solver {sv} oracle {ov}", l.id);
                    }
                    bad += 1;
                }
            }
        }
        if bad > 0 {
            failures += 1;
            println!("game {gi}: {bad} mismatches  [solve {:?} oracle {:?}] rf locs {}", t1, t2-t1, r.reset_free().locations.len());
            println!("{}", rptg_core::model::serialize_game(g));
        } else {
            println!("game {gi}: OK  [solve {:?} oracle {:?}] rf locs {}", t1, t2-t1, r.reset_free().locations.len());
        }
    }
    println!("failures: {failures}/{}", batch.games.len());
}
