use rptg_core::model::parse_game;
use rptg_core::rational::Q;
use rptg_core::transform::{to_dwell_ptg, to_frptg, to_reset_free};
use rptg_core::solver::solve;

fn main() {
    let text = std::fs::read("/tmp/c4_fail.json").unwrap();
    let g = parse_game(&text).unwrap();
    let (p, _) = to_dwell_ptg(&g).unwrap();
    let (f, _) = to_frptg(&p).unwrap();
    let (rf, _) = to_reset_free(&f).unwrap();
    // compute the hub's function by hand: find its edges and succ fns
    match solve(&rf, &Q::new(1, 10)) {
        Ok(_) => println!("ok"),
        Err(e) => println!("ERR {e}"),
    }
    for t in rf.transitions_from("L1|t1@0$0") {
        println!("edge {} guard {} -> {}", t.id, t.guard, t.dst);
    }
}
