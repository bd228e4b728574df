//! `rptg` — solve, transform, simulate, and cross-check one-clock robust
//! priced timed games.
//!
//! Exit codes: 0 on success, 2 when the input is rejected for a pumpable
//! negative cycle, 1 on any other error. Set `RPTG_LOG` for progress
//! diagnostics on stderr.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rptg_core::fixtures::{self, FixtureParams};
use rptg_core::model::{self, DiagClass, Game, Stage};
use rptg_core::pipeline::{solve_pipeline, PipelineResult};
use rptg_core::pwa::Pwa;
use rptg_core::rational::{Ext, Q};
use rptg_core::semantics::{self, PlaySpec};
use rptg_core::transform;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rptg", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ToStage {
    Dwell,
    Frptg,
    Resetfree,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a game against the solvable class and print diagnostics.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Rewrite a game up to the requested stage; writes the game and a
    /// sidecar state-map table.
    Transform {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "resetfree")]
        to: ToStage,
        #[arg(long)]
        delta: Option<Q>,
    },
    /// Solve a game end to end and emit value functions and a strategy.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        delta: Option<Q>,
        #[arg(long, default_value = "1/10")]
        epsilon: Q,
        #[arg(long, value_enum, default_value = "json")]
        emit: Emit,
        #[arg(long)]
        stats: bool,
    },
    /// Replay a play file and print the cost ledger.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        play: PathBuf,
    },
    /// Grid value iteration; emits the value table as CSV.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 64)]
        grid_k: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render solved value functions (the JSON emitted by solve) as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate seeded random games within the solvable class.
    Fixtures {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        locations: usize,
        #[arg(long, default_value_t = -3)]
        price_min: i64,
        #[arg(long, default_value_t = 3)]
        price_max: i64,
        #[arg(long, default_value_t = 2)]
        guard_bound: i64,
        #[arg(long, default_value = "1/8")]
        delta: Q,
        #[arg(long)]
        output: PathBuf,
    },
}

fn log(msg: impl AsRef<str>) {
    if std::env::var("RPTG_LOG").map(|v| !v.is_empty()).unwrap_or(false) {
        eprintln!("rptg: {}", msg.as_ref());
    }
}

fn load_game(path: &Path, delta: Option<&Q>) -> Result<Game> {
    let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut game = model::parse_game(&text).map_err(|e| anyhow!("{e}"))?;
    if let Some(d) = delta {
        game.delta = d.clone();
    }
    Ok(game)
}

/// A rejection carrying the class-violation diagnostics (exit code 2).
#[derive(Debug)]
struct Rejection(String);

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Rejection {}

fn reject_if_outside_class(game: &Game) -> Result<()> {
    let diags = model::validate_game(game);
    let fatal: Vec<_> =
        diags.iter().filter(|d| d.class == DiagClass::NonZenoNegativeCycle).collect();
    if !fatal.is_empty() {
        let text = serde_json::to_string_pretty(&fatal).unwrap();
        return Err(anyhow::Error::new(Rejection(text)));
    }
    Ok(())
}

#[derive(Serialize)]
struct FunctionView {
    breakpoints: Vec<(Q, Ext)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    isolated: Vec<(Q, Ext)>,
}

fn view(f: &Pwa) -> FunctionView {
    FunctionView {
        breakpoints: f.breakpoints().to_vec(),
        isolated: f.overrides().iter().map(|(x, v, _)| (x.clone(), v.clone())).collect(),
    }
}

#[derive(Serialize)]
struct SolveOutput {
    stage: Stage,
    delta: Q,
    epsilon: Q,
    optcost: BTreeMap<String, FunctionView>,
    strategy: rptg_core::strategy::Strategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<rptg_core::solver::SolveStats>,
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(p, content)?;
        }
        None => println!("{content}"),
    }
    Ok(())
}

fn cmd_solve(
    input: &Path,
    output: Option<&Path>,
    delta: Option<&Q>,
    epsilon: &Q,
    emit: Emit,
    stats: bool,
) -> Result<()> {
    let game = load_game(input, delta)?;
    reject_if_outside_class(&game)?;
    log(format!("solving {} at stage {}", input.display(), game.stage));
    let result = solve_pipeline(&game, epsilon).map_err(|e| anyhow!("{e}"))?;
    log(format!(
        "reset-free game has {} locations; {} segments total",
        result.reset_free().locations.len(),
        result.solve.stats.total_segments
    ));
    match emit {
        Emit::Json => {
            let out = SolveOutput {
                stage: game.stage,
                delta: game.delta.clone(),
                epsilon: epsilon.clone(),
                optcost: result.optcost.iter().map(|(k, v)| (k.clone(), view(v))).collect(),
                strategy: result.strategy.clone(),
                stats: if stats { Some(result.solve.stats.clone()) } else { None },
            };
            write_or_print(output, &serde_json::to_string_pretty(&out)?)?;
        }
        Emit::Csv => {
            let dir = output.ok_or_else(|| anyhow!("--emit csv needs --output DIR"))?;
            std::fs::create_dir_all(dir)?;
            for (loc, f) in &result.optcost {
                let mut out = String::from("x,value\n");
                for (x, v) in f.breakpoints() {
                    out.push_str(&format!("{x},{v}\n"));
                }
                for (x, v, _) in f.overrides() {
                    out.push_str(&format!("{x},{v}\n"));
                }
                std::fs::write(dir.join(format!("{loc}.csv")), out)?;
            }
            if stats {
                std::fs::write(
                    dir.join("stats.json"),
                    serde_json::to_string_pretty(&result.solve.stats)?,
                )?;
            }
        }
        Emit::Svg => {
            let path = output.ok_or_else(|| anyhow!("--emit svg needs --output FILE"))?;
            let svg = render_svg(&result);
            write_or_print(Some(path), &svg)?;
        }
    }
    Ok(())
}

fn render_svg(result: &PipelineResult) -> String {
    render_svg_views(
        result
            .optcost
            .iter()
            .map(|(k, f)| (k.clone(), view(f)))
            .collect::<BTreeMap<_, _>>(),
    )
}

fn render_svg_views(fns: BTreeMap<String, FunctionView>) -> String {
    let w = 640.0;
    let h = 420.0;
    let margin = 40.0;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut max_x = 1.0f64;
    for f in fns.values() {
        for (x, v) in &f.breakpoints {
            if let Ext::Fin(q) = v {
                min_y = min_y.min(q.to_f64());
                max_y = max_y.max(q.to_f64());
            }
            max_x = max_x.max(x.to_f64());
        }
    }
    if !min_y.is_finite() {
        min_y = 0.0;
        max_y = 1.0;
    }
    if (max_y - min_y).abs() < 1e-9 {
        max_y = min_y + 1.0;
    }
    let sx = |x: f64| margin + x / max_x * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - min_y) / (max_y - min_y) * (h - 2.0 * margin);
    let palette = ["#1b6ca8", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#2c3e50"];
    let mut body = String::new();
    body.push_str(&format!(
        "<line x1='{m}' y1='{b}' x2='{r}' y2='{b}' stroke='#999'/>\
         <line x1='{m}' y1='{t}' x2='{m}' y2='{b}' stroke='#999'/>",
        m = margin,
        b = h - margin,
        r = w - margin,
        t = margin
    ));
    for (i, (loc, f)) in fns.iter().enumerate() {
        let color = palette[i % palette.len()];
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (x, v) in &f.breakpoints {
            match v {
                Ext::Fin(q) => runs.last_mut().unwrap().push((x.to_f64(), q.to_f64())),
                _ => {
                    if !runs.last().unwrap().is_empty() {
                        runs.push(Vec::new());
                    }
                }
            }
        }
        for run in runs.iter().filter(|r| r.len() >= 2) {
            let pts: Vec<String> =
                run.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            body.push_str(&format!(
                "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.5'/>",
                pts.join(" ")
            ));
        }
        for run in runs.iter().filter(|r| r.len() == 1) {
            let (x, y) = run[0];
            body.push_str(&format!(
                "<circle cx='{:.2}' cy='{:.2}' r='2.5' fill='{color}'/>",
                sx(x),
                sy(y)
            ));
        }
        for (x, v) in &f.isolated {
            if let Ext::Fin(q) = v {
                body.push_str(&format!(
                    "<circle cx='{:.2}' cy='{:.2}' r='2.5' fill='{color}'/>",
                    sx(x.to_f64()),
                    sy(q.to_f64())
                ));
            }
        }
        body.push_str(&format!(
            "<text x='{}' y='{}' fill='{color}' font-size='12'>{loc}</text>",
            w - margin + 4.0,
            margin + 14.0 * i as f64
        ));
    }
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{w}' height='{h}' \
         viewBox='0 0 {w} {h}'><rect width='100%' height='100%' fill='white'/>{body}</svg>"
    )
}

fn cmd_transform(input: &Path, output: &Path, to: ToStage, delta: Option<&Q>) -> Result<()> {
    let game = load_game(input, delta)?;
    reject_if_outside_class(&game)?;
    let mut current = game;
    let mut maps = Vec::new();
    let target = match to {
        ToStage::Dwell => Stage::DwellPtg,
        ToStage::Frptg => Stage::Frptg,
        ToStage::Resetfree => Stage::ResetFreeFrptg,
    };
    while current.stage != target {
        let (next, map) = match current.stage {
            Stage::Rptg => transform::to_dwell_ptg(&current),
            Stage::DwellPtg => transform::to_frptg(&current),
            Stage::Frptg => transform::to_reset_free(&current),
            Stage::ResetFreeFrptg => bail!("input is already past stage {target}"),
        }
        .map_err(|e| anyhow!("{e}"))?;
        maps.push(transform::describe_map(&map));
        current = next;
    }
    write_or_print(Some(output), &model::serialize_game(&current))?;
    let sidecar = output.with_extension("statemap.json");
    std::fs::write(&sidecar, serde_json::to_string_pretty(&maps)?)?;
    log(format!("wrote {} and {}", output.display(), sidecar.display()));
    Ok(())
}

fn cmd_simulate(input: &Path, play: &Path) -> Result<()> {
    let game = load_game(input, None)?;
    let text = std::fs::read(play).with_context(|| format!("reading {}", play.display()))?;
    let play: PlaySpec = serde_json::from_slice(&text).context("parsing play file")?;
    let out = semantics::replay(&game, &play).map_err(|e| anyhow!("{e}"))?;
    println!("step,location,clock,accumulated");
    for (i, c) in out.configs.iter().enumerate() {
        println!("{i},{},{},{}", c.loc, c.x, c.cost);
    }
    println!("reached_target,{}", out.reached_target);
    println!("total,{}", out.total);
    Ok(())
}

fn cmd_oracle(input: &Path, grid_k: u32, output: Option<&Path>) -> Result<()> {
    let game = load_game(input, None)?;
    reject_if_outside_class(&game)?;
    let res = semantics::oracle_optcost(&game, grid_k).map_err(|e| anyhow!("{e}"))?;
    log(format!("oracle converged after {} sweeps", res.sweeps));
    let mut out = String::from("location,index,x,value\n");
    for (loc, row) in &res.values {
        for (i, v) in row.iter().enumerate() {
            out.push_str(&format!("{loc},{i},{}/{grid_k},{v}\n", i));
        }
    }
    write_or_print(output, &out)?;
    Ok(())
}

fn cmd_plot(input: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let parsed: serde_json::Value = serde_json::from_slice(&text)?;
    let optcost = parsed
        .get("optcost")
        .ok_or_else(|| anyhow!("input is not a solve output (missing optcost)"))?;
    let mut fns: BTreeMap<String, FunctionView> = BTreeMap::new();
    for (loc, f) in optcost.as_object().ok_or_else(|| anyhow!("optcost is not an object"))? {
        let bps: Vec<(Q, Ext)> = serde_json::from_value(
            f.get("breakpoints").cloned().unwrap_or_default(),
        )?;
        let isolated: Vec<(Q, Ext)> =
            serde_json::from_value(f.get("isolated").cloned().unwrap_or(serde_json::json!([])))?;
        fns.insert(loc.clone(), FunctionView { breakpoints: bps, isolated });
    }
    write_or_print(Some(output), &render_svg_views(fns))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixtures(
    seed: u64,
    count: usize,
    locations: usize,
    price_min: i64,
    price_max: i64,
    guard_bound: i64,
    delta: &Q,
    output: &Path,
) -> Result<()> {
    let params = FixtureParams {
        locations,
        price_min,
        price_max,
        guard_bound,
        delta: delta.clone(),
    };
    let batch = fixtures::generate(seed, count, &params);
    std::fs::create_dir_all(output)?;
    for (i, g) in batch.games.iter().enumerate() {
        let path = output.join(format!("fixture_{seed}_{i}.json"));
        std::fs::write(&path, model::serialize_game(g))?;
    }
    println!(
        "wrote {} fixtures ({} attempts, acceptance rate {:.2})",
        batch.games.len(),
        batch.attempts,
        batch.acceptance_rate()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Validate { input } => {
            let game = load_game(&input, None)?;
            let diags = model::validate_game(&game);
            println!("{}", serde_json::to_string_pretty(&diags)?);
            if diags.iter().any(|d| d.class == DiagClass::NonZenoNegativeCycle) {
                return Err(anyhow::Error::new(Rejection("game outside the solvable class".into())));
            }
            Ok(())
        }
        Cmd::Transform { input, output, to, delta } => {
            cmd_transform(&input, &output, to, delta.as_ref())
        }
        Cmd::Solve { input, output, delta, epsilon, emit, stats } => {
            cmd_solve(&input, output.as_deref(), delta.as_ref(), &epsilon, emit, stats)
        }
        Cmd::Simulate { input, play } => cmd_simulate(&input, &play),
        Cmd::Oracle { input, grid_k, output } => cmd_oracle(&input, grid_k, output.as_deref()),
        Cmd::Plot { input, output } => cmd_plot(&input, &output),
        Cmd::Fixtures {
            seed,
            count,
            locations,
            price_min,
            price_max,
            guard_bound,
            delta,
            output,
        } => cmd_fixtures(seed, count, locations, price_min, price_max, guard_bound, &delta, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(rej) = e.downcast_ref::<Rejection>() {
                eprintln!("rejected: {rej}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
