//! Entry points behind the `wayfinder` binary. Everything writes to caller-supplied streams so
//! the commands can be driven from tests.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use wayfinder_core::data;
use wayfinder_core::dialogue::{DialogueMode, Effect};
use wayfinder_core::eval::{check_thresholds, render_report, run_suite, ReportFormat, Suite};
use wayfinder_core::grounding::Method;
use wayfinder_core::sim::{route_path, Engine, SimConfig};
use wayfinder_core::world::{load_scene, Pose2D, Scene, SceneError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "wayfinder", version, about = "Dialogue-driven guide robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Talk to the robot on stdin; replies are printed with an `R:` prefix.
    Repl(ReplArgs),
    /// Run an evaluation suite and print the report.
    Eval(EvalArgs),
    /// Check a scene file and plan every route in it.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ReplArgs {
    /// Built-in scene id or path to a scene JSON file.
    #[arg(long, default_value = "dragon_lab")]
    scene: String,
    #[arg(long, default_value = "clip", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Start pose as x,y,theta (defaults to the scene's first route start).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    start: Option<Pose2D>,
    /// Disable the user footprint in the local planner.
    #[arg(long)]
    no_user_polygon: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Suite file (defaults to the shipped suite).
    suite: Option<PathBuf>,
    #[arg(long, default_value = "table", value_parser = parse_format)]
    format: ReportFormat,
    /// Methods to evaluate; repeatable (defaults to both).
    #[arg(long, value_parser = parse_method)]
    method: Vec<Method>,
    /// Override the suite seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the suite scene (built-in id or path).
    #[arg(long)]
    scene: Option<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Built-in scene id or path to a scene JSON file.
    scene: String,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [x, y, th] => Ok(Pose2D::new(x, y, th)),
        _ => Err("expected x,y,theta".into()),
    }
}

/// Built-in scene id, or a path to a scene file.
pub fn resolve_scene(arg: &str) -> Result<Scene, SceneError> {
    match data::builtin_scene(arg) {
        Some(s) => Ok(s),
        None => load_scene(arg),
    }
}

pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let r = match cli.command {
        Command::Repl(a) => repl(a, stdin, out, err),
        Command::Eval(a) => eval(a, out, err),
        Command::Validate(a) => validate(a, out, err),
    };
    r.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: writing output: {e}");
        EXIT_FAILED
    })
}

fn fmt_pose(p: &Pose2D) -> String {
    format!("({:.2}, {:.2}, {:.2})", p.x, p.y, p.theta)
}

struct Repl {
    eng: Engine,
}

impl Repl {
    fn state_line(&self) -> String {
        let s = &self.eng.state;
        let goal = self.eng.session.active_landmark.as_deref().unwrap_or("-");
        format!(
            "t={:.1}s mode={} robot={} user={} goal={} collisions robot={} user={}",
            s.time,
            self.eng.mode(),
            fmt_pose(&s.robot),
            fmt_pose(&s.user),
            goal,
            self.eng.counters.robot_collisions,
            self.eng.counters.user_collisions
        )
    }

    fn say(&mut self, text: &str, out: &mut dyn Write) -> std::io::Result<()> {
        let turn = self.eng.utterance(text);
        if !turn.reply.is_empty() {
            writeln!(out, "R: {}", turn.reply)?;
        }
        for fx in &turn.effects {
            if let (Effect::DispatchGoal { landmark, .. }, Some(path)) = (fx, &self.eng.path) {
                writeln!(out, "* navigating to {landmark}, path {:.1} m", path.cost)?;
            }
        }
        Ok(())
    }

    /// Advances the simulation for at most `seconds` (or until the trip ends).
    fn advance(&mut self, seconds: Option<f64>, out: &mut dyn Write) -> std::io::Result<()> {
        let cfg = &self.eng.cfg;
        let budget = seconds.map_or(cfg.max_steps, |s| (s / cfg.dt).round().max(0.0) as u64);
        for _ in 0..budget {
            match self.eng.mode() {
                DialogueMode::Navigating => {}
                DialogueMode::Paused if seconds.is_some() => {}
                _ => return Ok(()),
            }
            if let Some(msg) = self.eng.tick() {
                writeln!(out, "R: {msg}")?;
                let (id, t) = self.eng.last_arrival.clone().unwrap_or_default();
                return writeln!(out, "* arrived at {id} at t={t:.1}s");
            }
        }
        if seconds.is_none() && self.eng.mode() == DialogueMode::Navigating {
            writeln!(out, "* still travelling after {budget} steps")?;
        }
        Ok(())
    }
}

const REPL_HELP: &str = "commands: /state, /go (travel until arrival), /run <seconds>, /log, /help, /quit";

fn repl(a: ReplArgs, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let scene = match resolve_scene(&a.scene) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "error: scene {:?}: {e}", a.scene)?;
            return Ok(EXIT_INVALID);
        }
    };
    let Some(start) = a.start.or_else(|| scene.routes.first().map(|r| r.start)) else {
        writeln!(err, "error: scene has no routes; pass --start x,y,theta")?;
        return Ok(EXIT_INVALID);
    };
    if !scene.grid.is_free_at(start.position()) {
        writeln!(err, "error: start {} is not in free space", fmt_pose(&start))?;
        return Ok(EXIT_INVALID);
    }
    writeln!(err, "scene {} ({} landmarks), method {}, seed {}; {REPL_HELP}", scene.name, scene.landmarks.len(), a.method, a.seed)?;
    let cfg = SimConfig { seed: a.seed, user_polygon: !a.no_user_polygon, ..SimConfig::default() };
    let res = Arc::new(data::shipped_resources(scene, a.method));
    let mut r = Repl { eng: Engine::new(res, cfg, start) };
    let mut line = String::new();
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            // End of input: let the current trip finish.
            r.advance(None, out)?;
            return Ok(EXIT_OK);
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(cmd) = text.strip_prefix('/') {
            let mut parts = cmd.split_whitespace();
            match (parts.next().unwrap_or(""), parts.next()) {
                ("quit" | "exit", _) => return Ok(EXIT_OK),
                ("state", _) => writeln!(out, "{}", r.state_line())?,
                ("go", _) => r.advance(None, out)?,
                ("run", Some(s)) => match s.parse::<f64>() {
                    Ok(secs) if secs >= 0.0 => r.advance(Some(secs), out)?,
                    _ => writeln!(err, "usage: /run <seconds>")?,
                },
                ("log", _) => write!(out, "{}", r.eng.session.transcript_jsonl())?,
                ("help", _) => writeln!(out, "{REPL_HELP}")?,
                _ => writeln!(err, "unknown command /{cmd}; {REPL_HELP}")?,
            }
            out.flush()?;
            continue;
        }
        r.say(text, out)?;
        out.flush()?;
    }
}

fn load_suite(path: Option<&Path>) -> Result<(Suite, Option<PathBuf>), String> {
    match path {
        None => Ok((Suite::shipped(), None)),
        Some(p) => {
            let suite = Suite::load(p).map_err(|e| e.to_string())?;
            Ok((suite, p.parent().map(Path::to_path_buf)))
        }
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let (mut suite, base) = match load_suite(a.suite.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_INVALID);
        }
    };
    if let Some(seed) = a.seed {
        suite.seed = seed;
    }
    let scene = match &a.scene {
        Some(s) => resolve_scene(s).map_err(|e| e.to_string()),
        None => suite.resolve_scene(base.as_deref()).map_err(|e| e.to_string()),
    };
    let scene = match scene {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "error: scene: {e}")?;
            return Ok(EXIT_INVALID);
        }
    };
    let methods = if a.method.is_empty() { Method::ALL.to_vec() } else { a.method };
    let report = match run_suite(&scene, &suite, &methods, &SimConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "error: {e}")?;
            return Ok(EXIT_INVALID);
        }
    };
    write!(out, "{}", render_report(&report, a.format))?;
    let checks = check_thresholds(&report, &suite.thresholds);
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        writeln!(err, "{} {} ({})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail)?;
    }
    if failed > 0 {
        writeln!(err, "{failed} of {} thresholds failed", checks.len())?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let scene = match resolve_scene(&a.scene) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "error: scene {:?}: {e}", a.scene)?;
            return Ok(EXIT_INVALID);
        }
    };
    let g = &scene.grid;
    writeln!(
        out,
        "scene {}: {}x{} cells at {} m, {} occupied; {} objects, {} landmarks, {} routes",
        scene.name,
        g.width,
        g.height,
        g.resolution,
        g.occupied_count(),
        scene.objects.len(),
        scene.landmarks.len(),
        scene.routes.len()
    )?;
    let routes = scene.routes.clone();
    let res = data::shipped_resources(scene, Method::Clip);
    let mut bad = 0;
    for (k, r) in routes.iter().enumerate() {
        let goal = res.scene.landmark(&r.goal_landmark).expect("validated scene").pose;
        match route_path(&res, r.start.position(), goal.position()) {
            Ok(p) => writeln!(out, "route {}: {} -> {}: path {:.1} m", k + 1, fmt_pose(&r.start), r.goal_landmark, p.cost)?,
            Err(e) => {
                bad += 1;
                writeln!(out, "route {}: {} -> {}: {e}", k + 1, fmt_pose(&r.start), r.goal_landmark)?;
            }
        }
    }
    if bad > 0 {
        writeln!(err, "{bad} route(s) cannot be planned")?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}
