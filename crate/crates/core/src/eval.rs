//! Scripted evaluation suites: trial batches per recognition method plus perception and NLU
//! checks, aggregated into one report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::dialogue::{Effect, Speaker};
use crate::grounding::Method;
use crate::nlu::{accuracy, corrupt_transcript, NluModel};
use crate::perception::{answer_question, simulate_detections, summarize, DescriptionConfig, DetectorNoise};
use crate::sim::{run_trial, Resources, ScriptItem, SimConfig, TrialError, TrialOptions, TrialOutcome};
use crate::world::{visible_objects, Pose2D, Route, Scene, SceneError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid suite file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown scene {0:?}")]
    UnknownScene(String),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("{item}: route {route} does not exist (the scene has {routes})")]
    UnknownRoute { item: String, route: usize, routes: usize },
    #[error("{item}: {source}")]
    Trial { item: String, source: TrialError },
}

/// One scripted trial. Routes are numbered from 1 in scene order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub route: usize,
    pub method: Method,
    pub script: Vec<ScriptItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeItem {
    pub pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub pose: Pose2D,
    pub question: String,
    pub answer: String,
}

/// A navigation-adjustment trial: passes if the robot arrives and the pause/resume/speed effects
/// (by tag, dispatches excluded) happen in exactly this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustItem {
    pub route: usize,
    #[serde(default = "default_method")]
    pub method: Method,
    pub script: Vec<ScriptItem>,
    pub expect: Vec<String>,
}

fn default_method() -> Method {
    Method::Clip
}

/// Pass/fail bounds; rates are percentages. Absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub lr_min: BTreeMap<Method, f64>,
    pub lr_max: BTreeMap<Method, f64>,
    /// Mean rounds of the first method must be strictly below the second's.
    pub rounds_less: Option<(Method, Method)>,
    pub nav_given_lr_min: Option<f64>,
    pub nlu_clean_min: Option<f64>,
    pub nlu_drop_min: Option<f64>,
    pub qa_min: Option<f64>,
    pub nav_adj_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    #[serde(default = "default_scene")]
    pub scene: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_noise_rate")]
    pub noise_rate: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub trials: Vec<TrialSpec>,
    #[serde(default)]
    pub descriptions: Vec<DescribeItem>,
    #[serde(default)]
    pub questions: Vec<QaItem>,
    #[serde(default)]
    pub adjustments: Vec<AdjustItem>,
}

fn default_scene() -> String {
    "dragon_lab".to_owned()
}

fn default_seed() -> u64 {
    7
}

fn default_noise_rate() -> f64 {
    0.3
}

impl Suite {
    /// Accepts either a full suite object or a bare list of trials (reference scene, seed 7).
    pub fn from_json(text: &str) -> Result<Suite, EvalError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.is_array() {
            let trials: Vec<TrialSpec> = serde_json::from_value(v)?;
            return Ok(Suite {
                scene: default_scene(),
                seed: default_seed(),
                noise_rate: default_noise_rate(),
                thresholds: Thresholds::default(),
                trials,
                descriptions: Vec::new(),
                questions: Vec::new(),
                adjustments: Vec::new(),
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn load(path: &Path) -> Result<Suite, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
        Suite::from_json(&text)
    }

    /// The suite's scene: a shipped scene id, or a path (relative to `base` if given) to a scene file.
    pub fn resolve_scene(&self, base: Option<&Path>) -> Result<Scene, EvalError> {
        if let Some(s) = data::builtin_scene(&self.scene) {
            return Ok(s);
        }
        if !self.scene.ends_with(".json") {
            return Err(EvalError::UnknownScene(self.scene.clone()));
        }
        let p = base.map_or_else(|| Path::new(&self.scene).to_path_buf(), |b| b.join(&self.scene));
        let text = std::fs::read_to_string(&p).map_err(|e| EvalError::Io { path: p.display().to_string(), source: e })?;
        Ok(Scene::from_json(&text)?)
    }

    pub fn shipped() -> Suite {
        Suite::from_json(data::SUITE).expect("shipped suite is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub trials: u32,
    pub lr_success: Option<f64>,
    pub nav_success: Option<f64>,
    /// Navigation success over the trials whose landmark recognition succeeded.
    pub nav_given_lr: Option<f64>,
    /// Mean dialogue rounds over the trials with a successful landmark recognition.
    pub mean_rounds: Option<f64>,
    pub mean_traversal_time: Option<f64>,
    pub robot_collisions: u32,
    pub user_collisions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub route: usize,
    pub method: Method,
    pub first_line: String,
    pub lr_success: bool,
    pub nav_success: bool,
    pub rounds: u32,
    pub traversal_time: f64,
    pub robot_collisions: u32,
    pub user_collisions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluReport {
    pub examples: u32,
    pub noise_rate: f64,
    pub clean: f64,
    pub noisy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeReport {
    pub items: u32,
    pub full: Option<f64>,
    pub partial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub items: u32,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub scene: String,
    pub seed: u64,
    pub methods: Vec<MethodReport>,
    pub nlu: Option<NluReport>,
    pub env_des: Option<DescribeReport>,
    pub qa: Option<RateReport>,
    pub nav_adj: Option<RateReport>,
    pub trials: Vec<TrialRow>,
}

impl SuiteReport {
    pub fn empty(scene: &str, seed: u64) -> Self {
        SuiteReport {
            scene: scene.to_owned(),
            seed,
            methods: Vec::new(),
            nlu: None,
            env_des: None,
            qa: None,
            nav_adj: None,
            trials: Vec::new(),
        }
    }

    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Everything a suite run produced; outcomes are in suite order.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: SuiteReport,
    pub outcomes: Vec<TrialOutcome>,
}

fn percent(k: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| 100.0 * k as f64 / n as f64)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Aggregates one method's trial rows; independent of row order.
pub fn aggregate(method: Method, rows: &[TrialRow]) -> MethodReport {
    let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.method == method).collect();
    let n = mine.len();
    let lr = mine.iter().filter(|r| r.lr_success).count();
    let nav = mine.iter().filter(|r| r.nav_success).count();
    let nav_lr = mine.iter().filter(|r| r.lr_success && r.nav_success).count();
    MethodReport {
        method,
        trials: n as u32,
        lr_success: percent(lr, n),
        nav_success: percent(nav, n),
        nav_given_lr: percent(nav_lr, lr),
        mean_rounds: mean(mine.iter().filter(|r| r.lr_success).map(|r| f64::from(r.rounds))),
        mean_traversal_time: mean(mine.iter().filter(|r| r.nav_success).map(|r| r.traversal_time)),
        robot_collisions: mine.iter().map(|r| r.robot_collisions).sum(),
        user_collisions: mine.iter().map(|r| r.user_collisions).sum(),
    }
}

/// Per-example corruption seed used for the noisy NLU score.
pub fn corruption_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(index as u64)
}

pub fn nlu_report(model: &NluModel, seed: u64, rate: f64) -> NluReport {
    let corpus = data::eval_corpus();
    let table = data::confusion_table();
    NluReport {
        examples: corpus.len() as u32,
        noise_rate: rate,
        clean: 100.0 * accuracy(model, &corpus, |_, t| t.to_owned()),
        noisy: 100.0 * accuracy(model, &corpus, |k, t| corrupt_transcript(t, &table, rate, corruption_seed(seed, k))),
    }
}

/// (full, partial) correctness of a noisy description against the noise-free one at `pose`.
/// Full: identical class/count list. Partial: at least one named class is really there.
pub fn judge_description(scene: &Scene, pose: &Pose2D, cfg: &SimConfig, seed: u64) -> (bool, bool) {
    let visible = visible_objects(scene, pose, cfg.camera_fov, cfg.camera_range);
    let certain: Vec<_> = visible.iter().cloned().map(|mut o| {
        o.detectability = 1.0;
        o
    }).collect();
    let dc = DescriptionConfig::default();
    let truth = summarize(&simulate_detections(&certain, pose, &DetectorNoise::exact(cfg.camera_fov), 0), &dc);
    let noise = DetectorNoise { fov: cfg.camera_fov, ..DetectorNoise::default() };
    let got = summarize(&simulate_detections(&visible, pose, &noise, seed), &dc);
    let full = got == truth;
    let partial = full || got.iter().any(|(c, _)| truth.iter().any(|(t, _)| t == c));
    (full, partial)
}

fn effect_tag(e: &Effect) -> &'static str {
    match e {
        Effect::DispatchGoal { .. } => "dispatch_goal",
        Effect::CancelGoal => "cancel_goal",
        Effect::PauseGoal => "pause_goal",
        Effect::ResumeGoal { .. } => "resume_goal",
        Effect::SetSpeed { .. } => "set_speed",
    }
}

/// Effect tags of the robot's turns, dispatches left out.
pub fn adjustment_effects(outcome: &TrialOutcome) -> Vec<String> {
    outcome
        .transcript
        .iter()
        .filter(|e| e.speaker == Speaker::Robot)
        .flat_map(|e| e.effects.iter())
        .map(effect_tag)
        .filter(|t| *t != "dispatch_goal")
        .map(str::to_owned)
        .collect()
}

fn route_of(scene: &Scene, item: String, route: usize) -> Result<&Route, EvalError> {
    route
        .checked_sub(1)
        .and_then(|k| scene.routes.get(k))
        .ok_or(EvalError::UnknownRoute { item, route, routes: scene.routes.len() })
}

struct Job {
    item: String,
    number: usize,
    method: Method,
    route: Route,
    script: Vec<ScriptItem>,
}

/// Runs `jobs` on up to `threads` scoped workers; results keep input order.
fn par_map<T: Sync, R: Send>(jobs: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, jobs.len().max(1));
    let chunk = jobs.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("trial worker panicked")).collect()
    })
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every trial of the listed methods plus the perception, QA, adjustment and NLU checks.
/// An empty method list gives an empty report.
pub fn run_suite(scene: &Scene, suite: &Suite, methods: &[Method], cfg: &SimConfig) -> Result<SuiteReport, EvalError> {
    Ok(run_suite_detailed(scene, suite, methods, cfg)?.report)
}

pub fn run_suite_detailed(scene: &Scene, suite: &Suite, methods: &[Method], cfg: &SimConfig) -> Result<SuiteRun, EvalError> {
    if methods.is_empty() {
        return Ok(SuiteRun { report: SuiteReport::empty(&scene.name, suite.seed), outcomes: Vec::new() });
    }
    let cfg = SimConfig { seed: suite.seed, ..cfg.clone() };
    let nlu = data::shipped_nlu();
    let mut resources: BTreeMap<Method, Arc<Resources>> = BTreeMap::new();
    let mut need: Vec<Method> = methods.to_vec();
    need.extend(suite.adjustments.iter().map(|a| a.method));
    for m in need {
        resources.entry(m).or_insert_with(|| Arc::new(data::shipped_resources_with(scene.clone(), m, nlu.clone())));
    }

    let mut jobs = Vec::new();
    for (k, t) in suite.trials.iter().enumerate().filter(|(_, t)| methods.contains(&t.method)) {
        let item = format!("trial {}", k + 1);
        let route = route_of(scene, item.clone(), t.route)?.clone();
        jobs.push(Job { item, number: t.route, method: t.method, route, script: t.script.clone() });
    }
    let trial_count = jobs.len();
    for (k, a) in suite.adjustments.iter().enumerate() {
        let item = format!("adjustment {}", k + 1);
        let route = route_of(scene, item.clone(), a.route)?.clone();
        jobs.push(Job { item, number: a.route, method: a.method, route, script: a.script.clone() });
    }
    let opts = TrialOptions { auto_confirm: true };
    let run = |j: &Job| {
        run_trial(Arc::clone(&resources[&j.method]), &j.route, &j.script, &cfg, opts)
            .map_err(|e| EvalError::Trial { item: j.item.clone(), source: e })
    };
    let mut results = par_map(&jobs, default_threads(), run).into_iter().collect::<Result<Vec<_>, _>>()?;
    let adjust_out = results.split_off(trial_count);

    let rows: Vec<TrialRow> = jobs[..trial_count]
        .iter()
        .zip(&results)
        .map(|(j, o)| TrialRow {
            route: j.number,
            method: j.method,
            first_line: first_line(&j.script),
            lr_success: o.metrics.lr_success,
            nav_success: o.metrics.nav_success,
            rounds: o.metrics.dialogue_rounds,
            traversal_time: o.metrics.traversal_time,
            robot_collisions: o.metrics.robot_collisions,
            user_collisions: o.metrics.user_collisions,
        })
        .collect();
    let mut order: Vec<Method> = Vec::new();
    for m in methods {
        if !order.contains(m) {
            order.push(*m);
        }
    }
    let method_reports = order.iter().map(|m| aggregate(*m, &rows)).collect();

    let env_des = (!suite.descriptions.is_empty()).then(|| {
        let judged: Vec<(bool, bool)> = suite
            .descriptions
            .iter()
            .enumerate()
            .map(|(k, d)| judge_description(scene, &d.pose, &cfg, suite.seed.wrapping_add(k as u64)))
            .collect();
        let n = judged.len();
        DescribeReport {
            items: n as u32,
            full: percent(judged.iter().filter(|j| j.0).count(), n),
            partial: percent(judged.iter().filter(|j| j.1).count(), n),
        }
    });
    let qa = (!suite.questions.is_empty()).then(|| {
        let ok = suite
            .questions
            .iter()
            .filter(|q| {
                let visible = visible_objects(scene, &q.pose, cfg.camera_fov, cfg.camera_range);
                answer_question(&q.question, &visible, &q.pose) == q.answer
            })
            .count();
        RateReport { items: suite.questions.len() as u32, rate: percent(ok, suite.questions.len()) }
    });
    let nav_adj = (!suite.adjustments.is_empty()).then(|| {
        let ok = suite
            .adjustments
            .iter()
            .zip(&adjust_out)
            .filter(|(a, o)| o.metrics.nav_success && adjustment_effects(o) == a.expect)
            .count();
        RateReport { items: suite.adjustments.len() as u32, rate: percent(ok, suite.adjustments.len()) }
    });

    let report = SuiteReport {
        scene: scene.name.clone(),
        seed: suite.seed,
        methods: method_reports,
        nlu: Some(nlu_report(&nlu, suite.seed, suite.noise_rate)),
        env_des,
        qa,
        nav_adj,
        trials: rows,
    };
    let mut outcomes = results;
    outcomes.extend(adjust_out);
    Ok(SuiteRun { report, outcomes })
}

fn first_line(script: &[ScriptItem]) -> String {
    script
        .iter()
        .map(|s| match s {
            ScriptItem::Line(t) => t.clone(),
            ScriptItem::Timed { text, .. } => text.clone(),
        })
        .next()
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.digits$}"))
}

/// Evaluates each configured threshold. A bound on a missing value fails.
pub fn check_thresholds(r: &SuiteReport, t: &Thresholds) -> Vec<ThresholdCheck> {
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| out.push(ThresholdCheck { name, passed, detail });
    for (m, min) in &t.lr_min {
        let v = r.method(*m).and_then(|x| x.lr_success);
        push(format!("lr[{m}] >= {min}"), v.is_some_and(|v| v >= *min - 1e-9), fmt_opt(v, 2));
    }
    for (m, max) in &t.lr_max {
        let v = r.method(*m).and_then(|x| x.lr_success);
        push(format!("lr[{m}] <= {max}"), v.is_some_and(|v| v <= *max + 1e-9), fmt_opt(v, 2));
    }
    if let Some((a, b)) = t.rounds_less {
        let ra = r.method(a).and_then(|x| x.mean_rounds);
        let rb = r.method(b).and_then(|x| x.mean_rounds);
        let ok = matches!((ra, rb), (Some(x), Some(y)) if x < y);
        push(format!("rounds[{a}] < rounds[{b}]"), ok, format!("{} vs {}", fmt_opt(ra, 2), fmt_opt(rb, 2)));
    }
    if let Some(min) = t.nav_given_lr_min {
        for m in &r.methods {
            push(format!("nav|lr[{}] >= {min}", m.method), m.nav_given_lr.is_some_and(|v| v >= min - 1e-9), fmt_opt(m.nav_given_lr, 2));
        }
    }
    if let Some(min) = t.nlu_clean_min {
        let v = r.nlu.as_ref().map(|n| n.clean);
        push(format!("nlu clean >= {min}"), v.is_some_and(|v| v >= min - 1e-9), fmt_opt(v, 2));
    }
    if let Some(min) = t.nlu_drop_min {
        let v = r.nlu.as_ref().map(|n| n.clean - n.noisy);
        push(format!("nlu clean - noisy >= {min}"), v.is_some_and(|v| v >= min - 1e-9), fmt_opt(v, 2));
    }
    if let Some(min) = t.qa_min {
        let v = r.qa.as_ref().and_then(|q| q.rate);
        push(format!("qa >= {min}"), v.is_some_and(|v| v >= min - 1e-9), fmt_opt(v, 2));
    }
    if let Some(min) = t.nav_adj_min {
        let v = r.nav_adj.as_ref().and_then(|q| q.rate);
        push(format!("nav adjustment >= {min}"), v.is_some_and(|v| v >= min - 1e-9), fmt_opt(v, 2));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown format {s:?} (expected table or json)")),
        }
    }
}

pub fn render_report(r: &SuiteReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => render_table(r),
    }
}

fn row(cells: &[String], widths: &[usize]) -> String {
    let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
    format!("| {} |\n", parts.join(" | "))
}

fn table(head: &[&str], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for r in body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = row(&head.iter().map(|h| h.to_string()).collect::<Vec<_>>(), &widths);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out += &row(&rule, &widths);
    for r in body {
        out += &row(r, &widths);
    }
    out
}

fn render_table(r: &SuiteReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scene {} seed {}", r.scene, r.seed);
    out.push('\n');
    out += "landmark recognition and navigation (%)\n";
    let body: Vec<Vec<String>> = r
        .methods
        .iter()
        .map(|m| {
            vec![
                m.method.to_string(),
                m.trials.to_string(),
                fmt_opt(m.lr_success, 2),
                fmt_opt(m.mean_rounds, 2),
                fmt_opt(m.nav_success, 2),
                fmt_opt(m.nav_given_lr, 2),
            ]
        })
        .collect();
    out += &table(&["method", "trials", "LR overall", "# rounds", "nav overall", "nav correct-LR"], &body);
    out.push('\n');
    out += "interaction accuracy (%)\n";
    let (clean, noisy) = r.nlu.as_ref().map_or((None, None), |n| (Some(n.clean), Some(n.noisy)));
    let (full, partial) = r.env_des.as_ref().map_or((None, None), |d| (d.full, d.partial));
    let body = vec![vec![
        fmt_opt(clean, 2),
        fmt_opt(noisy, 2),
        fmt_opt(full, 2),
        fmt_opt(partial, 2),
        fmt_opt(r.qa.as_ref().and_then(|q| q.rate), 2),
        fmt_opt(r.nav_adj.as_ref().and_then(|q| q.rate), 2),
    ]];
    out += &table(&["NLU clean", "NLU noisy", "EnvDes full", "EnvDes partial", "QA", "NavAdj"], &body);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_row(method: Method, lr: bool, nav: bool, rounds: u32) -> TrialRow {
        TrialRow {
            route: 1,
            method,
            first_line: String::new(),
            lr_success: lr,
            nav_success: nav,
            rounds,
            traversal_time: if nav { 20.0 } else { 0.0 },
            robot_collisions: 0,
            user_collisions: 0,
        }
    }

    fn sample_report() -> SuiteReport {
        let rows = vec![
            trial_row(Method::Clip, true, true, 2),
            trial_row(Method::Detector, false, false, 1),
            trial_row(Method::Detector, true, true, 3),
        ];
        SuiteReport {
            scene: "dragon_lab".into(),
            seed: 7,
            methods: vec![aggregate(Method::Clip, &rows), aggregate(Method::Detector, &rows)],
            nlu: Some(NluReport { examples: 200, noise_rate: 0.3, clean: 97.5, noisy: 75.0 }),
            env_des: Some(DescribeReport { items: 6, full: Some(50.0), partial: Some(100.0) }),
            qa: Some(RateReport { items: 3, rate: Some(100.0) }),
            nav_adj: None,
            trials: rows,
        }
    }

    #[test]
    fn aggregate_rates() {
        let r = sample_report();
        let d = r.method(Method::Detector).unwrap();
        assert_eq!(d.trials, 2);
        assert_eq!(d.lr_success, Some(50.0));
        assert_eq!(d.nav_given_lr, Some(100.0));
        // rounds only count trials whose recognition succeeded
        assert_eq!(d.mean_rounds, Some(3.0));
        assert_eq!(d.mean_traversal_time, Some(20.0));
    }

    #[test]
    fn zero_trials_is_all_na() {
        let m = aggregate(Method::Clip, &[]);
        assert_eq!(m.trials, 0);
        assert!(m.lr_success.is_none() && m.nav_success.is_none() && m.nav_given_lr.is_none() && m.mean_rounds.is_none());
        let r = SuiteReport { methods: vec![m], ..SuiteReport::empty("x", 1) };
        let text = render_report(&r, ReportFormat::Table);
        let clip = text.lines().find(|l| l.starts_with("| clip")).unwrap();
        let cells: Vec<&str> = clip.trim_matches('|').split('|').map(str::trim).collect();
        assert_eq!(&cells[2..], &["n/a"; 4]);
        let inter = text.lines().last().unwrap();
        assert!(inter.trim_matches('|').split('|').all(|c| c.trim() == "n/a"), "{inter}");
    }

    #[test]
    fn table_columns() {
        let text = render_report(&sample_report(), ReportFormat::Table);
        let head = text.lines().find(|l| l.starts_with("| method")).unwrap();
        let cols: Vec<&str> = head.trim_matches('|').split('|').map(str::trim).collect();
        assert_eq!(cols, ["method", "trials", "LR overall", "# rounds", "nav overall", "nav correct-LR"]);
        assert!(text.contains("| detector | 2      | 50.00"));
    }

    #[test]
    fn json_round_trip() {
        let r = sample_report();
        let text = render_report(&r, ReportFormat::Json);
        let back: SuiteReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn format_parse() {
        assert_eq!("json".parse::<ReportFormat>(), Ok(ReportFormat::Json));
        assert_eq!("table".parse::<ReportFormat>(), Ok(ReportFormat::Table));
        assert!("csv".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn thresholds() {
        let r = sample_report();
        let mut t = Thresholds::default();
        t.lr_min.insert(Method::Clip, 100.0);
        t.rounds_less = Some((Method::Clip, Method::Detector));
        t.nav_given_lr_min = Some(100.0);
        t.qa_min = Some(100.0);
        let checks = check_thresholds(&r, &t);
        assert_eq!(checks.len(), 5);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");

        t.lr_min.insert(Method::Clip, 101.0);
        t.nav_adj_min = Some(50.0);
        let failed: Vec<String> = check_thresholds(&r, &t).into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(failed, ["lr[clip] >= 101", "nav adjustment >= 50"]);
    }

    #[test]
    fn suite_parses_bare_list() {
        let s = Suite::from_json(r#"[{"route": 1, "method": "lexicon", "script": ["take me to the door", "yes"]}]"#).unwrap();
        assert_eq!(s.scene, "dragon_lab");
        assert_eq!(s.seed, 7);
        assert_eq!(s.trials[0].method, Method::Clip);
        assert_eq!(s.trials[0].script, vec![ScriptItem::from("take me to the door"), ScriptItem::from("yes")]);
        assert!(matches!(Suite::from_json("{\"trials\": 3}"), Err(EvalError::Parse(_))));
    }

    #[test]
    fn shipped_suite_shape() {
        let s = Suite::shipped();
        assert_eq!(s.trials.len(), 30);
        for m in [Method::Clip, Method::Detector] {
            let routes: Vec<usize> = s.trials.iter().filter(|t| t.method == m).map(|t| t.route).collect();
            assert_eq!(routes.len(), 15);
            for r in 1..=3 {
                assert_eq!(routes.iter().filter(|x| **x == r).count(), 5);
            }
        }
        assert!(!s.questions.is_empty() && !s.descriptions.is_empty() && !s.adjustments.is_empty());
    }

    #[test]
    fn unknown_route_is_an_error() {
        let scene = data::reference_scene();
        let suite = Suite::from_json(r#"[{"route": 4, "method": "clip", "script": ["hi"]}]"#).unwrap();
        let err = run_suite(&scene, &suite, &[Method::Clip], &SimConfig::default()).unwrap_err();
        assert!(matches!(err, EvalError::UnknownRoute { route: 4, routes: 3, .. }), "{err}");
        let zero = Suite::from_json(r#"[{"route": 0, "method": "clip", "script": ["hi"]}]"#).unwrap();
        assert!(run_suite(&scene, &zero, &[Method::Clip], &SimConfig::default()).is_err());
    }

    #[test]
    fn empty_methods_give_empty_report() {
        let scene = data::reference_scene();
        let r = run_suite(&scene, &Suite::shipped(), &[], &SimConfig::default()).unwrap();
        assert_eq!(r, SuiteReport::empty("dragon_lab", 7));
    }

    #[test]
    fn description_judging() {
        let scene = data::reference_scene();
        let cfg = SimConfig::default();
        // The lounge: sofa, chair and thermostat all clearly visible.
        let pose = Pose2D::new(9.7, 9.0, std::f64::consts::FRAC_PI_2);
        let (full, partial) = judge_description(&scene, &pose, &cfg, 1);
        assert!(partial, "full={full}");
        // Facing a blank wall: nothing to see, nothing claimed.
        let (full, partial) = judge_description(&scene, &Pose2D::new(1.0, 1.0, -std::f64::consts::FRAC_PI_2), &cfg, 1);
        assert!(full && partial);
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u32> = (0..23).collect();
        for threads in [1, 2, 4, 64] {
            assert_eq!(par_map(&xs, threads, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        }
        assert!(par_map(&Vec::<u32>::new(), 4, |x| *x).is_empty());
    }

    fn arb_row() -> impl Strategy<Value = TrialRow> {
        (prop_oneof![Just(Method::Clip), Just(Method::Detector)], any::<bool>(), any::<bool>(), 0u32..6).prop_map(
            |(m, lr, nav, rounds)| trial_row(m, lr, nav && lr, rounds),
        )
    }

    proptest! {
        #[test]
        fn aggregation_ignores_order(rows in proptest::collection::vec(arb_row(), 0..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for m in [Method::Clip, Method::Detector] {
                let a = aggregate(m, &rows);
                prop_assert_eq!(&a, &aggregate(m, &shuffled));
                for v in [a.lr_success, a.nav_success, a.nav_given_lr].into_iter().flatten() {
                    prop_assert!((0.0..=100.0).contains(&v));
                }
            }
        }
    }
}
