use std::sync::OnceLock;

use wayfinder_core::eval::{check_thresholds, render_report, run_suite_detailed, ReportFormat, Suite, SuiteRun};
use wayfinder_core::grounding::Method;
use wayfinder_core::sim::SimConfig;

fn shipped_run() -> &'static SuiteRun {
    static RUN: OnceLock<SuiteRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let suite = Suite::shipped();
        let scene = suite.resolve_scene(None).unwrap();
        run_suite_detailed(&scene, &suite, &[Method::Clip, Method::Detector], &SimConfig::default()).unwrap()
    })
}

#[test]
fn lexicon_recognizes_every_expression() {
    let r = &shipped_run().report;
    let clip = r.method(Method::Clip).unwrap();
    assert_eq!(clip.trials, 15);
    assert_eq!(clip.lr_success, Some(100.0));
}

#[test]
fn detector_baseline_is_weaker() {
    let r = &shipped_run().report;
    let clip = r.method(Method::Clip).unwrap();
    let det = r.method(Method::Detector).unwrap();
    assert!(det.lr_success.unwrap() <= 53.3);
    assert!(clip.mean_rounds.unwrap() < det.mean_rounds.unwrap());
}

#[test]
fn navigation_follows_correct_recognition() {
    let run = shipped_run();
    for m in &run.report.methods {
        assert_eq!(m.nav_given_lr, Some(100.0), "{:?}", m.method);
        assert_eq!((m.robot_collisions, m.user_collisions), (0, 0));
    }
    for o in &run.outcomes {
        if o.metrics.lr_success {
            assert!(o.metrics.nav_success && o.metrics.final_distance <= 0.3, "{:?}", o.metrics);
        }
        assert!(!o.metrics.nav_success || o.metrics.lr_success);
    }
}

#[test]
fn all_thresholds_hold() {
    let checks = check_thresholds(&shipped_run().report, &Suite::shipped().thresholds);
    assert_eq!(checks.len(), 9);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn interaction_scores() {
    let r = &shipped_run().report;
    let nlu = r.nlu.as_ref().unwrap();
    assert_eq!(nlu.examples, 200);
    assert!(nlu.clean >= 95.0 && nlu.clean - nlu.noisy >= 10.0, "{nlu:?}");
    assert_eq!(r.qa.as_ref().unwrap().rate, Some(100.0));
    assert_eq!(r.nav_adj.as_ref().unwrap().rate, Some(100.0));
    let d = r.env_des.as_ref().unwrap();
    assert!(d.full.unwrap() <= d.partial.unwrap());
}

#[test]
fn rows_follow_suite_order() {
    let suite = Suite::shipped();
    let rows = &shipped_run().report.trials;
    assert_eq!(rows.len(), suite.trials.len());
    for (row, t) in rows.iter().zip(&suite.trials) {
        assert_eq!((row.route, row.method), (t.route, t.method));
    }
}

#[test]
fn single_method_runs_only_its_trials() {
    let suite = Suite::shipped();
    let scene = suite.resolve_scene(None).unwrap();
    let trials: Vec<_> = suite.trials.iter().filter(|t| t.method == Method::Detector).take(2).cloned().collect();
    let small = Suite { trials, questions: vec![], descriptions: vec![], adjustments: vec![], ..suite };
    let run = run_suite_detailed(&scene, &small, &[Method::Detector], &SimConfig::default()).unwrap();
    assert_eq!(run.report.methods.len(), 1);
    assert_eq!(run.report.trials.len(), 2);
    assert!(run.report.qa.is_none() && run.report.nav_adj.is_none());
    // Same trials, same results as in the full run.
    let full = &shipped_run().report.trials[15..17];
    assert_eq!(&run.report.trials[..], full);
}

#[test]
fn rendered_json_matches_report() {
    let r = &shipped_run().report;
    let text = render_report(r, ReportFormat::Json);
    let back: wayfinder_core::eval::SuiteReport = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, r);
}
