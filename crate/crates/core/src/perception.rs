//! Simulated detections from the camera view, description post-processing and template QA.
//!
//! Everything works on what the camera can see; nothing outside the sector is ever consulted.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nlu::tokenize;
use crate::world::{normalize_angle, Pose2D, SceneObject};

pub const EMPTY_DESCRIPTION: &str = "I don't see anything notable.";
pub const UNSURE: &str = "I am not sure.";
/// Nearest matching object closer than this is "close".
pub const CLOSE_DISTANCE: f64 = 2.0;

/// Axis-aligned box in normalised image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        let ix = ((self.cx + self.w / 2.0).min(o.cx + o.w / 2.0) - (self.cx - self.w / 2.0).max(o.cx - o.w / 2.0)).max(0.0);
        let iy = ((self.cy + self.h / 2.0).min(o.cy + o.h / 2.0) - (self.cy - self.h / 2.0).max(o.cy - o.h / 2.0)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + o.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_name: String,
    pub confidence: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptionConfig {
    pub iou_threshold: f64,
    pub confidence_floor: f64,
    pub max_classes: usize,
}

impl Default for DescriptionConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, confidence_floor: 0.5, max_classes: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorNoise {
    /// Confidence is perturbed uniformly within ±jitter.
    pub jitter: f64,
    /// Chance of an extra, slightly shifted copy of a detection.
    pub duplicate_prob: f64,
    pub fov: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        Self { jitter: 0.05, duplicate_prob: 0.1, fov: std::f64::consts::FRAC_PI_2 }
    }
}

impl DetectorNoise {
    pub fn exact(fov: f64) -> Self {
        Self { jitter: 0.0, duplicate_prob: 0.0, fov }
    }
}

fn clamp_box(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
    let w = w.clamp(0.01, 1.0);
    let h = h.clamp(0.01, 1.0);
    BBox { cx: cx.clamp(w / 2.0, 1.0 - w / 2.0), cy: cy.clamp(h / 2.0, 1.0 - h / 2.0), w, h }
}

/// One detection per object with probability `detectability`; box size falls off as 1/distance.
pub fn simulate_detections(visible: &[SceneObject], camera: &Pose2D, noise: &DetectorNoise, seed: u64) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for o in visible {
        let d = o.position.position() - camera.position();
        let dist = d.norm().max(0.3);
        let bearing = normalize_angle(d.y.atan2(d.x) - camera.theta);
        let seen: f64 = rng.random();
        let jitter: f64 = rng.random_range(-1.0..=1.0) * noise.jitter;
        let dup: f64 = rng.random();
        let shift: f64 = rng.random_range(-1.0..=1.0);
        if seen >= o.detectability {
            continue;
        }
        let size = 2.0 * o.footprint_halfwidths[0].max(o.footprint_halfwidths[1]);
        let bbox = clamp_box(0.5 - bearing / noise.fov, 0.55, size / (dist * noise.fov), 0.8 / dist);
        let confidence = (o.base_confidence + jitter).clamp(0.0, 1.0);
        out.push(Detection { class_name: o.class_name.clone(), confidence, bbox });
        if dup < noise.duplicate_prob {
            let b = clamp_box(bbox.cx + 0.05 * shift * bbox.w, bbox.cy, bbox.w, bbox.h);
            out.push(Detection { class_name: o.class_name.clone(), confidence: confidence * 0.9, bbox: b });
        }
    }
    out
}

/// Greedy class-wise non-maximum suppression; the result is sorted by descending confidence.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut kept: Vec<Detection> = Vec::new();
    for d in order {
        if !kept.iter().any(|k| k.class_name == d.class_name && k.bbox.iou(&d.bbox) > iou_threshold) {
            kept.push(d.clone());
        }
    }
    kept
}

pub fn plural(class: &str, n: usize) -> String {
    if n == 1 {
        return class.to_owned();
    }
    match class {
        "person" => "people".to_owned(),
        c if c.ends_with('s') || c.ends_with('x') || c.ends_with("ch") || c.ends_with("sh") => format!("{c}es"),
        c => format!("{c}s"),
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Per-class counts after NMS and the confidence floor, largest average box first.
pub fn summarize(dets: &[Detection], cfg: &DescriptionConfig) -> Vec<(String, usize)> {
    let mut groups: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    let kept = nms(dets, cfg.iou_threshold);
    for d in kept.iter().filter(|d| d.confidence >= cfg.confidence_floor) {
        let g = groups.entry(d.class_name.as_str()).or_insert((0, 0.0));
        g.0 += 1;
        g.1 += d.bbox.area();
    }
    let mut ranked: Vec<(&str, usize, f64)> = groups.into_iter().map(|(c, (n, a))| (c, n, a / n as f64)).collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(b.0)));
    ranked.truncate(cfg.max_classes.max(1));
    ranked.into_iter().map(|(c, n, _)| (c.to_owned(), n)).collect()
}

pub fn describe(dets: &[Detection], cfg: &DescriptionConfig) -> String {
    let parts: Vec<String> = summarize(dets, cfg).into_iter().map(|(c, n)| format!("{n} {}", plural(&c, n))).collect();
    if parts.is_empty() {
        return EMPTY_DESCRIPTION.to_owned();
    }
    join_and(&parts)
}

fn singular(tok: &str) -> String {
    match tok {
        "people" | "persons" => "person".to_owned(),
        t if t.ends_with("ches") || t.ends_with("shes") || t.ends_with("ses") || t.ends_with("xes") => {
            t[..t.len() - 2].to_owned()
        }
        t if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") => t[..t.len() - 1].to_owned(),
        t => t.to_owned(),
    }
}

/// Visible objects whose class is named anywhere in the question.
fn mentioned<'a>(tokens: &[String], visible: &'a [SceneObject]) -> (bool, Vec<&'a SceneObject>) {
    let wanted: Vec<String> = tokens.iter().map(|t| singular(t)).collect();
    let named = visible.iter().filter(|o| wanted.contains(&o.class_name)).collect::<Vec<_>>();
    (!named.is_empty(), named)
}

fn has_seq(tokens: &[String], seq: &[&str]) -> bool {
    tokens.windows(seq.len()).any(|w| w.iter().zip(seq).all(|(a, b)| a == b))
}

/// Template QA over the visible set only: count, distance, identification and existence.
pub fn answer_question(question: &str, visible: &[SceneObject], camera: &Pose2D) -> String {
    let toks = tokenize(question);
    let dist = |o: &SceneObject| o.position.position().distance(camera.position());
    if has_seq(&toks, &["how", "many"]) {
        let after: Vec<String> = toks.iter().skip_while(|t| *t != "many").skip(1).cloned().collect();
        if after.is_empty() {
            return UNSURE.to_owned();
        }
        return mentioned(&after, visible).1.len().to_string();
    }
    if has_seq(&toks, &["how", "far"]) {
        let (_, named) = mentioned(&toks, visible);
        return match named.iter().map(|o| dist(o)).min_by(f64::total_cmp) {
            Some(d) if d < CLOSE_DISTANCE => "close".to_owned(),
            Some(_) => "far".to_owned(),
            None => UNSURE.to_owned(),
        };
    }
    if has_seq(&toks, &["what", "is"]) || toks.first().is_some_and(|t| t == "whats") {
        return match visible.iter().min_by(|a, b| dist(a).total_cmp(&dist(b))) {
            Some(o) => crate::grounding::with_article(&o.class_name),
            None => UNSURE.to_owned(),
        };
    }
    let existence = matches!(toks.first().map(String::as_str), Some("is" | "are"))
        || toks.iter().any(|t| t == "any" || t == "there");
    if existence {
        return if mentioned(&toks, visible).0 { "yes" } else { "no" }.to_owned();
    }
    UNSURE.to_owned()
}
