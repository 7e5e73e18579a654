use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{GridError, GridFile, OccupancyGrid};
use super::pose::Pose2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub class_name: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    pub position: Pose2D,
    pub footprint_halfwidths: [f64; 2],
    pub base_confidence: f64,
    pub detectability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: String,
    pub pose: Pose2D,
    /// Bag of words standing in for the landmark photo.
    pub description_tokens: Vec<String>,
    pub canonical_phrases: Vec<String>,
    pub detector_classes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Landmark {
    /// First canonical phrase, used when nothing more specific applies.
    pub fn name(&self) -> &str {
        self.canonical_phrases.first().map_or(self.id.as_str(), String::as_str)
    }

    /// The canonical phrase mentioning `word`, falling back to [`Landmark::name`].
    pub fn phrase_for(&self, word: Option<&str>) -> &str {
        word.and_then(|w| {
            self.canonical_phrases
                .iter()
                .find(|p| p.split_whitespace().any(|t| t == w))
        })
        .map_or(self.name(), String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub start: Pose2D,
    pub goal_landmark: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub grid: OccupancyGrid,
    pub objects: Vec<SceneObject>,
    pub landmarks: Vec<Landmark>,
    pub routes: Vec<Route>,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid grid: {0}")]
    Grid(#[from] GridError),
    #[error("invalid scene: {0}")]
    Validation(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default)]
    name: String,
    grid: GridFile,
    #[serde(default)]
    objects: Vec<SceneObject>,
    landmarks: Vec<Landmark>,
    #[serde(default)]
    routes: Vec<Route>,
}

impl Scene {
    pub fn landmark(&self, id: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.id == id)
    }

    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let f: SceneFile = serde_json::from_str(text)?;
        let scene = Scene {
            name: f.name,
            grid: f.grid.try_into()?,
            objects: f.objects,
            landmarks: f.landmarks,
            routes: f.routes,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let f = SceneFile {
            name: self.name.clone(),
            grid: (&self.grid).into(),
            objects: self.objects.clone(),
            landmarks: self.landmarks.clone(),
            routes: self.routes.clone(),
        };
        serde_json::to_string_pretty(&f).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Validation(m));
        let mut ids = HashSet::new();
        for l in &self.landmarks {
            if !ids.insert(l.id.as_str()) {
                return bad(format!("duplicate landmark id {:?}", l.id));
            }
            if !l.pose.is_finite() {
                return bad(format!("landmark {:?} has a non-finite pose", l.id));
            }
            if !self.grid.is_free_at(l.pose.position()) {
                return bad(format!("landmark {:?} lies in occupied space", l.id));
            }
            if let Some(e) = &l.embedding {
                let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-6 {
                    return bad(format!("landmark {:?} embedding has norm {n}", l.id));
                }
            }
        }
        for (k, r) in self.routes.iter().enumerate() {
            if !ids.contains(r.goal_landmark.as_str()) {
                return bad(format!("route {} references unknown landmark {:?}", k + 1, r.goal_landmark));
            }
            if !self.grid.is_free_at(r.start.position()) {
                return bad(format!("route {} starts in occupied space", k + 1));
            }
        }
        for o in &self.objects {
            if !(0.0..=1.0).contains(&o.base_confidence) || !(0.0..=1.0).contains(&o.detectability) {
                return bad(format!("object {:?} has confidence/detectability outside [0,1]", o.id));
            }
        }
        Ok(())
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    Scene::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    std::fs::write(path, scene.to_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "grid": {"width": 5, "height": 5, "resolution": 1.0, "origin": [0, 0, 0],
                 "rows": [".....", ".....", ".....", ".....", "....."]},
        "landmarks": [{"id": "A", "pose": [2.5, 2.5, 0], "description_tokens": ["door"],
                       "canonical_phrases": ["door"], "detector_classes": ["poster"]}]
    }"#;

    #[test]
    fn minimal_scene_loads() {
        let s = Scene::from_json(MINIMAL).unwrap();
        assert_eq!(s.landmarks.len(), 1);
        assert_eq!(s.grid.width * s.grid.height, 25);
        assert!(s.routes.is_empty());
    }

    #[test]
    fn dangling_route_is_rejected() {
        let text = MINIMAL.replace(
            r#""landmarks""#,
            r#""routes": [{"start": [0.5, 0.5, 0], "goal_landmark": "Z"}], "landmarks""#,
        );
        let err = Scene::from_json(&text).unwrap_err();
        assert!(matches!(err, SceneError::Validation(ref m) if m.contains("\"Z\"")), "{err}");
    }

    #[test]
    fn occupied_landmark_is_rejected() {
        let text = MINIMAL.replacen(r#"".....", ".....", ".....""#, r#"".....", ".....", "..#..""#, 1);
        assert!(matches!(Scene::from_json(&text), Err(SceneError::Validation(_))));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(Scene::from_json("{"), Err(SceneError::Parse(_))));
    }

    #[test]
    fn non_unit_embedding_is_rejected() {
        let text = MINIMAL.replace(r#""detector_classes""#, r#""embedding": [0.5, 0.5], "detector_classes""#);
        assert!(matches!(Scene::from_json(&text), Err(SceneError::Validation(_))));
    }

    #[test]
    fn phrase_lookup_prefers_matching_word() {
        let s = Scene::from_json(MINIMAL).unwrap();
        let mut l = s.landmarks[0].clone();
        l.canonical_phrases = vec!["glass door".into(), "lobby chair".into()];
        assert_eq!(l.phrase_for(Some("chair")), "lobby chair");
        assert_eq!(l.phrase_for(Some("sofa")), "glass door");
        assert_eq!(l.phrase_for(None), "glass door");
    }
}
