use super::pose::{point_to_frame, Pose2D};
use super::scene::{Scene, SceneObject};

/// Objects whose centre lies in the camera's angular sector and range, nearest first.
/// There is no occlusion model.
pub fn visible_objects(scene: &Scene, camera: &Pose2D, fov: f64, max_range: f64) -> Vec<SceneObject> {
    visible_from(&scene.objects, camera, fov, max_range)
}

pub fn visible_from(objects: &[SceneObject], camera: &Pose2D, fov: f64, max_range: f64) -> Vec<SceneObject> {
    let mut hits: Vec<(f64, &SceneObject)> = objects
        .iter()
        .filter_map(|o| {
            let p = point_to_frame(o.position.position(), camera);
            let d = p.norm();
            let bearing = p.y.atan2(p.x);
            (d <= max_range && bearing.abs() <= fov / 2.0 + 1e-12).then_some((d, o))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    hits.into_iter().map(|(_, o)| o.clone()).collect()
}
