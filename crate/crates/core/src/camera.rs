//! Pinhole cameras and the 24-view rendering rig.
//!
//! Camera frame convention: x right, y down, z forward (depth). World up is
//! +y. A world point `X` maps to camera coordinates `R X + t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub const HORIZONTAL_VIEWS: usize = 12;
pub const RING_VIEWS: usize = 6;
pub const VIEW_COUNT: usize = HORIZONTAL_VIEWS + 2 * RING_VIEWS;

pub const DEFAULT_IMAGE_SIZE: usize = 512;
pub const DEFAULT_ELEVATION_DEG: f64 = 35.0;
/// Fraction of the image height taken by the mesh bounding sphere.
pub const DEFAULT_FILL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewCamera {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
    pub focal: (f64, f64),
    pub principal: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl ViewCamera {
    /// Camera at `eye` looking at `target`, with world +y as up.
    pub fn look_at(eye: Vec3, target: Vec3, focal: f64, width: usize, height: usize) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::InvalidRig(format!("focal length {focal} must be positive")));
        }
        let forward = geom::normalize(geom::sub(target, eye));
        let mut right = geom::cross(forward, [0.0, 1.0, 0.0]);
        if geom::norm(right) < 1e-9 {
            right = geom::cross(forward, [0.0, 0.0, 1.0]);
        }
        let right = geom::normalize(right);
        let down = geom::cross(forward, right);
        let rotation = [right, down, forward];
        let translation = geom::scale(geom::mat_vec(&rotation, eye), -1.0);
        Ok(ViewCamera {
            rotation,
            translation,
            focal: (focal, focal),
            principal: (width as f64 / 2.0, height as f64 / 2.0),
            width,
            height,
        })
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        geom::add(geom::mat_vec(&self.rotation, p), self.translation)
    }

    /// Pixel coordinates `(u, v)` and depth. Pixel `(x, y)` spans
    /// `[x, x+1) x [y, y+1)`, so its center is at `(x + 0.5, y + 0.5)`.
    pub fn project(&self, p: Vec3) -> (f64, f64, f64) {
        let c = self.to_camera(p);
        let z = c[2];
        (
            self.focal.0 * c[0] / z + self.principal.0,
            self.focal.1 * c[1] / z + self.principal.1,
            z,
        )
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Vec3 {
        let rt = geom::transpose(&self.rotation);
        geom::scale(geom::mat_vec(&rt, self.translation), -1.0)
    }

    /// Optical axis (unit, world coordinates).
    pub fn forward(&self) -> Vec3 {
        self.rotation[2]
    }

    /// World-space direction of the ray through image point `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let d_cam = [
            (u - self.principal.0) / self.focal.0,
            (v - self.principal.1) / self.focal.1,
            1.0,
        ];
        geom::mat_vec(&geom::transpose(&self.rotation), d_cam)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Same view at `factor` times the resolution.
    pub fn scaled(&self, factor: f64) -> ViewCamera {
        ViewCamera {
            rotation: self.rotation,
            translation: self.translation,
            focal: (self.focal.0 * factor, self.focal.1 * factor),
            principal: (self.principal.0 * factor, self.principal.1 * factor),
            width: (self.width as f64 * factor).round() as usize,
            height: (self.height as f64 * factor).round() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigParams {
    #[serde(default)]
    pub center: Vec3,
    /// Camera sphere radius in meters; fitted to the first frame when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_elevation")]
    pub elevation_deg: f64,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    /// Focal length in pixels; defaults to the image size.
    #[serde(default)]
    pub focal: Option<f64>,
    #[serde(default = "default_fill")]
    pub fill: f64,
}

fn default_elevation() -> f64 {
    DEFAULT_ELEVATION_DEG
}
fn default_image_size() -> usize {
    DEFAULT_IMAGE_SIZE
}
fn default_fill() -> f64 {
    DEFAULT_FILL
}

impl Default for RigParams {
    fn default() -> Self {
        RigParams {
            center: [0.0; 3],
            radius: None,
            elevation_deg: DEFAULT_ELEVATION_DEG,
            image_size: DEFAULT_IMAGE_SIZE,
            focal: None,
            fill: DEFAULT_FILL,
        }
    }
}

impl RigParams {
    pub fn focal(&self) -> f64 {
        self.focal.unwrap_or(self.image_size as f64)
    }

    /// Rig for a mesh with the given bounding-sphere radius.
    pub fn build_for(&self, bounding_radius: f64) -> Result<ViewRig> {
        let focal = self.focal();
        let radius = match self.radius {
            Some(r) => r,
            None => fit_radius(bounding_radius, self.image_size, focal, self.fill)?,
        };
        build_rig(self.center, radius, self.elevation_deg, self.image_size, focal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRig {
    pub cameras: Vec<ViewCamera>,
    pub radius: f64,
    pub elevation_deg: f64,
}

impl ViewRig {
    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn image_size(&self) -> (usize, usize) {
        self.cameras.first().map(|c| (c.width, c.height)).unwrap_or((0, 0))
    }

    /// Rig restricted to the given view indices (order preserved).
    pub fn subset(&self, views: &[usize]) -> ViewRig {
        ViewRig {
            cameras: views.iter().map(|&i| self.cameras[i].clone()).collect(),
            radius: self.radius,
            elevation_deg: self.elevation_deg,
        }
    }
}

/// Camera distance at which a sphere of `bounding_radius` spans `fill` of the
/// image height.
pub fn fit_radius(bounding_radius: f64, image_size: usize, focal: f64, fill: f64) -> Result<f64> {
    if !(bounding_radius > 0.0) || !(focal > 0.0) || !(fill > 0.0 && fill < 1.0) {
        return Err(Error::InvalidRig(format!(
            "cannot fit radius: bounding radius {bounding_radius}, focal {focal}, fill {fill}"
        )));
    }
    let half_angle = (0.5 * fill * image_size as f64 / focal).atan();
    Ok(bounding_radius / half_angle.sin())
}

/// Twelve cameras on the equator every 30 degrees, then six at `+elevation`
/// and six at `-elevation` every 60 degrees, all looking at `center`.
pub fn build_rig(center: Vec3, radius: f64, elevation_deg: f64, image_size: usize, focal: f64) -> Result<ViewRig> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidRig(format!("radius {radius} must be positive")));
    }
    if !(focal > 0.0 && focal.is_finite()) {
        return Err(Error::InvalidRig(format!("focal length {focal} must be positive")));
    }
    if image_size < 64 {
        return Err(Error::InvalidRig(format!(
            "image size {image_size} is below the 64 pixel minimum"
        )));
    }
    if !(elevation_deg.abs() < 90.0) {
        return Err(Error::InvalidRig(format!("elevation {elevation_deg} out of range")));
    }
    let rings = [
        (0.0, HORIZONTAL_VIEWS),
        (elevation_deg, RING_VIEWS),
        (-elevation_deg, RING_VIEWS),
    ];
    let mut cameras = Vec::with_capacity(VIEW_COUNT);
    for (elev, count) in rings {
        let el = elev.to_radians();
        for i in 0..count {
            let az = (360.0 * i as f64 / count as f64).to_radians();
            let dir = [el.cos() * az.sin(), el.sin(), el.cos() * az.cos()];
            let eye = geom::add(center, geom::scale(dir, radius));
            cameras.push(ViewCamera::look_at(eye, center, focal, image_size, image_size)?);
        }
    }
    Ok(ViewRig {
        cameras,
        radius,
        elevation_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_rig() -> ViewRig {
        let radius = fit_radius(1.0, 512, 512.0, DEFAULT_FILL).unwrap();
        build_rig([0.0; 3], radius, DEFAULT_ELEVATION_DEG, 512, 512.0).unwrap()
    }

    #[test]
    fn rig_layout() {
        let rig = default_rig();
        assert_eq!(rig.len(), 24);
        for cam in &rig.cameras {
            assert!((geom::norm(cam.position()) - rig.radius).abs() < 1e-9);
            let r = cam.rotation;
            for i in 0..3 {
                for j in 0..3 {
                    let d = geom::dot(r[i], r[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-6);
                }
            }
            // optical axis through the origin
            let to_origin = geom::normalize(geom::scale(cam.position(), -1.0));
            let angle = geom::dot(to_origin, cam.forward()).clamp(-1.0, 1.0).acos();
            assert!(angle < 1e-6);
        }
        let elevations: Vec<f64> = rig
            .cameras
            .iter()
            .map(|c| (c.position()[1] / rig.radius).asin().to_degrees())
            .collect();
        assert_eq!(elevations.iter().filter(|e| e.abs() < 1e-9).count(), 12);
        assert_eq!(elevations.iter().filter(|e| (**e - 35.0).abs() < 1e-9).count(), 6);
        assert_eq!(elevations.iter().filter(|e| (**e + 35.0).abs() < 1e-9).count(), 6);
    }

    #[test]
    fn horizontal_ring_antipodes() {
        let rig = default_rig();
        let a = rig.cameras[0].position();
        let b = rig.cameras[6].position();
        assert!(geom::norm(geom::add(a, b)) < 1e-9);
    }

    #[test]
    fn bbox_corners_project_inside() {
        let rig = default_rig();
        // box with half-diagonal 1 (bounding sphere radius 1)
        let h = 1.0 / 3f64.sqrt();
        for cam in &rig.cameras {
            for corner in 0..8 {
                let p = [
                    if corner & 1 == 0 { -h } else { h },
                    if corner & 2 == 0 { -h } else { h },
                    if corner & 4 == 0 { -h } else { h },
                ];
                let (u, v, z) = cam.project(p);
                assert!(z > 0.0);
                assert!(u > 0.0 && u < 512.0 && v > 0.0 && v < 512.0, "{u} {v}");
            }
        }
    }

    #[test]
    fn fitted_sphere_fills_ninety_percent() {
        let radius = fit_radius(1.0, 512, 512.0, 0.9).unwrap();
        let rig = build_rig([0.0; 3], radius, 35.0, 512, 512.0).unwrap();
        let cam = &rig.cameras[0];
        // silhouette half-angle of the unit sphere seen from the camera
        let half = (1.0 / radius).asin();
        let vpix = cam.focal.1 * half.tan();
        assert!((2.0 * vpix / 512.0 - 0.9).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters() {
        assert!(build_rig([0.0; 3], 0.0, 35.0, 512, 512.0).is_err());
        assert!(build_rig([0.0; 3], 2.0, 35.0, 512, -1.0).is_err());
        assert!(build_rig([0.0; 3], 2.0, 35.0, 32, 512.0).is_err());
    }

    #[test]
    fn image_right_is_world_x_for_front_camera() {
        let rig = default_rig();
        let cam = &rig.cameras[0];
        let (u0, v0, _) = cam.project([0.0, 0.0, 0.0]);
        let (u1, _, _) = cam.project([0.1, 0.0, 0.0]);
        let (_, v2, _) = cam.project([0.0, 0.1, 0.0]);
        assert!((u0 - 256.0).abs() < 1e-9 && (v0 - 256.0).abs() < 1e-9);
        assert!(u1 > u0);
        assert!(v2 < v0);
    }
}
