//! Engine-free backend: ray-casts the device's bounding box with flat
//! Lambert shading and textures the display onto the box face that points
//! most towards the camera.

use std::path::Path;

use image::{Luma, Rgb, RgbImage};

use super::{RenderBackend, RenderOutput};
use crate::renderer::directives::SceneDirectives;
use crate::renderer::geometry::{add, cross, dot, normalize, scale, sub, AxisRotation, Vec3};
use crate::renderer::postprocess::DepthMap;
use crate::renderer::RendererError;

#[derive(Debug, Clone)]
pub struct MockBackend {
    pub background: [u8; 3],
    pub ambient: f64,
    /// Fraction of the face left as bezel on each side of the display.
    pub display_inset: f64,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self {
            background: [52, 52, 52],
            ambient: 0.3,
            display_inset: 0.12,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Face {
    axis: usize,
    positive: bool,
}

impl Face {
    fn normal(self) -> Vec3 {
        let mut n = [0.0; 3];
        n[self.axis] = if self.positive { 1.0 } else { -1.0 };
        n
    }
}

/// Entry distance and face of a ray against an axis-aligned box, for rays
/// starting outside it.
fn slab(origin: Vec3, dir: Vec3, min: Vec3, max: Vec3) -> Option<(f64, Face)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut face = Face {
        axis: 0,
        positive: false,
    };
    for i in 0..3 {
        if dir[i].abs() < 1e-15 {
            if origin[i] < min[i] || origin[i] > max[i] {
                return None;
            }
            continue;
        }
        let (a, b) = ((min[i] - origin[i]) / dir[i], (max[i] - origin[i]) / dir[i]);
        let (enter, exit) = if a < b { (a, b) } else { (b, a) };
        if enter > t_near {
            t_near = enter;
            face = Face {
                axis: i,
                positive: dir[i] < 0.0,
            };
        }
        t_far = t_far.min(exit);
    }
    (t_near <= t_far && t_near > 0.0).then_some((t_near, face))
}

fn to_linear(c: u8) -> f64 {
    f64::from(c) / 255.0
}

impl MockBackend {
    fn display_face(camera_position: Vec3) -> Face {
        let dir = normalize(camera_position).unwrap_or([0.0, -1.0, 0.0]);
        let mut best = Face {
            axis: 0,
            positive: true,
        };
        let mut best_dot = f64::NEG_INFINITY;
        for axis in 0..3 {
            for positive in [true, false] {
                let f = Face { axis, positive };
                let d = dot(f.normal(), dir);
                if d > best_dot + 1e-12 {
                    best = f;
                    best_dot = d;
                }
            }
        }
        best
    }

    /// Face-local (s, t) in [0,1]^2 with t running up the face.
    fn face_coords(face: Face, p: Vec3, min: Vec3, max: Vec3) -> (f64, f64) {
        let up_axis = if face.axis == 2 { 1 } else { 2 };
        let mut up = [0.0; 3];
        up[up_axis] = 1.0;
        let s_vec = cross(up, face.normal());
        let s_axis = (0..3).find(|&i| s_vec[i] != 0.0).expect("tangent is a unit axis");
        let frac = |axis: usize, positive: bool| {
            let ext = max[axis] - min[axis];
            if ext <= 0.0 {
                0.5
            } else if positive {
                (p[axis] - min[axis]) / ext
            } else {
                (max[axis] - p[axis]) / ext
            }
        };
        (frac(s_axis, s_vec[s_axis] > 0.0), frac(up_axis, true))
    }
}

impl RenderBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn render(&self, d: &SceneDirectives, root: &Path) -> Result<RenderOutput, RendererError> {
        let texture_path = root.join(&d.display.texture);
        let texture = image::open(&texture_path)
            .map_err(|e| RendererError::image(&texture_path, e))?
            .to_rgb8();
        let [w, h] = d.render.resolution;
        let cam = &d.camera;
        let (f, right) = (cam.focal_px(), cam.right());
        let rotation = d.model.rotation;
        let inverse: AxisRotation = rotation.inverse();
        let bounds = d.model.bounds;
        let center = bounds.center();
        let origin = add(inverse.apply(cam.position), center);
        let display_face = Self::display_face(cam.position);
        let [near, far] = d.render.depth_bounds;
        let body = d.model.body_color.map(to_linear);
        let uv = d.display.uv;
        let m = self.display_inset;

        let mut rgb = RgbImage::from_pixel(w, h, Rgb(self.background));
        let mut depth = DepthMap::from_pixel(w, h, Luma([1.0]));
        for py in 0..h {
            let y = -(f64::from(py) + 0.5 - f64::from(h) / 2.0) / f;
            for px in 0..w {
                let x = (f64::from(px) + 0.5 - f64::from(w) / 2.0) / f;
                // Forward component is 1, so the ray parameter is camera depth.
                let dir_world = add(add(scale(right, x), scale(cam.up, y)), cam.look_dir);
                let dir = inverse.apply(dir_world);
                let Some((t, face)) = slab(origin, dir, bounds.min, bounds.max) else {
                    continue;
                };
                let hit = add(origin, scale(dir, t));
                let normal = rotation.apply(face.normal());
                let hit_world = rotation.apply(sub(hit, center));
                let lambert = normalize(sub(d.light.position, hit_world)).map_or(0.0, |l| dot(normal, l).max(0.0));
                let k = self.ambient + (1.0 - self.ambient) * lambert;
                let (mut base, mut shade) = (body, k);
                if face == display_face {
                    let (s, tt) = Self::face_coords(face, hit, bounds.min, bounds.max);
                    let (s, tt) = ((s - m) / (1.0 - 2.0 * m), (tt - m) / (1.0 - 2.0 * m));
                    if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&tt) {
                        let weights = [(1.0 - s) * (1.0 - tt), s * (1.0 - tt), s * tt, (1.0 - s) * tt];
                        let (mut u, mut v) = (0.0, 0.0);
                        for (c, wgt) in uv.iter().zip(weights) {
                            u += c[0] * wgt;
                            v += c[1] * wgt;
                        }
                        let tx = ((u * f64::from(texture.width())) as u32).min(texture.width() - 1);
                        let ty = (((1.0 - v) * f64::from(texture.height())) as u32).min(texture.height() - 1);
                        base = texture.get_pixel(tx, ty).0.map(to_linear);
                        // Backlit screens stay readable in shadow.
                        shade = 0.6 + 0.4 * k;
                    }
                }
                let color: [u8; 3] =
                    std::array::from_fn(|c| (base[c] * shade * d.light.color[c] * 255.0).round().clamp(0.0, 255.0) as u8);
                rgb.put_pixel(px, py, Rgb(color));
                let z = ((t - near) / (far - near)).clamp(0.0, 1.0);
                depth.put_pixel(px, py, Luma([z as f32]));
            }
        }
        Ok(RenderOutput { rgb, depth })
    }
}
