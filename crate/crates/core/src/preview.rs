//! SVG wireframe previews of a shot plan, rendered from the plan's pose at
//! the marker time. Output is a pure function of its inputs.

use std::fmt::Write as _;

use glam::DVec3;

use crate::dataset::Category;
use crate::geometry::BOX_EDGES;
use crate::math::camera_basis;
use crate::placement::ShotPlan;
use crate::scene::SceneDescription;

/// Points closer than this along the view axis are clipped away.
pub const NEAR_PLANE: f64 = 0.05;

struct Projector {
    eye: DVec3,
    right: DVec3,
    up: DVec3,
    forward: DVec3,
    tan_half: f64,
    aspect: f64,
    width: f64,
    height: f64,
}

impl Projector {
    fn new(plan: &ShotPlan, width: u32, height: u32) -> Self {
        let (right, up, forward) = camera_basis(plan.pose.direction());
        Self {
            eye: plan.pose.position,
            right,
            up,
            forward,
            tan_half: (plan.pose.fov * 0.5).tan(),
            aspect: plan.pose.aspect,
            width: width as f64,
            height: height as f64,
        }
    }

    /// Camera-space `(x, y, depth)`.
    fn view(&self, p: DVec3) -> DVec3 {
        let rel = p - self.eye;
        DVec3::new(rel.dot(self.right), rel.dot(self.up), rel.dot(self.forward))
    }

    fn pixel(&self, v: DVec3) -> (f64, f64) {
        let x = v.x / (v.z * self.tan_half * self.aspect);
        let y = v.y / (v.z * self.tan_half);
        ((x + 1.0) * 0.5 * self.width, (1.0 - y) * 0.5 * self.height)
    }

    /// Projects a segment after clipping it against the near plane.
    fn segment(&self, a: DVec3, b: DVec3) -> Option<((f64, f64), (f64, f64))> {
        let (mut va, mut vb) = (self.view(a), self.view(b));
        if va.z < NEAR_PLANE && vb.z < NEAR_PLANE {
            return None;
        }
        if va.z < NEAR_PLANE {
            va = va + (vb - va) * ((NEAR_PLANE - va.z) / (vb.z - va.z));
        } else if vb.z < NEAR_PLANE {
            vb = vb + (va - vb) * ((NEAR_PLANE - vb.z) / (va.z - vb.z));
        }
        Some((self.pixel(va), self.pixel(vb)))
    }
}

fn line(out: &mut String, class: &str, (x1, y1): (f64, f64), (x2, y2): (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<line class="{class}" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_preview(plan: &ShotPlan, scene: &SceneDescription, width: u32, height: u32) -> String {
    let proj = Projector::new(plan, width, height);
    let (w, h) = (width as f64, height as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    out.push_str("<style>.edge{stroke:#222;stroke-width:1}.target{stroke:#c03020;stroke-width:1.5}.thirds{stroke:#3070c0;stroke-width:0.5;stroke-dasharray:4 3}</style>\n");
    let _ = writeln!(out, r##"<rect width="{width}" height="{height}" fill="#f6f4ef"/>"##);

    for i in 1..3 {
        let x = w * i as f64 / 3.0;
        let y = h * i as f64 / 3.0;
        line(&mut out, "thirds", (x, 0.0), (x, h));
        line(&mut out, "thirds", (0.0, y), (w, y));
    }

    for obj in &scene.objects {
        let class = if plan.targets.contains(&obj.id) { "target" } else { "edge" };
        let corners = obj.posed_shape(plan.time).wire_corners();
        let _ = writeln!(out, r#"<g data-object="{}">"#, escape(&obj.id));
        for (a, b) in BOX_EDGES {
            if let Some((p, q)) = proj.segment(corners[a], corners[b]) {
                line(&mut out, class, p, q);
            }
        }
        out.push_str("</g>\n");
    }

    let v = proj.view(plan.focus_point);
    if v.z >= NEAR_PLANE {
        let (x, y) = proj.pixel(v);
        let _ = writeln!(
            out,
            r##"<circle class="subject" cx="{x:.3}" cy="{y:.3}" r="4" fill="none" stroke="#c03020" stroke-width="1.5"/>"##
        );
    }

    let label: Vec<&str> = Category::ORDER.iter().map(|c| plan.technique(*c).key()).collect();
    let _ = writeln!(
        out,
        r##"<text x="6" y="{:.3}" font-family="monospace" font-size="11" fill="#222">{} {}</text>"##,
        h - 6.0,
        escape(&plan.marker_id),
        label.join(" / ")
    );
    out.push_str("</svg>\n");
    out
}
