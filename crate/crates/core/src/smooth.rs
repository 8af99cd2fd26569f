//! Bezier refinement of planned paths.
//!
//! Each mode leg is smoothed independently with a corner-cutting piecewise
//! cubic: the middle of every raw edge stays straight and each interior
//! corner is replaced by a cubic whose control points lie on the two
//! adjacent edges. Leg endpoints (the switch points) are therefore
//! interpolated exactly, and every sample stays inside the convex hull of
//! its segment's control points.

use serde::{Deserialize, Serialize};

use crate::energy::Mode;
use crate::geom::Vec3;
use crate::planner::PlannedPath;

/// Fraction of each edge consumed by the corner cut on either side.
const CUT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBezier {
    pub control: [Vec3; 4],
}

impl CubicBezier {
    pub fn line(a: Vec3, b: Vec3) -> Self {
        CubicBezier {
            control: [a, a.lerp(b, 1.0 / 3.0), a.lerp(b, 2.0 / 3.0), b],
        }
    }

    /// De Casteljau evaluation; exact at t = 0 and t = 1.
    pub fn eval(&self, t: f64) -> Vec3 {
        let [p0, p1, p2, p3] = self.control;
        let a = p0.lerp(p1, t);
        let b = p1.lerp(p2, t);
        let c = p2.lerp(p3, t);
        let d = a.lerp(b, t);
        let e = b.lerp(c, t);
        d.lerp(e, t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothedLeg {
    pub mode: Mode,
    pub segments: Vec<CubicBezier>,
    pub samples: Vec<Vec3>,
    /// Flattened control polygon of the leg.
    pub control_points: Vec<Vec3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothedPath {
    pub legs: Vec<SmoothedLeg>,
    /// Concatenated leg samples with duplicate joints removed.
    pub samples: Vec<Vec3>,
    /// Largest distance from any sample to the raw polyline.
    pub max_deviation: f64,
}

/// Builds the corner-cut cubic chain for one polyline.
fn leg_segments(points: &[Vec3]) -> Vec<CubicBezier> {
    if points.len() < 2 {
        return Vec::new();
    }
    if points.len() == 2 {
        return vec![CubicBezier::line(points[0], points[1])];
    }
    let mut segments = Vec::new();
    // Entry/exit markers on each edge.
    let entry = |i: usize| points[i].lerp(points[i + 1], CUT);
    let exit = |i: usize| points[i].lerp(points[i + 1], 1.0 - CUT);

    // Straight run from the leg start to the first corner cut.
    segments.push(CubicBezier::line(points[0], exit(0)));
    for i in 1..points.len() - 1 {
        // Corner cubic pulled toward the raw vertex; its controls sit on
        // the two edges, so the curve stays inside the corner triangle.
        segments.push(CubicBezier {
            control: [exit(i - 1), points[i], points[i], entry(i)],
        });
        let last_corner = i == points.len() - 2;
        let run_end = if last_corner {
            points[i + 1]
        } else {
            exit(i)
        };
        segments.push(CubicBezier::line(entry(i), run_end));
    }
    segments
}

fn sample_leg(segments: &[CubicBezier], samples: usize) -> Vec<Vec3> {
    let n = samples.max(2);
    let mut out = Vec::with_capacity(n);
    let m = segments.len() as f64;
    for s in 0..n {
        let u = s as f64 / (n - 1) as f64;
        let scaled = u * m;
        let (seg, t) = if s == n - 1 {
            (segments.len() - 1, 1.0)
        } else {
            let k = (scaled.floor() as usize).min(segments.len() - 1);
            (k, scaled - k as f64)
        };
        out.push(segments[seg].eval(t));
    }
    out
}

fn point_to_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn point_to_polyline_distance(p: Vec3, poly: &[Vec3]) -> f64 {
    poly.windows(2)
        .map(|w| point_to_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
        .min(if poly.len() == 1 { p.distance(poly[0]) } else { f64::INFINITY })
}

/// Smooths every mode leg of a planned path. Endpoints and switch points
/// are reproduced exactly; energy accounting stays on the raw path.
pub fn smooth(path: &PlannedPath, samples_per_leg: usize) -> SmoothedPath {
    let mut legs = Vec::new();
    let mut all = Vec::new();
    let mut max_dev = 0.0f64;

    for leg in &path.mode_legs {
        let raw: Vec<Vec3> = path.nodes[leg.start..=leg.end]
            .iter()
            .map(|n| n.position)
            .collect();
        if raw.len() < 2 {
            let samples = raw.clone();
            if all.is_empty() {
                all.extend_from_slice(&samples);
            }
            legs.push(SmoothedLeg {
                mode: leg.mode,
                segments: Vec::new(),
                samples,
                control_points: raw,
            });
            continue;
        }
        let segments = leg_segments(&raw);
        let samples = sample_leg(&segments, samples_per_leg);
        for s in &samples {
            max_dev = max_dev.max(point_to_polyline_distance(*s, &raw));
        }
        let control_points: Vec<Vec3> = segments
            .iter()
            .flat_map(|s| s.control.into_iter())
            .collect();
        if all.is_empty() {
            all.extend_from_slice(&samples);
        } else {
            // Legs share their joint node; drop the duplicate.
            all.extend_from_slice(&samples[1..]);
        }
        legs.push(SmoothedLeg {
            mode: leg.mode,
            segments,
            samples,
            control_points,
        });
    }

    SmoothedPath {
        legs,
        samples: all,
        max_deviation: max_dev,
    }
}
