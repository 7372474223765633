use crate::error::{Error, Result};

/// Wall piece, a straight segment from (ax, ay) to (bx, by).
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub ax: f64,
    pub ay: f64,
    pub bx: f64,
    pub by: f64,
}

/// Distance along the unit ray (ox, oy) + t (dx, dy) to the segment, if
/// the ray hits it at t >= 0.
pub fn ray_segment(ox: f64, oy: f64, dx: f64, dy: f64, seg: &Segment) -> Option<f64> {
    let ex = seg.bx - seg.ax;
    let ey = seg.by - seg.ay;
    let det = ex * dy - ey * dx;
    if det.abs() < 1e-12 {
        return None;
    }
    let rx = seg.ax - ox;
    let ry = seg.ay - oy;
    let t = (ex * ry - ey * rx) / det;
    let s = (dx * ry - dy * rx) / det;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// A corridor around a centerline polyline. Walls are the two offset
/// polylines plus a cap behind the start; the exit end stays open so depth
/// rays report free space beyond it.
#[derive(Clone, Debug)]
pub struct Canyon {
    pub centerline: Vec<(f64, f64)>,
    pub width: f64,
    walls: Vec<Segment>,
}

impl Canyon {
    pub fn new(centerline: Vec<(f64, f64)>, width: f64) -> Result<Self> {
        if centerline.len() < 2 {
            return Err(Error::Config {
                message: "canyon centerline needs at least two points".into(),
            });
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Config {
                message: format!("canyon width must be positive, got {width}"),
            });
        }
        for (x, y) in &centerline {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Config {
                    message: "canyon centerline has a non-finite point".into(),
                });
            }
        }
        for w in centerline.windows(2) {
            let len = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            if len < 1e-9 {
                return Err(Error::Config {
                    message: "canyon centerline repeats a point".into(),
                });
            }
        }

        let h = width / 2.0;
        let left = offset_polyline(&centerline, h);
        let right = offset_polyline(&centerline, -h);
        let mut walls = Vec::new();
        for side in [&left, &right] {
            for w in side.windows(2) {
                walls.push(Segment {
                    ax: w[0].0,
                    ay: w[0].1,
                    bx: w[1].0,
                    by: w[1].1,
                });
            }
        }
        walls.push(Segment {
            ax: left[0].0,
            ay: left[0].1,
            bx: right[0].0,
            by: right[0].1,
        });
        Ok(Canyon {
            centerline,
            width,
            walls,
        })
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn start(&self) -> (f64, f64) {
        self.centerline[0]
    }

    /// Unit direction of the first corridor segment.
    pub fn start_direction(&self) -> (f64, f64) {
        let (ax, ay) = self.centerline[0];
        let (bx, by) = self.centerline[1];
        let len = (bx - ax).hypot(by - ay);
        ((bx - ax) / len, (by - ay) / len)
    }

    /// True once the point lies beyond the plane through the last
    /// centerline point, facing along the last segment.
    pub fn past_exit(&self, x: f64, y: f64) -> bool {
        let n = self.centerline.len();
        let (px, py) = self.centerline[n - 2];
        let (qx, qy) = self.centerline[n - 1];
        let len = (qx - px).hypot(qy - py);
        let dx = (qx - px) / len;
        let dy = (qy - py) / len;
        (x - qx) * dx + (y - qy) * dy > 0.0
    }

    /// Depth readings over `n_rays` directions fanned `fan` radians wide
    /// around `heading`, leftmost ray first, each clipped to `range` and
    /// normalized to [0, 1].
    pub fn depth_strip(
        &self,
        ox: f64,
        oy: f64,
        heading: f64,
        n_rays: usize,
        fan: f64,
        range: f64,
    ) -> Vec<f64> {
        (0..n_rays)
            .map(|i| {
                let frac = if n_rays > 1 {
                    i as f64 / (n_rays - 1) as f64
                } else {
                    0.5
                };
                let angle = heading + fan / 2.0 - frac * fan;
                let dx = angle.cos();
                let dy = angle.sin();
                let hit = self
                    .walls
                    .iter()
                    .filter_map(|w| ray_segment(ox, oy, dx, dy, w))
                    .fold(f64::INFINITY, f64::min);
                hit.min(range) / range
            })
            .collect()
    }
}

/// Offset polyline at signed distance `h` to the left of travel, with
/// miter joins at corners.
fn offset_polyline(line: &[(f64, f64)], h: f64) -> Vec<(f64, f64)> {
    let n = line.len();
    let normal = |a: (f64, f64), b: (f64, f64)| {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        (-(b.1 - a.1) / len, (b.0 - a.0) / len)
    };
    let mut out = Vec::with_capacity(n);
    let n0 = normal(line[0], line[1]);
    out.push((line[0].0 + h * n0.0, line[0].1 + h * n0.1));
    for j in 1..n - 1 {
        let na = normal(line[j - 1], line[j]);
        let nb = normal(line[j], line[j + 1]);
        let da = (line[j].0 - line[j - 1].0, line[j].1 - line[j - 1].1);
        let db = (line[j + 1].0 - line[j].0, line[j + 1].1 - line[j].1);
        let cross = da.0 * db.1 - da.1 * db.0;
        if cross.abs() < 1e-9 {
            out.push((line[j].0 + h * nb.0, line[j].1 + h * nb.1));
            continue;
        }
        // Intersection of the two offset lines: a + h na + t da = b' ...
        let ax = line[j - 1].0 + h * na.0;
        let ay = line[j - 1].1 + h * na.1;
        let bx = line[j].0 + h * nb.0;
        let by = line[j].1 + h * nb.1;
        let t = ((bx - ax) * db.1 - (by - ay) * db.0) / cross;
        out.push((ax + t * da.0, ay + t * da.1));
    }
    let nl = normal(line[n - 2], line[n - 1]);
    out.push((line[n - 1].0 + h * nl.0, line[n - 1].1 + h * nl.1));
    out
}
