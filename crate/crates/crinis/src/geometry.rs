//! Polyline helpers: nearest points, densification and Hausdorff distance.

use crate::map_models::C64;

/// Closest point of segment [a, b] to q, as (distance, parameter in [0, 1]).
pub fn segment_distance(a: C64, b: C64, q: C64) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let u = if len2 == 0.0 { 0.0 } else { (((q - a) * ab.conj()).re / len2).clamp(0.0, 1.0) };
    ((a + ab * u - q).norm(), u)
}

/// Nearest point of a polyline to q: (distance, fractional vertex position).
pub fn nearest_on_polyline(points: &[C64], q: C64) -> (f64, f64) {
    match points.len() {
        0 => (f64::INFINITY, 0.0),
        1 => ((points[0] - q).norm(), 0.0),
        _ => points
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (d, u) = segment_distance(w[0], w[1], q);
                (d, i as f64 + u)
            })
            .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best }),
    }
}

pub fn distance_to_polyline(points: &[C64], q: C64) -> f64 {
    nearest_on_polyline(points, q).0
}

/// Inserts vertices so that no segment is longer than `max_len`.
pub fn densify(points: &[C64], max_len: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        out.push(w[0]);
        let n = ((w[1] - w[0]).norm() / max_len).ceil() as usize;
        for j in 1..n {
            out.push(w[0] + (w[1] - w[0]) * (j as f64 / n as f64));
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

/// Two-sided nearest-vertex Hausdorff distance after densifying both
/// polylines to spacing `max_len`.
pub fn hausdorff(a: &[C64], b: &[C64], max_len: f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let da = densify(a, max_len);
    let db = densify(b, max_len);
    directed(&da, &db).max(directed(&db, &da))
}

fn directed(from: &[C64], to: &[C64]) -> f64 {
    let grid = BucketGrid::new(to);
    from.iter().map(|p| grid.nearest(*p)).fold(0.0, f64::max)
}

/// Uniform bucket grid for nearest-vertex queries.
struct BucketGrid<'a> {
    pts: &'a [C64],
    origin: C64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> BucketGrid<'a> {
    fn new(pts: &'a [C64]) -> Self {
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in pts {
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        let per_side = ((pts.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = span / per_side as f64;
        let nx = ((hi.re - lo.re) / cell) as usize + 1;
        let ny = ((hi.im - lo.im) / cell) as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in pts.iter().enumerate() {
            let (cx, cy) = Self::cell_of(lo, cell, nx, ny, *p);
            buckets[cy * nx + cx].push(i);
        }
        BucketGrid { pts, origin: lo, cell, nx, ny, buckets }
    }

    fn cell_of(origin: C64, cell: f64, nx: usize, ny: usize, p: C64) -> (usize, usize) {
        let cx = (((p.re - origin.re) / cell).floor().max(0.0) as usize).min(nx - 1);
        let cy = (((p.im - origin.im) / cell).floor().max(0.0) as usize).min(ny - 1);
        (cx, cy)
    }

    fn nearest(&self, q: C64) -> f64 {
        let (cx, cy) = Self::cell_of(self.origin, self.cell, self.nx, self.ny, q);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let x0 = cx.saturating_sub(ring);
            let x1 = (cx + ring).min(self.nx - 1);
            let y0 = cy.saturating_sub(ring);
            let y1 = (cy + ring).min(self.ny - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if x != x0 && x != x1 && y != y0 && y != y1 {
                        continue;
                    }
                    for &i in &self.buckets[y * self.nx + x] {
                        best = best.min((self.pts[i] - q).norm());
                    }
                }
            }
            let outside = {
                let ox = (q.re - self.origin.re) / self.cell;
                let oy = (q.im - self.origin.im) / self.cell;
                let gap_x = (-ox).max(ox - self.nx as f64).max(0.0);
                let gap_y = (-oy).max(oy - self.ny as f64).max(0.0);
                gap_x.max(gap_y)
            };
            if best.is_finite() && best <= (ring as f64 - outside).max(0.0) * self.cell {
                break;
            }
        }
        best
    }
}

/// Signed area test: positive when q lies to the left of a → b.
pub fn orient(a: C64, b: C64, q: C64) -> f64 {
    ((b - a).conj() * (q - a)).im
}
