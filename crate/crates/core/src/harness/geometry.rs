//! Planar polygon clipping and integration, used for exact grid cell masses
//! of two-dimensional targets.

pub type Point = [f64; 2];

/// Keeps the part of `poly` (convex, counter-clockwise) with `a·x ≤ b`.
pub fn clip(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    let inside = |p: &Point| a[0] * p[0] + a[1] * p[1] <= b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (ci, pi) = (inside(&cur), inside(&prev));
        if ci != pi {
            let fp = a[0] * prev[0] + a[1] * prev[1] - b;
            let fc = a[0] * cur[0] + a[1] * cur[1] - b;
            let t = fp / (fp - fc);
            out.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}

pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Point> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

pub fn area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Integral of `g` over a convex polygon by fan triangulation and the
/// degree-2 exact three-point rule on each triangle.
pub fn integrate<F: Fn(Point) -> f64>(poly: &[Point], g: &F) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let p0 = poly[0];
    let mut total = 0.0;
    for i in 1..poly.len() - 1 {
        let (p1, p2) = (poly[i], poly[i + 1]);
        let a = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        let mid = |u: Point, v: Point| [(u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0];
        total += a / 3.0 * (g(mid(p0, p1)) + g(mid(p1, p2)) + g(mid(p2, p0)));
    }
    total
}
