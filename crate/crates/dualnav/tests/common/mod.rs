//! Shared helpers for integration tests: seeded random bodies with
//! explicitly known vertices, independent of the library's own geometry
//! evaluation paths.

#![allow(dead_code)]

use dualnav::geometry::{rotation2d, rotation_zxy, ConvexBody};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit_vector(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| r.gen_range(-1.0..1.0)));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

/// 2D convex hull, counterclockwise, of a point cloud (monotone chain).
pub fn convex_hull_2d(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Random 2D polytope as (body, vertex list). Vertices are kept so tests
/// can evaluate supports and distances by direct enumeration.
pub fn random_polygon(
    r: &mut ChaCha8Rng,
    num_points: usize,
    scale: f64,
    center: (f64, f64),
) -> (ConvexBody, Vec<DVector<f64>>) {
    loop {
        let cloud: Vec<(f64, f64)> = (0..num_points)
            .map(|_| {
                (
                    center.0 + r.gen_range(-scale..scale),
                    center.1 + r.gen_range(-scale..scale),
                )
            })
            .collect();
        let hull = convex_hull_2d(&cloud);
        if hull.len() < 3 {
            continue;
        }
        // Outward edge normals: hull is counterclockwise, so the outward
        // normal of edge (p, q) is (qy - py, -(qx - px)) rotated… i.e.
        // (dy, -dx).
        let m = hull.len();
        let mut a = DMatrix::zeros(m, 2);
        let mut b = DVector::zeros(m);
        let mut degenerate = false;
        for i in 0..m {
            let p = hull[i];
            let q = hull[(i + 1) % m];
            let (dx, dy) = (q.0 - p.0, q.1 - p.1);
            let norm = (dx * dx + dy * dy).sqrt();
            if norm < 1e-9 {
                degenerate = true;
                break;
            }
            let (nx, ny) = (dy / norm, -dx / norm);
            a[(i, 0)] = nx;
            a[(i, 1)] = ny;
            b[i] = nx * p.0 + ny * p.1;
        }
        if degenerate {
            continue;
        }
        let verts = hull
            .iter()
            .map(|&(x, y)| DVector::from_vec(vec![x, y]))
            .collect();
        match ConvexBody::polytope(a, b) {
            Ok(body) => return (body, verts),
            Err(_) => continue,
        }
    }
}

/// A rotated 3D box as (body, vertex list).
pub fn rotated_box_3d(
    r: &mut ChaCha8Rng,
    half_extents: (f64, f64, f64),
    center: (f64, f64, f64),
) -> (ConvexBody, Vec<DVector<f64>>) {
    let rot = rotation_zxy(
        r.gen_range(-0.8..0.8),
        r.gen_range(-0.8..0.8),
        r.gen_range(-3.0..3.0),
    );
    let c = DVector::from_vec(vec![center.0, center.1, center.2]);
    let h = [half_extents.0, half_extents.1, half_extents.2];
    // Rows of the local box are ±eᵢ; world rows are (±eᵢ)ᵀRᵀ = ±(R eᵢ)ᵀ.
    let mut a = DMatrix::zeros(6, 3);
    let mut b = DVector::zeros(6);
    for i in 0..3 {
        let col = rot.column(i);
        for j in 0..3 {
            a[(2 * i, j)] = col[j];
            a[(2 * i + 1, j)] = -col[j];
        }
        let proj = col.dot(&c);
        b[2 * i] = proj + h[i];
        b[2 * i + 1] = -(proj - h[i]);
    }
    let mut verts = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let local = DVector::from_vec(vec![sx * h[0], sy * h[1], sz * h[2]]);
                verts.push(&rot * local + &c);
            }
        }
    }
    (ConvexBody::polytope(a, b).unwrap(), verts)
}

/// Random planar rotation.
pub fn random_rotation_2d(r: &mut ChaCha8Rng) -> DMatrix<f64> {
    rotation2d(r.gen_range(-3.14..3.14))
}

/// Random axis-aligned ellipsoid with bounded eccentricity.
pub fn random_ellipsoid(r: &mut ChaCha8Rng, n: usize, scale: f64, center_spread: f64) -> ConvexBody {
    let mut e = DMatrix::zeros(n, n);
    for i in 0..n {
        e[(i, i)] = 1.0 / (scale * r.gen_range(0.4..1.6));
    }
    let c = DVector::from_iterator(n, (0..n).map(|_| r.gen_range(-center_spread..center_spread)));
    ConvexBody::ellipsoid(e, c).unwrap()
}

// ---------------------------------------------------------------------
// Feature-based distance reference (independent of the library's
// projection machinery): enumerate vertex pairs, vertex-to-face
// projections and edge pairs.
// ---------------------------------------------------------------------

pub fn point_segment_distance(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom > 0.0 {
        ((p - a).dot(&ab) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

pub fn segment_segment_distance(
    p1: &DVector<f64>,
    q1: &DVector<f64>,
    p2: &DVector<f64>,
    q2: &DVector<f64>,
) -> f64 {
    // Sample-free closed form is fiddly in 3D; a dense parameter sweep with
    // local shrink is plenty at reference-test accuracy.
    let eval = |s: f64, t: f64| -> f64 {
        let a = p1 + (q1 - p1) * s;
        let b = p2 + (q2 - p2) * t;
        (a - b).norm()
    };
    let mut best = (0.0, 0.0, eval(0.0, 0.0));
    let mut lo_s = 0.0;
    let mut hi_s = 1.0;
    let mut lo_t = 0.0;
    let mut hi_t = 1.0;
    for _ in 0..24 {
        let grid = 8;
        for i in 0..=grid {
            for j in 0..=grid {
                let s = lo_s + (hi_s - lo_s) * i as f64 / grid as f64;
                let t = lo_t + (hi_t - lo_t) * j as f64 / grid as f64;
                let d = eval(s, t);
                if d < best.2 {
                    best = (s, t, d);
                }
            }
        }
        let span_s = (hi_s - lo_s) / 4.0;
        let span_t = (hi_t - lo_t) / 4.0;
        lo_s = (best.0 - span_s).max(0.0);
        hi_s = (best.0 + span_s).min(1.0);
        lo_t = (best.1 - span_t).max(0.0);
        hi_t = (best.1 + span_t).min(1.0);
    }
    best.2
}

pub fn point_triangle_distance(
    p: &DVector<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> f64 {
    // Project onto the plane, test barycentric containment, else edges.
    let ab = b - a;
    let ac = c - a;
    let n = DVector::from_vec(vec![
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    ]);
    let nn = n.norm_squared();
    if nn > 1e-18 {
        let t = (p - a).dot(&n) / nn;
        let proj = p - &n * t;
        // barycentric test via areas
        let area = |u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>| -> f64 {
            let uv = v - u;
            let uw = w - u;
            let cx = uv[1] * uw[2] - uv[2] * uw[1];
            let cy = uv[2] * uw[0] - uv[0] * uw[2];
            let cz = uv[0] * uw[1] - uv[1] * uw[0];
            0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
        };
        let total = area(a, b, c);
        let a1 = area(&proj, b, c);
        let a2 = area(a, &proj, c);
        let a3 = area(a, b, &proj);
        if (a1 + a2 + a3 - total).abs() < 1e-9 * (1.0 + total) {
            return (p - proj).norm();
        }
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, a, c))
}

/// Minimum distance between two disjoint convex polygons (2D) from their
/// vertex lists: min over all boundary segment pairs.
pub fn polygon_distance_features(va: &[DVector<f64>], vb: &[DVector<f64>]) -> f64 {
    let m = va.len();
    let n = vb.len();
    let mut best = f64::INFINITY;
    for i in 0..m {
        for j in 0..n {
            let d = segment_segment_distance(
                &va[i],
                &va[(i + 1) % m],
                &vb[j],
                &vb[(j + 1) % n],
            );
            best = best.min(d);
        }
    }
    best
}

/// Box corner index layout from `rotated_box_3d`: bit 2 = x sign, bit 1 =
/// y sign, bit 0 = z sign.
pub fn box_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..8usize {
        for bit in [1usize, 2, 4] {
            let j = i ^ bit;
            if i < j {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn box_triangles() -> Vec<(usize, usize, usize)> {
    let faces: [[usize; 4]; 6] = [
        [0, 1, 3, 2],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [0, 2, 6, 4],
        [1, 3, 7, 5],
    ];
    let mut tris = Vec::new();
    for f in faces {
        tris.push((f[0], f[1], f[2]));
        tris.push((f[0], f[2], f[3]));
    }
    tris
}

/// Minimum distance between two disjoint 3D boxes from their corner lists.
pub fn box_distance_features(va: &[DVector<f64>], vb: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for &(t0, t1, t2) in &box_triangles() {
        for p in va {
            best = best.min(point_triangle_distance(p, &vb[t0], &vb[t1], &vb[t2]));
        }
    }
    for &(t0, t1, t2) in &box_triangles() {
        for p in vb {
            best = best.min(point_triangle_distance(p, &va[t0], &va[t1], &va[t2]));
        }
    }
    for &(a0, a1) in &box_edges() {
        for &(b0, b1) in &box_edges() {
            best = best.min(segment_segment_distance(&va[a0], &va[a1], &vb[b0], &vb[b1]));
        }
    }
    best
}
