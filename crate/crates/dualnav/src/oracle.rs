//! Independent brute-force clearance computation between convex bodies.
//!
//! Everything here is ground truth for certificate validation and
//! trajectory auditing: distances come from alternating projections,
//! penetrations from a dense search over supporting-hyperplane directions,
//! and for all-polytope pairs an exhaustive Minkowski-difference facet
//! method provides exact reference values. None of this machinery feeds
//! the NLP.

use std::sync::OnceLock;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{ConvexBody, Direction, GeometryError, TransformedBody};
use crate::numerics::nelder_mead;

/// Movement threshold below which alternating projections are converged.
const PROJECTION_TOL: f64 = 1e-10;
/// Iteration cap for the alternating-projection distance solve.
const MAX_PROJECTION_ITERS: usize = 10_000;
/// Number of seeded starting points for the distance solve.
const DISTANCE_STARTS: usize = 20;
/// Overlap threshold: distances below this count as contact.
const CONTACT_TOL: f64 = 1e-9;
/// Unit-circle sampling resolution in 2D.
const CIRCLE_SAMPLES: usize = 720;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle iteration cap exceeded without convergence")]
    NoConvergence,
    #[error("operation requires polytopes only")]
    NotPolytope,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The moving operand of a clearance query: a bare position or a posed
/// full-dimensional body.
#[derive(Debug, Clone)]
pub enum Operand {
    Point(DVector<f64>),
    Body(TransformedBody),
}

impl Operand {
    pub fn dim(&self) -> usize {
        match self {
            Operand::Point(p) => p.len(),
            Operand::Body(b) => b.dim(),
        }
    }

    /// `inf_{e ∈ E} zᵀe`, the far side of the support in direction `-z`.
    fn inf_dot(&self, z: &DVector<f64>) -> Result<f64, GeometryError> {
        match self {
            Operand::Point(p) => Ok(p.dot(z)),
            Operand::Body(b) => Ok(-b.support(&(-z))?),
        }
    }
}

/// Clearance between one controlled-object placement and one obstacle.
///
/// For disjoint sets `witness_points` is the nearest pair `(e, o)` and
/// `witness_direction` points from the obstacle witness toward the object
/// witness. For overlapping sets the witnesses coincide at a common point
/// and the direction is the minimum-translation direction that separates
/// the pair.
#[derive(Debug, Clone)]
pub struct ClearanceReport {
    pub distance: f64,
    pub penetration: f64,
    pub signed_distance: f64,
    pub witness_direction: Direction,
    pub witness_points: (DVector<f64>, DVector<f64>),
}

/// Minimum Euclidean distance between the operand and the obstacle, with
/// the witness pair. Returns 0 with coincident witnesses when the sets
/// overlap.
pub fn distance(
    e: &Operand,
    o: &ConvexBody,
) -> Result<(f64, (DVector<f64>, DVector<f64>)), OracleError> {
    match e {
        Operand::Point(p) => {
            let proj = o.project(p)?;
            let d = (p - &proj).norm();
            if d <= CONTACT_TOL {
                Ok((0.0, (p.clone(), p.clone())))
            } else {
                Ok((d, (p.clone(), proj)))
            }
        }
        Operand::Body(tb) => {
            let eb = tb.materialize();
            alternating_projections(&eb, o)
        }
    }
}

fn alternating_projections(
    e: &ConvexBody,
    o: &ConvexBody,
) -> Result<(f64, (DVector<f64>, DVector<f64>)), OracleError> {
    let n = e.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0bca);

    // Seed box covering both sets, from axis supports.
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for i in 0..n {
        let mut axis = DVector::zeros(n);
        axis[i] = 1.0;
        let up = e.support(&axis)?.max(o.support(&axis)?);
        let dn = -(e.support(&(-axis.clone()))?.max(o.support(&(-axis))?));
        hi[i] = up;
        lo[i] = dn.min(up - 1e-9);
    }

    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for start in 0..DISTANCE_STARTS {
        let x0 = if start == 0 {
            e.interior_point().clone()
        } else {
            DVector::from_iterator(n, (0..n).map(|i| rng.gen_range(lo[i]..=hi[i])))
        };
        let mut pe = e.project(&x0)?;
        let mut converged = false;
        for _ in 0..MAX_PROJECTION_ITERS {
            let po = o.project(&pe)?;
            let pe_next = e.project(&po)?;
            let movement = (&pe_next - &pe).norm();
            pe = pe_next;
            if movement < PROJECTION_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(OracleError::NoConvergence);
        }
        let po = o.project(&pe)?;
        let d = (&pe - &po).norm();
        if best.as_ref().map(|(bd, _, _)| d < *bd).unwrap_or(true) {
            best = Some((d, pe, po));
        }
        if let Some((bd, _, _)) = &best {
            if *bd <= CONTACT_TOL {
                break;
            }
        }
    }

    let (d, pe, po) = best.expect("at least one start ran");
    if d <= CONTACT_TOL {
        Ok((0.0, (pe.clone(), pe)))
    } else {
        Ok((d, (pe, po)))
    }
}

/// Penetration depth via the supporting-hyperplane infimum
/// `inf_{‖z‖=1} [support(O, z) − inf_{e∈E} zᵀe]`, clamped at zero:
/// coarse sphere sampling followed by local Nelder–Mead refinement.
/// Returns the depth and the separating translation direction.
pub fn penetration(e: &Operand, o: &ConvexBody) -> Result<(f64, Direction), OracleError> {
    let n = o.dim();
    let gap = |z: &DVector<f64>| -> Result<f64, GeometryError> {
        Ok(o.support(z)? - e.inf_dot(z)?)
    };

    let circle;
    let samples: &Vec<DVector<f64>> = match n {
        2 => {
            circle = (0..CIRCLE_SAMPLES)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / CIRCLE_SAMPLES as f64;
                    DVector::from_vec(vec![th.cos(), th.sin()])
                })
                .collect();
            &circle
        }
        3 => geodesic_directions(),
        _ => return Err(OracleError::NotPolytope),
    };

    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    let mut values = Vec::with_capacity(samples.len());
    for (i, z) in samples.iter().enumerate() {
        let v = gap(z)?;
        values.push(v);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }

    // Refine from the few best, well-separated samples; the objective is
    // piecewise smooth on the sphere and can have several local basins.
    let mut seeds = vec![best_idx];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    for &i in order.iter().take(30) {
        if seeds.len() >= 4 {
            break;
        }
        if seeds
            .iter()
            .all(|&s| (&samples[s] - &samples[i]).norm() > 0.3)
        {
            seeds.push(i);
        }
    }

    let mut best_dir = samples[best_idx].clone();
    let mut refined = best_val;
    for &seed in &seeds {
        let (dir, val) = refine_on_sphere(&samples[seed], &gap)?;
        if val < refined {
            refined = val;
            best_dir = dir;
        }
    }

    let depth = refined.max(0.0);
    Ok((depth, Direction::normalize(best_dir)?))
}

/// Local refinement of a sphere function around `z0` using Nelder–Mead in
/// tangent coordinates (no pole singularities).
fn refine_on_sphere<F>(z0: &DVector<f64>, gap: &F) -> Result<(DVector<f64>, f64), OracleError>
where
    F: Fn(&DVector<f64>) -> Result<f64, GeometryError>,
{
    let n = z0.len();
    let frame = tangent_frame(z0);
    let embed = |coords: &[f64]| -> DVector<f64> {
        let mut z = z0.clone();
        for (i, t) in frame.iter().enumerate() {
            z += t * coords[i];
        }
        let norm = z.norm();
        z / norm
    };
    // Errors inside the closure surface as +inf and never win.
    let objective = |coords: &[f64]| -> f64 { gap(&embed(coords)).unwrap_or(f64::INFINITY) };
    let start = vec![0.0; n - 1];
    let (coords, val) = nelder_mead::minimize(&objective, &start, 0.01, 600, 1e-13);
    if !val.is_finite() {
        return Err(OracleError::NoConvergence);
    }
    Ok((embed(&coords), val))
}

/// Orthonormal tangent basis perpendicular to `z`.
fn tangent_frame(z: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = z.len();
    let mut frame = Vec::with_capacity(n - 1);
    let mut basis = vec![z.clone() / z.norm()];
    let mut axis_idx = 0;
    while frame.len() < n - 1 && axis_idx < n + 2 {
        let mut axis = DVector::zeros(n);
        if axis_idx < n {
            axis[axis_idx] = 1.0;
        } else {
            for i in 0..n {
                axis[i] = ((i + axis_idx) as f64).sin();
            }
        }
        axis_idx += 1;
        let mut v = axis;
        for p in &basis {
            let proj = p.dot(&v);
            v -= p * proj;
        }
        if v.norm() > 1e-8 {
            v /= v.norm();
            basis.push(v.clone());
            frame.push(v);
        }
    }
    frame
}

/// Directions of a level-4 geodesic subdivision of the icosahedron
/// (2,562 points), cached after first use.
fn geodesic_directions() -> &'static Vec<DVector<f64>> {
    static DIRS: OnceLock<Vec<DVector<f64>>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let mut verts: Vec<[f64; 3]> = vec![
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        for v in verts.iter_mut() {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v[0] /= n;
            v[1] /= n;
            v[2] /= n;
        }
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let mut midpoints: std::collections::HashMap<(u32, u32), u32> =
            std::collections::HashMap::new();
        let mut midpoint = |a: u32,
                            b: u32,
                            verts: &mut Vec<[f64; 3]>,
                            midpoints: &mut std::collections::HashMap<(u32, u32), u32>|
         -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            if let Some(&m) = midpoints.get(&key) {
                return m;
            }
            let va = verts[a as usize];
            let vb = verts[b as usize];
            let mut m = [
                (va[0] + vb[0]) / 2.0,
                (va[1] + vb[1]) / 2.0,
                (va[2] + vb[2]) / 2.0,
            ];
            let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
            m[0] /= n;
            m[1] /= n;
            m[2] /= n;
            verts.push(m);
            let idx = (verts.len() - 1) as u32;
            midpoints.insert(key, idx);
            idx
        };
        for _ in 0..4 {
            let mut next_faces = Vec::with_capacity(faces.len() * 4);
            for f in faces.iter() {
                let ab = midpoint(f[0], f[1], &mut verts, &mut midpoints);
                let bc = midpoint(f[1], f[2], &mut verts, &mut midpoints);
                let ca = midpoint(f[2], f[0], &mut verts, &mut midpoints);
                next_faces.push([f[0], ab, ca]);
                next_faces.push([f[1], bc, ab]);
                next_faces.push([f[2], ca, bc]);
                next_faces.push([ab, bc, ca]);
            }
            faces = next_faces;
        }
        verts
            .into_iter()
            .map(|v| DVector::from_vec(vec![v[0], v[1], v[2]]))
            .collect()
    })
}

/// Distance, penetration and their combination in one report.
pub fn signed_distance(e: &Operand, o: &ConvexBody) -> Result<ClearanceReport, OracleError> {
    let (d, (we, wo)) = distance(e, o)?;
    if d > 0.0 {
        let dir = Direction::normalize(&we - &wo)?;
        return Ok(ClearanceReport {
            distance: d,
            penetration: 0.0,
            signed_distance: d,
            witness_direction: dir,
            witness_points: (we, wo),
        });
    }
    let (p, dir) = penetration(e, o)?;
    Ok(ClearanceReport {
        distance: 0.0,
        penetration: p,
        signed_distance: -p,
        witness_direction: dir,
        witness_points: (we, wo),
    })
}

/// Exact penetration for all-polytope pairs by exhausting the candidate
/// facet normals of the Minkowski difference: facet normals of both bodies
/// plus, in 3D, cross products of edge-direction pairs. The minimizing
/// direction is always among those candidates; extra candidates can only
/// re-confirm the minimum.
pub fn polytope_penetration_facets(e: &Operand, o: &ConvexBody) -> Result<f64, OracleError> {
    let axes = candidate_axes(e, o)?;
    let mut min_gap = f64::INFINITY;
    for z in &axes {
        let gap = o.support(z)? - e.inf_dot(z)?;
        min_gap = min_gap.min(gap);
    }
    Ok(min_gap.max(0.0))
}

/// Separating-axis overlap test for all-polytope pairs. True when no
/// candidate axis separates the pair by more than `-tol`.
pub fn polytopes_overlap(e: &Operand, o: &ConvexBody, tol: f64) -> Result<bool, OracleError> {
    let axes = candidate_axes(e, o)?;
    for z in &axes {
        if o.support(z)? - e.inf_dot(z)? <= tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn candidate_axes(e: &Operand, o: &ConvexBody) -> Result<Vec<DVector<f64>>, OracleError> {
    if !o.is_polytope() {
        return Err(OracleError::NotPolytope);
    }
    let n = o.dim();
    // Sign matters for evaluation axes (the gap is not symmetric in z), so
    // dedupe exactly; line directions for edge crosses dedupe up to sign.
    fn push_axis(v: DVector<f64>, axes: &mut Vec<DVector<f64>>) {
        let norm = v.norm();
        if norm < 1e-12 {
            return;
        }
        let u = v / norm;
        if axes.iter().all(|a: &DVector<f64>| (a - &u).norm() > 1e-10) {
            axes.push(u);
        }
    }
    fn push_line_dir(v: DVector<f64>, dirs: &mut Vec<DVector<f64>>) {
        let norm = v.norm();
        if norm < 1e-12 {
            return;
        }
        let u = v / norm;
        if dirs
            .iter()
            .all(|a: &DVector<f64>| (a - &u).norm() > 1e-10 && (a + &u).norm() > 1e-10)
        {
            dirs.push(u);
        }
    }

    let mut o_normals: Vec<DVector<f64>> = Vec::new();
    for i in 0..o.a().nrows() {
        push_axis(o.a().row(i).transpose(), &mut o_normals);
    }
    let mut e_normals: Vec<DVector<f64>> = Vec::new();
    if let Operand::Body(tb) = e {
        let eb = tb.materialize();
        if !eb.is_polytope() {
            return Err(OracleError::NotPolytope);
        }
        for i in 0..eb.a().nrows() {
            push_axis(eb.a().row(i).transpose(), &mut e_normals);
        }
    }

    let mut axes: Vec<DVector<f64>> = Vec::new();
    for v in o_normals.iter().chain(e_normals.iter()) {
        push_axis(v.clone(), &mut axes);
        push_axis(-v.clone(), &mut axes);
    }

    if n == 3 && !e_normals.is_empty() {
        let cross = |a: &DVector<f64>, b: &DVector<f64>| {
            DVector::from_vec(vec![
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ])
        };
        // Edge directions are crosses of facet-normal pairs within one
        // body; Minkowski facets add crosses of edge pairs across bodies.
        let edge_dirs = |normals: &[DVector<f64>]| {
            let mut dirs: Vec<DVector<f64>> = Vec::new();
            for i in 0..normals.len() {
                for j in i + 1..normals.len() {
                    let d = cross(&normals[i], &normals[j]);
                    push_line_dir(d, &mut dirs);
                }
            }
            dirs
        };
        let eo = edge_dirs(&o_normals);
        let ee = edge_dirs(&e_normals);
        for a in &eo {
            for b in &ee {
                let d = cross(a, b);
                push_axis(d.clone(), &mut axes);
                push_axis(-d, &mut axes);
            }
        }
    }
    Ok(axes)
}

/// Point-to-body distance (0 inside). A fast path used by planners.
pub fn point_distance(p: &DVector<f64>, o: &ConvexBody) -> Result<f64, OracleError> {
    let proj = o.project(p)?;
    Ok((p - proj).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transform, Pose};

    fn unit_box2() -> ConvexBody {
        ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn point_to_box_distance() {
        let (d, (we, wo)) = distance(
            &Operand::Point(DVector::from_vec(vec![2.0, 0.0])),
            &unit_box2(),
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-10);
        assert!((we - DVector::from_vec(vec![2.0, 0.0])).norm() < 1e-12);
        assert!((wo - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-10);
    }

    #[test]
    fn box_to_box_distance_facing_faces() {
        let square = unit_box2();
        let pose = Pose::planar(0.0, DVector::from_vec(vec![4.0, 0.0])).unwrap();
        let e = Operand::Body(transform(&square, &pose).unwrap());
        let (d, _) = distance(&e, &unit_box2()).unwrap();
        assert!((d - 2.0).abs() < 1e-9, "d = {d}");
    }

    #[test]
    fn point_in_box_penetration() {
        let (p, dir) = penetration(
            &Operand::Point(DVector::from_vec(vec![0.5, 0.0])),
            &unit_box2(),
        )
        .unwrap();
        assert!((p - 0.5).abs() < 1e-9, "pen = {p}");
        // Nearest face is +x.
        assert!((dir.vector()[0].abs() - 1.0).abs() < 1e-6);

        let (p, _) = penetration(
            &Operand::Point(DVector::from_vec(vec![0.0, 0.0])),
            &unit_box2(),
        )
        .unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn signed_distance_examples() {
        let b = unit_box2();
        let r = signed_distance(&Operand::Point(DVector::from_vec(vec![2.0, 0.0])), &b).unwrap();
        assert!((r.signed_distance - 1.0).abs() < 1e-9);
        let r = signed_distance(&Operand::Point(DVector::from_vec(vec![0.5, 0.0])), &b).unwrap();
        assert!((r.signed_distance + 0.5).abs() < 1e-9);
        let pose = Pose::planar(0.0, DVector::from_vec(vec![4.0, 0.0])).unwrap();
        let e = Operand::Body(transform(&b, &pose).unwrap());
        let r = signed_distance(&e, &b).unwrap();
        assert!((r.signed_distance - 2.0).abs() < 1e-9);
        assert!(r.penetration == 0.0);
    }

    #[test]
    fn facet_method_on_overlapping_boxes() {
        let b = unit_box2();
        let pose = Pose::planar(0.0, DVector::from_vec(vec![1.5, 0.0])).unwrap();
        let e = Operand::Body(transform(&b, &pose).unwrap());
        let p = polytope_penetration_facets(&e, &b).unwrap();
        assert!((p - 0.5).abs() < 1e-12, "pen = {p}");
        assert!(polytopes_overlap(&e, &b, 1e-9).unwrap());

        let pose = Pose::planar(0.0, DVector::from_vec(vec![4.0, 0.0])).unwrap();
        let e = Operand::Body(transform(&b, &pose).unwrap());
        assert!(!polytopes_overlap(&e, &b, 1e-9).unwrap());
    }

    #[test]
    fn geodesic_grid_has_expected_resolution() {
        let dirs = geodesic_directions();
        assert_eq!(dirs.len(), 2562);
        for d in dirs.iter().take(50) {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }
}
