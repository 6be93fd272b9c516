//! Planar arrangement of labeled polyline arcs.
//!
//! Arcs are embedded curves that intersect only at shared endpoint
//! vertices, so the induced subdivision of the plane can be assembled
//! exactly from the rotation system: at each vertex the incident arc ends
//! are sorted by departure angle, and faces are the orbits of the
//! left-turn successor map. Every face of a connected arrangement is a
//! disk, so point location reduces to even-odd parity against the face's
//! boundary walk.

use num_complex::Complex64;
use thiserror::Error;

pub type VertexId = usize;
pub type ArcId = usize;
pub type FaceId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrangementError {
    #[error("arc {arc} endpoints disagree with its vertex positions")]
    DetachedArc { arc: ArcId },
    #[error("arc {arc} has fewer than two distinct points")]
    DegenerateArc { arc: ArcId },
    #[error("vertex {vertex} has two arcs departing in the same direction")]
    AmbiguousRotation { vertex: VertexId },
    #[error("arrangement is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("no interior sample point found for a face")]
    NoInteriorSample,
}

/// An open curve between two vertices of the arrangement. The polyline's
/// first and last points must coincide with the vertex positions.
#[derive(Debug, Clone)]
pub struct ArrangementArc {
    pub from: VertexId,
    pub to: VertexId,
    pub points: Vec<Complex64>,
}

/// A directed traversal of an arc: `reversed` walks `to -> from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedArc {
    pub arc: ArcId,
    pub reversed: bool,
}

impl DirectedArc {
    fn index(self) -> usize {
        2 * self.arc + usize::from(self.reversed)
    }

    fn twin(self) -> DirectedArc {
        DirectedArc { arc: self.arc, reversed: !self.reversed }
    }
}

/// A face of the subdivision: a closed boundary walk with the interior on
/// the left of each traversed arc.
#[derive(Debug, Clone)]
pub struct Face {
    pub walk: Vec<DirectedArc>,
    /// Closed boundary polyline in walk order (first point repeated last).
    pub polyline: Vec<Complex64>,
    /// A point strictly inside the face (far outside for the outer face).
    pub rep: Complex64,
    pub unbounded: bool,
}

#[derive(Debug, Clone)]
pub struct PlanarArrangement {
    pub verts: Vec<Complex64>,
    pub arcs: Vec<ArrangementArc>,
    pub faces: Vec<Face>,
}

impl PlanarArrangement {
    /// Assembles faces from arcs meeting only at shared vertices.
    pub fn assemble(
        verts: Vec<Complex64>,
        arcs: Vec<ArrangementArc>,
    ) -> Result<Self, ArrangementError> {
        let scale = geometry_scale(&verts, &arcs);
        let snap = 1e-6 * scale;
        for (id, arc) in arcs.iter().enumerate() {
            if arc.points.len() < 2 {
                return Err(ArrangementError::DegenerateArc { arc: id });
            }
            let first = *arc.points.first().unwrap();
            let last = *arc.points.last().unwrap();
            if (first - verts[arc.from]).norm() > snap || (last - verts[arc.to]).norm() > snap {
                return Err(ArrangementError::DetachedArc { arc: id });
            }
        }
        check_connected(verts.len(), &arcs)?;

        // Rotation system: outgoing directed arcs at each vertex, sorted by
        // departure angle.
        let mut rotation: Vec<Vec<DirectedArc>> = vec![Vec::new(); verts.len()];
        for (id, arc) in arcs.iter().enumerate() {
            rotation[arc.from].push(DirectedArc { arc: id, reversed: false });
            rotation[arc.to].push(DirectedArc { arc: id, reversed: true });
        }
        for (v, out) in rotation.iter_mut().enumerate() {
            let mut keyed: Vec<(f64, DirectedArc)> = out
                .iter()
                .map(|&d| (departure_angle(&arcs, d, verts[v]), d))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index().cmp(&b.1.index())));
            for pair in keyed.windows(2) {
                if (pair[1].0 - pair[0].0).abs() < 1e-12 {
                    return Err(ArrangementError::AmbiguousRotation { vertex: v });
                }
            }
            *out = keyed.into_iter().map(|(_, d)| d).collect();
        }

        // next(h): arrive at head(h), take the clockwise successor of the
        // twin in the rotation order; orbits walk each face with its
        // interior on the left.
        let next = |h: DirectedArc| -> DirectedArc {
            let v = head(&arcs, h);
            let out = &rotation[v];
            let i = out.iter().position(|&d| d == h.twin()).expect("twin is incident");
            out[(i + out.len() - 1) % out.len()]
        };

        let mut seen = vec![false; 2 * arcs.len()];
        let mut faces = Vec::new();
        for arc in 0..arcs.len() {
            for reversed in [false, true] {
                let start = DirectedArc { arc, reversed };
                if seen[start.index()] {
                    continue;
                }
                let mut walk = Vec::new();
                let mut h = start;
                loop {
                    seen[h.index()] = true;
                    walk.push(h);
                    h = next(h);
                    if h == start {
                        break;
                    }
                }
                let polyline = walk_polyline(&arcs, &walk);
                faces.push(Face {
                    walk,
                    polyline,
                    rep: Complex64::new(0.0, 0.0),
                    unbounded: false,
                });
            }
        }

        // Exactly one face walk is clockwise: the unbounded one.
        let mut outer = None;
        for (id, face) in faces.iter().enumerate() {
            if signed_area(&face.polyline) < 0.0 {
                if outer.is_some() {
                    return Err(ArrangementError::Disconnected { components: 2 });
                }
                outer = Some(id);
            }
        }
        let outer = outer.ok_or(ArrangementError::NoInteriorSample)?;

        let bbox = bounding_radius(&verts, &arcs);
        let mut arr = PlanarArrangement { verts, arcs, faces };
        for id in 0..arr.faces.len() {
            if id == outer {
                arr.faces[id].unbounded = true;
                arr.faces[id].rep = Complex64::new(3.0 * bbox + 1.0, 2.0 * bbox + 1.0);
            } else {
                arr.faces[id].rep = arr.interior_sample(id, scale)?;
            }
        }
        Ok(arr)
    }

    /// The face containing `z`. Points on the boundary resolve by parity of
    /// the half-open crossing rule, so callers that care must pre-check
    /// `distance_to_arcs`.
    pub fn face_containing(&self, z: Complex64) -> FaceId {
        for (id, face) in self.faces.iter().enumerate() {
            if !face.unbounded && point_in_closed_polyline(z, &face.polyline) {
                return id;
            }
        }
        self.faces.iter().position(|f| f.unbounded).expect("outer face exists")
    }

    /// Distance from `z` to the nearest arc of the arrangement.
    pub fn distance_to_arcs(&self, z: Complex64) -> f64 {
        self.arcs
            .iter()
            .map(|arc| point_polyline_distance(z, &arc.points))
            .fold(f64::INFINITY, f64::min)
    }

    fn interior_sample(&self, face: FaceId, scale: f64) -> Result<Complex64, ArrangementError> {
        let walk = &self.faces[face].walk;
        let polyline = &self.faces[face].polyline;
        // Try boundary arcs longest first: offset from an arc midpoint to
        // the interior (left) side of the walk direction.
        let mut order: Vec<usize> = (0..walk.len()).collect();
        let lengths: Vec<f64> =
            walk.iter().map(|d| polyline_length(&self.arcs[d.arc].points)).collect();
        order.sort_by(|&i, &j| lengths[j].total_cmp(&lengths[i]));
        for &wi in &order {
            let d = walk[wi];
            let pts = &self.arcs[d.arc].points;
            let Some((mid, tangent)) = polyline_midpoint_tangent(pts) else {
                continue;
            };
            let tangent = if d.reversed { -tangent } else { tangent };
            let normal = Complex64::new(0.0, 1.0) * tangent;
            let mut eps = 1e-3 * scale;
            for _ in 0..14 {
                let candidate = mid + normal * eps;
                if point_in_closed_polyline(candidate, polyline)
                    && self.distance_to_arcs(candidate) > 0.4 * eps
                {
                    return Ok(candidate);
                }
                eps *= 0.25;
            }
        }
        Err(ArrangementError::NoInteriorSample)
    }
}

fn head(arcs: &[ArrangementArc], h: DirectedArc) -> VertexId {
    if h.reversed {
        arcs[h.arc].from
    } else {
        arcs[h.arc].to
    }
}

/// Direction in which a directed arc departs from its tail vertex.
fn departure_angle(arcs: &[ArrangementArc], d: DirectedArc, tail: Complex64) -> f64 {
    let pts = &arcs[d.arc].points;
    let iter: Box<dyn Iterator<Item = &Complex64>> =
        if d.reversed { Box::new(pts.iter().rev()) } else { Box::new(pts.iter()) };
    for &p in iter.skip(1) {
        let step = p - tail;
        if step.norm_sqr() > 0.0 {
            return step.im.atan2(step.re);
        }
    }
    0.0
}

fn walk_polyline(arcs: &[ArrangementArc], walk: &[DirectedArc]) -> Vec<Complex64> {
    let mut out = Vec::new();
    for &d in walk {
        let pts = &arcs[d.arc].points;
        if d.reversed {
            out.extend(pts.iter().rev().skip(if out.is_empty() { 0 } else { 1 }));
        } else {
            out.extend(pts.iter().skip(if out.is_empty() { 0 } else { 1 }));
        }
    }
    if let (Some(&first), Some(&last)) = (out.first(), out.last()) {
        if first != last {
            out.push(first);
        }
    }
    out
}

fn signed_area(closed: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for w in closed.windows(2) {
        s += w[0].re * w[1].im - w[1].re * w[0].im;
    }
    0.5 * s
}

fn polyline_length(pts: &[Complex64]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn polyline_midpoint_tangent(pts: &[Complex64]) -> Option<(Complex64, Complex64)> {
    let total = polyline_length(pts);
    if total == 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if acc + seg >= 0.5 * total && seg > 0.0 {
            let t = (0.5 * total - acc) / seg;
            let mid = w[0] + (w[1] - w[0]) * t;
            let tangent = (w[1] - w[0]) / seg;
            return Some((mid, tangent));
        }
        acc += seg;
    }
    None
}

/// Even-odd containment against a closed polyline (half-open crossing
/// rule, so vertices on the test ray are counted once).
pub fn point_in_closed_polyline(z: Complex64, closed: &[Complex64]) -> bool {
    let mut inside = false;
    for w in closed.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if z.re < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from a point to a polyline.
pub fn point_polyline_distance(z: Complex64, pts: &[Complex64]) -> f64 {
    if pts.len() == 1 {
        return (z - pts[0]).norm();
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        best = best.min(point_segment_distance(z, w[0], w[1]));
    }
    best
}

pub(crate) fn point_segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let den = ab.norm_sqr();
    if den == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a) * ab.conj()).re / den;
    (z - (a + ab * t.clamp(0.0, 1.0))).norm()
}

/// Minimum distance between two polylines.
pub fn polyline_min_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    if a.len() == 1 || b.len() == 1 {
        if a.len() == 1 {
            return point_polyline_distance(a[0], b);
        }
        return point_polyline_distance(b[0], a);
    }
    for wa in a.windows(2) {
        for wb in b.windows(2) {
            best = best.min(segment_segment_distance(wa[0], wa[1], wb[0], wb[1]));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

fn segment_segment_distance(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

fn segments_intersect(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> bool {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Number of proper crossings between segment `a..b` and the polyline.
pub fn segment_polyline_crossings(a: Complex64, b: Complex64, pts: &[Complex64]) -> usize {
    let mut n = 0;
    for w in pts.windows(2) {
        if segments_intersect(a, b, w[0], w[1]) {
            n += 1;
        }
    }
    n
}

fn geometry_scale(verts: &[Complex64], arcs: &[ArrangementArc]) -> f64 {
    1.0 + bounding_radius(verts, arcs)
}

fn bounding_radius(verts: &[Complex64], arcs: &[ArrangementArc]) -> f64 {
    let mut r: f64 = 0.0;
    for v in verts {
        r = r.max(v.norm());
    }
    for arc in arcs {
        for p in &arc.points {
            r = r.max(p.norm());
        }
    }
    r
}

fn check_connected(n_verts: usize, arcs: &[ArrangementArc]) -> Result<(), ArrangementError> {
    if n_verts == 0 {
        return Err(ArrangementError::Disconnected { components: 0 });
    }
    let mut adj = vec![Vec::new(); n_verts];
    for arc in arcs {
        adj[arc.from].push(arc.to);
        adj[arc.to].push(arc.from);
    }
    let mut seen = vec![false; n_verts];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1usize;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    if count != n_verts {
        let components = 1 + seen.iter().filter(|&&s| !s).count().min(1);
        return Err(ArrangementError::Disconnected { components });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn segment(from: VertexId, to: VertexId, a: Complex64, b: Complex64) -> ArrangementArc {
        let points = (0..=8).map(|k| a + (b - a) * (k as f64 / 8.0)).collect();
        ArrangementArc { from, to, points }
    }

    #[test]
    fn square_has_inner_and_outer_face() {
        let verts = vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 1.0), c64(0.0, 1.0)];
        let arcs = vec![
            segment(0, 1, verts[0], verts[1]),
            segment(1, 2, verts[1], verts[2]),
            segment(2, 3, verts[2], verts[3]),
            segment(3, 0, verts[3], verts[0]),
        ];
        let arr = PlanarArrangement::assemble(verts, arcs).unwrap();
        assert_eq!(arr.faces.len(), 2);
        let inner = arr.face_containing(c64(0.5, 0.5));
        assert!(!arr.faces[inner].unbounded);
        let outer = arr.face_containing(c64(5.0, -3.0));
        assert!(arr.faces[outer].unbounded);
        // Euler: V - E + F = 2.
        assert_eq!(4 - 4 + arr.faces.len() as i64, 2);
    }

    #[test]
    fn theta_graph_has_three_faces() {
        // Two vertices joined by three arcs: straight, bulging up, bulging
        // down. Faces: upper lune, lower lune, outer.
        let verts = vec![c64(-1.0, 0.0), c64(1.0, 0.0)];
        let bulge = |h: f64| -> ArrangementArc {
            let points = (0..=16)
                .map(|k| {
                    let t = k as f64 / 16.0;
                    c64(-1.0 + 2.0 * t, h * (t * (1.0 - t)) * 4.0)
                })
                .collect();
            ArrangementArc { from: 0, to: 1, points }
        };
        let arcs = vec![bulge(1.0), bulge(0.0), bulge(-1.0)];
        let arr = PlanarArrangement::assemble(verts, arcs).unwrap();
        assert_eq!(arr.faces.len(), 3);
        let up = arr.face_containing(c64(0.0, 0.5));
        let down = arr.face_containing(c64(0.0, -0.5));
        let out = arr.face_containing(c64(0.0, 4.0));
        assert_ne!(up, down);
        assert!(arr.faces[out].unbounded);
        assert!(!arr.faces[up].unbounded);
        assert!(!arr.faces[down].unbounded);
        // Each directed arc appears in exactly one walk.
        let total: usize = arr.faces.iter().map(|f| f.walk.len()).sum();
        assert_eq!(total, 2 * arr.arcs.len());
    }

    #[test]
    fn dangling_bridge_is_walked_twice_by_one_face() {
        // A triangle with an antenna poking into its interior: the antenna
        // edge borders the inner face on both sides.
        let verts = vec![
            c64(0.0, 0.0),
            c64(4.0, 0.0),
            c64(2.0, 3.0),
            c64(2.0, 1.0),
            c64(2.0, 1.8),
        ];
        let arcs = vec![
            segment(0, 1, verts[0], verts[1]),
            segment(1, 2, verts[1], verts[2]),
            segment(2, 0, verts[2], verts[0]),
            segment(0, 3, verts[0], verts[3]),
            segment(3, 4, verts[3], verts[4]),
        ];
        let arr = PlanarArrangement::assemble(verts, arcs).unwrap();
        assert_eq!(arr.faces.len(), 2);
        let inner = (0..arr.faces.len()).find(|&f| !arr.faces[f].unbounded).unwrap();
        // The antenna arc 4 shows up twice in the inner face's walk.
        let antenna_uses =
            arr.faces[inner].walk.iter().filter(|d| d.arc == 4).count();
        assert_eq!(antenna_uses, 2);
        // Parity still places points correctly on both sides of the antenna.
        let left = arr.face_containing(c64(1.7, 1.2));
        let right = arr.face_containing(c64(2.3, 1.2));
        assert_eq!(left, inner);
        assert_eq!(right, inner);
    }

    #[test]
    fn interior_samples_lie_in_their_faces() {
        let verts = vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 1.0), c64(0.0, 1.0)];
        let arcs = vec![
            segment(0, 1, verts[0], verts[1]),
            segment(1, 2, verts[1], verts[2]),
            segment(2, 3, verts[2], verts[3]),
            segment(3, 0, verts[3], verts[0]),
            segment(0, 2, verts[0], verts[2]),
        ];
        let arr = PlanarArrangement::assemble(verts, arcs).unwrap();
        assert_eq!(arr.faces.len(), 3);
        for (id, face) in arr.faces.iter().enumerate() {
            if face.unbounded {
                continue;
            }
            assert_eq!(arr.face_containing(face.rep), id);
        }
    }

    #[test]
    fn polyline_distance_helpers_agree_with_geometry() {
        let a = [c64(0.0, 0.0), c64(1.0, 0.0)];
        let b = [c64(0.0, 1.0), c64(1.0, 1.0)];
        assert!((polyline_min_distance(&a, &b) - 1.0).abs() < 1e-12);
        let crossing = [c64(0.5, -1.0), c64(0.5, 2.0)];
        assert_eq!(polyline_min_distance(&a, &crossing), 0.0);
        assert_eq!(segment_polyline_crossings(c64(0.5, -1.0), c64(0.5, 1.0), &a), 1);
        assert_eq!(segment_polyline_crossings(c64(2.0, -1.0), c64(2.0, 1.0), &a), 0);
    }
}
