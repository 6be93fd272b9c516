//! Candidate support graphs for the depth-zero puzzle.
//!
//! For a parameter whose marked critical point is periodic, a candidate
//! graph is determined by a doubling-invariant set of internal angles. It
//! is the union of
//!
//! - the closed internal rays at those angles in every cycle component,
//! - every external ray co-landing at an internal ray endpoint,
//! - the outer equipotential circle at level +1, and
//! - one inner equipotential circle at level -1 per cycle component,
//!
//! with rays clipped at the circles. Arcs meet only at shared vertices
//! (ray feet and landing points), so the complementary regions inside the
//! outer circle and outside the inner disks can be assembled exactly as
//! faces of a planar rotation system. Those bounded faces are the
//! depth-zero puzzle pieces.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::angle::RayAngle;
use crate::arrangement::{ArrangementArc, ArrangementError, FaceId, PlanarArrangement};
use crate::classify::{classify, OrbitClass};
use crate::cubic::CubicParam;
use crate::potential::{bottcher_infinity, BasinChart, PotentialError};
use crate::ray::{
    landing_point, refine_periodic, trace_external_ray_opts, CertifiedLanding,
    ExternalRayOptions, InternalRayBundle, RayError, RaySample, TracedRay,
};

/// Equipotential level of the outer boundary circle.
pub const OUTER_LEVEL: f64 = 1.0;
/// Potential of the inner circle in every cycle component.
pub const INNER_LEVEL: f64 = -1.0;
/// Critical-orbit points closer to the graph than this (times scale)
/// invalidate the candidate.
pub const ON_GRAPH_RESOLUTION: f64 = 1e-7;
/// Forward orbit length checked against the graph.
pub const ORBIT_AVOIDANCE_BUDGET: usize = 64;

/// Landing points closer than this (times scale) are a single vertex.
const VERTEX_MERGE: f64 = 1e-7;
/// A refined ray endpoint matches a vertex within this (times scale).
const COLANDING_MATCH: f64 = 1e-6;
/// Maximum spacing of equipotential samples (times scale).
const EQUIP_STEP: f64 = 5e-3;
/// Equipotential segments spanning more than this angle are always split.
const ANGLE_CAP: f64 = 1.0 / 32.0;
/// Floor of the coarse landing scan.
const SCAN_LEVEL: f64 = 5e-3;
/// Floor of the fine external rays kept as arcs.
const ARC_LEVEL: f64 = 1e-10;
/// Internal rays run to this potential before landing refinement.
const BUNDLE_LEVEL: f64 = -1e-12;
/// Ray samples this close (times scale) to the landing vertex are dropped
/// so rotation directions at the vertex come from converged tangents.
const TAIL_TRIM: f64 = 1e-5;
const CLASSIFY_BUDGET: u32 = 4096;

/// Which doubling orbits seed the internal angle set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphCandidate {
    /// The orbit {1/7, 2/7, 4/7}.
    OneSeventh,
    /// The orbit {3/7, 6/7, 5/7}.
    ThreeSevenths,
    /// Both orbits.
    Union,
}

impl GraphCandidate {
    pub const ALL: [GraphCandidate; 3] = [
        GraphCandidate::OneSeventh,
        GraphCandidate::ThreeSevenths,
        GraphCandidate::Union,
    ];

    pub fn seeds(self) -> Vec<RayAngle> {
        match self {
            GraphCandidate::OneSeventh => vec![RayAngle::new(1, 7)],
            GraphCandidate::ThreeSevenths => vec![RayAngle::new(3, 7)],
            GraphCandidate::Union => vec![RayAngle::new(1, 7), RayAngle::new(3, 7)],
        }
    }
}

/// Why a candidate graph cannot serve at this parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphInvalidReason {
    /// f^step(-c) lies on the graph at working resolution.
    HitsCriticalOrbit { step: usize },
    /// A ray endpoint could not be certified repelling.
    ParabolicVertex,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("candidate graph is invalid at this parameter: {reason:?}")]
    Invalid { reason: GraphInvalidReason },
    #[error("parameter is not a puzzle candidate (free orbit class {class:?})")]
    NotPuzzleCandidate { class: OrbitClass },
    #[error("no external ray co-lands with internal ray ({component}, {angle})")]
    MissingColanding { component: usize, angle: RayAngle },
    #[error("a coarse landing match failed fine verification at angle {angle}")]
    LandingMismatch { angle: RayAngle },
    #[error("external angle set is not closed under tripling at {angle}")]
    AngleSetNotInvariant { angle: RayAngle },
    #[error("vertex of ({component}, {angle}) does not map onto its successor")]
    TransportMismatch { component: usize, angle: RayAngle },
    #[error("equipotential continuation stalled")]
    EquipotentialStall,
    #[error("face structure violates the expected shape: {detail}")]
    MalformedFaces { detail: String },
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
}

/// What an arc of the support graph is a piece of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphArcLabel {
    InternalRay { component: usize, angle: RayAngle },
    ExternalRay { angle: RayAngle },
    OuterEquipotential { segment: usize },
    InnerEquipotential { component: usize, segment: usize },
}

/// What a vertex of the support graph is.
#[derive(Clone, Debug)]
pub enum GraphVertexKind {
    /// Common endpoint of the internal rays in `anchors` and of their
    /// co-landing external rays, certified repelling.
    Landing { anchors: Vec<(usize, RayAngle)>, cert: CertifiedLanding },
    /// Foot of an external ray on the outer circle.
    OuterFoot { angle: RayAngle },
    /// Foot of an internal ray on the inner circle of `component`.
    InnerFoot { component: usize, angle: RayAngle },
}

/// A built support graph together with its face decomposition.
#[derive(Debug, Clone)]
pub struct SupportGraph {
    param: CubicParam,
    period: usize,
    candidate: GraphCandidate,
    scale: f64,
    bundle: InternalRayBundle,
    internal_angles: Vec<RayAngle>,
    external_angles: Vec<RayAngle>,
    colanding: BTreeMap<(usize, RayAngle), Vec<RayAngle>>,
    arrangement: PlanarArrangement,
    labels: Vec<GraphArcLabel>,
    vertex_kinds: Vec<GraphVertexKind>,
    pieces: Vec<FaceId>,
    face_piece: Vec<Option<usize>>,
    deep_faces: Vec<FaceId>,
}

impl SupportGraph {
    pub fn param(&self) -> &CubicParam {
        &self.param
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn candidate(&self) -> GraphCandidate {
        self.candidate
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Internal angle labels, identical in every component.
    pub fn internal_angles(&self) -> &[RayAngle] {
        &self.internal_angles
    }

    /// All external angles in the graph, ascending.
    pub fn external_angles(&self) -> &[RayAngle] {
        &self.external_angles
    }

    /// External angles co-landing with the internal ray `(component, angle)`.
    pub fn colanding(&self, component: usize, angle: RayAngle) -> Option<&[RayAngle]> {
        self.colanding.get(&(component, angle)).map(Vec::as_slice)
    }

    pub fn arrangement(&self) -> &PlanarArrangement {
        &self.arrangement
    }

    /// Arc labels aligned with `arrangement().arcs`.
    pub fn labels(&self) -> &[GraphArcLabel] {
        &self.labels
    }

    /// Vertex kinds aligned with `arrangement().verts`.
    pub fn vertex_kinds(&self) -> &[GraphVertexKind] {
        &self.vertex_kinds
    }

    pub fn bundle(&self) -> &InternalRayBundle {
        &self.bundle
    }

    /// Face ids of the depth-zero pieces, ascending.
    pub fn depth0_pieces(&self) -> &[FaceId] {
        &self.pieces
    }

    /// Face ids of the removed inner disks, one per cycle component.
    pub fn deep_faces(&self) -> &[FaceId] {
        &self.deep_faces
    }

    pub fn piece_of_face(&self, face: FaceId) -> Option<usize> {
        self.face_piece.get(face).copied().flatten()
    }

    /// Index of the depth-zero piece containing `z`, or None when `z` lies
    /// in the outer region or an inner disk. Points on the graph itself
    /// resolve by crossing parity; callers that care pre-check
    /// `distance_to_graph`.
    pub fn locate_depth0(&self, z: Complex64) -> Option<usize> {
        self.piece_of_face(self.arrangement.face_containing(z))
    }

    pub fn distance_to_graph(&self, z: Complex64) -> f64 {
        self.arrangement.distance_to_arcs(z)
    }

    /// Certified landing vertices with the internal rays anchored there.
    pub fn landing_certs(
        &self,
    ) -> impl Iterator<Item = (&[(usize, RayAngle)], &CertifiedLanding)> + '_ {
        self.vertex_kinds.iter().filter_map(|k| match k {
            GraphVertexKind::Landing { anchors, cert } => Some((anchors.as_slice(), cert)),
            _ => None,
        })
    }
}

/// Builds the candidate support graph at a parameter with marked critical
/// period `p`. The free critical orbit must be disjoint from the marked
/// cycle's immediate basin (disjoint-cycle or undecided class); candidates
/// whose vertices cannot be certified repelling, or which the free orbit
/// hits at working resolution, are rejected as invalid.
pub fn build_support_graph(
    param: &CubicParam,
    p: usize,
    candidate: GraphCandidate,
) -> Result<SupportGraph, GraphError> {
    assert!(p >= 1 && p <= 4, "landing scan cost is exponential in the period");
    let class = classify(param.c, param.a, p as u32, CLASSIFY_BUDGET);
    match class {
        OrbitClass::TypeD { .. } | OrbitClass::Undecided { .. } => {}
        other => return Err(GraphError::NotPuzzleCandidate { class: other }),
    }

    // Internal angle set: doubling closure of the seeds.
    let mut internal: BTreeSet<RayAngle> = BTreeSet::new();
    for seed in candidate.seeds() {
        let mut t = seed;
        while internal.insert(t) {
            t = t.double();
        }
    }

    // The bundle needs the half angles too: rays of components k >= 1 are
    // forward images of the critical-component rays at angle/2.
    let mut bundle_seeds: BTreeSet<RayAngle> = internal.clone();
    if p > 1 {
        for t in &internal {
            bundle_seeds.insert(RayAngle::new(t.num(), t.den() * 2));
        }
    }
    let seeds: Vec<RayAngle> = bundle_seeds.into_iter().collect();
    let bundle = InternalRayBundle::trace(param, p, &seeds, BUNDLE_LEVEL)?;
    if bundle.degree() != 2 {
        // A cubic critical basin only arises in the unicritical subfamily,
        // where the free orbit coincides with the marked one.
        return Err(GraphError::NotPuzzleCandidate { class });
    }
    let cycle_pts: Vec<Complex64> = bundle.chart().cycle.points.clone();
    let scale = 1.0 + cycle_pts.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let internal: Vec<RayAngle> = internal.into_iter().collect();

    // Landing vertices of the internal rays, merged across components.
    let mut verts: Vec<Complex64> = Vec::new();
    let mut kinds: Vec<GraphVertexKind> = Vec::new();
    let mut anchor_vertex: BTreeMap<(usize, RayAngle), usize> = BTreeMap::new();
    let mut internal_rays: BTreeMap<(usize, RayAngle), TracedRay> = BTreeMap::new();
    for k in 0..p {
        for &t in &internal {
            let ray = bundle.ray(k, t)?;
            let cert = match landing_point(&ray) {
                Ok(cert) => cert,
                Err(RayError::ParabolicSuspect { .. }) => {
                    return Err(GraphError::Invalid {
                        reason: GraphInvalidReason::ParabolicVertex,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            let id = match nearest_vertex(&verts, cert.point) {
                Some((i, d)) if d <= VERTEX_MERGE * scale => i,
                _ => {
                    verts.push(cert.point);
                    kinds.push(GraphVertexKind::Landing { anchors: Vec::new(), cert });
                    verts.len() - 1
                }
            };
            if let GraphVertexKind::Landing { anchors, .. } = &mut kinds[id] {
                anchors.push((k, t));
            }
            anchor_vertex.insert((k, t), id);
            internal_rays.insert((k, t), ray);
        }
    }
    let n_landing = verts.len();

    // Shared co-landing scan: every external angle landing on a graph
    // vertex has tripling period dividing p times the doubling period of
    // its internal partner, so one pass over k / (3^m - 1) finds them all.
    let m: u64 = internal
        .iter()
        .map(|t| t.doubling_period().unwrap_or(1) * p as u64)
        .fold(1, lcm);
    let den = 3u64.pow(m as u32) - 1;
    let coarse_opts = ExternalRayOptions {
        start_level: None,
        min_level: SCAN_LEVEL,
        substeps: 2,
    };
    let mut hits: Vec<(RayAngle, usize)> = (0..den)
        .into_par_iter()
        .filter_map(|k| {
            let t = RayAngle::new(k, den);
            let ray = trace_external_ray_opts(param, t, coarse_opts).ok()?;
            let period = t.tripling_period()? as usize;
            let (zeta, _, _) = refine_periodic(param, ray.endpoint(), period, 0.2 * scale, scale)?;
            let (idx, dist) = nearest_vertex(&verts[..n_landing], zeta)?;
            (dist <= COLANDING_MATCH * scale).then_some((t, idx))
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0));
    hits.dedup_by(|a, b| a.0 == b.0);

    let fine_opts = ExternalRayOptions {
        start_level: None,
        min_level: ARC_LEVEL,
        substeps: 2,
    };
    let fine: Vec<(RayAngle, usize, TracedRay)> = hits
        .into_par_iter()
        .map(|(t, idx)| -> Result<(RayAngle, usize, TracedRay), GraphError> {
            let ray = trace_external_ray_opts(param, t, fine_opts)?;
            let cert = match landing_point(&ray) {
                Ok(cert) => cert,
                Err(RayError::ParabolicSuspect { .. }) => {
                    return Err(GraphError::Invalid {
                        reason: GraphInvalidReason::ParabolicVertex,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            if (cert.point - verts[idx]).norm() > COLANDING_MATCH * scale {
                return Err(GraphError::LandingMismatch { angle: t });
            }
            Ok((t, idx, ray))
        })
        .collect::<Result<Vec<_>, GraphError>>()?;

    let mut ext_by_vertex: Vec<Vec<RayAngle>> = vec![Vec::new(); n_landing];
    let mut ext_rays: BTreeMap<RayAngle, (usize, TracedRay)> = BTreeMap::new();
    for (t, idx, ray) in fine {
        ext_by_vertex[idx].push(t);
        ext_rays.insert(t, (idx, ray));
    }
    for v in ext_by_vertex.iter_mut() {
        v.sort();
    }
    for (v, angles) in ext_by_vertex.iter().enumerate() {
        if angles.is_empty() {
            let &(k, t) = match &kinds[v] {
                GraphVertexKind::Landing { anchors, .. } => anchors.first().unwrap(),
                _ => unreachable!("landing vertices precede feet"),
            };
            return Err(GraphError::MissingColanding { component: k, angle: t });
        }
    }

    // Forward invariance: f maps the vertex of (k, t) onto the vertex of
    // its successor anchor, tripling the co-landing angles.
    let all_ext: BTreeSet<RayAngle> = ext_rays.keys().copied().collect();
    for &t in &all_ext {
        if !all_ext.contains(&t.triple()) {
            return Err(GraphError::AngleSetNotInvariant { angle: t });
        }
    }
    for (&(k, t), &v) in &anchor_vertex {
        let image = if k == 0 { (1 % p, t.double()) } else { ((k + 1) % p, t) };
        let iv = anchor_vertex[&image];
        if (param.eval(verts[v]) - verts[iv]).norm() > COLANDING_MATCH * scale {
            return Err(GraphError::TransportMismatch { component: k, angle: t });
        }
        for &alpha in &ext_by_vertex[v] {
            if !ext_by_vertex[iv].contains(&alpha.triple()) {
                return Err(GraphError::AngleSetNotInvariant { angle: alpha });
            }
        }
    }

    // Feet on the outer circle, one per external angle.
    let ext_sorted: Vec<RayAngle> = all_ext.iter().copied().collect();
    let mut outer_foot: BTreeMap<RayAngle, usize> = BTreeMap::new();
    for &t in &ext_sorted {
        let seed = level_seed(&ext_rays[&t].1.samples, OUTER_LEVEL);
        let target = Complex64::from_polar(OUTER_LEVEL.exp(), TAU * t.as_f64());
        let z = newton_outer(param, target, seed, scale)?;
        verts.push(z);
        kinds.push(GraphVertexKind::OuterFoot { angle: t });
        outer_foot.insert(t, verts.len() - 1);
    }

    // Feet on the inner circles, one per component and internal angle,
    // together with their deep preimage states for the circle marching.
    let mut inner_foot: BTreeMap<(usize, RayAngle), usize> = BTreeMap::new();
    let mut inner_state: BTreeMap<(usize, RayAngle), Complex64> = BTreeMap::new();
    for k in 0..p {
        for &t in &internal {
            let (z0, foot) = inner_foot_solve(param, &bundle, p, k, t, scale)?;
            verts.push(foot);
            kinds.push(GraphVertexKind::InnerFoot { component: k, angle: t });
            inner_foot.insert((k, t), verts.len() - 1);
            inner_state.insert((k, t), z0);
        }
    }

    // Arcs. Internal rays run foot -> landing vertex, external rays run
    // outer foot -> landing vertex, circle segments join consecutive feet.
    let mut arcs: Vec<ArrangementArc> = Vec::new();
    let mut labels: Vec<GraphArcLabel> = Vec::new();
    for k in 0..p {
        for &t in &internal {
            let ray = &internal_rays[&(k, t)];
            let vid = anchor_vertex[&(k, t)];
            let fid = inner_foot[&(k, t)];
            let points =
                ray_arc_points(&ray.samples, |l| l > INNER_LEVEL, verts[fid], verts[vid], scale);
            arcs.push(ArrangementArc { from: fid, to: vid, points });
            labels.push(GraphArcLabel::InternalRay { component: k, angle: t });
        }
    }
    for &t in &ext_sorted {
        let (vid, ray) = &ext_rays[&t];
        let fid = outer_foot[&t];
        let points =
            ray_arc_points(&ray.samples, |l| l < OUTER_LEVEL, verts[fid], verts[*vid], scale);
        arcs.push(ArrangementArc { from: fid, to: *vid, points });
        labels.push(GraphArcLabel::ExternalRay { angle: t });
    }
    for i in 0..ext_sorted.len() {
        let t0 = ext_sorted[i];
        let t1 = ext_sorted[(i + 1) % ext_sorted.len()];
        let a0 = t0.as_f64();
        let a1 = if i + 1 == ext_sorted.len() { t1.as_f64() + 1.0 } else { t1.as_f64() };
        let (f0, f1) = (outer_foot[&t0], outer_foot[&t1]);
        let points = march_outer(param, a0, verts[f0], a1, verts[f1], scale)?;
        arcs.push(ArrangementArc { from: f0, to: f1, points });
        labels.push(GraphArcLabel::OuterEquipotential { segment: i });
    }
    let chart = bundle.chart();
    for k in 0..p {
        let n = if k == 0 { 2 * p } else { 3 * p };
        for i in 0..internal.len() {
            let t0 = internal[i];
            let t1 = internal[(i + 1) % internal.len()];
            let a0 = t0.as_f64();
            let a1 = if i + 1 == internal.len() { t1.as_f64() + 1.0 } else { t1.as_f64() };
            let (f0, f1) = (inner_foot[&(k, t0)], inner_foot[&(k, t1)]);
            let s0 = inner_state[&(k, t0)];
            let s1 = inner_state[&(k, t1)];
            let points = march_inner(
                param, chart, k, n, a0, s0, verts[f0], a1, s1, verts[f1], scale,
            )?;
            arcs.push(ArrangementArc { from: f0, to: f1, points });
            labels.push(GraphArcLabel::InnerEquipotential { component: k, segment: i });
        }
    }

    let arrangement = PlanarArrangement::assemble(verts, arcs)?;

    // The removed inner disk of component k is the face holding its cycle
    // point; everything else bounded is a depth-zero piece.
    let mut deep_faces: Vec<FaceId> = Vec::new();
    for (k, &w) in cycle_pts.iter().enumerate().take(p) {
        let fid = arrangement.face_containing(w);
        if arrangement.faces[fid].unbounded || deep_faces.contains(&fid) {
            return Err(GraphError::MalformedFaces {
                detail: format!("cycle point {k} is not enclosed by its own inner circle"),
            });
        }
        for d in &arrangement.faces[fid].walk {
            match labels[d.arc] {
                GraphArcLabel::InnerEquipotential { component, .. } if component == k => {}
                other => {
                    return Err(GraphError::MalformedFaces {
                        detail: format!("inner disk {k} bounded by {other:?}"),
                    })
                }
            }
        }
        deep_faces.push(fid);
    }
    let mut face_piece: Vec<Option<usize>> = vec![None; arrangement.faces.len()];
    let mut pieces: Vec<FaceId> = Vec::new();
    for (fid, face) in arrangement.faces.iter().enumerate() {
        if face.unbounded || deep_faces.contains(&fid) {
            continue;
        }
        face_piece[fid] = Some(pieces.len());
        pieces.push(fid);
    }

    // The free critical orbit must stay off the graph for itineraries to
    // be well defined.
    let mut z = -param.c;
    for step in 0..=ORBIT_AVOIDANCE_BUDGET {
        if arrangement.distance_to_arcs(z) < ON_GRAPH_RESOLUTION * scale {
            return Err(GraphError::Invalid {
                reason: GraphInvalidReason::HitsCriticalOrbit { step },
            });
        }
        z = param.eval(z);
        if !z.norm_sqr().is_finite() || z.norm() > 1e6 {
            break;
        }
    }

    let mut colanding: BTreeMap<(usize, RayAngle), Vec<RayAngle>> = BTreeMap::new();
    for (&(k, t), &v) in &anchor_vertex {
        colanding.insert((k, t), ext_by_vertex[v].clone());
    }

    Ok(SupportGraph {
        param: *param,
        period: p,
        candidate,
        scale,
        bundle,
        internal_angles: internal,
        external_angles: ext_sorted,
        colanding,
        arrangement,
        labels,
        vertex_kinds: kinds,
        pieces,
        face_piece,
        deep_faces,
    })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn nearest_vertex(verts: &[Complex64], z: Complex64) -> Option<(usize, f64)> {
    verts
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, (v - z).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Interpolated ray point at the given potential level, clamped to the
/// nearer end when the level is outside the sampled range.
fn level_seed(samples: &[RaySample], level: f64) -> Complex64 {
    for w in samples.windows(2) {
        if (w[0].level - level) * (w[1].level - level) <= 0.0 {
            let gap = w[1].level - w[0].level;
            let frac = if gap.abs() < f64::MIN_POSITIVE { 0.5 } else { (level - w[0].level) / gap };
            return w[0].z + (w[1].z - w[0].z) * frac;
        }
    }
    let first = samples.first().expect("ray has samples");
    let last = samples.last().expect("ray has samples");
    if (first.level - level).abs() < (last.level - level).abs() {
        first.z
    } else {
        last.z
    }
}

/// Ray samples passing `keep`, with the exact foot prepended and the
/// landing vertex appended; samples inside the trim radius of the vertex
/// are dropped so the final step has a converged direction.
fn ray_arc_points(
    samples: &[RaySample],
    keep: impl Fn(f64) -> bool,
    foot: Complex64,
    vertex: Complex64,
    scale: f64,
) -> Vec<Complex64> {
    let mut pts = vec![foot];
    for s in samples {
        if keep(s.level) && (s.z - *pts.last().unwrap()).norm() > 1e-13 * scale {
            pts.push(s.z);
        }
    }
    while pts.len() > 1 && (pts.last().unwrap() - vertex).norm() < TAIL_TRIM * scale {
        pts.pop();
    }
    pts.push(vertex);
    pts
}

/// Newton solve of the outer Boettcher coordinate to a target value, with
/// a finite-difference derivative.
fn newton_outer(
    param: &CubicParam,
    target: Complex64,
    seed: Complex64,
    scale: f64,
) -> Result<Complex64, GraphError> {
    let h = Complex64::new(1e-6 * scale, 0.0);
    let mut z = seed;
    for _ in 0..60 {
        let b = bottcher_infinity(param, z)?;
        let r = b - target;
        if r.norm() <= 1e-10 * target.norm() {
            return Ok(z);
        }
        let db = (bottcher_infinity(param, z + h)? - bottcher_infinity(param, z - h)?) / (2.0 * h);
        if db.norm_sqr() == 0.0 || !db.norm_sqr().is_finite() {
            break;
        }
        z -= r / db;
    }
    Err(GraphError::EquipotentialStall)
}

/// Newton solve of f^n(z) = w from a nearby seed.
fn newton_orbit_target(
    param: &CubicParam,
    n: usize,
    w: Complex64,
    seed: Complex64,
    guard: f64,
    scale: f64,
) -> Result<Complex64, GraphError> {
    let mut z = seed;
    for _ in 0..60 {
        let (fz, dfz) = param.orbit_jet(z, n);
        if !fz.norm_sqr().is_finite() || dfz.norm_sqr() == 0.0 {
            break;
        }
        let step = (fz - w) / dfz;
        if !step.norm_sqr().is_finite() {
            break;
        }
        z -= step;
        if (z - seed).norm() > guard {
            break;
        }
        if step.norm() < 1e-11 * scale {
            return Ok(z);
        }
    }
    Err(GraphError::EquipotentialStall)
}

/// Deep chart target of the inner circle at label angle `theta`: two
/// return-map steps out of level -1 (three out of -1/2) land at level -4
/// inside the linearizing disk, quadrupling the angle.
fn deep_target(chart: &BasinChart, theta: f64) -> Result<Complex64, GraphError> {
    let s = Complex64::from_polar((4.0 * INNER_LEVEL).exp(), TAU * 4.0 * theta);
    Ok(chart.invert_linearizing(s)?)
}

/// Exact foot of the internal ray (component k, angle t) on the inner
/// circle, returned with its deep preimage state z0: the foot is the
/// k-step forward image of z0, and f^n(z0) hits the deep chart target.
fn inner_foot_solve(
    param: &CubicParam,
    bundle: &InternalRayBundle,
    p: usize,
    k: usize,
    t: RayAngle,
    scale: f64,
) -> Result<(Complex64, Complex64), GraphError> {
    let (src, lvl0, n) = if k == 0 {
        (t, INNER_LEVEL, 2 * p)
    } else {
        (RayAngle::new(t.num(), t.den() * 2), INNER_LEVEL / 2.0, 3 * p)
    };
    let ray0 = bundle.ray(0, src)?;
    let seed = level_seed(&ray0.samples, lvl0);
    let w = deep_target(bundle.chart(), t.as_f64())?;
    let z0 = newton_orbit_target(param, n, w, seed, 0.2 * scale, scale)?;
    Ok((z0, param.orbit_point(z0, k)))
}

/// Polyline of the outer circle between the feet at angles a0 < a1.
fn march_outer(
    param: &CubicParam,
    a0: f64,
    z0: Complex64,
    a1: f64,
    z1: Complex64,
    scale: f64,
) -> Result<Vec<Complex64>, GraphError> {
    let mut pts = vec![z0];
    subdivide_outer(param, a0, z0, a1, z1, scale, 0, &mut pts)?;
    pts.push(z1);
    Ok(pts)
}

fn subdivide_outer(
    param: &CubicParam,
    a0: f64,
    z0: Complex64,
    a1: f64,
    z1: Complex64,
    scale: f64,
    depth: u32,
    out: &mut Vec<Complex64>,
) -> Result<(), GraphError> {
    if (z1 - z0).norm() <= EQUIP_STEP * scale && a1 - a0 <= ANGLE_CAP {
        return Ok(());
    }
    if depth > 26 {
        return Err(GraphError::EquipotentialStall);
    }
    let am = 0.5 * (a0 + a1);
    let target = Complex64::from_polar(OUTER_LEVEL.exp(), TAU * am);
    let zm = newton_outer(param, target, 0.5 * (z0 + z1), scale)?;
    subdivide_outer(param, a0, z0, am, zm, scale, depth + 1, out)?;
    out.push(zm);
    subdivide_outer(param, am, zm, a1, z1, scale, depth + 1, out)
}

/// Polyline of the inner circle of component k between consecutive feet,
/// tracked through the deep preimage states.
#[allow(clippy::too_many_arguments)]
fn march_inner(
    param: &CubicParam,
    chart: &BasinChart,
    k: usize,
    n: usize,
    a0: f64,
    s0: Complex64,
    z0: Complex64,
    a1: f64,
    s1: Complex64,
    z1: Complex64,
    scale: f64,
) -> Result<Vec<Complex64>, GraphError> {
    let mut pts = vec![z0];
    subdivide_inner(param, chart, k, n, a0, s0, z0, a1, s1, z1, scale, 0, &mut pts)?;
    pts.push(z1);
    Ok(pts)
}

#[allow(clippy::too_many_arguments)]
fn subdivide_inner(
    param: &CubicParam,
    chart: &BasinChart,
    k: usize,
    n: usize,
    a0: f64,
    s0: Complex64,
    z0: Complex64,
    a1: f64,
    s1: Complex64,
    z1: Complex64,
    scale: f64,
    depth: u32,
    out: &mut Vec<Complex64>,
) -> Result<(), GraphError> {
    if (z1 - z0).norm() <= EQUIP_STEP * scale && a1 - a0 <= ANGLE_CAP {
        return Ok(());
    }
    if depth > 26 {
        return Err(GraphError::EquipotentialStall);
    }
    let am = 0.5 * (a0 + a1);
    let w = deep_target(chart, am)?;
    let guard = 4.0 * (s1 - s0).norm() + 1e-4 * scale;
    let sm = newton_orbit_target(param, n, w, 0.5 * (s0 + s1), guard, scale)?;
    let zm = param.orbit_point(sm, k);
    subdivide_inner(param, chart, k, n, a0, s0, z0, am, sm, zm, scale, depth + 1, out)?;
    out.push(zm);
    subdivide_inner(param, chart, k, n, am, sm, zm, a1, s1, z1, scale, depth + 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::disjoint_cycle_params;

    fn first_buildable(p: usize, candidate: GraphCandidate) -> SupportGraph {
        for param in disjoint_cycle_params(p as u32) {
            match build_support_graph(&param, p, candidate) {
                Ok(g) => return g,
                Err(GraphError::Invalid { .. }) => continue,
                Err(e) => panic!("graph build failed at {param:?}: {e}"),
            }
        }
        panic!("no parameter in the scan grid admits the {candidate:?} graph");
    }

    #[test]
    fn fixed_point_graph_census_matches_star_structure() {
        let g = first_buildable(1, GraphCandidate::OneSeventh);
        let arr = g.arrangement();

        assert_eq!(g.internal_angles().len(), 3);
        let landings: Vec<_> = g.landing_certs().collect();
        assert_eq!(landings.len(), 3);
        for (_, cert) in &landings {
            assert!(cert.multiplier.norm() > 1.0 + 1e-4);
        }

        // One outer foot and one outer segment per external angle, one
        // inner foot, inner segment, and internal ray per internal angle.
        let n_ext = g.external_angles().len();
        assert!(n_ext >= 3);
        let count = |pred: &dyn Fn(&GraphArcLabel) -> bool| g.labels().iter().filter(|l| pred(l)).count();
        assert_eq!(count(&|l| matches!(l, GraphArcLabel::InternalRay { .. })), 3);
        assert_eq!(count(&|l| matches!(l, GraphArcLabel::ExternalRay { .. })), n_ext);
        assert_eq!(count(&|l| matches!(l, GraphArcLabel::OuterEquipotential { .. })), n_ext);
        assert_eq!(count(&|l| matches!(l, GraphArcLabel::InnerEquipotential { .. })), 3);

        // Euler formula on the sphere-minus-outer-face picture.
        let v = arr.verts.len() as i64;
        let e = arr.arcs.len() as i64;
        let f = arr.faces.len() as i64;
        assert_eq!(v - e + f, 2);

        // For one component and a single orbit, removing the outer region
        // and the inner disk leaves one piece per external ray.
        assert_eq!(g.deep_faces().len(), 1);
        assert_eq!(g.depth0_pieces().len(), n_ext);
    }

    #[test]
    fn angle_sets_are_forward_invariant() {
        let g = first_buildable(1, GraphCandidate::Union);
        let internal: BTreeSet<RayAngle> = g.internal_angles().iter().copied().collect();
        for t in &internal {
            assert!(internal.contains(&t.double()));
        }
        let external: BTreeSet<RayAngle> = g.external_angles().iter().copied().collect();
        for t in &external {
            assert!(external.contains(&t.triple()));
        }
        // Doubling an internal angle triples its co-landing set.
        for &t in g.internal_angles() {
            let star = g.colanding(0, t).unwrap();
            let image = g.colanding(0, t.double()).unwrap();
            for alpha in star {
                assert!(image.contains(&alpha.triple()));
            }
        }
    }

    #[test]
    fn two_cycle_graph_separates_components() {
        let g = first_buildable(2, GraphCandidate::OneSeventh);
        let arr = g.arrangement();
        let v = arr.verts.len() as i64;
        let e = arr.arcs.len() as i64;
        let f = arr.faces.len() as i64;
        assert_eq!(v - e + f, 2);
        assert_eq!(g.deep_faces().len(), 2);
        assert_eq!(g.internal_angles().len(), 3);
        assert_eq!(
            g.labels()
                .iter()
                .filter(|l| matches!(l, GraphArcLabel::InternalRay { .. }))
                .count(),
            6
        );

        // Vertices transport: f maps the landing point of (k, t) onto the
        // landing point of the successor anchor.
        let param = *g.param();
        for (anchors, cert) in g.landing_certs() {
            for &(k, t) in anchors {
                let image = if k == 0 { (1 % 2, t.double()) } else { ((k + 1) % 2, t) };
                let target = g
                    .landing_certs()
                    .find(|(a, _)| a.contains(&image))
                    .map(|(_, c)| c.point)
                    .expect("successor vertex exists");
                assert!((param.eval(cert.point) - target).norm() < 1e-6 * g.scale());
            }
        }
    }

    #[test]
    fn free_orbit_itinerary_is_defined() {
        let g = first_buildable(1, GraphCandidate::OneSeventh);
        let param = *g.param();
        // Cycle points sit in the removed disks, not in pieces.
        for &w in &g.bundle().chart().cycle.points {
            assert_eq!(g.locate_depth0(w), None);
        }
        // The free orbit stays clear of the graph and inside pieces.
        let mut z = -param.c;
        for _ in 0..16 {
            assert!(g.distance_to_graph(z) >= ON_GRAPH_RESOLUTION * g.scale());
            assert!(g.locate_depth0(z).is_some(), "free orbit leaves the pieces at {z}");
            z = param.eval(z);
        }
    }

    #[test]
    fn non_candidate_parameters_are_rejected() {
        // a = c + 2c^3 keeps the marked point fixed; with large real c the
        // free orbit escapes.
        let c = 2.0;
        let escape = CubicParam {
            c: Complex64::new(c, 0.0),
            a: Complex64::new(c + 2.0 * c * c * c, 0.0),
        };
        match build_support_graph(&escape, 1, GraphCandidate::OneSeventh) {
            Err(GraphError::NotPuzzleCandidate { .. }) => {}
            other => panic!("expected rejection, got {other:?}"),
        }

        // Free orbit falling into the marked basin.
        let c = 0.3;
        let basin = CubicParam {
            c: Complex64::new(c, 0.0),
            a: Complex64::new(c + 2.0 * c * c * c, 0.0),
        };
        match build_support_graph(&basin, 1, GraphCandidate::OneSeventh) {
            Err(GraphError::NotPuzzleCandidate { .. }) => {}
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
