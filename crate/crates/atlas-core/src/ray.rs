//! Dynamical ray tracing.
//!
//! External rays are gradient lines of the potential of infinity, traced by
//! Newton continuation against far-field targets where the Boettcher
//! coordinate is within rounding of the identity. Internal rays live in the
//! superattracting basin of the critical cycle: the whole angle bundle of
//! the critical component is traced at once on a geometric ladder of
//! potential levels, each rung a branch-tracked inverse image of a deeper
//! rung under the return map, and rays in the other cycle components are
//! forward images of the critical-component bundle.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::angle::RayAngle;
use crate::cubic::{critical_cycle, CubicParam, MAX_DETECT_PERIOD};
use crate::potential::{bottcher_infinity, BasinChart, PotentialError};

/// Extra potential above log R_esc at which the infinity coordinate is
/// treated as asymptotically straight; the relative deviation there is
/// O(e^{-2 margin}).
const FAR_MARGIN: f64 = 2.0;
/// Polyline density of external rays: sample targets per halving of the
/// potential.
const EXT_SUBSTEPS: u32 = 2;
/// Relative Newton convergence tolerance for ray continuation.
const NEWTON_TOL: f64 = 1e-12;
/// Consecutive-sample movement below which a ray is declared landed.
const LANDING_STALL: f64 = 1e-9;
/// Periodicity residual required of a certified landing point.
const CERT_RESIDUAL: f64 = 1e-10;
/// Half-width of the indifferent multiplier window around modulus 1.
const INDIFFERENT_WINDOW: f64 = 1e-4;
/// Potential of the linearizing-disk anchor of internal ray ladders.
const INTERNAL_SEED_LEVEL: f64 = -12.0;
/// Potential above which internal rungs switch from direct chart inversion
/// to Newton lifting of the return map. Below this level the return-map
/// derivative D*A*delta^{D-1} is so small that f64 evaluation noise
/// swamps Newton steps, while the chart's deviation-tracked inversion
/// stays fully accurate.
const INTERNAL_HANDOFF: f64 = -4.0;
/// Ladder rungs per level doubling (per level tripling when the return map
/// has local degree 3) of an internal ray.
const INTERNAL_SUBSTEPS: u32 = 8;
/// Subdivision budget of one continuation step before the obstruction is
/// reported as a bifurcation.
const SPLIT_BUDGET: u32 = 80;

/// Failure modes of ray tracing and landing certification.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RayError {
    /// Newton continuation could not follow a single branch: the ray runs
    /// into a pre-critical point and genuinely splits there.
    #[error("ray bifurcates near potential level {level:.6e}")]
    Bifurcates { level: f64 },
    /// The landing multiplier sits in the indifferent window (or is
    /// attracting, which no ray can reach), so repelling certification is
    /// impossible and graph validity must be re-examined.
    #[error("landing multiplier has modulus {modulus:.8} and is not certifiably repelling")]
    ParabolicSuspect { modulus: f64 },
    /// The ray was truncated before any landing behaviour was visible.
    #[error("ray is truncated; there is no landing point")]
    NotLanded,
    /// The ray stagnated but carries no certificate: the angle is strictly
    /// preperiodic or the periodicity refinement failed.
    #[error("landing point has no periodicity certificate")]
    UncertifiedLanding,
    /// The critical point is not periodic, so there is no basin whose
    /// internal rays could be traced.
    #[error("no superattracting cycle of period {period}; no internal rays")]
    NoCriticalCycle { period: u32 },
    /// The requested angle is outside the bundle's traced closure.
    #[error("angle {angle} was not traced in this bundle")]
    AngleNotTraced { angle: RayAngle },
    /// Failure of an underlying potential-theoretic chart.
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// One polyline vertex of a traced ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub z: Complex64,
    /// Potential level: positive for external rays, negative for internal.
    pub level: f64,
}

/// Which ray a trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RayKind {
    External { angle: RayAngle },
    /// Internal ray of the basin component containing f^component(c),
    /// 0 <= component < p.
    Internal { component: u32, angle: RayAngle },
}

/// Newton certificate of a landing point: the point solves its periodicity
/// equation and carries the cycle multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandingCert {
    pub period: u32,
    pub multiplier: Complex64,
    pub residual: f64,
}

/// How a trace ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayLanding {
    /// Samples stagnated; `cert` is present when the angle is periodic and
    /// Newton refinement of the periodicity equation succeeded.
    Landed { point: Complex64, cert: Option<LandingCert> },
    /// The requested level floor (or the sample budget) was reached first.
    Truncated { level: f64 },
}

/// A traced ray: polyline samples with strictly monotone potential, plus
/// the landing state.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedRay {
    pub kind: RayKind,
    pub samples: Vec<RaySample>,
    pub landing: RayLanding,
}

impl TracedRay {
    /// Landing point when landed, otherwise the deepest sample.
    pub fn endpoint(&self) -> Complex64 {
        match self.landing {
            RayLanding::Landed { point, .. } => point,
            RayLanding::Truncated { .. } => self.samples.last().map(|s| s.z).unwrap_or_default(),
        }
    }

    /// Distance from `z` to the sampled polyline (landing vertex included).
    pub fn tube_distance(&self, z: Complex64) -> f64 {
        let mut pts: Vec<Complex64> = self.samples.iter().map(|s| s.z).collect();
        if let RayLanding::Landed { point, .. } = self.landing {
            pts.push(point);
        }
        let mut best = f64::INFINITY;
        for w in pts.windows(2) {
            best = best.min(segment_distance(z, w[0], w[1]));
        }
        if pts.len() == 1 {
            best = (z - pts[0]).norm();
        }
        best
    }
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let den = ab.norm_sqr();
    if den == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a) * ab.conj()).re / den;
    let t = t.clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Certified landing point of a traced ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedLanding {
    pub point: Complex64,
    pub period: u32,
    pub multiplier: Complex64,
    pub residual: f64,
}

/// Extracts the certified landing point of a ray, requiring a repelling
/// multiplier. Multipliers with modulus below 1 + 1e-4 cannot be certified
/// repelling and are reported as parabolic suspects.
pub fn landing_point(ray: &TracedRay) -> Result<CertifiedLanding, RayError> {
    match ray.landing {
        RayLanding::Truncated { .. } => Err(RayError::NotLanded),
        RayLanding::Landed { cert: None, .. } => Err(RayError::UncertifiedLanding),
        RayLanding::Landed { point, cert: Some(cert) } => {
            let modulus = cert.multiplier.norm();
            if modulus < 1.0 + INDIFFERENT_WINDOW {
                return Err(RayError::ParabolicSuspect { modulus });
            }
            Ok(CertifiedLanding {
                point,
                period: cert.period,
                multiplier: cert.multiplier,
                residual: cert.residual,
            })
        }
    }
}

/// Newton refinement of a period-m point near z0. Accepts only when the
/// iteration converges, stays within `drift` of z0, and the residual meets
/// the certification bound. Returns (point, multiplier, residual).
pub(crate) fn refine_periodic(
    param: &CubicParam,
    z0: Complex64,
    m: usize,
    drift: f64,
    scale: f64,
) -> Option<(Complex64, Complex64, f64)> {
    let one = Complex64::new(1.0, 0.0);
    let mut z = z0;
    for _ in 0..80 {
        let (fz, dfz) = param.orbit_jet(z, m);
        if !fz.norm_sqr().is_finite() {
            return None;
        }
        let dg = dfz - one;
        if dg.norm_sqr() == 0.0 {
            return None;
        }
        let step = (fz - z) / dg;
        z -= step;
        if !z.norm_sqr().is_finite() {
            return None;
        }
        if step.norm() < 1e-14 * scale {
            break;
        }
    }
    if (z - z0).norm() > drift {
        return None;
    }
    let (fz, dfz) = param.orbit_jet(z, m);
    let residual = (fz - z).norm();
    if residual > CERT_RESIDUAL * scale {
        return None;
    }
    Some((z, dfz, residual))
}

// ---------------------------------------------------------------------
// External rays
// ---------------------------------------------------------------------

/// Options for [`trace_external_ray_opts`].
#[derive(Debug, Clone, Copy)]
pub struct ExternalRayOptions {
    /// Starting potential; defaults to 3 (log R_esc + margin). Values below
    /// the far-field threshold are clamped up to it.
    pub start_level: Option<f64>,
    /// Potential floor at which the trace truncates if it has not landed.
    pub min_level: f64,
    /// Sample targets per halving of the potential.
    pub substeps: u32,
}

/// Point of the external ray at the given potential and angle, far enough
/// out that the infinity coordinate inverts by fixed-point iteration.
fn far_point(param: &CubicParam, level: f64, angle_turns: f64) -> Result<Complex64, PotentialError> {
    let s = Complex64::from_polar(level.exp(), std::f64::consts::TAU * angle_turns);
    let mut z = s;
    for _ in 0..50 {
        let b = bottcher_infinity(param, z)?;
        let next = z * (s / b);
        let moved = (next - z).norm();
        z = next;
        if moved < 1e-14 * z.norm() {
            break;
        }
    }
    let b = bottcher_infinity(param, z)?;
    if (b - s).norm() > 1e-9 * s.norm() {
        return Err(PotentialError::OutsideDomain);
    }
    Ok(z)
}

/// Newton solve of f^n(z) = far-field target for the ray point at `level`,
/// with n the number of triplings needed to lift the level into the far
/// zone. Rejects when the iterate leaves the `guard` disk around the seed
/// (branch jump) or fails to converge.
fn newton_external(
    param: &CubicParam,
    t: RayAngle,
    l_far: f64,
    level: f64,
    seed: Complex64,
    guard: f64,
) -> Option<Complex64> {
    let mut n = 0usize;
    let mut lifted = level;
    let mut angle = t;
    while lifted < l_far {
        lifted *= 3.0;
        angle = angle.triple();
        n += 1;
        if n > 256 {
            return None;
        }
    }
    let w = far_point(param, lifted, angle.as_f64()).ok()?;
    let mut z = seed;
    for _ in 0..60 {
        let (fz, dfz) = param.orbit_jet(z, n);
        if !fz.norm_sqr().is_finite() || dfz.norm_sqr() == 0.0 {
            return None;
        }
        let step = (fz - w) / dfz;
        if !step.norm_sqr().is_finite() {
            return None;
        }
        z -= step;
        if (z - seed).norm() > guard {
            return None;
        }
        if step.norm() < NEWTON_TOL * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Continues the ray point from `from_level` down to `to_level`, bisecting
/// the level step when the continuation rejects.
///
/// Each hop seeds Newton at the linear extrapolation of the last two
/// accepted points and accepts only results within a fraction of the
/// expected movement. On smooth ray sections the deviation from the
/// prediction is quadratic in the step, so hops accept; at a fork the
/// nearest solution stays a fixed distance from every prediction while the
/// allowance shrinks with subdivision, so the split budget exhausts and the
/// bifurcation is reported, never healed.
fn external_continue(
    param: &CubicParam,
    t: RayAngle,
    l_far: f64,
    z_from: Complex64,
    from_level: f64,
    to_level: f64,
    prev: Option<(Complex64, f64)>,
    scale: f64,
) -> Result<Complex64, RayError> {
    let mut z = z_from;
    let mut cur = from_level;
    // Most recent accepted point behind `z` and its level distance.
    let mut behind = prev;
    let mut stack = vec![to_level];
    let mut splits = 0u32;
    while let Some(&lvl) = stack.last() {
        let d_l = cur - lvl;
        let predicted = match behind {
            // Log-linear continuation: exact for the far-field ray (|z|
            // decays exponentially in the level) and asymptotically the
            // linear extrapolation once steps are small near the Julia set.
            Some((zp, dlp)) if dlp > 0.0 && zp.norm_sqr() > 0.0 && z.norm_sqr() > 0.0 => {
                ((z / zp).ln() * (d_l / dlp)).exp() * z
            }
            // No history yet: the far-field ray is radial in log scale.
            _ => z * (-d_l).exp(),
        };
        let expected_move = (predicted - z).norm();
        let allowed_dev = 0.75 * expected_move + 1e-9 * scale;
        let guard = 2.0 * expected_move + 8.0 * allowed_dev;
        let accepted = newton_external(param, t, l_far, lvl, predicted, guard)
            .filter(|next| (next - predicted).norm() <= allowed_dev);
        match accepted {
            Some(next) => {
                behind = Some((z, d_l));
                z = next;
                cur = lvl;
                stack.pop();
            }
            None => {
                splits += 1;
                if splits > SPLIT_BUDGET || d_l < 1e-9 * (1.0 + cur.abs()) {
                    return Err(RayError::Bifurcates { level: lvl });
                }
                stack.push((cur + lvl) / 2.0);
            }
        }
    }
    Ok(z)
}

/// Traces the external ray at angle `t` from the far field down to
/// `min_level`, landing detection included.
pub fn trace_external_ray(param: &CubicParam, t: RayAngle, min_level: f64) -> Result<TracedRay, RayError> {
    trace_external_ray_opts(
        param,
        t,
        ExternalRayOptions { start_level: None, min_level, substeps: EXT_SUBSTEPS },
    )
}

/// External ray trace with explicit start level and polyline density.
///
/// Samples sit at potentials start * 2^{-j/substeps}, strictly decreasing.
/// The trace ends as Landed when consecutive samples stagnate within 1e-9
/// (the point then Newton-refined on its periodicity equation when the
/// angle is tripling-periodic), or as Truncated at `min_level`.
pub fn trace_external_ray_opts(
    param: &CubicParam,
    t: RayAngle,
    opts: ExternalRayOptions,
) -> Result<TracedRay, RayError> {
    assert!(opts.min_level > 0.0, "external rays need a positive level floor");
    let r_esc = param.escape_bound().0;
    let l_far = r_esc.ln() + FAR_MARGIN;
    let l0 = opts.start_level.unwrap_or(3.0 * l_far).max(l_far);
    assert!(opts.min_level < l0, "level floor must sit below the start level");
    let scale = 1.0 + r_esc;
    let shrink = 0.5f64.powf(1.0 / opts.substeps.max(1) as f64);

    let mut z = far_point(param, l0, t.as_f64())?;
    let mut level = l0;
    let mut samples = vec![RaySample { z, level }];
    let mut behind: Option<(Complex64, f64)> = None;
    let mut stall = 0u32;

    while level > opts.min_level {
        let next_level = (level * shrink).max(opts.min_level);
        let next = external_continue(param, t, l_far, z, level, next_level, behind, scale)?;
        let moved = (next - z).norm();
        samples.push(RaySample { z: next, level: next_level });
        if moved < LANDING_STALL * scale {
            stall += 1;
        } else {
            stall = 0;
        }
        behind = Some((z, level - next_level));
        z = next;
        level = next_level;
        if stall >= 2 {
            let cert = t.tripling_period().and_then(|m| {
                refine_periodic(param, z, m as usize, 1e-4 * scale, scale).map(
                    |(point, multiplier, residual)| {
                        (point, LandingCert { period: m as u32, multiplier, residual })
                    },
                )
            });
            let (point, cert) = match cert {
                Some((point, cert)) => (point, Some(cert)),
                None => (z, None),
            };
            return Ok(TracedRay {
                kind: RayKind::External { angle: t },
                samples,
                landing: RayLanding::Landed { point, cert },
            });
        }
        if samples.len() > 100_000 {
            break;
        }
    }
    Ok(TracedRay {
        kind: RayKind::External { angle: t },
        samples,
        landing: RayLanding::Truncated { level },
    })
}

// ---------------------------------------------------------------------
// Internal rays
// ---------------------------------------------------------------------

/// The traced internal-ray bundle of the critical basin component.
///
/// Rays are stored on a shared geometric ladder of potentials
/// `SEED * D^{-j/S}` (D the return-map degree, S the substep count), so the
/// rung at index j of angle theta is the branch-tracked solution of
/// `f^p(z) = rung(D*theta, j - S)`: one application of the return map
/// multiplies the internal angle by D and the potential by D. Rays of the
/// other cycle components are forward images of this bundle.
#[derive(Debug, Clone)]
pub struct InternalRayBundle {
    param: CubicParam,
    chart: BasinChart,
    period: usize,
    /// Rung potentials, strictly increasing toward 0.
    levels: Vec<f64>,
    rays: BTreeMap<RayAngle, Vec<Complex64>>,
}

impl InternalRayBundle {
    /// Local degree of the return map: 2 at a simple critical point, 3 in
    /// the unicritical subfamily.
    pub fn degree(&self) -> u32 {
        self.chart.degree
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn angles(&self) -> impl Iterator<Item = RayAngle> + '_ {
        self.rays.keys().copied()
    }

    pub fn chart(&self) -> &BasinChart {
        &self.chart
    }

    /// Traces the closure of `seed_angles` under angle multiplication by
    /// the return-map degree, out to the first ladder rung at or above
    /// `max_level` (a negative potential).
    pub fn trace(
        param: &CubicParam,
        p: usize,
        seed_angles: &[RayAngle],
        max_level: f64,
    ) -> Result<Self, RayError> {
        let cycle = critical_cycle(param, p)
            .map_err(|_| RayError::NoCriticalCycle { period: p as u32 })?;
        let chart = BasinChart::from_cycle(param, &cycle)?;
        Self::trace_with_chart(param, chart, p, seed_angles, max_level)
    }

    fn trace_with_chart(
        param: &CubicParam,
        chart: BasinChart,
        p: usize,
        seed_angles: &[RayAngle],
        max_level: f64,
    ) -> Result<Self, RayError> {
        assert!(max_level < 0.0, "internal rays live at negative potential");
        let d = chart.degree as u64;
        let scale = 1.0 + chart.cycle.points.iter().map(|z| z.norm()).fold(0.0, f64::max);

        let mut angles: BTreeSet<RayAngle> = BTreeSet::new();
        let mut queue: Vec<RayAngle> = seed_angles.to_vec();
        while let Some(a) = queue.pop() {
            if angles.insert(a) {
                queue.push(a.times(d));
            }
        }
        let angles: Vec<RayAngle> = angles.into_iter().collect();

        let s = INTERNAL_SUBSTEPS as usize;
        let ratio = (d as f64).powf(1.0 / s as f64);
        let mut levels = Vec::new();
        let mut lvl = INTERNAL_SEED_LEVEL;
        while lvl < max_level {
            levels.push(lvl);
            lvl /= ratio;
        }
        levels.push(lvl);

        let tau = std::f64::consts::TAU;
        let mut rays: BTreeMap<RayAngle, Vec<Complex64>> = BTreeMap::new();
        for &a in &angles {
            let target = Complex64::from_polar(levels[0].exp(), tau * a.as_f64());
            let z = chart.invert_linearizing(target)?;
            rays.insert(a, vec![z]);
        }

        // Target on the parent ray (angle already multiplied by D) at an
        // off-rung potential: deep levels invert the chart directly, the
        // rest interpolate the parent polyline. Interpolated targets only
        // seed intermediate hops; stored rungs always solve against exact
        // parent rungs.
        let parent_at = |rays: &BTreeMap<RayAngle, Vec<Complex64>>,
                         parent: RayAngle,
                         lvl_d: f64|
         -> Result<Complex64, RayError> {
            if lvl_d <= levels[0] {
                let target = Complex64::from_polar(lvl_d.exp(), tau * parent.as_f64());
                return Ok(chart.invert_linearizing(target)?);
            }
            let pts = &rays[&parent];
            let mut i = match levels.binary_search_by(|l| l.partial_cmp(&lvl_d).unwrap()) {
                Ok(i) => return Ok(pts[i.min(pts.len() - 1)]),
                Err(i) => i,
            };
            i = i.clamp(1, pts.len() - 1);
            let (l0, l1) = (levels[i - 1], levels[i]);
            let w = ((lvl_d - l0) / (l1 - l0)).clamp(0.0, 1.0);
            Ok(pts[i - 1] * (1.0 - w) + pts[i] * w)
        };

        let anchor = chart.cycle.points[0];
        let mut prev_moves: BTreeMap<RayAngle, f64> =
            angles.iter().map(|&a| (a, 1e-9 * scale)).collect();

        for j in 1..levels.len() {
            for &a in &angles {
                if levels[j] <= INTERNAL_HANDOFF {
                    let target = Complex64::from_polar(levels[j].exp(), tau * a.as_f64());
                    let z = chart.invert_linearizing(target)?;
                    let moved = (z - rays[&a][j - 1]).norm();
                    prev_moves.insert(a, moved.max(1e-14 * scale));
                    rays.get_mut(&a).unwrap().push(z);
                    continue;
                }
                let parent = a.times(d);
                let seed = rays[&a][j - 1];
                let prev_move = prev_moves[&a];

                let mut z = seed;
                let mut cur = levels[j - 1];
                let mut stack = vec![levels[j]];
                let mut splits = 0u32;
                while let Some(&target_lvl) = stack.last() {
                    let exact_rung = target_lvl == levels[j] && j >= s;
                    let w = if exact_rung {
                        rays[&parent][j - s]
                    } else {
                        parent_at(&rays, parent, target_lvl * d as f64)?
                    };
                    let frac =
                        ((cur - target_lvl) / (levels[j - 1] - levels[j])).clamp(1e-3, 1.0);
                    // Deep rungs move multiplicatively: the position scales
                    // like e^{level} near the anchor, so one level step of
                    // size dg stretches the radius by e^{dg}.
                    let dg = target_lvl - cur;
                    let stretch = (z - anchor).norm() * (dg.exp() - 1.0).abs();
                    let guard = 8.0 * (stretch + prev_move * frac) + 1e-9 * scale;
                    match newton_return_map(param, p, z, w, guard) {
                        Some(next) => {
                            z = next;
                            cur = target_lvl;
                            stack.pop();
                        }
                        None => {
                            splits += 1;
                            if splits > SPLIT_BUDGET {
                                return Err(RayError::Bifurcates { level: target_lvl });
                            }
                            stack.push((cur + target_lvl) / 2.0);
                        }
                    }
                }
                let moved = (z - seed).norm();
                prev_moves.insert(a, moved.max(1e-14 * scale));
                rays.get_mut(&a).unwrap().push(z);
            }
        }

        Ok(InternalRayBundle { param: *param, chart, period: p, levels, rays })
    }

    /// Extracts the traced ray of `angle` in component `k` (the component
    /// of f^k(c)). Component 0 reads the bundle directly; components k >= 1
    /// are f^k-images of the critical-component ray at angle/D, with the
    /// potential multiplied by D at the critical crossing.
    pub fn ray(&self, component: usize, angle: RayAngle) -> Result<TracedRay, RayError> {
        assert!(component < self.period, "component index exceeds the cycle period");
        let d = self.chart.degree as u64;
        let scale = 1.0 + self.chart.cycle.points.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (source, level_mul) = if component == 0 {
            (angle, 1.0)
        } else {
            (RayAngle::new(angle.num(), angle.den() * d), d as f64)
        };
        let pts = self
            .rays
            .get(&source)
            .ok_or(RayError::AngleNotTraced { angle: source })?;
        let samples: Vec<RaySample> = pts
            .iter()
            .zip(&self.levels)
            .map(|(&z, &lvl)| RaySample {
                z: self.param.orbit_point(z, component),
                level: lvl * level_mul,
            })
            .collect();

        let n = samples.len();
        let landed = n >= 3
            && (samples[n - 1].z - samples[n - 2].z).norm() < LANDING_STALL * scale
            && (samples[n - 2].z - samples[n - 3].z).norm() < LANDING_STALL * scale;
        let landing = if landed {
            let z_end = samples[n - 1].z;
            let cert = angle.orbit(d).and_then(|orbit| {
                let m = orbit.len() * self.period;
                refine_periodic(&self.param, z_end, m, 1e-4 * scale, scale).map(
                    |(point, multiplier, residual)| {
                        (point, LandingCert { period: m as u32, multiplier, residual })
                    },
                )
            });
            let (point, cert) = match cert {
                Some((point, cert)) => (point, Some(cert)),
                None => (z_end, None),
            };
            RayLanding::Landed { point, cert }
        } else {
            RayLanding::Truncated { level: samples[n - 1].level }
        };

        Ok(TracedRay {
            kind: RayKind::Internal { component: component as u32, angle },
            samples,
            landing,
        })
    }
}

/// Newton solve of f^p(z) = w with a branch-jump guard around the seed.
/// The tolerance is looser than the external one: near the handoff level
/// the return-map derivative is small and evaluation noise caps the
/// achievable step size around 1e-12.
fn newton_return_map(
    param: &CubicParam,
    p: usize,
    seed: Complex64,
    w: Complex64,
    guard: f64,
) -> Option<Complex64> {
    let mut z = seed;
    for _ in 0..60 {
        let (fz, dfz) = param.orbit_jet(z, p);
        if !fz.norm_sqr().is_finite() || dfz.norm_sqr() == 0.0 {
            return None;
        }
        let step = (fz - w) / dfz;
        if !step.norm_sqr().is_finite() {
            return None;
        }
        z -= step;
        if (z - seed).norm() > guard {
            return None;
        }
        if step.norm() < 1e-11 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Traces the internal ray of angle `t` in the basin component containing
/// `w` (a point of the critical cycle), outward to potential `max_level`
/// (negative, toward the component boundary at 0).
pub fn trace_internal_ray(
    param: &CubicParam,
    w: Complex64,
    t: RayAngle,
    max_level: f64,
) -> Result<TracedRay, RayError> {
    let scale = 1.0 + w.norm();
    let mut period = None;
    let mut z = w;
    for q in 1..=MAX_DETECT_PERIOD {
        z = param.eval(z);
        if (z - w).norm() < 1e-6 * scale {
            period = Some(q);
            break;
        }
    }
    let Some(p) = period else {
        return Err(RayError::NoCriticalCycle { period: 0 });
    };
    let cycle = critical_cycle(param, p).map_err(|_| RayError::NoCriticalCycle { period: p as u32 })?;
    let chart = BasinChart::from_cycle(param, &cycle)?;
    let crit = chart.cycle.points[0];
    let mut component = None;
    let mut u = crit;
    for k in 0..p {
        if (u - w).norm() < 1e-5 * scale {
            component = Some(k);
            break;
        }
        u = param.eval(u);
    }
    let Some(k) = component else {
        return Err(RayError::NoCriticalCycle { period: p as u32 });
    };
    let d = chart.degree as u64;
    let (seed_angle, level_floor) = if k == 0 {
        (t, max_level)
    } else {
        (RayAngle::new(t.num(), t.den() * d), max_level / d as f64)
    };
    let bundle = InternalRayBundle::trace_with_chart(param, chart, p, &[seed_angle], level_floor)?;
    bundle.ray(k, t)
}

// ---------------------------------------------------------------------
// Co-landing external angles
// ---------------------------------------------------------------------

/// Enumerates the external angles with tripling period dividing
/// `period_bound` whose rays land at `zeta`: every candidate is traced
/// coarsely, its endpoint refined on the periodicity equation, matched
/// against `zeta` within 1e-6, and survivors are re-verified with a fine
/// trace. Angles whose coarse trace bifurcates are skipped.
pub fn colanding_external_angles(
    param: &CubicParam,
    zeta: Complex64,
    period_bound: u32,
) -> Vec<RayAngle> {
    let scale = 1.0 + param.escape_bound().0;
    let den = 3u64.pow(period_bound) - 1;
    let mut out = Vec::new();
    for k in 0..den {
        let t = RayAngle::new(k, den);
        let coarse = ExternalRayOptions { start_level: None, min_level: 5e-3, substeps: 2 };
        let Ok(ray) = trace_external_ray_opts(param, t, coarse) else {
            continue;
        };
        let m = match t.tripling_period() {
            Some(m) => m as usize,
            None => continue,
        };
        let Some((point, _, _)) = refine_periodic(param, ray.endpoint(), m, 0.2 * scale, scale)
        else {
            continue;
        };
        if (point - zeta).norm() > 1e-6 * scale {
            continue;
        }
        // Fine re-verification.
        let fine = ExternalRayOptions { start_level: None, min_level: 1e-8, substeps: 2 };
        let Ok(ray) = trace_external_ray_opts(param, t, fine) else {
            continue;
        };
        let landed = match ray.landing {
            RayLanding::Landed { point, .. } => point,
            RayLanding::Truncated { .. } => {
                match refine_periodic(param, ray.endpoint(), m, 1e-2 * scale, scale) {
                    Some((p, _, _)) => p,
                    None => continue,
                }
            }
        };
        if (landed - zeta).norm() < 1e-6 * scale {
            out.push(t);
        }
    }
    out
}
