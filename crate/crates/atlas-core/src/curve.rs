//! Period-p parameter curves: the locus of (c, a) whose marked critical
//! point c is periodic of exact period p under f(z) = z^3 - 3c^2 z + a.
//!
//! Provides degree and Euler characteristic statistics, fiber solving in
//! the a-coordinate over a fixed c, and branch continuation along paths in
//! the c-coordinate.

use num_complex::Complex64;
use thiserror::Error;

use crate::cubic::{CubicParam, DELTA_SEP};
use crate::dd::DdComplex;

/// Degree and Euler characteristic of the period-p curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurveStats {
    pub p: u32,
    pub degree: u64,
    pub euler_characteristic: i64,
}

/// Number of exact-period-p fiber points over a generic c.
///
/// Degrees satisfy the sieve identity: summed over the divisors of p they
/// give 3^(p-1), the full fiber cardinality.
pub fn curve_degree(p: u32) -> u64 {
    assert!((1..=40).contains(&p), "degree overflows u64 beyond p = 40");
    let mut d = vec![0u64; p as usize + 1];
    for n in 1..=p {
        let mut total = 3u64.pow(n - 1);
        for k in 1..n {
            if n % k == 0 {
                total -= d[k as usize];
            }
        }
        d[n as usize] = total;
    }
    d[p as usize]
}

pub fn euler_characteristic(p: u32) -> i64 {
    (2 - i64::from(p)) * curve_degree(p) as i64
}

pub fn curve_stats(p: u32) -> CurveStats {
    CurveStats { p, degree: curve_degree(p), euler_characteristic: euler_characteristic(p) }
}

/// One fiber point over c, labeled with its exact period.
#[derive(Clone, Copy, Debug)]
pub struct FiberRoot {
    pub a: Complex64,
    /// Smallest n dividing p with f^n(c) = c.
    pub exact_period: u32,
    /// |f^p(c) - c| after polishing.
    pub residual: f64,
}

/// All 3^(p-1) solutions of f^p(c) = c in a over a fixed c.
#[derive(Clone, Debug)]
pub struct FiberSolution {
    pub c: Complex64,
    pub p: u32,
    /// Sorted by (re, im) of a.
    pub roots: Vec<FiberRoot>,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FiberError {
    #[error("period {p} outside the supported range 1..=8")]
    UnsupportedPeriod { p: u32 },
    /// Root clustering below the separation threshold defeats exact-period
    /// labeling; callers perturb c and retry.
    #[error("fiber roots cluster at separation {separation:.3e}")]
    DegenerateFiber { separation: f64 },
}

const ORBIT_CUTOFF: f64 = 1e60;
const LABEL_TOL: f64 = 1e-8;

/// Value and a-derivative of the fiber map a -> f^p(c) - c, plus a flag
/// marking orbits that escaped the cutoff.
///
/// Coefficients of the expanded fiber polynomial grow doubly exponentially
/// in p and overflow the double exponent range near p = 8, so solving never
/// forms them; every correction is evaluated through the orbit recurrence.
/// If the orbit escapes the cutoff, the data of the truncated orbit is
/// returned; its Newton correction still points back toward the bounded
/// region, which is all the solver needs from points that far out.
fn fiber_newton_data(c: Complex64, a: Complex64, p: u32) -> (Complex64, Complex64, bool) {
    let tc2 = 3.0 * c * c;
    let one = Complex64::new(1.0, 0.0);
    let mut z = c;
    let mut dz = Complex64::new(0.0, 0.0);
    let mut cut = false;
    for _ in 0..p {
        let nd = (3.0 * z * z - tc2) * dz + one;
        let nz = z * (z * z - tc2) + a;
        if !nz.is_finite() || !nd.is_finite() || nz.norm() > ORBIT_CUTOFF {
            cut = true;
            break;
        }
        dz = nd;
        z = nz;
    }
    (z - c, dz, cut)
}

/// Disk around a = 2c^3 that contains every fiber root: outside it the
/// first orbit step already clears the escape bound.
fn fiber_root_radius(c: Complex64) -> f64 {
    let cn = c.norm();
    2.0 + (2.0 + 3.0 * cn * cn + 2.0 * cn * cn * cn).sqrt()
}

fn min_pairwise_separation(roots: &[Complex64]) -> f64 {
    let mut sep = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            sep = sep.min((roots[i] - roots[j]).norm());
        }
    }
    sep
}

/// Smallest divisor n of p with f^n(c) = c, deciding borderline distances
/// with double-double orbits.
fn label_exact_period(c: Complex64, a: Complex64, p: u32) -> Result<u32, FiberError> {
    let param = CubicParam::new(c, a);
    let mut z = c;
    let mut verdict: Option<u32> = None;
    let mut last = f64::INFINITY;
    for k in 1..=p {
        z = param.eval(z);
        if p % k != 0 {
            continue;
        }
        let d = (z - c).norm();
        last = d;
        if d < DELTA_SEP {
            verdict = Some(k);
            break;
        }
    }
    match verdict {
        Some(k) if last < LABEL_TOL => Ok(k),
        None => Err(FiberError::DegenerateFiber { separation: last }),
        Some(_) => {
            // Distance fell in the ambiguity band; retry in double-double.
            let c_dd = DdComplex::from_c64(c);
            let tc2 = c_dd.mul(c_dd).scale(3.0);
            let a_dd = DdComplex::from_c64(a);
            let mut w = c_dd;
            let mut final_d = last;
            for k in 1..=p {
                w = w.mul(w.mul(w).sub(tc2)).add(a_dd);
                if p % k != 0 {
                    continue;
                }
                let d = w.sub(c_dd).norm().to_f64();
                final_d = d;
                if d < LABEL_TOL {
                    return Ok(k);
                }
                if d < DELTA_SEP {
                    break;
                }
            }
            Err(FiberError::DegenerateFiber { separation: final_d })
        }
    }
}

/// Solves the fiber equation f^p(c) = c for all 3^(p-1) values of a by
/// simultaneous Newton iteration with pairwise repulsion, then polishes
/// each root and labels its exact period.
///
/// Roots are polished in double precision for p <= 5 and in double-double
/// beyond, where the orbit is long enough for round-off to threaten the
/// 1e-10 residual bound.
pub fn fiber_solve(c: Complex64, p: u32) -> Result<FiberSolution, FiberError> {
    if !(1..=8).contains(&p) {
        return Err(FiberError::UnsupportedPeriod { p });
    }
    let n = 3usize.pow(p - 1);
    let center = 2.0 * c * c * c;
    let r0 = 1.2 * fiber_root_radius(c);
    // Golden-angle spiral filling an annulus of the root disk: distinct
    // radii and well-spread angles keep starts out of shared basins.
    let mut roots: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64;
            let rr = 0.55 + 0.55 * t / n as f64;
            let th = 2.0 * std::f64::consts::PI * (t * 0.6180339887498949 + 0.38);
            center + rr * r0 * Complex64::new(th.cos(), th.sin())
        })
        .collect();

    let tol = 1e-13;
    let dup_tol = 1e-7 * (1.0 + c.norm());
    let mut converged = vec![false; n];
    // Crawl detection state: last Newton step and a run counter of sweeps
    // whose step decayed geometrically in a steady direction.
    let mut prev_newton = vec![Complex64::new(0.0, 0.0); n];
    let mut crawl_run = vec![0u8; n];
    let mut reseeds = 0u64;
    let mut settled = false;
    for _attempt in 0..10 {
        let mut all_done = false;
        for sweep in 0..2000 {
            all_done = true;
            for i in 0..n {
                if converged[i] {
                    continue;
                }
                let (pv, dpv, cut) = fiber_newton_data(c, roots[i], p);
                let newton_raw = pv / dpv;
                let newton = if newton_raw.is_finite() {
                    newton_raw
                } else {
                    // Stuck at a critical point of the fiber map; nudge
                    // inward.
                    (roots[i] - center) * 1e-3
                };
                // A Newton step shrinking by the factor 1 - 1/m per sweep
                // without turning is the crawl toward a root cluster of
                // effective multiplicity m. The healthy collective drift of
                // the early sweeps shares that signature, so the detector
                // only arms once the bulk has settled and whoever still
                // moves is stuck.
                let nn = newton.norm();
                let pn = prev_newton[i].norm();
                let ratio = nn / pn;
                let turn = (newton * prev_newton[i].conj()).re / (nn * pn);
                if sweep >= 600 && nn <= 0.05 && ratio > 0.9 && ratio < 0.9995 && turn > 0.9 {
                    crawl_run[i] = crawl_run[i].saturating_add(1);
                } else {
                    crawl_run[i] = 0;
                }
                prev_newton[i] = newton;
                let step = if crawl_run[i] >= 4 {
                    // Established crawl: stepping m*N jumps to the cluster,
                    // where repulsion resolves the vacancy. The detector
                    // re-arms from scratch at the landing point.
                    crawl_run[i] = 0;
                    prev_newton[i] = Complex64::new(0.0, 0.0);
                    let m = (1.0 / (1.0 - ratio)).min(400.0);
                    let raw = newton * m;
                    let s = raw.norm();
                    if s > r0 { raw * (r0 / s) } else { raw }
                } else if cut {
                    // Escape zone: the truncated data gives a damped inward
                    // pull and root repulsion is meaningless, so skip its
                    // O(n) sum, which otherwise dominates the early sweeps.
                    // Deep out, overshooting toward the bounded zone is
                    // harmless; near the zone boundary the structure is
                    // thin and a boosted step oscillates across it.
                    if nn > 0.05 { newton * 2.5 } else { newton }
                } else {
                    // Bounded-orbit zone: full correction with repulsion.
                    // A near-zero denominator is the deflection off an
                    // already-claimed root and must kick, though not out
                    // of the disk.
                    let mut repulsion = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        if j != i {
                            repulsion += (roots[i] - roots[j]).finv();
                        }
                    }
                    let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
                    let raw = newton / denom;
                    let raw = if raw.is_finite() { raw } else { newton * 1e6 };
                    let m = raw.norm();
                    if m > r0 { raw * (r0 / m) } else { raw }
                };
                let mut next = roots[i] - step;
                if !next.is_finite() {
                    let th = 2.4 * i as f64 + 0.9;
                    next = center + 1.45 * r0 * Complex64::new(th.cos(), th.sin());
                }
                roots[i] = next;
                if step.norm() < tol * (1.0 + roots[i].norm()) {
                    converged[i] = true;
                } else {
                    all_done = false;
                }
            }
            if all_done {
                break;
            }
        }
        if !all_done {
            // Sweep budget ran out with movers still in flight; reseed the
            // movers like duplicates and spend another attempt on them.
            for i in 0..n {
                if !converged[i] {
                    reseeds += 1;
                    let t = reseeds as f64;
                    let rr = 0.25 + 0.6 * (t * 0.6180339887498949).fract();
                    let th = 2.0 * std::f64::consts::PI * (t * 0.7548776662466927).fract();
                    roots[i] = center + rr * r0 * Complex64::new(th.cos(), th.sin());
                    prev_newton[i] = Complex64::new(0.0, 0.0);
                    crawl_run[i] = 0;
                }
            }
            continue;
        }
        // Two iterates can settle on the same root while another goes
        // unclaimed; reseed every duplicate inside the disk and re-sweep.
        // The settled majority stays frozen and its repulsion field steers
        // the reseeded iterate toward the vacant root. A genuine root
        // cluster keeps reproducing duplicates and exhausts the attempts.
        let mut clean = true;
        for i in 0..n {
            for j in 0..i {
                if (roots[i] - roots[j]).norm() < dup_tol {
                    reseeds += 1;
                    let t = reseeds as f64;
                    let rr = 0.25 + 0.6 * (t * 0.6180339887498949).fract();
                    let th = 2.0 * std::f64::consts::PI * (t * 0.7548776662466927).fract();
                    roots[i] = center + rr * r0 * Complex64::new(th.cos(), th.sin());
                    converged[i] = false;
                    prev_newton[i] = Complex64::new(0.0, 0.0);
                    crawl_run[i] = 0;
                    clean = false;
                    break;
                }
            }
        }
        if clean {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(FiberError::DegenerateFiber { separation: min_pairwise_separation(&roots) });
    }

    // Polish in double-double; the residual is measured on the polished
    // orbit so it reports the root quality, not double round-off.
    let c_dd = DdComplex::from_c64(c);
    let tc2 = c_dd.mul(c_dd).scale(3.0);
    let one = DdComplex::from_c64(Complex64::new(1.0, 0.0));
    let zero = DdComplex::from_c64(Complex64::new(0.0, 0.0));
    let mut labeled = Vec::with_capacity(n);
    for r in roots.iter_mut() {
        let mut a_dd = DdComplex::from_c64(*r);
        let mut residual = f64::INFINITY;
        for _ in 0..3 {
            let mut z = c_dd;
            let mut dz = zero;
            for _ in 0..p {
                dz = z.mul(z).scale(3.0).sub(tc2).mul(dz).add(one);
                z = z.mul(z.mul(z).sub(tc2)).add(a_dd);
            }
            let pv = z.sub(c_dd);
            residual = pv.norm().to_f64();
            a_dd = a_dd.sub(pv.div(dz));
        }
        *r = a_dd.to_c64();
        let exact_period = label_exact_period(c, *r, p)?;
        labeled.push(FiberRoot { a: *r, exact_period, residual });
    }
    labeled.sort_by(|x, y| {
        (x.a.re, x.a.im).partial_cmp(&(y.a.re, y.a.im)).expect("finite roots")
    });
    Ok(FiberSolution { c, p, roots: labeled })
}

/// Closure defect of the marked orbit: residual = f^p(c) - c, margin = the
/// smallest |f^k(c) - c| over proper divisors k of p (infinite for p = 1).
/// A parameter lies on the period-p curve iff the residual vanishes and the
/// margin does not.
pub fn on_curve_residual(c: Complex64, a: Complex64, p: u32) -> (Complex64, f64) {
    let param = CubicParam::new(c, a);
    let mut z = c;
    let mut margin = f64::INFINITY;
    let mut residual = Complex64::new(0.0, 0.0);
    for k in 1..=p {
        z = param.eval(z);
        if k == p {
            residual = z - c;
        } else if p % k == 0 {
            margin = margin.min((z - c).norm());
        }
    }
    (residual, margin)
}

/// Continuation record: accepted points seed-first plus step metadata.
#[derive(Clone, Debug)]
pub struct BranchSample {
    pub p: u32,
    pub path: Vec<CubicParam>,
    pub accepted_steps: usize,
    pub halvings: usize,
    /// Smallest second-nearest fiber distance seen at the verified
    /// waypoints; the jump test compares corrector drift to half of it.
    pub min_root_separation: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum BranchError {
    #[error("seed residual {residual:.3e} exceeds the on-curve bound")]
    SeedOffCurve { residual: f64 },
    #[error("corrector landed {dist:.3e} from the predicted sheet at c = {at}")]
    BranchJump { at: Complex64, dist: f64 },
    #[error("step size underflowed near c = {at}")]
    StepUnderflow { at: Complex64 },
    #[error(transparent)]
    Fiber(#[from] FiberError),
}

enum StepFail {
    NoConverge,
    Jump { dist: f64 },
}

/// Distance from a to the second-nearest root of its own fiber; infinite
/// on a single-sheet curve.
fn local_separation(c: Complex64, a: Complex64, p: u32) -> Result<f64, FiberError> {
    let fiber = fiber_solve(c, p)?;
    let mut best = f64::INFINITY;
    let mut second = f64::INFINITY;
    for r in &fiber.roots {
        let d = (r.a - a).norm();
        if d < best {
            second = best;
            best = d;
        } else if d < second {
            second = d;
        }
    }
    Ok(second)
}

fn try_step(cur: &CubicParam, p: u32, dc: Complex64, sep: f64) -> Result<CubicParam, StepFail> {
    // Tangent predictor from implicit differentiation: da/dc = -P_c / P_a.
    // The fiber map is polynomial in c, so a forward difference along the
    // real axis approximates the complex c-derivative.
    let (pv0, pa, _) = fiber_newton_data(cur.c, cur.a, p);
    if pa.norm_sqr() == 0.0 {
        return Err(StepFail::NoConverge);
    }
    let hc = 1e-7 * (1.0 + cur.c.norm());
    let (pv_c, _, _) = fiber_newton_data(cur.c + Complex64::new(hc, 0.0), cur.a, p);
    let slope = -((pv_c - pv0) / hc) / pa;

    let c_new = cur.c + dc;
    let a_pred = cur.a + slope * dc;
    let mut a = a_pred;
    let mut settled = false;
    for _ in 0..12 {
        let (pv, dpv, _) = fiber_newton_data(c_new, a, p);
        if dpv.norm_sqr() == 0.0 {
            return Err(StepFail::NoConverge);
        }
        let step = pv / dpv;
        a -= step;
        if step.norm() < 1e-13 * (1.0 + a.norm()) {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(StepFail::NoConverge);
    }
    let dist = (a - a_pred).norm();
    if dist > 0.5 * sep {
        return Err(StepFail::Jump { dist });
    }
    Ok(CubicParam::new(c_new, a))
}

/// Continues the branch through the seed along the polyline of c waypoints.
///
/// Each step runs a tangent predictor and a Newton corrector in a; a step
/// is rejected and halved when the corrector fails or drifts from the
/// prediction by more than half the local root separation. Every waypoint
/// is verified against the full fiber, refreshing that separation.
pub fn branch_continue(
    seed: CubicParam,
    p: u32,
    c_path: &[Complex64],
    max_step: f64,
) -> Result<BranchSample, BranchError> {
    assert!(max_step > 0.0, "max_step must be positive");
    let (res0, _) = on_curve_residual(seed.c, seed.a, p);
    if res0.norm() >= 1e-10 {
        return Err(BranchError::SeedOffCurve { residual: res0.norm() });
    }
    let mut sep = local_separation(seed.c, seed.a, p)?;
    let mut min_sep = sep;
    let min_step = max_step * 2f64.powi(-26);

    let mut cur = seed;
    let mut path = vec![seed];
    let mut accepted_steps = 0usize;
    let mut halvings = 0usize;
    for &target in c_path {
        loop {
            let full = target - cur.c;
            let remaining = full.norm();
            if remaining <= 1e-14 * (1.0 + target.norm()) {
                break;
            }
            let mut h = remaining.min(max_step);
            loop {
                let dc = full * (h / remaining);
                match try_step(&cur, p, dc, sep) {
                    Ok(next) => {
                        cur = next;
                        path.push(next);
                        accepted_steps += 1;
                        break;
                    }
                    Err(StepFail::Jump { dist }) if h <= min_step => {
                        return Err(BranchError::BranchJump { at: cur.c + dc, dist });
                    }
                    Err(_) => {
                        h *= 0.5;
                        halvings += 1;
                        if h < min_step {
                            return Err(BranchError::StepUnderflow { at: cur.c });
                        }
                    }
                }
            }
        }
        sep = local_separation(cur.c, cur.a, p)?;
        min_sep = min_sep.min(sep);
    }
    Ok(BranchSample { p, path, accepted_steps, halvings, min_root_separation: min_sep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    struct Xor(u64);
    impl Xor {
        fn next_f64(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn in_disk(&mut self, r: f64) -> Complex64 {
            loop {
                let x = r * (2.0 * self.next_f64() - 1.0);
                let y = r * (2.0 * self.next_f64() - 1.0);
                if x * x + y * y <= r * r {
                    return c64(x, y);
                }
            }
        }
    }

    fn histogram(fiber: &FiberSolution) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for r in &fiber.roots {
            *h.entry(r.exact_period).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn degree_small_periods() {
        assert_eq!(curve_degree(1), 1);
        assert_eq!(curve_degree(2), 2);
        assert_eq!(curve_degree(3), 8);
        assert_eq!(curve_degree(4), 24);
    }

    #[test]
    fn degree_sieve_consistency() {
        for p in 1u32..=12 {
            let total: u64 = (1..=p).filter(|n| p % n == 0).map(curve_degree).sum();
            assert_eq!(total, 3u64.pow(p - 1), "p = {p}");
        }
    }

    #[test]
    fn euler_characteristic_small_periods() {
        assert_eq!(euler_characteristic(1), 1);
        assert_eq!(euler_characteristic(2), 0);
        assert_eq!(euler_characteristic(3), -8);
        assert_eq!(euler_characteristic(4), -48);
        let s = curve_stats(4);
        assert_eq!((s.p, s.degree, s.euler_characteristic), (4, 24, -48));
    }

    #[test]
    fn fiber_linear_case() {
        let fiber = fiber_solve(c64(1.0, 0.0), 1).unwrap();
        assert_eq!(fiber.roots.len(), 1);
        let r = fiber.roots[0];
        assert!((r.a - c64(3.0, 0.0)).norm() < 1e-12);
        assert_eq!(r.exact_period, 1);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn fiber_unicritical_period_two() {
        let fiber = fiber_solve(c64(0.0, 0.0), 2).unwrap();
        assert_eq!(fiber.roots.len(), 3);
        let expect = [(c64(0.0, -1.0), 2), (c64(0.0, 0.0), 1), (c64(0.0, 1.0), 2)];
        for (r, (a, period)) in fiber.roots.iter().zip(expect) {
            assert!((r.a - a).norm() < 1e-12, "root {} vs {}", r.a, a);
            assert_eq!(r.exact_period, period);
        }
    }

    #[test]
    fn fiber_histogram_period_four() {
        let mut rng = Xor(0x5eed_f1be);
        for _ in 0..20 {
            let c = rng.in_disk(2.0);
            let fiber = fiber_solve(c, 4).unwrap();
            assert_eq!(fiber.roots.len(), 27);
            let h = histogram(&fiber);
            assert_eq!(h, BTreeMap::from([(1, 1), (2, 2), (4, 24)]), "c = {c}");
            for r in &fiber.roots {
                assert!(r.residual < 1e-10, "residual {} at c = {c}", r.residual);
            }
        }
    }

    #[test]
    fn fiber_histogram_period_five() {
        let fiber = fiber_solve(c64(0.4, 0.3), 5).unwrap();
        assert_eq!(fiber.roots.len(), 81);
        assert_eq!(histogram(&fiber), BTreeMap::from([(1, 1), (5, 80)]));
    }

    #[test]
    fn fiber_extended_precision_polish() {
        let fiber = fiber_solve(c64(0.35, 0.2), 6).unwrap();
        assert_eq!(fiber.roots.len(), 243);
        assert_eq!(histogram(&fiber), BTreeMap::from([(1, 1), (2, 2), (3, 8), (6, 232)]));
        for r in &fiber.roots {
            assert!(r.residual < 1e-10, "residual {}", r.residual);
        }
    }

    #[test]
    fn fiber_conjugation_symmetry() {
        let mut rng = Xor(0xc0ffee11);
        for _ in 0..5 {
            let c = rng.in_disk(1.5);
            let fiber = fiber_solve(c, 3).unwrap();
            let mirror = fiber_solve(c.conj(), 3).unwrap();
            for r in &fiber.roots {
                let want = r.a.conj();
                let hit = mirror.roots.iter().map(|m| (m.a - want).norm()).fold(f64::INFINITY, f64::min);
                assert!(hit < 1e-9, "conj root {} unmatched ({hit:.3e})", want);
            }
        }
    }

    #[test]
    fn fiber_sign_symmetry() {
        let mut rng = Xor(0xabcd_1234);
        for _ in 0..5 {
            let c = rng.in_disk(1.5);
            let fiber = fiber_solve(c, 3).unwrap();
            let mirror = fiber_solve(-c, 3).unwrap();
            for r in &fiber.roots {
                let want = -r.a;
                let hit = mirror.roots.iter().map(|m| (m.a - want).norm()).fold(f64::INFINITY, f64::min);
                assert!(hit < 1e-9, "negated root {} unmatched ({hit:.3e})", want);
            }
        }
    }

    #[test]
    fn residual_examples() {
        let (r, m) = on_curve_residual(c64(1.0, 0.0), c64(3.0, 0.0), 1);
        assert!(r.norm() < 1e-12);
        assert_eq!(m, f64::INFINITY);

        let (r, m) = on_curve_residual(c64(0.0, 0.0), c64(0.0, 1.0), 2);
        assert!(r.norm() < 1e-15);
        assert!((m - 1.0).abs() < 1e-15);

        // Residual closes but the margin vanishes: period 1, not on the
        // period-2 curve.
        let (r, m) = on_curve_residual(c64(0.0, 0.0), c64(0.0, 0.0), 2);
        assert_eq!(r.norm(), 0.0);
        assert_eq!(m, 0.0);
    }

    #[test]
    fn branch_linear_sheet() {
        let seed = CubicParam::new(c64(1.0, 0.0), c64(3.0, 0.0));
        let sample = branch_continue(seed, 1, &[c64(2.0, 0.0)], 0.25).unwrap();
        let end = sample.path.last().unwrap();
        assert!((end.c - c64(2.0, 0.0)).norm() < 1e-12);
        assert!((end.a - c64(18.0, 0.0)).norm() < 1e-9);
        assert!(sample.accepted_steps >= 4);
    }

    #[test]
    fn branch_trivial_loop_has_no_monodromy() {
        let seed = CubicParam::new(c64(0.0, 0.0), c64(0.0, 1.0));
        let r = 0.2;
        let loop_path: Vec<Complex64> = [(r, 0.0), (0.0, r), (-r, 0.0), (0.0, -r), (r, 0.0), (0.0, 0.0)]
            .iter()
            .map(|&(x, y)| c64(x, y))
            .collect();
        let sample = branch_continue(seed, 2, &loop_path, 0.05).unwrap();
        let end = sample.path.last().unwrap();
        assert!(end.c.norm() < 1e-12);
        assert!((end.a - c64(0.0, 1.0)).norm() < 1e-9, "came back to {}", end.a);
    }

    #[test]
    fn branch_endpoint_lies_on_target_fiber() {
        let seed = CubicParam::new(c64(0.0, 0.0), c64(0.0, 1.0));
        let sample = branch_continue(seed, 2, &[c64(1.0, 0.0)], 0.05).unwrap();
        let end = sample.path.last().unwrap();
        let fiber = fiber_solve(c64(1.0, 0.0), 2).unwrap();
        let hit = fiber.roots.iter().map(|r| (r.a - end.a).norm()).fold(f64::INFINITY, f64::min);
        assert!(hit < 1e-9, "endpoint {} off the fiber by {hit:.3e}", end.a);
        for w in &sample.path {
            let (res, _) = on_curve_residual(w.c, w.a, 2);
            assert!(res.norm() < 1e-10);
        }
    }

    #[test]
    fn branch_rejects_off_curve_seed() {
        let seed = CubicParam::new(c64(1.0, 0.0), c64(3.1, 0.0));
        match branch_continue(seed, 1, &[c64(2.0, 0.0)], 0.25) {
            Err(BranchError::SeedOffCurve { residual }) => assert!(residual > 0.05),
            other => panic!("expected SeedOffCurve, got {other:?}"),
        }
    }

    #[test]
    fn fiber_rejects_unsupported_period() {
        match fiber_solve(c64(0.1, 0.0), 9) {
            Err(FiberError::UnsupportedPeriod { p: 9 }) => {}
            other => panic!("expected UnsupportedPeriod, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fiber_cardinality_and_histogram(re in -1.5f64..1.5, im in -1.5f64..1.5, p in 2u32..=3) {
            let fiber = match fiber_solve(c64(re, im), p) {
                Ok(f) => f,
                // Degenerate draws are legitimate; the contract is retry
                // after perturbing, not success everywhere.
                Err(FiberError::DegenerateFiber { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            prop_assert_eq!(fiber.roots.len(), 3usize.pow(p - 1));
            let want: BTreeMap<u32, usize> = (1..=p)
                .filter(|n| p % n == 0)
                .map(|n| (n, curve_degree(n) as usize))
                .collect();
            prop_assert_eq!(histogram(&fiber), want);
            for r in &fiber.roots {
                prop_assert!(r.residual < 1e-10);
            }
        }
    }
}
