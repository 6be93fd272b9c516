//! Green functions and Böttcher coordinates.
//!
//! Two charts matter for this family: the basin of infinity, where the
//! dynamics is asymptotically `z -> z^3`, and the immediate basin of the
//! superattracting critical cycle, where the first-return map is locally
//! `s -> s^D` with `D` the local degree of the return map at the cycle
//! point. Both charts are computed by telescoping products whose factors
//! decay super-exponentially, so a handful of iterations gives full double
//! precision.

use crate::cubic::{find_cycle, CubicParam, Jet2, Jet3, MarkedCycle};
use crate::dd::DdComplex;
use num_complex::Complex64;

/// Iteration budget for escape detection in [`green_infinity`].
const GREEN_BUDGET: usize = 1024;
/// Modulus threshold beyond which the tail of the infinity potential is
/// below double-precision noise.
const ESCAPE_OVERFLOW: f64 = 1e100;
/// Return-map block budget for basin potentials.
const BLOCK_BUDGET: usize = 400;
/// Deviation size at which the basin potential estimate is truncated; the
/// exact leading-coefficient correction absorbs the remaining tail.
const DEEP_STOP: f64 = 1e-20;
/// Deviation size at which the Böttcher product is truncated; the remaining
/// factors perturb the result below 1e-19.
const PRODUCT_STOP: f64 = 1e-20;

/// Failure modes of the potential-theoretic charts.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PotentialError {
    /// The point is not in the region where the requested coordinate is
    /// defined (wrong basin, wrong cycle phase, or insufficient potential).
    #[error("point lies outside the domain of the requested coordinate")]
    OutsideDomain,
    /// The orbit neither escapes into the cycle's attracting funnel nor
    /// stabilizes within the block budget.
    #[error("orbit does not converge to the marked cycle within budget")]
    NotInBasin,
    /// Both critical points meet the cycle, so the return map has local
    /// degree 4 and no quadratic-model Böttcher coordinate exists.
    #[error("second critical point meets the cycle at step {k}; local degree exceeds 3")]
    OnCriticalOrbitRelation { k: usize },
    /// No periodic return was detected near the provided point.
    #[error("no periodic return of period <= {max_period} near the point")]
    NoCycleAtPoint { max_period: usize },
    /// The cycle through the point is attracting but not superattracting,
    /// so no Böttcher coordinate exists there.
    #[error("cycle is not superattracting (|multiplier| = {multiplier_norm:.3e})")]
    NotSuperattracting { multiplier_norm: f64 },
    /// The normalization coefficient of the return map vanished; the cycle
    /// data is too degenerate to chart.
    #[error("normalization coefficient of the return map vanished")]
    DegenerateCycleData,
}

/// Value of the potential at infinity together with the non-escape flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenInfinity {
    /// The limit `lim 3^{-n} log|f^n(z)|`, or 0 when the orbit stays bounded.
    pub value: f64,
    /// True when the orbit did not escape within the iteration budget.
    pub bounded: bool,
}

/// Potential of the basin of infinity: `lim 3^{-n} log|f^n(z)|`.
///
/// Iterates until `|z_n| > 1e100`, then applies one correction term
/// `3^{-(n+1)} log|1 + (a - 3c^2 z_n)/z_n^3|`. Orbits that stay bounded for
/// the whole budget yield value 0 with the `bounded` flag set.
pub fn green_infinity(param: &CubicParam, z: Complex64) -> GreenInfinity {
    let mut zn = z;
    for n in 0..GREEN_BUDGET {
        let m = zn.norm();
        if !m.is_finite() || m > ESCAPE_OVERFLOW {
            // One tail term, evaluated through t = 1/z to avoid overflow.
            let t = zn.finv();
            let eps = t * t * (t * param.a - 3.0 * param.c * param.c);
            let scale = 3f64.powi(-(n as i32));
            let value = scale * m.ln() + scale / 3.0 * (Complex64::new(1.0, 0.0) + eps).norm().ln();
            return GreenInfinity { value, bounded: false };
        }
        zn = param.eval(zn);
    }
    GreenInfinity { value: 0.0, bounded: true }
}

/// Böttcher coordinate of the basin of infinity, asymptotic to the identity.
///
/// Computed as `z * prod_k (1 + eps_k)^{1/3^{k+1}}` with
/// `eps_k = (a - 3c^2 z_k)/z_k^3` and principal branches. The telescoping
/// makes `B(f(z)) = B(z)^3` and `|B(z)| = exp(G(z))` hold by construction;
/// the branch agrees with the asymptotic identity whenever the orbit stays
/// outside the escape radius, which `G(z) > log R_esc` guarantees for the
/// samples this library feeds it.
pub fn bottcher_infinity(param: &CubicParam, z: Complex64) -> Result<Complex64, PotentialError> {
    let g = green_infinity(param, z);
    let r_esc = param.escape_bound().0;
    if g.bounded || g.value <= r_esc.ln() {
        return Err(PotentialError::OutsideDomain);
    }
    let mut zn = z;
    let mut log_sum = Complex64::new(0.0, 0.0);
    let mut weight = 1.0 / 3.0;
    for _ in 0..GREEN_BUDGET {
        let m = zn.norm();
        if !m.is_finite() || m > ESCAPE_OVERFLOW {
            break;
        }
        let t = zn.finv();
        let eps = t * t * (t * param.a - 3.0 * param.c * param.c);
        let one_plus = Complex64::new(1.0, 0.0) + eps;
        if one_plus.norm_sqr() == 0.0 {
            return Err(PotentialError::OutsideDomain);
        }
        log_sum += weight * one_plus.ln();
        if eps.norm() < 1e-32 {
            break;
        }
        weight /= 3.0;
        zn = param.eval(zn);
    }
    Ok(z * log_sum.exp())
}

/// Local degree of `f` at a single point: 3 only in the unicritical
/// subfamily `c = 0`, otherwise 2 at each simple critical point.
fn local_degree_at(param: &CubicParam, z: Complex64, tol: f64) -> u32 {
    if param.c.norm() < tol {
        if z.norm() < tol {
            3
        } else {
            1
        }
    } else if (z - param.c).norm() < tol || (z + param.c).norm() < tol {
        2
    } else {
        1
    }
}

/// Per-step data for iterating deviations from the cycle: the image of
/// `x_k + d` relative to `x_{k+1}` is `res + d*(lin + quad*d + d^2)`.
#[derive(Debug, Clone, Copy)]
struct StepData {
    lin: Complex64,
    quad: Complex64,
    res: Complex64,
}

/// A superattracting cycle equipped with the data of its Böttcher chart:
/// the local degree `D` of the first-return map at the marked point and
/// the normalization `B(z) ~ lambda (z - w)` with `lambda^{D-1} = A`,
/// `A` the leading Taylor coefficient of the return map at `w`.
///
/// Cycle points are refined to double-double precision so that deviations
/// from the cycle can be iterated without absorbing them into an O(1)
/// coordinate; that keeps the potential accurate to ~1e-13 relative even
/// at deviations of 1e-20.
#[derive(Debug, Clone)]
pub struct BasinChart {
    pub param: CubicParam,
    /// Refined cycle; `points[0]` is the marked point `w`.
    pub cycle: MarkedCycle,
    /// Local degree of the first-return map at `w` (2 generic, 3 unicritical).
    pub degree: u32,
    /// Leading Taylor coefficient `A` of the return map at `w`.
    pub a_coeff: Complex64,
    /// Derivative of the chart at `w`; principal root of `A` when `D = 3`.
    pub lambda: Complex64,
    steps: Vec<StepData>,
}

impl BasinChart {
    /// Builds the chart at the cycle through `w`, discovering the period.
    ///
    /// Fails with [`PotentialError::OnCriticalOrbitRelation`] when both
    /// critical points lie on the cycle (the excluded locus of the curve),
    /// and with [`PotentialError::NotSuperattracting`] when no critical
    /// point does.
    pub fn new(param: &CubicParam, w: Complex64) -> Result<Self, PotentialError> {
        const MAX_PERIOD: usize = 64;
        let scale = 1.0 + w.norm();
        let mut s = w;
        let mut period = None;
        for q in 1..=MAX_PERIOD {
            s = param.eval(s);
            if (s - w).norm() < 1e-6 * scale {
                period = Some(q);
                break;
            }
        }
        let Some(q) = period else {
            return Err(PotentialError::NoCycleAtPoint { max_period: MAX_PERIOD });
        };
        let cycle = find_cycle(param, w, q).map_err(|_| PotentialError::NoCycleAtPoint { max_period: MAX_PERIOD })?;
        if (cycle.points[0] - w).norm() > 1e-5 * scale {
            return Err(PotentialError::NoCycleAtPoint { max_period: MAX_PERIOD });
        }
        Self::from_cycle(param, &cycle)
    }

    /// Builds the chart at `cycle.points[0]` from an already-refined cycle.
    ///
    /// The parameter is stored in doubles, so its critical orbit closes up
    /// only to ~1e-14 and the literal cycle has a tiny nonzero multiplier;
    /// below that scale no Böttcher coordinate would exist. The chart
    /// therefore idealizes: the cycle is re-anchored exactly at the
    /// critical point, which restores the exact superattracting structure
    /// of the curve member the parameter approximates.
    pub fn from_cycle(param: &CubicParam, cycle: &MarkedCycle) -> Result<Self, PotentialError> {
        let scale = 1.0 + cycle.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let tol = 1e-6 * scale;
        let mut degree: u32 = 1;
        let mut crit_index = 0usize;
        for (k, &pt) in cycle.points.iter().enumerate() {
            let d = local_degree_at(param, pt, tol);
            if d > 1 {
                if degree > 1 {
                    return Err(PotentialError::OnCriticalOrbitRelation { k });
                }
                degree = d;
                crit_index = k;
            }
        }
        if degree == 1 {
            return Err(PotentialError::NotSuperattracting {
                multiplier_norm: cycle.multiplier.norm(),
            });
        }
        let q = cycle.period;

        // Idealized cycle: exact critical point forward in double-double.
        let crit = if param.c.norm() < tol {
            Complex64::new(0.0, 0.0)
        } else if (cycle.points[crit_index] - param.c).norm() < tol {
            param.c
        } else {
            -param.c
        };
        let c_dd = DdComplex::from_c64(param.c);
        let tc2 = c_dd.mul(c_dd).scale(3.0);
        let a_dd = DdComplex::from_c64(param.a);
        let eval_dd = |w: DdComplex| w.mul(w.mul(w).sub(tc2)).add(a_dd);
        let mut orbit_dd = Vec::with_capacity(q + 1);
        let mut s = DdComplex::from_c64(crit);
        for _ in 0..q {
            orbit_dd.push(s);
            s = eval_dd(s);
        }
        let closure = s.sub(orbit_dd[0]).to_c64();

        // Step data in marked-point order; the residual drift and the
        // residual linear coefficient at the critical index are dropped,
        // which is exactly the idealization.
        let zero = Complex64::new(0.0, 0.0);
        let mut pts_dd = Vec::with_capacity(q);
        let mut steps = Vec::with_capacity(q);
        for j in 0..q {
            let x = orbit_dd[(j + q - crit_index) % q];
            pts_dd.push(x);
            let at_crit = (j + q - crit_index) % q == 0;
            let lin = if at_crit { zero } else { x.mul(x).scale(3.0).sub(tc2).to_c64() };
            steps.push(StepData { lin, quad: 3.0 * x.to_c64(), res: zero });
        }

        let mut refined = cycle.clone();
        refined.points = pts_dd.iter().map(|p| p.to_c64()).collect();
        refined.residual = closure.norm();
        let w = refined.points[0];

        let a_coeff = match degree {
            2 => {
                let mut jet = Jet2 { f: w, d1: Complex64::new(1.0, 0.0), d2: Complex64::new(0.0, 0.0) };
                for _ in 0..q {
                    jet = param.eval_jet2(jet);
                }
                jet.d2 / 2.0
            }
            _ => {
                let mut jet = Jet3 {
                    f: w,
                    d1: Complex64::new(1.0, 0.0),
                    d2: Complex64::new(0.0, 0.0),
                    d3: Complex64::new(0.0, 0.0),
                };
                for _ in 0..q {
                    jet = param.eval_jet3(jet);
                }
                jet.d3 / 6.0
            }
        };
        if !a_coeff.norm_sqr().is_finite() || a_coeff.norm() < 1e-14 {
            return Err(PotentialError::DegenerateCycleData);
        }
        let lambda = if degree == 2 { a_coeff } else { a_coeff.sqrt() };
        Ok(BasinChart {
            param: *param,
            cycle: refined,
            degree,
            a_coeff,
            lambda,
            steps,
        })
    }

    /// One whole return-map block applied to a deviation from the marked
    /// point. Uses the exact identity
    /// `f(x + d) - f(x) = d (3x^2 - 3c^2 + 3x d + d^2)`
    /// so that tiny deviations are never absorbed into O(1) coordinates.
    fn deviation_block(&self, mut d: Complex64) -> Complex64 {
        for s in &self.steps {
            d = s.res + d * (s.lin + d * (s.quad + d));
        }
        d
    }

    /// Basin potential relative to the marked point:
    /// `lim D^{-n} log|f^{qn}(z) - w|`, a value in `[-inf, 0)`.
    pub fn green(&self, z: Complex64) -> Result<f64, PotentialError> {
        let mut delta = z - self.cycle.points[0];
        for m in 0..BLOCK_BUDGET {
            let d = delta.norm();
            if d == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            if d < DEEP_STOP {
                let dd = self.degree as f64;
                // One-term tail correction with the exact leading
                // coefficient: log d_{n+1} ~ log|A| + D log d_n, summed
                // geometrically.
                return Ok(dd.powi(-(m as i32)) * (d.ln() + self.a_coeff.norm().ln() / (dd - 1.0)));
            }
            if !d.is_finite() || d > 1e8 {
                return Err(PotentialError::NotInBasin);
            }
            delta = self.deviation_block(delta);
        }
        Err(PotentialError::NotInBasin)
    }

    /// Logarithm of the telescoped correction factor `E(z)` in
    /// `B(z) = lambda (z - w) E(z)`.
    fn log_correction(&self, z: Complex64) -> Result<Complex64, PotentialError> {
        let lam_corr = match self.degree {
            2 => self.lambda.finv(),
            _ => (self.lambda * self.lambda).finv(),
        };
        let mut delta = z - self.cycle.points[0];
        let mut log_sum = Complex64::new(0.0, 0.0);
        let dd = self.degree as f64;
        let mut weight = 1.0 / dd;
        for _ in 0..BLOCK_BUDGET {
            let d = delta.norm();
            if d < PRODUCT_STOP {
                return Ok(log_sum);
            }
            if !d.is_finite() || d > 1e8 {
                return Err(PotentialError::OutsideDomain);
            }
            let next = self.deviation_block(delta);
            if next.norm_sqr() == 0.0 {
                // An exact preimage of w away from w lies outside the
                // univalent component of the chart.
                return Err(PotentialError::OutsideDomain);
            }
            // 1 + eta = lambda^{1-D} (z_{k+1} - w) / (z_k - w)^D.
            let mut pow = delta;
            for _ in 1..self.degree {
                pow *= delta;
            }
            let ratio = lam_corr * next / pow;
            log_sum += weight * ratio.ln();
            weight /= dd;
            delta = next;
        }
        Err(PotentialError::OutsideDomain)
    }

    /// Böttcher coordinate of the basin, `B(z) ~ lambda (z - w)` near `w`,
    /// with `B(f^q(z)) = B(z)^D` exactly by telescoping.
    pub fn bottcher(&self, z: Complex64) -> Result<Complex64, PotentialError> {
        let delta = z - self.cycle.points[0];
        if delta.norm_sqr() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(self.lambda * delta * self.log_correction(z)?.exp())
    }

    /// Inverts the chart near the marked point: solves `B(z) = s` for
    /// targets deep inside the linearizing disk via the fixed-point form
    /// `z = w + s / (lambda E(z))`.
    pub fn invert_linearizing(&self, s: Complex64) -> Result<Complex64, PotentialError> {
        let w = self.cycle.points[0];
        if s.norm_sqr() == 0.0 {
            return Ok(w);
        }
        let scale = 1.0 + w.norm();
        let mut z = w + s / self.lambda;
        for _ in 0..60 {
            let e = self.log_correction(z)?.exp();
            let z_new = w + s / (self.lambda * e);
            let step = (z_new - z).norm();
            z = z_new;
            if step < 1e-15 * scale {
                break;
            }
        }
        let b = self.bottcher(z)?;
        if (b - s).norm() < 1e-11 * (1.0 + s.norm()) {
            Ok(z)
        } else {
            Err(PotentialError::OutsideDomain)
        }
    }
}

/// Basin potential `lim D^{-n} log|f^{pn}(z) - w|`, where `w` is the cycle
/// point the orbit of `z` approaches and `D` is the local degree of the
/// return map (2 generic, 3 in the unicritical subfamily).
pub fn green_basin(param: &CubicParam, cycle: &MarkedCycle, z: Complex64) -> Result<f64, PotentialError> {
    let q = cycle.period;
    let scale = 1.0 + cycle.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut sep = f64::INFINITY;
    for i in 0..cycle.points.len() {
        for j in (i + 1)..cycle.points.len() {
            sep = sep.min((cycle.points[i] - cycle.points[j]).norm());
        }
    }
    let capture = (0.02 * scale).min(sep / 4.0);
    let mut s = z;
    let mut phase = None;
    'outer: for _ in 0..BLOCK_BUDGET {
        for (j, &pt) in cycle.points.iter().enumerate() {
            if (s - pt).norm() < capture {
                phase = Some(j);
                break 'outer;
            }
        }
        if !s.norm_sqr().is_finite() || s.norm_sqr() > 1e16 {
            return Err(PotentialError::NotInBasin);
        }
        for _ in 0..q {
            s = param.eval(s);
        }
    }
    let Some(j) = phase else {
        return Err(PotentialError::NotInBasin);
    };
    let mut rotated = cycle.clone();
    rotated.points.rotate_left(j);
    let chart = BasinChart::from_cycle(param, &rotated).map_err(|e| match e {
        PotentialError::OnCriticalOrbitRelation { k } => PotentialError::OnCriticalOrbitRelation { k },
        _ => PotentialError::NotInBasin,
    })?;
    chart.green(z)
}

/// Böttcher coordinate of the superattracting basin component at `w`.
///
/// `w` must be a point of a superattracting cycle and `z` attracted to `w`
/// itself under the first-return map. The chart satisfies
/// `B(f^p(z)) = B(z)^D` and `|B(z)| = exp(green_basin(z))`.
pub fn bottcher_basin(param: &CubicParam, w: Complex64, z: Complex64) -> Result<Complex64, PotentialError> {
    let chart = BasinChart::new(param, w)?;
    chart.bottcher(z)
}
