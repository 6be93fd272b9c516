//! Exact arithmetic on ray angles: reduced fractions of a turn, with the
//! doubling map (internal rays) and tripling map (external rays) kept in
//! integer arithmetic so orbits and preimage sets are exact.

use std::cmp::Ordering;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// An angle in [0,1) stored as a reduced fraction num/den.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RayAngle {
    num: u64,
    den: u64,
}

impl RayAngle {
    pub const ZERO: RayAngle = RayAngle { num: 0, den: 1 };

    /// num/den reduced modulo 1. Panics on den = 0.
    pub fn new(num: u64, den: u64) -> RayAngle {
        assert!(den != 0, "angle denominator must be nonzero");
        let num = num % den;
        let g = gcd(num, den);
        RayAngle { num: num / g, den: den / g }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// k * angle mod 1, exactly.
    pub fn times(&self, k: u64) -> RayAngle {
        let prod = (self.num as u128) * (k as u128) % (self.den as u128);
        RayAngle::new(prod as u64, self.den)
    }

    pub fn double(&self) -> RayAngle {
        self.times(2)
    }

    pub fn triple(&self) -> RayAngle {
        self.times(3)
    }

    /// The two preimages under doubling.
    pub fn halves(&self) -> [RayAngle; 2] {
        let n = self.num;
        let d = self.den;
        [RayAngle::new(n, 2 * d), RayAngle::new(n + d, 2 * d)]
    }

    /// The three preimages under tripling.
    pub fn thirds(&self) -> [RayAngle; 3] {
        let n = self.num;
        let d = self.den;
        [
            RayAngle::new(n, 3 * d),
            RayAngle::new(n + d, 3 * d),
            RayAngle::new(n + 2 * d, 3 * d),
        ]
    }

    /// Orbit under multiplication by k until the start repeats; None if the
    /// angle is strictly preperiodic.
    pub fn orbit(&self, k: u64) -> Option<Vec<RayAngle>> {
        let mut out = vec![*self];
        let mut t = self.times(k);
        while t != *self {
            if out.len() > 4096 || out.contains(&t) {
                return None; // entered a cycle that misses the start
            }
            out.push(t);
            t = t.times(k);
        }
        Some(out)
    }

    pub fn doubling_orbit(&self) -> Option<Vec<RayAngle>> {
        self.orbit(2)
    }

    pub fn tripling_orbit(&self) -> Option<Vec<RayAngle>> {
        self.orbit(3)
    }

    pub fn doubling_period(&self) -> Option<u64> {
        self.doubling_orbit().map(|o| o.len() as u64)
    }

    pub fn tripling_period(&self) -> Option<u64> {
        self.tripling_orbit().map(|o| o.len() as u64)
    }

    /// Distance on the circle, in turns.
    pub fn circle_dist(&self, other: &RayAngle) -> f64 {
        let d = (self.as_f64() - other.as_f64()).rem_euclid(1.0);
        d.min(1.0 - d)
    }

    /// All angles with tripling period dividing m: k / (3^m - 1).
    pub fn all_of_tripling_period_dividing(m: u32) -> Vec<RayAngle> {
        let den = 3u64.pow(m) - 1;
        (0..den).map(|k| RayAngle::new(k, den)).collect()
    }
}

impl PartialOrd for RayAngle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RayAngle {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = (self.num as u128) * (other.den as u128);
        let rhs = (other.num as u128) * (self.den as u128);
        lhs.cmp(&rhs)
    }
}

impl std::fmt::Display for RayAngle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
