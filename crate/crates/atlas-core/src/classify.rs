//! Hyperbolic-type classification of the free critical orbit.
//!
//! On a period-p curve the marked critical point c is superattracting. The
//! verdict records the fate of the other critical point -c: escape to
//! infinity, capture by an attracting cycle of its own (Type D), or
//! convergence into the marked basin, where component membership of -c
//! itself versus a strict forward iterate separates Types A, B, and C.

use std::collections::{HashMap, HashSet, VecDeque};

use num_complex::Complex64;
use thiserror::Error;

use crate::cubic::{
    critical_cycle, find_cycle, CubicParam, CycleError, MarkedCycle, OrbitStatus, DELTA_SEP,
};

/// Classification verdict for the free critical point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrbitClass {
    /// |f^n(-c)| first clears the escape bound at index n.
    Escape { n: u32 },
    /// -c lies in the Fatou component of c.
    TypeA,
    /// -c lies in the component of f^k(c), 1 <= k < p.
    TypeB { k: u32 },
    /// f^l(-c) enters the component of f^kappa(c), l >= 1 minimal.
    TypeC { l: u32, kappa: u32 },
    /// -c converges to an attracting cycle disjoint from the marked one.
    TypeD { q: u32, multiplier: Complex64 },
    /// Budget or resolution exhausted before any verdict; never a guess.
    Undecided { budget: u32 },
}

impl OrbitClass {
    /// Single-letter report code.
    pub fn code(&self) -> char {
        match self {
            OrbitClass::Escape { .. } => 'E',
            OrbitClass::TypeA => 'A',
            OrbitClass::TypeB { .. } => 'B',
            OrbitClass::TypeC { .. } => 'C',
            OrbitClass::TypeD { .. } => 'D',
            OrbitClass::Undecided { .. } => 'U',
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TrapError {
    /// No contracting radius above the floor; the cycle is numerically
    /// indistinguishable from a parabolic one.
    #[error("no trap radius above {r_min:.1e} contracts under the return map")]
    NoTrapFound { r_min: f64 },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FloodError {
    /// The queried point stayed boundary-adjacent through every refinement.
    #[error("membership undecided after {refinements} grid refinements")]
    ResolutionExhausted { refinements: u32 },
}

/// Radius r at the cycle anchor whose closed disk the return map f^p sends
/// into the r/2 disk, checked on 64 boundary samples. By the maximum
/// principle the sampled circle bounds the disk image up to the gap between
/// samples; the factor-2 shrink absorbs that slack.
pub fn trap_radius(param: &CubicParam, cycle: &MarkedCycle) -> Result<f64, TrapError> {
    let p = cycle.period;
    let anchor = cycle.points[0];
    let mut gap = f64::INFINITY;
    for i in 0..p {
        for j in 0..i {
            gap = gap.min((cycle.points[i] - cycle.points[j]).norm());
        }
    }
    let mut r = if gap.is_finite() { (0.2 * gap).min(0.1) } else { 0.1 };
    while r >= 1e-8 {
        let mut sup = 0.0f64;
        for s in 0..64 {
            let th = 2.0 * std::f64::consts::PI * s as f64 / 64.0;
            let u = anchor + r * Complex64::new(th.cos(), th.sin());
            sup = sup.max((param.orbit_point(u, p) - anchor).norm());
        }
        if sup < 0.5 * r {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(TrapError::NoTrapFound { r_min: 1e-8 })
}

/// Verdict for one grid cell, decided by iterating its center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellVerdict {
    /// The orbit reaches the trap disk at the cycle anchor; `phase` is the
    /// cycle index of the component the cell belongs to.
    InBasin { phase: u32 },
    /// Escapes, leaves the grid extent, or exhausts the iteration budget.
    Out,
}

/// Flood-fill snapshot at the resolution that decided a membership query.
#[derive(Clone, Debug)]
pub struct MembershipGrid {
    pub center: Complex64,
    pub resolution: f64,
    /// Every cell evaluated at this resolution.
    pub cells: HashMap<(i64, i64), CellVerdict>,
    /// Cells 4-connected to the center's cell through its phase class.
    pub region: HashSet<(i64, i64)>,
}

const FLOOD_REFINEMENTS: u32 = 4;
const MAX_REGION_CELLS: usize = 1 << 18;
const DEFAULT_FLOOD_BUDGET: u32 = 2048;

/// One resolution level of the membership grid: lazily evaluated cell
/// verdicts plus cached flood regions keyed by their seed cell.
struct FloodLevel {
    param: CubicParam,
    anchor: Complex64,
    period: u32,
    trap: f64,
    h: f64,
    extent: f64,
    r_esc2: f64,
    budget: u32,
    memo: HashMap<(i64, i64), CellVerdict>,
    regions: HashMap<(i64, i64), Option<HashSet<(i64, i64)>>>,
}

enum LevelAnswer {
    Member(bool),
    /// The query cell touches the basin boundary at this resolution.
    Boundary,
}

impl FloodLevel {
    fn new(param: CubicParam, cycle: &MarkedCycle, trap: f64, h: f64, budget: u32) -> Self {
        let r_esc = param.escape_bound().0;
        FloodLevel {
            param,
            anchor: cycle.points[0],
            period: cycle.period as u32,
            trap,
            h,
            extent: 2.0 * r_esc,
            r_esc2: r_esc * r_esc,
            budget,
            memo: HashMap::new(),
            regions: HashMap::new(),
        }
    }

    fn cell_of(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.h).floor() as i64, (z.im / self.h).floor() as i64)
    }

    fn cell_center(&self, cell: (i64, i64)) -> Complex64 {
        Complex64::new((cell.0 as f64 + 0.5) * self.h, (cell.1 as f64 + 0.5) * self.h)
    }

    fn verdict(&mut self, cell: (i64, i64)) -> CellVerdict {
        if let Some(&v) = self.memo.get(&cell) {
            return v;
        }
        let mut u = self.cell_center(cell);
        let mut v = CellVerdict::Out;
        if u.re.abs() <= self.extent && u.im.abs() <= self.extent {
            for n in 0..self.budget {
                if u.norm_sqr() >= self.r_esc2 {
                    break;
                }
                if (u - self.anchor).norm() < self.trap {
                    let phase = (self.period - n % self.period) % self.period;
                    v = CellVerdict::InBasin { phase };
                    break;
                }
                u = self.param.eval(u);
            }
        }
        self.memo.insert(cell, v);
        v
    }

    fn boundary_adjacent(&mut self, cell: (i64, i64)) -> bool {
        let own = self.verdict(cell);
        let (x, y) = cell;
        [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
            .into_iter()
            .any(|nb| self.verdict(nb) != own)
    }

    /// Flood region seeded at `seed`, 4-connected through cells sharing the
    /// seed's phase. `None` when the seed cell is not in the basin or the
    /// region overruns the cell cap.
    fn region(&mut self, seed: (i64, i64)) -> Option<&HashSet<(i64, i64)>> {
        if !self.regions.contains_key(&seed) {
            let built = self.build_region(seed);
            self.regions.insert(seed, built);
        }
        self.regions[&seed].as_ref()
    }

    fn build_region(&mut self, seed: (i64, i64)) -> Option<HashSet<(i64, i64)>> {
        let CellVerdict::InBasin { phase } = self.verdict(seed) else {
            return None;
        };
        let mut region = HashSet::new();
        let mut queue = VecDeque::new();
        region.insert(seed);
        queue.push_back(seed);
        while let Some((x, y)) = queue.pop_front() {
            for nb in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if region.contains(&nb) {
                    continue;
                }
                if self.verdict(nb) == (CellVerdict::InBasin { phase }) {
                    if region.len() >= MAX_REGION_CELLS {
                        return None;
                    }
                    region.insert(nb);
                    queue.push_back(nb);
                }
            }
        }
        Some(region)
    }

    fn query(&mut self, w: Complex64, z: Complex64) -> LevelAnswer {
        let cz = self.cell_of(z);
        if self.boundary_adjacent(cz) {
            return LevelAnswer::Boundary;
        }
        let cw = self.cell_of(w);
        match self.region(cw) {
            None => LevelAnswer::Boundary,
            Some(region) => LevelAnswer::Member(region.contains(&cz)),
        }
    }
}

/// Resolution ladder shared by every membership query of one classification.
struct FloodLadder {
    levels: Vec<FloodLevel>,
}

impl FloodLadder {
    fn new(param: CubicParam, cycle: &MarkedCycle, trap: f64, h0: f64, budget: u32) -> Self {
        let levels = (0..=FLOOD_REFINEMENTS)
            .map(|k| FloodLevel::new(param, cycle, trap, h0 / f64::from(1u32 << k), budget))
            .collect();
        FloodLadder { levels }
    }

    fn query(&mut self, w: Complex64, z: Complex64) -> Result<bool, FloodError> {
        for level in &mut self.levels {
            match level.query(w, z) {
                LevelAnswer::Member(m) => return Ok(m),
                LevelAnswer::Boundary => {}
            }
        }
        Err(FloodError::ResolutionExhausted { refinements: FLOOD_REFINEMENTS })
    }
}

/// Does z lie in the Fatou component of the cycle point w? Flood fill from
/// w's cell over cells whose centers converge to the marked cycle with w's
/// phase, halving the cell size up to four times while z's cell touches the
/// basin boundary.
pub fn flood_membership(
    param: &CubicParam,
    w: Complex64,
    z: Complex64,
    h: f64,
) -> Result<(bool, MembershipGrid), FloodError> {
    let p = detect_marked_period(param, w);
    let mut points = Vec::with_capacity(p as usize);
    let mut u = w;
    for _ in 0..p {
        points.push(u);
        u = param.eval(u);
    }
    let cycle = MarkedCycle {
        period: p as usize,
        points,
        multiplier: Complex64::new(0.0, 0.0),
        residual: 0.0,
    };
    let trap = trap_radius(param, &cycle)
        .map_err(|_| FloodError::ResolutionExhausted { refinements: 0 })?;
    let mut ladder = FloodLadder::new(*param, &cycle, trap, h, DEFAULT_FLOOD_BUDGET);
    let mut decided: Option<(bool, usize)> = None;
    for (k, level) in ladder.levels.iter_mut().enumerate() {
        match level.query(w, z) {
            LevelAnswer::Member(m) => {
                decided = Some((m, k));
                break;
            }
            LevelAnswer::Boundary => {}
        }
    }
    let Some((member, k)) = decided else {
        return Err(FloodError::ResolutionExhausted { refinements: FLOOD_REFINEMENTS });
    };
    let level = &mut ladder.levels[k];
    let cw = level.cell_of(w);
    let region = level.region(cw).cloned().unwrap_or_default();
    Ok((
        member,
        MembershipGrid {
            center: w,
            resolution: level.h,
            cells: level.memo.clone(),
            region,
        },
    ))
}

/// Period of the marked cycle through w, found by direct return.
fn detect_marked_period(param: &CubicParam, w: Complex64) -> u32 {
    let mut u = w;
    for q in 1..=64u32 {
        u = param.eval(u);
        if (u - w).norm() < 1e-8 * (1.0 + w.norm()) {
            return q;
        }
    }
    1
}

/// Tuning knobs for `classify`; the defaults suit curve-scale sampling.
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Iteration cap for the free orbit and for each grid cell.
    pub budget: u32,
    /// Coarsest membership-grid cell size.
    pub h0: f64,
    /// Extra shrink applied to the trap radius (stability probes use 0.5).
    pub trap_scale: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { budget: 2048, h0: 0.02, trap_scale: 1.0 }
    }
}

/// Classify the parameter (c, a) on the period-p curve by the fate of -c.
///
/// The decision tree: escape of the free orbit; an attracting cycle
/// pointwise disjoint from the marked one (Type D); otherwise membership of
/// -c in the component of c (A), of f^k(c) (B), or of the first forward
/// iterate f^l(-c) captured by a cycle component (C). Budget or resolution
/// exhaustion reports Undecided rather than a guess.
pub fn classify(c: Complex64, a: Complex64, p: u32, budget: u32) -> OrbitClass {
    classify_opts(c, a, p, ClassifyOptions { budget, ..ClassifyOptions::default() })
}

pub fn classify_opts(c: Complex64, a: Complex64, p: u32, opts: ClassifyOptions) -> OrbitClass {
    let undecided = OrbitClass::Undecided { budget: opts.budget };
    let param = CubicParam::new(c, a);
    let Ok(cycle) = critical_cycle(&param, p as usize) else {
        return undecided;
    };

    let orbit = param.iterate(-c, opts.budget as usize);
    let (limit_q, at) = match orbit.status {
        OrbitStatus::Escaped { at, .. } => return OrbitClass::Escape { n: at as u32 },
        OrbitStatus::BudgetExhausted => return undecided,
        OrbitStatus::ConvergedToCycle { period, at } => (period, at),
    };

    // Pin down the limit cycle; the revisit tolerance can fire on a proper
    // multiple of the true period.
    let mut q = limit_q;
    let limit = loop {
        match find_cycle(&param, orbit.samples[at], q) {
            Ok(cy) => break cy,
            Err(CycleError::WrongPeriod { divisor }) => q = divisor,
            Err(_) => return undecided,
        }
    };

    let touches = limit.points.iter().any(|&u| {
        cycle.points.iter().any(|&v| (u - v).norm() < DELTA_SEP)
    });
    if !touches {
        if limit.multiplier.norm() < 1.0 {
            return OrbitClass::TypeD {
                q: limit.period as u32,
                multiplier: limit.multiplier,
            };
        }
        // A neutral or repelling ghost cycle; the free orbit has not
        // actually settled.
        return undecided;
    }

    // The free orbit joins the marked basin: separate A/B/C by component
    // membership.
    let Ok(trap) = trap_radius(&param, &cycle) else {
        return undecided;
    };
    let mut ladder =
        FloodLadder::new(param, &cycle, trap * opts.trap_scale, opts.h0, opts.budget);

    match ladder.query(cycle.points[0], -c) {
        Ok(true) => return OrbitClass::TypeA,
        Ok(false) => {}
        Err(_) => return undecided,
    }
    for k in 1..p {
        match ladder.query(cycle.points[k as usize], -c) {
            Ok(true) => return OrbitClass::TypeB { k },
            Ok(false) => {}
            Err(_) => return undecided,
        }
    }
    let mut zl = -c;
    for l in 1..=opts.budget {
        zl = param.eval(zl);
        for kappa in 0..p {
            match ladder.query(cycle.points[kappa as usize], zl) {
                Ok(true) => return OrbitClass::TypeC { l, kappa },
                Ok(false) => {}
                Err(_) => return undecided,
            }
        }
    }
    undecided
}
