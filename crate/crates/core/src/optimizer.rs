//! Constrained maximization of a smooth objective with analytic gradient.
//!
//! The feasible set is a box intersected with pairwise caps
//! `x_i + x_j ≤ c`. Free coordinates are mapped to an unconstrained space by
//! smooth bijections (log for one-sided bounds, logistic for intervals,
//! softmax for capped pairs) and optimized by BFGS with Armijo backtracking.
//! Coordinates that reach a bound are fixed there and the remainder is
//! re-optimized; a projected-gradient step releases constraints whose
//! multipliers have the wrong sign. Termination is on the projected gradient
//! `‖P(x + ∇f) − x‖∞`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `x[first] + x[second] ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumCap {
    pub first: usize,
    pub second: usize,
    pub bound: f64,
}

/// Box bounds plus pairwise sum caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub caps: Vec<SumCap>,
    /// Margin `ε` used by the model-specific constructors.
    pub slack: f64,
}

/// Default margin for lower bounds and caps.
pub const DEFAULT_SLACK: f64 = 1e-3;

impl FeasibleRegion {
    /// `(d₁, a₁, b₁, d₂, a₂, b₂)`: all `≥ ε`, `a₁, b₁ ≤ 1 − ε`,
    /// `a₂ + b₂ ≤ 1 − ε`.
    pub fn setpar(eps: f64) -> Self {
        let inf = f64::INFINITY;
        Self {
            lower: vec![eps; 6],
            upper: vec![inf, 1.0 - eps, 1.0 - eps, inf, inf, inf],
            caps: vec![SumCap { first: 4, second: 5, bound: 1.0 - eps }],
            slack: eps,
        }
    }

    /// `(δ, α, β)`: all `≥ ε`, `α + β ≤ 1 − ε`.
    pub fn par(eps: f64) -> Self {
        let inf = f64::INFINITY;
        Self {
            lower: vec![eps; 3],
            upper: vec![inf; 3],
            caps: vec![SumCap { first: 1, second: 2, bound: 1.0 - eps }],
            slack: eps,
        }
    }

    /// `(d₁, a₁, b₁, d₂, a₂)` with `b₂` pinned at zero.
    pub fn setpar_b2_zero(eps: f64) -> Self {
        let inf = f64::INFINITY;
        Self {
            lower: vec![eps; 5],
            upper: vec![inf, 1.0 - eps, 1.0 - eps, inf, 1.0 - eps],
            caps: vec![],
            slack: eps,
        }
    }

    /// Plain box.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper, caps: vec![], slack: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lower.len();
        if n == 0 || self.upper.len() != n {
            return domain("region bounds must be nonempty and of equal length");
        }
        for i in 0..n {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return domain(format!("empty bound interval [{lo}, {hi}] for coordinate {i}"));
            }
        }
        let mut seen = vec![false; n];
        for cap in &self.caps {
            let (i, j) = (cap.first, cap.second);
            if i >= n || j >= n || i == j {
                return domain(format!("invalid cap indices ({i}, {j})"));
            }
            if seen[i] || seen[j] {
                return domain("a coordinate may belong to at most one cap");
            }
            seen[i] = true;
            seen[j] = true;
            if !(self.lower[i].is_finite() && self.lower[j].is_finite()) {
                return domain("capped coordinates need finite lower bounds");
            }
            if self.upper[i].is_finite() || self.upper[j].is_finite() {
                return domain("capped coordinates must not carry separate upper bounds");
            }
            if !(self.lower[i] + self.lower[j] < cap.bound) {
                return domain(format!("cap x{i} + x{j} ≤ {} leaves an empty region", cap.bound));
            }
        }
        Ok(())
    }

    fn cap_index(&self, idx: usize) -> Option<usize> {
        self.caps.iter().position(|c| c.first == idx || c.second == idx)
    }

    /// Feasibility with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter().all(|v| v.is_finite())
            && (0..x.len()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
            && self.caps.iter().all(|c| x[c.first] + x[c.second] <= c.bound + tol)
    }

    /// Euclidean projection onto the region.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..x.len()).map(|i| x[i].clamp(self.lower[i], self.upper[i])).collect();
        for cap in &self.caps {
            let (i, j) = (cap.first, cap.second);
            let (li, lj, c) = (self.lower[i], self.lower[j], cap.bound);
            let (xi, xj) = (x[i].max(li), x[j].max(lj));
            if xi + xj <= c {
                out[i] = xi;
                out[j] = xj;
                continue;
            }
            // Shift both by t along (1, 1), clipping at the lower bounds.
            let t = (x[i] + x[j] - c) / 2.0;
            let (pi, pj) = if x[i] - t < li {
                (li, c - li)
            } else if x[j] - t < lj {
                (c - lj, lj)
            } else {
                (x[i] - t, c - (x[i] - t))
            };
            out[i] = pi;
            out[j] = pj;
        }
        out
    }

    /// `‖P(x + g) − x‖∞`, zero exactly at KKT points.
    pub fn projected_gradient_norm(&self, x: &[f64], grad: &[f64]) -> f64 {
        let moved: Vec<f64> = x.iter().zip(grad).map(|(a, b)| a + b).collect();
        self.project(&moved)
            .iter()
            .zip(x)
            .map(|(p, v)| (p - v).abs())
            .fold(0.0, f64::max)
    }

    /// Constraints holding with equality at `x`.
    pub fn active_set(&self, x: &[f64]) -> Vec<ActiveConstraint> {
        let mut out = Vec::new();
        for i in 0..x.len() {
            if at_bound(x[i], self.lower[i]) {
                out.push(ActiveConstraint::Lower(i));
            } else if at_bound(x[i], self.upper[i]) {
                out.push(ActiveConstraint::Upper(i));
            }
        }
        for cap in &self.caps {
            if at_bound(x[cap.first] + x[cap.second], cap.bound) {
                out.push(ActiveConstraint::Cap(cap.first, cap.second));
            }
        }
        out
    }
}

/// A constraint holding with equality at the returned point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveConstraint {
    Lower(usize),
    Upper(usize),
    Cap(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `‖P(x + ∇f) − x‖∞` at `argmax`.
    pub projected_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub active: Vec<ActiveConstraint>,
    /// Objective after each accepted step; non-decreasing up to a relative
    /// roundoff allowance of `1e-13`.
    pub trace: Vec<f64>,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const CONTRACTION: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const MAX_Z_STEP: f64 = 8.0;
const SNAP_REL: f64 = 1e-6;
const MAX_OUTER: usize = 60;
const ROUNDOFF: f64 = 1e-13;
const WOLFE_CURVATURE: f64 = 0.9;

fn at_tol(v: f64) -> f64 {
    1e-13 * (1.0 + v.abs())
}

fn at_bound(x: f64, bound: f64) -> bool {
    bound.is_finite() && (x - bound).abs() <= at_tol(bound)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// One piece of the map from unconstrained `z` to feasible `x`.
#[derive(Debug, Clone, Copy)]
enum Block {
    Fixed { idx: usize, value: f64 },
    Free { idx: usize },
    /// `x = lo + e^z`
    Above { idx: usize, lo: f64 },
    /// `x = hi − e^z`
    Below { idx: usize, hi: f64 },
    /// `x = lo + (hi − lo)·σ(z)`
    Interval { idx: usize, lo: f64, hi: f64 },
    /// `(x_i − l_i, x_j − l_j, slack) = w·softmax(z₁, z₂, 0)`
    Simplex { i: usize, j: usize, li: f64, lj: f64, width: f64 },
    /// On the cap: `x_i = l_i + w·σ(z)`, `x_j = l_j + w·(1 − σ(z))`
    Segment { i: usize, j: usize, li: f64, lj: f64, width: f64 },
}

impl Block {
    fn nz(&self) -> usize {
        match self {
            Block::Fixed { .. } => 0,
            Block::Simplex { .. } => 2,
            _ => 1,
        }
    }
}

struct Layout {
    blocks: Vec<Block>,
    nz: usize,
    dim: usize,
}

impl Layout {
    fn classify(region: &FeasibleRegion, x: &[f64]) -> Self {
        let mut blocks = Vec::new();
        for idx in 0..x.len() {
            if region.cap_index(idx).is_some() {
                continue;
            }
            let (lo, hi) = (region.lower[idx], region.upper[idx]);
            let b = if lo.is_finite() && x[idx] - lo <= at_tol(lo) {
                Block::Fixed { idx, value: lo }
            } else if hi.is_finite() && hi - x[idx] <= at_tol(hi) {
                Block::Fixed { idx, value: hi }
            } else {
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => Block::Interval { idx, lo, hi },
                    (true, false) => Block::Above { idx, lo },
                    (false, true) => Block::Below { idx, hi },
                    (false, false) => Block::Free { idx },
                }
            };
            blocks.push(b);
        }
        for cap in &region.caps {
            let (i, j, c) = (cap.first, cap.second, cap.bound);
            let (li, lj) = (region.lower[i], region.lower[j]);
            let width = c - li - lj;
            let on_cap = c - x[i] - x[j] <= at_tol(c);
            let i_low = x[i] - li <= at_tol(li);
            let j_low = x[j] - lj <= at_tol(lj);
            match (on_cap, i_low, j_low) {
                (false, false, false) => blocks.push(Block::Simplex { i, j, li, lj, width }),
                (false, true, false) => {
                    blocks.push(Block::Fixed { idx: i, value: li });
                    blocks.push(Block::Interval { idx: j, lo: lj, hi: c - li });
                }
                (false, false, true) => {
                    blocks.push(Block::Fixed { idx: j, value: lj });
                    blocks.push(Block::Interval { idx: i, lo: li, hi: c - lj });
                }
                (false, true, true) => {
                    blocks.push(Block::Fixed { idx: i, value: li });
                    blocks.push(Block::Fixed { idx: j, value: lj });
                }
                (true, false, false) => blocks.push(Block::Segment { i, j, li, lj, width }),
                (true, true, _) => {
                    blocks.push(Block::Fixed { idx: i, value: li });
                    blocks.push(Block::Fixed { idx: j, value: c - li });
                }
                (true, false, true) => {
                    blocks.push(Block::Fixed { idx: j, value: lj });
                    blocks.push(Block::Fixed { idx: i, value: c - lj });
                }
            }
        }
        let nz = blocks.iter().map(Block::nz).sum();
        Self { blocks, nz, dim: x.len() }
    }

    fn to_x(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        let mut k = 0;
        for b in &self.blocks {
            match *b {
                Block::Fixed { idx, value } => x[idx] = value,
                Block::Free { idx } => x[idx] = z[k],
                Block::Above { idx, lo } => x[idx] = lo + z[k].exp(),
                Block::Below { idx, hi } => x[idx] = hi - z[k].exp(),
                Block::Interval { idx, lo, hi } => x[idx] = lo + (hi - lo) * sigmoid(z[k]),
                Block::Simplex { i, j, li, lj, width } => {
                    let (p1, p2) = softmax3(z[k], z[k + 1]);
                    x[i] = li + width * p1;
                    x[j] = lj + width * p2;
                }
                Block::Segment { i, j, li, lj, width } => {
                    let s = sigmoid(z[k]);
                    x[i] = li + width * s;
                    x[j] = lj + width * (1.0 - s);
                }
            }
            k += b.nz();
        }
        x
    }

    fn from_x(&self, x: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.nz);
        for b in &self.blocks {
            match *b {
                Block::Fixed { .. } => {}
                Block::Free { idx } => z.push(x[idx]),
                Block::Above { idx, lo } => z.push((x[idx] - lo).ln()),
                Block::Below { idx, hi } => z.push((hi - x[idx]).ln()),
                Block::Interval { idx, lo, hi } => z.push(logit((x[idx] - lo) / (hi - lo))),
                Block::Simplex { i, j, li, lj, width } => {
                    let p1 = (x[i] - li) / width;
                    let p2 = (x[j] - lj) / width;
                    let ps = 1.0 - p1 - p2;
                    z.push((p1 / ps).ln());
                    z.push((p2 / ps).ln());
                }
                Block::Segment { i, li, width, .. } => z.push(logit((x[i] - li) / width)),
            }
        }
        z
    }

    /// Chain rule: `∂f/∂z` from `∂f/∂x`.
    fn grad_z(&self, z: &[f64], gx: &[f64]) -> Vec<f64> {
        let mut gz = Vec::with_capacity(self.nz);
        let mut k = 0;
        for b in &self.blocks {
            match *b {
                Block::Fixed { .. } => {}
                Block::Free { idx } => gz.push(gx[idx]),
                Block::Above { idx, .. } => gz.push(gx[idx] * z[k].exp()),
                Block::Below { idx, .. } => gz.push(-gx[idx] * z[k].exp()),
                Block::Interval { idx, lo, hi } => {
                    let s = sigmoid(z[k]);
                    gz.push(gx[idx] * (hi - lo) * s * (1.0 - s));
                }
                Block::Simplex { i, j, width, .. } => {
                    let (p1, p2) = softmax3(z[k], z[k + 1]);
                    let mean = gx[i] * p1 + gx[j] * p2;
                    gz.push(width * p1 * (gx[i] - mean));
                    gz.push(width * p2 * (gx[j] - mean));
                }
                Block::Segment { i, j, width, .. } => {
                    let s = sigmoid(z[k]);
                    gz.push(width * s * (1.0 - s) * (gx[i] - gx[j]));
                }
            }
            k += b.nz();
        }
        gz
    }
}

fn softmax3(z1: f64, z2: f64) -> (f64, f64) {
    let m = z1.max(z2).max(0.0);
    let (e1, e2, e0) = ((z1 - m).exp(), (z2 - m).exp(), (-m).exp());
    let s = e1 + e2 + e0;
    (e1 / s, e2 / s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Solver<'a, F> {
    objective: F,
    region: &'a FeasibleRegion,
    tol: f64,
    max_iter: usize,
    iterations: usize,
    trace: Vec<f64>,
}

impl<'a, F> Solver<'a, F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (f, g) = (self.objective)(x);
        (f.is_finite() && g.len() == x.len() && g.iter().all(|v| v.is_finite())).then_some((f, g))
    }

    fn kkt(&self, p: &Point) -> f64 {
        self.region.projected_gradient_norm(&p.x, &p.g)
    }

    fn accept(&mut self, p: &mut Point, next: Point) {
        *p = next;
        self.trace.push(p.f);
    }

    /// BFGS in the transformed coordinates of the current active set.
    /// Returns whether any step was accepted.
    fn bfgs_phase(&mut self, p: &mut Point) -> bool {
        let before = self.trace.len();
        self.bfgs_steps(p);
        self.trace.len() > before
    }

    fn bfgs_steps(&mut self, p: &mut Point) {
        let layout = Layout::classify(self.region, &p.x);
        if layout.nz == 0 {
            return;
        }
        let mut z = layout.from_x(&p.x);
        {
            let x = layout.to_x(&z);
            if x != p.x {
                match self.eval(&x) {
                    Some((f, g)) if f >= p.f => self.accept(p, Point { x, f, g }),
                    _ => return,
                }
            }
        }
        let m = layout.nz;
        let mut gz = layout.grad_z(&z, &p.g);
        let mut h = identity(m);
        let mut scaled = false;

        while self.iterations < self.max_iter {
            if self.kkt(p) < self.tol {
                return;
            }
            let mut dir = mat_vec(&h, &gz);
            let mut slope = dot(&gz, &dir);
            if !(slope > 0.0) || dir.iter().any(|v| !v.is_finite()) {
                h = identity(m);
                dir = gz.clone();
                slope = dot(&gz, &dir);
                if !(slope > 0.0) {
                    return;
                }
            }
            let dn = inf_norm(&dir);
            let max_step = MAX_Z_STEP / dn;
            let mut step = max_step.min(1.0);
            let first = step;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let zt: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let xt = layout.to_x(&zt);
                if xt.iter().all(|v| v.is_finite()) {
                    if let Some((ft, gt)) = self.eval(&xt) {
                        let armijo = ft >= p.f + ARMIJO_SLOPE * step * slope && ft >= p.f;
                        // Within roundoff of f the value test is meaningless;
                        // fall back to the slope along the search direction.
                        let approx_wolfe = ft >= p.f - ROUNDOFF * (1.0 + p.f.abs()) && {
                            let s_new = dot(&layout.grad_z(&zt, &gt), &dir);
                            s_new <= WOLFE_CURVATURE * slope && s_new >= -WOLFE_CURVATURE * slope
                        };
                        if armijo || approx_wolfe {
                            accepted = Some((zt, Point { x: xt, f: ft, g: gt }));
                            break;
                        }
                    }
                }
                step *= CONTRACTION;
            }
            // The full step still climbing steeply: f is convex along the
            // direction (typical near a bound in the transformed coordinates,
            // where BFGS sees negative curvature), so extrapolate.
            if step == first {
                while let Some((zt, pt)) = &accepted {
                    if dot(&layout.grad_z(zt, &pt.g), &dir) <= WOLFE_CURVATURE * slope || 2.0 * step > max_step {
                        break;
                    }
                    step *= 2.0;
                    let ze: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                    let xe = layout.to_x(&ze);
                    match xe.iter().all(|v| v.is_finite()).then(|| self.eval(&xe)).flatten() {
                        Some((fe, ge)) if fe > pt.f => accepted = Some((ze, Point { x: xe, f: fe, g: ge })),
                        _ => break,
                    }
                }
            }
            self.iterations += 1;
            let Some((zn, next)) = accepted else {
                return;
            };
            let gzn = layout.grad_z(&zn, &next.g);
            let s: Vec<f64> = zn.iter().zip(&z).map(|(a, b)| a - b).collect();
            // Curvature pair of the minimization problem −f.
            let y: Vec<f64> = gz.iter().zip(&gzn).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if !scaled {
                    let gamma = sy / dot(&y, &y);
                    h = identity(m).into_iter().map(|r| r.into_iter().map(|v| v * gamma).collect()).collect();
                    scaled = true;
                }
                bfgs_update(&mut h, &s, &y, sy);
            }
            let stalled = (next.f - p.f).abs() <= 1e-15 * (1.0 + p.f.abs()) && inf_norm(&s) < 1e-12;
            z = zn;
            gz = gzn;
            self.accept(p, next);
            // A coordinate closing in on a bound would dominate the capped
            // z-step; fix it there and rebuild the active set.
            if stalled || (!self.snap_moves(p, false).is_empty() && self.snap(p)) {
                return;
            }
        }
    }

    /// Candidate moves onto nearby bounds: a coordinate within a relative
    /// `SNAP_REL` of a bound with the gradient pushing outward, or a capped
    /// pair within `SNAP_REL` of its cap that a projected gradient step
    /// would push onto it. Each move is a list of coordinate assignments.
    /// Without `rounding`, gaps the layout already treats as closed are left
    /// out.
    fn snap_moves(&self, p: &Point, rounding: bool) -> Vec<(usize, Vec<(usize, f64)>)> {
        let r = self.region;
        let x = &p.x;
        let near = |gap: f64, bound: f64| {
            gap > 0.0 && gap < SNAP_REL * (1.0 + bound.abs()) && (rounding || gap > at_tol(bound))
        };
        let mut moves = Vec::new();
        for i in 0..x.len() {
            let (lo, hi) = (r.lower[i], r.upper[i]);
            if lo.is_finite() && near(x[i] - lo, lo) && p.g[i] < 0.0 {
                moves.push((i, vec![(i, lo)]));
            } else if hi.is_finite() && near(hi - x[i], hi) && p.g[i] > 0.0 {
                moves.push((i, vec![(i, hi)]));
            }
        }
        for (k, cap) in r.caps.iter().enumerate() {
            let (i, j) = (cap.first, cap.second);
            let gap = cap.bound - x[i] - x[j];
            if !near(gap, cap.bound) {
                continue;
            }
            let moved: Vec<f64> = x.iter().zip(&p.g).map(|(a, b)| a + b).collect();
            let target = r.project(&moved);
            if target[i] + target[j] < cap.bound - at_tol(cap.bound) {
                continue;
            }
            let assign = if x[j] == r.lower[j] {
                vec![(i, cap.bound - x[j])]
            } else if x[i] == r.lower[i] {
                vec![(j, cap.bound - x[i])]
            } else {
                let xi = x[i] + gap / 2.0;
                vec![(i, xi), (j, cap.bound - xi)]
            };
            moves.push((x.len() + k, assign));
        }
        moves
    }

    /// Applies snap moves one at a time, keeping each that does not lower
    /// the objective.
    fn snap(&mut self, p: &mut Point) -> bool {
        let mut rejected = Vec::new();
        let mut any = false;
        'outer: loop {
            for (key, assign) in self.snap_moves(p, true) {
                if rejected.contains(&key) {
                    continue;
                }
                let mut x = p.x.clone();
                for &(i, v) in &assign {
                    x[i] = v;
                }
                if x == p.x {
                    rejected.push(key);
                    continue;
                }
                match self.eval(&x) {
                    Some((f, g)) if f >= p.f => {
                        self.accept(p, Point { x, f, g });
                        any = true;
                        continue 'outer;
                    }
                    _ => rejected.push(key),
                }
            }
            return any;
        }
    }

    /// Armijo step along the projection arc `P(x + α∇f)`.
    fn projected_step(&mut self, p: &mut Point) -> bool {
        let mut alpha = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = p.x.iter().zip(&p.g).map(|(x, g)| x + alpha * g).collect();
            let xt = self.region.project(&trial);
            let d: Vec<f64> = xt.iter().zip(&p.x).map(|(a, b)| a - b).collect();
            if inf_norm(&d) == 0.0 {
                return false;
            }
            if let Some((ft, gt)) = self.eval(&xt) {
                let armijo = ft >= p.f + ARMIJO_SLOPE * dot(&p.g, &d) && ft > p.f;
                let within_roundoff = ft >= p.f - ROUNDOFF * (1.0 + p.f.abs())
                    && self.region.projected_gradient_norm(&xt, &gt) < self.kkt(p);
                if armijo || within_roundoff {
                    self.iterations += 1;
                    self.accept(p, Point { x: xt, f: ft, g: gt });
                    return true;
                }
            }
            alpha *= CONTRACTION;
        }
        false
    }
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, v)).collect()
}

/// Inverse-Hessian update `H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let m = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..m {
        for j in 0..m {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Maximizes `objective` over `region` from a feasible `start`.
///
/// `objective` returns the value and gradient at a point. Converges when the
/// projected-gradient norm drops below `tol`; otherwise stops after
/// `max_iter` accepted steps with `converged = false`.
pub fn maximize<F>(mut objective: F, region: &FeasibleRegion, start: &[f64], tol: f64, max_iter: usize) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    region.validate()?;
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if start.len() != region.dim() {
        return domain(format!("start has {} coordinates, region has {}", start.len(), region.dim()));
    }
    if !region.contains(start, 1e-12) {
        return domain(format!("infeasible start {start:?}"));
    }
    let x0 = region.project(start);
    let (f0, g0) = objective(&x0);
    if !(f0.is_finite() && g0.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite { point: x0 });
    }
    let mut solver = Solver { objective, region, tol, max_iter, iterations: 0, trace: vec![f0] };
    let mut p = Point { x: x0, f: f0, g: g0 };

    for _ in 0..MAX_OUTER {
        if solver.kkt(&p) < tol || solver.iterations >= max_iter {
            break;
        }
        let moved = solver.bfgs_phase(&mut p);
        if solver.kkt(&p) < tol {
            break;
        }
        let snapped = solver.snap(&mut p);
        let stepped = solver.projected_step(&mut p);
        if !moved && !snapped && !stepped {
            break;
        }
    }

    // Coordinates that converged onto a bound are placed on it exactly.
    if solver.kkt(&p) < tol {
        let before = (p.x.clone(), p.f, p.g.clone(), solver.trace.len());
        if solver.snap(&mut p) && solver.kkt(&p) >= tol {
            (p.x, p.f, p.g) = (before.0, before.1, before.2);
            solver.trace.truncate(before.3);
        }
    }

    let pg = solver.kkt(&p);
    Ok(OptimResult {
        active: region.active_set(&p.x),
        converged: pg < tol,
        projected_gradient_norm: pg,
        iterations: solver.iterations,
        trace: solver.trace,
        argmax: p.x,
        value: p.f,
        gradient: p.g,
    })
}

/// Runs [`maximize`] from each start and keeps the best value; values within
/// `1e-10` are broken by the lexicographically smaller argmax.
pub fn maximize_multistart<F>(
    mut objective: F,
    region: &FeasibleRegion,
    starts: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut best: Option<OptimResult> = None;
    let mut first_err = None;
    for start in starts {
        match maximize(&mut objective, region, start, tol, max_iter) {
            Ok(res) => {
                let better = match &best {
                    None => true,
                    Some(b) if (res.value - b.value).abs() <= 1e-10 => lex_less(&res.argmax, &b.argmax),
                    Some(b) => res.value > b.value,
                };
                if better {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => domain("no starting points supplied"),
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}
