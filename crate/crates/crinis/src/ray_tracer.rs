//! Tracing of ray tails and canonical tails.
//!
//! Level-0 tails are produced from anchor points far out in a strip, pulled
//! back along the address with the closed-form inverse branches. Canonical
//! tails of higher level are pullbacks of the previous level, continued with
//! Newton steps past the slit exterior and split at critical points along the
//! bristle dictated by the sign.
//!
//! Potentials live on an F-invariant grid: a uniform grid G₀ on [F⁻¹(T), T)
//! and all its preimages under the real growth model F. Vertices are stored by
//! increasing potential, so index 0 is the finite end and each level of a
//! canonical tail is a suffix of the next.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::address::{ExternalAddress, Sign, SignedAddress};
use crate::geometry::{nearest_on_polyline, segment_distance};
use crate::map_models::{unit, InverseError, MapModel, ModelError, PartitionConfig, Rect, Symbol, C64};

const MAX_BISECTIONS: u32 = 48;
const MAX_LEVEL: usize = 64;
const MAX_GRID_LEVELS: usize = 64;
const CLOSED_FORM_AGREEMENT: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("invalid trace parameters: {0}")]
    BadParams(String),
    #[error("pullback failed to converge near {0}")]
    NoConvergence(C64),
    #[error("refinement limit reached near {0}")]
    DepthExceeded(C64),
    #[error("two bristle directions are indistinguishable at {0}")]
    BristleAmbiguity(C64),
    #[error("degenerate bristle directions at {0}")]
    DegenerateDirections(C64),
    #[error("address {0} leaves every fundamental domain before the window")]
    EmptyTail(String),
    #[error("parent curve {parent} does not match target {target}")]
    Mismatch { parent: String, target: String },
    #[error("level {0} exceeds the maximum of 64")]
    LevelTooHigh(usize),
    #[error("point does not escape within the horizon")]
    NotEscaping,
    #[error("orbit is still near the critical set at the horizon")]
    HorizonTooSmall,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceParams {
    /// Maximal number of inverse branches applied to an anchor.
    pub depth: usize,
    /// Canonical-tail level N used by Γ-curve commands.
    pub level: usize,
    pub bailout: f64,
    /// Grid spacing of potentials, and the largest vertex gap tolerated on
    /// Newton-continued stretches.
    pub step: f64,
    pub crit_tol: f64,
    pub newton_tol: f64,
    /// Upper end T of the potential window.
    pub t_max: f64,
    /// Pullbacks stop below this potential.
    pub t_min: f64,
    /// Potential beyond which anchors are used directly.
    pub anchor_radius: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            depth: 20,
            level: 6,
            bailout: 1e12,
            step: 0.05,
            crit_tol: 1e-6,
            newton_tol: 1e-12,
            t_max: 40.0,
            t_min: -1e9,
            anchor_radius: 30.0,
        }
    }
}

impl TraceParams {
    pub fn validate(&self, model: &MapModel) -> Result<(), TraceError> {
        let positive = [self.bailout, self.step, self.crit_tol, self.newton_tol, self.t_max, self.anchor_radius];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.depth == 0 {
            return Err(TraceError::BadParams("all parameters must be positive".into()));
        }
        if self.crit_tol < 10.0 * self.newton_tol {
            return Err(TraceError::BadParams("crit_tol must be at least 10·newton_tol".into()));
        }
        if self.level > MAX_LEVEL {
            return Err(TraceError::LevelTooHigh(self.level));
        }
        if model.growth_ext_inv(self.t_max) >= self.anchor_radius {
            return Err(TraceError::BadParams("t_max too large for the anchor radius".into()));
        }
        if self.step > 0.1 * (self.t_max - model.growth_ext_inv(self.t_max)) {
            return Err(TraceError::BadParams("step too coarse for the window".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub z: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bristle {
    Left,
    Right,
}

impl Bristle {
    pub fn of_sign(sign: Sign) -> Self {
        match sign {
            Sign::Plus => Bristle::Right,
            Sign::Minus => Bristle::Left,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Bristle::Left => "L",
            Bristle::Right => "R",
        }
    }
}

/// Point of the backward orbit of the critical set met by a tail. Degree-one
/// markers are preimages of critical points; degree ≥ 2 marks a splitting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalMarker {
    pub vertex_index: usize,
    pub point: C64,
    pub local_deg: u32,
    pub chosen_bristle: Bristle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailCurve {
    pub signed: SignedAddress,
    pub level: usize,
    /// Vertices by increasing potential; index 0 is the finite end.
    pub points: Vec<CurvePoint>,
    /// Markers by decreasing potential.
    pub markers: Vec<CriticalMarker>,
}

impl TailCurve {
    pub fn zs(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.z).collect()
    }

    pub fn finite_end(&self) -> Option<C64> {
        self.points.first().map(|p| p.z)
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.signed.sign = sign;
        for m in &mut self.markers {
            m.chosen_bristle = Bristle::of_sign(sign);
        }
        self
    }

    /// Largest gap between consecutive vertices.
    pub fn max_gap(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].z - w[0].z).norm()).fold(0.0, f64::max)
    }
}

/// The F-invariant potential grid: `levels[k][i]` = F⁻ᵏ(G₀[i]).
#[derive(Clone, Debug)]
pub struct PotentialGrid {
    levels: Vec<Vec<f64>>,
}

impl PotentialGrid {
    pub fn new(model: &MapModel, cfg: &PartitionConfig, p: &TraceParams) -> Self {
        let lo = model.growth_ext_inv(p.t_max);
        let n0 = ((p.t_max - lo) / p.step).ceil().max(1.0) as usize;
        let g0: Vec<f64> = (0..n0).map(|i| lo + (p.t_max - lo) * i as f64 / n0 as f64).collect();
        let floor = model.growth_ext_inv(cfg.disk_radius) - 1.0;
        let mut levels = vec![g0];
        while levels.len() < MAX_GRID_LEVELS {
            let last = levels.last().expect("nonempty");
            if last.last().copied().unwrap_or(f64::NEG_INFINITY) < floor {
                break;
            }
            let next: Vec<f64> = last.iter().map(|&t| model.growth_ext_inv(t)).collect();
            levels.push(next);
        }
        PotentialGrid { levels }
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.levels[k][i]
    }

    pub fn width(&self) -> usize {
        self.levels[0].len()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Fⁿ applied to the grid point (k, i), read off the table where possible
    /// so that shifted addresses see bit-identical potentials.
    fn forward(&self, model: &MapModel, k: usize, i: usize, n: usize) -> f64 {
        if n <= k {
            self.levels[k - n][i]
        } else {
            let mut t = self.levels[0][i];
            for _ in 0..(n - k) {
                t = model.growth(t);
            }
            t
        }
    }

    /// Grid points from the top of the window down.
    fn descending(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.levels.len()).flat_map(move |k| (0..self.levels[k].len()).rev().map(move |i| (k, i)))
    }
}

/// Level-0 machinery for one model and partition.
pub struct Tracer<'a> {
    pub model: &'a MapModel,
    pub cfg: &'a PartitionConfig,
    pub params: &'a TraceParams,
    grid: PotentialGrid,
}

impl<'a> Tracer<'a> {
    pub fn new(model: &'a MapModel, cfg: &'a PartitionConfig, params: &'a TraceParams) -> Result<Self, TraceError> {
        params.validate(model)?;
        Ok(Tracer { model, cfg, params, grid: PotentialGrid::new(model, cfg, params) })
    }

    pub fn grid(&self) -> &PotentialGrid {
        &self.grid
    }

    /// Anchor shift Δ(s, s′) = L_s(B_{s′}(F(r₀))) − B_s(r₀).
    fn anchor_shift(&self, s: Symbol, next: Symbol) -> C64 {
        let r0 = self.params.anchor_radius;
        let far = self.model.base_point(self.cfg, next, self.model.growth(r0));
        self.model.branch_value(self.cfg, s, far) - self.model.base_point(self.cfg, s, r0)
    }

    fn anchor(&self, a: &ExternalAddress, n: usize, r: f64) -> C64 {
        let s = a.symbol(n);
        self.model.base_point(self.cfg, s, r) + self.anchor_shift(s, a.symbol(n + 1))
    }

    /// Point of potential g(k,i) on the tail of `a`, using `extra` more
    /// pullbacks than needed; `None` when some intermediate point leaves 𝒲.
    fn level0_point(&self, a: &ExternalAddress, k: usize, i: usize, extra: usize) -> Option<C64> {
        let r0 = self.params.anchor_radius;
        let mut n = 0;
        while self.grid.forward(self.model, k, i, n) < r0 {
            n += 1;
            if n > self.params.depth {
                return None;
            }
        }
        let n = n + extra;
        let mut w = self.anchor(a, n, self.grid.forward(self.model, k, i, n));
        for j in (0..n).rev() {
            if !self.cfg.in_w(w) {
                return None;
            }
            w = self.model.branch_value(self.cfg, a.symbol(j), w);
        }
        w.is_finite().then_some(w)
    }

    /// Tail of J_a in the potential window, finite end first.
    pub fn trace_level0(&self, a: &ExternalAddress) -> Result<TailCurve, TraceError> {
        for s in a.distinct_symbols() {
            self.model.check_symbol(s)?;
        }
        let mut desc: Vec<CurvePoint> = Vec::new();
        for (k, i) in self.grid.descending() {
            match self.level0_point(a, k, i, 0) {
                Some(z) => desc.push(CurvePoint { t: self.grid.value(k, i), z }),
                None => break,
            }
        }
        if desc.len() < 2 {
            return Err(TraceError::EmptyTail(a.to_string()));
        }
        let tol = 10.0 * self.params.newton_tol;
        for (idx, (k, i)) in self.grid.descending().take(desc.len()).enumerate().step_by(16) {
            let z = desc[idx].z;
            if let Some(finer) = self.level0_point(a, k, i, 1) {
                if (finer - z).norm() > tol * (1.0 + z.norm()) {
                    return Err(TraceError::NoConvergence(z));
                }
            }
        }
        desc.reverse();
        Ok(TailCurve {
            signed: SignedAddress::new(a.clone(), Sign::Plus),
            level: 0,
            points: desc,
            markers: Vec::new(),
        })
    }

    /// Far-end stretch of a tail of any level: the grid row G₀.
    fn far_end(&self, a: &ExternalAddress) -> Result<Vec<CurvePoint>, TraceError> {
        (0..self.grid.width())
            .rev()
            .map(|i| {
                self.level0_point(a, 0, i, 0)
                    .map(|z| CurvePoint { t: self.grid.value(0, i), z })
                    .ok_or_else(|| TraceError::EmptyTail(a.to_string()))
            })
            .collect()
    }

    /// Canonical tail of level n from its image of level n − 1.
    pub fn pull_back_tail(&self, parent: &TailCurve, target: &SignedAddress) -> Result<TailCurve, TraceError> {
        if parent.signed.addr != target.addr.shift() || parent.signed.sign != target.sign {
            return Err(TraceError::Mismatch { parent: parent.signed.to_string(), target: target.to_string() });
        }
        let s0 = target.addr.first();
        self.model.check_symbol(s0)?;
        let mut out = self.far_end(&target.addr)?;
        let mut markers: Vec<(usize, C64, u32)> = Vec::new();
        let marked: HashMap<usize, ()> = parent.markers.iter().map(|m| (m.vertex_index, ())).collect();

        let lowest = *out.last().expect("far end is nonempty");
        let mut prev_parent = Some(CurvePoint { t: self.model.growth_ext(lowest.t), z: self.model.evaluate(lowest.z) });
        let mut prev_child: C64 = lowest.z;
        let mut came_from: Option<C64> = out.iter().rev().nth(1).map(|p| p.z);
        let mut pending_bristle: Option<(C64, u32)> = None;

        for idx in (0..parent.points.len()).rev() {
            let target_pt = parent.points[idx];
            let mut queue: Vec<(CurvePoint, u32, bool)> = vec![(target_pt, 0, marked.contains_key(&idx))];
            while let Some((pp, depth, is_marked)) = queue.pop() {
                let child_t = self.model.growth_ext_inv(pp.t);
                if child_t < self.params.t_min {
                    return Ok(self.finish(target, parent.level + 1, out, markers));
                }
                if let Some(pa) = prev_parent {
                    let crossing = if pending_bristle.is_some() { None } else { self.critical_crossing(pa.z, pp.z, prev_child) };
                    if let Some((v, c, d)) = crossing {
                        let (dist, u) = segment_distance(pa.z, pp.z, v);
                        debug_assert!(dist <= self.params.crit_tol);
                        let seg_len = (pp.z - pa.z).norm();
                        if (1.0 - u) * seg_len > self.params.crit_tol {
                            let vt = pa.t + (pp.t - pa.t) * u;
                            queue.push((pp, depth, is_marked));
                            let snapped = CurvePoint { t: vt, z: v };
                            self.push_vertex(&mut out, &mut came_from, &mut prev_child, snapped, c);
                            markers.push((out.len() - 1, c, d));
                            pending_bristle = Some((c, d));
                            prev_parent = Some(snapped);
                            continue;
                        }
                        self.push_vertex(&mut out, &mut came_from, &mut prev_child, pp, c);
                        markers.push((out.len() - 1, c, d));
                        pending_bristle = Some((c, d));
                        prev_parent = Some(pp);
                        continue;
                    }
                }
                let attempt = match (pending_bristle, prev_parent) {
                    (Some((c, d)), Some(pa)) => {
                        let incoming = came_from.map(|q| unit(q - c)).unwrap_or(C64::new(1.0, 0.0));
                        let dir = bristle_select(self.model, c, incoming, target.sign, d, Some(unit(pp.z - pa.z)))?;
                        let a_d = self.model.taylor_coefficient(c, d);
                        let radius = ((pp.z - pa.z).norm() / a_d.norm()).powf(1.0 / f64::from(d));
                        let seed = c + dir * radius;
                        self.model
                            .newton(seed, pp.z, 1e-15)
                            .ok()
                            .filter(|q| (q - seed).norm() <= 0.5 * radius && (q - c).norm() <= self.params.step.max(radius * 2.0))
                    }
                    _ => self.continue_to(prev_parent, prev_child, pp.z, s0),
                };
                match attempt {
                    Some(q) => {
                        pending_bristle = None;
                        self.push_vertex(&mut out, &mut came_from, &mut prev_child, pp, q);
                        if is_marked {
                            let d = self.model.local_degree(q)?;
                            markers.push((out.len() - 1, q, d));
                        }
                        prev_parent = Some(pp);
                    }
                    None => {
                        let pa = prev_parent.ok_or(TraceError::NoConvergence(pp.z))?;
                        if depth >= MAX_BISECTIONS {
                            return Err(TraceError::DepthExceeded(pp.z));
                        }
                        let mid = CurvePoint { t: 0.5 * (pa.t + pp.t), z: 0.5 * (pa.z + pp.z) };
                        queue.push((pp, depth + 1, is_marked));
                        queue.push((mid, depth + 1, false));
                    }
                }
            }
        }
        Ok(self.finish(target, parent.level + 1, out, markers))
    }

    fn push_vertex(&self, out: &mut Vec<CurvePoint>, came_from: &mut Option<C64>, prev_child: &mut C64, pp: CurvePoint, q: C64) {
        *came_from = Some(*prev_child);
        *prev_child = q;
        out.push(CurvePoint { t: self.model.growth_ext_inv(pp.t), z: q });
    }

    /// Next child vertex over parent point `p`: the closed-form branch where it
    /// agrees with the continuation, otherwise a Newton-continued value.
    fn continue_to(&self, prev_parent: Option<CurvePoint>, prev_child: C64, p: C64, s0: Symbol) -> Option<C64> {
        let closed = self.cfg.in_w(p).then(|| self.model.branch_value(self.cfg, s0, p));
        let Some(pa) = prev_parent else {
            return closed;
        };
        let d = self.model.deriv(prev_child);
        if d.norm() == 0.0 {
            return None;
        }
        let pred = prev_child + (p - pa.z) / d;
        let q = self.model.newton(pred, p, 1e-15).ok()?;
        let residual = (self.model.evaluate(q) - p).norm();
        if residual > 10.0 * self.params.newton_tol * p.norm().max(1.0) {
            return None;
        }
        let slack = 0.25 * (pred - prev_child).norm() + 100.0 * self.params.newton_tol * (1.0 + q.norm());
        if (q - pred).norm() > slack {
            return None;
        }
        if let Some(z) = closed {
            if (z - q).norm() <= CLOSED_FORM_AGREEMENT * (1.0 + q.norm()) {
                return Some(z);
            }
        }
        ((q - prev_child).norm() <= self.params.step).then_some(q)
    }

    /// Critical value v within crit_tol of the parent segment a → b whose
    /// critical preimage c sits where the child curve is heading.
    fn critical_crossing(&self, a: C64, b: C64, child: C64) -> Option<(C64, C64, u32)> {
        for &v in &self.model.critical_values {
            let (dist, _) = segment_distance(a, b, v);
            if dist > self.params.crit_tol || (a - v).norm() <= self.params.crit_tol {
                continue;
            }
            let gap = (a - v).norm();
            let radius = 4.0 * gap.sqrt() + 2.0 * self.params.step;
            let found = self
                .model
                .critical_points_in(&Rect::around(child, radius))
                .into_iter()
                .filter(|c| (self.model.evaluate(*c) - v).norm() <= 1e-12 * v.norm().max(1.0))
                .min_by(|x, y| (x - child).norm().total_cmp(&(y - child).norm()));
            let Some(c) = found else { continue };
            let d = self.model.local_degree(c).ok()?;
            if d < 2 {
                continue;
            }
            let a_d = self.model.taylor_coefficient(c, d).norm();
            let expected = (gap / a_d).powf(1.0 / f64::from(d));
            let actual = (child - c).norm();
            if gap <= self.params.crit_tol || (actual <= 2.0 * expected + 1e-9 && actual >= 0.5 * expected) {
                return Some((v, c, d));
            }
        }
        None
    }

    fn finish(&self, target: &SignedAddress, level: usize, mut desc: Vec<CurvePoint>, markers: Vec<(usize, C64, u32)>) -> TailCurve {
        let n = desc.len();
        desc.reverse();
        let bristle = Bristle::of_sign(target.sign);
        let mut ms: Vec<CriticalMarker> = markers
            .into_iter()
            .map(|(i, point, local_deg)| CriticalMarker { vertex_index: n - 1 - i, point, local_deg, chosen_bristle: bristle })
            .collect();
        ms.sort_by_key(|m| std::cmp::Reverse(m.vertex_index));
        ms.dedup_by_key(|m| m.vertex_index);
        TailCurve { signed: target.clone(), level, points: desc, markers: ms }
    }

    /// All levels γ⁰_{σᴺ(s)}, γ¹_{σᴺ⁻¹(s)}, …, γᴺ_s.
    pub fn gamma_levels(&self, target: &SignedAddress, n: usize) -> Result<Vec<TailCurve>, TraceError> {
        if n > MAX_LEVEL {
            return Err(TraceError::LevelTooHigh(n));
        }
        let base = self.trace_level0(&target.addr.shift_by(n))?.with_sign(target.sign);
        let mut out = vec![base];
        for j in (0..n).rev() {
            let t = SignedAddress::new(target.addr.shift_by(j), target.sign);
            let next = self.pull_back_tail(out.last().expect("nonempty"), &t)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn gamma_curve(&self, target: &SignedAddress, n: usize) -> Result<TailCurve, TraceError> {
        Ok(self.gamma_levels(target, n)?.pop().expect("nonempty"))
    }

    /// Γ-curves for several targets in parallel.
    pub fn gamma_curves(&self, targets: &[SignedAddress], n: usize) -> Vec<Result<TailCurve, TraceError>> {
        targets.par_iter().map(|t| self.gamma_curve(t, n)).collect()
    }
}

/// Out-direction at a critical point c of local degree d. The in-direction is
/// the tangent of the curve already built at c; the parent tangent after
/// f(c) is `parent_out`, or the straight continuation of the parent when
/// `None`. Plus picks the immediate counterclockwise successor of the
/// in-direction among the d candidates, minus the predecessor.
pub fn bristle_select(
    model: &MapModel,
    c: C64,
    incoming_dir: C64,
    sign: Sign,
    deg: u32,
    parent_out: Option<C64>,
) -> Result<C64, TraceError> {
    if deg < 2 || incoming_dir.norm() == 0.0 {
        return Err(TraceError::DegenerateDirections(c));
    }
    let a_d = model.taylor_coefficient(c, deg);
    if a_d.norm() == 0.0 {
        return Err(TraceError::DegenerateDirections(c));
    }
    let e_in = unit(incoming_dir);
    let u_out = match parent_out {
        Some(u) => unit(u),
        None => -unit(a_d * e_in.powu(deg)),
    };
    let d = f64::from(deg);
    let base = (u_out.arg() - a_d.arg()) / d;
    let tau = std::f64::consts::TAU;
    let a_in = e_in.arg();
    let mut best: Option<(f64, f64)> = None;
    for m in 0..deg {
        let ang = base + tau * f64::from(m) / d;
        let gap = match sign {
            Sign::Plus => (ang - a_in).rem_euclid(tau),
            Sign::Minus => (a_in - ang).rem_euclid(tau),
        };
        if gap < 1e-9 || tau - gap < 1e-9 {
            return Err(TraceError::BristleAmbiguity(c));
        }
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, ang));
        }
    }
    let (_, ang) = best.expect("deg >= 2");
    Ok(C64::from_polar(1.0, ang))
}

/// Concatenation structure of a Γ-curve: unbounded tail above c₀, then
/// bounded pieces between consecutive markers.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaDecomposition {
    /// c₀, c₁, … by decreasing potential.
    pub critical_points: Vec<C64>,
    pub critical_indices: Vec<usize>,
    /// `segments[i]` lies between c_{i+1} (or the finite end) and c_i, in
    /// curve order.
    pub segments: Vec<Vec<CurvePoint>>,
    pub unbounded_tail: Vec<CurvePoint>,
}

impl GammaDecomposition {
    /// Vertices of the curve in order, rebuilt from the pieces.
    pub fn reassemble(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for i in (0..self.critical_points.len()).rev() {
            out.extend(self.segments[i].iter().map(|p| p.z));
            out.push(self.critical_points[i]);
        }
        out.extend(self.unbounded_tail.iter().map(|p| p.z));
        out
    }

    /// Closed piece γ from c_i down to c_{i+1} with both endpoints.
    pub fn bristle_piece(&self, i: usize) -> Option<Vec<C64>> {
        let hi = *self.critical_points.get(i)?;
        let lo = *self.critical_points.get(i + 1)?;
        let mut v = vec![lo];
        v.extend(self.segments[i].iter().map(|p| p.z));
        v.push(hi);
        Some(v)
    }
}

pub fn decompose_gamma(g: &TailCurve) -> GammaDecomposition {
    let mut idx: Vec<usize> = g.markers.iter().map(|m| m.vertex_index).collect();
    idx.sort_unstable_by(|a, b| b.cmp(a));
    idx.dedup();
    if idx.is_empty() {
        return GammaDecomposition {
            critical_points: vec![],
            critical_indices: vec![],
            segments: vec![],
            unbounded_tail: g.points.clone(),
        };
    }
    let critical_points = idx.iter().map(|&i| g.points[i].z).collect();
    let unbounded_tail = g.points[idx[0] + 1..].to_vec();
    let mut segments = Vec::with_capacity(idx.len());
    for j in 0..idx.len() {
        let lo = idx.get(j + 1).map_or(0, |&i| i + 1);
        segments.push(g.points[lo..idx[j]].to_vec());
    }
    GammaDecomposition { critical_points, critical_indices: idx, segments, unbounded_tail }
}

/// 2·∏ deg(f, fʲ(z)) over the orbit of z up to escape.
pub fn count_signed_addresses(model: &MapModel, z: C64, horizon: usize, p: &TraceParams) -> Result<u64, TraceError> {
    let orbit = model.forward_orbit(z, horizon, p.bailout);
    if !orbit.escaped {
        let longer = model.forward_orbit(z, 4 * horizon + 64, p.bailout);
        return Err(if longer.escaped { TraceError::HorizonTooSmall } else { TraceError::NotEscaping });
    }
    let mut product: u64 = 1;
    for w in &orbit.points {
        if w.norm() > p.bailout || !model.evaluate(*w).is_finite() {
            break;
        }
        product *= u64::from(model.local_degree(*w)?);
    }
    Ok(2 * product)
}

/// Result of comparing a tail with its image curve vertex by vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct BijectionReport {
    pub samples: usize,
    pub violations: usize,
    pub max_distance: f64,
    pub monotone: bool,
}

/// Checks that f maps sampled vertices of `child` onto `parent`, with the
/// induced position along the parent strictly increasing. Vertices whose image
/// potential lies above the parent's window are skipped.
pub fn check_bijection(model: &MapModel, child: &TailCurve, parent: &TailCurve, tol: f64, max_samples: usize) -> BijectionReport {
    let pz = parent.zs();
    let top = parent.points.last().map_or(f64::NEG_INFINITY, |p| p.t);
    let covered = child.points.iter().take_while(|p| model.growth_ext(p.t) <= top + 1e-9 * top.abs().max(1.0)).count();
    let stride = (covered / max_samples.max(1)).max(1);
    let sampled: Vec<usize> = (0..covered).step_by(stride).collect();
    let results: Vec<(f64, f64)> = sampled
        .par_iter()
        .map(|&i| nearest_on_polyline(&pz, model.evaluate(child.points[i].z)))
        .collect();
    let mut violations = 0;
    let mut max_distance: f64 = 0.0;
    let mut monotone = true;
    let mut last = f64::NEG_INFINITY;
    for (d, pos) in results.iter().copied() {
        max_distance = max_distance.max(d);
        if !(d <= tol) {
            violations += 1;
        }
        if pos < last {
            monotone = false;
        }
        last = pos;
    }
    if !monotone {
        violations += 1;
    }
    BijectionReport { samples: sampled.len(), violations, max_distance, monotone }
}
