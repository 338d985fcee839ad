//! Fundamental hands.
//!
//! W₋₁ = 𝒲 and W_n = f⁻¹(W_{n−1} \ X_n), where X_n collects the tails γ_z of
//! the escaping singular values z ∈ W_{n−1}. A hand is identified
//! combinatorially: the branch labels of z, f(z), …, fⁿ(z) together with one
//! side flag per removed tail met along the way. A flag is read off the
//! preimage of the tail through the relevant critical point when the nearest
//! tail point is its singular endpoint, and off the tail itself otherwise.
//! Labels are cut along preimages of the branch cuts, so an identity may
//! describe only part of a hand; distinct hands never share an identity.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

use crate::address::{cyclic_triple, signed_compare, AddressError, AddressInterval, ExternalAddress, Sign, SignedAddress};
use crate::geometry::{nearest_on_polyline, orient, segment_distance};
use crate::map_models::{unit, ConfigError, MapModel, ModelError, PartitionConfig, Rect, Side, Symbol, C64};
use crate::ray_tracer::{bristle_select, TailCurve, TraceError, Tracer};

pub const MAX_HAND_LEVEL: usize = 8;
const ENLARGEMENTS: u32 = 8;
const ORBIT_STEPS: usize = 400;
const ON_TAIL_TOL: f64 = 1e-9;
const THROUGH_TOL: f64 = 1e-6;
const MAX_TAIL_LEVEL: usize = 12;
const VERIFY_HORIZON: usize = 16;
const VERIFY_FAR: f64 = 1e6;
const CRIT_TOL: f64 = 1e-6;
const WITNESS_PROBES: usize = 8;
const SAMPLE_PREFIX: usize = 64;
const SAMPLE_TRIES: usize = 200;
const MAX_BISECTIONS: u32 = 48;
const MARKER_CLEARANCE: f64 = 1e-2;
const REDUCTION_STEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HandError {
    #[error("no partition passed verification after {0} enlargements")]
    ConfigNotFound(u32),
    #[error("no singular value escapes")]
    NoEscapingSingularValue,
    #[error("singular value {0} does not escape")]
    NotEscaping(C64),
    #[error("no canonical tail passes through {0}")]
    TailNotFound(C64),
    #[error("point is not in W_n: iterate {k} fails")]
    NotInW { k: usize },
    #[error("level {0} exceeds the maximum of 8")]
    LevelTooHigh(usize),
    #[error("no vertex of the curve admits probes at this level")]
    NoProbes,
    #[error("probes disagree along the curve")]
    ProbeInconsistent,
    #[error("no level-0 tail found inside hand {0}")]
    NoWitness(String),
    #[error("address interval collapsed at {0}")]
    IntervalCollapsed(String),
    #[error("pullback meets critical value {0} and cannot pick a side")]
    BranchObstructed(C64),
    #[error("continuation failed near {0}")]
    NoConvergence(C64),
    #[error("{0} is outside the domain of the inverse chain")]
    OutsideDomain(C64),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Address(#[from] AddressError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SideFlag {
    Above,
    Below,
    NotAdjacent,
}

impl SideFlag {
    pub fn letter(self) -> &'static str {
        match self {
            SideFlag::Above => "A",
            SideFlag::Below => "B",
            SideFlag::NotAdjacent => "N",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hand {
    pub level: usize,
    pub itinerary: Vec<Symbol>,
    pub side_flags: Vec<SideFlag>,
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let it: Vec<String> = self.itinerary.iter().map(|s| s.to_string()).collect();
        let sides: String = self.side_flags.iter().map(|s| s.letter()).collect();
        write!(f, "{}[{}]", it.join(" "), sides)
    }
}

impl Serialize for Hand {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Hand", 3)?;
        st.serialize_field("level", &self.level)?;
        st.serialize_field("itinerary", &self.itinerary.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
        st.serialize_field("sides", &self.side_flags.iter().map(|s| s.letter()).collect::<Vec<_>>())?;
        st.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandCase {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandAssignment {
    pub target: SignedAddress,
    pub level: usize,
    pub hand: Hand,
    pub case: HandCase,
    /// Level-0 addresses inside the chosen and the rejected hand (case B).
    pub witnesses: Option<(ExternalAddress, ExternalAddress)>,
}

type ArcCache = Mutex<HashMap<(usize, Symbol), Option<Arc<Vec<C64>>>>>;

/// The escaping singular values with their tails γ_z and the removed sets.
#[derive(Debug)]
pub struct EscapingSingularData {
    pub points: Vec<C64>,
    pub tails: Vec<TailCurve>,
    pub escape_horizons: Vec<usize>,
    /// Address of the level-0 tail at the far end of each γ_z.
    pub far_addresses: Vec<ExternalAddress>,
    tail_points: Vec<Vec<C64>>,
    extents: Vec<f64>,
    periodic: Vec<Vec<C64>>,
    removed: Vec<Vec<usize>>,
    arcs: ArcCache,
}

impl EscapingSingularData {
    /// Indices of the tails forming X_n.
    pub fn removed_indices(&self, n: usize) -> &[usize] {
        self.removed.get(n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn removed_addresses(&self, n: usize) -> Vec<ExternalAddress> {
        self.removed_indices(n).iter().map(|&i| self.far_addresses[i].clone()).collect()
    }

    /// Preimage of tail i on the sheet labelled s, starting at the preimage
    /// of the singular value.
    fn arc(&self, model: &MapModel, cfg: &PartitionConfig, i: usize, s: Symbol) -> Option<Arc<Vec<C64>>> {
        if let Some(hit) = self.arcs.lock().expect("arc cache").get(&(i, s)) {
            return hit.clone();
        }
        let computed = pull_back_polyline(model, cfg, s, &self.tail_points[i]).map(Arc::new);
        self.arcs.lock().expect("arc cache").insert((i, s), computed.clone());
        computed
    }
}

/// X_n as curves.
pub fn removed_set(esd: &EscapingSingularData, n: usize) -> Vec<TailCurve> {
    esd.removed_indices(n).iter().map(|&i| esd.tails[i].clone()).collect()
}

/// Chooses R_D (doubling from the standard partition) so that the tails of
/// the escaping singular values avoid δ and leave D̄ together with their
/// endpoints, and computes the removed sets up to `MAX_HAND_LEVEL`.
pub fn build_partition(
    model: &MapModel,
    p: &crate::ray_tracer::TraceParams,
) -> Result<(PartitionConfig, EscapingSingularData), HandError> {
    let base = PartitionConfig::standard(model)?;
    let mut singular: Vec<C64> = model.critical_values.iter().chain(&model.asymptotic_values).copied().collect();
    singular.dedup();
    let escaping: Vec<C64> =
        singular.into_iter().filter(|v| model.forward_orbit(*v, ORBIT_STEPS, p.bailout).escaped).collect();
    if escaping.is_empty() {
        return Err(HandError::NoEscapingSingularValue);
    }
    let mut radius = base.disk_radius;
    for _ in 0..=ENLARGEMENTS {
        if let Ok(cfg) = PartitionConfig::new(model, radius, base.delta_angle, base.horizon) {
            if let Ok(esd) = singular_data(model, &cfg, p, &escaping) {
                if tails_are_admissible(model, &cfg, &esd) {
                    return Ok((cfg, esd));
                }
            }
        }
        radius *= 2.0;
    }
    Err(HandError::ConfigNotFound(ENLARGEMENTS))
}

fn singular_data(
    model: &MapModel,
    cfg: &PartitionConfig,
    p: &crate::ray_tracer::TraceParams,
    points: &[C64],
) -> Result<EscapingSingularData, HandError> {
    let tracer = Tracer::new(model, cfg, p)?;
    let mut esd = EscapingSingularData {
        points: points.to_vec(),
        tails: Vec::new(),
        escape_horizons: Vec::new(),
        far_addresses: Vec::new(),
        tail_points: Vec::new(),
        extents: Vec::new(),
        periodic: Vec::new(),
        removed: Vec::new(),
        arcs: Mutex::new(HashMap::new()),
    };
    for &z in points {
        let (tail, horizon, far) = singular_tail(&tracer, z)?;
        let zs = tail.zs();
        let periodic = tracer.trace_level0(&ExternalAddress::periodic(far.period().to_vec())?)?.zs();
        esd.extents.push(zs.iter().map(|q| q.norm()).fold(0.0, f64::max));
        esd.tail_points.push(zs);
        esd.periodic.push(periodic);
        esd.tails.push(tail);
        esd.escape_horizons.push(horizon);
        esd.far_addresses.push(far);
    }
    esd.removed.push((0..points.len()).filter(|&i| cfg.in_w(points[i])).collect());
    for m in 1..=MAX_HAND_LEVEL {
        let members = (0..points.len()).filter(|&i| hand_of_point(model, cfg, &esd, points[i], m - 1).is_ok()).collect();
        esd.removed.push(members);
    }
    Ok(esd)
}

/// γ_z: the part of Γ(s(z), +) from z outward, where s(z) is read off the
/// orbit of z and continued by its last symbol.
fn singular_tail(tracer: &Tracer, z: C64) -> Result<(TailCurve, usize, ExternalAddress), HandError> {
    let (model, cfg) = (tracer.model, tracer.cfg);
    let orbit = model.forward_orbit(z, ORBIT_STEPS, tracer.params.bailout);
    if !orbit.escaped {
        return Err(HandError::NotEscaping(z));
    }
    let mut syms = Vec::new();
    for q in &orbit.points {
        match model.branch_symbol(cfg, *q) {
            Ok(s) => syms.push(s),
            Err(_) => break,
        }
    }
    if syms.len() < 2 {
        return Err(HandError::TailNotFound(z));
    }
    let last = syms.len() - 1;
    let horizon = (0..=last)
        .find(|&k| (k..=last).all(|j| model.domain_symbol(cfg, orbit.points[j]).is_ok()))
        .unwrap_or(last);
    let addr = ExternalAddress::new(syms[..last].to_vec(), vec![syms[last]])?;
    let target = SignedAddress::new(addr.clone(), Sign::Plus);
    for level in 0..=MAX_TAIL_LEVEL {
        let g = match tracer.gamma_curve(&target, level) {
            Ok(g) => g,
            Err(_) => continue,
        };
        if let Some(cut) = cut_at(&g, z) {
            return Ok((cut, horizon, addr));
        }
    }
    Err(HandError::TailNotFound(z))
}

/// Suffix of `g` starting exactly at z, if g passes through z.
fn cut_at(g: &TailCurve, z: C64) -> Option<TailCurve> {
    let zs = g.zs();
    let (d, pos) = nearest_on_polyline(&zs, z);
    if d > THROUGH_TOL * (1.0 + z.norm()) {
        return None;
    }
    let i = (pos.floor() as usize).min(zs.len().saturating_sub(2));
    let close = |q: C64| (q - z).norm() <= 1e-9 * (1.0 + z.norm());
    let (start, insert) = if close(zs[i]) {
        (i, false)
    } else if close(zs[i + 1]) {
        (i + 1, false)
    } else {
        (i + 1, true)
    };
    if start + 1 >= zs.len() {
        return None;
    }
    let mut points = g.points[start..].to_vec();
    let offset = if insert {
        let (a, b) = (g.points[i], g.points[i + 1]);
        let (_, u) = segment_distance(a.z, b.z, z);
        points.insert(0, crate::ray_tracer::CurvePoint { t: a.t + (b.t - a.t) * u, z });
        start - 1
    } else {
        points[0].z = z;
        start
    };
    let markers = g
        .markers
        .iter()
        .filter(|m| m.vertex_index >= start)
        .map(|m| {
            let mut m = *m;
            m.vertex_index -= offset;
            m
        })
        .collect();
    Some(TailCurve { signed: g.signed.clone(), level: g.level, points, markers })
}

/// Forward images of each tail stay off δ, and leave D̄ once the singular
/// value does.
fn tails_are_admissible(model: &MapModel, cfg: &PartitionConfig, esd: &EscapingSingularData) -> bool {
    for (i, &z) in esd.points.iter().enumerate() {
        let orbit = model.forward_orbit(z, VERIFY_HORIZON, f64::INFINITY).points;
        for &v in esd.tail_points[i].iter().step_by(4) {
            let mut w = v;
            for n in 0..=VERIFY_HORIZON {
                if !w.is_finite() || w.norm() > VERIFY_FAR {
                    break;
                }
                let on_slit = w.norm() >= cfg.disk_radius
                    && crate::map_models::wrap_into(w.arg() - cfg.delta_angle, std::f64::consts::PI).abs() < 1e-9;
                if on_slit {
                    return false;
                }
                let escaped = orbit.get(n).is_none_or(|p| p.norm() > cfg.disk_radius);
                if escaped && w.norm() <= cfg.disk_radius {
                    return false;
                }
                w = model.evaluate(w);
            }
        }
    }
    true
}

/// Hand of level n containing z.
pub fn hand_of_point(
    model: &MapModel,
    cfg: &PartitionConfig,
    esd: &EscapingSingularData,
    z: C64,
    n: usize,
) -> Result<Hand, HandError> {
    if n > MAX_HAND_LEVEL {
        return Err(HandError::LevelTooHigh(n));
    }
    let mut us = vec![z];
    for k in 1..=n {
        let next = model.evaluate(us[k - 1]);
        if !next.is_finite() {
            return Err(HandError::NotInW { k });
        }
        us.push(next);
    }
    let mut itinerary = Vec::with_capacity(n + 1);
    for (k, u) in us.iter().enumerate().take(n) {
        itinerary.push(model.branch_symbol(cfg, *u).map_err(|_| HandError::NotInW { k })?);
    }
    itinerary.push(model.domain_symbol(cfg, us[n]).map_err(|_| HandError::NotInW { k: n + 1 })?);
    let mut side_flags = Vec::new();
    for j in 1..=n {
        for &i in esd.removed_indices(n - j + 1) {
            match side_flag(model, cfg, esd, i, us[j - 1], us[j]) {
                Some(flag) => side_flags.push(flag),
                None => return Err(HandError::NotInW { k: j }),
            }
        }
    }
    Ok(Hand { level: n, itinerary, side_flags })
}

/// Side of w = f(v) relative to tail i; `None` when w lies on the tail.
fn side_flag(model: &MapModel, cfg: &PartitionConfig, esd: &EscapingSingularData, i: usize, v: C64, w: C64) -> Option<SideFlag> {
    if w.norm() <= esd.extents[i] {
        let pts = &esd.tail_points[i];
        let (d, pos) = nearest_on_polyline(pts, w);
        if d <= ON_TAIL_TOL * (1.0 + w.norm()) {
            return None;
        }
        if pos > 0.0 {
            return Some(orientation(pts, pos, w));
        }
        return Some(endpoint_flag(model, cfg, esd, i, v));
    }
    far_flag(model, cfg, esd, i, w)
}

fn orientation(pts: &[C64], pos: f64, q: C64) -> SideFlag {
    let i = (pos.floor() as usize).min(pts.len() - 2);
    if orient(pts[i], pts[i + 1], q) > 0.0 {
        SideFlag::Above
    } else {
        SideFlag::Below
    }
}

/// Side of v relative to the preimage of the tail through the critical
/// point on v's sheet, joined with the partner sheet meeting there.
fn endpoint_flag(model: &MapModel, cfg: &PartitionConfig, esd: &EscapingSingularData, i: usize, v: C64) -> SideFlag {
    let Ok(label) = model.branch_symbol(cfg, v) else {
        return SideFlag::NotAdjacent;
    };
    let Some(own) = esd.arc(model, cfg, i, label) else {
        return SideFlag::NotAdjacent;
    };
    let c = own[0];
    let mut poly: Vec<C64> = Vec::new();
    if model.local_degree(c).is_ok_and(|d| d >= 2) {
        let p = esd.points[i];
        let partner = neighbour_candidates(label)
            .into_iter()
            .filter(|s| *s != label)
            .find(|s| (model.branch_value(cfg, *s, p) - c).norm() <= 1e-6 * (1.0 + c.norm()));
        if let Some(other) = partner.and_then(|s| esd.arc(model, cfg, i, s)) {
            poly.extend(other.iter().skip(1).rev());
        }
    }
    poly.extend(own.iter());
    let (_, pos) = nearest_on_polyline(&poly, v);
    if pos <= 0.0 || pos >= (poly.len() - 1) as f64 {
        return SideFlag::NotAdjacent;
    }
    orientation(&poly, pos, v)
}

/// Beyond the traced window: map over the preperiod of the far address and
/// pull back along its period until the point re-enters the window.
fn far_flag(model: &MapModel, cfg: &PartitionConfig, esd: &EscapingSingularData, i: usize, w: C64) -> Option<SideFlag> {
    let a = &esd.far_addresses[i];
    let per = a.period();
    let mut x = w;
    let mut pending_pullbacks = 0;
    for (k, &s) in a.preperiod().iter().enumerate() {
        if model.branch_symbol(cfg, x) != Ok(s) {
            return Some(SideFlag::NotAdjacent);
        }
        let next = model.evaluate(x);
        if next.is_finite() {
            x = next;
        } else if k + 1 == a.preperiod().len() {
            x = model.branch_of_image(cfg, per[per.len() - 1], x);
            pending_pullbacks = per.len() - 1;
        } else {
            return Some(SideFlag::NotAdjacent);
        }
    }
    for &s in per[..pending_pullbacks].iter().rev() {
        x = model.branch_value(cfg, s, x);
    }
    let pts = &esd.periodic[i];
    let extent = pts.iter().map(|q| q.norm()).fold(0.0, f64::max);
    for _ in 0..REDUCTION_STEPS {
        if x.norm() <= extent {
            let (d, pos) = nearest_on_polyline(pts, x);
            if d <= ON_TAIL_TOL * (1.0 + x.norm()) {
                return None;
            }
            if pos <= 0.0 || pos >= (pts.len() - 1) as f64 {
                return Some(SideFlag::NotAdjacent);
            }
            return Some(orientation(pts, pos, x));
        }
        if !cfg.in_w(x) {
            return Some(SideFlag::NotAdjacent);
        }
        for &s in per.iter().rev() {
            x = model.branch_value(cfg, s, x);
        }
    }
    Some(SideFlag::NotAdjacent)
}

fn neighbour_candidates(s: Symbol) -> Vec<Symbol> {
    let sides: &[Option<Side>] = if s.side.is_some() { &[Some(Side::L), Some(Side::R)] } else { &[None] };
    (s.row - 2..=s.row + 2).flat_map(|row| sides.iter().map(move |&side| Symbol { row, side })).collect()
}

/// Preimage of a polyline given finite end first, continued from the far
/// end, whose closed-form value is taken on the sheet s.
fn pull_back_polyline(model: &MapModel, cfg: &PartitionConfig, s: Symbol, pts: &[C64]) -> Option<Vec<C64>> {
    let far = *pts.last()?;
    if !cfg.in_w(far) {
        return None;
    }
    let path: Vec<C64> = pts.iter().rev().copied().collect();
    let start = model.branch_value(cfg, s, far);
    let mut out = continue_preimage(model, start, &path, None).ok()?;
    out.reverse();
    Some(out)
}

/// Analytic continuation of a preimage along `path`, starting from `start`
/// over path[0]. A critical value on the path is passed along the bristle
/// given by `sign`; without a sign the path must end there.
fn continue_preimage(model: &MapModel, start: C64, path: &[C64], sign: Option<Sign>) -> Result<Vec<C64>, HandError> {
    let mut out = vec![start];
    let mut child = start;
    let mut pa = path[0];
    let mut came_from: Option<C64> = None;
    let mut pending: Option<(C64, u32)> = None;
    for &p in &path[1..] {
        let mut queue = vec![(p, 0u32)];
        while let Some((pp, depth)) = queue.pop() {
            if pending.is_none() {
                if let Some(v) = critical_on_segment(model, pa, pp) {
                    let c = critical_preimage(model, v, child, pa).ok_or(HandError::BranchObstructed(v))?;
                    let d = model.local_degree(c)?;
                    came_from = Some(child);
                    child = c;
                    pa = v;
                    pending = Some((c, d));
                    if (pp - v).norm() > CRIT_TOL {
                        queue.push((pp, depth));
                    }
                    continue;
                }
            }
            let next = match pending {
                Some((c, d)) => {
                    let sign = sign.ok_or(HandError::BranchObstructed(pa))?;
                    let from = came_from.ok_or(HandError::BranchObstructed(pa))?;
                    let dir = bristle_select(model, c, from - c, sign, d, Some(unit(pp - pa)))?;
                    let a_d = model.taylor_coefficient(c, d);
                    let radius = ((pp - pa).norm() / a_d.norm()).powf(1.0 / f64::from(d));
                    let seed = c + dir * radius;
                    model.newton(seed, pp, 1e-15).ok().filter(|q| (q - seed).norm() <= 0.5 * radius)
                }
                None => continuation_step(model, child, pa, pp),
            };
            match next {
                Some(q) => {
                    came_from = Some(child);
                    child = q;
                    pa = pp;
                    pending = None;
                }
                None => {
                    if depth >= MAX_BISECTIONS {
                        return Err(HandError::NoConvergence(pp));
                    }
                    queue.push((pp, depth + 1));
                    queue.push((0.5 * (pa + pp), depth + 1));
                }
            }
        }
        out.push(child);
    }
    Ok(out)
}

fn continuation_step(model: &MapModel, child: C64, pa: C64, pp: C64) -> Option<C64> {
    let d = model.deriv(child);
    if d.norm() == 0.0 {
        return None;
    }
    let pred = child + (pp - pa) / d;
    let q = model.newton(pred, pp, 1e-15).ok()?;
    let residual = (model.evaluate(q) - pp).norm();
    if residual > 1e-10 * pp.norm().max(1.0) {
        return None;
    }
    let slack = 0.25 * (pred - child).norm() + 1e-12 * (1.0 + q.norm());
    ((q - pred).norm() <= slack).then_some(q)
}

fn critical_on_segment(model: &MapModel, a: C64, b: C64) -> Option<C64> {
    model.critical_values.iter().copied().find(|&v| {
        let (dist, _) = segment_distance(a, b, v);
        dist <= CRIT_TOL && (a - v).norm() > CRIT_TOL
    })
}

fn critical_preimage(model: &MapModel, v: C64, child: C64, from: C64) -> Option<C64> {
    let radius = 4.0 * (from - v).norm().sqrt() + 0.05;
    model
        .critical_points_in(&Rect::around(child, radius))
        .into_iter()
        .filter(|c| (model.evaluate(*c) - v).norm() <= 1e-12 * v.norm().max(1.0))
        .min_by(|x, y| (x - child).norm().total_cmp(&(y - child).norm()))
}

/// Probe settings for `assign_hand_with`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOptions {
    /// Normal offset relative to 1 + |z|.
    pub eps: f64,
    /// Number of curve vertices probed.
    pub samples: usize,
    /// Hand level; the curve's own level when `None`.
    pub level: Option<usize>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { eps: 1e-6, samples: 48, level: None }
    }
}

pub fn assign_hand(tracer: &Tracer, esd: &EscapingSingularData, g: &TailCurve) -> Result<HandAssignment, HandError> {
    assign_hand_with(tracer, esd, g, &ProbeOptions::default())
}

/// τ_n(s, ∗): the unique hand whose closure contains the curve, or, when the
/// curve lies on the common boundary of two hands, the one picked by the
/// cyclic order of witness addresses.
pub fn assign_hand_with(
    tracer: &Tracer,
    esd: &EscapingSingularData,
    g: &TailCurve,
    opts: &ProbeOptions,
) -> Result<HandAssignment, HandError> {
    let n = opts.level.unwrap_or(g.level);
    let per_vertex = probe_hands(tracer.model, tracer.cfg, esd, g, n, opts)?;
    let mut candidates: Vec<Hand> = per_vertex[0].clone();
    for hands in &per_vertex[1..] {
        candidates.retain(|h| hands.contains(h));
    }
    let assignment = |hand: Hand, case, witnesses| HandAssignment { target: g.signed.clone(), level: n, hand, case, witnesses };
    match candidates.len() {
        1 => Ok(assignment(candidates.pop().expect("one"), HandCase::Interior, None)),
        2 => {
            let s = &g.signed.addr;
            let a = first_witness(tracer, esd, &candidates[0], s)?;
            let b = first_witness(tracer, esd, &candidates[1], s)?;
            if tie_break(tracer.cfg, s, g.signed.sign, &a, &b)? {
                Ok(assignment(candidates.swap_remove(0), HandCase::Boundary, Some((a, b))))
            } else {
                Ok(assignment(candidates.swap_remove(1), HandCase::Boundary, Some((b, a))))
            }
        }
        _ => Err(HandError::ProbeInconsistent),
    }
}

/// True when the hand of witness υ is chosen over that of ω:
/// [υ, s, ω] with ∗ = −, or [ω, s, υ] with ∗ = +.
pub fn tie_break(
    cfg: &PartitionConfig,
    s: &ExternalAddress,
    sign: Sign,
    upsilon: &ExternalAddress,
    omega: &ExternalAddress,
) -> Result<bool, HandError> {
    let between = cyclic_triple(cfg, upsilon, s, omega)?;
    Ok(between == (sign == Sign::Minus))
}

/// Hands found by the left and right probes at each usable vertex.
fn probe_hands(
    model: &MapModel,
    cfg: &PartitionConfig,
    esd: &EscapingSingularData,
    g: &TailCurve,
    n: usize,
    opts: &ProbeOptions,
) -> Result<Vec<Vec<Hand>>, HandError> {
    if n > MAX_HAND_LEVEL {
        return Err(HandError::LevelTooHigh(n));
    }
    let zs = g.zs();
    if zs.len() < 2 {
        return Err(HandError::NoProbes);
    }
    let markers: Vec<C64> = g.markers.iter().map(|m| m.point).collect();
    let offsets: Vec<Option<f64>> = zs.iter().map(|z| probe_offset(model, *z, n, opts.eps)).collect();
    let usable: Vec<usize> = (0..zs.len())
        .filter(|&i| markers.iter().all(|m| (zs[i] - m).norm() > MARKER_CLEARANCE))
        .filter(|&i| offsets[i].is_some())
        .collect();
    if usable.is_empty() {
        return Err(HandError::NoProbes);
    }
    let count = opts.samples.clamp(1, usable.len());
    let mut out = Vec::new();
    for j in 0..count {
        let i = usable[j * (usable.len() - 1) / (count - 1).max(1)];
        let tangent = zs[(i + 1).min(zs.len() - 1)] - zs[i.saturating_sub(1)];
        let normal = C64::new(0.0, 1.0) * unit(tangent);
        let h = offsets[i].expect("usable");
        let mut hands: Vec<Hand> = [zs[i] + h * normal, zs[i] - h * normal]
            .iter()
            .filter_map(|q| hand_of_point(model, cfg, esd, *q, n).ok())
            .collect();
        hands.dedup();
        if !hands.is_empty() {
            out.push(hands);
        }
    }
    if out.is_empty() {
        return Err(HandError::NoProbes);
    }
    Ok(out)
}

/// Normal offset at z keeping every iterate, and the log of f^{n+1}, within
/// distance `eps` of the unperturbed orbit; `None` when the orbit leaves
/// floating point range or the offset drops below resolution.
pub fn probe_offset(model: &MapModel, z: C64, n: usize, eps: f64) -> Option<f64> {
    let mut h = eps * (1.0 + z.norm());
    let (mut u, mut d) = (z, C64::new(1.0, 0.0));
    for _ in 0..n {
        d *= model.deriv(u);
        u = model.evaluate(u);
        if !u.is_finite() || !d.is_finite() {
            return None;
        }
        h = h.min(eps / d.norm());
    }
    let log_d = d * model.deriv_log(u);
    if !model.log_evaluate(u).is_finite() || !log_d.is_finite() {
        return None;
    }
    h = h.min(eps / log_d.norm());
    (h > 1e-13 * (1.0 + z.norm())).then_some(h)
}

fn first_witness(
    tracer: &Tracer,
    esd: &EscapingSingularData,
    hand: &Hand,
    exclude: &ExternalAddress,
) -> Result<ExternalAddress, HandError> {
    witness_addresses(tracer, esd, hand, exclude, 1).pop().ok_or_else(|| HandError::NoWitness(hand.to_string()))
}

/// Addresses itinerary·c̄ whose level-n curves start inside `hand`.
pub fn witness_addresses(
    tracer: &Tracer,
    esd: &EscapingSingularData,
    hand: &Hand,
    exclude: &ExternalAddress,
    limit: usize,
) -> Vec<ExternalAddress> {
    let (model, cfg) = (tracer.model, tracer.cfg);
    let last = *hand.itinerary.last().expect("itinerary is nonempty");
    let mut out = Vec::new();
    for c in neighbour_candidates(last) {
        if out.len() >= limit {
            break;
        }
        let Ok(a) = ExternalAddress::new(hand.itinerary.clone(), vec![c]) else { continue };
        if &a == exclude {
            continue;
        }
        let Ok(curve) = tracer.gamma_curve(&SignedAddress::new(a.clone(), Sign::Plus), hand.level) else { continue };
        let probes: Vec<C64> = curve
            .zs()
            .into_iter()
            .filter(|z| probe_offset(model, *z, hand.level, 1e-6).is_some())
            .take(WITNESS_PROBES)
            .collect();
        let inside = !probes.is_empty()
            && probes.iter().all(|z| hand_of_point(model, cfg, esd, *z, hand.level).as_ref() == Ok(hand));
        if inside {
            out.push(a);
        }
    }
    out
}

/// Certified interval of signed addresses whose level-n hands lie in
/// τ_n(target), built recursively from the order neighbours of the symbol
/// after s₀ and shrunk at addresses of removed tails.
pub fn address_interval(
    cfg: &PartitionConfig,
    esd: &EscapingSingularData,
    target: &SignedAddress,
    n: usize,
) -> Result<AddressInterval, HandError> {
    if n > MAX_HAND_LEVEL {
        return Err(HandError::LevelTooHigh(n));
    }
    interval_rec(cfg, esd, &target.addr, target.sign, n)
}

fn interval_rec(
    cfg: &PartitionConfig,
    esd: &EscapingSingularData,
    a: &ExternalAddress,
    sign: Sign,
    n: usize,
) -> Result<AddressInterval, HandError> {
    let s0 = a.first();
    if n == 0 {
        let (below, above) = symbol_neighbours(cfg, a.symbol(1));
        let lo = SignedAddress::new(ExternalAddress::constant(below).prepend(s0), Sign::Minus);
        let hi = SignedAddress::new(ExternalAddress::constant(above).prepend(s0), Sign::Plus);
        return Ok(AddressInterval::new(lo, hi)?);
    }
    let t = a.shift();
    let mut j = interval_rec(cfg, esd, &t, sign, n - 1)?;
    let here = SignedAddress::new(t.clone(), sign);
    let removed = esd.removed_addresses(n);
    if removed.contains(&t) || on_boundary(esd, &t, n - 1) {
        match sign {
            Sign::Plus => j.lo = SignedAddress::new(t.clone(), Sign::Minus),
            Sign::Minus => j.hi = SignedAddress::new(t.clone(), Sign::Plus),
        }
    }
    for r in removed.iter().filter(|r| **r != t) {
        for e in [Sign::Minus, Sign::Plus].map(|sg| SignedAddress::new(r.clone(), sg)) {
            if j.contains(cfg, &e) {
                if signed_compare(cfg, &e, &here).is_lt() {
                    j.lo = e;
                } else {
                    j.hi = e;
                }
            }
        }
    }
    if j.lo == j.hi || !j.contains(cfg, &here) {
        return Err(HandError::IntervalCollapsed(here.to_string()));
    }
    Ok(j.prepend(s0))
}

/// γ⁰_t lies on the boundary of its level-m hand when some shift σʲ(t) is
/// the address of a tail removed at the matching level.
fn on_boundary(esd: &EscapingSingularData, t: &ExternalAddress, m: usize) -> bool {
    (1..=m).any(|j| esd.removed_addresses(m - j + 1).contains(&t.shift_by(j)))
}

/// Up to `count` distinct signed addresses strictly inside `interval`: the
/// common prefix of its endpoints followed by random nearby symbols and a
/// random short period.
pub fn sample_interval<R: Rng + ?Sized>(
    cfg: &PartitionConfig,
    interval: &AddressInterval,
    rng: &mut R,
    count: usize,
) -> Vec<SignedAddress> {
    let (lo, hi) = (&interval.lo.addr, &interval.hi.addr);
    let p = (0..SAMPLE_PREFIX).take_while(|&i| lo.symbol(i) == hi.symbol(i)).count();
    let mut alphabet = neighbour_candidates(lo.symbol(p));
    alphabet.extend(neighbour_candidates(hi.symbol(p)));
    alphabet.sort_by(|a, b| cfg.compare_symbols(*a, *b));
    alphabet.dedup();
    let mut out: Vec<SignedAddress> = Vec::new();
    for _ in 0..count * SAMPLE_TRIES {
        if out.len() >= count {
            break;
        }
        let mut pre = lo.prefix(p);
        pre.extend((0..rng.gen_range(1..=3)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]));
        let per = (0..rng.gen_range(1..=2)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
        let Ok(addr) = ExternalAddress::new(pre, per) else { continue };
        let cand = SignedAddress::new(addr, sign);
        if interval.contains(cfg, &cand) && !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

/// Immediate predecessor and successor of `t` among nearby symbols.
pub fn symbol_neighbours(cfg: &PartitionConfig, t: Symbol) -> (Symbol, Symbol) {
    let others: Vec<Symbol> = neighbour_candidates(t).into_iter().filter(|s| *s != t).collect();
    let below = others
        .iter()
        .copied()
        .filter(|s| cfg.compare_symbols(*s, t).is_lt())
        .max_by(|a, b| cfg.compare_symbols(*a, *b))
        .expect("a smaller symbol exists nearby");
    let above = others
        .iter()
        .copied()
        .filter(|s| cfg.compare_symbols(*s, t).is_gt())
        .min_by(|a, b| cfg.compare_symbols(*a, *b))
        .expect("a larger symbol exists nearby");
    (below, above)
}

/// f⁻ⁿ along the symbols of `target`: each step continues the closed-form
/// branch inwards along a ray of the current strip, passing critical values
/// on the bristle selected by the sign.
pub fn inverse_chain(
    model: &MapModel,
    cfg: &PartitionConfig,
    target: &SignedAddress,
    n: usize,
    w: C64,
) -> Result<C64, HandError> {
    if n == 0 {
        return Ok(w);
    }
    if !cfg.in_w(w) || model.domain_symbol(cfg, w) != Ok(target.addr.symbol(n)) {
        return Err(HandError::OutsideDomain(w));
    }
    let mut y = w;
    for k in (0..n).rev() {
        let s = target.addr.symbol(k);
        let strip = target.addr.symbol(k + 1);
        let dir = unit(model.base_point(cfg, strip, 2.0) - model.base_point(cfg, strip, 1.0));
        let mut reach = 100.0 * cfg.disk_radius + y.norm();
        let mut far = y + dir * reach;
        for _ in 0..8 {
            if cfg.in_w(far) {
                break;
            }
            reach *= 2.0;
            far = y + dir * reach;
        }
        if !cfg.in_w(far) {
            return Err(HandError::OutsideDomain(y));
        }
        let start = model.branch_value(cfg, s, far);
        let pulled = continue_preimage(model, start, &[far, y], Some(target.sign))?;
        y = *pulled.last().expect("nonempty");
    }
    Ok(y)
}
