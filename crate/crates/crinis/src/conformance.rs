//! Executable checks of the structural claims: hyperbolic expansion, the
//! cyclic order of tails at infinity, convergence of tails to Γ-curves, the
//! signed-address count and the pullback bijection.
//!
//! Every check is deterministic for a given seed and returns a
//! [`CheckReport`]; `reports_json` renders a list of them, optionally without
//! the wall-clock field so that repeated runs compare byte for byte.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::address::{cyclic_triple, format_address, lex_compare, AddressError, ExternalAddress, Sign, SignedAddress};
use crate::geometry::{distance_to_polyline, hausdorff};
use crate::map_models::{expansion_norm, Family, Holomorphic, MapModel, PartitionConfig, Side, Symbol, C64};
use crate::ray_tracer::{check_bijection, count_signed_addresses, TailCurve, TraceError, TraceParams, Tracer};

const TIE_TOL: f64 = 1e-9;
const THROUGH_TOL: f64 = 1e-6;
const BIJECTION_TOL: f64 = 1e-6;
const BIJECTION_SAMPLES: usize = 2000;
const ORBIT_STEPS: usize = 64;
const NUDGE: C64 = C64::new(1e-3, 1e-3);

#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error("need at least three distinct addresses")]
    TooFewAddresses,
    #[error("tail of {0} does not cross the circle; raise R or the potential window")]
    CurveMissesCircle(String),
    #[error("approach sequence is not monotone towards the limit from the {0} side")]
    NotMonotone(&'static str),
    #[error("potential window [{0}, {1}] is empty")]
    EmptyWindow(f64, f64),
    #[error("orbit of {0} does not settle in a fundamental domain")]
    NoAddress(C64),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Address(#[from] AddressError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub observed: Value,
    pub threshold: f64,
    pub samples: usize,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    fn new(name: &str, passed: bool, observed: Value, threshold: f64, samples: usize, start: Instant) -> Self {
        CheckReport {
            name: name.to_string(),
            passed,
            observed,
            threshold,
            samples,
            runtime_ms: start.elapsed().as_millis() as u64,
            seed: None,
            note: None,
        }
    }

    fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn noted(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }
}

/// JSON array of reports; `timing = false` drops `runtime_ms`.
pub fn reports_json(reports: &[CheckReport], timing: bool) -> String {
    let mut value = serde_json::to_value(reports).expect("reports serialise");
    if !timing {
        if let Value::Array(items) = &mut value {
            for item in items {
                if let Value::Object(map) = item {
                    map.remove("runtime_ms");
                }
            }
        }
    }
    serde_json::to_string_pretty(&value).expect("value serialises") + "\n"
}

fn point(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Minimum of the hyperbolic expansion norm over `samples` seeded points z
/// with |z| uniform in (1.1·R_D, 100·R_D) and |f(z)| > R_D.
pub fn check_expansion<M: Holomorphic + Sync + ?Sized>(model: &M, r_d: f64, samples: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    let mut attempts = 0;
    while points.len() < samples && attempts < 1000 * samples.max(1) {
        attempts += 1;
        let r = rng.gen_range(1.1 * r_d..100.0 * r_d);
        let z = C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
        if model.value(z).norm() > r_d {
            points.push(z);
        }
    }
    let norms: Vec<(f64, C64)> = points
        .par_iter()
        .filter_map(|z| expansion_norm(model, r_d, *z).ok().filter(|v| v.is_finite()).map(|v| (v, *z)))
        .collect();
    let (min, at) = norms
        .iter()
        .copied()
        .fold((f64::INFINITY, C64::new(f64::NAN, f64::NAN)), |best, cur| if cur.0 < best.0 { cur } else { best });
    let observed = json!({ "min": min, "argmin": point(at), "evaluated": norms.len() });
    CheckReport::new("expansion", min > 1.0, observed, 1.0, points.len(), start).seeded(seed)
}

/// Argument, measured counterclockwise from δ, of the last crossing of
/// |z| = R by the level-0 tail of `a`.
struct CrossingCache<'a> {
    tracer: &'a Tracer<'a>,
    radius: f64,
    angles: HashMap<ExternalAddress, f64>,
}

impl CrossingCache<'_> {
    fn angle(&mut self, a: &ExternalAddress) -> Result<f64, CheckError> {
        if let Some(t) = self.angles.get(a) {
            return Ok(*t);
        }
        let tail = self.tracer.trace_level0(a)?;
        let z = last_crossing(&tail.zs(), self.radius).ok_or_else(|| CheckError::CurveMissesCircle(format_address(a)))?;
        let t = self.tracer.cfg.angle_from_delta(z);
        self.angles.insert(a.clone(), t);
        Ok(t)
    }

    /// Order of the tails at infinity. Tails meeting the circle at the same
    /// angle lie in one fundamental domain, which f maps conformally onto 𝒲
    /// preserving the order at infinity, so such ties are decided by the
    /// image tails. Returns the ordering and the number of image steps used.
    fn compare(&mut self, a: &ExternalAddress, b: &ExternalAddress) -> Result<(Ordering, usize), CheckError> {
        let budget = a.comparison_budget(b);
        for k in 0..=budget {
            let (x, y) = (a.shift_by(k), b.shift_by(k));
            let (ta, tb) = (self.angle(&x)?, self.angle(&y)?);
            if (ta - tb).abs() > TIE_TOL {
                return Ok((ta.total_cmp(&tb), k));
            }
        }
        Ok((Ordering::Equal, budget))
    }
}

fn last_crossing(zs: &[C64], radius: f64) -> Option<C64> {
    zs.windows(2).rev().find_map(|w| {
        let (ra, rb) = (w[0].norm() - radius, w[1].norm() - radius);
        (ra * rb <= 0.0 && ra != rb).then(|| w[0] + (w[1] - w[0]) * (ra / (ra - rb)))
    })
}

/// Compares the cyclic order of level-0 tails on |z| = R with the cyclic
/// order of their addresses on all triples. The potential window is widened
/// to reach the circle when needed.
pub fn check_cyclic_order(
    model: &MapModel,
    cfg: &PartitionConfig,
    params: &TraceParams,
    addrs: &[ExternalAddress],
    radius: f64,
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let mut distinct: Vec<ExternalAddress> = Vec::new();
    for a in addrs {
        if !distinct.contains(a) {
            distinct.push(a.clone());
        }
    }
    if distinct.len() < 3 {
        return Err(CheckError::TooFewAddresses);
    }
    let wide = TraceParams { t_max: params.t_max.max(1.25 * radius), ..params.clone() };
    let tracer = Tracer::new(model, cfg, &wide)?;
    let mut cache = CrossingCache { tracer: &tracer, radius, angles: HashMap::new() };

    let mut order: Vec<usize> = (0..distinct.len()).collect();
    let mut error = None;
    let mut deepest = 0;
    order.sort_by(|&i, &j| match cache.compare(&distinct[i], &distinct[j]) {
        Ok((o, k)) => {
            deepest = deepest.max(k);
            o
        }
        Err(e) => {
            error.get_or_insert(e);
            Ordering::Equal
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    let mut rank = vec![0; distinct.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let between = |a: usize, x: usize, b: usize| {
        let (ra, rx, rb) = (rank[a], rank[x], rank[b]);
        (ra < rx && rx < rb) || (rx < rb && rb < ra) || (rb < ra && ra < rx)
    };

    let n = distinct.len();
    let (mut total, mut agree) = (0usize, 0usize);
    let mut first_failure = Value::Null;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                total += 1;
                let geometric = between(i, j, k);
                let symbolic = cyclic_triple(cfg, &distinct[i], &distinct[j], &distinct[k])?;
                if geometric == symbolic {
                    agree += 1;
                } else if first_failure.is_null() {
                    first_failure = json!({
                        "triple": [format_address(&distinct[i]), format_address(&distinct[j]), format_address(&distinct[k])],
                        "geometric": geometric,
                        "symbolic": symbolic,
                    });
                }
            }
        }
    }
    let observed = json!({
        "triples": total,
        "agreeing": agree,
        "agreement": agree as f64 / total as f64,
        "radius": radius,
        "deepest_tie": deepest,
        "first_failure": first_failure,
    });
    Ok(CheckReport::new("cyclic_order", agree == total, observed, 1.0, n, start))
}

/// `count` distinct eventually periodic addresses over `alphabet`, with
/// preperiod and period lengths up to 3.
pub fn random_addresses(alphabet: &[Symbol], count: usize, seed: u64) -> Vec<ExternalAddress> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<ExternalAddress> = Vec::new();
    let word = |rng: &mut ChaCha8Rng, len: usize| -> Vec<Symbol> {
        (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
    };
    while out.len() < count {
        let pre_len = rng.gen_range(0..=3);
        let per_len = rng.gen_range(1..=3);
        let pre = word(&mut rng, pre_len);
        let per = word(&mut rng, per_len);
        if let Ok(a) = ExternalAddress::new(pre, per) {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

/// Hausdorff distances, inside the potential window, between the Γ-curves of
/// `approach[k]` and that of `limit`, all at the tracer's level and with the
/// limit's sign. Passes when the distances never increase after the first
/// and the last is below 1e-3.
pub fn check_convergence(
    model: &MapModel,
    cfg: &PartitionConfig,
    params: &TraceParams,
    limit: &SignedAddress,
    approach: &[ExternalAddress],
    window: (f64, f64),
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(CheckError::EmptyWindow(t_lo, t_hi));
    }
    let side = match limit.sign {
        Sign::Plus => Ordering::Greater,
        Sign::Minus => Ordering::Less,
    };
    let side_name = if limit.sign == Sign::Plus { "upper" } else { "lower" };
    let beyond = |a: &ExternalAddress| *a == limit.addr || lex_compare(cfg, a, &limit.addr) == side;
    let inward = approach.windows(2).all(|w| w[0] == w[1] || lex_compare(cfg, &w[0], &w[1]) == side);
    if !approach.iter().all(beyond) || !inward {
        return Err(CheckError::NotMonotone(side_name));
    }
    let tracer = Tracer::new(model, cfg, params)?;
    let level = params.level;
    let clip = |g: &TailCurve| -> Vec<C64> { g.points.iter().filter(|p| p.t >= t_lo && p.t <= t_hi).map(|p| p.z).collect() };
    let reference = clip(&tracer.gamma_curve(limit, level)?);
    let targets: Vec<SignedAddress> = approach.iter().map(|a| SignedAddress::new(a.clone(), limit.sign)).collect();
    let mut distances = Vec::with_capacity(targets.len());
    for curve in tracer.gamma_curves(&targets, level) {
        distances.push(hausdorff(&clip(&curve?), &reference, params.step / 2.0));
    }
    let monotone = distances.windows(2).skip(1).all(|w| w[1] <= w[0]);
    let last = distances.last().copied().unwrap_or(f64::INFINITY);
    let observed = json!({
        "distances": distances,
        "window": [t_lo, t_hi],
        "level": level,
        "limit": limit.to_string(),
    });
    Ok(CheckReport::new("convergence", monotone && last < 1e-3, observed, 1e-3, approach.len(), start)
        .noted("geometric form: Γ-curves of the approaching addresses converge to the limit's Γ-curve"))
}

/// Address read off the orbit of z: the fundamental domains of z, f(z), …
/// until the orbit settles, continued periodically by the last symbol.
fn orbit_address(model: &MapModel, cfg: &PartitionConfig, z: C64, bailout: f64) -> Result<ExternalAddress, CheckError> {
    let orbit = model.forward_orbit(z, ORBIT_STEPS, bailout);
    let mut syms = Vec::new();
    for q in &orbit.points {
        match model.branch_symbol(cfg, *q) {
            Ok(s) => syms.push(s),
            Err(_) => break,
        }
    }
    let last = *syms.last().ok_or(CheckError::NoAddress(z))?;
    while syms.len() > 1 && syms[syms.len() - 2] == last {
        syms.pop();
    }
    syms.pop();
    Ok(ExternalAddress::new(syms, vec![last])?)
}

fn neighbours(s: Symbol) -> Vec<Symbol> {
    let sides = if s.side.is_some() { vec![Some(Side::L), Some(Side::R)] } else { vec![None] };
    (s.row - 1..=s.row + 1).flat_map(|row| sides.iter().map(move |&side| Symbol { row, side })).collect()
}

/// Signed addresses (s, ∗) among the depth-2 siblings of the orbit address
/// of z whose Γ-curves pass within 1e-6 of z.
pub fn addresses_through(
    tracer: &Tracer,
    z: C64,
) -> Result<Vec<SignedAddress>, CheckError> {
    let (model, cfg) = (tracer.model, tracer.cfg);
    let near = |q: C64| model.branch_symbol(cfg, q).or_else(|_| model.branch_symbol(cfg, q + NUDGE)).map_err(|_| CheckError::NoAddress(q));
    let f1 = model.evaluate(z);
    let tail = orbit_address(model, cfg, model.evaluate(f1), tracer.params.bailout)?;
    let mut candidates = Vec::new();
    for s0 in neighbours(near(z)?) {
        for s1 in neighbours(near(f1)?) {
            let a = tail.prepend(s1).prepend(s0);
            for sign in [Sign::Minus, Sign::Plus] {
                candidates.push(SignedAddress::new(a.clone(), sign));
            }
        }
    }
    let level = tracer.params.level;
    let curves = tracer.gamma_curves(&candidates, level);
    let mut out = Vec::new();
    for (cand, curve) in candidates.into_iter().zip(curves) {
        if let Ok(g) = curve {
            if distance_to_polyline(&g.zs(), z) <= THROUGH_TOL {
                out.push(cand);
            }
        }
    }
    Ok(out)
}

/// Compares the signed-address count 2·∏ deg(f, fʲ(z)) with the expected
/// values and, for counts up to 8, with the number of signed addresses among
/// depth-2 siblings whose Γ-curves pass through z.
pub fn check_counting(
    model: &MapModel,
    cfg: &PartitionConfig,
    params: &TraceParams,
    points: &[(C64, u64)],
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let tracer = Tracer::new(model, cfg, params)?;
    let mut rows = Vec::new();
    let mut passed = true;
    for &(z, expected) in points {
        let formula = count_signed_addresses(model, z, ORBIT_STEPS, params)?;
        let mut row = json!({ "z": point(z), "expected": expected, "formula": formula });
        passed &= formula == expected;
        if expected <= 8 {
            let through = addresses_through(&tracer, z)?;
            passed &= through.len() as u64 == expected;
            row["enumerated"] = json!(through.len());
            row["addresses"] = json!(through.iter().map(|a| a.to_string()).collect::<Vec<_>>());
        }
        rows.push(row);
    }
    Ok(CheckReport::new("counting", passed, Value::Array(rows), 0.0, points.len(), start))
}

/// Pullback bijection along the level chains of `targets`: each level maps
/// onto the previous one within 1e-6 with increasing induced position.
pub fn check_bijections(
    model: &MapModel,
    cfg: &PartitionConfig,
    params: &TraceParams,
    targets: &[SignedAddress],
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let tracer = Tracer::new(model, cfg, params)?;
    let (mut samples, mut violations, mut worst) = (0, 0, 0.0f64);
    let mut chains = 0;
    for t in targets {
        let levels = tracer.gamma_levels(t, params.level)?;
        let base_parent = tracer.trace_level0(&t.addr.shift_by(params.level + 1))?;
        let pairs = std::iter::once((&levels[0], &base_parent)).chain(levels.windows(2).map(|w| (&w[1], &w[0])));
        for (child, parent) in pairs {
            let r = check_bijection(model, child, parent, BIJECTION_TOL, BIJECTION_SAMPLES);
            samples += r.samples;
            violations += r.violations;
            worst = worst.max(r.max_distance);
            chains += 1;
        }
    }
    let observed = json!({ "pairs": chains, "violations": violations, "max_distance": worst });
    Ok(CheckReport::new("bijection", violations == 0, observed, BIJECTION_TOL, samples, start))
}

/// Names accepted by `run_suite`'s filter.
pub const CHECK_NAMES: [&str; 5] = ["expansion", "cyclic_order", "convergence", "counting", "bijection"];

/// Suite settings shared by the CLI and the acceptance tests.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub expansion_samples: usize,
    pub order_addresses: usize,
    /// Circle radius in units of R_D.
    pub order_radius: f64,
    pub convergence_terms: usize,
    pub window: (f64, f64),
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 1,
            expansion_samples: 10_000,
            order_addresses: 50,
            order_radius: 50.0,
            convergence_terms: 6,
            window: (-1e9, 10.0),
        }
    }
}

/// Points with known signed-address counts for the family.
pub fn counting_points(model: &MapModel) -> Vec<(C64, u64)> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    match model.family {
        Family::CoshSq => vec![
            (C64::new(2.0, 0.0), 2),
            (C64::new(0.0, 0.0), 4),
            (C64::new(0.0, half_pi), 8),
            (C64::new(0.0, -half_pi), 8),
        ],
        Family::Cosh => {
            vec![(C64::new(2.0, 0.0), 2), (C64::new(0.0, 0.0), 4), (C64::new(0.0, half_pi), 4)]
        }
        _ => vec![(C64::new(40.0, 0.0), 2)],
    }
}

/// Approach sequence 0_R^k·t̄ for k = first, …, first + terms − 1, from above
/// (t = 1_R) or below (t = −1_R), towards 0̄_R.
pub fn approach_sequence(first: usize, terms: usize, sign: Sign) -> Vec<ExternalAddress> {
    let zero = Symbol::right(0);
    let t = Symbol::right(if sign == Sign::Plus { 1 } else { -1 });
    (first..first + terms).map(|k| ExternalAddress::new(vec![zero; k], vec![t]).expect("nonempty period")).collect()
}

/// Runs the checks whose names pass `filter` (all when `None`).
pub fn run_suite(
    model: &MapModel,
    cfg: &PartitionConfig,
    params: &TraceParams,
    opts: &SuiteOptions,
    filter: Option<&str>,
) -> Result<Vec<CheckReport>, CheckError> {
    let wanted = |name: &str| filter.is_none_or(|f| f.split(',').any(|p| p.trim() == name));
    let mut out = Vec::new();
    if wanted("expansion") {
        out.push(check_expansion(model, cfg.disk_radius, opts.expansion_samples, opts.seed));
    }
    if wanted("cyclic_order") {
        let alphabet = four_symbols(model);
        let addrs = random_addresses(&alphabet, opts.order_addresses, opts.seed);
        out.push(check_cyclic_order(model, cfg, params, &addrs, opts.order_radius * cfg.disk_radius)?.seeded(opts.seed));
    }
    if wanted("convergence") {
        for sign in [Sign::Plus, Sign::Minus] {
            let limit = SignedAddress::new(ExternalAddress::constant(Symbol::right(0)), sign);
            let approach = approach_sequence(params.level.saturating_sub(2).max(1), opts.convergence_terms, sign);
            out.push(check_convergence(model, cfg, params, &limit, &approach, opts.window)?);
        }
    }
    if wanted("counting") {
        out.push(check_counting(model, cfg, params, &counting_points(model))?);
    }
    if wanted("bijection") {
        let zero = ExternalAddress::constant(Symbol::right(0));
        let targets = [SignedAddress::new(zero.clone(), Sign::Plus), SignedAddress::new(zero, Sign::Minus)];
        out.push(check_bijections(model, cfg, params, &targets)?);
    }
    Ok(out)
}

/// Four neighbouring symbols around the real axis.
pub fn four_symbols(model: &MapModel) -> Vec<Symbol> {
    if model.family.has_sides() {
        vec![Symbol::right(-1), Symbol::right(0), Symbol::right(1), Symbol::left(0)]
    } else {
        (-1..=2).map(Symbol::bare).collect()
    }
}
