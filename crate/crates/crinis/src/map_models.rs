//! Concrete entire-function families and their analytic primitives.
//!
//! Every family is of cosine or exponential type, so all inverse branches on
//! the slit exterior 𝒲 = ℂ \ (D̄ ∪ δ) have closed forms. The closed forms are
//! the primary source of truth; Newton polishing only tidies the last bits.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

const MAX_DERIVATIVE_ORDER: u32 = 8;
const DEGREE_THRESHOLD: f64 = 1e-9;
const NEWTON_MAX_STEPS: usize = 64;
const INVERSE_TOL: f64 = 1e-10;
const STALL_TOL: f64 = 1e-12;
const DELTA_ANGLE_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("derivative order {0} out of range 1..=8")]
    OrderOutOfRange(u32),
    #[error("degenerate point {0}: local degree exceeds 8")]
    DegeneratePoint(C64),
    #[error("invalid family parameter: {0}")]
    InvalidParameter(String),
    #[error("symbol {0} does not belong to this family's alphabet")]
    ForeignSymbol(Symbol),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("point {0} lies in the closed disk D")]
    InsideD(C64),
    #[error("point {0} lies on the slit δ")]
    OnDelta(C64),
    #[error("point {0} is not in a tract: |f(z)| <= R_D")]
    NotInTract(C64),
    #[error("f({0}) lies on the slit δ, between fundamental domains")]
    OnDomainBoundary(C64),
    #[error("no inverse branch reproduces {0}")]
    NoBranchMatch(C64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("w = {0} is not in the slit exterior 𝒲")]
    OutsideW(C64),
    #[error("Newton iteration failed to converge near {0}")]
    NoConvergence(C64),
    #[error("converged to {z}, which lies in {found} rather than {wanted}")]
    WrongDomain { z: C64, found: String, wanted: Symbol },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("disk radius {r} does not contain the singular set (radius {needed})")]
    DiskTooSmall { r: f64, needed: f64 },
    #[error("disk radius {r} does not contain f(0) = {f0}")]
    MissesOrigin { r: f64, f0: C64 },
    #[error("slit meets a tract: |f({0})| > R_D")]
    SlitMeetsTract(C64),
    #[error("non-finite or non-positive parameter")]
    BadParameter,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point {0} is not outside the disk of radius {1}")]
    NotOutsideDisk(C64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Cosh,
    CoshSq,
    Exp { lambda: C64 },
    ScaledCosh { a: C64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cosh => "cosh",
            Family::CoshSq => "coshsq",
            Family::Exp { .. } => "exp",
            Family::ScaledCosh { .. } => "acosh",
        }
    }

    pub fn has_sides(&self) -> bool {
        !matches!(self, Family::Exp { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

/// Label of a fundamental domain: a row of half-strips plus, for cosine-type
/// maps, the side of the imaginary axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub row: i32,
    pub side: Option<Side>,
}

impl Symbol {
    pub const fn right(row: i32) -> Self {
        Symbol { row, side: Some(Side::R) }
    }

    pub const fn left(row: i32) -> Self {
        Symbol { row, side: Some(Side::L) }
    }

    pub const fn bare(row: i32) -> Self {
        Symbol { row, side: None }
    }

    fn sign(&self) -> f64 {
        match self.side {
            Some(Side::L) => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Some(Side::L) => write!(f, "{}L", self.row),
            Some(Side::R) => write!(f, "{}R", self.row),
            None => write!(f, "{}", self.row),
        }
    }
}

impl std::str::FromStr for Symbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (digits, side) = match s.chars().last() {
            Some('L') | Some('l') => (&s[..s.len() - 1], Some(Side::L)),
            Some('R') | Some('r') => (&s[..s.len() - 1], Some(Side::R)),
            Some(_) => (s, None),
            None => return Err("empty symbol".into()),
        };
        let row = digits
            .parse::<i32>()
            .map_err(|_| format!("bad symbol row in {s:?}"))?;
        Ok(Symbol { row, side })
    }
}

/// Axis-aligned rectangle `[re_min, re_max] × [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect { re_min, re_max, im_min, im_max }
    }

    pub fn around(z: C64, r: f64) -> Self {
        Rect::new(z.re - r, z.re + r, z.im - r, z.im + r)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// Minimal interface for the hyperbolic expansion estimate, so that synthetic
/// maps can be checked alongside the shipped families.
pub trait Holomorphic {
    fn value(&self, z: C64) -> C64;
    fn first_derivative(&self, z: C64) -> C64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapModel {
    pub family: Family,
    pub critical_values: Vec<C64>,
    pub asymptotic_values: Vec<C64>,
    pub singular_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub points: Vec<C64>,
    pub escaped: bool,
}

impl MapModel {
    pub fn new(family: Family) -> Result<Self, ModelError> {
        let (critical_values, asymptotic_values) = match family {
            Family::Cosh => (vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)], vec![]),
            Family::CoshSq => (vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)], vec![]),
            Family::Exp { lambda } => {
                if !(lambda.norm() > 0.0) || !lambda.is_finite() {
                    return Err(ModelError::InvalidParameter(format!("lambda = {lambda}")));
                }
                (vec![], vec![C64::new(0.0, 0.0)])
            }
            Family::ScaledCosh { a } => {
                if !(a.norm() > 0.0) || !a.is_finite() {
                    return Err(ModelError::InvalidParameter(format!("a = {a}")));
                }
                (vec![-a, a], vec![])
            }
        };
        let singular_radius = critical_values
            .iter()
            .chain(asymptotic_values.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        Ok(MapModel { family, critical_values, asymptotic_values, singular_radius })
    }

    pub fn cosh() -> Self {
        Self::new(Family::Cosh).expect("cosh is valid")
    }

    pub fn cosh_sq() -> Self {
        Self::new(Family::CoshSq).expect("cosh² is valid")
    }

    pub fn exp(lambda: C64) -> Result<Self, ModelError> {
        Self::new(Family::Exp { lambda })
    }

    pub fn scaled_cosh(a: C64) -> Result<Self, ModelError> {
        Self::new(Family::ScaledCosh { a })
    }

    pub fn check_symbol(&self, s: Symbol) -> Result<(), ModelError> {
        if self.family.has_sides() == s.side.is_some() {
            Ok(())
        } else {
            Err(ModelError::ForeignSymbol(s))
        }
    }

    pub fn evaluate(&self, z: C64) -> C64 {
        match self.family {
            Family::Cosh => z.cosh(),
            Family::CoshSq => {
                let c = z.cosh();
                c * c
            }
            Family::Exp { lambda } => lambda * z.exp(),
            Family::ScaledCosh { a } => a * z.cosh(),
        }
    }

    pub fn derivative(&self, z: C64, order: u32) -> Result<C64, ModelError> {
        if order == 0 || order > MAX_DERIVATIVE_ORDER {
            return Err(ModelError::OrderOutOfRange(order));
        }
        Ok(self.nth_derivative(z, order))
    }

    fn nth_derivative(&self, z: C64, order: u32) -> C64 {
        let odd = order % 2 == 1;
        match self.family {
            Family::Cosh => {
                if odd {
                    z.sinh()
                } else {
                    z.cosh()
                }
            }
            Family::ScaledCosh { a } => a * if odd { z.sinh() } else { z.cosh() },
            Family::CoshSq => {
                let scale = 2f64.powi(order as i32 - 1);
                let w = 2.0 * z;
                scale * if odd { w.sinh() } else { w.cosh() }
            }
            Family::Exp { lambda } => lambda * z.exp(),
        }
    }

    pub fn deriv(&self, z: C64) -> C64 {
        self.nth_derivative(z, 1)
    }

    /// Order of the first non-vanishing term of f − f(z0).
    pub fn local_degree(&self, z0: C64) -> Result<u32, ModelError> {
        let scale = self.evaluate(z0).norm().max(1.0);
        (1..=MAX_DERIVATIVE_ORDER)
            .find(|&k| self.nth_derivative(z0, k).norm() > DEGREE_THRESHOLD * scale)
            .ok_or(ModelError::DegeneratePoint(z0))
    }

    /// Taylor coefficient f⁽ᵈ⁾(z0)/d!.
    pub fn taylor_coefficient(&self, z0: C64, d: u32) -> C64 {
        let fact: f64 = (1..=d).map(f64::from).product();
        self.nth_derivative(z0, d) / fact
    }

    pub fn critical_points_in(&self, bx: &Rect) -> Vec<C64> {
        let spacing = match self.family {
            Family::Cosh | Family::ScaledCosh { .. } => PI,
            Family::CoshSq => PI / 2.0,
            Family::Exp { .. } => return vec![],
        };
        if bx.re_min > 0.0 || bx.re_max < 0.0 {
            return vec![];
        }
        let k_lo = (bx.im_min / spacing).ceil() as i64;
        let k_hi = (bx.im_max / spacing).floor() as i64;
        (k_lo..=k_hi).map(|k| C64::new(0.0, k as f64 * spacing)).collect()
    }

    pub fn forward_orbit(&self, z: C64, n: usize, bailout: f64) -> Orbit {
        let mut points = vec![z];
        let mut cur = z;
        for _ in 0..n {
            let next = self.evaluate(cur);
            if !next.is_finite() {
                return Orbit { points, escaped: true };
            }
            points.push(next);
            if next.norm() > bailout {
                return Orbit { points, escaped: true };
            }
            cur = next;
        }
        Orbit { points, escaped: false }
    }

    /// Real model F of the growth along tails: f(B_s(t)) ≈ F(t) for the base
    /// points B_s.
    pub fn growth(&self, t: f64) -> f64 {
        match self.family {
            Family::Cosh => t.cosh(),
            Family::CoshSq => t.cosh().powi(2),
            Family::Exp { lambda } => lambda.norm() * t.exp(),
            Family::ScaledCosh { a } => a.norm() * t.cosh(),
        }
    }

    fn growth_slope(&self, t: f64) -> f64 {
        match self.family {
            Family::Cosh => t.sinh(),
            Family::CoshSq => (2.0 * t).sinh(),
            Family::Exp { lambda } => lambda.norm() * t.exp(),
            Family::ScaledCosh { a } => a.norm() * t.sinh(),
        }
    }

    fn growth_inverse_exact(&self, y: f64) -> f64 {
        match self.family {
            Family::Cosh => y.acosh(),
            Family::CoshSq => y.sqrt().acosh(),
            Family::Exp { lambda } => (y / lambda.norm()).ln(),
            Family::ScaledCosh { a } => (y / a.norm()).acosh(),
        }
    }

    /// F extended linearly below t = 1 to an increasing bijection of ℝ.
    pub fn growth_ext(&self, t: f64) -> f64 {
        if t >= 1.0 {
            self.growth(t)
        } else {
            self.growth(1.0) + self.growth_slope(1.0) * (t - 1.0)
        }
    }

    pub fn growth_ext_inv(&self, y: f64) -> f64 {
        let y1 = self.growth(1.0);
        if y >= y1 {
            self.growth_inverse_exact(y)
        } else {
            1.0 + (y - y1) / self.growth_slope(1.0)
        }
    }

    /// Base point of potential r in the domain of `s`: a preimage of the
    /// direction of the positive reals, so that f(B_s(r)) ≈ F(r).
    pub fn base_point(&self, cfg: &PartitionConfig, s: Symbol, r: f64) -> C64 {
        let psi = wrap_into(0.0, cfg.delta_angle);
        let k = f64::from(s.row);
        match self.family {
            Family::Cosh => C64::new(s.sign() * r, s.sign() * psi + TAU * k),
            Family::CoshSq => C64::new(s.sign() * r, 0.5 * (s.sign() * psi + TAU * k)),
            Family::Exp { lambda } => C64::new(r, psi - lambda.arg() + TAU * k),
            Family::ScaledCosh { a } => {
                C64::new(s.sign() * r, s.sign() * (psi - a.arg()) + TAU * k)
            }
        }
    }

    /// Closed-form inverse branch onto the domain labelled `s`. Defined and
    /// analytic on 𝒲 and on the larger slit region where the formula is
    /// continuous, which is what continuation past 𝒲 relies on.
    pub fn branch_value(&self, cfg: &PartitionConfig, s: Symbol, w: C64) -> C64 {
        self.branch_from_log(s, log_cut(w, cfg.delta_angle), w.inv())
    }

    /// The same branch written in terms of ℓ = log w (cut at δ) and 1/w, so
    /// that it stays finite when w itself overflows.
    fn branch_from_log(&self, s: Symbol, ell: C64, winv: C64) -> C64 {
        let k = f64::from(s.row);
        let shift = C64::new(0.0, TAU * k);
        let ln2 = C64::new(2f64.ln(), 0.0);
        match self.family {
            Family::Cosh => s.sign() * (ln2 + ell + half_root_term(winv)) + shift,
            Family::ScaledCosh { a } => {
                let base = ln2 + ell - a.ln() + half_root_term(a * winv);
                s.sign() * base + shift
            }
            Family::CoshSq => {
                let base = ln2 + ell + (2.0 - winv).ln() + half_root_term(winv / (2.0 - winv));
                0.5 * (s.sign() * base + shift)
            }
            Family::Exp { lambda } => ell - lambda.ln() + shift,
        }
    }

    /// log f(z), accurate where f(z) itself would overflow.
    pub fn log_evaluate(&self, z: C64) -> C64 {
        let log_cosh = |z: C64| {
            if z.re.abs() < 20.0 {
                z.cosh().ln()
            } else {
                let h = if z.re > 0.0 { z } else { -z };
                h + ((1.0 + (-2.0 * h).exp()) / 2.0).ln()
            }
        };
        match self.family {
            Family::Cosh => log_cosh(z),
            Family::CoshSq => 2.0 * log_cosh(z),
            Family::Exp { lambda } => lambda.ln() + z,
            Family::ScaledCosh { a } => a.ln() + log_cosh(z),
        }
    }

    /// f'(z)/f(z), finite where f(z) overflows.
    pub fn deriv_log(&self, z: C64) -> C64 {
        let tanh = |z: C64| if z.re.abs() < 20.0 { z.tanh() } else { C64::new(z.re.signum(), 0.0) };
        match self.family {
            Family::Cosh | Family::ScaledCosh { .. } => tanh(z),
            Family::CoshSq => 2.0 * tanh(z),
            Family::Exp { .. } => C64::new(1.0, 0.0),
        }
    }

    /// branch_value(s, f(z)) computed without forming f(z).
    pub fn branch_of_image(&self, cfg: &PartitionConfig, s: Symbol, z: C64) -> C64 {
        let ell = self.log_evaluate(z);
        let ell = C64::new(ell.re, wrap_into(ell.im, cfg.delta_angle));
        self.branch_from_log(s, ell, (-ell).exp())
    }

    /// Symbol of the fundamental domain containing z, valid anywhere on
    /// f⁻¹(𝒲), including the parts of domains that dip into D̄.
    pub fn domain_symbol(&self, cfg: &PartitionConfig, z: C64) -> Result<Symbol, SymbolError> {
        let ell = self.log_evaluate(z);
        if !(ell.re > cfg.disk_radius.ln()) {
            return Err(SymbolError::NotInTract(z));
        }
        if wrap_into(ell.im - cfg.delta_angle, PI).abs() <= DELTA_ANGLE_TOL {
            return Err(SymbolError::OnDomainBoundary(z));
        }
        self.match_branch(cfg, z, ell)
    }

    /// Label of the closed-form branch that reproduces z from f(z). Agrees
    /// with `domain_symbol` on f⁻¹(𝒲) and extends it to points whose image
    /// lies in D̄, where the labels are cut along preimages of the branch cuts.
    pub fn branch_symbol(&self, cfg: &PartitionConfig, z: C64) -> Result<Symbol, SymbolError> {
        let ell = self.log_evaluate(z);
        if !ell.is_finite() {
            return Err(SymbolError::NoBranchMatch(z));
        }
        self.match_branch(cfg, z, ell)
    }

    fn match_branch(&self, cfg: &PartitionConfig, z: C64, ell: C64) -> Result<Symbol, SymbolError> {
        let ell = C64::new(ell.re, wrap_into(ell.im, cfg.delta_angle));
        let winv = (-ell).exp();
        let tol = 1e-7 * (1.0 + z.norm());
        let (period, sides): (f64, &[Option<Side>]) = match self.family {
            Family::Cosh | Family::ScaledCosh { .. } => (TAU, &[Some(Side::R), Some(Side::L)]),
            Family::CoshSq => (PI, &[Some(Side::R), Some(Side::L)]),
            Family::Exp { .. } => (TAU, &[None]),
        };
        for &side in sides {
            let b0 = self.branch_from_log(Symbol { row: 0, side }, ell, winv);
            let row = ((z.im - b0.im) / period).round();
            if row.abs() > f64::from(i32::MAX) {
                continue;
            }
            let s = Symbol { row: row as i32, side };
            if (self.branch_from_log(s, ell, winv) - z).norm() <= tol {
                return Ok(s);
            }
        }
        Err(SymbolError::NoBranchMatch(z))
    }

    /// Symbol of z on the unbounded parts of fundamental domains outside D̄.
    pub fn symbol_of(&self, cfg: &PartitionConfig, z: C64) -> Result<Symbol, SymbolError> {
        if z.norm() <= cfg.disk_radius {
            return Err(SymbolError::InsideD(z));
        }
        if cfg.on_delta(z) {
            return Err(SymbolError::OnDelta(z));
        }
        self.domain_symbol(cfg, z)
    }

    pub fn inverse_branch(&self, cfg: &PartitionConfig, w: C64, s: Symbol) -> Result<C64, InverseError> {
        self.check_symbol(s)?;
        if !cfg.in_w(w) {
            return Err(InverseError::OutsideW(w));
        }
        let seed = self.branch_value(cfg, s, w);
        let z = self.newton(seed, w, 1e-15)?;
        let scale = w.norm().max(1.0);
        if (self.evaluate(z) - w).norm() > INVERSE_TOL * scale {
            return Err(InverseError::NoConvergence(z));
        }
        match self.domain_symbol(cfg, z) {
            Ok(found) if found == s => Ok(z),
            Ok(found) => Err(InverseError::WrongDomain { z, found: found.to_string(), wanted: s }),
            Err(e) => Err(InverseError::WrongDomain { z, found: e.to_string(), wanted: s }),
        }
    }

    /// Newton iteration for f(z) = w, stopping once the update is below
    /// `tol` relative to |z|, or once updates stall at rounding level.
    pub fn newton(&self, seed: C64, w: C64, tol: f64) -> Result<C64, InverseError> {
        let mut z = seed;
        let mut last = f64::INFINITY;
        for _ in 0..NEWTON_MAX_STEPS {
            let d = self.deriv(z);
            if d.norm() == 0.0 || !d.is_finite() {
                return Err(InverseError::NoConvergence(z));
            }
            let step = (self.evaluate(z) - w) / d;
            if !step.is_finite() {
                return Err(InverseError::NoConvergence(z));
            }
            z -= step;
            let size = step.norm();
            let scale = 1.0 + z.norm();
            if size <= tol * scale || (size <= STALL_TOL * scale && size >= 0.5 * last) {
                return Ok(z);
            }
            last = size;
        }
        Err(InverseError::NoConvergence(z))
    }
}

impl Holomorphic for MapModel {
    fn value(&self, z: C64) -> C64 {
        self.evaluate(z)
    }

    fn first_derivative(&self, z: C64) -> C64 {
        self.deriv(z)
    }
}

/// Representative of `angle` in the half-open window (phi − 2π, phi].
pub fn wrap_into(angle: f64, phi: f64) -> f64 {
    if !angle.is_finite() {
        return angle;
    }
    let mut a = angle;
    if (a - phi).abs() > 64.0 * TAU {
        a = phi - TAU + (a - phi).rem_euclid(TAU);
    }
    while a > phi {
        a -= TAU;
    }
    while a <= phi - TAU {
        a += TAU;
    }
    a
}

/// Logarithm whose cut runs along the ray of angle `phi`.
pub fn log_cut(w: C64, phi: f64) -> C64 {
    C64::new(w.norm().ln(), wrap_into(w.arg(), phi))
}

/// log((1 + √(1 − u²)) / 2), the correction turning log(2w) into arccosh(w)
/// when u = 1/w.
fn half_root_term(u: C64) -> C64 {
    ((1.0 + (1.0 - u * u).sqrt()) / 2.0).ln()
}

/// Radial slit δ = {r·e^{iφ} : r ≥ R_D} together with the disk radius and the
/// derived order on symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionConfig {
    pub disk_radius: f64,
    pub delta_angle: f64,
    pub horizon: u32,
    family: Family,
}

impl PartitionConfig {
    pub fn new(model: &MapModel, disk_radius: f64, delta_angle: f64, horizon: u32) -> Result<Self, ConfigError> {
        if !(disk_radius.is_finite() && disk_radius > 0.0 && delta_angle.is_finite()) {
            return Err(ConfigError::BadParameter);
        }
        if disk_radius < model.singular_radius {
            return Err(ConfigError::DiskTooSmall { r: disk_radius, needed: model.singular_radius });
        }
        let f0 = model.evaluate(C64::new(0.0, 0.0));
        if f0.norm() >= disk_radius {
            return Err(ConfigError::MissesOrigin { r: disk_radius, f0 });
        }
        let cfg = PartitionConfig { disk_radius, delta_angle, horizon, family: model.family };
        let dir = C64::from_polar(1.0, delta_angle);
        for j in 0..=2000 {
            let r = disk_radius * (1.0 + 99.0 * f64::from(j) / 2000.0);
            let z = r * dir;
            if model.evaluate(z).norm() > disk_radius {
                return Err(ConfigError::SlitMeetsTract(z));
            }
        }
        Ok(cfg)
    }

    /// Default partition: R_D = 3 and δ along the positive imaginary axis.
    pub fn standard(model: &MapModel) -> Result<Self, ConfigError> {
        Self::new(model, 3.0f64.max(2.0 * model.singular_radius), PI / 2.0, 32)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn on_delta(&self, w: C64) -> bool {
        if w.norm() < self.disk_radius {
            return false;
        }
        let d = wrap_into(w.arg() - self.delta_angle, PI);
        d.abs() <= DELTA_ANGLE_TOL
    }

    pub fn in_w(&self, w: C64) -> bool {
        w.is_finite() && w.norm() > self.disk_radius && !self.on_delta(w)
    }

    /// Counterclockwise angle from δ, in (0, 2π).
    pub fn angle_from_delta(&self, z: C64) -> f64 {
        let a = wrap_into(z.arg() - self.delta_angle, TAU);
        if a == 0.0 {
            TAU
        } else {
            a
        }
    }

    /// Height and side of the strip of `s` far out, read off the inverse
    /// branch at a large point in the middle of 𝒲.
    fn strip_centre(&self, s: Symbol) -> (f64, f64) {
        let model = MapModel::new(self.family).expect("validated family");
        let w = C64::from_polar(1e12, self.delta_angle - PI);
        let z = model.branch_value(self, s, w);
        (z.im, z.re.signum())
    }

    /// Point of the strip of `s` on the circle |z| = radius.
    pub fn strip_probe(&self, s: Symbol, radius: f64) -> C64 {
        let (y, side) = self.strip_centre(s);
        let x = (radius * radius - y * y).max(0.0).sqrt();
        C64::new(side * x, y)
    }

    /// Order of symbols: F < F̃ iff F precedes F̃ counterclockwise from δ at
    /// infinity, sampled on a circle large enough for both strips.
    pub fn compare_symbols(&self, a: Symbol, b: Symbol) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let (ya, _) = self.strip_centre(a);
        let (yb, _) = self.strip_centre(b);
        let radius = (100.0 * self.disk_radius).max(4.0 * ya.abs().max(yb.abs()) + 10.0);
        let ta = self.angle_from_delta(self.strip_probe(a, radius));
        let tb = self.angle_from_delta(self.strip_probe(b, radius));
        ta.partial_cmp(&tb).unwrap_or(Ordering::Equal)
    }
}

/// Density of the hyperbolic metric on ℂ \ D̄ for the round disk of radius R_D.
pub fn hyperbolic_density(r_d: f64, z: C64) -> Result<f64, MetricError> {
    let m = z.norm();
    if !(m > r_d) {
        return Err(MetricError::NotOutsideDisk(z, r_d));
    }
    Ok(1.0 / (m * (m / r_d).ln()))
}

/// |f′(z)|·ρ(f(z))/ρ(z), the derivative of f measured in the hyperbolic
/// metric of ℂ \ D̄.
pub fn expansion_norm<M: Holomorphic + ?Sized>(model: &M, r_d: f64, z: C64) -> Result<f64, MetricError> {
    let fz = model.value(z);
    let rho_z = hyperbolic_density(r_d, z)?;
    let rho_fz = hyperbolic_density(r_d, fz)?;
    Ok(model.first_derivative(z).norm() * rho_fz / rho_z)
}

pub(crate) fn unit(z: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 {
        z
    } else {
        z / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn evaluate_reference_points() {
        assert_eq!(MapModel::cosh_sq().evaluate(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
        assert_eq!(MapModel::cosh().evaluate(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
        assert!(MapModel::cosh_sq().evaluate(C64::new(0.0, PI / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_reference_points() {
        let z0 = C64::new(0.0, 0.0);
        assert_eq!(MapModel::cosh().derivative(z0, 1).unwrap(), z0);
        assert_eq!(MapModel::cosh_sq().derivative(z0, 1).unwrap(), z0);
        assert!(MapModel::cosh().derivative(z0, 9).is_err());
        assert!(MapModel::cosh().derivative(z0, 0).is_err());
    }

    #[test]
    fn local_degrees() {
        assert_eq!(MapModel::cosh_sq().local_degree(C64::new(0.0, 0.0)).unwrap(), 2);
        assert_eq!(MapModel::cosh().local_degree(C64::new(1.0, 1.0)).unwrap(), 1);
        assert_eq!(MapModel::cosh_sq().local_degree(C64::new(0.0, PI / 2.0)).unwrap(), 2);
    }

    #[test]
    fn symbols_parse_and_print() {
        for text in ["0R", "-3L", "12"] {
            let s: Symbol = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
        }
        assert!("R".parse::<Symbol>().is_err());
    }

    #[test]
    fn log_cut_window() {
        let phi = PI / 2.0;
        let v = log_cut(C64::new(-1.0, 0.0), phi);
        assert!(close(v, C64::new(0.0, -PI), 1e-15));
        let v = log_cut(C64::new(0.0, 1.0), phi);
        assert!(close(v, C64::new(0.0, PI / 2.0), 1e-15));
    }

    #[test]
    fn standard_partition_is_valid_for_shipped_families() {
        for m in [MapModel::cosh(), MapModel::cosh_sq()] {
            let cfg = PartitionConfig::standard(&m).unwrap();
            assert_eq!(cfg.disk_radius, 3.0);
        }
    }

    #[test]
    fn slit_through_a_tract_is_rejected() {
        let m = MapModel::cosh();
        assert!(matches!(PartitionConfig::new(&m, 3.0, 0.0, 8), Err(ConfigError::SlitMeetsTract(_))));
        assert!(matches!(PartitionConfig::new(&m, 0.5, PI / 2.0, 8), Err(ConfigError::DiskTooSmall { .. })));
    }
}
