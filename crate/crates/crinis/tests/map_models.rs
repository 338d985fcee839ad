use std::cmp::Ordering;
use std::f64::consts::PI;

use crinis::map_models::{expansion_norm, hyperbolic_density, Holomorphic, SymbolError};
use crinis::{MapModel, PartitionConfig, Rect, Symbol, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cosh_setup() -> (MapModel, PartitionConfig) {
    let m = MapModel::cosh();
    let cfg = PartitionConfig::standard(&m).unwrap();
    (m, cfg)
}

/// Strip test for cosh: (k,R) covers Im ∈ ((2k−3/2)π, (2k+1/2)π) with Re > 0,
/// (k,L) covers Im ∈ ((2k−1/2)π, (2k+3/2)π) with Re < 0.
fn cosh_strip_oracle(z: C64) -> Symbol {
    if z.re > 0.0 {
        let k = ((z.im / PI + 1.5) / 2.0).floor() as i32;
        Symbol::right(k)
    } else {
        let k = ((z.im / PI + 0.5) / 2.0).floor() as i32;
        Symbol::left(k)
    }
}

#[test]
fn coshsq_derivative_matches_finite_difference() {
    let m = MapModel::cosh_sq();
    let z = c(1.0, 0.0);
    let h = 1e-6;
    let fd = (m.evaluate(z + h) - m.evaluate(z - h)) / (2.0 * h);
    let d = m.derivative(z, 1).unwrap();
    assert!((d - fd).norm() < 1e-8);
    assert!((d - c(2f64.sinh(), 0.0)).norm() < 1e-12);
}

#[test]
fn higher_derivatives_match_finite_differences() {
    for m in [MapModel::cosh(), MapModel::cosh_sq(), MapModel::exp(c(0.5, 0.2)).unwrap()] {
        let z = c(0.3, -0.7);
        for order in 2..=4 {
            let h = 1e-4;
            let lo = m.derivative(z - h, order - 1).unwrap();
            let hi = m.derivative(z + h, order - 1).unwrap();
            let fd = (hi - lo) / (2.0 * h);
            let d = m.derivative(z, order).unwrap();
            assert!((d - fd).norm() < 1e-6 * (1.0 + d.norm()), "order {order}");
        }
    }
}

/// Brute-force oracle: Newton on f′ from a seed grid, deduplicated.
fn critical_oracle(m: &MapModel, bx: Rect) -> Vec<C64> {
    let mut found: Vec<C64> = Vec::new();
    let n = 40;
    for i in 0..=n {
        for j in 0..=n {
            let mut z = c(
                bx.re_min + (bx.re_max - bx.re_min) * i as f64 / n as f64,
                bx.im_min + (bx.im_max - bx.im_min) * j as f64 / n as f64,
            );
            for _ in 0..60 {
                let d2 = m.derivative(z, 2).unwrap();
                if d2.norm() == 0.0 {
                    break;
                }
                z -= m.derivative(z, 1).unwrap() / d2;
            }
            if m.derivative(z, 1).unwrap().norm() < 1e-12
                && bx.contains(z)
                && !found.iter().any(|f| (f - z).norm() < 1e-8)
            {
                found.push(z);
            }
        }
    }
    found.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    found
}

#[test]
fn critical_points_match_newton_oracle() {
    let cases = [
        (MapModel::cosh_sq(), Rect::new(-1.0, 1.0, -2.0, 2.0), 3),
        (MapModel::cosh(), Rect::new(-1.0, 1.0, -1.0, 1.0), 1),
        (MapModel::cosh(), Rect::new(-2.0, 2.0, -7.0, 7.0), 5),
    ];
    for (m, bx, count) in cases {
        let got = m.critical_points_in(&bx);
        let want = critical_oracle(&m, bx);
        assert_eq!(got.len(), count);
        assert_eq!(want.len(), count);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-10);
        }
    }
    let coshsq = MapModel::cosh_sq().critical_points_in(&Rect::new(-1.0, 1.0, -2.0, 2.0));
    for want in [c(0.0, -PI / 2.0), c(0.0, 0.0), c(0.0, PI / 2.0)] {
        assert!(coshsq.iter().any(|z| (z - want).norm() < 1e-12));
    }
    let e = MapModel::exp(c(1.0, 0.0)).unwrap();
    assert!(e.critical_points_in(&Rect::new(-5.0, 5.0, -5.0, 5.0)).is_empty());
}

#[test]
fn critical_values_are_attained_at_critical_points() {
    for m in [MapModel::cosh(), MapModel::cosh_sq(), MapModel::scaled_cosh(c(1.5, 0.5)).unwrap()] {
        let crit = m.critical_points_in(&Rect::new(-1.0, 1.0, -10.0, 10.0));
        for v in &m.critical_values {
            assert!(crit.iter().any(|z| (m.evaluate(*z) - v).norm() < 1e-12 && m.deriv(*z).norm() < 1e-12));
        }
        for v in m.critical_values.iter().chain(&m.asymptotic_values) {
            assert!(v.norm() <= m.singular_radius);
        }
    }
    for m in [MapModel::cosh(), MapModel::cosh_sq()] {
        assert!(m.asymptotic_values.is_empty());
    }
}

#[test]
fn symbol_examples() {
    let (m, cfg) = cosh_setup();
    assert_eq!(m.symbol_of(&cfg, c(5.0, 0.0)).unwrap(), Symbol::right(0));
    assert_eq!(m.symbol_of(&cfg, c(-5.0, 0.0)).unwrap(), Symbol::left(0));
    assert_eq!(m.symbol_of(&cfg, c(5.0, PI)).unwrap(), cosh_strip_oracle(c(5.0, PI)));
    assert_eq!(m.symbol_of(&cfg, c(5.0, PI)).unwrap(), Symbol::right(1));
}

#[test]
fn symbol_errors() {
    let (m, cfg) = cosh_setup();
    assert!(matches!(m.symbol_of(&cfg, c(1.0, 1.0)), Err(SymbolError::InsideD(_))));
    assert!(matches!(m.symbol_of(&cfg, c(0.0, 5.0)), Err(SymbolError::OnDelta(_))));
    assert!(matches!(m.symbol_of(&cfg, c(0.1, 5.0)), Err(SymbolError::NotInTract(_))));
}

#[test]
fn inverse_branch_examples() {
    let (m, cfg) = cosh_setup();
    let w = c(5f64.cosh(), 0.0);
    assert!((m.inverse_branch(&cfg, w, Symbol::right(0)).unwrap() - c(5.0, 0.0)).norm() < 1e-10);
    assert!((m.inverse_branch(&cfg, w, Symbol::left(0)).unwrap() - c(-5.0, 0.0)).norm() < 1e-10);
    let z = m.inverse_branch(&cfg, w, Symbol::right(1)).unwrap();
    let candidates: Vec<C64> = (-3..=3)
        .flat_map(|k| [c(5.0, 2.0 * PI * k as f64), c(-5.0, 2.0 * PI * k as f64)])
        .filter(|z| cosh_strip_oracle(*z) == Symbol::right(1))
        .collect();
    assert_eq!(candidates.len(), 1);
    assert!((z - candidates[0]).norm() < 1e-10);
}

#[test]
fn inverse_branch_rejects_points_outside_w() {
    let (m, cfg) = cosh_setup();
    assert!(m.inverse_branch(&cfg, c(1.0, 0.0), Symbol::right(0)).is_err());
    assert!(m.inverse_branch(&cfg, c(0.0, 10.0), Symbol::right(0)).is_err());
    assert!(m.inverse_branch(&cfg, c(10.0, 0.0), Symbol::bare(0)).is_err());
}

#[test]
fn forward_orbit_examples() {
    let sq = MapModel::cosh_sq();
    assert!(sq.forward_orbit(c(1.0, 0.0), 3, 1e8).escaped);
    let orbit = MapModel::cosh().forward_orbit(c(0.0, 0.0), 2, 1e8);
    assert!(!orbit.escaped);
    assert_eq!(orbit.points.len(), 3);
    assert!((orbit.points[2].re - 1.5430806348152437).abs() < 1e-15);
    let e = MapModel::exp(c(1.0, 0.0)).unwrap();
    let orbit = e.forward_orbit(c(0.0, 0.0), 2, 1e8);
    assert_eq!(orbit.points, vec![c(0.0, 0.0), c(1.0, 0.0), c(std::f64::consts::E, 0.0)]);
}

#[test]
fn forward_orbit_overflow_is_escape() {
    let orbit = MapModel::cosh().forward_orbit(c(5.0, 0.0), 10, f64::INFINITY);
    assert!(orbit.escaped);
    assert!(orbit.points.iter().all(|z| z.is_finite()));
}

#[test]
fn density_examples() {
    let e = std::f64::consts::E;
    assert!((hyperbolic_density(1.0, c(e, 0.0)).unwrap() - 1.0 / e).abs() < 1e-15);
    assert!((hyperbolic_density(2.0, c(0.0, 2.0 * e)).unwrap() - 1.0 / (2.0 * e)).abs() < 1e-15);
    let v = hyperbolic_density(1.0, c(10.0, 0.0)).unwrap();
    assert!((v - 1.0 / (10.0 * 10f64.ln())).abs() < 1e-15);
    assert!((v - 0.04343).abs() < 1e-5);
    assert!(hyperbolic_density(1.0, c(0.5, 0.0)).is_err());
}

/// Oracle for the density: pull back the Poincaré density of the punctured
/// unit disk, 1/(|u| log(1/|u|)), through u = R_D/z.
#[test]
fn density_matches_punctured_disk_pullback() {
    for (r, z) in [(3.0, c(4.0, 1.0)), (1.0, c(-2.0, 7.0)), (0.5, c(0.0, -0.6))] {
        let u = r / z;
        let du = r / (z * z);
        let rho = du.norm() / (u.norm() * (1.0 / u.norm()).ln());
        assert!((hyperbolic_density(r, z).unwrap() - rho).abs() < 1e-14 * rho.max(1.0));
    }
}

#[test]
fn expansion_norm_examples() {
    let m = MapModel::cosh();
    let z = c(5.0, 0.0);
    let v = expansion_norm(&m, 2.0, z).unwrap();
    let want = 5f64.sinh() * hyperbolic_density(2.0, c(5f64.cosh(), 0.0)).unwrap()
        / hyperbolic_density(2.0, z).unwrap();
    assert!((v - want).abs() < 1e-12 * want);
    assert!(v > 1.0);
}

struct Identity;

impl Holomorphic for Identity {
    fn value(&self, z: C64) -> C64 {
        z
    }
    fn first_derivative(&self, _z: C64) -> C64 {
        C64::new(1.0, 0.0)
    }
}

#[test]
fn expansion_norm_of_an_isometry_is_one() {
    let v = expansion_norm(&Identity, 3.0, c(4.0, 4.0)).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
}

#[test]
fn symbol_order_matches_sampled_angles() {
    let (_, cfg) = cosh_setup();
    let a = Symbol::left(1);
    let b = Symbol::right(0);
    let radius = 300.0;
    let angle = |z: C64| (z.arg() - PI / 2.0).rem_euclid(2.0 * PI);
    let pa = c(-(radius * radius - (2.5 * PI).powi(2)).sqrt(), 2.5 * PI);
    let pb = c((radius * radius - (0.5 * PI).powi(2)).sqrt(), -0.5 * PI);
    let want = angle(pa).partial_cmp(&angle(pb)).unwrap();
    assert_eq!(cfg.compare_symbols(a, b), want);
    assert_eq!(want, Ordering::Less);
}

#[test]
fn symbol_order_for_cosh_runs_left_rows_down_then_right_rows_up() {
    let (_, cfg) = cosh_setup();
    let mut symbols: Vec<Symbol> = (-3..=3).flat_map(|k| [Symbol::left(k), Symbol::right(k)]).collect();
    symbols.sort_by(|a, b| cfg.compare_symbols(*a, *b));
    let mut want: Vec<Symbol> = (-3..=3).rev().map(Symbol::left).collect();
    want.extend((-3..=3).map(Symbol::right));
    assert_eq!(symbols, want);
}

#[test]
fn scaled_cosh_and_exp_round_trip() {
    let models = [
        MapModel::scaled_cosh(c(0.8, 0.6)).unwrap(),
        MapModel::exp(c(0.3, -0.2)).unwrap(),
    ];
    for m in models {
        let cfg = PartitionConfig::standard(&m).unwrap();
        let symbols: Vec<Symbol> = if m.family.has_sides() {
            vec![Symbol::right(0), Symbol::left(-1), Symbol::right(2)]
        } else {
            vec![Symbol::bare(0), Symbol::bare(-2), Symbol::bare(3)]
        };
        for s in symbols {
            for w in [c(7.0, 0.5), c(-20.0, -3.0), c(4.0, -9.0)] {
                let z = m.inverse_branch(&cfg, w, s).unwrap();
                assert!((m.evaluate(z) - w).norm() < 1e-9);
                assert_eq!(m.domain_symbol(&cfg, z).unwrap(), s);
            }
        }
    }
}

fn point_in_w() -> impl Strategy<Value = C64> {
    (3.05f64..200.0, -1.5 * PI + 1e-6..0.5 * PI - 1e-6).prop_map(|(r, a)| C64::from_polar(r, a))
}

fn any_symbol() -> impl Strategy<Value = Symbol> {
    (-2i32..=2, any::<bool>()).prop_map(|(k, l)| if l { Symbol::left(k) } else { Symbol::right(k) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inverse_branch_round_trips(w in point_in_w(), s in any_symbol(), sq in any::<bool>()) {
        let m = if sq { MapModel::cosh_sq() } else { MapModel::cosh() };
        let cfg = PartitionConfig::standard(&m).unwrap();
        let z = m.inverse_branch(&cfg, w, s).unwrap();
        prop_assert!((m.evaluate(z) - w).norm() <= 1e-9 * w.norm().max(1.0));
        prop_assert_eq!(m.domain_symbol(&cfg, z).unwrap(), s);
    }

    #[test]
    fn cosh_type_maps_commute_with_conjugation(re in -20.0f64..20.0, im in -20.0f64..20.0, sq in any::<bool>()) {
        let m = if sq { MapModel::cosh_sq() } else { MapModel::cosh() };
        let z = c(re, im);
        let lhs = m.evaluate(z.conj());
        let rhs = m.evaluate(z).conj();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn degree_one_exactly_off_critical_points(re in -4.0f64..4.0, im in -4.0f64..4.0, sq in any::<bool>()) {
        let m = if sq { MapModel::cosh_sq() } else { MapModel::cosh() };
        let z = c(re, im);
        let scale = m.evaluate(z).norm().max(1.0);
        let deg = m.local_degree(z).unwrap();
        prop_assert_eq!(deg == 1, m.deriv(z).norm() > 1e-9 * scale);
    }

    #[test]
    fn symbol_of_agrees_with_strip_test(z in (3.5f64..60.0, 0.0f64..2.0 * PI).prop_map(|(r, a)| C64::from_polar(r, a))) {
        let (m, cfg) = cosh_setup();
        prop_assume!(m.evaluate(z).norm() > 4.0 && (z.arg() - PI / 2.0).abs() > 1e-3);
        prop_assert_eq!(m.symbol_of(&cfg, z).unwrap(), cosh_strip_oracle(z));
    }
}

#[test]
fn local_degree_at_all_critical_points_of_a_box() {
    for m in [MapModel::cosh(), MapModel::cosh_sq()] {
        let crit = m.critical_points_in(&Rect::new(-10.0, 10.0, -10.0, 10.0));
        assert!(!crit.is_empty());
        for z in crit {
            assert_eq!(m.local_degree(z).unwrap(), 2);
        }
    }
}
