use crinis::address::{format_address, parse_address};
use crinis::hands::{
    address_interval, assign_hand, assign_hand_with, build_partition, hand_of_point, inverse_chain, removed_set,
    sample_interval, tie_break, witness_addresses, EscapingSingularData, Hand, HandCase, HandError, ProbeOptions,
    SideFlag,
};
use crinis::{ExternalAddress, MapModel, PartitionConfig, Sign, SignedAddress, TraceParams, Tracer, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn signed(text: &str, sign: Sign) -> SignedAddress {
    SignedAddress::new(parse_address(text).unwrap(), sign)
}

fn partition(m: &MapModel) -> (PartitionConfig, EscapingSingularData) {
    build_partition(m, &TraceParams::default()).unwrap()
}

fn index_of(esd: &EscapingSingularData, z: C64) -> usize {
    esd.points.iter().position(|p| (p - z).norm() < 1e-12).unwrap()
}

#[test]
fn escaping_singular_values() {
    for (m, expected) in [(MapModel::cosh(), [-1.0, 1.0]), (MapModel::cosh_sq(), [0.0, 1.0])] {
        let (cfg, esd) = partition(&m);
        let mut pts: Vec<f64> = esd.points.iter().map(|z| z.re).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, expected);
        assert!(esd.points.iter().all(|z| z.im == 0.0));
        assert_eq!(cfg.disk_radius, 3.0);
        assert!((cfg.delta_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        for (z, tail) in esd.points.iter().zip(&esd.tails) {
            assert!((tail.points[0].z - z).norm() <= 1e-8, "tail of {z} starts at {}", tail.points[0].z);
        }
    }
}

#[test]
fn removed_sets() {
    let m = MapModel::cosh();
    let (_, esd) = partition(&m);
    assert!(removed_set(&esd, 0).is_empty());
    for n in 0..=8 {
        assert_eq!(removed_set(&esd, n).is_empty(), n != 3, "level {n}");
    }
    assert_eq!(removed_set(&esd, 3).len(), 2);
    assert_eq!(esd.removed_indices(3), esd.removed_indices(3));

    let m = MapModel::cosh_sq();
    let (_, esd) = partition(&m);
    assert!(removed_set(&esd, 0).is_empty());
    assert!(removed_set(&esd, 1).is_empty());
    assert_eq!(esd.removed_indices(2), &[index_of(&esd, c(1.0, 0.0))]);
}

#[test]
fn point_mapped_onto_removed_tail_is_excluded() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    assert_eq!(hand_of_point(&m, &cfg, &esd, c(0.8, 0.0), 3), Err(HandError::NotInW { k: 1 }));
    assert!(hand_of_point(&m, &cfg, &esd, c(0.8, 0.0), 2).is_ok());
}

#[test]
fn removed_tail_separates_hands() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let up = hand_of_point(&m, &cfg, &esd, c(0.8, 1e-7), 3).unwrap();
    let down = hand_of_point(&m, &cfg, &esd, c(0.8, -1e-7), 3).unwrap();
    assert_eq!(up.itinerary, down.itinerary);
    let differing: Vec<usize> = (0..up.side_flags.len()).filter(|&i| up.side_flags[i] != down.side_flags[i]).collect();
    assert_eq!(differing.len(), 1);
    let i = differing[0];
    assert_eq!((up.side_flags[i], down.side_flags[i]), (SideFlag::Above, SideFlag::Below));
}

#[test]
fn hand_display_and_json() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let h = hand_of_point(&m, &cfg, &esd, c(1.5, 1e-6), 3).unwrap();
    assert_eq!(h.to_string(), "0R 0R 0R 0R[AA]");
    let json = serde_json::to_string(&h).unwrap();
    assert_eq!(json, r#"{"level":3,"itinerary":["0R","0R","0R","0R"],"sides":["A","A"]}"#);
}

#[test]
fn level0_hands_are_fundamental_domains() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [MapModel::cosh(), MapModel::cosh_sq()] {
        let (cfg, esd) = partition(&m);
        let mut checked = 0;
        while checked < 10_000 {
            let z = c(rng.gen_range(-6.0..6.0), rng.gen_range(-12.0..12.0));
            let Ok(s) = m.domain_symbol(&cfg, z) else { continue };
            let h = hand_of_point(&m, &cfg, &esd, z, 0).unwrap();
            assert_eq!(h, Hand { level: 0, itinerary: vec![s], side_flags: vec![] });
            checked += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hands_shift_under_f(re in -3.0..3.0f64, im in -4.0..4.0f64, n in 1usize..=4, family in 0usize..2) {
        let m = if family == 0 { MapModel::cosh() } else { MapModel::cosh_sq() };
        let (cfg, esd) = partition(&m);
        let z = c(re, im);
        if let Ok(h) = hand_of_point(&m, &cfg, &esd, z, n) {
            let image = hand_of_point(&m, &cfg, &esd, m.evaluate(z), n - 1).unwrap();
            prop_assert_eq!(&image.itinerary[..], &h.itinerary[1..]);
            let first_block = esd.removed_indices(n).len();
            prop_assert_eq!(&image.side_flags[..], &h.side_flags[first_block..]);

            let q = z + c(1e-5, 0.0);
            if hand_of_point(&m, &cfg, &esd, q, n).as_ref() == Ok(&h) {
                prop_assert!(m.evaluate(q) != m.evaluate(z));
            }
        }
    }
}

#[test]
fn curves_inside_a_hand() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let p = TraceParams::default();
    let tr = Tracer::new(&m, &cfg, &p).unwrap();
    let up = index_of(&esd, c(1.0, 0.0));
    for (sign, flag) in [(Sign::Plus, SideFlag::Above), (Sign::Minus, SideFlag::Below)] {
        for n in 0..=4 {
            let g = tr.gamma_curve(&signed("| 0R", sign), n).unwrap();
            let a = assign_hand(&tr, &esd, &g).unwrap();
            assert_eq!(a.case, HandCase::Interior);
            assert_eq!(a.hand.itinerary, vec![parse_address("| 0R").unwrap().first(); n + 1]);
            assert!(a.witnesses.is_none());
            if n >= 3 {
                assert_eq!(a.hand.side_flags[up], flag, "n = {n}");
            }
        }
    }
}

#[test]
fn curve_on_a_removed_tail_uses_the_tie_break() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let p = TraceParams::default();
    let tr = Tracer::new(&m, &cfg, &p).unwrap();
    let up = index_of(&esd, c(1.0, 0.0));
    let opts = ProbeOptions { level: Some(3), ..ProbeOptions::default() };
    for (sign, flag) in [(Sign::Plus, SideFlag::Above), (Sign::Minus, SideFlag::Below)] {
        let target = signed("| 0R", sign);
        let g = tr.gamma_curve(&target, 2).unwrap();
        let a = assign_hand_with(&tr, &esd, &g, &opts).unwrap();
        assert_eq!(a.case, HandCase::Boundary);
        assert_eq!(a.hand.side_flags[up], flag);
        let (chosen, rejected) = a.witnesses.clone().unwrap();
        assert!(tie_break(&cfg, &target.addr, sign, &chosen, &rejected).unwrap());

        let mut other = a.hand.clone();
        other.side_flags[up] = if flag == SideFlag::Above { SideFlag::Below } else { SideFlag::Above };
        let ups = witness_addresses(&tr, &esd, &a.hand, &target.addr, 3);
        let downs = witness_addresses(&tr, &esd, &other, &target.addr, 3);
        assert!(ups.len() >= 2 && downs.len() >= 2, "{ups:?} {downs:?}");
        for u in &ups {
            for w in &downs {
                assert!(tie_break(&cfg, &target.addr, sign, u, w).unwrap(), "{} {}", format_address(u), format_address(w));
            }
        }
    }
}

#[test]
fn assignment_is_stable_under_refinement() {
    let p = TraceParams::default();
    for m in [MapModel::cosh(), MapModel::cosh_sq()] {
        let (cfg, esd) = partition(&m);
        let tr = Tracer::new(&m, &cfg, &p).unwrap();
        for (text, sign, n, level) in [("| 0R", Sign::Plus, 3, None), ("| 0R", Sign::Minus, 2, Some(3)), ("1R | 0R", Sign::Plus, 2, None)] {
            let g = tr.gamma_curve(&signed(text, sign), n).unwrap();
            let coarse = ProbeOptions { level, ..ProbeOptions::default() };
            let fine = ProbeOptions { eps: coarse.eps / 2.0, samples: coarse.samples * 2, level };
            match assign_hand_with(&tr, &esd, &g, &coarse) {
                Ok(a) => assert_eq!(a.hand, assign_hand_with(&tr, &esd, &g, &fine).unwrap().hand),
                Err(e) => assert!(matches!(e, HandError::NoProbes), "{e:?}"),
            }
        }
    }
}

#[test]
fn base_interval_brackets_the_target() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let target = signed("| 0R", Sign::Plus);
    let i = address_interval(&cfg, &esd, &target, 0).unwrap();
    assert_eq!(format_address(&i.lo.addr), "0R | -1R");
    assert_eq!(format_address(&i.hi.addr), "0R | 1R");
    assert_eq!((i.lo.sign, i.hi.sign), (Sign::Minus, Sign::Plus));
    assert!(i.contains(&cfg, &target));
}

#[test]
fn boundary_target_gets_a_one_sided_interval() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    for n in 3..=4 {
        let plus = address_interval(&cfg, &esd, &signed("| 0R", Sign::Plus), n).unwrap();
        assert_eq!(plus.lo, signed("| 0R", Sign::Minus));
        let minus = address_interval(&cfg, &esd, &signed("| 0R", Sign::Minus), n).unwrap();
        assert_eq!(minus.hi, signed("| 0R", Sign::Plus));
    }
}

fn inside_or_endpoint(cfg: &PartitionConfig, outer: &crinis::AddressInterval, p: &SignedAddress) -> bool {
    *p == outer.lo || *p == outer.hi || outer.contains(cfg, p)
}

#[test]
fn intervals_contain_target_and_shrink_along_the_recursion() {
    for (m, targets) in [
        (MapModel::cosh(), vec![("| 0R", Sign::Plus), ("| 0R", Sign::Minus), ("1R | 0R", Sign::Plus), ("-1L | 1R", Sign::Minus)]),
        (MapModel::cosh_sq(), vec![("| 0R", Sign::Plus), ("| 1R", Sign::Minus), ("2L | 0R", Sign::Plus)]),
    ] {
        let (cfg, esd) = partition(&m);
        for (text, sign) in targets {
            let target = signed(text, sign);
            for n in 1..=4 {
                let i = address_interval(&cfg, &esd, &target, n).unwrap();
                assert!(i.contains(&cfg, &target), "{text} {n}");
                let shifted = SignedAddress::new(target.addr.shift(), sign);
                let outer = address_interval(&cfg, &esd, &shifted, n - 1).unwrap().prepend(target.addr.first());
                assert!(inside_or_endpoint(&cfg, &outer, &i.lo) && inside_or_endpoint(&cfg, &outer, &i.hi), "{text} {n}");
            }
        }
    }
}

#[test]
fn sampled_interval_members_share_the_hand() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let p = TraceParams::default();
    let tr = Tracer::new(&m, &cfg, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (text, sign, n) in [("| 0R", Sign::Plus, 3), ("| 0R", Sign::Minus, 2), ("1R | 0R", Sign::Plus, 1)] {
        let target = signed(text, sign);
        let hand = assign_hand(&tr, &esd, &tr.gamma_curve(&target, n).unwrap()).unwrap().hand;
        let i = address_interval(&cfg, &esd, &target, n).unwrap();
        let members = sample_interval(&cfg, &i, &mut rng, 5);
        assert_eq!(members.len(), 5);
        for a in members {
            assert!(i.contains(&cfg, &a));
            let g = tr.gamma_curve(&a, n).unwrap();
            let got = assign_hand(&tr, &esd, &g).unwrap();
            assert_eq!(got.hand, hand, "{a}");
        }
    }
}

#[test]
fn single_step_chain_is_the_inverse_branch() {
    let m = MapModel::cosh();
    let (cfg, _) = partition(&m);
    let target = signed("1R | 0R", Sign::Plus);
    for w in [c(30.0, 0.3), c(8.0, -1.0), c(100.0, 0.2)] {
        let z = inverse_chain(&m, &cfg, &target, 1, w).unwrap();
        let direct = m.inverse_branch(&cfg, w, target.addr.first()).unwrap();
        assert!((z - direct).norm() <= 1e-12 * (1.0 + z.norm()), "{z} {direct}");
    }
}

#[test]
fn chain_round_trip_and_hand() {
    let p = TraceParams::default();
    for m in [MapModel::cosh(), MapModel::cosh_sq()] {
        let (cfg, esd) = partition(&m);
        let tr = Tracer::new(&m, &cfg, &p).unwrap();
        for (sign, dy) in [(Sign::Plus, 0.3), (Sign::Minus, -0.3)] {
            let target = signed("| 0R", sign);
            for n in 1..=4 {
                let w = c(30.0, dy);
                let z = inverse_chain(&m, &cfg, &target, n, w).unwrap();
                let mut u = z;
                for _ in 0..n {
                    u = m.evaluate(u);
                }
                assert!((u - w).norm() <= 1e-9 * w.norm(), "n = {n}: {u}");
                let expected = assign_hand(&tr, &esd, &tr.gamma_curve(&target, n).unwrap()).unwrap().hand;
                assert_eq!(hand_of_point(&m, &cfg, &esd, z, n).unwrap(), expected, "n = {n}");
            }
        }
    }
}

#[test]
fn chain_rejects_points_outside_the_domain() {
    let m = MapModel::cosh();
    let (cfg, _) = partition(&m);
    let target = signed("| 0R", Sign::Plus);
    assert!(matches!(inverse_chain(&m, &cfg, &target, 2, c(1.0, 0.0)), Err(HandError::OutsideDomain(_))));
    assert!(matches!(inverse_chain(&m, &cfg, &target, 2, c(0.0, 30.0)), Err(HandError::OutsideDomain(_))));
}

#[test]
fn chain_agrees_across_the_interval() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = signed("| 0R", Sign::Plus);
    let mut compared = 0;
    for n in 1..=4 {
        let i = address_interval(&cfg, &esd, &target, n).unwrap();
        for a in sample_interval(&cfg, &i, &mut rng, 10) {
            for w in [c(30.0, 0.3), c(12.0, 1.0)] {
                if let (Ok(x), Ok(y)) = (inverse_chain(&m, &cfg, &target, n, w), inverse_chain(&m, &cfg, &a, n, w)) {
                    assert!((x - y).norm() <= 1e-9, "{a}: {x} vs {y}");
                    compared += 1;
                }
            }
        }
    }
    assert!(compared >= 40, "{compared}");
}

#[test]
fn witnesses_are_distinct_from_the_target() {
    let m = MapModel::cosh();
    let (cfg, esd) = partition(&m);
    let p = TraceParams::default();
    let tr = Tracer::new(&m, &cfg, &p).unwrap();
    let h = hand_of_point(&m, &cfg, &esd, c(1.5, 1e-6), 3).unwrap();
    let s: ExternalAddress = parse_address("0R 0R 0R 0R | 1R").unwrap();
    assert!(witness_addresses(&tr, &esd, &h, &s, 4).iter().all(|a| *a != s));
}
