use crinis::address::parse_address;
use crinis::svg::{preimage_segments, render_svg, SvgOptions};
use crinis::{MapModel, PartitionConfig, Rect, Sign, SignedAddress, TraceParams, Tracer, C64};

fn well_formed(svg: &str) {
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains(r#"version="1.1""#));
    assert!(svg.trim_end().ends_with("</svg>"));
    for tag in ["g", "svg", "polyline"] {
        let open = svg.matches(&format!("<{tag} ")).count() + svg.matches(&format!("<{tag}>")).count();
        assert_eq!(open, svg.matches(&format!("</{tag}>")).count(), "{tag}");
    }
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
}

#[test]
fn empty_figure_has_axes_only() {
    let opts = SvgOptions { preimage_depth: 0, ..SvgOptions::default() };
    let svg = render_svg(&MapModel::cosh(), &[], &opts);
    well_formed(&svg);
    assert!(svg.contains(r#"<g id="axes""#));
    assert!(!svg.contains("<polyline"));
    assert!(!svg.contains("preimages"));
}

#[test]
fn critical_points_drawn_as_dots() {
    let m = MapModel::cosh_sq();
    let opts = SvgOptions { preimage_depth: 0, view: Rect::new(-1.0, 1.0, -2.0, 2.0), ..SvgOptions::default() };
    let svg = render_svg(&m, &[], &opts);
    assert_eq!(svg.matches(r#"r="3.5""#).count(), 3);
    let none = render_svg(&m, &[], &SvgOptions { critical_points: false, ..opts });
    assert!(!none.contains("<circle"));
}

#[test]
fn preimages_of_the_real_line() {
    let m = MapModel::cosh();
    let view = Rect::new(-2.0, 2.0, 0.2, 2.9);
    let segs = preimage_segments(&m, &view, 1, 200);
    assert!(!segs.is_empty());
    for (a, b) in segs {
        for z in [a, b] {
            let near_axis = z.re.abs() < 0.03 || (z.im - std::f64::consts::PI).abs() < 0.03;
            assert!(near_axis || m.evaluate(z).im.abs() < 0.05 * (1.0 + m.evaluate(z).norm()), "{z}");
        }
    }
    assert!(preimage_segments(&m, &view, 1, 200).iter().any(|(a, _)| (a.im - std::f64::consts::FRAC_PI_2).abs() > 0.5 && a.re.abs() < 0.03));
}

#[test]
fn splitting_figure_is_deterministic() {
    let m = MapModel::cosh_sq();
    let cfg = PartitionConfig::standard(&m).unwrap();
    let p = TraceParams::default();
    let t = Tracer::new(&m, &cfg, &p).unwrap();
    let mut curves = Vec::new();
    for a in ["| 0R", "| 0L", "0L | 0R", "0R | 0L"] {
        for s in [Sign::Minus, Sign::Plus] {
            curves.push(t.gamma_curve(&SignedAddress::new(parse_address(a).unwrap(), s), 6).unwrap());
        }
    }
    let opts = SvgOptions { view: Rect::around(C64::new(0.0, 0.0), 2.5), preimage_grid: 120, ..SvgOptions::default() };
    let a = render_svg(&m, &curves, &opts);
    well_formed(&a);
    assert_eq!(a.matches("<polyline").count(), 8);
    assert!(a.contains("<title>| 0R + level 6</title>"));
    assert_eq!(a, render_svg(&m, &curves, &opts));
}
