use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crinis::address::parse_address;
use crinis::conformance::{reports_json, run_suite, SuiteOptions, CHECK_NAMES};
use crinis::curve_json::{model_from_name, CurveDoc};
use crinis::ray_tracer::{decompose_gamma, TraceError};
use crinis::svg::{render_svg, SvgOptions};
use crinis::{MapModel, PartitionConfig, Rect, Sign, SignedAddress, TailCurve, TraceParams, Tracer, C64};

#[derive(Parser)]
#[command(name = "crinis", version, about = "Trace dynamic-ray tails of cosh-type maps and check their combinatorics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the canonical tail of a signed address and write it as JSON.
    Trace(TraceArgs),
    /// Compare the two signed extensions of an address.
    Split(SplitArgs),
    /// Draw curves as an SVG figure.
    Render(RenderArgs),
    /// Run the conformance checks and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// cosh, coshsq, exp or acosh (default coshsq).
    #[arg(long)]
    family: Option<String>,
    /// Family parameter as `re,im` (λ for exp, a for acosh).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    param: Option<C64>,
    /// Radius R_D of the disk D.
    #[arg(long)]
    disk_radius: Option<f64>,
    /// Direction of the slit δ in radians.
    #[arg(long, allow_hyphen_values = true)]
    delta_angle: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Canonical-tail level N.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    bailout: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    crit_tol: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long)]
    anchor_radius: Option<f64>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Address such as "0R | 1L".
    #[arg(long)]
    address: String,
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    sign: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the curve to this SVG file.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    view: ViewArgs,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    address: String,
    /// Print both curves as a JSON array in the curve format.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ViewArgs {
    /// Visible window `re_min,re_max,im_min,im_max`.
    #[arg(long, value_parser = parse_view, allow_hyphen_values = true)]
    view: Option<Rect>,
    #[arg(long, default_value_t = 800)]
    width: u32,
    /// Depth of the grey layer of preimages of the real axis (0 disables it).
    #[arg(long, default_value_t = 2)]
    preimages: usize,
    /// Grid cells per side for the grey layer.
    #[arg(long, default_value_t = 400)]
    grid: usize,
    /// Leave out critical points.
    #[arg(long)]
    no_critical: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    common: Common,
    /// Curve JSON files.
    curves: Vec<PathBuf>,
    /// Addresses to trace and draw, repeatable.
    #[arg(long)]
    address: Vec<String>,
    /// Signs drawn for each address: +, - or both.
    #[arg(long, default_value = "both", allow_hyphen_values = true)]
    sign: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    view: ViewArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subset of expansion, cyclic_order, convergence, counting, bijection.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include runtimes in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    addresses: Option<usize>,
    /// Circle radius for the cyclic-order check, in units of R_D.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    terms: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    family: Option<String>,
    param: Option<[f64; 2]>,
    disk_radius: Option<f64>,
    delta_angle: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    trace: TraceConfig,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TraceConfig {
    depth: Option<usize>,
    level: Option<usize>,
    bailout: Option<f64>,
    step: Option<f64>,
    crit_tol: Option<f64>,
    newton_tol: Option<f64>,
    t_max: Option<f64>,
    t_min: Option<f64>,
    anchor_radius: Option<f64>,
}

enum Failure {
    Usage(String),
    Trace(String),
    Checks,
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        Failure::Trace(format!("tracer error: {e:?}: {e}"))
    }
}

struct Setup {
    model: MapModel,
    cfg: PartitionConfig,
    params: TraceParams,
    seed: u64,
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err("expected re or re,im".into()),
    }
}

fn parse_view(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c, d] if a < b && c < d && v.iter().all(|x| x.is_finite()) => Ok(Rect::new(*a, *b, *c, *d)),
        _ => Err("expected re_min,re_max,im_min,im_max with min < max".into()),
    }
}

fn setup(c: &Common) -> Result<Setup, Failure> {
    let file: RunConfig = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let family = c.family.clone().or(file.family).unwrap_or_else(|| "coshsq".into());
    let param = c.param.or(file.param.map(|[re, im]| C64::new(re, im)));
    let model = model_from_name(&family, param).map_err(|e| Failure::Usage(e.to_string()))?;
    let standard = PartitionConfig::standard(&model).map_err(|e| Failure::Usage(e.to_string()))?;
    let r_d = c.disk_radius.or(file.disk_radius).unwrap_or(standard.disk_radius);
    let angle = c.delta_angle.or(file.delta_angle).unwrap_or(standard.delta_angle);
    let cfg = PartitionConfig::new(&model, r_d, angle, standard.horizon).map_err(|e| Failure::Usage(e.to_string()))?;
    let d = TraceParams::default();
    let t = file.trace;
    let params = TraceParams {
        depth: c.depth.or(t.depth).unwrap_or(d.depth),
        level: c.level.or(t.level).unwrap_or(d.level),
        bailout: c.bailout.or(t.bailout).unwrap_or(d.bailout),
        step: c.step.or(t.step).unwrap_or(d.step),
        crit_tol: c.crit_tol.or(t.crit_tol).unwrap_or(d.crit_tol),
        newton_tol: c.newton_tol.or(t.newton_tol).unwrap_or(d.newton_tol),
        t_max: c.t_max.or(t.t_max).unwrap_or(d.t_max),
        t_min: c.t_min.or(t.t_min).unwrap_or(d.t_min),
        anchor_radius: c.anchor_radius.or(t.anchor_radius).unwrap_or(d.anchor_radius),
    };
    params.validate(&model).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Setup { model, cfg, params, seed: c.seed.or(file.seed).unwrap_or(1) })
}

fn signed(address: &str, sign: &str) -> Result<SignedAddress, Failure> {
    let addr = parse_address(address).map_err(|e| Failure::Usage(format!("--address: {e}")))?;
    let sign: Sign = sign.parse().map_err(|e| Failure::Usage(format!("--sign: {e}")))?;
    Ok(SignedAddress::new(addr, sign))
}

fn trace_curve(tracer: &Tracer, target: &SignedAddress, level: usize) -> Result<TailCurve, TraceError> {
    if level == 0 {
        Ok(tracer.trace_level0(&target.addr)?.with_sign(target.sign))
    } else {
        tracer.gamma_curve(target, level)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Trace(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn svg_options(v: &ViewArgs) -> SvgOptions {
    SvgOptions {
        view: v.view.unwrap_or(SvgOptions::default().view),
        width: v.width,
        preimage_depth: v.preimages,
        preimage_grid: v.grid,
        critical_points: !v.no_critical,
    }
}

fn cmd_trace(a: &TraceArgs) -> Result<(), Failure> {
    let s = setup(&a.common)?;
    let target = signed(&a.address, &a.sign)?;
    let tracer = Tracer::new(&s.model, &s.cfg, &s.params)?;
    let curve = trace_curve(&tracer, &target, s.params.level)?;
    emit(a.out.as_deref(), &CurveDoc::from_curve(&s.model, &curve).to_json())?;
    if let Some(path) = &a.svg {
        emit(Some(path), &render_svg(&s.model, &[curve], &svg_options(&a.view)))?;
    }
    Ok(())
}

fn fmt_z(z: C64) -> String {
    format!("{:.12}{:+.12}i", z.re, z.im)
}

fn cmd_split(a: &SplitArgs) -> Result<(), Failure> {
    let s = setup(&a.common)?;
    let plus = signed(&a.address, "+")?;
    let minus = SignedAddress::new(plus.addr.clone(), Sign::Minus);
    let tracer = Tracer::new(&s.model, &s.cfg, &s.params)?;
    let n = s.params.level;
    let gm = trace_curve(&tracer, &minus, n)?;
    let gp = trace_curve(&tracer, &plus, n)?;
    if a.json {
        let docs = [CurveDoc::from_curve(&s.model, &gm), CurveDoc::from_curve(&s.model, &gp)];
        let text = serde_json::to_string(&docs).expect("curve documents serialize") + "\n";
        return emit(a.out.as_deref(), &text);
    }
    let (dm, dp) = (decompose_gamma(&gm), decompose_gamma(&gp));
    let mut r = format!("address {}\nlevel {n}\n", plus.addr);
    if dm.critical_points.is_empty() && dp.critical_points.is_empty() && gm.zs() == gp.zs() {
        r.push_str("signs identical: no critical point on the curve at this level\n");
        if let Some(z) = gp.finite_end() {
            r += &format!("finite end {}\n", fmt_z(z));
        }
        return emit(a.out.as_deref(), &r);
    }
    if let (Some(c0), Some(_)) = (dp.critical_points.first(), dm.critical_points.first()) {
        let tail = &dp.unbounded_tail;
        r += &format!("c0 {}\n", fmt_z(*c0));
        r += &format!("shared tail: {} vertices, potential {:.6} to {:.6}\n", tail.len(),
            tail.first().map_or(f64::NAN, |p| p.t), tail.last().map_or(f64::NAN, |p| p.t));
        let shared = dm.unbounded_tail.len() == tail.len()
            && dm.unbounded_tail.iter().zip(tail).map(|(p, q)| (p.z - q.z).norm()).fold(0.0, f64::max) <= 1e-8;
        r += &format!("tails coincide: {}\n", if shared { "yes" } else { "no" });
    }
    for (label, d, g) in [("-", &dm, &gm), ("+", &dp, &gp)] {
        let piece = d.bristle_piece(0).or_else(|| {
            let c0 = *d.critical_points.first()?;
            let mut v: Vec<C64> = d.segments[0].iter().map(|p| p.z).collect();
            v.push(c0);
            Some(v)
        });
        match piece {
            Some(v) => {
                r += &format!("bristle {label}: {} vertices from {} to {}\n", v.len(), fmt_z(v[v.len() - 1]), fmt_z(v[0]));
            }
            None => r += &format!("bristle {label}: none, finite end {}\n", g.finite_end().map_or("-".into(), fmt_z)),
        }
    }
    emit(a.out.as_deref(), &r)
}

fn cmd_render(a: &RenderArgs) -> Result<(), Failure> {
    let mut curves = Vec::new();
    let mut model = None;
    for path in &a.curves {
        let text = fs::read_to_string(path).map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?;
        let doc = CurveDoc::parse(&text).map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?;
        model.get_or_insert(doc.model().map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?);
        curves.push(doc.to_curve().map_err(|e| Failure::Trace(format!("{}: {e}", path.display())))?);
    }
    let s = setup(&a.common)?;
    let model = match (model, &a.common.family) {
        (Some(m), None) => m,
        _ => s.model.clone(),
    };
    if !a.address.is_empty() {
        let cfg = PartitionConfig::new(&model, s.cfg.disk_radius, s.cfg.delta_angle, s.cfg.horizon)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let tracer = Tracer::new(&model, &cfg, &s.params)?;
        let signs = if a.sign == "both" { vec!["-", "+"] } else { vec![a.sign.as_str()] };
        for addr in &a.address {
            for sign in &signs {
                curves.push(trace_curve(&tracer, &signed(addr, sign)?, s.params.level)?);
            }
        }
    }
    emit(a.out.as_deref(), &render_svg(&model, &curves, &svg_options(&a.view)))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let s = setup(&a.common)?;
    if let Some(f) = &a.filter {
        if let Some(bad) = f.split(',').map(str::trim).find(|p| !CHECK_NAMES.contains(p)) {
            return Err(Failure::Usage(format!("unknown check {bad:?}; expected one of {}", CHECK_NAMES.join(", "))));
        }
    }
    let d = SuiteOptions::default();
    let opts = SuiteOptions {
        seed: s.seed,
        expansion_samples: a.samples.unwrap_or(d.expansion_samples),
        order_addresses: a.addresses.unwrap_or(d.order_addresses),
        order_radius: a.radius.unwrap_or(d.order_radius),
        convergence_terms: a.terms.unwrap_or(d.convergence_terms),
        window: d.window,
    };
    let reports = run_suite(&s.model, &s.cfg, &s.params, &opts, a.filter.as_deref())
        .map_err(|e| Failure::Trace(format!("check error: {e}")))?;
    emit(a.out.as_deref(), &reports_json(&reports, a.timing))?;
    for r in &reports {
        eprintln!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Trace(a) => cmd_trace(a),
        Command::Split(a) => cmd_split(a),
        Command::Render(a) => cmd_render(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Trace(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}
