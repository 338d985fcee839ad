//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export takes plain strings and numbers and returns a string: curve
//! JSON, an SVG document, or a JSON description of a point.

use serde_json::json;
use wasm_bindgen::prelude::*;

use crinis::address::parse_address;
use crinis::curve_json::{model_from_name, CurveDoc};
use crinis::hands::{build_partition, hand_of_point};
use crinis::ray_tracer::count_signed_addresses;
use crinis::svg::{render_svg, SvgOptions};
use crinis::{MapModel, PartitionConfig, Rect, Sign, SignedAddress, TailCurve, TraceParams, Tracer, C64};

const MAX_LEVEL: usize = 8;

fn model(family: &str, param: &str) -> Result<MapModel, String> {
    let param = param.trim();
    let value = if param.is_empty() {
        None
    } else {
        let parts: Vec<f64> = param.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("parameter: {e}"))).collect::<Result<_, _>>()?;
        match parts.as_slice() {
            [re] => Some(C64::new(*re, 0.0)),
            [re, im] => Some(C64::new(*re, *im)),
            _ => return Err("parameter: expected re or re,im".into()),
        }
    };
    model_from_name(family, value).map_err(|e| e.to_string())
}

fn params(level: usize) -> Result<TraceParams, String> {
    if level > MAX_LEVEL {
        return Err(format!("level is limited to {MAX_LEVEL} in the demo"));
    }
    Ok(TraceParams { level, ..TraceParams::default() })
}

fn curve(tracer: &Tracer, target: &SignedAddress, level: usize) -> Result<TailCurve, String> {
    let r = if level == 0 {
        tracer.trace_level0(&target.addr).map(|c| c.with_sign(target.sign))
    } else {
        tracer.gamma_curve(target, level)
    };
    r.map_err(|e| e.to_string())
}

/// Curve JSON of the level-`level` canonical tail of `address` with `sign`.
pub fn trace_json(family: &str, param: &str, address: &str, sign: &str, level: usize) -> Result<String, String> {
    let m = model(family, param)?;
    let cfg = PartitionConfig::standard(&m).map_err(|e| e.to_string())?;
    let p = params(level)?;
    let tracer = Tracer::new(&m, &cfg, &p).map_err(|e| e.to_string())?;
    let addr = parse_address(address).map_err(|e| e.to_string())?;
    let sign: Sign = sign.parse()?;
    Ok(CurveDoc::from_curve(&m, &curve(&tracer, &SignedAddress::new(addr, sign), level)?).to_json())
}

/// SVG of both signed curves for every address in `addresses` (one per line).
pub fn render_figure(
    family: &str,
    param: &str,
    addresses: &str,
    level: usize,
    view: [f64; 4],
    preimages: usize,
) -> Result<String, String> {
    let m = model(family, param)?;
    let cfg = PartitionConfig::standard(&m).map_err(|e| e.to_string())?;
    let p = params(level)?;
    let tracer = Tracer::new(&m, &cfg, &p).map_err(|e| e.to_string())?;
    let [a, b, c, d] = view;
    if !(a < b && c < d) {
        return Err("empty view".into());
    }
    let mut curves = Vec::new();
    for line in addresses.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let addr = parse_address(line).map_err(|e| format!("{line}: {e}"))?;
        for sign in [Sign::Minus, Sign::Plus] {
            curves.push(curve(&tracer, &SignedAddress::new(addr.clone(), sign), level)?);
        }
    }
    let opts = SvgOptions { view: Rect::new(a, b, c, d), width: 640, preimage_depth: preimages.min(3), preimage_grid: 240, critical_points: true };
    Ok(render_svg(&m, &curves, &opts))
}

/// Fundamental domain, signed-address count and level-`level` hand of z.
pub fn inspect_point(family: &str, param: &str, re: f64, im: f64, level: usize) -> Result<String, String> {
    let m = model(family, param)?;
    let p = params(level)?;
    let z = C64::new(re, im);
    let (cfg, esd) = build_partition(&m, &p).map_err(|e| e.to_string())?;
    let symbol = m.symbol_of(&cfg, z).map(|s| s.to_string()).map_err(|e| e.to_string());
    let count = count_signed_addresses(&m, z, 64, &p).map_err(|e| e.to_string());
    let hand = hand_of_point(&m, &cfg, &esd, z, level).map_err(|e| e.to_string());
    let mut v = json!({ "z": [re, im], "image": [m.evaluate(z).re, m.evaluate(z).im] });
    let put = |v: &mut serde_json::Value, key: &str, r: Result<serde_json::Value, String>| match r {
        Ok(x) => v[key] = x,
        Err(e) => v[format!("{key}_error")] = json!(e),
    };
    put(&mut v, "symbol", symbol.map(|s| json!(s)));
    put(&mut v, "signed_addresses", count.map(|c| json!(c)));
    put(&mut v, "hand", hand.map(|h| json!(h)));
    Ok(v.to_string())
}

#[wasm_bindgen]
pub fn trace(family: &str, param: &str, address: &str, sign: &str, level: usize) -> Result<String, JsValue> {
    trace_json(family, param, address, sign, level).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn render(
    family: &str,
    param: &str,
    addresses: &str,
    level: usize,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    preimages: usize,
) -> Result<String, JsValue> {
    render_figure(family, param, addresses, level, [re_min, re_max, im_min, im_max], preimages)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn inspect(family: &str, param: &str, re: f64, im: f64, level: usize) -> Result<String, JsValue> {
    inspect_point(family, param, re, im, level).map_err(|e| JsValue::from_str(&e))
}
