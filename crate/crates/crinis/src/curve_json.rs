//! Curve interchange format.
//!
//! A traced curve is stored as
//! `{"family","params","address","sign","level","points":[[t,re,im]],"markers":[…]}`
//! with every real rounded to 12 decimals.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::address::{parse_address, Sign, SignedAddress};
use crate::map_models::{Family, MapModel, C64};
use crate::ray_tracer::{Bristle, CriticalMarker, CurvePoint, TailCurve};

#[derive(Debug, Error)]
pub enum CurveJsonError {
    #[error("malformed curve JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("bad family parameter: {0}")]
    BadParameter(String),
    #[error("bad address: {0}")]
    Address(String),
    #[error("marker index {0} outside the curve")]
    MarkerIndex(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerDoc {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub deg: u32,
    pub bristle: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub family: String,
    pub params: Map<String, Value>,
    pub address: String,
    pub sign: String,
    pub level: usize,
    pub points: Vec<[f64; 3]>,
    pub markers: Vec<MarkerDoc>,
}

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.12}").parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Name and parameter object of a family.
pub fn family_params(family: Family) -> (String, Map<String, Value>) {
    let pair = |c: C64| json!([round12(c.re), round12(c.im)]);
    let mut m = Map::new();
    match family {
        Family::Exp { lambda } => {
            m.insert("lambda".into(), pair(lambda));
        }
        Family::ScaledCosh { a } => {
            m.insert("a".into(), pair(a));
        }
        Family::Cosh | Family::CoshSq => {}
    }
    (family.name().to_string(), m)
}

/// Builds a model from a family name and its optional complex parameter.
pub fn model_from_name(name: &str, param: Option<C64>) -> Result<MapModel, CurveJsonError> {
    let bad = |e: crate::map_models::ModelError| CurveJsonError::BadParameter(e.to_string());
    match (name, param) {
        ("cosh", None) => Ok(MapModel::cosh()),
        ("coshsq", None) => Ok(MapModel::cosh_sq()),
        ("exp", Some(l)) => MapModel::exp(l).map_err(bad),
        ("acosh", Some(a)) => MapModel::scaled_cosh(a).map_err(bad),
        ("cosh" | "coshsq", Some(_)) => Err(CurveJsonError::BadParameter(format!("{name} takes no parameter"))),
        ("exp" | "acosh", None) => Err(CurveJsonError::BadParameter(format!("{name} needs a parameter"))),
        _ => Err(CurveJsonError::UnknownFamily(name.to_string())),
    }
}

fn model_from_params(name: &str, params: &Map<String, Value>) -> Result<MapModel, CurveJsonError> {
    let key = match name {
        "exp" => Some("lambda"),
        "acosh" => Some("a"),
        _ => None,
    };
    if let Some(extra) = params.keys().find(|k| Some(k.as_str()) != key) {
        return Err(CurveJsonError::BadParameter(format!("unexpected parameter {extra:?}")));
    }
    let param = match key.and_then(|k| params.get(k)) {
        None => None,
        Some(v) => {
            let [re, im]: [f64; 2] = serde_json::from_value(v.clone())?;
            Some(C64::new(re, im))
        }
    };
    model_from_name(name, param)
}

impl CurveDoc {
    pub fn from_curve(model: &MapModel, curve: &TailCurve) -> Self {
        let (family, params) = family_params(model.family);
        CurveDoc {
            family,
            params,
            address: curve.signed.addr.to_string(),
            sign: curve.signed.sign.to_string(),
            level: curve.level,
            points: curve.points.iter().map(|p| [round12(p.t), round12(p.z.re), round12(p.z.im)]).collect(),
            markers: curve
                .markers
                .iter()
                .map(|m| MarkerDoc {
                    index: m.vertex_index,
                    re: round12(m.point.re),
                    im: round12(m.point.im),
                    deg: m.local_deg,
                    bristle: m.chosen_bristle.letter().to_string(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("curve documents serialize");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CurveJsonError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn model(&self) -> Result<MapModel, CurveJsonError> {
        model_from_params(&self.family, &self.params)
    }

    pub fn to_curve(&self) -> Result<TailCurve, CurveJsonError> {
        let addr = parse_address(&self.address).map_err(|e| CurveJsonError::Address(e.to_string()))?;
        let sign: Sign = self.sign.parse().map_err(CurveJsonError::Address)?;
        let points: Vec<CurvePoint> =
            self.points.iter().map(|&[t, re, im]| CurvePoint { t, z: C64::new(re, im) }).collect();
        let mut markers = Vec::with_capacity(self.markers.len());
        for m in &self.markers {
            if m.index >= points.len() {
                return Err(CurveJsonError::MarkerIndex(m.index));
            }
            let chosen_bristle = match m.bristle.as_str() {
                "L" => Bristle::Left,
                "R" => Bristle::Right,
                other => return Err(CurveJsonError::BadParameter(format!("bristle {other:?}"))),
            };
            markers.push(CriticalMarker {
                vertex_index: m.index,
                point: C64::new(m.re, m.im),
                local_deg: m.deg,
                chosen_bristle,
            });
        }
        Ok(TailCurve { signed: SignedAddress::new(addr, sign), level: self.level, points, markers })
    }
}
