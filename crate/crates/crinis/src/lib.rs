//! Dynamic rays and signed addresses for criniferous entire functions of
//! cosine and exponential type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod address;
pub mod conformance;
pub mod curve_json;
pub mod geometry;
pub mod hands;
pub mod map_models;
pub mod ray_tracer;
pub mod svg;

pub use address::{AddressInterval, ExternalAddress, Sign, SignedAddress, SymbolOrdering};
pub use map_models::{Family, MapModel, PartitionConfig, Rect, Side, Symbol, C64};
pub use ray_tracer::{CriticalMarker, CurvePoint, TailCurve, TraceParams, Tracer};
