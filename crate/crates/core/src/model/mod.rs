//! Domain types of the stratified model: the fact layer (world state), the
//! business and contract overlays, sourcements, and history records.

mod diagnostic;
mod digest;
mod history;
mod ids;
mod overlays;
mod sourcement;
mod validate;
mod world;

pub use diagnostic::{codes, Diagnostic, Severity};
pub use digest::{fingerprint, fingerprint_of, state_digest, Fingerprint};
pub use history::{EventEffects, EventKind, EventParameters, HistoryEvent, HistoryLog, StepMarker, Transfer};
pub use ids::*;
pub use overlays::{
    validate_layers, Agreement, BusinessConfig, ContractConfig, EntityRef, LabeledRefs, Layer, Promise,
};
pub use sourcement::{AttributeRecord, BasicSourcement, Sourcement, SourcementPortfolio, Stability, SOURCE_ATTRIBUTES};
pub use validate::{advisories, validate_state};
pub use world::*;
