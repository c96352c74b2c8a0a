//! Volt/var control toolkit: a Mamdani fuzzy inference engine, a textual rule
//! language, a discrete-time substation simulator (OLTC transformer, switched
//! capacitor bank, voltage-dependent loads, quantized telemetry), closed-loop
//! controllers, and the evaluation metrics used to compare them.

pub mod api;
pub mod control;
pub mod fis;
pub mod gridref;
pub mod metrics;
pub mod plant;
pub mod rules;
pub mod scenario;
