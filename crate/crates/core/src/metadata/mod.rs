//! Metadata schema, validation, crosswalk and serialization.

pub mod crosswalk;
pub mod manifest;
pub mod record;
pub mod registry;
pub mod validate;
pub mod xml;

pub use crosswalk::{crosswalk_to_dc, DcRecord, InvalidRecord};
pub use record::{FieldKey, MetadataField, MetadataRecord};
pub use registry::{DataType, Schema, SchemaRegistry};
pub use validate::{validate_record, ValidationReport, Violation, ViolationCode};
