//! Command-line front end for the `koenigs` library: net documents, OBJ
//! export, and the `koenigs` binary's generate/check/transform pipeline.

pub mod document;
pub mod obj;
pub mod report;
mod run;

pub use document::{DocError, LiftKind, MoutardBlock, NetDocument, SCHEMA_VERSION};
pub use obj::{export_obj, obj_string};
pub use run::{run, EXIT_DEGENERATE, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};
