//! File formats: edge lists in, model artifacts and plot data out.

mod artifact;
mod edgelist;
mod plot;

pub use artifact::{
    fingerprint, sha256_hex, ConfigRecord, FusedRecord, ModelArtifact, ModelKind, ViewRecord,
    SCHEMA_VERSION,
};
pub use edgelist::{parse_edge_list, write_edge_list, EdgeListDocument};
pub use plot::{
    arrows_csv, credible_ellipse, ellipses_csv, positions_csv, svg_scatter, Ellipse, PositionLayer,
    ScatterPlot, CHI2_2DF_95,
};
