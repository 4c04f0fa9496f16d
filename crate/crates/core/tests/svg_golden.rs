use std::path::Path;

use lsjm_core::io::{svg_scatter, ScatterPlot};
use lsjm_core::NodeSet;
use nalgebra::DMatrix;

/// Set `UPDATE_GOLDEN=1` to rewrite the reference file after an intended
/// change to the renderer.
#[test]
fn scatter_matches_golden_file() {
    let nodes = NodeSet::new(["a", "b", "c<&>"]).unwrap();
    let positions = DMatrix::from_row_slice(3, 2, &[0.5, -0.25, -1.5, 0.75, 1.0, 1.25]);
    let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.02]);
    let mut plot = ScatterPlot::from_positions("golden", &nodes, &positions, &cov);
    plot.arrows = vec![((0.5, -0.25), (0.0, 0.0))];
    let svg = svg_scatter(&plot);

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/scatter.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(svg, golden);
}
