//! Fixtures shared by the benchmarks.

use midband_core::{
    render_tensor, sample_link, AngularGrid, FrequencyGrid, FrequencyScanTensor, LinkGeometry, LosClass, ModelParams,
    PatternModel,
};

/// Six-tap synthetic link at 143.6 m rendered with the default horn pattern.
pub fn link_fixture(grid: FrequencyGrid, angles: AngularGrid) -> (LinkGeometry, FrequencyScanTensor) {
    let geom = LinkGeometry::new("Rx5", 143.6, LosClass::OLoS).expect("valid geometry");
    let link = sample_link(&ModelParams::default(), &geom, &angles, 6, 4).expect("default model samples");
    let tensor = render_tensor(&link.mpcs, &grid, &angles, &PatternModel::Gaussian(Default::default()));
    (geom, tensor)
}

/// 180-beam grid used when the nominal 2340 beams would make a sample too slow.
pub fn compact_angles() -> AngularGrid {
    AngularGrid::new(
        (-2..=2).map(|i| 30.0 * i as f64).collect(),
        (0..12).map(|i| 30.0 * i as f64).collect(),
        vec![-20.0, 0.0, 20.0],
    )
    .expect("valid grid")
}
