//! Settling-time metrics, parameter sweeps, loss landscapes and sim/real alignment.

pub mod align;
pub mod gains;
pub mod landscape;
pub mod peaks;
pub mod settling;
pub mod sweep;
pub mod trajectory;

pub use align::{align_and_compare, AlignConfig, GapReport, MatchedPeak};
pub use gains::{moving_average, GainTrace};
pub use landscape::{loss_landscape, overlay_from_log, Landscape, LandscapeCell, LandscapeSpec};
pub use peaks::{detect_peaks, peaks_of, Peak};
pub use settling::{settling_time, SettlingResult};
pub use sweep::{
    evaluate_cell, linspace, sweep, CellStatus, ContextMode, Plane, SweepCell, SweepGrid, SweepSpec, FAR_DAMPING,
};
pub use trajectory::{Signal, Source, Status, TrajectoryLog};
