//! End-to-end experiment protocols and reporting.

mod report;
mod suite;
mod svg;
mod toyfig;

pub use report::{
    render_report, Aggregate, Cell, EpochCurve, ExperimentReport, OriginalAccuracy, ProbeResult,
    RenderFormat, REPORT_VERSION,
};
pub use suite::{
    run_controlled_suite, ArchSpec, Attack, CavKindSel, Correction, DatasetSpec,
    ExperimentConfig, FinetuneConfig, HookSel,
};
pub use svg::SvgScene;
pub use toyfig::{run_toy_figure, ToyFigureConfig, ToyReport, ToyRun};
