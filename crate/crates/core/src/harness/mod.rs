pub mod metrics;
pub mod report;
pub mod oracle;
pub mod pipeline;

pub use metrics::{evaluate_designs, evaluate_designs_reference, median, MetricsReport};
pub use oracle::{enumerate_space, nk_dataset, sample_space, ExactOracle, NkLandscape};
pub use pipeline::{
    fit_vae, holdout_mae, vae_corpus, limits_study, run_arm, run_pipeline, run_pipeline_with, spearman, sweep, sweep_selection,
    ArmReport, DesignRecord, LimitsCell, LimitsConfig, LimitsReport, OracleSpec, RunConfig, RunReport, StageTiming,
    SweepCell, SweepConfig, SweepGrid, SweepReport, Task, TaskConfig, VaeCorpus, VaeStageConfig,
};
pub use report::{to_json, to_json_line};
