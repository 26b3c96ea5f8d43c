//! The APA campaign engine: golden-run capture, statistical site selection,
//! single-injection execution, campaign aggregation, and an exhaustive
//! brute-force oracle for small programs.

mod campaign;
mod golden;
mod oracle;
mod run;
mod site;

pub use campaign::{
    merge_summaries, program_digest, run_campaign, CampaignError, CampaignModel, CampaignOptions,
    CampaignOutput, CampaignSummary, CellSummary,
};
pub use golden::{golden_run, golden_run_with, GoldenError, GoldenReference, DEFAULT_HANG_MULTIPLIER};
pub use oracle::{exhaustive_oracle, OracleDistribution, OracleError, DEFAULT_ORACLE_CAP};
pub use run::{
    injectable, peek_site_dest, run_injection, run_with_corruption, DiffSample, InjectError,
    OutcomeRecord, OutputDiff,
};
pub use site::{select_sites, select_sites_in, select_sites_stratified, InjectionSite, SiteError};
