//! Data collection: file importers, pull connectors, and web form handling.

mod form;
mod import;
mod pull;

pub use form::{submit_form, FormError, FormSubmission, SubmissionContent};
pub use import::{
    import_effort_table, import_milestones, import_project_plan, import_time_series, parse_document, ImportError,
    RowIssue, EFFORT_HEADER, MILESTONES_HEADER, PARSER_KEYS, PLAN_HEADER, TIMESERIES_HEADER,
};
pub use pull::{is_due, poll_due, pull_entry, Dao, DaoRegistry, FileDao, PullError, PullState};
