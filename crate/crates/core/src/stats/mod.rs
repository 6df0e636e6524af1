//! Two-sample testing: univariate KS, Bonferroni combination, bootstrap power.

mod bonferroni;
mod ks;
mod power;

pub use bonferroni::{bonferroni_test, TestOutcome};
pub use ks::{
    asymptotic_p_value, exact_p_value, kolmogorov_q, ks_statistic, ks_two_sample,
    ks_two_sample_asymptotic, KsResult, PValueMethod, EXACT_MAX_PRODUCT,
};
pub use power::{
    bootstrap_repetition, clt_half_width, estimate_power, PowerConfig, PowerMode, PowerReport,
    DEFAULT_REPETITIONS, Z_95,
};
