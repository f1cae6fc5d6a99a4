//! Scalar special functions: normal, noncentral chi-squared, binomial bounds.

pub mod binomial;
pub mod gamma;
pub mod ncchisq;
pub mod normal;

pub use binomial::{
    binomial_two_sided_pvalue, clopper_pearson_lower, clopper_pearson_upper, BinomialEstimate,
};
pub use ncchisq::{
    chernoff_central_bound, ncchsq_cdf, ncchsq_quantile, BeyondCeiling, EvalPath, Evaluation,
    NcChiSq, NumericsPolicy,
};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};
