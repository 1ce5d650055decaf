//! Exact laws of the detection statistics and their numerical evaluation.

mod gx2;
mod laws;
mod normal;

pub use gx2::{gx2_cdf, gx2_quantile, GaussianPart, Gx2Params, Gx2Term};
pub use laws::{
    constant_distribution, detector_law, ma_distribution, rapid_distribution, upper_distribution, upper_pd_closed_form,
    GaussianParams, Law, UpperLaws,
};
pub use normal::{normal_pdf, q_function, q_inverse};
