//! Numerical kernel: special functions, distribution functions, root finding,
//! quadrature helpers and the seedable random stream used by the simulator.
//!
//! Everything here is pure and reentrant.

pub mod dist;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod special;

pub use dist::{
    chisq_cdf, chisq_quantile, chisq_sf, kolmogorov_p, normal_cdf, normal_pdf, normal_quantile,
    normal_sf, student_t_cdf, student_t_quantile, Gaussian,
};
pub use rng::StreamRng;
