//! Special functions and quadrature.

mod gamma;
mod gauss;
mod hyper;
pub mod quadrature;

pub use gamma::{
    exp_invsq_integral, exponential_integral_e1, gamma_cdf_bound, gamma_cdf_bound_rate, gen_inc_gamma,
    interference_exclusion_exponent, upper_inc_gamma, InvSqMode, E1_LOG_APPROX_B,
};
pub(crate) use gamma::exclusion_h;
pub use gauss::{gauss_q, inv_gauss_q};
pub use hyper::hyp2f1_neg;
pub use quadrature::{legendre_rule, QuadratureRule};
