//! ISS-Lyapunov certificates: function evaluation, Lie derivatives, sampled
//! gain implications, the quadratic construction from the linear part, the
//! composite construction along an Ω-path, and exponential envelope fits.

mod construct;
mod envelope;
mod equation;
mod function;
mod implication;

pub use construct::{build_composite_lf, build_linearization_lf, Linearization, LinearizationOptions};
pub use envelope::{estimate_iss_envelope, EnvelopeFit, EnvelopeSample};
pub use equation::{lyapunov_residual, solve_lyapunov, RESIDUAL_TOL};
pub use function::{characteristic_time, lie_derivative, LfKind, LyapunovFn, Method};
pub use implication::{
    check_implication, check_samples, Implication, InputMode, Measure, Sample, Sampler, ScaleTarget,
};
