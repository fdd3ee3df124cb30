//! Adaptive Runge–Kutta integration with dense output, section crossings,
//! variational propagation and Lyapunov estimation.

mod dopri;
mod events;
mod lyapunov;
mod trajectory;
mod variational;

pub use dopri::{DenseSegment, Dopri5, IntegratorOptions, StepStats};
pub use events::{find_section_crossings, Direction, EventRecord};
pub use lyapunov::{lyapunov_max, LyapunovEstimate, LyapunovOptions};
pub use trajectory::{
    integrate, integrate_endpoint, parse_samples, Trajectory, TrajectoryParseError,
};
pub use variational::{flow_with_sensitivity, monodromy, FlowSensitivity, Monodromy, SweepParam};

/// A time-dependent vector field on `R^N`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, x: &[f64; N]) -> [f64; N];

    /// Number of leading components subject to the runaway-state guard.
    /// Auxiliary components (tangent vectors, sensitivities) are exempt.
    fn guarded_dims(&self) -> usize {
        N
    }
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, x: &[f64; N]) -> [f64; N] {
        self(t, x)
    }
}
