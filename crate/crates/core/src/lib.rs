//! Exact structure and limiting covariances of nonconventional polynomial
//! sums `ξ_N(t) = N^{-1/2} Σ_{n ≤ Nt} F(X(q_1(n)), …, X(q_ℓ(n)))`, with a
//! Monte-Carlo harness that checks the predictions on finite-state models.

pub mod poly;
pub mod rational;
pub mod process;
pub mod observable;
pub mod covariance;
pub mod montecarlo;
pub mod scenario;
