//! Partitioned linearly implicit one-step integrators: tableaux, order
//! conditions, linear stability and ODE / index-1 DAE drivers.

pub mod convergence;
pub mod integrator_dae;
pub mod integrator_ode;
pub mod linalg;
pub mod methods;
pub mod order_conditions;
pub mod problems;
pub mod stability;
pub mod tableau;
