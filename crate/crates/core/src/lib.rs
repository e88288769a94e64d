//! PID regulation of uncertain nonlinear second-order systems: gain design
//! from closed-loop eigenvalues, closed-loop simulation, and numerical
//! certificates for the stability and instability results.

pub mod certificates;
pub mod closed_loop;
pub mod demos;
pub mod gain_design;
pub mod integrator;
pub mod plants;
pub mod poly;
