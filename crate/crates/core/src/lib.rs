//! Unsupervised multi-objective feature selection for intrusion-detection
//! datasets: dataset handling, statistical measures, selection objectives,
//! an elitist non-dominated sorting GA, and classifier-based evaluation.

pub mod classify;
pub mod dataset;
pub mod measures;
pub mod nsga2;
pub mod objectives;
