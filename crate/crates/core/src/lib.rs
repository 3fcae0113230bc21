//! Desk-scale numerical toolkit for the thermodynamically consistent two-phase
//! Stefan problem with surface tension and optional kinetic undercooling.
//!
//! The moving-boundary problem is pulled back to a fixed annulus by a height
//! function over a reference circle (the classical fixed-domain / Hanzawa
//! device). The crate provides:
//!
//! * the fixed reference geometry and smooth cutoff profiles ([`geometry`]),
//! * constitutive thermodynamics derived from per-phase free energies
//!   ([`materials`]),
//! * height-function calculus on the reference circle ([`interface`]),
//! * the transformed bulk/interface operators on the fixed grid ([`hanzawa`]),
//! * an implicit time stepper for the coupled bulk–interface system
//!   ([`stepper`]),
//! * a frozen-coefficient Lopatinskii–Shapiro solvability scanner
//!   ([`ls_check`]),
//! * a localized space-time translation probe for smoothness diagnostics
//!   ([`diffeo`]),
//! * an independent radially symmetric front-tracking oracle ([`radial`]),
//! * config parsing, scenario orchestration and CSV emission ([`config`],
//!   [`scenario`], [`emit`]).

pub mod config;
pub mod diffeo;
pub mod emit;
pub mod fields;
pub mod geometry;
pub mod hanzawa;
pub mod interface;
pub mod linalg;
pub mod ls_check;
pub mod materials;
pub mod mms;
pub mod radial;
pub mod rng;
pub mod scenario;
pub mod spectral;
pub mod stepper;
