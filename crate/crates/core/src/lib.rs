//! Anti-windup synthesis and simulation toolkit.
//!
//! Layers, bottom-up: dense linear algebra ([`matrix`]), LTI systems and
//! norms ([`lti`]), saturated closed-loop simulation ([`sim`]), LMI
//! construction and a barrier SDP solver ([`lmi`]), fixed-structure H-infinity
//! synthesis ([`synth`]) and a grid-connected converter case study ([`vsc`]).

pub mod cases;
pub mod design;
pub mod lmi;
pub mod lti;
pub mod matrix;
pub mod sim;
pub mod synth;
pub mod vsc;
