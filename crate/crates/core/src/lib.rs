//! Gate and channel synthesis for a controlled anharmonic oscillator.
//!
//! The model is `H(t) = (P^2 + Q^2)/2 + c1 Q^3 + c2 Q^4 + b(t) Q` on a
//! truncated Fock space. The crate builds its spectrum, the first-order Dyson
//! gate as an affine function of the control pulse `b(t)`, and fits pulses
//! to target unitaries or channels. A second half simulates continuously
//! monitored open-system dynamics, runs the quantum filter on the measurement
//! record and fits Lindblad parameters to the filtered state.
//!
//! | module | contents |
//! |---|---|
//! | [`fock`] | ladder operators, `Q`, `P`, Z2-graded operator split |
//! | [`spectrum`] | `H0` construction, exact and perturbative spectra |
//! | [`dyson`] | control pulses, free propagator, Dyson gate, brute-force propagator |
//! | [`gate_synth`] | least-squares pulse design against a target unitary |
//! | [`channel`] | Kraus/Choi channels, partial trace, channel synthesis |
//! | [`filter_fit`] | Lindblad and stochastic master equations, filter, parameter fit |
//! | [`susy_toy`] | gaugino-VEV control, effective Hamiltonian, SUSY partners, Witten index |
//! | [`cli`] | the `susygate` command-line front end and the demo pipeline |

pub mod channel;
pub mod cli;
pub mod dyson;
pub mod error;
pub mod filter_fit;
pub mod fock;
pub mod gate_synth;
pub mod matrix;
pub mod plot;
pub mod random;
pub mod spectrum;
pub mod susy_toy;

pub use error::{Error, ErrorKind, Result};
pub use matrix::{ComplexMatrix, OperatorExt, C64};
