//! Curvature invariants of immersed submanifolds of Euclidean space and round
//! spheres.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsl`]: a small expression language for profile curves, evaluated with
//!   exact first and second derivatives.
//! * [`multijet`]: second-order forward-mode jets in several variables, used
//!   to build closed-form 2-jets of model immersions.
//! * [`engine`]: ambient spaces, charts, orthonormal frames, the second
//!   fundamental form and its first-order invariants.
//! * [`curvature`]: Gauss-equation curvature, Ricci data, normal curvature,
//!   the Bochner–Weitzenböck operator on 2-vectors and its self-dual split,
//!   isotropic curvature, adapted frames and Dupin principal normals.
//! * [`frameopt`]: derivative-free minimisation over orthonormal frames.
//! * [`pinch`]: the pinching bound, the Lawson–Simons quantity and the
//!   associated property harnesses.
//! * [`catalog`]: model immersions with closed-form jets.
//! * [`jetfile`]: JSON interchange for user-supplied jets.
//! * [`verify`]: named verification suites shared by the CLI and the tests.

pub mod catalog;
pub mod curvature;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod frameopt;
pub mod jetfile;
pub mod multijet;
pub mod par;
pub mod pinch;
pub mod verify;

pub use error::{Error, Result};
