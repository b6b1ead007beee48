//! Randomized CUR-family decompositions of matrix pairs and triplets.
//!
//! The crate provides DEIM and L-DEIM index selection, the generalized SVD
//! of a pair, generalized CUR (GCUR), the restricted SVD of a triplet and
//! RSVD-CUR, each with a randomized sketching variant, plus the synthetic
//! generators and benchmark drivers used to exercise them.

// Links the system OpenBLAS that backs the LAPACK routines.
use openblas_src as _;

pub mod bench;
pub mod error;
pub mod gcur;
pub mod gsvd;
pub mod io;
pub mod matrix;
pub mod rsvd;
pub mod rsvd_cur;
pub mod selection;
pub mod sketch;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{lstsq_solve, qr_thin, svd_thin, two_norm, DenseMatrix, IndexList, ThinSvd};
pub use gcur::{cur, gcur_deterministic, r_deim_gcur, r_ldeim_gcur, GcurFactors, Selector, Sides};
pub use gsvd::{gsvd, randomized_gsvd, GsvdFactors};
pub use rsvd::{randomized_rsvd, rsvd_deterministic, RsvdFactors};
pub use rsvd_cur::{r_ldeim_rsvd_cur, rsvd_cur, RsvdCurFactors};
pub use selection::{deim_select, ldeim_select, SelectionMethod, SelectionResult};
pub use sketch::SketchConfig;
