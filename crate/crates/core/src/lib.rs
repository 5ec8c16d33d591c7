//! Adaptive, sparse neighbourhood graphs from optimal transport.
//!
//! Each point of a cloud is given a unit of mass which it spreads over its
//! neighbours by solving a symmetric, regularized transport problem. With a
//! quadratic regularizer the optimal coupling is exactly sparse and can be used
//! directly as a weighted adjacency matrix; with an entropic regularizer it is
//! the doubly-stochastic normalization of a Gaussian kernel and fully dense.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`numerics`] | seeded RNG, CSR matrices, conjugate gradients, symmetric eigensolvers |
//! | [`datasets`] | synthetic spirals, noise models, scale normalization, CSV I/O |
//! | [`transport`] | semi-smooth Newton for quadratic OT, log-domain symmetric Sinkhorn, Dykstra oracle |
//! | [`graphs`] | OT, kNN, Gaussian and adaptive-bandwidth graph builders; edge-list I/O |
//! | [`spectral`] | eigenmap embeddings and principal angles |
//! | [`learn`] | LLGC label propagation and diffusion denoising |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod graphs;
pub mod learn;
pub mod numerics;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
