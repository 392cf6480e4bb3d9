//! Leading singular triplets and the 2-norm of a matrix function `f(A)`.
//!
//! Neither `f(A)` nor the products `f(A) v` are ever formed exactly. The outer
//! process is a Golub-Kahan-Lanczos bidiagonalization whose matrix-vector
//! products are approximated by an inner Krylov projection with a controlled
//! (and optionally relaxed) tolerance. Because the two inexact products are no
//! longer adjoint to each other, the projected matrices lose their bidiagonal
//! structure: `M` is upper triangular and `T` upper Hessenberg, and the
//! singular value estimates are read off the eigenvalues of the block matrix
//! `[[0, M], [T, 0]]`.
//!
//! Module map:
//!
//! * [`matrices`]: the operator abstraction, test operators and a Matrix Market reader.
//! * [`funcatalog`]: the scalar functions `f` with principal branches.
//! * [`densela`]: small dense kernels (Hessenberg/QR eigensolver, SVD, LU, `f(H)`).
//! * [`inner`]: `f(A) v` by standard or extended Krylov projection.
//! * [`outer`]: the inexact bidiagonalization driver.
//! * [`relax`]: relaxed inner tolerances and the eigenvector-tail diagnostic.
//! * [`baselines`]: power method and the Hermitian-part exponential bound.
//! * [`cli`]: experiment runner used by the `matfun-norm` binary.

#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod cli;
pub mod densela;
mod error;
pub mod funcatalog;
pub mod inner;
pub mod matrices;
pub mod outer;
pub mod relax;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub(crate) mod vecops;
