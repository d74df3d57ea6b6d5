//! Dense `f64` tensors and a tape-based reverse-mode differentiator.
//!
//! Values are evaluated eagerly; a [`Tape`] records each operation so that
//! [`Tape::backward`] can return gradients for every leaf created with
//! [`Tape::leaf`]. [`Var::stop_gradient`] yields a value that is cut out of
//! the graph, so anything reached only through it gets an exact zero.
//!
//! ```
//! use geomae_tensor::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
//! let loss = x.square().unwrap().sum().unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(x).data(), &[2.0, 4.0]);
//! ```

mod error;
mod kernels;
mod tape;
mod tensor;

pub mod gradcheck;

pub use error::{Result, TensorError};
pub use tape::{concat_last, Activation, Gradients, Tape, Var};
pub use tensor::Tensor;
