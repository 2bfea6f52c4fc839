//! Linear-systems toolkit, microgrid plant models, disturbance-observer
//! based control and closed-loop simulation. `no_std` with `alloc`.

#![no_std]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod control;
pub mod dobc;
pub mod error;
pub mod metrics;
pub mod network;
pub mod plant;
pub mod poly;
pub mod scenario;
pub mod ss;
pub mod stability;
pub mod sysid;
pub mod tf;

pub use error::{Error, Result};
pub use poly::Polynomial;
pub use ss::StateSpaceModel;
pub use tf::TransferFunction;
