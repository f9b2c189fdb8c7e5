pub mod audio;
pub mod auth;
pub mod bits;
pub mod datalink;
pub mod error;
pub mod gf_bch;
pub mod harness;
pub mod seed;
pub mod watermark;

pub use bits::Bitstream;
pub use error::{Error, Result};
