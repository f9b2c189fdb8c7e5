//! Framing, synchronization and stop-and-wait delivery over the frame channel.
//!
//! Wire format: `[sync preamble][message bits][parity bits]`, where the last
//! two fields form one systematic BCH codeword.

mod arq;
mod link;
mod sync;

use serde::{Deserialize, Serialize};

pub use arq::{send_message, AlphaStrategy, ArqPolicy, AttemptRecord, DeliveryReport};
pub use link::{Exchange, Link, LinkConfig, LinkFailure, Received};
pub use sync::{find_sync, sync_distance, SyncMatch, SyncPattern, SyncSearch};

use crate::bits::Bitstream;
use crate::error::Result;
use crate::gf_bch::BchCode;

/// On-air unit: preamble followed by the payload codeword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataLinkFrame {
    pub sync: Bitstream,
    pub payload: Bitstream,
}

impl DataLinkFrame {
    pub fn bits(&self) -> Bitstream {
        self.sync.concat(&self.payload)
    }

    pub fn len(&self) -> usize {
        self.sync.len() + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Prepends the preamble to the BCH codeword of `message`.
pub fn build_frame(
    code: &BchCode,
    sync: &SyncPattern,
    message: &Bitstream,
) -> Result<DataLinkFrame> {
    Ok(DataLinkFrame {
        sync: sync.bits().clone(),
        payload: code.encode(message)?,
    })
}
