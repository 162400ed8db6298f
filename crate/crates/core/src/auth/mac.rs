//! Wegman-Carter message authentication over Toeplitz hashing.
//!
//! Each message consumes a fresh pool segment laid out as
//! `pad (t) || level seeds... || final seed`. The message is framed as
//! `1 || message`. A framed message of at most [`BLOCK`] bits is hashed by a
//! single `t x len` Toeplitz matrix; longer ones are first compressed by
//! levels that split the input (10*-padded) into [`BLOCK`]-bit blocks and hash
//! every block with one shared `t x BLOCK` matrix, re-framing the
//! concatenated outputs. The tag is the final hash XOR the pad.
//!
//! With the pad first and the leading `1`, two distinct single-level messages
//! of any lengths collide under the pad-offset tag with probability exactly
//! `2^-t`; each compression level adds at most another `2^-t`.

use super::pool::{AuthKeyPool, Segment};
use super::AuthError;
use crate::bits::Bits;
use crate::postproc::toeplitz::{seed_len, ToeplitzSeed};

pub const BLOCK: usize = 256;
pub const DEFAULT_TAG_LEN: usize = 64;
pub const MAX_TAG_LEN: usize = BLOCK / 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacTag {
    pub tag: Bits,
    pub seed_handle: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    TagMismatch,
    /// The announced key segment is not the next one in the local pool.
    Desync,
    /// The local pool cannot supply the announced segment.
    PoolExhausted,
    /// The tag has the wrong length or the segment the wrong size.
    Malformed,
}

fn frame(message: &Bits) -> Bits {
    let mut out = Bits::from_bits([1u8]);
    out.extend_from(message);
    out
}

fn pad_to_blocks(bits: &Bits) -> Bits {
    let mut out = bits.clone();
    out.push(1);
    while !out.len().is_multiple_of(BLOCK) {
        out.push(0);
    }
    out
}

/// Number of compression levels and length of the final-level input.
fn plan(message_len: usize, t: usize) -> (usize, usize) {
    let mut len = message_len + 1;
    let mut levels = 0;
    while len > BLOCK {
        len = (len + 1).div_ceil(BLOCK) * t + 1;
        levels += 1;
    }
    (levels, len)
}

/// Pool bits one tag on a `message_len`-bit message consumes.
pub fn key_bits(message_len: usize, t: usize) -> usize {
    let (levels, final_len) = plan(message_len, t);
    t + levels * seed_len(BLOCK, t) + seed_len(final_len, t)
}

fn universal_hash(message: &Bits, key: &Bits, t: usize) -> Bits {
    let mut x = frame(message);
    let mut offset = t;
    while x.len() > BLOCK {
        let n = seed_len(BLOCK, t);
        let seed = ToeplitzSeed::new(key.slice(offset, offset + n), BLOCK, t).expect("level seed size");
        offset += n;
        let padded = pad_to_blocks(&x);
        let mut next = Bits::new();
        for i in (0..padded.len()).step_by(BLOCK) {
            next.extend_from(&seed.hash(&padded.slice(i, i + BLOCK)).expect("block size"));
        }
        x = frame(&next);
    }
    let n = seed_len(x.len(), t);
    let seed = ToeplitzSeed::new(key.slice(offset, offset + n), x.len(), t).expect("final seed size");
    seed.hash(&x).expect("final input size")
}

fn compute_tag(message: &Bits, key: &Bits, t: usize) -> Bits {
    &universal_hash(message, key, t) ^ &key.slice(0, t)
}

fn check_tag_len(t: usize) -> Result<(), AuthError> {
    if t == 0 || t > MAX_TAG_LEN {
        return Err(AuthError::TagLength(t));
    }
    Ok(())
}

/// Tags `message`, consuming the next key segment of `pool`.
pub fn wc_tag(message: &Bits, pool: &mut AuthKeyPool, t: usize) -> Result<MacTag, AuthError> {
    check_tag_len(t)?;
    let (seed_handle, key) = pool.take(key_bits(message.len(), t))?;
    Ok(MacTag {
        tag: compute_tag(message, &key, t),
        seed_handle,
    })
}

/// Checks `tag` against `message`, consuming the mirrored segment of the
/// receiver's pool.
pub fn wc_verify(message: &Bits, tag: &MacTag, pool: &mut AuthKeyPool) -> Verdict {
    let t = tag.tag.len();
    if check_tag_len(t).is_err() || tag.seed_handle.len != key_bits(message.len(), t) {
        return Verdict::Reject(RejectReason::Malformed);
    }
    let key = match pool.take_segment(tag.seed_handle) {
        Ok(k) => k,
        Err(AuthError::Desync { .. }) => return Verdict::Reject(RejectReason::Desync),
        Err(_) => return Verdict::Reject(RejectReason::PoolExhausted),
    };
    if compute_tag(message, &key, t) == tag.tag {
        Verdict::Accept
    } else {
        Verdict::Reject(RejectReason::TagMismatch)
    }
}
