use super::AuthError;
use crate::bits::Bits;

/// A contiguous range of pool bits handed out once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }
}

/// Secret-bit reserve for MAC keys. Bits are issued strictly in order from a
/// cursor that never moves back, so no segment can be issued twice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuthKeyPool {
    bits: Bits,
    cursor: usize,
    consumed: Vec<Segment>,
    round: u32,
}

impl AuthKeyPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bits(bits: Bits) -> Self {
        AuthKeyPool {
            bits,
            ..Self::default()
        }
    }

    /// Appends freshly grown key bits.
    pub fn fund(&mut self, bits: &Bits) {
        self.bits.extend_from(bits);
    }

    pub fn available(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn is_empty(&self) -> bool {
        self.available() == 0
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn consumption_log(&self) -> &[Segment] {
        &self.consumed
    }

    /// Issues the next `len` unused bits.
    pub fn take(&mut self, len: usize) -> Result<(Segment, Bits), AuthError> {
        if self.available() < len {
            return Err(AuthError::PoolExhausted {
                needed: len,
                available: self.available(),
            });
        }
        let seg = Segment {
            offset: self.cursor,
            len,
        };
        self.cursor += len;
        self.consumed.push(seg);
        Ok((seg, self.bits.slice(seg.offset, seg.end())))
    }

    /// Issues the segment a peer announced, provided it is exactly the next
    /// one this pool would issue.
    pub fn take_segment(&mut self, seg: Segment) -> Result<Bits, AuthError> {
        if seg.offset != self.cursor {
            return Err(AuthError::Desync {
                expected: self.cursor,
                got: seg.offset,
            });
        }
        self.take(seg.len).map(|(_, bits)| bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_are_disjoint_and_ordered() {
        let mut pool = AuthKeyPool::with_bits(Bits::zeros(100));
        let (a, _) = pool.take(30).unwrap();
        let (b, _) = pool.take(50).unwrap();
        assert_eq!(a.end(), b.offset);
        assert!(matches!(pool.take(21), Err(AuthError::PoolExhausted { needed: 21, available: 20 })));
        pool.fund(&Bits::zeros(10));
        assert_eq!(pool.available(), 30);
        assert_eq!(pool.consumption_log(), &[a, b]);
    }

    #[test]
    fn peer_segment_must_be_next() {
        let mut pool = AuthKeyPool::with_bits(Bits::zeros(100));
        assert!(matches!(
            pool.take_segment(Segment { offset: 5, len: 5 }),
            Err(AuthError::Desync { expected: 0, got: 5 })
        ));
        pool.take_segment(Segment { offset: 0, len: 5 }).unwrap();
        assert_eq!(pool.cursor(), 5);
    }
}
