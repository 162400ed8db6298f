//! Hash-based one-time signatures for the first round, before any shared
//! secret exists. Lamport is the default; a Winternitz variant trades
//! signature size for hash evaluations.

use rand::Rng;
use sha2::{Digest, Sha256};

use super::AuthError;
use crate::bits::Bits;

pub const BLOB_VERSION: u32 = 1;
pub const DEFAULT_PREIMAGE_BITS: usize = 256;
pub const DEFAULT_DIGEST_BITS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtsScheme {
    Lamport,
    /// Chains of length `2^w - 1` over `w`-bit digits.
    Winternitz { w: u8 },
}

impl OtsScheme {
    fn id(self) -> (u8, u8) {
        match self {
            OtsScheme::Lamport => (0, 0),
            OtsScheme::Winternitz { w } => (1, w),
        }
    }

    fn from_id(id: u8, w: u8) -> Option<Self> {
        match (id, w) {
            (0, 0) => Some(OtsScheme::Lamport),
            (1, 1..=8) => Some(OtsScheme::Winternitz { w }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtsParams {
    pub scheme: OtsScheme,
    /// Preimage and image length in bits, a multiple of 8 up to 256.
    pub preimage_bits: usize,
    /// Bits of the message digest that are signed, up to 256.
    pub digest_bits: usize,
}

impl Default for OtsParams {
    fn default() -> Self {
        OtsParams {
            scheme: OtsScheme::Lamport,
            preimage_bits: DEFAULT_PREIMAGE_BITS,
            digest_bits: DEFAULT_DIGEST_BITS,
        }
    }
}

impl OtsParams {
    pub fn lamport(preimage_bits: usize, digest_bits: usize) -> Self {
        OtsParams {
            scheme: OtsScheme::Lamport,
            preimage_bits,
            digest_bits,
        }
    }

    pub fn winternitz(w: u8, preimage_bits: usize, digest_bits: usize) -> Self {
        OtsParams {
            scheme: OtsScheme::Winternitz { w },
            preimage_bits,
            digest_bits,
        }
    }

    fn validate(&self) -> Result<(), AuthError> {
        let ok_pre = self.preimage_bits > 0 && self.preimage_bits <= 256 && self.preimage_bits.is_multiple_of(8);
        let ok_digest = self.digest_bits > 0 && self.digest_bits <= 256;
        let ok_w = match self.scheme {
            OtsScheme::Lamport => true,
            OtsScheme::Winternitz { w } => (1..=8).contains(&w),
        };
        if ok_pre && ok_digest && ok_w {
            Ok(())
        } else {
            Err(AuthError::OtsParams(format!(
                "{:?} with {}-bit preimages and {}-bit digests",
                self.scheme, self.preimage_bits, self.digest_bits
            )))
        }
    }

    fn bytes(&self) -> usize {
        self.preimage_bits / 8
    }

    /// Winternitz digit counts: message digits and checksum digits.
    fn digits(&self, w: u8) -> (usize, usize) {
        let w = w as usize;
        let l1 = self.digest_bits.div_ceil(w);
        let max_sum = l1 * ((1 << w) - 1);
        let l2 = (usize::BITS - max_sum.leading_zeros()) as usize;
        (l1, l2.div_ceil(w))
    }

    /// Number of public images (and of secret preimages).
    pub fn image_count(&self) -> usize {
        match self.scheme {
            OtsScheme::Lamport => 2 * self.digest_bits,
            OtsScheme::Winternitz { w } => {
                let (l1, l2) = self.digits(w);
                l1 + l2
            }
        }
    }
}

fn h(bytes: usize, data: &[u8]) -> Vec<u8> {
    Sha256::digest(data)[..bytes].to_vec()
}

fn chain(bytes: usize, start: &[u8], steps: usize) -> Vec<u8> {
    let mut v = start.to_vec();
    for _ in 0..steps {
        v = h(bytes, &v);
    }
    v
}

/// The first `digest_bits` bits of a domain-separated SHA-256 of the message.
pub fn message_digest(message: &Bits, digest_bits: usize) -> Bits {
    let mut hasher = Sha256::new();
    hasher.update(b"hyqkd/ots/message");
    hasher.update((message.len() as u64).to_be_bytes());
    hasher.update(message.to_bytes());
    Bits::from_bytes(&hasher.finalize()).slice(0, digest_bits)
}

fn winternitz_digits(params: &OtsParams, w: u8, digest: &Bits) -> Vec<usize> {
    let (l1, l2) = params.digits(w);
    let w = w as usize;
    let digit = |bits: &Bits, i: usize| (0..w).fold(0, |acc, k| (acc << 1) | bits.get(i * w + k).unwrap_or(0) as usize);
    let mut out: Vec<usize> = (0..l1).map(|i| digit(digest, i)).collect();
    let checksum: usize = out.iter().map(|d| (1 << w) - 1 - d).sum();
    let check_bits = Bits::from_u64(checksum as u64, l2 * w);
    out.extend((0..l2).map(|i| digit(&check_bits, i)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtsPublicKey {
    pub params: OtsParams,
    pub images: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtsSignature {
    pub values: Vec<Vec<u8>>,
}

impl OtsSignature {
    pub fn bit_len(&self) -> usize {
        self.values.iter().map(|v| v.len() * 8).sum()
    }
}

#[derive(Debug, Clone)]
pub struct OtsKeypair {
    params: OtsParams,
    secret: Vec<Vec<u8>>,
    public: OtsPublicKey,
    used: bool,
}

impl OtsKeypair {
    pub fn params(&self) -> OtsParams {
        self.params
    }

    pub fn public(&self) -> &OtsPublicKey {
        &self.public
    }

    pub fn is_used(&self) -> bool {
        self.used
    }
}

pub fn ots_keygen<R: Rng + ?Sized>(rng: &mut R, params: OtsParams) -> Result<OtsKeypair, AuthError> {
    params.validate()?;
    let bytes = params.bytes();
    let secret: Vec<Vec<u8>> = (0..params.image_count())
        .map(|_| {
            let mut v = vec![0u8; bytes];
            rng.fill(&mut v[..]);
            v
        })
        .collect();
    let images = match params.scheme {
        OtsScheme::Lamport => secret.iter().map(|s| h(bytes, s)).collect(),
        OtsScheme::Winternitz { w } => secret.iter().map(|s| chain(bytes, s, (1 << w) - 1)).collect(),
    };
    Ok(OtsKeypair {
        params,
        secret,
        public: OtsPublicKey { params, images },
        used: false,
    })
}

/// Signs once; a second call on the same keypair is refused.
pub fn ots_sign(message: &Bits, keypair: &mut OtsKeypair) -> Result<OtsSignature, AuthError> {
    if keypair.used {
        return Err(AuthError::KeyReuse);
    }
    keypair.used = true;
    let p = keypair.params;
    let digest = message_digest(message, p.digest_bits);
    let values = match p.scheme {
        OtsScheme::Lamport => digest
            .iter()
            .enumerate()
            .map(|(i, b)| keypair.secret[2 * i + b as usize].clone())
            .collect(),
        OtsScheme::Winternitz { w } => winternitz_digits(&p, w, &digest)
            .into_iter()
            .zip(&keypair.secret)
            .map(|(d, s)| chain(p.bytes(), s, d))
            .collect(),
    };
    Ok(OtsSignature { values })
}

pub fn ots_verify(message: &Bits, signature: &OtsSignature, public: &OtsPublicKey) -> bool {
    let p = public.params;
    if p.validate().is_err() || public.images.len() != p.image_count() {
        return false;
    }
    let bytes = p.bytes();
    if signature.values.iter().any(|v| v.len() != bytes) {
        return false;
    }
    let digest = message_digest(message, p.digest_bits);
    match p.scheme {
        OtsScheme::Lamport => {
            signature.values.len() == p.digest_bits
                && digest
                    .iter()
                    .zip(&signature.values)
                    .enumerate()
                    .all(|(i, (b, v))| h(bytes, v) == public.images[2 * i + b as usize])
        }
        OtsScheme::Winternitz { w } => {
            let digits = winternitz_digits(&p, w, &digest);
            signature.values.len() == digits.len()
                && digits
                    .iter()
                    .zip(&signature.values)
                    .zip(&public.images)
                    .all(|((&d, v), img)| &chain(bytes, v, (1 << w) - 1 - d) == img)
        }
    }
}

impl OtsPublicKey {
    /// Serialises as `version (u32 BE) || payload length (u32 BE) || payload`;
    /// see `docs/ots-public-key.md`.
    pub fn to_blob(&self) -> Vec<u8> {
        let (id, w) = self.params.scheme.id();
        let mut payload = vec![id, w];
        payload.extend((self.params.preimage_bits as u16).to_be_bytes());
        payload.extend((self.params.digest_bits as u16).to_be_bytes());
        payload.extend((self.images.len() as u32).to_be_bytes());
        for img in &self.images {
            payload.extend(img);
        }
        let mut out = BLOB_VERSION.to_be_bytes().to_vec();
        out.extend((payload.len() as u32).to_be_bytes());
        out.extend(payload);
        out
    }

    pub fn from_blob(blob: &[u8]) -> Result<Self, AuthError> {
        let bad = |why: &str| AuthError::Blob(why.to_string());
        let u32_at = |i: usize| -> Result<u32, AuthError> {
            blob.get(i..i + 4)
                .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
                .ok_or_else(|| bad("truncated header"))
        };
        let version = u32_at(0)?;
        if version != BLOB_VERSION {
            return Err(AuthError::BlobVersion(version));
        }
        let len = u32_at(4)? as usize;
        let payload = &blob[8..];
        if payload.len() != len {
            return Err(bad("payload length does not match header"));
        }
        if payload.len() < 10 {
            return Err(bad("truncated payload"));
        }
        let scheme = OtsScheme::from_id(payload[0], payload[1]).ok_or_else(|| bad("unknown scheme"))?;
        let params = OtsParams {
            scheme,
            preimage_bits: u16::from_be_bytes([payload[2], payload[3]]) as usize,
            digest_bits: u16::from_be_bytes([payload[4], payload[5]]) as usize,
        };
        params.validate()?;
        let count = u32::from_be_bytes(payload[6..10].try_into().unwrap()) as usize;
        if count != params.image_count() {
            return Err(bad("image count does not match parameters"));
        }
        let body = &payload[10..];
        if body.len() != count * params.bytes() {
            return Err(bad("image data has the wrong size"));
        }
        Ok(OtsPublicKey {
            params,
            images: body.chunks(params.bytes()).map(<[u8]>::to_vec).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn lamport_shape_and_roundtrip() {
        let mut rng = derive_rng(1, "ots");
        let mut kp = ots_keygen(&mut rng, OtsParams::lamport(128, 64)).unwrap();
        assert_eq!(kp.public().images.len(), 128);
        assert!(kp.public().images.iter().all(|i| i.len() == 16));
        let m = Bits::parse("1011").unwrap();
        let sig = ots_sign(&m, &mut kp).unwrap();
        assert_eq!(sig.values.len(), 64);
        assert!(ots_verify(&m, &sig, kp.public()));
        assert!(!ots_verify(&Bits::parse("1010").unwrap(), &sig, kp.public()));
        assert!(matches!(ots_sign(&m, &mut kp), Err(AuthError::KeyReuse)));
    }

    #[test]
    fn winternitz_roundtrip() {
        let mut rng = derive_rng(2, "ots");
        for w in [1u8, 4, 8] {
            let mut kp = ots_keygen(&mut rng, OtsParams::winternitz(w, 256, 256)).unwrap();
            let m = Bits::random(&mut rng, 300);
            let sig = ots_sign(&m, &mut kp).unwrap();
            assert!(ots_verify(&m, &sig, kp.public()), "w={w}");
            let mut other = m.clone();
            other.flip(7);
            assert!(!ots_verify(&other, &sig, kp.public()));
        }
    }

    #[test]
    fn winternitz_checksum_width() {
        let p = OtsParams::winternitz(4, 256, 256);
        // 64 digits, max checksum 960 needs 10 bits, so three 4-bit digits.
        assert_eq!(p.image_count(), 67);
    }

    #[test]
    fn blob_roundtrip_and_rejections() {
        let mut rng = derive_rng(3, "ots");
        let kp = ots_keygen(&mut rng, OtsParams::lamport(64, 16)).unwrap();
        let blob = kp.public().to_blob();
        assert_eq!(&blob[..4], &[0, 0, 0, 1]);
        assert_eq!(OtsPublicKey::from_blob(&blob).unwrap(), *kp.public());

        let mut v2 = blob.clone();
        v2[3] = 2;
        assert!(matches!(OtsPublicKey::from_blob(&v2), Err(AuthError::BlobVersion(2))));
        assert!(OtsPublicKey::from_blob(&blob[..blob.len() - 1]).is_err());
        assert!(OtsPublicKey::from_blob(&blob[..6]).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        let mut rng = derive_rng(4, "ots");
        assert!(ots_keygen(&mut rng, OtsParams::lamport(12, 16)).is_err());
        assert!(ots_keygen(&mut rng, OtsParams::lamport(512, 16)).is_err());
        assert!(ots_keygen(&mut rng, OtsParams::lamport(64, 0)).is_err());
        assert!(ots_keygen(&mut rng, OtsParams::winternitz(9, 64, 16)).is_err());
    }
}
