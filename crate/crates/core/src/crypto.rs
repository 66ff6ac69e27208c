//! Signature and public-key encryption primitives.
//!
//! Two schemes are available for each primitive:
//!
//! * production: Ed25519 signatures and an X25519 + HKDF-SHA256 +
//!   ChaCha20-Poly1305 hybrid encryption;
//! * [`SignatureScheme::InsecureTest`] / [`EncryptionScheme::InsecureTest`]:
//!   hash-based constructions with no secrecy guarantees, only useful for
//!   reproducible fixtures.
//!
//! Keys carry their scheme tag. Signatures and ciphertexts are opaque bytes,
//! serialized as lowercase hex.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const HYBRID_INFO: &[u8] = b"receiptvote hybrid encryption v1";
const INSECURE_TAG_LEN: usize = 32;
const INSECURE_NONCE_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("key does not belong to scheme {expected}")]
    SchemeMismatch { expected: &'static str },
    #[error("malformed {0} key")]
    MalformedKey(&'static str),
    #[error("ciphertext failed authentication")]
    Integrity,
    #[error("ciphertext too short")]
    Truncated,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureScheme {
    Ed25519,
    InsecureTest,
}

impl SignatureScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ed25519 => "ed25519",
            Self::InsecureTest => "insecure-test",
        }
    }

    pub fn keygen<R: RngCore + CryptoRng + ?Sized>(self, rng: &mut R) -> SigningKeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let public = match self {
            Self::Ed25519 => ed25519_dalek::SigningKey::from_bytes(&seed)
                .verifying_key()
                .to_bytes()
                .to_vec(),
            Self::InsecureTest => insecure_public(&seed),
        };
        SigningKeyPair {
            secret: SigningKey {
                scheme: self,
                bytes: seed.to_vec(),
            },
            public: VerifyingKey {
                scheme: self,
                bytes: public,
            },
        }
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigningKey {
    pub scheme: SignatureScheme,
    #[serde(with = "hex_bytes", rename = "key")]
    bytes: Vec<u8>,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey")
            .field("scheme", &self.scheme)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerifyingKey {
    pub scheme: SignatureScheme,
    #[serde(with = "hex_bytes", rename = "key")]
    bytes: Vec<u8>,
}

impl VerifyingKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningKeyPair {
    pub secret: SigningKey,
    pub public: VerifyingKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(#[serde(with = "hex_bytes")] Vec<u8>);

impl Signature {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

fn insecure_public(secret: &[u8]) -> Vec<u8> {
    Sha256::new()
        .chain_update(b"insecure-test public")
        .chain_update(secret)
        .finalize()
        .to_vec()
}

fn insecure_mac(public: &[u8], message: &[u8]) -> Vec<u8> {
    Sha256::new()
        .chain_update(b"insecure-test signature")
        .chain_update(public)
        .chain_update(message)
        .finalize()
        .to_vec()
}

pub fn sign(key: &SigningKey, message: &[u8]) -> Result<Signature, CryptoError> {
    match key.scheme {
        SignatureScheme::Ed25519 => {
            let seed: [u8; 32] = key
                .bytes
                .as_slice()
                .try_into()
                .map_err(|_| CryptoError::MalformedKey("ed25519"))?;
            let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
            use ed25519_dalek::Signer;
            Ok(Signature(sk.sign(message).to_bytes().to_vec()))
        }
        SignatureScheme::InsecureTest => {
            if key.bytes.len() != 32 {
                return Err(CryptoError::MalformedKey("insecure-test"));
            }
            Ok(Signature(insecure_mac(
                &insecure_public(&key.bytes),
                message,
            )))
        }
    }
}

/// Returns `true` iff `signature` is valid for `message` under `key`.
/// Malformed keys or signatures verify as `false`.
pub fn verify(key: &VerifyingKey, message: &[u8], signature: &Signature) -> bool {
    match key.scheme {
        SignatureScheme::Ed25519 => {
            let Ok(pk_bytes) = <[u8; 32]>::try_from(key.bytes.as_slice()) else {
                return false;
            };
            let Ok(pk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
                return false;
            };
            let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
                return false;
            };
            pk.verify_strict(message, &sig).is_ok()
        }
        SignatureScheme::InsecureTest => {
            key.bytes.len() == 32 && insecure_mac(&key.bytes, message) == signature.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncryptionScheme {
    X25519ChaCha20Poly1305,
    InsecureTest,
}

impl EncryptionScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::X25519ChaCha20Poly1305 => "x25519-chacha20poly1305",
            Self::InsecureTest => "insecure-test",
        }
    }

    pub fn keygen<R: RngCore + CryptoRng + ?Sized>(self, rng: &mut R) -> EncryptionKeyPair {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        let public = match self {
            Self::X25519ChaCha20Poly1305 => {
                let sk = x25519_dalek::StaticSecret::from(secret);
                x25519_dalek::PublicKey::from(&sk).to_bytes().to_vec()
            }
            // The insecure scheme is symmetric: the "public" key is the secret.
            Self::InsecureTest => secret.to_vec(),
        };
        EncryptionKeyPair {
            secret: DecryptionKey {
                scheme: self,
                bytes: secret.to_vec(),
            },
            public: EncryptionKey {
                scheme: self,
                bytes: public,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncryptionKey {
    pub scheme: EncryptionScheme,
    #[serde(with = "hex_bytes", rename = "key")]
    bytes: Vec<u8>,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptionKey {
    pub scheme: EncryptionScheme,
    #[serde(with = "hex_bytes", rename = "key")]
    bytes: Vec<u8>,
}

impl std::fmt::Debug for DecryptionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecryptionKey")
            .field("scheme", &self.scheme)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionKeyPair {
    pub secret: DecryptionKey,
    pub public: EncryptionKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub scheme: EncryptionScheme,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

fn hybrid_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(HYBRID_INFO, &mut okm)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    okm
}

fn insecure_keystream_xor(key: &[u8], nonce: &[u8], data: &mut [u8]) {
    for (block, chunk) in data.chunks_mut(32).enumerate() {
        let pad = Sha256::new()
            .chain_update(b"insecure-test stream")
            .chain_update(key)
            .chain_update(nonce)
            .chain_update((block as u64).to_le_bytes())
            .finalize();
        chunk.iter_mut().zip(pad).for_each(|(b, p)| *b ^= p);
    }
}

fn insecure_tag(key: &[u8], nonce: &[u8], body: &[u8]) -> [u8; INSECURE_TAG_LEN] {
    Sha256::new()
        .chain_update(b"insecure-test tag")
        .chain_update(key)
        .chain_update(nonce)
        .chain_update(body)
        .finalize()
        .into()
}

/// Encrypts `plaintext` so that only the holder of the matching
/// [`DecryptionKey`] can recover it. Randomness comes from `rng`.
pub fn encrypt_to<R: RngCore + CryptoRng + ?Sized>(
    key: &EncryptionKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Ciphertext, CryptoError> {
    let bytes = match key.scheme {
        EncryptionScheme::X25519ChaCha20Poly1305 => {
            let recipient: [u8; 32] = key
                .bytes
                .as_slice()
                .try_into()
                .map_err(|_| CryptoError::MalformedKey("x25519"))?;
            let mut eph_secret = [0u8; 32];
            rng.fill_bytes(&mut eph_secret);
            let eph = x25519_dalek::StaticSecret::from(eph_secret);
            let eph_pub = x25519_dalek::PublicKey::from(&eph).to_bytes();
            let shared = eph.diffie_hellman(&x25519_dalek::PublicKey::from(recipient));
            if !shared.was_contributory() {
                return Err(CryptoError::MalformedKey("x25519"));
            }
            let aead_key = hybrid_key(shared.as_bytes(), &eph_pub, &recipient);
            let cipher = ChaCha20Poly1305::new(&aead_key.into());
            // Each message gets a fresh ephemeral key, so a fixed nonce is never reused.
            let sealed = cipher
                .encrypt(&Nonce::default(), plaintext)
                .map_err(|_| CryptoError::Integrity)?;
            let mut out = eph_pub.to_vec();
            out.extend_from_slice(&sealed);
            out
        }
        EncryptionScheme::InsecureTest => {
            let mut nonce = [0u8; INSECURE_NONCE_LEN];
            rng.fill_bytes(&mut nonce);
            let mut body = plaintext.to_vec();
            insecure_keystream_xor(&key.bytes, &nonce, &mut body);
            let tag = insecure_tag(&key.bytes, &nonce, &body);
            let mut out = nonce.to_vec();
            out.extend_from_slice(&body);
            out.extend_from_slice(&tag);
            out
        }
    };
    Ok(Ciphertext {
        scheme: key.scheme,
        bytes,
    })
}

pub fn decrypt(key: &DecryptionKey, ciphertext: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    if key.scheme != ciphertext.scheme {
        return Err(CryptoError::SchemeMismatch {
            expected: key.scheme.name(),
        });
    }
    let data = &ciphertext.bytes;
    match key.scheme {
        EncryptionScheme::X25519ChaCha20Poly1305 => {
            let secret: [u8; 32] = key
                .bytes
                .as_slice()
                .try_into()
                .map_err(|_| CryptoError::MalformedKey("x25519"))?;
            if data.len() < 32 + 16 {
                return Err(CryptoError::Truncated);
            }
            let (eph_pub, sealed) = data.split_at(32);
            let eph_pub: [u8; 32] = eph_pub.try_into().expect("split at 32");
            let sk = x25519_dalek::StaticSecret::from(secret);
            let recipient = x25519_dalek::PublicKey::from(&sk).to_bytes();
            let shared = sk.diffie_hellman(&x25519_dalek::PublicKey::from(eph_pub));
            if !shared.was_contributory() {
                return Err(CryptoError::Integrity);
            }
            let aead_key = hybrid_key(shared.as_bytes(), &eph_pub, &recipient);
            ChaCha20Poly1305::new(&aead_key.into())
                .decrypt(&Nonce::default(), sealed)
                .map_err(|_| CryptoError::Integrity)
        }
        EncryptionScheme::InsecureTest => {
            if data.len() < INSECURE_NONCE_LEN + INSECURE_TAG_LEN {
                return Err(CryptoError::Truncated);
            }
            let (nonce, rest) = data.split_at(INSECURE_NONCE_LEN);
            let (body, tag) = rest.split_at(rest.len() - INSECURE_TAG_LEN);
            if insecure_tag(&key.bytes, nonce, body) != tag {
                return Err(CryptoError::Integrity);
            }
            let mut plain = body.to_vec();
            insecure_keystream_xor(&key.bytes, nonce, &mut plain);
            Ok(plain)
        }
    }
}
