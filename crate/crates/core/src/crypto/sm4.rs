//! SM4 block cipher (GB/T 32907): raw 128-bit block operations plus the
//! CBC mode with block-length padding used for bulk payload encryption.

use rand::RngCore;

use super::{CryptoError, Sm4Key};

pub const BLOCK_LEN: usize = 16;

const SBOX: [u8; 256] = [
    0xd6, 0x90, 0xe9, 0xfe, 0xcc, 0xe1, 0x3d, 0xb7, 0x16, 0xb6, 0x14, 0xc2, 0x28, 0xfb, 0x2c, 0x05,
    0x2b, 0x67, 0x9a, 0x76, 0x2a, 0xbe, 0x04, 0xc3, 0xaa, 0x44, 0x13, 0x26, 0x49, 0x86, 0x06, 0x99,
    0x9c, 0x42, 0x50, 0xf4, 0x91, 0xef, 0x98, 0x7a, 0x33, 0x54, 0x0b, 0x43, 0xed, 0xcf, 0xac, 0x62,
    0xe4, 0xb3, 0x1c, 0xa9, 0xc9, 0x08, 0xe8, 0x95, 0x80, 0xdf, 0x94, 0xfa, 0x75, 0x8f, 0x3f, 0xa6,
    0x47, 0x07, 0xa7, 0xfc, 0xf3, 0x73, 0x17, 0xba, 0x83, 0x59, 0x3c, 0x19, 0xe6, 0x85, 0x4f, 0xa8,
    0x68, 0x6b, 0x81, 0xb2, 0x71, 0x64, 0xda, 0x8b, 0xf8, 0xeb, 0x0f, 0x4b, 0x70, 0x56, 0x9d, 0x35,
    0x1e, 0x24, 0x0e, 0x5e, 0x63, 0x58, 0xd1, 0xa2, 0x25, 0x22, 0x7c, 0x3b, 0x01, 0x21, 0x78, 0x87,
    0xd4, 0x00, 0x46, 0x57, 0x9f, 0xd3, 0x27, 0x52, 0x4c, 0x36, 0x02, 0xe7, 0xa0, 0xc4, 0xc8, 0x9e,
    0xea, 0xbf, 0x8a, 0xd2, 0x40, 0xc7, 0x38, 0xb5, 0xa3, 0xf7, 0xf2, 0xce, 0xf9, 0x61, 0x15, 0xa1,
    0xe0, 0xae, 0x5d, 0xa4, 0x9b, 0x34, 0x1a, 0x55, 0xad, 0x93, 0x32, 0x30, 0xf5, 0x8c, 0xb1, 0xe3,
    0x1d, 0xf6, 0xe2, 0x2e, 0x82, 0x66, 0xca, 0x60, 0xc0, 0x29, 0x23, 0xab, 0x0d, 0x53, 0x4e, 0x6f,
    0xd5, 0xdb, 0x37, 0x45, 0xde, 0xfd, 0x8e, 0x2f, 0x03, 0xff, 0x6a, 0x72, 0x6d, 0x6c, 0x5b, 0x51,
    0x8d, 0x1b, 0xaf, 0x92, 0xbb, 0xdd, 0xbc, 0x7f, 0x11, 0xd9, 0x5c, 0x41, 0x1f, 0x10, 0x5a, 0xd8,
    0x0a, 0xc1, 0x31, 0x88, 0xa5, 0xcd, 0x7b, 0xbd, 0x2d, 0x74, 0xd0, 0x12, 0xb8, 0xe5, 0xb4, 0xb0,
    0x89, 0x69, 0x97, 0x4a, 0x0c, 0x96, 0x77, 0x7e, 0x65, 0xb9, 0xf1, 0x09, 0xc5, 0x6e, 0xc6, 0x84,
    0x18, 0xf0, 0x7d, 0xec, 0x3a, 0xdc, 0x4d, 0x20, 0x79, 0xee, 0x5f, 0x3e, 0xd7, 0xcb, 0x39, 0x48,
];

const FK: [u32; 4] = [0xa3b1_bac6, 0x56aa_3350, 0x677d_9197, 0xb270_22dc];

const CK: [u32; 32] = [
    0x0007_0e15, 0x1c23_2a31, 0x383f_464d, 0x545b_6269, 0x7077_7e85, 0x8c93_9aa1, 0xa8af_b6bd,
    0xc4cb_d2d9, 0xe0e7_eef5, 0xfc03_0a11, 0x181f_262d, 0x343b_4249, 0x5057_5e65, 0x6c73_7a81,
    0x888f_969d, 0xa4ab_b2b9, 0xc0c7_ced5, 0xdce3_eaf1, 0xf8ff_060d, 0x141b_2229, 0x3037_3e45,
    0x4c53_5a61, 0x686f_767d, 0x848b_9299, 0xa0a7_aeb5, 0xbcc3_cad1, 0xd8df_e6ed, 0xf4fb_0209,
    0x1017_1e25, 0x2c33_3a41, 0x484f_565d, 0x646b_7279,
];

#[inline(always)]
fn tau(x: u32) -> u32 {
    let b = x.to_be_bytes();
    u32::from_be_bytes([
        SBOX[b[0] as usize],
        SBOX[b[1] as usize],
        SBOX[b[2] as usize],
        SBOX[b[3] as usize],
    ])
}

#[inline(always)]
fn t_enc(x: u32) -> u32 {
    let b = tau(x);
    b ^ b.rotate_left(2) ^ b.rotate_left(10) ^ b.rotate_left(18) ^ b.rotate_left(24)
}

#[inline(always)]
fn t_key(x: u32) -> u32 {
    let b = tau(x);
    b ^ b.rotate_left(13) ^ b.rotate_left(23)
}

/// Key-scheduled SM4 cipher.
#[derive(Clone)]
pub struct Sm4 {
    rk: [u32; 32],
}

impl Sm4 {
    pub fn new(key: &Sm4Key) -> Self {
        let kb = key.as_bytes();
        let mut k = [
            u32::from_be_bytes(kb[0..4].try_into().unwrap()) ^ FK[0],
            u32::from_be_bytes(kb[4..8].try_into().unwrap()) ^ FK[1],
            u32::from_be_bytes(kb[8..12].try_into().unwrap()) ^ FK[2],
            u32::from_be_bytes(kb[12..16].try_into().unwrap()) ^ FK[3],
        ];
        let mut rk = [0u32; 32];
        for i in 0..32 {
            let nk = k[0] ^ t_key(k[1] ^ k[2] ^ k[3] ^ CK[i]);
            rk[i] = nk;
            k = [k[1], k[2], k[3], nk];
        }
        Self { rk }
    }

    pub fn encrypt_block(&self, block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        self.crypt_block(block, false)
    }

    pub fn decrypt_block(&self, block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        self.crypt_block(block, true)
    }

    fn crypt_block(&self, block: &[u8; BLOCK_LEN], reverse: bool) -> [u8; BLOCK_LEN] {
        let mut x = [
            u32::from_be_bytes(block[0..4].try_into().unwrap()),
            u32::from_be_bytes(block[4..8].try_into().unwrap()),
            u32::from_be_bytes(block[8..12].try_into().unwrap()),
            u32::from_be_bytes(block[12..16].try_into().unwrap()),
        ];
        for i in 0..32 {
            let rk = if reverse { self.rk[31 - i] } else { self.rk[i] };
            let nx = x[0] ^ t_enc(x[1] ^ x[2] ^ x[3] ^ rk);
            x = [x[1], x[2], x[3], nx];
        }
        let mut out = [0u8; BLOCK_LEN];
        out[0..4].copy_from_slice(&x[3].to_be_bytes());
        out[4..8].copy_from_slice(&x[2].to_be_bytes());
        out[8..12].copy_from_slice(&x[1].to_be_bytes());
        out[12..16].copy_from_slice(&x[0].to_be_bytes());
        out
    }
}

/// CBC-encrypt with block-length padding (every pad byte equals the pad
/// length, 1..=16). Output excludes the IV and is always a non-empty
/// multiple of 16 bytes.
pub fn sm4_encrypt(key: &Sm4Key, plaintext: &[u8], iv: &[u8; BLOCK_LEN]) -> Vec<u8> {
    let cipher = Sm4::new(key);
    let pad = BLOCK_LEN - plaintext.len() % BLOCK_LEN;
    let mut buf = Vec::with_capacity(plaintext.len() + pad);
    buf.extend_from_slice(plaintext);
    buf.resize(plaintext.len() + pad, pad as u8);

    let mut prev = *iv;
    for chunk in buf.chunks_exact_mut(BLOCK_LEN) {
        for (b, p) in chunk.iter_mut().zip(prev.iter()) {
            *b ^= p;
        }
        prev = cipher.encrypt_block((&*chunk).try_into().unwrap());
        chunk.copy_from_slice(&prev);
    }
    buf
}

/// CBC-decrypt and strip padding. Fails with `CorruptCiphertext` on empty
/// input, non-block-multiple length, or malformed padding.
pub fn sm4_decrypt(
    key: &Sm4Key,
    ciphertext: &[u8],
    iv: &[u8; BLOCK_LEN],
) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.is_empty() || ciphertext.len() % BLOCK_LEN != 0 {
        return Err(CryptoError::CorruptCiphertext);
    }
    let cipher = Sm4::new(key);
    let mut out = Vec::with_capacity(ciphertext.len());
    let mut prev = *iv;
    for chunk in ciphertext.chunks_exact(BLOCK_LEN) {
        let block: [u8; BLOCK_LEN] = chunk.try_into().unwrap();
        let mut plain = cipher.decrypt_block(&block);
        for (b, p) in plain.iter_mut().zip(prev.iter()) {
            *b ^= p;
        }
        prev = block;
        out.extend_from_slice(&plain);
    }
    let pad = *out.last().unwrap() as usize;
    if pad == 0 || pad > BLOCK_LEN || out.len() < pad {
        return Err(CryptoError::CorruptCiphertext);
    }
    if out[out.len() - pad..].iter().any(|&b| b as usize != pad) {
        return Err(CryptoError::CorruptCiphertext);
    }
    out.truncate(out.len() - pad);
    Ok(out)
}

/// Encrypt and prepend the freshly drawn IV: `iv(16) || cbc-ciphertext`.
pub fn sm4_seal(key: &Sm4Key, plaintext: &[u8], rng: &mut dyn RngCore) -> Vec<u8> {
    let mut iv = [0u8; BLOCK_LEN];
    rng.fill_bytes(&mut iv);
    let mut out = Vec::with_capacity(BLOCK_LEN + plaintext.len() + BLOCK_LEN);
    out.extend_from_slice(&iv);
    out.extend_from_slice(&sm4_encrypt(key, plaintext, &iv));
    out
}

/// Inverse of [`sm4_seal`]: split the leading IV and decrypt.
pub fn sm4_open(key: &Sm4Key, sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < 2 * BLOCK_LEN {
        return Err(CryptoError::CorruptCiphertext);
    }
    let iv: [u8; BLOCK_LEN] = sealed[..BLOCK_LEN].try_into().unwrap();
    sm4_decrypt(key, &sealed[BLOCK_LEN..], &iv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn hexkey(s: &str) -> Sm4Key {
        Sm4Key::from_bytes(hex::decode(s).unwrap().try_into().unwrap())
    }

    #[test]
    fn standard_block_vector() {
        let key = hexkey("0123456789abcdeffedcba9876543210");
        let block: [u8; 16] = hex::decode("0123456789abcdeffedcba9876543210")
            .unwrap()
            .try_into()
            .unwrap();
        let ct = Sm4::new(&key).encrypt_block(&block);
        assert_eq!(hex::encode(ct), "681edf34d206965e86b3e94f536e4246");
        assert_eq!(Sm4::new(&key).decrypt_block(&ct), block);
    }

    #[test]
    fn round_trip_various_lengths() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let key = Sm4Key::generate(&mut rng);
        let mut iv = [0u8; 16];
        rng.fill_bytes(&mut iv);
        for len in [0usize, 1, 15, 16, 17, 1024] {
            let mut msg = vec![0u8; len];
            rng.fill_bytes(&mut msg);
            let ct = sm4_encrypt(&key, &msg, &iv);
            assert_eq!(ct.len(), (msg.len() / 16 + 1) * 16);
            assert_eq!(sm4_decrypt(&key, &ct, &iv).unwrap(), msg, "len {len}");
        }
    }

    #[test]
    fn wrong_key_fails_or_differs() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let key = Sm4Key::generate(&mut rng);
        let other = Sm4Key::generate(&mut rng);
        let iv = [9u8; 16];
        let msg = b"attack at dawn, bring the lidar";
        let ct = sm4_encrypt(&key, msg, &iv);
        match sm4_decrypt(&other, &ct, &iv) {
            Err(CryptoError::CorruptCiphertext) => {}
            Ok(pt) => assert_ne!(pt, msg.to_vec()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn malformed_ciphertext_rejected() {
        let key = hexkey("0123456789abcdeffedcba9876543210");
        let iv = [0u8; 16];
        assert!(matches!(
            sm4_decrypt(&key, &[], &iv),
            Err(CryptoError::CorruptCiphertext)
        ));
        assert!(matches!(
            sm4_decrypt(&key, &[0u8; 17], &iv),
            Err(CryptoError::CorruptCiphertext)
        ));
    }

    #[test]
    fn seal_open_round_trip_and_fresh_iv() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let key = Sm4Key::generate(&mut rng);
        let msg = b"sealed payload";
        let a = sm4_seal(&key, msg, &mut rng);
        let b = sm4_seal(&key, msg, &mut rng);
        assert_ne!(a, b, "fresh IV must randomize ciphertext");
        assert_eq!(sm4_open(&key, &a).unwrap(), msg.to_vec());
        assert_eq!(sm4_open(&key, &b).unwrap(), msg.to_vec());
    }
}
