//! SM2 elliptic-curve public-key scheme (GB/T 32918) over the recommended
//! 256-bit prime curve: key generation, digital signatures with the Z_A
//! identity prefix, public-key encryption (C1 || C3 || C2 ordering), and
//! the counter-mode SM3 key derivation function.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;

use super::sm3::{sm3_hash_parts, Sm3};
use super::{CryptoError, Digest32};

/// Recommended curve parameters, hex big-endian.
const P_HEX: &str = "FFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF00000000FFFFFFFFFFFFFFFF";
const A_HEX: &str = "FFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF00000000FFFFFFFFFFFFFFFC";
const B_HEX: &str = "28E9FA9E9D9F5E344D5A9E4BCF6509A7F39789F515AB8F92DDBCBD414D940E93";
const N_HEX: &str = "FFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFF7203DF6B21C6052B53BBF40939D54123";
const GX_HEX: &str = "32C4AE2C1F1981195F9904466A39C9948FE30BBFF2660BE1715A4589334C74C7";
const GY_HEX: &str = "BC3736A2F4F6779C59BDCEE36B692153D0A9877CC62A474002DF32E52139F0A0";

struct Curve {
    p: BigUint,
    a: BigUint,
    b: BigUint,
    n: BigUint,
    g: Affine,
    a_bytes: [u8; 32],
    b_bytes: [u8; 32],
    gx_bytes: [u8; 32],
    gy_bytes: [u8; 32],
}

fn curve() -> &'static Curve {
    static CURVE: OnceLock<Curve> = OnceLock::new();
    CURVE.get_or_init(|| {
        let from = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).unwrap();
        let (p, a, b, n) = (from(P_HEX), from(A_HEX), from(B_HEX), from(N_HEX));
        let (gx, gy) = (from(GX_HEX), from(GY_HEX));
        Curve {
            a_bytes: to_bytes32(&a),
            b_bytes: to_bytes32(&b),
            gx_bytes: to_bytes32(&gx),
            gy_bytes: to_bytes32(&gy),
            g: Affine {
                x: gx.clone(),
                y: gy.clone(),
            },
            p,
            a,
            b,
            n,
        }
    })
}

/// The curve group order n.
pub fn curve_order() -> BigUint {
    curve().n.clone()
}

/// The base point G.
pub fn generator() -> CurvePoint {
    let c = curve();
    CurvePoint {
        x: FieldElement(c.g.x.clone()),
        y: FieldElement(c.g.y.clone()),
        infinity: false,
    }
}

fn to_bytes32(v: &BigUint) -> [u8; 32] {
    let raw = v.to_bytes_be();
    assert!(raw.len() <= 32, "value exceeds 256 bits");
    let mut out = [0u8; 32];
    out[32 - raw.len()..].copy_from_slice(&raw);
    out
}

/// An element of the SM2 prime field, held reduced modulo p.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn from_biguint(v: BigUint) -> Self {
        FieldElement(v % &curve().p)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        to_bytes32(&self.0)
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }
}

impl std::fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", hex::encode(self.to_bytes()))
    }
}

// Modular helpers over an arbitrary modulus m.
fn add_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    (a + b) % m
}

fn sub_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    if a >= b {
        (a - b) % m
    } else {
        m - ((b - a) % m)
    }
}

fn mul_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    (a * b) % m
}

/// Modular inverse for prime modulus via Fermat.
fn inv_mod(a: &BigUint, m: &BigUint) -> BigUint {
    a.modpow(&(m - 2u32), m)
}

/// Affine point, never infinity.
#[derive(Clone, PartialEq, Eq)]
struct Affine {
    x: BigUint,
    y: BigUint,
}

/// Jacobian projective point; z = 0 encodes the identity.
#[derive(Clone)]
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl Jacobian {
    fn identity() -> Self {
        Jacobian {
            x: BigUint::one(),
            y: BigUint::one(),
            z: BigUint::zero(),
        }
    }

    fn is_identity(&self) -> bool {
        self.z.is_zero()
    }

    fn from_affine(p: &Affine) -> Self {
        Jacobian {
            x: p.x.clone(),
            y: p.y.clone(),
            z: BigUint::one(),
        }
    }

    fn to_affine(&self) -> Option<Affine> {
        if self.is_identity() {
            return None;
        }
        let p = &curve().p;
        let zi = inv_mod(&self.z, p);
        let zi2 = mul_mod(&zi, &zi, p);
        let zi3 = mul_mod(&zi2, &zi, p);
        Some(Affine {
            x: mul_mod(&self.x, &zi2, p),
            y: mul_mod(&self.y, &zi3, p),
        })
    }

    fn double(&self) -> Jacobian {
        if self.is_identity() || self.y.is_zero() {
            return Jacobian::identity();
        }
        let c = curve();
        let p = &c.p;
        // a = p - 3, so M = 3(X + Z^2)(X - Z^2).
        let z2 = mul_mod(&self.z, &self.z, p);
        let m = mul_mod(
            &BigUint::from(3u32),
            &mul_mod(&add_mod(&self.x, &z2, p), &sub_mod(&self.x, &z2, p), p),
            p,
        );
        let y2 = mul_mod(&self.y, &self.y, p);
        let s = mul_mod(&BigUint::from(4u32), &mul_mod(&self.x, &y2, p), p);
        let x3 = sub_mod(&mul_mod(&m, &m, p), &add_mod(&s, &s, p), p);
        let y4_8 = mul_mod(&BigUint::from(8u32), &mul_mod(&y2, &y2, p), p);
        let y3 = sub_mod(&mul_mod(&m, &sub_mod(&s, &x3, p), p), &y4_8, p);
        let z3 = mul_mod(&BigUint::from(2u32), &mul_mod(&self.y, &self.z, p), p);
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn add(&self, other: &Jacobian) -> Jacobian {
        if self.is_identity() {
            return other.clone();
        }
        if other.is_identity() {
            return self.clone();
        }
        let p = &curve().p;
        let z1z1 = mul_mod(&self.z, &self.z, p);
        let z2z2 = mul_mod(&other.z, &other.z, p);
        let u1 = mul_mod(&self.x, &z2z2, p);
        let u2 = mul_mod(&other.x, &z1z1, p);
        let s1 = mul_mod(&self.y, &mul_mod(&z2z2, &other.z, p), p);
        let s2 = mul_mod(&other.y, &mul_mod(&z1z1, &self.z, p), p);
        if u1 == u2 {
            return if s1 == s2 {
                self.double()
            } else {
                Jacobian::identity()
            };
        }
        let h = sub_mod(&u2, &u1, p);
        let r = sub_mod(&s2, &s1, p);
        let h2 = mul_mod(&h, &h, p);
        let h3 = mul_mod(&h2, &h, p);
        let u1h2 = mul_mod(&u1, &h2, p);
        let x3 = sub_mod(
            &sub_mod(&mul_mod(&r, &r, p), &h3, p),
            &add_mod(&u1h2, &u1h2, p),
            p,
        );
        let y3 = sub_mod(
            &mul_mod(&r, &sub_mod(&u1h2, &x3, p), p),
            &mul_mod(&s1, &h3, p),
            p,
        );
        let z3 = mul_mod(&mul_mod(&self.z, &other.z, p), &h, p);
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }
}

/// Fixed 4-bit window scalar multiplication.
fn scalar_mul(k: &BigUint, point: &Jacobian) -> Jacobian {
    if k.is_zero() || point.is_identity() {
        return Jacobian::identity();
    }
    // table[i] = i * point for i in 1..16
    let mut table: Vec<Jacobian> = Vec::with_capacity(15);
    table.push(point.clone());
    for i in 1..15 {
        table.push(table[i - 1].add(point));
    }
    let bytes = to_bytes32(&(k % &curve().n));
    let mut acc = Jacobian::identity();
    let mut started = false;
    for byte in bytes {
        for nibble in [byte >> 4, byte & 0x0f] {
            if started {
                acc = acc.double().double().double().double();
            }
            if nibble != 0 {
                acc = acc.add(&table[(nibble - 1) as usize]);
                started = true;
            }
        }
    }
    acc
}

fn mul_base(k: &BigUint) -> Jacobian {
    scalar_mul(k, &Jacobian::from_affine(&curve().g))
}

/// A point on the SM2 curve (or the identity element).
#[derive(Clone, PartialEq, Eq)]
pub struct CurvePoint {
    x: FieldElement,
    y: FieldElement,
    infinity: bool,
}

impl CurvePoint {
    pub fn identity() -> Self {
        CurvePoint {
            x: FieldElement(BigUint::zero()),
            y: FieldElement(BigUint::zero()),
            infinity: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.infinity
    }

    pub fn x(&self) -> &FieldElement {
        &self.x
    }

    pub fn y(&self) -> &FieldElement {
        &self.y
    }

    /// Construct from affine coordinates, checking the curve equation
    /// y^2 = x^3 + ax + b (mod p).
    pub fn from_coordinates(x: BigUint, y: BigUint) -> Result<Self, CryptoError> {
        let c = curve();
        if x >= c.p || y >= c.p {
            return Err(CryptoError::InvalidPoint);
        }
        let lhs = mul_mod(&y, &y, &c.p);
        let x3 = mul_mod(&mul_mod(&x, &x, &c.p), &x, &c.p);
        let rhs = add_mod(&add_mod(&x3, &mul_mod(&c.a, &x, &c.p), &c.p), &c.b, &c.p);
        if lhs != rhs {
            return Err(CryptoError::InvalidPoint);
        }
        Ok(CurvePoint {
            x: FieldElement(x),
            y: FieldElement(y),
            infinity: false,
        })
    }

    /// Uncompressed encoding: 0x04 || x(32) || y(32). The identity has no
    /// encoding.
    pub fn to_bytes(&self) -> Result<[u8; 65], CryptoError> {
        if self.infinity {
            return Err(CryptoError::InvalidPoint);
        }
        let mut out = [0u8; 65];
        out[0] = 0x04;
        out[1..33].copy_from_slice(&self.x.to_bytes());
        out[33..65].copy_from_slice(&self.y.to_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 65 || bytes[0] != 0x04 {
            return Err(CryptoError::BadEncoding("curve point"));
        }
        let x = BigUint::from_bytes_be(&bytes[1..33]);
        let y = BigUint::from_bytes_be(&bytes[33..65]);
        Self::from_coordinates(x, y)
    }

    pub fn add(&self, other: &CurvePoint) -> CurvePoint {
        from_jacobian(self.to_jacobian().add(&other.to_jacobian()))
    }

    pub fn mul(&self, scalar: &BigUint) -> CurvePoint {
        from_jacobian(scalar_mul(scalar, &self.to_jacobian()))
    }

    fn to_jacobian(&self) -> Jacobian {
        if self.infinity {
            Jacobian::identity()
        } else {
            Jacobian::from_affine(&Affine {
                x: self.x.0.clone(),
                y: self.y.0.clone(),
            })
        }
    }
}

impl std::fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.infinity {
            write!(f, "CurvePoint(infinity)")
        } else {
            write!(f, "CurvePoint({:?}, {:?})", self.x, self.y)
        }
    }
}

fn from_jacobian(j: Jacobian) -> CurvePoint {
    match j.to_affine() {
        None => CurvePoint::identity(),
        Some(a) => CurvePoint {
            x: FieldElement(a.x),
            y: FieldElement(a.y),
            infinity: false,
        },
    }
}

/// SM2 key pair: private scalar d in [1, n-2] and public point P = [d]G.
#[derive(Clone)]
pub struct Sm2KeyPair {
    private_key: BigUint,
    public_key: CurvePoint,
}

impl Sm2KeyPair {
    pub fn private_key(&self) -> &BigUint {
        &self.private_key
    }

    pub fn public_key(&self) -> &CurvePoint {
        &self.public_key
    }

    pub fn private_key_bytes(&self) -> [u8; 32] {
        to_bytes32(&self.private_key)
    }

    pub fn from_private_key_bytes(bytes: &[u8; 32]) -> Result<Self, CryptoError> {
        let d = BigUint::from_bytes_be(bytes);
        let n = &curve().n;
        if d.is_zero() || d > n - 2u32 {
            return Err(CryptoError::InvalidKey);
        }
        let public_key = from_jacobian(mul_base(&d));
        Ok(Sm2KeyPair {
            private_key: d,
            public_key,
        })
    }
}

impl std::fmt::Debug for Sm2KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sm2KeyPair(public: {:?})", self.public_key)
    }
}

/// Draw a uniform scalar in [1, upper] by rejection sampling.
fn random_scalar(rng: &mut dyn RngCore, upper: &BigUint) -> BigUint {
    loop {
        let mut buf = [0u8; 32];
        rng.fill_bytes(&mut buf);
        let v = BigUint::from_bytes_be(&buf);
        if !v.is_zero() && &v <= upper {
            return v;
        }
    }
}

/// Generate a fresh key pair; d is rejection-sampled into [1, n-2].
pub fn sm2_keygen(rng: &mut dyn RngCore) -> Sm2KeyPair {
    let n = &curve().n;
    let d = random_scalar(rng, &(n - 2u32));
    let public_key = from_jacobian(mul_base(&d));
    Sm2KeyPair {
        private_key: d,
        public_key,
    }
}

/// Standard public-key validation: on-curve (type invariant), not the
/// identity, and [n]P = identity.
pub fn validate_public_key(point: &CurvePoint) -> bool {
    !point.is_identity() && point.mul(&curve().n).is_identity()
}

/// SM2 signature (r, s), both in [1, n-1].
#[derive(Clone, PartialEq, Eq)]
pub struct Sm2Signature {
    r: BigUint,
    s: BigUint,
}

impl Sm2Signature {
    /// Encoding: r(32) || s(32).
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&to_bytes32(&self.r));
        out[32..].copy_from_slice(&to_bytes32(&self.s));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 64 {
            return Err(CryptoError::BadEncoding("signature"));
        }
        Ok(Sm2Signature {
            r: BigUint::from_bytes_be(&bytes[..32]),
            s: BigUint::from_bytes_be(&bytes[32..]),
        })
    }
}

impl std::fmt::Debug for Sm2Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sm2Signature({})", hex::encode(self.to_bytes()))
    }
}

/// Z_A = SM3(ENTL || ID || a || b || xG || yG || xA || yA).
fn identity_digest(identity_label: &[u8], public_key: &CurvePoint) -> Digest32 {
    let c = curve();
    let entl = ((identity_label.len() * 8) as u16).to_be_bytes();
    sm3_hash_parts(&[
        &entl,
        identity_label,
        &c.a_bytes,
        &c.b_bytes,
        &c.gx_bytes,
        &c.gy_bytes,
        &public_key.x.to_bytes(),
        &public_key.y.to_bytes(),
    ])
}

fn message_digest(identity_label: &[u8], public_key: &CurvePoint, message: &[u8]) -> BigUint {
    let za = identity_digest(identity_label, public_key);
    let mut h = Sm3::new();
    h.update(za.as_bytes());
    h.update(message);
    BigUint::from_bytes_be(h.finalize().as_bytes())
}

/// Sign a message. Retries internally on degenerate r/s draws.
pub fn sm2_sign(
    keypair: &Sm2KeyPair,
    identity_label: &[u8],
    message: &[u8],
    rng: &mut dyn RngCore,
) -> Sm2Signature {
    let n = &curve().n;
    let e = message_digest(identity_label, &keypair.public_key, message);
    loop {
        let k = random_scalar(rng, &(n - 1u32));
        let p1 = match mul_base(&k).to_affine() {
            Some(p) => p,
            None => continue,
        };
        let r = add_mod(&e, &p1.x, n);
        if r.is_zero() || add_mod(&r, &k, n).is_zero() {
            continue;
        }
        let inv = inv_mod(&add_mod(&keypair.private_key, &BigUint::one(), n), n);
        let rd = mul_mod(&r, &keypair.private_key, n);
        let s = mul_mod(&inv, &sub_mod(&k, &rd, n), n);
        if s.is_zero() {
            continue;
        }
        return Sm2Signature { r, s };
    }
}

/// Verify a signature. Never errors; malformed inputs verify false.
pub fn sm2_verify(
    public_key: &CurvePoint,
    identity_label: &[u8],
    message: &[u8],
    sig: &Sm2Signature,
) -> bool {
    let n = &curve().n;
    let in_range = |v: &BigUint| !v.is_zero() && v < n;
    if !in_range(&sig.r) || !in_range(&sig.s) || public_key.is_identity() {
        return false;
    }
    let t = add_mod(&sig.r, &sig.s, n);
    if t.is_zero() {
        return false;
    }
    let e = message_digest(identity_label, public_key, message);
    let point = mul_base(&sig.s).add(&scalar_mul(&t, &public_key.to_jacobian()));
    let affine = match point.to_affine() {
        Some(p) => p,
        None => return false,
    };
    add_mod(&e, &affine.x, n) == sig.r
}

/// SM2 public-key ciphertext in C1 || C3 || C2 ordering.
#[derive(Clone, PartialEq, Eq)]
pub struct Sm2Ciphertext {
    pub c1: CurvePoint,
    pub c3: Digest32,
    pub c2: Vec<u8>,
}

impl Sm2Ciphertext {
    /// Encoding: C1(65, uncompressed) || C3(32) || C2(var).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(97 + self.c2.len());
        out.extend_from_slice(&self.c1.to_bytes().expect("C1 is never the identity"));
        out.extend_from_slice(self.c3.as_bytes());
        out.extend_from_slice(&self.c2);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < 98 {
            return Err(CryptoError::BadEncoding("sm2 ciphertext"));
        }
        let c1 = CurvePoint::from_bytes(&bytes[..65]).map_err(|_| CryptoError::InvalidCiphertext)?;
        let c3 = Digest32::from_slice(&bytes[65..97]).unwrap();
        Ok(Sm2Ciphertext {
            c1,
            c3,
            c2: bytes[97..].to_vec(),
        })
    }
}

impl std::fmt::Debug for Sm2Ciphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sm2Ciphertext({} bytes)", 97 + self.c2.len())
    }
}

/// Counter-mode SM3 key derivation. `output_bits` must be a positive
/// multiple of 8; an all-zero expansion is reported as an error so callers
/// can reject the draw.
pub fn sm2_kdf(shared_material: &[u8], output_bits: usize) -> Result<Vec<u8>, CryptoError> {
    if output_bits == 0 || output_bits % 8 != 0 {
        return Err(CryptoError::BadEncoding("kdf length"));
    }
    let out_len = output_bits / 8;
    let mut out = Vec::with_capacity(out_len + 32);
    let mut counter: u32 = 1;
    while out.len() < out_len {
        let mut h = Sm3::new();
        h.update(shared_material);
        h.update(&counter.to_be_bytes());
        out.extend_from_slice(h.finalize().as_bytes());
        counter += 1;
    }
    out.truncate(out_len);
    if out.iter().all(|&b| b == 0) {
        return Err(CryptoError::KdfAllZero);
    }
    Ok(out)
}

/// Encrypt to a recipient public key. Draws a fresh ephemeral scalar per
/// call (and redraws on the astronomically unlikely all-zero KDF mask).
pub fn sm2_encrypt(
    recipient: &CurvePoint,
    plaintext: &[u8],
    rng: &mut dyn RngCore,
) -> Result<Sm2Ciphertext, CryptoError> {
    if plaintext.is_empty() {
        return Err(CryptoError::BadEncoding("empty plaintext"));
    }
    if recipient.is_identity() {
        return Err(CryptoError::InvalidPoint);
    }
    let n = &curve().n;
    loop {
        let k = random_scalar(rng, &(n - 1u32));
        let c1 = from_jacobian(mul_base(&k));
        let shared = match scalar_mul(&k, &recipient.to_jacobian()).to_affine() {
            Some(p) => p,
            None => continue,
        };
        let x2 = to_bytes32(&shared.x);
        let y2 = to_bytes32(&shared.y);
        let mut material = Vec::with_capacity(64);
        material.extend_from_slice(&x2);
        material.extend_from_slice(&y2);
        let mask = match sm2_kdf(&material, plaintext.len() * 8) {
            Ok(m) => m,
            Err(CryptoError::KdfAllZero) => continue,
            Err(e) => return Err(e),
        };
        let c2: Vec<u8> = plaintext.iter().zip(mask.iter()).map(|(m, t)| m ^ t).collect();
        let c3 = sm3_hash_parts(&[&x2, plaintext, &y2]);
        return Ok(Sm2Ciphertext { c1, c3, c2 });
    }
}

/// Decrypt with the recipient private key. Any integrity failure (off-curve
/// C1, zero mask, C3 mismatch) reports `InvalidCiphertext`.
pub fn sm2_decrypt(private_key: &BigUint, ct: &Sm2Ciphertext) -> Result<Vec<u8>, CryptoError> {
    if ct.c1.is_identity() || ct.c2.is_empty() {
        return Err(CryptoError::InvalidCiphertext);
    }
    let shared = match scalar_mul(private_key, &ct.c1.to_jacobian()).to_affine() {
        Some(p) => p,
        None => return Err(CryptoError::InvalidCiphertext),
    };
    let x2 = to_bytes32(&shared.x);
    let y2 = to_bytes32(&shared.y);
    let mut material = Vec::with_capacity(64);
    material.extend_from_slice(&x2);
    material.extend_from_slice(&y2);
    let mask =
        sm2_kdf(&material, ct.c2.len() * 8).map_err(|_| CryptoError::InvalidCiphertext)?;
    let plaintext: Vec<u8> = ct.c2.iter().zip(mask.iter()).map(|(c, t)| c ^ t).collect();
    let c3 = sm3_hash_parts(&[&x2, &plaintext, &y2]);
    if c3 != ct.c3 {
        return Err(CryptoError::InvalidCiphertext);
    }
    Ok(plaintext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn generator_is_on_curve_and_valid() {
        let g = generator();
        assert!(validate_public_key(&g));
    }

    #[test]
    fn scalar_one_yields_generator() {
        let kp = Sm2KeyPair::from_private_key_bytes(&{
            let mut b = [0u8; 32];
            b[31] = 1;
            b
        })
        .unwrap();
        assert_eq!(*kp.public_key(), generator());
    }

    #[test]
    fn generated_keys_validate() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..4 {
            let kp = sm2_keygen(&mut rng);
            assert!(validate_public_key(kp.public_key()));
        }
    }

    #[test]
    fn order_times_point_is_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = sm2_keygen(&mut rng);
        assert!(kp.public_key().mul(&curve_order()).is_identity());
    }

    #[test]
    fn addition_commutes_and_associates() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = sm2_keygen(&mut rng).public_key().clone();
        let b = sm2_keygen(&mut rng).public_key().clone();
        let c = sm2_keygen(&mut rng).public_key().clone();
        assert_eq!(a.add(&b), b.add(&a));
        assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
    }

    #[test]
    fn scalar_mul_composes() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let n = curve_order();
        for _ in 0..3 {
            let a = random_scalar(&mut rng, &(&n - 1u32));
            let b = random_scalar(&mut rng, &(&n - 1u32));
            let lhs = generator().mul(&b).mul(&a);
            let rhs = generator().mul(&((&a * &b) % &n));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn sign_verify_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = sm2_keygen(&mut rng);
        let msg = b"odometry frame 42";
        let sig = sm2_sign(&kp, crate::crypto::DEFAULT_IDENTITY, msg, &mut rng);
        assert!(sm2_verify(
            kp.public_key(),
            crate::crypto::DEFAULT_IDENTITY,
            msg,
            &sig
        ));
    }

    #[test]
    fn verify_rejects_perturbations() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let kp = sm2_keygen(&mut rng);
        let id = crate::crypto::DEFAULT_IDENTITY;
        let msg = b"tamper with me";
        let sig = sm2_sign(&kp, id, msg, &mut rng);

        let mut flipped = msg.to_vec();
        flipped[0] ^= 0x01;
        assert!(!sm2_verify(kp.public_key(), id, &flipped, &sig));
        assert!(!sm2_verify(kp.public_key(), b"1234567812345679", msg, &sig));

        let mut bytes = sig.to_bytes().to_vec();
        bytes[5] ^= 0x80;
        let mutated = Sm2Signature::from_bytes(&bytes).unwrap();
        assert!(!sm2_verify(kp.public_key(), id, msg, &mutated));

        let other = sm2_keygen(&mut rng);
        assert!(!sm2_verify(other.public_key(), id, msg, &sig));
    }

    #[test]
    fn encrypt_decrypt_round_trip_48_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let kp = sm2_keygen(&mut rng);
        let msg: Vec<u8> = (0..48).collect();
        let ct = sm2_encrypt(kp.public_key(), &msg, &mut rng).unwrap();
        assert_eq!(ct.c2.len(), msg.len());
        assert_eq!(sm2_decrypt(kp.private_key(), &ct).unwrap(), msg);
    }

    #[test]
    fn tampered_c2_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let kp = sm2_keygen(&mut rng);
        let mut ct = sm2_encrypt(kp.public_key(), b"secret sm4 key material", &mut rng).unwrap();
        ct.c2[3] ^= 0x40;
        assert_eq!(
            sm2_decrypt(kp.private_key(), &ct),
            Err(CryptoError::InvalidCiphertext)
        );
    }

    #[test]
    fn wrong_private_key_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let kp = sm2_keygen(&mut rng);
        let msg = b"forty-eight bytes of key exchange payload......";
        for _ in 0..100 {
            let ct = sm2_encrypt(kp.public_key(), msg, &mut rng).unwrap();
            let wrong = sm2_keygen(&mut rng);
            assert!(sm2_decrypt(wrong.private_key(), &ct).is_err());
        }
    }

    #[test]
    fn kdf_prefix_property() {
        let x = b"shared secret material";
        let long = sm2_kdf(x, 256).unwrap();
        let short = sm2_kdf(x, 128).unwrap();
        assert_eq!(&long[..16], &short[..]);
    }

    #[test]
    fn kdf_collision_spot_check() {
        use std::collections::HashSet;
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let mut z = [0u8; 24];
            rng.fill_bytes(&mut z);
            assert!(seen.insert(sm2_kdf(&z, 128).unwrap()), "kdf collision");
        }
    }

    #[test]
    fn kdf_rejects_bad_lengths() {
        assert!(sm2_kdf(b"z", 0).is_err());
        assert!(sm2_kdf(b"z", 12).is_err());
    }

    #[test]
    fn point_encoding_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let kp = sm2_keygen(&mut rng);
        let bytes = kp.public_key().to_bytes().unwrap();
        assert_eq!(CurvePoint::from_bytes(&bytes).unwrap(), *kp.public_key());
        // Perturbing x off the curve must fail.
        let mut bad = bytes;
        bad[10] ^= 0xff;
        assert!(CurvePoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn ciphertext_encoding_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let kp = sm2_keygen(&mut rng);
        let ct = sm2_encrypt(kp.public_key(), b"framed", &mut rng).unwrap();
        let decoded = Sm2Ciphertext::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(decoded, ct);
    }
}
