#!/usr/bin/env python3
"""Reference-implementation oracle for the vectors/ known-answer fixtures.

Independent Python implementations of SM3 (GB/T 0004), SM4 (GB/T 32907),
SM2 (GB/T 32918, recommended curve) and Keccak-256, written directly from
the standards. Anchored against published constants before any generated
vector is frozen (the script aborts if an anchor mismatches).

Usage: python3 tools/gen_vectors.py [vectors-dir]
"""

import os
import struct
import sys

# ---------------------------------------------------------------- SM3

_SM3_IV = [
    0x7380166F, 0x4914B2B9, 0x172442D7, 0xDA8A0600,
    0xA96F30BC, 0x163138AA, 0xE38DEE4D, 0xB0FB0E4E,
]


def _rotl(x, n):
    n %= 32
    return ((x << n) | (x >> (32 - n))) & 0xFFFFFFFF


def _sm3_compress(v, block):
    w = list(struct.unpack(">16I", block))
    for j in range(16, 68):
        w.append(_rotl(w[j - 16] ^ w[j - 9] ^ _rotl(w[j - 3], 15), 0)
                 ^ _rotl(w[j - 16] ^ w[j - 9] ^ _rotl(w[j - 3], 15), 15)
                 ^ _rotl(w[j - 16] ^ w[j - 9] ^ _rotl(w[j - 3], 15), 23)
                 ^ _rotl(w[j - 13], 7) ^ w[j - 6])
    # P1(x) = x ^ (x <<< 15) ^ (x <<< 23); the expression above inlines it.
    w1 = [w[j] ^ w[j + 4] for j in range(64)]
    a, b, c, d, e, f, g, h = v
    for j in range(64):
        t = 0x79CC4519 if j < 16 else 0x7A879D8A
        ss1 = _rotl((_rotl(a, 12) + e + _rotl(t, j)) & 0xFFFFFFFF, 7)
        ss2 = ss1 ^ _rotl(a, 12)
        if j < 16:
            ff = a ^ b ^ c
            gg = e ^ f ^ g
        else:
            ff = (a & b) | (a & c) | (b & c)
            gg = (e & f) | ((~e & 0xFFFFFFFF) & g)
        tt1 = (ff + d + ss2 + w1[j]) & 0xFFFFFFFF
        tt2 = (gg + h + ss1 + w[j]) & 0xFFFFFFFF
        d = c
        c = _rotl(b, 9)
        b = a
        a = tt1
        h = g
        g = _rotl(f, 19)
        f = e
        e = tt2 ^ _rotl(tt2, 9) ^ _rotl(tt2, 17)  # P0
    return [x ^ y for x, y in zip(v, [a, b, c, d, e, f, g, h])]


def sm3(msg: bytes) -> bytes:
    bitlen = len(msg) * 8
    msg = msg + b"\x80"
    while (len(msg) + 8) % 64:
        msg += b"\x00"
    msg += struct.pack(">Q", bitlen)
    v = _SM3_IV[:]
    for i in range(0, len(msg), 64):
        v = _sm3_compress(v, msg[i:i + 64])
    return b"".join(struct.pack(">I", x) for x in v)


# ---------------------------------------------------------------- SM4

_SBOX = bytes.fromhex(
    "d690e9fecce13db716b614c228fb2c05"
    "2b679a762abe04c3aa44132649860699"
    "9c4250f491ef987a33540b43edcfac62"
    "e4b31ca9c908e89580df94fa758f3fa6"
    "4707a7fcf37317ba83593c19e6854fa8"
    "686b81b27164da8bf8eb0f4b70569d35"
    "1e240e5e6358d1a225227c3b01217887"
    "d40046579fd327524c3602e7a0c4c89e"
    "eabf8ad240c738b5a3f7f2cef96115a1"
    "e0ae5da49b341a55ad933230f58cb1e3"
    "1df6e22e8266ca60c02923ab0d534e6f"
    "d5db3745defd8e2f03ff6a726d6c5b51"
    "8d1baf92bbddbc7f11d95c411f105ad8"
    "0ac13188a5cd7bbd2d74d012b8e5b4b0"
    "8969974a0c96777e65b9f109c56ec684"
    "18f07dec3adc4d2079ee5f3ed7cb3948"
)
_FK = [0xA3B1BAC6, 0x56AA3350, 0x677D9197, 0xB27022DC]
_CK = [((4 * i * 7 % 256) << 24 | ((4 * i + 1) * 7 % 256) << 16
        | ((4 * i + 2) * 7 % 256) << 8 | ((4 * i + 3) * 7 % 256))
       for i in range(32)]


def _tau(x):
    b = struct.pack(">I", x)
    return struct.unpack(">I", bytes(_SBOX[c] for c in b))[0]


def _sm4_round_keys(key: bytes):
    k = [struct.unpack(">I", key[i:i + 4])[0] ^ _FK[i // 4] for i in range(0, 16, 4)]
    rk = []
    for i in range(32):
        t = _tau(k[1] ^ k[2] ^ k[3] ^ _CK[i])
        nk = k[0] ^ t ^ _rotl(t, 13) ^ _rotl(t, 23)
        rk.append(nk)
        k = [k[1], k[2], k[3], nk]
    return rk


def _sm4_block(rk, block: bytes) -> bytes:
    x = list(struct.unpack(">4I", block))
    for i in range(32):
        t = _tau(x[1] ^ x[2] ^ x[3] ^ rk[i])
        nx = x[0] ^ t ^ _rotl(t, 2) ^ _rotl(t, 10) ^ _rotl(t, 18) ^ _rotl(t, 24)
        x = [x[1], x[2], x[3], nx]
    return struct.pack(">4I", x[3], x[2], x[1], x[0])


def sm4_encrypt_block(key: bytes, block: bytes) -> bytes:
    return _sm4_block(_sm4_round_keys(key), block)


def sm4_cbc_encrypt(key: bytes, iv: bytes, pt: bytes) -> bytes:
    pad = 16 - len(pt) % 16
    pt = pt + bytes([pad]) * pad
    rk = _sm4_round_keys(key)
    out = b""
    prev = iv
    for i in range(0, len(pt), 16):
        blk = bytes(a ^ b for a, b in zip(pt[i:i + 16], prev))
        prev = _sm4_block(rk, blk)
        out += prev
    return out


# ---------------------------------------------------------------- SM2 curve

P = 0xFFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF00000000FFFFFFFFFFFFFFFF
A = 0xFFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF00000000FFFFFFFFFFFFFFFC
B = 0x28E9FA9E9D9F5E344D5A9E4BCF6509A7F39789F515AB8F92DDBCBD414D940E93
N = 0xFFFFFFFEFFFFFFFFFFFFFFFFFFFFFFFF7203DF6B21C6052B53BBF40939D54123
GX = 0x32C4AE2C1F1981195F9904466A39C9948FE30BBFF2660BE1715A4589334C74C7
GY = 0xBC3736A2F4F6779C59BDCEE36B692153D0A9877CC62A474002DF32E52139F0A0


def ec_add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % P == 0:
            return None
        lam = (3 * x1 * x1 + A) * pow(2 * y1, -1, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    y3 = (lam * (x1 - x3) - y1) % P
    return (x3, y3)


def ec_mul(k, pt):
    acc = None
    add = pt
    while k:
        if k & 1:
            acc = ec_add(acc, add)
        add = ec_add(add, add)
        k >>= 1
    return acc


def be32(x):
    return x.to_bytes(32, "big")


def point_bytes(pt):
    return b"\x04" + be32(pt[0]) + be32(pt[1])


def kdf(z: bytes, klen_bytes: int) -> bytes:
    out = b""
    ct = 1
    while len(out) < klen_bytes:
        out += sm3(z + struct.pack(">I", ct))
        ct += 1
    return out[:klen_bytes]


def za(ident: bytes, pub) -> bytes:
    entl = struct.pack(">H", len(ident) * 8)
    return sm3(entl + ident + be32(A) + be32(B) + be32(GX) + be32(GY)
               + be32(pub[0]) + be32(pub[1]))


def sm2_sign(d: int, ident: bytes, msg: bytes, k: int):
    pub = ec_mul(d, (GX, GY))
    e = int.from_bytes(sm3(za(ident, pub) + msg), "big")
    x1, _ = ec_mul(k, (GX, GY))
    r = (e + x1) % N
    assert r != 0 and r + k != N, "degenerate k for fixed-k vector"
    s = (pow(1 + d, -1, N) * (k - r * d)) % N
    assert s != 0
    return r, s


def sm2_encrypt(pub, msg: bytes, k: int) -> bytes:
    c1 = ec_mul(k, (GX, GY))
    x2, y2 = ec_mul(k, pub)
    t = kdf(be32(x2) + be32(y2), len(msg))
    assert any(t), "all-zero KDF mask"
    c2 = bytes(m ^ tt for m, tt in zip(msg, t))
    c3 = sm3(be32(x2) + msg + be32(y2))
    return point_bytes(c1) + c3 + c2


# ---------------------------------------------------------------- Keccak-256

_ROT = [[0, 36, 3, 41, 18], [1, 44, 10, 45, 2], [62, 6, 43, 15, 61],
        [28, 55, 25, 21, 56], [27, 20, 39, 8, 14]]
_RC = [0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
       0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
       0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
       0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
       0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
       0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
       0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
       0x8000000000008080, 0x0000000080000001, 0x8000000080008008]


def _rotl64(x, n):
    n %= 64
    return ((x << n) | (x >> (64 - n))) & 0xFFFFFFFFFFFFFFFF


def _keccak_f(st):
    for rc in _RC:
        c = [st[x][0] ^ st[x][1] ^ st[x][2] ^ st[x][3] ^ st[x][4] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl64(c[(x + 1) % 5], 1) for x in range(5)]
        for x in range(5):
            for y in range(5):
                st[x][y] ^= d[x]
        bmat = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                bmat[y][(2 * x + 3 * y) % 5] = _rotl64(st[x][y], _ROT[x][y])
        for x in range(5):
            for y in range(5):
                st[x][y] = bmat[x][y] ^ ((~bmat[(x + 1) % 5][y]) & bmat[(x + 2) % 5][y])
        st[0][0] ^= rc
    return st


def keccak256(msg: bytes) -> bytes:
    rate = 136
    pad = rate - len(msg) % rate
    padded = msg + b"\x01" + b"\x00" * (pad - 2) + b"\x80" if pad >= 2 \
        else msg + b"\x81"
    st = [[0] * 5 for _ in range(5)]
    for off in range(0, len(padded), rate):
        blk = padded[off:off + rate]
        for i in range(rate // 8):
            st[i % 5][i // 5] ^= struct.unpack("<Q", blk[i * 8:i * 8 + 8])[0]
        st = _keccak_f(st)
    out = b""
    for i in range(4):
        out += struct.pack("<Q", st[i % 5][i // 5])
    return out


# ---------------------------------------------------------------- anchors

def check_anchors():
    assert sm3(b"abc").hex() == (
        "66c7f0f462eeedd9d1f2d46bdc10e4e24167c4875cf2f7a2297da02b8f4ba8e0")
    assert sm3(b"abcd" * 16).hex() == (
        "debe9ff92275b8a138604889c18e5a4d6fdb70e5387e5765293dcba39c0c5732")
    key = bytes.fromhex("0123456789abcdeffedcba9876543210")
    assert sm4_encrypt_block(key, key).hex() == "681edf34d206965e86b3e94f536e4246"
    assert keccak256(b"").hex() == (
        "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470")
    assert keccak256(b"abc").hex() == (
        "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45")
    # Signature example from the SM2 standard (recommended curve).
    d = 0x3945208F7B2144B13F36E38AC6D39F95889393692860B51A42FB81EF4DF7C5B8
    k = 0x59276E27D506861A16680F3AD9C02DCCEF3CC1FA3CDBE4CE6D54B80DEAC1BC21
    r, s = sm2_sign(d, b"1234567812345678", b"message digest", k)
    assert r == 0xF5A03B0648D2C4630EEAC513E1BB81A15944DA3827D5B74143AC7EACEEE720B3, hex(r)
    assert s == 0xB1B6AA29DF212FD8763182BC0D421CA1BB9038FD1F7F42D4840B69C485BBC1AA, hex(s)
    # Group order sanity.
    assert ec_mul(N, (GX, GY)) is None
    print("all anchors OK")


# ---------------------------------------------------------------- generation

class Lcg:
    """Tiny deterministic byte source so vectors are reproducible."""

    def __init__(self, seed):
        self.s = seed

    def bytes(self, n):
        out = bytearray()
        while len(out) < n:
            self.s = (self.s * 6364136223846793005 + 1442695040888963407) % (1 << 64)
            out += struct.pack(">Q", self.s)
        return bytes(out[:n])

    def scalar(self):
        while True:
            v = int.from_bytes(self.bytes(32), "big")
            if 1 <= v < N - 1:
                return v


def line(alg, name, inp, key, out):
    def h(b):
        return b.hex() if b else "-"
    return f"ALG {alg} NAME {name} IN {h(inp)} KEY {h(key)} OUT {h(out)}\n"


def main():
    check_anchors()
    outdir = sys.argv[1] if len(sys.argv) > 1 else "vectors"
    os.makedirs(outdir, exist_ok=True)
    rng = Lcg(0x5EED_0001)

    with open(os.path.join(outdir, "sm3.txt"), "w") as f:
        f.write("# ALG sm3: OUT = SM3(IN)\n")
        f.write(line("sm3", "abc", b"abc", b"", sm3(b"abc")))
        f.write(line("sm3", "empty", b"", b"", sm3(b"")))
        f.write(line("sm3", "abcd16", b"abcd" * 16, b"", sm3(b"abcd" * 16)))
        for ln in (1, 55, 56, 63, 64, 65, 127, 200, 1000):
            m = rng.bytes(ln)
            f.write(line("sm3", f"rand{ln}", m, b"", sm3(m)))

    with open(os.path.join(outdir, "sm4_block.txt"), "w") as f:
        f.write("# ALG sm4_block: OUT = SM4-ENC(KEY, IN), one raw block\n")
        k = bytes.fromhex("0123456789abcdeffedcba9876543210")
        f.write(line("sm4_block", "standard", k, k, sm4_encrypt_block(k, k)))
        for i in range(4):
            key, blk = rng.bytes(16), rng.bytes(16)
            f.write(line("sm4_block", f"rand{i}", blk, key, sm4_encrypt_block(key, blk)))

    with open(os.path.join(outdir, "sm4_cbc.txt"), "w") as f:
        f.write("# ALG sm4_cbc: KEY = key(16) || iv(16); OUT = CBC ciphertext with"
                " block-length padding\n")
        for i, ln in enumerate((0, 1, 15, 16, 17, 100, 1024)):
            key, iv, pt = rng.bytes(16), rng.bytes(16), rng.bytes(ln)
            f.write(line("sm4_cbc", f"len{ln}", pt, key + iv,
                         sm4_cbc_encrypt(key, iv, pt)))

    with open(os.path.join(outdir, "sm2_kdf.txt"), "w") as f:
        f.write("# ALG sm2_kdf: OUT = KDF(IN, len(OUT))\n")
        for i, (zl, kl) in enumerate(((64, 16), (64, 32), (64, 48), (32, 64), (7, 13))):
            z = rng.bytes(zl)
            f.write(line("sm2_kdf", f"v{i}", z, b"", kdf(z, kl)))

    with open(os.path.join(outdir, "sm2_sign.txt"), "w") as f:
        f.write("# ALG sm2_sign: KEY = d(32) || k(32); IN = idlen(1) || id || msg;"
                " OUT = r(32) || s(32)\n")
        d = 0x3945208F7B2144B13F36E38AC6D39F95889393692860B51A42FB81EF4DF7C5B8
        k = 0x59276E27D506861A16680F3AD9C02DCCEF3CC1FA3CDBE4CE6D54B80DEAC1BC21
        ident = b"1234567812345678"
        r, s = sm2_sign(d, ident, b"message digest", k)
        f.write(line("sm2_sign", "standard",
                     bytes([len(ident)]) + ident + b"message digest",
                     be32(d) + be32(k), be32(r) + be32(s)))
        for i in range(3):
            d, k = rng.scalar(), rng.scalar()
            msg = rng.bytes(20 + i * 17)
            r, s = sm2_sign(d, ident, msg, k)
            f.write(line("sm2_sign", f"rand{i}",
                         bytes([len(ident)]) + ident + msg,
                         be32(d) + be32(k), be32(r) + be32(s)))

    with open(os.path.join(outdir, "sm2_enc.txt"), "w") as f:
        f.write("# ALG sm2_enc: KEY = d(32) || k(32) with recipient P = [d]G;"
                " OUT = C1(65) || C3(32) || C2\n")
        for i, ln in enumerate((48, 19, 128)):
            d, k = rng.scalar(), rng.scalar()
            msg = rng.bytes(ln)
            ct = sm2_encrypt(ec_mul(d, (GX, GY)), msg, k)
            f.write(line("sm2_enc", f"rand{i}", msg, be32(d) + be32(k), ct))

    with open(os.path.join(outdir, "keccak.txt"), "w") as f:
        f.write("# ALG keccak256: OUT = Keccak-256(IN)\n")
        f.write(line("keccak256", "empty", b"", b"", keccak256(b"")))
        f.write(line("keccak256", "abc", b"abc", b"", keccak256(b"abc")))
        for ln in (20, 65, 135, 136, 137, 300):
            m = rng.bytes(ln)
            f.write(line("keccak256", f"rand{ln}", m, b"", keccak256(m)))

    print(f"vectors written to {outdir}/")


if __name__ == "__main__":
    main()
