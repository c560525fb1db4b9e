"""Cipher-suite catalogue and the selector classes used by the downgrade checks."""
from __future__ import annotations

import enum
from typing import NamedTuple


class TlsVersion(enum.IntEnum):
    SSL2 = 0x0002
    SSL3 = 0x0300
    TLS10 = 0x0301
    TLS11 = 0x0302
    TLS12 = 0x0303
    TLS13 = 0x0304

    @property
    def label(self) -> str:
        return VERSION_LABELS[self]


VERSION_LABELS = {
    TlsVersion.SSL2: "SSLv2",
    TlsVersion.SSL3: "SSLv3",
    TlsVersion.TLS10: "TLSv1.0",
    TlsVersion.TLS11: "TLSv1.1",
    TlsVersion.TLS12: "TLSv1.2",
    TlsVersion.TLS13: "TLSv1.3",
}

# Everything a hand-assembled (pre-1.3) ClientHello can offer.
RECORD_VERSIONS = frozenset({TlsVersion.SSL3, TlsVersion.TLS10, TlsVersion.TLS11, TlsVersion.TLS12})


class Suite(NamedTuple):
    code: int
    name: str
    kx: str  # RSA, RSA_EXPORT, DH, DHE, DHE_EXPORT, ECDHE
    rc4: bool = False


SUITES: dict[int, Suite] = {
    s.code: s
    for s in (
        Suite(0x0003, "TLS_RSA_EXPORT_WITH_RC4_40_MD5", "RSA_EXPORT", rc4=True),
        Suite(0x0004, "TLS_RSA_WITH_RC4_128_MD5", "RSA", rc4=True),
        Suite(0x0005, "TLS_RSA_WITH_RC4_128_SHA", "RSA", rc4=True),
        Suite(0x0006, "TLS_RSA_EXPORT_WITH_RC2_CBC_40_MD5", "RSA_EXPORT"),
        Suite(0x0008, "TLS_RSA_EXPORT_WITH_DES40_CBC_SHA", "RSA_EXPORT"),
        Suite(0x0009, "TLS_RSA_WITH_DES_CBC_SHA", "RSA"),
        Suite(0x000A, "TLS_RSA_WITH_3DES_EDE_CBC_SHA", "RSA"),
        Suite(0x000D, "TLS_DH_DSS_WITH_3DES_EDE_CBC_SHA", "DH"),
        Suite(0x0010, "TLS_DH_RSA_WITH_3DES_EDE_CBC_SHA", "DH"),
        Suite(0x0011, "TLS_DHE_DSS_EXPORT_WITH_DES40_CBC_SHA", "DHE_EXPORT"),
        Suite(0x0014, "TLS_DHE_RSA_EXPORT_WITH_DES40_CBC_SHA", "DHE_EXPORT"),
        Suite(0x0016, "TLS_DHE_RSA_WITH_3DES_EDE_CBC_SHA", "DHE"),
        Suite(0x002F, "TLS_RSA_WITH_AES_128_CBC_SHA", "RSA"),
        Suite(0x0030, "TLS_DH_DSS_WITH_AES_128_CBC_SHA", "DH"),
        Suite(0x0031, "TLS_DH_RSA_WITH_AES_128_CBC_SHA", "DH"),
        Suite(0x0033, "TLS_DHE_RSA_WITH_AES_128_CBC_SHA", "DHE"),
        Suite(0x0035, "TLS_RSA_WITH_AES_256_CBC_SHA", "RSA"),
        Suite(0x0036, "TLS_DH_DSS_WITH_AES_256_CBC_SHA", "DH"),
        Suite(0x0037, "TLS_DH_RSA_WITH_AES_256_CBC_SHA", "DH"),
        Suite(0x0039, "TLS_DHE_RSA_WITH_AES_256_CBC_SHA", "DHE"),
        Suite(0x003C, "TLS_RSA_WITH_AES_128_CBC_SHA256", "RSA"),
        Suite(0x003D, "TLS_RSA_WITH_AES_256_CBC_SHA256", "RSA"),
        Suite(0x0067, "TLS_DHE_RSA_WITH_AES_128_CBC_SHA256", "DHE"),
        Suite(0x009C, "TLS_RSA_WITH_AES_128_GCM_SHA256", "RSA"),
        Suite(0x009D, "TLS_RSA_WITH_AES_256_GCM_SHA384", "RSA"),
        Suite(0x009E, "TLS_DHE_RSA_WITH_AES_128_GCM_SHA256", "DHE"),
        Suite(0x009F, "TLS_DHE_RSA_WITH_AES_256_GCM_SHA384", "DHE"),
        Suite(0x00A0, "TLS_DH_RSA_WITH_AES_128_GCM_SHA256", "DH"),
        Suite(0x00A1, "TLS_DH_RSA_WITH_AES_256_GCM_SHA384", "DH"),
        Suite(0xC007, "TLS_ECDHE_ECDSA_WITH_RC4_128_SHA", "ECDHE", rc4=True),
        Suite(0xC011, "TLS_ECDHE_RSA_WITH_RC4_128_SHA", "ECDHE", rc4=True),
        Suite(0xC013, "TLS_ECDHE_RSA_WITH_AES_128_CBC_SHA", "ECDHE"),
        Suite(0xC014, "TLS_ECDHE_RSA_WITH_AES_256_CBC_SHA", "ECDHE"),
        Suite(0xC027, "TLS_ECDHE_RSA_WITH_AES_128_CBC_SHA256", "ECDHE"),
        Suite(0xC02B, "TLS_ECDHE_ECDSA_WITH_AES_128_GCM_SHA256", "ECDHE"),
        Suite(0xC02C, "TLS_ECDHE_ECDSA_WITH_AES_256_GCM_SHA384", "ECDHE"),
        Suite(0xC02F, "TLS_ECDHE_RSA_WITH_AES_128_GCM_SHA256", "ECDHE"),
        Suite(0xC030, "TLS_ECDHE_RSA_WITH_AES_256_GCM_SHA384", "ECDHE"),
        Suite(0xCCA8, "TLS_ECDHE_RSA_WITH_CHACHA20_POLY1305_SHA256", "ECDHE"),
        Suite(0xCCA9, "TLS_ECDHE_ECDSA_WITH_CHACHA20_POLY1305_SHA256", "ECDHE"),
    )
}

# SSLv2 CIPHER-SPECs are three octets wide.
SSL2_CIPHER_SPECS: dict[int, str] = {
    0x010080: "SSL_CK_RC4_128_WITH_MD5",
    0x020080: "SSL_CK_RC4_128_EXPORT40_WITH_MD5",
    0x030080: "SSL_CK_RC2_128_CBC_WITH_MD5",
    0x040080: "SSL_CK_RC2_128_CBC_EXPORT40_WITH_MD5",
    0x050080: "SSL_CK_IDEA_128_CBC_WITH_MD5",
    0x060040: "SSL_CK_DES_64_CBC_WITH_MD5",
    0x0700C0: "SSL_CK_DES_192_EDE3_CBC_WITH_MD5",
}


class CipherClass(str, enum.Enum):
    ALL = "all"
    RC4 = "rc4"
    RSA_EXPORT = "rsa_export"
    DHE_EXPORT = "dhe_export"
    TLS_RSA = "tls_rsa"
    TLS_DH = "tls_dh"
    MODERN = "modern"


_PREDICATES = {
    CipherClass.ALL: lambda s: True,
    CipherClass.RC4: lambda s: s.rc4,
    CipherClass.RSA_EXPORT: lambda s: s.kx == "RSA_EXPORT",
    CipherClass.DHE_EXPORT: lambda s: s.kx == "DHE_EXPORT",
    CipherClass.TLS_RSA: lambda s: s.kx == "RSA",
    CipherClass.TLS_DH: lambda s: s.kx == "DH",
    CipherClass.MODERN: lambda s: s.kx == "ECDHE" and ("GCM" in s.name or "CHACHA" in s.name),
}


CIPHER_CLASSES: dict[CipherClass, tuple[int, ...]] = {
    c: tuple(code for code, suite in SUITES.items() if pred(suite)) for c, pred in _PREDICATES.items()
}


def suites_for(*classes) -> frozenset[int]:
    out: set[int] = set()
    for c in classes:
        out.update(CIPHER_CLASSES[CipherClass(c)])
    return frozenset(out)


def suite_name(code: int) -> str:
    suite = SUITES.get(code)
    return suite.name if suite else f"0x{code:04X}"
