"""JA4 TLS client fingerprinting and gradient-boosted bot detection."""

from .clienthello import ClientHello, ClientHelloError, is_grease, parse_clienthello
from .ja4 import Ja4Fingerprint, compute_ja4, ja4_a_component

__version__ = "0.1.0"

__all__ = [
    "ClientHello",
    "ClientHelloError",
    "Ja4Fingerprint",
    "compute_ja4",
    "is_grease",
    "ja4_a_component",
    "parse_clienthello",
]
