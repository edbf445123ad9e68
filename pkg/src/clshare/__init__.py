"""Certificateless data sharing for UAV swarms and UEs.

``segds`` runs the cooperative group download, ``sedds`` the direct UAV-to-UE
exchange; both sit on the certificateless primitives in ``pki``,
``signcrypt`` and ``mre`` and run over the deterministic ``netsim`` network.
"""
from .group import available_backends, backend, set_backend
from .metering import CostLedger, acting_as, metered
from .pki import FullKeyPair, PublicKey, SystemParams, enroll, register, revoke, setup, verify_public_key
from .mre import MreCiphertext, mre_decrypt, mre_encrypt
from .signcrypt import Signature, sign, signcrypt, unsigncrypt, verify

__version__ = "0.1.0"

__all__ = [
    "available_backends", "backend", "set_backend", "CostLedger", "acting_as", "metered",
    "FullKeyPair", "PublicKey", "SystemParams", "enroll", "register", "revoke", "setup", "verify_public_key",
    "MreCiphertext", "mre_decrypt", "mre_encrypt", "Signature", "sign", "signcrypt", "unsigncrypt", "verify",
]
