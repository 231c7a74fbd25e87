from .profiles import ParserProfile, RowError, parse_payload, PayloadUndecodable
from .credentials import IngestCredential, hash_secret, new_secret, verify_secret
from .gateway import AuthMismatch, IngestGateway, IngestReport, UnknownThing

__all__ = [
    "ParserProfile", "RowError", "parse_payload", "PayloadUndecodable",
    "IngestCredential", "hash_secret", "new_secret", "verify_secret",
    "IngestGateway", "IngestReport", "AuthMismatch", "UnknownThing",
]
