"""Bearer-token authentication with two roles.

Stands in for a federated identity provider behind a single seam: the
check() method is the only auth decision point.  Tokens are random
urlsafe strings; only their SHA-256 lands in the database.  The
bootstrap admin token comes from the config file and is re-hashed into
the table on startup.
"""

from __future__ import annotations

import hashlib
import secrets
import threading

from ..errors import AuthError, ForbiddenError
from ..timeutil import now_ns

ROLES = ("admin", "operator")


def _digest(token: str) -> str:
    return hashlib.sha256(token.encode()).hexdigest()


class TokenStore:
    def __init__(self, conn, bootstrap_admin_token: str = ""):
        self._conn = conn
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript("""
                CREATE TABLE IF NOT EXISTS tokens (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    sha256 TEXT UNIQUE NOT NULL,
                    role TEXT NOT NULL,
                    created_at INTEGER NOT NULL,
                    revoked INTEGER NOT NULL DEFAULT 0
                );
            """)
            self._conn.commit()
        if bootstrap_admin_token:
            self._ensure_bootstrap(bootstrap_admin_token)

    def _ensure_bootstrap(self, token: str):
        with self._lock:
            row = self._conn.execute(
                "SELECT id FROM tokens WHERE sha256=?", (_digest(token),)).fetchone()
            if row is None:
                self._conn.execute(
                    "INSERT INTO tokens (sha256, role, created_at) VALUES (?,?,?)",
                    (_digest(token), "admin", now_ns()))
                self._conn.commit()

    def issue_token(self, role: str):
        """Returns (token id, secret); the secret is shown exactly once."""
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        secret = secrets.token_urlsafe(24)
        with self._lock:
            cur = self._conn.execute(
                "INSERT INTO tokens (sha256, role, created_at) VALUES (?,?,?)",
                (_digest(secret), role, now_ns()))
            self._conn.commit()
        return cur.lastrowid, secret

    def revoke_token(self, token_id: int) -> bool:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE tokens SET revoked=1 WHERE id=?", (token_id,))
            self._conn.commit()
        return cur.rowcount > 0

    def check(self, token: str):
        """Returns (token_id, role) for a live token, else None."""
        if not token:
            return None
        row = self._conn.execute(
            "SELECT id, role FROM tokens WHERE sha256=? AND revoked=0",
            (_digest(token),)).fetchone()
        if row is None:
            return None
        return row[0], row[1]

    def require(self, token: str, role: str | None = None):
        """AuthError when the token is missing/invalid, ForbiddenError when
        the role does not suffice (admin implies operator)."""
        checked = self.check(token)
        if checked is None:
            raise AuthError("missing or invalid token")
        token_id, got = checked
        if role is not None and got != role and got != "admin":
            raise ForbiddenError(f"requires role {role}")
        return token_id, got

    def list_tokens(self):
        return [dict(id=r[0], role=r[1], created_at=r[2], revoked=bool(r[3]))
                for r in self._conn.execute(
                    "SELECT id, role, created_at, revoked FROM tokens ORDER BY id")]
