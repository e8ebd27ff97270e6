"""LTE-U gateway access control: registration, user lists, temporary grants.

A gateway keeps one record per registered microcell: the owner, the
permanently authorized users, pending temporary-access requests, and active
temporary grants. Temporary grants are bound to exactly one session and die
with it. Cells flagged open-access (operator-owned) admit everyone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PERMANENT = "permanent"
TEMPORARY = "temporary"


@dataclass(frozen=True)
class AccessGrant:
    user_id: str
    cell_id: int
    kind: str  # PERMANENT or TEMPORARY
    granted_at_s: float = 0.0
    session_id: str = None  # required for temporary grants

    def __post_init__(self):
        if self.kind == TEMPORARY and self.session_id is None:
            raise ValueError("temporary grants must be bound to a session")


@dataclass
class CellRecord:
    owner_id: str
    authorized_users: set = field(default_factory=set)
    pending_requests: list = field(default_factory=list)  # (user_id, session_id)
    temp_grants: dict = field(default_factory=dict)  # user_id -> AccessGrant
    open_access: bool = False


@dataclass
class GatewayRegistry:
    gateway_id: int
    cells: dict = field(default_factory=dict)  # cell_id -> CellRecord

    def _cell(self, cell_id: int) -> CellRecord:
        if cell_id not in self.cells:
            raise KeyError(f"cell {cell_id} is not registered at gateway {self.gateway_id}")
        return self.cells[cell_id]

    def register_microcell(self, cell_id: int, owner_id: str, initial_users=(),
                           open_access: bool = False) -> "GatewayRegistry":
        """Register a cell with its owner and initial authorized users."""
        if cell_id in self.cells:
            raise ValueError(f"cell {cell_id} is already registered")
        self.cells[cell_id] = CellRecord(owner_id, set(initial_users), open_access=open_access)
        return self

    def add_authorized_user(self, cell_id: int, admin_id: str, user_id: str) -> "GatewayRegistry":
        """Permanently authorize a user; only the cell owner may do this."""
        record = self._cell(cell_id)
        if admin_id != record.owner_id:
            raise PermissionError(f"'{admin_id}' does not own cell {cell_id}")
        record.authorized_users.add(user_id)
        return self

    def check_access(self, cell_id: int, user_id: str, t_s: float = 0.0) -> bool:
        """True iff owner, permanent user, open access, or an unexpired temp grant."""
        record = self._cell(cell_id)
        if record.open_access or user_id == record.owner_id:
            return True
        if user_id in record.authorized_users:
            return True
        return user_id in record.temp_grants

    def request_temp_access(self, cell_id: int, user_id: str, session_id: str) -> tuple:
        """File a temporary-access request; re-requests are permitted."""
        record = self._cell(cell_id)
        if self.check_access(cell_id, user_id):
            raise ValueError(f"'{user_id}' is already authorized for cell {cell_id}")
        request = (user_id, session_id)
        record.pending_requests.append(request)
        return request

    def grant_temp_access(self, cell_id: int, admin_id: str, user_id: str,
                          t_s: float = 0.0) -> AccessGrant:
        """Owner grants the earliest pending request of user_id; session-scoped."""
        record = self._cell(cell_id)
        if admin_id != record.owner_id:
            raise PermissionError(f"'{admin_id}' does not own cell {cell_id}")
        pending = [req for req in record.pending_requests if req[0] == user_id]
        if not pending:
            raise ValueError(f"no pending request from '{user_id}' for cell {cell_id}")
        user, session = pending[0]
        record.pending_requests = [req for req in record.pending_requests if req != pending[0]]
        grant = AccessGrant(user, cell_id, TEMPORARY, granted_at_s=t_s, session_id=session)
        record.temp_grants[user] = grant
        return grant

    def end_session(self, session_id: str) -> "GatewayRegistry":
        """Expire every temporary grant (and drop pending requests) of a session."""
        for record in self.cells.values():
            record.temp_grants = {
                user: g for user, g in record.temp_grants.items() if g.session_id != session_id
            }
            record.pending_requests = [req for req in record.pending_requests if req[1] != session_id]
        return self

    def has_pending_request(self, cell_id: int, user_id: str) -> bool:
        return any(req[0] == user_id for req in self._cell(cell_id).pending_requests)

    def owner_of(self, cell_id: int) -> str:
        return self._cell(cell_id).owner_id
