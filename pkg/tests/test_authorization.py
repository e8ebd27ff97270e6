import numpy as np
import pytest

from hetnetsim.authorization import GatewayRegistry


def _registry():
    return GatewayRegistry(gateway_id=0)


def test_owner_always_has_access_to_their_cell():
    reg = _registry().register_microcell(1, "alice")
    assert reg.check_access(1, "alice")


def test_duplicate_registration_is_an_error():
    reg = _registry().register_microcell(1, "alice")
    with pytest.raises(ValueError):
        reg.register_microcell(1, "bob")


def test_initial_user_list_is_authorized():
    reg = _registry().register_microcell(1, "alice", {"bob"})
    assert reg.check_access(1, "bob")
    assert not reg.check_access(1, "carol")


def test_owner_can_add_users_later():
    reg = _registry().register_microcell(1, "alice")
    reg.add_authorized_user(1, "alice", "carol")
    assert reg.check_access(1, "carol")


def test_non_owner_cannot_administer():
    reg = _registry().register_microcell(1, "alice", {"bob"})
    with pytest.raises(PermissionError):
        reg.add_authorized_user(1, "bob", "carol")


def test_unknown_cell_is_an_error():
    reg = _registry()
    with pytest.raises(KeyError):
        reg.add_authorized_user(9, "alice", "carol")
    with pytest.raises(KeyError):
        reg.check_access(9, "alice")


def test_open_access_cell_admits_everyone():
    reg = _registry().register_microcell(2, "operator", open_access=True)
    assert reg.check_access(2, "random-ue")


def test_temp_access_lifecycle():
    reg = _registry().register_microcell(1, "alice")
    reg.request_temp_access(1, "dave", session_id="s1")
    assert not reg.check_access(1, "dave")  # pending, not yet granted
    grant = reg.grant_temp_access(1, "alice", "dave", t_s=3.0)
    assert grant.session_id == "s1"
    assert reg.check_access(1, "dave")
    reg.end_session("s1")
    assert not reg.check_access(1, "dave")


def test_grant_without_request_is_an_error():
    reg = _registry().register_microcell(1, "alice")
    with pytest.raises(ValueError):
        reg.grant_temp_access(1, "alice", "dave")


def test_grant_by_non_owner_is_a_permission_error():
    reg = _registry().register_microcell(1, "alice")
    reg.request_temp_access(1, "dave", "s1")
    with pytest.raises(PermissionError):
        reg.grant_temp_access(1, "mallory", "dave")


def test_request_while_already_authorized_is_an_error():
    reg = _registry().register_microcell(1, "alice", {"bob"})
    with pytest.raises(ValueError):
        reg.request_temp_access(1, "bob", "s1")


def test_one_grant_leaves_other_requests_pending():
    reg = _registry().register_microcell(1, "alice")
    reg.request_temp_access(1, "dave", "s1")
    reg.request_temp_access(1, "erin", "s2")
    reg.grant_temp_access(1, "alice", "dave")
    assert reg.check_access(1, "dave")
    assert not reg.check_access(1, "erin")
    assert reg.has_pending_request(1, "erin")
    assert not reg.has_pending_request(1, "dave")


def test_re_request_after_expiry_is_permitted():
    reg = _registry().register_microcell(1, "alice")
    reg.request_temp_access(1, "dave", "s1")
    reg.grant_temp_access(1, "alice", "dave")
    reg.end_session("s1")
    reg.request_temp_access(1, "dave", "s2")
    reg.grant_temp_access(1, "alice", "dave")
    assert reg.check_access(1, "dave")


def test_no_temp_grant_survives_its_session_end():
    rng = np.random.default_rng(19)
    reg = _registry()
    for cell in range(4):
        reg.register_microcell(cell, f"owner{cell}")
    live = {}  # (cell, user) -> session
    for step in range(400):
        cell = int(rng.integers(0, 4))
        user = f"u{int(rng.integers(0, 6))}"
        action = rng.random()
        if action < 0.4:
            if not reg.check_access(cell, user) and not reg.has_pending_request(cell, user):
                reg.request_temp_access(cell, user, f"{user}-sess")
        elif action < 0.7:
            if reg.has_pending_request(cell, user):
                reg.grant_temp_access(cell, f"owner{cell}", user)
                live[(cell, user)] = f"{user}-sess"
        else:
            session = f"u{int(rng.integers(0, 6))}-sess"
            reg.end_session(session)
            for key in [k for k, s in live.items() if s == session]:
                del live[key]
        for (c, u), _ in live.items():
            assert reg.check_access(c, u)
        for record in reg.cells.values():
            for grant in record.temp_grants.values():
                assert (grant.cell_id, grant.user_id) in live


def test_operations_on_disjoint_cells_commute():
    def build(order):
        reg = _registry()
        ops = {
            "a": lambda r: r.register_microcell(1, "alice", {"u1"}),
            "b": lambda r: r.register_microcell(2, "bob", {"u2"}),
        }
        for key in order:
            ops[key](reg)
        reg.add_authorized_user(1, "alice", "x")
        reg.add_authorized_user(2, "bob", "y")
        return {(c, u): reg.check_access(c, u)
                for c in (1, 2) for u in ("alice", "bob", "u1", "u2", "x", "y")}

    assert build("ab") == build("ba")
