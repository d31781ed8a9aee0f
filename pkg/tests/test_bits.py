import itertools
import random

import pytest

from docubits.bits import (
    DocuBit,
    InStack,
    PALETTE,
    Status,
    assign_split,
    claim,
    color_for,
    set_status,
)
from docubits.document import StepSegment
from docubits.errors import Rejected, RejectReason


def make_bit(status=Status.NOT_ATTEMPTED, owner="a"):
    return DocuBit(
        bit_id="b1",
        doc_id="d",
        span=(0, 4),
        text="1. x",
        ordinal=1,
        owner=owner,
        owner_history=((owner, 1),),
        status=status,
        placement=InStack(0),
        status_changed_at=0,
        created_by=owner,
    )


class TestStatusMachine:
    def test_owner_moves_to_in_progress(self):
        bit = set_status(make_bit(), Status.IN_PROGRESS, actor="a", at=42)
        assert bit.status is Status.IN_PROGRESS
        assert bit.status_changed_at == 42

    def test_completed_is_absorbing(self):
        bit = make_bit(status=Status.COMPLETED)
        with pytest.raises(Rejected) as exc:
            set_status(bit, Status.BLOCKED, actor="a", at=1)
        assert exc.value.reason is RejectReason.ALREADY_COMPLETED

    def test_non_owner_rejected(self):
        bit = make_bit(status=Status.BLOCKED)
        with pytest.raises(Rejected) as exc:
            set_status(bit, Status.COMPLETED, actor="b", at=1)
        assert exc.value.reason is RejectReason.NOT_OWNER

    def test_same_status_is_no_change(self):
        with pytest.raises(Rejected) as exc:
            set_status(make_bit(), Status.NOT_ATTEMPTED, actor="a", at=1)
        assert exc.value.reason is RejectReason.NO_CHANGE

    def test_every_status_reachable_from_not_attempted(self):
        for target in (Status.IN_PROGRESS, Status.BLOCKED, Status.COMPLETED):
            assert set_status(make_bit(), target, "a", 1).status is target

    def test_any_non_completed_pair_allowed(self):
        live = [Status.NOT_ATTEMPTED, Status.IN_PROGRESS, Status.BLOCKED]
        for src, dst in itertools.permutations(live, 2):
            assert set_status(make_bit(status=src), dst, "a", 1).status is dst


class TestClaim:
    def test_claim_moves_to_new_owner_stack(self):
        bit = claim(make_bit(), "b", at_seq=5, stack_position=2)
        assert bit.owner == "b"
        assert bit.owner_history == (("a", 1), ("b", 5))
        assert bit.placement == InStack(2)

    def test_completed_cannot_change_hands(self):
        with pytest.raises(Rejected) as exc:
            claim(make_bit(status=Status.COMPLETED), "b", 5, 0)
        assert exc.value.reason is RejectReason.ALREADY_COMPLETED

    def test_self_claim_rejected(self):
        with pytest.raises(Rejected) as exc:
            claim(make_bit(), "a", 5, 0)
        assert exc.value.reason is RejectReason.SELF_CLAIM


class TestPalette:
    def test_first_six_distinct(self):
        colors = [color_for(i) for i in range(6)]
        assert len({rgb for rgb, _ in colors}) == 6
        assert all(badge == 0 for _, badge in colors)
        assert colors[0][0] == (255, 0, 0)   # red for the first user
        assert colors[1][0] == (0, 255, 0)   # green for the second

    def test_seventh_user_reuses_with_badge(self):
        rgb, badge = color_for(6)
        assert rgb == PALETTE[0]
        assert badge == 1


def unit_segments(n):
    return [StepSegment(ordinal=i, span=(10 * i, 10 * i + 4), text=f"{i}. x") for i in range(1, n + 1)]


def brute_force_split(sizes, k):
    """All contiguous partitions; returns (best max load, best cut tuple)."""
    m = len(sizes)
    best = None
    for cuts in itertools.combinations(range(1, m), k - 1):
        bounds = (0,) + cuts + (m,)
        load = max(sum(sizes[a:b]) for a, b in zip(bounds, bounds[1:]))
        key = (load, cuts)
        if best is None or key < best:
            best = key
    return best


class TestAssignSplit:
    def test_eight_steps_two_users(self):
        out = assign_split(unit_segments(8), None, ["a", "b"])
        assert out == {"a": [1, 2, 3, 4], "b": [5, 6, 7, 8]}

    def test_seven_steps_tie_breaks_to_smaller_cut(self):
        out = assign_split(unit_segments(7), None, ["a", "b"])
        assert out == {"a": [1, 2, 3], "b": [4, 5, 6, 7]}

    def test_cohesion_groups_steer_the_cut(self):
        out = assign_split(unit_segments(6), [[1, 2], [3], [4, 5, 6]], ["a", "b"])
        assert out == {"a": [1, 2, 3], "b": [4, 5, 6]}

    def test_uncovered_steps_become_singletons(self):
        out = assign_split(unit_segments(4), [[2, 3]], ["a", "b"])
        assert sorted(out["a"] + out["b"]) == [1, 2, 3, 4]
        assert 2 in out["a"] and 3 in out["a"] or 2 in out["b"] and 3 in out["b"]

    def test_more_users_than_groups(self):
        with pytest.raises(Rejected) as exc:
            assign_split(unit_segments(2), None, ["a", "b", "c"])
        assert exc.value.reason is RejectReason.MORE_USERS_THAN_GROUPS

    def test_cohesion_naming_unknown_step_rejected(self):
        with pytest.raises(Rejected) as exc:
            assign_split(unit_segments(3), [[2, 3, 4]], ["a"])
        assert exc.value.reason is RejectReason.BAD_SPAN

    def test_matches_brute_force_exhaustively(self):
        # every composition of n steps into cohesion groups, n <= 10, k <= 4
        for n in range(1, 11):
            for mask in range(2 ** (n - 1)):
                groups, cur = [], [1]
                for i in range(1, n):
                    if mask >> (i - 1) & 1:
                        groups.append(cur)
                        cur = [i + 1]
                    else:
                        cur.append(i + 1)
                groups.append(cur)
                sizes = [len(g) for g in groups]
                for k in range(1, min(4, len(groups)) + 1):
                    users = [f"u{i}" for i in range(k)]
                    out = assign_split(unit_segments(n), groups, users)
                    loads = [len(out[u]) for u in users]
                    cuts = tuple(
                        itertools.accumulate(
                            sum(1 for g in groups if g[0] in out[u]) for u in users[:-1]
                        )
                    )
                    best_load, best_cuts = brute_force_split(sizes, k)
                    assert max(loads) == best_load, (groups, k)
                    assert cuts == best_cuts, (groups, k)

    def test_coverage_is_exact(self):
        rng = random.Random(7)
        for _ in range(50):
            n = rng.randint(1, 12)
            k = rng.randint(1, min(4, n))
            out = assign_split(unit_segments(n), None, [f"u{i}" for i in range(k)])
            seen = [o for u in out.values() for o in u]
            assert sorted(seen) == list(range(1, n + 1))
