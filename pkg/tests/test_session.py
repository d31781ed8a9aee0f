import pytest

from docubits import session as s
from docubits.bits import InStack, Placed, Status
from docubits.document import SourceDocument
from docubits.errors import CorruptLog, MalformedMessage, RejectReason

SIX_STEPS = SourceDocument(
    doc_id="six",
    title="six",
    body="1. a\n2. b\n3. c\n4. d\n5. e\n6. f",
)


def run(events, state=None):
    """Apply (actor, event) pairs, asserting every one commits."""
    state = state if state is not None else s.empty_state()
    for actor, event in events:
        seq = state.last_seq + 1
        result = s.apply(state, actor, event, seq, ts=seq * 100)
        assert not isinstance(result, RejectReason), (event, result)
        state = result
        s.check_state(state)
    return state


def expect_reject(state, actor, event, reason):
    result = s.apply(state, actor, event, state.last_seq + 1, ts=0)
    assert result is reason, f"wanted {reason}, got {result}"
    return result


def two_user_session():
    return run([
        ("u1", s.Join(name="ada")),
        ("u2", s.Join(name="ben")),
        ("u1", s.LoadDocument(doc=SIX_STEPS)),
        ("u1", s.FragmentSteps(user_count=2)),
    ])


class TestJoinAndColors:
    def test_join_order_assigns_palette_colors(self):
        state = run([(f"u{i}", s.Join(name=f"n{i}")) for i in range(1, 8)])
        assert state.users["u1"].color_index == 0
        assert state.users["u2"].color_index == 1
        assert state.users["u7"].color_index == 0  # palette wraps
        assert state.users["u7"].badge == 1

    def test_double_join_is_no_change(self):
        state = run([("u1", s.Join(name="a"))])
        expect_reject(state, "u1", s.Join(name="a"), RejectReason.NO_CHANGE)

    def test_rejoin_after_leave_keeps_color(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u2", s.Join(name="b")),
            ("u1", s.Leave()),
            ("u1", s.Join(name="a2")),
        ])
        assert state.users["u1"].present
        assert state.users["u1"].color_index == 0
        assert state.users["u1"].name == "a2"

    def test_unjoined_actor_is_malformed(self):
        state = run([("u1", s.Join(name="a")), ("u1", s.LoadDocument(doc=SIX_STEPS))])
        expect_reject(state, "ghost", s.FragmentSteps(user_count=1), RejectReason.BAD_SPAN)


class TestFragmentation:
    def test_six_steps_two_users(self):
        state = two_user_session()
        assert len(state.bits) == 6
        assert [state.bits[b].ordinal for b in state.users["u1"].stack] == [1, 2, 3]
        assert [state.bits[b].ordinal for b in state.users["u2"].stack] == [4, 5, 6]
        for uid in ("u1", "u2"):
            for i, bid in enumerate(state.users[uid].stack):
                bit = state.bits[bid]
                assert bit.owner == uid
                assert bit.placement == InStack(i)
                assert bit.status is Status.NOT_ATTEMPTED

    def test_fragment_without_document(self):
        state = run([("u1", s.Join(name="a"))])
        expect_reject(state, "u1", s.FragmentSteps(user_count=1), RejectReason.NO_DOCUMENT)

    def test_fragment_twice(self):
        state = two_user_session()
        expect_reject(state, "u1", s.FragmentSteps(user_count=2), RejectReason.ALREADY_FRAGMENTED)

    def test_wrong_user_count(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u2", s.Join(name="b")),
            ("u1", s.LoadDocument(doc=SIX_STEPS)),
        ])
        expect_reject(state, "u1", s.FragmentSteps(user_count=3), RejectReason.BAD_SPAN)

    def test_parse_errors_surface(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u1", s.LoadDocument(doc=SourceDocument(doc_id="p", title="", body="no steps"))),
        ])
        expect_reject(state, "u1", s.FragmentSteps(user_count=1), RejectReason.NO_STEPS)

    def test_document_swap_blocked_after_bits_exist(self):
        state = two_user_session()
        expect_reject(
            state, "u1",
            s.LoadDocument(doc=SourceDocument(doc_id="other", title="", body="1. x")),
            RejectReason.ALREADY_FRAGMENTED,
        )

    def test_highlight_creates_owned_bit(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u1", s.LoadDocument(doc=SIX_STEPS)),
            ("u1", s.FragmentHighlight(span=(0, 4))),
        ])
        bit = state.bits["b1"]
        assert bit.owner == "u1"
        assert bit.text == "1. a"
        assert bit.ordinal is None
        assert state.users["u1"].stack == ("b1",)

    def test_highlight_overlap_rejected(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u1", s.LoadDocument(doc=SIX_STEPS)),
            ("u1", s.FragmentHighlight(span=(0, 4))),
        ])
        expect_reject(state, "u1", s.FragmentHighlight(span=(3, 8)), RejectReason.OVERLAPS_EXISTING)


class TestClaimPlaceStatus:
    def test_claim_moves_between_stacks(self):
        state = two_user_session()
        state = run([("u2", s.Claim(bit_id="b1"))], state)
        assert state.bits["b1"].owner == "u2"
        assert state.users["u1"].stack == ("b2", "b3")
        assert state.users["u2"].stack == ("b4", "b5", "b6", "b1")
        assert state.bits["b2"].placement == InStack(0)  # gap closed
        assert state.bits["b1"].placement == InStack(3)

    def test_claim_unknown_bit(self):
        state = two_user_session()
        expect_reject(state, "u2", s.Claim(bit_id="b99"), RejectReason.UNKNOWN_BIT)

    def test_claim_own_bit(self):
        state = two_user_session()
        expect_reject(state, "u1", s.Claim(bit_id="b1"), RejectReason.SELF_CLAIM)

    def test_completed_bit_locked_for_everything(self):
        state = two_user_session()
        state = run([
            ("u1", s.SetStatus(bit_id="b1", status=Status.IN_PROGRESS)),
            ("u1", s.SetStatus(bit_id="b1", status=Status.COMPLETED)),
        ], state)
        expect_reject(state, "u2", s.Claim(bit_id="b1"), RejectReason.ALREADY_COMPLETED)
        expect_reject(state, "u1", s.SetStatus(bit_id="b1", status=Status.BLOCKED),
                      RejectReason.ALREADY_COMPLETED)
        expect_reject(state, "u1", s.Place(bit_id="b1", position=(1.0, 1.0, 1.0)),
                      RejectReason.ALREADY_COMPLETED)

    def test_distinct_claimants_both_commit_unless_completed(self):
        state = run([
            ("u1", s.Join(name="a")),
            ("u2", s.Join(name="b")),
            ("u3", s.Join(name="c")),
            ("u1", s.LoadDocument(doc=SIX_STEPS)),
            ("u1", s.FragmentSteps(user_count=3)),
            ("u2", s.Claim(bit_id="b1")),
            ("u3", s.Claim(bit_id="b1")),  # still claimable: distinct claimant
        ])
        assert state.bits["b1"].owner == "u3"
        assert [u for u, _ in state.bits["b1"].owner_history] == ["u1", "u2", "u3"]

    def test_status_by_non_owner(self):
        state = two_user_session()
        expect_reject(state, "u2", s.SetStatus(bit_id="b1", status=Status.IN_PROGRESS),
                      RejectReason.NOT_OWNER)

    def test_place_and_return_round_trip(self):
        state = two_user_session()
        state = run([("u1", s.Place(bit_id="b2", position=(1.0, 2.0, 3.0)))], state)
        assert state.bits["b2"].placement == Placed((1.0, 2.0, 3.0))
        assert state.users["u1"].stack == ("b1", "b3")
        state = run([("u1", s.ReturnToStack(bit_id="b2"))], state)
        assert state.users["u1"].stack == ("b1", "b3", "b2")
        assert state.bits["b2"].placement == InStack(2)

    def test_return_while_stacked_is_no_change(self):
        state = two_user_session()
        expect_reject(state, "u1", s.ReturnToStack(bit_id="b1"), RejectReason.NO_CHANGE)

    def test_placed_bit_stays_put_until_replaced(self):
        state = two_user_session()
        state = run([
            ("u1", s.Place(bit_id="b1", position=(1.0, 0.0, 0.0))),
            ("u2", s.SetStatus(bit_id="b4", status=Status.IN_PROGRESS)),
            ("u1", s.SetStatus(bit_id="b2", status=Status.BLOCKED)),
        ], state)
        assert state.bits["b1"].placement == Placed((1.0, 0.0, 0.0))
        state = run([("u1", s.Place(bit_id="b1", position=(2.0, 0.0, 0.0)))], state)
        assert state.bits["b1"].placement == Placed((2.0, 0.0, 0.0))

    def test_claim_of_placed_bit_restacks_it(self):
        state = two_user_session()
        state = run([
            ("u1", s.Place(bit_id="b1", position=(1.0, 0.0, 0.0))),
            ("u2", s.Claim(bit_id="b1")),
        ], state)
        assert state.bits["b1"].placement == InStack(3)
        assert state.users["u2"].stack[-1] == "b1"

    def test_reorder_stack(self):
        state = two_user_session()
        state = run([("u1", s.ReorderStack(order=("b3", "b1", "b2")))], state)
        assert state.users["u1"].stack == ("b3", "b1", "b2")
        assert state.bits["b3"].placement == InStack(0)
        expect_reject(state, "u1", s.ReorderStack(order=("b3", "b1", "b2")),
                      RejectReason.NO_CHANGE)
        expect_reject(state, "u1", s.ReorderStack(order=("b1", "b2")),
                      RejectReason.BAD_SPAN)

    def test_move_pose(self):
        state = two_user_session()
        from docubits.spatial import Pose
        pose = Pose(position=(1.0, 1.6, 2.0), forward=(1.0, 0.0, 0.0), up=(0.0, 1.0, 0.0))
        state = run([("u1", s.MovePose(pose=pose))], state)
        assert state.users["u1"].pose == pose

    def test_leave_keeps_bits_claimable(self):
        state = two_user_session()
        state = run([("u1", s.Leave()), ("u2", s.Claim(bit_id="b2"))], state)
        assert not state.users["u1"].present
        assert state.bits["b2"].owner == "u2"


class TestRejectionPurity:
    def test_rejection_leaves_state_identical(self):
        state = two_user_session()
        before = s.snapshot_hash(state)
        expect_reject(state, "u2", s.Claim(bit_id="b99"), RejectReason.UNKNOWN_BIT)
        expect_reject(state, "u1", s.Claim(bit_id="b1"), RejectReason.SELF_CLAIM)
        assert s.snapshot_hash(state) == before


class TestReplayAndHash:
    def events_for_full_session(self):
        payloads = [
            ("u1", s.Join(name="ada")),
            ("u2", s.Join(name="ben")),
            ("u1", s.LoadDocument(doc=SIX_STEPS)),
            ("u1", s.FragmentSteps(user_count=2)),
            ("u1", s.SetStatus(bit_id="b1", status=Status.IN_PROGRESS)),
            ("u1", s.Place(bit_id="b1", position=(0.5, 1.0, -2.0))),
            ("u2", s.Claim(bit_id="b2")),
            ("u1", s.SetStatus(bit_id="b1", status=Status.COMPLETED)),
        ]
        return [
            s.Committed(seq=i, actor=actor, ts=i * 100, event=ev)
            for i, (actor, ev) in enumerate(payloads, start=1)
        ]

    def test_replay_matches_live(self):
        events = self.events_for_full_session()
        live = s.empty_state()
        for ev in events:
            live = s.apply(live, ev.actor, ev.event, ev.seq, ev.ts)
        assert s.snapshot_hash(s.replay(events)) == s.snapshot_hash(live)

    def test_replay_prefix_equals_live_prefix(self):
        events = self.events_for_full_session()
        live = s.empty_state()
        for i, ev in enumerate(events, start=1):
            live = s.apply(live, ev.actor, ev.event, ev.seq, ev.ts)
            assert s.snapshot_hash(s.replay(events[:i])) == s.snapshot_hash(live)

    def test_empty_log(self):
        state = s.replay([])
        assert state.last_seq == 0
        assert state.users == {} and state.bits == {}

    def test_gap_is_corrupt(self):
        events = self.events_for_full_session()
        with pytest.raises(CorruptLog):
            s.replay(events[:2] + events[3:])

    def test_rejected_event_in_log_is_corrupt(self):
        bad = [s.Committed(seq=1, actor="u1", ts=0, event=s.Claim(bit_id="bx"))]
        with pytest.raises(CorruptLog):
            s.replay(bad)

    def test_hash_differs_on_status_change(self):
        state = two_user_session()
        changed = s.apply(
            state, "u1", s.SetStatus(bit_id="b1", status=Status.IN_PROGRESS),
            state.last_seq + 1, 900,
        )
        assert s.snapshot_hash(state) != s.snapshot_hash(changed)

    def test_canonical_round_trip_preserves_hash(self):
        import json

        state = two_user_session()
        state = run([("u1", s.Place(bit_id="b1", position=(0.25, 1.0, -3.5)))], state)
        dumped = s.to_canonical(state)
        reparsed = s.from_canonical(json.loads(json.dumps(dumped)))
        assert s.snapshot_hash(reparsed) == s.snapshot_hash(state)


class TestEventWireForm:
    def test_all_events_round_trip(self):
        from docubits.spatial import Pose

        events = [
            s.Join(name="x"),
            s.Leave(),
            s.LoadDocument(doc=SIX_STEPS),
            s.FragmentSteps(user_count=2),
            s.FragmentHighlight(span=(0, 4)),
            s.Claim(bit_id="b1"),
            s.Place(bit_id="b1", position=(1.0, 2.0, 3.0)),
            s.ReturnToStack(bit_id="b1"),
            s.SetStatus(bit_id="b1", status=Status.BLOCKED),
            s.MovePose(pose=Pose(position=(0.0, 0.0, 0.0), forward=(0.0, 0.0, 1.0), up=(0.0, 1.0, 0.0))),
            s.ReorderStack(order=("b1", "b2")),
        ]
        for ev in events:
            assert s.event_from_payload(s.event_to_payload(ev)) == ev

    def test_malformed_payloads_raise(self):
        bad = [
            None,
            {},
            {"t": "warp"},
            {"t": "join"},
            {"t": "set_status", "bit_id": "b1", "status": "done"},
            {"t": "place", "bit_id": "b1", "position": [1, 2]},
            {"t": "move_pose", "pose": {"position": [0, 0, 0], "forward": [0, 0, 2], "up": [0, 1, 0]}},
            {"t": "fragment_steps", "user_count": 0},
        ]
        for payload in bad:
            with pytest.raises(MalformedMessage):
                s.event_from_payload(payload)
