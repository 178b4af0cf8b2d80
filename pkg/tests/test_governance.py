from __future__ import annotations

from datetime import timedelta

import pytest

from artifact.clock import EPOCH, ManualClock
from artifact.errors import (
    DanglingArtifactRef,
    Forbidden,
    InvalidKind,
    InvalidLink,
    InvalidRelation,
    RateLimited,
    UnknownPost,
)
from artifact.governance import ArtifactRef, GovernanceLedger, Tier, tier_of


@pytest.fixture
def ledger(tmp_path, clock):
    ledger = GovernanceLedger(tmp_path / "governance.jsonl", clock=clock)
    for name in ("alice", "bruno", "chen"):
        ledger.register_agent(name)
    return ledger


def make_post(ledger, author="alice", **kwargs):
    return ledger.create_post(author=author, title=kwargs.pop("title", "t"), **kwargs)


# -- tiers ---------------------------------------------------------------------

TIER_TABLE = [
    (-101, 0, Tier.BANNED),
    (-100, 0, Tier.BANNED),
    (-99, 0, Tier.SHADOWBAN),
    (-21, 0, Tier.SHADOWBAN),
    (-20, 0, Tier.SHADOWBAN),  # overlap in the table resolves strict
    (-19, 0, Tier.PROBATION),
    (0, 0, Tier.PROBATION),
    (49, 0, Tier.PROBATION),
    (50, 0, Tier.ACTIVE),
    (199, 0, Tier.ACTIVE),
    (200, 0, Tier.ACTIVE),     # reputation floor not met
    (250, 500, Tier.ACTIVE),
    (250, 999, Tier.ACTIVE),
    (200, 1000, Tier.TRUSTED),
    (250, 1000, Tier.TRUSTED),
]


@pytest.mark.parametrize("karma,reputation,expected", TIER_TABLE)
def test_tier_boundaries(karma, reputation, expected):
    assert tier_of(karma, reputation) == expected


# -- votes & karma ----------------------------------------------------------------

def test_upvote_increments_author_karma(ledger):
    post = make_post(ledger)
    ledger.apply_vote("bruno", post.id, +1)
    assert ledger.account("alice").karma == 1
    assert post.upvotes == 1
    kinds = [n.kind for n in ledger.notifications_for("alice")]
    assert "upvote" in kinds


def test_downvote_decrements_author_karma(ledger):
    post = make_post(ledger)
    ledger.apply_vote("bruno", post.id, -1)
    assert ledger.account("alice").karma == -1
    assert post.downvotes == 1


def test_vote_quota_for_active_agent(ledger, clock):
    post = make_post(ledger)
    for _ in range(200):
        ledger.apply_vote("bruno", post.id, +1)
    with pytest.raises(RateLimited):
        ledger.apply_vote("bruno", post.id, +1)


def test_trusted_agent_gets_double_quota(ledger):
    post = make_post(ledger)
    trusted = ledger.account("bruno")
    trusted.karma = 250
    trusted.upvotes_received = 0
    trusted.citations_received = 100  # reputation 1000
    trusted.refresh()
    assert trusted.tier == Tier.TRUSTED
    for _ in range(201):
        ledger.apply_vote("bruno", post.id, +1)
    assert ledger.account("alice").karma == 201
    for _ in range(199):
        ledger.apply_vote("bruno", post.id, +1)
    with pytest.raises(RateLimited):
        ledger.apply_vote("bruno", post.id, +1)


def test_banned_voter_forbidden(ledger):
    post = make_post(ledger)
    banned = ledger.account("bruno")
    banned.karma = -150
    banned.refresh()
    with pytest.raises(Forbidden):
        ledger.apply_vote("bruno", post.id, +1)


def test_vote_quota_resets_at_utc_midnight(ledger, clock):
    post = make_post(ledger)
    for _ in range(200):
        ledger.apply_vote("bruno", post.id, +1)
    with pytest.raises(RateLimited) as err:
        ledger.apply_vote("bruno", post.id, +1)
    assert 0 < err.value.retry_after <= 86400
    clock.advance(hours=25)
    ledger.apply_vote("bruno", post.id, +1)  # new day, new quota


# -- rate limits --------------------------------------------------------------------

def test_post_interval_thirty_minutes(ledger, clock):
    make_post(ledger)
    clock.advance(minutes=10)
    with pytest.raises(RateLimited) as err:
        make_post(ledger)
    # ~20 minutes left, minus the seconds the ticking clock consumed
    assert 0 < err.value.retry_after <= 20 * 60
    assert err.value.retry_after > 19 * 60
    clock.advance(minutes=21)
    make_post(ledger)


def test_comment_interval_twenty_seconds(ledger, clock):
    post = make_post(ledger)
    ledger.create_comment("bruno", post.id, "first remark")
    clock.advance(seconds=5)
    with pytest.raises(RateLimited) as err:
        ledger.create_comment("bruno", post.id, "too soon")
    assert 0 < err.value.retry_after <= 15
    clock.advance(seconds=20)
    ledger.create_comment("bruno", post.id, "fine now")


def test_fifty_comments_per_day(ledger, clock):
    post = make_post(ledger)
    for i in range(50):
        clock.advance(seconds=25)
        ledger.create_comment("bruno", post.id, f"comment {i}")
    clock.advance(seconds=25)
    with pytest.raises(RateLimited) as err:
        ledger.create_comment("bruno", post.id, "the 51st")
    assert err.value.retry_after > 0
    clock.advance(hours=25)
    ledger.create_comment("bruno", post.id, "next day works")


# -- posts -----------------------------------------------------------------------

def test_post_with_artifact_refs(tmp_path, clock):
    known = {"art-1", "art-2"}
    ledger = GovernanceLedger(
        tmp_path / "gov.jsonl", clock=clock, resolve_ref=known.__contains__
    )
    ledger.register_agent("alice")
    refs = [
        ArtifactRef("art-1", "protein_data", "protein_lookup", "alice", ()),
        ArtifactRef("art-2", "synthesis", "synthesize", "alice", ("art-1",)),
    ]
    post = ledger.create_post(author="alice", title="finding", artifact_refs=refs)
    assert post.artifact_refs == refs
    assert ledger.account("alice").post_count == 1


def test_dangling_artifact_ref_rejected(tmp_path, clock):
    ledger = GovernanceLedger(
        tmp_path / "gov.jsonl", clock=clock, resolve_ref={"known"}.__contains__
    )
    ledger.register_agent("alice")
    with pytest.raises(DanglingArtifactRef):
        ledger.create_post(
            author="alice", title="finding",
            artifact_refs=[ArtifactRef("ghost", "synthesis", "s", "alice", ())],
        )


def test_shadowbanned_post_hidden(ledger):
    shady = ledger.account("alice")
    shady.karma = -50
    shady.refresh()
    post = make_post(ledger)
    assert post.hidden
    assert post.id not in [p.id for p in ledger.feed()]


def test_banned_author_cannot_post(ledger):
    banned = ledger.account("alice")
    banned.karma = -150
    banned.refresh()
    with pytest.raises(Forbidden):
        make_post(ledger)


# -- links ----------------------------------------------------------------------

def test_cite_link_notifies_target_author(ledger, clock):
    first = make_post(ledger, author="alice")
    clock.advance(minutes=31)
    second = make_post(ledger, author="bruno")
    ledger.link_posts(second.id, first.id, "cite", "builds on it")
    kinds = [n.kind for n in ledger.notifications_for("alice")]
    assert "citation" in kinds
    assert ledger.account("alice").citations_received == 1
    assert ledger.account("alice").reputation == 10


def test_self_link_rejected(ledger):
    post = make_post(ledger)
    with pytest.raises(InvalidLink):
        ledger.link_posts(post.id, post.id, "cite")


def test_unknown_relation_rejected(ledger, clock):
    first = make_post(ledger, author="alice")
    clock.advance(minutes=31)
    second = make_post(ledger, author="bruno")
    with pytest.raises(InvalidRelation):
        ledger.link_posts(second.id, first.id, "duplicates")


def test_link_requires_existing_posts(ledger):
    post = make_post(ledger)
    with pytest.raises(UnknownPost):
        ledger.link_posts(post.id, "missing", "cite")


# -- comments & interventions ------------------------------------------------------

def test_redirect_requires_subquestion(ledger):
    post = make_post(ledger)
    with pytest.raises(InvalidKind):
        ledger.create_comment("bruno", post.id, "go left", comment_type="redirect")


def test_comment_depth_tracks_parent(ledger, clock):
    post = make_post(ledger)
    top = ledger.create_comment("bruno", post.id, "root remark")
    clock.advance(seconds=21)
    child = ledger.create_comment("chen", post.id, "reply", parent_comment=top.id)
    assert top.depth == 0
    assert child.depth == 1


def test_pending_interventions_flow(ledger, clock):
    post = make_post(ledger)
    assert ledger.pending_interventions("alice") == []
    ledger.create_comment("bruno", post.id, "redirect to ceramics",
                          comment_type="redirect",
                          redirect_subquestion="what about ceramics")
    clock.advance(seconds=21)
    ledger.create_comment("chen", post.id, "plain note", comment_type="plain")
    pending = ledger.pending_interventions("alice")
    assert len(pending) == 1
    assert pending[0].comment_type == "redirect"
    ledger.mark_intervention_read(pending[0].id)
    assert ledger.pending_interventions("alice") == []


def test_mention_notification(ledger):
    post = make_post(ledger)
    ledger.create_comment("bruno", post.id, "ping @chen about this")
    kinds = [n.kind for n in ledger.notifications_for("chen")]
    assert "mention" in kinds


# -- replay & conservation -----------------------------------------------------------

def _exercise(ledger, clock):
    post = make_post(ledger, author="alice")
    ledger.apply_vote("bruno", post.id, +1)
    ledger.apply_vote("chen", post.id, +1)
    ledger.create_comment("bruno", post.id, "question about methods")
    clock.advance(minutes=31)
    reply = make_post(ledger, author="bruno")
    ledger.link_posts(reply.id, post.id, "extend", "follow-up")
    ledger.apply_vote("alice", reply.id, -1)
    return post


def test_replay_reconstructs_state(tmp_path, clock):
    path = tmp_path / "gov.jsonl"
    ledger = GovernanceLedger(path, clock=clock)
    for name in ("alice", "bruno", "chen"):
        ledger.register_agent(name)
    _exercise(ledger, clock)

    replayed = GovernanceLedger(path, clock=clock)
    assert replayed.account("alice").karma == ledger.account("alice").karma == 2
    assert replayed.account("bruno").karma == ledger.account("bruno").karma == -1
    for name in ("alice", "bruno", "chen"):
        ours, theirs = ledger.account(name), replayed.account(name)
        assert (ours.karma, ours.reputation, ours.tier,
                ours.post_count, ours.comment_count) == \
               (theirs.karma, theirs.reputation, theirs.tier,
                theirs.post_count, theirs.comment_count)
    assert [p.id for p in replayed.feed()] == [p.id for p in ledger.feed()]
    assert len(replayed.comments) == len(ledger.comments)
    assert len(replayed.notifications) == len(ledger.notifications)


def test_karma_conservation_from_vote_log(ledger, clock):
    _exercise(ledger, clock)
    totals: dict[str, int] = {}
    for vote in ledger.votes:
        totals[vote["author"]] = totals.get(vote["author"], 0) + vote["direction"]
    for name in ("alice", "bruno", "chen"):
        assert ledger.account(name).karma == totals.get(name, 0)


def test_rate_decisions_replay_identically(tmp_path):
    # Drive the limiter near its edges, then replay: accepted events only,
    # and re-applying them against fresh state must not trip any limit.
    clock = ManualClock(current=EPOCH, step=timedelta(0))
    path = tmp_path / "gov.jsonl"
    ledger = GovernanceLedger(path, clock=clock)
    ledger.register_agent("alice")
    ledger.register_agent("bruno")
    post = ledger.create_post(author="alice", title="t")
    accepted, rejected = 0, 0
    for i in range(10):
        clock.advance(seconds=10)
        try:
            ledger.create_comment("bruno", post.id, f"note {i}")
            accepted += 1
        except RateLimited:
            rejected += 1
    assert accepted == 5 and rejected == 5
    replayed = GovernanceLedger(path, clock=clock)
    assert replayed.account("bruno").comment_count == accepted
