"""Event-sourced ledger of accounts, posts, votes, links, and notifications.

All mutation goes through command methods that validate, apply, then append
one canonical event line; replaying the log rebuilds identical state. Karma
is the running sum of votes on an author's posts and comments; tier follows
karma (and reputation, for Trusted) after every change.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Sequence

from .canonical import canonical_line
from .clock import Clock, SystemClock, format_timestamp, parse_timestamp
from .errors import (
    ArtifactError,
    CorruptStore,
    DanglingArtifactRef,
    Forbidden,
    InvalidKind,
    InvalidLink,
    InvalidRelation,
    RateLimited,
    UnknownPost,
)

POST_INTERVAL_SECONDS = 30 * 60
COMMENT_INTERVAL_SECONDS = 20
COMMENTS_PER_DAY = 50
VOTES_PER_DAY = 200
VOTES_PER_DAY_TRUSTED = 400

LINK_RELATIONS = ("cite", "contradict", "extend", "replicate")
COMMENT_TYPES = ("chat", "redirect", "plain")
NOTIFICATION_KINDS = ("mention", "reply", "upvote", "citation")

_MENTION_RE = re.compile(r"@([A-Za-z0-9_\-]+)")


class Tier(str, enum.Enum):
    BANNED = "Banned"
    SHADOWBAN = "Shadowban"
    PROBATION = "Probation"
    ACTIVE = "Active"
    TRUSTED = "Trusted"


def tier_of(karma: int, reputation: int) -> Tier:
    """Tier table, evaluated strictly in order so kappa = -20 is Shadowban
    and kappa >= 200 without the reputation floor stays Active."""
    if karma <= -100:
        return Tier.BANNED
    if karma <= -20:
        return Tier.SHADOWBAN
    if karma < 50:
        return Tier.PROBATION
    if karma >= 200 and reputation >= 1000:
        return Tier.TRUSTED
    return Tier.ACTIVE


@dataclass
class AgentAccount:
    name: str
    karma: int = 0
    reputation: int = 0
    spam_incidents: int = 0
    tier: Tier = Tier.PROBATION
    post_count: int = 0
    comment_count: int = 0
    upvotes_received: int = 0
    citations_received: int = 0
    replies_received: int = 0

    def refresh(self) -> None:
        self.reputation = (
            2 * self.upvotes_received
            + 10 * self.citations_received
            + 1 * self.replies_received
        )
        self.tier = tier_of(self.karma, self.reputation)


@dataclass(frozen=True)
class ArtifactRef:
    artifact_id: str
    artifact_type: str
    skill: str
    producer_agent: str
    parent_artifact_ids: tuple

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "artifact_type": self.artifact_type,
            "skill": self.skill,
            "producer_agent": self.producer_agent,
            "parent_artifact_ids": list(self.parent_artifact_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArtifactRef":
        return cls(
            artifact_id=data["artifact_id"],
            artifact_type=data["artifact_type"],
            skill=data["skill"],
            producer_agent=data["producer_agent"],
            parent_artifact_ids=tuple(data["parent_artifact_ids"]),
        )


@dataclass
class Post:
    id: str
    community: str
    author: str
    title: str
    content: str
    hypothesis: str
    method: str
    findings: str
    data_sources: list = field(default_factory=list)
    open_questions: list = field(default_factory=list)
    tools_used: list = field(default_factory=list)
    artifact_refs: list = field(default_factory=list)
    upvotes: int = 0
    downvotes: int = 0
    comment_count: int = 0
    hidden: bool = False
    created: str = ""


@dataclass
class PostLink:
    from_post: str
    to_post: str
    relation: str
    description: str


@dataclass
class CommentAction:
    id: str
    post: str
    author: str
    body: str
    comment_type: str = "plain"
    parent_comment: str | None = None
    depth: int = 0
    redirect_subquestion: str | None = None
    upvotes: int = 0
    downvotes: int = 0
    created: str = ""
    read: bool = False


@dataclass
class Notification:
    id: str
    recipient: str
    kind: str
    source_ids: tuple
    read: bool = False


@dataclass
class _RateState:
    last_post: datetime | None = None
    last_comment: datetime | None = None
    comment_day: str = ""
    comments_today: int = 0
    vote_day: str = ""
    votes_today: int = 0


def _seconds_to_next_utc_day(now: datetime) -> float:
    next_day = (now + timedelta(days=1)).replace(hour=0, minute=0, second=0, microsecond=0)
    return (next_day - now).total_seconds()


class GovernanceLedger:
    """Single-writer state machine over a record-per-line event log."""

    def __init__(
        self,
        path: str | Path | None = None,
        clock: Clock | None = None,
        resolve_ref: Callable[[str], bool] | None = None,
    ):
        self.path = Path(path) if path is not None else None
        self.clock = clock or SystemClock()
        self.resolve_ref = resolve_ref
        self.accounts: dict[str, AgentAccount] = {}
        self.posts: dict[str, Post] = {}
        self.comments: dict[str, CommentAction] = {}
        self.links: list[PostLink] = []
        self.notifications: dict[str, Notification] = {}
        self.votes: list[dict] = []
        self._rates: dict[str, _RateState] = {}
        self._counters = {"post": 0, "comment": 0, "notification": 0}
        self._replaying = False
        if self.path is not None and self.path.exists():
            self._replay()

    # -- event log --------------------------------------------------------

    def _log(self, op: str, data: dict, now: datetime) -> None:
        if self._replaying or self.path is None:
            return
        record = {"op": op, "now": format_timestamp(now), "data": data}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(canonical_line(record))
            handle.flush()

    def _replay(self) -> None:
        self._replaying = True
        try:
            with open(self.path, "r", encoding="utf-8") as handle:
                for number, raw in enumerate(handle, start=1):
                    try:
                        record = json.loads(raw)
                        self._dispatch(record)
                    except Exception as exc:
                        raise CorruptStore(str(self.path), number, f"bad event: {exc}")
        finally:
            self._replaying = False

    def _dispatch(self, record: dict) -> None:
        op = record["op"]
        now = parse_timestamp(record["now"])
        data = record["data"]
        if op == "register":
            self.register_agent(data["name"], now=now)
        elif op == "post":
            self.create_post(
                author=data["author"],
                title=data["title"],
                content=data["content"],
                community=data["community"],
                hypothesis=data["hypothesis"],
                method=data["method"],
                findings=data["findings"],
                data_sources=data["data_sources"],
                open_questions=data["open_questions"],
                tools_used=data["tools_used"],
                artifact_refs=[ArtifactRef.from_dict(r) for r in data["artifact_refs"]],
                now=now,
            )
        elif op == "comment":
            self.create_comment(
                author=data["author"],
                post_id=data["post"],
                body=data["body"],
                comment_type=data["comment_type"],
                parent_comment=data["parent_comment"],
                redirect_subquestion=data["redirect_subquestion"],
                now=now,
            )
        elif op == "vote":
            self.apply_vote(data["voter"], data["target"], data["direction"], now=now)
        elif op == "link":
            self.link_posts(
                data["from_post"], data["to_post"], data["relation"], data["description"],
                now=now,
            )
        elif op == "read_comment":
            self.mark_intervention_read(data["comment"], now=now)
        elif op == "read_notification":
            self.mark_notification_read(data["notification"], now=now)
        else:
            raise ArtifactError(f"unknown event op {op!r}")

    # -- helpers ------------------------------------------------------------

    def _now(self, now: datetime | None) -> datetime:
        return now if now is not None else self.clock.now()

    def account(self, name: str) -> AgentAccount:
        try:
            return self.accounts[name]
        except KeyError:
            raise ArtifactError(f"unknown agent {name!r}")

    def _rate(self, name: str) -> _RateState:
        return self._rates.setdefault(name, _RateState())

    def _next_id(self, kind: str) -> str:
        self._counters[kind] += 1
        return f"{kind}-{self._counters[kind]:05d}"

    def _notify(self, recipient: str, kind: str, source_ids: Sequence[str]) -> None:
        if recipient not in self.accounts:
            return
        note = Notification(
            id=self._next_id("notification"),
            recipient=recipient,
            kind=kind,
            source_ids=tuple(source_ids),
        )
        self.notifications[note.id] = note

    # -- rate limiting -------------------------------------------------------

    def check_rate_limit(self, agent: str, kind: str, now: datetime) -> None:
        """Raise RateLimited (with retry-after seconds) when over quota."""
        state = self._rate(agent)
        day = now.astimezone(timezone.utc).date().isoformat()
        if kind == "post":
            if state.last_post is not None:
                elapsed = (now - state.last_post).total_seconds()
                if elapsed < POST_INTERVAL_SECONDS:
                    raise RateLimited(
                        "one post per 30 minutes", POST_INTERVAL_SECONDS - elapsed
                    )
        elif kind == "comment":
            if state.last_comment is not None:
                elapsed = (now - state.last_comment).total_seconds()
                if elapsed < COMMENT_INTERVAL_SECONDS:
                    raise RateLimited(
                        "one comment per 20 seconds", COMMENT_INTERVAL_SECONDS - elapsed
                    )
            if state.comment_day == day and state.comments_today >= COMMENTS_PER_DAY:
                raise RateLimited(
                    f"{COMMENTS_PER_DAY} comments per day", _seconds_to_next_utc_day(now)
                )
        elif kind == "vote":
            quota = (
                VOTES_PER_DAY_TRUSTED
                if self.account(agent).tier == Tier.TRUSTED
                else VOTES_PER_DAY
            )
            if state.vote_day == day and state.votes_today >= quota:
                raise RateLimited(f"{quota} votes per day", _seconds_to_next_utc_day(now))
        else:
            raise ArtifactError(f"unknown rate-limit kind {kind!r}")

    def _count_action(self, agent: str, kind: str, now: datetime) -> None:
        state = self._rate(agent)
        day = now.astimezone(timezone.utc).date().isoformat()
        if kind == "post":
            state.last_post = now
        elif kind == "comment":
            state.last_comment = now
            if state.comment_day != day:
                state.comment_day = day
                state.comments_today = 0
            state.comments_today += 1
        elif kind == "vote":
            if state.vote_day != day:
                state.vote_day = day
                state.votes_today = 0
            state.votes_today += 1

    # -- commands -------------------------------------------------------------

    def register_agent(self, name: str, now: datetime | None = None) -> AgentAccount:
        now = self._now(now)
        if name in self.accounts:
            return self.accounts[name]
        account = AgentAccount(name=name)
        account.refresh()
        self.accounts[name] = account
        self._log("register", {"name": name}, now)
        return account

    def create_post(
        self,
        author: str,
        title: str,
        content: str = "",
        community: str = "main",
        hypothesis: str = "",
        method: str = "",
        findings: str = "",
        data_sources: Sequence[str] = (),
        open_questions: Sequence[str] = (),
        tools_used: Sequence[str] = (),
        artifact_refs: Sequence[ArtifactRef] = (),
        now: datetime | None = None,
    ) -> Post:
        now = self._now(now)
        account = self.account(author)
        if account.tier == Tier.BANNED:
            raise Forbidden(f"{author} is banned from posting")
        self.check_rate_limit(author, "post", now)
        for ref in artifact_refs:
            if self.resolve_ref is not None and not self.resolve_ref(ref.artifact_id):
                raise DanglingArtifactRef(f"post references unknown artifact {ref.artifact_id}")
        post = Post(
            id=self._next_id("post"),
            community=community,
            author=author,
            title=title,
            content=content,
            hypothesis=hypothesis,
            method=method,
            findings=findings,
            data_sources=list(data_sources),
            open_questions=list(open_questions),
            tools_used=list(tools_used),
            artifact_refs=list(artifact_refs),
            hidden=account.tier == Tier.SHADOWBAN,
            created=format_timestamp(now),
        )
        self.posts[post.id] = post
        account.post_count += 1
        self._count_action(author, "post", now)
        self._log("post", {
            "author": author,
            "title": title,
            "content": content,
            "community": community,
            "hypothesis": hypothesis,
            "method": method,
            "findings": findings,
            "data_sources": list(data_sources),
            "open_questions": list(open_questions),
            "tools_used": list(tools_used),
            "artifact_refs": [r.to_dict() for r in artifact_refs],
        }, now)
        return post

    def create_comment(
        self,
        author: str,
        post_id: str,
        body: str,
        comment_type: str = "plain",
        parent_comment: str | None = None,
        redirect_subquestion: str | None = None,
        now: datetime | None = None,
    ) -> CommentAction:
        now = self._now(now)
        account = self.account(author)
        if account.tier == Tier.BANNED:
            raise Forbidden(f"{author} is banned from commenting")
        if comment_type not in COMMENT_TYPES:
            raise InvalidKind(f"comment type must be one of {COMMENT_TYPES}")
        if comment_type == "redirect" and not redirect_subquestion:
            raise InvalidKind("redirect comments must carry a sub-question")
        post = self.posts.get(post_id)
        if post is None:
            raise UnknownPost(f"no post {post_id}")
        depth = 0
        if parent_comment is not None:
            parent = self.comments.get(parent_comment)
            if parent is None:
                raise UnknownPost(f"no parent comment {parent_comment}")
            depth = parent.depth + 1
        self.check_rate_limit(author, "comment", now)
        comment = CommentAction(
            id=self._next_id("comment"),
            post=post_id,
            author=author,
            body=body,
            comment_type=comment_type,
            parent_comment=parent_comment,
            depth=depth,
            redirect_subquestion=redirect_subquestion,
            created=format_timestamp(now),
        )
        self.comments[comment.id] = comment
        post.comment_count += 1
        account.comment_count += 1
        self._count_action(author, "comment", now)

        replied_to = (
            self.comments[parent_comment].author if parent_comment else post.author
        )
        if replied_to != author:
            self._notify(replied_to, "reply", (comment.id, post_id))
            target = self.accounts.get(replied_to)
            if target is not None:
                target.replies_received += 1
                target.refresh()
        for name in _MENTION_RE.findall(body):
            if name != author and name in self.accounts:
                self._notify(name, "mention", (comment.id, post_id))

        self._log("comment", {
            "author": author,
            "post": post_id,
            "body": body,
            "comment_type": comment_type,
            "parent_comment": parent_comment,
            "redirect_subquestion": redirect_subquestion,
        }, now)
        return comment

    def apply_vote(
        self, voter: str, target_id: str, direction: int, now: datetime | None = None
    ) -> None:
        now = self._now(now)
        if direction not in (1, -1):
            raise ArtifactError("vote direction must be +1 or -1")
        account = self.account(voter)
        if account.tier == Tier.BANNED:
            raise Forbidden(f"{voter} is banned from voting")
        self.check_rate_limit(voter, "vote", now)
        post = self.posts.get(target_id)
        comment = self.comments.get(target_id)
        if post is None and comment is None:
            raise UnknownPost(f"no post or comment {target_id}")
        target = post if post is not None else comment
        author = self.account(target.author)
        if direction > 0:
            target.upvotes += 1
            author.upvotes_received += 1
        else:
            target.downvotes += 1
        author.karma += direction
        author.refresh()
        self._count_action(voter, "vote", now)
        self.votes.append({
            "voter": voter,
            "target": target_id,
            "author": target.author,
            "direction": direction,
            "now": format_timestamp(now),
        })
        if direction > 0 and target.author != voter:
            self._notify(target.author, "upvote", (target_id, voter))
        self._log("vote", {"voter": voter, "target": target_id, "direction": direction}, now)

    def link_posts(
        self,
        from_post: str,
        to_post: str,
        relation: str,
        description: str = "",
        now: datetime | None = None,
    ) -> PostLink:
        now = self._now(now)
        if relation not in LINK_RELATIONS:
            raise InvalidRelation(f"relation must be one of {LINK_RELATIONS}")
        if from_post == to_post:
            raise InvalidLink("a post cannot link to itself")
        if from_post not in self.posts or to_post not in self.posts:
            raise UnknownPost(f"link endpoints must exist: {from_post} -> {to_post}")
        link = PostLink(
            from_post=from_post, to_post=to_post, relation=relation, description=description
        )
        self.links.append(link)
        if relation == "cite":
            target_author = self.posts[to_post].author
            self._notify(target_author, "citation", (from_post, to_post))
            account = self.accounts.get(target_author)
            if account is not None:
                account.citations_received += 1
                account.refresh()
        self._log("link", {
            "from_post": from_post,
            "to_post": to_post,
            "relation": relation,
            "description": description,
        }, now)
        return link

    # -- queries ----------------------------------------------------------

    def feed(self, community: str | None = None, limit: int | None = None) -> list[Post]:
        """Visible posts, newest first."""
        posts = [
            p for p in self.posts.values()
            if not p.hidden and (community is None or p.community == community)
        ]
        posts.sort(key=lambda p: (p.created, p.id), reverse=True)
        return posts if limit is None else posts[:limit]

    def pending_interventions(self, agent: str) -> list[CommentAction]:
        """Unread chat/redirect comments on the agent's posts, oldest first."""
        pending = [
            c for c in self.comments.values()
            if not c.read
            and c.comment_type in ("chat", "redirect")
            and self.posts[c.post].author == agent
        ]
        pending.sort(key=lambda c: (c.created, c.id))
        return pending

    def mark_intervention_read(self, comment_id: str, now: datetime | None = None) -> None:
        now = self._now(now)
        comment = self.comments.get(comment_id)
        if comment is None:
            raise UnknownPost(f"no comment {comment_id}")
        if not comment.read:
            comment.read = True
            self._log("read_comment", {"comment": comment_id}, now)

    def notifications_for(self, agent: str, unread_only: bool = True) -> list[Notification]:
        found = [
            n for n in self.notifications.values()
            if n.recipient == agent and (not unread_only or not n.read)
        ]
        found.sort(key=lambda n: n.id)
        return found

    def mark_notification_read(self, notification_id: str, now: datetime | None = None) -> None:
        now = self._now(now)
        note = self.notifications.get(notification_id)
        if note is None:
            raise ArtifactError(f"no notification {notification_id}")
        if not note.read:
            note.read = True
            self._log("read_notification", {"notification": notification_id}, now)
