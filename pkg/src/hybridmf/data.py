"""Dataset schema, flat-file ingestion and the planted-topic synthetic generator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import IntegrityError, ParseError, SchemaError, ValidationError

DIRECT_TYPES = (
    "direct_share",
    "direct_impression",
    "direct_reshare",
    "direct_like",
    "direct_comment",
    "direct_clickthrough",
)
SOCIAL_TYPES = (
    "twitter_share",
    "twitter_reshare",
    "facebook_share",
    "facebook_reshare",
    "linkedin_share",
    "linkedin_reshare",
)
READING_TYPES = ("reading_progress", "reading_completion")
INTERACTION_TYPES = DIRECT_TYPES + SOCIAL_TYPES + READING_TYPES

EVENT_FIELDS = ("user_id", "post_id", "interaction_type", "value", "timestamp")
POST_FIELDS = ("post_id", "text")
USER_FIELDS = ("user_id",)


@dataclass(frozen=True)
class InteractionEvent:
    user_id: str
    post_id: str
    interaction_type: str
    value: float = 1.0
    timestamp: int | None = None

    def check(self, types: Iterable[str] = INTERACTION_TYPES) -> None:
        if self.interaction_type not in types:
            raise SchemaError(f"unknown interaction_type {self.interaction_type!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValidationError(
                f"{self.interaction_type} value must be a finite number >= 0, got {self.value!r}"
            )
        if self.interaction_type == "reading_progress" and self.value > 1:
            raise ValidationError(f"reading_progress value must lie in [0, 1], got {self.value!r}")
        if self.interaction_type == "reading_completion" and self.value not in (0.0, 1.0):
            raise ValidationError(f"reading_completion value must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class Post:
    post_id: str
    text: str


@dataclass(frozen=True)
class Dataset:
    users: frozenset[str]
    posts: tuple[Post, ...]
    events: tuple[InteractionEvent, ...]

    @property
    def post_ids(self) -> list[str]:
        return [p.post_id for p in self.posts]

    def validate(self, types: Iterable[str] = INTERACTION_TYPES) -> "Dataset":
        types = frozenset(types)
        seen: set[str] = set()
        for post in self.posts:
            if post.post_id in seen:
                raise IntegrityError(f"duplicate post_id {post.post_id!r}")
            seen.add(post.post_id)
        for event in self.events:
            event.check(types)
            if event.post_id not in seen:
                raise IntegrityError(f"event references unknown post_id {event.post_id!r}")
            if event.user_id not in self.users:
                raise IntegrityError(f"event references unknown user_id {event.user_id!r}")
        return self


# -- file I/O -----------------------------------------------------------------


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _read_records(path: Path, fields: tuple[str, ...], optional: tuple[str, ...] = ()):
    """Yield ``(line_number, row_dict)`` for a headed, delimited text file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return
    first = text.splitlines()[0]
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=_sniff_delimiter(first))
    header = [h.strip() for h in next(reader)]
    required = [f for f in fields if f not in optional]
    if header[: len(required)] != required or any(h not in fields for h in header):
        raise ParseError(path, 1, f"expected header {','.join(fields)}, got {','.join(header)}")
    for row in reader:
        lineno = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        yield lineno, dict(zip(header, row))


def read_events(path, types: Iterable[str] = INTERACTION_TYPES) -> list[InteractionEvent]:
    types = frozenset(types)
    events = []
    for lineno, rec in _read_records(path, EVENT_FIELDS, optional=("timestamp",)):
        try:
            value = float(rec["value"])
        except ValueError:
            raise ParseError(path, lineno, f"value {rec['value']!r} is not a number") from None
        stamp = (rec.get("timestamp") or "").strip()
        try:
            timestamp = int(stamp) if stamp else None
        except ValueError:
            raise ParseError(path, lineno, f"timestamp {stamp!r} is not an integer") from None
        event = InteractionEvent(
            rec["user_id"].strip(), rec["post_id"].strip(), rec["interaction_type"].strip(),
            value, timestamp,
        )
        try:
            event.check(types)
        except (SchemaError, ValidationError) as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
        events.append(event)
    return events


def read_posts(path) -> list[Post]:
    return [Post(rec["post_id"].strip(), rec["text"]) for _, rec in _read_records(path, POST_FIELDS)]


def read_users(path) -> set[str]:
    return {rec["user_id"].strip() for _, rec in _read_records(path, USER_FIELDS)}


def load_dataset(events_path, posts_path, users_path=None,
                 types: Iterable[str] = INTERACTION_TYPES) -> Dataset:
    """Read and validate an events file plus a posts file.

    Without ``users_path`` the user set is every user that appears in the
    events file, so only post references can dangle.
    """
    for p in (events_path, posts_path, users_path):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    events = read_events(events_path, types)
    posts = read_posts(posts_path)
    users = read_users(users_path) if users_path is not None else {e.user_id for e in events}
    return Dataset(frozenset(users), tuple(posts), tuple(events)).validate(types)


def write_events(events: Iterable[InteractionEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for e in events:
            w.writerow([e.user_id, e.post_id, e.interaction_type, repr(float(e.value)),
                        "" if e.timestamp is None else str(e.timestamp)])


def write_posts(posts: Iterable[Post], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POST_FIELDS)
        for p in posts:
            w.writerow([p.post_id, p.text])


def write_users(users: Iterable[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("user_id\n")
        for u in sorted(users):
            fh.write(f"{u}\n")


def save_dataset(dataset: Dataset, directory) -> dict[str, Path]:
    """Write ``events.csv``, ``posts.csv`` and ``users.csv`` into *directory*."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / f"{name}.csv" for name in ("events", "posts", "users")}
    write_events(dataset.events, paths["events"])
    write_posts(dataset.posts, paths["posts"])
    write_users(dataset.users, paths["users"])
    return paths


# -- synthetic generator --------------------------------------------------------


@dataclass(frozen=True)
class SyntheticScale:
    """Size and shape of a generated dataset.

    Event and user counts per category are hit exactly. ``events_per_pair``
    controls how many events a user spends on each engaged post on average,
    and therefore the density of the resulting rating matrix.
    """

    n_users: int
    n_posts: int
    direct_events: int
    direct_users: int
    social_events: int
    social_users: int
    reading_events: int
    reading_users: int
    n_topics: int = 10
    events_per_pair: float = 3.0
    topic_word_share: float = 0.6
    post_length: tuple[int, int] = (20, 40)
    topic_concentration: float = 0.3

    @classmethod
    def full(cls, **overrides) -> "SyntheticScale":
        """Full-size preset: 250 users, 6,900 posts and fixed per-category event totals."""
        base = dict(
            n_users=250, n_posts=6900,
            direct_events=20868, direct_users=150,
            social_events=28363, social_users=165,
            reading_events=10985, reading_users=134,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def structured(cls, **overrides) -> "SyntheticScale":
        """500 users x 800 posts at roughly 2% rating density."""
        base = dict(
            n_users=500, n_posts=800,
            direct_events=4800, direct_users=380,
            social_events=5500, social_users=400,
            reading_events=2300, reading_users=300,
            events_per_pair=1.5,
        )
        base.update(overrides)
        return cls(**base)

    def category_targets(self) -> dict[str, tuple[int, int]]:
        return {
            "direct": (self.direct_events, self.direct_users),
            "social": (self.social_events, self.social_users),
            "reading": (self.reading_events, self.reading_users),
        }

    def check(self) -> None:
        if self.n_users <= 0 or self.n_posts <= 0:
            raise ValidationError("synthetic scale needs at least one user and one post")
        if self.n_topics < 1:
            raise ValidationError("n_topics must be >= 1")
        if self.events_per_pair <= 0:
            raise ValidationError("events_per_pair must be > 0")
        for name, (events, users) in self.category_targets().items():
            if users < 0 or users > self.n_users:
                raise ValidationError(f"{name}: user count {users} outside [0, {self.n_users}]")
            if events < users or (users == 0 and events > 0):
                raise ValidationError(f"{name}: {events} events cannot cover {users} users")


_SYLLABLES = (
    "ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "ve", "da", "zu", "fe",
    "go", "hi", "ja", "ku", "ly", "mo", "nu", "pe", "qu", "ro", "si", "te",
    "wa", "xo", "yu", "ze", "bra", "cle", "dro", "fli", "gra", "plo", "str", "tri",
)

_TYPE_MIX = {
    "direct": (DIRECT_TYPES, (0.05, 0.30, 0.05, 0.30, 0.10, 0.20)),
    "social": (SOCIAL_TYPES, (0.25, 0.10, 0.25, 0.10, 0.20, 0.10)),
    "reading": (READING_TYPES, (0.7, 0.3)),
}


def _make_words(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    words = []
    while len(words) < count:
        w = "".join(rng.choice(_SYLLABLES, size=int(rng.integers(2, 4))))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _cover_users(rng, n_users, sizes):
    """Pick one user subset per category so that together they cover as many users as possible."""
    uncovered = list(rng.permutation(n_users))
    subsets = {}
    for name, size in sorted(sizes.items(), key=lambda kv: (-kv[1], kv[0])):
        take = uncovered[:size]
        uncovered = uncovered[size:]
        if len(take) < size:
            rest = np.setdiff1d(np.arange(n_users), take)
            take = take + list(rng.choice(rest, size=size - len(take), replace=False))
        subsets[name] = np.sort(np.asarray(take, dtype=np.int64))
    return subsets


def generate_synthetic(seed: int, scale: SyntheticScale | None = None) -> Dataset:
    """Generate a dataset whose post texts and user behaviour share planted topics.

    Every post belongs to one latent topic and draws most of its words from that
    topic's vocabulary. Every user has a Dirichlet topic preference; the posts a
    user engages with, and how often, follow that preference.
    """
    scale = scale or SyntheticScale.full()
    scale.check()
    rng = np.random.default_rng(seed)
    n_topics = min(scale.n_topics, scale.n_posts)

    taken: set[str] = set()
    topic_vocab = [_make_words(rng, 40, taken) for _ in range(n_topics)]
    general_vocab = _make_words(rng, 300, taken)
    topic_zipf = 1.0 / np.arange(1, 41)
    topic_zipf /= topic_zipf.sum()

    post_topic = rng.permutation(np.arange(scale.n_posts) % n_topics)
    lo, hi = scale.post_length
    posts = []
    for j in range(scale.n_posts):
        length = int(rng.integers(lo, hi + 1))
        n_topic = int(rng.binomial(length, scale.topic_word_share))
        words = list(rng.choice(topic_vocab[post_topic[j]], size=n_topic, p=topic_zipf))
        words += list(rng.choice(general_vocab, size=length - n_topic))
        rng.shuffle(words)
        posts.append(Post(f"p{j:05d}", " ".join(words)))

    affinity = rng.dirichlet(np.full(n_topics, scale.topic_concentration), size=scale.n_users)
    popularity = rng.lognormal(0.0, 0.5, size=scale.n_posts)
    user_ids = [f"u{u:04d}" for u in range(scale.n_users)]

    targets = scale.category_targets()
    subsets = _cover_users(rng, scale.n_users, {k: v[1] for k, v in targets.items()})
    events: list[InteractionEvent] = []
    clock = 1_600_000_000
    for category in ("direct", "social", "reading"):
        total, _ = targets[category]
        members = subsets[category]
        if len(members) == 0:
            continue
        activity = rng.lognormal(0.0, 0.5, size=len(members))
        budgets = 1 + rng.multinomial(total - len(members), activity / activity.sum())
        types, mix = _TYPE_MIX[category]
        for u, budget in zip(members, budgets):
            budget = int(budget)
            pref = affinity[u, post_topic]
            n_engaged = int(min(scale.n_posts, budget, max(1, round(budget / scale.events_per_pair))))
            weights = popularity * (pref + 0.01)
            chosen = np.sort(rng.choice(scale.n_posts, size=n_engaged, replace=False,
                                        p=weights / weights.sum()))
            strength = pref[chosen] * rng.lognormal(0.0, 0.3, size=n_engaged) + 1e-3
            counts = 1 + rng.multinomial(budget - n_engaged, strength / strength.sum())
            for j, count in zip(chosen, counts):
                kinds = rng.choice(len(types), size=int(count), p=mix)
                like = float(pref[j])
                for kind in kinds:
                    itype = types[kind]
                    if itype == "reading_progress":
                        value = float(round(rng.beta(1.0 + 8.0 * like, 2.0), 4))
                    elif itype == "reading_completion":
                        value = float(rng.random() < 0.2 + 0.8 * like)
                    else:
                        value = 1.0
                    clock += int(rng.integers(1, 600))
                    events.append(InteractionEvent(user_ids[u], posts[j].post_id, itype, value, clock))

    return Dataset(frozenset(user_ids), tuple(posts), tuple(events)).validate()
