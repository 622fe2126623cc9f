"""Conversation context construction under a token limit."""

from __future__ import annotations

from typing import Callable, Sequence

KEEP_RECENT = 5
HEAD_CHARS = 100
PLACEHOLDER = "[Earlier messages were removed to fit the context window.]"


def estimate_tokens(text: str) -> int:
    # rough chars-per-token heuristic; backends may supply a real tokenizer
    return len(text) // 4 + 1


def truncate_history(
    messages: Sequence[dict],
    token_limit: int,
    estimator: Callable[[str], int] = estimate_tokens,
    keep_recent: int = KEEP_RECENT,
    head_chars: int = HEAD_CHARS,
) -> list[dict]:
    """Build the context sent to the backend.

    ``messages[0]`` is the system prompt and is always kept whole.  The most
    recent ``keep_recent`` user and ``keep_recent`` assistant messages are kept
    whole; older ones are cut to their first ``head_chars`` characters.  If the
    result still exceeds ``token_limit``, the oldest cut messages are dropped
    and one placeholder is inserted right after the system prompt.
    """
    if not messages:
        return []
    system, rest = dict(messages[0]), [dict(m) for m in messages[1:]]
    recent = set()
    counts = {"user": 0, "assistant": 0}
    for i in range(len(rest) - 1, -1, -1):
        role = rest[i].get("role")
        if counts.get(role, keep_recent) < keep_recent:
            counts[role] += 1
            recent.add(i)
    older = []
    for i, m in enumerate(rest):
        if i not in recent:
            m["content"] = m["content"][:head_chars]
            older.append(i)

    def total(msgs):
        return sum(estimator(m["content"]) for m in msgs)

    context = [system] + rest
    if total(context) <= token_limit or not older:
        return context
    placeholder = {"role": "system", "content": PLACEHOLDER}
    dropped = set()
    for i in older:
        dropped.add(i)
        context = [system, placeholder] + [m for j, m in enumerate(rest) if j not in dropped]
        if total(context) <= token_limit:
            break
    return context
