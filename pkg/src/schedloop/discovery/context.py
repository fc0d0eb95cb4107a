"""Conversation context: construction, token estimation, compression."""

from dataclasses import asdict, dataclass

from ..errors import InvalidConfig
from ..llm import ChatMessage, estimate_tokens
from .prompts import system_prompt, user_prompt

ROLES = ("system", "user", "assistant", "feedback")
KEEP_RECENT = 3


class BudgetImpossible(ValueError):
    pass


@dataclass(frozen=True)
class ContextEntry:
    role: str
    text: str
    iteration: int | None = None
    compressed: bool = False
    summary: str = ""  # one-line stand-in used when the entry is compressed

    def to_dict(self) -> dict:
        return asdict(self)


def context_tokens(context) -> int:
    return sum(estimate_tokens(e.text) for e in context)


def build_initial_context(config) -> list[ContextEntry]:
    """System and user prompt for a DiscoveryConfig (or anything with
    ``target_metric`` and ``token_budget``)."""
    context = [
        ContextEntry("system", system_prompt()),
        ContextEntry("user", user_prompt(config.target_metric)),
    ]
    need = context_tokens(context)
    if need > config.token_budget:
        raise InvalidConfig(f"token_budget {config.token_budget} is below the initial context size ({need} tokens)")
    return context


def to_messages(context) -> list[ChatMessage]:
    # feedback goes back to the model as user turns
    return [ChatMessage("user" if e.role == "feedback" else e.role, e.text) for e in context]


def compress_context(context, token_budget: int, best_iteration: int | None = None) -> list[ContextEntry]:
    """Shrink ``context`` to at most ``token_budget`` estimated tokens.

    The two prompts, every entry of ``best_iteration`` and of the three most
    recent iterations are kept verbatim; each older iteration collapses to a
    single summary line, and summaries are then dropped oldest-first if the
    result is still too large.
    """
    prompts, rest = list(context[:2]), list(context[2:])
    iterations = sorted({e.iteration for e in rest if e.iteration is not None})
    keep = set(iterations[-KEEP_RECENT:])
    if best_iteration is not None:
        keep.add(best_iteration)

    mandatory = prompts + [e for e in rest if e.iteration in keep]
    if context_tokens(mandatory) > token_budget:
        raise BudgetImpossible(
            f"prompts, best and last {KEEP_RECENT} iterations need {context_tokens(mandatory)} tokens, "
            f"budget is {token_budget}"
        )

    out = list(prompts)
    summarized: set = set()
    for e in rest:
        if e.iteration in keep:
            out.append(e)
        elif e.iteration not in summarized:
            summarized.add(e.iteration)
            line = next((x.summary for x in rest if x.iteration == e.iteration and x.summary), "")
            line = line or f"(iteration {e.iteration}: no summary)"
            out.append(ContextEntry("feedback", line, e.iteration, compressed=True, summary=line))

    while context_tokens(out) > token_budget:
        oldest = next(i for i, e in enumerate(out) if e.compressed)
        del out[oldest]
    return out
