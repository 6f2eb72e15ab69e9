"""Prompt template registry.

Every prompt the system issues is rendered here and carries its template id.
Templates marked ``wording="canonical"`` keep the question text used by the
original generative-agent architecture; ``"local"`` templates are our own
wording for steps where no canonical prompt exists.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping


class TemplateId(str, enum.Enum):
    IMPORTANCE_RATING = "importance_rating"
    FOCAL_QUESTIONS = "focal_questions"
    INSIGHTS = "insights"
    AGENT_SUMMARY_PART = "agent_summary_part"
    DAY_PLAN = "day_plan"
    DECOMPOSE = "decompose"
    REACTION = "reaction"
    DESTINATION = "destination"
    EMOJI = "emoji"
    UTTERANCE = "utterance"
    DIALOGUE_SUMMARY = "dialogue_summary"
    PREVIOUS_DAY_SUMMARY = "previous_day_summary"
    ENTITY_SUMMARY_PART = "entity_summary_part"


@dataclass(frozen=True)
class PromptRequest:
    template_id: TemplateId
    rendered_text: str
    max_tokens: int = 256
    temperature: float = 0.0
    # The values substituted into the template. Scripted responses may
    # reference them; they never carry information absent from rendered_text.
    variables: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.template_id, TemplateId):
            object.__setattr__(self, "template_id", TemplateId(self.template_id))
        if not self.rendered_text or not self.rendered_text.strip():
            raise ValueError("rendered_text must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: TemplateId
    text: str
    max_tokens: int
    wording: str  # "canonical" or "local"


# Question sentences reused verbatim by the retrieval queries and tests.
FOCAL_QUESTION_PROMPT = (
    "Given only the information above, what are 3 most salient high-level "
    "questions we can answer about the subjects in the statements?"
)
INSIGHT_PROMPT = (
    "What 5 high-level insights can you infer from the above statements? "
    "(example format: insight (because of 1, 5, 3))"
)
REACTION_QUESTION = (
    "Should {name} react to the observation, and if so, what would be an "
    "appropriate reaction?"
)
DESTINATION_QUESTION = "Which area should {name} go to?"

CORE_CHARACTERISTICS_QUERY = "{name}'s core characteristics"
DAILY_OCCUPATION_QUERY = "{name}'s current daily occupation"
RECENT_PROGRESS_QUERY = "{name}'s feeling about {possessive} recent progress in life"
PREVIOUS_DAY_QUERY = "{name}'s previous day plan"
RELATIONSHIP_QUERY = "What is {observer}'s relationship with the {entity}?"
STATUS_QUERY = "{entity} is {status}"

_TEMPLATES = {
    TemplateId.IMPORTANCE_RATING: PromptTemplate(
        TemplateId.IMPORTANCE_RATING,
        "On a scale of 1 to 10, where 1 is an entirely routine moment and 10 "
        "is a deeply significant, life-changing one, rate how significant the "
        "following memory is to the person who holds it.\n"
        "Memory: {memory}\n"
        "Answer with a single integer.\n"
        "Rating:",
        max_tokens=8,
        wording="local",
    ),
    TemplateId.FOCAL_QUESTIONS: PromptTemplate(
        TemplateId.FOCAL_QUESTIONS,
        "{statements}\n\n" + FOCAL_QUESTION_PROMPT,
        max_tokens=200,
        wording="canonical",
    ),
    TemplateId.INSIGHTS: PromptTemplate(
        TemplateId.INSIGHTS,
        "Statements about {name}\n{statements}\n\n" + INSIGHT_PROMPT,
        max_tokens=400,
        wording="canonical",
    ),
    TemplateId.AGENT_SUMMARY_PART: PromptTemplate(
        TemplateId.AGENT_SUMMARY_PART,
        "Memories of {name}:\n{statements}\n\n"
        "Query: {query}\n"
        "Based only on these memories, answer the query in one or two sentences.",
        max_tokens=150,
        wording="local",
    ),
    TemplateId.PREVIOUS_DAY_SUMMARY: PromptTemplate(
        TemplateId.PREVIOUS_DAY_SUMMARY,
        "Memories of {name} from day {day}:\n{statements}\n\n"
        "Query: {query}\n"
        "Summarize what {name} planned and did that day in two or three sentences.",
        max_tokens=200,
        wording="local",
    ),
    TemplateId.ENTITY_SUMMARY_PART: PromptTemplate(
        TemplateId.ENTITY_SUMMARY_PART,
        "Memories of {observer}:\n{statements}\n\n"
        "Query: {query}\n"
        "Based only on these memories, answer the query in one or two sentences.",
        max_tokens=150,
        wording="local",
    ),
    TemplateId.DAY_PLAN: PromptTemplate(
        TemplateId.DAY_PLAN,
        "{agent_summary}\n\n{context}\n\n"
        "Today is day {day}. Write {name}'s plan from {start} to {end} in "
        "{count_hint} broad strokes, one per line, formatted as "
        "'HH:MM (Nm): activity'. Entries must be consecutive with no gaps or "
        "overlaps, starting at {start} and ending at {end}.",
        max_tokens=400,
        wording="local",
    ),
    TemplateId.DECOMPOSE: PromptTemplate(
        TemplateId.DECOMPOSE,
        "{name} plans to {description} from {start} to {end} ({duration} minutes).\n"
        "Break this activity into consecutive sub-tasks of about {granularity} "
        "minutes each, one per line, formatted as 'HH:MM (Nm): sub-task'. The "
        "sub-tasks must start at {start}, end at {end}, and leave no gaps or overlaps.",
        max_tokens=400,
        wording="local",
    ),
    TemplateId.REACTION: PromptTemplate(
        TemplateId.REACTION,
        "{agent_summary}\n\n{entity_summary}\n\n"
        "Observation: {observation}\n\n"
        + REACTION_QUESTION
        + "\nAnswer 'No', or 'Yes' followed by the reaction.",
        max_tokens=120,
        wording="canonical",
    ),
    TemplateId.DESTINATION: PromptTemplate(
        TemplateId.DESTINATION,
        "{name} is currently in {current_area}. {name} is planning to {action}.\n"
        "What {name} knows about the surroundings:\n{world_text}\n"
        "Candidates: {candidates}\n\n"
        + DESTINATION_QUESTION
        + "\nAnswer with exactly one candidate name.",
        max_tokens=20,
        wording="canonical",
    ),
    TemplateId.EMOJI: PromptTemplate(
        TemplateId.EMOJI,
        "Convert the following action into one or two emoji.\n"
        "Action: {action}\n"
        "Emoji:",
        max_tokens=10,
        wording="local",
    ),
    TemplateId.UTTERANCE: PromptTemplate(
        TemplateId.UTTERANCE,
        "{summary}\n\n{context}"
        "Conversation between {speaker} and {listener}.\n"
        "{rolling}{transcript}\n"
        "This is turn {turn_number} of the conversation. What does {speaker} "
        "say next? Reply with the utterance only, or [END] if the conversation is over.",
        max_tokens=150,
        wording="local",
    ),
    TemplateId.DIALOGUE_SUMMARY: PromptTemplate(
        TemplateId.DIALOGUE_SUMMARY,
        "{prior}{transcript}\n\n"
        "Summarize the conversation between {first} and {second} in a few sentences.",
        max_tokens=200,
        wording="local",
    ),
}

TEMPLATES: Mapping[TemplateId, PromptTemplate] = MappingProxyType(_TEMPLATES)


def render(template_id: TemplateId | str, temperature: float = 0.0, **variables: Any) -> PromptRequest:
    """Fill a registered template and wrap it in a :class:`PromptRequest`."""
    template = TEMPLATES[TemplateId(template_id)]
    values = {key: str(value) for key, value in variables.items()}
    text = template.text.format(**values)
    return PromptRequest(
        template_id=template.template_id,
        rendered_text=text,
        max_tokens=template.max_tokens,
        temperature=temperature,
        variables=MappingProxyType(values),
    )


def numbered(lines: list[str]) -> str:
    return "\n".join(f"{i}. {line}" for i, line in enumerate(lines, start=1))
