from genagents.llm.backend import EMBEDDING_DIM, LLMBackend, complete_parsed, cosine, normalize
from genagents.llm.http import HTTPBackend
from genagents.llm.prompts import TEMPLATES, PromptRequest, TemplateId, render
from genagents.llm.scripted import ScriptedBackend, ScriptRow

__all__ = [
    "EMBEDDING_DIM",
    "HTTPBackend",
    "LLMBackend",
    "PromptRequest",
    "ScriptRow",
    "ScriptedBackend",
    "TEMPLATES",
    "TemplateId",
    "complete_parsed",
    "cosine",
    "normalize",
    "render",
]
