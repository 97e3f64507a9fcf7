"""caselet: a single-binary kernel for adaptive, context-aware participatory
studies — expression DSL, survey sessions, event-driven study rules, message
scheduling, persistence, HTTP APIs, and a deterministic simulator."""

__version__ = "0.1.0"
