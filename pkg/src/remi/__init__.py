"""remi: a rule-driven reminiscence chatbot.

Conducts picture-triggered reminiscence sessions, builds a structured life
model and tagged memento archive from the answers, self-assesses with
engagement and quality metrics, and suggests companion connections from
life-model similarity.
"""

__version__ = "0.1.0"
