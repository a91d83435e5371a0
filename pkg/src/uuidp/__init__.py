"""Uncoordinated unique-ID generation: generators, adversarial games, exact
collision probabilities and Monte-Carlo estimates."""

__version__ = "0.1.0"
