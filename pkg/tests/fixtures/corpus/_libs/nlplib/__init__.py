"""Toy NLP package; submodules are imported by the application, not here."""

VERSION = "3.8"
