"""Stand-in for an expensive dependency; import must stay side-effect free."""

VERSION = "1.0"


def crunch(x):
    return f"crunch:{x}"


def greet(name):
    return f"hello {name}"


def decorate(fn):
    return fn
