"""Sampling profiler agent for serverless Python handlers.

Typical use at the top of a handler module:

    from pgo_agent import AgentConfig, install, wrap_handler

    agent = install(AgentConfig(sampling_hz=100, sink="http://collector:9714",
                                app_id="my-app"))

    @wrap_handler
    def handler(event):
        ...
"""

from .agent import (
    AGENT_VERSION,
    AgentConfig,
    AgentHandle,
    DoubleInstall,
    SinkUnavailable,
    UnsupportedRuntime,
    flush,
    install,
    wrap_handler,
)

__version__ = AGENT_VERSION
