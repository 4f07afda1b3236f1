"""Cache-scheduling engine for flow-matching samplers over 3D latent grids."""

import json

from ._core import *  # noqa: F401,F403
from ._core import replay_json, simulate_json


def simulate(config, **kwargs):
    """Run cached and full sampling on the synthetic field; returns the summary dict."""
    return json.loads(simulate_json(config, **kwargs))


def replay(path, config, **kwargs):
    """Evaluate a policy on a recorded trace; returns the summary dict."""
    return json.loads(replay_json(path, config, **kwargs))
