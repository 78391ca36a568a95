"""Access to JSON assets shipped inside the package."""

from __future__ import annotations

import json
from importlib import resources


def load_json_asset(name: str):
    ref = resources.files("abground.data").joinpath(name)
    with ref.open("r", encoding="utf-8") as fh:
        return json.load(fh)
