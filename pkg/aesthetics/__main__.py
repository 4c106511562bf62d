# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Entry point for `python -m aesthetics`."""

from aesthetics.cli import app

app(prog_name="aesthetics")
