# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Measurement and analysis of consumer aesthetic perception of product images."""
