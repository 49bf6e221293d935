# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Jinja2 templates rendered by the command-line front end."""
