"""Sphinx configuration for the randcons docs (rst only, API pages via autodoc)."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version as package_version
from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

project = "randcons"
author = "randcons developers"
copyright = f"{author}"
try:
    release = package_version("randcons")
except PackageNotFoundError:
    release = "0.1.0"
version = ".".join(release.split(".")[:2])

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
]

master_doc = "index"
exclude_patterns = ["_build"]
html_theme = "alabaster"

# Plotting and table output are optional for building the API pages.
autodoc_mock_imports = ["matplotlib", "pandas"]
autodoc_member_order = "bysource"
autodoc_typehints = "signature"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "networkx": ("https://networkx.org/documentation/stable", None),
}
