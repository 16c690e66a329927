# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html


import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parents[1] / "src"))

# -- Project information -----------------------------------------------------

project = "glyphvote"
copyright = "2026, glyphvote developers"
author = "glyphvote developers"

master_doc = "index"
language = "en"

# -- General configuration ---------------------------------------------------

exclude_patterns = ["_build"]

extensions = [
    "sphinx.ext.intersphinx",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.napoleon",
    "sphinx_copybutton",
    "sphinxcontrib.typer",
    "myst_parser",
]
autosummary_generate = True
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
}
myst_enable_extensions = [
    "colon_fence",
    "deflist",
    "dollarmath",
]

# -- Options for HTML output -------------------------------------------------

html_theme = "furo"
html_theme_options = {
    "light_css_variables": {
        "color-brand-primary": "#2f3992",
        "color-brand-content": "#2f3992",
    },
    "dark_css_variables": {
        "color-brand-primary": "#8e96e0",
        "color-brand-content": "#8e96e0",
    },
}
