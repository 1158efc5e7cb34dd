# Configuration file for the Sphinx documentation builder.
#
# For a full list of options see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

import toml

sys.path.insert(0, os.path.abspath("../../packages/main/src"))
sys.path.insert(0, os.path.abspath("../../packages/core/src"))


# -- Project information -----------------------------------------------------

project = "QFP Framework"
copyright = "2021 QFP Framework contributors"
author = "QFP Framework contributors"

with open(os.path.abspath("../../packages/main/pyproject.toml")) as manifest:
    release = toml.load(manifest)["tool"]["poetry"]["version"]
version = ".".join(release.split(".")[:2])


# -- General configuration ---------------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.todo", "sphinx.ext.mathjax"]

templates_path = ["_templates"]

exclude_patterns = []

# Render todo and todolist directives
todo_include_todos = True


# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_rtd_theme"

html_static_path = ["_static"]

# -- Override Robot Framework lexer ------------------------------------------
from robotframeworklexer import RobotFrameworkLexer
from sphinx.highlighting import lexers

lexers["robotframework"] = RobotFrameworkLexer()
