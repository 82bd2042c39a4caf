# Sphinx configuration for the pb-chrono documentation.
# Build with: sphinx-build -b html docs docs/_build

import os
import sys

# algorithms, scenarios and src are top-level packages of the repository root
sys.path.insert(0, os.path.abspath('..'))

project = 'pb-chrono'
copyright = '2024, pb-chrono developers'
author = 'pb-chrono developers'
release = '0.1.0'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
    'myst_parser',
]

# Docstrings follow the Google layout
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_ivar = True

autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
    'undoc-members': False,
}
autodoc_typehints = 'none'

myst_enable_extensions = ['dollarmath']

source_suffix = {
    '.rst': 'restructuredtext',
    '.md': 'markdown',
}

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

html_theme = 'sphinx_rtd_theme'
html_title = 'pb-chrono'
