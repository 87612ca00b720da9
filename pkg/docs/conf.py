VERSION = open("../aglens/__init__.py").read().split('__version__ = "')[1].split('"')[0]

project = "aglens"
version = VERSION

master_doc = "index"
highlight_language = "python"
extensions = ["sphinx.ext.autodoc"]

html_theme = "sphinx_rtd_theme"
