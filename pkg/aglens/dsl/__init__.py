"""Gather the parsers and printers of the document formats."""

from .spans import *
from .lexer import *
from .exprparse import *
from .documents import *
