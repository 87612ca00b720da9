"""Gather the certificate layers."""

from .boolean import *
from .plfun import *
from .quant import *
