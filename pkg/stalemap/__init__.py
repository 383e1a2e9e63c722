"""Stalemap evaluation package."""
__version__ = "1.0.0"
__copyright__ = "(c) 2024"
__author__ = "Ondřej Tůma <mcbig@zeropage.cz>"
__url__ = "https://github.com/ondratu/stalemap"
__comment__ = (
    "Stalemap is an element-based HD map change detection evaluation toolkit."
)
