# utils.py
#
# MIT License
#
# Copyright (c) 2026 The offpolicy authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.


import hashlib
import logging
import math
import os
import re
from typing import Union

###############################################################################
# Errors
###############################################################################

class OffPolicyError(Exception):
    """
    Base class for all the errors raised by this package
    """
    pass


class ParseError(OffPolicyError):
    """
    A numeric expression could not be parsed
    """
    pass


###############################################################################
# seeding
###############################################################################

# all the seed arithmetic is done modulo 2^64
MASK64 = (1 << 64) - 1

SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX64_MUL1 = 0xBF58476D1CE4E5B9
SPLITMIX64_MUL2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """
    One round of the SplitMix64 finalizer.
    """
    z = (x + SPLITMIX64_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * SPLITMIX64_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX64_MUL2) & MASK64
    return z ^ (z >> 31)


def _seed_part(part: Union[int, str]) -> int:
    if isinstance(part, str):
        # python's hash() is salted per process, so strings go through blake2b
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return int(part) & MASK64


def mix_seed(*parts: Union[int, str]) -> int:
    """
    Derive a 64-bit seed from a sequence of integers and strings.

    The state starts at 0 and, for every part p (strings are first reduced to
    the little-endian blake2b-64 digest of their UTF-8 bytes), becomes
    splitmix64(state XOR p). The result is the final state.
    """
    state = 0
    for part in parts:
        state = splitmix64(state ^ _seed_part(part))
    return state


###############################################################################
# parsers
###############################################################################

_POWER_EXPR = re.compile(
    r"^\s*(?:(?P<coef>[-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*\s*)?"
    r"(?P<base>[0-9]+)\s*\^\s*(?P<exp>[-+]?[0-9]+)\s*$")


def parse_number(value: Union[str, int, float]) -> float:
    """
    Parse a float, also accepting the `2^-8` and `0.01*2^4` forms used
    for stepsize grids.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)

    text = str(value).strip()
    m = _POWER_EXPR.match(text)
    if m:
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        return coef * math.pow(float(m.group("base")), int(m.group("exp")))

    try:
        return float(text)
    except ValueError:
        raise ParseError(f"'{value}' is not a number")


###############################################################################
# OS utils
###############################################################################

def ensure_dir(d: str) -> str:
    os.makedirs(d, exist_ok=True)
    return d


###############################################################################
# logging
###############################################################################

def set_log_level(settings) -> None:
    """
    Switch the root logger (and its handlers) between INFO and DEBUG
    """
    from .config import SETTINGS_KEY_DEBUG_LOGS

    level = logging.DEBUG if settings[SETTINGS_KEY_DEBUG_LOGS] else logging.INFO
    logging.debug(f"[UTILS] Changing loglevel to {level}")
    logger = logging.getLogger()
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)
