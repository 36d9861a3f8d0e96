"""The run report shared by all subcommands, and the input loaders they use."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

from quasiperiod.consts import EXIT_OK
from quasiperiod.errors import InputError, ParseError
from quasiperiod.utils.common import load_json
from quasiperiod.utils.divisor_ops import Divisor
from quasiperiod.utils.quasipoly import PeriodicProductForm, Quasipolynomial, StripWindow, expand_product

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    """One structured document per invocation."""

    command: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timing: float = 0.0
    warnings: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    summary: str = ""

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timing": self.timing,
            "warnings": self.warnings,
            "exit_code": self.exit_code,
        }


def load_function(path: str | Path) -> tuple[Quasipolynomial, PeriodicProductForm | None]:
    """A quasipolynomial file ({"terms": [...]}) or a product-form file ({"omega": ..., "offsets": [...]})."""
    doc = load_json(path)
    if isinstance(doc, dict) and "terms" in doc:
        return Quasipolynomial.from_dict(doc), None
    if isinstance(doc, dict) and "omega" in doc:
        form = PeriodicProductForm.from_dict(doc)
        return expand_product(form), form
    raise ParseError(f"{path} holds neither 'terms' nor a product form", field_path="terms")


def load_divisor(path: str | Path) -> Divisor:
    return Divisor.from_dict(load_json(path))


def parse_substrip(text: str, base: StripWindow) -> StripWindow:
    """'re_min,re_max' cut out of base, keeping its Im range."""
    try:
        re_min, re_max = (float(p) for p in text.split(","))
    except ValueError as exc:
        raise InputError(f"Substrip must read 're_min,re_max', got '{text}'") from exc
    return base.with_re(re_min, re_max)
