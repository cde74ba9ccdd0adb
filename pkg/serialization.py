"""
Artifact files: versioned JSON records and canonical text renderings.
Rationals are written as "p/q" strings so that no consumer sees a float.
"""

import json
import logging
import os
import tempfile
from fractions import Fraction

from errors import ConfigError
from rhsolver import DressingTriple
from scalars import ScalarPoly, format_rational
from symbols import HSymbol, Truncation

SCHEMA = "todahbar/1"

ARTIFACT_FILES = {
    "triple": "triple.json",
    "wkb": "wkb.json",
    "tau": "tau.json",
    "verify": "verify.txt",
    "cnm": "cnm.txt",
}

TEXT_NAMES = {"triple": "triple.txt", "wkb": "wkb.txt", "tau": "tau.txt"}


# records

def triple_record(triple, name="custom"):
    """JSON-ready record of a dressing triple, with its truncation and working window."""
    record = {
        "schema": SCHEMA,
        "kind": "triple",
        "preset": name,
        "truncation": triple.trunc.describe(),
        "working": triple.working.describe() if triple.working is not None else None,
        "X": [piece.to_record() for piece in triple.X],
        "Xbar": [piece.to_record() for piece in triple.Xbar],
        "phi": [poly.to_records() for poly in triple.phi],
        "alpha": [format_rational(a) for a in triple.alpha],
        "alphabar": [format_rational(a) for a in triple.alphabar],
    }
    return record


def _check_schema(record, kind):
    if record.get("schema") != SCHEMA:
        raise ConfigError(f"Unsupported artifact schema {record.get('schema')!r}, expected {SCHEMA!r}")
    if record.get("kind") != kind:
        raise ConfigError(f"Expected a {kind} artifact, got {record.get('kind')!r}")


def triple_from_record(record):
    """
    Rebuild a DressingTriple from ``triple_record`` output.

    Returns:
    --------
    tuple
        (DressingTriple, preset name)
    """
    _check_schema(record, "triple")
    trunc = Truncation(**record["truncation"])
    working = Truncation(**record["working"]) if record.get("working") else None
    slice_trunc = trunc.with_hbar(0)
    ring = trunc.ring
    triple = DressingTriple(
        trunc,
        [HSymbol.from_record(slice_trunc, piece) for piece in record["X"]],
        [HSymbol.from_record(slice_trunc, piece) for piece in record["Xbar"]],
        [ScalarPoly.from_records(ring, poly) for poly in record["phi"]],
        [Fraction(a) for a in record.get("alpha", [])],
        [Fraction(a) for a in record.get("alphabar", [])],
        working,
    )
    if not (len(triple.X) == len(triple.Xbar) == len(triple.phi) == trunc.n_hbar + 1):
        raise ConfigError(f"Triple record holds {len(triple.phi)} orders, truncation expects {trunc.n_hbar + 1}")
    return triple, record.get("preset", "custom")


def load_triple(path):
    """Read a triple.json written by ``write_artifacts``."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            record = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read triple from {path}: {e}") from e
    triple, name = triple_from_record(record)
    logging.info(f"Loaded triple '{name}' through order {triple.order} from {path}")
    return triple, name


def phases_record(unbar, bar, trunc):
    return {
        "schema": SCHEMA,
        "kind": "wkb",
        "truncation": trunc.describe(),
        "S": unbar.to_record(),
        "Sbar": bar.to_record(),
    }


def tau_record(tables, grad, expansion, trunc):
    """v/v̄/φ tables, the gradients with their exactness and F_n."""
    return {
        "schema": SCHEMA,
        "kind": "tau",
        "truncation": trunc.describe(),
        "tables": {
            "v": [{"n": n, "k": k, "value": poly.to_records()} for (n, k), poly in sorted(tables.v.items())],
            "vbar": [{"n": n, "k": k, "value": poly.to_records()} for (n, k), poly in sorted(tables.vbar.items())],
            "phi": [poly.to_records() for poly in tables.phi],
        },
        "gradient": [
            {"n": n, "component": label, "value": value.to_records(),
             "exact_through": list(grad.exact[key])}
            for n in range(grad.n_max + 1)
            for label, key, value, _ in grad.components(n)
        ],
        **expansion.to_record(),
    }


# text renderings

def triple_text(triple, name="custom"):
    lines = [f"# dressing triple '{name}', truncation {triple.trunc.describe()}"]
    for n in range(triple.order + 1):
        lines.append(f"X_{n} = {triple.X[n].to_text()}")
        lines.append(f"Xbar_{n} = {triple.Xbar[n].to_text()}")
        lines.append(f"phi_{n} = {triple.phi[n].to_text()}")
        lines.append(f"alphabar_{n} = {format_rational(triple.alphabar[n])}")
    return "\n".join(lines) + "\n"


def phases_text(unbar, bar):
    lines = []
    for n, piece in enumerate(unbar.S):
        lines.append(f"S_{n} = {piece.to_text()}")
    for n, piece in enumerate(bar.S):
        lines.append(f"Sbar_{n} = {piece.to_text()}")
    return "\n".join(lines) + "\n"


def tau_text(expansion):
    lines = [f"F_{n} = {poly.to_text()}" for n, poly in sorted(expansion.F.items())]
    lines.extend(report.summary() for report in expansion.reports)
    return "\n".join(lines) + "\n"


# files

def ensure_output_directory(out_dir):
    """
    Create ``out_dir`` and check that it is writable.

    Falls back to a directory under the system temp directory, as the
    log directory does; returns the directory actually used.
    """
    try:
        if out_dir and not os.path.exists(out_dir):
            os.makedirs(out_dir, exist_ok=True)
            logging.debug(f"Created output directory: {out_dir}")
        test_file = os.path.join(out_dir, ".write_test")
        with open(test_file, "w") as f:
            f.write("test")
        os.remove(test_file)
        return out_dir
    except OSError as write_error:
        fallback_dir = os.path.join(tempfile.gettempdir(), "todahbar_out")
        logging.warning(f"Output directory {out_dir} is not writable ({write_error}); using {fallback_dir}")
        try:
            os.makedirs(fallback_dir, exist_ok=True)
        except OSError as fallback_error:
            raise ConfigError(f"No writable output directory: {fallback_error}") from fallback_error
        return fallback_dir


def write_artifacts(out_dir, artifacts, fmt="json"):
    """
    Write the artifacts of one run.

    Parameters:
    -----------
    out_dir : str
        Target directory
    artifacts : dict
        Keys among ARTIFACT_FILES; record values are dicts (JSON) and
        text values are strings
    fmt : str
        'json' writes records as JSON, 'text' writes the '*_text' entries
        under .txt names instead

    Returns:
    --------
    list of str
        Paths written, in a fixed order
    """
    if fmt not in ("json", "text"):
        raise ConfigError(f"Unknown output format {fmt!r} (expected json or text)")
    out_dir = ensure_output_directory(out_dir)
    written = []
    for key, filename in ARTIFACT_FILES.items():
        if key in TEXT_NAMES and fmt == "text":
            content = artifacts.get(f"{key}_text")
            filename = TEXT_NAMES[key]
        else:
            content = artifacts.get(key)
        if content is None:
            continue
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            if isinstance(content, str):
                f.write(content)
            else:
                json.dump(content, f, indent=2, ensure_ascii=False)
                f.write("\n")
        written.append(path)
        logging.info(f"Wrote {path}")
    return written
