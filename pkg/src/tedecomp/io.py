"""CSV panels, sectioned key/value configuration files, atomic output."""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .dynsys import (
    CouplingTerm,
    DynSysConfig,
    NoiseSpec,
    TimeSeriesPanel,
    paper_system,
    theorem2_config,
)
from .errors import InputError, ParseError

PathLike = Union[str, os.PathLike]


def fmt(value) -> str:
    """Render a value for CSV output; floats round-trip at 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if isinstance(value, (tuple, list)):
        return " ".join(fmt(v) for v in value)
    if value is None:
        return ""
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def records_to_csv(rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> str:
    if columns is None:
        columns = list(dict.fromkeys(key for row in rows for key in row))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def panel_to_csv(panel: TimeSeriesPanel) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(panel.channels)
    for row in panel.data.T:
        writer.writerow(["%.17g" % v for v in row])
    return buf.getvalue()


def write_panel_csv(panel: TimeSeriesPanel, path: PathLike) -> None:
    atomic_write_text(path, panel_to_csv(panel))


def parse_csv_text(text: str, source: str = "<string>") -> TimeSeriesPanel:
    header = None
    columns: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cells = next(csv.reader([raw]))
        if header is None:
            header = [c.strip() for c in cells]
            if any(not name for name in header):
                raise ParseError(f"{source}: empty channel name in header", line=lineno)
            dupes = sorted({n for n in header if header.count(n) > 1})
            if dupes:
                raise ParseError(f"{source}: duplicate channel names {dupes}", line=lineno)
            columns = [[] for _ in header]
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"{source}: expected {len(header)} cells, found {len(cells)}", line=lineno
            )
        for j, cell in enumerate(cells):
            cell = cell.strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"{source}: non-numeric cell {cell!r}", line=lineno, column=header[j]
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    f"{source}: non-finite cell {cell!r}", line=lineno, column=header[j]
                )
            columns[j].append(value)
    if header is None:
        raise ParseError(f"{source}: no header row")
    if not columns[0]:
        raise ParseError(f"{source}: no data rows")
    return TimeSeriesPanel(tuple(header), np.array(columns, dtype=float))


def load_csv(path: PathLike) -> TimeSeriesPanel:
    """Read a rectangular numeric CSV with a header row of channel names."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_csv_text(text, str(path))


# -- configuration files -----------------------------------------------------

def read_config(source: Union[PathLike, str], is_text: bool = False) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        if is_text:
            parser.read_string(str(source))
        else:
            with open(source) as fh:
                parser.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {source}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}".replace("\n", " ")) from None
    return parser


def parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_int_range(text: str) -> list[int]:
    """``"1..8"``, ``"1,3,5"`` or a mix like ``"1..3,7"``."""
    out: list[int] = []
    for part in parse_list(str(text)):
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ParseError(f"bad integer list {text!r}") from None
    if not out:
        raise ParseError(f"empty integer list {text!r}")
    return out


def parse_cond_lags(text: str) -> dict[str, list[int]]:
    """``"S:1,2;T:3..5"`` -> ``{"S": [1, 2], "T": [3, 4, 5]}``."""
    out: dict[str, list[int]] = {}
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ParseError(f"conditioning lags need 'CHANNEL:LAGS', got {part!r}")
        name, lags = part.split(":", 1)
        out.setdefault(name.strip(), []).extend(parse_int_range(lags))
    return out


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ParseError(f"missing key {key!r} in [{section.name}]")
        return default
    raw = section[key]
    try:
        return conv(raw)
    except (ValueError, InputError) as exc:
        raise ParseError(f"bad value for {key!r} in [{section.name}]: {raw!r} ({exc})") from None


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def system_from_parser(parser: configparser.ConfigParser) -> DynSysConfig:
    """Build a :class:`DynSysConfig` from ``[system]``, ``[channel NAME]`` and ``[term ...]``.

    ``[system] preset = paper`` starts from the four-channel X, Y, Z, S
    system; an optional ``[theorem2]`` section with ``alpha`` and ``c``
    rescales its S couplings and noise.
    """
    if "system" not in parser:
        raise ParseError("config has no [system] section")
    sys_sec = parser["system"]
    n = _get(sys_sec, "n_samples", int, 10_000)
    burn_in = _get(sys_sec, "burn_in", int, 1000)
    seed = _get(sys_sec, "seed", int, 0)
    preset = _get(sys_sec, "preset", str, None)
    if preset is not None:
        if preset != "paper":
            raise ParseError(f"unknown preset {preset!r}")
        config = paper_system(
            n, seed,
            function_id=_get(sys_sec, "function", str, "identity"),
            noise_kind=_get(sys_sec, "noise", str, "gaussian"),
            burn_in=burn_in,
        )
    else:
        channels = _get(sys_sec, "channels", parse_list, required=True)
        noise = {}
        for name in channels:
            sec_name = f"channel {name}"
            if sec_name in parser:
                sec = parser[sec_name]
                noise[name] = NoiseSpec(
                    _get(sec, "noise", str, "gaussian"), _get(sec, "variance", float, 1.0)
                )
        terms = []
        for sec_name in parser.sections():
            if not sec_name.startswith("term"):
                continue
            sec = parser[sec_name]
            terms.append(
                CouplingTerm(
                    source=_get(sec, "source", str, required=True),
                    target=_get(sec, "target", str, required=True),
                    lag=_get(sec, "lag", int, required=True),
                    coefficient=_get(sec, "coefficient", float, required=True),
                    function_id=_get(sec, "function", str, "identity"),
                )
            )
        extra = [s for s in parser.sections() if s.startswith("channel ")
                 and s.split(" ", 1)[1] not in channels]
        if extra:
            raise ParseError(f"sections for undeclared channels: {extra}")
        config = DynSysConfig(tuple(channels), tuple(terms), noise, n, burn_in, seed)
    if "theorem2" in parser:
        sec = parser["theorem2"]
        config = theorem2_config(
            _get(sec, "alpha", float, required=True), _get(sec, "c", float, required=True), config
        )
    return config


def load_system_config(path: PathLike) -> DynSysConfig:
    return system_from_parser(read_config(path))


def system_to_text(config: DynSysConfig) -> str:
    """Serialise a system config in the format :func:`load_system_config` reads."""
    lines = [
        "[system]",
        f"channels = {', '.join(config.channels)}",
        f"n_samples = {config.n_samples}",
        f"burn_in = {config.burn_in}",
        f"seed = {config.seed}",
        "",
    ]
    for name in config.channels:
        spec = config.noise[name]
        lines += [f"[channel {name}]", f"noise = {spec.kind}", f"variance = {spec.variance!r}", ""]
    for i, t in enumerate(config.terms):
        lines += [
            f"[term {i}]",
            f"source = {t.source}",
            f"target = {t.target}",
            f"lag = {t.lag}",
            f"coefficient = {t.coefficient!r}",
            f"function = {t.function_id}",
            "",
        ]
    return "\n".join(lines)


def system_to_dict(config: DynSysConfig) -> dict:
    return {
        "channels": list(config.channels),
        "n_samples": config.n_samples,
        "burn_in": config.burn_in,
        "seed": config.seed,
        "noise": {k: [v.kind, v.variance] for k, v in config.noise.items()},
        "terms": [
            [t.source, t.target, t.lag, t.coefficient, t.function_id] for t in config.terms
        ],
    }


def system_from_dict(d: dict) -> DynSysConfig:
    return DynSysConfig(
        channels=tuple(d["channels"]),
        terms=tuple(CouplingTerm(*t) for t in d["terms"]),
        noise={k: NoiseSpec(*v) for k, v in d["noise"].items()},
        n_samples=d["n_samples"],
        burn_in=d["burn_in"],
        seed=d["seed"],
    )


