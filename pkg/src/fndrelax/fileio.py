"""CSV and JSON file formats, atomic writes and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile

import numpy as np

from .errors import ToolkitError
from .relaxfit import DecayTrace

TRACE_HEADER = ("tau_us", "intensity")
TRACE_HEADER_SIGMA = ("tau_us", "intensity", "sigma")
POPULATION_HEADER = ("particle_id", "core_nm", "dense_nm", "porous_nm", "nv_offset_nm",
                     "t1_before_us", "t1_after_us", "dgamma_per_s")
SWEEP_HEADER = ("c_cat_m", "c_radical_m", "dgamma_mean_per_s", "dgamma_sd_per_s")
PROFILE_HEADER = ("t_s", "c_radical_m", "dgamma_per_s")
HISTOGRAM_HEADER = ("bin_lo_per_s", "bin_hi_per_s", "count")


class FormatError(ToolkitError, ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path, self.line = path, line


def atomic_write(path, data):
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_bytes(data):
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(header, rows, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def parse_csv(text, path="<string>", expected_header=None):
    """Parse toolkit CSV text into (header, float rows, comment lines).

    Lines starting with ``#`` are comments.  Every data row must have as
    many fields as the header and parse as floats.
    """
    header = None
    rows, comments = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            comments.append(stripped[1:].strip())
            continue
        fields = next(csv.reader([stripped]))
        if header is None:
            header = tuple(f.strip() for f in fields)
            if expected_header is not None and header not in expected_header:
                raise FormatError(path, lineno, f"unexpected header {','.join(header)!r}")
            continue
        if len(fields) != len(header):
            raise FormatError(path, lineno, f"expected {len(header)} fields, found {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise FormatError(path, lineno, f"non-numeric field in {stripped!r}") from None
    if header is None:
        raise FormatError(path, 0, "no header line")
    return header, rows, comments


def read_csv(path, expected_header=None):
    with open(path) as fh:
        return parse_csv(fh.read(), path, expected_header)


def trace_to_csv(trace: DecayTrace):
    comments = [f"{k}={v}" for k, v in sorted(trace.metadata.items())]
    if trace.sigma is not None:
        rows = zip(trace.tau_us, trace.intensity, trace.sigma)
        return csv_text(TRACE_HEADER_SIGMA, rows, comments)
    return csv_text(TRACE_HEADER, zip(trace.tau_us, trace.intensity), comments)


def read_trace_csv(path) -> DecayTrace:
    header, rows, comments = read_csv(path, (TRACE_HEADER, TRACE_HEADER_SIGMA))
    if not rows:
        raise FormatError(path, 0, "trace has no data rows")
    meta = {}
    for c in comments:
        if "=" in c:
            k, v = c.split("=", 1)
            meta[k.strip()] = v.strip()
    arr = np.array(rows, dtype=float)
    sigma = arr[:, 2] if arr.shape[1] == 3 else None
    try:
        return DecayTrace(arr[:, 0], arr[:, 1], sigma, False, meta)
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from None


def population_rows(records):
    for r in records:
        g = r.geometry
        yield (r.particle_id, 2.0 * g.core_radius, g.dense_shell, g.porous_shell, r.nv.distance,
               r.t1_before_us, r.t1_after_us, r.dgamma_per_s)


def sweep_rows(rows):
    for r in rows:
        yield r["c_m"], r["c_radical_m"], r["dgamma_mean_per_s"], r["dgamma_sd_per_s"]


def profile_rows(rows):
    for r in rows:
        yield r["t_s"], r["c_radical_m"], r["dgamma_per_s"]


def json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def build_manifest(version, command, options, seed, config, inputs, outputs):
    """Everything needed to replay a run.  Outputs map file name to sha256."""
    return {
        "toolkit_version": version,
        "command": command,
        "options": options,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }
