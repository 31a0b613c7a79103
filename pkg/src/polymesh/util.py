"""Small shared utilities: canonical JSON, hashing, atomic writes, numerics."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

from .errors import InputError


def as_vector(x, dim=None, name="vector"):
    """Coerce to a 1-D float64 array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InputError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise InputError(f"{name} must have length {dim}, got {v.shape[0]}")
    return v


def check_unit(xi, tol=1e-9):
    xi = np.asarray(xi, dtype=float)
    nrm = float(np.linalg.norm(xi))
    if abs(nrm - 1.0) > tol:
        raise InputError(f"direction must have unit norm (got {nrm!r})")
    return xi


def normalize_rows(mat):
    mat = np.asarray(mat, dtype=float)
    norms = np.linalg.norm(mat, axis=-1, keepdims=True)
    return mat / norms


def ball_volume(dim, radius):
    """Lebesgue volume of a Euclidean ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * radius**dim


def power_iteration_opnorm(matrix, tol=1e-10, max_iter=10000):
    """Operator (spectral) norm of `matrix` by power iteration on M^T M."""
    m = np.asarray(matrix, dtype=float)
    gram = m.T @ m
    v = np.ones(gram.shape[0]) / math.sqrt(gram.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        lam_new = float(v_new @ gram @ v_new)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        v, lam = v_new, lam_new
    return math.sqrt(max(lam, 0.0))


def golden_section_max(fn, lo, hi, iters=60):
    """Golden-section search for a maximizer of fn on [lo, hi].

    fn need not be unimodal; the result is then a local polish, which is all
    callers rely on (they keep the best of the probed values).
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    best_t, best_v = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        else:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        if fc > best_v:
            best_t, best_v = c, fc
        if fd > best_v:
            best_t, best_v = d, fd
    return best_t, best_v


def rng_for(*parts):
    """Deterministic generator derived from a tuple of integer seed parts."""
    seq = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return np.random.default_rng(seq)


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def canonical_json(obj):
    """Serialize with sorted keys and shortest-round-trip floats.

    Non-finite floats become null: artifact files must be strict JSON, and a
    missing certificate is exactly what +inf means for them.
    """
    return json.dumps(_jsonify(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write_text(path, text):
    """Write text to path via a temp file + rename in the same directory."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-polymesh-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
