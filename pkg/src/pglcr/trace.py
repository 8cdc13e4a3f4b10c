"""Stored MCMC output and its on-disk ``trace.bin`` format.

File layout (all little-endian)::

    header
        magic        8 bytes   b"PGLCRTRC"
        version      uint16    currently 1
        model        uint8     0 = lca, 1 = lcr
        mode         uint8     0 = full, 1 = item_sel, 2 = pred_sel, 3 = both
        flags        uint32    bit 0: class probabilities present,
                               bit 1: theta present, bit 2: beta present
        N, M, P, G   uint32 x 4
        T            uint32    number of records
        K_max        uint32
        levels       uint16 x M
    T records, each
        length       uint32    byte length of the record body that follows
        iteration    uint32    1-based sampler iteration
        labels       uint16 x N        1-based class labels
        beta         float64 x (P+1)*G row-major        (if flag bit 2)
        nu           ceil(M/8) bytes   bit j%8 of byte j//8, LSB first
        gamma        ceil(P/8) bytes   same packing
        log_post     float64
        class_probs  float64 x N*G row-major           (if flag bit 0)
        theta        float64 x G*M*K_max row-major     (if flag bit 1)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, TraceVersionError

MAGIC = b"PGLCRTRC"
FORMAT_VERSION = 1
MODES = ("full", "item_sel", "pred_sel", "both")
_HEADER = struct.Struct("<8sHBBIIIIIII")


@dataclass
class ChainTrace:
    """Thinned samples from one chain.

    Arrays are indexed by kept sample first.  ``labels`` are 0-based.
    ``beta`` is ``(T, P+1, G)`` (``None`` for LCA), ``class_probs`` is
    ``(T, N, G)`` and ``theta`` (full LCR mode only) is ``(T, G, M, K_max)``.
    """

    model: str
    mode: str
    n_classes: int
    levels: np.ndarray
    iterations: np.ndarray
    labels: np.ndarray
    item_inclusion: np.ndarray
    predictor_inclusion: np.ndarray
    log_posterior: np.ndarray
    class_probs: np.ndarray | None = None
    beta: np.ndarray | None = None
    theta: np.ndarray | None = None

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_obs(self) -> int:
        return self.labels.shape[1]

    @property
    def n_items(self) -> int:
        return self.item_inclusion.shape[1]

    @property
    def n_predictors(self) -> int:
        return self.predictor_inclusion.shape[1]

    def select(self, index) -> "ChainTrace":
        """Sub-trace of the given kept samples."""

        def pick(a):
            return None if a is None else a[index]

        return replace(
            self,
            iterations=self.iterations[index],
            labels=self.labels[index],
            item_inclusion=self.item_inclusion[index],
            predictor_inclusion=self.predictor_inclusion[index],
            log_posterior=self.log_posterior[index],
            class_probs=pick(self.class_probs),
            beta=pick(self.beta),
            theta=pick(self.theta),
        )


class TraceRecorder:
    """Preallocated buffers a sampler fills one kept iteration at a time."""

    def __init__(self, model, mode, n_keep, n_obs, n_classes, levels, n_predictors,
                 with_beta, with_theta):
        m = len(levels)
        self.model, self.mode, self.n_classes = model, mode, n_classes
        self.levels = np.asarray(levels, dtype=np.int64)
        self.iterations = np.zeros(n_keep, dtype=np.int64)
        self.labels = np.zeros((n_keep, n_obs), dtype=np.int16 if n_classes < 2**15 else np.int32)
        self.item_inclusion = np.zeros((n_keep, m), dtype=bool)
        self.predictor_inclusion = np.zeros((n_keep, n_predictors), dtype=bool)
        self.log_posterior = np.zeros(n_keep)
        self.class_probs = np.zeros((n_keep, n_obs, n_classes))
        self.beta = np.zeros((n_keep, n_predictors + 1, n_classes)) if with_beta else None
        self.theta = np.zeros((n_keep, n_classes, m, int(self.levels.max()))) if with_theta else None
        self._next = 0

    def record(self, iteration, state, log_posterior):
        t = self._next
        self.iterations[t] = iteration
        self.labels[t] = state.labels
        if state.item_inclusion is not None:
            self.item_inclusion[t] = state.item_inclusion
        if state.predictor_inclusion is not None:
            self.predictor_inclusion[t] = state.predictor_inclusion
        self.log_posterior[t] = log_posterior
        self.class_probs[t] = state.class_probs
        if self.beta is not None:
            self.beta[t] = state.coefficients
        if self.theta is not None:
            self.theta[t] = state.theta
        self._next += 1

    def finish(self) -> ChainTrace:
        return ChainTrace(
            model=self.model,
            mode=self.mode,
            n_classes=self.n_classes,
            levels=self.levels,
            iterations=self.iterations,
            labels=self.labels.astype(np.int64),
            item_inclusion=self.item_inclusion,
            predictor_inclusion=self.predictor_inclusion,
            log_posterior=self.log_posterior,
            class_probs=self.class_probs,
            beta=self.beta,
            theta=self.theta,
        )


def _record_dtype(n, m, p, g, kmax, flags):
    fields = [("length", "<u4"), ("iteration", "<u4"), ("labels", "<u2", (n,))]
    if flags & 4:
        fields.append(("beta", "<f8", ((p + 1) * g,)))
    fields += [
        ("nu", "u1", ((m + 7) // 8,)),
        ("gamma", "u1", ((p + 7) // 8,)),
        ("log_post", "<f8"),
    ]
    if flags & 1:
        fields.append(("class_probs", "<f8", (n * g,)))
    if flags & 2:
        fields.append(("theta", "<f8", (g * m * kmax,)))
    return np.dtype(fields)


def write_trace(trace: ChainTrace, path) -> None:
    """Serialise ``trace`` to the documented binary layout."""
    t, n = trace.labels.shape
    m, p, g = trace.n_items, trace.n_predictors, trace.n_classes
    kmax = int(np.max(trace.levels))
    if g > np.iinfo(np.uint16).max:
        raise DimensionError("too many classes for 16-bit labels")
    flags = (1 if trace.class_probs is not None else 0) | (2 if trace.theta is not None else 0) | (
        4 if trace.beta is not None else 0
    )
    dtype = _record_dtype(n, m, p, g, kmax, flags)
    rec = np.zeros(t, dtype=dtype)
    rec["length"] = dtype.itemsize - 4
    rec["iteration"] = trace.iterations
    rec["labels"] = trace.labels + 1
    if flags & 4:
        rec["beta"] = trace.beta.reshape(t, (p + 1) * g)
    if m:
        rec["nu"] = np.packbits(trace.item_inclusion, axis=1, bitorder="little")
    if p:
        rec["gamma"] = np.packbits(trace.predictor_inclusion, axis=1, bitorder="little")
    rec["log_post"] = trace.log_posterior
    if flags & 1:
        rec["class_probs"] = trace.class_probs.reshape(t, n * g)
    if flags & 2:
        rec["theta"] = trace.theta.reshape(t, g * m * kmax)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, 0 if trace.model == "lca" else 1, MODES.index(trace.mode),
        flags, n, m, p, g, t, kmax,
    )
    levels = np.asarray(trace.levels, dtype="<u2").tobytes()
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(levels)
        fh.write(rec.tobytes())


def read_trace(path) -> ChainTrace:
    """Inverse of :func:`write_trace`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:8] != MAGIC:
        raise TraceVersionError(f"{path}: not a trace file")
    magic, version, model, mode, flags, n, m, p, g, t, kmax = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise TraceVersionError(f"{path}: trace format version {version}, expected {FORMAT_VERSION}")
    off = _HEADER.size
    levels = np.frombuffer(raw, dtype="<u2", count=m, offset=off).astype(np.int64)
    off += 2 * m
    dtype = _record_dtype(n, m, p, g, kmax, flags)
    rec = np.frombuffer(raw, dtype=dtype, count=t, offset=off)
    if t and np.any(rec["length"] != dtype.itemsize - 4):
        raise TraceVersionError(f"{path}: record framing does not match header")
    nu = np.unpackbits(rec["nu"], axis=1, count=m, bitorder="little").astype(bool) if m else np.zeros((t, 0), bool)
    gam = np.unpackbits(rec["gamma"], axis=1, count=p, bitorder="little").astype(bool) if p else np.zeros((t, 0), bool)
    return ChainTrace(
        model="lca" if model == 0 else "lcr",
        mode=MODES[mode],
        n_classes=g,
        levels=levels,
        iterations=rec["iteration"].astype(np.int64),
        labels=rec["labels"].astype(np.int64) - 1,
        item_inclusion=nu,
        predictor_inclusion=gam,
        log_posterior=rec["log_post"].copy(),
        class_probs=rec["class_probs"].reshape(t, n, g).copy() if flags & 1 else None,
        beta=rec["beta"].reshape(t, p + 1, g).copy() if flags & 4 else None,
        theta=rec["theta"].reshape(t, g, m, kmax).copy() if flags & 2 else None,
    )
