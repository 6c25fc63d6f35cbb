"""Per-instance responsibility tracking for conv weights.

Training runs one example per batch, so every optimizer step can be charged
to a single training instance.  A DeltaLedger accumulates the signed weight
change per (conv weight, instance) pair; signs are kept as-is so pushes in
opposite directions cancel over the run.  Only at finalization does the
absolute value enter: each weight is assigned the instance with the largest
|accumulated delta|, producing one instance-ID array per filter with the
same shape as the filter itself.

Explaining a query state then takes three lookups: the most activated filter
for that state, the modal instance ID over that filter's array, and the final
level of the session owning that instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sessionlog, tilegrid
from .errors import (
    BadParams,
    EmptyLedger,
    FingerprintMismatch,
    InconsistentExample,
    IndexOutOfRange,
    ShapeMismatch,
    VersionMismatch,
)
from .neuralnet import (
    Forward,
    NetworkParams,
    conv_layer_channels,
    conv_weight_counts,
    forward,
    _read_container,
    _write_container,
)
from .tilegrid import TileGrid

MRIN_MAGIC = b"LTMRIN01"
MRIN_VERSION = 1

VALID_NORMS = ("l1", "l2", "max")


def _conv_flat(params) -> np.ndarray:
    """Flat float64 view/copy of conv filter weights from several spellings."""
    if isinstance(params, NetworkParams):
        return params.conv_flat()
    if isinstance(params, np.ndarray):
        return params
    if isinstance(params, (list, tuple)):
        return np.concatenate([np.asarray(w).ravel() for w in params])
    raise BadParams(f"cannot take conv weights from {type(params).__name__}")


class DeltaLedger:
    """Signed per-weight, per-instance delta totals over one training run.

    Stored as (n_instances, n_conv_weights) row-major so the per-step
    accumulation touches one contiguous row.  The logical matrix from the
    file-format docs, S[w][i], is the transpose; `weight_matrix` exposes it.
    """

    def __init__(self, instance_ids: list[int]):
        ids = np.asarray(instance_ids, dtype=np.int64)
        if ids.size == 0:
            raise BadParams("ledger needs at least one instance")
        if len(np.unique(ids)) != ids.size:
            raise BadParams("instance ids must be unique")
        self.instance_ids = ids
        self._row = {int(i): r for r, i in enumerate(ids)}
        self.n_weights = sum(conv_weight_counts())
        self.totals = np.zeros((ids.size, self.n_weights))
        self.batches_recorded = 0

    def row_of(self, instance_id: int) -> int:
        try:
            return self._row[int(instance_id)]
        except KeyError:
            raise IndexOutOfRange(
                f"instance {instance_id} not in the training set"
            ) from None

    def weight_matrix(self, layer: int) -> np.ndarray:
        """S[w][i] for one conv layer (1-based), weights by flat index."""
        if layer not in (1, 2, 3):
            raise BadParams(f"layer must be 1..3, got {layer}")
        counts = conv_weight_counts()
        lo = sum(counts[: layer - 1])
        return self.totals[:, lo : lo + counts[layer - 1]].T


def record_batch(ledger: DeltaLedger, instance_id: int, before, after) -> None:
    """Charge the signed conv-weight change of one optimizer step.

    `before` / `after` may be NetworkParams, per-layer array lists, or
    already-flat vectors; the training loop passes flat snapshots to avoid
    copying the dense layer.
    """
    b = _conv_flat(before)
    a = _conv_flat(after)
    if b.shape != (ledger.n_weights,) or a.shape != (ledger.n_weights,):
        raise ShapeMismatch(
            f"conv weight vectors must have {ledger.n_weights} entries"
        )
    row = ledger.row_of(instance_id)
    ledger.totals[row] += a - b
    ledger.batches_recorded += 1


@dataclass
class MrinArrays:
    """Instance-ID arrays per conv filter, plus pairing metadata.

    arrays[l] has the same shape as conv layer l's weights: entry
    arrays[l][f, dx, dy, c] is the ID of the instance with the largest
    |accumulated delta| on that weight.
    """

    arrays: list[np.ndarray]
    instance_sessions: dict[int, str] = field(default_factory=dict)
    fingerprint: str | None = None


def finalize(ledger: DeltaLedger) -> MrinArrays:
    """Assign every conv weight its most responsible instance.

    Ties go to the smallest instance_id: rows are scanned in ascending-ID
    order and argmax keeps the first maximum.
    """
    if ledger.batches_recorded == 0:
        raise EmptyLedger("no batches recorded")
    order = np.argsort(ledger.instance_ids, kind="stable")
    sorted_ids = ledger.instance_ids[order]
    winner_rows = np.argmax(np.abs(ledger.totals[order]), axis=0)
    winner_ids = sorted_ids[winner_rows]
    arrays = []
    lo = 0
    for f, k, c_in in conv_layer_channels():
        n = f * k * k * c_in
        arrays.append(winner_ids[lo : lo + n].reshape(f, k, k, c_in).astype(np.int64))
        lo += n
    return MrinArrays(arrays=arrays)


def most_activated_filter(acts, layer: int, norm: str = "l1") -> int:
    """Index of the filter whose activation slice has the largest magnitude.

    `acts` is a Forward result (or the conv_post list from one).  Ties go to
    the smallest filter index.
    """
    if layer not in (1, 2, 3):
        raise BadParams(f"layer must be 1..3, got {layer}")
    if norm not in VALID_NORMS:
        raise BadParams(f"norm must be one of {VALID_NORMS}, got {norm!r}")
    post = acts.conv_post if isinstance(acts, Forward) else acts
    a = post[layer - 1]
    if norm == "l1":
        scores = np.abs(a).sum(axis=(0, 1))
    elif norm == "l2":
        scores = np.sqrt((a * a).sum(axis=(0, 1)))
    else:
        scores = np.abs(a).max(axis=(0, 1))
    return int(np.argmax(scores))


def _modal_instance(arr: np.ndarray) -> tuple[int, int]:
    ids, counts = np.unique(arr, return_counts=True)
    best = int(np.argmax(counts))  # ids sorted ascending, first max wins ties
    return int(ids[best]), int(counts[best])


def most_responsible_instance(mrin: MrinArrays, layer: int, filter_index: int) -> int:
    if layer not in (1, 2, 3):
        raise BadParams(f"layer must be 1..3, got {layer}")
    per_filter = mrin.arrays[layer - 1]
    if not (0 <= filter_index < per_filter.shape[0]):
        raise IndexOutOfRange(
            f"filter {filter_index} out of range for layer {layer}"
        )
    return _modal_instance(per_filter[filter_index])[0]


@dataclass(frozen=True)
class Explanation:
    instance_id: int
    session_id: str
    responsible_level: TileGrid
    filter_index: int
    modal_count: int
    layer: int


def explain(
    model: NetworkParams,
    mrin: MrinArrays,
    sessions: list[sessionlog.Session],
    state,
    layer: int = 1,
    norm: str = "l1",
) -> Explanation:
    """Trace a query state back to the training session most on the hook.

    `state` may be a TileGrid or a (W, H, 34) one-hot tensor.  The model and
    MRIN must carry the same training-run fingerprint; pairing artifacts from
    different runs is refused.
    """
    if model.fingerprint is None or mrin.fingerprint is None:
        raise FingerprintMismatch("model or MRIN carries no training fingerprint")
    if model.fingerprint != mrin.fingerprint:
        raise FingerprintMismatch(
            f"model fingerprint {model.fingerprint[:12]}... does not match "
            f"MRIN fingerprint {mrin.fingerprint[:12]}..."
        )
    if isinstance(state, TileGrid):
        state = tilegrid.to_state_tensor(state)
    fwd = forward(model, state)
    filter_index = most_activated_filter(fwd, layer, norm)
    instance_id, modal_count = _modal_instance(mrin.arrays[layer - 1][filter_index])
    try:
        session_id = mrin.instance_sessions[instance_id]
    except KeyError:
        raise InconsistentExample(
            f"instance {instance_id} has no session in the MRIN table"
        ) from None
    by_id = {s.session_id: s for s in sessions}
    if session_id not in by_id:
        raise InconsistentExample(
            f"session {session_id!r} not present in the supplied corpus"
        )
    return Explanation(
        instance_id=instance_id,
        session_id=session_id,
        responsible_level=by_id[session_id].final_level,
        filter_index=filter_index,
        modal_count=modal_count,
        layer=layer,
    )


# --- persistence -------------------------------------------------------------


def save_mrin(mrin: MrinArrays, path: str) -> None:
    header = {
        "format": "leveltrace-mrin",
        "version": MRIN_VERSION,
        "fingerprint": mrin.fingerprint,
        "instances": [
            {"id": int(i), "session": s}
            for i, s in sorted(mrin.instance_sessions.items())
        ],
    }
    arrays = [(f"mrin_conv{i + 1}", a) for i, a in enumerate(mrin.arrays)]
    _write_container(path, MRIN_MAGIC, header, arrays)


def load_mrin(path: str) -> MrinArrays:
    header, arrays = _read_container(path, MRIN_MAGIC)
    if header.get("format") != "leveltrace-mrin" or header.get("version") != MRIN_VERSION:
        raise VersionMismatch(f"{path}: unsupported responsibility file")
    expected = [(f, k, c) for f, k, c in conv_layer_channels()]
    for a, (f, k, c) in zip(arrays, expected):
        if tuple(a.shape) != (f, k, k, c):
            raise VersionMismatch(f"{path}: array shape {a.shape} unexpected")
    return MrinArrays(
        arrays=[a.astype(np.int64) for a in arrays],
        instance_sessions={int(e["id"]): e["session"] for e in header["instances"]},
        fingerprint=header.get("fingerprint"),
    )
