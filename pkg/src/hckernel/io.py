"""LIBSVM-format datasets, preprocessing and the binary model container."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .baselines import NystromFeatures, RffMap, independent_gram
from .hmatrix import OosState
from .kernels import KernelSpec, as_dense
from .learner import Model
from .partition import PartitionTree, TreeNode

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "ModelFormatError",
    "parse_libsvm",
    "write_libsvm",
    "preprocess",
    "apply_stats",
    "split_dataset",
    "save_model",
    "load_model",
    "MAGIC",
    "FORMAT_VERSION",
]

MAGIC = b"HCKM"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


class DatasetFormatError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Labeled points; ``points`` is a CSR matrix or a dense array."""

    points: object
    targets: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def dense(self) -> np.ndarray:
        return as_dense(self.points)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.points[rows], self.targets[rows])


def _parse_label(tok: str, integer: bool, lineno: int):
    try:
        v = float(tok)
    except ValueError:
        raise DatasetFormatError(f"line {lineno}: malformed label {tok!r}") from None
    if not np.isfinite(v):
        raise DatasetFormatError(f"line {lineno}: non-finite label {tok!r}")
    if integer:
        if v != int(v):
            raise DatasetFormatError(f"line {lineno}: class label {tok!r} is not an integer")
        return int(v)
    return v


def parse_libsvm(path, integer_labels: bool = False, n_features: int | None = None) -> Dataset:
    """Read ``label idx:val idx:val ...`` lines (1-based, strictly increasing).

    Blank lines and ``#`` comments are skipped.  The dimension is the
    largest index seen unless ``n_features`` is given.
    """
    labels, rows, cols, vals = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            labels.append(_parse_label(toks[0], integer_labels, lineno))
            row = len(labels) - 1
            prev = 0
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DatasetFormatError(f"line {lineno}: malformed token {tok!r}") from None
                if idx < 1:
                    raise DatasetFormatError(f"line {lineno}: feature index {idx} is not positive")
                if idx <= prev:
                    raise DatasetFormatError(f"line {lineno}: feature indices must be strictly increasing ({prev} then {idx})")
                if not np.isfinite(val):
                    raise DatasetFormatError(f"line {lineno}: non-finite value in {tok!r}")
                prev = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
    if not labels:
        raise DatasetFormatError(f"{path}: no samples")
    d = max(cols) + 1 if cols else 0
    if n_features is not None:
        if n_features < d:
            raise DatasetFormatError(f"{path}: index {d} exceeds n_features={n_features}")
        d = n_features
    X = sparse.csr_matrix((vals, (rows, cols)), shape=(len(labels), d), dtype=np.float64)
    X.sort_indices()
    dtype = np.int64 if integer_labels else np.float64
    return Dataset(X, np.asarray(labels, dtype=dtype))


def write_libsvm(data: Dataset, path) -> None:
    """Write a dataset in LIBSVM format; values use 17 significant digits."""
    X = sparse.csr_matrix(data.points)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(X.shape[0]):
            lab = data.targets[i]
            lab_s = str(int(lab)) if np.issubdtype(data.targets.dtype, np.integer) else repr(float(lab))
            start, end = X.indptr[i], X.indptr[i + 1]
            feats = " ".join(f"{j + 1}:{v:.17g}" for j, v in zip(X.indices[start:end], X.data[start:end]) if v != 0)
            fh.write(f"{lab_s} {feats}".rstrip() + "\n")


def _dedup(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows to keep: one per duplicate group, none for conflicting groups."""
    _, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    keep = []
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.diff(inverse[order])) + 1
    for grp in np.split(order, bounds):
        if np.all(y[grp] == y[grp[0]]):
            keep.append(grp[0])
    return np.sort(np.asarray(keep, dtype=np.int64))


def apply_stats(X, stats: dict) -> np.ndarray:
    """Affine map of every attribute from the train [min, max] to [-1, 1].

    Constant attributes map to 0; values outside the train range are not
    clipped.
    """
    X = as_dense(X)
    lo, hi = stats["min"], stats["max"]
    span = hi - lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = 2.0 * (X - lo) / safe - 1.0
    out[:, const] = 0.0
    return out


def preprocess(train: Dataset, test: Dataset | None = None, normalize: bool = True):
    """Remove duplicate/conflicting training rows and min-max normalize.

    Returns ``(train, test, stats)``; ``stats`` is None without
    normalization.  Test rows are never removed.
    """
    Xtr = train.dense()
    keep = _dedup(Xtr, train.targets)
    Xtr = Xtr[keep]
    ytr = train.targets[keep]
    Xte = None if test is None else test.dense()
    if test is not None and Xte.shape[1] != Xtr.shape[1]:
        d = max(Xte.shape[1], Xtr.shape[1])
        Xtr = np.pad(Xtr, ((0, 0), (0, d - Xtr.shape[1])))
        Xte = np.pad(Xte, ((0, 0), (0, d - Xte.shape[1])))
    stats = None
    if normalize:
        stats = {"min": Xtr.min(axis=0), "max": Xtr.max(axis=0)}
        Xtr = apply_stats(Xtr, stats)
        if Xte is not None:
            Xte = apply_stats(Xte, stats)
    out_test = None if test is None else Dataset(Xte, test.targets.copy())
    return Dataset(Xtr, ytr), out_test, stats


# ---------------------------------------------------------------- model file

def _put(sections: list, name: str, arr) -> None:
    a = np.asarray(arr)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    code = b"i" if np.issubdtype(a.dtype, np.integer) else b"f"
    a = np.ascontiguousarray(a, dtype="<i8" if code == b"i" else "<f8")
    nb = name.encode()
    sections.append(struct.pack("<H", len(nb)) + nb + code + struct.pack("<QQ", *a.shape) + a.tobytes())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.buf):
            raise ModelFormatError("truncated model file")
        out = self.buf[self.pos:self.pos + k]
        self.pos += k
        return out

    def array(self):
        (ln,) = struct.unpack("<H", self.take(2))
        name = self.take(ln).decode()
        code = self.take(1)
        rows, cols = struct.unpack("<QQ", self.take(16))
        if code not in (b"f", b"i"):
            raise ModelFormatError(f"unknown block type {code!r} in section {name!r}")
        dt = np.dtype("<f8" if code == b"f" else "<i8")
        data = self.take(rows * cols * 8)
        arr = np.frombuffer(data, dtype=dt).reshape(rows, cols)
        return name, arr.astype(np.float64 if code == b"f" else np.int64)


def _tree_sections(sections, tree: PartitionTree) -> None:
    table = np.full((len(tree.nodes), 6), -1, dtype=np.int64)
    for nd in tree.nodes:
        table[nd.id, :4] = (nd.id, nd.parent, nd.lo, nd.hi)
        for k, ch in enumerate(nd.children):
            table[nd.id, 4 + k] = ch
    _put(sections, "tree/table", table)
    _put(sections, "tree/perm", tree.perm)
    for nd in tree.nonleaves():
        _put(sections, f"tree/{nd.id}/direction", nd.direction)
        _put(sections, f"tree/{nd.id}/threshold", np.array([nd.threshold]))
        _put(sections, f"tree/{nd.id}/landmarks", nd.landmarks)


def _read_tree(blocks: dict, header: dict) -> PartitionTree:
    table = blocks["tree/table"]
    nodes = []
    for row in table:
        nid, parent, lo, hi, c0, c1 = (int(v) for v in row)
        nd = TreeNode(id=nid, parent=parent, lo=lo, hi=hi)
        if c0 >= 0:
            nd.children = (c0, c1)
            nd.direction = blocks[f"tree/{nid}/direction"][:, 0].copy()
            nd.threshold = float(blocks[f"tree/{nid}/threshold"][0, 0])
            nd.landmarks = blocks[f"tree/{nid}/landmarks"][:, 0].copy()
        nodes.append(nd)
    return PartitionTree(nodes=nodes, perm=blocks["tree/perm"][:, 0].copy(), n0=header["n0"],
                         r=header["r"], seed=header["seed"], d=header["d"])


def save_model(model: Model, path) -> None:
    """Write ``model`` to ``path`` in the HCKM container format."""
    header = {
        "method": model.method,
        "kernel": model.spec.family,
        "sigma": model.spec.sigma,
        "jitter": model.spec.jitter,
        "lambda": model.lam,
        "task": model.task,
        "n0": model.n0,
        "r": model.r,
        "seed": model.seed,
        "n": model.n_train,
        "d": model.d,
        "n_outputs": model.n_outputs,
        "has_classes": model.classes is not None,
        "has_stats": model.train_stats is not None,
    }
    sec: list = []
    _put(sec, "weights", model.weights)
    if model.classes is not None:
        _put(sec, "classes", model.classes)
    if model.train_stats is not None:
        _put(sec, "stats/min", model.train_stats["min"])
        _put(sec, "stats/max", model.train_stats["max"])
    if model.method in ("hierarchical", "independent"):
        _tree_sections(sec, model.tree)
    if model.method == "hierarchical":
        st = model.oos
        _put(sec, "oos/points", st.points)
        _put(sec, "oos/weights", st.weights)
        for nid, W in st.W.items():
            _put(sec, f"oos/{nid}/W", W)
        for nid, L in st.chol.items():
            _put(sec, f"oos/{nid}/chol", L)
            _put(sec, f"oos/{nid}/landmark_points", st.landmark_points[nid])
        for nid, c in st.c.items():
            _put(sec, f"oos/{nid}/c", c)
    elif model.method == "independent":
        _put(sec, "indep/points", model.indep.points)
    elif model.method == "nystrom":
        f = model.features
        _put(sec, "nystrom/points", f.landmark_points)
        _put(sec, "nystrom/ids", f.landmark_ids)
        _put(sec, "nystrom/chol", f.chol)
        _put(sec, "coef", model.coef)
    else:
        _put(sec, "rff/omegas", model.features.omegas)
        _put(sec, "rff/phases", model.features.phases)
        _put(sec, "coef", model.coef)
    header["sections"] = len(sec)
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", FORMAT_VERSION, len(hb)) + hb)
        for s in sec:
            fh.write(s)


def load_model(path) -> Model:
    """Read a model written by :func:`save_model`."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ModelFormatError("not a model file")
    rd = _Reader(buf)
    rd.take(4)
    version, hlen = struct.unpack("<II", rd.take(8))
    if version not in SUPPORTED_VERSIONS:
        raise ModelFormatError(f"unsupported model format version {version}; supported versions: {list(SUPPORTED_VERSIONS)}")
    try:
        header = json.loads(rd.take(hlen).decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ModelFormatError("corrupted model header") from None
    blocks = {}
    for _ in range(header["sections"]):
        name, arr = rd.array()
        blocks[name] = arr
    if rd.pos != len(buf):
        raise ModelFormatError("trailing bytes after the last section")

    spec = KernelSpec(header["kernel"], header["sigma"], header["jitter"])
    model = Model(method=header["method"], spec=spec, lam=header["lambda"], task=header["task"],
                  weights=blocks["weights"], n0=header["n0"], r=header["r"], seed=header["seed"],
                  d=header["d"])
    if header["has_classes"]:
        cls = blocks["classes"][:, 0]
        model.classes = cls
    if header["has_stats"]:
        model.train_stats = {"min": blocks["stats/min"][:, 0], "max": blocks["stats/max"][:, 0]}
    method = header["method"]
    if method in ("hierarchical", "independent"):
        model.tree = _read_tree(blocks, header)
    if method == "hierarchical":
        tree = model.tree
        W, chol, lm, c = {}, {}, {}, {}
        for name, arr in blocks.items():
            parts = name.split("/")
            if parts[0] != "oos" or len(parts) != 3:
                continue
            nid, kind = int(parts[1]), parts[2]
            {"W": W, "chol": chol, "landmark_points": lm, "c": c}[kind][nid] = arr
        model.oos = OosState(tree=tree, spec=spec, points=blocks["oos/points"], weights=blocks["oos/weights"],
                             W=W, chol=chol, landmark_points=lm, c=c, e={})
    elif method == "independent":
        pts = blocks["indep/points"]
        X = np.empty_like(pts)
        X[model.tree.perm] = pts
        model.indep = independent_gram(spec, X, model.tree)
    elif method == "nystrom":
        model.features = NystromFeatures(spec, blocks["nystrom/points"], blocks["nystrom/ids"][:, 0],
                                         blocks["nystrom/chol"])
        model.coef = blocks["coef"]
    else:
        model.features = RffMap(blocks["rff/omegas"], blocks["rff/phases"][:, 0])
        model.coef = blocks["coef"]
    return model


def split_dataset(data: Dataset, train_fraction: float = 0.8, seed: int = 0):
    """Random train/test split (4:1 by default)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n)
    k = int(round(train_fraction * data.n))
    return data.subset(np.sort(order[:k])), data.subset(np.sort(order[k:]))
