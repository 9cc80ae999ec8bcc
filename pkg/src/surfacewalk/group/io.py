"""Ball snapshots on disk.

A snapshot is one .npz file: a JSON header (format version, group,
radius, sphere counts, SHA-256 of every array) and the arrays themselves
(keys, matrices, orbit sizes, words, neighbour table or lumped operator).
A JSON summary of the sphere counts is written next to it.  Loading
recomputes the digests and refuses files that do not match.
"""
import hashlib
import json
import zipfile
from pathlib import Path

import numpy as np

from .. import __version__
from .ball import CayleyBall, Operator
from .presentation import GroupPresentation
from .rep import HashRep
from .symmetry import SymmetryTransducer

FORMAT = 1


class IntegrityError(IOError):
    """Truncated or altered snapshot."""


class VersionMismatch(IOError):
    pass


def _digest(a):
    a = np.ascontiguousarray(a)
    h = hashlib.sha256()
    h.update(str(a.dtype).encode())
    h.update(str(a.shape).encode())
    h.update(a.tobytes())
    return h.hexdigest()


def _ball_arrays(ball):
    arr = {"members": ball.members, "sphere_ptr": ball.sphere_ptr, "keys": ball.keys,
           "mats": ball.mats, "orbit_size": ball.orbit_size, "probs": ball.probs}
    if ball.words is not None:
        arr["words"] = ball.words
    if ball.nbr is not None:
        arr["nbr"] = ball.nbr
    op = ball.op
    if op is not None and ball.nbr is None:
        arr["op_table"] = op.table
        arr["op_indptr"] = op.indptr
        arr["op_indices"] = op.indices
        arr["op_weights"] = op.weights
    return arr


def save_ball(ball, path, summary=True):
    """Write ball to path (.npz) and, if summary, path.json with sphere counts."""
    path = Path(path)
    arrays = _ball_arrays(ball)
    header = {"format": FORMAT, "package_version": __version__,
              "genus": ball.pres.genus, "surface": ball.pres.surface,
              "radius": ball.radius, "lumped": ball.lumped,
              "rep_prime": int(ball.rep.p),
              "n_tab": int(ball.op.n_tab) if ball.op is not None else None,
              "sphere_counts": ball.sphere_counts(),
              "sha256": {k: _digest(v) for k, v in arrays.items()}}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 **arrays)
    if summary:
        Path(str(path) + ".json").write_text(json.dumps(
            {"group": ball.pres.name(), "radius": ball.radius, "lumped": ball.lumped,
             "rows": ball.n_rows, "sphere_counts": header["sphere_counts"]}, indent=1))
    return header


def _open(path):
    try:
        z = np.load(path, allow_pickle=False)
        header = json.loads(bytes(z["header"]).decode())
        arrays = {k: z[k] for k in z.files if k != "header"}
    except (zipfile.BadZipFile, ValueError, KeyError, OSError, EOFError) as e:
        raise IntegrityError(f"{path}: unreadable snapshot ({e})") from e
    if header.get("format") != FORMAT:
        raise VersionMismatch(
            f"{path}: snapshot format {header.get('format')}, this version reads {FORMAT}; "
            "rebuild the ball with ball_enumerate and save it again")
    for k, d in header["sha256"].items():
        if k not in arrays or _digest(arrays[k]) != d:
            raise IntegrityError(f"{path}: array {k} missing or corrupted")
    return header, arrays


def load_ball(path):
    header, a = _open(path)
    pres = GroupPresentation(header["genus"], surface=header["surface"])
    rep = HashRep(pres)
    if rep.p != header["rep_prime"]:
        raise VersionMismatch("hash representation changed since the snapshot was written")
    ball = CayleyBall(pres, header["radius"], rep, SymmetryTransducer(pres), a["members"],
                      a["sphere_ptr"], a["keys"], a["mats"], a["orbit_size"],
                      a.get("words"), a.get("nbr"), probs=a["probs"])
    n = ball.n_rows
    if "nbr" in a:
        ball.op = Operator(n, a["nbr"], a["probs"], n, None, None, None)
    elif "op_table" in a:
        ball.op = Operator(n, a["op_table"], a["probs"], header["n_tab"], a["op_indptr"],
                           a["op_indices"], a["op_weights"])
    if ball.sphere_counts() != header["sphere_counts"]:
        raise IntegrityError("sphere counts disagree with the header")
    return ball


def ball_fingerprint(ball):
    return _digest(ball.keys)[:16]


def save_field(fld, path):
    """Green field values and error terms, tied to its ball by a fingerprint."""
    arrays = {"values": fld.values, "tail": fld.tail}
    for name in ("boundary", "deriv"):
        if getattr(fld, name) is not None:
            arrays[name] = getattr(fld, name)
    header = {"format": FORMAT, "package_version": __version__, "r": fld.r,
              "horizon": fld.horizon, "lam": fld.lam, "ball": ball_fingerprint(fld.ball),
              "sha256": {k: _digest(v) for k, v in arrays.items()}}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 **arrays)
    return header


def load_field(path, ball):
    from ..green.field import GreenField
    header, a = _open(path)
    if header["ball"] != ball_fingerprint(ball):
        raise IntegrityError("field was computed on a different ball")
    return GreenField(header["r"], ball, a["values"], header["horizon"], a["tail"],
                      a.get("boundary"), header["lam"], a.get("deriv"),
                      meta={"loaded_from": str(path)})
