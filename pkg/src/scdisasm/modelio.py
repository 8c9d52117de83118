"""Versioned model persistence.

One JSON document holds everything a deployment needs: normalization
bounds, blend profile, selected features, the grouping table, the float
banks, and optionally their quantized form. Floats are stored as repr
strings, which round-trip float64 exactly, so a reloaded model scores
bit-identically to the one that was saved; inverses and log-determinants
are recomputed on load through the same factorization path used in
training.
"""
from __future__ import annotations

import json

import numpy as np

from .classify import FixedBank, FixedModel, HierModel, QdaBank
from .errors import FormatVersionMismatch, IoError
from .featsel import FeatureSet
from .fuse import CombineProfile
from .leaksim import GroupTable
from .tracekit import NormalizationStats

FORMAT_NAME = "scdisasm-model"
FORMAT_VERSION = 1


def _enc_f(arr) -> list:
    """Nested lists of repr strings (exact float64 round-trip)."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        return [repr(float(v)) for v in a]
    return [_enc_f(row) for row in a]


def _dec_f(obj) -> np.ndarray:
    return np.asarray(obj, dtype=np.float64)


def _enc_i(arr) -> list:
    a = np.asarray(arr)
    return a.tolist()


def _bank_doc(bank: QdaBank) -> dict:
    return {
        "class_labels": _enc_i(bank.class_labels),
        "priors": _enc_f(bank.priors),
        "means": _enc_f(bank.means),
        "covs": _enc_f(bank.covs),
    }


def _bank_from(doc: dict) -> QdaBank:
    return QdaBank(np.asarray(doc["class_labels"], dtype=np.int64),
                   _dec_f(doc["means"]), _dec_f(doc["covs"]),
                   _dec_f(doc["priors"]))


def _fixed_bank_doc(b: FixedBank) -> dict:
    return {
        "class_labels": _enc_i(b.class_labels),
        "mu_q": _enc_i(b.mu_q),
        "a_q": _enc_i(b.a_q),
        "b_q": _enc_i(b.b_q),
        "q": b.q,
        "scale_exp": b.scale_exp,
    }


def _fixed_bank_from(doc: dict) -> FixedBank:
    return FixedBank(np.asarray(doc["class_labels"], dtype=np.int64),
                     np.asarray(doc["mu_q"], dtype=np.int16),
                     np.asarray(doc["a_q"], dtype=np.int16),
                     np.asarray(doc["b_q"], dtype=np.int16),
                     int(doc["q"]), int(doc["scale_exp"]))


def save_model(model: HierModel, path, fixed: FixedModel | None = None) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "classifier": model.classifier,
        "stats": {"minima": _enc_f(model.stats.minima),
                  "maxima": _enc_f(model.stats.maxima)},
        "profile": {"alphas": _enc_f(model.profile.alphas),
                    "fused_mi": _enc_f(model.profile.fused_mi),
                    "power_mi": _enc_f(model.profile.power_mi),
                    "em_mi": _enc_f(model.profile.em_mi)},
        "features": {"indices": _enc_i(model.feature_set.indices),
                     "scores": _enc_f(model.feature_set.scores),
                     "method": model.feature_set.method},
        "table": [list(g) for g in model.table.groups],
        "inter": _bank_doc(model.inter),
        "within": {str(g): _bank_doc(b) for g, b in model.within.items()},
        "fixed": None,
    }
    if fixed is not None:
        doc["fixed"] = {
            "q": fixed.q,
            "inter": _fixed_bank_doc(fixed.inter),
            "within": {str(g): _fixed_bank_doc(b)
                       for g, b in fixed.within.items()},
        }
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write model {path}: {exc}") from exc


def load_model(path) -> tuple[HierModel, FixedModel | None]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatVersionMismatch(f"{path} is not a model file") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise FormatVersionMismatch(f"{path} is not a model file")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"model version {doc.get('version')!r}, expected {FORMAT_VERSION}")

    stats = NormalizationStats(_dec_f(doc["stats"]["minima"]),
                               _dec_f(doc["stats"]["maxima"]))
    profile = CombineProfile(_dec_f(doc["profile"]["alphas"]),
                             _dec_f(doc["profile"]["fused_mi"]),
                             _dec_f(doc["profile"]["power_mi"]),
                             _dec_f(doc["profile"]["em_mi"]))
    features = FeatureSet(np.asarray(doc["features"]["indices"],
                                     dtype=np.int64),
                          _dec_f(doc["features"]["scores"]),
                          str(doc["features"]["method"]))
    table = GroupTable(tuple(tuple(g) for g in doc["table"]))
    inter = _bank_from(doc["inter"])
    within = {int(g): _bank_from(b) for g, b in doc["within"].items()}
    model = HierModel(stats, profile, features, table, inter, within,
                      str(doc.get("classifier", "qda")))
    fixed = None
    if doc.get("fixed"):
        fdoc = doc["fixed"]
        fixed = FixedModel(_fixed_bank_from(fdoc["inter"]),
                           {int(g): _fixed_bank_from(b)
                            for g, b in fdoc["within"].items()},
                           int(fdoc["q"]))
    return model, fixed
