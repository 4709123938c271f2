"""Self-contained JSON model files and pretrained embedding import."""

from __future__ import annotations

import json

import numpy as np

from .corpus import CorpusError, LabelSet, Vocabulary
from .model import PARAM_NAMES, BiLSTMCRF

FORMAT = "bilstm-crf-model"
VERSION = 1


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def model_to_text(model: BiLSTMCRF, training: dict | None = None) -> str:
    """Serialize ``model``; one tensor per line so files diff reasonably.

    float32 values are written through their exact float64 repr, so loading
    restores bit-identical arrays.
    """
    header = {
        "format": FORMAT,
        "version": VERSION,
        "hyperparameters": {
            "embed_dim": model.embed_dim,
            "hidden_dim": model.hidden_dim,
            "dropout": model.dropout,
            "linear_projection": model.linear_projection,
            "hard_bio_constraints": model.hard_bio_constraints,
            "dtype": model.dtype.name,
        },
        "training": training or {},
        "vocabulary": {"chars": list(model.vocab.chars), "min_count": model.vocab.min_count},
        "labels": list(model.label_set.labels),
    }
    lines = ["{"]
    for key, value in header.items():
        lines.append(f"{_dumps(key)}:{_dumps(value)},")
    lines.append('"tensors":{')
    tensor_lines = []
    for name in PARAM_NAMES:
        value = model.params[name]
        tensor_lines.append(
            f"{_dumps(name)}:" + _dumps({"shape": list(value.shape), "values": value.tolist()})
        )
    lines.append(",\n".join(tensor_lines))
    lines.append("}}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> BiLSTMCRF:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"model file is not valid JSON: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise CorpusError(f"not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CorpusError(f"unsupported model file version {doc.get('version')!r}")
    hp = doc["hyperparameters"]
    dtype = np.dtype(hp["dtype"])
    params = {}
    for name in PARAM_NAMES:
        entry = doc["tensors"][name]
        params[name] = np.array(entry["values"], dtype=dtype).reshape(entry["shape"])
    vocab = Vocabulary(doc["vocabulary"]["chars"], doc["vocabulary"].get("min_count", 1))
    return BiLSTMCRF(
        vocab,
        LabelSet(doc["labels"]),
        embed_dim=hp["embed_dim"],
        hidden_dim=hp["hidden_dim"],
        dropout=hp["dropout"],
        linear_projection=hp["linear_projection"],
        hard_bio_constraints=hp["hard_bio_constraints"],
        dtype=dtype,
        params=params,
    )


def save_model(model: BiLSTMCRF, path, training: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(model_to_text(model, training))


def load_model(path) -> BiLSTMCRF:
    with open(path, encoding="utf-8") as f:
        return model_from_text(f.read())


def load_pretrained_embeddings(path, vocab: Vocabulary, embedding: np.ndarray) -> int:
    """Overwrite rows of ``embedding`` for characters listed in ``path``.

    Lines are ``<char> v1 ... vE``. A leading word2vec-style ``count dim``
    header and entries longer than one character are skipped. Returns the
    number of rows replaced.
    """
    dim = embedding.shape[1]
    loaded = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.rstrip("\n").split(" ")
            if lineno == 1 and len(fields) == 2 and all(x.isdigit() for x in fields):
                continue
            if not fields or len(fields[0]) != 1:
                continue
            if len(fields) - 1 != dim:
                raise CorpusError(f"expected {dim} values, got {len(fields) - 1}", lineno)
            if fields[0] in vocab:
                try:
                    embedding[vocab.id_of(fields[0])] = [float(x) for x in fields[1:]]
                except ValueError as exc:
                    raise CorpusError(f"bad embedding value: {exc}", lineno) from exc
                loaded += 1
    return loaded
