"""Weighted log-linear ensembles of models with different input kinds.

Members consume their own representation of the same underlying
sentence but share one output vocabulary (verified by manifest hash).
At each beam step the combined candidate score is the weighted sum of
member log probabilities; weights may be negative, so combined scores
are plain log-linear scores, not log probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID
from .errors import ConfigurationError, FactorParseError, IncompatibleEnsembleError
from .inputs import FactoredSentence, ModelInputKind
from .model import Seq2SeqModel, _ParamScorer, encode, sequence_logprob
from .search import beam_search as _generic_beam_search


@dataclass(frozen=True)
class EnsembleMember:
    name: str
    model: Seq2SeqModel
    kind: ModelInputKind


@dataclass(frozen=True)
class EnsembleSpec:
    """Ordered members plus one real-valued weight per member."""

    members: tuple[EnsembleMember, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.members) < 1:
            raise IncompatibleEnsembleError("ensemble needs at least one member")
        if len(self.weights) != len(self.members):
            raise IncompatibleEnsembleError(
                f"{len(self.weights)} weights for {len(self.members)} members")
        if not all(np.isfinite(w) for w in self.weights):
            raise IncompatibleEnsembleError("ensemble weights must be finite")
        hashes = {m.model.output_vocab_hash for m in self.members}
        if len(hashes) != 1:
            raise IncompatibleEnsembleError(
                "members do not share an output vocabulary (manifest hash mismatch)")

    @property
    def kinds(self) -> tuple[ModelInputKind, ...]:
        return tuple(m.kind for m in self.members)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.members)

    def with_weights(self, weights: Sequence[float]) -> "EnsembleSpec":
        return replace(self, weights=tuple(float(w) for w in weights))

    @property
    def tgt_vocab(self):
        return self.members[0].model.tgt_vocab


@dataclass(frozen=True)
class NBestHypothesis:
    """One ranked candidate with its per-member log-probability features."""

    tokens: tuple[str, ...]
    ids: tuple[int, ...]
    features: tuple[float, ...]
    combined: float
    finished: bool = True


def _check_bundle(spec: EnsembleSpec, bundle: Sequence[FactoredSentence]):
    if len(bundle) != len(spec.members):
        raise ConfigurationError(
            f"bundle has {len(bundle)} inputs for {len(spec.members)} members")
    for sent, member in zip(bundle, spec.members):
        if sent.kind is not None and sent.kind != member.kind:
            raise ConfigurationError(
                f"member {member.name} expects {member.kind.value} input, "
                f"bundle provides {sent.kind.value}")


def ensemble_beam_search(spec: EnsembleSpec, bundle: Sequence[FactoredSentence], *,
                         beam_width: int = 5, n_best: int = 1,
                         max_len: int = 40) -> list[NBestHypothesis]:
    """Synchronized beam search; candidates ranked by sum_k w_k logp_k."""
    _check_bundle(spec, bundle)
    scorers = []
    for sent, member in zip(bundle, spec.members):
        ids = member.model.encode_input(sent)
        scorers.append(_ParamScorer(member.model.params, encode(member.model.params, ids)))
    hyps = _generic_beam_search(scorers, spec.weights, bos_id=BOS_ID, eos_id=EOS_ID,
                                beam_width=beam_width, n_best=n_best, max_len=max_len)
    vocab = spec.tgt_vocab
    return [NBestHypothesis(tokens=tuple(vocab.decode(h.tokens)), ids=h.tokens,
                            features=h.member_scores, combined=h.score,
                            finished=h.finished)
            for h in hyps]


def rescore_nbest(spec: EnsembleSpec, bundle: Sequence[FactoredSentence],
                  hypotheses: Sequence[Sequence[int]]) -> list[NBestHypothesis]:
    """Force-decode fixed hypotheses under every member; deterministic."""
    _check_bundle(spec, bundle)
    inputs = [member.model.encode_input(sent)
              for sent, member in zip(bundle, spec.members)]
    vocab = spec.tgt_vocab
    out = []
    for hyp_ids in hypotheses:
        features = []
        for ids, member in zip(inputs, spec.members):
            logprob, _ = sequence_logprob(member.model.params, ids, list(hyp_ids))
            features.append(float(logprob))
        combined = float(np.dot(spec.weights, features))
        out.append(NBestHypothesis(tokens=tuple(vocab.decode(hyp_ids)),
                                   ids=tuple(int(i) for i in hyp_ids),
                                   features=tuple(features), combined=combined))
    return out


# ---------------------------------------------------------------------------
# N-best file format and ensemble manifest


def format_nbest_line(sentence_id: int, hyp: NBestHypothesis) -> str:
    feats = " ".join(repr(f) for f in hyp.features)
    return f"{sentence_id} ||| {' '.join(hyp.tokens)} ||| {feats} ||| {hyp.combined!r}"


def parse_nbest_line(line: str) -> tuple[int, tuple[str, ...], tuple[float, ...], float]:
    parts = [p.strip() for p in line.split("|||")]
    if len(parts) != 4:
        raise FactorParseError(f"n-best line needs 4 ||| fields, got {len(parts)}")
    sid = int(parts[0])
    tokens = tuple(parts[1].split()) if parts[1] else ()
    features = tuple(float(x) for x in parts[2].split())
    return sid, tokens, features, float(parts[3])


def write_nbest_file(path: str | Path, nbest_lists: Sequence[Sequence[NBestHypothesis]]):
    lines = []
    for sid, hyps in enumerate(nbest_lists):
        for hyp in hyps:
            lines.append(format_nbest_line(sid, hyp))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_nbest_file(path: str | Path) -> list[list[tuple[tuple[str, ...], tuple[float, ...], float]]]:
    out: list[list] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        sid, tokens, features, combined = parse_nbest_line(line)
        while len(out) <= sid:
            out.append([])
        out[sid].append((tokens, features, combined))
    return out


def save_ensemble_manifest(path: str | Path, names: Sequence[str],
                           model_dirs: Sequence[str], kinds: Sequence[ModelInputKind],
                           weights: Sequence[float]) -> None:
    manifest = {
        "members": [{"name": n, "model_dir": str(d), "kind": k.value}
                    for n, d, k in zip(names, model_dirs, kinds)],
        "weights": [float(w) for w in weights],
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_ensemble_manifest(path: str | Path,
                           base_dir: str | Path | None = None) -> EnsembleSpec:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    base = Path(base_dir) if base_dir else Path(path).parent
    members = []
    for entry in raw["members"]:
        model_dir = Path(entry["model_dir"])
        if not model_dir.is_absolute():
            model_dir = base / model_dir
        members.append(EnsembleMember(name=entry["name"],
                                      model=Seq2SeqModel.load(model_dir),
                                      kind=ModelInputKind(entry["kind"])))
    return EnsembleSpec(tuple(members), tuple(float(w) for w in raw["weights"]))
