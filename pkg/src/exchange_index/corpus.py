"""Built-in economies used by ``verify`` and the acceptance tests.

Families:

* ``e1``: two symmetric Cobb-Douglas traders, unique equilibrium at p = (1, 1).
* ``e2``: mirrored CES traders with low elasticity and a strong taste for their
  own endowment; three equilibria with indices (+1, -1, +1).  Variants cover a
  replicated trader (n = 3) and a third good (l = 3).
* ``notrade``: endowments set to each trader's demand at a chosen price, so
  that price is a no-trade equilibrium.
* ``random``: seeded random mixed Cobb-Douglas/CES economies, n, l <= 4.

The JSON files under ``data/corpus`` are the output of :func:`generate`; run
``python -m exchange_index.corpus`` to rewrite them.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .economy import CES, CobbDouglas, Economy, demand, economy_from_json, make_economy

CORPUS_SEED = 20240611
N_RANDOM = 50
N_NOTRADE = 50


@dataclass
class CorpusEntry:
    name: str
    family: str
    eco: Economy
    omega: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = self.eco.to_json(self.omega)
        doc["meta"] = {"name": self.name, "family": self.family, **self.meta}
        return doc


def e1() -> CorpusEntry:
    eco, omega = make_economy([CobbDouglas([0.5, 0.5]), CobbDouglas([0.5, 0.5])], [[1.0, 0.0], [0.0, 1.0]])
    return CorpusEntry("e1", "e1", eco, omega)


def e2(elasticity: float = 0.2, own_share: float = 0.95) -> CorpusEntry:
    other = 1.0 - own_share
    eco, omega = make_economy(
        [CES([own_share, other], elasticity), CES([other, own_share], elasticity)],
        [[1.0, 0.0], [0.0, 1.0]],
    )
    return CorpusEntry("e2", "e2", eco, omega, {"elasticity": elasticity, "own_share": own_share})


def e2_family() -> list[CorpusEntry]:
    base = e2()
    slow = e2(0.1, 10.0 / 11.0)
    slow.name = "e2_slow"
    a, b = 0.95, 0.05
    eco, omega = make_economy(
        [CES([a, b], 0.2), CES([b, a], 0.2), CES([b, a], 0.2)],
        [[1.0, 0.0], [0.0, 0.5], [0.0, 0.5]],
    )
    replica = CorpusEntry("e2_replica", "e2", eco, omega, {"note": "trader 2 split into two identical halves"})
    eco, omega = make_economy(
        [CES([a, b, 0.2], 0.2), CES([b, a, 0.2], 0.2)],
        [[1.0, 0.0, 0.8], [0.0, 1.0, 0.8]],
    )
    three = CorpusEntry("e2_three_goods", "e2", eco, omega)
    return [base, slow, replica, three]


def random_spec(rng: np.random.Generator, l: int):
    if rng.random() < 0.5:
        return CobbDouglas(rng.dirichlet(np.ones(l)))
    shares = rng.uniform(0.2, 1.0, l)
    elasticity = rng.uniform(0.2, 0.9) if rng.random() < 0.5 else rng.uniform(1.1, 3.0)
    return CES(shares, elasticity)


def random_economy(rng: np.random.Generator, max_n: int = 4, max_l: int = 4) -> tuple[Economy, np.ndarray]:
    n = int(rng.integers(2, max_n + 1))
    l = int(rng.integers(2, max_l + 1))
    specs = [random_spec(rng, l) for _ in range(n)]
    return make_economy(specs, rng.uniform(0.05, 1.0, (n, l)))


def notrade_economy(rng: np.random.Generator, max_n: int = 4, max_l: int = 4):
    """Economy whose endowments are the demands at a random price, plus that price."""
    n = int(rng.integers(2, max_n + 1))
    l = int(rng.integers(2, max_l + 1))
    specs = [random_spec(rng, l) for _ in range(n)]
    p_bar = np.append(np.exp(rng.uniform(np.log(0.2), np.log(5.0), l - 1)), 1.0)
    incomes = rng.uniform(0.5, 2.0, n)
    omega = np.array([demand(s, p_bar, w) for s, w in zip(specs, incomes)])
    eco, omega = make_economy(specs, omega)
    return eco, omega, p_bar


def generate(seed: int = CORPUS_SEED) -> list[CorpusEntry]:
    rng = np.random.default_rng(seed)
    out = [e1(), *e2_family()]
    for k in range(N_NOTRADE):
        eco, omega, p_bar = notrade_economy(rng)
        out.append(CorpusEntry(f"notrade_{k:02d}", "notrade", eco, omega, {"p_bar": p_bar.tolist()}))
    for k in range(N_RANDOM):
        eco, omega = random_economy(rng)
        out.append(CorpusEntry(f"random_{k:02d}", "random", eco, omega))
    return out


def _entry_from_json(doc: dict) -> CorpusEntry:
    eco, omega = economy_from_json(doc)
    meta = dict(doc.get("meta", {}))
    name = meta.pop("name")
    family = meta.pop("family")
    return CorpusEntry(name, family, eco, omega, meta)


def load() -> list[CorpusEntry]:
    """The shipped corpus, in generation order."""
    root = resources.files("exchange_index") / "data" / "corpus"
    index = json.loads((root / "index.json").read_text())
    return [_entry_from_json(json.loads((root / f"{name}.json").read_text())) for name in index]


def write(directory: Path, entries: list[CorpusEntry]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for entry in entries:
        (directory / f"{entry.name}.json").write_text(json.dumps(entry.to_json(), indent=2) + "\n")
    (directory / "index.json").write_text(json.dumps([e.name for e in entries], indent=1) + "\n")


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "data" / "corpus"
    write(target, generate())
