"""The standard seeded instance corpus used by calibration and acceptance runs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .generators import ClusterInstance, far_instance_disjoint, planted_clusterable

D = 8
PLANTED_K2_N = (1000, 1200, 1400, 1600, 2000)
PLANTED_K3_N = (1200, 1500, 1800, 2100, 2400)
FAR_K2_SIZE = (350, 400, 450, 500, 600)
FAR_K3_SIZE = (250, 300, 350, 400, 450)


@dataclass
class CorpusEntry:
    name: str
    instance: ClusterInstance
    k: int
    expect_accept: bool

    @property
    def graph(self):
        return self.instance.graph


def planted_spec(i: int) -> tuple[int, list[int], int]:
    """(k, part sizes, cross edges) for planted corpus entry ``i`` in ``0..19``."""
    k = 2 if i < 10 else 3
    ns = PLANTED_K2_N if k == 2 else PLANTED_K3_N
    n = ns[i % 5]
    cross = 1 + (3 * i) % 10  # 1..10 cross edges, so every part has phi_out <= 10/(d |part|)
    return k, [n // k] * k, cross


def far_spec(i: int) -> tuple[int, int]:
    """(k, part size) for far corpus entry ``i`` in ``0..19``; the instance has ``k+1`` parts."""
    k = 2 if i < 10 else 3
    size = (FAR_K2_SIZE if k == 2 else FAR_K3_SIZE)[i % 5]
    return k, size


def planted_entry(i: int, base_seed: int = 1000) -> CorpusEntry:
    k, sizes, cross = planted_spec(i)
    inst = planted_clusterable(sizes, D, cross, base_seed + i)
    return CorpusEntry(f"planted{i:02d}", inst, k, True)


def far_entry(i: int, base_seed: int = 2000) -> CorpusEntry:
    k, size = far_spec(i)
    inst = far_instance_disjoint(k + 1, size, D, base_seed + i)
    return CorpusEntry(f"far{i:02d}", inst, k, False)


def standard_corpus(count: int = 20) -> list[CorpusEntry]:
    """``count`` planted and ``count`` far instances (deterministic)."""
    return [planted_entry(i) for i in range(count)] + [far_entry(i) for i in range(count)]


def calibration_corpus() -> list[CorpusEntry]:
    """A small spread of the standard corpus: extremes of size and cut for each k."""
    idx = (0, 4, 10, 14, 9, 19)
    return [planted_entry(i) for i in idx] + [far_entry(i) for i in idx]


def save_corpus(entries, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for e in entries:
        e.instance.design = {**e.instance.design, "test_k": e.k, "expect_accept": e.expect_accept}
        out.append(e.instance.save(directory / e.name)[0])
    return out


def load_corpus(directory: str | Path) -> list[CorpusEntry]:
    entries = []
    for edges in sorted(Path(directory).glob("*.edges")):
        inst = ClusterInstance.load(edges.with_suffix(""))
        design = inst.design
        k = design.get("test_k", max(1, len(inst.parts) - (0 if design.get("kind") != "far_disjoint" else 1)))
        expect = design.get("expect_accept", design.get("kind") != "far_disjoint")
        entries.append(CorpusEntry(edges.stem, inst, int(k), bool(expect)))
    return entries
