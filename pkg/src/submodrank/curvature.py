"""Total curvature, the curvature-dependent greedy bound, and lambda sweeps.

Curvature is computed only through ``evaluate`` calls, never from an
objective's algebraic form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .errors import AllItemsDegenerate, NotMonotone, OutOfRange, SubmodrankError
from .greedy import GreedyTrace
from .objectives import EQUALITY_TOL, STRUCTURE_LIMIT, check_structure

NEMHAUSER_FACTOR = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class CurvatureReport:
    alpha: float
    raw_alpha: float
    per_item: dict
    argmax_item: int
    skipped: frozenset
    reference_set: tuple


@dataclass(frozen=True)
class BoundCertificate:
    alpha: float
    bound_factor: float
    greedy_value: float
    certified_opt_upper: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "bound_factor": self.bound_factor,
            "greedy_value": self.greedy_value,
            "certified_opt_upper": self.certified_opt_upper,
        }


def total_curvature(
    obj,
    S: Optional[Sequence[int]] = None,
    *,
    check_monotone: bool = True,
    tol: float = EQUALITY_TOL,
) -> CurvatureReport:
    """alpha = max_j (F(S - j) + F(j) - F(S)) / F(j) over j in S with F(j) > 0.

    ``S`` defaults to the whole ground set. Singletons with F(j) = 0 are
    skipped. The result is clamped to [0, 1]; the unclamped value is kept
    as ``raw_alpha``. Numerators within ``tol`` of zero count as zero. For |S| <= 12 monotonicity on subsets of S is checked
    first, since the definition assumes a non-decreasing function.
    """
    ref = list(range(obj.n)) if S is None else [int(i) for i in S]
    if not ref:
        raise ValueError("curvature needs a nonempty reference set")
    if check_monotone and len(ref) <= STRUCTURE_LIMIT:
        verdict = check_structure(obj, ref, tol=tol)
        if not verdict.monotone:
            raise NotMonotone(f"objective decreases on {verdict.monotone_witness}")

    full = obj.evaluate(ref)
    per_item, skipped = {}, set()
    for pos, j in enumerate(ref):
        single = obj.evaluate([j])
        if single <= 0:
            skipped.add(j)
            continue
        without = obj.evaluate(ref[:pos] + ref[pos + 1 :])
        num = without + single - full
        # summation-order noise on a modular function must not read as curvature
        if abs(num) <= tol * max(1.0, abs(full)):
            num = 0.0
        per_item[j] = num / single
    if not per_item:
        raise AllItemsDegenerate("every item has F({j}) = 0; curvature is undefined")
    argmax = max(per_item, key=lambda j: (per_item[j], -j))
    raw = per_item[argmax]
    return CurvatureReport(
        alpha=min(1.0, max(0.0, raw)),
        raw_alpha=raw,
        per_item=per_item,
        argmax_item=argmax,
        skipped=frozenset(skipped),
        reference_set=tuple(ref),
    )


def approximation_bound(alpha: float) -> float:
    """Greedy guarantee (1/alpha)(1 - exp(-alpha)); 1 in the modular limit."""
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"curvature must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return 1.0
    return -math.expm1(-alpha) / alpha


def certify(obj, trace: GreedyTrace, S_ref: Optional[Sequence[int]] = None, **kwargs) -> BoundCertificate:
    report = total_curvature(obj, S_ref, **kwargs)
    factor = approximation_bound(report.alpha)
    return BoundCertificate(
        alpha=report.alpha,
        bound_factor=factor,
        greedy_value=trace.value,
        certified_opt_upper=trace.value / factor,
    )


@dataclass(frozen=True)
class SweepRow:
    lam: float
    alpha: float = math.nan
    bound_factor: float = math.nan
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def curvature_sweep(
    family: Callable[[float], object],
    grid: Iterable[float],
    S_ref: Optional[Sequence[int]] = None,
    **kwargs,
) -> list:
    """Curvature and bound for ``family(lam)`` at each lambda in ``grid``.

    A failing row (bad lambda, degenerate curvature, ...) is recorded with
    its error message instead of aborting the sweep.
    """
    rows = []
    for lam in grid:
        try:
            report = total_curvature(family(lam), S_ref, **kwargs)
            rows.append(SweepRow(float(lam), report.alpha, approximation_bound(report.alpha)))
        except (SubmodrankError, ValueError) as exc:
            rows.append(SweepRow(float(lam), error=f"{type(exc).__name__}: {exc}"))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow], out: Optional[io.TextIOBase] = None) -> str:
    buf = io.StringIO() if out is None else out
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "alpha", "bound_factor"])
    for r in rows:
        writer.writerow([f"{r.lam:.6f}", f"{r.alpha:.6f}", f"{r.bound_factor:.6f}"])
    return buf.getvalue() if out is None else ""
