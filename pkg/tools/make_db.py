"""Generate src/sympow/data/curves.txt by searching small Weierstrass models.

Every reduced minimal model with a1, a3 in {0, 1}, a2 in {-1, 0, 1} and
|a4|, |a6| inside the search box whose conductor is at most --max-conductor
is kept (plus the extra conductors in --extra).  Curves are grouped into
isogeny classes by their a_p for p < 200.  Curves that match a known
Cremona model get that label; the rest are labelled ``<N>x<class>.<k>``
so they cannot be mistaken for Cremona labels.  A known member's rank is
copied to its whole class, since rank is an isogeny invariant.

    python3 tools/make_db.py --a4 300 --a6 1500
"""

from __future__ import annotations

import argparse
from collections import defaultdict
from pathlib import Path

import numpy as np

from sympow.curves import EllipticCurve, SingularCurveError, cm_discriminant, minimal_model, WeierstrassModel

# Cremona label -> (a-invariants, analytic rank)
KNOWN = {
    "11a1": ((0, -1, 1, -10, -20), 0),
    "11a3": ((0, -1, 1, 0, 0), 0),
    "14a1": ((1, 0, 1, 4, -6), 0),
    "14a4": ((1, 0, 1, -1, 0), 0),
    "15a1": ((1, 1, 1, -10, -10), 0),
    "17a1": ((1, -1, 1, -1, -14), 0),
    "19a1": ((0, 1, 1, -9, -15), 0),
    "19a3": ((0, 1, 1, 1, 0), 0),
    "20a1": ((0, 1, 0, 4, 4), 0),
    "20a2": ((0, 1, 0, -1, 0), 0),
    "21a1": ((1, 0, 0, -4, -1), 0),
    "24a1": ((0, -1, 0, -4, 4), 0),
    "26a1": ((1, 0, 1, -5, -8), 0),
    "26b1": ((1, -1, 1, -3, 3), 0),
    "30a1": ((1, 0, 1, 1, 2), 0),
    "33a1": ((1, 1, 0, -11, 0), 0),
    "34a1": ((1, 0, 0, -3, 1), 0),
    "35a1": ((0, 1, 1, 9, 1), 0),
    "37a1": ((0, 0, 1, -1, 0), 1),
    "37b1": ((0, 1, 1, -23, -50), 0),
    "38a1": ((1, 0, 1, 9, 90), 0),
    "38b1": ((1, 1, 1, 0, 1), 0),
    "39a1": ((1, 1, 0, -4, -5), 0),
    "40a1": ((0, 0, 0, -7, -6), 0),
    "42a1": ((1, 1, 1, -4, 5), 0),
    "43a1": ((0, 1, 1, 0, 0), 1),
    "44a1": ((0, 1, 0, 3, -1), 0),
    "46a1": ((1, -1, 0, -10, -12), 0),
    "48a1": ((0, 1, 0, -4, -4), 0),
    "50a1": ((1, 0, 1, -1, -2), 0),
    "50b1": ((1, 1, 1, -3, 1), 0),
    "51a1": ((0, 1, 1, 1, -1), 0),
    "52a1": ((0, 0, 0, 1, -10), 0),
    "53a1": ((1, -1, 1, 0, 0), 1),
    "54a1": ((1, -1, 0, 12, 8), 0),
    "54b1": ((1, -1, 1, 1, -1), 0),
    "55a1": ((1, -1, 0, -4, 3), 0),
    "56a1": ((0, 0, 0, 1, 2), 0),
    "56b1": ((0, -1, 0, 0, -4), 0),
    "57a1": ((0, -1, 1, -2, 2), 1),
    "57b1": ((0, 1, 1, 20, -32), 0),
    "58a1": ((1, -1, 0, -1, 1), 1),
    "58b1": ((1, 1, 1, 5, 9), 0),
    "61a1": ((1, 0, 0, -2, 1), 1),
    "62a1": ((1, -1, 1, -1, 1), 0),
    "63a1": ((1, -1, 0, 9, 0), 0),
    "65a1": ((1, 0, 0, -1, 0), 1),
    "66a1": ((1, 0, 1, -6, 4), 0),
    "66b1": ((1, 1, 1, -2, -1), 0),
    "66c1": ((1, 0, 0, -45, 81), 0),
    "67a1": ((0, 1, 1, -12, -21), 0),
    "69a1": ((1, 0, 1, -1, -1), 0),
    "70a1": ((1, -1, 1, 2, -3), 0),
    "72a1": ((0, 0, 0, 6, -7), 0),
    "73a1": ((1, -1, 0, 4, -3), 0),
    "75a1": ((0, -1, 1, -8, -7), 0),
    "76a1": ((0, -1, 0, -21, -31), 0),
    "77a1": ((0, 0, 1, 2, 0), 1),
    "77b1": ((0, 1, 1, -49, 600), 0),
    "77c1": ((1, 1, 0, 4, 11), 0),
    "78a1": ((1, 1, 0, -19, 685), 0),
    "79a1": ((1, 1, 1, -2, 0), 1),
    "80a1": ((0, 0, 0, -7, 6), 0),
    "80b1": ((0, -1, 0, 4, -4), 0),
    "82a1": ((1, 0, 1, -2, 0), 1),
    "83a1": ((1, 1, 1, 1, 0), 1),
    "84a1": ((0, 1, 0, 7, 0), 0),
    "84b1": ((0, -1, 0, -1, -2), 0),
    "85a1": ((1, 1, 0, -8, -13), 0),
    "88a1": ((0, 0, 0, -4, 3), 1),
    "89a1": ((1, 1, 1, -1, 0), 1),
    "89b1": ((1, 1, 0, 4, 5), 0),
    "90a1": ((1, -1, 0, 6, 0), 0),
    "91a1": ((0, 0, 1, 1, 0), 1),
    "91b1": ((0, 1, 1, -7, 5), 1),
    "92a1": ((0, 1, 0, 2, 1), 0),
    "92b1": ((0, 0, 0, -1, 1), 1),
    "94a1": ((1, -1, 1, 0, -1), 0),
    "96a1": ((0, 1, 0, -2, 0), 0),
    "96b1": ((0, -1, 0, -2, 0), 0),
    "98a1": ((1, 1, 0, -25, -111), 0),
    "99a1": ((1, -1, 1, -2, 0), 1),
    "100a1": ((0, -1, 0, -33, 62), 0),
}

_PRIMES = [p for p in range(2, 200) if all(p % q for q in range(2, int(p**0.5) + 1))]


def _discriminants(a1, a2, a3, a4, a6):
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


def _radical_ok(disc: np.ndarray, bound: int) -> np.ndarray:
    rest = np.abs(disc)
    rad = np.ones_like(rest)
    for p in [p for p in range(2, bound + 1) if all(p % q for q in range(2, int(p**0.5) + 1))]:
        hit = rest % p == 0
        if not hit.any():
            continue
        rad[hit] *= p
        while hit.any():
            rest[hit] //= p
            hit = (rest % p == 0) & (rest > 0)
    return (rest == 1) & (rad <= bound) & (disc != 0)


def search(r4: int, r6: int, max_n: int, extra: set[int]) -> dict[tuple, EllipticCurve]:
    found = {}
    a6 = np.arange(-r6, r6 + 1, dtype=np.int64)
    bound = max([max_n] + list(extra))
    for a1 in (0, 1):
        for a2 in (-1, 0, 1):
            for a3 in (0, 1):
                for a4 in range(-r4, r4 + 1):
                    disc = _discriminants(a1, a2, a3, a4, a6)
                    for a in a6[_radical_ok(disc, bound)]:
                        try:
                            E = EllipticCurve.from_ainvs((a1, a2, a3, a4, int(a)), allow_cm=True)
                        except SingularCurveError:
                            continue
                        N = E.conductor
                        if N <= max_n or N in extra:
                            found.setdefault(E.ainvs, E)
    return found


def class_key(E: EllipticCurve) -> tuple:
    return (E.conductor,) + tuple(E.ap(p) if E.conductor % p else 99 for p in _PRIMES)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--a4", type=int, default=300)
    ap.add_argument("--a6", type=int, default=1500)
    ap.add_argument("--max-conductor", type=int, default=1000)
    ap.add_argument("--extra", type=int, nargs="*", default=[176, 2379])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/sympow/data/curves.txt"))
    args = ap.parse_args(argv)
    found = search(args.a4, args.a6, args.max_conductor, set(args.extra))
    for label, (ainvs, _) in KNOWN.items():
        E = EllipticCurve.from_ainvs(ainvs, allow_cm=True)
        found.setdefault(E.ainvs, E)
    known_by_ainvs = {EllipticCurve.from_ainvs(a, allow_cm=True).ainvs: (lab, r) for lab, (a, r) in KNOWN.items()}
    classes = defaultdict(list)
    for E in found.values():
        classes[class_key(E)].append(E)
    by_conductor = defaultdict(list)
    for key in classes:
        by_conductor[key[0]].append(key)
    lines = [
        "# label a1 a2 a3 a4 a6 conductor rank",
        "# Cremona labels only for curves matched against known models;",
        "# '<N>x<k>.<j>' marks search-found curves (class k by sorted a_p, member j).",
        f"# search box |a4| <= {args.a4}, |a6| <= {args.a6}; conductors <= {args.max_conductor} and {sorted(args.extra)}",
    ]
    for N in sorted(by_conductor):
        keys = sorted(by_conductor[N])
        for k, key in enumerate(keys, 1):
            members = sorted(classes[key], key=lambda E: (abs(E.model.disc), E.ainvs))
            # rank is an isogeny invariant, so one known member fixes the class
            ranks = {known_by_ainvs[E.ainvs][1] for E in members if E.ainvs in known_by_ainvs}
            class_rank = ranks.pop() if len(ranks) == 1 else None
            for j, E in enumerate(members, 1):
                lab, rank = known_by_ainvs.get(E.ainvs, (f"{N}x{k}.{j}", class_rank))
                cm = "  # CM" if cm_discriminant(E.model) is not None else ""
                a = " ".join(str(x) for x in E.ainvs)
                lines.append(f"{lab} {a} {N} {'?' if rank is None else rank}{cm}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"{len(found)} curves in {len(classes)} classes -> {args.out}")


if __name__ == "__main__":
    main()
