"""Regenerate the bundled case CSVs from public IEEE test-system data.

Needs two optional packages that the library itself never imports:

    pip install pypower tops

39-bus: PYPOWER ``case39``. 68-bus: the PST ``data16m`` transcription
shipped with ``tops`` (generators renumbered to buses 53-68).

Transformer taps are dropped (branches become plain series impedances).
An AC power flow is solved on that untapped network with the reference
voltage set to 1.0 p.u.; the bundled net loads are the current-equivalent
powers ``-conj(Y0 @ U_ac)``, so the constant-current pre-fault solve of
``faultloc.faultgen.solve_prefault`` reproduces the power-flow operating
point at nominal load.
"""
import argparse
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "faultloc" / "cases"


def _ybus(n, branches):
    Y = np.zeros((n, n), complex)
    for f, t, r, x, b in branches:
        i, j = f - 1, t - 1
        y = 1 / complex(r, x)
        Y[i, i] += y + 0.5j * b
        Y[j, j] += y + 0.5j * b
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


def _solve_ac(ppc):
    from pypower.api import ppoption, runpf

    res, ok = runpf(ppc, ppoption(VERBOSE=0, OUT_ALL=0))
    if not ok:
        raise RuntimeError("power flow did not converge")
    bus = res["bus"]
    return bus[:, 7] * np.exp(1j * np.radians(bus[:, 8]))


def _write(path, title, n, ref, branches, U):
    Y = _ybus(n, branches)
    S = np.conj(Y @ U)
    load = -S
    lines = [
        f"# {title}",
        "# p.u. on a 100 MVA base; p_load/q_load are current-equivalent net loads",
        "#reference",
        str(ref),
        "#buses id,shunt_re,shunt_im,p_load,q_load",
    ]
    for k in range(n):
        lines.append(f"{k + 1},0,0,{load[k].real:.10f},{load[k].imag:.10f}")
    lines.append("#lines id,from,to,r,x,b")
    for li, (f, t, r, x, b) in enumerate(branches, start=1):
        lines.append(f"{li},{f},{t},{r!r},{x!r},{b!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def case39():
    from pypower.case39 import case39 as ppc39

    ppc = ppc39()
    ppc["branch"][:, 8] = 0.0
    ppc["branch"][:, 9] = 0.0
    ref = int(ppc["bus"][ppc["bus"][:, 1] == 3, 0][0])
    ppc["gen"][ppc["gen"][:, 0] == ref, 5] = 1.0
    U = _solve_ac(ppc)
    branches = [(int(b[0]), int(b[1]), float(b[2]), float(b[3]), float(b[4]))
                for b in ppc["branch"]]
    _write(OUT / "ieee39.csv", "IEEE 39-bus (New England), from PYPOWER case39",
           39, ref, branches, U)


def _renumber68(name):
    k = int(name)
    if k <= 16:
        return k + 52
    if k >= 53:
        return k - 52
    return k


def case68():
    from tops.ps_models import ieee68

    d = ieee68.load()
    branches = []
    for row in d["lines"][1:]:
        branches.append((_renumber68(row[1]), _renumber68(row[2]),
                         float(row[3]), float(row[4]), float(row[5])))
    for row in d["transformers"][1:]:
        branches.append((_renumber68(row[1]), _renumber68(row[2]),
                         float(row[3]), float(row[4]), 0.0))
    n = 68
    ref = _renumber68(d["slack_bus"])
    bus = np.zeros((n, 13))
    bus[:, 0] = np.arange(1, n + 1)
    bus[:, 1] = 1
    bus[:, 7] = 1.0
    bus[:, 9] = 345.0
    bus[:, 11] = 1.5
    bus[:, 12] = 0.5
    for name, b, P, Q in d["loads"][1:]:
        k = _renumber68(b) - 1
        bus[k, 2] += P
        bus[k, 3] += Q
    gens = []
    for g in d["generators"]["GEN"][1:]:
        col = dict(zip(d["generators"]["GEN"][0], g))
        k = _renumber68(col["bus"])
        bus[k - 1, 1] = 2
        v = 1.0 if k == ref else col["V"]
        gens.append([k, col["P"], 0, 9999, -9999, v, 100, 1, 9999, -9999] + [0] * 11)
    bus[ref - 1, 1] = 3
    br = np.zeros((len(branches), 13))
    for q, (f, t, r, x, b) in enumerate(branches):
        br[q, :5] = (f, t, r, x, b)
        br[q, 10] = 1
        br[q, 11] = -360
        br[q, 12] = 360
    ppc = {"version": "2", "baseMVA": 100.0, "bus": bus,
           "gen": np.array(gens, float), "branch": br}
    U = _solve_ac(ppc)
    _write(OUT / "ieee68.csv",
           "IEEE 68-bus (NETS-NYPS, 16 machines), from the PST data16m transcription in tops",
           n, ref, branches, U)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", choices=["39", "68"])
    args = p.parse_args()
    if args.only in (None, "39"):
        case39()
    if args.only in (None, "68"):
        case68()


if __name__ == "__main__":
    main()
