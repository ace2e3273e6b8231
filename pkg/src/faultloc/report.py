"""CSV tables and optional SVG charts from evaluation reports."""
from __future__ import annotations

from pathlib import Path

from .dataset import FAULT_TYPES, _atomic_write
from .errors import UnsupportedFormatError

SUMMARY_COLUMNS = ("experiment_id", "status", "system", "classifier", "ratio", "observed",
                   "lar", "arc", "exact", "one_hop", "two_hop", "zeta_train", "zeta_test", "nu_d")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def summary_rows(reports) -> list[list[str]]:
    rows = []
    for r in reports:
        hop = r.hop or {}
        vals = [r.experiment_id, r.status, r.system, r.classifier, r.ratio, len(r.observed),
                r.lar, r.arc, hop.get("exact"), hop.get("one_hop"), hop.get("two_hop"),
                r.zeta_train, r.zeta_test, r.nu_d]
        rows.append([_fmt(v) for v in vals])
    return rows


def lar_grid(reports):
    """Mean LAR per (fault type, observability ratio) over successful reports."""
    cells = {}
    ratios = set()
    for r in reports:
        if r.failed or r.ratio is None:
            continue
        ratios.add(r.ratio)
        for ft, v in r.lar_by_type.items():
            cells.setdefault((ft, r.ratio), []).append(v)
    ratios = sorted(ratios)
    types = [t for t in FAULT_TYPES if any((t, q) in cells for q in ratios)]
    types += sorted({ft for ft, _ in cells} - set(types))
    grid = [[sum(cells[(ft, q)]) / len(cells[(ft, q)]) if (ft, q) in cells else None
             for q in ratios] for ft in types]
    return types, ratios, grid


def _csv(rows) -> str:
    return "\n".join(",".join(r) for r in rows) + "\n"


def emit_report(reports, out_dir, formats=("csv",)) -> list[Path]:
    """Write ``summary.csv`` and ``lar_grid.csv`` (and ``lar.svg`` if asked)."""
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    formats = tuple(formats)
    bad = set(formats) - {"csv", "svg"}
    if bad:
        raise UnsupportedFormatError(f"unsupported report formats {sorted(bad)}")
    out = Path(out_dir)
    written = []
    if "svg" in formats:
        try:
            import matplotlib
        except ImportError:
            raise UnsupportedFormatError("svg output needs matplotlib (install the 'plots' extra)") from None
    if "csv" in formats:
        p = out / "summary.csv"
        _atomic_write(p, _csv([list(SUMMARY_COLUMNS)] + summary_rows(reports)))
        written.append(p)
        types, ratios, grid = lar_grid(reports)
        rows = [["fault_type"] + [f"ratio_{q:.4g}" for q in ratios]]
        rows += [[ft] + [_fmt(v) for v in row] for ft, row in zip(types, grid)]
        p = out / "lar_grid.csv"
        _atomic_write(p, _csv(rows))
        written.append(p)
    if "svg" in formats:
        written.append(_bar_chart(reports, out / "lar.svg"))
    return written


def _bar_chart(reports, path: Path) -> Path:
    import io

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [r for r in reports if not r.failed and r.lar is not None]
    with matplotlib.rc_context({"svg.hashsalt": "faultloc", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(ok) + 2), 3))
        ax.bar(range(len(ok)), [r.lar for r in ok], color="0.4")
        ax.set_xticks(range(len(ok)), [r.experiment_id for r in ok], rotation=45, ha="right")
        ax.set_ylim(0, 1)
        ax.set_ylabel("LAR")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    _atomic_write(path, buf.getvalue())
    return path
