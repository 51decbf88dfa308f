"""Report emission: summary JSON, per-check CSV and the suite table.

Everything written here is a pure function of the reports, which are a pure
function of config and seed.  Wall-clock timings are deliberately left out so
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path


class ReportError(OSError):
    """Raised when the output directory cannot be written."""


def _clean(x):
    # json cannot encode nan/inf portably; numpy scalars need unwrapping
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in sorted(x.items())}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(repr(x))
    return x


def summary_records(reports, cfg) -> list[dict]:
    digest = cfg.digest() if cfg is not None else None
    seed = cfg.seed if cfg is not None else None
    out = []
    for rep in reports:
        out.append({
            "suite": rep.suite,
            "pass": bool(rep.passed),
            "asserted": bool(rep.asserted),
            "metrics": _clean(rep.metrics),
            "config-hash": digest,
            "seed": seed,
            "error": rep.error,
        })
    return out


def summary_json(reports, cfg) -> str:
    return json.dumps(summary_records(reports, cfg), indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def checks_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "check", "value", "bound", "pass"])
    for rep in reports:
        for check, value, bound, ok in rep.rows:
            w.writerow([rep.suite, check, _fmt(value), _fmt(bound), "true" if ok else "false"])
        if rep.error:
            w.writerow([rep.suite, "error: " + rep.error, "", "", "false"])
    return buf.getvalue()


def suite_table(registry) -> str:
    """Markdown table mapping each suite id to what it checks."""
    lines = ["| suite | checks |", "| --- | --- |"]
    for sid, (_, desc) in registry.items():
        lines.append(f"| `{sid}` | {desc} |")
    return "\n".join(lines) + "\n"


def exit_code(reports) -> int:
    return 0 if all(r.passed for r in reports if r.asserted) else 1


def _figure(reports, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rep = next((r for r in reports if r.suite == "remark-VIII.8-power-counting"), None)
    if rep is None or "table" not in rep.metrics:
        return
    js = [j for j, _ in rep.metrics["table"]]
    ys = [v for _, v in rep.metrics["table"]]
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.semilogy(js, ys, "o-")
    ax.set_xlabel("scale j")
    ax.set_ylabel("covariance norm")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def emit_report(reports, cfg, out_dir, registry=None, figure: bool = False) -> int:
    """Write summary.json and checks.csv (plus the suite table) and return the exit code."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(summary_json(reports, cfg))
        (out / "checks.csv").write_text(checks_csv(reports))
        if registry is not None:
            (out / "suites.md").write_text(suite_table(registry))
        if figure:
            _figure(reports, out / "power_counting.png")
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return exit_code(reports)
