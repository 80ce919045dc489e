"""Deterministic figure rendering from demon-sim CSV outputs.

Every job verifies the manifest checksums before touching the data, reads
values straight from the CSVs (nothing is recomputed), and writes the
image atomically so a failure never leaves a partial file.  SVG output is
byte-stable: fixed hash salt, no embedded creation date.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

FORMATS = ("svg", "png")

_RC = {
    "svg.hashsalt": "plotkit",
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.titlesize": 10.0,
    "figure.dpi": 120,
    "path.simplify": False,
}


class RenderError(Exception):
    """Bad inputs or integrity failures; the message names the file."""


@dataclass(frozen=True)
class FigureJob:
    fig_id: str
    input_dir: Path
    output: Path
    fmt: str = "svg"

    def __post_init__(self):
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output", Path(self.output))
        if self.fmt not in FORMATS:
            raise RenderError(f"format must be one of {FORMATS}, got {self.fmt!r}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_manifest(input_dir: Path) -> dict:
    manifest_path = input_dir / "manifest.json"
    if not manifest_path.is_file():
        raise RenderError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="ascii"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RenderError(f"unreadable manifest {manifest_path}: {exc}") from exc
    for entry in manifest.get("outputs", []):
        target = input_dir / entry["path"]
        if not target.is_file():
            raise RenderError(f"missing input file: {target}")
        if _sha256(target) != entry["sha256"]:
            raise RenderError(f"checksum mismatch: {target}")
    return manifest


def _read_rows(path: Path) -> list:
    if not path.is_file():
        raise RenderError(f"missing input file: {path}")
    with open(path, newline="", encoding="ascii") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if len(rows) < 2:
        raise RenderError(f"no data rows in {path}")
    return rows


def _read_table(path: Path) -> dict:
    rows = _read_rows(path)
    header = rows[0]
    return {name: [row[i] for row in rows[1:]] for i, name in enumerate(header)}


def _floats(column) -> np.ndarray:
    return np.array([float(v) for v in column])


def _read_dist(path: Path):
    table = _read_table(path)
    return _floats(table["m"]), _floats(table["p"])


def _read_kv(path: Path) -> dict:
    table = _read_table(path)
    return dict(zip(table["name"], (float(v) for v in table["value"])))


def _dist_axis(ax, input_dir, final_name, poisson_name, title):
    m0, p0 = _read_dist(input_dir / "initial.csv")
    m1, p1 = _read_dist(input_dir / final_name)
    m2, p2 = _read_dist(input_dir / poisson_name)
    ax.plot(m0, p0, color="black", lw=1.2, label="initial thermal")
    ax.fill_between(m1, p1, color="tab:orange", alpha=0.7, label="subtracted")
    ax.plot(m2, p2, color="tab:blue", lw=1.0, label="equal-mean Poisson")
    ax.set_xlim(0, 120)
    ax.set_xlabel("level m")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend(frameon=False)


def _render_fig3(fig: Figure, input_dir: Path) -> None:
    axes = fig.subplots(1, 2)
    moments = _read_table(input_dir / "moments.csv")
    notes = {label: i for i, label in enumerate(moments["label"])}
    for ax, proto in zip(axes, ("I", "II")):
        _dist_axis(ax, input_dir, f"final_{proto}.csv", f"poisson_{proto}.csv",
                   f"protocol {proto}, five one-quantum rounds")
        i = notes[f"protocol_{proto}"]
        text = (f"mean = {float(moments['mean'][i]):.2f}\n"
                f"g2 = {float(moments['g2'][i]):.3f}\n"
                f"R = {float(moments['mdr'][i]):.3f}\n"
                f"F = {float(moments['fano'][i]):.2f}")
        ax.text(0.98, 0.55, text, transform=ax.transAxes, ha="right", va="top")
    fig.set_size_inches(9.0, 3.4)


def _render_fig4(fig: Figure, input_dir: Path) -> None:
    table = _read_table(input_dir / "charge.csv")
    reference = _read_kv(input_dir / "reference.csv")
    proto = np.array(table["protocol"])
    nbar = _floats(table["nbar"])
    rounds = _floats(table["N"]).astype(int)
    charge = _floats(table["charge_p"])
    axes = fig.subplots(1, 2, sharey=True)
    for ax, which in zip(axes, ("I", "II")):
        sel = proto == which
        for n in sorted(set(rounds[sel])):
            pick = sel & (rounds == n)
            order = np.argsort(nbar[pick])
            ax.plot(nbar[pick][order], charge[pick][order], marker="o", ms=2.5,
                    label=f"N={n}")
        ax.axhline(0.5, ls=":", color="gray", lw=0.8)
        ax.axhline(reference["large_nbar_charge"], ls="--", color="black", lw=0.8)
        ax.set_xlabel("initial mean occupation")
        ax.set_title(f"protocol {which}")
    axes[0].set_ylabel("best excitation probability")
    axes[1].legend(frameon=False, fontsize=7)
    fig.set_size_inches(8.4, 3.2)


def _bar_axis(ax, table, charge_value, mark=None):
    rounds = _floats(table["round"]).astype(int)
    p = _floats(table["p_success"])
    mdr = _floats(table["mdr"])
    colors = ["tab:red" if k == "nonlinear" else "tab:blue" for k in table["kind"]]
    ax.bar(rounds, p, color=colors)
    ax.bar([len(rounds) + 1], [charge_value], color="tab:green")
    for x, (v, r) in enumerate(zip(p, mdr), start=1):
        ax.text(x, v * 0.5, f"{v:.3f}", ha="center", va="center",
                color="white", fontsize=6, rotation=90)
        ax.text(x, v + 0.02, f"R={r:.2f}", ha="center", va="bottom", fontsize=5)
    ax.text(len(rounds) + 1, charge_value * 0.5, f"{charge_value:.3f}",
            ha="center", va="center", color="white", fontsize=6, rotation=90)
    if mark is not None:
        ax.axhline(mark, ls="--", color="white", lw=0.8,
                   xmin=0.82, xmax=0.98)
    ax.set_ylim(0, 1.08)
    ax.set_xticks(list(rounds) + [len(rounds) + 1])
    ax.set_xticklabels([str(r) for r in rounds] + ["charge"], fontsize=6)
    ax.set_ylabel("success probability")


def _render_fig5(fig: Figure, input_dir: Path) -> None:
    charge = {row_scheme: float(value) for row_scheme, value in zip(
        *(lambda t: (t["scheme"], t["charge_p"]))(_read_table(input_dir / "charge.csv")))}
    gs = fig.add_gridspec(2, 2, width_ratios=[2.2, 1.0])
    ax_top = fig.add_subplot(gs[0, 0])
    ax_bot = fig.add_subplot(gs[1, 0])
    ax_inset = fig.add_subplot(gs[:, 1])
    _bar_axis(ax_top, _read_table(input_dir / "bars_linear8.csv"), charge["linear8"])
    _bar_axis(ax_bot, _read_table(input_dir / "bars_mixed.csv"), charge["mixed"],
              mark=charge["linear8"])
    ax_top.set_title("eight one-quantum rounds")
    ax_bot.set_title("six one-quantum + two two-quantum rounds")
    m8, p8 = _read_dist(input_dir / "final_linear8.csv")
    mm, pm = _read_dist(input_dir / "final_mixed.csv")
    mp, pp = _read_dist(input_dir / "poisson_mixed.csv")
    ax_inset.plot(m8, p8, color="black", lw=1.0, label="all linear")
    ax_inset.fill_between(mm, pm, color="tab:orange", alpha=0.7, label="with nonlinear")
    ax_inset.plot(mp, pp, color="tab:blue", lw=1.0, label="Poisson")
    ax_inset.set_xlim(0, 70)
    ax_inset.set_xlabel("level m")
    ax_inset.legend(frameon=False, fontsize=6)
    fig.set_size_inches(9.0, 5.0)


def _render_fig6(fig: Figure, input_dir: Path) -> None:
    table = _read_table(input_dir / "mass.csv")
    mass = _floats(table["mass_production"])
    labels = table["variant"]
    ax = fig.subplots()
    colors = ["tab:blue"] + ["tab:orange"] * (len(labels) - 1)
    ax.bar(range(len(labels)), mass, color=colors)
    for x, v in enumerate(mass):
        ax.text(x, v, f"{v:.2e}", ha="center", va="bottom", fontsize=6)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("all-of-100 charging probability")
    fig.set_size_inches(6.4, 3.6)


def _render_fig7(fig: Figure, input_dir: Path) -> None:
    stats = _read_kv(input_dir / "stats.csv")
    axes = fig.subplots(1, 2)
    mr, pr = _read_dist(input_dir / "ripple.csv")
    axes[0].fill_between(mr, pr, color="tab:orange", alpha=0.8)
    axes[0].set_xlim(0, 140)
    axes[0].set_title("rippled tail after early two-quantum rounds")
    axes[0].set_xlabel("level m")
    axes[0].set_ylabel("probability")
    mv, pv = _read_dist(input_dir / "recovered.csv")
    mq, pq = _read_dist(input_dir / "poisson_recovered.csv")
    axes[1].fill_between(mv, pv, color="tab:orange", alpha=0.8, label="recovered")
    axes[1].plot(mq, pq, color="tab:blue", lw=1.0, label="equal-mean Poisson")
    axes[1].set_xlim(0, 40)
    axes[1].set_title("after eight linear + four nonlinear rounds")
    axes[1].set_xlabel("level m")
    axes[1].legend(frameon=False, fontsize=7)
    axes[1].text(0.98, 0.65, f"g2 = {stats['recovered_g2']:.4f}",
                 transform=axes[1].transAxes, ha="right")
    fig.set_size_inches(9.0, 3.4)


_RENDERERS = {
    "fig3": _render_fig3,
    "fig4": _render_fig4,
    "fig5": _render_fig5,
    "fig6": _render_fig6,
    "fig7": _render_fig7,
}


def render(job: FigureJob) -> Path:
    """Render one verified study directory to an image file."""
    if job.fig_id not in _RENDERERS:
        raise RenderError(f"no renderer for {job.fig_id!r}; "
                          f"expected one of {sorted(_RENDERERS)}")
    manifest = _load_manifest(job.input_dir)
    if manifest.get("figure") != job.fig_id:
        raise RenderError(f"manifest {job.input_dir / 'manifest.json'} describes "
                          f"{manifest.get('figure')!r}, not {job.fig_id!r}")
    with rc_context(_RC):
        fig = Figure()
        _RENDERERS[job.fig_id](fig, job.input_dir)
        fig.set_layout_engine("tight")
        job.output.parent.mkdir(parents=True, exist_ok=True)
        tmp = job.output.with_name(job.output.name + ".tmp")
        try:
            fig.savefig(tmp, format=job.fmt, metadata={"Date": None})
            os.replace(tmp, job.output)
        finally:
            tmp.unlink(missing_ok=True)
    return job.output


def render_all(root_dir, out_dir=None, fmt: str = "svg") -> dict:
    """Render every recognized manifest under root_dir.

    Unrecognized figure ids (e.g. table-only studies) are skipped; failures
    are collected per directory and do not stop the walk.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise RenderError(f"not a directory: {root}")
    summary = {"rendered": [], "failures": [], "skipped": []}
    for manifest_path in sorted(root.rglob("manifest.json")):
        folder = manifest_path.parent
        try:
            fig_id = json.loads(manifest_path.read_text(encoding="ascii")).get("figure")
        except (OSError, json.JSONDecodeError) as exc:
            summary["failures"].append({"input": str(folder), "error": str(exc)})
            continue
        if fig_id not in _RENDERERS:
            summary["skipped"].append(str(folder))
            continue
        target_dir = Path(out_dir) if out_dir else folder
        job = FigureJob(fig_id, folder, target_dir / f"{fig_id}.{fmt}", fmt)
        try:
            summary["rendered"].append(str(render(job)))
        except RenderError as exc:
            summary["failures"].append({"input": str(folder), "error": str(exc)})
    return summary
