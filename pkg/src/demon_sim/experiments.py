"""Config ingestion, study pipelines, and reproducible CSV persistence.

Every pipeline writes plain CSV files plus a manifest.json listing each
output with its sha256, so downstream consumers (the plotting package,
regression tests) can verify integrity without recomputing anything.
Rendering is deliberately out of scope here: this module has no graphics
dependencies.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DemonSimError, ScheduleError, exit_code_for
from .fock import (FockDistribution, default_n_max, moments,
                   poisson_distribution, thermal_distribution,
                   write_distribution)
from .jc import SearchOptions, excitation_probability_linear, semiclassical_pe
from .protocols import (Schedule, charge_performance, mass_production,
                        run_schedule, write_trajectory)

SCHEMA_VERSION = 1

FIGURE_IDS = ("fig3", "fig4", "fig5", "fig6", "fig7", "appendix")

# Config presets keyed by the study they feed.
PRESETS = {
    "fig3": {"nbar": 30.0, "schedule": "LLLLL", "protocol": "II"},
    "fig4": {"nbar": 30.0, "schedule": "LLLLL", "protocol": "II"},
    "fig5": {"nbar": 30.0, "schedule": "LLLLLLNN", "protocol": "II"},
    "fig6": {"nbar": 30.0, "schedule": "LLLLLLNN", "protocol": "II"},
    "fig7": {"nbar": 30.0, "schedule": "LNN", "protocol": "II"},
    "appendix": {"nbar": 30.0, "schedule": "L", "protocol": "II"},
}

# Stand-in for the asymptotic thermal regime; converged well before this
# (the charging bound moves < 1e-3 between nbar=200 and nbar=500).
LARGE_NBAR = 500.0
LARGE_NBAR_N_MAX = 4000
LARGE_NBAR_LEAK_TOL = 1e-3

_CONFIG_KEYS = {"schema_version", "nbar", "n_max", "schedule", "protocol",
                "allow_ripple", "search", "outputs", "mass_k", "figure"}
_SEARCH_KEYS = {"grid_points", "window_factor", "refine_tol", "scan_step_divisor"}


@dataclass(frozen=True)
class ExperimentConfig:
    nbar: float
    schedule: str
    protocol: str = "II"
    n_max: int = 0                      # 0 selects the automatic truncation rule
    allow_ripple: bool = False
    search: SearchOptions = field(default_factory=SearchOptions)
    outputs: str = "out"
    mass_k: int = 100
    figure: str | None = None

    def build_schedule(self) -> Schedule:
        return Schedule.from_string(self.schedule, self.protocol, self.allow_ripple)

    def resolve_n_max(self) -> int:
        return self.n_max if self.n_max else default_n_max(self.nbar)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, rejecting unknown keys.

    Unreadable files raise OSError (an I/O failure, not a validation one).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"]
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top-level value must be an object"])

    errors = []
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    for key in unknown:
        errors.append(f"unknown key {key!r}")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        errors.append(f"unsupported schema_version {raw.get('schema_version')!r}")

    merged = {}
    figure = raw.get("figure")
    if figure is not None:
        if figure in PRESETS:
            merged.update(PRESETS[figure])
        else:
            errors.append(f"figure must be one of {sorted(FIGURE_IDS)}, got {figure!r}")
    merged.update({k: v for k, v in raw.items()
                   if k in _CONFIG_KEYS and k != "schema_version"})

    if "nbar" not in merged:
        errors.append("missing required key 'nbar'")
    elif not isinstance(merged["nbar"], (int, float)) or isinstance(merged["nbar"], bool) \
            or not math.isfinite(merged["nbar"]) or merged["nbar"] < 0:
        errors.append(f"nbar must be a finite number >= 0, got {merged['nbar']!r}")
    if "schedule" not in merged:
        errors.append("missing required key 'schedule'")
    elif not isinstance(merged["schedule"], str):
        errors.append("schedule must be a string of 'L' and 'N'")

    protocol = merged.get("protocol", "II")
    if protocol not in ("I", "II"):
        errors.append(f"protocol must be 'I' or 'II', got {protocol!r}")
    n_max = merged.get("n_max", 0)
    if not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 0:
        errors.append(f"n_max must be an integer >= 0 (0 = automatic), got {n_max!r}")
    allow_ripple = merged.get("allow_ripple", False)
    if not isinstance(allow_ripple, bool):
        errors.append(f"allow_ripple must be a boolean, got {allow_ripple!r}")
    outputs = merged.get("outputs", "out")
    if not isinstance(outputs, str) or not outputs:
        errors.append(f"outputs must be a non-empty path string, got {outputs!r}")
    mass_k = merged.get("mass_k", 100)
    if not isinstance(mass_k, int) or isinstance(mass_k, bool) or mass_k < 1:
        errors.append(f"mass_k must be an integer >= 1, got {mass_k!r}")

    search = SearchOptions()
    raw_search = merged.get("search", {})
    if not isinstance(raw_search, dict):
        errors.append(f"search must be an object, got {raw_search!r}")
    else:
        bad = sorted(set(raw_search) - _SEARCH_KEYS)
        for key in bad:
            errors.append(f"unknown search key {key!r}")
        if not bad:
            try:
                search = SearchOptions(**raw_search)
            except (DemonSimError, TypeError) as exc:
                errors.append(f"invalid search options: {exc}")

    schedule_str = merged.get("schedule")
    if isinstance(schedule_str, str) and protocol in ("I", "II") \
            and isinstance(allow_ripple, bool):
        try:
            Schedule.from_string(schedule_str, protocol, allow_ripple)
        except ScheduleError as exc:
            errors.append(str(exc))

    if errors:
        raise ConfigError([f"{path}: {e}" for e in errors])
    return ExperimentConfig(nbar=float(merged["nbar"]), schedule=schedule_str,
                            protocol=protocol, n_max=n_max,
                            allow_ripple=allow_ripple, search=search,
                            outputs=outputs, mass_k=mass_k, figure=figure)


# ---------------------------------------------------------------------------
# Output helpers

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: str, rows) -> Path:
    lines = [header]
    for row in rows:
        lines.append(",".join(str(c) if isinstance(c, (str, int)) else repr(float(c))
                              for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def _write_manifest(out: Path, figure: str | None, inputs: dict, paths) -> dict:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "figure": figure,
        "tool_version": __version__,
        "inputs": inputs,
        "outputs": sorted(
            ({"path": str(Path(p).relative_to(out)), "sha256": _sha256(Path(p))}
             for p in paths), key=lambda o: o["path"]),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii")
    return manifest


def verify_manifest(manifest_path) -> list:
    """Recheck every listed checksum; returns a list of mismatch messages."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="ascii"))
    problems = []
    for entry in manifest.get("outputs", []):
        target = manifest_path.parent / entry["path"]
        if not target.is_file():
            problems.append(f"missing output file {entry['path']}")
        elif _sha256(target) != entry["sha256"]:
            problems.append(f"checksum mismatch for {entry['path']}")
    return problems


def _moment_row(label: str, dist: FockDistribution) -> tuple:
    mo = moments(dist)
    return (label, mo.mean, mo.variance, mo.g2, mo.fano, mo.mdr, dist.probs[0])


# ---------------------------------------------------------------------------
# Study pipelines

def run_config(cfg: ExperimentConfig, base_dir=None) -> dict:
    """Execute one configured schedule; write trajectory, summary, manifest."""
    out = Path(base_dir) / cfg.outputs if base_dir else Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    initial = thermal_distribution(cfg.nbar, cfg.resolve_n_max())
    traj = run_schedule(initial, cfg.build_schedule(), cfg.search)
    paths = write_trajectory(traj, out)
    charge = charge_performance(traj.final_dist, cfg.search)
    mass = mass_production(charge.p_success, cfg.mass_k)
    paths.append(_write_csv(out / "summary.csv", "name,value", [
        ("final_charge_p", charge.p_success),
        ("final_charge_theta", charge.theta_star),
        ("mass_k", cfg.mass_k),
        ("mass_production_p", mass),
    ]))
    return _write_manifest(out, cfg.figure, cfg.as_dict(), paths)


def _charged_rounds(initial: FockDistribution, protocol: str, n_rounds: int,
                    opts: SearchOptions):
    """Charging figure of merit after each of n_rounds linear subtractions.

    The optimal charging angle for the round-N state doubles as the
    round-(N+1) interaction angle, so each search is done once.
    """
    from .protocols import step_linear_I, step_linear_II

    rows = []
    cur = initial
    rep = charge_performance(cur, opts)
    rows.append((0, rep.theta_star, rep.p_success))
    for n in range(1, n_rounds + 1):
        if protocol == "I":
            cur, _ = step_linear_I(cur, initial, rep.theta_star)
        else:
            cur, _ = step_linear_II(cur, rep.theta_star)
        rep = charge_performance(cur, opts)
        rows.append((n, rep.theta_star, rep.p_success))
    return rows


def _reproduce_fig3(out: Path, opts: SearchOptions) -> list:
    initial = thermal_distribution(30.0, default_n_max(30.0))
    paths = []
    mom_rows = [_moment_row("initial", initial)]
    for proto in ("I", "II"):
        traj = run_schedule(initial, Schedule.from_string("LLLLL", proto), opts)
        final = traj.final_dist
        pois = poisson_distribution(moments(final).mean, final.n_max)
        write_distribution(final, out / f"final_{proto}.csv")
        write_distribution(pois, out / f"poisson_{proto}.csv")
        paths += [out / f"final_{proto}.csv", out / f"poisson_{proto}.csv"]
        paths += write_trajectory(traj, out / f"protocol_{proto}")
        mom_rows.append(_moment_row(f"protocol_{proto}", final))
        mom_rows.append(_moment_row(f"poisson_{proto}", pois))
    write_distribution(initial, out / "initial.csv")
    paths.append(out / "initial.csv")
    paths.append(_write_csv(out / "moments.csv",
                            "label,mean,variance,g2,fano,mdr,p0", mom_rows))
    return paths


def _reproduce_fig4(out: Path, opts: SearchOptions) -> list:
    nbar_grid = [0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0]
    rows = []
    for proto in ("I", "II"):
        for nbar in nbar_grid:
            initial = thermal_distribution(nbar, default_n_max(nbar))
            for n, theta, p in _charged_rounds(initial, proto, 5, opts):
                rows.append((proto, nbar, n, theta, p))
    big = thermal_distribution(LARGE_NBAR, LARGE_NBAR_N_MAX,
                               leak_tol=LARGE_NBAR_LEAK_TOL)
    bound = charge_performance(big, opts)
    paths = [
        _write_csv(out / "charge.csv", "protocol,nbar,N,theta,charge_p", rows),
        _write_csv(out / "reference.csv", "name,value", [
            ("inversion_threshold", 0.5),
            ("large_nbar", LARGE_NBAR),
            ("large_nbar_charge", bound.p_success),
        ]),
    ]
    return paths


def _reproduce_fig5(out: Path, opts: SearchOptions) -> list:
    initial = thermal_distribution(30.0, default_n_max(30.0))
    paths = []
    charges = []
    for label, text in (("linear8", "LLLLLLLL"), ("mixed", "LLLLLLNN")):
        traj = run_schedule(initial, Schedule.from_string(text, "II"), opts)
        bars = [(r.index, r.kind, r.p_success, r.moments_after.mdr)
                for r in traj.rounds]
        paths.append(_write_csv(out / f"bars_{label}.csv",
                                "round,kind,p_success,mdr", bars))
        write_distribution(traj.final_dist, out / f"final_{label}.csv")
        paths.append(out / f"final_{label}.csv")
        charge = charge_performance(traj.final_dist, opts)
        charges.append((label, text, charge.theta_star, charge.p_success))
        if label == "mixed":
            pois = poisson_distribution(moments(traj.final_dist).mean,
                                        traj.final_dist.n_max)
            write_distribution(pois, out / "poisson_mixed.csv")
            paths.append(out / "poisson_mixed.csv")
    paths.append(_write_csv(out / "charge.csv",
                            "scheme,schedule,theta,charge_p", charges))
    return paths


def _ordinal(n: int) -> str:
    suffix = {1: "st", 2: "nd", 3: "rd"}.get(n if n < 10 else n % 10, "th")
    return f"{n}{suffix}"


def fig6_variants() -> list:
    """The all-linear baseline plus every consecutive-NN placement in 8 slots."""
    variants = [("all-linear", "LLLLLLLL")]
    for pos in range(1, 8):
        label = f"{_ordinal(pos)}+{_ordinal(pos + 1)}"
        variants.append((label, "L" * (pos - 1) + "NN" + "L" * (7 - pos)))
    return variants


def _reproduce_fig6(out: Path, opts: SearchOptions, mass_k: int = 100) -> list:
    initial = thermal_distribution(30.0, default_n_max(30.0))
    rows = []
    for label, text in fig6_variants():
        traj = run_schedule(initial, Schedule.from_string(text, "II"), opts)
        charge = charge_performance(traj.final_dist, opts)
        rows.append((label, text, charge.p_success,
                     mass_production(charge.p_success, mass_k)))
    return [_write_csv(out / "mass.csv",
                       "variant,schedule,charge_p,mass_production", rows)]


def _reproduce_fig7(out: Path, opts: SearchOptions) -> list:
    initial = thermal_distribution(30.0, default_n_max(30.0))
    ripple_traj = run_schedule(initial, Schedule.from_string("LNN", "II"), opts)
    ripple = ripple_traj.final_dist
    rec_traj = run_schedule(ripple, Schedule.from_string("LLLLLLLLNNNN", "II"), opts)
    recovered = rec_traj.final_dist
    mo_r = moments(ripple)
    mo = moments(recovered)
    # main-peak statistics: restrict to levels up to twice the mean
    cut = int(2 * mo.mean)
    peak = recovered.probs[: cut + 1]
    w = peak.sum()
    lv = np.arange(len(peak))
    peak_mean = float(peak @ lv) / w
    peak_var = float(peak @ (lv - peak_mean) ** 2) / w
    pois = poisson_distribution(mo.mean, recovered.n_max)
    write_distribution(ripple, out / "ripple.csv")
    write_distribution(recovered, out / "recovered.csv")
    write_distribution(pois, out / "poisson_recovered.csv")
    stats = [
        ("ripple_mean", mo_r.mean), ("ripple_variance", mo_r.variance),
        ("recovered_mean", mo.mean), ("recovered_variance", mo.variance),
        ("recovered_g2", mo.g2), ("recovered_mdr", mo.mdr),
        ("mainpeak_cut", cut), ("mainpeak_mean", peak_mean),
        ("mainpeak_variance", peak_var),
    ]
    return [out / "ripple.csv", out / "recovered.csv", out / "poisson_recovered.csv",
            _write_csv(out / "stats.csv", "name,value", stats)]


def _reproduce_appendix(out: Path, opts: SearchOptions) -> list:
    from .jc import optimal_theta_linear

    seed_rows = []
    for nbar in (0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0):
        dist = thermal_distribution(nbar, default_n_max(nbar))
        rep = optimal_theta_linear(dist, opts)
        seed_rows.append((nbar, rep.seed_theta, rep.theta_star,
                          abs(rep.seed_theta - rep.theta_star) / rep.theta_star))
    dist100 = thermal_distribution(100.0, default_n_max(100.0))
    semi_rows = []
    for x in np.linspace(0.0, 3.0, 121):
        theta = float(x) / math.sqrt(100.0)
        exact = excitation_probability_linear(dist100, theta)
        approx = semiclassical_pe(theta, 100.0)
        semi_rows.append((float(x), exact, approx, abs(exact - approx)))
    tail_rows = []
    for nbar in (10.0, 20.0, 30.0, 50.0, 100.0):
        dist = thermal_distribution(nbar, default_n_max(nbar))
        cut = int(4 * nbar)
        mass = float(dist.probs[cut + 1:].sum()) + dist.leak
        tail_rows.append((nbar, mass, math.exp(-4.0), mass / math.exp(-4.0)))
    return [
        _write_csv(out / "seed_error.csv",
                   "nbar,seed_theta,theta_star,rel_error", seed_rows),
        _write_csv(out / "semiclassical.csv", "x,exact,approx,abs_diff", semi_rows),
        _write_csv(out / "tail.csv", "nbar,mass_above_4nbar,reference,ratio", tail_rows),
    ]


_PIPELINES = {
    "fig3": _reproduce_fig3,
    "fig4": _reproduce_fig4,
    "fig5": _reproduce_fig5,
    "fig6": _reproduce_fig6,
    "fig7": _reproduce_fig7,
    "appendix": _reproduce_appendix,
}


def reproduce_figure(fig_id: str, out_dir,
                     opts: SearchOptions = SearchOptions()) -> dict:
    """Run one study pipeline; returns the written manifest."""
    if fig_id not in _PIPELINES:
        raise ConfigError([f"unknown figure id {fig_id!r}; "
                           f"expected one of {sorted(FIGURE_IDS)}"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = _PIPELINES[fig_id](out, opts)
    inputs = {"figure": fig_id, "search": asdict(opts)}
    return _write_manifest(out, fig_id, inputs, paths)


def sweep(config_paths, jobs: int = 1, base_dir=None) -> list:
    """Run independent configs, optionally in parallel; failures are recorded
    per config and do not stop the sweep."""
    config_paths = [Path(p) for p in config_paths]

    def one(path: Path) -> dict:
        try:
            cfg = load_config(path)
            manifest = run_config(cfg, base_dir=base_dir)
            return {"config": str(path), "status": "ok", "manifest": manifest}
        except DemonSimError as exc:
            return {"config": str(path), "status": "error", "error": str(exc),
                    "exit_code": exit_code_for(exc)}

    if jobs <= 1:
        return [one(p) for p in config_paths]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, config_paths))
