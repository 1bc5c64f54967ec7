"""Experiment orchestration: configs, sweeps, CSV emission, figure recipes.

Every command resolves to a list of result rows with a fixed schema and a
deterministic order, then writes one CSV per command.  Figure commands pin
the reference scenario (the six-user, three-cluster gain/accuracy table
and its companion settings) and also emit a standalone plotting script
next to the CSV; the script is never executed here.

Units: powers are linear, the sweep variable ``snr_db`` maps to total
power via P = 10^(dB/10), rates are bit/s/Hz.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import allocation as alloc
from .analytic import MixtureConditioningWarning, closed_form_rates
from .channel import SystemGeometry, csi_accuracy_fdd, csi_accuracy_tdd
from .errors import ConfigError, InfeasibleGeometryError
from .linksim import PowerPlan, RateReport, monte_carlo_rates, tdma_mrt_baseline

# reference six-user scenario used by all figure commands
TABLE1_M, TABLE1_N, TABLE1_K = 6, 3, 2
TABLE1_ALPHA = ((1.00, 0.10), (0.95, 0.20), (0.90, 0.15))
TABLE1_RHO = ((0.90, 0.70), (0.85, 0.75), (0.80, 0.80))

DEFAULT_TRIALS = 100_000
DEFAULT_SEED = 1
DEFAULT_B_TOT = 12.0

CSV_HEADER = ("experiment", "sweep_var", "sweep_value", "cluster", "user",
              "rate", "sum_rate", "source", "trials", "stderr")

COMMANDS = ("simulate", "analytic", "optimize-power", "optimize-feedback",
            "select-mode", "joint", "fig2", "fig3", "fig4", "fig5", "fig6",
            "fig7", "validate")


def table1_geometry() -> SystemGeometry:
    return SystemGeometry(M=TABLE1_M, N=TABLE1_N, K=TABLE1_K,
                          alpha=np.array(TABLE1_ALPHA))


def table1_rho() -> np.ndarray:
    return np.array(TABLE1_RHO)


@dataclass
class ResultRow:
    """One CSV row; cluster/user are 1-based, 0 marks a whole-system row."""

    experiment: str
    sweep_var: str
    sweep_value: float
    cluster: int
    user: int
    rate: float
    sum_rate: float
    source: str
    trials: int
    stderr: float | None = None


def _fnum(x) -> str:
    # repr of a float round-trips exactly, keeping the CSV bit-stable
    return repr(float(x))


def format_row(r: ResultRow) -> list[str]:
    return [
        r.experiment, r.sweep_var, _fnum(r.sweep_value), str(int(r.cluster)),
        str(int(r.user)), _fnum(r.rate), _fnum(r.sum_rate), r.source,
        str(int(r.trials)), "" if r.stderr is None else _fnum(r.stderr),
    ]


def write_rows(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_HEADER)]
    lines += [",".join(format_row(r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_rows(path) -> list[ResultRow]:
    """Parse a result CSV back into rows (inverse of write_rows)."""
    text = Path(path).read_text().splitlines()
    if not text or tuple(text[0].split(",")) != CSV_HEADER:
        raise ConfigError(f"{path} does not carry the result schema.")
    out = []
    for line in text[1:]:
        f = line.split(",")
        out.append(ResultRow(
            experiment=f[0], sweep_var=f[1], sweep_value=float(f[2]),
            cluster=int(f[3]), user=int(f[4]), rate=float(f[5]),
            sum_rate=float(f[6]), source=f[7], trials=int(f[8]),
            stderr=None if f[9] == "" else float(f[9]),
        ))
    return out


def rows_from_report(experiment: str, sweep_var: str, sweep_value: float,
                     report: RateReport, clusters=None) -> list[ResultRow]:
    """Per-user rows for one sweep point; clusters filters to 0-based ids."""
    out = []
    N, K = report.rate.shape
    for n in range(N):
        if clusters is not None and n not in clusters:
            continue
        for k in range(K):
            err = None if report.stderr is None else float(report.stderr[n, k])
            out.append(ResultRow(
                experiment=experiment, sweep_var=sweep_var,
                sweep_value=sweep_value, cluster=n + 1, user=k + 1,
                rate=float(report.rate[n, k]), sum_rate=report.sum_rate,
                source=report.source, trials=report.trials, stderr=err,
            ))
    return out


def sum_row(experiment: str, sweep_var: str, sweep_value: float,
            sum_rate: float, source: str, trials: int = 0,
            stderr: float | None = None) -> ResultRow:
    return ResultRow(experiment=experiment, sweep_var=sweep_var,
                     sweep_value=sweep_value, cluster=0, user=0,
                     rate=sum_rate, sum_rate=sum_rate, source=source,
                     trials=trials, stderr=stderr)


# --------------------------------------------------------------------------
# configuration

_TOP_KEYS = {"preset", "trials", "seed", "geometry", "csi", "power",
             "feedback", "outputs"}
_GEOMETRY_KEYS = {"M", "N", "K", "alpha"}
_CSI_KEYS = {"mode", "rho", "tau", "pilot_power"}
_POWER_KEYS = {"scheme", "p_tot", "snr_db", "ratio"}
_FEEDBACK_KEYS = {"scheme", "b_tot"}
_OUTPUT_KEYS = {"dir"}

_POWER_SCHEMES = ("equal", "proposed", "fixed")
_FEEDBACK_SCHEMES = ("equal", "optimized")
_CSI_MODES = ("direct", "tdd", "fdd")


@dataclass
class ExperimentConfig:
    geometry: SystemGeometry
    csi_mode: str = "direct"
    rho: np.ndarray | None = None
    tau: int | None = None
    pilot_power: float | None = None
    power_scheme: str = "equal"
    ratio: tuple[float, float] = (1.0, 4.0)
    p_tot: float | None = None
    snr_db: tuple[float, float, float] | None = None
    feedback_scheme: str = "equal"
    b_tot: float = DEFAULT_B_TOT
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    out_dir: str = "results"

    def sweep(self) -> list[tuple[str, float, float]]:
        """(sweep_var, sweep_value, total power) per point, fixed order."""
        if self.snr_db is not None:
            start, stop, step = self.snr_db
            n_pts = int(math.floor((stop - start) / step + 1e-9)) + 1
            points = [start + i * step for i in range(n_pts)]
            return [("snr_db", v, 10.0 ** (v / 10.0)) for v in points]
        return [("p_tot", self.p_tot, self.p_tot)]

    def base_accuracy(self) -> np.ndarray:
        """(N, K) accuracy before any feedback optimization (equal split)."""
        g = self.geometry
        if self.csi_mode == "direct":
            return np.broadcast_to(np.asarray(self.rho, dtype=float),
                                   (g.N, g.K)).copy()
        if self.csi_mode == "tdd":
            power = np.broadcast_to(np.asarray(self.pilot_power, dtype=float),
                                    (g.N, g.K))
            return np.asarray(csi_accuracy_tdd(self.tau, power, g.alpha))
        return np.full((g.N, g.K),
                       csi_accuracy_fdd(self.b_tot / g.users, g.M))

    def power_plan(self, rho, p_tot: float) -> PowerPlan:
        if self.power_scheme == "equal":
            return alloc.equal_power(self.geometry, p_tot)
        if self.power_scheme == "proposed":
            return alloc.power_allocation(self.geometry, rho, p_tot)
        return alloc.fixed_ratio_power(self.geometry, p_tot, self.ratio)


def _expect_keys(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        listed = ", ".join(f"{where}.{k}" if where else k for k in unknown)
        raise ConfigError(f"unknown config keys: {listed}")


def _as_number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{field} must be a number.")
    return float(value)


def load_config(path=None) -> ExperimentConfig:
    """Parse and validate a config file; None loads the reference preset."""
    if path is None:
        data: dict = {"preset": "table1"}
    else:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
    _expect_keys(data, _TOP_KEYS, "")

    preset = data.get("preset")
    if preset is not None and preset != "table1":
        raise ConfigError(f"preset must be \"table1\", got {preset!r}.")

    geo = dict(data.get("geometry", {}))
    _expect_keys(geo, _GEOMETRY_KEYS, "geometry")
    csi = dict(data.get("csi", {}))
    _expect_keys(csi, _CSI_KEYS, "csi")
    if preset == "table1":
        geo = {"M": TABLE1_M, "N": TABLE1_N, "K": TABLE1_K,
               "alpha": [list(r) for r in TABLE1_ALPHA], **geo}
        csi = {"mode": "direct", "rho": [list(r) for r in TABLE1_RHO], **csi}
    for key in ("M", "N", "K", "alpha"):
        if key not in geo:
            raise ConfigError(f"geometry.{key} is required (or use preset = \"table1\").")
    alpha = np.asarray(geo["alpha"], dtype=float)
    if alpha.shape != (int(geo["N"]), int(geo["K"])):
        raise ConfigError(
            f"geometry.alpha must have shape ({geo['N']}, {geo['K']}), got {alpha.shape}."
        )
    try:
        geometry = SystemGeometry(M=int(geo["M"]), N=int(geo["N"]),
                                  K=int(geo["K"]), alpha=alpha)
    except InfeasibleGeometryError:
        raise  # keeps its own type (and exit code)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc

    mode = csi.get("mode", "direct")
    if mode not in _CSI_MODES:
        raise ConfigError(f"csi.mode must be one of {_CSI_MODES}, got {mode!r}.")
    rho = None
    tau = None
    pilot = None
    if mode == "direct":
        if "rho" not in csi:
            raise ConfigError("csi.rho is required when csi.mode = \"direct\".")
        rho = np.asarray(csi["rho"], dtype=float)
        try:
            rho = np.broadcast_to(rho, (geometry.N, geometry.K)).copy()
        except ValueError as exc:
            raise ConfigError(f"csi.rho does not fit the geometry: {exc}") from exc
        if np.any(rho < 0.0) or np.any(rho > 1.0):
            raise ConfigError("csi.rho entries must lie in [0, 1].")
    elif mode == "tdd":
        if "tau" not in csi or "pilot_power" not in csi:
            raise ConfigError("csi.tau and csi.pilot_power are required for tdd.")
        tau = int(csi["tau"])
        if tau <= geometry.users:
            raise ConfigError(f"csi.tau must exceed the user count {geometry.users}.")
        pilot = _as_number(csi["pilot_power"], "csi.pilot_power")
        if pilot < 0:
            raise ConfigError("csi.pilot_power must be non-negative.")

    power = dict(data.get("power", {}))
    _expect_keys(power, _POWER_KEYS, "power")
    scheme = power.get("scheme", "equal")
    if scheme not in _POWER_SCHEMES:
        raise ConfigError(f"power.scheme must be one of {_POWER_SCHEMES}, got {scheme!r}.")
    p_tot = None
    snr = None
    if "p_tot" in power and "snr_db" in power:
        raise ConfigError("power.p_tot and power.snr_db are mutually exclusive.")
    if "p_tot" in power:
        p_tot = _as_number(power["p_tot"], "power.p_tot")
        if p_tot <= 0:
            raise ConfigError("power.p_tot must be positive.")
    else:
        raw = power.get("snr_db", [0, 40, 5])
        if (not isinstance(raw, (list, tuple)) or len(raw) != 3):
            raise ConfigError("power.snr_db must be [start, stop, step].")
        snr = tuple(_as_number(v, "power.snr_db") for v in raw)
        if snr[2] <= 0 or snr[1] < snr[0]:
            raise ConfigError("power.snr_db needs stop >= start and step > 0.")
    ratio = power.get("ratio", [1, 4])
    if (not isinstance(ratio, (list, tuple)) or len(ratio) != 2):
        raise ConfigError("power.ratio must be a two-element list.")
    ratio = tuple(_as_number(v, "power.ratio") for v in ratio)

    feedback = dict(data.get("feedback", {}))
    _expect_keys(feedback, _FEEDBACK_KEYS, "feedback")
    fb_scheme = feedback.get("scheme", "equal")
    if fb_scheme not in _FEEDBACK_SCHEMES:
        raise ConfigError(
            f"feedback.scheme must be one of {_FEEDBACK_SCHEMES}, got {fb_scheme!r}."
        )
    b_tot = _as_number(feedback.get("b_tot", DEFAULT_B_TOT), "feedback.b_tot")
    if b_tot < 0:
        raise ConfigError("feedback.b_tot must be non-negative.")

    outputs = dict(data.get("outputs", {}))
    _expect_keys(outputs, _OUTPUT_KEYS, "outputs")
    out_dir = str(outputs.get("dir", "results"))

    trials = data.get("trials", DEFAULT_TRIALS)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be a positive integer.")
    seed = data.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer.")

    return ExperimentConfig(
        geometry=geometry, csi_mode=mode, rho=rho, tau=tau, pilot_power=pilot,
        power_scheme=scheme, ratio=ratio, p_tot=p_tot, snr_db=snr,
        feedback_scheme=fb_scheme, b_tot=b_tot, trials=trials, seed=seed,
        out_dir=out_dir,
    )


# --------------------------------------------------------------------------
# plain commands

def _feedback_accuracy(cfg: ExperimentConfig, plan: PowerPlan) -> np.ndarray:
    """Accuracy after the configured feedback scheme (fdd only)."""
    g = cfg.geometry
    if cfg.feedback_scheme == "optimized":
        fb = alloc.feedback_allocation(g, plan, cfg.b_tot)
        return fb.accuracy(g.M)
    return np.full((g.N, g.K), csi_accuracy_fdd(cfg.b_tot / g.users, g.M))


def cmd_simulate(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    for var, value, p_tot in cfg.sweep():
        rho = cfg.base_accuracy()
        plan = cfg.power_plan(rho, p_tot)
        if cfg.csi_mode == "fdd":
            rho = _feedback_accuracy(cfg, plan)
        report = monte_carlo_rates(cfg.geometry, rho, plan, cfg.trials, cfg.seed)
        rows += rows_from_report("simulate", var, value, report)
    return rows


def cmd_analytic(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    for var, value, p_tot in cfg.sweep():
        rho = cfg.base_accuracy()
        plan = cfg.power_plan(rho, p_tot)
        if cfg.csi_mode == "fdd":
            rho = _feedback_accuracy(cfg, plan)
        rates = closed_form_rates(cfg.geometry, rho, plan)
        report = RateReport(rate=rates, sum_rate=float(rates.sum()),
                            source="closed-form", trials=0)
        rows += rows_from_report("analytic", var, value, report)
    return rows


def cmd_optimize_power(cfg: ExperimentConfig) -> list[ResultRow]:
    """Inverse-coefficient power split, rates via the closed form."""
    rows = []
    shares = None
    for var, value, p_tot in cfg.sweep():
        rho = cfg.base_accuracy()
        plan = alloc.power_allocation(cfg.geometry, rho, p_tot)
        shares = plan.cluster_totals() / p_tot
        rates = closed_form_rates(cfg.geometry, rho, plan)
        report = RateReport(rate=rates, sum_rate=float(rates.sum()),
                            source="closed-form", trials=0)
        rows += rows_from_report("optimize-power", var, value, report)
    print("cluster power shares:", " ".join(_fnum(s) for s in shares))
    return rows


def cmd_optimize_feedback(cfg: ExperimentConfig) -> list[ResultRow]:
    """Bit split against the configured power scheme, rates via closed form."""
    rows = []
    bits = None
    for var, value, p_tot in cfg.sweep():
        rho_eq = np.full((cfg.geometry.N, cfg.geometry.K),
                         csi_accuracy_fdd(cfg.b_tot / cfg.geometry.users,
                                          cfg.geometry.M))
        plan = cfg.power_plan(rho_eq, p_tot)
        fb = alloc.feedback_allocation(cfg.geometry, plan, cfg.b_tot)
        bits = fb.bits
        rates = closed_form_rates(cfg.geometry, fb.accuracy(cfg.geometry.M), plan)
        report = RateReport(rate=rates, sum_rate=float(rates.sum()),
                            source="closed-form", trials=0)
        rows += rows_from_report("optimize-feedback", var, value, report)
    print("feedback bits:", " ".join(str(b) for b in bits.ravel()))
    return rows


def _mode_label(mode: alloc.TransmissionMode) -> str:
    return f"{mode.N}x{mode.K}"


def _mode_rho_resolver(cfg: ExperimentConfig):
    """Per-mode accuracy for re-clustered geometries.

    direct accuracies travel with their user (dealt alongside the gains);
    tdd recomputes from the dealt gains; fdd applies the equal budget split.
    """
    flat_alpha = cfg.geometry.alpha.ravel()
    if cfg.csi_mode == "direct":
        flat_rho = cfg.rho.ravel()

        def resolver(geom: SystemGeometry) -> np.ndarray:
            mode = alloc.TransmissionMode(N=geom.N, K=geom.K)
            return alloc.deal_companion(flat_alpha, flat_rho, mode)
    elif cfg.csi_mode == "tdd":

        def resolver(geom: SystemGeometry) -> np.ndarray:
            return np.asarray(csi_accuracy_tdd(cfg.tau, cfg.pilot_power,
                                               geom.alpha))
    else:

        def resolver(geom: SystemGeometry) -> np.ndarray:
            return np.full((geom.N, geom.K),
                           csi_accuracy_fdd(cfg.b_tot / geom.users, geom.M))
    return resolver


def cmd_select_mode(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    flat_alpha = cfg.geometry.alpha.ravel()
    resolver = _mode_rho_resolver(cfg)
    for var, value, p_tot in cfg.sweep():
        evals = alloc.evaluate_modes(flat_alpha, cfg.geometry.M, resolver, p_tot)
        for ev in evals:
            rows.append(sum_row(f"select-mode:{_mode_label(ev.mode)}", var,
                                value, ev.sum_rate, "closed-form"))
        best = max(evals, key=lambda ev: (ev.sum_rate, -ev.mode.K))
        rows.append(sum_row("select-mode:best", var, value, best.sum_rate,
                            "closed-form"))
        print(f"{var}={value}: best mode {_mode_label(best.mode)} "
              f"sum rate {best.sum_rate:.4f}")
    return rows


def cmd_joint(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    flat_alpha = cfg.geometry.alpha.ravel()
    for var, value, p_tot in cfg.sweep():
        if cfg.csi_mode == "fdd":
            result = alloc.joint_optimize(flat_alpha, cfg.geometry.M, p_tot,
                                          b_tot=cfg.b_tot)
        else:
            result = alloc.joint_optimize(flat_alpha, cfg.geometry.M, p_tot,
                                          rho=_mode_rho_resolver(cfg))
        best = result.best
        report = RateReport(rate=best.rates, sum_rate=best.sum_rate,
                            source="closed-form", trials=0)
        rows += rows_from_report(f"joint:{_mode_label(best.mode)}", var, value,
                                 report)
        print(f"{var}={value}: mode {_mode_label(best.mode)} "
              f"sum rate {best.sum_rate:.4f}")
    return rows


# --------------------------------------------------------------------------
# figure commands (reference scenario pinned)

def _snr_grid():
    return [float(v) for v in range(0, 41, 5)]


def fig2_rows(trials: int, seed: int) -> list[ResultRow]:
    """First cluster's two users, exact curve vs simulation, across SNR."""
    geom = table1_geometry()
    rho = table1_rho()
    rows = []
    for snr in _snr_grid():
        p_tot = 10.0 ** (snr / 10.0)
        plan = alloc.equal_power(geom, p_tot)
        rates = closed_form_rates(geom, rho, plan)
        cf = RateReport(rate=rates, sum_rate=float(rates.sum()),
                        source="closed-form", trials=0)
        rows += rows_from_report("fig2", "snr_db", snr, cf, clusters={0})
        mc = monte_carlo_rates(geom, rho, plan, trials, seed)
        rows += rows_from_report("fig2", "snr_db", snr, mc, clusters={0})
    return rows


def fig3_rows(trials: int, seed: int) -> list[ResultRow]:
    """Sum rate of the three power schemes (closed form) across SNR."""
    geom = table1_geometry()
    rho = table1_rho()
    rows = []
    for snr in _snr_grid():
        p_tot = 10.0 ** (snr / 10.0)
        plans = {
            "proposed": alloc.power_allocation(geom, rho, p_tot),
            "equal": alloc.equal_power(geom, p_tot),
            "fixed": alloc.fixed_ratio_power(geom, p_tot),
        }
        for name, plan in plans.items():
            s = float(closed_form_rates(geom, rho, plan).sum())
            rows.append(sum_row(f"fig3:{name}", "snr_db", snr, s, "closed-form"))
    return rows


def fig4_rows(trials: int, seed: int) -> list[ResultRow]:
    """Equal vs optimized feedback split (equal power) across SNR."""
    geom = table1_geometry()
    b_tot = DEFAULT_B_TOT
    rho_eq = np.full((geom.N, geom.K),
                     csi_accuracy_fdd(b_tot / geom.users, geom.M))
    rows = []
    for snr in _snr_grid():
        p_tot = 10.0 ** (snr / 10.0)
        plan = alloc.equal_power(geom, p_tot)
        fb = alloc.feedback_allocation(geom, plan, b_tot)
        for name, rho in (("equal-bits", rho_eq),
                          ("optimized-bits", fb.accuracy(geom.M))):
            s = float(closed_form_rates(geom, rho, plan).sum())
            rows.append(sum_row(f"fig4:{name}", "snr_db", snr, s, "closed-form"))
    return rows


def fig5_rows(trials: int, seed: int) -> list[ResultRow]:
    """Per-user rates vs total feedback bits at 35 dB, both bit splits,
    closed form next to simulation."""
    geom = table1_geometry()
    p_tot = 10.0 ** 3.5
    plan = alloc.equal_power(geom, p_tot)
    rows = []
    for b_tot in range(12, 43, 6):
        rho_eq = np.full((geom.N, geom.K),
                         csi_accuracy_fdd(b_tot / geom.users, geom.M))
        fb = alloc.feedback_allocation(geom, plan, b_tot)
        for name, rho in (("equal-bits", rho_eq),
                          ("optimized-bits", fb.accuracy(geom.M))):
            rates = closed_form_rates(geom, rho, plan)
            cf = RateReport(rate=rates, sum_rate=float(rates.sum()),
                            source="closed-form", trials=0)
            rows += rows_from_report(f"fig5:{name}", "b_tot", float(b_tot), cf)
            mc = monte_carlo_rates(geom, rho, plan, trials, seed)
            rows += rows_from_report(f"fig5:{name}", "b_tot", float(b_tot), mc)
    return rows


def _rho_grid(points: int):
    # i/20 renders as clean short decimals in the CSV
    return [i / 20 for i in range(points)]


def fig6_rows(trials: int, seed: int) -> list[ResultRow]:
    """Sum rate of every transmission mode plus the selection envelope,
    versus a uniform accuracy, at 10 dB with equal power."""
    geom = table1_geometry()
    flat_alpha = geom.alpha.ravel()
    p_tot = 10.0
    rows = []
    for rho in _rho_grid(21):
        evals = alloc.evaluate_modes(flat_alpha, geom.M, rho, p_tot)
        for ev in evals:
            rows.append(sum_row(f"fig6:mode-{_mode_label(ev.mode)}", "rho",
                                rho, ev.sum_rate, "closed-form"))
        env = max(ev.sum_rate for ev in evals)
        rows.append(sum_row("fig6:dynamic", "rho", rho, env, "closed-form"))
    return rows


def fig7_rows(trials: int, seed: int) -> list[ResultRow]:
    """Joint optimization vs the static mode and the orthogonal baseline at
    10 dB, versus the equal-split accuracy (bit budget -30 log2(1-rho))."""
    geom = table1_geometry()
    flat_alpha = geom.alpha.ravel()
    M = geom.M
    p_tot = 10.0
    fixed_mode = alloc.TransmissionMode(N=3, K=2)
    fixed_geom = alloc.deal_gains(flat_alpha, fixed_mode, M)
    rows = []
    for rho in _rho_grid(20):
        b_tot = -geom.users * (M - 1) * math.log2(1.0 - rho) if rho > 0 else 0.0
        joint = alloc.joint_optimize(flat_alpha, M, p_tot, b_tot=b_tot)
        rows.append(sum_row("fig7:joint", "rho", rho, joint.best.sum_rate,
                            "closed-form"))
        fixed_plan = alloc.equal_power(fixed_geom, p_tot)
        s = float(closed_form_rates(fixed_geom, rho, fixed_plan).sum())
        rows.append(sum_row("fig7:fixed", "rho", rho, s, "closed-form"))
        tdma = tdma_mrt_baseline(fixed_geom, rho, p_tot, trials, seed)
        err = float(np.sqrt(np.sum(tdma.stderr ** 2)))
        rows.append(sum_row("fig7:tdma-mrt", "rho", rho, tdma.sum_rate,
                            "monte-carlo", trials=trials, stderr=err))
    return rows


_FIG_FNS = {"fig2": fig2_rows, "fig3": fig3_rows, "fig4": fig4_rows,
            "fig5": fig5_rows, "fig6": fig6_rows, "fig7": fig7_rows}

# y column and axis labels for the emitted plot scripts
_FIG_PLOTS = {
    "fig2": ("rate", "SNR (dB)", "average rate (b/s/Hz)"),
    "fig3": ("sum_rate", "SNR (dB)", "sum rate (b/s/Hz)"),
    "fig4": ("sum_rate", "SNR (dB)", "sum rate (b/s/Hz)"),
    "fig5": ("rate", "total feedback bits", "average rate (b/s/Hz)"),
    "fig6": ("sum_rate", "CSI accuracy rho", "sum rate (b/s/Hz)"),
    "fig7": ("sum_rate", "CSI accuracy rho", "sum rate (b/s/Hz)"),
}

_PLOT_TEMPLATE = '''"""Standalone plot for {name}.csv; run it wherever matplotlib is available."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
with open("{name}.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        key = (row["experiment"], row["source"], row["cluster"], row["user"])
        series[key].append((float(row["sweep_value"]), float(row["{ycol}"])))

fig, ax = plt.subplots(figsize=(7, 5))
for key, pts in sorted(series.items()):
    pts.sort()
    label = " ".join(part for part in key if part not in ("0", ""))
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
            markersize=3, label=label)
ax.set_xlabel("{xlabel}")
ax.set_ylabel("{ylabel}")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("{name}.png", dpi=150)
print("wrote {name}.png")
'''


def write_plot_script(out_dir, name: str) -> Path:
    ycol, xlabel, ylabel = _FIG_PLOTS[name]
    path = Path(out_dir) / f"{name}_plot.py"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_PLOT_TEMPLATE.format(name=name, ycol=ycol,
                                          xlabel=xlabel, ylabel=ylabel))
    return path


_PLAIN_FNS = {
    "simulate": cmd_simulate,
    "analytic": cmd_analytic,
    "optimize-power": cmd_optimize_power,
    "optimize-feedback": cmd_optimize_feedback,
    "select-mode": cmd_select_mode,
    "joint": cmd_joint,
}


def run_command(command: str, cfg: ExperimentConfig) -> list[Path]:
    """Execute one CLI command; returns the files written."""
    out_dir = Path(cfg.out_dir)
    with warnings.catch_warnings():
        # equal-power sweeps legitimately produce tied mixture scales;
        # surface the conditioning notice once per run, not per point
        warnings.simplefilter("once", MixtureConditioningWarning)
        if command in _PLAIN_FNS:
            rows = _PLAIN_FNS[command](cfg)
            return [write_rows(out_dir / f"{command}.csv", rows)]
        if command in _FIG_FNS:
            rows = _FIG_FNS[command](cfg.trials, cfg.seed)
            written = [write_rows(out_dir / f"{command}.csv", rows)]
            written.append(write_plot_script(out_dir, command))
            return written
    raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}.")
