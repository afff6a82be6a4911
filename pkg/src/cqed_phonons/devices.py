"""Device presets and parameter sweeps of the source figures of merit.

Each sweep point is an independent call to
:func:`cqed_phonons.source.full_spectrum_indistinguishability`; points are
dispatched to a process pool and collected in grid order, so a sweep is a
pure function of its inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from cqed_phonons.phonons import PhononBath, QDParams
from cqed_phonons.purcell import CavityParams, StrongCouplingWarning
from cqed_phonons.source import full_spectrum_indistinguishability

COLUMNS = ("swept_value", "I_full", "I_zpl", "eta_zpl", "eta_zpl_cav", "F_eff", "beta",
           "gamma_star", "status")
FIGURES = COLUMNS[1:-1]
PARAMETERS = ("temperature", "kappa", "detuning", "purcell")
CONSTRAINTS = ("none", "fixed_nominal_purcell")
DEPHASING = ("full", "zero")


@dataclass(frozen=True)
class DeviceConfig:
    """A dot-cavity device; ``fss`` (ueV) is recorded but not simulated."""

    name: str
    cavity: CavityParams
    qd: QDParams = field(default_factory=QDParams)
    bath: PhononBath = field(default_factory=PhononBath)
    fss: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceConfig":
        return cls(
            name=d["name"],
            cavity=CavityParams(**d["cavity"]),
            qd=QDParams(**d.get("qd", {})),
            bath=PhononBath(**d.get("bath", {})),
            fss=d.get("fss", 0.0),
        )


PRESETS = {
    "device1": DeviceConfig("device1", CavityParams(g=19.0, kappa=90.0, delta_EM=80.0,
                                                    split_modes=True), fss=3.0),
    "device2": DeviceConfig("device2", CavityParams(g=12.0, kappa=110.0, delta_EM=-40.0,
                                                    split_modes=True), fss=10.0),
    "bulk": DeviceConfig("bulk", CavityParams(g=0.0, kappa=90.0)),
}


def preset(name: str) -> DeviceConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown device preset {name!r}; choose from {sorted(PRESETS)}") from None


def without_mode_splitting(device: DeviceConfig) -> DeviceConfig:
    """Same device with a single mode resonant with the dot (full ``g``)."""
    cav = replace(device.cavity, delta_EM=0.0, split_modes=False)
    return replace(device, name=f"{device.name}-single-mode", cavity=cav)


def coupling_for_purcell(F: float, kappa: float, qd: QDParams) -> float:
    """g giving nominal Purcell factor ``F`` at linewidth ``kappa``."""
    return math.sqrt(F * kappa * qd.linewidth) / 2


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep over a linear grid.

    Parameters
    ----------
    parameter : {"temperature", "kappa", "detuning", "purcell"}
        Swept quantity; units K, ueV, ueV and dimensionless respectively.
    start, stop, num
        Grid ``linspace(start, stop, num)``.
    constraint : {"none", "fixed_nominal_purcell"}
        With ``fixed_nominal_purcell`` the coupling is reset to give
        ``nominal_purcell`` at every point (kappa and detuning sweeps).
    dephasing : {"full", "zero"}
        Thermal pure dephasing on, or the gamma* = 0 counterfactual.
    temperature : float
        Bath temperature (K) for sweeps over other parameters.
    n_points, lifetimes : int, float
        Size and span of the t and tau grids of the zero-phonon solver.
    """

    parameter: str
    start: float
    stop: float
    num: int
    constraint: str = "none"
    dephasing: str = "full"
    temperature: float = 4.0
    nominal_purcell: float = 24.0
    n_points: int = 600
    lifetimes: float = 12.0

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ValueError(f"parameter must be one of {PARAMETERS}, got {self.parameter!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        if self.dephasing not in DEPHASING:
            raise ValueError(f"dephasing must be one of {DEPHASING}, got {self.dephasing!r}")
        if not (isinstance(self.num, (int, np.integer)) and self.num >= 2):
            raise ValueError(f"num must be an integer >= 2, got {self.num!r}")
        if not self.stop > self.start:
            raise ValueError("grid must be strictly increasing (stop > start)")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (isinstance(self.n_points, (int, np.integer)) and self.n_points >= 50):
            raise ValueError(f"n_points must be an integer >= 50, got {self.n_points!r}")
        if not self.lifetimes >= 5:
            raise ValueError(f"lifetimes must be >= 5, got {self.lifetimes!r}")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)

    def to_dict(self) -> dict:
        return asdict(self)


def point_device(device: DeviceConfig, spec: SweepSpec, x: float) -> tuple[CavityParams, float]:
    """Cavity and temperature at sweep value ``x``."""
    cav, T = device.cavity, spec.temperature
    if spec.parameter == "temperature":
        T = x
    elif spec.parameter == "kappa":
        cav = replace(cav, kappa=x)
    elif spec.parameter == "detuning":
        cav = replace(cav, delta=x)
    elif spec.parameter == "purcell":
        cav = replace(cav, g=coupling_for_purcell(x, cav.kappa, device.qd))
    if spec.constraint == "fixed_nominal_purcell" and spec.parameter != "purcell":
        cav = replace(cav, g=coupling_for_purcell(spec.nominal_purcell, cav.kappa, device.qd))
    return cav, T


def _evaluate(args) -> dict:
    device, spec, x = args
    row = {"swept_value": float(x)}
    try:
        cav, T = point_device(device, spec, x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StrongCouplingWarning)
            fig = full_spectrum_indistinguishability(cav, device.qd, device.bath, T,
                                                     dephasing=spec.dephasing == "full",
                                                     n_points=spec.n_points,
                                                     lifetimes=spec.lifetimes)
        row.update({k: float(v) for k, v in fig.as_dict().items()})
        row["status"] = "ok"
    except Exception as exc:  # recorded in-row; a sweep never aborts
        row.update({k: math.nan for k in FIGURES})
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    return row


@dataclass(frozen=True)
class SweepResult:
    device: DeviceConfig
    spec: SweepSpec
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def ok(self) -> bool:
        return all(r["status"] == "ok" for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([repr(r[c]) if c != "status" else r[c] for c in COLUMNS])
        return buf.getvalue()

    def provenance(self) -> dict:
        from cqed_phonons import __version__
        return {"package_version": __version__, "device": self.device.to_dict(),
                "sweep": self.spec.to_dict()}


def run_sweep(device: DeviceConfig, spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Evaluate the figures of merit at every grid point.

    Parameters
    ----------
    jobs : int
        Worker processes; 1 evaluates in-process.

    Per-point failures become rows with NaN figures and an ``error: ...``
    status.
    """
    tasks = [(device, spec, float(x)) for x in spec.grid]
    if jobs <= 1:
        rows = [_evaluate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate, tasks))
    return SweepResult(device, spec, tuple(rows))


@dataclass(frozen=True)
class Counterfactual:
    full: SweepResult
    zero: SweepResult

    @property
    def ratio(self) -> np.ndarray:
        """I_full with dephasing over I_full without; isolates the dephasing penalty."""
        return self.full.column("I_full") / self.zero.column("I_full")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["swept_value", "I_full", "I_full_zero_dephasing", "ratio", "status"])
        for a, b, q in zip(self.full.rows, self.zero.rows, self.ratio):
            status = a["status"] if a["status"] != "ok" else b["status"]
            w.writerow([repr(a["swept_value"]), repr(a["I_full"]), repr(b["I_full"]), repr(float(q)),
                        status])
        return buf.getvalue()

    def provenance(self) -> dict:
        meta = self.full.provenance()
        meta["sweep"] = {**meta["sweep"], "dephasing": ["full", "zero"]}
        return meta


def counterfactual_curves(device: DeviceConfig, spec: SweepSpec, jobs: int = 1) -> Counterfactual:
    """The sweep with thermal dephasing and with gamma* = 0."""
    return Counterfactual(run_sweep(device, replace(spec, dephasing="full"), jobs),
                          run_sweep(device, replace(spec, dephasing="zero"), jobs))


def measured_indistinguishability() -> list[dict]:
    """Measured values quoted in the source text, for plot overlays only."""
    text = resources.files("cqed_phonons.data").joinpath("measured_indistinguishability.csv").read_text()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_sweep(result, path_csv, sidecar: dict | None = None) -> None:
    """Write the CSV and a ``<stem>.config.json`` provenance sidecar next to it."""
    from pathlib import Path
    p = Path(path_csv)
    p.write_text(result.to_csv())
    meta = result.provenance() if sidecar is None else sidecar
    p.with_suffix(".config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


__all__ = [
    "COLUMNS", "Counterfactual", "DeviceConfig", "PRESETS", "SweepResult", "SweepSpec",
    "counterfactual_curves", "coupling_for_purcell", "measured_indistinguishability",
    "point_device", "preset", "run_sweep", "without_mode_splitting", "write_sweep",
]
