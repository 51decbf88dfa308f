"""JSON configuration for the verification runner."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .decay import NormParams
from .lattice import LatticeError, LatticeSpec
from .scales import Dispersion, ScaleError, ScaleFamily


class ConfigError(ValueError):
    """Raised for unparsable or semantically invalid configurations."""


DEFAULTS = {
    "lattice": {"d": 1, "L0": 4, "Lsp": 2, "dt": 1.0, "dx": 1.0, "nspin": 2},
    # Grassmann suites run on a small companion lattice so they stay exact
    "exact_lattice": {"d": 1, "L0": 2, "Lsp": 1, "dt": 1.0, "dx": 1.0, "nspin": 1},
    # dense kernel suites (norm inequalities) run on a spinless lattice
    "kernel_lattice": {"d": 1, "L0": 4, "Lsp": 2, "dt": 1.0, "dx": 1.0, "nspin": 1},
    "power_counting": {"d": 1, "L0": 1024, "Lsp": 256, "dt": 0.5, "dx": 0.25, "M": 2.0, "mass": 1.0,
                       "mu_F": 1.0, "scales": [1, 2, 3, 4]},
    "scale": {"M": 4.0, "j0": 2, "dispersion": {"kind": "quadratic", "mass": 1.0, "mu_F": 0.5}},
    "interaction": {"kind": "exponential", "strength": 1.0, "range": 1.0, "coupling": 1.0},
    "norm": {"r0": 2, "r": 2, "beta": 1.0, "alpha": 1.0, "b": 1.0, "lam": 0.1, "upsilon": 0.1,
             "epsilon": 1e-3, "epsilonPrime": 1.0, "mu": 1.0, "gamma": 0.1, "gammaPrime": 0.1},
    "samples": {"gaussian_identities": 20, "rg": 10, "kernel_pairs": 25, "mean_zero": 10, "pfaffian": 5},
    "budgets": {"generators": 20, "exact_generators": 12, "seconds": 600.0},
    "output": {"dir": "verify-out", "figure": False},
    "seed": 0,
    "suites": None,
}

SECTIONS = set(DEFAULTS)


@dataclass
class SuiteConfig:
    lattice: LatticeSpec
    exact_lattice: LatticeSpec
    kernel_lattice: LatticeSpec
    power_counting: dict
    scale: dict
    interaction: dict
    norm: dict
    samples: dict
    budgets: dict
    output: dict
    seed: int
    suites: list
    raw: dict = field(default_factory=dict)

    def scale_family(self, lattice: LatticeSpec | None = None) -> ScaleFamily:
        disp = dict(self.scale["dispersion"])
        if "table" in disp and disp["table"] is not None:
            disp["table"] = tuple(disp["table"])
        return ScaleFamily(M=float(self.scale["M"]), j0=int(self.scale["j0"]),
                           lattice=self.lattice if lattice is None else lattice,
                           dispersion=Dispersion(**disp))

    def norm_params(self, rho=None) -> NormParams:
        keys = {"beta", "alpha", "b", "gamma", "gammaPrime", "epsilon", "epsilonPrime", "lam", "upsilon", "mu"}
        kw = {k: float(v) for k, v in self.norm.items() if k in keys}
        return NormParams(rho=rho or {}, **kw)

    @property
    def r0(self) -> int:
        return int(self.norm["r0"])

    @property
    def r(self) -> int:
        return int(self.norm["r"])

    def digest(self) -> str:
        """Hash of the resolved configuration (independent of key order)."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _merge(base: dict, over: dict, path: str, errors: list) -> dict:
    out = dict(base)
    for key, val in over.items():
        if key not in base:
            errors.append(f"{path}{key}: unknown field")
            continue
        if isinstance(base[key], dict) and key != "dispersion":
            if not isinstance(val, dict):
                errors.append(f"{path}{key}: expected an object")
                continue
            out[key] = _merge(base[key], val, f"{path}{key}.", errors)
        elif key == "dispersion":
            if not isinstance(val, dict):
                errors.append(f"{path}{key}: expected an object")
                continue
            out[key] = {**base[key], **val}
        else:
            out[key] = val
    return out


def _lattice(section: dict, name: str, errors: list) -> LatticeSpec | None:
    try:
        return LatticeSpec(d=int(section["d"]), L0=int(section["L0"]), Lsp=int(section["Lsp"]),
                           dt=float(section["dt"]), dx=float(section["dx"]), nspin=int(section["nspin"]))
    except (LatticeError, TypeError, ValueError) as exc:
        errors.append(f"{name}: {exc}")
        return None


def resolve(data: dict, known_suites) -> SuiteConfig:
    """Fill defaults into a parsed JSON object and validate it."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    errors: list[str] = []
    merged = _merge(DEFAULTS, data, "", errors)
    lat = _lattice(merged["lattice"], "lattice", errors)
    exact = _lattice(merged["exact_lattice"], "exact_lattice", errors)
    klat = _lattice(merged["kernel_lattice"], "kernel_lattice", errors)
    pc = merged["power_counting"]
    if not isinstance(pc["scales"], list) or len(pc["scales"]) < 2 or \
            not all(isinstance(j, int) and j >= 1 for j in pc["scales"]):
        errors.append("power_counting.scales: need at least two integer scales >= 1")
    if float(pc["M"]) <= 1:
        errors.append("power_counting.M: scale parameter must exceed 1")

    sc = merged["scale"]
    try:
        if float(sc["M"]) <= 1:
            errors.append("scale.M: scale parameter must exceed 1")
        if int(sc["j0"]) < 1:
            errors.append("scale.j0: must be at least 1")
        Dispersion(**{k: (tuple(v) if k == "table" and v is not None else v) for k, v in sc["dispersion"].items()})
    except (ScaleError, TypeError, ValueError) as exc:
        errors.append(f"scale.dispersion: {exc}")

    nm = merged["norm"]
    for key in ("r0", "r"):
        if not isinstance(nm[key], int) or nm[key] < 0:
            errors.append(f"norm.{key}: must be a nonnegative integer")
    for key in ("beta", "alpha", "b", "lam", "mu"):
        if not isinstance(nm[key], (int, float)) or nm[key] <= 0:
            errors.append(f"norm.{key}: must be positive")

    it = merged["interaction"]
    if it["kind"] not in ("exponential", "local"):
        errors.append(f"interaction.kind: unknown kind {it['kind']!r}")

    for key, val in merged["budgets"].items():
        if not isinstance(val, (int, float)) or val <= 0:
            errors.append(f"budgets.{key}: must be positive")
    for key, val in merged["samples"].items():
        if not isinstance(val, int) or val <= 0:
            errors.append(f"samples.{key}: must be a positive integer")

    seed = merged["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append("seed: must be a nonnegative integer")

    suites = merged["suites"]
    if suites is None:
        suites = list(known_suites)
    elif not isinstance(suites, list):
        errors.append("suites: expected a list of suite ids")
        suites = []
    unknown = [s for s in suites if s not in known_suites]
    for s in unknown:
        errors.append(f"suites: unknown suite id {s!r}")

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    merged["suites"] = list(suites)
    return SuiteConfig(lat, exact, klat, pc, merged["scale"], it, nm, merged["samples"], merged["budgets"],
                       merged["output"], seed, list(suites), merged)


def load_config(path, known_suites=None) -> SuiteConfig:
    if known_suites is None:
        from .suites import SUITES
        known_suites = SUITES
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return resolve(data, known_suites)


def default_config(known_suites=None, **overrides) -> SuiteConfig:
    if known_suites is None:
        from .suites import SUITES
        known_suites = SUITES
    return resolve(dict(overrides), known_suites)


def lattice_dict(lat: LatticeSpec) -> dict:
    d = asdict(lat)
    d.pop("max_sites", None)
    return d
