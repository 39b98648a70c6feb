"""Run configuration: a TOML file with sections ``[utility]``, ``[market]``,
``[penalty]``, ``[grid]``, ``[mc]`` and ``[output]``.

Every key is validated; unknown sections or keys are rejected with the
offending name so typos cannot silently fall back to defaults.  All
module-level invariants (positive prices, probability normalization, grid
sanity, CFL substep bounds) are enforced when the configured objects are
built.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .market import JumpDistribution, MarketParams, PenaltyModel
from .solver import Grid
from .utility import UtilityModel, utility_from_dict

__all__ = ["RunConfig", "load_config"]

_MARKET_KEYS = {"x0", "q0", "T", "K", "lambda", "mu_hat", "sigma_hat",
                "nu_sizes", "nu_probs"}
_GRID_KEYS = {"x_min", "x_max", "q_max", "nt", "nx", "nk", "substeps"}
_MC_KEYS = {"paths", "seed", "dt"}
_OUTPUT_KEYS = {"dir"}


@dataclass
class RunConfig:
    """Fully validated run configuration."""

    utility: UtilityModel
    params: MarketParams
    penalty: PenaltyModel
    grid: Grid
    substeps: int | None = None     # None = automatic CFL substepping
    n_paths: int = 1000
    seed: int = 0
    sim_dt: float | None = None     # None = T/100
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {"utility", "market", "penalty", "grid", "mc", "output"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config section(s): {sorted(unknown)}")

        usec = dict(data.get("utility", {}))
        try:
            utility = utility_from_dict(usec)
        except Exception as exc:
            raise ConfigurationError(f"[utility]: {exc}") from exc

        msec = dict(data.get("market", {}))
        bad = set(msec) - _MARKET_KEYS
        if bad:
            raise ConfigurationError(f"unknown [market] key(s): {sorted(bad)}")
        jumps = JumpDistribution(
            sizes=tuple(msec.get("nu_sizes", (2.0, -2.0))),
            probs=tuple(msec.get("nu_probs", (0.5, 0.5))))
        params = MarketParams(
            x0=float(msec.get("x0", 100.0)), q0=float(msec.get("q0", 10.0)),
            T=float(msec.get("T", 1.0)), K=float(msec.get("K", 5.0)),
            lam=float(msec.get("lambda", 2.0)), jumps=jumps,
            mu_hat=float(msec.get("mu_hat", 0.0)),
            sigma_hat=float(msec.get("sigma_hat", 0.2)))

        psec = dict(data.get("penalty", {}))
        bad = set(psec) - {"eta"}
        if bad:
            raise ConfigurationError(f"unknown [penalty] key(s): {sorted(bad)}")
        penalty = PenaltyModel(utility=utility, eta=float(psec.get("eta", 0.5)))

        gsec = dict(data.get("grid", {}))
        bad = set(gsec) - _GRID_KEYS
        if bad:
            raise ConfigurationError(f"unknown [grid] key(s): {sorted(bad)}")
        substeps = gsec.pop("substeps", None)
        if substeps is not None:
            substeps = int(substeps)
            if substeps < 1:
                raise ConfigurationError("grid.substeps must be >= 1")
        base = Grid.from_params(params,
                                nt=int(gsec.get("nt", 20)),
                                nx=int(gsec.get("nx", 30)),
                                nk=int(gsec.get("nk", 30)))
        grid = Grid(T=params.T, K=params.K,
                    x_min=float(gsec.get("x_min", base.x_min)),
                    x_max=float(gsec.get("x_max", base.x_max)),
                    q_max=float(gsec.get("q_max", base.q_max)),
                    nt=base.nt, nx=base.nx, nk=base.nk)

        csec = dict(data.get("mc", {}))
        bad = set(csec) - _MC_KEYS
        if bad:
            raise ConfigurationError(f"unknown [mc] key(s): {sorted(bad)}")
        osec = dict(data.get("output", {}))
        bad = set(osec) - _OUTPUT_KEYS
        if bad:
            raise ConfigurationError(f"unknown [output] key(s): {sorted(bad)}")

        return cls(utility=utility, params=params, penalty=penalty, grid=grid,
                   substeps=substeps,
                   n_paths=int(csec.get("paths", 1000)),
                   seed=int(csec.get("seed", 0)),
                   sim_dt=float(csec["dt"]) if "dt" in csec else None,
                   out_dir=str(osec.get("dir", "out")),
                   raw=data)

    @classmethod
    def from_toml(cls, path: str) -> "RunConfig":
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(data)


def load_config(path: str | None) -> RunConfig:
    """Load a config file, or the all-defaults configuration when absent."""
    if path is None:
        return RunConfig.from_dict({})
    return RunConfig.from_toml(path)
