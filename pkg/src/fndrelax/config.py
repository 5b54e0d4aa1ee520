"""JSON run configuration with fully populated defaults.

Units are fixed per field and spelled out in the key names (nm, us, M, K,
s).  A user file is deep-merged over :func:`default_config`; unknown keys
are rejected so that typos fail loudly.

Correlation times of the bath species and the kinetics constants are not
measured quantities; they are placeholders chosen so that 10 aM and
100 fM catalyst map to 100 nM and 10 uM radicals.  Override them for any
quantitative use.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

from . import constants as const
from . import kinetics as kin
from .errors import ConfigError, ToolkitError
from .geometry import Dist, SizeDistributions
from .simulate import MODES, ForwardModel, default_sizes
from .spinbath import DEFAULT_SPECIES, REGIONS, NvParams, SpinSpecies

FIG4A_GRID_M = [1e-17, 1e-16, 1e-15, 1e-14, 1e-13]


def _dist_dict(d: Dist):
    out = d.to_dict()
    if math.isinf(out["max"]):
        out["max"] = None
    return out


def default_config():
    sizes = default_sizes()
    k = kin.KineticsParams(c_cat_m=1e-16)
    return {
        "geometry": {
            "core_diameter_nm": _dist_dict(sizes.core_diameter),
            "dense_shell_nm": _dist_dict(sizes.dense_shell),
            "porous_shell_nm": _dist_dict(sizes.porous_shell),
        },
        "species": [sp.to_dict() for sp in DEFAULT_SPECIES.values()],
        "nv": {
            "omega0_rad_s": const.OMEGA0,
            "gamma_rad_s_T": const.GAMMA_E,
            "t1_us": 238.5,
        },
        "bath": {
            "gd_species": "gd3+",
            "gd_regions": ["porous", "exterior"],
            "radical_species": ["oh_radical", "h_radical"],
            "radical_region": "porous",
        },
        "kinetics": {
            "temperature_k": k.temperature_k,
            "alpha": k.alpha,
            "g0_m_per_s": k.g0_m_per_s,
            "k_loss_per_s": k.k_loss_per_s,
            "c_cat_m": k.c_cat_m,
            "barrier_policy": k.barrier_policy,
            "energies": {},
        },
        "simulation": {
            "n_particles": 200,
            "n_mc": 200,
            "photons_per_point": 1e4,
            "mode": "analytic",
            "n_tau": 50,
            "tau_span_t1": 5.0,
            "intrinsic_t1_sd_us": 80.0,
            "intrinsic_t1_min_us": 20.0,
            "intrinsic_t1_max_us": None,
            "sweep_grid_m": list(FIG4A_GRID_M),
            "profile_t_max_s": 10.0,
            "profile_n_t": 101,
            "histogram_bins": 20,
        },
        "seed": None,
        "output_dir": ".",
    }


def _merge(base, user, path=""):
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "energies":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            _merge(base[key], value, where)
        else:
            base[key] = value
    return base


def resolve(user=None):
    """Merge a user config dict over the defaults and validate it."""
    user = copy.deepcopy(user or {})
    cfg = default_config()
    nv_user = user.get("nv", {})
    if "t1_us" in nv_user and "gamma0_per_s" in nv_user:
        raise ConfigError("specify exactly one of nv.t1_us and nv.gamma0_per_s")
    if "gamma0_per_s" in nv_user:
        del cfg["nv"]["t1_us"]
        cfg["nv"]["gamma0_per_s"] = None
    if "species" in user:
        cfg["species"] = user.pop("species")
    _merge(cfg, user)
    RunConfig(cfg).model()  # validation
    return cfg


def load(path):
    try:
        with open(path) as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig(resolve(user))


@dataclass
class RunConfig:
    data: dict

    @property
    def seed(self):
        return self.data.get("seed")

    @property
    def simulation(self):
        return self.data["simulation"]

    def nv_params(self):
        nv = self.data["nv"]
        kw = {"omega0_rad_s": float(nv["omega0_rad_s"]), "gamma_rad_s_T": float(nv["gamma_rad_s_T"])}
        if nv.get("t1_us") is not None:
            return NvParams.from_t1_us(float(nv["t1_us"]), **kw)
        return NvParams(gamma0_per_s=float(nv["gamma0_per_s"]), **kw)

    def model(self) -> ForwardModel:
        try:
            geo = self.data["geometry"]
            sizes = SizeDistributions.from_dict(geo)
            species = {}
            for d in self.data["species"]:
                sp = SpinSpecies.from_dict(d)
                species[sp.name] = sp
            bath = self.data["bath"]
            for name in [bath["gd_species"], *bath["radical_species"]]:
                if name not in species:
                    raise ConfigError(f"bath refers to unknown species {name!r}")
            for region in [*bath["gd_regions"], bath["radical_region"]]:
                if region not in REGIONS:
                    raise ConfigError(f"unknown region {region!r}")
            kinetics = kin.KineticsParams.from_dict(self.data["kinetics"])
            nvp = self.nv_params()
            sim = self.simulation
            mean = nvp.t1_us
            lower = float(sim["intrinsic_t1_min_us"])
            upper = sim["intrinsic_t1_max_us"]
            upper = 2.0 * mean - lower if upper is None else float(upper)
            intrinsic = Dist(mean, float(sim["intrinsic_t1_sd_us"]), lower, upper)
            if sim["mode"] not in MODES:
                raise ConfigError(f"simulation.mode must be one of {MODES}")
            return ForwardModel(sizes, nvp, intrinsic, species, kinetics, bath["gd_species"],
                                tuple(bath["gd_regions"]), tuple(bath["radical_species"]),
                                bath["radical_region"])
        except ConfigError:
            raise
        except (ToolkitError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
