import logging
from dataclasses import dataclass
from pathlib import Path

from dotenv import dotenv_values
from pydantic import ValidationError

from bgslab.config import settings
from bgslab.core.errors import ConfigurationError
from bgslab.schemas.layout import SkeletonOptions
from bgslab.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

COMMANDS = ("heatmap", "kappa", "glued-kappa", "monomial-kappa")

# config key -> RunConfig field
_TOP_LEVEL = {
    "dims": "dims",
    "mats": "matrices",
    "skels": "skeletons",
    "muscs": "muscles",
    "seed": "seed",
    "out": "output_dir",
    "format": "formats",
    "exps": "sweep",
    "metrics": "metrics",
    "workers": "workers",
}
# config key -> SkeletonOptions field
_OPTIONS = {
    "rpltol": "rpltol",
    "t_fix": "t_fix",
    "reorth_first": "reorth_first_block",
    "auto_shift": "auto_shift",
    "convert_t_form": "convert_t_form",
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


@dataclass(frozen=True, slots=True)
class Preset:
    name: str
    command: str
    description: str
    values: dict[str, str]


_HEATMAP_SKELS = "BCGS,BCGS_IRO,BCGS_SROR,BCGS_IRO_LS,BMGS,BMGS_SVL,BMGS_CWY"
_HEATMAP_MUSCS = "CGS,CGS_IRO,CGS_SRO,CGS_SROR,CGS_IRO_LS,MGS,MGS_SVL,MGS_CWY,HouseQR,CholQR,CholQR_RO,Sh_CholQR_RORO"
_T_MUSCS = "MGS,MGS_SVL,MGS_LTS,MGS_CWY,MGS_ICWY,HouseQR"

PRESETS: dict[str, Preset] = {
    preset.name: preset
    for preset in (
        Preset(
            "heatmaps",
            "heatmap",
            "skeleton x muscle heatmaps over every test matrix",
            {
                "dims": "1000,10,5",
                "mats": "rand_uniform,rand_normal,rank_def,laeuchli,monomial,stewart,stewart_extreme,s_step,newton",
                "skels": _HEATMAP_SKELS,
                "muscs": _HEATMAP_MUSCS,
                "rpltol": "100",
            },
        ),
        Preset("cgs-p", "glued-kappa", "column-wise CGS against CGS_P", {"dims": "1000,40,5", "exps": "1:8", "skels": "none", "muscs": "CGS,CGS_P"}),
        Preset(
            "bcgs-p",
            "glued-kappa",
            "Pythagorean variants of BCGS",
            {"dims": "1000,25,4", "exps": "1:8", "skels": "BCGS,BCGS_PIP,BCGS_PIO", "muscs": "HouseQR", "metrics": "loo,rel_chol_res"},
        ),
        Preset("bcgs-iro", "kappa", "BCGS_IRO next to BCGS and BMGS", {"dims": "100,20,2", "exps": "1:16", "skels": "BCGS,BMGS,BCGS_IRO", "muscs": "CGS,MGS,HouseQR"}),
        Preset(
            "bcgs-iro-ls",
            "kappa",
            "low-sync BCGS_IRO",
            {"dims": "100,20,2", "exps": "1:16", "skels": "BCGS,BCGS_IRO,BCGS_IRO_LS", "muscs": "CGS,CGS_IRO,CGS_IRO_LS", "metrics": "loo,rel_chol_res"},
        ),
        Preset(
            "bcgs-iro-ls-monomial",
            "monomial-kappa",
            "low-sync BCGS_IRO on monomial matrices",
            {"dims": "1000,60,2", "exps": "2:2:12", "skels": "BCGS,BCGS_IRO,BCGS_IRO_LS", "muscs": "CGS,CGS_IRO,CGS_IRO_LS", "metrics": "loo,rel_chol_res"},
        ),
        Preset("bmgs", "kappa", "BMGS with plain and reorthogonalized muscles", {"dims": "100,20,2", "exps": "1:16", "skels": "BMGS", "muscs": "CGS,MGS,CGS_RO,MGS_RO,CholQR,CholQR_RO,HouseQR"}),
        Preset("mgs-t", "kappa", "column-wise MGS with T-correction variants", {"dims": "1000,20,1", "exps": "1:16", "skels": "none", "muscs": "MGS,MGS_SVL,MGS_LTS,MGS_CWY,MGS_ICWY"}),
        Preset("bmgs-t", "kappa", "BMGS with T-correction skeletons", {"dims": "100,20,2", "exps": "1:16", "skels": "BMGS,BMGS_SVL,BMGS_CWY", "muscs": _T_MUSCS}),
        Preset("bmgs-t-monomial", "monomial-kappa", "BMGS T-correction skeletons on monomial matrices", {"dims": "1000,60,2", "exps": "2:2:12", "skels": "BMGS,BMGS_SVL,BMGS_CWY", "muscs": _T_MUSCS}),
    )
}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat KEY=value file; keys are case-insensitive and '-'/'_' interchangeable."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for key, value in dotenv_values(path, encoding="utf-8").items():
        name = normalize_key(key)
        if name not in _TOP_LEVEL and name not in _OPTIONS:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        values[name] = "" if value is None else value
    logger.debug("loaded %s keys from %s", len(values), path)
    return values


def get_preset(name: str) -> Preset:
    preset = PRESETS.get(normalize_key(name).replace("_", "-"))
    if preset is None:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return preset


def _as_bool(key: str, value: object) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigurationError(f"{key} must be a boolean, got {value!r}")


def build_run_config(
    command: str,
    *,
    preset: str | None = None,
    config_file: str | Path | None = None,
    overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Merge Settings defaults < preset < config file < explicit overrides into a RunConfig."""
    merged: dict[str, object] = {}
    if preset:
        chosen = get_preset(preset)
        if chosen.command != command:
            raise ConfigurationError(f"preset {chosen.name!r} belongs to the {chosen.command!r} command, not {command!r}")
        merged.update(chosen.values)
    if config_file:
        merged.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[normalize_key(key)] = value

    fields: dict[str, object] = {}
    option_fields: dict[str, object] = {"rpltol": settings.DEFAULT_RPLTOL}
    for key, value in merged.items():
        if key in _TOP_LEVEL:
            fields[_TOP_LEVEL[key]] = value
        elif key in _OPTIONS:
            name = _OPTIONS[key]
            option_fields[name] = value if name == "rpltol" else _as_bool(key, value)
        else:
            raise ConfigurationError(f"unknown option {key!r}")

    try:
        fields["options"] = SkeletonOptions(**option_fields)
        return RunConfig(**fields)
    except (ValidationError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def preset_command_line(preset: Preset) -> str:
    flags = " ".join(f"--{key.replace('_', '-')} {value}" for key, value in preset.values.items())
    return f"python -m bgslab {preset.command} {flags}"
