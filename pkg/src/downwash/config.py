"""Run configuration: one YAML file, strictly validated, plus dotted overrides.

Unknown keys are rejected with the offending path in the message so typos
cannot silently change an experiment.  All randomness derives from the one
global seed through named substreams (dataset:<name>, init:<model>,
train:<model>).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .field import DownwashParams, MergeParams
from .formations import Formation, FormationKind, SweepConfig
from .training import TrainConfig


class ConfigError(Exception):
    """Invalid or unparseable run configuration."""


_MISSING = object()


def _mapping(obj, path: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(obj).__name__}")
    return dict(obj)


def _take(section: dict, path: str, key: str, default=_MISSING):
    if key in section:
        return section.pop(key)
    if default is _MISSING:
        raise ConfigError(f"{path}.{key}: required key missing")
    return default


def _no_leftovers(section: dict, path: str) -> None:
    if section:
        raise ConfigError(f"{path}: unknown key(s) {sorted(section)}")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _number_list(value, path: str) -> list:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _int_list(value, path: str) -> list:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of integers")
    return [_integer(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _kind(value, path: str) -> FormationKind:
    try:
        return FormationKind(_string(value, path))
    except ValueError:
        names = [k.value for k in FormationKind]
        raise ConfigError(f"{path}: unknown formation kind {value!r}, expected one of {names}")


def _oracle(value, path: str) -> str:
    name = _string(value, path)
    if name not in ("additive", "merging"):
        raise ConfigError(f"{path}: oracle must be 'additive' or 'merging', got {name!r}")
    return name


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    formation: Formation
    oracle: str
    sweep: SweepConfig


@dataclass(frozen=True)
class NaiveSettings:
    fit_on: str
    lateral_resolution: tuple = (36, 50)


@dataclass(frozen=True)
class NetSettings:
    train_on: tuple
    hidden: tuple = (64, 64)          # psi hidden sizes (linear model)
    embed_dim: int = 64               # deep set only
    phi_hidden: tuple = (64, 64)
    decoder_hidden: tuple = (64,)


@dataclass(frozen=True)
class EvalSettings:
    formations: tuple
    oracle: str = "merging"
    altitudes: tuple = (1.3,)
    extent: float = 2.0
    resolution: int = 64
    slice_axis: str = "e"
    slice_resolution: int = 201
    contour_resolution: int = 64


@dataclass
class RunConfig:
    seed: int
    output_dir: Path
    field_params: DownwashParams
    merge_params: MergeParams
    sigma_force: float
    sigma_torque: float
    sweep: SweepConfig
    datasets: list
    training: TrainConfig
    naive: NaiveSettings
    linear: NetSettings
    deepset: NetSettings
    evaluation: EvalSettings
    echo: dict = field(default_factory=dict)

    def dataset_spec(self, name: str) -> DatasetSpec:
        for spec in self.datasets:
            if spec.name == name:
                return spec
        raise ConfigError(f"no dataset named {name!r} is configured")


def _parse_sweep(section: dict, path: str, base: SweepConfig | None = None) -> SweepConfig:
    base = base or SweepConfig()
    kwargs = {
        "lateral_extent": base.lateral_extent,
        "vertical_extent": base.vertical_extent,
        "speed": base.speed,
        "legs": base.legs,
        "samples_per_leg": base.samples_per_leg,
        "spacing": base.spacing,
        "altitudes": base.altitudes,
    }
    for key in ("lateral_extent", "vertical_extent", "speed", "spacing"):
        if key in section:
            kwargs[key] = _number(section.pop(key), f"{path}.{key}")
    for key in ("legs", "samples_per_leg"):
        if key in section:
            kwargs[key] = _integer(section.pop(key), f"{path}.{key}")
    if "altitudes" in section:
        kwargs["altitudes"] = tuple(_number_list(section.pop("altitudes"), f"{path}.altitudes"))
    try:
        return SweepConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def _parse_formation(section: dict, path: str, default_spacing: float) -> Formation:
    kind = _kind(_take(section, path, "kind"), f"{path}.kind")
    k = _integer(_take(section, path, "k"), f"{path}.k")
    spacing = _number(_take(section, path, "spacing", default_spacing), f"{path}.spacing")
    try:
        formation = Formation(kind, k, spacing)
        formation.offsets()  # validates kind/k combination
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")
    return formation


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed YAML document into a RunConfig."""
    root = _mapping(doc, "config")
    echo = yaml.safe_load(yaml.safe_dump(root))  # deep copy for report echoing

    seed = _integer(_take(root, "config", "seed", 0), "seed")
    output_dir = Path(_string(_take(root, "config", "output_dir", "runs/out"), "output_dir"))

    fsec = _mapping(_take(root, "config", "field", {}), "field")
    fkw = {}
    for key in (
        "peak_force",
        "core_radius",
        "expansion_rate",
        "vertical_decay_length",
        "torque_gain",
        "lateral_gain",
    ):
        if key in fsec:
            fkw[key] = _number(fsec.pop(key), f"field.{key}")
    _no_leftovers(fsec, "field")
    try:
        field_params = DownwashParams(**fkw)
    except ValueError as exc:
        raise ConfigError(f"field: {exc}")

    msec = _mapping(_take(root, "config", "merge", {}), "merge")
    mkw = {}
    for key in ("merge_radius", "contraction_rate", "advect_gain"):
        if key in msec:
            mkw[key] = _number(msec.pop(key), f"merge.{key}")
    _no_leftovers(msec, "merge")
    try:
        merge_params = MergeParams(**mkw)
    except ValueError as exc:
        raise ConfigError(f"merge: {exc}")

    nsec = _mapping(_take(root, "config", "noise", {}), "noise")
    sigma_force = _number(_take(nsec, "noise", "sigma_force", 0.025), "noise.sigma_force")
    sigma_torque = _number(_take(nsec, "noise", "sigma_torque", 0.005), "noise.sigma_torque")
    _no_leftovers(nsec, "noise")
    if sigma_force < 0 or sigma_torque < 0:
        raise ConfigError("noise: sigmas must be >= 0")

    swsec = _mapping(_take(root, "config", "sweep", {}), "sweep")
    sweep = _parse_sweep(swsec, "sweep")
    _no_leftovers(swsec, "sweep")

    dsecs = _take(root, "config", "datasets", [])
    if not isinstance(dsecs, list):
        raise ConfigError("datasets: expected a list")
    datasets = []
    seen = set()
    for i, entry in enumerate(dsecs):
        path = f"datasets[{i}]"
        sec = _mapping(entry, path)
        name = _string(_take(sec, path, "name"), f"{path}.name")
        if name in seen:
            raise ConfigError(f"{path}.name: duplicate dataset name {name!r}")
        seen.add(name)
        oracle = _oracle(_take(sec, path, "oracle", "merging"), f"{path}.oracle")
        formation = _parse_formation(
            {"kind": _take(sec, path, "kind"), "k": _take(sec, path, "k"),
             **({"spacing": sec.pop("spacing")} if "spacing" in sec else {})},
            path,
            sweep.spacing,
        )
        ds_sweep = _parse_sweep(sec, path, base=sweep)
        _no_leftovers(sec, path)
        datasets.append(DatasetSpec(name=name, formation=formation, oracle=oracle, sweep=ds_sweep))

    tsec = _mapping(_take(root, "config", "training", {}), "training")
    tkw = {}
    for key in ("learning_rate", "beta1", "beta2", "epsilon", "sigma_floor"):
        if key in tsec:
            tkw[key] = _number(tsec.pop(key), f"training.{key}")
    for key in ("batch_size", "epochs"):
        if key in tsec:
            tkw[key] = _integer(tsec.pop(key), f"training.{key}")
    _no_leftovers(tsec, "training")
    try:
        training = TrainConfig(**tkw)
    except ValueError as exc:
        raise ConfigError(f"training: {exc}")

    modsec = _mapping(_take(root, "config", "models", {}), "models")

    nasec = _mapping(_take(modsec, "models", "naive", {}), "models.naive")
    naive = NaiveSettings(
        fit_on=_string(_take(nasec, "models.naive", "fit_on", "single_k1"), "models.naive.fit_on"),
        lateral_resolution=tuple(
            _int_list(_take(nasec, "models.naive", "resolution", [36, 50]), "models.naive.resolution")
        ),
    )
    if len(naive.lateral_resolution) != 2:
        raise ConfigError("models.naive.resolution: expected [n_cells, e_cells]")
    _no_leftovers(nasec, "models.naive")

    lsec = _mapping(_take(modsec, "models", "linear", {}), "models.linear")
    linear = NetSettings(
        train_on=tuple(
            _string(v, f"models.linear.train_on[{i}]")
            for i, v in enumerate(_take(lsec, "models.linear", "train_on", ["single_k1"]))
        ),
        hidden=tuple(_int_list(_take(lsec, "models.linear", "hidden", [64, 64]), "models.linear.hidden")),
    )
    _no_leftovers(lsec, "models.linear")

    dsec = _mapping(_take(modsec, "models", "deepset", {}), "models.deepset")
    deepset = NetSettings(
        train_on=tuple(
            _string(v, f"models.deepset.train_on[{i}]")
            for i, v in enumerate(_take(dsec, "models.deepset", "train_on", ["leader_follower_k3"]))
        ),
        embed_dim=_integer(_take(dsec, "models.deepset", "embed_dim", 64), "models.deepset.embed_dim"),
        phi_hidden=tuple(
            _int_list(_take(dsec, "models.deepset", "phi_hidden", [64, 64]), "models.deepset.phi_hidden")
        ),
        decoder_hidden=tuple(
            _int_list(
                _take(dsec, "models.deepset", "decoder_hidden", [64]), "models.deepset.decoder_hidden"
            )
        ),
    )
    _no_leftovers(dsec, "models.deepset")
    _no_leftovers(modsec, "models")

    esec = _mapping(_take(root, "config", "eval", {}), "eval")
    eforms = _take(esec, "eval", "formations", [{"kind": "leader_follower", "k": 3}])
    if not isinstance(eforms, list) or not eforms:
        raise ConfigError("eval.formations: expected a non-empty list")
    formations = tuple(
        _parse_formation(_mapping(entry, f"eval.formations[{i}]"), f"eval.formations[{i}]", sweep.spacing)
        for i, entry in enumerate(eforms)
    )
    evaluation = EvalSettings(
        formations=formations,
        oracle=_oracle(_take(esec, "eval", "oracle", "merging"), "eval.oracle"),
        altitudes=tuple(_number_list(_take(esec, "eval", "altitudes", [1.3]), "eval.altitudes")),
        extent=_number(_take(esec, "eval", "extent", 2.0), "eval.extent"),
        resolution=_integer(_take(esec, "eval", "resolution", 64), "eval.resolution"),
        slice_axis=_string(_take(esec, "eval", "slice_axis", "e"), "eval.slice_axis"),
        slice_resolution=_integer(
            _take(esec, "eval", "slice_resolution", 201), "eval.slice_resolution"
        ),
        contour_resolution=_integer(
            _take(esec, "eval", "contour_resolution", 64), "eval.contour_resolution"
        ),
    )
    if evaluation.slice_axis not in ("n", "e"):
        raise ConfigError("eval.slice_axis: must be 'n' or 'e'")
    if evaluation.resolution < 8:
        raise ConfigError("eval.resolution: must be >= 8")
    _no_leftovers(esec, "eval")

    _no_leftovers(root, "config")
    return RunConfig(
        seed=seed,
        output_dir=output_dir,
        field_params=field_params,
        merge_params=merge_params,
        sigma_force=sigma_force,
        sigma_torque=sigma_torque,
        sweep=sweep,
        datasets=datasets,
        training=training,
        naive=naive,
        linear=linear,
        deepset=deepset,
        evaluation=evaluation,
        echo=echo,
    )


def apply_override(doc: dict, assignment: str) -> None:
    """Apply one ``section.key=value`` override; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
    dotted, raw = assignment.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty key path")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {assignment!r}: cannot parse value ({exc})")
    node = doc
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = node[key] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {assignment!r}: {key} is not a mapping")
        node = nxt
    node[keys[-1]] = value


def load_config(path, overrides=(), seed=None, output_dir=None) -> RunConfig:
    """Read, override and validate a YAML run configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}")
    doc = _mapping(doc, "config")
    for assignment in overrides:
        apply_override(doc, assignment)
    if seed is not None:
        doc["seed"] = seed
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    return parse_config(doc)
