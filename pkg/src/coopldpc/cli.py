"""Command-line experiment driver.

Every run is described by an :class:`ExperimentConfig`, assembled from an
optional ``key = value`` file and command-line flags of the same names
(flags win).  Results go to CSV with the resolved configuration and a
content hash of the code or ensemble in ``#`` header lines, so a CSV is
reproducible from its own header.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import SCENARIO_OFFSETS, Links
from .construction import CodeSpec, ConstructionFailed, assemble, load_code, round_length, save_code
from .degree import PRESETS, Ensemble, get_preset

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run", "main"]

MODES = ("outage", "de-threshold", "de-wer", "simulate", "build-code")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file line and/or field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass
class ExperimentConfig:
    mode: str = ""
    seed: int | None = None
    preset: str = "scenario1"
    ensemble_file: str = ""
    code_dir: str = ""
    snr_start: float = 0.0
    snr_stop: float = 40.0
    snr_step: float = 2.0
    interuser_offset: float | None = None
    partner_offset: float | None = None
    rate: float | None = None
    beta: float | None = None
    N: int = 2400
    code_seed: int = 0
    remove_4cycles: bool = True
    n_trials: int = 1_000_000
    outage_method: str = "conditional"
    n_fading: int = 10_000
    population: int = 20_000
    tol_db: float = 0.05
    n_blocks: int = 1000
    max_iter: int = 100
    output: str = "-"

    def snr_grid(self) -> np.ndarray:
        n = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return np.round(self.snr_start + self.snr_step * np.arange(n), 10)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"field 'mode': expected one of {', '.join(MODES)}, got {self.mode!r}", "mode")
        if self.seed is None:
            raise ConfigError("field 'seed': an explicit seed is required", "seed")
        if not self.ensemble_file and not self.code_dir and self.preset not in PRESETS:
            raise ConfigError(f"field 'preset': unknown preset {self.preset!r}", "preset")
        if self.mode != "build-code" and self.mode != "de-threshold":
            if self.snr_step <= 0 or self.snr_stop < self.snr_start:
                raise ConfigError("fields 'snr_start/snr_stop/snr_step': grid is empty")
        for name in ("interuser_offset", "partner_offset"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ConfigError(f"field {name!r}: offset must be finite", name)
        for name in ("N", "n_trials", "n_fading", "population", "n_blocks", "max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"field {name!r}: must be positive", name)
        if self.outage_method not in ("direct", "conditional"):
            raise ConfigError(f"field 'outage_method': unknown method {self.outage_method!r}", "outage_method")
        if self.rate is not None and not 0 < self.rate < 1:
            raise ConfigError("field 'rate': must lie in (0, 1)", "rate")
        if self.beta is not None and not 0 < self.beta < 1:
            raise ConfigError("field 'beta': must lie in (0, 1)", "beta")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(name: str, text: str):
    kind = _FIELDS[name].type
    text = text.strip()
    if "None" in kind and text.lower() in ("", "none"):
        return None
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(Fraction(text)) if "/" in text else float(text)
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def parse_config_text(text: str, source: str = "<config>", lines: dict | None = None) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``lines``, if given, receives the line number of each key.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown field {key!r}")
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: field {key!r}: {exc}") from None
        if lines is not None:
            lines[key] = f"{source}:{lineno}"
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values, where = {}, {}
    if path is not None:
        p = Path(path)
        values.update(parse_config_text(p.read_text(), str(p), where))
    for key in overrides or {}:
        where[key] = "--" + key.replace("_", "-")
    values.update(overrides or {})
    cfg = ExperimentConfig(**values)
    try:
        cfg.validate()
    except ConfigError as exc:
        if exc.field in where:
            raise ConfigError(f"{where[exc.field]}: {exc}", exc.field) from None
        raise
    return cfg


# --- resolution --------------------------------------------------------------------

@dataclass
class _Resolved:
    cfg: ExperimentConfig
    ensemble: Ensemble | None
    code: object = None
    notes: list = dataclasses.field(default_factory=list)

    def rate(self) -> float:
        if self.cfg.rate is not None:
            return self.cfg.rate
        if self.code is not None:
            return float(self.code.Rc)
        return float(self.ensemble.nominal_subcode_rate()) * (1 - self.beta())

    def beta(self) -> float:
        return self.cfg.beta if self.cfg.beta is not None else 0.5

    def links_at(self, snr_db: float) -> Links:
        return Links.from_offsets(snr_db, self.cfg.interuser_offset, self.cfg.partner_offset)

    def content_hash(self) -> str:
        if self.code is not None:
            return self.code.manifest_hash()
        blob = json.dumps(self.ensemble.manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _resolve(cfg: ExperimentConfig) -> _Resolved:
    cfg = dataclasses.replace(cfg)
    code = None
    if cfg.code_dir and cfg.mode != "build-code":
        code = load_code(cfg.code_dir)
        ens = code.ensemble
        cfg.N = code.N
    elif cfg.ensemble_file:
        ens = Ensemble.from_text(Path(cfg.ensemble_file).read_text(), name=Path(cfg.ensemble_file).stem)
    else:
        ens = get_preset(cfg.preset)
    default_offsets = SCENARIO_OFFSETS.get(cfg.preset, (0.0, 0.0))
    if cfg.interuser_offset is None:
        cfg.interuser_offset = default_offsets[0]
    if cfg.partner_offset is None:
        cfg.partner_offset = default_offsets[1]
    res = _Resolved(cfg, ens, code)
    if cfg.mode in ("simulate", "build-code") and code is None:
        spec = CodeSpec(ens, cfg.N, seed=cfg.code_seed, remove_4cycles=cfg.remove_4cycles)
        n = round_length(cfg.N, spec.rate1())
        if n != cfg.N:
            res.notes.append(f"N rounded from {cfg.N} to {n}")
            cfg.N = n
        res.code = assemble(dataclasses.replace(spec, N=n))
    if res.rate() >= min(res.beta(), 1 - res.beta()) and cfg.mode in ("outage", "de-wer"):
        res.notes.append("rate >= min(beta, 1-beta): diversity 2 is not available")
    if cfg.rate is None:
        cfg.rate = res.rate()
    if cfg.beta is None:
        cfg.beta = res.beta()
    return res


# --- modes -------------------------------------------------------------------------

def _ebn0(snr_db, rate):
    return float(snr_db - 10.0 * np.log10(rate))


def _run_outage(r: _Resolved):
    from .outage import OutageScenario, outage_probability

    cfg = r.cfg
    rows = []
    for i, snr in enumerate(cfg.snr_grid()):
        sc = OutageScenario(cfg.rate, cfg.beta, r.links_at(snr))
        p, (lo, hi) = outage_probability(sc, cfg.n_trials, cfg.seed, key=(i,), method=cfg.outage_method)
        rows.append({"snr_db": float(snr), "ebn0_db": _ebn0(snr, cfg.rate), "p_out": p,
                     "ci_low": lo, "ci_high": hi, "n_trials": cfg.n_trials})
    return rows


def _run_de_threshold(r: _Resolved):
    from .density import de_threshold
    from .outage import bpsk_mi_inverse

    cfg = r.cfg
    ens = r.ensemble
    thr = de_threshold(ens.lam1, ens.rho1, tol_db=cfg.tol_db, seed=cfg.seed, population=cfg.population)
    cap = 10 * np.log10(bpsk_mi_inverse(ens.subcode_rate))
    return [{"subcode_rate": ens.subcode_rate, "threshold_db": thr,
             "threshold_ebn0_db": _ebn0(thr, ens.subcode_rate), "capacity_db": float(cap),
             "tol_db": cfg.tol_db, "population": cfg.population}]


def _run_de_wer(r: _Resolved):
    from .density import de_wer

    cfg = r.cfg
    rows = de_wer(r.ensemble, r.links_at, cfg.snr_grid(), cfg.n_fading, cfg.seed,
                  population=cfg.population, tol_db=cfg.tol_db)
    for row in rows:
        row["ebn0_db"] = _ebn0(row["snr_db"], cfg.rate)
    return [{k: row[k] for k in ("snr_db", "ebn0_db", "wer", "ci_low", "ci_high", "n_fading",
                                 "population", "iterations_mean")} for row in rows]


def _run_simulate(r: _Resolved):
    from .protocol import CooperationSimulator, wilson_interval

    cfg = r.cfg
    sim = CooperationSimulator(r.code, max_iter=cfg.max_iter)
    rows = []
    for i, snr in enumerate(cfg.snr_grid()):
        res = sim.simulate(r.links_at(snr), cfg.n_blocks, cfg.seed, key=(i,))
        errors = res.errors1 + res.errors2
        lo, hi = wilson_interval(errors, 2 * res.blocks)
        rows.append({
            "snr_db": float(snr), "ebn0_db": _ebn0(snr, float(r.code.Rc)), "N": r.code.N,
            "wer": errors / (2 * res.blocks), "ci_low": lo, "ci_high": hi,
            "wer1": res.wer1, "wer2": res.wer2, "blocks": res.blocks,
            "errors1": res.errors1, "errors2": res.errors2,
            **{f"case{c}": int(res.case_counts[c]) for c in range(1, 5)},
            "iterations_mean": res.iterations / (2 * res.blocks),
        })
    return rows


def _run_build_code(r: _Resolved):
    cfg = r.cfg
    out = cfg.code_dir or (cfg.output if cfg.output != "-" else "")
    if not out:
        raise ConfigError("field 'code_dir': build-code needs an output directory")
    save_code(r.code, out)
    c = r.code
    return [{"N": c.N, "K": c.K, "R1": str(c.R1), "Rc": str(c.Rc), "edges": int(c.H.nnz),
             "code_dir": str(out), "hash": c.manifest_hash()}]


_DISPATCH = {
    "outage": _run_outage,
    "de-threshold": _run_de_threshold,
    "de-wer": _run_de_wer,
    "simulate": _run_simulate,
    "build-code": _run_build_code,
}


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def render_csv(rows: list[dict], header: dict) -> str:
    buf = io.StringIO()
    for key, value in header.items():
        buf.write(f"# {key} = {value}\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_format(row[c]) for c in cols])
    return buf.getvalue()


def run(cfg: ExperimentConfig, log=None) -> str:
    """Execute ``cfg`` and return the CSV text (also written to ``cfg.output`` unless ``-``)."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    cfg.validate()
    r = _resolve(cfg)
    for note in r.notes:
        log(f"note: {note}")
    rows = _DISPATCH[cfg.mode](r)
    header = {f.name: getattr(r.cfg, f.name) for f in fields(ExperimentConfig)}
    header["content_hash"] = r.content_hash()
    text = render_csv(rows, header)
    if cfg.output != "-" and cfg.mode != "build-code":
        Path(cfg.output).write_text(text)
    return text


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopldpc", description="Two-user coded-cooperation experiments.")
    p.add_argument("--config", help="key = value configuration file")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(),
                       help=f"default: {f.default!r}")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {}
    try:
        for name, text in vars(args).items():
            if name == "config" or text is None:
                continue
            try:
                overrides[name] = _convert(name, text)
            except ValueError as exc:
                raise ConfigError(f"--{name.replace('_', '-')}: {exc}") from None
        cfg = load_config(args.config, overrides)
        text = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConstructionFailed as exc:
        print(f"construction failed in block {exc.block}: {exc}", file=sys.stderr)
        return 3
    if cfg.output == "-" or cfg.mode == "build-code":
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
