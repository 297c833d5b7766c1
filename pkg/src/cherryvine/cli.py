"""
Command-line interface.

Exit codes: 0 success, 1 domain failure (invalid structure, unattainable
tau, ...), 2 input or parse failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import CherryVineError, InputFormatError
from .evalm import kl_divergence_mc, log_likelihood
from .graph_core import validate_hypergraph, validate_junction_tree
from .learn import (DEFAULT_FAMILIES, DEFAULT_SEED, fit_truncated_vine,
                    junction_tree_to_cherry_tree, pseudo_observations)
from .vine_model import (junction_tree_log_density, log_density, sample,
                         truncate)

COMMANDS = ("validate", "fit", "density", "sample", "truncate", "transform", "compare")


@dataclass
class RunConfig:
    command: str
    data: str | None = None
    structure: str | None = None
    models: list = field(default_factory=list)
    reference: str | None = None
    out: str | None = None
    k: int | None = None
    families: list = field(default_factory=lambda: list(DEFAULT_FAMILIES))
    seed: int = DEFAULT_SEED
    alpha: float | None = None
    n: int | None = None
    method: str = "itau"

    REQUIRED = {
        "validate": ("structure",),
        "fit": ("data", "k"),
        "density": ("models", "data"),
        "sample": ("models", "n"),
        "truncate": ("models", "k"),
        "transform": ("k",),
        "compare": ("models", "reference", "n"),
    }

    def check(self):
        for name in self.REQUIRED[self.command]:
            if getattr(self, name) in (None, []):
                flag = "--model" if name == "models" else f"--{name}"
                raise InputFormatError(f"{self.command}: {flag} is required")
        if self.command == "transform" and not (self.models or self.structure):
            raise InputFormatError("transform: give --model or --structure")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cherryvine",
                description="Cherry-tree and cherry-vine copula toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--data", help="CSV with a header row")
    p.add_argument("--structure", help="structure JSON file")
    p.add_argument("--model", dest="models", action="append", default=[],
                   help="model JSON file (repeatable for compare)")
    p.add_argument("--reference", help="reference model for compare")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--k", type=int, help="truncation level / cherry-tree order")
    p.add_argument("--families", default=",".join(DEFAULT_FAMILIES),
                   help="comma-separated pair-copula families")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--alpha", type=float,
                   help="significance level of the independence pre-test")
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--method", choices=("itau", "mle"), default="itau")
    return p


def _config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command, data=ns.data, structure=ns.structure,
        models=list(ns.models), reference=ns.reference, out=ns.out, k=ns.k,
        families=[f.strip() for f in ns.families.split(",") if f.strip()],
        seed=ns.seed, alpha=ns.alpha, n=ns.n, method=ns.method)
    cfg.check()
    return cfg


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(cfg: RunConfig) -> int:
    obj = io.read_json(cfg.structure)
    verts, clusters, edges = io.parse_structure(obj, cfg.structure)
    report = validate_hypergraph(verts, clusters)
    if report.valid and edges is not None:
        report = validate_junction_tree(verts, clusters, edges)
    if report.valid:
        print(f"valid: running-intersection ordering {list(report.witness_ordering)}")
    for v in report.violations:
        print(f"{v.rule}: {v.description}")
    _emit(cfg, json.dumps(report.to_dict(), indent=2) + "\n")
    return 0 if report.valid else 1


def cmd_fit(cfg: RunConfig) -> int:
    _, raw = io.read_csv(cfg.data)
    po = pseudo_observations(raw, seed=cfg.seed)
    m = fit_truncated_vine(po, cfg.k, cfg.families, method=cfg.method, alpha=cfg.alpha)
    ll = log_likelihood(m, po)
    for level in m.structure.levels:
        parts = []
        for link in level:
            c = m.copula(link)
            desc = c.family.value if c.is_independence else f"{c.family.value}({c.parameter:.6g})"
            parts.append(f"{link.label()}={desc}")
        print(f"tree {level[0].level}: " + "; ".join(parts))
    n_dep = sum(not c.is_independence for c in m.pair_copulas.values())
    print(f"non-independence links: {n_dep}")
    print(f"log-likelihood: {ll:.17g}")
    _emit(cfg, io.dump_json(io.model_to_dict(m)))
    return 0


def _log_density_fn(path):
    vine, cherry = io.load_model(path)
    if cherry is not None:
        return vine, lambda x: junction_tree_log_density(cherry, x)
    return vine, lambda x: log_density(vine, x)


def cmd_density(cfg: RunConfig) -> int:
    vine, fn = _log_density_fn(cfg.models[0])
    _, pts = io.read_csv(cfg.data)
    if pts.shape[1] != vine.d:
        raise CherryVineError(
            f"points have {pts.shape[1]} columns, model has {vine.d} variables")
    outside = (pts <= 0.0) | (pts >= 1.0)
    if outside.any():
        r, c = np.argwhere(outside)[0]
        print(f"warning: {int(outside.sum())} coordinates outside (0, 1) were clamped "
              f"(first at row {r + 2}, column {c + 1})", file=sys.stderr)
    _emit(cfg, io.format_csv(["log_density"], np.asarray(fn(pts)).reshape(-1, 1)))
    return 0


def cmd_sample(cfg: RunConfig) -> int:
    vine, _ = io.load_model(cfg.models[0])
    x = sample(vine, cfg.n, cfg.seed)
    _emit(cfg, io.format_csv([f"u{v}" for v in vine.structure.vertices], x))
    return 0


def cmd_truncate(cfg: RunConfig) -> int:
    vine, _ = io.load_model(cfg.models[0])
    _emit(cfg, io.dump_json(io.model_to_dict(truncate(vine, cfg.k))))
    return 0


def cmd_transform(cfg: RunConfig) -> int:
    if cfg.models:
        vine, _ = io.load_model(cfg.models[0])
        _emit(cfg, io.dump_json(io.cherry_form_to_dict(vine, cfg.k)))
        return 0
    jt = io.junction_tree_from_dict(io.read_json(cfg.structure), cfg.structure)
    ct = junction_tree_to_cherry_tree(jt, cfg.k)
    _emit(cfg, io.dump_json(ct.base.to_dict()))
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    ref, ref_fn = _log_density_fn(cfg.reference)
    entries = [(p, *_log_density_fn(p)) for p in cfg.models]
    for p, vine, _ in entries:
        if vine.d != ref.d:
            raise CherryVineError(f"{p} has {vine.d} variables, reference has {ref.d}")
    if cfg.data:
        _, raw = io.read_csv(cfg.data)
        po = pseudo_observations(raw, seed=cfg.seed).values
    else:
        po = sample(ref, cfg.n, cfg.seed)
    rows = []
    for p, vine, fn in entries:
        ll = float(np.sum(fn(po)))
        n_params = sum(c.n_params for c in vine.pair_copulas.values())
        aic = -2.0 * ll + 2.0 * n_params
        bic = -2.0 * ll + n_params * np.log(po.shape[0])
        kl = kl_divergence_mc(ref_fn, fn, lambda m, s: sample(ref, m, s), cfg.n, cfg.seed)
        rows.append([p, ll, aic, bic, n_params, kl.value, kl.std_error])
    lines = ["model_id,loglik,aic,bic,n_params,kl_vs_reference,kl_stderr"]
    for p, ll, aic, bic, k, kl, se in rows:
        lines.append(f"{p},{ll:.17g},{aic:.17g},{bic:.17g},{k},{kl:.17g},{se:.17g}")
    _emit(cfg, "\n".join(lines) + "\n")
    return 0


HANDLERS = {
    "validate": cmd_validate, "fit": cmd_fit, "density": cmd_density,
    "sample": cmd_sample, "truncate": cmd_truncate, "transform": cmd_transform,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    try:
        cfg = _config(argv)
        return HANDLERS[cfg.command](cfg)
    except (InputFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CherryVineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
