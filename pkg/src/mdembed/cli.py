"""Command line pipeline: ``mdembed <command> --config cfg.json``.

Commands: aperiodic, tower, widim, embed, final, obstruct.  Each writes a
JSON report (and CSV tables where relevant) to ``--out`` and exits with

    0  every certificate and verification passed
    2  configuration error
    3  a certificate or verification failed
    4  a resource limit was hit
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import embed, geometry, obstruction, systems, towers
from .errors import ConfigError, InvalidSystem, MdembedError, ResourceLimit

log = logging.getLogger("mdembed")

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RESOURCE = 0, 2, 3, 4
COMMANDS = ("aperiodic", "tower", "widim", "embed", "final", "obstruct")

DEFAULTS = {
    "N": 2,
    "D": 1,
    "delta": 0.2,
    "eta": 0.05,
    "seed": 0,
    "samples": 4000,
    "pairs": 1000,
    "window": 32,
    "epsilons": [0.3, 0.1, 0.05],
    "k_max": 20,
    "final_points": 20,
    "obstruct": {"maps": 100, "nodes": 61, "epsilon": 0.9, "D": 2, "L": 3, "b": None, "c": None, "terms": 20},
}


# ---------------------------------------------------------------------------
# Configuration


def parse_system(node, path: str = "system") -> systems.SystemDescriptor:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    kind = node.get("kind")
    try:
        if kind == "full_shift":
            return systems.full_shift(int(node["alphabet"]))
        if kind == "sft":
            return systems.sft(int(node["alphabet"]), list(node.get("forbidden", [])))
        if kind == "substitution":
            rules = node["rules"]
            if not isinstance(rules, dict):
                raise ConfigError(f"{path}.rules: expected symbol -> word mapping")
            return systems.substitution({str(a): str(w) for a, w in rules.items()})
        if kind == "rotation":
            bits = int(node.get("alpha_bits", 64))
            alpha = node.get("alpha", "sqrt2-1")
            if alpha == "sqrt2-1":
                return systems.golden_rotation(bits)
            if isinstance(alpha, str) and "/" in alpha:
                alpha = Fraction(alpha)
            return systems.rotation(Fraction(alpha), bits)
        if kind == "product":
            factors = node.get("factors")
            if not isinstance(factors, list) or len(factors) != 2:
                raise ConfigError(f"{path}.factors: expected two systems")
            return systems.product(parse_system(factors[0], f"{path}.factors[0]"),
                                   parse_system(factors[1], f"{path}.factors[1]"))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError, InvalidSystem) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}.kind: unknown system kind {kind!r}")


@dataclass
class PipelineConfig:
    system: systems.SystemDescriptor
    N: int = 2
    D: int = 1
    delta: float = 0.2
    eta: float = 0.05
    seed: int = 0
    samples: int = 4000
    pairs: int = 1000
    window: int = 32
    epsilons: list = field(default_factory=lambda: [0.3, 0.1, 0.05])
    k_max: int = 20
    final_points: int = 20
    obstruct: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def factor(self) -> systems.SystemDescriptor:
        """The symbolic factor Z (the right factor of a product)."""
        return self.system.right if self.system.kind == "product" else self.system


def load_config(text: str, overrides: dict | None = None) -> PipelineConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    raw = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    if "system" not in raw:
        raise ConfigError("missing key 'system'")
    unknown = set(raw) - set(DEFAULTS) - {"system"}
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    values = {k: raw.get(k, v) for k, v in DEFAULTS.items()}
    values["obstruct"] = {**DEFAULTS["obstruct"], **(raw.get("obstruct") or {})}
    for key in ("N", "D", "seed", "samples", "pairs", "window", "k_max", "final_points"):
        if not isinstance(values[key], int) or isinstance(values[key], bool):
            raise ConfigError(f"{key}: expected an integer")
    for key in ("delta", "eta"):
        if not isinstance(values[key], (int, float)) or not values[key] > 0:
            raise ConfigError(f"{key}: must be a positive number")
    for key in ("N", "D", "samples", "pairs", "k_max", "final_points"):
        if values[key] < 1:
            raise ConfigError(f"{key}: must be at least 1")
    if values["window"] < 0:
        raise ConfigError("window: must be nonnegative")
    if not values["epsilons"] or any(not isinstance(e, (int, float)) or e <= 0 for e in values["epsilons"]):
        raise ConfigError("epsilons: expected a nonempty list of positive numbers")
    system = parse_system(raw["system"])
    return PipelineConfig(system=system, raw=raw, **values)


# ---------------------------------------------------------------------------
# Commands


@dataclass
class RunResult:
    command: str
    ok: bool
    report: dict
    tables: dict = field(default_factory=dict)
    texts: dict = field(default_factory=dict)

    @property
    def status(self) -> int:
        return EXIT_OK if self.ok else EXIT_VERIFY

    def report_text(self) -> str:
        return json.dumps(_clean(self.report), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _header(cfg: PipelineConfig, command: str) -> dict:
    return {"command": command, "seed": cfg.seed, "system": cfg.system.describe()}


def _symbolic_factor(cfg: PipelineConfig) -> systems.SystemDescriptor:
    z = cfg.factor
    if not z.symbolic:
        raise ConfigError("system: a symbolic factor is required for this command")
    return z


def cmd_aperiodic(cfg: PipelineConfig) -> RunResult:
    z = _symbolic_factor(cfg)
    cert = systems.certify_aperiodic(z, cfg.N)
    report = {**_header(cfg, "aperiodic"), "certificate": cert.as_dict()}
    if cfg.system.kind == "product" and cfg.system.left.kind == "rotation":
        report["rotation"] = systems.rotation_certificate(cfg.system.left)
    return RunResult("aperiodic", cert.aperiodic, report)


def orbit_consistency(t: towers.Tower, points, steps: int) -> dict:
    """Follow each point for ``steps`` shifts; the tower coordinates must move
    up one level below the roof and restart at T_B(base) at the roof."""
    violations = 0
    checked = 0
    for p in points:
        c = towers.tower_coords(t, p)
        for _ in range(steps):
            q = systems.apply_shift(t.sys, p, 1)
            nxt = towers.tower_coords(t, q)
            if c.level + 1 < c.height:
                expected = (c.height, c.base_word, c.level + 1)
                ok = tuple(nxt) == expected
            else:
                b = systems.apply_shift(t.sys, p, -c.level)
                image = towers.return_map(t, b)
                k, w = towers.height_of(t, image)
                ok = tuple(nxt) == (k, w, 0)
            violations += not ok
            checked += 1
            p, c = q, nxt
    return {"points": len(points), "steps": steps, "transitions": checked, "violations": violations}


def first_visit_gaps(t: towers.Tower, points) -> dict:
    span = 4 * t.N + 4
    bad = 0
    for p in points:
        visits = towers.base_visits(t, p, 0, span)
        gaps = [b - a for a, b in zip(visits, visits[1:])]
        bad += sum(not (t.N + 1 <= g <= 2 * t.N + 1) for g in gaps)
    return {"points": len(points), "span": span, "bad_gaps": bad}


def tower_report(t: towers.Tower) -> dict:
    return {
        "N": t.N,
        "marker_length": t.marker_length,
        "base_window": [t.base.anchor, t.base.length],
        "base_cylinders": len(t.base.words),
        "heights": t.heights,
        "certificates": t.certificates,
    }


def cmd_tower(cfg: PipelineConfig) -> RunResult:
    z = _symbolic_factor(cfg)
    t = towers.build_tower(z, cfg.N)
    lo, hi = t.span
    radius = cfg.window + max(-lo, hi) + 2 * cfg.N + 4
    pts = systems.sample_points(z, max(1, cfg.samples // 40), radius, cfg.seed)
    orbit = orbit_consistency(t, pts, min(cfg.window, 100))
    gaps = first_visit_gaps(t, pts)
    report = {**_header(cfg, "tower"), "tower": tower_report(t), "orbit": orbit, "first_visit": gaps}
    ok = all(t.certificates.values()) and orbit["violations"] == 0 and gaps["bad_gaps"] == 0
    return RunResult("tower", ok, report, texts={"tower.txt": t.dump()})


def cmd_widim(cfg: PipelineConfig) -> RunResult:
    rows, table = [], []
    ok = True
    for eps in cfg.epsilons:
        for k, ratio in geometry.mdim_estimate(cfg.system, eps, cfg.k_max):
            bound = round(ratio * k)
            rows.append({"epsilon": eps, "k": k, "bound": bound, "ratio": ratio})
            table.append([eps, k, bound, repr(ratio)])
            ok &= ratio <= 1.0 / k
    report = {**_header(cfg, "widim"), "estimates": rows}
    return RunResult("widim", ok, report, tables={"widim.csv": _csv(["epsilon", "k", "bound", "ratio"], table)})


def _build_embedding(cfg: PipelineConfig) -> embed.TowerEmbedding:
    X = cfg.system
    if X.kind != "product" or not X.right.symbolic or X.left.kind != "rotation":
        raise ConfigError("system: embed needs a product of a rotation and a subshift")
    f = embed.circle_seed(cfg.D)
    return embed.tower_embed(X, f, cfg.delta, cfg.eta, cfg.seed, samples=cfg.samples)


def _sample_radius(emb: embed.TowerEmbedding, W: int) -> int:
    lo, hi = emb.tower.span
    cyl = max(len(lv.cover.second.regions[0].word) + abs(lv.cover.second.anchor) for lv in emb.g.levels.values())
    return W + 2 * emb.tower.N + 2 + max(-lo, hi) + cyl + 2


def _deviation(emb: embed.TowerEmbedding, points) -> float:
    return max(float(abs(emb.g(p) - emb.f(p)).max()) for p in points)


def cmd_embed(cfg: PipelineConfig) -> RunResult:
    emb = _build_embedding(cfg)
    W = cfg.window
    radius = _sample_radius(emb, W)
    pts = systems.sample_points(cfg.system, 2000, radius, embed.hash_seed(cfg.seed, 7))
    dev = _deviation(emb, pts)
    pairs = embed.sample_eta_pairs(cfg.system, cfg.eta, cfg.pairs, radius, embed.hash_seed(cfg.seed, 8))
    verify = embed.verify_eta_embedding(emb.g, pairs, W, cfg.eta)
    report = {**_header(cfg, "embed"), "construction": emb.report(),
              "sup_deviation": {"sampled": dev, "delta": cfg.delta, "pass": dev < cfg.delta},
              "verification": verify}
    ok = dev < cfg.delta and verify["violations"] == 0
    return RunResult("embed", ok, report, texts={"embedding.txt": embedding_table(emb)})


def embedding_table(emb: embed.TowerEmbedding) -> str:
    lines = [f"# embedding of {emb.X.describe()}", f"D {emb.D} L {emb.L} epsilon {emb.epsilon!r}"]
    for k, g_k in sorted(emb.g.levels.items()):
        rep = emb.level_reports[k]
        lines.append(f"[level {k}] regions {len(g_k.cover)} order {rep.order} mesh {rep.mesh!r}")
        lines.append(f"general_position subsets {rep.certificate.subsets_checked} "
                     f"min_bound {rep.certificate.min_singular_bound!r}")
        for i, u in enumerate(g_k.vertices):
            lines.append(f"u {i} {g_k.cover.regions[i].describe()} " + " ".join(repr(float(c)) for c in u))
    return "\n".join(lines) + "\n"


def cmd_final(cfg: PipelineConfig) -> RunResult:
    emb = _build_embedding(cfg)
    W = cfg.window
    radius = _sample_radius(emb, W) + 1
    pts = systems.sample_points(cfg.system, cfg.final_points, radius, embed.hash_seed(cfg.seed, 9))
    defects = embed.equivariance_defects(emb.g, pts, W)
    pairs = embed.sample_eta_pairs(cfg.system, cfg.eta, cfg.pairs, radius, embed.hash_seed(cfg.seed, 8))
    sep = embed.final_separation(emb.g, pairs, W)
    rows = []
    for idx, p in enumerate(pts):
        out = embed.final_embed(emb.g, p, W)
        for n, row in zip(range(-W, W + 1), out):
            rows.append([idx, n] + [repr(float(v)) for v in row])
    report = {**_header(cfg, "final"), "equivariance_defects": defects, "separation": sep,
              "window": W, "points": len(pts)}
    ok = defects == 0 and sep["failures"] == 0
    header = ["point", "n"] + [f"c{i}" for i in range(cfg.D)]
    return RunResult("final", ok, report, tables={"final_embed.csv": _csv(header, rows)})


def cmd_obstruct(cfg: PipelineConfig) -> RunResult:
    o = cfg.obstruct
    evidence = obstruction.triod_evidence(int(o["maps"]), int(o["nodes"]), float(o["epsilon"]), cfg.seed)
    terms = int(o["terms"])
    b = tuple(o["b"]) if o["b"] else tuple(range(1, terms + 1))
    c = tuple(o["c"]) if o["c"] else tuple(2 * n for n in b)
    params = obstruction.CounterexampleParams(int(o["D"]), int(o["L"]), b, c)
    n_star = obstruction.certificate_check(params)
    rows = [[r["map"], *(("", "", "", "", "", "") if r["witness"] is None else (
        r["witness"]["x"]["arm"], r["witness"]["x"]["t"], r["witness"]["y"]["arm"], r["witness"]["y"]["t"],
        repr(r["witness"]["level"]), repr(r["witness"]["distance"])))] for r in evidence["witnesses"]]
    summary = {k: v for k, v in evidence.items() if k != "witnesses"}
    report = {**_header(cfg, "obstruct"), "triod": summary,
              "certificate_check": {"D": params.D, "L": params.L, "first_violation": n_star}}
    table = _csv(["map", "x_arm", "x_t", "y_arm", "y_t", "level", "distance"], rows)
    return RunResult("obstruct", evidence["missing"] == 0, report, tables={"triod_witnesses.csv": table})


HANDLERS = {
    "aperiodic": cmd_aperiodic,
    "tower": cmd_tower,
    "widim": cmd_widim,
    "embed": cmd_embed,
    "final": cmd_final,
    "obstruct": cmd_obstruct,
}


def run(command: str, cfg: PipelineConfig) -> RunResult:
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    return HANDLERS[command](cfg)


def write_artifacts(result: RunResult, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{result.command}_report.json").write_text(result.report_text())
    for name, text in {**result.tables, **result.texts}.items():
        (out / name).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdembed", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--pairs", type=int)
    parser.add_argument("--window", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(text, {"seed": args.seed, "pairs": args.pairs, "window": args.window})
        result = run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except MdembedError as exc:
        print(f"verification failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    write_artifacts(result, args.out)
    print(f"{args.command}: {'ok' if result.ok else 'FAILED'} -> {args.out}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
