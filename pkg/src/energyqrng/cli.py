"""Command-line front-end.

Every subcommand reads a JSON run configuration (``--config``) or builds the
same document from flags; a config file supersedes flags.  The document has
four sections (``problem``, ``algorithm``, ``protocol``, ``output``) and is
validated against :data:`CONFIG_SCHEMA`, which rejects unknown keys.

Exit codes: 0 success / member / pass, 1 non-member / abort, 2 error.

``ENERGYQRNG_THREADS`` sets the number of worker processes used by sweeps;
rows are written in grid order regardless.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, bellmap, certify, entropy, extract, qset, sdpcore, sim
from .errors import ConfigError, EnergyQrngError, InfeasibleBehaviourError, DiscretizationError

THREADS_ENV = "ENERGYQRNG_THREADS"

_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POS = {"type": "number", "exclusiveMinimum": 0}
_EPS = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model": {"enum": ["behaviour", "functional", "bpsk", "ook"]},
                "behaviour": _PAIR,
                "e_minus": {"type": "number"},
                "energies": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"avg": _PAIR, "pk": _PAIR},
                    "required": ["avg"],
                },
                "inputs": _PAIR,
                "xi": _POS,
                "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "delta": {"type": "number", "minimum": 0},
                "sweep": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "parameter": {"enum": ["e_minus", "e", "xi", "photons", "eta", "delta"]},
                        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                        "start": {"type": "number"},
                        "stop": {"type": "number"},
                        "num": {"type": "integer", "minimum": 1},
                    },
                    "required": ["parameter"],
                },
            },
        },
        "algorithm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {
                    "oneOf": [
                        {"type": "integer", "minimum": 1},
                        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                    ]
                },
                "grid": {"type": "integer", "minimum": 16},
                "gap_tol": _POS,
                "feas_tol": _POS,
                "max_iter": {"type": "integer", "minimum": 1},
                "tol": _POS,
                "split": {"enum": [certify.SPLIT_HALF, certify.SPLIT_OPTIMAL]},
                "variant": {"enum": list(certify.V_VARIANTS)},
                "upper": {"type": "boolean"},
                "min_entropy": {"type": "boolean"},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "eps_t": _EPS,
                "eps_m": _EPS,
                "eps_ext": _EPS,
                "eps_omega": _EPS,
                "threshold": {"oneOf": [{"type": "number"}, {"const": "default"}]},
                "sigma": {"type": ["integer", "null"], "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "trials": {"type": "integer", "minimum": 1},
                "device": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["bpsk", "ook", "ensemble"]},
                        "xi": _POS,
                        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "delta": {"type": "number", "minimum": 0},
                        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                        "behaviours": {"type": "array", "items": _PAIR, "minItems": 1},
                        "energies": {"type": "array", "items": _PAIR, "minItems": 1},
                    },
                    "required": ["kind"],
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "dir": {"type": "string"},
                "prefix": {"type": "string"},
            },
        },
    },
}


# ----------------------------------------------------------------------------- config


def validate_config(cfg: dict) -> dict:
    """Schema-check ``cfg``; raise :class:`ConfigError` listing every problem."""
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  at /{'/'.join(str(p) for p in e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n" + "\n".join(lines))
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return validate_config(cfg)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _prune(d):
    if isinstance(d, dict):
        out = {k: _prune(v) for k, v in d.items()}
        return {k: v for k, v in out.items() if v is not None and v != {}}
    return d


def _config_from_args(args) -> dict:
    if getattr(args, "config", None):
        return load_config(args.config)
    sweep = None
    if getattr(args, "param", None):
        sweep = {"parameter": args.param, "values": args.values, "start": args.start, "stop": args.stop, "num": args.num}
    energies = None
    if getattr(args, "w", None) is not None:
        energies = {"avg": args.w, "pk": args.pk}
    device = None
    if getattr(args, "device", None):
        device = {"kind": args.device}
    k = getattr(args, "k", None)
    cfg = {
        "problem": {
            "model": getattr(args, "model", None),
            "behaviour": getattr(args, "e", None),
            "e_minus": getattr(args, "e_minus", None),
            "energies": energies,
            "inputs": getattr(args, "inputs", None),
            "xi": getattr(args, "xi", None),
            "eta": getattr(args, "eta", None),
            "delta": getattr(args, "delta", None),
            "sweep": sweep,
        },
        "algorithm": {
            "k": (k[0] if len(k) == 1 else k) if k else None,
            "grid": getattr(args, "grid", None),
            "split": getattr(args, "split", None),
            "variant": getattr(args, "variant", None),
            "upper": False if getattr(args, "no_upper", False) else None,
            "min_entropy": False if getattr(args, "no_min_entropy", False) else None,
        },
        "protocol": {
            "n": getattr(args, "n", None),
            "eps_t": getattr(args, "eps_t", None),
            "eps_m": getattr(args, "eps_m", None),
            "eps_ext": getattr(args, "eps_ext", None),
            "eps_omega": getattr(args, "eps_omega", None),
            "threshold": getattr(args, "threshold", None),
            "seed": getattr(args, "seed", None),
            "trials": getattr(args, "trials", None),
            "device": device,
        },
        "output": {"path": getattr(args, "out", None), "dir": getattr(args, "out_dir", None), "prefix": getattr(args, "prefix", None)},
    }
    thr = getattr(args, "threshold", None)
    if thr is not None and thr != "default":
        try:
            cfg["protocol"]["threshold"] = float(thr)
        except ValueError as exc:
            raise ConfigError(f"--threshold must be a number or 'default', got {thr!r}") from exc
    return validate_config(_prune(cfg))


# ----------------------------------------------------------------------------- problem set-up


def _inputs(problem) -> entropy.InputDistribution:
    p = problem.get("inputs")
    return entropy.InputDistribution(*p) if p else entropy.InputDistribution()


def _solver_options(alg) -> sdpcore.SolverOptions:
    o = sdpcore.SolverOptions()
    return sdpcore.SolverOptions(
        gap_tol=alg.get("gap_tol", o.gap_tol), feas_tol=alg.get("feas_tol", o.feas_tol), max_iter=alg.get("max_iter", o.max_iter)
    )


def _ks(alg, default=16) -> list[int]:
    k = alg.get("k", default)
    return [k] if isinstance(k, int) else list(k)


def _energies(problem) -> qset.EnergyBounds:
    en = problem.get("energies")
    if en is None:
        raise ConfigError(f"model {problem.get('model', 'behaviour')!r} needs problem.energies")
    return qset.EnergyBounds(tuple(en["avg"]), tuple(en.get("pk", (1.0, 1.0))))


def _xi(point, problem) -> float:
    if "photons" in point:
        return math.sqrt(2.0 * point["photons"])
    return point.get("xi", problem.get("xi"))


def design(problem: dict, point: dict | None = None) -> dict:
    """Resolve a problem section (at one sweep point) into library objects.

    Returns a dict with ``target``, ``energies``, ``inputs``, ``weights``,
    ``behaviour`` (a behaviour for the upper bound, or None), ``device``
    (honest device model, or None) and ``analytic`` (OOK closed form, or None).
    """
    point = point or {}
    model = problem.get("model", "behaviour")
    inputs = _inputs(problem)
    out = {"inputs": inputs, "weights": None, "device": None, "analytic": None}
    if model == "functional":
        em = point.get("e_minus", problem.get("e_minus"))
        if em is None:
            raise ConfigError("functional model needs e_minus")
        out["target"] = entropy.LinearTarget(0.5, -0.5, em)
        out["behaviour"] = qset.Behaviour(em, -em) if abs(em) <= 1.0 else None
        out["energies"] = _energies(problem)
    elif model == "behaviour":
        if "e1" in point:
            b = qset.Behaviour(point["e1"], point["e2"])
        elif "e_minus" in point:
            b = qset.Behaviour(point["e_minus"], -point["e_minus"])
        elif "behaviour" in problem:
            b = qset.Behaviour(*problem["behaviour"])
        else:
            raise ConfigError("behaviour model needs problem.behaviour")
        out["target"] = out["behaviour"] = b
        out["energies"] = _energies(problem)
    elif model == "bpsk":
        dev = sim.Bpsk(_xi(point, problem) or 0.5, point.get("eta", problem.get("eta", 1.0)), point.get("delta", problem.get("delta", 0.0)))
        out.update(target=dev.expected, behaviour=dev.expected, energies=dev.energy_bounds(), device=dev)
        # single constraint on the input-averaged energy
        out["weights"] = (inputs.p1, inputs.p2)
    else:
        dev = sim.Ook(_xi(point, problem) or 0.5, point.get("eta", problem.get("eta", 1.0)))
        en = dev.energy_bounds()
        out.update(target=dev.expected, behaviour=dev.expected, energies=en, device=dev)
        out["analytic"] = entropy.ook_entropy_analytic(inputs, dev.expected.e2, en.pk[1])
    return out


def _sweep_points(problem) -> tuple[list[str], list[dict]]:
    sw = problem.get("sweep")
    if not sw:
        return [], [{}]
    if "values" in sw:
        vals = [float(v) for v in sw["values"]]
    elif {"start", "stop", "num"} <= sw.keys():
        vals = [float(v) for v in np.linspace(sw["start"], sw["stop"], sw["num"])]
    else:
        raise ConfigError("sweep needs either values or start/stop/num")
    name = sw["parameter"]
    if name == "e":
        return ["e1", "e2"], [{"e1": a, "e2": b} for a, b in itertools.product(vals, vals)]
    return [name], [{name: v} for v in vals]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    return "nan" if math.isnan(v) else format(v, ".12g")


def entropy_row(cfg: dict, point: dict) -> list:
    """Values ``H_k`` (per k), ``Hmin``, ``H_upper``, ``H_analytic`` at one sweep point (nan where undefined)."""
    problem = cfg.get("problem", {})
    alg = cfg.get("algorithm", {})
    opts = _solver_options(alg)
    d = design(problem, point)
    row = []
    for k in _ks(alg):
        prob = entropy.EntropyProblem(d["target"], d["energies"], d["inputs"], k, d["weights"])
        try:
            row.append(entropy.entropy_lower_bound(prob, opts)[0])
        except InfeasibleBehaviourError:
            row.append(float("nan"))
    if alg.get("min_entropy", True):
        prob = entropy.EntropyProblem(d["target"], d["energies"], d["inputs"], 2, d["weights"])
        try:
            row.append(entropy.min_entropy_bound(prob, opts)[0])
        except InfeasibleBehaviourError:
            row.append(float("nan"))
    if alg.get("upper", True):
        try:
            if d["behaviour"] is None:
                raise DiscretizationError("no behaviour")
            row.append(entropy.decompose_upper_bound(d["behaviour"], d["energies"], d["inputs"], alg.get("grid", 10_000))[0])
        except DiscretizationError:
            row.append(float("nan"))
    if d["analytic"] is not None:
        row.append(d["analytic"])
    return row


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _map(fn, items: list) -> list:
    workers = min(_threads(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


class _Row:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, point):
        return entropy_row(self.cfg, point)


def entropy_table(cfg: dict) -> tuple[list[str], list[list]]:
    """Header and rows of the entropy sweep described by ``cfg``."""
    problem = cfg.get("problem", {})
    alg = cfg.get("algorithm", {})
    names, points = _sweep_points(problem)
    cols = list(names) + [f"H_k{k}" for k in _ks(alg)]
    if alg.get("min_entropy", True):
        cols.append("Hmin")
    if alg.get("upper", True):
        cols.append("H_upper")
    if problem.get("model") == "ook":
        cols.append("H_analytic")
    rows = _map(_Row(cfg), points)
    return cols, [[p[n] for n in names] + r for p, r in zip(points, rows)]


_COLUMN_DOCS = {
    "e_minus": "E- = (E1 - E2)/2 of the target",
    "e1": "correlator E1",
    "e2": "correlator E2",
    "xi": "coherent amplitude",
    "photons": "mean photon number xi^2/2",
    "eta": "detection efficiency",
    "delta": "energy-threshold safety margin",
    "Hmin": "min-entropy bound -log2 G* (bits)",
    "H_upper": "LP upper bound on H* over discretized extremal points (bits)",
    "H_analytic": "OOK closed form (bits)",
}


def write_csv(fh, cfg: dict, cols: list[str], rows: list[list], kind: str):
    """Plot-ready CSV with a ``#`` metadata header; deterministic bytes for equal input."""
    fh.write(f"# energyqrng {__version__} {kind}\n")
    fh.write(f"# config-sha256 {config_hash(cfg)}\n")
    for c in cols:
        doc = _COLUMN_DOCS.get(c) or (f"chord lower bound H_k* with k = {c[3:]} (bits)" if c.startswith("H_k") else c)
        fh.write(f"# {c}: {doc}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def _open_out(cfg):
    path = cfg.get("output", {}).get("path")
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


# ----------------------------------------------------------------------------- commands


def cmd_membership(args) -> int:
    b = qset.Behaviour(*args.e)
    w = tuple(args.w)
    closed = qset.in_quantum_set_closed_form(b, w)
    sdp = qset.sdp_membership(b, w, tol=args.tol)
    margin = qset.closed_form_margin(b, w)
    print(f"behaviour       E = ({b.e1:.6g}, {b.e2:.6g})  w = ({w[0]:.6g}, {w[1]:.6g})")
    print(f"closed form     {'member' if closed else 'non-member'}")
    print(f"sdp             {'member' if sdp.member else 'non-member'}")
    print(f"margin          {margin:.6g}")
    print(f"classical       {qset.is_classical(b, w)}")
    if closed != bool(sdp.member):
        print("warning: closed-form and SDP verdicts differ (point is within solver tolerance of the boundary)")
    return 0 if closed else 1


def cmd_entropy(args) -> int:
    cfg = _config_from_args(args)
    cols, rows = entropy_table(cfg)
    fh, close = _open_out(cfg)
    try:
        write_csv(fh, cfg, cols, rows, "entropy")
    finally:
        if close:
            fh.close()
    return 0


def _tradeoff(cfg) -> tuple[certify.TradeoffFunction, dict]:
    problem = cfg.get("problem", {})
    alg = cfg.get("algorithm", {})
    d = design(problem)
    if isinstance(d["target"], entropy.LinearTarget):
        raise ConfigError("a trade-off function needs a behaviour, not a functional")
    tf = certify.make_tradeoff_function(
        d["target"], d["energies"], d["inputs"], _ks(alg, 32)[0], alg.get("split", certify.SPLIT_HALF), _solver_options(alg), d["weights"]
    )
    return tf, d


def cmd_tradeoff(args) -> int:
    cfg = _config_from_args(args)
    tf, d = _tradeoff(cfg)
    proto = cfg.get("protocol", {})
    variant = cfg.get("algorithm", {}).get("variant", certify.LEMMA)
    v, xp, xm = certify.variance_bound(tf, variant)
    doc = {
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "tradeoff": tf.to_dict(),
        "expected": list(d["target"].vector),
        "energies": {"avg": list(d["energies"].avg), "pk": list(d["energies"].pk)},
        "value": tf.value(d["target"], d["energies"].avg),
        "xi_plus": xp,
        "xi_minus": xm,
        "variance": v,
        "variant": variant,
    }
    if "n" in proto:
        n = proto["n"]
        eps_t = proto.get("eps_t", 1e-6)
        doc["n"] = n
        doc["t"] = certify.error_term(v, xp, n, eps_t)
        doc["threshold"] = certify.default_threshold(tf, d["target"], d["energies"], n, eps_t, variant)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    fh, close = _open_out(cfg)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()
    return 0


def _device(cfg, d) -> sim.DeviceModel:
    dev_cfg = cfg.get("protocol", {}).get("device")
    if dev_cfg is None:
        if d["device"] is None:
            raise ConfigError("protocol.device is required unless problem.model is bpsk or ook")
        return d["device"]
    kind = dev_cfg["kind"]
    problem = cfg.get("problem", {})
    if kind == "bpsk":
        return sim.Bpsk(dev_cfg.get("xi", problem.get("xi", 0.5)), dev_cfg.get("eta", problem.get("eta", 1.0)), dev_cfg.get("delta", problem.get("delta", 0.0)))
    if kind == "ook":
        return sim.Ook(dev_cfg.get("xi", problem.get("xi", 0.5)), dev_cfg.get("eta", problem.get("eta", 1.0)))
    try:
        return sim.IidEnsemble(tuple(dev_cfg["weights"]), tuple(map(tuple, dev_cfg["behaviours"])), tuple(map(tuple, dev_cfg["energies"])))
    except KeyError as exc:
        raise ConfigError(f"ensemble device needs {exc.args[0]}") from exc


def protocol_setup(cfg: dict) -> tuple[certify.ProtocolConfig, sim.DeviceModel, dict]:
    """TF, protocol parameters and device described by ``cfg``."""
    tf, d = _tradeoff(cfg)
    proto = cfg.get("protocol", {})
    variant = cfg.get("algorithm", {}).get("variant", certify.LEMMA)
    n = proto.get("n", 100_000)
    eps = {k: proto.get(k, 1e-6) for k in ("eps_t", "eps_m", "eps_ext", "eps_omega")}
    thr = proto.get("threshold", "default")
    if thr == "default":
        thr = certify.default_threshold(tf, d["target"], d["energies"], n, eps["eps_t"], variant)
    pc = certify.ProtocolConfig(n, d["energies"], tf, thr, sigma=proto.get("sigma"), variant=variant, **eps)
    return pc, _device(cfg, d), d


def certificate_report(pc: certify.ProtocolConfig, tr: sim.ProtocolTranscript) -> str:
    s = certify.soundness_epsilon(pc.eps_t, pc.eps_m, pc.eps_ext, pc.eps_omega)
    sigma = tr.extractor.sigma if tr.extractor is not None else 0
    lines = [
        f"energyqrng {__version__} certification report",
        f"rounds n                 {pc.n}",
        f"seed                     {tr.seed}",
        f"threshold r              {pc.threshold:.9g}",
        f"error term t             {pc.t:.9g}",
        f"variance bound V         {pc.variance:.9g} ({pc.variant})",
        f"observed <xi>+gamma.w    {tr.mean_xi + float(np.dot(pc.tf.gamma, pc.energies.avg)):.9g}",
        f"certified rate           {tr.certified_rate(pc.tf, pc.energies):.9g}",
        f"min-entropy budget s_h   {pc.sigma_h:.9g}",
        f"key length sigma         {sigma}",
        f"eps_t eps_m eps_ext eps_w  {pc.eps_t:.3g} {pc.eps_m:.3g} {pc.eps_ext:.3g} {pc.eps_omega:.3g}",
        f"soundness epsilon        {s.total:.6g}",
        f"decision                 {tr.decision}",
    ]
    return "\n".join(lines) + "\n"


def write_transcript(fh, tr: sim.ProtocolTranscript, cfg: dict):
    fh.write(f"# energyqrng {__version__} transcript\n")
    fh.write(f"# config-sha256 {config_hash(cfg)}\n")
    fh.write("# round: 1-based round index; x: input in {1,2}; a: output in {+1,-1}\n")
    buf = io.StringIO()
    buf.write("round,x,a\n")
    idx = np.arange(1, tr.n + 1)
    np.savetxt(buf, np.column_stack([idx, tr.x, tr.a]), fmt="%d", delimiter=",")
    fh.write(buf.getvalue())


def cmd_certify(args) -> int:
    cfg = _config_from_args(args)
    pc, dev, _ = protocol_setup(cfg)
    seed = cfg.get("protocol", {}).get("seed", 0)
    tr = sim.run_protocol(dev, pc, seed)
    out = cfg.get("output", {})
    outdir = Path(out.get("dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = out.get("prefix", "certify")
    with open(outdir / f"{prefix}_transcript.csv", "w", newline="") as fh:
        write_transcript(fh, tr, cfg)
    with open(outdir / f"{prefix}_key.hex", "w") as fh:
        fh.write((extract.to_hex(tr.key) if tr.key is not None and len(tr.key) else "") + "\n")
    report = certificate_report(pc, tr)
    with open(outdir / f"{prefix}_report.txt", "w") as fh:
        fh.write(report)
    sys.stdout.write(report)
    return 0 if tr.passed else 1


def cmd_bellmap(args) -> int:
    b = qset.Behaviour(*args.e)
    w = tuple(args.w)
    bb = bellmap.pm_to_bell(b, w)
    plus, minus = bellmap.chsh_values(bb)
    print("correlators     " + " ".join(f"{v:.6g}" for v in bb.vector))
    print(f"chsh            {plus:.9g} {minus:.9g}")
    print(f"bell classical  {bellmap.bell_classical(bb)}")
    print(f"image quantum   {bellmap.bell_quantum_membership(bb, args.tol)}")
    member = bellmap.pm_membership_via_bell(b, w, args.tol)
    print(f"in Q via bell   {member}")
    return 0 if member else 1


def cmd_montecarlo(args) -> int:
    cfg = _config_from_args(args)
    pc, dev, _ = protocol_setup(cfg)
    proto = cfg.get("protocol", {})
    res = sim.monte_carlo_theorem3(dev, pc, proto.get("trials", 1000), proto.get("seed", 0))
    eps = pc.eps_t + pc.eps_omega
    allow = res.allowance(eps)
    print(f"trials          {res.trials}")
    print(f"violations      {res.violations}")
    print(f"frequency       {res.frequency:.6g}")
    print(f"allowance       {allow:.6g} (eps_t + eps_omega + 3 sd)")
    print(f"energy aborts   {res.energy_violations}")
    return 0 if res.frequency <= allow else 1


# ----------------------------------------------------------------------------- parser


def _add_problem_flags(p):
    p.add_argument("--config", help="JSON run configuration (supersedes all other flags)")
    p.add_argument("--model", choices=["behaviour", "functional", "bpsk", "ook"])
    p.add_argument("--e", nargs=2, type=float, metavar=("E1", "E2"))
    p.add_argument("--e-minus", type=float)
    p.add_argument("--w", nargs=2, type=float, metavar=("W1", "W2"), help="average-energy bounds")
    p.add_argument("--pk", nargs=2, type=float, metavar=("P1", "P2"), help="peak-energy bounds")
    p.add_argument("--inputs", nargs=2, type=float, metavar=("P1", "P2"))
    p.add_argument("--xi", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", nargs="+", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--out", help="output file (default stdout)")


def _add_protocol_flags(p):
    p.add_argument("--n", type=int)
    p.add_argument("--eps-t", type=float)
    p.add_argument("--eps-m", type=float)
    p.add_argument("--eps-ext", type=float)
    p.add_argument("--eps-omega", type=float)
    p.add_argument("--threshold", help="number or 'default'")
    p.add_argument("--seed", type=int)
    p.add_argument("--device", choices=["bpsk", "ook"])
    p.add_argument("--split", choices=[certify.SPLIT_HALF, certify.SPLIT_OPTIMAL])
    p.add_argument("--variant", choices=list(certify.V_VARIANTS))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="energyqrng", description="Energy-assumption randomness certification toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("membership", help="decide membership in the energy-restricted quantum set")
    p.add_argument("--e", nargs=2, type=float, required=True, metavar=("E1", "E2"))
    p.add_argument("--w", nargs=2, type=float, required=True, metavar=("W1", "W2"))
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("entropy", help="entropy bounds over a parameter sweep (CSV)")
    _add_problem_flags(p)
    p.add_argument("--param", choices=["e_minus", "e", "xi", "photons", "eta", "delta"])
    p.add_argument("--values", nargs="+", type=float)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--no-upper", action="store_true", help="skip the LP upper bound")
    p.add_argument("--no-min-entropy", action="store_true")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("tradeoff", help="design a trade-off function (JSON)")
    _add_problem_flags(p)
    _add_protocol_flags(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("certify", help="run the protocol on a simulated device and report")
    _add_problem_flags(p)
    _add_protocol_flags(p)
    p.add_argument("--out-dir")
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bellmap", help="map a behaviour to CHSH correlators")
    p.add_argument("--e", nargs=2, type=float, required=True, metavar=("E1", "E2"))
    p.add_argument("--w", nargs=2, type=float, required=True, metavar=("W1", "W2"))
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_bellmap)

    p = sub.add_parser("montecarlo", help="empirical check of the concentration bound")
    _add_problem_flags(p)
    _add_protocol_flags(p)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_montecarlo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EnergyQrngError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
