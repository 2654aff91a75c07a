"""Experiment orchestration: declarative configs, reproducible runs, reports.

A run reads a YAML config, validates it against the referenced operation's
preconditions, executes, and writes artifacts into the output directory:
f.json (polynomial, hex-float exact), report.json (byte-deterministic:
sorted keys, no volatile fields), *.csv series, and run_meta.json (wall
clock and host data, excluded from the determinism contract).

Exit codes: 0 pass, 1 assertion failure, 2 validation error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import yaml

from . import capacity as cap_mod
from . import constructors as cons
from . import diagnostics as diag
from .approximation import PieceTarget, SequenceSpec, approximate
from .geometry import Arc, CompactTarget, RadialSegment
from .numerics import Poly, PrecisionContext

KINDS = (
    "construct-growth", "construct-floor", "construct-ae", "construct-points",
    "diagnose", "capacity", "approx",
)


class ConfigError(ValueError):
    pass


class ExperimentConfig:
    """Validated experiment description.

    kind selects the operation; parameters mirror the operation signature;
    precision_bits overrides the automatic context; seed feeds any grid
    jitter (none by default) and is echoed into the report.
    """

    def __init__(self, doc: dict, out_dir: Path, precision_bits: int | None = None):
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigError("config must be a mapping with a 'kind' key")
        self.kind = doc["kind"]
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        self.doc = doc
        self.out_dir = Path(doc.get("out", out_dir))
        self.seed = int(doc.get("seed", 0))
        bits = precision_bits or doc.get("precision_bits")
        self.ctx = PrecisionContext(int(bits)) if bits else None
        self.params = doc.get("params", {})
        if not isinstance(self.params, dict):
            raise ConfigError("'params' must be a mapping")

    # -- shared parsers ------------------------------------------------------
    def policy(self) -> cons.StagePolicy:
        p = self.params.get("policy", {})
        stages = int(p.get("stages", 3))
        kw = {}
        if "rho" in p:
            kw["rho"] = cons.RadiiSequence(float(p["rho"]["offset"]), float(p["rho"]["ratio"]))
        for k in ("block_width", "tail_tighten", "max_degree", "exponent_grid_n"):
            if k in p:
                kw[k] = int(p[k])
        if "exponent_grid_depth" in p:
            kw["exponent_grid_depth"] = float(p["exponent_grid_depth"])
        if "eps" in p:
            return cons.StagePolicy(stage_count=stages, eps=tuple(float(e) for e in p["eps"]), **kw)
        return cons.StagePolicy.default(stages, **kw)

    def enrollment(self, stages: int) -> cons.TargetEnrollment:
        e = self.params.get("enrollment")
        if e is None:
            raise ConfigError("constructor configs need an 'enrollment' block")
        ctx = self.ctx or PrecisionContext()
        phis = []
        for spec in e["targets"]:
            if isinstance(spec, (int, float)):
                phis.append(Poly.from_values([spec], ctx))
            else:
                phis.append(Poly.from_values([complex(c) for c in spec], ctx))
        arcs = [Arc(float(a["center"]), float(a["halfwidth"])) for a in e["arcs"]]
        sched = e.get("schedule")
        if sched is None:
            return cons.TargetEnrollment.round_robin(phis, arcs, stages)
        if len(sched) != stages:
            raise ConfigError("schedule length must equal stage count")
        return cons.TargetEnrollment(tuple(phis), tuple(arcs), tuple((int(a), int(b)) for a, b in sched))

    def compact_target(self, doc: dict) -> CompactTarget:
        return CompactTarget.from_json_dict(doc)


def _json_bytes(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, indent=1, default=_json_default).encode()


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x)}")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


class RunReport:
    def __init__(self, config: ExperimentConfig):
        self.config_echo = config.doc
        self.artifacts = []
        self.summary = {}
        self.assertions = []

    def add_assertion(self, name: str, passed: bool, detail: str = ""):
        self.assertions.append({"name": name, "passed": bool(passed), "detail": detail})

    @property
    def all_passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "artifacts": sorted(self.artifacts),
            "summary": self.summary,
            "assertions": self.assertions,
        }


def run(config: ExperimentConfig) -> RunReport:
    """Execute one experiment and persist its artifacts."""
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(config)
    t0 = time.time()

    handler = {
        "construct-growth": _run_growth,
        "construct-floor": _run_floor,
        "construct-ae": _run_ae,
        "construct-points": _run_points,
        "diagnose": _run_diagnose,
        "capacity": _run_capacity,
        "approx": _run_approx,
    }[config.kind]
    handler(config, out, report)

    report_bytes = _json_bytes(report.to_json_dict())
    (out / "report.json").write_bytes(report_bytes)
    meta = {"wall_seconds": round(time.time() - t0, 3), "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    (out / "run_meta.json").write_bytes(json.dumps(meta, sort_keys=True).encode())
    return report


def _save_poly(f: Poly, out: Path, report: RunReport):
    (out / "f.json").write_bytes(_json_bytes(f.to_json_dict()))
    report.artifacts.append("f.json")
    report.summary["degree"] = f.degree()
    report.summary["precision_bits"] = f.precision.bits


def _save_stage_report(rep, out: Path, report: RunReport):
    (out / "stages.json").write_bytes(_json_bytes(rep.to_json_dict()))
    report.artifacts.append("stages.json")
    report.summary.update(rep.extras)


def _run_growth(config, out, report):
    p = config.params
    policy = config.policy()
    env_doc = p.get("envelope", {})
    kindw = env_doc.get("w", "inv_sqrt_one_minus_r")
    if kindw == "inv_sqrt_one_minus_r":
        w = lambda r: (1.0 - r) ** -0.5
    elif kindw == "inv_one_minus_r":
        w = lambda r: 1.0 / (1.0 - r)
    else:
        raise ConfigError(f"unknown envelope w {kindw!r}")
    A = CompactTarget.from_json_dict(
        env_doc.get("A", {"disc_r": None, "arcs": [], "segments": [{"angle": 0.0, "from": 0.0, "to": 1.0}]})
    )
    env = cons.GrowthEnvelope(w=w, A=A, description=kindw)
    enroll = config.enrollment(policy.stage_count)
    f, rep = cons.construct_growth_restricted(env, enroll, policy, config.ctx)
    _save_poly(f, out, report)
    _save_stage_report(rep, out, report)
    samples = int(p.get("envelope_samples", 500))
    r_top = float(p.get("envelope_r_max", 0.999))
    rows, worst = [], 0.0
    from .numerics import eval_poly
    seg_angle = A.radial_segments[0].angle
    ctx = f.precision
    with ctx.activate():
        direction = ctx.unit_point(seg_angle)
        for i in range(samples):
            r = r_top * (i + 1) / samples
            v = float(abs(eval_poly(f, ctx.real(r) * direction)))
            ratio = v / w(r)
            worst = max(worst, ratio)
            rows.append((r, v, w(r)))
    _write_csv(out / "envelope.csv", ["r", "abs_f", "w"], rows)
    report.artifacts.append("envelope.csv")
    report.summary["envelope_max_ratio"] = worst
    report.summary["envelope_samples"] = samples
    report.add_assertion("envelope |f| <= w on sampled A", worst <= 1.0 + 1e-6,
                         f"max ratio {worst:.6f}")
    for rec in rep.records:
        report.add_assertion(
            f"stage {rec.stage} dilate bound",
            rec.dilate_error <= 2 * policy.eps_n(rec.stage) + 1e-12,
            f"{rec.dilate_error:.3e} <= {2 * policy.eps_n(rec.stage):.3e}",
        )


def _run_floor(config, out, report):
    p = config.params
    policy = config.policy()
    g = p.get("gamma", "one_over_k_plus_1")
    if g == "one_over_k_plus_1":
        gamma = SequenceSpec(lambda k: 1.0 / (k + 1), "1/(k+1)", power=0.0)
    elif g == "zero":
        gamma = SequenceSpec(lambda k: 0.0, "0", power=0.0)
    else:
        raise ConfigError(f"unknown gamma spec {g!r}")
    floor = cons.CoefficientFloor(gamma)
    enroll = config.enrollment(policy.stage_count)
    f, rep = cons.construct_coefficient_floor(floor, enroll, policy, config.ctx)
    _save_poly(f, out, report)
    _save_stage_report(rep, out, report)
    lo, hi = rep.extras["covered_range"]
    with f.precision.activate():
        ok = all(abs(f.coefficient(k)) >= gamma(k) for k in range(lo, hi + 1))
    report.add_assertion("coefficient floor on covered range", ok, f"range [{lo},{hi}]")
    witnesses = diag.gap_witnesses(f, theta=0.9, sigma=1.1, k_min=35)
    ho = [w for w in witnesses if w.kind == "hadamard-ostrowski"]
    report.add_assertion("no Hadamard-Ostrowski witness (theta=0.9, sigma=1.1, k>=35)",
                         not ho, f"{len(ho)} witnesses")


def _run_ae(config, out, report):
    p = config.params
    policy = config.policy()
    enroll = config.enrollment(policy.stage_count)
    grid = int(p.get("circle_grid", 2 ** 14))
    u_min = int(p.get("u_min", 2))
    f, rep, ledger = cons.construct_ae_divergent(enroll, policy, grid, config.ctx, u_min)
    _save_poly(f, out, report)
    _save_stage_report(rep, out, report)
    _write_csv(out / "ledger.csv", ["l", "stage", "b_re", "b_im", "candidates", "measure", "crossings"],
               [(e.index, e.stage, e.value.real, e.value.imag, e.candidate_count,
                 e.est_measure, e.crossings) for e in ledger.entries])
    report.artifacts.append("ledger.csv")
    checkpoints = [rec.block_range[1] for rec in rep.records]
    prof = diag.partial_sum_divergence_profile(f, grid, checkpoints)
    u1 = rep.extras["u_first"]
    bound = 1.0 - sum(1.0 / l ** 2 for l in range(u1, 10 * u1)) - 1.0 / (10 * u1) - 0.02
    report.summary["divergence_fraction"] = prof.fraction_diverging
    report.summary["fraction_bound"] = bound
    report.add_assertion("divergence fraction at block ends", prof.fraction_diverging >= bound,
                         f"{prof.fraction_diverging:.4f} >= {bound:.4f}")
    ok = all(e.est_measure <= 2 * math.pi / e.index ** 2 + e.measure_slack() + 1e-12
             for e in ledger.entries)
    report.add_assertion("ledger measures below pigeonhole cap", ok, f"{len(ledger.entries)} entries")
    _write_csv(out / "profile.csv", ["checkpoint", "fraction"],
               [(k, prof.fraction_diverging) for k in prof.checkpoints])
    report.artifacts.append("profile.csv")


def _run_points(config, out, report):
    p = config.params
    policy = config.policy()
    enroll = config.enrollment(policy.stage_count)
    E = [complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z) for z in p.get("points", [1.0])]
    u_min = int(p.get("u_min", 2))
    f, rep = cons.construct_pointwise_divergent(E, enroll, policy, config.ctx, u_min)
    _save_poly(f, out, report)
    _save_stage_report(rep, out, report)
    from .numerics import partial_sums_at
    blocks = [rec.block_range for rec in rep.records]
    worst = math.inf
    for zeta in E:
        trace = partial_sums_at(f, zeta)
        for lo, hi in blocks:
            for l in range(lo, hi + 1):
                worst = min(worst, float(abs(trace.values[l])) / l)
    report.summary["min_block_ratio"] = worst
    report.add_assertion("|S_l| >= l at every enrolled point and block index",
                         worst >= 1.0, f"min ratio {worst:.3f}")


def _run_diagnose(config, out, report):
    p = config.params
    f = Poly.from_json_dict(json.loads(Path(p["poly"]).read_text()))
    if config.ctx and config.ctx.bits != f.precision.bits:
        f = Poly(f.coeffs, config.ctx)
    which = p.get("reports", ["growth", "gaps", "bloch"])
    if "growth" in which:
        r_grid = p.get("r_grid") or [i / 32 for i in range(32)]
        g = diag.growth_metrics(f, r_grid)
        _write_csv(out / "growth.csv", ["r", "M"], list(zip(g.r_grid, g.M)))
        report.artifacts.append("growth.csv")
        report.summary["hornblower_partial"] = g.hornblower_partial
        report.summary["growth_margin"] = g.margin_factor
    if "gaps" in which:
        ws = diag.gap_witnesses(f, float(p.get("theta", 0.9)), float(p.get("sigma", 1.1)),
                                int(p.get("k_min", 1)))
        report.summary["gap_witnesses"] = [
            {"kind": w.kind, "ratio": w.ratio, "root_bound": w.root_bound} for w in ws
        ]
    if "bloch" in which:
        report.summary["bloch_norm"] = diag.bloch_norm_estimate(f)
    if "normality" in which:
        ns = diag.normality_scan(f)
        report.summary["normality_sup"] = ns.value
    if "profile" in which:
        cps = p.get("checkpoints") or [f.degree()]
        prof = diag.partial_sum_divergence_profile(f, int(p.get("grid", 1024)), cps)
        report.summary["divergence_fraction"] = prof.fraction_diverging
        _write_csv(out / "profile.csv", ["point_index", "min_ratio"],
                   list(enumerate(prof.min_ratios)))
        report.artifacts.append("profile.csv")


def _run_capacity(config, out, report):
    p = config.params
    if "poly" in p:
        f = Poly.from_json_dict(json.loads(Path(p["poly"]).read_text()))
        ann = p.get("annulus", {})
        spec = cap_mod.AnnulusSpec(
            float(ann.get("r_in", 1.2)), float(ann.get("r_out", 1.5)),
            int(ann.get("n_radial", 12)), int(ann.get("n_angular", 192)),
        )
        cps = p.get("checkpoints") or [f.degree()]
        curve = cap_mod.sublevel_capacity_curve(f, spec, float(p.get("M", 10.0)), cps,
                                                int(p.get("m", 48)))
        rows = [(c.checkpoint, c.estimate.value, c.cloud_size) for c in curve]
        _write_csv(out / "capacity_curve.csv", ["n", "capacity", "cloud_size"], rows)
        report.artifacts.append("capacity_curve.csv")
        report.summary["curve"] = [
            {"n": c.checkpoint, "capacity": c.estimate.value, "cloud": c.cloud_size}
            for c in curve
        ]
    else:
        kind = p.get("region", "disc")
        density = float(p.get("density", 200.0))
        if kind == "disc":
            cloud = cap_mod.disc_cloud(float(p.get("radius", 0.5)), density)
        elif kind == "segment":
            cloud = cap_mod.segment_cloud(float(p.get("length", 2.0)), density)
        else:
            raise ConfigError(f"unknown capacity region {kind!r}")
        est = cap_mod.capacity_estimate(cloud, int(p.get("m", 48)))
        report.summary["capacity"] = est.value
        report.summary["m"] = est.extremal_point_count
        report.summary["debias_factor"] = est.debias_factor


def _run_approx(config, out, report):
    p = config.params
    K = CompactTarget.from_json_dict(p["target_set"])
    ctx = config.ctx or PrecisionContext()
    targets = []
    for t in p["targets"]:
        piece = (t["piece"], int(t.get("index", 0)))
        if "const" in t:
            c = t["const"]
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            targets.append(PieceTarget(piece, "const", c))
        else:
            targets.append(PieceTarget(piece, "poly",
                                       poly=Poly.from_values([complex(x) for x in t["poly"]], ctx)))
    tol = float(p.get("tol", 1e-3))
    f, cert = approximate(K, targets, tol, int(p.get("max_degree", 256)), ctx)
    _save_poly(f, out, report)
    report.summary["certificate"] = {
        "degree": cert.degree,
        "certified_sup_error": cert.certified_sup_error,
        "margin_factor": cert.margin_factor,
        "validation_density": cert.validation_density,
        "success": cert.success,
    }
    report.add_assertion("certificate within tolerance",
                         cert.success and cert.certified_sup_error <= tol,
                         f"{cert.certified_sup_error:.3e} vs {tol:.3e}")


def describe(path: str) -> str:
    """Human-readable summary of a stored artifact."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no artifact at {path}")
    doc = json.loads(p.read_text())
    lines = []
    if "coeffs" in doc:
        f = Poly.from_json_dict(doc)
        lines.append(f"polynomial: degree {f.degree()}, precision {f.precision.bits} bits")
        nz = sum(1 for c in f.coeffs if c != 0)
        lines.append(f"nonzero coefficients: {nz} of {len(f.coeffs)}")
    elif "stages" in doc:
        lines.append(f"construction: {doc.get('kind', '?')}, {len(doc['stages'])} stages")
        for s in doc["stages"]:
            cert = s.get("certificate") or {}
            lines.append(
                f"  stage {s['stage']}: u={s['u']} block={s['block_range']}"
                f" fit_deg={s['fit_degree']} cert={cert.get('certified_sup_error')}"
            )
        if doc.get("enrollment"):
            lines.append(f"enrolled targets: {doc['enrollment']['phi_degrees']}")
        if "ledger" in doc:
            lines.append(f"divergence ledger: {len(doc['ledger']['entries'])} entries")
    elif "assertions" in doc:
        lines.append(f"run report: kind {doc['config'].get('kind')}")
        for a in doc["assertions"]:
            lines.append(f"  [{'PASS' if a['passed'] else 'FAIL'}] {a['name']}: {a['detail']}")
        for k, v in sorted(doc.get("summary", {}).items()):
            if not isinstance(v, (list, dict)):
                lines.append(f"  {k} = {v}")
    else:
        lines.append(f"json document with keys: {sorted(doc)}")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="abeluniv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--precision-bits", type=int, default=None)
        sp.add_argument("--verbose", action="store_true")

    for name in ("construct", "diagnose", "capacity", "approx"):
        add_common(sub.add_parser(name))
    dp = sub.add_parser("describe")
    dp.add_argument("artifact")

    args = ap.parse_args(argv)
    if args.command == "describe":
        try:
            print(describe(args.artifact))
            return 0
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2

    try:
        doc = yaml.safe_load(Path(args.config).read_text())
        config = ExperimentConfig(doc, Path(args.out), args.precision_bits)
        expected = {"construct": ("construct-growth", "construct-floor", "construct-ae", "construct-points"),
                    "diagnose": ("diagnose",), "capacity": ("capacity",), "approx": ("approx",)}
        if config.kind not in expected[args.command]:
            raise ConfigError(f"config kind {config.kind!r} does not match subcommand {args.command!r}")
    except (ConfigError, ValueError, KeyError, OSError, yaml.YAMLError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2

    try:
        report = run(config)
    except (ConfigError, ValueError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # mid-run failure: partial state stays on disk
        print(f"runtime failure: {e}", file=sys.stderr)
        return 3
    if args.verbose:
        print(describe(str(config.out_dir / "report.json")))
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
