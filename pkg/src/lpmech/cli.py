"""Command-line front end for the bundle toolkit.

Subcommands:

    check-axioms   sample the bracket-closure conditions, write a report
    simulate       integrate a Lagrangian system, write trajectory CSV and
                   a diagnostics report (energy drift, residuals, currents)
    reduce         build a reduced bundle from a principal-bundle scenario,
                   dump structure-function samples, run the reduced flow
    stages         compare direct reduction against the two-stage route
    noether        write per-generator current and drift-residual columns

Configuration lives in a single YAML file (UTF-8, nested key-value pairs);
every scalar setting can be overridden by the matching command-line flag,
and the seed falls back to the LPMECH_SEED environment variable when
neither the flag nor the config provides one.  Structure functions and
Lagrangians of user-defined bundles are written as polynomial tables,
lists of terms that each carry the tensor entry they feed (``index``), one
exponent per input variable (``powers``), and a coefficient.

Exit codes: 0 success, 1 configuration error, 2 axiom or invariance
violation, 3 numerical failure.  Output files are written atomically
(temp file, then rename) and CSV numbers use 17 significant digits with
LF line endings, so reruns with identical configuration and seed produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings

import numpy as np
import yaml

from .dynamics import (
    LPLagrangian,
    LPState,
    LPState2,
    accelerations,
    energy,
    integrate_lp,
    lp_operator,
    noether_current,
    noether_drift_residual,
    write_trajectory_csv,
)
from .errors import (
    AxiomViolation,
    ChartExit,
    ConfigError,
    DimensionMismatch,
    InvarianceViolation,
    NoConvergence,
    NotNormal,
    NotSupported,
    SingularHessian,
)
from .liegroups import abelian, heisenberg3, so3
from .lpbundle import ChartDomain, LPBundleChart, check_axioms
from .reduction import (
    PrincipalScenario,
    build_reduced_bundle,
    defining_representation,
    stages_reduce,
    trivial_representation,
    two_stage_lagrangian,
)
from .smoothmap import SmoothMap, eval_map
from .systems import SystemRecord, build_system

_MISSING = object()


# ---------------------------------------------------------------------------
# config loading and schema helpers


def load_config(path):
    """Parse the YAML config file; raise ConfigError with a location hint."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = ""
        if mark is not None:
            where = f" at line {mark.line + 1}, column {mark.column + 1}"
        raise ConfigError(f"{path}: invalid syntax{where}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _need(node, key, label):
    if not isinstance(node, dict):
        raise ConfigError(f"{label}: expected a mapping")
    if key not in node:
        raise ConfigError(f"{label}: missing required key '{key}'")
    return node[key]


def _num(val, label):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{label}: expected a number, got {type(val).__name__}")
    return float(val)


def _int(val, label):
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{label}: expected an integer, got {type(val).__name__}")
    return val


def _vector(val, length, label):
    if not isinstance(val, list) or len(val) != length:
        raise ConfigError(f"{label}: expected a list of {length} numbers")
    return np.array([_num(v, f"{label}[{i}]") for i, v in enumerate(val)])


def _resolve_seed(flag_seed, cfg):
    """Seed precedence: command-line flag, config key, LPMECH_SEED, then 0."""
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" in cfg:
        return _int(cfg["seed"], "seed")
    env = os.environ.get("LPMECH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"LPMECH_SEED must be an integer, got {env!r}")
    return 0


def _resolve_run(cfg, args):
    """Time grid and integrator settings with flag-over-config precedence."""
    t_end = args.t_end if args.t_end is not None else _num(cfg.get("t_end", 1.0), "t_end")
    dt = args.dt if args.dt is not None else _num(cfg.get("dt", 1e-3), "dt")
    method = args.method or cfg.get("method", "rk4")
    if t_end <= 0:
        raise ConfigError("t_end: must be positive")
    if dt <= 0:
        raise ConfigError("dt: must be positive")
    if method not in ("rk4", "euler"):
        raise ConfigError(f"method: expected 'rk4' or 'euler', got {method!r}")
    return t_end, dt, method


def _resolve_out(cfg, args):
    out = args.out or cfg.get("out", ".")
    if not isinstance(out, str):
        raise ConfigError("out: expected a directory path")
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_tol(cfg, args, default):
    if args.tol is not None:
        return float(args.tol)
    return _num(cfg.get("tol", default), "tol")


def _integrate(sys_, s0, t_end, dt, method):
    """Run the integrator, turning grid-setup complaints into config errors."""
    try:
        return integrate_lp(sys_, s0, 0.0, t_end, dt, method=method)
    except ValueError as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# polynomial tables


def polynomial_map(n_vars, shape, terms, label):
    """Compile a coefficient table into a smooth map.

    ``terms`` is a list of mappings with keys ``powers`` (one exponent per
    input variable), ``coeff``, and, for tensor-valued maps, ``index``
    naming the entry the term adds to.  Entries no term feeds stay zero.
    """
    shape = tuple(int(s) for s in shape)
    total = int(np.prod(shape, dtype=int)) if shape else 1
    if not isinstance(terms, list):
        raise ConfigError(f"{label}: expected a list of terms")
    compiled = []
    for ti, term in enumerate(terms):
        tl = f"{label}[{ti}]"
        if not isinstance(term, dict):
            raise ConfigError(f"{tl}: expected a mapping")
        unknown = sorted(set(term) - {"index", "powers", "coeff"})
        if unknown:
            raise ConfigError(f"{tl}: unknown key '{unknown[0]}'")
        powers = term.get("powers", [0] * n_vars)
        if not isinstance(powers, list) or len(powers) != n_vars:
            raise ConfigError(f"{tl}.powers: expected {n_vars} exponents")
        powers = [_int(p, f"{tl}.powers[{i}]") for i, p in enumerate(powers)]
        if any(p < 0 for p in powers):
            raise ConfigError(f"{tl}.powers: exponents must be nonnegative")
        coeff = _num(_need(term, "coeff", tl), f"{tl}.coeff")
        index = term.get("index", [])
        if not isinstance(index, list) or len(index) != len(shape):
            raise ConfigError(f"{tl}.index: expected {len(shape)} entries")
        idx = []
        for axis, extent in enumerate(shape):
            i = _int(index[axis], f"{tl}.index[{axis}]")
            if not 0 <= i < extent:
                raise ConfigError(
                    f"{tl}.index[{axis}]: {i} out of range for extent {extent}"
                )
            idx.append(i)
        flat = int(np.ravel_multi_index(idx, shape)) if shape else 0
        compiled.append((flat, powers, coeff))

    def body(x):
        vals = [0.0] * total
        for flat, powers, coeff in compiled:
            term = coeff
            for i, p in enumerate(powers):
                if p:
                    term = term * x[i] ** p
            vals[flat] = vals[flat] + term
        arr = np.array(vals, dtype=object)
        try:
            arr = arr.astype(float)
        except (TypeError, ValueError):
            pass
        return arr.reshape(shape) if shape else arr

    return SmoothMap(
        n_vars, total, body, out_shape=shape if shape else None, name=label
    )


def _table_field(node, key, n_vars, shape, label):
    """Read one structure-function entry: absent, constant, or polynomial."""
    sub = node.get(key)
    if sub is None:
        return np.zeros(shape)
    fl = f"{label}.{key}"
    if not isinstance(sub, dict):
        raise ConfigError(f"{fl}: expected a mapping with 'constant' or 'polynomial'")
    if "constant" in sub and "polynomial" in sub:
        raise ConfigError(f"{fl}: give 'constant' or 'polynomial', not both")
    if "constant" in sub:
        try:
            arr = np.array(sub["constant"], dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{fl}.constant: expected a nested list of numbers")
        if arr.shape != tuple(shape):
            raise ConfigError(
                f"{fl}.constant: expected shape {tuple(shape)}, got {arr.shape}"
            )
        return arr
    if "polynomial" in sub:
        terms = _need(sub["polynomial"], "terms", f"{fl}.polynomial")
        return polynomial_map(n_vars, shape, terms, f"{fl}.polynomial.terms")
    raise ConfigError(f"{fl}: expected 'constant' or 'polynomial'")


# ---------------------------------------------------------------------------
# building objects from config nodes


def domain_from_config(node, label):
    n = _int(_need(node, "n", label), f"{label}.n")
    if n < 0:
        raise ConfigError(f"{label}.n: must be nonnegative")
    bounds = node.get("bounds")
    if bounds is not None:
        if not isinstance(bounds, list) or len(bounds) != n:
            raise ConfigError(f"{label}.bounds: expected {n} [lo, hi] pairs")
        bounds = [
            [_num(v, f"{label}.bounds[{i}][{j}]") for j, v in enumerate(pair)]
            if isinstance(pair, list) and len(pair) == 2
            else _bad_pair(label, i)
            for i, pair in enumerate(bounds)
        ]
    periodic = node.get("periodic")
    if periodic is not None:
        if not isinstance(periodic, list) or len(periodic) != n:
            raise ConfigError(f"{label}.periodic: expected {n} booleans")
        for i, flag in enumerate(periodic):
            if not isinstance(flag, bool):
                raise ConfigError(f"{label}.periodic[{i}]: expected a boolean")
    try:
        return ChartDomain(n, bounds, periodic)
    except ValueError as exc:
        raise ConfigError(f"{label}: {exc}")


def _bad_pair(label, i):
    raise ConfigError(f"{label}.bounds[{i}]: expected an [lo, hi] pair")


def bundle_from_config(node, label="bundle"):
    base = domain_from_config(node, label)
    m = _int(_need(node, "m", label), f"{label}.m")
    if m < 0:
        raise ConfigError(f"{label}.m: must be nonnegative")
    n = base.n
    allowed = {"n", "m", "bounds", "periodic", "gamma", "c", "omega"}
    unknown = sorted(set(node) - allowed)
    if unknown:
        raise ConfigError(f"{label}: unknown key '{unknown[0]}'")
    Gamma = _table_field(node, "gamma", n, (n, m, m), label)
    c = _table_field(node, "c", n, (m, m, m), label)
    omega = _table_field(node, "omega", n, (m, n, n), label)
    return LPBundleChart(base, m, Gamma, c, omega)


def group_from_config(node, label):
    if isinstance(node, str):
        node = {"name": node}
    name = _need(node, "name", label)
    if name == "so3":
        return so3()
    if name == "heisenberg3":
        return heisenberg3(_num(node.get("coupling", 1.0), f"{label}.coupling"))
    if name == "abelian":
        dim = _int(_need(node, "dim", label), f"{label}.dim")
        if dim < 1:
            raise ConfigError(f"{label}.dim: must be positive")
        return abelian(dim)
    raise ConfigError(f"{label}.name: unknown group {name!r}")


def scenario_from_config(node, label="scenario"):
    base = domain_from_config(_need(node, "base", label), f"{label}.base")
    G = group_from_config(_need(node, "group", label), f"{label}.group")
    d, k = base.n, G.dim
    conn = node.get("connection")
    A = None
    if conn is not None:
        A = _table_field({"connection": conn}, "connection", d, (d, k), label)
        if isinstance(A, np.ndarray):
            tab = A
            A = SmoothMap(
                d, d * k, lambda x, t=tab: t, out_shape=(d, k), name="connection"
            )
    rep = node.get("representation")
    repW = None
    if rep == "defining":
        repW = defining_representation(G)
    elif isinstance(rep, dict) and "trivial" in rep:
        repW = trivial_representation(G, _int(rep["trivial"], f"{label}.representation.trivial"))
    elif rep is not None:
        raise ConfigError(
            f"{label}.representation: expected 'defining' or {{trivial: dim}}"
        )
    try:
        return PrincipalScenario(base, G, A=A, repW=repW)
    except (ValueError, DimensionMismatch) as exc:
        raise ConfigError(f"{label}: {exc}")


def resolve_system(cfg, args):
    """Build the record the command will operate on.

    A catalog name (flag or config key) wins over an inline bundle; giving
    both is rejected so a config cannot silently shadow itself.
    """
    name = args.system or cfg.get("system")
    if name is not None and "bundle" in cfg:
        raise ConfigError("give either 'system' or 'bundle', not both")
    if name is not None:
        if not isinstance(name, str):
            raise ConfigError("system: expected a catalog name")
        params = cfg.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params: expected a mapping")
        try:
            return build_system(name, **params)
        except KeyError as exc:
            raise ConfigError(exc.args[0])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}")
    if "bundle" in cfg:
        bundle = bundle_from_config(cfg["bundle"])
        lag = None
        if "lagrangian" in cfg:
            poly = _need(cfg["lagrangian"], "polynomial", "lagrangian")
            terms = _need(poly, "terms", "lagrangian.polynomial")
            n_vars = 2 * bundle.n + bundle.m
            L = polynomial_map(n_vars, (), terms, "lagrangian.polynomial.terms")
            lag = LPLagrangian(bundle, L, name="inline")
        return SystemRecord(name="inline", bundle=bundle, lagrangian=lag)
    raise ConfigError("config must name a catalog 'system' or define a 'bundle'")


def resolve_initial(cfg, record):
    node = cfg.get("initial")
    if node is None:
        if record.initial is None:
            raise ConfigError("initial: required (no catalog default available)")
        return record.initial
    n, m = record.bundle.n, record.bundle.m
    q = _vector(_need(node, "q", "initial"), n, "initial.q")
    qdot = _vector(_need(node, "qdot", "initial"), n, "initial.qdot")
    v = _vector(node.get("v", [0.0] * m), m, "initial.v")
    return LPState(q, qdot, v)


# ---------------------------------------------------------------------------
# atomic writers


def _write_text(path, text):
    dirname = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, payload):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{float(x):.17g}" for x in row))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_check_axioms(cfg, args):
    record = resolve_system(cfg, args)
    tol = _resolve_tol(cfg, args, 1e-8)
    samples = _int(cfg.get("samples", 100), "samples")
    seed = _resolve_seed(args.seed, cfg)
    out = _resolve_out(cfg, args)

    report = check_axioms(record.bundle, n_samples=samples, seed=seed, tol=tol)
    _write_text(os.path.join(out, "axiom_report.txt"), report.as_text() + "\n")
    _write_json(os.path.join(out, "axiom_report.json"), report.as_dict())

    if report.passed:
        print(f"{record.name}: all closure conditions hold (tol {tol:g})")
        return 0
    for cond in report.conditions:
        if not cond.passed:
            print(
                f"violated: {cond.name} (max residual {cond.max_residual:.3e})",
                file=sys.stderr,
            )
    print(f"{record.name}: FAIL, see axiom_report.txt", file=sys.stderr)
    return 2


def _lp_residual_max(sys, traj, max_probes=25):
    """Largest equation residual when the solved accelerations are fed back."""
    idx = np.unique(np.linspace(0, len(traj) - 1, max_probes).astype(int))
    worst = 0.0
    for i in idx:
        s = traj.states[i]
        qdd, vd = accelerations(sys, s)
        hor, ver = lp_operator(sys, LPState2(s.q, s.qdot, s.v, qdd, vd))
        for part in (hor, ver):
            if part.size:
                worst = max(worst, float(np.max(np.abs(part))))
    return worst


def cmd_simulate(cfg, args):
    record = resolve_system(cfg, args)
    if record.lagrangian is None:
        raise ConfigError("simulate needs a 'lagrangian' for the inline bundle")
    s0 = resolve_initial(cfg, record)
    t_end, dt, method = _resolve_run(cfg, args)
    seed = _resolve_seed(args.seed, cfg)
    out = _resolve_out(cfg, args)
    sys_ = record.lagrangian

    try:
        traj = _integrate(sys_, s0, t_end, dt, method)
    except (SingularHessian, NoConvergence, ChartExit) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        print(
            "state: q=" + _fmt_vec(s0.q) + " qdot=" + _fmt_vec(s0.qdot)
            + " v=" + _fmt_vec(s0.v),
            file=sys.stderr,
        )
        return 3

    energies = [energy(sys_, s) for s in traj.states]
    drift = float(max(abs(e - energies[0]) for e in energies))
    resid = _lp_residual_max(sys_, traj)

    noether = None
    if record.action is not None:
        act = record.action
        eye = np.eye(act.dim_g)
        series = [
            [noether_current(sys_, act, s, eye[g]) for s in traj.states]
            for g in range(act.dim_g)
        ]
        noether = {
            "initial": [col[0] for col in series],
            "final": [col[-1] for col in series],
            "drift_max": [
                float(max(abs(x - col[0]) for x in col)) for col in series
            ],
            "series": series,
        }

    write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj)
    payload = {
        "system": record.name,
        "method": method,
        "t_end": t_end,
        "dt": dt,
        "seed": seed,
        "rows": len(traj),
        "energy_initial": energies[0],
        "energy_drift_max": drift,
        "lp_residual_max": resid,
    }
    if noether is not None:
        payload["noether"] = noether
    _write_json(os.path.join(out, "simulate_report.json"), payload)
    print(
        f"{record.name}: {len(traj)} rows, energy drift {drift:.3e}, "
        f"residual {resid:.3e}"
    )
    return 0


def _fmt_vec(v):
    return "[" + ", ".join(f"{x:.17g}" for x in np.atleast_1d(v)) + "]"


def _structure_sample_rows(bundle, n_dump, seed):
    """Seeded base points with the structure functions evaluated at each."""
    n, m = bundle.n, bundle.m
    header = [f"x{i + 1}" for i in range(n)]
    header += [
        f"Gamma_{i + 1}_{a + 1}_{b + 1}"
        for i in range(n)
        for a in range(m)
        for b in range(m)
    ]
    header += [
        f"c_{g + 1}_{a + 1}_{b + 1}"
        for g in range(m)
        for a in range(m)
        for b in range(m)
    ]
    header += [
        f"omega_{a + 1}_{i + 1}_{j + 1}"
        for a in range(m)
        for i in range(n)
        for j in range(n)
    ]
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_dump):
        x = bundle.base.sample(rng)
        G = np.asarray(eval_map(bundle.Gamma, x), dtype=float)
        C = np.asarray(eval_map(bundle.c, x), dtype=float)
        Om = np.asarray(eval_map(bundle.omega, x), dtype=float)
        rows.append(np.concatenate([x, G.ravel(), C.ravel(), Om.ravel()]))
    return header, rows


def cmd_reduce(cfg, args):
    record = None
    if "scenario" in cfg:
        if args.system or "system" in cfg:
            raise ConfigError("give either 'system' or 'scenario', not both")
        scenario = scenario_from_config(cfg["scenario"])
    else:
        record = resolve_system(cfg, args)
        if record.scenario is None:
            raise ConfigError(
                f"system '{record.name}' carries no principal-bundle scenario"
            )
        scenario = record.scenario

    seed = _resolve_seed(args.seed, cfg)
    samples = _int(cfg.get("samples", 100), "samples")
    n_dump = _int(cfg.get("dump_samples", 20), "dump_samples")
    out = _resolve_out(cfg, args)

    handle = record.handle if record is not None and record.handle is not None else None
    if handle is None:
        handle = build_reduced_bundle(scenario, n_samples=samples, seed=seed)

    header, rows = _structure_sample_rows(handle.bundle, n_dump, seed)
    _write_csv(os.path.join(out, "structure_samples.csv"), header, rows)

    trajectory_rows = 0
    if record is not None and record.lagrangian is not None:
        s0 = resolve_initial(cfg, record)
        t_end, dt, method = _resolve_run(cfg, args)
        traj = _integrate(record.lagrangian, s0, t_end, dt, method)
        write_trajectory_csv(os.path.join(out, "reduced_trajectory.csv"), traj)
        trajectory_rows = len(traj)

    payload = {
        "system": record.name if record is not None else "inline scenario",
        "group": scenario.G.name,
        "base_dim": scenario.baseB.n,
        "algebra_dim": handle.k,
        "aux_dim": handle.dim_w,
        "fiber_dim": handle.bundle.m,
        "axioms": handle.provenance["axioms"],
        "structure_samples": n_dump,
        "trajectory_rows": trajectory_rows,
        "seed": seed,
    }
    _write_json(os.path.join(out, "reduce_report.json"), payload)
    extra = f", {trajectory_rows} trajectory rows" if trajectory_rows else ""
    print(
        f"reduced bundle (fiber dim {handle.bundle.m}) passed closure checks; "
        f"{n_dump} structure samples{extra}"
    )
    return 0


def cmd_stages(cfg, args):
    record = resolve_system(cfg, args)
    if record.scenario is None or record.unreduced_lagrangian is None:
        raise ConfigError(
            f"system '{record.name}' has no stored invariant Lagrangian to stage"
        )
    node = cfg.get("stages", {})
    if not isinstance(node, dict):
        raise ConfigError("stages: expected a mapping")
    nidx = node.get("nidx", record.params.get("nidx"))
    if nidx is None:
        raise ConfigError("stages.nidx: required (no catalog default)")
    nidx = tuple(_int(i, "stages.nidx") for i in nidx)

    seed = _resolve_seed(args.seed, cfg)
    t_end, dt, method = _resolve_run(cfg, args)
    out = _resolve_out(cfg, args)
    sc = record.scenario

    override = None
    if "override_A_N" in node:
        d = sc.baseB.n
        s_dim = sc.k - len(nidx)
        shape = (d + s_dim, len(nidx))
        override = _table_field(
            {"override_A_N": node["override_A_N"]},
            "override_A_N",
            d + s_dim,
            shape,
            "stages",
        )
        if isinstance(override, np.ndarray):
            tab = override
            override = SmoothMap(
                d + s_dim,
                tab.size,
                lambda x, t=tab: t,
                out_shape=shape,
                name="override_A_N",
            )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = stages_reduce(sc, nidx, override_A_N=override, seed=seed)
        staged_sys = two_stage_lagrangian(res, sc, record.unreduced_lagrangian)
    messages = [str(w.message) for w in caught]

    s0 = resolve_initial(cfg, record)
    direct = _integrate(record.lagrangian, s0, t_end, dt, method)
    staged = _integrate(
        staged_sys, LPState(s0.q, s0.qdot, res.beta @ s0.v), t_end, dt, method
    )
    dev = 0.0
    for sd, ss in zip(direct.states, staged.states):
        dev = max(dev, float(np.max(np.abs(res.beta @ sd.v - ss.v))))
        if sd.q.size:
            dev = max(dev, float(np.max(np.abs(sd.q - ss.q))))

    rng = np.random.default_rng(seed)
    lag_dev = 0.0
    n, m = record.bundle.n, record.bundle.m
    for _ in range(25):
        q = record.bundle.base.sample(rng)
        qd = rng.standard_normal(n)
        v = rng.standard_normal(m)
        a = float(record.lagrangian.value(q, qd, v))
        b = float(staged_sys.value(q, qd, res.beta @ v))
        lag_dev = max(lag_dev, abs(a - b))

    payload = {
        "system": record.name,
        "nidx": list(nidx),
        "override": override is not None,
        "structure_deviation": res.structure_deviation,
        "compatibility_deviation": res.compatibility_deviation,
        "lagrangian_deviation": lag_dev,
        "trajectory_deviation_max": dev,
        "rows": len(direct),
        "warnings": messages,
        "t_end": t_end,
        "dt": dt,
        "seed": seed,
    }
    _write_json(os.path.join(out, "stages_report.json"), payload)
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)
    tag = " (informational, overridden connection)" if override is not None else ""
    print(
        f"{record.name}: staged vs direct trajectory deviation {dev:.3e}{tag}"
    )
    return 0


def cmd_noether(cfg, args):
    record = resolve_system(cfg, args)
    if record.action is None:
        raise ConfigError(f"system '{record.name}' declares no symmetry action")
    if record.lagrangian is None:
        raise ConfigError("noether needs a system with a Lagrangian")
    act = record.action
    s0 = resolve_initial(cfg, record)
    t_end, dt, method = _resolve_run(cfg, args)
    seed = _resolve_seed(args.seed, cfg)
    out = _resolve_out(cfg, args)
    sys_ = record.lagrangian

    etas_node = cfg.get("etas")
    if etas_node is None:
        etas = [np.eye(act.dim_g)[g] for g in range(act.dim_g)]
    else:
        if not isinstance(etas_node, list) or not etas_node:
            raise ConfigError("etas: expected a nonempty list of algebra vectors")
        etas = [
            _vector(e, act.dim_g, f"etas[{i}]") for i, e in enumerate(etas_node)
        ]

    traj = _integrate(sys_, s0, t_end, dt, method)
    N = len(traj)
    currents = [
        np.array([noether_current(sys_, act, s, eta) for s in traj.states])
        for eta in etas
    ]
    try:
        residuals = [noether_drift_residual(sys_, act, traj, eta) for eta in etas]
    except ValueError as exc:
        raise ConfigError(str(exc))

    header = ["t"]
    header += [f"J{g + 1}" for g in range(len(etas))]
    header += [f"resid{g + 1}" for g in range(len(etas))]
    rows = []
    for i in range(2, N - 2):
        row = [traj.times[i]]
        row += [col[i] for col in currents]
        row += [col[i - 2] for col in residuals]
        rows.append(row)
    _write_csv(os.path.join(out, "noether.csv"), header, rows)

    payload = {
        "system": record.name,
        "generators": len(etas),
        "rows": len(rows),
        "current_drift_max": [
            float(max(abs(x - col[0]) for x in col)) for col in currents
        ],
        "residual_max": [
            float(np.max(np.abs(col))) if col.size else 0.0 for col in residuals
        ],
        "t_end": t_end,
        "dt": dt,
        "seed": seed,
    }
    _write_json(os.path.join(out, "noether_report.json"), payload)
    worst = max(payload["residual_max"])
    print(
        f"{record.name}: {len(etas)} generators, worst drift residual {worst:.3e}"
    )
    return 0


# ---------------------------------------------------------------------------
# entry point


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--system", metavar="NAME", help="catalog system name")
    p.add_argument("--t-end", dest="t_end", type=float, metavar="T",
                   help="integration end time")
    p.add_argument("--dt", type=float, metavar="H", help="integration step")
    p.add_argument("--method", choices=("rk4", "euler"), help="integrator")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--tol", type=float, help="tolerance for checks")
    p.add_argument("--out", metavar="DIR", help="output directory")


_COMMANDS = (
    ("check-axioms", cmd_check_axioms, "sample the bracket-closure conditions"),
    ("simulate", cmd_simulate, "integrate a system and write diagnostics"),
    ("reduce", cmd_reduce, "build and dump a reduced bundle"),
    ("stages", cmd_stages, "compare direct and two-stage reduction"),
    ("noether", cmd_noether, "write symmetry-current drift columns"),
)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lpmech",
        description="bundle-chart mechanics: closure checks, simulation, reduction",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, handler, help_text in _COMMANDS:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(handler=handler)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else {}
        return args.handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NotSupported, DimensionMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AxiomViolation, InvarianceViolation, NotNormal) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 2
    except (SingularHessian, NoConvergence, ChartExit) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
