"""Scenario files (versioned JSON, degrees at the boundary) and CSV traces.

The scenario schema is strict: unknown keys are rejected, every error names
the offending field path, and load -> save -> load is an exact identity
(angle serialization picks degree values whose radian image is bit-exact).
"""

from __future__ import annotations

import json
import math

import numpy as np

from .controller import ControllerConfig
from .errors import ScenarioFormatError
from .linkage import FIXED, REVOLUTE, DHRow, LinkageModel, LinkInertia
from .muscle import Muscle, MuscleAttachment, MuscleSet, TendonCurve
from .simulate import Scenario, Trace

SCHEMA_VERSION = 1

_PSI_MODES = ("backward-difference", "directional-analytic")


# ---------------------------------------------------------------------------
# strict document walking

class _Node:
    """A dict from the document plus its key path, with typed accessors."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ScenarioFormatError("expected an object", path)
        self.data = data
        self.path = path
        self._seen = set()

    def _get(self, key, required=True):
        self._seen.add(key)
        if key not in self.data:
            if required:
                raise ScenarioFormatError("missing required key", f"{self.path}.{key}")
            return None
        return self.data[key]

    def child(self, key):
        return _Node(self._get(key), f"{self.path}.{key}")

    def number(self, key, default=None):
        raw = self._get(key, required=default is None)
        if raw is None:
            return default
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ScenarioFormatError(f"expected a number, got {type(raw).__name__}", f"{self.path}.{key}")
        return float(raw)

    def integer(self, key, default=None):
        raw = self._get(key, required=default is None)
        if raw is None:
            return default
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ScenarioFormatError(f"expected an integer, got {type(raw).__name__}", f"{self.path}.{key}")
        return raw

    def string(self, key, default=None, choices=None):
        raw = self._get(key, required=default is None)
        if raw is None:
            return default
        if not isinstance(raw, str):
            raise ScenarioFormatError(f"expected a string, got {type(raw).__name__}", f"{self.path}.{key}")
        if choices and raw not in choices:
            raise ScenarioFormatError(f"must be one of {choices}, got {raw!r}", f"{self.path}.{key}")
        return raw

    def vector(self, key, size=None):
        raw = self._get(key)
        path = f"{self.path}.{key}"
        if not isinstance(raw, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw):
            raise ScenarioFormatError("expected a list of numbers", path)
        if size is not None and len(raw) != size:
            raise ScenarioFormatError(f"expected {size} entries, got {len(raw)}", path)
        return np.array(raw, dtype=float)

    def items(self, key):
        raw = self._get(key)
        path = f"{self.path}.{key}"
        if not isinstance(raw, list):
            raise ScenarioFormatError("expected a list", path)
        return [(f"{path}[{i}]", entry) for i, entry in enumerate(raw)]

    def optional_null(self, key):
        """Key that may be absent or null; returns the raw value otherwise."""
        self._seen.add(key)
        return self.data.get(key)

    def finish(self):
        unknown = set(self.data) - self._seen
        if unknown:
            raise ScenarioFormatError(
                f"unknown key(s): {', '.join(sorted(unknown))}", self.path
            )


def _matrix_like(node, key, size):
    """Scalar (times identity), vector (diagonal) or full matrix."""
    raw = node._get(key)
    path = f"{node.path}.{key}"
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw) * np.eye(size)
    if isinstance(raw, list) and raw and isinstance(raw[0], list):
        try:
            M = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            raise ScenarioFormatError("expected a numeric matrix", path) from None
        if M.shape != (size, size):
            raise ScenarioFormatError(f"expected a {size}x{size} matrix, got {M.shape}", path)
        return M
    if isinstance(raw, list):
        if len(raw) != size or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw):
            raise ScenarioFormatError(f"expected {size} diagonal entries", path)
        return np.diag(np.array(raw, dtype=float))
    raise ScenarioFormatError("expected a scalar, vector or matrix", path)


# ---------------------------------------------------------------------------
# exact angle conversion at the boundary

def _deg_exact(rad: float) -> float:
    """Degrees value whose radians() image reproduces ``rad`` bit-exactly.

    math.degrees/radians are not mutual inverses in floating point; for
    values that originally came from a degrees field an exact preimage
    exists within a few ulps, which keeps file round-trips an identity.
    """
    d = math.degrees(rad)
    if math.radians(d) == rad:
        return d
    up = down = d
    for _ in range(4):
        up = math.nextafter(up, math.inf)
        if math.radians(up) == rad:
            return up
        down = math.nextafter(down, -math.inf)
        if math.radians(down) == rad:
            return down
    return d


def _num(x) -> float:
    """Plain Python float (JSON serializer rejects numpy scalars)."""
    return float(x)


# ---------------------------------------------------------------------------
# load

def load_scenario(path) -> Scenario:
    """Parse, validate and convert a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    try:
        return scenario_from_dict(doc)
    except ScenarioFormatError:
        raise
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from None


def scenario_from_dict(doc) -> Scenario:
    root = _Node(doc, "$")
    version = root.integer("version")
    if version != SCHEMA_VERSION:
        raise ScenarioFormatError(
            f"unsupported schema version {version}; this build reads version {SCHEMA_VERSION}",
            "$.version",
        )
    name = root.string("name", default="scenario")

    mnode = root.child("model")
    rows = []
    for rpath, entry in mnode.items("dh_rows"):
        rnode = _Node(entry, rpath)
        kind = rnode.string("kind", choices=(REVOLUTE, FIXED))
        rows.append(
            DHRow(
                theta_offset=math.radians(rnode.number("theta_deg")),
                d=rnode.number("d"),
                a=rnode.number("a"),
                alpha=math.radians(rnode.number("alpha_deg")),
                kind=kind,
            )
        )
        rnode.finish()
    inertias = []
    for ipath, entry in mnode.items("inertias"):
        inode = _Node(entry, ipath)
        inertia_rows = inode._get("inertia")
        if (not isinstance(inertia_rows, list) or len(inertia_rows) != 3
                or any(not isinstance(r, list) or len(r) != 3 for r in inertia_rows)):
            raise ScenarioFormatError("expected a 3x3 matrix", f"{ipath}.inertia")
        inertias.append(
            LinkInertia(
                frame=inode.integer("frame"),
                mass=inode.number("mass"),
                com=inode.vector("com", 3),
                inertia=np.array(inertia_rows, dtype=float),
            )
        )
        inode.finish()
    model = LinkageModel(
        dh_rows=tuple(rows),
        inertias=tuple(inertias),
        base_translation=mnode.vector("base_translation", 3),
        base_rpy=np.radians(mnode.vector("base_rpy_deg", 3)),
        gravity=mnode.vector("gravity", 3),
    )
    mnode.finish()

    muscles = []
    for mpath, entry in root.items("muscles"):
        mu = _Node(entry, mpath)
        origin = _Node(mu._get("origin"), f"{mpath}.origin")
        insertion = _Node(mu._get("insertion"), f"{mpath}.insertion")
        tendon = _Node(mu._get("tendon"), f"{mpath}.tendon")
        muscles.append(
            Muscle(
                name=mu.string("name"),
                origin=MuscleAttachment(origin.integer("frame"), origin.vector("point", 3)),
                insertion=MuscleAttachment(insertion.integer("frame"), insertion.vector("point", 3)),
                tendon=TendonCurve(
                    slack_length=tendon.number("slack_length"),
                    f_max=tendon.number("f_max"),
                    eps_ref=tendon.number("eps_ref", default=0.033),
                    eps_toe=tendon.number("eps_toe", default=0.01),
                ),
            )
        )
        for node in (origin, insertion, tendon, mu):
            node.finish()
    muscle_set = MuscleSet(tuple(muscles))

    cnode = root.child("controller")
    kp = cnode.vector("kp")
    n = kp.size
    if np.any(kp <= 0):
        raise ScenarioFormatError("entries must be positive", f"{cnode.path}.kp")
    kd = cnode.vector("kd", n)
    if np.any(kd <= 0):
        raise ScenarioFormatError("entries must be positive", f"{cnode.path}.kd")
    u_limit_raw = cnode.optional_null("u_limit")
    if u_limit_raw is not None and (isinstance(u_limit_raw, bool) or not isinstance(u_limit_raw, (int, float))):
        raise ScenarioFormatError("expected a number or null", f"{cnode.path}.u_limit")
    controller = ControllerConfig(
        kp=kp,
        kd=kd,
        Q=_matrix_like(cnode, "Q", 2 * n),
        R=_matrix_like(cnode, "R", n),
        gamma=_matrix_like(cnode, "gamma", n),
        pinv_rel_tol=cnode.number("pinv_rel_tol", default=1e-10),
        psi_dot_mode=cnode.string("psi_dot_mode", default=_PSI_MODES[0], choices=_PSI_MODES),
        u_limit=None if u_limit_raw is None else float(u_limit_raw),
    )
    cnode.finish()

    snode = root.child("sim")
    gravity_override_raw = snode.optional_null("gravity_override")
    gravity_override = None
    if gravity_override_raw is not None:
        if (not isinstance(gravity_override_raw, list)
                or len(gravity_override_raw) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in gravity_override_raw)):
            raise ScenarioFormatError("expected a 3-vector or null", f"{snode.path}.gravity_override")
        gravity_override = np.array(gravity_override_raw, dtype=float)
    scenario = Scenario(
        model=model,
        muscles=muscle_set,
        controller=controller,
        q_target_deg=snode.vector("q_target_deg", model.dof),
        init_offset_deg=snode.number("init_offset_deg", default=10.0),
        initial_strain=snode.number("initial_strain", default=0.01),
        dt=snode.number("dt", default=1e-3),
        t_end=snode.number("t_end", default=6.0),
        seed=snode.integer("seed", default=42),
        name=name,
        gravity_override=gravity_override,
    )
    snode.finish()
    root.finish()
    return scenario


# ---------------------------------------------------------------------------
# save

def scenario_to_dict(scenario: Scenario) -> dict:
    model = scenario.model
    return {
        "version": SCHEMA_VERSION,
        "name": scenario.name,
        "model": {
            "base_translation": [_num(v) for v in model.base_translation],
            "base_rpy_deg": [_deg_exact(v) for v in model.base_rpy],
            "gravity": [_num(v) for v in model.gravity],
            "dh_rows": [
                {
                    "kind": row.kind,
                    "theta_deg": _deg_exact(row.theta_offset),
                    "d": _num(row.d),
                    "a": _num(row.a),
                    "alpha_deg": _deg_exact(row.alpha),
                }
                for row in model.dh_rows
            ],
            "inertias": [
                {
                    "frame": body.frame,
                    "mass": _num(body.mass),
                    "com": [_num(v) for v in body.com],
                    "inertia": [[_num(v) for v in row] for row in body.inertia],
                }
                for body in model.inertias
            ],
        },
        "muscles": [
            {
                "name": m.name,
                "origin": {"frame": m.origin.frame, "point": [_num(v) for v in m.origin.point]},
                "insertion": {"frame": m.insertion.frame, "point": [_num(v) for v in m.insertion.point]},
                "tendon": {
                    "slack_length": _num(m.tendon.slack_length),
                    "f_max": _num(m.tendon.f_max),
                    "eps_ref": _num(m.tendon.eps_ref),
                    "eps_toe": _num(m.tendon.eps_toe),
                },
            }
            for m in scenario.muscles.muscles
        ],
        "controller": {
            "kp": [_num(v) for v in scenario.controller.kp],
            "kd": [_num(v) for v in scenario.controller.kd],
            "Q": [[_num(v) for v in row] for row in scenario.controller.Q],
            "R": [[_num(v) for v in row] for row in scenario.controller.R],
            "gamma": [[_num(v) for v in row] for row in scenario.controller.gamma],
            "pinv_rel_tol": _num(scenario.controller.pinv_rel_tol),
            "psi_dot_mode": scenario.controller.psi_dot_mode,
            "u_limit": None if scenario.controller.u_limit is None else _num(scenario.controller.u_limit),
        },
        "sim": {
            "q_target_deg": [_num(v) for v in scenario.q_target_deg],
            "init_offset_deg": _num(scenario.init_offset_deg),
            "initial_strain": _num(scenario.initial_strain),
            "dt": _num(scenario.dt),
            "t_end": _num(scenario.t_end),
            "seed": scenario.seed,
            "gravity_override": None if scenario.gravity_override is None
            else [_num(v) for v in scenario.gravity_override],
        },
    }


def save_scenario(scenario: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def scenarios_identical(a: Scenario, b: Scenario) -> bool:
    """Exact field-by-field equality (arrays compared bitwise)."""
    return scenario_to_dict(a) == scenario_to_dict(b)


# ---------------------------------------------------------------------------
# CSV traces

def trace_header(n: int, m: int) -> str:
    cols = ["t"]
    cols += [f"q{i}" for i in range(1, n + 1)]
    cols += [f"qdes{i}" for i in range(1, n + 1)]
    cols += [f"qe{i}" for i in range(1, n + 1)]
    cols += [f"qd{i}" for i in range(1, n + 1)]
    cols += [f"S{j}" for j in range(1, m + 1)]
    cols += [f"L{j}" for j in range(1, m + 1)]
    cols += [f"F{j}" for j in range(1, m + 1)]
    cols += [f"u{j}" for j in range(1, m + 1)]
    cols += [f"tau{i}" for i in range(1, n + 1)]
    cols += ["V", "Vdot"]
    return ",".join(cols)


def write_trace(trace: Trace, path):
    """CSV export; floats use repr so re-parsing is lossless."""
    n = trace.q.shape[1]
    m = trace.S.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace_header(n, m) + "\n")
        for k in range(len(trace)):
            row = [trace.t[k]]
            row += list(trace.q[k]) + list(trace.q_des[k]) + list(trace.q_err[k]) + list(trace.qd[k])
            row += list(trace.S[k]) + list(trace.L[k]) + list(trace.F[k]) + list(trace.u[k])
            row += list(trace.tau[k]) + [trace.V[k], trace.V_dot[k]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trace(path) -> dict:
    """Parse a trace CSV back into named column arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows]) if rows else np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}
