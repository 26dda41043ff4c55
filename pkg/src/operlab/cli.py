"""oper-lab: command line front end for the laboratory pipelines.

Subcommands cover the whole chain: Lie-theoretic identities (`lie`),
formal gauge normalization (`gauge normalize`), numeric loop monodromy
(`monodromy`), parabolic cohomology (`cohomology dims|basis`),
hyperbolic quadrature (`domain area`), period cocycles (`es-cocycle`),
the pairing suite (`pairing gram|cross-validate|transversality|hodge`),
and the chained `full-suite`.

Configuration resolves in three layers: built-in defaults, then a
--config file (flat ``key = value`` text with keys matching flag
names), then explicit flags.  Reports embed the seed and every
tolerance that influenced a verdict and carry no timings, so identical
(config, seed, data) runs emit byte-identical reports.

Exit codes: 0 every check PASSes, 1 some check FAILs, 2 no failure but
at least one INCONCLUSIVE, 64 configuration or schema errors.
"""

import argparse
import io
import json
import math
import sys

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__
from .continuation import ContinuationFailure, circle_path, continue_along
from .eichler import (
    DecompositionFailure,
    ESConsistencyFailure,
    decomposition_check,
    es_cocycle,
)
from .exactscalar import is_exact_array, to_complex, zeros_q
from .hyperbolic import (
    AreaDensity,
    QuadratureFailure,
    fixture_form,
    fixture_group,
    integrate_domain,
    load_cusp_form,
    transformation_law_check,
)
from .jsonio import (
    connection_from_json,
    matrix_to_json,
    system_from_json,
)
from .lie import (
    bracket,
    invariants_basis,
    killing_adpower_identity_check,
    killing_identity_grid,
    principal_triple,
)
from .pairing import (
    SHIPPED_FORMS,
    cross_validate,
    gram_matrix,
    hodge_report,
    transversality_check,
)
from .reports import (
    EXIT_CONFIG,
    check_record,
    gap_verdict,
    gram_report,
    gram_to_csv,
    jsonable,
    make_report,
    render_report,
    threshold_verdict,
    verdict_exit,
)
from .series import (
    FormalConnection,
    WeaklyPreparedViolation,
    gauge_transform,
    is_weakly_prepared,
    local_monodromy,
    normalize,
    radius,
    residue,
)
from .surface import (
    adjoint_module,
    coboundary_space,
    h1p_basis,
    h1p_dimension,
    parabolic_subspace,
    representation_from_json,
    symmetric_power_module,
    z1_basis,
)

__all__ = ["ConfigError", "ingest_qexp", "build_parser", "run", "main"]

DEFAULT_SEED = 1729

_FIXTURE_ALIASES = {
    "torus": "once_punctured_torus",
    "punctured_torus": "once_punctured_torus",
    "once_punctured_torus": "once_punctured_torus",
    "gamma0_4": "gamma0_4",
    "genus2": "genus2_closed",
    "genus2_closed": "genus2_closed",
    "bolza": "genus2_closed",
}


class ConfigError(Exception):
    """Bad flags, config file contents, or input data shape."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the report contract
    # reserves 2 for INCONCLUSIVE, so config problems become exceptions
    # that main() maps to exit 64.  Abbreviated flags are rejected too:
    # --j must not quietly toggle --json on subcommands without a --j.
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise ConfigError(message)


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_complex(text):
    return complex(str(text).strip().replace(" ", ""))


class _FlagSet:
    """Flags registered with defaults held outside argparse, so the
    merge order is defaults < config file < explicit flags."""

    def __init__(self, parser):
        self.parser = parser
        self.defaults = {}
        self.types = {}
        self.choices = {}
        self.required = set()

    def add(
        self,
        name,
        *aliases,
        default=None,
        type=str,
        choices=None,
        flag=False,
        required=False,
        help="",
    ):
        dest = name.lstrip("-").replace("-", "_")
        names = (name,) + aliases
        if flag:
            self.parser.add_argument(
                *names,
                dest=dest,
                action="store_true",
                default=argparse.SUPPRESS,
                help=help,
            )
            self.types[dest] = _parse_bool
            default = bool(default)
        else:
            self.parser.add_argument(
                *names,
                dest=dest,
                type=type,
                choices=choices,
                default=argparse.SUPPRESS,
                help=help,
            )
            self.types[dest] = type
        self.defaults[dest] = default
        self.choices[dest] = choices
        if required:
            self.required.add(dest)
        return self

    def globals(self, tol_default, tol_help):
        self.add(
            "--mode",
            default="float",
            choices=("float", "exact"),
            help="arithmetic mode where the pipeline supports both",
        )
        self.add("--tol", default=tol_default, type=float, help=tol_help)
        self.add(
            "--seed",
            default=DEFAULT_SEED,
            type=int,
            help="seed for randomized checks; echoed in every report",
        )
        self.add(
            "--out",
            "--report",
            default=None,
            help="write the report here (.csv for Gram matrices, JSON otherwise)",
        )
        self.add("--json", flag=True, help="print the full JSON report to stdout")
        self.add(
            "--config",
            default=None,
            help="flat key = value file supplying flag defaults",
        )
        return self


def _read_config(path, flagset):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key == "config":
            raise ConfigError(f"{path}:{lineno}: config files cannot nest")
        if key not in flagset.defaults:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} for this subcommand"
            )
        try:
            values[key] = flagset.types[key](val)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}")
        choices = flagset.choices.get(key)
        if choices and values[key] not in choices:
            raise ConfigError(
                f"{path}:{lineno}: {key} must be one of {', '.join(map(str, choices))}"
            )
    return values


def _resolve_fixture(name):
    if not name:
        raise ConfigError("--fixture is required")
    key = str(name).strip().lower()
    if key not in _FIXTURE_ALIASES:
        known = ", ".join(sorted(set(_FIXTURE_ALIASES.values())))
        raise ConfigError(f"unknown fixture {name!r}; known fixtures: {known}")
    return _FIXTURE_ALIASES[key]


def _load_json_file(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}")


def _max_abs(arr):
    arr = np.asarray(arr)
    if arr.size == 0:
        return 0.0
    if is_exact_array(arr):
        arr = to_complex(arr)
    return float(np.max(np.abs(np.asarray(arr, dtype=complex))))


def _exactly_zero(arr):
    return all(x.is_zero() for x in np.asarray(arr).ravel())


def ingest_qexp(path, rep=None, eval_tol=1e-12, law_tol=1e-6):
    """Load and vet a q-expansion file.

    Policy on top of the raw loader: malformed lines are rejected with
    their line number, non-cuspidal input (a constant term) is rejected
    outright, and a short expansion (top exponent below 10) is accepted
    with a warning plus a widened evaluation floor: the height below
    which the stored tail bound cannot reach eval_tol.  With a holonomy
    rep the transformation law is spot checked and failures rejected.

    Returns (form, floor, warnings)."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read q-expansion: {exc}")
    if not lines:
        raise ConfigError(f"{path}: empty file")
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        ok = len(parts) == 3
        if ok:
            try:
                int(parts[0]), float(parts[1]), float(parts[2])
            except ValueError:
                ok = False
        if not ok:
            raise ConfigError(
                f"{path}:{lineno}: malformed coefficient line (want: m re im)"
            )
    try:
        form = load_cusp_form(io.StringIO("\n".join(lines)))
    except ValueError as exc:
        if "a_0" in str(exc):
            raise ConfigError(f"{path}: not cuspidal: {exc}")
        raise ConfigError(f"{path}: {exc}")
    m_top = int(form.exponents[-1])
    amp = float(np.abs(form.coefficients).max())
    floor = (
        form.width
        * math.log(max(4.0 * amp / eval_tol, 2.0))
        / (2 * math.pi * (m_top + 1))
    )
    warnings = []
    if m_top < 10:
        warnings.append(
            f"q-expansion truncated at exponent {m_top} < 10; "
            f"evaluation floor widened to Im z >= {floor:.6g}"
        )
    if rep is not None:
        residuals = transformation_law_check(form, rep, samples=8)
        worst = max(max(v) if np.ndim(v) else float(v) for v in residuals.values())
        if worst > law_tol:
            raise ConfigError(
                f"{path}: transformation law fails on the supplied holonomy "
                f"(residual {worst:.3e} > {law_tol:g})"
            )
    return form, floor, warnings


def _form_tags(cfg, name, j):
    raw = cfg.get("forms")
    if raw:
        return [t.strip() for t in str(raw).split(",") if t.strip()]
    shipped = SHIPPED_FORMS.get(name)
    if shipped is None or j not in shipped:
        raise ConfigError(
            f"no cusp form basis shipped for {name} in weight {2 * j + 2}; "
            "pass --forms"
        )
    return list(shipped[j])


def _load_forms(name, tags):
    forms = []
    for tag in tags:
        try:
            forms.append(fixture_form(name, tag))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown form {tag!r} for {name}: {exc}")
    return forms


# ---------------------------------------------------------------- lie


def cmd_lie_triple(cfg):
    N = cfg["N"]
    if N < 2:
        raise ConfigError("--N must be at least 2")
    mode = cfg["mode"]
    tol = cfg["tol"]
    t = principal_triple(N, mode)
    idents = [
        ("[h, q+] - 2 q+", bracket(t.h, t.q_plus) - 2 * t.q_plus),
        ("[h, q-] + 2 q-", bracket(t.h, t.q_minus) + 2 * t.q_minus),
        ("[q+, q-] - h", bracket(t.q_plus, t.q_minus) - t.h),
    ]
    checks = []
    for name, defect in idents:
        if mode == "exact":
            zero = _exactly_zero(defect)
            checks.append(
                check_record(
                    name,
                    "PASS" if zero else "FAIL",
                    residual=0.0 if zero else _max_abs(defect),
                    tolerance=0.0,
                )
            )
        else:
            res = _max_abs(defect)
            checks.append(
                check_record(name, threshold_verdict(res, tol), residual=res, tolerance=tol)
            )
    data = {"N": N, "mode": mode, "exponents": list(range(1, N))}
    return {"checks": checks, "data": data}


def cmd_lie_identity(cfg):
    N = cfg["N"]
    if N < 2:
        raise ConfigError("--N must be at least 2")
    mode = cfg["mode"]
    tol = cfg["tol"]
    samples = cfg["samples"]
    rng = np.random.default_rng(cfg["seed"])
    t = principal_triple(N, mode)
    grid = killing_identity_grid(t, tol=tol)
    us = {j: invariants_basis(t, j) for j in range(1, N)}
    checks = []
    for j in range(1, N):
        for jp in range(1, N):
            cell = grid[(j, jp)]
            worst = cell["residual"]
            all_ok = cell["ok"]
            count = cell["pairs"]
            if mode == "float":
                # seeded rescalings: one shared scalar, because the
                # prediction is the |c|^2-scaled norm of the first slot
                for _ in range(samples):
                    c = complex(rng.standard_normal(), rng.standard_normal())
                    l = int(rng.integers(0, 2 * j + 1))
                    lp = int(rng.integers(0, 2 * jp + 1))
                    _value, _expected, ok = killing_adpower_identity_check(
                        t, j, l, lp, c * us[j], c * us[jp], tol
                    )
                    all_ok = all_ok and ok
                    count += 1
            verdict = "PASS" if all_ok else "FAIL"
            checks.append(
                check_record(
                    f"kappa(ad^l u_{j}, ad^l' u_{jp}) ladder",
                    verdict,
                    residual=worst,
                    tolerance=tol,
                    note=f"{count} (l, l') pairs",
                )
            )
    data = {"N": N, "mode": mode, "samples": samples}
    return {"checks": checks, "data": data}


# -------------------------------------------------------------- gauge


def cmd_gauge_normalize(cfg):
    path = cfg["in"]
    order = cfg["order"]
    if order < 1:
        raise ConfigError("--order must be at least 1")
    mode = cfg["mode"]
    tol = cfg["tol"]
    raw = _load_json_file(path, "connection file")
    try:
        v = connection_from_json(raw, mode=mode)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: bad connection data: {exc}")
    if not v.logarithmic:
        raise ConfigError("gauge normalization applies to logarithmic connections")
    n = v.n
    if order > v.order:
        # a stored truncation is a polynomial: the missing tail is zero
        pad = zeros_q((n, n)) if v.exact else np.zeros((n, n), dtype=complex)
        coeffs = list(v.coeffs) + [pad] * (order - v.order)
        v = FormalConnection(coeffs, logarithmic=True)
    elif order < v.order:
        v = FormalConnection(v.coeffs[: order + 1], logarithmic=True)
    checks = []
    data = {
        "n": n,
        "order": order,
        "mode": mode,
        "weakly_prepared": bool(is_weakly_prepared(residue(v))),
    }
    try:
        h, v0 = normalize(v)
    except WeaklyPreparedViolation as exc:
        checks.append(
            check_record(
                "weakly prepared spectrum",
                "FAIL",
                note=str(exc),
            )
        )
        return {"checks": checks, "data": data}
    checks.append(check_record("weakly prepared spectrum", "PASS"))
    w = gauge_transform(h, v)
    tail = w.coeffs[1:]
    base_defect = w.coeffs[0] - v0
    if mode == "exact":
        zero = _exactly_zero(base_defect) and all(_exactly_zero(c) for c in tail)
        res = 0.0 if zero else max([_max_abs(base_defect)] + [_max_abs(c) for c in tail])
        checks.append(
            check_record(
                "h . v = v0 through the truncation order",
                "PASS" if zero else "FAIL",
                residual=res,
                tolerance=0.0,
            )
        )
    else:
        res = max([_max_abs(base_defect)] + [_max_abs(c) for c in tail] or [0.0])
        checks.append(
            check_record(
                "h . v = v0 through the truncation order",
                threshold_verdict(res, tol),
                residual=res,
                tolerance=tol,
            )
        )
    mono = local_monodromy(v0)
    data["residue"] = matrix_to_json(v0)
    data["radius"] = [jsonable(x) for x in radius(v0)]
    data["monodromy_eigenvalues"] = sorted(
        np.linalg.eigvals(mono).tolist(), key=lambda z: (round(z.real, 12), z.imag)
    )
    out_payload = {
        "normal_form": matrix_to_json(v0),
        "gauge": {"order": len(h.coeffs) - 1, "coeffs": [matrix_to_json(c) for c in h.coeffs]},
    }
    return {"checks": checks, "data": data, "payload": out_payload}


# ----------------------------------------------------------- monodromy


def _complex_field(value, what):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return _parse_complex(value)
        except ValueError:
            raise ConfigError(f"bad {what}: {value!r}")
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    raise ConfigError(f"bad {what}: {value!r}")


def cmd_monodromy(cfg):
    sys_path = cfg["system"]
    loop_text = cfg["loop"]
    tol = cfg["tol"]
    eig_tol = cfg["eig_tol"]
    unip_tol = cfg["unip_tol"]
    system = _load_system(sys_path)
    if loop_text.lstrip().startswith("{"):
        try:
            loop = json.loads(loop_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--loop is not valid JSON: {exc}")
    else:
        loop = _load_json_file(loop_text, "loop file")
    if not isinstance(loop, dict):
        raise ConfigError("--loop must be a JSON object")
    unknown = set(loop) - {"center", "radius", "turns", "orientation", "base_angle"}
    if unknown:
        raise ConfigError(f"unknown loop keys: {', '.join(sorted(unknown))}")
    center = _complex_field(loop.get("center", 0.0), "loop center")
    try:
        rad = float(loop.get("radius", 1.0))
    except (TypeError, ValueError):
        raise ConfigError(f"bad loop radius: {loop.get('radius')!r}")
    if rad <= 0:
        raise ConfigError("loop radius must be positive")
    turns = int(loop.get("turns", 1))
    orientation = int(loop.get("orientation", 1))
    if orientation not in (-1, 1):
        raise ConfigError("loop orientation must be +1 or -1")
    base_angle = float(loop.get("base_angle", 0.0))
    poles = [complex(p) for p in system.poles]
    for p in poles:
        if abs(abs(p - center) - rad) < 1e-9 * max(1.0, rad):
            raise ConfigError(f"loop passes through the pole at {p}")
    n = _system_dim(system)
    path = circle_path(center, rad, turns=turns, orientation=orientation, base_angle=base_angle)
    checks = []
    data = {
        "loop": {
            "center": center,
            "radius": rad,
            "turns": turns,
            "orientation": orientation,
            "base_angle": base_angle,
        },
        "poles": poles,
    }
    try:
        prop = continue_along(system, path, np.eye(n, dtype=complex), tol=tol)
    except ContinuationFailure as exc:
        checks.append(
            check_record("analytic continuation", "INCONCLUSIVE", note=str(exc), tolerance=tol)
        )
        return {"checks": checks, "data": data}
    checks.append(check_record("analytic continuation", "PASS", tolerance=tol))
    # formal-side normalization: eigenvalues exp(-2 pi i lambda)
    mono = np.linalg.inv(prop)
    eigs = np.linalg.eigvals(mono)
    data["propagator"] = prop
    data["monodromy"] = mono
    data["eigenvalues"] = sorted(
        eigs.tolist(), key=lambda z: (round(z.real, 12), z.imag)
    )
    enclosed = [i for i, p in enumerate(poles) if abs(p - center) < rad]
    data["enclosed_poles"] = enclosed
    if len(enclosed) == 1 and turns == 1 and orientation == 1:
        R = np.asarray(system.residues[enclosed[0]], dtype=complex)
        lam = np.linalg.eigvals(R)
        expected = np.exp(-2j * np.pi * lam)
        rel = _matched_relative_error(eigs, expected)
        # defective monodromy resolves its eigenvalues only to the n-th
        # root of the defect, so a collision widens the match bound
        gaps = [abs(a - b) for i, a in enumerate(expected) for b in expected[i + 1 :]]
        defective = bool(gaps) and min(gaps) < 1e-6
        match_tol = eig_tol ** (1.0 / n) if defective else eig_tol
        rec = {"residual": rel, "tolerance": match_tol}
        if defective:
            rec["note"] = "repeated expected eigenvalue; bound widened to tol^(1/n)"
        checks.append(
            check_record(
                "eigenvalues match exp(-2 pi i lambda)",
                threshold_verdict(rel, match_tol),
                **rec,
            )
        )
        data["residue_eigenvalues"] = sorted(
            lam.tolist(), key=lambda z: (round(z.real, 12), z.imag)
        )
        if np.max(np.abs(lam)) < 1e-9:
            dev = float(np.linalg.norm(np.linalg.matrix_power(mono - np.eye(n), n)))
            checks.append(
                check_record(
                    "unipotency ||(M - 1)^n||",
                    threshold_verdict(dev, unip_tol),
                    residual=dev,
                    tolerance=unip_tol,
                )
            )
    else:
        checks.append(
            check_record(
                "loop propagator",
                "PASS",
                note=f"{len(enclosed)} poles enclosed; no single-pole prediction",
            )
        )
    return {"checks": checks, "data": data}


def _load_system(path):
    raw = _load_json_file(path, "system file")
    try:
        return system_from_json(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: bad system data: {exc}")


def _system_dim(system):
    mats = list(system.residues) + list(system.poly)
    if not mats:
        raise ConfigError("system has no matrices")
    return np.asarray(mats[0]).shape[0]


def _matched_relative_error(got, expected):
    got = np.asarray(got, dtype=complex)
    expected = np.asarray(expected, dtype=complex)
    if got.shape != expected.shape:
        raise ConfigError("eigenvalue count mismatch")
    cost = np.abs(got[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    rel = cost[rows, cols] / np.maximum(np.abs(expected[cols]), 1e-300)
    return float(rel.max()) if rel.size else 0.0


# ---------------------------------------------------------- cohomology


def _expected_h1p(genus, punctures, j):
    # chi twist of the weight-2j local system on the punctured surface
    return 2 * max(0, (2 * j + 1) * (genus - 1) + j * punctures)


def _resolve_module(cfg):
    fixture = cfg.get("fixture")
    rep_path = cfg.get("rep")
    if (fixture is None) == (rep_path is None):
        raise ConfigError("exactly one of --fixture and --rep is required")
    mode = cfg["mode"]
    if fixture is not None:
        name = _resolve_fixture(fixture)
        pres, rep, _dom = fixture_group(name)
        label = name
        shipped = True
    else:
        raw = _load_json_file(rep_path, "representation file")
        try:
            pres, rep = representation_from_json(raw, mode=mode)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{rep_path}: bad representation data: {exc}")
        label = str(rep_path)
        shipped = False
    module = cfg["module"]
    try:
        if module == "adjoint":
            N = cfg["N"]
            if N < 2:
                raise ConfigError("--N must be at least 2")
            action = adjoint_module(pres, rep, N, mode=mode)
            desc = f"adjoint sl_{N}"
            expected = sum(
                _expected_h1p(pres.genus, pres.punctures, j) for j in range(1, N)
            )
        else:
            j = cfg["j"]
            if j < 1:
                raise ConfigError("--j must be at least 1")
            if mode == "exact":
                raise ConfigError("symmetric power modules are float only")
            action = symmetric_power_module(pres, rep, j)
            desc = f"V_{2 * j}"
            expected = _expected_h1p(pres.genus, pres.punctures, j)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot build the {module} module in {cfg['mode']} mode: {exc}")
    return action, desc, label, (expected if shipped else None), pres


def cmd_cohomology_dims(cfg):
    rtol = cfg["tol"]
    action, desc, label, expected, pres = _resolve_module(cfg)
    z1, gap_z1 = z1_basis(action, rtol)
    z1p, gap_p = parabolic_subspace(action, rtol)
    b1, gap_b = coboundary_space(action, rtol)
    if action.exact:
        # exact ranks carry no spectral ambiguity
        dim_h1p, gap_h = z1p.shape[1] - b1.shape[1], math.inf
    else:
        dim_h1p, gap_h = h1p_dimension(action, rtol)
    gap = min(gap_z1, gap_p, gap_b, gap_h)
    checks = []
    if expected is not None:
        checks.append(
            check_record(
                "dim H^1_P",
                "PASS" if dim_h1p == expected else "FAIL",
                value=dim_h1p,
                expected=expected,
            )
        )
    checks.append(
        check_record(
            "rank separation",
            gap_verdict(gap, 1e2),
            gap=gap,
            tolerance=1e3,
        )
    )
    consistent = dim_h1p == z1p.shape[1] - b1.shape[1]
    checks.append(
        check_record(
            "dim H^1_P = dim Z^1_P - dim B^1",
            "PASS" if consistent else "FAIL",
            value=dim_h1p,
            expected=z1p.shape[1] - b1.shape[1],
        )
    )
    data = {
        "source": label,
        "module": desc,
        "genus": pres.genus,
        "punctures": pres.punctures,
        "dim_Z1": z1.shape[1],
        "dim_Z1P": z1p.shape[1],
        "dim_B1": b1.shape[1],
        "dim_H1P": dim_h1p,
        "spectral_gap": gap,
    }
    return {"checks": checks, "data": data}


def cmd_cohomology_basis(cfg):
    rtol = cfg["tol"]
    if cfg["mode"] == "exact":
        raise ConfigError("basis extraction is float only; use dims for exact ranks")
    action, desc, label, _expected, pres = _resolve_module(cfg)
    space = h1p_basis(action, rtol)
    gap = min(space.gaps.values())
    checks = [
        check_record("rank separation", gap_verdict(gap, 1e2), gap=gap, tolerance=1e3)
    ]
    data = {
        "source": label,
        "module": desc,
        "dim_H1P": space.dim,
        "labels": [f"e{i}" for i in range(space.dim)],
        "gaps": {k: v for k, v in sorted(space.gaps.items())},
        "basis_columns": space.h1p,
    }
    return {"checks": checks, "data": data}


# -------------------------------------------------------------- domain


def cmd_domain_area(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    quad_tol = cfg["tol"]
    rel_tol = cfg["rel_tol"]
    pres, _rep, dom = fixture_group(name)
    expected = 2 * math.pi * (2 * pres.genus - 2 + pres.punctures)
    checks = []
    data = {
        "fixture": name,
        "genus": pres.genus,
        "punctures": pres.punctures,
        "expected": expected,
    }
    try:
        area = integrate_domain(AreaDensity(), dom, tol=quad_tol)
    except QuadratureFailure as exc:
        checks.append(
            check_record("hyperbolic area", "INCONCLUSIVE", note=str(exc), tolerance=quad_tol)
        )
        return {"checks": checks, "data": data}
    area = float(np.real(area))
    rel = abs(area - expected) / expected
    checks.append(
        check_record(
            "hyperbolic area",
            threshold_verdict(rel, rel_tol),
            value=area,
            expected=expected,
            residual=rel,
            tolerance=rel_tol,
        )
    )
    data["area"] = area
    return {"checks": checks, "data": data}


# ----------------------------------------------------------- es-cocycle


def cmd_es_cocycle(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    pres, rep, dom = fixture_group(name)
    base = cfg["base"]
    if base.imag <= 0:
        raise ConfigError("--base must lie in the upper half-plane")
    tol = cfg["tol"]
    check_tol = cfg["check_tol"]
    notes = []
    if cfg.get("form_file"):
        form, _floor, warns = ingest_qexp(cfg["form_file"], rep=rep)
        notes.extend(warns)
    else:
        tag = cfg.get("form")
        if not tag:
            shipped = SHIPPED_FORMS.get(name, {})
            tags = sorted(t for ts in shipped.values() for t in ts)
            raise ConfigError(
                "--form is required; shipped forms for "
                f"{name}: {', '.join(tags) if tags else '(none)'}"
            )
        form = _load_forms(name, [tag])[0]
    checks = []
    try:
        co = es_cocycle(name, form, base=base, tol=tol, check=True, check_tol=check_tol)
    except ESConsistencyFailure as exc:
        checks.append(check_record("cocycle consistency", "FAIL", note=str(exc), tolerance=check_tol))
        return {"checks": checks, "data": {"fixture": name, "form": form.tag}}
    except QuadratureFailure as exc:
        checks.append(check_record("period integrals", "INCONCLUSIVE", note=str(exc), tolerance=tol))
        return {"checks": checks, "data": {"fixture": name, "form": form.tag}}
    checks.append(
        check_record(
            "relator residual",
            threshold_verdict(co.relator_residual, check_tol),
            residual=co.relator_residual,
            tolerance=check_tol,
        )
    )
    worst_p = max(co.puncture_residuals.values()) if co.puncture_residuals else 0.0
    checks.append(
        check_record(
            "parabolicity at the punctures",
            threshold_verdict(worst_p, check_tol),
            residual=worst_p,
            tolerance=check_tol,
        )
    )
    data = co.summary()
    data["values"] = {g: co.values[g] for g in sorted(co.values)}
    data["stacked"] = co.stacked
    base2 = cfg.get("base2")
    if base2 is not None:
        if base2.imag <= 0:
            raise ConfigError("--base2 must lie in the upper half-plane")
        co2 = es_cocycle(name, form, base=base2, tol=tol, check=False)
        drift = _class_drift(name, co, co2, form)
        checks.append(
            check_record(
                "base point independence of the class",
                threshold_verdict(drift, cfg["class_tol"]),
                residual=drift,
                tolerance=cfg["class_tol"],
            )
        )
        data["base2"] = base2
    if notes:
        data["warnings"] = notes
    return {"checks": checks, "data": data}


def _class_drift(name, co, co2, form):
    pres, rep, _dom = fixture_group(name)
    action = symmetric_power_module(pres, rep, form.j, field="complex")
    space = h1p_basis(action)
    a = space.class_coordinates(co.stacked)
    b = space.class_coordinates(co2.stacked)
    scale = max(float(np.linalg.norm(a)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


# -------------------------------------------------------------- pairing


def _period_columns(name, forms, base):
    cols = [es_cocycle(name, f, base=base).stacked for f in forms]
    return cols


def cmd_pairing_gram(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    j = cfg["j"]
    if j < 1:
        raise ConfigError("--j must be at least 1")
    kind = cfg["pairing"]
    base = cfg["base"]
    tags = _form_tags(cfg, name, j)
    forms = _load_forms(name, tags)
    pres, rep, _dom = fixture_group(name)
    action = symmetric_power_module(pres, rep, j, field="complex")
    for f in forms:
        if f.j != j:
            raise ConfigError(f"form {f.tag} has weight {f.weight}, expected {2 * j + 2}")
    cols = _period_columns(name, forms, base)
    if kind == "hermitian":
        labels = list(tags)
        vectors = cols
        sym_kind = "hermitian"
        definite = True
    else:
        labels = list(tags) + [f"conj({t})" for t in tags]
        vectors = cols + [np.conj(c) for c in cols]
        sym_kind = "skew"
        definite = False
    if vectors:
        G = gram_matrix(np.column_stack(vectors), action, kind=kind)
    else:
        G = np.zeros((0, 0), dtype=complex)
    grep = gram_report(
        labels,
        G,
        sym_kind,
        sym_tol=cfg["tol"],
        nondeg_floor=cfg["nondeg_floor"],
        expect_definite=definite,
    )
    checks = grep.pop("checks")
    grep.pop("verdict", None)
    grep["fixture"] = name
    grep["j"] = j
    return {"checks": checks, "data": grep, "csv": gram_to_csv(labels, G)}


def cmd_pairing_crossval(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    j = cfg["j"]
    bar = cfg["tol"]
    tags = _form_tags(cfg, name, j)
    forms = _load_forms(name, tags)
    checks = []
    try:
        r = cross_validate(name, forms, tol=cfg["quad_tol"], base=cfg["base"])
    except QuadratureFailure as exc:
        checks.append(
            check_record("proportionality", "INCONCLUSIVE", note=str(exc), tolerance=bar)
        )
        return {"checks": checks, "data": {"fixture": name, "j": j}}
    checks.append(
        check_record(
            "periods Gram = c x Petersson Gram",
            threshold_verdict(r["residual"], bar) if forms else "PASS",
            residual=r["residual"],
            tolerance=bar,
            note=None if forms else "empty basis",
        )
    )
    c = r["constant"]
    if c is not None:
        drift = abs(c.imag) / abs(c)
        verdict = "PASS" if (c.real > 0 and drift < 1e-6) else "FAIL"
        checks.append(
            check_record(
                "constant real and positive",
                verdict,
                value=c,
                residual=drift,
                tolerance=1e-6,
            )
        )
    return {"checks": checks, "data": r}


def cmd_pairing_transversality(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    N = cfg["N"]
    if N < 2:
        raise ConfigError("--N must be at least 2")
    tol = cfg["tol"]
    try:
        r = transversality_check(name, N, tol=tol, base=cfg["base"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc))
    checks = []
    for j in sorted(r["blocks"]):
        block = r["blocks"][j]
        checks.append(
            check_record(
                f"weight-{2 * j} block spans H^1_P",
                block["verdict"],
                gap=block["gap"],
                tolerance=tol,
                note=f"dim {block['dim_h1p']}, forms {', '.join(block['forms']) or '(none)'}",
            )
        )
    return {"checks": checks, "data": r}


def cmd_pairing_hodge(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    j = cfg["j"]
    tol = cfg["tol"]
    tags = _form_tags(cfg, name, j)
    forms = _load_forms(name, tags)
    r = hodge_report(name, forms, tol=tol, base=cfg["base"])
    checks = _hodge_checks(r, tol)
    return {"checks": checks, "data": r}


def _hodge_checks(r, tol):
    checks = [
        check_record(
            "hermitian symmetry",
            threshold_verdict(r["hermitian"], tol),
            residual=r["hermitian"],
            tolerance=tol,
        ),
        check_record(
            "first bilinear relation",
            threshold_verdict(r["first_relation"], tol),
            residual=r["first_relation"],
            tolerance=tol,
        ),
        check_record(
            "positivity on holomorphic classes",
            gap_verdict(r["positivity_margin"], tol),
            gap=r["positivity_margin"],
            tolerance=tol,
        ),
        check_record(
            "conjugate block signature",
            threshold_verdict(r["signature"], tol),
            residual=r["signature"],
            tolerance=tol,
        ),
    ]
    return checks


# ------------------------------------------------------------ full-suite


def cmd_full_suite(cfg):
    name = _resolve_fixture(cfg.get("fixture"))
    j = cfg["j"]
    base = cfg["base"]
    tags = _form_tags(cfg, name, j)
    forms = _load_forms(name, tags)
    checks = []
    data = {"fixture": name, "j": j, "forms": tags}
    if not forms:
        checks.append(
            check_record(
                "shipped basis",
                "PASS",
                note=f"no forms in weight {2 * j + 2}; every phase is vacuous",
            )
        )
        return {"checks": checks, "data": data}
    summaries = []
    for form in forms:
        try:
            co = es_cocycle(name, form, base=base, tol=cfg["quad_tol"] * 1e-2, check=True)
        except ESConsistencyFailure as exc:
            checks.append(check_record(f"{form.tag}: cocycle consistency", "FAIL", note=str(exc)))
            return {"checks": checks, "data": data}
        except QuadratureFailure as exc:
            checks.append(
                check_record(f"{form.tag}: period integrals", "INCONCLUSIVE", note=str(exc))
            )
            return {"checks": checks, "data": data}
        summaries.append(co.summary())
        checks.append(
            check_record(
                f"{form.tag}: relator and parabolicity residuals",
                threshold_verdict(
                    max(
                        [co.relator_residual]
                        + list(co.puncture_residuals.values())
                    ),
                    cfg["check_tol"],
                ),
                residual=max(
                    [co.relator_residual] + list(co.puncture_residuals.values())
                ),
                tolerance=cfg["check_tol"],
            )
        )
    data["es"] = summaries
    try:
        d = decomposition_check(name, forms, base=base)
        ok = bool(d["ok"]) and d["dim_h1p"] == d["expected_rank"]
        checks.append(
            check_record(
                "decomposition: classes + conjugates span H^1_P",
                "PASS" if ok else "FAIL",
                gap=d["ratio"],
                note=f"dim {d['dim_h1p']}, rank {d['expected_rank']}",
            )
        )
        data["decomposition"] = d
    except DecompositionFailure as exc:
        checks.append(check_record("decomposition", "FAIL", note=str(exc)))
        return {"checks": checks, "data": data}
    pres, rep, _dom = fixture_group(name)
    action = symmetric_power_module(pres, rep, j, field="complex")
    cols = _period_columns(name, forms, base)
    G = gram_matrix(np.column_stack(cols), action, kind="hermitian")
    grep = gram_report(list(tags), G, "hermitian", expect_definite=True)
    for c in grep.pop("checks"):
        c = dict(c)
        c["name"] = "gram: " + c["name"]
        checks.append(c)
    grep.pop("verdict", None)
    data["gram"] = grep
    try:
        r = cross_validate(name, forms, tol=cfg["quad_tol"], base=base)
        checks.append(
            check_record(
                "cross-validation against the Petersson Gram",
                threshold_verdict(r["residual"], 1e-3),
                residual=r["residual"],
                tolerance=1e-3,
            )
        )
        data["cross_validation"] = r
    except QuadratureFailure as exc:
        checks.append(check_record("cross-validation", "INCONCLUSIVE", note=str(exc)))
        return {"checks": checks, "data": data}
    h = hodge_report(name, forms, tol=cfg["tol"], base=base)
    for c in _hodge_checks(h, cfg["tol"]):
        c["name"] = "hodge: " + c["name"]
        checks.append(c)
    data["hodge"] = h
    return {"checks": checks, "data": data}


# ------------------------------------------------------------- plumbing


def build_parser():
    parser = _Parser(
        prog="oper-lab",
        description="gauge normalization, monodromy, parabolic cohomology, "
        "period cocycles, and hermitian pairings on the shipped fixtures",
    )
    parser.add_argument(
        "--version", action="version", version=f"oper-lab {__version__}"
    )
    sub = parser.add_subparsers(dest="_group", metavar="command")
    sub.required = True

    def leaf(group_sub, name, command, handler, tol_default, tol_help):
        p = group_sub.add_parser(name, help=command)
        flags = _FlagSet(p).globals(tol_default, tol_help)
        p.set_defaults(_handler=handler, _command=command, _flags=flags)
        return flags

    lie = sub.add_parser("lie", help="principal triple and trace identities")
    lie_sub = lie.add_subparsers(dest="_sub", metavar="subcommand")
    lie_sub.required = True
    f = leaf(lie_sub, "triple", "lie triple", cmd_lie_triple, 1e-12, "float residual bound")
    f.add("--N", default=3, type=int, help="rank of sl_N")
    f = leaf(lie_sub, "identity", "lie identity", cmd_lie_identity, 1e-10, "identity residual bound")
    f.add("--N", default=3, type=int, help="rank of sl_N")
    f.add("--samples", default=2, type=int, help="seeded random rescalings per ladder")

    gauge = sub.add_parser("gauge", help="formal normalization at a puncture")
    gauge_sub = gauge.add_subparsers(dest="_sub", metavar="subcommand")
    gauge_sub.required = True
    f = leaf(gauge_sub, "normalize", "gauge normalize", cmd_gauge_normalize, 1e-10,
             "float residual bound on the transformed connection")
    f.add("--in", required=True, help="connection JSON: {log, order, coeffs}")
    f.add("--order", default=12, type=int, help="truncation order of the solve")

    f = leaf(sub, "monodromy", "monodromy", cmd_monodromy, 1e-10, "continuation tolerance")
    f.add("--system", required=True, help="system JSON: {poles, residues, poly}")
    f.add("--loop", required=True, help='loop JSON, e.g. {"center": 0, "radius": 1}')
    f.add("--eig-tol", default=1e-6, type=float, help="relative eigenvalue match bound")
    f.add("--unip-tol", default=1e-5, type=float, help="unipotency defect bound")

    coh = sub.add_parser("cohomology", help="parabolic cohomology of the holonomy")
    coh_sub = coh.add_subparsers(dest="_sub", metavar="subcommand")
    coh_sub.required = True
    for sub_name, command, handler in (
        ("dims", "cohomology dims", cmd_cohomology_dims),
        ("basis", "cohomology basis", cmd_cohomology_basis),
    ):
        f = leaf(coh_sub, sub_name, command, handler, 1e-8, "rank cutoff (relative)")
        f.add("--fixture", help="shipped fixture name")
        f.add("--rep", help="representation JSON file: {g, r, gens}")
        f.add("--module", default="adjoint", choices=("adjoint", "sym"),
              help="adjoint sl_N or symmetric power V_2j")
        f.add("--N", default=2, type=int, help="rank for the adjoint module")
        f.add("--j", default=1, type=int, help="half-weight for the sym module")

    dom = sub.add_parser("domain", help="fundamental domain quadrature")
    dom_sub = dom.add_subparsers(dest="_sub", metavar="subcommand")
    dom_sub.required = True
    f = leaf(dom_sub, "area", "domain area", cmd_domain_area, 1e-8, "quadrature tolerance")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--rel-tol", default=1e-6, type=float, help="relative error bound on the area")

    f = leaf(sub, "es-cocycle", "es-cocycle", cmd_es_cocycle, 1e-11, "period integral tolerance")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--form", help="shipped form tag (w4, w6, w6a, w6b)")
    f.add("--form-file", help="q-expansion file to ingest instead of a shipped tag")
    f.add("--base", default=1j, type=_parse_complex, help="base point in the upper half-plane")
    f.add("--base2", default=None, type=_parse_complex,
          help="second base point for the class-level independence check")
    f.add("--check-tol", default=1e-8, type=float, help="relator/parabolicity bound")
    f.add("--class-tol", default=1e-7, type=float, help="base point independence bound")

    pair = sub.add_parser("pairing", help="cup product and hermitian pairing suite")
    pair_sub = pair.add_subparsers(dest="_sub", metavar="subcommand")
    pair_sub.required = True

    f = leaf(pair_sub, "gram", "pairing gram", cmd_pairing_gram, 1e-10,
             "symmetry-type residual bound")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--j", default=2, type=int, help="half-weight of the module")
    f.add("--forms", help="comma separated form tags (default: shipped basis)")
    f.add("--pairing", default="hermitian", choices=("hermitian", "goldman"),
          help="hermitian Gram of classes, or skew Gram of classes + conjugates")
    f.add("--base", default=1j, type=_parse_complex, help="base point for the period cocycles")
    f.add("--nondeg-floor", default=1e-6, type=float, help="singular value ratio floor")

    f = leaf(pair_sub, "cross-validate", "pairing cross-validate", cmd_pairing_crossval,
             1e-3, "proportionality residual bound")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--j", default=2, type=int, help="half-weight of the module")
    f.add("--forms", help="comma separated form tags (default: shipped basis)")
    f.add("--quad-tol", default=1e-9, type=float, help="Petersson quadrature tolerance")
    f.add("--base", default=1j, type=_parse_complex, help="base point for the period cocycles")

    f = leaf(pair_sub, "transversality", "pairing transversality", cmd_pairing_transversality,
             1e-4, "rank separation tolerance")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--N", default=2, type=int, help="check weights 2j, j = 1..N-1")
    f.add("--base", default=1j, type=_parse_complex, help="base point for the period cocycles")

    f = leaf(pair_sub, "hodge", "pairing hodge", cmd_pairing_hodge, 1e-8,
             "polarization axiom residual bound")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--j", default=2, type=int, help="half-weight of the module")
    f.add("--forms", help="comma separated form tags (default: shipped basis)")
    f.add("--base", default=1j, type=_parse_complex, help="base point for the period cocycles")

    f = leaf(sub, "full-suite", "full-suite", cmd_full_suite, 1e-8,
             "polarization axiom residual bound")
    f.add("--fixture", required=True, help="shipped fixture name")
    f.add("--j", default=2, type=int, help="half-weight of the module")
    f.add("--forms", help="comma separated form tags (default: shipped basis)")
    f.add("--quad-tol", default=1e-9, type=float, help="Petersson quadrature tolerance")
    f.add("--check-tol", default=1e-8, type=float, help="relator/parabolicity bound")
    f.add("--base", default=1j, type=_parse_complex, help="base point for the period cocycles")

    return parser


def _format_value(v):
    v = jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return v
    return json.dumps(v, sort_keys=True)


def _print_summary(report, stream):
    stream.write(f"oper-lab {report['command']} (version {report['version']})\n")
    stream.write(f"seed: {report['config'].get('seed')}\n")
    for c in report["checks"]:
        extras = ", ".join(
            f"{k}={_format_value(v)}" for k, v in c.items() if k not in ("name", "verdict")
        )
        line = f"  {c['name']}: {c['verdict']}"
        if extras:
            line += f"  ({extras})"
        stream.write(line + "\n")
    stream.write(f"overall: {report['verdict']}\n")


def run(argv, stdout=None):
    """Parse argv, execute the subcommand, emit the report.  Returns the
    exit code; raises ConfigError for flag/config/schema problems."""
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    ns = parser.parse_args(argv)
    handler = getattr(ns, "_handler", None)
    if handler is None:
        raise ConfigError("a subcommand is required")
    flagset = ns._flags
    explicit = {k: v for k, v in vars(ns).items() if not k.startswith("_")}
    cfg = dict(flagset.defaults)
    cfg_path = explicit.get("config", cfg.get("config"))
    if cfg_path:
        cfg.update(_read_config(cfg_path, flagset))
    cfg.update(explicit)
    for dest in sorted(flagset.required):
        if cfg.get(dest) is None:
            raise ConfigError(f"--{dest.replace('_', '-')} is required")
    try:
        result = handler(cfg)
    except QuadratureFailure as exc:
        # could not certify the integral: numerics, not mathematics
        result = {"checks": [check_record("quadrature", "INCONCLUSIVE", note=str(exc))]}
    except ContinuationFailure as exc:
        result = {"checks": [check_record("continuation", "INCONCLUSIVE", note=str(exc))]}
    except (ESConsistencyFailure, DecompositionFailure) as exc:
        result = {"checks": [check_record("consistency", "FAIL", note=str(exc))]}
    echo = {k: cfg[k] for k in sorted(cfg)}
    report = make_report(ns._command, echo, result["checks"], result.get("data"))
    out = cfg.get("out")
    if out:
        if out.endswith(".csv"):
            if result.get("csv") is None:
                raise ConfigError(f"{ns._command} has no CSV output; use a .json path")
            text = result["csv"]
        elif result.get("payload") is not None:
            text = json.dumps(jsonable(result["payload"]), sort_keys=True, indent=2) + "\n"
        else:
            text = render_report(report)
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc}")
    if cfg.get("json"):
        stdout.write(render_report(report))
    else:
        _print_summary(report, stdout)
    return verdict_exit(report["verdict"])


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"oper-lab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
