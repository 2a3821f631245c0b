"""Configuration-driven scenario runner with reproducible manifests.

A configuration is a flat JSON object whose keys are namespaced by module
(``"ising.L"``, ``"drive.h1"``, ``"run.cycles"``, ...).  Every scenario
declares the keys it accepts together with their defaults; unknown keys are
rejected before anything is written.

Outputs are staged in a scratch directory and moved into place only after
the scenario finishes, followed by ``manifest.json`` (written atomically),
so a failed run leaves no partial files behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .io import write_csv

__all__ = [
    "CONVENTIONS",
    "SCENARIOS",
    "ManifestError",
    "ValidationError",
    "load_config",
    "resolve_config",
    "run",
    "verify",
]

MANIFEST = "manifest.json"


class ValidationError(ValueError):
    """Bad scenario id, unknown key or a value of the wrong type."""


class ManifestError(FileNotFoundError):
    """The manifest to verify is missing or unreadable."""


# Recorded in every manifest so outputs can be interpreted without the source.
CONVENTIONS = {
    "units": "hbar = 1; Ising coupling J = 1 unless overridden",
    "kicks": "instantaneous unitaries, never finite pulses",
    "bessel": "downward recurrence with normalisation for n > x, ascending series for small x",
    "ising.momentum_sector": "antiperiodic k = (2m+1) pi / L",
    "ising.initial_state": "ground state of H(t=0) with field h_s + h_1 (gamma ignored); 'all_down' optional",
    "ising.non_hermitian": "each mode renormalised every period; observables use <.>/<psi|psi>",
    "ising.steady_state": "blocks of 50 cycles, |dS| < 1e-4, cap 5e4 cycles",
    "ising.integrator": "4th-order commutator-free scheme with step doubling, tol 1e-9 per period; square pulse exact",
    "ising.hf2_form": "derived (16 coefficient); unit_block form (4) available",
    "dynloc.phase": "A(0) = 0, A(t) = -(E0/omega) sin(omega t)",
    "dynloc.fermi_sea": "antiperiodic grid, symmetric Fermi sea |k| < pi/2 at half filling",
    "ed.dense_limit": "dense propagator and full spectra only for dim <= 4096",
    "ed.entropy": "Schmidt decomposition over occurring left/right configurations",
    "ed.quasienergy_branch": "eps = -arg(lambda)/T in (-pi/T, pi/T], ties at -pi/T moved to +pi/T",
    "hsf.page_value": "full half-chain dims (2^(L/2), 2^(L/2)); S_p column emitted",
    "hsf.obc_constraint": "missing neighbour density counts as 0 in A = n_{j+2} - n_{j-1}",
    "hsf.pbc_wrap_sign": "wrap-around hop carries (-1)^(N-1)",
    "hsf.defaults": "V0 = 1, V2 = 0.5",
    "hsf.pulse_order": "-V1 on the first half period, +V1 on the second",
    "hsf.autocorrelator": "C_raw = Tr[n(nT) n]/D, C_connected = C_raw - (N/L)^2, C_sigma = 4 C_connected",
    "pxp.field": "lambda(t) = +-lambda0/2 so a flip costs lambda0; special point lambda0 T = 4 n pi",
    "pxp.pulse_order": "plus_first: +lambda0/2 first (minus_first conjugates H_F phases)",
    "pxp.hf3_form": "derived; undressed form available",
    "pxp.boundary": "OBC default; edge flips drop the absent projector",
    "xy.spin_ladder": "exchange S+- = (Sx +- i Sy)/2; tower generator sum (-1)^l (S+_l)^2/2 with standard S+",
    "scars.O_z": "OBC sums over sites with both neighbours; PBC full sum",
    "tc.melting": "first window start where the 20-cycle period-2 amplitude falls below half its initial value",
    "tc.cats": "degenerate eigenspaces rotated to diagonalise the pair label min(z, zbar)",
    "tc.frame": "no interaction-picture rotation (identity for this model)",
    "csv": "17 significant digits, '.' radix, '\\n' line ends",
}


# ---------------------------------------------------------------- config


def _listof(kind):
    def conv(v):
        if not isinstance(v, (list, tuple)) or not v:
            raise TypeError("expected a non-empty list")
        return [kind(x) for x in v]

    conv.__name__ = f"list[{kind.__name__}]"
    return conv


def _opt_int(v):
    return None if v is None else _int(v)


def _int(v):
    if isinstance(v, bool) or not float(v).is_integer():
        raise TypeError("expected an integer")
    return int(v)


def _float(v):
    if isinstance(v, bool):
        raise TypeError("expected a number")
    return float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


_HSF = {
    "hsf.L": (_int, 12),
    "hsf.N": (_opt_int, None),
    "hsf.J": (_float, 1.0),
    "hsf.V0": (_float, 1.0),
    "hsf.V2": (_float, 0.5),
    "hsf.V1": (_float, 40.0),
    "hsf.ratio": (_float, 0.5),
    "hsf.bc": (_str, "pbc"),
}
_PXP = {
    "pxp.L": (_int, 12),
    "pxp.lambda0": (_float, 15.0),
    "pxp.omega": (_float, 8.5),
    "pxp.special_n": (_int, 0),
    "pxp.Omega": (_float, 1.0),
    "pxp.bc": (_str, "obc"),
    "pxp.order": (_str, "plus_first"),
}
_TC = {
    "tc.L": (_int, 10),
    "tc.J": (_float, 1.0),
    "tc.h_z": (_float, 0.0),
    "tc.bc": (_str, "pbc"),
}
_ISING_DRIVE = {
    "ising.J": (_float, 1.0),
    "drive.kind": (_str, "cosine"),
    "drive.h1": (_float, 20.0),
    "drive.hs": (_float, 0.1),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    keys: dict
    fn: object


SCENARIOS: dict[str, Scenario] = {}


def _scenario(name, keys):
    def wrap(fn):
        SCENARIOS[name] = Scenario(name, keys, fn)
        return fn

    return wrap


def load_config(path) -> dict:
    """Read a JSON object from ``path``; any read or parse problem is a validation error."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def resolve_config(scenario: str, cfg: dict) -> dict:
    """Fill defaults and coerce types; the result is echoed into the manifest."""
    if scenario not in SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}; choose from {', '.join(sorted(SCENARIOS))}")
    schema = SCENARIOS[scenario].keys
    cfg = dict(cfg)
    # a config may name its scenario; it must then agree with the command line
    named = cfg.pop("scenario", scenario)
    if named != scenario:
        raise ValidationError(f"config is for scenario {named!r}, not {scenario!r}")
    unknown = sorted(set(cfg) - set(schema))
    if unknown:
        raise ValidationError(f"unknown keys for {scenario}: {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in schema.items():
        if key not in cfg:
            out[key] = default
            continue
        try:
            out[key] = conv(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key}: {exc}") from None
    return out


def _parse_config_bits(text: str, L: int) -> int:
    if len(text) != L or set(text) - {"0", "1"}:
        raise ValidationError(f"initial state must be a 0/1 string of length {L}, got {text!r}")
    return sum(1 << j for j, c in enumerate(text) if c == "1")


# ---------------------------------------------------------------- scenarios


def _ising_params(p, L, **drive_changes):
    from .drive import DriveProtocol
    from .ising import IsingChainParams

    drive = DriveProtocol(p["drive.kind"], p["drive.h1"], 1.0, offset=p["drive.hs"], **drive_changes)
    return IsingChainParams(L=L, drive=drive, J=p["ising.J"])


@_scenario(
    "freeze",
    {
        "ising.L": (_int, 500),
        **_ISING_DRIVE,
        "ising.initial": (_str, "ground"),
        "drive.gamma": (_float, 0.0),
        "drive.omega": (_float, 0.0),
        "drive.special_n": (_int, 2),
        "drive.omega_factor": (_float, 1.0),
        "run.cycles": (_int, 2000),
        "run.entropy_every": (_int, 0),
    },
)
def _freeze(p, out, rng):
    from .drive import special_frequency
    from .ising import InitialState, stroboscopic_run

    params = _ising_params(p, p["ising.L"], gamma=p["drive.gamma"])
    omega = p["drive.omega"] or special_frequency(params.drive, p["drive.special_n"])
    omega *= p["drive.omega_factor"]
    params = params.with_drive(period=2 * np.pi / omega)
    ts = stroboscopic_run(params, p["run.cycles"], InitialState(p["ising.initial"]), p["run.entropy_every"])
    ts.to_csv(out / "magnetization.csv")
    return {"omega": omega, "max_abs_dM": float(np.max(np.abs(ts["M_z"] - ts["M_z"][0])))}


@_scenario(
    "alpha-scan",
    {
        **_ISING_DRIVE,
        "drive.gammas": (_listof(float), [0.01]),
        "drive.omegas": (_listof(float), [20.0]),
        "ising.sizes": (_listof(int), [200, 400, 600, 800, 1000]),
    },
)
def _alpha(p, out, rng):
    from .ising import alpha_scan

    sizes = p["ising.sizes"]
    params = _ising_params(p, min(sizes))
    scan = alpha_scan(p["drive.gammas"], p["drive.omegas"], params, sizes=sizes)
    g, w = np.meshgrid(scan.gammas, scan.omegas, indexing="ij")
    write_csv(
        out / "alpha.csv",
        {
            "gamma": g.ravel(), "omega_D": w.ravel(), "alpha": scan.alpha.ravel(),
            "intercept": scan.intercept.ravel(), "residual": scan.residual.ravel(),
            "converged": scan.converged.ravel(), "reliable": scan.reliable.ravel(),
        },
    )
    return {"points": int(scan.alpha.size), "reliable": int(scan.reliable.sum())}


@_scenario(
    "dynloc",
    {
        "dynloc.x": (_float, 1.0),
        "dynloc.omega": (_float, 1.0),
        "dynloc.J": (_float, 1.0),
        "dynloc.L": (_int, 1000),
        "run.periods": (_float, 10.0),
        "run.points": (_int, 201),
        "run.numeric": (_bool, True),
    },
)
def _dynloc(p, out, rng):
    from .dynloc import AcLatticeParams, n2_series

    params = AcLatticeParams.from_x(p["dynloc.x"], p["dynloc.omega"], J=p["dynloc.J"], L=p["dynloc.L"])
    if p["run.points"] < 2 or p["run.periods"] <= 0:
        raise ValidationError("run.points must be >= 2 and run.periods positive")
    t = np.linspace(0.0, p["run.periods"] * params.period, p["run.points"])
    ts = n2_series(params, t, numeric=p["run.numeric"])
    ts.to_csv(out / "n2.csv")
    summary = {"x": params.x}
    if p["run.numeric"]:
        summary["max_abs_diff"] = float(np.max(np.abs(ts["n2_analytic"] - ts["n2_numeric"])))
    return summary


def _hsf_params(p, **kw):
    from .hsf import HsfParams

    return HsfParams.at_ratio(
        p["hsf.L"], p["hsf.V1"], p["hsf.ratio"], N=p["hsf.N"], J=p["hsf.J"],
        V0=p["hsf.V0"], V2=p["hsf.V2"], bc=p["hsf.bc"], **kw,
    )


@_scenario(
    "hsf-entropy",
    {
        **_HSF,
        "hsf.initial": (_str, "random"),
        "run.start": (_int, 0),
        "run.stop": (_int, 3000),
        "run.step": (_int, 100),
    },
)
def _hsf_entropy(p, out, rng):
    from .hsf import entanglement_run, hsf_basis

    params = _hsf_params(p)
    basis = hsf_basis(params)
    if p["hsf.initial"] == "random":
        init = int(basis.states[rng.integers(basis.dim)])
    else:
        init = _parse_config_bits(p["hsf.initial"], params.L)
        if basis.find(init) < 0:
            raise ValidationError(f"initial state {p['hsf.initial']} is not in the N={params.N} sector")
    if p["run.step"] < 1 or p["run.stop"] < p["run.start"] or p["run.start"] < 0:
        raise ValidationError("need 0 <= run.start <= run.stop and run.step >= 1")
    cycles = np.arange(p["run.start"], p["run.stop"] + 1, p["run.step"])
    ts = entanglement_run(params, init, cycles, basis)
    ts.to_csv(out / "entropy.csv")
    return {"initial": basis.bitstring(basis.index(init)), "final_S_over_Sp": float(ts["S_over_Sp"][-1])}


@_scenario("hsf-fragments", {**_HSF, "hsf.L": (_int, 16)})
def _hsf_fragments(p, out, rng):
    from .hsf import fragments, hsf_basis, hsf_hf1

    params = _hsf_params(p)
    basis = hsf_basis(params)
    frag = fragments(hsf_hf1(params, basis), basis)
    frag.to_csv(out / "fragments.csv", params)
    return {"count": frag.count, "D_L": frag.D_L, "D_t": frag.D_t, "ratio": frag.ratio}


@_scenario(
    "hsf-autocorr",
    {
        **_HSF,
        "hsf.bc": (_str, "obc"),
        "hsf.site": (_opt_int, None),
        "run.cycles": (_int, 5000),
        "run.step": (_int, 10),
    },
)
def _hsf_autocorr(p, out, rng):
    from .hsf import autocorrelator, threshold_cycle

    params = _hsf_params(p)
    if p["run.cycles"] < 1 or p["run.step"] < 1:
        raise ValidationError("run.cycles and run.step must be >= 1")
    cycles = np.unique(np.append(np.arange(0, p["run.cycles"] + 1, p["run.step"]), p["run.cycles"]))
    ts = autocorrelator(params, cycles, p["hsf.site"])
    ts.to_csv(out / "autocorrelator.csv")
    n_star = threshold_cycle(ts)
    return {"final_C_sigma": float(ts["C_sigma"][-1]), "threshold_cycle": n_star}


@_scenario(
    "xy-tower",
    {"xy.L": (_int, 4), "xy.J": (_float, 1.0), "xy.B0": (_float, 1.0), "xy.bc": (_str, "obc")},
)
def _xy(p, out, rng):
    from .scars import XyParams, bimagnon_tower, ladder_coefficients, su2_generators, xy_hamiltonian

    params = XyParams(p["xy.L"], p["xy.J"], p["xy.B0"], p["xy.bc"])
    H = xy_hamiltonian(params)
    Jp, _, _ = su2_generators(params)
    tower = bimagnon_tower(params)
    E = np.array([np.vdot(v, H @ v).real for v in tower])
    res = np.array([np.linalg.norm(H @ v - e * v) for v, e in zip(tower, E)])
    coef = np.array([np.linalg.norm(Jp @ v) for v in tower[:-1]])
    write_csv(out / "tower.csv", {"n": np.arange(len(tower)), "energy": E, "residual": res})
    write_csv(
        out / "ladder.csv",
        {"m": np.arange(params.L) - params.L / 2, "measured": coef, "exact": ladder_coefficients(params.L)},
    )
    return {"spacing": float(np.mean(np.diff(E))), "max_residual": float(res.max())}


def _pxp_params(p):
    from .scars import PxpParams

    kw = dict(Omega=p["pxp.Omega"], bc=p["pxp.bc"], order=p["pxp.order"])
    if p["pxp.special_n"] > 0:
        return PxpParams.special(p["pxp.L"], p["pxp.lambda0"], p["pxp.special_n"], **kw)
    return PxpParams(p["pxp.L"], p["pxp.lambda0"], p["pxp.omega"], **kw)


@_scenario("pxp-fidelity", {**_PXP, "pxp.initial": (_str, "Z2"), "run.cycles": (_int, 200)})
def _pxp_fidelity(p, out, rng):
    from .scars import fidelity_run

    params = _pxp_params(p)
    ts = fidelity_run(params, p["pxp.initial"], p["run.cycles"])
    ts.to_csv(out / "fidelity.csv")
    late = ts["F"][5:]
    return {"special": bool(params.is_special), "max_F_after_5": float(late.max()) if len(late) else None}


@_scenario("pxp-eigen", {**_PXP, "pxp.L": (_int, 10)})
def _pxp_eigen(p, out, rng):
    from .scars import eigenstate_scan, pxp_basis, pxp_floquet

    params = _pxp_params(p)
    basis = pxp_basis(params)
    if basis.dim > 4096:
        raise ValidationError(f"full spectra need dim <= 4096, got {basis.dim}")
    rep = eigenstate_scan(pxp_floquet(params, basis, dense=True), basis)
    rep.to_csv(out / "eigenstates.csv")
    return {"dim": basis.dim, "near_degenerate": rep.near_degenerate}


def _tc_initial(text, L, rng):
    if text == "":
        return None
    if text == "random":
        return int(rng.integers(1 << L))
    return _parse_config_bits(text, L)


@_scenario(
    "timecrystal",
    {**_TC, "tc.T": (_float, 1.0), "tc.eps": (_float, 0.0), "tc.initial": (_str, ""), "run.cycles": (_int, 1000)},
)
def _timecrystal(p, out, rng):
    from .time_crystal import TcParams, subharmonic_run

    params = TcParams(
        p["tc.L"], T=p["tc.T"], J=p["tc.J"], h_z=p["tc.h_z"], eps=p["tc.eps"], bc=p["tc.bc"],
        initial=_tc_initial(p["tc.initial"], p["tc.L"], rng),
    )
    ts = subharmonic_run(params, p["run.cycles"])
    ts.to_csv(out / "magnetization.csv")
    M = ts["M"]
    return {"max_period2_defect": float(np.max(np.abs(M - (-1.0) ** ts["n"] * M[0])))}


@_scenario(
    "tc-melting",
    {
        **_TC,
        "tc.Ts": (_listof(float), [1.53, 1.52, 1.51, 1.5]),
        "tc.epss": (_listof(float), [0.03]),
        "tc.cap": (_int, 100_000),
    },
)
def _tc_melting(p, out, rng):
    from .time_crystal import melting_scan

    table, slopes = melting_scan(
        p["tc.Ts"], p["tc.epss"], p["tc.L"], p["tc.cap"], J=p["tc.J"], h_z=p["tc.h_z"], bc=p["tc.bc"],
    )
    write_csv(out / "melting.csv", table)
    eps = sorted(slopes)
    write_csv(out / "slopes.csv", {"eps": eps, "slope": [slopes[e] for e in eps]})
    return {"censored": int(table["censored"].sum())}


# ---------------------------------------------------------------- run / verify


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(scenario: str, config: dict, out_dir, seed: int = 0) -> dict:
    """Run one scenario and return its manifest.

    Raises
    ------
    ValidationError, ValueError
        Bad configuration or parameters; nothing is written.
    ArithmeticError
        Numerical failure inside a module; nothing is written.
    """
    params = resolve_config(scenario, config)
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {seed!r}")
    out = Path(out_dir)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(dir=out, prefix=".stage-"))
    try:
        t0 = time.perf_counter()
        summary = SCENARIOS[scenario].fn(params, stage, np.random.default_rng(int(seed)))
        wall = time.perf_counter() - t0
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        if created and not any(out.iterdir()):
            out.rmdir()
        raise
    files = {}
    for f in sorted(stage.iterdir()):
        os.replace(f, out / f.name)
        files[f.name] = sha256_file(out / f.name)
    stage.rmdir()
    manifest = {
        "scenario": scenario,
        "version": __version__,
        "seed": int(seed),
        "config": params,
        "conventions": CONVENTIONS,
        "summary": summary,
        "wall_time_s": round(wall, 3),
        "files": files,
    }
    _atomic_write(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def verify(manifest_path) -> tuple[bool, list[str]]:
    """Recompute digests of every file listed in a manifest.

    Returns ``(ok, problems)`` where ``problems`` names each missing or
    modified file.  A missing or unreadable manifest raises ``ManifestError``.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        files = manifest["files"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    problems = []
    for name, digest in sorted(files.items()):
        f = path.parent / name
        if not f.is_file():
            problems.append(f"missing: {name}")
        elif sha256_file(f) != digest:
            problems.append(f"modified: {name}")
    return not problems, problems
