"""Command-line front end: bounds for states and families, the protocol
simulator, lemma verification suites, subrank, and figure-data sweeps."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds, entropy, lp, marginals, protocol, states, subrank

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2

_UNITARIES = {
    "hadamard": states.HADAMARD,
    "identity": np.eye(2),
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _fmt(v: float) -> str:
    return f"{v:.6f}"


# ---------------------------------------------------------------------------
# input handling


def _parse_param(raw: str):
    if raw is None:
        raise CliError("--family requires --param")
    if "," in raw:
        try:
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError:
            raise CliError(f"cannot parse parameter list {raw!r}") from None
    try:
        as_float = float(raw)
    except ValueError:
        raise CliError(f"cannot parse parameter {raw!r}") from None
    return int(as_float) if as_float == int(as_float) and "." not in raw else as_float


def _parse_matrix(spec: str) -> np.ndarray:
    body = spec.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise CliError(f"matrix literal must look like [a,b;c,d], got {spec!r}")
    rows = body[1:-1].split(";")
    try:
        mat = [[complex(tok.replace("i", "j")) for tok in row.split(",")] for row in rows]
    except ValueError:
        raise CliError(f"cannot parse complex entries in {spec!r}") from None
    arr = np.array(mat, dtype=complex)
    if arr.shape != (2, 2):
        raise CliError("inline rotations must be 2x2")
    return arr


def _parse_rotation(spec: str) -> states.LocalUnitary:
    if ":" not in spec:
        raise CliError(f"--rotate expects SITE:UNITARY, got {spec!r}")
    site_raw, mat_raw = spec.split(":", 1)
    try:
        site = int(site_raw)
    except ValueError:
        raise CliError(f"rotation site {site_raw!r} is not an integer") from None
    name = mat_raw.strip().lower()
    matrix = _UNITARIES[name] if name in _UNITARIES else _parse_matrix(mat_raw)
    try:
        return states.LocalUnitary(site, matrix)
    except states.StateValidationError as e:
        raise CliError(str(e)) from e


def _load_input(args) -> states.PureState:
    if getattr(args, "state_file", None):
        try:
            state = states.load_state(args.state_file)
        except OSError as e:
            raise CliError(f"cannot read {args.state_file}: {e.strerror}") from e
        except states.StateFileError as e:
            raise CliError(f"{args.state_file}: {e}") from e
    elif args.family:
        try:
            state = states.family(args.family, _parse_param(args.param))
        except states.StateValidationError as e:
            raise CliError(str(e)) from e
    else:
        raise CliError("provide a state file or --family NAME --param VALUE")
    for spec in getattr(args, "rotate", None) or []:
        u = _parse_rotation(spec)
        try:
            state = states.apply_local_unitary(state, u)
        except states.StateValidationError as e:
            raise CliError(str(e)) from e
    return state


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GHZ_FORGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"GHZ_FORGE_SEED={env!r} is not an integer") from None
    return 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_bound(args, out) -> int:
    state = _load_input(args)
    dist = states.distribution_of(state)
    report = bounds.theorem1_bound(dist)
    sol = report.witness["lp"]
    out.write(f"H(P)   = {_fmt(report.witness['H'])}\n")
    out.write("x      = [" + ", ".join(_fmt(v) for v in sol.x) + "]\n")
    cert = {
        _mask_name(m, dist.k): w for m, w in sorted(sol.certificate.items()) if w > 1e-12
    }
    out.write(
        "dual y = {" + ", ".join(f"{name}: {_fmt(w)}" for name, w in cert.items()) + "}\n"
    )
    out.write(f"bound  = {_fmt(report.value)}\n")
    return EXIT_OK


def _mask_name(mask: int, k: int) -> str:
    return "{" + ",".join(str(j + 1) for j in entropy.mask_sites(mask, k)) + "}"


@dataclass
class SweepSpec:
    family: str
    start: float
    stop: float
    steps: int
    bound_names: tuple

    def __post_init__(self):
        if self.steps < 2:
            raise CliError("sweep needs at least 2 steps")
        known = {"theorem1", "smolin", "streltsov", "cut"}
        bad = set(self.bound_names) - known
        if bad:
            raise CliError(f"unknown bound names: {sorted(bad)}")


_SWEEP_EVALS = {
    "theorem1": lambda st: bounds.theorem1_bound(states.distribution_of(st)).value,
    "smolin": marginals.smolin_bound,
    "streltsov": marginals.streltsov_bound,
    "cut": marginals.cut_upper_bound,
}


def cmd_sweep(args, out) -> int:
    spec = SweepSpec(
        family=args.family,
        start=args.start,
        stop=args.stop,
        steps=args.steps,
        bound_names=tuple(args.bounds.split(",")),
    )
    rotations = [_parse_rotation(s) for s in (args.rotate or [])]
    lines = ["p," + ",".join(spec.bound_names)]
    for i in range(spec.steps):
        p = spec.start + (spec.stop - spec.start) * i / (spec.steps - 1)
        try:
            state = states.family(spec.family, p)
        except states.StateValidationError as e:
            raise CliError(str(e)) from e
        rotated = state
        for u in rotations:
            rotated = states.apply_local_unitary(rotated, u)
        row = [_fmt(p)]
        for name in spec.bound_names:
            target = rotated if name == "theorem1" else state
            row.append(_fmt(_SWEEP_EVALS[name](target)))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise CliError(f"cannot write {args.out}: {e.strerror}") from e
    else:
        out.write(text)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    state = _load_input(args)
    if args.n < 1:
        raise CliError("--n must be a positive integer")
    try:
        report = protocol.run_protocol(
            state,
            args.n,
            args.delta,
            args.eps,
            _default_seed(args),
            workers=args.workers,
        )
    except (states.StateValidationError, states.EmptyTypicalSetError, ValueError) as e:
        raise CliError(str(e)) from e
    out.write(report.serialize() + "\n")
    return EXIT_OK


def cmd_subrank(args, out) -> int:
    state = _load_input(args)
    supp = states.support_of(state)
    for _ in range(args.power - 1):
        supp = subrank.product_set(supp, states.support_of(state))
    try:
        value, cert = subrank.brute_force_subrank(supp)
    except ValueError as e:
        raise CliError(str(e)) from e
    out.write(f"subrank = {value}\n")
    out.write("witness = " + ", ".join(str(e) for e in sorted(cert.elements)) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suites


def _verify_duality(trials, seed, out):
    rng = np.random.Generator(np.random.Philox(key=seed))
    for t in range(trials):
        k = int(rng.integers(3, 5))
        masks = list(entropy.proper_masks(k))
        h = entropy.EntropyProfile(
            k, {m: float(v) for m, v in zip(masks, rng.random(len(masks)) * 2.0)}
        )
        problem = lp.CoveringLP(k, h)
        primal = lp.solve_primal(problem)
        dual = lp.solve_dual(problem)
        vertex = lp.vertex_maximum(problem)
        if abs(primal.objective - dual.objective) > 1e-9 or abs(
            primal.objective - vertex
        ) > 1e-9:
            out.write(
                f"counterexample at trial {t}: k={k} h={h.values} "
                f"primal={primal.objective!r} dual={dual.objective!r} vertex={vertex!r}\n"
            )
            return False
    return True


def _random_support_instance(rng):
    k = 3
    dims = tuple(int(d) for d in rng.integers(2, 4, size=k))
    universe = [
        (a, b, c) for a in range(dims[0]) for b in range(dims[1]) for c in range(dims[2])
    ]
    size = int(rng.integers(3, min(9, len(universe)) + 1))
    chosen = rng.choice(len(universe), size=size, replace=False)
    elements = frozenset(universe[i] for i in chosen)
    return states.SupportSet(k, dims, elements)


def _verify_meanbounds(trials, seed, out):
    rng = np.random.Generator(np.random.Philox(key=seed))
    for t in range(trials):
        supp = _random_support_instance(rng)
        if t % 2 == 0:
            model = protocol.IndependentInclusionModel(
                supp.dims, tuple(0.3 + 0.5 * rng.random(supp.k))
            )
        else:
            model = protocol.PartitionCellModel(
                supp.dims, tuple(int(m) for m in rng.integers(2, 4, size=supp.k))
            )
        f = {e: float(v) for e, v in zip(sorted(supp.elements), rng.random(len(supp.elements)))}
        lower, upper = protocol.meanbounds_sandwich(supp, f, model.homogeneous_model())
        exact = protocol.exact_expectation(supp, f, model)
        if not lower - 1e-9 <= exact <= upper + 1e-9:
            out.write(
                f"counterexample at trial {t}: support={sorted(supp.elements)} "
                f"model={model} exact={exact!r} bounds=({lower!r}, {upper!r})\n"
            )
            return False
    return True


def _verify_majorization(trials, seed, out, plant_violation=False):
    rng = np.random.Generator(np.random.Philox(key=seed))
    planted = [
        ([0.5, 0.5], [1.0], True),  # uniform is majorized by a point mass
        ([1.0], [0.5, 0.5], False),
        ([0.5, 0.3, 0.2], [0.6, 0.4], True),
    ]
    for p, q, expect in planted:
        if entropy.majorizes(p, q) != expect:
            out.write(f"counterexample: majorizes({p}, {q}) != {expect}\n")
            return False
    if plant_violation:
        p, q = [0.6, 0.4], [0.5, 0.5]  # planted false claim: p is not majorized by q
        out.write(f"counterexample (planted): majorizes({p}, {q}) is False\n")
        return False
    for t in range(trials):
        n = int(rng.integers(2, 6))
        p = rng.random(n)
        p /= p.sum()
        # mixing permutations of q never pushes it up the majorization order
        q = np.sort(p)[::-1]
        w = rng.random(n)
        w /= w.sum()
        averaged = w @ np.stack([np.roll(q, s) for s in range(n)])
        if not entropy.majorizes(averaged, q):
            out.write(f"counterexample at trial {t}: {averaged} vs {q}\n")
            return False
    return True


def cmd_verify(args, out) -> int:
    suites = {
        "meanbounds": _verify_meanbounds,
        "duality": _verify_duality,
        "majorization": _verify_majorization,
    }
    if args.lemma not in suites:
        raise CliError(f"unknown lemma {args.lemma!r}; choose from {sorted(suites)}")
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    seed = _default_seed(args)
    if args.lemma == "majorization":
        ok = _verify_majorization(args.trials, seed, out, plant_violation=args.plant_violation)
    else:
        ok = suites[args.lemma](args.trials, seed, out)
    out.write(f"{args.lemma}: {'pass' if ok else 'FAIL'} ({args.trials} trials)\n")
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ghz-forge",
        description="Lower bounds on LOCC-distillable GHZ rates and the "
        "randomized partition protocol behind them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_state_args(p):
        p.add_argument("state_file", nargs="?", help="state document (JSON)")
        p.add_argument("--family", help="built-in family name")
        p.add_argument("--param", help="family parameter (number or comma list)")
        p.add_argument(
            "--rotate",
            action="append",
            metavar="SITE:U",
            help="apply a local rotation, e.g. 0:hadamard or 0:[1,1;1,-1]",
        )

    p_bound = sub.add_parser("bound", help="Theorem-style rate bound for a state")
    add_state_args(p_bound)

    p_sweep = sub.add_parser("sweep", help="CSV comparison curves over a family")
    p_sweep.add_argument("--family", required=True)
    p_sweep.add_argument("--start", type=float, default=0.0)
    p_sweep.add_argument("--stop", type=float, default=0.5)
    p_sweep.add_argument("--steps", type=int, default=51)
    p_sweep.add_argument("--bounds", default="theorem1,smolin,streltsov,cut")
    p_sweep.add_argument("--rotate", action="append", metavar="SITE:U")
    p_sweep.add_argument("--out", help="output CSV path (stdout when omitted)")

    p_sim = sub.add_parser("simulate", help="run the randomized partition protocol")
    add_state_args(p_sim)
    p_sim.add_argument("--n", type=int, required=True, help="number of copies")
    p_sim.add_argument("--delta", type=float, default=0.05)
    p_sim.add_argument("--eps", type=float, default=0.2)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--workers", type=int, default=1)

    p_sub = sub.add_parser("subrank", help="exact subrank of a state's support")
    add_state_args(p_sub)
    p_sub.add_argument("--power", type=int, default=1)

    p_ver = sub.add_parser("verify", help="run a lemma property suite")
    p_ver.add_argument("--lemma", required=True)
    p_ver.add_argument("--trials", type=int, default=100)
    p_ver.add_argument("--seed", type=int)
    p_ver.add_argument(
        "--plant-violation",
        action="store_true",
        help="inject a known-false claim to exercise the failure path",
    )
    return parser


_COMMANDS = {
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "subrank": cmd_subrank,
    "verify": cmd_verify,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args, out)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
