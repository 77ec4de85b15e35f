"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
input errors.  All randomness derives from ``--seed`` (default: the
``CSTARLAB_SEED`` environment variable, else 0).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .covers import (Cover, compare, extend_by_shilov, join, map_N, map_Q, map_R)
from .dilation import (TwistFamily, delta_value, is_maximal, rep_from_matrices,
                       semidirichlet_scaling_probe, twist, twist_check)
from .errors import CStarLabError, ParseError, ShapeError, UnknownScenario
from .fdca import BlockElement, BlockShape
from .matcore import DEFAULT_TOL, ToleranceConfig
from .opalg import (OperatorAlgebra, boundary_ideals, envelope, generate_algebra, is_dirichlet,
                    is_semi_dirichlet, shilov_ideal)
from .scenarios import SCENARIOS, csv_text, pretty_ideal, pretty_shape, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_TOL_KEYS = {"eps_eq", "eps_norm", "eps_psd", "optimizer_restarts"}


# ---------------------------------------------------------------------------
# document format


def _matrix(obj, path: str) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise ParseError("block must be an object with an 're' field", path)
    try:
        re_part = np.array(obj["re"], dtype=float)
        im_part = np.array(obj.get("im", np.zeros_like(re_part)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"entries must be decimal numbers ({exc})", path) from exc
    if re_part.ndim != 2:
        raise ShapeError(f"expected a 2-d array, got {re_part.ndim}-d", f"{path}.re")
    if im_part.shape != re_part.shape:
        raise ShapeError(f"'im' has shape {im_part.shape}, 're' has {re_part.shape}", f"{path}.im")
    return re_part + 1j * im_part


def parse_algebra(doc: dict) -> tuple[BlockShape, list[BlockElement], list[str], ToleranceConfig]:
    """Validate an algebra document.

    :raises ParseError: for malformed documents (the message names the field path)
    :raises ShapeError: when a block does not match the declared shape
    """
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object", "$")
    sizes = doc.get("shape")
    if not isinstance(sizes, list) or not sizes or not all(isinstance(n, int) and n >= 1 for n in sizes):
        raise ParseError("'shape' must be a non-empty list of positive integers", "$.shape")
    shape = BlockShape(tuple(sizes))
    gens_doc = doc.get("generators")
    if not isinstance(gens_doc, list) or not gens_doc:
        raise ParseError("'generators' must be a non-empty list", "$.generators")
    gens, names = [], []
    for gi, g in enumerate(gens_doc):
        gpath = f"$.generators[{gi}]"
        if not isinstance(g, dict):
            raise ParseError("generator must be an object", gpath)
        name = g.get("name", f"g{gi}")
        if not isinstance(name, str) or not name.isidentifier():
            raise ParseError("'name' must be an identifier", f"{gpath}.name")
        blocks = g.get("blocks")
        if not isinstance(blocks, list):
            raise ParseError("'blocks' must be a list", f"{gpath}.blocks")
        if len(blocks) != len(shape):
            raise ShapeError(f"{len(blocks)} blocks for shape {sizes}", f"{gpath}.blocks")
        mats = []
        for bi, b in enumerate(blocks):
            m = _matrix(b, f"{gpath}.blocks[{bi}]")
            if m.shape != (sizes[bi], sizes[bi]):
                raise ShapeError(f"block is {m.shape[0]}x{m.shape[1]}, shape requires "
                                 f"{sizes[bi]}x{sizes[bi]}", f"{gpath}.blocks[{bi}]")
            mats.append(m)
        gens.append(BlockElement(shape, tuple(mats)))
        names.append(name)
    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict) or set(tol_doc) - _TOL_KEYS:
        raise ParseError(f"'tolerances' may only set {sorted(_TOL_KEYS)}", "$.tolerances")
    try:
        tol = ToleranceConfig(**tol_doc)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), "$.tolerances") from exc
    return shape, gens, names, tol


def load_document(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} at line {exc.lineno}", path) from exc


def load_algebra(path: str, seed: int) -> OperatorAlgebra:
    shape, gens, names, tol = parse_algebra(load_document(path))
    return generate_algebra(shape, gens, names, tol.with_(rng_seed=seed))


def load_cover(spec: str, A: OperatorAlgebra) -> Cover:
    """``ambient``, ``envelope`` or the path of a document whose generators are the images."""
    if spec == "ambient":
        return Cover.ambient(A)
    if spec == "envelope":
        return envelope(A)
    shape, imgs, names, _ = parse_algebra(load_document(spec))
    if names != list(A.names):
        raise ParseError(f"image names {names} do not match generators {list(A.names)}", spec)
    return Cover.from_images(A, shape, imgs, "custom")


# ---------------------------------------------------------------------------
# commands


def _verdict(ok: bool) -> int:
    print(f"RESULT: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_algebra_check(args) -> int:
    A = load_algebra(args.file, args.seed)
    print(f"ambient = {pretty_shape(A.ambient)}")
    print(f"dim = {A.dim}")
    print(f"self-adjoint = {A.is_selfadjoint()}")
    print(f"Dirichlet = {is_dirichlet(A)}")
    print(f"semi-Dirichlet = {is_semi_dirichlet(A)}")
    return _verdict(True)


def cmd_shilov(args) -> int:
    A = load_algebra(args.file, args.seed)
    print(f"Shilov = {pretty_ideal(shilov_ideal(A))}")
    return _verdict(True)


def cmd_envelope(args) -> int:
    A = load_algebra(args.file, args.seed)
    env = envelope(A)
    print(f"envelope = {pretty_shape(env.target)}")
    return _verdict(True)


def cmd_boundary_ideals(args) -> int:
    A = load_algebra(args.file, args.seed)
    for S, v in boundary_ideals(A):
        label = "{" + ", ".join(str(i + 1) for i in S.sorted()) + "}"
        extra = f" witness level {v.witness[0]}" if v.witness is not None else ""
        print(f"{label}: boundary={v.is_boundary} margin={v.margin:.3g}{extra}")
    return _verdict(True)


def cmd_covers(args) -> int:
    A = load_algebra(args.file, args.seed)
    c1, c2 = load_cover(args.first, A), load_cover(args.second, A)
    if args.action == "compare":
        order = compare(c1, c2)
        print(f"relation = {order.relation}")
        if order.morphism is not None:
            print(f"multiplicity = {[list(r) for r in order.morphism.multiplicity]}")
        return _verdict(order.relation != "unknown")
    j = join(c1, c2)
    print(f"join = {pretty_shape(j.target)}")
    ok = compare(j, c1).relation in ("equivalent", "first_dominates") and \
        compare(j, c2).relation in ("equivalent", "first_dominates")
    print(f"dominates both = {ok}")
    return _verdict(ok)


def cmd_extend_shilov(args) -> int:
    A = load_algebra(args.file, args.seed)
    ext = extend_by_shilov(A)
    print(f"Shilov = {pretty_ideal(ext.I)}")
    print(f"dim A = {A.dim}; dim A+I = {ext.API.dim}")
    print(f"A+I self-adjoint = {ext.API.is_selfadjoint()}")
    return _verdict(True)


def cmd_lattice_verify(args) -> int:
    A = load_algebra(args.file, args.seed)
    ext = extend_by_shilov(A)
    amb = Cover.ambient(A)
    ok = True
    for label, c in (("ambient", amb), ("envelope", envelope(A))):
        n = map_N(ext, c)
        qn = compare(map_Q(ext, n), c).relation == "equivalent"
        rn = compare(map_R(ext, n), join(c, amb)).relation == "equivalent"
        print(f"{label}: N -> {pretty_shape(n.target)}; QN=id {qn}; RN=join(c, ambient) {rn}")
        ok = ok and qn and rn
    d = ext.ambient_cover
    nq = compare(map_N(ext, map_Q(ext, d)), d).relation == "equivalent"
    print(f"ambient of A+I: NQ=id {nq}")
    return _verdict(ok and nq)


def cmd_twist_sweep(args) -> int:
    tol = DEFAULT_TOL.with_(rng_seed=args.seed)
    f = TwistFamily.sarason_t2(args.t, tol)
    rows = []
    ok = True
    zs = list(np.linspace(0.0, 1.0, args.grid)) + [np.exp(2j * np.pi * k / args.circle) for k in range(1, args.circle)]
    for z in zs:
        z = complex(z)
        rho = twist(f, z, tol)
        chk = twist_check(f, rho, tol, check_contractive=False)
        d = delta_value(f, args.word, z)
        ok = ok and chk.multiplicativity <= 1e-8
        rows.append([z.real, z.imag, chk.multiplicativity, d])
    text = csv_text(["z_re", "z_im", "multiplicativity_error", "delta"], rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return _verdict(ok)


def cmd_maximal_test(args) -> int:
    A = load_algebra(args.file, args.seed)
    if args.rep in ("ambient", "envelope"):
        c = load_cover(args.rep, A)
        mats = [y.dense() for y in c.images]
    else:
        _, imgs, _, _ = parse_algebra(load_document(args.rep))
        mats = [y.dense() for y in imgs]
    v = is_maximal(A, rep_from_matrices(A, mats))
    print(f"status = {v.status}")
    if v.certificate is not None:
        print(f"certificate: dilation on C^{v.certificate.V.shape[0]}, valid = {v.certificate.valid()}")
    return _verdict(v.status != "unknown")


def cmd_semidirichlet(args) -> int:
    A = load_algebra(args.file, args.seed)
    print(f"Dirichlet = {is_dirichlet(A)}")
    print(f"semi-Dirichlet = {is_semi_dirichlet(A)}")
    if args.rep:
        _, imgs, _, _ = parse_algebra(load_document(args.rep))
        rep = semidirichlet_scaling_probe(A, [y.dense() for y in imgs], args.split)
        print(f"Phi = {rep.phi}; Phi' = {rep.phi_half}; joint = {rep.joint}")
        return _verdict(rep.one_fails)
    return _verdict(True)


def _param_value(text: str):
    parts = [p for p in text.split(",") if p]
    try:
        vals = [int(p) if p.lstrip("-").isdigit() else float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"parameter value {text!r} is not numeric") from exc
    return vals if len(vals) > 1 or text.endswith(",") else vals[0]


def cmd_scenario_run(args) -> int:
    params = {}
    for kv in args.param or []:
        if "=" not in kv:
            raise ParseError(f"--param expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        params[k.strip()] = _param_value(v.strip())
    if args.name == "toeplitz_finite" and "z" in params and not isinstance(params["z"], list):
        params["z"] = [params["z"]]
    if args.name == "t2_twist_chain" and "s" in params and not isinstance(params["s"], list):
        params["s"] = [params["s"]]
    res = run_scenario(args.name, params, DEFAULT_TOL.with_(rng_seed=args.seed))
    sys.stdout.write(res.report())
    if args.csv and res.csv is not None:
        Path(args.csv).write_text(res.csv, encoding="utf-8", newline="\n")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_scenario_list(args) -> int:
    for name in SCENARIOS:
        print(name)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _default_seed() -> int:
    env = os.environ.get("CSTARLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ParseError(f"CSTARLAB_SEED must be an integer, got {env!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (default: $CSTARLAB_SEED or 0)")

    p = argparse.ArgumentParser(prog="cstarlab", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    alg = sub.add_parser("algebra", help="inspect an algebra document")
    alg_sub = alg.add_subparsers(dest="action", required=True)
    chk = alg_sub.add_parser("check", parents=[common])
    chk.add_argument("file")
    chk.set_defaults(func=cmd_algebra_check)

    for name, func, help_ in (("shilov", cmd_shilov, "Shilov ideal (1-based blocks)"),
                              ("envelope", cmd_envelope, "C*-envelope"),
                              ("boundary-ideals", cmd_boundary_ideals, "verdict for every ideal"),
                              ("extend-shilov", cmd_extend_shilov, "build A + I")):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.add_argument("file")
        sp.set_defaults(func=func)

    cov = sub.add_parser("covers", help="compare or join two covers")
    cov.add_argument("action", choices=["compare", "join"])
    cov.add_argument("file", help="algebra document")
    cov.add_argument("first", help="'ambient', 'envelope' or an image document")
    cov.add_argument("second", help="'ambient', 'envelope' or an image document")
    cov.add_argument("--seed", type=int, default=None)
    cov.set_defaults(func=cmd_covers)

    lat = sub.add_parser("lattice", help="lattice map round trips")
    lat_sub = lat.add_subparsers(dest="action", required=True)
    ver = lat_sub.add_parser("verify", parents=[common])
    ver.add_argument("file")
    ver.set_defaults(func=cmd_lattice_verify)

    tw = sub.add_parser("twist", help="twist families of the T2 dilation")
    tw_sub = tw.add_subparsers(dest="action", required=True)
    sw = tw_sub.add_parser("sweep", parents=[common])
    sw.add_argument("--t", type=float, default=0.5)
    sw.add_argument("--grid", type=int, default=11, help="points on [0, 1]")
    sw.add_argument("--circle", type=int, default=8, help="points on the unit circle")
    sw.add_argument("--word", default="e e* - p", help="element whose norm is recorded")
    sw.add_argument("--csv", default=None)
    sw.set_defaults(func=cmd_twist_sweep)

    mx = sub.add_parser("maximal", help="unique-extension test")
    mx_sub = mx.add_subparsers(dest="action", required=True)
    mt = mx_sub.add_parser("test", parents=[common])
    mt.add_argument("file")
    mt.add_argument("--rep", default="envelope", help="'ambient', 'envelope' or an image document")
    mt.set_defaults(func=cmd_maximal_test)

    sd = sub.add_parser("semidirichlet", help="(semi-)Dirichlet checks")
    sd_sub = sd.add_subparsers(dest="action", required=True)
    sc = sd_sub.add_parser("check", parents=[common])
    sc.add_argument("file")
    sc.add_argument("--rep", default=None, help="image document of an upper-triangular representation")
    sc.add_argument("--split", type=int, default=1)
    sc.set_defaults(func=cmd_semidirichlet)

    scn = sub.add_parser("scenario", help="curated scenarios")
    scn_sub = scn.add_subparsers(dest="action", required=True)
    run = scn_sub.add_parser("run", parents=[common])
    run.add_argument("name")
    run.add_argument("--param", action="append", metavar="K=V")
    run.add_argument("--csv", default=None)
    run.set_defaults(func=cmd_scenario_run)
    ls = scn_sub.add_parser("list")
    ls.set_defaults(func=cmd_scenario_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None:
            args.seed = _default_seed()
        return args.func(args)
    except (ParseError, ShapeError, UnknownScenario, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, UnknownScenario) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except CStarLabError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
