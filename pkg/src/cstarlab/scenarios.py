"""Curated scenarios with deterministic text reports and optional CSV output.

Block indices in reports are 1-based; the library itself is 0-based.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .covers import (Cover, compare, extend_by_shilov, generated_cover, join, map_N, map_Q, map_R, morphism_error, spectral_fingerprint)
from .dilation import (TwistFamily, a_matrix, scale_corner,
                       semidirichlet_scaling_probe, t2_algebra)
from .errors import UnknownScenario
from .fdca import BlockElement, BlockShape, Ideal
from .matcore import DEFAULT_TOL, ToleranceConfig, herm_eigs
from .opalg import (OperatorAlgebra, envelope, generate_algebra, is_dirichlet,
                    is_semi_dirichlet, shilov_ideal)


@dataclass
class ScenarioResult:
    name: str
    lines: list[str] = field(default_factory=list)
    checks: list[tuple[str, bool]] = field(default_factory=list)
    csv: str | None = None

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.checks)

    def check(self, label: str, ok: bool) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    def report(self) -> str:
        out = [f"scenario: {self.name}"] + self.lines
        out += [f"[{'PASS' if ok else 'FAIL'}] {label}" for label, ok in self.checks]
        out.append(f"RESULT: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"


def fmt(x: float) -> str:
    return f"{x:.6g}"


def fmt_set(vals) -> str:
    return "{" + ", ".join(fmt(v) for v in vals) + "}"


def pretty_shape(shape: BlockShape) -> str:
    return "⊕".join("ℂ" if n == 1 else f"M{n}" for n in shape.sizes)


def pretty_ideal(ideal: Ideal) -> str:
    if not ideal.members:
        return "none"
    return ", ".join(f"block {i + 1}" for i in ideal.sorted())


def _unit(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


def pi_oplus_id_algebra(tol: ToleranceConfig = DEFAULT_TOL) -> OperatorAlgebra:
    """The copy ``x -> (x_11, x)`` of the upper-triangular 2 x 2 matrices in C + M2."""
    shape = BlockShape((1, 2))
    gens = [BlockElement(shape, (np.array([[a]]), _unit(2, i, j)))
            for a, (i, j) in ((1.0, (0, 0)), (0.0, (0, 1)), (0.0, (1, 1)))]
    return generate_algebra(shape, gens, ("p", "e", "q"), tol)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(v if isinstance(v, str) else f"{v:.12g}" for v in r) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------


def run_t2_in_m2(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("t2_in_m2")
    A = t2_algebra(tol)
    S = shilov_ideal(A, tol)
    env = envelope(A, tol)
    res.lines += [f"dim A = {A.dim}", f"Shilov = {pretty_ideal(S)}", f"envelope = {pretty_shape(env.target)}"]
    res.check("Shilov ideal is zero", not S.members)
    res.check("envelope is M2", env.target.sizes == (2,))
    res.check("A + A* = M2 (Dirichlet)", is_dirichlet(A))
    res.check("semi-Dirichlet", is_semi_dirichlet(A))
    return res


def run_pi_oplus_id_t2(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("pi_oplus_id_t2")
    A = pi_oplus_id_algebra(tol)
    S = shilov_ideal(A, tol)
    env = envelope(A, tol)
    ext = extend_by_shilov(A, tol, shilov=S)
    shape = A.ambient
    c_plus_t2 = [BlockElement(shape, (np.eye(1), np.zeros((2, 2)))),
                 BlockElement(shape, (np.zeros((1, 1)), _unit(2, 0, 0))),
                 BlockElement(shape, (np.zeros((1, 1)), _unit(2, 0, 1))),
                 BlockElement(shape, (np.zeros((1, 1)), _unit(2, 1, 1)))]
    api_ok = ext.API.dim == 4 and all(ext.API.contains(x) for x in c_plus_t2)
    amb = Cover.ambient(A, tol)
    qn = all(compare(map_Q(ext, map_N(ext, c, tol), tol), c, tol).relation == "equivalent" for c in (amb, env))
    d = ext.ambient_cover
    nq = compare(map_N(ext, map_Q(ext, d, tol), tol), d, tol).relation == "equivalent"
    api_label = "ℂ⊕T2" if api_ok else f"dim {ext.API.dim}"
    res.lines.append(f"Shilov = {pretty_ideal(S)}; envelope = {pretty_shape(env.target)}; "
                     f"A+I = {api_label}; QN=NQ=id: {'PASS' if qn and nq else 'FAIL'}")
    res.check("Shilov ideal is the C block", S.members == {0})
    res.check("envelope is M2", env.target.sizes == (2,))
    res.check("A+I is C+T2 (dimension 4)", api_ok)
    res.check("Q(N(c)) = c for the ambient cover and the envelope", qn)
    res.check("N(Q(d)) = d for the ambient cover of A+I", nq)
    res.check("A+I has zero Shilov ideal", not shilov_ideal(ext.API, tol).members)
    return res


def run_t2_twist_chain(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("t2_twist_chain")
    s_values = params.get("s", [0.0, 0.3, 0.6, 0.9, 1.0])
    grid = int(params.get("grid", 101))
    ts = np.linspace(0.0, 1.0, grid)
    rows = []
    intervals = []
    for s in s_values:
        eigs = []
        for t in ts:
            a = a_matrix(s, t)
            ev = herm_eigs(a.conj().T @ a, tol)
            eigs.append(ev)
            rows += [[fmt_csv(s), fmt_csv(t), str(i), float(v)] for i, v in enumerate(ev)]
        allv = np.concatenate(eigs)
        lo, hi = float(allv.min()), float(allv.max())
        abs_end = np.sqrt(np.clip(herm_eigs(a_matrix(s, 1.0).conj().T @ a_matrix(s, 1.0), tol), 0, None))
        sq = np.sqrt(np.clip(allv, 0, None))
        intervals.append((s, float(sq.min()), float(sq.max())))
        res.lines.append(f"s={fmt(s)}: eig(A_s*A_s) in [{fmt(lo)}, {fmt(hi)}]; "
                         f"spectrum ⊆ [{fmt(s * s)}, 1]")
        res.check(f"s={fmt(s)}: eigenvalues within [s^4, 1]",
                  lo >= s ** 4 - 1e-8 and hi <= 1 + 1e-8)
        res.check(f"s={fmt(s)}: |A_s| endpoints s^2 and 1 at t=1",
                  abs(abs_end[0] - s * s) <= 1e-6 and abs(abs_end[-1] - 1.0) <= 1e-6)
    chain = all(b[1] >= a[1] - 1e-8 and b[2] <= a[2] + 1e-8
                for a, b in zip(intervals, intervals[1:]))
    res.check("spectra of |A_s| decrease along s (chain)", chain)
    res.csv = csv_text(["s", "t", "index", "eigenvalue"], rows)
    return res


def fmt_csv(x: float) -> str:
    return f"{x:.12g}"


def toeplitz_matrix(n: int, z: complex) -> np.ndarray:
    """``[[S, z (1 - S S*)], [0, S*]]`` with ``S`` the nilpotent n x n shift."""
    S = np.eye(n, k=-1, dtype=complex)
    top = np.concatenate([S, z * (np.eye(n) - S @ S.conj().T)], axis=1)
    bottom = np.concatenate([np.zeros((n, n)), S.conj().T], axis=1)
    return np.concatenate([top, bottom], axis=0)


def toeplitz_covers(n: int, zs, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[OperatorAlgebra, list[Cover]]:
    """Representations ``V -> V_z`` of the algebra generated by ``(+)_z V_z``.

    These are not completely isometric onto one another, so the covers are
    built without the isometry check.
    """
    shape = BlockShape(tuple([2 * n] * len(zs)))
    base = generate_algebra(shape, [BlockElement(shape, tuple(toeplitz_matrix(n, z) for z in zs))], ("V",), tol)
    covers = []
    for z in zs:
        tgt = BlockShape((2 * n,))
        covers.append(generated_cover(base, tgt, [BlockElement(tgt, (toeplitz_matrix(n, z),))], "custom",
                                      tol, check_isometry=False))
    return base, covers


def run_toeplitz_finite(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("toeplitz_finite")
    n = int(params.get("n", 8))
    zs = [complex(z) for z in params.get("z", [0.3, 0.6, 0.9])]
    _, covers = toeplitz_covers(n, zs, tol)
    rows = []
    for z, c in zip(zs, covers):
        fp = spectral_fingerprint(c, "V* V", tol)
        expect = sorted({0.0, abs(z) ** 2, 1.0})
        ok = len(fp) == len(expect) and max(abs(a - b) for a, b in zip(fp, expect)) <= 1e-9
        res.lines.append(f"z={fmt(z.real)}{'' if z.imag == 0 else f'+{fmt(z.imag)}i'}: fingerprint(V*V) = {fmt_set(fp)}")
        res.check(f"z={fmt(abs(z))}: fingerprint equals {{0, |z|^2, 1}}", ok)
        rows += [[z.real, z.imag, str(i), v] for i, v in enumerate(fp)]
    for i in range(len(covers)):
        for j in range(i + 1, len(covers)):
            rel = compare(covers[i], covers[j], tol).relation
            res.lines.append(f"compare(z={fmt(abs(zs[i]))}, z={fmt(abs(zs[j]))}) = {rel}")
            res.check(f"z={fmt(abs(zs[i]))} vs z={fmt(abs(zs[j]))} incomparable", rel == "incomparable")
    res.csv = csv_text(["z_re", "z_im", "index", "eigenvalue"], rows)
    return res


def curated_corner_rep(t: float = 0.5) -> tuple[OperatorAlgebra, np.ndarray, int]:
    """The 4 x 4 dilation of T2 with the split ``3 | 1``."""
    f = TwistFamily.sarason_t2(t)
    mats = [f.sigma(g).blocks[0] for g in f.A.generators]
    return f.A, np.array(mats), 3


def run_semidirichlet_probe(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("semidirichlet_probe")
    t = float(params.get("t", 0.5))
    A, mats, split = curated_corner_rep(t)
    rep = semidirichlet_scaling_probe(A, list(mats), split, tol)
    res.lines.append(f"T2 dilation on C^4, split {split}|{4 - split}, corner norm {fmt(rep.corner_norm)}")
    res.lines.append(f"Phi semi-Dirichlet: {rep.phi}; Phi' (corner/2) semi-Dirichlet: {rep.phi_half}; "
                     f"Phi (+) Phi' semi-Dirichlet: {rep.joint}")
    for s in (1.0, 0.5):
        scaled = scale_corner(mats, split, s)
        alg = generate_algebra(BlockShape((4,)), [BlockElement(BlockShape((4,)), (m,)) for m in scaled],
                               A.names, tol)
        res.lines.append(f"corner scaled by {fmt(s)}: semi-Dirichlet {is_semi_dirichlet(alg)}")
        res.check(f"scaled family at s={fmt(s)} matches the probe",
                  is_semi_dirichlet(alg) == (rep.phi if s == 1.0 else rep.phi_half))
    res.check("T2 in M2 is Dirichlet", is_dirichlet(t2_algebra(tol)))
    res.check("at least one of Phi, Phi' is not semi-Dirichlet", rep.one_fails)
    res.check("Phi (+) Phi' is not semi-Dirichlet", not rep.joint)
    return res


def run_lattice_maps_roundtrip(params: dict, tol: ToleranceConfig) -> ScenarioResult:
    res = ScenarioResult("lattice_maps_roundtrip")
    A = pi_oplus_id_algebra(tol)
    ext = extend_by_shilov(A, tol)
    amb = Cover.ambient(A, tol)
    env = envelope(A, tol)
    worst = 0.0
    for label, c in (("ambient", amb), ("envelope", env)):
        n = map_N(ext, c, tol)
        q = map_Q(ext, n, tol)
        r = map_R(ext, n, tol)
        cq = compare(q, c, tol)
        cr = compare(r, join(c, amb, tol), tol)
        rq = compare(r, q, tol)
        for o, (x, y) in ((cq, (q, c)), (cr, (r, None)), (rq, (r, q))):
            if o.morphism is not None and y is not None:
                worst = max(worst, morphism_error(o.morphism, x, y))
        res.lines.append(f"{label}: N -> {pretty_shape(n.target)}, QN -> {pretty_shape(q.target)}, "
                         f"RN -> {pretty_shape(r.target)}")
        res.check(f"{label}: QN equivalent to c", cq.relation == "equivalent")
        res.check(f"{label}: RN equivalent to join(c, ambient)", cr.relation == "equivalent")
        res.check(f"{label}: R >= Q", rq.relation in ("equivalent", "first_dominates"))
    d = ext.ambient_cover
    nq = compare(map_N(ext, map_Q(ext, d, tol), tol), d, tol)
    if nq.morphism is not None:
        worst = max(worst, morphism_error(nq.morphism, map_N(ext, map_Q(ext, d, tol), tol), d))
    res.lines.append(f"ambient of A+I: NQ -> {nq.relation}")
    res.check("NQ(d) equivalent to d for the ambient cover of A+I", nq.relation == "equivalent")
    res.lines.append(f"largest certificate error: {worst:.1e}")
    res.check("certificates exact to 1e-10", worst <= 1e-10)
    return res


SCENARIOS: dict[str, Callable[[dict, ToleranceConfig], ScenarioResult]] = {
    "t2_in_m2": run_t2_in_m2,
    "pi_oplus_id_t2": run_pi_oplus_id_t2,
    "t2_twist_chain": run_t2_twist_chain,
    "toeplitz_finite": run_toeplitz_finite,
    "semidirichlet_probe": run_semidirichlet_probe,
    "lattice_maps_roundtrip": run_lattice_maps_roundtrip,
}

PARAM_RANGES = {
    "t2_twist_chain": {"s": (0.0, 1.0), "grid": (2, 100001)},
    "toeplitz_finite": {"n": (2, 32), "z": (0.0, 1.0)},
    "semidirichlet_probe": {"t": (0.0, 1.0)},
}


def run_scenario(name: str, params: dict | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> ScenarioResult:
    """Run a registered scenario.

    :raises UnknownScenario: for names outside the registry
    :raises ValueError: for parameters outside the registered ranges
    """
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    params = dict(params or {})
    ranges = PARAM_RANGES.get(name, {})
    for key, val in params.items():
        if key not in ranges:
            raise ValueError(f"scenario {name} takes no parameter {key!r}")
        lo, hi = ranges[key]
        for v in (val if isinstance(val, list) else [val]):
            if not lo <= abs(v) <= hi:
                raise ValueError(f"parameter {key}={v} outside [{lo}, {hi}]")
    return SCENARIOS[name](params, tol)
