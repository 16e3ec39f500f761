"""Acceptance suite: one test per contract criterion.

Each test prints a single summary line (visible with -rA or on failure)
and covers one end-to-end property of the verification pipeline.
"""

import math

import numpy as np
import pytest

from freeform import cli
from freeform import functionals as fn
from freeform import geometry as geo
from freeform import reilly
from freeform import symalg
from freeform.spaceform import (BallDomain, Potential, SpaceForm,
                                boundary_potential_ratio,
                                boundary_sphere_shape_operator)

QUAD = geo.QuadratureSpec(order=20, level=1)


def report(num, label, ok, detail=""):
    line = f"criterion {num:02d} {label}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    assert ok, line


def axis_potential(shape):
    return Potential(shape.space_form, shape.axis)


@pytest.fixture(scope="module")
def perturbed_n2():
    """50 seeded convex Euclidean free-boundary profile shapes, n=2."""
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    rng = np.random.default_rng(202)
    return [cli.random_perturbed(sf, ball, rng, 2) for _ in range(50)]


@pytest.fixture(scope="module")
def perturbed_n3():
    """50 seeded convex Euclidean free-boundary profile shapes, n=3."""
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    rng = np.random.default_rng(303)
    return [cli.random_perturbed(sf, ball, rng, 3) for _ in range(50)]


def normalized_sides(shape, k, weight=None, full=False):
    """Both sides of the main inequality divided by a scale factor so
    the equality criterion is unit free."""
    data = geo.surface_data(shape, QUAD, full=full)
    n = shape.n
    num = den = 0.0
    for fr in data.frames:
        w = fn.weight_value(weight, fr)
        num += w * fn.hk_value(fr, k) * fr.weight
        den += w * fr.weight
    avg = num / den
    lhs = rhs = 0.0
    for fr in data.frames:
        w = fn.weight_value(weight, fr)
        lhs += w * (fn.hk_value(fr, k) - avg) ** 2 * fr.weight
        rhs += w * fn.traceless_newton_norm2(fr, k) * fr.weight
    rhs *= n * (n - 1) / (n - k) ** 2
    scale = den * (1.0 + avg * avg)
    return lhs / scale, rhs / scale


def test_criterion_01_equality_at_caps_and_disk():
    """Caps in all space forms and the flat disk attain equality: both
    sides of the main inequality vanish to 1e-10 in normalized units."""
    worst = 0.0
    for K in (-1, 0, 1):
        sf = SpaceForm(K)
        ball = BallDomain(sf, 1.0 if K == 0 else 0.9)
        for rho_scale in np.geomspace(0.35, 3.0, 10):
            rho = float(rho_scale) * ball.R_model
            # n = 2 evaluated on the full two-dimensional chart
            cap2 = geo.make_cap(sf, ball, rho, n=2)
            lhs, rhs = normalized_sides(cap2, 1, full=True)
            worst = max(worst, abs(lhs), abs(rhs))
            # n = 3 evaluated through the profile reduction
            cap3 = geo.make_cap(sf, ball, rho, n=3)
            for k in (1, 2):
                lhs, rhs = normalized_sides(cap3, k)
                worst = max(worst, abs(lhs), abs(rhs))
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    for n in (2, 3):
        disk = geo.make_flat_disk(sf, ball, n=n)
        for k in range(1, n):
            lhs, rhs = normalized_sides(disk, k, full=(n == 2))
            worst = max(worst, abs(lhs), abs(rhs))
    report(1, "equality at caps and flat disks", worst <= 1e-10,
           f"worst={worst:.3e}")


def test_criterion_02_strict_inequality_perturbed(perturbed_n2, perturbed_n3):
    """50 admissible perturbed shapes per (n, k) satisfy the inequality,
    strictly so away from umbilicity."""
    ok = True
    detail = []
    for shapes, n, k in ((perturbed_n2, 2, 1), (perturbed_n3, 3, 1),
                         (perturbed_n3, 3, 2)):
        strict = 0
        for shape in shapes:
            check = fn.check_main_inequality(shape, QUAD, k)
            ok = ok and check.hypotheses["ricci_min"] >= -1e-10
            ok = ok and check.lhs <= check.rhs * (1 + 1e-8)
            if geo.non_umbilicity(shape, QUAD) >= 0.05:
                strict += 1
                ok = ok and check.ratio < 1 - 1e-4
        detail.append(f"(n={n},k={k}):{len(shapes)} shapes,{strict} strict")
    report(2, "strict inequality on perturbed shapes", ok, "; ".join(detail))


def test_criterion_03_low_dim_corollary_i(perturbed_n2):
    """(1/4)(int H)^2/|Sigma| + |boundary| equals 2 pi for caps, exactly
    for the disk, and is >= 2 pi for perturbed shapes."""
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    ok = True
    worst_cap = 0.0
    for rho_scale in np.geomspace(0.35, 3.0, 10):
        cap = geo.make_cap(sf, ball, float(rho_scale), n=2)
        check = fn.check_corollary_low_dim(cap, QUAD, "i")
        worst_cap = max(worst_cap, abs(check.lhs / (2 * math.pi) - 1.0))
        # closed-form cross-check |Sigma|/rho^2 + |boundary| = 2 pi
        data = geo.surface_data(cap, QUAD)
        direct = data.area / rho_scale**2 + cap.boundary_measure()
        ok = ok and abs(direct / (2 * math.pi) - 1.0) <= 1e-8
    ok = ok and worst_cap <= 1e-8
    disk = geo.make_flat_disk(sf, ball, n=2)
    dcheck = fn.check_corollary_low_dim(disk, QUAD, "i")
    ok = ok and abs(dcheck.lhs / (2 * math.pi) - 1.0) <= 1e-12
    low = math.inf
    for shape in perturbed_n2:
        check = fn.check_corollary_low_dim(shape, QUAD, "i")
        low = min(low, check.lhs)
    ok = ok and low >= 2 * math.pi - 1e-8
    report(3, "low-dimensional corollary (i)", ok,
           f"cap rel err={worst_cap:.3e}, perturbed min={low:.12f}")


def test_criterion_04_low_dim_corollary_ii():
    """n=3 caps: the boundary functional equals f_3(f_1^{-1}(|Sigma|/4))
    with the cap functions inverted by bisection."""
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    worst = 0.0
    for rho_scale in np.geomspace(0.4, 2.5, 8):
        cap = geo.make_cap(sf, ball, float(rho_scale), n=3)
        check = fn.check_corollary_low_dim(cap, QUAD, "ii")
        worst = max(worst, abs(check.lhs / check.rhs - 1.0))
    report(4, "low-dimensional corollary (ii)", worst <= 1e-6,
           f"worst rel err={worst:.3e}")


def test_criterion_05_quermass_top_order():
    """W_3 = 2 pi / 3 for all n=2 caps and the flat disk."""
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    target = 2 * math.pi / 3
    worst = 0.0
    for rho_scale in np.geomspace(0.35, 3.0, 10):
        cap = geo.make_cap(sf, ball, float(rho_scale), n=2)
        worst = max(worst, abs(fn.quermass_k(cap, QUAD, 3) / target - 1.0))
    disk = geo.make_flat_disk(sf, ball, n=2)
    worst = max(worst, abs(fn.quermass_k(disk, QUAD, 3) / target - 1.0))
    report(5, "top-order quermass constant", worst <= 1e-8,
           f"worst rel err={worst:.3e}")


def test_criterion_06_boundary_identity():
    """Shape operator of the ball boundary equals the logarithmic normal
    derivative of the potential at 100 random boundary points per K."""
    rng = np.random.default_rng(17)
    worst = 0.0
    for K in (-1, 0, 1):
        sf = SpaceForm(K)
        ball = BallDomain(sf, 0.9 if K != 0 else 1.0)
        target = boundary_sphere_shape_operator(sf, ball)
        a = np.array([0.0, 0.0, 1.0])
        pot = Potential(sf, a)
        found = 0
        while found < 100:
            v = rng.normal(size=3)
            x = ball.R_model * v / np.linalg.norm(v)
            if pot.value(x) <= 1e-3:
                continue
            found += 1
            worst = max(worst, abs(boundary_potential_ratio(pot, ball, x)
                                   - target))
    report(6, "boundary potential identity", worst <= 1e-10,
           f"worst residual={worst:.3e}")


def test_criterion_07_weighted_integral_identity():
    """The weighted integral identity balances on 20 random triples, on
    the closed-form disk witness, and refines at order >= 2."""
    ok = True
    # closed-form witness: flat disk, V = 1, f = |p|^2, both sides 8 pi
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    disk = geo.make_flat_disk(sf, ball, n=2)
    one = reilly.ChartField(lambda p: 1.0, lambda p: np.zeros(2),
                            lambda p: np.zeros((2, 2)))
    f_sq = reilly.ChartField.from_ambient(disk, lambda x: float(x @ x),
                                          lambda x: 2.0 * x,
                                          lambda x: 2.0 * np.eye(3))
    led = reilly.reilly_residual(disk, one, f_sq, QUAD)
    ok = ok and abs(led.bulk_lhs / (8 * math.pi) - 1.0) <= 1e-12
    ok = ok and abs(led.boundary_HN / (8 * math.pi) - 1.0) <= 1e-12
    ok = ok and led.relative_residual <= 1e-12

    rng = np.random.default_rng(23)
    worst = led.relative_residual
    for _ in range(20):
        K = int(rng.choice([-1, 0, 1]))
        R = float(rng.uniform(0.7, 1.1))
        sf_i = SpaceForm(K)
        ball_i = BallDomain(sf_i, R)
        shape = geo.make_profile_shape(
            sf_i, ball_i, float(rng.uniform(1.1, 1.5)) * ball_i.R_model,
            r_sin={2: float(rng.uniform(-1, 1))},
            z_cos={1: float(rng.uniform(-1, 1))},
            eps=float(rng.uniform(0.0, 0.04)), n=2)
        V = reilly.ChartField.from_potential(shape, axis_potential(shape))
        curve = geo.trig_curve(float(rng.uniform(-0.5, 0.5)), {},
                               {1: float(rng.uniform(-0.5, 0.5)),
                                2: float(rng.uniform(-0.3, 0.3))})
        f = reilly.ChartField.from_profile(curve, 2)
        worst = max(worst, reilly.reilly_residual(shape, V, f, QUAD)
                    .relative_residual)
    ok = ok and worst <= 1e-6

    # refinement order via finite-difference field oracles
    sf0 = SpaceForm(0)
    shape = geo.make_profile_shape(sf0, BallDomain(sf0, 1.0), 1.3,
                                   r_sin={2: 1.0}, z_cos={1: 0.6},
                                   eps=0.02, n=2)
    res = []
    for step in (4e-3, 2e-3, 1e-3):
        f = reilly.ChartField.from_callable_fd(
            lambda p: math.cos(p[0]) + 0.3 * math.cos(2.0 * p[0]), 2,
            step=step)
        res.append(reilly.reilly_residual(shape, one, f, QUAD)
                   .relative_residual)
    order = min(math.log2(res[0] / res[1]), math.log2(res[1] / res[2]))
    ok = ok and order >= 2.0 - 0.3
    report(7, "weighted integral identity", ok,
           f"worst rel residual={worst:.3e}, refinement order={order:.2f}")


def test_criterion_08_solver_and_proof_chain(perturbed_n2):
    """Auxiliary problem solve and the step-by-step re-derivation of the
    main inequality agree with the direct checker."""
    ok = True
    details = []
    for shape, pot in ((perturbed_n2[0], None),
                       (perturbed_n2[1], axis_potential(perturbed_n2[1]))):
        rep = reilly.proof_chain_check(shape, pot, 1, QUAD, n_cells=2000)
        ok = ok and rep.pde_residual <= 1e-7
        ok = ok and rep.pairing_residual <= 1e-6
        ok = ok and rep.trace_slack >= 0.0
        ok = ok and rep.slack_residual <= 1e-5
        ok = ok and rep.cauchy_schwarz_ok and rep.final_ok
        check = fn.check_main_inequality(shape, QUAD, 1, weight=pot)
        ok = ok and abs(rep.final_lhs / check.lhs - 1.0) <= 1e-6
        ok = ok and abs(rep.final_rhs / check.rhs - 1.0) <= 1e-6
        details.append(f"pde={rep.pde_residual:.2e} "
                       f"pairing={rep.pairing_residual:.2e} "
                       f"slack={rep.slack_residual:.2e}")
    report(8, "solver and proof chain", ok, "; ".join(details))


def test_criterion_09_newton_tensor_algebra():
    """Recursion, oracle definitions, trace identity, traceless first
    tensor and the Newton-MacLaurin equality case."""
    rng = np.random.default_rng(42)
    ok = True
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        B = rng.normal(size=(n, n))
        g = B @ B.T + n * np.eye(n)
        S = rng.normal(size=(n, n))
        h = 0.5 * (S + S.T)
        W = np.linalg.solve(g, h)
        tensors = symalg.newton_tensors(W, g)
        kappa = symalg.principal_curvatures(h, g)
        H = symalg.mean_curvatures(kappa)
        for m in range(n):
            scale = max(1.0, float(np.abs(tensors[m]).max()))
            oracle = (symalg.newton_tensor_delta_oracle(W, m) if n <= 4
                      else symalg.newton_tensor_eigen_oracle(h, g, m))
            worst = max(worst, float(np.abs(tensors[m] - oracle).max())
                        / scale)
            ok = ok and np.trace(tensors[m]) == pytest.approx(
                (n - m) * H[m], rel=1e-9, abs=1e-9)
        T1_ring = symalg.traceless_part(tensors[1], H[1], n, 1)
        W_ring = W - (H[1] / n) * np.eye(n)
        ok = ok and float(np.abs(T1_ring + W_ring).max()) <= 1e-10 * max(
            1.0, float(np.abs(W_ring).max()))
    ok = ok and worst <= 1e-10
    for n in (3, 4, 5):
        kappa = np.full(n, 1.3)
        for k in range(1, n):
            _, _, slack = symalg.newton_maclaurin_check(kappa, k)
            ok = ok and abs(slack) <= 1e-10
    report(9, "Newton tensor algebra", ok, f"worst oracle gap={worst:.3e}")


def test_criterion_10_substatic_factorization(perturbed_n2):
    """Intrinsic assembly equals the algebraic factorization, and strictly
    convex Euclidean caps have a strictly positive tensor."""
    ok = True
    worst = 0.0
    for K in (-1, 0, 1):
        sf = SpaceForm(K)
        ball = BallDomain(sf, 0.9 if K != 0 else 1.0)
        cap = geo.make_cap(sf, ball, 1.2 * ball.R_model, n=2)
        worst = max(worst, reilly.substatic_consistency(
            cap, axis_potential(cap), QUAD))
        shape = geo.make_profile_shape(sf, ball, 1.3 * ball.R_model,
                                       r_sin={2: 1.0}, z_cos={1: 0.6},
                                       eps=0.02, n=2)
        worst = max(worst, reilly.substatic_consistency(
            shape, axis_potential(shape), QUAD))
    for shape in perturbed_n2[:3]:
        worst = max(worst, reilly.substatic_consistency(
            shape, axis_potential(shape), QUAD))
    ok = ok and worst <= 1e-8
    sf = SpaceForm(0)
    ball = BallDomain(sf, 1.0)
    min_eig = math.inf
    for rho_scale in (0.6, 1.0, 2.0):
        cap = geo.make_cap(sf, ball, float(rho_scale), n=2)
        hyp = fn.hypothesis_report(cap, QUAD, axis_potential(cap))
        ok = ok and hyp["convexity_min"] > 0.0
        min_eig = min(min_eig, hyp["substatic_min"])
    ok = ok and min_eig > 0.0
    report(10, "substatic factorization", ok,
           f"worst gap={worst:.3e}, convex cap min eig={min_eig:.3e}")


def test_criterion_11_closed_hypersurface_suites():
    """Spheres attain equality; perturbed closed convex shapes pass both
    Perez formulations, their linkage, and the closed main inequality."""
    ok = True
    worst_eq = 0.0
    for K in (-1, 0, 1):
        for n in (2, 3):
            sphere = geo.make_closed_sphere(SpaceForm(K), 0.8, n=n)
            for k in range(1, n):
                lhs, rhs = normalized_sides(sphere, k)
                worst_eq = max(worst_eq, abs(lhs), abs(rhs))
    ok = ok and worst_eq <= 1e-10

    rng = np.random.default_rng(7)
    quad = QUAD
    worst_link = 0.0
    built = 0
    while built < 10:
        coeffs = list(rng.uniform(-1, 1, size=3))
        eps = float(rng.uniform(0.005, 0.03))
        shape = geo.make_closed_sphere(SpaceForm(0), 1.0, cos_coeffs=coeffs,
                                       eps=eps, n=2)
        if geo.ricci_min_over(shape, quad) < -fn.GATE_TOL \
                or geo.convexity_min(shape, quad) <= 0.0:
            continue
        built += 1
        c1 = fn.check_perez(shape, quad, 1)
        c2 = fn.check_perez(shape, quad, 2)
        ok = ok and c1.status == "pass" and c2.status == "pass"
        linked = c1.lhs / shape.n + c1.extra["hring2"]
        worst_link = max(worst_link, abs(c2.lhs - linked)
                         / max(1e-30, abs(c2.lhs)))
        for k in range(1, shape.n):
            kc = fn.check_main_inequality(shape, quad, k, name="closed")
            ok = ok and kc.status == "pass"
    # closed main inequality also in n=3 and curved ambients
    for K in (-1, 1):
        shape = geo.make_closed_sphere(SpaceForm(K), 0.8,
                                       cos_coeffs=[0.5, -0.3], eps=0.01, n=3)
        for k in (1, 2):
            kc = fn.check_main_inequality(shape, quad, k, name="closed")
            ok = ok and kc.status in ("pass", "inapplicable")
            if kc.status == "pass":
                ok = ok and kc.lhs <= kc.rhs * (1 + 1e-8)
    ok = ok and worst_link <= 1e-10
    report(11, "closed hypersurface suites", ok,
           f"sphere eq={worst_eq:.3e}, linkage={worst_link:.3e}")


def test_criterion_12_weighted_theorem(perturbed_n2, perturbed_n3):
    """Axis-weighted inequality: equality at caps under passing gates,
    strict validity on perturbed shapes."""
    ok = True
    worst_eq = 0.0
    for K in (-1, 0, 1):
        sf = SpaceForm(K)
        ball = BallDomain(sf, 0.9 if K != 0 else 1.0)
        for rho_scale in (0.6, 1.0, 1.8):
            cap = geo.make_cap(sf, ball, float(rho_scale) * ball.R_model, n=2)
            check = fn.check_main_inequality(cap, QUAD, 1,
                                             weight=axis_potential(cap))
            ok = ok and check.status == "pass"
            ok = ok and check.hypotheses["half_ball"] is True
            ok = ok and check.hypotheses["substatic_min"] >= -fn.GATE_TOL
            lhs, rhs = normalized_sides(cap, 1, weight=axis_potential(cap))
            worst_eq = max(worst_eq, abs(lhs), abs(rhs))
    ok = ok and worst_eq <= 1e-10
    checked = 0
    for shapes, k in ((perturbed_n2[:15], 1), (perturbed_n3[:10], 1),
                      (perturbed_n3[:10], 2)):
        for shape in shapes:
            check = fn.check_main_inequality(shape, QUAD, k,
                                             weight=axis_potential(shape))
            if check.status == "inapplicable":
                continue
            checked += 1
            ok = ok and check.status == "pass"
            ok = ok and check.lhs <= check.rhs * (1 + 1e-8)
    ok = ok and checked >= 20
    report(12, "weighted theorem", ok,
           f"cap eq={worst_eq:.3e}, perturbed checked={checked}")
