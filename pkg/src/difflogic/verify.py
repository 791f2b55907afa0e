"""Invariant suites behind `difflogic verify` (and reused by the tests):
finite-difference gradient checks, oracle equivalences, structural shape
laws, and object-relabeling equivariance."""

import numpy as np

from . import autodiff as ad
from . import logic
from . import predtensor as pt
from .blocks_rules import shouldmove_fixture
from .machine import MachineConfig, as_nodes, estimate_cost, forward, init_params, named_arrays, width_plan
from .machine import Model
from .tasks import blocks, family, graphs


def rel_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def finite_difference(f, params: dict, h: float = 1e-5) -> dict:
    """Central differences of a scalar function of named arrays."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = f(params)
            flat[i] = keep - h
            down = f(params)
            flat[i] = keep
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def gradcheck(build_loss, params: dict, h: float = 1e-5) -> float:
    """Max relative error between recorded and finite-difference gradients.

    `build_loss(tree)` must evaluate with either raw arrays or Node leaves.
    """
    leaves = {k: ad.leaf(v) for k, v in params.items()}
    loss = build_loss(leaves)
    analytic = ad.grads_of(loss, leaves)
    numeric = finite_difference(lambda p: float(np.asarray(build_loss(p))), params, h)
    return max(rel_error(analytic[k], numeric[k]) for k in params)


def _primitive_cases(rng):
    """(name, params, build_loss) triples covering every differentiable op."""
    a = rng.uniform(0.2, 0.8, (3, 4))
    b = rng.uniform(0.2, 0.8, (3, 4))
    w = rng.uniform(-0.5, 0.5, (4, 3))
    bias = rng.uniform(-0.2, 0.2, 3)
    vec = rng.uniform(-1.0, 1.0, 5)
    batch = rng.uniform(-1.0, 1.0, (4, 3))
    mask2 = pt.valid_mask(3, 2)
    cube = rng.uniform(0.1, 0.9, (3, 3, 2)) * mask2[..., None]
    weights = rng.uniform(0.5, 1.5, (3, 3, 2))
    w_red = rng.uniform(0.5, 1.5, (3, 2))
    probe_aff = rng.uniform(0.5, 1.5, (3, 3))
    probe_resh = rng.uniform(0.5, 1.5, (4, 3))
    idx = np.asarray([0, 2, 2, 1])

    cases = [
        ("add", {"x": a.copy(), "y": b.copy()},
         lambda p: ad.sum_all(ad.mul(ad.add(p["x"], p["y"]), b))),
        ("mul", {"x": a.copy(), "y": b.copy()},
         lambda p: ad.sum_all(ad.mul(p["x"], p["y"]))),
        ("scale", {"x": a.copy()}, lambda p: ad.sum_all(ad.scale(p["x"], 2.5))),
        ("sigmoid", {"x": (a - 0.5).copy()},
         lambda p: ad.sum_all(ad.mul(ad.sigmoid(p["x"]), b))),
        ("exp", {"x": (a - 0.5).copy()}, lambda p: ad.sum_all(ad.exp(p["x"]))),
        ("log", {"x": (a + 0.5).copy()}, lambda p: ad.sum_all(ad.log(p["x"]))),
        ("reshape", {"x": a.copy()},
         lambda p: ad.sum_all(ad.mul(ad.reshape(p["x"], (4, 3)), probe_resh))),
        ("transpose", {"x": cube.copy()},
         lambda p: ad.sum_all(ad.mul(ad.transpose(p["x"], (1, 0, 2)), weights))),
        ("concat_last", {"x": a.copy(), "y": b.copy()},
         lambda p: ad.sum_all(ad.mul(ad.concat_last([p["x"], p["y"]]),
                                     np.concatenate([b, a], axis=-1)))),
        ("take", {"x": a.copy()},
         lambda p: ad.sum_all(ad.mul(ad.take(p["x"], idx), b[idx]))),
        ("mul_mask", {"x": cube.copy()},
         lambda p: ad.sum_all(ad.mul(ad.mul_mask(p["x"], mask2), weights))),
        ("broadcast_newaxis", {"x": rng.uniform(0.1, 0.9, (3, 2))},
         lambda p: ad.sum_all(ad.mul(ad.broadcast_newaxis(p["x"], 3, mask2), weights))),
        ("masked_extremum_max", {"x": cube.copy()},
         lambda p: ad.sum_all(ad.mul(
             ad.masked_extremum(p["x"], "max", mask2, pt.valid_mask(3, 1)), w_red))),
        ("masked_extremum_min", {"x": cube.copy()},
         lambda p: ad.sum_all(ad.mul(
             ad.masked_extremum(p["x"], "min", mask2, pt.valid_mask(3, 1)), w_red))),
        ("affine", {"x": a.copy(), "w": w.copy(), "b": bias.copy()},
         lambda p: ad.sum_all(ad.mul(ad.affine(p["x"], p["w"], p["b"]), probe_aff))),
        ("log_softmax", {"x": vec.copy()},
         lambda p: ad.sum_all(ad.mul(ad.log_softmax(p["x"]), np.arange(5.0)))),
        ("softmax_cross_entropy", {"x": vec.copy()},
         lambda p: ad.softmax_cross_entropy(p["x"], 2)),
        ("softmax_cross_entropy_batch", {"x": batch.copy()},
         lambda p: ad.softmax_cross_entropy_batch(p["x"], np.asarray([0, 2, 1, 2]))),
    ]
    return cases


def gradcheck_machine_setup(seed: int = 5):
    """The full-network gradient check fixture: m=4, B=3, D=3, C=4, residual."""
    rng = np.random.default_rng(seed)
    config = MachineConfig(depth=3, breadth=3, input_channels=(2, 2, 2, 2),
                           channels=4, residual=True)
    params = init_params(config, rng)
    model = Model(config, params, {})
    m = 4
    premises = [pt.from_values(m, r, rng.uniform(0.05, 0.95, (m,) * r + (2,)))
                for r in range(4)]
    probes = [rng.uniform(0.5, 1.5, (m,) * r + (c,))
              for r, c in enumerate([2 + 4 * 3] * 4)]

    def build_loss(tree_model):
        out = forward(config, tree_model.machine, premises)
        total = None
        for r, t in enumerate(out.outputs):
            term = ad.sum_all(ad.mul(t.values, probes[r]))
            total = term if total is None else total + term
        return total

    return model, build_loss


def machine_gradcheck(seed: int = 5, h: float = 1e-5) -> float:
    model, build_loss = gradcheck_machine_setup(seed)
    arrays = named_arrays(model)

    node_model, leaves = as_nodes(model)
    analytic = ad.grads_of(build_loss(node_model), leaves)

    from .machine import load_arrays

    def scalar(params):
        return float(np.asarray(build_loss(load_arrays(model, params))))

    numeric = finite_difference(scalar, arrays, h)
    return max(rel_error(analytic[k], numeric[k]) for k in arrays)


def gradcheck_suite(seed: int = 0, tol: float = 1e-4) -> list:
    rng = np.random.default_rng(seed)
    results = []
    for name, params, build in _primitive_cases(rng):
        err = gradcheck(build, params)
        results.append((f"gradcheck/{name}", err <= tol, f"max rel err {err:.3g}"))
    err = machine_gradcheck()
    results.append(("gradcheck/full_machine", err <= tol, f"max rel err {err:.3g}"))
    return results


# ---------------------------------------------------------------------------


def oracle_suite(seed: int = 0, n_programs: int = 200, n_clause_checks: int = 100) -> list:
    rng = np.random.default_rng(seed)
    results = []

    mismatches = 0
    for _ in range(n_programs):
        m = int(rng.integers(2, 6))
        program = logic.random_program(rng, m)
        base = logic.random_facts(rng, program, m)
        chained = logic.forward_chain(program, base)
        brute = logic.brute_force_chain(program, base)
        for schema in program.derived:
            if not np.array_equal(chained.facts[schema.name], brute.facts[schema.name]):
                mismatches += 1
                break
    results.append(("oracle/forward_chain_vs_brute_force",
                    mismatches == 0, f"{mismatches}/{n_programs} programs disagree"))

    clause_mismatches = 0
    checked = 0
    while checked < n_clause_checks:
        m = int(rng.integers(2, 6))
        program = logic.random_program(rng, m, n_derived=1)
        base = logic.random_facts(rng, program, m)
        for cl in program.clauses:
            plan = logic.compile_clause_plan(cl)
            got = logic.execute_plan(plan, base)
            want = logic.brute_force_ground(cl, base)
            if not np.array_equal(got, want):
                clause_mismatches += 1
            checked += 1
    results.append(("oracle/plan_execution_vs_brute_force",
                    clause_mismatches == 0,
                    f"{clause_mismatches}/{checked} clauses disagree"))

    fixture_bad = 0
    for i in range(25):
        env = blocks.BlocksEnv.generate(int(rng.integers(1, 5)), rng.integers(2 ** 63))
        facts = env.factset()
        program = shouldmove_fixture()
        a = logic.forward_chain(program, facts)
        b = logic.brute_force_chain(program, facts)
        for schema in program.derived:
            if not np.array_equal(a.facts[schema.name], b.facts[schema.name]):
                fixture_bad += 1
                break
    results.append(("oracle/shouldmove_fixture_cross_check",
                    fixture_bad == 0, f"{fixture_bad}/25 instances disagree"))

    # forall over a masked axis: wrong neutral elements break this immediately
    program = logic.parse_program("Clear(x) <- forall y !On(y, x)\n")
    facts = logic.FactSet(2)
    on = np.zeros((2, 2), dtype=bool)
    on[0, 1] = True  # block 0 sits on block 1
    facts.add("On", 2, on)
    derived = logic.forward_chain(program, facts)
    ok = bool(derived.facts["Clear"][0]) and not bool(derived.facts["Clear"][1])
    results.append(("oracle/forall_negation_masked_diagonal", ok,
                    f"Clear grounding {derived.facts['Clear'].tolist()}"))
    return results


# ---------------------------------------------------------------------------


def shapes_suite(seed: int = 0) -> list:
    from .presets import PRESETS, build_model, machine_config

    rng = np.random.default_rng(seed)
    results = []

    # operator channel laws over the structural grid
    law_ok = True
    detail = ""
    for r in range(0, 4):
        for m in range(1, 7):
            for c in range(0, 5):
                t = pt.from_values(m, r, rng.random((m,) * r + (c,)))
                if pt.permute_all(t).channels != pt.factorial(r) * c:
                    law_ok, detail = False, f"permute_all at r={r}, m={m}, c={c}"
                if r >= 1 and pt.reduce(t).channels != 2 * c:
                    law_ok, detail = False, f"reduce at r={r}, m={m}, c={c}"
                if m - r >= 1 and pt.expand(t).channels != c:
                    law_ok, detail = False, f"expand at r={r}, m={m}, c={c}"
    results.append(("shapes/operator_channel_laws", law_ok, detail or "all hold"))

    # reduce(expand(p)) returns p on both quantifier blocks
    round_ok = True
    for r in range(0, 3):
        for m in range(r + 1, 7):
            c = 3
            t = pt.from_values(m, r, rng.random((m,) * r + (c,)))
            back = pt.reduce(pt.expand(t))
            both = np.asarray(back.values)
            if not (np.array_equal(both[..., :c], np.asarray(t.values))
                    and np.array_equal(both[..., c:], np.asarray(t.values))):
                round_ok = False
    results.append(("shapes/reduce_expand_roundtrip", round_ok, "exact equality"))

    # alignment arithmetic and realized parameter shapes for every preset
    for name, preset in PRESETS.items():
        config = machine_config(preset)
        aligned, carried = width_plan(config)
        ok = True
        for i in range(config.depth):
            for r in range(config.breadth + 1):
                want = carried[i][r]
                if r - 1 >= 0:
                    want += carried[i][r - 1]
                if r + 1 <= config.breadth:
                    want += 2 * carried[i][r + 1]
                if aligned[i][r] != want:
                    ok = False
        model = build_model(name, np.random.default_rng(seed))
        for i, row in enumerate(model.machine.mlps):
            for r, mlp in enumerate(row):
                if mlp.in_width != pt.factorial(r) * aligned[i][r]:
                    ok = False
        results.append((f"shapes/channel_arithmetic/{name}", ok,
                        f"depth={config.depth} breadth={config.breadth}"))

    # parameter count is m-independent; MAC estimate tracks the C^2 law
    config = MachineConfig(depth=2, breadth=2, input_channels=(0, 2, 2), channels=8)
    c1 = estimate_cost(config, 5)
    c2 = estimate_cost(config, 50)
    ok = c1.parameters == c2.parameters
    results.append(("shapes/parameters_independent_of_m", ok,
                    f"{c1.parameters} vs {c2.parameters}"))

    doubled = MachineConfig(depth=2, breadth=2, input_channels=(0, 2, 2), channels=16)
    ratio = estimate_cost(doubled, 20).macs / estimate_cost(config, 20).macs
    ok = 2.5 < ratio < 4.5
    results.append(("shapes/mac_quadratic_in_channels", ok, f"ratio {ratio:.2f}"))

    # closed-form MACs vs instrumented forward
    rng2 = np.random.default_rng(seed + 1)
    config = MachineConfig(depth=3, breadth=3, input_channels=(1, 2, 3, 1),
                           channels=6, residual=True)
    params = init_params(config, rng2)
    m = 5
    premises = [pt.from_values(m, r, rng2.random((m,) * r + (c,)))
                for r, c in enumerate(config.input_channels)]
    with ad.count_macs() as counter:
        forward(config, params, premises)
    estimate = estimate_cost(config, m).macs
    err = abs(counter[0] - estimate) / max(counter[0], 1)
    results.append(("shapes/estimate_vs_instrumented_macs", err <= 0.05,
                    f"estimate {estimate}, measured {counter[0]}, err {err:.2%}"))
    return results


# ---------------------------------------------------------------------------


def _relabel_premises(premises, perm):
    return [pt.relabel_objects(t, perm) for t in premises]


def equivariance_suite(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    results = []

    op_ok = True
    for trial in range(10):
        m = int(rng.integers(3, 7))
        r = int(rng.integers(0, 4))
        c = int(rng.integers(1, 4))
        t = pt.from_values(m, r, rng.random((m,) * r + (c,)))
        perm = rng.permutation(m)
        if r >= 1:
            a = pt.relabel_objects(pt.reduce(t), perm)
            b = pt.reduce(pt.relabel_objects(t, perm))
            op_ok &= np.array_equal(np.asarray(a.values), np.asarray(b.values))
        if m - r >= 1:
            a = pt.relabel_objects(pt.expand(t), perm)
            b = pt.expand(pt.relabel_objects(t, perm))
            op_ok &= np.array_equal(np.asarray(a.values), np.asarray(b.values))
        a = pt.relabel_objects(pt.permute_all(t), perm)
        b = pt.permute_all(pt.relabel_objects(t, perm))
        op_ok &= np.array_equal(np.asarray(a.values), np.asarray(b.values))
    results.append(("equivariance/operators", bool(op_ok), "exact over 10 trials"))

    config = MachineConfig(depth=3, breadth=2, input_channels=(1, 2, 2),
                           channels=5, residual=True)
    params = init_params(config, rng)
    m = 6
    premises = [pt.from_values(m, r, rng.random((m,) * r + (c,)))
                for r, c in enumerate(config.input_channels)]
    perm = rng.permutation(m)
    out_a = forward(config, params, _relabel_premises(premises, perm)).outputs
    out_b = forward(config, params, premises).outputs
    fwd_ok = all(
        np.array_equal(np.asarray(a.values),
                       np.asarray(pt.relabel_objects(b, perm).values))
        for a, b in zip(out_a, out_b)
    )
    results.append(("equivariance/forward_pass", fwd_ok, "exact"))

    tree = family.gen_family_tree(8, rng.integers(2 ** 63))
    perm = rng.permutation(8)
    relabeled = family.FamilyTree(
        genders=tree.genders[np.argsort(perm)],
        father=np.asarray([-1 if tree.father[i] < 0 else perm[tree.father[i]]
                           for i in np.argsort(perm)]),
        mother=np.asarray([-1 if tree.mother[i] < 0 else perm[tree.mother[i]]
                           for i in np.argsort(perm)]),
    )
    enc_a = family.encode_premises(relabeled)[2]
    enc_b = pt.relabel_objects(family.encode_premises(tree)[2], perm)
    results.append(("equivariance/family_encoding",
                    np.array_equal(np.asarray(enc_a.values), np.asarray(enc_b.values)),
                    "exact"))

    graph = graphs.gen_graph(7, (1, 3), rng.integers(2 ** 63))
    perm = rng.permutation(7)
    inv = np.argsort(perm)
    relabeled_graph = graphs.Graph(graph.edges[np.ix_(inv, inv)],
                                   graph.colors[inv], graph.coords[inv])
    ok = True
    for r in (1, 2):
        enc_a = graphs.encode_premises(relabeled_graph)[r]
        enc_b = pt.relabel_objects(graphs.encode_premises(graph)[r], perm)
        ok &= np.array_equal(np.asarray(enc_a.values), np.asarray(enc_b.values))
    results.append(("equivariance/graph_encoding", bool(ok), "exact"))
    return results


SUITES = {
    "gradcheck": gradcheck_suite,
    "oracle": oracle_suite,
    "shapes": shapes_suite,
    "equivariance": equivariance_suite,
}


def run_suites(scope: str = "all", seed: int = 0) -> list:
    if scope == "all":
        names = list(SUITES)
    elif scope in SUITES:
        names = [scope]
    else:
        raise KeyError(f"unknown scope {scope!r}; choose from "
                       f"{', '.join(list(SUITES) + ['all'])}")
    results = []
    for name in names:
        results.extend(SUITES[name](seed=seed))
    return results
