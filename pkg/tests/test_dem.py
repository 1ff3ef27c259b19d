import numpy as np
import pytest

from atomloss.circuit import HeraldKey, build_memory_circuit
from atomloss.dem import (
    DetectorErrorModel,
    ErrorMechanism,
    UndecomposableMechanismError,
    build_loss_dem,
    build_pauli_dem,
    decompose_to_graph,
    fault_basis,
    graph_to_text,
    merge,
    mix_loss_dems,
    node_window,
    xor_probability,
)
from atomloss.noise import (
    FaultAssignment,
    LossConfig,
    LossEvent,
    NoiseParams,
    shot_rng,
)
from atomloss.sim import compiled, detector_bits, execute


def _fp(c):
    return (c.distance, c.rounds, c.n_sites, c.n_measurements)


def _predicted_marginals(c, mechanisms):
    prod = np.ones(c.n_detectors)
    for m in mechanisms:
        for d in m.detectors:
            prod[d] *= 1 - 2 * m.probability
    return (1 - prod) / 2


def _empirical_marginals(c, site_index, wires, n_shots, survivors=()):
    cc = compiled(c)
    op = c.site_ops[site_index]
    ev_op = np.asarray([op] * len(wires), np.int32)
    ev_wire = np.asarray(list(wires), np.int32)
    counts = np.zeros(c.n_detectors)
    surv_probs = np.cumsum((3 / 8, 1 / 8, 1 / 8, 3 / 8))
    for shot in range(n_shots):
        rng = shot_rng(97, shot)
        if survivors:
            pauli = int(np.searchsorted(surv_probs, rng.random(), side="right"))
            if pauli:
                faults = FaultAssignment(
                    np.asarray([op], np.int32),
                    np.asarray(survivors, np.int32),
                    np.asarray([pauli], np.int32),
                    _fp(c),
                )
            else:
                faults = FaultAssignment(
                    np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0, np.int32), _fp(c)
                )
        else:
            faults = FaultAssignment(
                np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0, np.int32), _fp(c)
            )
        coins = rng.integers(0, 2, size=cc.n_coins, dtype=np.uint8)
        bits, _ = execute(cc, ev_op, ev_wire, faults, coins)
        counts += detector_bits(cc, bits)
    return counts / n_shots


def test_empty_pauli_dem_at_zero_depolarizing():
    c = build_memory_circuit(3, 1)
    assert build_pauli_dem(c, NoiseParams(0, 0, 0)).mechanisms == []


def test_pauli_dem_prior_is_pd_over_15_before_merging():
    c = build_memory_circuit(3, 1)
    dem = build_pauli_dem(c, NoiseParams(0, 0, 0.0015))
    p0 = 0.0015 / 15
    for m in dem.mechanisms:
        # merged probabilities are XOR-combinations of multiples of p0
        k = m.probability / p0
        assert abs(k - round(k)) < 1e-6 or m.probability < 1.0


def test_mechanism_merge_rule():
    m = ErrorMechanism(0.2, (1, 2), False)
    dem = merge(
        [
            DetectorErrorModel([m], 5),
            DetectorErrorModel([ErrorMechanism(0.2, (1, 2), False)], 5),
        ]
    )
    assert len(dem.mechanisms) == 1
    assert dem.mechanisms[0].probability == pytest.approx(xor_probability(0.2, 0.2))


def test_merge_identity_and_empty():
    c = build_memory_circuit(3, 1)
    dem = build_pauli_dem(c, NoiseParams(0, 0, 0.001))
    out = merge([dem])
    assert out.to_text() == dem.to_text()
    out2 = merge([DetectorErrorModel([], dem.detector_count), dem])
    assert out2.to_text() == dem.to_text()


def test_merge_is_order_independent():
    a = DetectorErrorModel([ErrorMechanism(0.1, (0,), False)], 3)
    b = DetectorErrorModel([ErrorMechanism(0.2, (1, 2), True)], 3)
    c_ = DetectorErrorModel([ErrorMechanism(0.05, (0,), False)], 3)
    t1 = merge([a, merge([b, c_])]).to_text()
    t2 = merge([merge([a, b]), c_]).to_text()
    t3 = merge([c_, b, a]).to_text()
    assert t1 == t2 == t3


def test_merge_rejects_detector_count_mismatch():
    a = DetectorErrorModel([ErrorMechanism(0.1, (0,), False)], 3)
    b = DetectorErrorModel([ErrorMechanism(0.1, (0,), False)], 7)
    with pytest.raises(ValueError):
        merge([a, b])


def test_mix_single_part_weight_one_is_identity():
    c = build_memory_circuit(3, 1)
    node = HeraldKey("data", 0, 0)
    site = node_window(c, node)[0]
    part = build_loss_dem(c, node, c.site_ids[site])
    assert mix_loss_dems([(part, 1.0)]).to_text() == part.dem.to_text()


def test_mix_of_identical_parts_is_unchanged():
    c = build_memory_circuit(3, 1)
    node = HeraldKey("data", 0, 0)
    site = node_window(c, node)[0]
    part = build_loss_dem(c, node, c.site_ids[site])
    mixed = mix_loss_dems([(part, 0.5), (part, 0.5)])
    # identical mechanisms: p = xor(p/2, p/2) applied per mechanism
    for m_mixed, m_orig in zip(mixed.mechanisms, part.dem.mechanisms):
        expected = xor_probability(m_orig.probability * 0.5, m_orig.probability * 0.5)
        assert m_mixed.probability == pytest.approx(expected)
        assert m_mixed.detectors == m_orig.detectors


def test_mix_scales_disjoint_parts():
    from atomloss.dem import LossLocationDem

    node = HeraldKey("data", 0, 0)
    p1 = LossLocationDem(
        node, None, DetectorErrorModel([ErrorMechanism(0.5, (0, 1), False)], 4)
    )
    p2 = LossLocationDem(
        node, None, DetectorErrorModel([ErrorMechanism(0.5, (2, 3), True)], 4)
    )
    mixed = mix_loss_dems([(p1, 0.9), (p2, 0.1)])
    table = {m.detectors: m.probability for m in mixed.mechanisms}
    assert table[(0, 1)] == pytest.approx(0.45)
    assert table[(2, 3)] == pytest.approx(0.05)


def test_mix_drops_zero_weight_parts():
    from atomloss.dem import LossLocationDem

    node = HeraldKey("data", 0, 0)
    p1 = LossLocationDem(
        node, None, DetectorErrorModel([ErrorMechanism(0.5, (0,), False)], 2)
    )
    p2 = LossLocationDem(
        node, None, DetectorErrorModel([ErrorMechanism(0.5, (1,), False)], 2)
    )
    mixed = mix_loss_dems([(p1, 1.0), (p2, 0.0)])
    assert mixed.to_text() == p1.dem.to_text()


def test_mix_rejects_negative_weight():
    c = build_memory_circuit(3, 1)
    node = HeraldKey("data", 0, 0)
    part = build_loss_dem(c, node, c.site_ids[node_window(c, node)[0]])
    with pytest.raises(ValueError):
        mix_loss_dems([(part, -0.1)])


def test_loss_dem_rejects_site_outside_window():
    c = build_memory_circuit(3, 2)
    node = HeraldKey("data", 0, 0)
    outside = next(
        k
        for k in range(c.n_sites)
        if 0 not in c.site_operands(k) and k not in node_window(c, node)
    )
    with pytest.raises(ValueError):
        build_loss_dem(c, node, c.site_ids[outside])


def test_final_herald_window_is_last_ldu():
    c = build_memory_circuit(3, 2)
    node = HeraldKey("data", 5, 2)
    win = node_window(c, node)
    assert len(win) == 1
    assert c.site_ids[win[0]].context.value == "ldu_teleport"
    assert c.site_ids[win[0]].round == 1


def test_four_detector_hyperedge_decomposes_into_existing_edges():
    # A Y x Y depolarizing outcome on a bulk CZ touches 4 detectors and must
    # split into two 2-detector edges whose XOR reproduces it.
    c = build_memory_circuit(3, 3)
    fb = fault_basis(c)
    dem = build_pauli_dem(c, NoiseParams(0, 0, 0.001))
    wide = [m for m in dem.mechanisms if len(m.detectors) == 4]
    assert wide, "expected some 4-detector hyperedges"
    graph = decompose_to_graph(dem, fb.edge_library())
    edge_sets = {frozenset((u, v)) for u, v, _, _ in graph.edges}
    lib = fb.edge_library()
    for m in wide[:10]:
        parts = []
        rest = set(m.detectors)
        # verify a partition into graph edges exists by checking the DP result
        from atomloss.dem import _decompose_dets

        got = _decompose_dets(
            m.detectors,
            m.flips_observable,
            {**{k: set(v) for k, v in lib.items()}},
        )
        xor = set()
        obs = False
        for dets, ob in got:
            xor.symmetric_difference_update(dets)
            obs ^= ob
            assert len(dets) <= 2
        assert xor == set(m.detectors)
        assert obs == m.flips_observable


def test_decompose_preserves_parity_and_errors_on_impossible():
    dem = DetectorErrorModel(
        [ErrorMechanism(0.01, (0, 1, 2), False)], detector_count=4
    )
    with pytest.raises(UndecomposableMechanismError):
        decompose_to_graph(dem, {})
    # a chain must also reproduce the observable parity
    with pytest.raises(UndecomposableMechanismError):
        decompose_to_graph(dem, {(0,): {True}, (1, 2): {False}})
    graph = decompose_to_graph(dem, {(0,): {True}, (1, 2): {True}})
    # folded into both chain edges
    assert len(graph.edges) == 2


def test_empty_dem_gives_boundary_only_graph():
    graph = decompose_to_graph(DetectorErrorModel([], 6), {})
    assert graph.edges == [] and graph.n_detectors == 6


def test_graph_text_format():
    dem = DetectorErrorModel(
        [
            ErrorMechanism(0.01, (0, 1), True),
            ErrorMechanism(0.02, (2,), False),
        ],
        detector_count=3,
    )
    text = graph_to_text(decompose_to_graph(dem, {}))
    lines = text.splitlines()
    assert lines[0].startswith("0 1 ") and lines[0].endswith(" 1")
    assert lines[1].startswith("2 boundary ")


def test_dem_text_round_trip():
    dem = DetectorErrorModel(
        [
            ErrorMechanism(0.015, (0, 4), True),
            ErrorMechanism(0.25, (2,), False),
        ],
        detector_count=5,
    )
    text = dem.to_text()
    back = DetectorErrorModel.from_text(text, 5)
    assert back.to_text() == text


@pytest.mark.slow
def test_loss_dem_matches_conditional_simulation_marginals():
    # Inject a pure erasure at several locations and compare detector-flip
    # marginals against the per-location DEM.
    c = build_memory_circuit(3, 2)
    rng = np.random.Generator(np.random.Philox(key=5))
    checked = 0
    for k in rng.choice(c.n_sites, size=8, replace=False):
        k = int(k)
        for w in c.site_operands(k):
            m_idx = next(
                (
                    m
                    for m, op_idx in enumerate(c.measure_ops)
                    if c.operations[op_idx].operands[0] == w
                ),
                None,
            )
            if m_idx is None:
                continue
            node = c.herald_keys[m_idx]
            if k not in node_window(c, node):
                continue
            part = build_loss_dem(c, node, c.site_ids[k])
            pred = _predicted_marginals(c, part.dem.mechanisms)
            n = 12000
            emp = _empirical_marginals(c, k, [w], n)
            sig = np.maximum(np.sqrt(pred * (1 - pred) / n), np.sqrt(0.25 / n) * 0.1)
            assert (np.abs(emp - pred) < 5 * sig).all(), (k, w, node)
            checked += 1
    assert checked >= 8


@pytest.mark.slow
def test_loss_dem_with_survivor_channel_matches_simulation():
    # Single (uncorrelated) loss: the survivor picks up the twirled channel;
    # the DEM with params covers both erasure and survivor marginals.
    c = build_memory_circuit(3, 2)
    params = NoiseParams(0.05, 0.0, 0.0)
    k = next(
        k
        for k in range(c.n_sites)
        if c.site_ids[k].round == 0
        and c.site_ids[k].context.value == "syndrome_extraction"
    )
    anc, data = c.site_operands(k)
    m_idx = next(
        m
        for m, op_idx in enumerate(c.measure_ops)
        if c.operations[op_idx].operands[0] == data
    )
    node = c.herald_keys[m_idx]
    part = build_loss_dem(c, node, c.site_ids[k], params)
    pred = _predicted_marginals(c, part.dem.mechanisms)
    n = 20000
    emp = _empirical_marginals(c, k, [data], n, survivors=[anc])
    sig = np.maximum(np.sqrt(pred * (1 - pred) / n), np.sqrt(0.25 / n) * 0.1)
    assert (np.abs(emp - pred) < 5 * sig).all()
