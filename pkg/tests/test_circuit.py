import pytest

from atomloss.circuit import (
    OpKind,
    SiteContext,
    build_memory_circuit,
    enumerate_cz_sites,
    serialize,
    validate,
)


def test_data_qubit_count():
    c = build_memory_circuit(3, 1)
    assert c.n_data == 9


@pytest.mark.parametrize("d,rounds", [(3, 1), (3, 3), (5, 2)])
def test_detector_count_is_pure_function(d, rounds):
    c = build_memory_circuit(d, rounds)
    assert c.n_detectors == (d * d - 1) * rounds


def test_rejects_bad_distance_and_rounds():
    with pytest.raises(ValueError):
        build_memory_circuit(4, 2)
    with pytest.raises(ValueError):
        build_memory_circuit(1, 2)
    with pytest.raises(ValueError):
        build_memory_circuit(3, 0)


def test_syndrome_site_count_per_round():
    # d=3 layout: four weight-4 and four weight-2 stabilizers.
    c = build_memory_circuit(3, 2)
    for r in range(2):
        n = sum(
            1
            for s, _ in enumerate_cz_sites(c)
            if s.round == r and s.context is SiteContext.SYNDROME
        )
        assert n == 24


def test_ldu_site_count():
    c = build_memory_circuit(3, 1)
    ldu = [s for s, _ in enumerate_cz_sites(c) if s.context is SiteContext.LDU]
    assert len(ldu) == 9


def test_sites_are_unique_and_complete():
    c = build_memory_circuit(3, 2)
    sites = enumerate_cz_sites(c)
    ids = [s for s, _ in sites]
    assert len(set(ids)) == len(ids)
    n_cz = sum(1 for op in c.operations if op.kind is OpKind.CZ)
    assert len(sites) == n_cz
    assert all(s.round in (0, 1) for s in ids)


def test_validate_clean_circuit():
    assert validate(build_memory_circuit(3, 3)) == []


def test_validate_reports_dangling_ref():
    from atomloss.circuit import DetectorDef

    c = build_memory_circuit(3, 1)
    c.detectors.append(DetectorDef((10_000,)))
    assert any("dangling" in p for p in validate(c))


def test_validate_reports_duplicate_site():
    c = build_memory_circuit(3, 1)
    first_cz = next(i for i, op in enumerate(c.operations) if op.kind is OpKind.CZ)
    second_cz = next(
        i for i, op in enumerate(c.operations) if op.kind is OpKind.CZ and i > first_cz
    )
    import dataclasses

    dup = dataclasses.replace(
        c.operations[second_cz], cz_site=c.operations[first_cz].cz_site
    )
    c.operations[second_cz] = dup
    assert any("duplicate" in p for p in validate(c))


def test_serialization_round_trip_stability(tmp_path):
    text = serialize(build_memory_circuit(3, 1))
    assert text == serialize(build_memory_circuit(3, 1))
    assert text.splitlines()[0].startswith("# atomloss circuit d=3")
    kinds = {line.split()[0] for line in text.splitlines()[1:]}
    assert "cz" in kinds and "ldu_measure" in kinds and "observable" in kinds


def test_serialization_golden(request):
    golden = request.path.parent / "data" / "circuit_d3_r1.txt"
    text = serialize(build_memory_circuit(3, 1))
    assert text == golden.read_text()
