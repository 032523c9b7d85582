import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_scale.errors import InfeasibleSpecError, RetryExhaustedError
from consensus_scale.generators import (
    KINDS,
    FamilySpec,
    generate,
    generate_barbell,
    generate_random_regular,
)
from consensus_scale.graph_core import DegreeBounds, find_partition_boundary, bottleneck_bound
from consensus_scale.spectral import algebraic_connectivity, grounded_eigenvalue


def test_ring():
    g = generate(FamilySpec("ring"), 4)
    assert g.edge_count == 4
    assert list(g.neighbor_counts) == [2, 2, 2, 2]


def test_torus_5x5():
    g = generate(FamilySpec("lattice2d_torus", {"rows": 5, "cols": 5}), 25)
    assert g.node_count == 25 and g.edge_count == 50
    assert np.all(g.neighbor_counts == 4)


def test_torus_default_shape_and_errors():
    assert generate(FamilySpec("lattice2d_torus"), 36).edge_count == 72
    with pytest.raises(InfeasibleSpecError):
        generate(FamilySpec("lattice2d_torus"), 30)
    with pytest.raises(InfeasibleSpecError):
        generate(FamilySpec("lattice2d_torus", {"rows": 2}), 8)


@pytest.mark.parametrize("seed", [0, 1, 2, 99])
def test_random_regular_k3_n4_is_k4(seed):
    g = generate(FamilySpec("random_regular", {"k": 3}, seed), 4)
    assert g.edges == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def test_random_regular_n60():
    g = generate_random_regular(60, 4, seed=3)
    assert g.is_connected()
    assert np.all(g.neighbor_counts == 4)
    assert g.edge_count == 120
    assert grounded_eigenvalue(g, 17) <= 4 / 59


def test_random_regular_parity():
    with pytest.raises(InfeasibleSpecError):
        generate_random_regular(5, 3)
    with pytest.raises(InfeasibleSpecError):
        generate_random_regular(4, 4)


def test_random_regular_retry_exhausted():
    with pytest.raises(RetryExhaustedError):
        generate_random_regular(40, 6, seed=0, max_tries=1)


def test_determinism():
    a = generate(FamilySpec("random_regular", {"k": 4}, 2**63 + 11), 50)
    b = generate(FamilySpec("random_regular", {"k": 4}, 2**63 + 11), 50)
    c = generate(FamilySpec("random_regular", {"k": 4}, 12), 50)
    assert a == b
    assert a != c


def test_family_spec_validation():
    with pytest.raises(Exception):
        FamilySpec("hypercube")
    with pytest.raises(Exception):
        FamilySpec("random_regular", {"k": 4}, -1)
    with pytest.raises(Exception):
        FamilySpec("ring", weight=0.0)
    spec = FamilySpec("random_regular", {"k": 4}, 5, 2.0)
    assert FamilySpec.from_dict(spec.to_dict()) == spec


def test_barbell_structure():
    g = generate_barbell(5, 1)
    assert g.node_count == 11
    p = find_partition_boundary(g, range(5))
    assert (p.N1, p.N2, p.N3) == (5, 1, 5)
    # no direct clique-clique edges
    assert not any(i < 5 and j > 5 for i, j in g.edges)


def test_barbell_multiple_bridges():
    g = generate_barbell(4, 3)
    assert g.node_count == 11
    for bridge in (4, 5, 6):
        nb = g.neighbors(bridge)
        assert len(nb) == 2 and min(nb) < 4 and max(nb) >= 7


def test_barbell_bound_and_decay():
    g = generate_barbell(10, 1)
    p = find_partition_boundary(g, range(10))
    assert algebraic_connectivity(g) <= bottleneck_bound(g, p, DegreeBounds.tight(g)).loose
    lams = [algebraic_connectivity(generate_barbell(m, 1)) for m in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(lams, lams[1:]))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2**64 - 1), st.sampled_from([9, 16, 25, 36]))
def test_generated_graphs_are_connected(kind, seed, n):
    params = {"k": 4} if kind == "random_regular" else {}
    if kind == "barbell":
        n += 1 - (n % 2)  # odd N with one bridge
    g = generate(FamilySpec(kind, params, seed), n)
    assert g.node_count == n and g.is_connected()
    if kind == "random_regular":
        assert np.all(g.neighbor_counts == 4)


def test_random_regular_expander_mean():
    lams = [algebraic_connectivity(generate_random_regular(200, 4, seed=s)) for s in range(100)]
    assert np.mean(lams) > 0.2
