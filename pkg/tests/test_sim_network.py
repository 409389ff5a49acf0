import pytest

from dglight.sim import (
    CONTROLLED_LANE_ORDER,
    PHASE_MOVEMENTS,
    NetworkError,
    SignalPhase,
    build_grid_network,
    exit_heading,
    lane_id,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
)
from dglight.sim.network import Intersection, Lane, RoadNetwork


def test_phase_values_are_canonical():
    assert [p.name for p in SignalPhase] == ["ETWT", "NTST", "ELWL", "NLSL"]
    assert [int(p) for p in SignalPhase] == [0, 1, 2, 3]


def test_controlled_lane_order():
    assert CONTROLLED_LANE_ORDER == (
        ("E", "through"), ("W", "through"), ("N", "through"), ("S", "through"),
        ("E", "left"), ("W", "left"), ("N", "left"), ("S", "left"),
    )


def test_phase_movements_pairings():
    assert PHASE_MOVEMENTS[SignalPhase.ETWT] == (("E", "through"), ("W", "through"))
    assert PHASE_MOVEMENTS[SignalPhase.NTST] == (("N", "through"), ("S", "through"))
    assert PHASE_MOVEMENTS[SignalPhase.ELWL] == (("E", "left"), ("W", "left"))
    assert PHASE_MOVEMENTS[SignalPhase.NLSL] == (("N", "left"), ("S", "left"))


def test_grid_1x1_shape():
    net = build_grid_network(1, 1)
    real = [i for i in net.intersections if not i.virtual]
    virtual = [i for i in net.intersections if i.virtual]
    assert len(real) == 1 and len(virtual) == 4
    assert len(net.incoming[real[0].id]) == 12
    # 4 roads in + 4 roads out, 3 movement lanes each
    assert len(net.lanes) == 24


@pytest.mark.parametrize("rows,cols,n_real", [(3, 4, 12), (4, 4, 16)])
def test_grid_real_counts(rows, cols, n_real):
    net = build_grid_network(rows, cols)
    assert len(net.real_ids) == n_real


def test_real_ids_row_major_order():
    net = build_grid_network(2, 3)
    assert net.real_ids == [
        "i_0_0", "i_0_1", "i_0_2", "i_1_0", "i_1_1", "i_1_2",
    ]


def test_interior_adjacency_links_both_ways():
    net = build_grid_network(2, 2)
    assert net.adjacency["i_0_0"]["E"] == "i_0_1"
    assert net.adjacency["i_0_1"]["W"] == "i_0_0"
    assert net.adjacency["i_0_0"]["S"] == "i_1_0"
    assert net.adjacency["i_1_0"]["N"] == "i_0_0"


def test_boundary_neighbors_are_virtual():
    net = build_grid_network(2, 2)
    north = net.adjacency["i_0_0"]["N"]
    assert net.by_id[north].virtual


def test_exit_heading_table():
    # approach is the side the vehicle arrives from; exiting through keeps going
    assert exit_heading("E", "through") == "W"
    assert exit_heading("W", "through") == "E"
    assert exit_heading("E", "left") == "S"
    assert exit_heading("N", "left") == "E"
    assert exit_heading("N", "right") == "W"
    with pytest.raises(NetworkError):
        exit_heading("E", "uturn")


def test_lane_id_is_stable_format():
    assert lane_id("a", "b", "through") == "a->b:through"


def test_network_roundtrip(tmp_path):
    net = build_grid_network(2, 3, lane_length_m=250.0)
    path = tmp_path / "net.json"
    save_network(net, path)
    back = load_network(path)
    assert network_to_dict(back) == network_to_dict(net)
    assert back.real_ids == net.real_ids
    assert [l.id for l in back.lanes] == [l.id for l in net.lanes]


def test_network_from_dict_rejects_bad_version():
    doc = network_to_dict(build_grid_network(1, 1))
    doc["schema_version"] = 99
    with pytest.raises(NetworkError):
        network_from_dict(doc)


def test_duplicate_intersection_ids_rejected():
    dup = [Intersection("x", 0, 0, False), Intersection("x", 0, 1, True)]
    with pytest.raises(NetworkError):
        RoadNetwork(dup, [], {"x": {}})


def test_lane_with_unknown_endpoint_rejected():
    inters = [Intersection("a", 0, 0, False)]
    lanes = [Lane("a->ghost:through", "a", "ghost", "W", "through", 300.0)]
    with pytest.raises(NetworkError):
        RoadNetwork(inters, lanes, {"a": {}})


def test_nonpositive_lane_length_rejected():
    with pytest.raises(NetworkError):
        build_grid_network(1, 1, lane_length_m=0.0)
