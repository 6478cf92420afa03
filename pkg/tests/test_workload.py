"""
Unit tests for workload types, roofline estimates, dataset and ingestion.
"""

import itertools
import json
import random

import pytest
from c3sim.hardware.machine import default_machine, machine_op_to_byte
from c3sim.taxonomy import C3Type
from c3sim.utils.exceptions import (
    ConfigParseError,
    InvariantViolationError,
    NonPositiveTimeError,
    RankLimitError,
    UnknownScenarioError,
)
from c3sim.workload.dataset import (
    default_dataset,
    find_scenarios,
    load_dataset,
    parse_dataset,
    save_dataset,
)
from c3sim.workload.ingest import ModelConfig, ingest_model
from c3sim.workload.kernels import (
    Boundedness,
    C3Scenario,
    CollectiveBoundedness,
    CollectiveKind,
    CollectiveOp,
    EfficiencyParams,
    GemmKernel,
)
from c3sim.workload.roofline import (
    classify_collective_boundedness,
    classify_gemm_boundedness,
    collective_bandwidth_demand,
    estimate_workgroups,
    gemm_bandwidth_demand,
    gemm_flops,
    gemm_min_bytes,
    isolated_collective_time,
    roofline_collective_time,
    roofline_gemm_time,
)

MIB_896 = 939524096


class TestKernels:
    """Test kernel value types."""

    def test_gemm_validation(self):
        """Test GEMM dimensions and datatype are checked."""
        with pytest.raises(InvariantViolationError):
            GemmKernel("g", 0, 8, 8)
        with pytest.raises(InvariantViolationError):
            GemmKernel("g", 8, 8, 8, dtype_bytes=3)
        with pytest.raises(InvariantViolationError):
            GemmKernel("g", 8, 8, 8, measured_time=0.0)

    def test_gemm_override_from_string(self):
        """Test a string override is coerced to Boundedness."""
        g = GemmKernel("g", 8, 8, 8, boundedness_override="memory-bound")
        assert g.boundedness_override == Boundedness.MEMORY_BOUND
        with pytest.raises(InvariantViolationError):
            GemmKernel("g", 8, 8, 8, boundedness_override="io-bound")

    def test_collective_divisibility(self):
        """Test payload must split evenly across ranks."""
        with pytest.raises(InvariantViolationError):
            CollectiveOp(CollectiveKind.ALL_GATHER, 100, 8)
        op = CollectiveOp("all-to-all", 64, 8)
        assert op.kind == CollectiveKind.ALL_TO_ALL
        assert op.per_peer_bytes == 8

    def test_scenario_key_and_round_trip(self):
        """Test scenario identity and dict round-trip."""
        s = C3Scenario(
            "x", GemmKernel("g", 64, 64, 64), CollectiveOp("all-gather", 64, 8),
            expected_taxonomy="C-long",
        )
        assert s.key == ("x", "all-gather")
        assert s.expected_taxonomy == C3Type.C_LONG
        assert C3Scenario.from_dict(s.to_dict()) == s

    def test_efficiency_range(self):
        """Test efficiency must be in (0, 1]."""
        EfficiencyParams(efficiency=1.0)
        with pytest.raises(InvariantViolationError):
            EfficiencyParams(efficiency=0.0)
        with pytest.raises(InvariantViolationError):
            EfficiencyParams(comm_launch_overhead_cu=-1.0)


class TestRoofline:
    """Test isolated roofline estimates on the bundled node."""

    def setup_method(self):
        self.md = default_machine()
        self.p = EfficiencyParams(efficiency=0.7, comm_launch_overhead_cu=50e-6)
        self.cb1 = GemmKernel("cb1", 8192, 8192, 8192)

    def test_gemm_time_compute_bound(self):
        """Test an 8192³ GEMM is compute-limited at 70% of peak."""
        assert gemm_flops(self.cb1) == 2 * 8192 ** 3
        assert roofline_gemm_time(self.cb1, self.md, self.p) == pytest.approx(1.20142e-3, rel=1e-5)

    def test_gemm_work_symmetric_in_dimensions(self):
        """Test FLOPs, bytes and roofline time ignore the order of m, n, k."""
        rng = random.Random(8192)
        for _ in range(100):
            dims = [rng.randint(1, 65536) for _ in range(3)]
            dtype = rng.choice([1, 2, 4])
            kernels = [GemmKernel("g", m, n, k, dtype) for m, n, k in itertools.permutations(dims)]
            assert len({gemm_flops(g) for g in kernels}) == 1
            assert len({gemm_min_bytes(g) for g in kernels}) == 1
            assert len({roofline_gemm_time(g, self.md, self.p) for g in kernels}) == 1

    def test_gemm_times_bundled_shapes(self):
        """Test the other bundled GEMM shapes."""
        shapes = {
            (16384, 8192, 16384): 4.80567e-3,
            (18432, 8192, 16384): 5.40637e-3,
            (106496, 8192, 16384): 3.12369e-2,
            (8192, 57344, 8192): 8.40991e-3,
        }
        for (m, n, k), expected in shapes.items():
            t = roofline_gemm_time(GemmKernel("g", m, n, k), self.md, self.p)
            assert t == pytest.approx(expected, rel=1e-5)

    def test_gemm_memory_limited(self):
        """Test a skinny GEMM is limited by HBM traffic."""
        g = GemmKernel("skinny", 1, 8192, 8192)
        expected = gemm_min_bytes(g) / (0.7 * self.md.hbm_bandwidth)
        assert roofline_gemm_time(g, self.md, self.p) == pytest.approx(expected)

    def test_measured_time_override(self):
        """Test a measured GEMM time wins over the roofline."""
        g = GemmKernel("g", 8192, 8192, 8192, measured_time=5e-3)
        assert roofline_gemm_time(g, self.md, self.p) == 5e-3

    def test_boundedness(self):
        """Test boundedness by intensity, measured ratio and override."""
        ratio = machine_op_to_byte(self.md)
        assert classify_gemm_boundedness(self.cb1, ratio) == Boundedness.COMPUTE_BOUND
        assert classify_gemm_boundedness(GemmKernel("v", 1, 8192, 8192), ratio) == Boundedness.MEMORY_BOUND

        measured = GemmKernel("m", 8192, 8192, 8192, measured_op_to_byte=ratio)
        assert classify_gemm_boundedness(measured, ratio) == Boundedness.MEMORY_BOUND

        pinned = GemmKernel("p", 8192, 8192, 8192, boundedness_override=Boundedness.MEMORY_BOUND)
        assert classify_gemm_boundedness(pinned, ratio) == Boundedness.MEMORY_BOUND

    def test_boundedness_bad_ratio(self):
        """Test a non-positive machine ratio raises error."""
        with pytest.raises(InvariantViolationError):
            classify_gemm_boundedness(self.cb1, 0.0)

    def test_collective_wire_time_binary_units(self):
        """Test 896 MiB over 8 ranks streams for 2.62144 ms."""
        c = CollectiveOp(CollectiveKind.ALL_GATHER, MIB_896, 8)
        wire = roofline_collective_time(c, self.md, self.p, include_overhead=False)
        assert wire == pytest.approx(2.62144e-3, rel=1e-12)
        assert isolated_collective_time(c, self.md, self.p) == pytest.approx(wire + 50e-6, rel=1e-12)

    def test_collective_edge_cases(self):
        """Test single rank, zero payload and oversubscribed ranks."""
        single = CollectiveOp(CollectiveKind.ALL_GATHER, 64, 1)
        assert roofline_collective_time(single, self.md, self.p) == 0.0

        empty = CollectiveOp(CollectiveKind.ALL_TO_ALL, 0, 8)
        assert roofline_collective_time(empty, self.md, self.p) == pytest.approx(50e-6)
        assert classify_collective_boundedness(empty, self.md, self.p) == CollectiveBoundedness.LATENCY_BOUND

        with pytest.raises(RankLimitError):
            roofline_collective_time(CollectiveOp(CollectiveKind.ALL_GATHER, 160, 16), self.md, self.p)

    def test_collective_measured_override(self):
        """Test a measured collective time wins."""
        c = CollectiveOp(CollectiveKind.ALL_GATHER, MIB_896, 8, measured_time=1e-3)
        assert isolated_collective_time(c, self.md, self.p) == 1e-3

    def test_bandwidth_bound_collective(self):
        """Test large collectives are bandwidth-bound."""
        c = CollectiveOp(CollectiveKind.ALL_GATHER, MIB_896, 8)
        assert classify_collective_boundedness(c, self.md, self.p) == CollectiveBoundedness.BANDWIDTH_BOUND

    def test_workgroups(self):
        """Test workgroup estimates for GEMMs and collectives."""
        assert estimate_workgroups(self.cb1) == 4096
        assert estimate_workgroups(GemmKernel("g", 100, 300, 8)) == 1 * 3
        assert estimate_workgroups(CollectiveOp(CollectiveKind.ALL_GATHER, 64, 8)) == 64
        assert estimate_workgroups(CollectiveOp(CollectiveKind.ALL_TO_ALL, 64, 8)) == 56

    def test_bandwidth_demand(self):
        """Test HBM demand of the two collectives and a GEMM."""
        a2a = CollectiveOp(CollectiveKind.ALL_TO_ALL, MIB_896, 8)
        assert collective_bandwidth_demand(a2a, self.md, self.p) == pytest.approx(627.2e9, rel=1e-9)

        ag = CollectiveOp(CollectiveKind.ALL_GATHER, MIB_896, 8)
        assert collective_bandwidth_demand(ag, self.md, self.p) == pytest.approx(627.2e9 * 0.86, rel=1e-9)

        assert gemm_bandwidth_demand(self.cb1, self.md, self.p) == pytest.approx(335e9, rel=0.01)

    def test_demand_of_empty_collective(self):
        """Test demand is undefined without wire time."""
        with pytest.raises(NonPositiveTimeError):
            collective_bandwidth_demand(CollectiveOp(CollectiveKind.ALL_GATHER, 0, 8), self.md, self.p)


class TestDataset:
    """Test the scenario dataset."""

    def setup_method(self):
        self.scenarios = default_dataset()

    def test_bundled_counts(self):
        """Test 15 ids, each under both collectives."""
        assert len(self.scenarios) == 30
        kinds = [s.collective.kind for s in self.scenarios]
        assert kinds.count(CollectiveKind.ALL_GATHER) == 15
        assert kinds.count(CollectiveKind.ALL_TO_ALL) == 15
        assert len({s.id for s in self.scenarios}) == 15

    def test_bundled_payload_units(self):
        """Test size tags are binary units."""
        cb1 = find_scenarios(self.scenarios, "cb1_896M", "all-gather")[0]
        assert cb1.collective.payload_bytes == MIB_896
        assert cb1.collective.n_ranks == 8
        cb5 = find_scenarios(self.scenarios, "cb5_1.63G", "all-gather")[0]
        assert cb5.collective.payload_bytes == 16384 * 53248 * 2

    def test_round_trip(self):
        """Test save then parse gives the same scenarios."""
        assert parse_dataset(save_dataset(self.scenarios)) == self.scenarios

    def test_empty_document(self):
        """Test an empty document is an empty dataset."""
        assert parse_dataset("") == []
        assert parse_dataset("  \n") == []

    def test_not_an_array(self):
        """Test a non-array document raises ConfigParseError."""
        with pytest.raises(ConfigParseError):
            parse_dataset('{"id": "x"}')

    def test_duplicate_scenario(self):
        """Test the same (id, collective) twice is rejected."""
        record = self.scenarios[0].to_dict()
        with pytest.raises(InvariantViolationError):
            parse_dataset(json.dumps([record, record]))

    def test_find(self):
        """Test lookup by id and by (id, collective)."""
        assert len(find_scenarios(self.scenarios, "cb1_896M")) == 2
        found = find_scenarios(self.scenarios, "cb1_896M", "all-to-all")
        assert [s.collective.kind for s in found] == [CollectiveKind.ALL_TO_ALL]

    def test_find_unknown(self):
        """Test unknown ids and collectives raise UnknownScenarioError."""
        with pytest.raises(UnknownScenarioError):
            find_scenarios(self.scenarios, "cb9_1T")
        with pytest.raises(UnknownScenarioError):
            find_scenarios(self.scenarios, "cb1_896M", "reduce-scatter")

    def test_load_file(self, tmp_path):
        """Test loading a dataset file."""
        path = tmp_path / "ds.json"
        path.write_text(save_dataset(self.scenarios[:2]))
        assert load_dataset(path) == self.scenarios[:2]


class TestIngest:
    """Test layer ingestion."""

    def test_llama70b_layer(self):
        """Test GEMM shapes and padded weight gathers of one layer."""
        workload = ingest_model(ModelConfig(hidden=8192, ffn=28672, tokens=8192))
        assert [g.tag for g in workload.gemms] == ["qkv", "out", "gate_up", "down"]
        gate_up = workload.gemms[2]
        assert (gate_up.m, gate_up.n, gate_up.k) == (8192, 57344, 8192)
        assert len(workload.all_gathers) == 4
        assert workload.all_gathers[2].payload_bytes == 57344 * 8192 * 2
        assert all(c.n_ranks == 8 for c in workload.all_gathers)

    def test_padding(self):
        """Test odd weight sizes are padded to a multiple of the shard count."""
        workload = ingest_model(ModelConfig(hidden=3, ffn=5, tokens=2, dtype_bytes=1, shards=8))
        out = workload.all_gathers[1]
        assert out.payload_bytes == 16
        assert all(c.payload_bytes % 8 == 0 for c in workload.all_gathers)

    def test_unsharded(self):
        """Test a single shard gathers nothing."""
        workload = ingest_model(ModelConfig(hidden=64, ffn=128, tokens=16, shards=1))
        assert len(workload.gemms) == 4
        assert workload.all_gathers == []

    def test_invalid_config(self):
        """Test non-positive dimensions are rejected."""
        with pytest.raises(InvariantViolationError):
            ModelConfig(hidden=0, ffn=1, tokens=1)
