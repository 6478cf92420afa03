"""
Unit tests for slowdown tables, co-run penalties, memory sharing and
model parameter files.
"""

import dataclasses
import json

import pytest
from c3sim.hardware.machine import default_machine
from c3sim.interference.memory import shared_memory_factor
from c3sim.interference.penalty import Backend, CoRunPenalty
from c3sim.interference.tables import (
    KernelClass,
    SlowdownTable,
    default_comm_table,
    default_slowdown_tables,
    gemm_kernel_class,
    load_slowdown_tables,
    parse_slowdown_tables,
    save_slowdown_tables,
    slowdown_at,
    table_for,
    unit_tables,
)
from c3sim.params import (
    ModelParams,
    default_params,
    load_params,
    load_params_file,
    save_params,
    zero_interference,
)
from c3sim.utils.exceptions import (
    EmptyTableError,
    InvariantViolationError,
    MalformedTableError,
    MissingTableError,
    TableValidationError,
)
from c3sim.workload.kernels import Boundedness, CollectiveKind, GemmKernel


class TestSlowdownTable:
    """Test table validation and lookup."""

    def setup_method(self):
        self.table = SlowdownTable(KernelClass.ALL_GATHER, ((8, 4.0), (16, 2.0), (32, 1.0)))

    def test_exact_knot(self):
        """Test lookups at knots return the knot value."""
        assert slowdown_at(self.table, 16) == 2.0

    def test_interpolation(self):
        """Test lookups between knots interpolate linearly."""
        assert slowdown_at(self.table, 12) == pytest.approx(3.0)
        assert slowdown_at(self.table, 24) == pytest.approx(1.5)

    def test_clamping(self):
        """Test lookups outside the table clamp to the end values."""
        assert slowdown_at(self.table, 1) == 4.0
        assert slowdown_at(self.table, 304) == 1.0

    def test_empty_table(self):
        """Test looking up an empty table raises EmptyTableError."""
        with pytest.raises(EmptyTableError):
            slowdown_at(SlowdownTable(KernelClass.ALL_GATHER, ()), 8)

    def test_non_monotone_cus(self):
        """Test cus must be strictly increasing."""
        with pytest.raises(TableValidationError):
            SlowdownTable(KernelClass.ALL_GATHER, ((16, 2.0), (8, 4.0), (32, 1.0)))

    def test_last_knot_must_be_one(self):
        """Test the largest CU count must have slowdown 1.0."""
        with pytest.raises(TableValidationError):
            SlowdownTable(KernelClass.ALL_GATHER, ((8, 4.0), (32, 1.1)))

    def test_non_finite_slowdown(self):
        """Test inf and nan knots are rejected."""
        for bad in (float("inf"), float("nan")):
            with pytest.raises(TableValidationError):
                SlowdownTable(KernelClass.ALL_GATHER, ((8, bad), (32, 1.0)))

    def test_non_positive_slowdown(self):
        """Test slowdowns must be positive."""
        with pytest.raises(TableValidationError):
            SlowdownTable(KernelClass.ALL_GATHER, ((8, 0.0), (32, 1.0)))

    def test_validate_for_machine(self):
        """Test knots must be grain multiples within the GPU."""
        md = default_machine()
        self.table.validate_for(md)
        with pytest.raises(TableValidationError):
            SlowdownTable(KernelClass.ALL_GATHER, ((12, 2.0), (32, 1.0))).validate_for(md)
        with pytest.raises(TableValidationError):
            SlowdownTable(KernelClass.ALL_GATHER, ((8, 2.0), (320, 1.0))).validate_for(md)

    def test_missing_table(self):
        """Test a missing class raises MissingTableError."""
        with pytest.raises(MissingTableError):
            table_for({}, KernelClass.ALL_TO_ALL)


class TestBundledTables:
    """Test the shipped calibration tables."""

    def setup_method(self):
        self.md = default_machine()
        self.tables = default_slowdown_tables(self.md)

    def test_all_classes_present(self):
        """Test every kernel class has a table."""
        assert set(self.tables) == set(KernelClass)

    def test_memory_bound_gemm_prefers_fewer_cus(self):
        """Test a memory-bound GEMM runs faster one grain short of the whole GPU."""
        table = self.tables[KernelClass.GEMM_MEMORY_BOUND]
        assert slowdown_at(table, 296) < 1.0
        assert slowdown_at(table, 304) == 1.0

    def test_comm_tables_saturate(self):
        """Test collectives stop speeding up at their saturation point."""
        assert slowdown_at(self.tables[KernelClass.ALL_GATHER], 32) == 1.0
        assert slowdown_at(self.tables[KernelClass.ALL_TO_ALL], 32) == 2.0
        assert slowdown_at(self.tables[KernelClass.ALL_TO_ALL], 64) == 1.0

    def test_default_comm_table_matches_bundle(self):
        """Test the bandwidth-proportional tables equal the shipped ones."""
        for kind in CollectiveKind:
            generated = default_comm_table(kind, self.md)
            shipped = self.tables[KernelClass.for_collective(kind)]
            assert generated.cus == shipped.cus
            for (_, a), (_, b) in zip(generated.points, shipped.points):
                assert a == pytest.approx(b)

    def test_default_comm_table_small_gpu(self):
        """Test a GPU smaller than the saturation point counts as saturated."""
        small = dataclasses.replace(self.md, cus_per_gpu=48, cus_per_xcd=6)
        table = default_comm_table(CollectiveKind.ALL_TO_ALL, small)
        assert table.points[-1] == (48, 1.0)

    def test_gemm_kernel_class(self):
        """Test GEMMs map to their roofline class."""
        assert gemm_kernel_class(GemmKernel("cb1", 8192, 8192, 8192), self.md) == KernelClass.GEMM_COMPUTE_BOUND
        pinned = GemmKernel("mb1", 8192, 57344, 8192, boundedness_override=Boundedness.MEMORY_BOUND)
        assert gemm_kernel_class(pinned, self.md) == KernelClass.GEMM_MEMORY_BOUND

    def test_unit_tables(self):
        """Test unit tables never slow anything down."""
        for table in unit_tables(self.md).values():
            assert slowdown_at(table, 8) == 1.0
            assert slowdown_at(table, 200) == 1.0


class TestTableCsv:
    """Test CSV parsing and rendering."""

    def test_round_trip(self):
        """Test rendering then parsing gives equal tables."""
        tables = default_slowdown_tables()
        assert parse_slowdown_tables(save_slowdown_tables(tables.values())) == tables

    def test_empty_text(self):
        """Test empty text gives no tables."""
        assert parse_slowdown_tables("") == {}

    def test_bad_header(self):
        """Test a wrong header raises MalformedTableError on line 1."""
        with pytest.raises(MalformedTableError) as exc:
            parse_slowdown_tables("class,cus,slowdown\nall-gather,8,1.0\n")
        assert exc.value.line == 1

    def test_wrong_column_count(self):
        """Test short rows report their line number."""
        with pytest.raises(MalformedTableError) as exc:
            parse_slowdown_tables("kernel_class,cus,slowdown\nall-gather,8,1.0\nall-gather,16\n")
        assert exc.value.line == 3

    def test_unknown_class_and_bad_number(self):
        """Test unknown classes and non-numeric cells are malformed."""
        with pytest.raises(MalformedTableError):
            parse_slowdown_tables("kernel_class,cus,slowdown\nreduce-scatter,8,1.0\n")
        with pytest.raises(MalformedTableError):
            parse_slowdown_tables("kernel_class,cus,slowdown\nall-gather,eight,1.0\n")

    def test_load_checks_grain(self, tmp_path):
        """Test loading with a machine rejects misaligned knots."""
        path = tmp_path / "tables.csv"
        path.write_text("kernel_class,cus,slowdown\nall-gather,12,2.0\nall-gather,304,1.0\n")
        assert KernelClass.ALL_GATHER in load_slowdown_tables(path)
        with pytest.raises(TableValidationError):
            load_slowdown_tables(path, default_machine())


class TestCoRunPenalty:
    """Test co-run penalty factors."""

    def test_absent_entries_are_unit(self):
        """Test missing factors default to 1.0."""
        assert CoRunPenalty.unit().factor(KernelClass.ALL_GATHER, Backend.CU) == 1.0

    def test_below_one_rejected(self):
        """Test factors below 1 raise error."""
        with pytest.raises(InvariantViolationError):
            CoRunPenalty({(KernelClass.ALL_GATHER, Backend.CU): 0.9})

    def test_dma_not_above_cu(self):
        """Test a DMA factor above the CU factor raises error."""
        with pytest.raises(InvariantViolationError):
            CoRunPenalty({
                (KernelClass.ALL_TO_ALL, Backend.CU): 1.2,
                (KernelClass.ALL_TO_ALL, Backend.DMA): 1.3,
            })

    def test_with_factors_merges(self):
        """Test updates merge over existing factors."""
        penalty = CoRunPenalty({(KernelClass.ALL_GATHER, Backend.CU): 1.5})
        merged = penalty.with_factors({(KernelClass.ALL_GATHER, Backend.DMA): 1.2})
        assert merged.factor(KernelClass.ALL_GATHER, Backend.CU) == 1.5
        assert merged.factor(KernelClass.ALL_GATHER, Backend.DMA) == 1.2

    def test_dict_round_trip(self):
        """Test to_dict/from_dict round-trip."""
        penalty = default_params().penalties
        assert CoRunPenalty.from_dict(penalty.to_dict()) == penalty

    def test_from_dict_unknown_names(self):
        """Test unknown classes and backends are rejected."""
        with pytest.raises(InvariantViolationError):
            CoRunPenalty.from_dict({"reduce-scatter": {"CU": 1.2}})
        with pytest.raises(InvariantViolationError):
            CoRunPenalty.from_dict({"all-gather": {"SDMA": 1.2}})


class TestSharedMemory:
    """Test proportional bandwidth sharing."""

    def test_alone_never_stretched(self):
        """Test a single kernel keeps factor 1 even above the peak."""
        assert shared_memory_factor([10.0], 5.0) == [1.0]

    def test_under_peak(self):
        """Test co-runners within the peak are not stretched."""
        assert shared_memory_factor([2.0, 3.0], 5.0) == [1.0, 1.0]

    def test_over_peak(self):
        """Test oversubscription stretches every kernel equally."""
        assert shared_memory_factor([4.0, 6.0], 5.0) == [2.0, 2.0]

    def test_bad_peak(self):
        """Test a non-positive peak raises error."""
        with pytest.raises(InvariantViolationError):
            shared_memory_factor([1.0, 1.0], 0.0)


class TestModelParams:
    """Test model parameter files."""

    def test_defaults(self):
        """Test the shipped parameters."""
        params = default_params()
        assert params.efficiency.efficiency == 0.7
        assert params.efficiency.comm_launch_overhead_cu == pytest.approx(50e-6)
        assert params.penalties.factor(KernelClass.ALL_TO_ALL, Backend.CU) == 2.3
        assert params.restore_on_retire is True

    def test_round_trip(self, tmp_path):
        """Test save then load gives equal parameters."""
        path = tmp_path / "params.json"
        path.write_text(save_params(default_params()))
        assert load_params_file(path) == default_params()

    def test_optional_fields(self):
        """Test only efficiency and launch overhead are required."""
        params = load_params(json.dumps({"efficiency": 0.5, "comm_launch_overhead_cu": 0}))
        assert params.penalties == CoRunPenalty.unit()
        assert params.memory_contention is True
        with pytest.raises(InvariantViolationError):
            load_params(json.dumps({"efficiency": 0.5}))

    def test_policy_flags_must_be_bool(self):
        """Test policy switches reject non-boolean values."""
        with pytest.raises(InvariantViolationError):
            ModelParams(restore_on_retire="yes")

    def test_zero_interference(self):
        """Test zero-interference strips every overhead and penalty."""
        md, tables, params = zero_interference(default_machine(), default_params())
        assert md.cpu_launch_overhead == 0.0
        assert md.dma_sync_overhead == 0.0
        assert params.efficiency.comm_launch_overhead_cu == 0.0
        assert params.efficiency.efficiency == 0.7
        assert params.penalties == CoRunPenalty.unit()
        assert params.memory_contention is False
        assert set(tables) == set(KernelClass)
        assert all(slowdown_at(t, 8) == 1.0 for t in tables.values())
