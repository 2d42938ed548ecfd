import csv
import json
import math
from datetime import datetime

import numpy as np
import pytest

from dpnoise.baselines import Gaussian, Laplace
from dpnoise.core import DomainError, PrivacyParams
from dpnoise.query import (
    AggregateKind,
    BudgetError,
    BudgetLedger,
    LedgerEntry,
    MECHANISM_NAMES,
    QUERY_MECHANISMS,
    QuerySpec,
    make_mechanism,
    make_rng,
    run_query,
)
from dpnoise.trunclap import TruncatedLaplace

P = PrivacyParams(0.5, 1e-5)


def clipped_spend_sum(path, lo, hi):
    with open(path, newline="") as fh:
        vals = [float(r["spend"]) for r in csv.DictReader(fh)]
    return float(np.clip(np.asarray(vals), lo, hi).sum())


class TestAggregateKind:
    def test_parse(self):
        assert AggregateKind.parse("count") is AggregateKind.COUNT
        assert AggregateKind.parse("SUM") is AggregateKind.SUM
        assert AggregateKind.parse("Mean") is AggregateKind.MEAN
        with pytest.raises(DomainError):
            AggregateKind.parse("median")


class TestMakeMechanism:
    def test_dispatch(self):
        assert isinstance(make_mechanism("trunclap", P, 1.0), TruncatedLaplace)
        assert isinstance(make_mechanism("laplace", P, 1.0), Laplace)
        assert isinstance(make_mechanism("gaussian-classic", P, 1.0), Gaussian)
        assert isinstance(make_mechanism("gaussian-analytic", P, 1.0), Gaussian)
        assert make_mechanism("uniform", P, 1.0).half_width == pytest.approx(
            1.0 / (2.0 * P.delta)
        )
        with pytest.raises(DomainError):
            make_mechanism("exponential", P, 1.0)

    def test_name_lists(self):
        assert set(QUERY_MECHANISMS) <= set(MECHANISM_NAMES)
        assert "uniform" not in QUERY_MECHANISMS

    def test_laplace_ignores_delta(self):
        a = make_mechanism("laplace", PrivacyParams(0.5, 1e-3), 1.0)
        b = make_mechanism("laplace", PrivacyParams(0.5, 1e-9), 1.0)
        assert a.scale == b.scale == 2.0


class TestMakeRng:
    def test_median_stub(self):
        rng = make_rng("median")
        assert rng.random() == 0.5
        np.testing.assert_array_equal(rng.random(size=3), [0.5, 0.5, 0.5])

    def test_integer_and_string_seeds_agree(self):
        a = make_rng(16).random(size=4)
        b = make_rng("16").random(size=4)
        c = make_rng("0x10").random(size=4)  # base prefixes accepted
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, c)

    def test_range(self):
        make_rng(0)
        make_rng(2**64 - 1)
        with pytest.raises(DomainError):
            make_rng(-1)
        with pytest.raises(DomainError):
            make_rng(2**64)
        with pytest.raises(DomainError):
            make_rng("not-a-seed")


class TestQuerySpec:
    def test_count_needs_no_clip(self):
        spec = QuerySpec("x.csv", "c", AggregateKind.COUNT, "trunclap", P, 0)
        assert spec.sensitivity().value == 1.0

    @pytest.mark.parametrize("agg", [AggregateKind.SUM, AggregateKind.MEAN])
    def test_sum_and_mean_require_clip(self, agg):
        with pytest.raises(DomainError):
            QuerySpec("x.csv", "c", agg, "trunclap", P, 0)

    def test_clip_ordering(self):
        with pytest.raises(DomainError):
            QuerySpec(
                "x.csv", "c", AggregateKind.SUM, "trunclap", P, 0, clip=(5.0, 5.0)
            )
        with pytest.raises(DomainError):
            QuerySpec(
                "x.csv",
                "c",
                AggregateKind.SUM,
                "trunclap",
                P,
                0,
                clip=(1.0, math.inf),
            )

    def test_sensitivity_is_worst_clip_edge(self):
        spec = QuerySpec(
            "x.csv", "c", AggregateKind.SUM, "trunclap", P, 0, clip=(-30.0, 10.0)
        )
        assert spec.sensitivity().value == 30.0

    def test_uniform_not_allowed_for_queries(self):
        with pytest.raises(DomainError):
            QuerySpec("x.csv", "c", AggregateKind.COUNT, "uniform", P, 0)

    def test_aggregate_must_be_enum(self):
        with pytest.raises(DomainError):
            QuerySpec("x.csv", "c", "count", "trunclap", P, 0)


class TestBudgetLedger:
    def test_missing_file_is_empty(self, ledger_path):
        ledger = BudgetLedger(ledger_path)
        assert ledger.entries() == []
        assert ledger.totals() == (0.0, 0.0)

    def test_append_and_totals(self, ledger_path):
        ledger = BudgetLedger(ledger_path)
        ledger.append(LedgerEntry("q1", 0.5, 1e-5, "2026-01-01T00:00:00+00:00"))
        ledger.append(LedgerEntry("q2", 0.25, 0.0, "2026-01-01T00:01:00+00:00"))
        entries = ledger.entries()
        assert [e.query_id for e in entries] == ["q1", "q2"]
        eps, delta = ledger.totals()
        assert eps == 0.75
        assert delta == 1e-5

    def test_blank_lines_skipped(self, ledger_path):
        ledger_path.write_text(
            '{"query_id": "a", "epsilon": 1.0, "delta": 0.0, '
            '"timestamp": "t"}\n\n'
        )
        assert len(BudgetLedger(ledger_path).entries()) == 1

    def test_malformed_line_reported_with_number(self, ledger_path):
        ledger_path.write_text(
            '{"query_id": "a", "epsilon": 1.0, "delta": 0.0, '
            '"timestamp": "t"}\nnot json\n'
        )
        with pytest.raises(DomainError, match="line 2"):
            BudgetLedger(ledger_path).entries()

    def test_missing_key_is_malformed(self, ledger_path):
        ledger_path.write_text('{"query_id": "a", "epsilon": 1.0}\n')
        with pytest.raises(DomainError, match="line 1"):
            BudgetLedger(ledger_path).entries()


class TestRunQuery:
    def test_count_with_median_seed_is_exact(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv), "spend", AggregateKind.COUNT, "trunclap", P, "median"
        )
        result = run_query(spec, ledger_path)
        assert result["noisy_value"] == 100.0
        assert result["epsilon_spent"] == 0.5
        assert result["delta_spent"] == 1e-5
        assert set(result) == {
            "noisy_value",
            "epsilon_spent",
            "delta_spent",
            "query_id",
        }

    def test_ledger_is_appended(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv), "spend", AggregateKind.COUNT, "trunclap", P, "median"
        )
        r1 = run_query(spec, ledger_path)
        r2 = run_query(spec, ledger_path)
        entries = BudgetLedger(ledger_path).entries()
        assert [e.query_id for e in entries] == [r1["query_id"], r2["query_id"]]
        assert len(r1["query_id"]) == 12
        eps, delta = BudgetLedger(ledger_path).totals()
        assert eps == pytest.approx(1.0)
        assert delta == pytest.approx(2e-5)
        for e in entries:
            datetime.fromisoformat(e.timestamp)  # must parse

    def test_laplace_spends_zero_delta(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv), "spend", AggregateKind.COUNT, "laplace", P, "median"
        )
        result = run_query(spec, ledger_path)
        assert result["delta_spent"] == 0.0
        assert BudgetLedger(ledger_path).totals() == (0.5, 0.0)

    def test_sum_with_median_seed(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv),
            "spend",
            AggregateKind.SUM,
            "trunclap",
            P,
            "median",
            clip=(0.0, 20.0),
        )
        result = run_query(spec, ledger_path)
        assert result["noisy_value"] == clipped_spend_sum(spend_csv, 0.0, 20.0)

    def test_mean_with_median_seed(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv),
            "spend",
            AggregateKind.MEAN,
            "gaussian-analytic",
            P,
            "median",
            clip=(0.0, 25.0),
        )
        result = run_query(spec, ledger_path)
        expected = clipped_spend_sum(spend_csv, 0.0, 25.0) / 100.0
        assert result["noisy_value"] == pytest.approx(expected, rel=1e-15)
        # the ledger charges the full pair, not the per-draw halves
        assert result["epsilon_spent"] == 0.5

    def test_mean_of_empty_table_is_nan(self, tmp_path, ledger_path):
        path = tmp_path / "empty.csv"
        path.write_text("id,spend\n")
        spec = QuerySpec(
            str(path),
            "spend",
            AggregateKind.MEAN,
            "trunclap",
            P,
            "median",
            clip=(0.0, 1.0),
        )
        assert math.isnan(run_query(spec, ledger_path)["noisy_value"])

    def test_deterministic_under_integer_seed(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv), "spend", AggregateKind.COUNT, "trunclap", P, 42
        )
        a = run_query(spec, ledger_path)["noisy_value"]
        b = run_query(spec, ledger_path)["noisy_value"]
        assert a == b
        assert a != 100.0  # real noise this time

    def test_missing_file(self, tmp_path, ledger_path):
        spec = QuerySpec(
            str(tmp_path / "nope.csv"),
            "spend",
            AggregateKind.COUNT,
            "trunclap",
            P,
            0,
        )
        with pytest.raises(DomainError, match="cannot read"):
            run_query(spec, ledger_path)

    def test_missing_column(self, spend_csv, ledger_path):
        spec = QuerySpec(
            str(spend_csv), "wages", AggregateKind.COUNT, "trunclap", P, 0
        )
        with pytest.raises(DomainError, match="wages"):
            run_query(spec, ledger_path)

    def test_non_numeric_cell_names_location(self, tmp_path, ledger_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,spend\n1,3.5\n2,oops\n")
        spec = QuerySpec(
            str(path),
            "spend",
            AggregateKind.SUM,
            "trunclap",
            P,
            0,
            clip=(0.0, 1.0),
        )
        with pytest.raises(DomainError, match=r"bad\.csv:3"):
            run_query(spec, ledger_path)

    def test_count_ignores_bad_cells(self, tmp_path, ledger_path):
        # count never parses the column, so junk cells cannot block it
        path = tmp_path / "bad.csv"
        path.write_text("id,spend\n1,3.5\n2,oops\n")
        spec = QuerySpec(
            str(path), "spend", AggregateKind.COUNT, "trunclap", P, "median"
        )
        assert run_query(spec, ledger_path)["noisy_value"] == 2.0


class TestBudgets:
    def _count_spec(self, spend_csv, eps=0.5):
        return QuerySpec(
            str(spend_csv),
            "spend",
            AggregateKind.COUNT,
            "trunclap",
            PrivacyParams(eps, 1e-5),
            "median",
        )

    def test_budget_respected_then_exceeded(self, spend_csv, ledger_path):
        spec = self._count_spec(spend_csv)
        run_query(spec, ledger_path, budget_eps=1.0)
        run_query(spec, ledger_path, budget_eps=1.0)  # exactly at the cap
        with pytest.raises(BudgetError, match="epsilon budget"):
            run_query(spec, ledger_path, budget_eps=1.0)

    def test_budget_checked_before_reading_data(self, tmp_path, ledger_path):
        BudgetLedger(ledger_path).append(
            LedgerEntry("q0", 1.0, 0.0, "2026-01-01T00:00:00+00:00")
        )
        spec = QuerySpec(
            str(tmp_path / "does-not-exist.csv"),
            "spend",
            AggregateKind.COUNT,
            "trunclap",
            P,
            0,
        )
        with pytest.raises(BudgetError):
            run_query(spec, ledger_path, budget_eps=1.0)

    def test_delta_budget(self, spend_csv, ledger_path):
        lap = QuerySpec(
            str(spend_csv), "spend", AggregateKind.COUNT, "laplace", P, "median"
        )
        run_query(lap, ledger_path, budget_delta=0.0)  # laplace spends none
        tl = self._count_spec(spend_csv)
        with pytest.raises(BudgetError, match="delta budget"):
            run_query(tl, ledger_path, budget_delta=0.0)
