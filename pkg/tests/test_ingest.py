import io
import math
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helmgp import io as hio
from helmgp.config import resolve_path
from helmgp.errors import CorruptInputError, EmptySelectionError, SchemaError
from helmgp.fields import AnalyticField, BuoyConfig, SimGrid, simulate_buoys
from helmgp.gp import VelocityDataset
from helmgp.ingest import (DrifterRecord, DrifterSchema, IngestFilter, apply_filter,
                           downsample, parse_time, read_drifters, select_records)

HEADER = "id,time,lat,lon,u,v\n"


def records_for(n_buoys, n_each, t0=0.0, dt=900.0):
    return [DrifterRecord(f"B{b:02d}", t0 + k * dt, (b + 0.1 * k, -b + 0.05 * k), (0.1 * b, -0.01 * k))
            for b in range(n_buoys) for k in range(n_each)]


class TestRead:
    def test_malformed_velocity(self):
        text = HEADER + "a,0,1,2,0.1,0.2\na,1,1,2,oops,0.2\nb,0,3,4,0.5,0.6\n"
        recs, rejects = read_drifters(text.encode())
        assert len(recs) == 2 and len(rejects) == 1
        assert rejects[0].line == 3 and "oops" in rejects[0].reason

    def test_header_only(self):
        recs, rejects = read_drifters(HEADER.encode())
        assert recs == [] and rejects == []

    def test_sorted(self):
        text = HEADER + "b,5,0,0,0,0\na,9,0,0,0,0\nb,1,0,0,0,0\na,3,0,0,0,0\n"
        recs, _ = read_drifters(text.encode())
        assert [(r.buoy_id, r.timestamp) for r in recs] == [("a", 3), ("a", 9), ("b", 1), ("b", 5)]

    def test_field_mapping(self):
        recs, _ = read_drifters((HEADER + "x,10,28.5,-88.2,0.3,-0.4\n").encode())
        r = recs[0]
        assert r.position == (-88.2, 28.5) and r.velocity == (0.3, -0.4)

    def test_missing_column(self):
        with pytest.raises(SchemaError, match="v"):
            read_drifters(b"id,time,lat,lon,u\n1,0,0,0,0\n")

    def test_empty_input(self):
        with pytest.raises(SchemaError):
            read_drifters(b"")

    def test_corrupt(self):
        text = HEADER + "a,0,0,0,0,0\na,1,0,0,x,0\na,2,0,0,nan,0\n"
        with pytest.raises(CorruptInputError):
            read_drifters(text.encode())

    def test_half_rejected_is_tolerated(self):
        recs, rejects = read_drifters((HEADER + "a,0,0,0,0,0\na,1,0,0,x,0\n").encode())
        assert len(recs) == 1 and len(rejects) == 1

    def test_custom_schema(self):
        text = "buoy;t;y;x;vx;vy\nq;0;1;2;3;4\n"
        schema = DrifterSchema.from_mapping({"id": "buoy", "time": "t", "lat": "y", "lon": "x",
                                             "u": "vx", "v": "vy", "delimiter": ";"})
        (r,), _ = read_drifters(io.StringIO(text), schema)
        assert r.position == (2.0, 1.0) and r.velocity == (3.0, 4.0)

    def test_unknown_schema_key(self):
        with pytest.raises(SchemaError):
            DrifterSchema.from_mapping({"depth": "z"})

    def test_sources(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text(HEADER + "a,0,1,2,3,4\n")
        for src in (str(p), p, p.read_bytes(), io.BytesIO(p.read_bytes())):
            assert len(read_drifters(src).records) == 1

    def test_short_row_and_blank_lines(self):
        recs, rejects = read_drifters((HEADER + "a,0,1,2,3,4\n\na,1,1\nb,0,1,2,3,4\n").encode())
        assert len(recs) == 2 and rejects[0].line == 4


class TestParseTime:
    def test_numeric(self):
        assert parse_time(" 12.5 ") == 12.5

    def test_iso(self):
        assert parse_time("1970-01-01T00:15:00Z") == 900.0
        assert parse_time("1970-01-01T00:15:00") == 900.0
        assert parse_time("1970-01-01T01:15:00+01:00") == 900.0

    def test_bad(self):
        with pytest.raises(ValueError):
            parse_time("yesterday")


class TestFilter:
    def test_identity(self):
        recs = records_for(3, 4)
        assert len(apply_filter(recs, IngestFilter())) == 12

    def test_stride_indices(self):
        recs = records_for(1, 9)
        kept = downsample(recs, 3)
        assert [recs.index(r) for r in kept] == [0, 3, 6]

    def test_fixture_count(self):
        recs, rejects = read_drifters(resolve_path("bundled:laser_like.csv"))
        assert rejects == [] and len(recs) == 171
        assert len({r.buoy_id for r in recs}) == 19
        assert len(apply_filter(recs, IngestFilter(stride=3))) == 57

    def test_box_window_allow(self):
        recs = records_for(4, 5)
        f = IngestFilter(box=(0.5, 3.5, -3.5, 0.0), window=(900.0, 2700.0), allow={"B01", "B02", "B03"})
        kept = select_records(recs, f)
        assert {r.buoy_id for r in kept} == {"B01", "B02", "B03"}
        assert all(900.0 <= r.timestamp <= 2700.0 for r in kept)

    def test_stride_anchored_in_window(self):
        recs = records_for(1, 9)
        d = apply_filter(recs, IngestFilter(window=(900.0, 1e9), stride=3))
        np.testing.assert_allclose(d.locations[:, 0], [0.1, 0.4, 0.7])

    def test_time_collapse_keeps_ids(self):
        d = apply_filter(records_for(2, 2), IngestFilter())
        assert d.times is None and d.ids == ("B00", "B00", "B01", "B01")

    def test_empty_selection(self):
        with pytest.raises(EmptySelectionError):
            apply_filter(records_for(2, 2), IngestFilter(allow={"nobody"}))

    @pytest.mark.parametrize("kw", [dict(stride=0), dict(box=(1, 0, 0, 1)), dict(window=(2, 1))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IngestFilter(**kw)

    @given(st.integers(1, 6), st.integers(1, 12), st.integers(1, 5),
           st.floats(-1, 5), st.floats(0, 6000))
    def test_selection_idempotent(self, nb, ne, stride, lo, t1):
        recs = records_for(nb, ne)
        f = IngestFilter(box=(lo, lo + 3, -10, 10), window=(0, t1), stride=stride)
        once = select_records(recs, f)
        assert select_records(once, f) == once

    @given(st.integers(1, 6), st.integers(0, 20), st.integers(1, 7))
    def test_downsample_size(self, nb, ne, stride):
        kept = downsample(records_for(nb, ne), stride)
        assert len(kept) == nb * math.ceil(ne / stride)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestRoundTrip:
    @given(st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=20))
    def test_dataset_csv(self, rows):
        a = np.array(rows)
        d = VelocityDataset(a[:, :2], a[:, 2:])
        with tempfile.TemporaryDirectory() as tmp:
            back = hio.dataset_from_csv(hio.write_dataset(d, os.path.join(tmp, "d.csv")))
        np.testing.assert_array_equal(back.locations, d.locations)
        np.testing.assert_array_equal(back.velocities, d.velocities)

    def test_simulated_dataset(self, tmp_path):
        starts = [[0.1 * k - 0.6, 0.05 * k] for k in range(12)]
        d = simulate_buoys(AnalyticField.vortex(), SimGrid.square(-1, 1, 17), BuoyConfig(starts, 0.5, 2))
        p = hio.write_dataset(d, tmp_path / "d.csv")
        back = hio.dataset_from_csv(p)
        assert back == d and back.ids == d.ids
        np.testing.assert_array_equal(back.times, d.times)
