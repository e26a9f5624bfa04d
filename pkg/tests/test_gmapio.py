import base64
import json

import numpy as np
import pytest

from fibkit.gmapio import map_kind, read_gmap, write_gmap
from fibkit.gridmap import (GridMap, Reference, identity_map, lift_reference,
                            vector_valued_map)
from fibkit.sampling import random_diffeo, random_fibration
from fibkit.torus import square_torus

TWO_PI = 2.0 * np.pi


def roundtrip(tmp_path, f, name, **kw):
    path = str(tmp_path / name)
    write_gmap(f, path, **kw)
    return read_gmap(path)


def rewrite_header(path, **changes):
    head, body = path.read_bytes().split(b"\n\n", 1)
    meta = json.loads(head)
    meta.update(changes)
    path.write_bytes(json.dumps(meta).encode("utf-8") + b"\n\n" + body)


class TestRoundTrip:
    def test_diffeo(self, tmp_path, t2):
        f = random_diffeo(np.random.default_rng(0), t2, (16, 16), 0.2)
        g = roundtrip(tmp_path, f, "d.gmap")
        assert g.src == f.src and g.dst == f.dst
        assert g.reference == f.reference
        assert g.interp == f.interp
        assert np.array_equal(g.displacement, f.displacement)

    def test_fibration(self, tmp_path, t2):
        pi = random_fibration(np.random.default_rng(1), t2, 1, (16, 16), 0.2)
        g = roundtrip(tmp_path, pi, "f.gmap")
        assert map_kind(g) == "fibration"
        assert np.array_equal(g.displacement, pi.displacement)

    def test_section(self, tmp_path, t2):
        base = square_torus(1)
        disp = np.zeros((16, 2))
        disp[:, 1] = 0.1 * np.sin(np.linspace(0, TWO_PI, 16, endpoint=False))
        s = GridMap(base, t2, lift_reference(1, 2), (16,), disp)
        g = roundtrip(tmp_path, s, "s.gmap")
        assert map_kind(g) == "section"
        assert np.array_equal(g.displacement, s.displacement)

    def test_vector_field(self, tmp_path, t2):
        v = vector_valued_map(t2, t2, np.random.default_rng(3).normal(
            size=(16, 16, 2)))
        g = roundtrip(tmp_path, v, "v.gmap")
        assert map_kind(g) == "vectorfield"
        assert g.vector_valued
        assert np.array_equal(g.displacement, v.displacement)

    def test_cubic_interp_preserved(self, tmp_path, t2):
        f = random_diffeo(np.random.default_rng(4), t2, (16, 16), 0.2,
                          interp="cubic")
        g = roundtrip(tmp_path, f, "c.gmap")
        assert g.interp == "cubic"

    def test_header_declares_reference(self, tmp_path, t2):
        f = random_diffeo(np.random.default_rng(5), t2, (16, 16), 0.2)
        path = tmp_path / "h.gmap"
        write_gmap(f, str(path))
        meta = json.loads(path.read_bytes().split(b"\n\n", 1)[0])
        assert meta["version"] == 1
        assert meta["kind"] == "diffeo"
        assert meta["reference"] == "identity"
        assert meta["grid"] == [16, 16]


class TestSidecar:
    def test_payload_in_separate_file(self, tmp_path, t2):
        f = random_diffeo(np.random.default_rng(6), t2, (16, 16), 0.2)
        path = tmp_path / "big.gmap"
        write_gmap(f, str(path), sidecar=True)
        assert (tmp_path / "big.gmap.bin").exists()
        body = path.read_bytes().split(b"\n\n", 1)[1]
        assert body.strip() == b"big.gmap.bin"
        g = read_gmap(str(path))
        assert np.array_equal(g.displacement, f.displacement)


class TestByteLayout:
    def test_component_major_little_endian(self, tmp_path, t2):
        # two components on an uneven grid so layout mistakes cannot cancel
        disp = np.arange(192.0).reshape(12, 8, 2)
        f = vector_valued_map(t2, t2, disp)
        path = tmp_path / "layout.gmap"
        write_gmap(f, str(path))
        body = path.read_bytes().split(b"\n\n", 1)[1]
        vals = np.frombuffer(base64.b64decode(body.strip()), dtype="<f8")
        expect = np.concatenate([disp[..., 0].ravel(), disp[..., 1].ravel()])
        assert np.array_equal(vals, expect)

    def test_hand_built_file_reads(self, tmp_path):
        disp = np.arange(8.0)
        meta = {
            "version": 1,
            "kind": "diffeo",
            "reference": "identity",
            "src_dim": 1,
            "dst_dim": 1,
            "periods_src": [TWO_PI],
            "periods_dst": [TWO_PI],
            "grid": [8],
            "interp": "trig",
            "payload": "inline",
        }
        path = tmp_path / "hand.gmap"
        path.write_bytes(json.dumps(meta).encode("utf-8") + b"\n\n" +
                         base64.b64encode(disp.astype("<f8").tobytes()))
        g = read_gmap(str(path))
        assert g.src.dim == 1
        assert g.grid == (8,)
        assert np.array_equal(g.displacement[:, 0], disp)


class TestErrors:
    def test_future_version_rejected(self, tmp_path, t1):
        path = tmp_path / "v.gmap"
        write_gmap(identity_map(t1, (8,)), str(path))
        rewrite_header(path, version=99)
        with pytest.raises(ValueError):
            read_gmap(str(path))

    def test_unknown_kind_rejected(self, tmp_path, t1):
        path = tmp_path / "k.gmap"
        write_gmap(identity_map(t1, (8,)), str(path))
        rewrite_header(path, kind="mystery", reference=None)
        with pytest.raises(ValueError):
            read_gmap(str(path))

    def test_contradictory_reference_rejected(self, tmp_path, t1):
        path = tmp_path / "r.gmap"
        write_gmap(identity_map(t1, (8,)), str(path))
        rewrite_header(path, reference="zero")
        with pytest.raises(ValueError):
            read_gmap(str(path))

    def test_select_reference_not_serializable(self, tmp_path, t2):
        sel = GridMap(t2, t2, Reference((1, 0)), (8, 8), np.zeros((8, 8, 2)))
        with pytest.raises(ValueError):
            write_gmap(sel, str(tmp_path / "sel.gmap"))

    def test_truncated_payload(self, tmp_path, t1):
        path = tmp_path / "t.gmap"
        write_gmap(identity_map(t1, (8,)), str(path))
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(ValueError):
            read_gmap(str(path))

    def test_missing_separator(self, tmp_path):
        path = tmp_path / "bad.gmap"
        path.write_bytes(b'{"version": 1}')
        with pytest.raises(ValueError):
            read_gmap(str(path))
