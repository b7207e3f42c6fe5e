"""Tests for [the `formats` module][pyrgm.formats]."""

import numpy as np
import pytest

from pyrgm.errors import FormatError
from pyrgm.formats import (
    atomic_write,
    dumps_lines,
    matrix_to_pairs,
    pairs_to_matrix,
    read_cloud,
    read_json,
    read_pairs,
    read_ply,
    read_transform,
    read_xyz,
    transform_from_line,
    transform_to_line,
    write_cloud,
    write_json,
    write_pairs,
    write_ply,
    write_rows,
    write_transform,
    write_xyz,
)
from pyrgm.geom import PointCloud, RigidTransform
from tests import FIXTURES_DIR


def test_read_ply_ignores_extra_properties():
    """Keep only the coordinates of a PLY file with extra vertex properties."""
    cloud = read_ply(FIXTURES_DIR / "square.ply")
    assert len(cloud) == 5
    assert cloud.points[4].tolist() == [0.5, 0.5, 1.0]


def test_read_binary_ply_fails():
    """Refuse binary PLY files."""
    with pytest.raises(FormatError):
        read_ply(FIXTURES_DIR / "binary.ply")


def test_read_ply_without_magic_fails(tmp_path):
    """Refuse files not starting with the PLY magic line."""
    path = tmp_path / "cloud.ply"
    path.write_text("element vertex 1\nend_header\n0 0 0\n")
    with pytest.raises(FormatError):
        read_ply(path)


def test_read_truncated_ply_fails(tmp_path):
    """Refuse PLY files with fewer vertices than announced."""
    path = tmp_path / "cloud.ply"
    header = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
    path.write_text(header + "end_header\n0 0 0\n1 1 1\n")
    with pytest.raises(FormatError, match="cloud.ply"):
        read_ply(path)


def test_ply_keeps_values(tmp_path, rng):
    """Write and read back the exact coordinates."""
    cloud = PointCloud(rng.normal(size=(7, 3)))
    write_ply(tmp_path / "cloud.ply", cloud)
    assert np.array_equal(read_ply(tmp_path / "cloud.ply").points, cloud.points)


def test_xyz_keeps_values(tmp_path, rng):
    """Write and read back plain-text clouds."""
    cloud = PointCloud(rng.normal(size=(4, 3)))
    write_xyz(tmp_path / "cloud.xyz", cloud)
    assert np.array_equal(read_xyz(tmp_path / "cloud.xyz").points, cloud.points)


def test_write_ply_header(tmp_path):
    """Write an ASCII header with double coordinates."""
    write_ply(tmp_path / "cloud.ply", PointCloud(np.ones((2, 3))))
    header = (tmp_path / "cloud.ply").read_text().split("end_header")[0].splitlines()
    assert header[:3] == ["ply", "format ascii 1.0", "element vertex 2"]
    assert header[3:6] == ["property double x", "property double y", "property double z"]


def test_read_xyz_comments_and_extra_columns(tmp_path):
    """Skip comments and keep the first three columns."""
    path = tmp_path / "cloud.xyz"
    path.write_text("# x y z intensity\n0 1 2 9\n3 4 5 9\n")
    assert read_xyz(path).points.tolist() == [[0, 1, 2], [3, 4, 5]]


def test_read_empty_xyz_fails(tmp_path):
    """Refuse files without points."""
    path = tmp_path / "cloud.xyz"
    path.write_text("# nothing\n")
    with pytest.raises(FormatError, match="no points"):
        read_xyz(path)


def test_read_xyz_short_line_fails(tmp_path):
    """Refuse plain-text lines with fewer than three numbers."""
    path = tmp_path / "cloud.xyz"
    path.write_text("0 0 0\n1 2\n")
    with pytest.raises(FormatError, match="cloud.xyz"):
        read_xyz(path)


def test_cloud_codec_from_suffix(tmp_path):
    """Pick the codec from the file suffix and refuse unknown ones."""
    cloud = PointCloud(np.eye(3))
    write_cloud(tmp_path / "cloud.txt", cloud)
    assert np.array_equal(read_cloud(tmp_path / "cloud.txt").points, cloud.points)
    with pytest.raises(FormatError):
        write_cloud(tmp_path / "cloud.obj", cloud)
    with pytest.raises(FormatError):
        read_cloud(tmp_path / "cloud.obj")


def test_transform_line_has_twelve_numbers():
    """Write the rotation row by row, then the translation."""
    transform = RigidTransform(np.eye(3), [1.0, 2.0, 3.0])
    words = transform_to_line(transform).split()
    assert len(words) == 12
    assert [float(word) for word in words] == [1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 2, 3]


def test_transform_line_rejects_wrong_counts():
    """Refuse lines that do not hold exactly 12 numbers."""
    with pytest.raises(FormatError):
        transform_from_line("1 0 0 0 1 0 0 0 1 0 0")
    with pytest.raises(FormatError):
        transform_from_line("1 0 0 0 1 0 0 0 1 0 0 zero")


def test_transform_file(tmp_path):
    """Write a single line and read the same transform back."""
    transform = RigidTransform.from_euler([30, 10, 5], [0.1, -0.2, 0.3])
    write_transform(tmp_path / "transform.txt", transform)
    assert (tmp_path / "transform.txt").read_text().count("\n") == 1
    back = read_transform(tmp_path / "transform.txt")
    assert np.array_equal(back.rotation, transform.rotation)
    assert np.array_equal(back.translation, transform.translation)


def test_pairs_file(tmp_path):
    """Write a header and scores, and read back the index pairs only."""
    write_pairs(tmp_path / "pairs.csv", [(0, 2, 0.5), (1, 0, 0.25)], header=("i", "j", "score"))
    lines = (tmp_path / "pairs.csv").read_text().splitlines()
    assert lines == ["i,j,score", "0,2,0.5", "1,0,0.25"]
    assert read_pairs(tmp_path / "pairs.csv") == [(0, 2), (1, 0)]


def test_read_malformed_pairs_fails(tmp_path):
    """Refuse rows that do not start with two integers."""
    path = tmp_path / "pairs.csv"
    path.write_text("i,j\n0,x\n")
    with pytest.raises(FormatError):
        read_pairs(path)


def test_pairs_matrix_conversions():
    """Scatter pairs into a binary matrix and list them back in row-major order."""
    matrix = pairs_to_matrix([(1, 0), (0, 2)], 2, 3)
    assert matrix.tolist() == [[0, 0, 1], [1, 0, 0]]
    assert matrix_to_pairs(matrix) == [(0, 2), (1, 0)]


def test_json_documents(tmp_path):
    """Sort keys and refuse invalid JSON."""
    write_json(tmp_path / "doc.json", {"b": 1, "a": [1, 2]})
    text = (tmp_path / "doc.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(tmp_path / "doc.json") == {"a": [1, 2], "b": 1}
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(FormatError):
        read_json(tmp_path / "bad.json")


def test_dumps_lines():
    """Write one compact document per line."""
    assert dumps_lines([{"b": 1, "a": 2}, {"c": None}]) == '{"a": 2, "b": 1}\n{"c": null}\n'


def test_write_rows(tmp_path):
    """Write dictionaries as CSV, leaving `None` values empty."""
    write_rows(tmp_path / "rows.csv", [{"id": "a", "value": 1.5}, {"id": "b", "value": None}])
    assert (tmp_path / "rows.csv").read_text().splitlines() == ["id,value", "a,1.5", "b,"]


def test_write_rows_with_header(tmp_path):
    """Use the given header and drop extra keys."""
    write_rows(tmp_path / "rows.csv", [{"id": "a", "extra": 0}], header=["id"])
    assert (tmp_path / "rows.csv").read_text().splitlines() == ["id", "a"]


def test_atomic_write_leaves_no_partial_file(tmp_path):
    """Leave the destination untouched and remove the temporary file on errors."""
    path = tmp_path / "out.txt"
    path.write_text("previous")
    with pytest.raises(RuntimeError):
        with atomic_write(path) as stream:
            stream.write("partial")
            raise RuntimeError("interrupted")
    assert path.read_text() == "previous"
    assert [entry.name for entry in tmp_path.iterdir()] == ["out.txt"]


def test_atomic_write_creates_parents(tmp_path):
    """Create missing parent directories."""
    with atomic_write(tmp_path / "a" / "b" / "out.bin", binary=True) as stream:
        stream.write(b"\x00\x01")
    assert (tmp_path / "a" / "b" / "out.bin").read_bytes() == b"\x00\x01"
