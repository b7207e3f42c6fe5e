"""
File codecs.

- point clouds as ASCII PLY (`vertex` element, `x y z` properties, through `plyfile`) or plain XYZ text
- rigid transforms as a single line of 12 numbers: 9 row-major rotation entries, then 3 translation entries
- correspondences as CSV rows `i,j` or `i,j,score`
- JSON documents (manifests, results, reports)

Writers never leave partial files behind: everything goes through [`atomic_write`][pyrgm.formats.atomic_write].
"""

import csv
import io
import json
import os
import tempfile
import warnings
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from pyrgm.errors import FormatError
from pyrgm.geom import PointCloud, RigidTransform

PathLike = Union[str, Path]

AXES = ("x", "y", "z")
"""The vertex properties holding the coordinates."""

VERTEX_DTYPE = np.dtype([(axis, "<f8") for axis in AXES])
"""The vertex record written to PLY files."""

FLOAT_FORMAT = "%.17g"
"""Enough digits for text files to hold float64 values exactly."""


@contextmanager
def atomic_write(path: PathLike, binary: bool = False) -> Iterator[Any]:
    """
    Open a temporary sibling of `path` for writing, and move it over `path` on success.

    On error the temporary file is removed and `path` is left untouched.

    Arguments:
        path: The final file path.
        binary: Whether to open the file in binary mode.

    Yields:
        The open file object.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    descriptor, temporary = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        mode = "wb" if binary else "w"
        kwargs = {} if binary else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(descriptor, mode, **kwargs) as stream:  # type: ignore
            yield stream
        os.replace(temporary, target)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise


def _format_float(value: float) -> str:
    return repr(float(value))


def write_ply(path: PathLike, cloud: PointCloud) -> None:
    """
    Write a cloud as ASCII PLY, with `double` coordinates.

    Arguments:
        path: The destination.
        cloud: The cloud.
    """
    vertices = np.empty(len(cloud), dtype=VERTEX_DTYPE)
    for axis, name in enumerate(AXES):
        vertices[name] = cloud.points[:, axis]
    ply = PlyData([PlyElement.describe(vertices, "vertex")], text=True)
    with atomic_write(path, binary=True) as stream:
        ply.write(stream)


def read_ply(path: PathLike) -> PointCloud:
    """
    Read an ASCII PLY file.

    Only the `x y z` properties of the `vertex` element are kept; extra vertex properties are ignored.

    Arguments:
        path: The file to read.

    Raises:
        FormatError: When the file is binary, or its header or body is malformed.

    Returns:
        The cloud.
    """
    try:
        ply = PlyData.read(str(path))
    except (PlyParseError, ValueError) as error:
        raise FormatError(f"{path}: {error}") from error
    if not ply.text:
        raise FormatError(f"{path}: only ASCII PLY is supported, not {ply.byte_order!r} binary")
    if "vertex" not in ply or not set(AXES) <= set(ply["vertex"].data.dtype.names):
        raise FormatError(f"{path}: no vertex element with x, y, z properties")
    vertices = ply["vertex"].data
    return PointCloud(np.column_stack([vertices[name] for name in AXES]).astype(np.float64))


def write_xyz(path: PathLike, cloud: PointCloud) -> None:
    """
    Write a cloud as plain text, one `x y z` triple per line.

    Arguments:
        path: The destination.
        cloud: The cloud.
    """
    with atomic_write(path) as stream:
        np.savetxt(stream, cloud.points, fmt=FLOAT_FORMAT)


def read_xyz(path: PathLike) -> PointCloud:
    """
    Read a plain-text cloud.

    The first three columns are the coordinates; `#` starts a comment.

    Arguments:
        path: The file to read.

    Raises:
        FormatError: When a line does not hold three numbers, or there is no point.

    Returns:
        The cloud.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            points = np.loadtxt(str(path), dtype=np.float64, usecols=(0, 1, 2), ndmin=2)
    except (ValueError, IndexError) as error:
        raise FormatError(f"{path}: expected 'x y z' lines: {error}") from error
    if points.size == 0:
        raise FormatError(f"{path}: no points")
    return PointCloud(points)


CLOUD_READERS = {".ply": read_ply, ".xyz": read_xyz, ".txt": read_xyz}
"""Cloud readers, by file suffix."""

CLOUD_WRITERS = {".ply": write_ply, ".xyz": write_xyz, ".txt": write_xyz}
"""Cloud writers, by file suffix."""


def read_cloud(path: PathLike) -> PointCloud:
    """
    Read a cloud, choosing the codec from the file suffix.

    Arguments:
        path: The file to read.

    Raises:
        FormatError: When the suffix is unknown.

    Returns:
        The cloud.
    """
    suffix = Path(path).suffix.lower()
    if suffix not in CLOUD_READERS:
        raise FormatError(f"{path}: unknown cloud format {suffix!r}, expected one of {sorted(CLOUD_READERS)}")
    return CLOUD_READERS[suffix](path)


def write_cloud(path: PathLike, cloud: PointCloud) -> None:
    """
    Write a cloud, choosing the codec from the file suffix.

    Arguments:
        path: The destination.
        cloud: The cloud.

    Raises:
        FormatError: When the suffix is unknown.
    """
    suffix = Path(path).suffix.lower()
    if suffix not in CLOUD_WRITERS:
        raise FormatError(f"{path}: unknown cloud format {suffix!r}, expected one of {sorted(CLOUD_WRITERS)}")
    CLOUD_WRITERS[suffix](path, cloud)


def transform_to_line(transform: RigidTransform) -> str:
    """
    Format a transform as 12 numbers: the rotation row by row, then the translation.

    Arguments:
        transform: The transform.

    Returns:
        A single line of text, without trailing newline.
    """
    values = list(transform.rotation.reshape(-1)) + list(transform.translation)
    return " ".join(_format_float(value) for value in values)


def transform_from_line(line: str) -> RigidTransform:
    """
    Parse a 12-number transform line.

    Arguments:
        line: The text.

    Raises:
        FormatError: When the line does not hold exactly 12 numbers.

    Returns:
        The transform.
    """
    try:
        values = [float(word) for word in line.split()]
    except ValueError as error:
        raise FormatError(f"invalid transform line: {error}") from error
    if len(values) != 12:
        raise FormatError(f"a transform line holds 12 numbers, not {len(values)}")
    return RigidTransform(np.array(values[:9]).reshape(3, 3), np.array(values[9:]))


def write_transform(path: PathLike, transform: RigidTransform) -> None:
    """
    Write a transform file.

    Arguments:
        path: The destination.
        transform: The transform.
    """
    with atomic_write(path) as stream:
        stream.write(transform_to_line(transform) + "\n")


def read_transform(path: PathLike) -> RigidTransform:
    """
    Read a transform file.

    Arguments:
        path: The file to read.

    Returns:
        The transform.
    """
    return transform_from_line(Path(path).read_text(encoding="utf-8").strip())


def write_pairs(path: PathLike, pairs: Sequence[Tuple[Any, ...]], header: Sequence[str] = ("i", "j")) -> None:
    """
    Write index pairs (optionally with scores) as CSV.

    Arguments:
        path: The destination.
        pairs: Tuples `(i, j)` or `(i, j, score)`.
        header: The column names.
    """
    with atomic_write(path) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for pair in pairs:
            writer.writerow([int(pair[0]), int(pair[1]), *(_format_float(value) for value in pair[2:])])


def read_pairs(path: PathLike) -> List[Tuple[int, int]]:
    """
    Read index pairs from a CSV file written by [`write_pairs`][pyrgm.formats.write_pairs].

    Arguments:
        path: The file to read.

    Raises:
        FormatError: When a row does not start with two integers.

    Returns:
        The `(i, j)` pairs, extra columns dropped.
    """
    pairs = []
    with open(path, encoding="utf-8", newline="") as stream:
        reader = csv.reader(stream)
        next(reader, None)
        for row in reader:
            try:
                pairs.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError) as error:
                raise FormatError(f"{path}: malformed pair row {row!r}") from error
    return pairs


def pairs_to_matrix(pairs: Sequence[Tuple[int, int]], rows: int, columns: int) -> np.ndarray:
    """
    Scatter index pairs into a binary matrix.

    Arguments:
        pairs: The `(i, j)` pairs.
        rows: Number of rows.
        columns: Number of columns.

    Returns:
        A `(rows, columns)` array of zeros and ones.
    """
    matrix = np.zeros((rows, columns))
    for i, j in pairs:
        matrix[i, j] = 1.0
    return matrix


def matrix_to_pairs(matrix: np.ndarray) -> List[Tuple[int, int]]:
    """
    List the nonzero entries of a binary matrix, in row-major order.

    Arguments:
        matrix: The matrix.

    Returns:
        The `(i, j)` pairs.
    """
    rows, columns = np.nonzero(matrix)
    return [(int(i), int(j)) for i, j in zip(rows, columns)]


def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
    """
    Write a dense matrix as CSV, one row per line.

    Arguments:
        path: The destination.
        matrix: A 2D array.
    """
    with atomic_write(path) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        for row in np.asarray(matrix):
            writer.writerow([_format_float(value) for value in row])


def write_json(path: PathLike, document: Any) -> None:
    """
    Write a JSON document with sorted keys, so that equal documents give equal bytes.

    Arguments:
        path: The destination.
        document: A JSON-serializable object.
    """
    with atomic_write(path) as stream:
        json.dump(document, stream, indent=2, sort_keys=True)
        stream.write("\n")


def read_json(path: PathLike) -> Any:
    """
    Read a JSON document.

    Arguments:
        path: The file to read.

    Raises:
        FormatError: When the file is not valid JSON.

    Returns:
        The decoded document.
    """
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise FormatError(f"{path}: invalid JSON: {error}") from error


def dumps_lines(records: Sequence[Any]) -> str:
    """
    Encode records as JSON lines.

    Arguments:
        records: JSON-serializable records.

    Returns:
        One compact JSON document per line.
    """
    buffer = io.StringIO()
    for record in records:
        buffer.write(json.dumps(record, sort_keys=True) + "\n")
    return buffer.getvalue()


def write_rows(path: PathLike, rows: Sequence[Dict[str, Any]], header: Optional[Sequence[str]] = None) -> None:
    """
    Write dictionaries as CSV rows.

    Arguments:
        path: The destination.
        rows: One dictionary per row; `None` values are left empty.
        header: The column names; the keys of the first row when omitted.
    """
    columns = list(header) if header is not None else list(rows[0]) if rows else []
    with atomic_write(path) as stream:
        writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
