"""
Writing study results: convergence tables as CSV and extracted
surfaces as legacy ASCII VTK files.

CSV columns are h,eps,E1,eoc1,E2,eoc2,E3,eoc3,E4,eoc4. Spacings and
errors are printed in scientific notation with three fractional digits,
ε with four significant digits and orders with two decimals; the first
row's orders are '-'.
"""
import csv
import io
import pathlib
from typing import TextIO

from analysis import ERROR_NAMES, ConvergenceRow, ConvergenceTable
from isosurface import TriangleSurface


CSV_HEADER = ("h", "eps") + tuple(
    column for index, name in enumerate(ERROR_NAMES, 1)
    for column in (name, f"eoc{index}"))
MISSING_ORDER = "-"
VTK_TITLE = "u_h on the zero level surface of I_h phi"
VTK_TRIANGLE = 5


def format_row(row: ConvergenceRow) -> list[str]:
    """CSV fields of one table row."""
    fields = [f"{row.h:.3e}", f"{row.epsilon:.4g}"]
    for error, order in zip(row.errors, row.eocs):
        fields.append(f"{error:.3e}")
        fields.append(MISSING_ORDER if order is None else f"{order:.2f}")
    return fields


def write_csv(table: ConvergenceTable, target: str | pathlib.Path | TextIO):
    """Writes the table to a path or an open text stream."""
    if isinstance(target, (str, pathlib.Path)):
        with open(target, "w", encoding="utf8", newline="") as file:
            write_csv(table, file)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in table.rows:
        writer.writerow(format_row(row))


def table_to_csv(table: ConvergenceTable) -> str:
    buffer = io.StringIO()
    write_csv(table, buffer)
    return buffer.getvalue()


def read_csv(source: str | pathlib.Path) -> list[ConvergenceRow]:
    """Parses rows from a CSV file written by `write_csv`."""
    with open(source, encoding="utf8", newline="") as file:
        reader = csv.reader(file)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"Unexpected CSV header {header}.")
        rows = []
        for fields in reader:
            if len(fields) != len(CSV_HEADER):
                raise ValueError(f"Malformed CSV row {fields}.")
            errors = tuple(float(value) for value in fields[2::2])
            orders = tuple(
                None if value == MISSING_ORDER else float(value)
                for value in fields[3::2])
            rows.append(ConvergenceRow(
                float(fields[0]), float(fields[1]), errors, orders))
    return rows


def write_vtk(surface: TriangleSurface, path: str | pathlib.Path) -> None:
    """
    Writes a triangle surface as a legacy ASCII VTK unstructured grid
    with the point scalar field u_h.
    """
    lines = [
        "# vtk DataFile Version 3.0", VTK_TITLE, "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(surface.points)} double"]
    lines.extend(" ".join(f"{x:.12g}" for x in point)
                 for point in surface.points)
    count = len(surface.triangles)
    lines.append(f"CELLS {count} {4 * count}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in surface.triangles)
    lines.append(f"CELL_TYPES {count}")
    lines.extend([str(VTK_TRIANGLE)] * count)
    lines.append(f"POINT_DATA {len(surface.points)}")
    lines.append("SCALARS u_h double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(f"{value:.12g}" for value in surface.values)
    pathlib.Path(path).write_text("\n".join(lines) + "\n", encoding="utf8")
