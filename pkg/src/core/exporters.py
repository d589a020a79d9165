"""
结果导出模块

CSV tables of study records, gnuplot scripts for them, legacy VTK meshes
with per-cell data and Matrix Market dumps of assembled matrices.
"""

import csv
import logging
import os

import numpy as np
from scipy import io as spio

logger = logging.getLogger(__name__)

# VTK legacy cell type of a linear tetrahedron
_VTK_TETRA = 10


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def format_value(value):
    """Shortest round-trip text for floats, lower-case booleans, plain ints."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def parse_value(text):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path, header, rows):
    """
    Write rows (sequences aligned with `header`) to a CSV file.

    Args:
        path: Output file
        header: Column names
        rows: Iterable of row sequences
    """
    _ensure_parent(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info(f"CSV 已写入: {path} ({count} 行)")


def read_csv(path):
    """
    Read a CSV written by write_csv.

    Returns:
        tuple: (header list, list of dict rows with parsed values)
    """
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [dict(zip(header, (parse_value(v) for v in row))) for row in reader if row]
    return header, rows


_GNUPLOT_TEMPLATES = {
    "pollution": """\
# relative energy error vs wave number at fixed DOFs per wavelength
set datafile separator ','
set key autotitle columnhead
set logscale x
set xlabel 'kappa'
set ylabel 'relative error'
set terminal pngcairo size 900,600
set output '{stem}.png'
plot for [p=1:3] '{csv}' using (column('p')==p ? column('kappa') : 1/0):'rel_energy_sol' \\
         with linespoints title sprintf('solution p=%d', p), \\
     for [p=1:3] '{csv}' using (column('p')==p ? column('kappa') : 1/0):'rel_energy_interp' \\
         with lines dashtype 2 title sprintf('interpolant p=%d', p)
""",
    "convergence": """\
# relative errors vs DOFs per wavelength
set datafile separator ','
set key autotitle columnhead
set logscale xy
set xlabel 'N_lambda'
set ylabel 'relative error'
set terminal pngcairo size 900,600
set output '{stem}.png'
plot for [p=1:3] '{csv}' using (column('p')==p ? column('nlambda') : 1/0):'rel_energy_sol' \\
         with linespoints title sprintf('energy, solution p=%d', p), \\
     for [p=1:3] '{csv}' using (column('p')==p ? column('nlambda') : 1/0):'rel_energy_interp' \\
         with lines dashtype 2 title sprintf('energy, interpolant p=%d', p), \\
     for [p=1:3] '{csv}' using (column('p')==p ? column('nlambda') : 1/0):'rel_l2_sol' \\
         with linespoints title sprintf('L2, solution p=%d', p)
""",
    "stability": """\
# stability quotient vs wave number
set datafile separator ','
set logscale x
set xlabel 'kappa'
set ylabel 'stability ratio'
set yrange [0:*]
set terminal pngcairo size 900,600
set output '{stem}.png'
plot '{csv}' using 'kappa':'stab_ratio' with linespoints title 'p=1'
""",
}


def write_gnuplot_script(csv_path, kind):
    """
    Write a gnuplot script next to a study CSV.

    Args:
        csv_path: CSV file the script plots
        kind: 'pollution', 'convergence' or 'stability'

    Returns:
        str: Path of the written .gp file
    """
    template = _GNUPLOT_TEMPLATES.get(kind, _GNUPLOT_TEMPLATES["convergence"])
    stem = os.path.splitext(csv_path)[0]
    script_path = stem + ".gp"
    with open(script_path, 'w', encoding='utf-8') as f:
        f.write(template.format(stem=os.path.basename(stem), csv=os.path.basename(csv_path)))
    logger.info(f"gnuplot 脚本已写入: {script_path}")
    return script_path


def write_vtk(path, mesh, cell_data=None, title="maxwell_eem field"):
    """
    Write the mesh as a legacy ASCII VTK unstructured grid.

    Args:
        path: Output .vtk file
        mesh: Mesh
        cell_data: Optional dict name -> real array of length n_tets
        title: Header line
    """
    cell_data = cell_data or {}
    for name, values in cell_data.items():
        if len(values) != mesh.n_tets:
            raise ValueError(f"单元数据 {name} 长度 {len(values)} 与单元数 {mesh.n_tets} 不符")
    _ensure_parent(path)
    with open(path, 'w', encoding='ascii') as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_vertices} double\n")
        np.savetxt(f, mesh.vertices, fmt="%.17g")
        f.write(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}\n")
        np.savetxt(f, np.hstack([np.full((mesh.n_tets, 1), 4), mesh.tets]), fmt="%d")
        f.write(f"CELL_TYPES {mesh.n_tets}\n")
        np.savetxt(f, np.full(mesh.n_tets, _VTK_TETRA), fmt="%d")
        if cell_data:
            f.write(f"CELL_DATA {mesh.n_tets}\n")
            for name, values in cell_data.items():
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                np.savetxt(f, np.asarray(values, dtype=float), fmt="%.17g")
    logger.info(f"VTK 文件已写入: {path}")


def write_matrix_market(path, matrix, comment=""):
    """Dump a sparse matrix in Matrix Market coordinate format (complex general)."""
    _ensure_parent(path)
    spio.mmwrite(path, matrix, comment=comment, field='complex', symmetry='general')
    logger.info(f"矩阵已写入: {path}")
