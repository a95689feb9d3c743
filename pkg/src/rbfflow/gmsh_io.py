"""Reader for legacy ASCII mesh files (version 2 $Nodes/$Elements format).

Mesh vertices become scattered points; nodes referenced by boundary line
elements are flagged as boundary points with outward normals averaged from
their adjacent segments. Triangles, when present, orient the normals (away
from the opposite vertex) and provide the flow area; otherwise orientation
falls back to pointing away from the node centroid and the area to the
shoelace formula over the traced boundary loops.
"""

from __future__ import annotations

import math

import numpy as np

from .cloud import PointCloud, FLAG_BOUNDARY, FLAG_INTERIOR
from .io_utils import atomic_write_text


class MeshFormatError(ValueError):
    pass


def _read_sections(text: str) -> dict:
    sections = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            end = f"$End{name}"
            body = []
            i += 1
            while i < len(lines) and lines[i].strip() != end:
                body.append(lines[i])
                i += 1
            if i >= len(lines):
                raise MeshFormatError(f"unterminated section ${name}")
            sections[name] = body
        i += 1
    return sections


def import_msh(path) -> PointCloud:
    """Load a legacy v2 ASCII mesh as a PointCloud."""
    with open(path) as fh:
        text = fh.read()
    sections = _read_sections(text)

    fmt = sections.get("MeshFormat")
    if not fmt:
        raise MeshFormatError("missing $MeshFormat section")
    version = fmt[0].split()[0]
    if not version.startswith("2"):
        raise MeshFormatError(
            f"unsupported mesh format version {version}; expected legacy 2.x")

    body = sections.get("Nodes")
    if not body:
        raise MeshFormatError("missing $Nodes section")
    try:
        n_nodes = int(body[0].split()[0])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("malformed node count line") from exc
    if len(body) - 1 != n_nodes:
        raise MeshFormatError(
            f"node count {n_nodes} does not match {len(body) - 1} node lines")
    ids = np.empty(n_nodes, dtype=np.int64)
    pts = np.empty((n_nodes, 2))
    for row, line in enumerate(body[1:]):
        parts = line.split()
        if len(parts) < 4:
            raise MeshFormatError(f"malformed node line: {line!r}")
        ids[row] = int(parts[0])
        pts[row] = (float(parts[1]), float(parts[2]))
    id_to_row = {int(i): r for r, i in enumerate(ids)}

    segments = []
    triangles = []
    body = sections.get("Elements", ["0"])
    try:
        n_elem = int(body[0].split()[0])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError("malformed element count line") from exc
    if len(body) - 1 != n_elem:
        raise MeshFormatError(
            f"element count {n_elem} does not match {len(body) - 1} element lines")
    for line in body[1:]:
        parts = [int(v) for v in line.split()]
        etype, ntags = parts[1], parts[2]
        conn = parts[3 + ntags:]
        if etype == 1:
            segments.append(conn)
        elif etype == 2:
            triangles.append(conn)
        # other element types (points, quads) are ignored

    def row_of(node_id: int, context: str) -> int:
        if node_id not in id_to_row:
            raise MeshFormatError(
                f"{context} references unknown node id {node_id} (dangling tag)")
        return id_to_row[node_id]

    seg_rows = [(row_of(a, "boundary segment"), row_of(b, "boundary segment"))
                for a, b in segments]
    tri_rows = [tuple(row_of(v, "triangle") for v in tri) for tri in triangles]

    n = n_nodes
    flags = np.full(n, FLAG_INTERIOR, dtype=np.int8)
    normals = np.zeros((n, 2))

    # map each undirected edge to the opposite vertex of an adjacent triangle
    edge_opposite = {}
    for a, b, c in tri_rows:
        for e, opp in (((a, b), c), ((b, c), a), ((c, a), b)):
            edge_opposite[frozenset(e)] = opp

    centroid = pts.mean(axis=0)
    for a, b in seg_rows:
        flags[a] = flags[b] = FLAG_BOUNDARY
        tang = pts[b] - pts[a]
        nrm = np.array([tang[1], -tang[0]])
        ln = np.linalg.norm(nrm)
        if ln == 0:
            raise MeshFormatError(f"zero-length boundary segment {a}-{b}")
        nrm /= ln
        opp = edge_opposite.get(frozenset((a, b)))
        ref = pts[opp] if opp is not None else centroid
        mid = 0.5 * (pts[a] + pts[b])
        if np.dot(nrm, mid - ref) < 0:
            nrm = -nrm
        normals[a] += nrm
        normals[b] += nrm

    bidx = np.flatnonzero(flags == FLAG_BOUNDARY)
    for i in bidx:
        ln = np.linalg.norm(normals[i])
        if ln == 0:
            raise MeshFormatError(f"could not orient normal for boundary node {i}")
        normals[i] /= ln

    if tri_rows:
        tri = np.array(tri_rows)
        v0, v1, v2 = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
        area = float(0.5 * np.abs(np.cross(v1 - v0, v2 - v0)).sum())
    elif seg_rows:
        area = _loop_area(pts, seg_rows)
    else:
        span = pts.max(axis=0) - pts.min(axis=0)
        area = float(span[0] * span[1]) if n > 1 else 1.0

    spacing = math.sqrt(area / n) if n else 1.0
    ext = (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    return PointCloud(points=pts, flags=flags, normals=normals,
                      groups=np.zeros(n, dtype=np.int64), spacing=spacing,
                      area=area, extents=ext)


def _loop_area(pts, seg_rows) -> float:
    """Shoelace area of boundary loops traced from segments (holes subtract)."""
    adj = {}
    for a, b in seg_rows:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    unused = {tuple(sorted(s)) for s in seg_rows}
    total = 0.0
    while unused:
        start, nxt = min(unused)
        loop = [start]
        prev, node = start, nxt
        unused.discard((min(start, nxt), max(start, nxt)))
        while node != start:
            loop.append(node)
            cands = [v for v in adj[node]
                     if v != prev and (min(node, v), max(node, v)) in unused]
            if not cands:
                break
            prev, node = node, cands[0]
            unused.discard((min(prev, node), max(prev, node)))
        xy = pts[loop]
        total += 0.5 * np.cross(xy, np.roll(xy, -1, axis=0)).sum()
    # loops traced with arbitrary orientation: the outer loop dominates,
    # holes carry opposite signed area only if consistently oriented; use abs
    return abs(total)


def export_msh(path, cloud: PointCloud) -> None:
    """Write a cloud back to the legacy v2 format (nodes + boundary segments).

    Boundary segments are reconstructed by linking each boundary node to its
    two nearest boundary neighbors, which is adequate for the sampled loops
    produced by the generator; used for round-trip tests and debugging.
    """
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    n = cloud.n_points
    lines.append("$Nodes")
    lines.append(str(n))
    for i in range(n):
        x, y = cloud.points[i]
        lines.append(f"{i + 1} {x!r} {y!r} 0.0")
    lines.append("$EndNodes")

    bidx = cloud.boundary_idx
    segments = []
    if bidx.size >= 2:
        from scipy.spatial import cKDTree

        bpts = cloud.points[bidx]
        tree = cKDTree(bpts)
        k = min(3, len(bidx))
        _, nn = tree.query(bpts, k=k)
        seen = set()
        for local, row in enumerate(nn):
            for j in row[1:]:
                edge = (min(local, int(j)), max(local, int(j)))
                if edge not in seen:
                    seen.add(edge)
                    segments.append((bidx[edge[0]] + 1, bidx[edge[1]] + 1))
    lines.append("$Elements")
    lines.append(str(len(segments)))
    for e, (a, b) in enumerate(segments):
        lines.append(f"{e + 1} 1 2 1 1 {a} {b}")
    lines.append("$EndElements")
    atomic_write_text(path, "\n".join(lines) + "\n")
