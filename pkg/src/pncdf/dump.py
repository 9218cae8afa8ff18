"""CDL-style text dump of a classic file (a small ncdump work-alike)."""
from __future__ import annotations

import os

import numpy as np

from .access import AccessRequest, flatten_file
from .codec import MemoryType, decode_values
from .format import Attribute, ExternalType, Schema, decode_header

_SUFFIX = {ExternalType.BYTE: "b", ExternalType.SHORT: "s", ExternalType.INT: "",
           ExternalType.FLOAT: "f", ExternalType.DOUBLE: ""}


def format_number(value, etype: ExternalType) -> str:
    if etype == ExternalType.DOUBLE:
        return f"{float(value):.17g}"
    if etype == ExternalType.FLOAT:
        return f"{float(value):.9g}"
    return str(int(value))


def _quote(raw: bytes) -> str:
    text = raw.rstrip(b"\x00").decode("utf-8", errors="backslashreplace")
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _format_att(att: Attribute) -> str:
    if att.type == ExternalType.CHAR:
        return _quote(att.values)
    suffix = _SUFFIX[att.type]
    return ", ".join(format_number(v, att.type) + suffix for v in att.values)


def _data_lines(schema: Schema, var, raw: bytes) -> list:
    shape = schema.shape(var)
    if var.type == ExternalType.CHAR:
        chars = np.frombuffer(raw, dtype="S1")
        if not shape:
            return [_quote(bytes(chars))]
        rows = chars.reshape(-1, shape[-1]) if chars.size else chars.reshape(0, 1)
        return [_quote(b"".join(r.tolist())) for r in rows]
    values = decode_values(var.type, MemoryType.for_external(var.type), raw)
    if not shape:
        return [format_number(values[0], var.type)]
    rows = values.reshape(-1, shape[-1]) if values.size else values.reshape(0, 1)
    return [", ".join(format_number(v, var.type) for v in row) for row in rows]


def dump_schema(schema: Schema, name: str) -> list:
    lines = [f"netcdf {name} {{"]
    if schema.dimensions:
        lines.append("dimensions:")
        for d in schema.dimensions:
            if d.is_unlimited:
                lines.append(f"\t{d.name} = UNLIMITED ; // ({schema.numrecs} currently)")
            else:
                lines.append(f"\t{d.name} = {d.length} ;")
    if schema.variables:
        lines.append("variables:")
        for v in schema.variables:
            dims = ", ".join(schema.dimensions[d].name for d in v.dim_ids)
            lines.append(f"\t{v.type.cdl_name} {v.name}" + (f"({dims})" if dims else "") + " ;")
            for att in v.attributes:
                lines.append(f"\t\t{v.name}:{att.name} = {_format_att(att)} ;")
    if schema.global_attributes:
        lines.append("")
        lines.append("// global attributes:")
        for att in schema.global_attributes:
            lines.append(f"\t\t:{att.name} = {_format_att(att)} ;")
    return lines


def dump(path, header_only: bool = False, var: str | None = None) -> str:
    """Deterministic text rendering of the file at ``path``.

    Decode errors propagate unchanged; their ``offset`` attribute gives the
    byte position of the failure.
    """
    with open(path, "rb") as f:
        content = f.read()
    schema = decode_header(content)
    name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    lines = dump_schema(schema, name)
    if not header_only and schema.variables:
        selected = schema.variables
        if var is not None:
            selected = [v for v in schema.variables if v.name == var]
            if not selected:
                raise KeyError(f"no variable named {var!r}")
        lines.append("data:")
        for v in selected:
            shape = schema.shape(v)
            req = AccessRequest(v.var_id, (0,) * len(shape), shape)
            raw = bytearray()
            for off, n in flatten_file(schema, req):
                chunk = content[off:off + n]
                raw += chunk + b"\x00" * (n - len(chunk))
            lines.append("")
            body = _data_lines(schema, v, bytes(raw))
            if not body:
                lines.append(f" {v.name} = ;")
                continue
            lines.append(f" {v.name} =")
            for i, row in enumerate(body):
                lines.append(f"  {row}" + (" ;" if i == len(body) - 1 else ","))
    lines.append("}")
    return "\n".join(lines) + "\n"
