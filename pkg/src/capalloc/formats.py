"""JSON wire formats for instances, streams and solver output.

Instance::

    {"producers": m, "capacities": [c_1, ...], "distances": [[d_11, ...], ...]}

Stream (producer indices are 0-based on the wire; ``"random"`` asks the engine
to draw the producer)::

    {"requests": [{"t": 1, "producer": 0, "size": 3}, ...]}

Integral distances are written as JSON integers, everything else as an exact
``"p/q"`` string.  Decimal literals on input (``2.5``) are parsed exactly.
"""

from __future__ import annotations

import json
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from .model import Instance, Request, RequestStream, as_fraction


def encode_number(x):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def decode_number(raw) -> Fraction:
    if isinstance(raw, Decimal):
        return Fraction(raw)
    if isinstance(raw, (int, str, Fraction)) and not isinstance(raw, bool):
        return as_fraction(raw)
    raise ValueError(f"not a number: {raw!r}")


def loads_json(text: str):
    return json.loads(text, parse_float=Decimal)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "producers": inst.m,
        "capacities": list(inst.capacities),
        "distances": [[encode_number(d) for d in row] for row in inst.distances],
    }


def instance_from_dict(data: dict) -> Instance:
    try:
        distances = [[decode_number(d) for d in row] for row in data["distances"]]
        capacities = data["capacities"]
        m = data.get("producers", len(distances))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance: {exc}") from exc
    if any(not isinstance(c, int) or isinstance(c, bool) for c in capacities):
        raise ValueError("capacities must be integers")
    return Instance(int(m), len(capacities), capacities, distances)


def stream_to_dict(stream: RequestStream) -> dict:
    return {
        "requests": [
            {"t": q.t, "producer": "random" if q.producer is None else q.producer, "size": q.size}
            for q in stream.requests
        ]
    }


def stream_from_dict(data: dict) -> RequestStream:
    requests = []
    try:
        for item in data["requests"]:
            producer = item.get("producer", "random")
            if producer == "random" or producer is None:
                producer = None
            elif not isinstance(producer, int) or isinstance(producer, bool):
                raise ValueError(f"bad producer {producer!r}")
            size = item["size"]
            if not isinstance(size, int) or isinstance(size, bool):
                raise ValueError(f"size must be an integer, got {size!r}")
            requests.append(Request(int(item["t"]), producer, size))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed stream: {exc}") from exc
    return RequestStream(tuple(requests))


def dumps(data) -> str:
    return json.dumps(data, indent=2, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, Fraction):
        return encode_number(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_instance(path) -> Instance:
    return instance_from_dict(loads_json(Path(path).read_text()))


def read_stream(path) -> RequestStream:
    return stream_from_dict(loads_json(Path(path).read_text()))


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def write_stream(stream: RequestStream, path) -> None:
    Path(path).write_text(dumps(stream_to_dict(stream)))
