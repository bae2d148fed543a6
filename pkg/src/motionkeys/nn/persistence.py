"""XML model files.

Layout::

    <network format="motionkeys-model" version="1" topology="rnn-lstm:6-128-12"
             feature-kind="segment" sequence-shape="50x6">
      <codebook>
        <label index="0">1</label> ...
      </codebook>
      <metadata>
        <item key="scheme">p-t</item> ...
      </metadata>
      <scaler channels="6">              (optional; channels omitted = per column)
        <low>v v v ...</low>
        <high>v v v ...</high>
      </scaler>
      <weights name="input_gates" rows="512" cols="6">v v v ...</weights>
      ...
    </network>

Numbers are written as 17-significant-digit decimals, which read back to the
identical IEEE-754 double.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET

import numpy as np

from ..core import LabelCodebook
from ..features import FEATURE_KINDS, Scaler
from .network import NetworkModel, Topology

FORMAT = "motionkeys-model"
VERSION = "1"


class ModelFormatError(ValueError):
    pass


def _encode(a: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(a, dtype=np.float64).ravel())


def _decode(text: str | None, count: int, what: str) -> np.ndarray:
    try:
        vals = np.array([float(t) for t in (text or "").split()], dtype=np.float64)
    except ValueError:
        raise ModelFormatError(f"{what}: non-numeric value") from None
    if vals.size != count:
        raise ModelFormatError(f"{what}: expected {count} values, found {vals.size}")
    return vals


def to_xml(model: NetworkModel) -> ET.Element:
    root = ET.Element("network", {
        "format": FORMAT,
        "version": VERSION,
        "topology": str(model.topology),
        "feature-kind": model.feature_kind,
    })
    if model.sequence_shape is not None:
        root.set("sequence-shape", "x".join(str(int(v)) for v in model.sequence_shape))
    cb = ET.SubElement(root, "codebook")
    for i, sym in enumerate(model.codebook.alphabet):
        ET.SubElement(cb, "label", index=str(i)).text = sym
    meta = ET.SubElement(root, "metadata")
    for key, value in sorted(model.metadata.items()):
        ET.SubElement(meta, "item", key=key).text = str(value)
    if model.scaler is not None:
        sc = ET.SubElement(root, "scaler")
        if model.scaler.channels:
            sc.set("channels", str(model.scaler.channels))
        ET.SubElement(sc, "low").text = _encode(model.scaler.low)
        ET.SubElement(sc, "high").text = _encode(model.scaler.high)
    for name, w in model.weights.items():
        el = ET.SubElement(root, "weights", name=name, rows=str(w.shape[0]), cols=str(w.shape[1]))
        el.text = _encode(w)
    return root


def save_model(model: NetworkModel, path: os.PathLike | str) -> None:
    tree = ET.ElementTree(to_xml(model))
    ET.indent(tree)
    tree.write(path, encoding="utf-8", xml_declaration=True)


def from_xml(root: ET.Element) -> NetworkModel:
    if root.tag != "network" or root.get("format") != FORMAT:
        raise ModelFormatError("not a motionkeys model file")
    if root.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {root.get('version')!r}")
    try:
        topology = Topology.parse(root.get("topology", ""))
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
    kind = root.get("feature-kind")
    if kind not in FEATURE_KINDS:
        raise ModelFormatError(f"unknown feature kind {kind!r}")
    seq = root.get("sequence-shape")
    sequence_shape = None
    if seq:
        try:
            sequence_shape = tuple(int(v) for v in seq.split("x"))
        except ValueError:
            raise ModelFormatError(f"malformed sequence-shape {seq!r}") from None

    cb_el = root.find("codebook")
    if cb_el is None:
        raise ModelFormatError("missing codebook")
    labels = sorted(((int(el.get("index", -1)), el.text or "") for el in cb_el.findall("label")))
    if [i for i, _ in labels] != list(range(len(labels))):
        raise ModelFormatError("codebook indices are not 0..n-1")
    codebook = LabelCodebook(sym for _, sym in labels)

    metadata = {}
    meta_el = root.find("metadata")
    if meta_el is not None:
        metadata = {el.get("key"): el.text or "" for el in meta_el.findall("item")}

    scaler = None
    sc = root.find("scaler")
    if sc is not None:
        low_el, high_el = sc.find("low"), sc.find("high")
        if low_el is None or high_el is None:
            raise ModelFormatError("scaler needs low and high")
        n = len((low_el.text or "").split())
        channels = int(sc.get("channels")) if sc.get("channels") else None
        scaler = Scaler(_decode(low_el.text, n, "scaler low"), _decode(high_el.text, n, "scaler high"), channels)

    shapes = topology.weight_shapes()
    weights = {}
    for el in root.findall("weights"):
        name = el.get("name")
        if name not in shapes:
            raise ModelFormatError(f"unexpected weights {name!r} for {topology}")
        rows, cols = int(el.get("rows", -1)), int(el.get("cols", -1))
        if (rows, cols) != shapes[name]:
            raise ModelFormatError(f"weights {name}: shape {(rows, cols)} does not match {topology}")
        weights[name] = _decode(el.text, rows * cols, f"weights {name}").reshape(rows, cols)
    missing = set(shapes) - set(weights)
    if missing:
        raise ModelFormatError(f"missing weights {sorted(missing)}")
    try:
        return NetworkModel(topology, weights, codebook, kind, sequence_shape, scaler, metadata)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def load_model(path: os.PathLike | str) -> NetworkModel:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    return from_xml(root)
