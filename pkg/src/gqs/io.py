"""JSON state files (format ``gqs-1``) and serializers.

Complex numbers are always ``[re, im]`` pairs; matrices are
``{"dim": D, "matrix": [[[re, im], ...], ...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .canonical import CanonicalSpec, canonical_grid_state, canonical_sampler
from .errors import InvariantError, SchemaError
from .gstate import (
    DeltaMixture,
    GeometricState,
    GridDensity,
    SampleEnsemble,
    fs_uniform_samples,
    gaussian_inverse_density,
    uniform_grid_density,
)
from .hybrid import (
    HybridDecomposition,
    HybridState,
    RegionGrid,
    box_embedding,
    decompose,
    pushforward_measure,
)
from .manifold import PureStatePoint, ProbPhasePoint, from_prob_phase, fs_uniform_grid
from .observables import DensityMatrix, Observable, validate_povm, Povm
from .thermo import BipartitePureState, LabeledEnsemble, geometric_state_of, reduce

FORMAT_VERSION = "gqs-1"

_complex = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_vector = {"type": "array", "items": _complex, "minItems": 1}
_matrix = {
    "type": "object",
    "required": ["matrix"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "matrix": {"type": "array", "items": _vector, "minItems": 1},
    },
}
_coords = {
    "type": "object",
    "required": ["p", "nu"],
    "properties": {
        "p": {"type": "array", "items": {"type": "number"}},
        "nu": {"type": "array", "items": {"type": "number"}},
    },
}
_atom = {
    "type": "object",
    "required": ["weight"],
    "properties": {"weight": {"type": "number", "exclusiveMinimum": 0}, "point": _vector, "coords": _coords},
    "oneOf": [{"required": ["point"]}, {"required": ["coords"]}],
}
_positive_int = {"type": "integer", "minimum": 1}

_KIND_SCHEMAS = {
    "delta": {
        "required": ["atoms"],
        "properties": {"atoms": {"type": "array", "items": _atom, "minItems": 1}},
    },
    "grid": {
        "required": ["dim", "bins_p", "bins_phase"],
        "properties": {
            "dim": {"type": "integer", "minimum": 2},
            "bins_p": _positive_int,
            "bins_phase": _positive_int,
            "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "generator": {
                "type": "object",
                "required": ["name"],
                "properties": {"name": {"enum": ["uniform", "rho_gaussian"]}, "rho": _matrix},
            },
        },
        "oneOf": [{"required": ["values"]}, {"required": ["generator"]}],
    },
    "samples": {
        "properties": {
            "dim": {"type": "integer", "minimum": 2},
            "points": {"type": "array", "items": _vector, "minItems": 1},
            "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "seed": {"type": "integer"},
            "generator": {
                "type": "object",
                "required": ["name", "n", "seed"],
                "properties": {"name": {"enum": ["fs_uniform"]}, "n": _positive_int, "seed": {"type": "integer"}},
            },
        },
        "oneOf": [{"required": ["points"]}, {"required": ["generator", "dim"]}],
    },
    "canonical": {
        "required": ["hamiltonian", "beta"],
        "properties": {
            "hamiltonian": _matrix,
            "beta": {"type": "number", "minimum": 0},
            "grid": _positive_int,
            "bins_phase": _positive_int,
            "samples": _positive_int,
            "seed": {"type": "integer"},
        },
    },
    "hybrid": {
        "properties": {
            "axes": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 1},
            "psi": {"type": "array", "items": _vector},
            "box": {
                "type": "object",
                "required": ["x0", "x1", "y0", "y1"],
                "properties": {
                    "x0": {"type": "number"},
                    "x1": {"type": "number"},
                    "y0": {"type": "number"},
                    "y1": {"type": "number"},
                    "shape": {"type": "array", "items": _positive_int, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "oneOf": [{"required": ["axes", "psi"]}, {"required": ["box"]}],
    },
    "bipartite": {
        "required": ["psi"],
        "properties": {
            "d_s": _positive_int,
            "psi": {"oneOf": [_vector, {"type": "array", "items": _vector, "minItems": 1}]},
        },
    },
}

STATE_SCHEMA = {
    "type": "object",
    "required": ["version", "kind"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "kind": {"enum": sorted(_KIND_SCHEMAS)},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": kind}}}, "then": schema}
        for kind, schema in _KIND_SCHEMAS.items()
    ],
}


def _validate(doc, schema, what: str):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{what}: {exc.message} at {where}") from None


def read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None


# --- primitive encoders -----------------------------------------------------


def complex_array_to_json(arr) -> list:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_array_to_json(a) for a in arr]


def complex_array_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise SchemaError("complex numbers must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_json(m) -> dict:
    m = np.asarray(m)
    return {"dim": int(m.shape[0]), "matrix": complex_array_to_json(m)}


def matrix_from_json(doc) -> np.ndarray:
    _validate(doc, _matrix, "matrix")
    m = complex_array_from_json(doc["matrix"])
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SchemaError(f"matrix must be square, got shape {m.shape}")
    if "dim" in doc and doc["dim"] != m.shape[0]:
        raise SchemaError(f"matrix dim field {doc['dim']} does not match shape {m.shape}")
    return m


def observable_from_json(doc) -> Observable:
    return Observable(matrix_from_json(doc))


def povm_from_json(doc) -> Povm:
    """``{"effects": [matrix, ...]}`` or a bare list of matrices."""
    effects = doc["effects"] if isinstance(doc, dict) and "effects" in doc else doc
    if not isinstance(effects, list) or not effects:
        raise SchemaError("POVM must be a non-empty list of effect matrices")
    return validate_povm([matrix_from_json(e) for e in effects])


def density_matrix_to_json(rho: DensityMatrix) -> dict:
    w, v = rho.eigh()
    return {
        **matrix_to_json(rho.matrix),
        "eigenvalues": [float(x) for x in w],
        "eigenvectors": [PureStatePoint(v[:, i]).to_json() for i in range(v.shape[1])],
    }


# --- geometric states -------------------------------------------------------


def geometric_state_to_json(state: GeometricState) -> dict:
    base = {"version": FORMAT_VERSION}
    if isinstance(state, DeltaMixture):
        return {
            **base,
            "kind": "delta",
            "dim": state.dim,
            "atoms": [
                {"weight": float(w), "point": complex_array_to_json(z)}
                for w, z in zip(state.weights, state.amplitudes)
            ],
        }
    if isinstance(state, GridDensity):
        g = state.grid
        return {
            **base,
            "kind": "grid",
            "dim": g.dim,
            "bins_p": g.bins_p,
            "bins_phase": g.bins_phase,
            "values": [float(x) for x in state.values],
        }
    if isinstance(state, SampleEnsemble):
        doc = {**base, "kind": "samples", "dim": state.dim, "points": complex_array_to_json(state.amplitudes)}
        if state.weights is not None:
            doc["weights"] = [float(x) for x in state.weights]
        if state.rng_seed is not None:
            doc["seed"] = int(state.rng_seed)
        if state.info:
            doc["info"] = state.info
        return doc
    raise TypeError(f"not a geometric state: {type(state).__name__}")


@dataclass(frozen=True)
class CanonicalRequest:
    spec: CanonicalSpec
    bins_p: int | None = None
    bins_phase: int | None = None
    n_samples: int | None = None
    seed: int = 0

    def realize(self) -> GeometricState:
        if self.n_samples is not None:
            return canonical_sampler(self.spec, self.n_samples, self.seed)
        return canonical_grid_state(self.spec, self.bins_p or 256, self.bins_phase)


def _load_delta(doc) -> DeltaMixture:
    atoms = []
    for a in doc["atoms"]:
        if "point" in a:
            pt = PureStatePoint(complex_array_from_json(a["point"]))
        else:
            pt = from_prob_phase(ProbPhasePoint(a["coords"]["p"], a["coords"]["nu"]))
        atoms.append((float(a["weight"]), pt))
    return DeltaMixture.from_atoms(atoms)


def _load_grid(doc) -> GridDensity:
    dim, bp, bn = doc["dim"], doc["bins_p"], doc["bins_phase"]
    if "values" in doc:
        return GridDensity(fs_uniform_grid(dim, bp, bn), np.asarray(doc["values"], float))
    gen = doc["generator"]
    if gen["name"] == "uniform":
        return uniform_grid_density(dim, bp, bn)
    if "rho" not in gen:
        raise SchemaError("rho_gaussian generator needs a 'rho' matrix")
    rho = DensityMatrix(matrix_from_json(gen["rho"]))
    if rho.dim != dim:
        raise SchemaError(f"generator rho has dim {rho.dim}, state has dim {dim}")
    return gaussian_inverse_density(rho, bp, bn)


def _load_samples(doc) -> SampleEnsemble:
    if "points" in doc:
        pts = complex_array_from_json(doc["points"])
        w = np.asarray(doc["weights"], float) if "weights" in doc else None
        return SampleEnsemble(pts, w, doc.get("seed"))
    gen = doc["generator"]
    return fs_uniform_samples(doc["dim"], gen["n"], gen["seed"])


def _load_hybrid(doc) -> HybridDecomposition:
    if "box" in doc:
        b = doc["box"]
        return box_embedding(b["x0"], b["x1"], b["y0"], b["y1"], tuple(b.get("shape", (128, 128))))
    region = RegionGrid(tuple(np.asarray(a, float) for a in doc["axes"]))
    psi = complex_array_from_json(doc["psi"])
    return decompose(HybridState(region, psi))


def _load_bipartite(doc) -> BipartitePureState:
    psi = complex_array_from_json(doc["psi"])
    if psi.ndim == 1:
        if "d_s" not in doc:
            raise SchemaError("flat bipartite psi needs 'd_s'")
        return BipartitePureState.from_vector(psi, doc["d_s"])
    if "d_s" in doc and doc["d_s"] != psi.shape[0]:
        raise SchemaError(f"d_s = {doc['d_s']} does not match psi with {psi.shape[0]} rows")
    return BipartitePureState(psi)


def load_state(doc):
    """Validate a ``gqs-1`` document and build the object it describes.

    Returns a geometric state for ``delta``/``grid``/``samples``, a
    :class:`CanonicalRequest`, a :class:`HybridDecomposition`, or a
    :class:`BipartitePureState`.
    """
    if isinstance(doc, dict) and "version" in doc and doc["version"] != FORMAT_VERSION:
        raise SchemaError(f"unsupported format version {doc['version']!r} (expected {FORMAT_VERSION!r})")
    _validate(doc, STATE_SCHEMA, "state file")
    kind = doc["kind"]
    if kind == "delta":
        return _load_delta(doc)
    if kind == "grid":
        return _load_grid(doc)
    if kind == "samples":
        return _load_samples(doc)
    if kind == "canonical":
        spec = CanonicalSpec(observable_from_json(doc["hamiltonian"]), doc["beta"])
        return CanonicalRequest(spec, doc.get("grid"), doc.get("bins_phase"), doc.get("samples"), doc.get("seed", 0))
    if kind == "hybrid":
        return _load_hybrid(doc)
    return _load_bipartite(doc)


def as_geometric_state(obj) -> GeometricState:
    """Geometric state on the discrete factor for any loaded state object."""
    if isinstance(obj, (DeltaMixture, GridDensity, SampleEnsemble)):
        return obj
    if isinstance(obj, CanonicalRequest):
        return obj.realize()
    if isinstance(obj, HybridDecomposition):
        return pushforward_measure(obj)
    if isinstance(obj, BipartitePureState):
        return geometric_state_of(reduce(obj))
    raise InvariantError(f"cannot view {type(obj).__name__} as a geometric state")


def decomposition_to_json(dec: HybridDecomposition) -> dict:
    return {
        "axes": [a.tolist() for a in dec.region.axes],
        "f": complex_array_to_json(dec.f),
        "p": dec.p.tolist(),
        "phi": dec.phi.tolist(),
    }


def labeled_ensemble_to_json(ens: LabeledEnsemble) -> dict:
    return {
        "d_s": ens.d_s,
        "d_e": ens.d_e,
        "entries": [
            {"label": int(a), "weight": float(w), "chi": complex_array_to_json(chi)}
            for a, w, chi in zip(ens.labels, ens.weights, ens.states)
        ],
        "empty_labels": list(ens.empty_labels),
    }
