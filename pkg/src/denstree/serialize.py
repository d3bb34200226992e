"""Versioned JSON serialization for every model kind.

Floats round-trip exactly (shortest-decimal rendering), boxes are
reconstructed from the root box and the recorded splits, and leaf masses
are recomputed from the recorded branch shares, so a decoded model
evaluates bit-identically to the original.
"""

from __future__ import annotations

import json

import numpy as np

from .bayesnet import FactoredModel, GaussianMixtureModel, NetworkStructure
from .conditional import (
    ApproxCondModel,
    AuxLeaf,
    AuxTree,
    CartModel,
    ConditionalSpec,
    JointModel,
    SmoothedConditional,
    StratifiedModel,
)
from .errors import ModelFormatError
from .leaves import (
    DiagGaussianPart,
    LeafDistribution,
    LinearInterpPart,
    LinRegGaussianPart,
    MultilinearInterpPart,
    UniformPart,
)
from .schema import VariableSchema
from .tree import ContinuousBranch, DensityTree, DiscreteBranch, Leaf, SmoothedTree, is_leaf

FORMAT_NAME = "denstree-model"
FORMAT_VERSION = 1


def _enc_dist(dist):
    obj = {}
    if dist.disc_probs:
        cols = sorted(dist.disc_probs)
        obj["disc"] = {
            "cols": cols,
            "values": [list(map(int, dist.disc_values[c])) for c in cols],
            "probs": [list(map(float, dist.disc_probs[c])) for c in cols],
        }
    part = dist.cont
    if part is None:
        obj["family"] = "none"
    elif isinstance(part, UniformPart):
        obj.update(family="uniform", dims=list(part.dims))
    elif isinstance(part, DiagGaussianPart):
        obj.update(family="gauss", dims=list(part.dims), mean=list(map(float, part.mean)), std=list(map(float, part.std)))
    elif isinstance(part, LinRegGaussianPart):
        obj.update(
            family="linreg",
            child=part.child,
            parents=list(part.parent_dims),
            coefs=list(map(float, part.coefs)),
            intercept=part.intercept,
            std=part.std,
            fallback=part.constant_fallback,
        )
    elif isinstance(part, LinearInterpPart):
        obj.update(family="linear", dims=list(part.dims), weights=[list(map(float, w)) for w in part.weights])
    elif isinstance(part, MultilinearInterpPart):
        obj.update(family="multilinear", dims=list(part.dims), weights=list(map(float, part.weights)))
    else:
        raise ModelFormatError(f"cannot encode leaf part {type(part).__name__}")
    return obj


def _dec_dist(obj, where):
    try:
        disc_values, disc_probs = {}, {}
        if "disc" in obj:
            d = obj["disc"]
            for c, vals, probs in zip(d["cols"], d["values"], d["probs"]):
                disc_values[int(c)] = tuple(int(v) for v in vals)
                disc_probs[int(c)] = np.asarray(probs, dtype=np.float64)
        fam = obj["family"]
        cont = None
        if fam == "uniform":
            cont = UniformPart(tuple(obj["dims"]))
        elif fam == "gauss":
            cont = DiagGaussianPart(tuple(obj["dims"]), obj["mean"], obj["std"])
        elif fam == "linreg":
            cont = LinRegGaussianPart(
                int(obj["child"]), tuple(obj["parents"]), obj["coefs"], obj["intercept"], obj["std"], obj["fallback"]
            )
        elif fam == "linear":
            cont = LinearInterpPart(tuple(obj["dims"]), obj["weights"])
        elif fam == "multilinear":
            cont = MultilinearInterpPart(tuple(obj["dims"]), obj["weights"])
        elif fam != "none":
            raise ModelFormatError(f"unknown leaf family {fam!r}", where)
        return LeafDistribution(disc_values, disc_probs, cont)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"bad leaf record: {e}", where) from None


def _enc_node(node):
    if is_leaf(node):
        return {"t": "l", "id": node.leaf_id, "count": node.count, "dist": _enc_dist(node.dist)}
    if isinstance(node, AuxLeaf):
        return {"t": "al", "target": node.target, "coef": node.coef, "sid": node.subtree_id}
    shares = list(map(float, node.shares)) if node.shares is not None else None
    if isinstance(node, ContinuousBranch):
        return {
            "t": "c",
            "var": node.var,
            "split": node.split,
            "shares": shares,
            "low": _enc_node(node.low),
            "high": _enc_node(node.high),
        }
    return {
        "t": "d",
        "var": node.var,
        "values": list(map(int, node.values)),
        "shares": shares,
        "children": [_enc_node(c) for c in node.children],
    }


def _dec_node(obj, box, where):
    try:
        t = obj["t"]
        if t == "l":
            return Leaf(box, _dec_dist(obj["dist"], where), int(obj["count"]))
        if t == "al":
            return AuxLeaf(box, int(obj["target"]), float(obj["coef"]), int(obj["sid"]))
        var = int(obj["var"])
        shares = tuple(obj["shares"]) if obj.get("shares") is not None else None
        if t == "c":
            split = float(obj["split"])
            a, b = box.subrange(var)
            low = _dec_node(obj["low"], box.with_entry(var, (a, split)), where + ".low")
            high = _dec_node(obj["high"], box.with_entry(var, (split, b)), where + ".high")
            return ContinuousBranch(var, split, low, high, shares)
        if t == "d":
            values = tuple(int(v) for v in obj["values"])
            children = tuple(
                _dec_node(c, box.restrict_discrete(var, v), f"{where}.child[{v}]")
                for v, c in zip(values, obj["children"])
            )
            return DiscreteBranch(var, values, children, shares)
        raise ModelFormatError(f"unknown node type {t!r}", where)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"bad node record: {e}", where) from None


def _dec_tree(obj, frame_schema, where):
    root = _dec_node(obj, frame_schema.root_box(), where)
    tree = DensityTree(root, frame_schema.root_box())
    return tree


def _enc_model(model):
    if isinstance(model, DensityTree):
        return {"kind": "density-tree", "tree": _enc_node(model.root)}
    if isinstance(model, SmoothedTree):
        return {"kind": "smoothed-tree", "epsilon": model.epsilon, "inner": _enc_model(model.tree)}
    if isinstance(model, SmoothedConditional):
        return {"kind": "smoothed-conditional", "epsilon": model.epsilon, "inner": _enc_model(model.model)}
    if isinstance(model, ApproxCondModel):
        return {
            "kind": "approx",
            "child": model.spec.child,
            "parents": list(model.spec.parents),
            "tree": _enc_node(model.tree.root),
            "aux": _enc_node(model.aux.root),
            "subtree_count": model.aux.subtree_count,
            "fallbacks": list(model.aux.fallback_subtrees),
        }
    if isinstance(model, (CartModel, StratifiedModel, JointModel)):
        return {
            "kind": model.kind,
            "child": model.spec.child,
            "parents": list(model.spec.parents),
            "tree": _enc_node(model.tree.root),
        }
    if isinstance(model, FactoredModel):
        return {
            "kind": "factored",
            "parents": {str(v): list(model.structure.parent_sets[v]) for v in range(model.schema.width)},
            "epsilon": model.epsilon,
            "conditionals": [_enc_model(c) for c in model.conditionals],
        }
    if isinstance(model, GaussianMixtureModel):
        return {
            "kind": "gmm",
            "weights": list(map(float, model.weights)),
            "means": [list(map(float, m)) for m in model.means],
            "stds": [list(map(float, s)) for s in model.stds],
            "disc": {str(c): [list(map(float, row)) for row in p] for c, p in model.disc_probs.items()},
        }
    raise ModelFormatError(f"cannot encode model of type {type(model).__name__}")


def _model_schema(model):
    if isinstance(model, DensityTree):
        return model.root_box.schema
    if isinstance(model, SmoothedTree):
        return model.tree.root_box.schema
    if isinstance(model, SmoothedConditional):
        return _model_schema(model.model)
    if isinstance(model, (CartModel, StratifiedModel, JointModel, ApproxCondModel)):
        return model.full_schema
    if isinstance(model, (FactoredModel, GaussianMixtureModel)):
        return model.schema
    raise ModelFormatError(f"cannot encode model of type {type(model).__name__}")


def encode_model(model):
    """Serialize any supported model to UTF-8 JSON bytes."""
    schema = _model_schema(model)
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "schema": schema.to_json_obj(),
        "schema_hash": schema.content_hash(),
        "model": _enc_model(model),
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _dec_conditional(obj, schema, where):
    kind = obj["kind"]
    if kind == "smoothed-conditional":
        inner = _dec_conditional(obj["inner"], schema, where + ".inner")
        return SmoothedConditional(inner, float(obj["epsilon"]))
    spec = ConditionalSpec(int(obj["child"]), tuple(int(p) for p in obj["parents"]))
    frame = spec.frame()
    frame_schema = schema.project(frame)
    tree = _dec_tree(obj["tree"], frame_schema, where + ".tree")
    cls = {"cart": CartModel, "stratified": StratifiedModel, "joint": JointModel, "approx": JointModel}[kind]
    model = cls(spec, frame, frame_schema, tree, schema)
    if kind == "approx":
        aux_root = _dec_node(obj["aux"], frame_schema.root_box(), where + ".aux")
        aux = AuxTree(aux_root, frame_schema.root_box(), int(obj["subtree_count"]), tuple(obj.get("fallbacks", ())))
        return ApproxCondModel(model, aux)
    return model


def _dec_model(obj, schema, where="model"):
    try:
        kind = obj["kind"]
    except (KeyError, TypeError):
        raise ModelFormatError("model object missing 'kind'", where) from None
    if kind == "density-tree":
        return _dec_tree(obj["tree"], schema, where + ".tree")
    if kind == "smoothed-tree":
        return SmoothedTree(_dec_model(obj["inner"], schema, where + ".inner"), float(obj["epsilon"]))
    if kind in ("cart", "stratified", "joint", "approx", "smoothed-conditional"):
        return _dec_conditional(obj, schema, where)
    if kind == "factored":
        parents = [tuple(int(p) for p in obj["parents"][str(v)]) for v in range(schema.width)]
        structure = NetworkStructure(schema.width, parents)
        conds = [
            _dec_model(c, schema, f"{where}.conditionals[{i}]") for i, c in enumerate(obj["conditionals"])
        ]
        return FactoredModel(schema, structure, conds, float(obj.get("epsilon", 0.0)))
    if kind == "gmm":
        disc = {int(c): np.asarray(p, dtype=np.float64) for c, p in obj["disc"].items()}
        return GaussianMixtureModel(schema, obj["weights"], obj["means"], obj["stds"], disc)
    raise ModelFormatError(f"unknown model kind {kind!r}", where)


def decode_model(data):
    """Inverse of encode_model; raises ModelFormatError on malformed input."""
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (ValueError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a denstree model file", "format")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}", "version")
    try:
        schema = VariableSchema.from_json_obj(doc["schema"])
        model_obj = doc["model"]
    except KeyError as e:
        raise ModelFormatError(f"missing top-level field {e}", "document") from None
    return _dec_model(model_obj, schema)
