"""Python front end for the fform core: scenes and detections travel as dicts."""

import json

from . import _core

FEATURE_CATALOG_VERSION = _core.FEATURE_CATALOG_VERSION
MODEL_FORMAT_VERSION = _core.MODEL_FORMAT_VERSION
NODE_FEATURE_NAMES = list(_core.NODE_FEATURE_NAMES)


def _line(scene):
    return scene if isinstance(scene, str) else json.dumps(scene)


def render_scene(**config):
    """Render one synthetic scene; keyword names follow the generator config."""
    return json.loads(_core.render_scene(json.dumps(config)))


def generate_standard(per_cell, seed):
    text = _core.generate_standard(per_cell, seed)
    return [json.loads(l) for l in text.splitlines() if l.strip()]


def node_features(scene):
    return _core.node_features(_line(scene))


def group_features(scene, indices):
    return _core.group_features(_line(scene), list(indices))


def head_orientation(scene, pose_index):
    return _core.head_orientation(_line(scene), pose_index)


def rule_classify(scene):
    return json.loads(_core.rule_classify(_line(scene)))


def report(gold, pred, classes):
    return json.loads(_core.report(list(gold), list(pred), list(classes)))


class Models:
    def __init__(self, bundle):
        self._bundle = bundle

    @classmethod
    def load(cls, path):
        return cls(_core.Models.load(str(path)))

    @classmethod
    def train(cls, scenes, l2=1.0, C=10.0, seed=7):
        text = "\n".join(_line(s) for s in scenes) + "\n"
        return cls(_core.Models.train(text, l2, C, seed))

    def save(self, path):
        self._bundle.save(str(path))

    def detect(self, scene):
        return json.loads(self._bundle.detect(_line(scene)))


__all__ = [
    "FEATURE_CATALOG_VERSION",
    "MODEL_FORMAT_VERSION",
    "NODE_FEATURE_NAMES",
    "Models",
    "generate_standard",
    "group_features",
    "head_orientation",
    "node_features",
    "render_scene",
    "report",
    "rule_classify",
]
