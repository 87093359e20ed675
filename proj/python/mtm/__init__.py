"""Python access to the modular tape machine core.

Functions return plain dicts and lists; the heavy lifting (training,
evaluation, gradient checks) runs in C++ with the GIL released.
"""

import json
import os

from . import _mtm
from ._mtm import ShapeError, apply_module, eval_set_lines, module_names, save_eval_set, tasks

__all__ = [
    "ShapeError",
    "apply_module",
    "eval_set_lines",
    "evaluate",
    "generate",
    "gradcheck",
    "load_eval_set",
    "make_instance",
    "module_names",
    "oracle_rollout",
    "save_eval_set",
    "tasks",
    "train",
    "verify",
]


def make_instance(task, digits):
    return json.loads(_mtm.make_instance(task, digits))


def generate(task, n, seed):
    return json.loads(_mtm.generate(task, n, seed))


def oracle_rollout(task, digits):
    """Drive the scripted controller to completion; includes rendered states."""
    return json.loads(_mtm.oracle_rollout(task, digits))


def verify(task, max_len=100, seed=1):
    return json.loads(_mtm.verify(task, max_len, seed))


def load_eval_set(path):
    return json.loads(_mtm.load_eval_set(os.fspath(path)))


def train(config, out_dir=""):
    """Train from a config dict (same keys as the CLI's JSON file)."""
    return json.loads(_mtm.train(json.dumps(config), os.fspath(out_dir)))


def evaluate(checkpoint, dataset, greedy=False, seed=0, t_max_multiplier=8.0):
    return json.loads(_mtm.evaluate(os.fspath(checkpoint), os.fspath(dataset), greedy, seed, t_max_multiplier))


def gradcheck(cases=20, seed=20240601):
    return json.loads(_mtm.gradcheck(cases, seed))
