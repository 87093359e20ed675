import pytest

import mtm


def test_task_list_and_pools():
    assert mtm.tasks() == ["copy", "reverse", "increment", "filter-even", "add"]
    assert mtm.module_names("add") == ["Sum", "SumInc"]
    assert len(mtm.module_names("copy")) == 5


def test_modules_wrap_at_the_base():
    pool = mtm.module_names("add")
    assert mtm.apply_module("add", pool.index("Sum"), "7", "5") == "2"
    assert mtm.apply_module("add", pool.index("SumInc"), "9", "0") == "0"
    with pytest.raises(IndexError):
        mtm.apply_module("add", 2, "1", "1")


def test_instance_layouts():
    copy = mtm.make_instance("copy", "123")
    assert copy["tape"] == "123$..."
    assert copy["expected"] == "123"
    add = mtm.make_instance("add", "9901")
    assert len(add["tape"]) == 3 * 2 + 4
    assert add["expected"] == "100"


@pytest.mark.parametrize("task", ["copy", "reverse", "increment", "filter-even", "add"])
def test_oracle_solves_each_task(task):
    inst = mtm.generate(task, 6, seed=3)
    run = mtm.oracle_rollout(task, inst["input"])
    assert run["success"]
    assert run["steps"] <= 3 * len(inst["tape"])
    assert run["trace"][0].startswith(f"task={task}")


def test_verify_reports_every_length():
    r = mtm.verify("reverse", max_len=20)
    assert r["ok"] and r["lengths"] == 20


def test_eval_set_roundtrip(tmp_path):
    path = tmp_path / "copy5.txt"
    mtm.save_eval_set(str(path), "copy", 5, 777)
    ds = mtm.load_eval_set(path)
    assert ds["task"] == "copy" and ds["length"] == 5
    assert ds["instances"] == mtm.eval_set_lines("copy", 5, 777)
    assert len(ds["instances"]) == 100


def test_train_then_evaluate(tmp_path):
    result = mtm.train(
        {
            "task": "copy",
            "total_steps": 3000,
            "curriculum": {"c_min": 1, "c_max": 1, "ramp_start": 0, "ramp_end": 1},
            "eval_interval": 0,
            "checkpoint_interval": 0,
            "seed": 5,
        },
        tmp_path,
    )
    assert result["steps"] >= 3000
    ckpt = result["checkpoints"][-1]
    data = tmp_path / "copy1.txt"
    mtm.save_eval_set(str(data), "copy", 1, 1)
    report = mtm.evaluate(ckpt, data, greedy=True)
    assert report["total"] == 100
    assert 0.0 <= report["success_rate"] <= 1.0

    other = tmp_path / "add1.txt"
    mtm.save_eval_set(str(other), "add", 1, 1)
    with pytest.raises(ValueError):
        mtm.evaluate(ckpt, other)


def test_unknown_config_key_is_rejected():
    with pytest.raises(ValueError):
        mtm.train({"task": "copy", "learning_rat": 0.1})


def test_gradcheck_passes_with_few_cases():
    rows = mtm.gradcheck(cases=2)
    assert rows and all(r["ok"] for r in rows)
