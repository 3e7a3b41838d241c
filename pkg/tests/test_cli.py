import csv
import io
import json
import shutil
import subprocess
import sys

import pytest

from hullft.cli import BENCH_COLUMNS, main


def run(argv, capsys):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def select_midpoint(fixtures_dir, capsys, *extra):
    return run(
        ["select", "--pool", fixtures_dir / "midpoint.hft", "--query", fixtures_dir / "midpoint_query.json",
         "--no-timing", *extra],
        capsys,
    )


def test_select_midpoint(fixtures_dir, capsys):
    rc, out, _ = select_midpoint(fixtures_dir, capsys, "--budget", 3)
    assert rc == 0
    doc = json.loads(out)
    assert doc["query_id"] == "q-mid"
    assert [(e["pool_index"], e["count"]) for e in doc["support"]] == [(0, 2), (1, 1)]
    assert doc["metrics"]["integer_error"] == pytest.approx(1 / 18, abs=1e-15)
    assert doc["warning"] is None


def test_select_budget_one(fixtures_dir, capsys):
    rc, out, _ = run(["select", "--pool", fixtures_dir / "pool16.hft", "--query", fixtures_dir / "query16.json",
                      "--budget", 1], capsys)
    doc = json.loads(out)
    assert rc == 0
    assert [e for e in doc["support"] if e["count"]] and sum(e["count"] for e in doc["support"]) == 1
    assert len([e for e in doc["support"] if e["count"]]) == 1
    assert set(doc["metrics"]["stage_seconds"]) >= {"select", "integerize"}


def test_select_integerizer_none_warns(fixtures_dir, capsys):
    rc, out, err = select_midpoint(fixtures_dir, capsys, "--budget", 3, "--integerizer", "none")
    doc = json.loads(out)
    assert rc == 0 and "warning" in err
    assert doc["warning"] and all("count" not in e for e in doc["support"])


def test_select_from_corpus_with_knn(fixtures_dir, capsys):
    rc, out, _ = run(["select", "--corpus", fixtures_dir / "pool16.hft", "--query", fixtures_dir / "query16.json",
                      "--k-pool", 5, "--budget", 6, "--no-timing"], capsys)
    assert rc == 0
    doc = json.loads(out)
    assert all(e["pool_index"] < 5 for e in doc["support"])
    assert sum(e["count"] for e in doc["support"]) == 6


def test_select_pca(fixtures_dir, capsys):
    rc, out, _ = run(["select", "--pool", fixtures_dir / "pool16.hft", "--query", fixtures_dir / "query16.json",
                      "--budget", 8, "--pca-dim", 3, "--no-timing"], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["pca_dim"] == 3
    assert "original_integer_error" in doc["metrics"]


def test_select_out_file(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "sel.json"
    rc, stdout, _ = select_midpoint(fixtures_dir, capsys, "--budget", 3, "--out", out)
    assert rc == 0 and stdout == ""
    assert json.loads(out.read_text())["budget"] == 3


def _write_selection(tmp_path, counts, ids):
    total = sum(counts)
    doc = {
        "budget": total,
        "integerizer": "geometric",
        "support": [{"pool_index": i, "id": ex, "weight": c / total, "count": c}
                    for i, (ex, c) in enumerate(zip(ids, counts))],
    }
    path = tmp_path / "sel.json"
    path.write_text(json.dumps(doc))
    return path


def test_schedule_from_selection(tmp_path, capsys):
    sel = _write_selection(tmp_path, [4, 3, 1], ["a", "b", "c"])
    rc, out, _ = run(["schedule", "--selection", sel, "--refresh", 2], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["stats"]["fb_passes"] == 5
    assert [s["action"] for s in doc["steps"]] == ["refresh", "reuse"] * 3 + ["refresh", "refresh"]
    rc, out, _ = run(["schedule", "--selection", sel, "--refresh", 1], capsys)
    assert json.loads(out)["stats"]["fb_passes"] == 8


def test_schedule_from_sequence(fixtures_dir, capsys):
    seq = fixtures_dir / "sequence.txt"
    rc, out, _ = run(["schedule", "--sequence", seq, "--transform", "global-dedup", "--refresh", 2], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["stats"]["fb_passes"] == 3
    assert [s["id"] for s in doc["steps"]] == ["a", "a", "b", "b", "c"]
    rc, out, _ = run(["schedule", "--sequence", seq, "--refresh", 2], capsys)
    assert json.loads(out)["stats"]["fb_passes"] == 5


def test_schedule_pool_validation(fixtures_dir, tmp_path, capsys):
    sel = _write_selection(tmp_path, [2, 1], ["doc-01", "nope"])
    rc, _, err = run(["schedule", "--selection", sel, "--pool", fixtures_dir / "pool16.hft"], capsys)
    assert rc == 2 and "nope" in err


def test_schedule_usage_errors(fixtures_dir, capsys):
    rc, _, _ = run(["schedule"], capsys)
    assert rc == 2
    rc, _, _ = run(["schedule", "--sequence", fixtures_dir / "sequence.txt", "--refresh", 0], capsys)
    assert rc == 2


def _schedule_file(tmp_path, capsys, counts, r, ids):
    sel = _write_selection(tmp_path, counts, ids)
    path = tmp_path / "sched.json"
    assert run(["schedule", "--selection", sel, "--refresh", r, "--out", path], capsys)[0] == 0
    return path


def _targets(tmp_path, ids, dim=3):
    path = tmp_path / "targets.json"
    path.write_text(json.dumps({ex: [float(i + j) for j in range(dim)] for i, ex in enumerate(ids)}))
    return path


def test_toytrain_r1_matches_plain(tmp_path, capsys):
    ids = ["a", "b", "c"]
    sched = _schedule_file(tmp_path, capsys, [3, 2, 2], 1, ids)
    tg = _targets(tmp_path, ids)
    _, reuse, _ = run(["toytrain", "--schedule", sched, "--targets", tg], capsys)
    _, plain, _ = run(["toytrain", "--schedule", sched, "--targets", tg, "--plain"], capsys)
    a, b = json.loads(reuse), json.loads(plain)
    assert a["loss_trace"] == b["loss_trace"] and a["theta"] == b["theta"]
    assert a["fb_passes"] == b["fb_passes"] == 7


def test_toytrain_single_block(tmp_path, capsys):
    sched = _schedule_file(tmp_path, capsys, [4], 2, ["a"])
    rc, out, _ = run(["toytrain", "--schedule", sched, "--targets", _targets(tmp_path, ["a"])], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["fb_passes"] == 2 == doc["schedule_fb_passes"] and doc["steps"] == 4


def test_toytrain_empty_schedule(tmp_path, capsys):
    sched = tmp_path / "empty.json"
    sched.write_text(json.dumps({"refresh_interval": 2, "steps": [],
                                 "stats": {"fb_passes": 0, "reuse_steps": 0, "theoretical_speedup": 1.0}}))
    rc, out, _ = run(["toytrain", "--schedule", sched, "--targets", _targets(tmp_path, ["a"])], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["steps"] == 0 and doc["fb_passes"] == 0
    assert doc["final_loss"] == doc["initial_loss"]


def test_toytrain_missing_target(tmp_path, capsys):
    sched = _schedule_file(tmp_path, capsys, [2, 1], 2, ["a", "zz"])
    rc, _, err = run(["toytrain", "--schedule", sched, "--targets", _targets(tmp_path, ["a"])], capsys)
    assert rc == 3 and "zz" in err


def test_toytrain_overflow_is_numerical(tmp_path, capsys):
    sched = _schedule_file(tmp_path, capsys, [1], 1, ["a"])
    tg = tmp_path / "t.json"
    tg.write_text(json.dumps({"a": [1.7e308]}))
    th = tmp_path / "theta.json"
    th.write_text(json.dumps([-1.7e308]))
    rc, _, err = run(["toytrain", "--schedule", sched, "--targets", tg, "--theta0", th], capsys)
    assert rc == 4 and "numerical" in err


def test_format_errors_exit_3(fixtures_dir, tmp_path, capsys):
    bad = tmp_path / "bad.hft"
    bad.write_bytes((fixtures_dir / "midpoint.hft").read_bytes()[:-1])
    rc, _, err = run(["select", "--pool", bad, "--query", fixtures_dir / "midpoint_query.json", "--budget", 3], capsys)
    assert rc == 3 and "truncated" in err
    rc, _, _ = run(["select", "--pool", tmp_path / "missing.hft", "--query", fixtures_dir / "midpoint_query.json",
                    "--budget", 3], capsys)
    assert rc == 3


def test_contract_errors_exit_2(fixtures_dir, tmp_path, capsys):
    rc, _, _ = select_midpoint(fixtures_dir, capsys, "--budget", 0)
    assert rc == 2
    q = tmp_path / "q.json"
    q.write_text("[1, 2, 3]")
    rc, _, err = run(["select", "--pool", fixtures_dir / "midpoint.hft", "--query", q, "--budget", 2], capsys)
    assert rc == 2
    with pytest.raises(SystemExit) as exc:
        main(["select", "--budget", "3"])
    assert exc.value.code == 2


def _bench(capsys, *extra):
    rc, out, _ = run(["bench", "--k", 30, "--dim", 16, "--budgets", "1:4", *extra], capsys)
    assert rc == 0
    return list(csv.DictReader(io.StringIO(out)))


def test_bench_rows_and_determinism(capsys):
    rows = _bench(capsys)
    assert len(rows) == 2 * 2 * 4
    assert list(rows[0]) == BENCH_COLUMNS
    again = _bench(capsys)
    strip = lambda rs: [{k: v for k, v in r.items() if not k.endswith("_seconds")} for r in rs]
    assert strip(rows) == strip(again)
    assert all(int(r["budget"]) >= 1 for r in rows)


def test_bench_rejects_unknown_selector(capsys):
    rc, _, _ = run(["bench", "--k", 5, "--dim", 3, "--selectors", "magic"], capsys)
    assert rc == 2


def test_thread_limit_env(fixtures_dir, capsys, monkeypatch):
    _, base, _ = select_midpoint(fixtures_dir, capsys, "--budget", 3)
    monkeypatch.setenv("HULLFT_THREADS", "1")
    rc, limited, _ = select_midpoint(fixtures_dir, capsys, "--budget", 3)
    assert rc == 0 and limited == base
    monkeypatch.setenv("HULLFT_THREADS", "zero")
    rc, _, err = select_midpoint(fixtures_dir, capsys, "--budget", 3)
    assert rc == 2 and "HULLFT_THREADS" in err


def test_console_script(fixtures_dir):
    exe = shutil.which("hullft")
    cmd = [exe] if exe else [sys.executable, "-m", "hullft.cli"]
    proc = subprocess.run(
        cmd + ["select", "--pool", str(fixtures_dir / "midpoint.hft"), "--query",
               str(fixtures_dir / "midpoint_query.json"), "--budget", "3", "--no-timing"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert [e["count"] for e in json.loads(proc.stdout)["support"]] == [2, 1]
