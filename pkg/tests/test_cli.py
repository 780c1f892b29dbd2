import pytest

from blindspot import cli


def run(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    assert cli.main([*args, "--out", str(out)]) == 0
    return out.read_text()


def rows(text):
    body = cli.csv_body(text).splitlines()
    header = body[0].split(",")
    return [dict(zip(header, map(float, line.split(",")))) for line in body[1:]]


def test_sweep_l_rerun_identical(tmp_path):
    a = run(tmp_path, "sweep-l", "--reps", "3000", "--l-over-r", "0.1,0.5", name="a.csv")
    b = run(tmp_path, "sweep-l", "--reps", "3000", "--l-over-r", "0.1,0.5", "--workers", "2", name="b.csv")
    assert cli.csv_body(a) == cli.csv_body(b)
    assert a.startswith("# blindspot sweep-l\n# config ")
    assert "seed=1" in a.splitlines()[1]
    r = rows(a)
    assert [x["L_over_R"] for x in r] == [0.1, 0.5]
    assert all(0.0 <= x[k] <= 1.0 for x in r for k in ("b_mc", "b_ind", "b_2plus"))


def test_seventeen_digits(tmp_path):
    text = run(tmp_path, "estimate", "--reps", "500", "--mean-anchors", "15")
    line = cli.csv_body(text).splitlines()[1]
    b2 = line.split(",")[-1]
    assert float(b2) == float(format(float(b2), ".17g"))
    assert len(b2.replace("0.", "").lstrip("0")) >= 15


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nreps = 400\nl_over_r = 0.2, 0.4\nmean_anchors = 5,10\nseed = 9\n")
    text = run(tmp_path, "sweep-lambda", "--config", str(cfg), "--seed", "3")
    assert "seed=3" in text and "reps=400" in text
    r = rows(text)
    assert len(r) == 4 and {x["L_over_R"] for x in r} == {0.2, 0.4}
    for lr in (0.2, 0.4):
        sel = [x for x in r if x["L_over_R"] == lr]
        assert sel[0]["b_2plus"] >= sel[1]["b_2plus"] and sel[0]["b_mc"] >= sel[1]["b_mc"]


def test_gamma_and_design(tmp_path):
    g = rows(run(tmp_path, "gamma", "--reps", "400", "--l-over-r", "0.5", "--mean-obstacles", "2,8", name="g.csv"))
    assert g[0]["gamma"] < g[1]["gamma"]
    d = rows(run(tmp_path, "design", "--reps", "400", "--mu", "0.1,0.5", name="d.csv"))
    assert d[0]["lambda_star"] > d[1]["lambda_star"]
    assert all(x["b_2plus_achieved"] <= x["mu"] for x in d)


@pytest.mark.parametrize(
    "args",
    [["sweep-l", "--l-over-r", "0.5,0.1"], ["sweep-l", "--reps", "1"], ["gamma", "--gamma-definition", "visible", "--mu", ""]],
)
def test_invalid_config(args, capsys):
    assert cli.main(args) == 2


def test_unknown_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        cli.read_config_file(cfg)


def test_unwritable(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["estimate", "--reps", "10", "--out", str(tmp_path / "missing" / "x.csv")])
