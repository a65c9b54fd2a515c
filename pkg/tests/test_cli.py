import numpy as np
import pytest

from mvclust import cli, data


def run_cli(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    code = run_cli(
        ["generate", "--dataset", "four-quadrants", "--seed", "0",
         "--per-quadrant", "10", "--out", str(out)]
    )
    assert code == 0
    return out


def test_generate_outputs(dataset_dir):
    view = data.read_view(dataset_dir / "view_a.csv", "A")
    assert view.n == 20
    rel = data.read_relations(dataset_dir / "relations.csv", "A", "B")
    assert len(rel) == 20


def test_generate_unknown_dataset(tmp_path):
    with pytest.raises(SystemExit):
        run_cli(["generate", "--dataset", "five-corners", "--out", str(tmp_path)])


def test_embed_command(dataset_dir, tmp_path):
    out = tmp_path / "embedded.csv"
    code = run_cli(
        ["embed", "--view", str(dataset_dir / "view_a.csv"),
         "--out", str(out), "--dims", "2"]
    )
    assert code == 0
    emb = data.read_view(out)
    assert emb.instances.shape == (20, 2)


def test_cluster_command(dataset_dir, tmp_path):
    view = data.read_view(dataset_dir / "view_a.csv", "A")
    constraints = data.sample_constraints(view, 10, seed=0)
    cpath = tmp_path / "constraints.csv"
    data.write_constraints(constraints, cpath)
    out = tmp_path / "assignment.csv"
    code = run_cli(
        ["cluster", "--view", str(dataset_dir / "view_a.csv"),
         "--constraints", str(cpath), "--k", "2", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "id,cluster"
    assert len(lines) == 21
    clusters = {int(line.split(",")[1]) for line in lines[1:]}
    assert clusters <= {0, 1}


def test_coem_command(dataset_dir, tmp_path):
    view_a = data.read_view(dataset_dir / "view_a.csv", "A")
    view_b = data.read_view(dataset_dir / "view_b.csv", "B")
    for view, name in ((view_a, "ca.csv"), (view_b, "cb.csv")):
        data.write_constraints(
            data.sample_constraints(view, 10, seed=1), tmp_path / name
        )
    out = tmp_path / "coem"
    code = run_cli(
        ["coem", "--view-a", str(dataset_dir / "view_a.csv"),
         "--view-b", str(dataset_dir / "view_b.csv"),
         "--constraints-a", str(tmp_path / "ca.csv"),
         "--constraints-b", str(tmp_path / "cb.csv"),
         "--relations", str(dataset_dir / "relations.csv"),
         "--k", "2", "--out", str(out)]
    )
    assert code == 0
    for v in ("A", "B"):
        assert (out / f"assignment_{v}.csv").is_file()
        assert (out / f"propagated_{v}.csv").is_file()
    prop = data.read_constraints(out / "propagated_A.csv")
    assert len(prop) > 0


def test_experiment_command_with_config(tmp_path):
    config = tmp_path / "experiment.conf"
    config.write_text(
        "# tiny grid\n"
        "dataset = four-quadrants\n"
        "per_quadrant = 10\n"
        "methods = cp,direct\n"
        "counts = 4\n"
        "fractions = 1.0\n"
        "trials = 2\n"
        "k = 2\n"
        "t = 0.75\n"
    )
    out = tmp_path / "report"
    code = run_cli(["experiment", "--config", str(config), "--out", str(out)])
    assert code == 0
    assert (out / "raw.csv").is_file()
    assert (out / "figures" / "f_measure.png").is_file()


def test_experiment_flag_overrides(tmp_path):
    out = tmp_path / "report"
    code = run_cli(
        ["experiment", "--out", str(out), "--methods", "single-view",
         "--counts", "4", "--fractions", "1.0", "--trials", "1",
         "--no-figures"]
    )
    assert code == 0
    assert not (out / "figures").exists()
    raw = (out / "raw.csv").read_text().strip().splitlines()
    assert len(raw) == 2  # header plus one row


def test_experiment_partial_failure_exit_code(tmp_path):
    out = tmp_path / "report"
    code = run_cli(
        ["experiment", "--out", str(out), "--methods", "single-view",
         "--counts", "4", "--fractions", "1.0", "--trials", "1",
         "--k", "100000", "--no-figures"]
    )
    assert code == 2
    assert (out / "summary.txt").is_file()
