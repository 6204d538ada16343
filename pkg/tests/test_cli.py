import pytest

from segeo.cli import main
from segeo.experiments import parse_report
from segeo.kernels import CACHE_ENV, GridShape, KernelKind, KernelParams, connectivity_kernel, load_kernel
from segeo.stimuli import gen_fhh, gen_kanizsa_triangle, is_mouth_edge, save_stimulus
from segeo.validation import load_partition, region_densities

SMALL = ["--nx", "21", "--ny", "21", "--ntheta", "16", "--half-x", "10", "--half-y", "10"]
PNG = b"\x89PNG\r\n\x1a\n"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_kernel_file_is_bit_identical_on_rerun(tmp_path, capsys):
    args = ["kernel", "--kind", "fp", "--sigma", "0.15", "--paths", "20000", "--steps", "8", "--seed", "7", *SMALL]
    a, b = tmp_path / "a.sgk", tmp_path / "b.sgk"
    code, out, _ = run(capsys, *args, "-o", a)
    assert code == 0
    assert run(capsys, *args, "-o", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    # kind byte follows the 4-byte magic and 4-byte version
    assert a.read_bytes()[8] == KernelKind.FOKKER_PLANCK
    assert load_kernel(a).symmetrized
    lines = dict(line.split(" ", 1) for line in out.splitlines())
    assert lines["kind"] == "FokkerPlanck"
    assert float(lines["mass"]) == pytest.approx(1.0, abs=0.05)
    assert float(lines["anisotropy"]) > 1


def test_kernel_srl_stored_unsymmetrized(tmp_path, capsys):
    path = tmp_path / "srl.sgk"
    code, out, _ = run(capsys, "kernel", "--kind", "srl", "--sigma1", "1.2", "--sigma3", "0.11", "--paths", "5000",
                       "--steps", "5", *SMALL, "-o", path, "--figure", tmp_path / "k.png")
    assert code == 0
    g = load_kernel(path)
    assert g.params.kind is KernelKind.SUB_RIEMANNIAN_LAPLACIAN and not g.symmetrized
    assert (g.params.sigma1, g.params.sigma3) == (1.2, 0.11)
    assert "kind SubRiemannianLaplacian" in out
    assert (tmp_path / "k.png").read_bytes()[:8] == PNG


def test_kernel_uses_cache_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    assert run(capsys, "kernel", "--paths", "3000", "--steps", "4", *SMALL)[0] == 0
    assert len(list(tmp_path.glob("*.sgk"))) == 1
    monkeypatch.delenv(CACHE_ENV)
    code, _, err = run(capsys, "kernel", "--paths", "3000", "--steps", "4", *SMALL)
    assert code == 2 and CACHE_ENV in err


def test_group_triangle_report_is_deterministic(tmp_path, capsys, cache_dir):
    args = ["group", "--generator", "kanizsa-triangle", "--cache-dir", cache_dir]
    code, first, _ = run(capsys, *args)
    assert code == 0
    assert run(capsys, *args)[1].encode() == first.encode()
    s = gen_kanizsa_triangle()
    units = parse_report(first)
    assert set(units[0].members) == s.indices(is_mouth_edge)
    assert first.splitlines()[-1].startswith("eigenvalues ")


def test_group_fhh_right_angles_lose_the_path(tmp_path, capsys, cache_dir):
    stim = tmp_path / "fhh.txt"
    s, _ = gen_fhh(angle_step=90, seed=0)
    save_stimulus(s, stim)
    out = tmp_path / "report.txt"
    code, _, _ = run(capsys, "group", "--stimulus", stim, "--steps", "30", "--cache-dir", cache_dir, "-o", out,
                     "--svg", tmp_path / "u.svg", "--figure", tmp_path / "u.png")
    assert code == 0
    unit1 = parse_report(out.read_text())[0].members
    path = s.indices("path")
    assert len(unit1 & path) / len(path) < 0.5
    assert (tmp_path / "u.svg").read_text().count("<line") == len(s)
    assert (tmp_path / "u.png").read_bytes()[:8] == PNG


def test_group_generator_params(capsys, cache_dir):
    code, out, _ = run(capsys, "group", "--generator", "segments", "--param", "counts=(3,3)", "--param", "gap=10",
                       "--steps", "30", "--cache-dir", cache_dir)
    assert code == 0
    assert parse_report(out)[0].members == frozenset(range(6))


@pytest.mark.parametrize(
    "argv",
    [
        ["group"],
        ["group", "--generator", "fhh", "--param", "angle_step"],
        ["group", "--generator", "fhh", "--param", "bogus=1"],
        ["experiment", "no-such-sweep"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_unknown_experiment_lists_names(capsys):
    _, _, err = run(capsys, "experiment", "nope")
    assert "fhh-sweep" in err and "square-sweep" in err


def test_empty_stimulus_is_usage_error(tmp_path, capsys):
    stim = tmp_path / "empty.txt"
    stim.write_text("mode polarized\n# nothing here\n")
    assert run(capsys, "group", "--stimulus", stim)[0] == 2


def test_bad_stimulus_file_exits_one(tmp_path, capsys):
    stim = tmp_path / "bad.txt"
    stim.write_text("mode polarized\n0 0 x\n")
    code, _, err = run(capsys, "render", "--stimulus", stim)
    assert code == 1 and "line 2" in err
    assert run(capsys, "render", "--stimulus", tmp_path / "missing.txt")[0] == 1


def test_sweep_empty_grid(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("0 0 1 1\n")
    (tmp_path / "d.txt").write_text("1\n")
    code, _, err = run(capsys, "validate", "sweep", "--density", tmp_path / "d.txt", "--partition", tmp_path / "p.txt",
                       "--sigmas", "0.15", "--paths-list", "", "--steps-list", "10")
    assert code == 2 and "empty" in err


def test_sweep_picks_generating_parameters(tmp_path, capsys):
    P = tmp_path / "p.txt"
    P.write_text("".join(f"{x} {y} {x + 4} {y + 4}\n" for x in range(-10, 10, 4) for y in range(-10, 10, 4)))
    code, out, _ = run(capsys, "validate", "sweep", "--density", tmp_path / "none.txt", "--partition", P,
                       "--sigmas", "0.3", "--paths-list", "4000", "--steps-list", "8", *SMALL)
    assert code == 1  # density file missing
    # target: the density of a kernel with sigma 0.6 and the sweep's seed
    grid = connectivity_kernel(KernelParams(sigma=0.6, n_paths=4000, H=8), GridShape(21, 21, 16, 10, 10))
    target = region_densities(grid, load_partition(P))
    (tmp_path / "d.txt").write_text("\n".join(repr(float(v)) for v in target) + "\n")
    code, out, _ = run(capsys, "validate", "sweep", "--density", tmp_path / "d.txt", "--partition", P,
                       "--sigmas", "0.05,0.6", "--paths-list", "4000", "--steps-list", "8", *SMALL)
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "sigma\tpaths\tsteps\tE"
    assert len(rows) == 4
    best = rows[-1].split()
    assert best[:3] == ["best", "sigma", "0.6"] and float(best[-1]) == 0.0


def test_self_fit(capsys):
    code, out, _ = run(capsys, "validate", "self-fit", "--paths", "20000", "--steps", "8", *SMALL)
    assert code == 0
    lines = dict(line.split(" ", 1) for line in out.splitlines())
    assert lines["regions"] == "100" and lines["seeds"] == "0 1"
    assert 0 < float(lines["E"]) < 0.1


def test_facilitation_config(tmp_path, capsys, cache_dir):
    cfg = tmp_path / "flankers.txt"
    cfg.write_text(
        "# centre element at the origin\n"
        "center 0 0 0\n"
        "set aligned 10 0 0 ; -10 0 0\n"
        "set misaligned 10 0 0.785398 ; -10 0 0.785398\n"
    )
    code, out, _ = run(capsys, "validate", "facilitation", cfg, "--cache-dir", cache_dir, "--figure", tmp_path / "f.png")
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()]
    assert rows[0] == ["set", "flankers", "score"]
    scores = {r[0]: float(r[2]) for r in rows[1:]}
    assert scores["aligned"] > scores["misaligned"]
    assert (tmp_path / "f.png").read_bytes()[:8] == PNG
    cfg.write_text("set a 1 0 0\n")
    assert run(capsys, "validate", "facilitation", cfg, "--cache-dir", cache_dir)[0] == 2
    cfg.write_text("center 0 0\n")
    assert run(capsys, "validate", "facilitation", cfg, "--cache-dir", cache_dir)[0] == 2


def test_render_with_report(tmp_path, capsys):
    report = tmp_path / "r.txt"
    report.write_text("unit 1 saliency 1.5 members 0,1,2\neigenvalues 1.5 0.2\n")
    code, out, _ = run(capsys, "render", "--generator", "zigzag", "--param", "n=4", "--report", report)
    assert code == 0
    assert out.count('class="unit-1"') == 3 and out.count('class="background"') == 1
    code, out2, _ = run(capsys, "render", "--generator", "zigzag", "--param", "n=4", "--report", report)
    assert out2 == out


def test_experiment_writes_table_and_figure(tmp_path, capsys, cache_dir):
    code, out, _ = run(capsys, "experiment", "square-sweep", "--cache-dir", cache_dir, "--figure", tmp_path / "s.png")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split("\t")[:2] == ["angle", "H"]
    assert len(lines) == 7
    assert lines[-1].startswith("critical_angle ")
    assert (tmp_path / "s.png").read_bytes()[:8] == PNG


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert capsys.readouterr().out.startswith("segeo ")
