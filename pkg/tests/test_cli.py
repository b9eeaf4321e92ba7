import numpy as np

from bgattack.cli import main
from bgattack.io import read_png, read_tensor

SMALL_CONFIG = """
[dataset]
scenes = 4
canvas_h = 32
canvas_w = 32
sprites = disk:16:0
place_align = 16
place_offset = 0
seed = 100

[detector]
cell_size = 16
seed = 19

[attack]
epochs = 4
batch_size = 2
seed = 0

[pa]
noise_sigma = 0.0
"""


def write_config(tmp_path, text=SMALL_CONFIG):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def test_attack_then_eval(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["attack", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "P.f32t").exists()
    assert (out / "P.png").exists()
    trace = (out / "trace.csv").read_text().strip().split("\n")
    assert trace[0] == "t,l_obj,l_box,l_tv,total,grad_sq_norm,e_of_t,lr"
    assert len(trace) == 1 + 4 * 2

    assert main(["eval", "--config", cfg,
                 "--perturbation", str(out / "P.f32t")]) == 0
    rows = (out / "metrics.csv").read_text().strip().split("\n")
    assert rows[0] == "metric,clean,attack,asr"
    assert all(len(r.split(",")) == 4 for r in rows)
    names = [r.split(",")[0] for r in rows[1:]]
    assert names == ["ap_class_0", "map", "dr"]


def test_attack_is_byte_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["attack", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["attack", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "P.f32t").read_bytes() == (out2 / "P.f32t").read_bytes()
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--size", "16", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "l_obj" in out and "grad_total" in out
    for line in out.strip().split("\n"):
        if "max rel err" in line:
            assert float(line.split(":")[1].strip()) < 1e-5


def test_convergence_subcommand(tmp_path, capsys):
    from bgattack.attack import ConvergenceTrace
    from bgattack.io import write_trace_csv
    trace = ConvergenceTrace(epochs=1)
    t = np.arange(1, 101)
    for k, v in zip(t, 2.0 / np.sqrt(t)):
        trace.append(t=int(k), l_obj=0.0, l_box=0.0, l_tv=0.0, total=0.0,
                     grad_sq_norm=float(v), lr=0.03)
    path = tmp_path / "trace.csv"
    write_trace_csv(str(path), trace)
    assert main(["convergence", "--trace", str(path)]) == 0
    out = capsys.readouterr().out
    assert "-0.5" in out or "-0.49" in out or "-0.50" in out


def test_gen_scenes(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "scenes"
    assert main(["gen-scenes", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "scene_000.png").exists()
    assert (out / "scene_003_boxes.json").exists()
    mask = read_tensor(str(out / "scene_000_mask.f32t"))
    assert mask.shape == (32, 32, 1)


def test_masks_dump_has_8_active_patches(tmp_path):
    out = tmp_path / "m"
    assert main(["masks", "--n", "4", "--hw", "64", "--out", str(out)]) == 0
    mg = read_png(str(out / "M_g.png"))
    assert (out / "M_rg.png").exists() and (out / "M_objs.png").exists()
    white = mg[:, :, 0] == 1.0
    assert white.sum() == 64 * 64 / 2
    # count connected 16x16 patches
    count = sum(bool(white[r * 16, c * 16]) for r in range(4) for c in range(4))
    assert count == 8


def test_bad_usage_exits_1(tmp_path, capsys):
    assert main(["no-such-command"]) == 1
    assert main(["eval", "--perturbation", "/does/not/exist.f32t"]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[attack]\nepochs = -3\n")
    assert main(["attack", "--config", str(bad), "--out", str(tmp_path)]) == 1
