import subprocess
import sys

import numpy as np
import pytest

from qvrf import codec
from qvrf.cli import main
from qvrf.metrics import psnr
from qvrf.transform import read_image, write_pgm


@pytest.fixture
def workdir(tmp_path, images):
    d = tmp_path / "imgs"
    d.mkdir()
    write_pgm(d / "a.pgm", images["camera_512"][:200, :208])
    write_pgm(d / "b.pgm", images["coffee_600x400"][:190, :200])
    return tmp_path


def test_encode_decode_psnr(workdir, capsys):
    src = workdir / "imgs" / "a.pgm"
    out, rec = workdir / "a.qvrf", workdir / "a_rec.pgm"
    assert main(["encode", "-i", str(src), "-o", str(out), "--a", "3"]) == 0
    assert main(["decode", "-i", str(out), "-o", str(rec)]) == 0
    capsys.readouterr()
    assert main(["psnr", str(src), str(rec)]) == 0
    line = capsys.readouterr().out
    expected = psnr(read_image(src), read_image(rec))
    assert f"psnr_db={expected!r}" in line
    assert np.array_equal(read_image(rec), codec.analyze(read_image(src), 3.0).reconstruction)


def test_sweep_then_psnr_agrees(workdir):
    csv = workdir / "rd.csv"
    assert main(["sweep", "--images", str(workdir / "imgs"), "--a-min", "1", "--a-max", "8",
                 "--points", "4", "--csv", str(csv)]) == 0
    points = codec.read_rd_csv(csv)
    assert len(points) == 12 and sum(p.image == "mean" for p in points) == 4
    row = next(p for p in points if p.image == "a.pgm" and p.a == 1.0)
    img = read_image(workdir / "imgs" / "a.pgm")
    rec = codec.decode_image(codec.encode_image(img, 1.0))
    assert row.psnr_db == psnr(img, rec)


def test_fit_then_encode_by_lambda(workdir, capsys):
    fit = workdir / "fit.txt"
    assert main(["fit", "--lambdas", "0.002", "0.01", "0.05", "--images", str(workdir / "imgs"),
                 "--out", str(fit), "--cost-mode", "estimate"]) == 0
    assert "slope=" in capsys.readouterr().out
    out = workdir / "x.qvrf"
    assert main(["encode", "-i", str(workdir / "imgs" / "b.pgm"), "-o", str(out),
                 "--lambda", "0.01", "--fit", str(fit)]) == 0
    assert out.stat().st_size > 24


def test_bdrate_self_is_zero(workdir, capsys):
    csv = workdir / "rd.csv"
    main(["sweep", "--images", str(workdir / "imgs"), "--points", "5", "--csv", str(csv)])
    capsys.readouterr()
    assert main(["bdrate", "--anchor", str(csv), "--test", str(csv)]) == 0
    assert capsys.readouterr().out.strip() == "bd_rate=0.000000%"


def test_account(workdir, capsys):
    out = workdir / "a.qvrf"
    main(["encode", "-i", str(workdir / "imgs" / "a.pgm"), "-o", str(out), "--a", "2"])
    capsys.readouterr()
    assert main(["account", "-i", str(out)]) == 0
    text = capsys.readouterr().out
    assert "total_bpp=" in text and "side_bpp=" in text
    assert main(["account", "--image", str(workdir / "imgs" / "a.pgm"),
                 "--a-values", "1", "2", "4"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_usage_errors(workdir, capsys):
    src = str(workdir / "imgs" / "a.pgm")
    with pytest.raises(SystemExit) as exc:
        main(["encode", "-i", src, "-o", str(workdir / "x"), "--lambda", "0.01"])
    assert exc.value.code == 2
    assert "--lambda requires --fit" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["encode", "-i", src, "-o", str(workdir / "x")])


def test_runtime_errors_are_one_line(workdir, capsys):
    bad = workdir / "bad.qvrf"
    bad.write_bytes(b"QVRF\x01")
    assert main(["decode", "-i", str(bad), "-o", str(workdir / "o.pgm")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("qvrf: error:") and err.count("\n") == 1
    assert main(["encode", "-i", str(workdir / "missing.pgm"), "-o", "x", "--a", "1"]) == 1
    assert main(["encode", "-i", str(workdir / "imgs" / "a.pgm"), "-o", str(workdir / "y"),
                 "--a", "100"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qvrf", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "encode" in r.stdout
