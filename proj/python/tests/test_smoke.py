import json

import pytest

mmcc = pytest.importorskip("mmcc")


def test_version():
    assert mmcc.__version__ == "0.1.0"


def test_lq_value_matches_hand_riccati():
    # one period, one dimension: P0 = q + a^2 q - (a b q)^2 / (r + b^2 q)
    a, b, q, r, sigma = 0.9, 0.5, 1.0, 0.5, 0.3
    denom = r + b * b * q
    p0 = q + a * a * q - a * a * b * b * q * q / denom
    expect = -(p0 + sigma * sigma * q)  # s0 = 1 per dimension
    assert mmcc.lq_value(d=1, horizon=1, a=a, b=b, q=q, r=r, sigma=sigma) == pytest.approx(
        expect, rel=1e-12
    )


def test_fbsde_oracle_reference_value():
    y, se = mmcc.fbsde_oracle(d_w=100, n_mc=200_000, seed=7)
    assert y == pytest.approx(4.5901, abs=5e-3)
    assert 0 < se < 1e-2


def test_heston_oracle_desk_value():
    assert mmcc.heston_oracle(T=2.0, steps=24) == pytest.approx(2.27596, rel=1e-3)


def test_dsice_rollout_deterministic():
    a = mmcc.dsice_rollout(mu=0.3, p=0.75, horizon=60, tail=40)
    b = mmcc.dsice_rollout(mu=0.3, p=0.75, horizon=60, tail=40)
    assert a == b
    assert a > 0


def test_validate_reports_minibatch_mismatch():
    cfg = {
        "problem": "lq",
        "trainer": {"b": 64, "m": 3, "N": 100},
    }
    diags = mmcc.validate(json.dumps(cfg))
    assert any("b*m != N" in d for d in diags)
    cfg["trainer"]["N"] = 192
    assert mmcc.validate(json.dumps(cfg)) == []


def test_train_and_resume_roundtrip(tmp_path):
    out = tmp_path / "lq"
    res = mmcc.train(
        "lq",
        spec_json=json.dumps({"d": 2, "horizon": 3}),
        b=8,
        m=16,
        n_eval=128,
        max_sweeps=2,
        alpha=1e-2,
        seed=4,
        hidden=[6],
        out_dir=str(out),
    )
    assert res["exit_code"] == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["problem"] == "lq"
    assert summary["sweeps"] == 2
    assert (out / "sweeps.csv").exists()

    cfg = json.loads((out / "config.json").read_text())["config"]
    cfg["trainer"]["max_sweeps"] = 3
    assert mmcc.resume(json.dumps(cfg)) == 0
    summary2 = json.loads((out / "summary.json").read_text())
    assert summary2["sweeps"] == 3

    bad = dict(cfg)
    bad["problem"] = "nope"
    with pytest.raises(mmcc.ConfigError):
        mmcc.run(json.dumps(bad))
