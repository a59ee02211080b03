import numpy as np
import pytest

from nnvvc.adapters import AdapterModel, SideInfo, adapter_spec, build_injection
from nnvvc.nn.functional import ConfigurationError
from nnvvc.nn.network import init_params


def frame(rng, h=20, w=28):
    return rng.integers(0, 256, (3, h, w), dtype=np.uint8)


def perturbed(kind, seed=0):
    m = AdapterModel(kind, rng=np.random.default_rng(seed), base=8)
    params = init_params(m.spec, np.random.default_rng(seed + 1))
    last = len(m.spec.layers) - 1
    params[last]["w"] *= 0.05
    return AdapterModel(kind, params, base=8)


@pytest.mark.parametrize("kind", ["iha", "ima", "fima"])
def test_fresh_adapter_is_identity(kind):
    rng = np.random.default_rng(0)
    m = AdapterModel(kind, rng=rng, base=8)
    f = frame(rng)
    side = SideInfo(32, 28, 20) if m.injected else None
    assert np.array_equal(m.apply(f, side, quantized=False), f)
    assert np.array_equal(m.apply(f, side, quantized=True), f)


def test_injection_placement():
    spec = adapter_spec("iha")
    for i, layer in enumerate(spec.layers):
        if layer.stride > 1:
            assert layer.injection and spec.layers[i - 1].kind == "linear"
    assert not any(l.injection for l in adapter_spec("ima").layers)


def test_injected_adapters_need_side_info():
    with pytest.raises(ConfigurationError):
        perturbed("iha").apply(frame(np.random.default_rng(1)))


def test_side_info_changes_output():
    m = perturbed("fima")
    f = frame(np.random.default_rng(2))
    a = m.apply(f, SideInfo(22, 28, 20))
    b = m.apply(f, SideInfo(62, 28, 20))
    assert not np.array_equal(a, b)


def test_side_info_validation():
    with pytest.raises(ConfigurationError):
        SideInfo(64, 10, 10)
    with pytest.raises(ConfigurationError):
        SideInfo(10, 0, 10)


def test_injection_tensor_is_spatially_constant():
    m = perturbed("iha")
    lin = m.net.params[1]
    t = build_injection(SideInfo(37, 100, 50), (8, 5, 7), lin)
    assert t.shape == (1, 8, 5, 7)
    assert np.all(t == t[:, :, :1, :1])


def test_quantized_close_to_float():
    m = perturbed("iha")
    f = frame(np.random.default_rng(3))
    s = SideInfo(32, 28, 20)
    a = m.apply(f, s, quantized=True).astype(int)
    b = m.apply(f, s, quantized=False).astype(int)
    assert np.mean(np.abs(a - b)) < 1.0


def test_batch_matches_single():
    m = perturbed("iha")
    rng = np.random.default_rng(4)
    fs = np.stack([frame(rng), frame(rng)])
    s = SideInfo(27, 28, 20)
    both = m.apply(fs, s)
    assert np.array_equal(both[1], m.apply(fs[1], s))


def test_save_load_bit_exact(tmp_path):
    m = perturbed("iha")
    p = str(tmp_path / "iha.nnvw")
    m.save(p)
    again = AdapterModel.load(p)
    f = frame(np.random.default_rng(5))
    s = SideInfo(42, 28, 20)
    assert np.array_equal(m.apply(f, s), again.apply(f, s))


def test_workers_agree():
    m = perturbed("iha")
    f = frame(np.random.default_rng(6), 40, 40)
    s = SideInfo(42, 40, 40)
    assert np.array_equal(m.apply(f, s, workers=1), m.apply(f, s, workers=4))
