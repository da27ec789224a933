import pytest
from hypothesis import given, settings, strategies as st

from finslab.config import ConfigError, RunConfig, format_config, parse_config, with_overrides
from finslab.norms import SplitNorm


def test_defaults_from_empty_text():
    assert parse_config("") == RunConfig()


def test_minimal_config():
    cfg = parse_config("[problem]\nnorm = qnorm(3)\np = 3\n[mesh]\nh = 0.125\n")
    assert cfg.norm == "qnorm(3)" and cfg.p == 3.0
    assert cfg.h_axis == cfg.h_cross == 0.125


def test_split_config_gives_split_norm():
    cfg = parse_config("[problem]\nnorm = split(3; qnorm(3); qnorm(3))\np = 3\n")
    assert isinstance(cfg.norm_spec().family, SplitNorm)


def test_aliases_and_box():
    cfg = parse_config("[problem]\ncross = (0, 1) x (0, 2)\n[mesh]\nℓ = 6\n"
                       "[ladder]\nℓ_list = 2, 4, 8\n")
    assert cfg.cross == ((0.0, 1.0), (0.0, 2.0)) and cfg.dimension == 3
    assert cfg.length == 6.0 and cfg.ell_list == (2.0, 4.0, 8.0)


def test_overrides_applied_in_order():
    cfg = parse_config("[problem]\np = 3\n", ["p=4", "p=2.5", "seed=7"])
    assert cfg.p == 2.5 and cfg.seed == 7


@pytest.mark.parametrize("text,line,key,fragment", [
    ("[problem]\ncolour = red\n", 2, "colour", "unknown key"),
    ("[problem]\n\nnorm = qnorm(0.5)\n", 3, "norm", ""),
    ("[ladder]\nell_list = 8, 4, 2\n", 2, "ell_list", "ℓ_list must be increasing"),
    ("[problem]\np = abc\n", 2, "p", "bad value"),
    ("[mesh]\np = 2\n", 2, "p", "belongs in [problem]"),
    ("[ladder]\nkind = wobble\n", 2, "kind", "unknown experiment kind"),
    ("[problem]\np = 1\n", 2, "p", "p must exceed 1"),
])
def test_errors_name_line_and_key(text, line, key, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line and info.value.key == key
    assert f"line {line}" in str(info.value) and repr(key) in str(info.value)
    assert fragment in str(info.value)


def test_unknown_section_and_malformed_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("[physics]\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("[problem]\nnorm qnorm(2)\n")


def test_nodal_load_length_checked():
    with pytest.raises(ConfigError, match="nodal load"):
        parse_config("[problem]\nf = nodal(0, 1, 0)\n[mesh]\nh = 0.25\n")
    cfg = parse_config("[problem]\nf = nodal(0, 1, 2, 1, 0)\n[mesh]\nh = 0.25\n")
    assert cfg.f == (0.0, 1.0, 2.0, 1.0, 0.0)


def test_with_overrides_validates():
    with pytest.raises(ConfigError):
        with_overrides(RunConfig(), p=0.5)


finite = st.floats(1e-6, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(1.01, 8.0), f=st.floats(-10, 10), h=finite, length=finite,
       tol=st.floats(1e-14, 1e-2), ells=st.lists(finite, min_size=3, max_size=6, unique=True),
       seeds=st.lists(st.integers(0, 99), min_size=1, max_size=4),
       kind=st.sampled_from(["solution_rate", "energy_rate", "eigen_rate", "poincare"]),
       norm=st.sampled_from(["qnorm(2)", "qnorm(1.5)", "matq(2; 2,0; 0,1)",
                             "split(3; qnorm(3); qnorm(3))", "block(2; 1,1; 1,2; 1,4)"]),
       sched=st.one_of(st.none(), st.just((1e-2, 1e-4, 0.0))))
def test_round_trip(p, f, h, length, tol, ells, seeds, kind, norm, sched):
    cfg = RunConfig(norm=norm, p=p, f=f, h_axis=h, h_cross=h / 2, length=length, tol_grad=tol,
                    ell_list=tuple(sorted(ells)), seeds=tuple(seeds), kind=kind,
                    eps_schedule=sched, cross=((-0.5, 1.25),))
    assert parse_config(format_config(cfg)) == cfg
