import pytest

from mobyreg.model import (ConfigError, ModelId, ModelParams, SystemConfig,
                           admissible, lookup, make_config, threshold)

# frozen copy of the parameter table; lookup must match it bit for bit
EXPECTED = {
    ModelId.GARAY: (3, 2, True),
    ModelId.BONNET: (4, 2, False),
    ModelId.SASAKI: (4, 2, False),
    ModelId.BUHRMAN: (2, 1, True),
}


def test_lookup_matches_table():
    for mid, (alpha, beta, oracle) in EXPECTED.items():
        p = lookup(mid)
        assert (p.model, p.alpha, p.beta, p.oracle_enabled) == (mid, alpha, beta, oracle)


def test_exactly_four_models():
    assert len(list(ModelId)) == 4


@pytest.mark.parametrize("text,expected", [
    ("garay", ModelId.GARAY), ("M1", ModelId.GARAY), ("m4", ModelId.BUHRMAN),
    ("  Bonnet ", ModelId.BONNET), ("sasaki", ModelId.SASAKI),
])
def test_parse_aliases(text, expected):
    assert ModelId.parse(text) == expected


def test_parse_unknown_rejected():
    with pytest.raises(ConfigError):
        ModelId.parse("lamport")


@pytest.mark.parametrize("n,f,model,expected", [
    (10, 3, ModelId.GARAY, 4),
    (9, 2, ModelId.BONNET, 5),
    (5, 2, ModelId.BUHRMAN, 3),
])
def test_threshold_examples(n, f, model, expected):
    assert threshold(n, f, lookup(model)) == expected


@pytest.mark.parametrize("n,f,model,expected", [
    (7, 2, ModelId.GARAY, True),
    (6, 2, ModelId.GARAY, False),   # boundary n = 3f
    (8, 2, ModelId.SASAKI, False),  # boundary n = 4f
    (9, 2, ModelId.SASAKI, True),
    (4, 2, ModelId.BUHRMAN, False),
    (5, 2, ModelId.BUHRMAN, True),
])
def test_admissible(n, f, model, expected):
    assert admissible(n, f, lookup(model)) is expected


def test_threshold_rejects_inadmissible():
    with pytest.raises(ConfigError):
        threshold(6, 2, lookup(ModelId.GARAY))


def test_threshold_exceeds_f_whenever_admissible():
    # quantified over every model, 1 <= f <= 10, n = alpha*f+1 .. alpha*f+10
    for mid in ModelId:
        p = lookup(mid)
        for f in range(1, 11):
            for n in range(p.alpha * f + 1, p.alpha * f + 11):
                assert admissible(n, f, p)
                assert threshold(n, f, p) > f


def test_system_config_checks_bounds():
    with pytest.raises(ConfigError):
        SystemConfig(n=0, f=0, params=lookup(ModelId.GARAY))
    with pytest.raises(ConfigError):
        SystemConfig(n=5, f=-1, params=lookup(ModelId.GARAY))


def test_system_config_threshold_and_raw_formula():
    cfg = make_config("garay", 7, 2)
    assert cfg.admissible and cfg.threshold() == 3
    boundary = make_config("garay", 6, 2)
    assert not boundary.admissible
    assert boundary.selection_threshold == 2  # raw formula, for bound demos
    with pytest.raises(ConfigError):
        boundary.threshold()


def test_model_serialization_names():
    assert [m.value for m in ModelId] == ["garay", "bonnet", "sasaki", "buhrman"]
