import pytest
from hypothesis import given, settings, strategies as st

from core.exceptions import ConfigException, UnknownPresetException
from schemas.coefficients import CoefficientKind, Profile
from schemas.experiment import ExperimentConfig, Pipeline
from schemas.innovation import InnovationKind
from schemas.series import TruncationMode
from services.config_service import ConfigService
from services.experiment_service import ExperimentService

PRESETS = {
    "breiman-uniform",
    "hill-recovery-0.8",
    "hill-recovery-1.5",
    "hill-recovery-2.5",
    "linear-tail-constant",
    "modulus-compound-poisson",
    "modulus-single-jump",
    "spectral-single-jump",
    "sre-tail-constant",
}


def issues_of(configs, text: str) -> list:
    with pytest.raises(ConfigException) as info:
        configs.parse_config(text)
    assert info.value.exit_code == 1
    return info.value.issues


def test_minimal_config_takes_defaults(configs):
    config = configs.parse_config("[run]\nname = demo\n")
    assert config.run.seed == 0
    assert config.run.pipeline == Pipeline.PATH
    assert config.innovation.kind == InnovationKind.COMPOUND_POISSON
    assert config.series.truncation == TruncationMode.ADAPTIVE
    assert config.estimators.r_grid == [0.5, 1.0, 2.0, 4.0, 8.0]


def test_comments_lists_and_sections(configs, small_path_config):
    assert small_path_config.run.n == 300
    assert small_path_config.coefficients.kind == CoefficientKind.FINITE_LIST
    assert small_path_config.coefficients.profiles == [Profile.FLAT]
    assert small_path_config.estimators.delta_grid == [0.5, 0.1, 0.05]
    config = configs.parse_config("[run]   # header\nname = demo  # trailing\nseed = 5 # seed\n")
    assert config.run.name == "demo" and config.run.seed == 5


def test_negative_alpha_is_reported_with_its_line(configs):
    issues = issues_of(configs, "[run]\nname = demo\n[innovation]\nalpha = -1\n")
    assert len(issues) == 1
    assert issues[0].location == "innovation.alpha"
    assert issues[0].line == 4


def test_duplicate_keys(configs):
    issues = issues_of(configs, "[run]\nname = demo\nseed = 1\nseed = 2\n")
    assert [str(issue) for issue in issues] == ["run.seed (line 4): duplicate key on lines 3 and 4"]


def test_unknown_key_and_section(configs):
    issues = issues_of(configs, "[run]\nname = demo\ncolour = red\n[fancy]\nx = 1\n")
    messages = {issue.message for issue in issues}
    assert "unknown key" in messages
    assert any(message.startswith("unknown section [fancy]") for message in messages)
    unknown_key = next(issue for issue in issues if issue.message == "unknown key")
    assert unknown_key.location == "run.colour" and unknown_key.line == 3


def test_every_error_is_reported_at_once(configs):
    text = "\n".join([
        "name = early",
        "[run]",
        "name = demo",
        "name = again",
        "Seed = 3",
        "workers",
        "[innovation]",
        "alpha = -1",
        "[estimators]",
        "r_grid = 2, 1",
        "x_grid = 1, oops",
    ])
    issues = issues_of(configs, text)
    by_line = {issue.line: issue for issue in issues}
    assert set(by_line) == {1, 4, 5, 6, 8, 10, 11}
    assert "before any section" in by_line[1].message
    assert "lowercase" in by_line[5].message
    assert "key = value" in by_line[6].message
    assert by_line[10].message.startswith("must be a nonempty")
    assert by_line[11].message.startswith("item 1:")


def test_missing_section_and_key(configs):
    issues = issues_of(configs, "[innovation]\nalpha = 1.0\n")
    assert [(issue.location, issue.message) for issue in issues] == [("run", "required section is missing")]
    issues = issues_of(configs, "[run]\nseed = 1\n")
    assert [(issue.location, issue.message) for issue in issues] == [("run.name", "required key is missing")]


def test_cross_section_constraint(configs):
    issues = issues_of(configs, "[run]\nname = demo\n[innovation]\nalpha = 1.0\n[estimators]\nmoment_gamma = 2\n")
    assert "moment_gamma" in issues[0].message


def test_stable_alpha_range(configs):
    issues = issues_of(configs, "[run]\nname = demo\n[innovation]\nkind = symmetric-stable-scalar\nalpha = 2.5\n")
    assert "alpha in (0, 2]" in issues[0].message


names = st.from_regex(r"[a-z0-9][a-z0-9._-]{0,15}", fullmatch=True)
grids = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=5, unique=True).map(sorted)


@settings(max_examples=60, deadline=None)
@given(
    name=names,
    seed=st.integers(0, 2 ** 64 - 1),
    pipeline=st.sampled_from(list(Pipeline)),
    kind=st.sampled_from([InnovationKind.COMPOUND_POISSON, InnovationKind.SINGLE_JUMP, InnovationKind.PARETO_SCALAR]),
    alpha=st.floats(0.1, 4.0),
    ratio=st.floats(-0.95, 0.95),
    square=st.booleans(),
    tolerance=st.floats(1e-12, 1e-2),
    r_grid=grids,
)
def test_render_then_parse_is_identity(name, seed, pipeline, kind, alpha, ratio, square, tolerance, r_grid):
    configs = ConfigService()
    coefficients = {"ratio": ratio}
    if square:
        coefficients.update(kind=CoefficientKind.BILINEAR_PRODUCT, square_innovation=True)
    config = ExperimentConfig.model_validate({
        "run": {"name": name, "seed": seed, "pipeline": pipeline},
        "innovation": {"kind": kind, "alpha": alpha},
        "coefficients": coefficients,
        "series": {"tolerance": tolerance},
        "estimators": {"r_grid": r_grid},
    })
    assert configs.parse_config(configs.render_config(config)) == config


def test_presets_are_valid_configs():
    service = ExperimentService()
    assert set(service.list_presets()) == PRESETS
    for name in PRESETS:
        config = service.preset(name)
        assert config.run.name == name
        assert config.run.seed == 1
    assert service.preset("hill-recovery-2.5").estimators.scaling_quantile == 0.99
    assert service.preset("breiman-uniform").run.pipeline == Pipeline.BREIMAN


def test_unknown_preset():
    with pytest.raises(UnknownPresetException) as info:
        ExperimentService().preset("no-such-experiment")
    assert "breiman-uniform" in info.value.available
    assert info.value.exit_code == 1


def test_load_config_prefers_files(tmp_path, small_path_text):
    path = tmp_path / "experiment.cfg"
    path.write_text(small_path_text, encoding="utf-8")
    service = ExperimentService()
    assert service.load_config(path).run.name == "small-path"
    assert service.load_config("linear-tail-constant").run.pipeline == Pipeline.MARGINAL
