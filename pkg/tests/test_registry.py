from __future__ import annotations

from collections import Counter

import pytest
import yaml

from aspcomp.errors import RegistryLoadError, RegistryValidationError
from aspcomp.registry import (
    Category,
    FeatureTag as F,
    ProblemKind as K,
    ResourceLimits,
    TrackId,
    classify_track,
    load_registry,
    parse_size,
    select_instances,
    validate_features,
)

from .conftest import add_benchmark_suite, benchmark_domains


def test_empty_registry_rejected(tmp_path):
    path = tmp_path / "r.yaml"
    path.write_text(yaml.safe_dump({"problems": [], "solvers": []}))
    with pytest.raises(RegistryValidationError, match="no problems"):
        load_registry(path)


def test_missing_checker_names_path(builder):
    builder.problem("p", checker=builder.root / "nope" / "check.py")
    with pytest.raises(RegistryLoadError) as info:
        load_registry(builder.write())
    assert info.value.path.endswith("nope/check.py")
    assert "nope/check.py" in str(info.value)


def test_labyrinth_is_basic_decision(builder):
    builder.problem("labyrinth", kind="D", features=["basic", "nontight"])
    reg = load_registry(builder.write())
    assert reg.problems["labyrinth"].track is TrackId.T1


@pytest.mark.parametrize(
    "features, kind, track",
    [
        ({F.BASIC}, K.DECISION, TrackId.T1),
        ({F.BASIC, F.NONTIGHT}, K.DECISION, TrackId.T1),
        ({F.DISJ, F.NON_HCF_DISJ, F.NONTIGHT}, K.QUERY, TrackId.T4),
        ({F.AGGR, F.CHOICE, F.CHOICE_BOUNDED, F.NONTIGHT}, K.OPTIMIZATION, TrackId.T3),
        ({F.DISJ}, K.DECISION, TrackId.T2),
        ({F.NONTIGHT}, K.QUERY, TrackId.T2),
        ({F.BASIC}, K.OPTIMIZATION, TrackId.T3),
        ({F.DISJ, F.NON_HCF_DISJ}, K.OPTIMIZATION, TrackId.T4),
    ],
)
def test_classify_track(features, kind, track):
    assert classify_track(features, kind) is track


def test_track_order():
    assert sorted([TrackId.T4, TrackId.T2, TrackId.T1, TrackId.T3]) == [TrackId.T1, TrackId.T2, TrackId.T3, TrackId.T4]


@pytest.mark.parametrize("features", [{F.CHOICE_BOUNDED}, {F.NON_HCF_DISJ}, {F.AGGR, F.NON_HCF_DISJ}])
def test_feature_invariants(features):
    with pytest.raises(RegistryValidationError):
        validate_features(features)


def test_feature_invariant_in_document(builder):
    builder.problem("p", features=["choiceBounded"])
    with pytest.raises(RegistryValidationError, match="choiceBounded"):
        load_registry(builder.write())


def test_unknown_feature(builder):
    builder.problem("p", features=["magic"])
    with pytest.raises(RegistryValidationError):
        load_registry(builder.write())


def test_duplicate_ids(builder):
    builder.problem("p").problem("p")
    with pytest.raises(RegistryValidationError, match="duplicate"):
        load_registry(builder.write())


def test_duplicate_solver(builder):
    builder.problem("p").solver("s", "x {instance}").solver("s", "y {instance}")
    with pytest.raises(RegistryValidationError, match="duplicate"):
        load_registry(builder.write())


def test_solver_without_tracks(builder):
    builder.problem("p").solver("s", "x {instance}", tracks=())
    with pytest.raises(RegistryValidationError):
        load_registry(builder.write())


def test_benchmark_table_2013_counts(builder):
    reg = load_registry(add_benchmark_suite(builder, 2013).write())
    assert len(reg.problems) == 26
    counts = Counter(p.track for p in reg.problems.values())
    assert [counts[t] for t in TrackId] == [2, 16, 4, 4]


def test_benchmark_table_2014_basic_decision(builder):
    reg = load_registry(add_benchmark_suite(builder, 2014).write())
    counts = Counter(p.track for p in reg.problems.values())
    assert counts[TrackId.T1] == 6
    assert len(reg.problems) == 24  # no 2014 encodings for the two query domains


def test_benchmark_data_is_consistent():
    for dom in benchmark_domains():
        for year in ("2013", "2014"):
            if dom[year] is not None:
                validate_features(F(f) for f in dom[year])


def test_encodings_of_a_domain_share_instances(builder):
    builder.problem("lab_2013", year=2013, n_instances=30, domain="lab")
    builder.problem("lab_2014", year=2014, n_instances=30, domain="lab")
    reg = load_registry(builder.write())
    a = [r.instance_id for r in select_instances(reg.problems["lab_2013"], 5, "42")]
    b = [r.instance_id for r in select_instances(reg.problems["lab_2014"], 5, "42")]
    assert a == b


def test_one_digit_changes_some_selection(builder):
    reg = load_registry(add_benchmark_suite(builder, 2013, n_instances=25).write())

    def picks(seed):
        return {pid: [r.instance_id for r in select_instances(p, 20, seed)] for pid, p in reg.problems.items()}

    base = picks("2204201422")
    for pos in range(10):
        seed = list("2204201422")
        seed[pos] = str((int(seed[pos]) + 1) % 10)
        assert picks("".join(seed)) != base


def test_instance_digest_is_content_hash(builder):
    builder.problem("p", instances={"a.lp": "same\n", "b.lp": "same\n", "c.lp": "other\n"})
    pool = load_registry(builder.write()).problems["p"].instance_pool
    assert [r.instance_id for r in pool] == ["a.lp", "b.lp", "c.lp"]
    assert pool[0].digest == pool[1].digest != pool[2].digest
    assert len(pool[0].digest) == 64


def test_participation(builder):
    builder.problem("easy").problem("opt", kind="O", features=["aggr"]).problem("q", kind="Q", features=["nontight"])
    builder.solver("basic", "x {instance}", tracks=["T1"])
    builder.solver("all", "x {instance}", tracks=["T1", "T2", "T3"], supports_query=True)
    builder.solver("noq", "x {instance}", tracks=["T2"])
    builder.solver("mp", "x {instance}", tracks=["T1"], category="MP")
    reg = load_registry(builder.write())
    ids = lambda pid: sorted(s.id for s in reg.participants(reg.problems[pid], Category.SP))  # noqa: E731
    assert ids("easy") == ["all", "basic"]
    assert ids("opt") == ["all"]
    assert ids("q") == ["all"]
    assert [s.id for s in reg.participants(reg.problems["easy"], Category.MP)] == ["mp"]


def test_limits_section(builder):
    builder.problem("p")
    builder.extra = {"limits": {"SP": {"cpu": 20, "mem": "512MiB"}, "MP": {"cores": 4}}, "selection": {"n": 7}}
    reg = load_registry(builder.write())
    assert reg.limits[Category.SP] == ResourceLimits(cpu_seconds=20, memory_bytes=512 * 2**20)
    assert reg.limits[Category.MP].cores == 4
    assert reg.limits[Category.MP].time_mode == "wall"
    assert reg.instances_per_domain == 7


def test_sp_limits_cannot_use_more_cores(builder):
    builder.problem("p")
    builder.extra = {"limits": {"SP": {"cores": 2}}}
    with pytest.raises(RegistryValidationError):
        load_registry(builder.write())


def test_mp_core_cap():
    with pytest.raises(ValueError):
        ResourceLimits(cores=9)


def test_parse_size():
    assert parse_size(5) == 5
    assert parse_size("128MiB") == 128 * 2**20
    assert parse_size("6G") == 6 * 2**30
    with pytest.raises(ValueError):
        parse_size("lots")
