import numpy as np
import pandas as pd
import pytest

from models.codebook import (ALPHA_SET, Codebook, CodebookEntry, CodebookKey, CodebookMode, GaSettings,
                             build_codebook, codebook_table, entry_seed, evaluate_codebook, export_codebook,
                             key_grid, load_codebook, objective_value, partition_split, quantized_optimum,
                             save_codebook, snap_angle, synth_entry, synth_hard_partition)
from models.errors import CodebookError, CodebookParseError, ConfigError, DomainError
from models.surface_model import (Side, SurfaceConfig, SurfaceGeometry, SurfaceMode, beam_pattern,
                                  second_beam_side)

DT = CodebookMode.DUAL_TRANSFLECTIVE


@pytest.fixture(scope="module")
def tiny_codebook():
    geo = SurfaceGeometry(8)
    keys = [CodebookKey(0.0, r, a) for r in (30.0, 40.0) for a in (0.25, 0.75)]
    cb = Codebook(geo)
    for key in keys:
        cb.add(synth_hard_partition(key, geo))
    return cb


def test_key_validation():
    with pytest.raises(DomainError):
        CodebookKey(75.0, 0.0, 0.5)
    with pytest.raises(DomainError):
        CodebookKey(0.0, 0.0, 1.5)
    with pytest.raises(DomainError):
        CodebookKey(0.0, 0.0, 0.5, CodebookMode.SINGLE)
    assert CodebookKey(0, 10, 1, CodebookMode.SINGLE).surface_mode is SurfaceMode.SINGLE_REFLECTIVE
    assert CodebookKey(0, 10, 0.5, CodebookMode.DUAL_TRANSMISSIVE).surface_mode is SurfaceMode.DUAL_TRANSMISSIVE


def test_ga_settings_validation():
    with pytest.raises(DomainError):
        GaSettings(population=2)
    with pytest.raises(DomainError):
        GaSettings(population=8, elitism=8)
    with pytest.raises(DomainError):
        GaSettings(levels=(4.0,))
    assert GaSettings(levels=(16, 0, 8)).levels == (0.0, 8.0, 16.0)


def test_snap_and_key_grid():
    assert snap_angle(12.4) == 10.0
    assert snap_angle(-13.0) == -15.0
    assert snap_angle(88.0) == 70.0
    assert key_grid(0.0) == [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
    assert key_grid(68.0) == [35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0]


@pytest.mark.parametrize("alpha, n, expected", [(0.0, 8, (8, 0)), (0.25, 8, (6, 2)), (0.5, 64, (32, 32)),
                                                (0.75, 64, (16, 48)), (1.0, 8, (0, 8))])
def test_partition_split(alpha, n, expected):
    assert partition_split(alpha, n) == expected


def test_entry_seed_depends_on_key_only():
    a, b = CodebookKey(0.0, 30.0, 0.5), CodebookKey(0.0, 35.0, 0.5)
    assert entry_seed(7, a) == entry_seed(7, a)
    assert entry_seed(7, a) != entry_seed(7, b)
    assert entry_seed(7, a) != entry_seed(8, a)


def test_hard_partition_needs_dual_key(small_geometry):
    with pytest.raises(DomainError):
        synth_hard_partition(CodebookKey(10.0, 0.0, 0.0, CodebookMode.SINGLE), small_geometry)


def test_ga_never_loses_to_its_hard_partition_seed(small_geometry, fast_ga):
    key = CodebookKey(-10.0, 35.0, 0.5)
    ga = synth_entry(key, small_geometry, seed=3, settings=fast_ga)
    hp = synth_hard_partition(key, small_geometry, settings=fast_ga)
    assert ga.objective >= hp.objective * (1.0 - 1e-9)
    assert len(ga.history) >= fast_ga.generations


def test_objective_is_bounded_by_aperture(small_geometry, fast_ga):
    for key in (CodebookKey(0.0, 30.0, 0.5), CodebookKey(0.0, -20.0, 0.5, CodebookMode.DUAL_TRANSMISSIVE)):
        entry = synth_entry(key, small_geometry, seed=1, settings=fast_ga)
        assert entry.objective <= small_geometry.n_elements ** 2 + 1e-9
        assert entry.g_w_tra <= 1e-9 and entry.g_w_ref <= 1e-9
        assert entry.objective == pytest.approx(objective_value(entry.config, key, small_geometry))


def test_single_beam_entry_steers_to_its_angle(small_geometry, fast_ga):
    key = CodebookKey(30.0, 0.0, 0.0, CodebookMode.SINGLE)
    entry = synth_entry(key, small_geometry, seed=5, settings=fast_ga)
    pattern = beam_pattern(entry.config, small_geometry, 0.0)
    assert abs(pattern.argmax(Side.TRANSMISSIVE) - 30.0) <= 5.0
    assert entry.config.mode is SurfaceMode.SINGLE_TRANSMISSIVE


def test_quantized_ga_is_bounded_by_exact_optimum(small_geometry):
    levels = (0.0, 8.0, 16.0)
    settings = GaSettings(population=16, generations=10, levels=levels)
    key = CodebookKey(0.0, 30.0, 0.5)
    entry = synth_entry(key, small_geometry, seed=2, settings=settings)
    optimum = quantized_optimum(key, small_geometry, levels)
    assert set(np.unique(entry.config.voltages)) <= set(levels)
    assert entry.objective <= optimum * (1.0 + 1e-9)

    rng = np.random.default_rng(0)
    for _ in range(20):
        config = SurfaceConfig(rng.choice(levels, size=(8, 2)), SurfaceMode.DUAL_TRANSFLECTIVE)
        assert objective_value(config, key, small_geometry) <= optimum * (1.0 + 1e-9)


def test_five_level_ga_reaches_the_exact_optimum(small_geometry):
    levels = (0.0, 4.0, 8.0, 12.0, 16.0)
    settings = GaSettings(levels=levels)
    rng = np.random.default_rng(23)
    for _ in range(5):
        theta_t, theta_r = rng.choice(np.arange(-60.0, 61.0, 5.0), size=2)
        key = CodebookKey(theta_t, theta_r, rng.choice([0.25, 0.5, 0.75]))
        entry = synth_entry(key, small_geometry, seed=entry_seed(0, key), settings=settings)
        optimum = quantized_optimum(key, small_geometry, levels)
        assert 10.0 * np.log10(optimum / entry.objective) <= 1.0, key.label


def test_build_codebook_covers_the_grid(small_geometry):
    settings = GaSettings(population=8, generations=3, lattice_step=1.0)
    seen = []
    cb = build_codebook([0.0], [30.0, 40.0], [0.25, 0.75], small_geometry, seed=1, settings=settings,
                        on_entry=seen.append)
    assert len(cb) == 4 and len(seen) == 4
    assert {k.theta_r for k in cb.keys()} == {30.0, 40.0}
    with pytest.raises(DomainError):
        build_codebook([], [30.0], [0.5], small_geometry)
    with pytest.raises(DomainError):
        build_codebook([0.0], [30.0], [0.5], small_geometry, mode=CodebookMode.SINGLE)


def test_lookup_and_nearest(tiny_codebook):
    key = CodebookKey(0.0, 30.0, 0.25)
    assert tiny_codebook.lookup(key).key == key
    with pytest.raises(ConfigError):
        tiny_codebook.lookup(CodebookKey(0.0, 35.0, 0.25))
    entry, exact = tiny_codebook.nearest(0.0, 30.0, 0.25)
    assert exact and entry.key == key
    entry, exact = tiny_codebook.nearest(1.0, 38.0, 0.7)
    assert not exact and entry.key == CodebookKey(0.0, 40.0, 0.75)
    with pytest.raises(ConfigError):
        tiny_codebook.nearest(0.0, 30.0, 0.5, CodebookMode.DUAL_TRANSMISSIVE)


def test_add_rejects_off_grid_alpha(tiny_codebook, small_geometry):
    entry = synth_hard_partition(CodebookKey(0.0, 30.0, 0.3), small_geometry)
    with pytest.raises(DomainError):
        tiny_codebook.add(entry)
    assert 0.3 not in ALPHA_SET


def test_save_and_load(tiny_codebook, tmp_path):
    path = save_codebook(tiny_codebook, tmp_path / "cb.jsonl")
    loaded = load_codebook(path, SurfaceGeometry(8))
    assert loaded.keys() == tiny_codebook.keys()
    for key in loaded.keys():
        a, b = loaded.lookup(key), tiny_codebook.lookup(key)
        assert isinstance(a, CodebookEntry)
        assert a.config == b.config
        assert a.g_w_ref == b.g_w_ref


def test_load_rejects_other_geometry(tiny_codebook, tmp_path):
    path = save_codebook(tiny_codebook, tmp_path / "cb.jsonl")
    with pytest.raises(CodebookError, match="fingerprint"):
        load_codebook(path, SurfaceGeometry(16))


def test_load_reports_byte_offset(tiny_codebook, tmp_path):
    path = save_codebook(tiny_codebook, tmp_path / "cb.jsonl")
    lines = path.read_text().splitlines(keepends=True)
    lines[2] = "{not json\n"
    path.write_text("".join(lines))
    with pytest.raises(CodebookParseError) as err:
        load_codebook(path)
    assert err.value.offset == len(lines[0]) + len(lines[1])


def test_load_detects_truncation(tiny_codebook, tmp_path):
    path = save_codebook(tiny_codebook, tmp_path / "cb.jsonl")
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[:-1]))
    with pytest.raises(CodebookParseError, match="declares"):
        load_codebook(path)


def test_table_export_and_evaluation(tiny_codebook, tmp_path):
    table = codebook_table(tiny_codebook)
    assert len(table) == len(tiny_codebook)
    out = export_codebook(tiny_codebook, tmp_path / "cb.csv")
    assert list(pd.read_csv(out).columns) == list(table.columns)
    ev = evaluate_codebook(tiny_codebook)
    assert ev["max_dev_db"].max() < 1e-9


def test_same_seed_codebooks_are_byte_identical(small_geometry, tmp_path):
    settings = GaSettings(population=8, generations=3)
    paths = [save_codebook(build_codebook([0.0, 10.0], [40.0], [0.5], small_geometry, seed=9, settings=settings),
                           tmp_path / f"cb{i}.jsonl") for i in range(2)]
    assert paths[0].read_bytes() == paths[1].read_bytes()


WIDE_KEYS = [(-40.0, 40.0), (-45.0, 68.0)]


@pytest.fixture(scope="module")
def wide_entries():
    geo = SurfaceGeometry(64)
    entries = {}
    for theta_t, theta_r in WIDE_KEYS:
        keys = [CodebookKey(theta_t, theta_r, a) for a in (0.25, 0.5, 0.75)]
        keys += [CodebookKey(theta_t, 0.0, 0.0, CodebookMode.SINGLE),
                 CodebookKey(0.0, theta_r, 1.0, CodebookMode.SINGLE)]
        for key in keys:
            entries[key] = synth_entry(key, geo, seed=entry_seed(0, key))
    return geo, entries


@pytest.mark.parametrize("theta_t, theta_r", WIDE_KEYS)
def test_balanced_dual_beam_splits_the_aperture(wide_entries, theta_t, theta_r):
    geo, entries = wide_entries
    entry = entries[CodebookKey(theta_t, theta_r, 0.5)]
    pattern = beam_pattern(entry.config, geo, 0.0)
    assert abs(pattern.argmax(Side.TRANSMISSIVE) - theta_t) <= 1.0
    assert abs(pattern.argmax(second_beam_side(entry.config.mode)) - theta_r) <= 1.0

    single_t = entries[CodebookKey(theta_t, 0.0, 0.0, CodebookMode.SINGLE)].g_w_tra
    single_r = entries[CodebookKey(0.0, theta_r, 1.0, CodebookMode.SINGLE)].g_w_ref
    assert abs(entry.g_w_tra - (single_t - 3.0)) <= 1.5
    assert abs(entry.g_w_ref - (single_r - 3.0)) <= 1.5


@pytest.mark.parametrize("theta_t, theta_r", WIDE_KEYS)
def test_alpha_moves_power_without_moving_beams(wide_entries, theta_t, theta_r):
    geo, entries = wide_entries
    sweep = [entries[CodebookKey(theta_t, theta_r, a)] for a in (0.25, 0.5, 0.75)]
    for entry in sweep:
        pattern = beam_pattern(entry.config, geo, 0.0)
        assert abs(pattern.argmax(Side.TRANSMISSIVE) - theta_t) <= 1.0
        assert abs(pattern.argmax(Side.REFLECTIVE) - theta_r) <= 1.0
    g_ref = [e.g_w_ref for e in sweep]
    assert g_ref[0] < g_ref[1] < g_ref[2]
