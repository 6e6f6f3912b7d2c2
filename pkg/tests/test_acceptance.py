"""Release gate: one test per headline guarantee, with its stated tolerance.

Run with -v (or -s for the PASS lines) to get one line per guarantee.  These
deliberately re-check ground covered by the module suites, at the sample
sizes and tolerances the package advertises.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from collate.correspondence import (
    Correspondence,
    CorrespondenceSet,
    evaluate,
    greedy_one_to_one,
    map_at_r,
    nn_recall,
    recall_at_n,
)
from collate.features import (
    FeatureMap,
    FeaturePyramid,
    local_permutation,
    synth_manuscripts,
)
from collate.matrices import (
    NormalizationScheme,
    PropagationConfig,
    SeedSet,
    SimilarityMatrix,
    normalize,
    propagate,
    two_cycle_seeds,
)
from collate.similarity import (
    AffineTransform,
    Match,
    MatchSet,
    SimilarityConfig,
    best_matches,
    ransac_affine,
    ransac_objective,
    s_features,
    s_matching,
    s_trans,
    similarity_matrix,
)

import oracles
from conftest import manuscript_from_pyramids, random_feature_map, random_pyramid

E2E_SEED = 7
E2E_PERM_SEED = 8
E2E_NOISE = 1.4
E2E_N = 60
E2E_CHANNELS = 8
E2E_CFG = SimilarityConfig(scale_tags=(4, 5, 6), base_scale=5)


def _mat(values, provenance="propagated"):
    return SimilarityMatrix(np.asarray(values, dtype=np.float64), provenance, "matching", {})


@pytest.fixture(scope="module")
def e2e_fixture():
    perm = local_permutation(E2E_PERM_SEED, E2E_N, max_shift=3)
    a, b, gt = synth_manuscripts(
        E2E_SEED, E2E_N, E2E_CHANNELS, E2E_NOISE, perm, scale_tags=(4, 5, 6), fixed_size=4
    )
    gt_set = CorrespondenceSet(("a", "b"), [Correspondence(i, j, "confirmed") for i, j in gt])
    return a, b, gt_set


def test_oracle_equivalence_on_randomized_instances():
    """Vectorized paths agree with naive reference loops, 1e-9 relative."""
    rng = np.random.default_rng(2024)
    started = time.time()

    for _ in range(200):
        h, w, c = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 5)
        ga = random_feature_map(rng, h, w, c)
        gb = random_feature_map(rng, h, w, c)
        assert s_features(ga, gb) == pytest.approx(
            oracles.naive_s_features(ga.data, gb.data), rel=1e-9, abs=1e-12
        )

    for _ in range(200):
        c = int(rng.integers(1, 5))
        src = random_feature_map(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)), c)
        pyr = FeaturePyramid(
            "t",
            random_feature_map(rng, 2, 2, c),
            ((3, random_feature_map(rng, 3, 3, c)), (4, random_feature_map(rng, 4, 4, c))),
        )
        got = {m.src_index: (m.tgt_scale_tag, m.weight) for m in best_matches(src, pyr).matches}
        want = oracles.naive_best_matches(src.data, [(t, f.data) for t, f in pyr.scale_maps])
        assert set(got) == set(want)
        for i in got:
            assert got[i][0] == want[i][0]
            assert got[i][1] == pytest.approx(want[i][2], rel=1e-9, abs=1e-12)

    cfg = SimilarityConfig(scale_tags=(2, 3), base_scale=3)
    for _ in range(200):
        c = int(rng.integers(1, 5))
        pa = random_pyramid(rng, "a", scale_tags=(2, 3), channels=c, fixed_size=2)
        pb = random_pyramid(rng, "b", scale_tags=(2, 3), channels=c, fixed_size=2)
        got = s_matching(pa, pb, cfg)
        want = oracles.naive_s_matching(
            {t: f.data for t, f in pa.scale_maps},
            {t: f.data for t, f in pb.scale_maps},
            3,
            cfg.sigma,
        )
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)

    for _ in range(200):
        rows, cols = int(rng.integers(1, 21)), int(rng.integers(1, 21))
        v = rng.uniform(0, 1, size=(rows, cols))
        n_seeds = int(rng.integers(0, 4))
        seeds = {
            (int(rng.integers(rows)), int(rng.integers(cols))) for _ in range(n_seeds)
        }
        got = propagate(_mat(v, "normalized"), SeedSet(frozenset(seeds), "mixed"))
        want = oracles.naive_propagate(v.tolist(), seeds, 0.25, 5.0)
        assert got.values == pytest.approx(np.array(want), rel=1e-9, abs=1e-12)

    for _ in range(200):
        rows, cols = int(rng.integers(2, 21)), int(rng.integers(2, 21))
        v = rng.uniform(0, 1, size=(rows, cols))
        pairs = {
            (int(rng.integers(rows)), int(rng.integers(cols)))
            for _ in range(int(rng.integers(1, 6)))
        }
        gt = CorrespondenceSet(("a", "b"), [Correspondence(i, j, "confirmed") for i, j in pairs])
        m = _mat(v)
        assert recall_at_n(m, gt) == pytest.approx(
            oracles.naive_recall_at_n(v.tolist(), pairs), abs=1e-9
        )
        assert map_at_r(m, gt) == pytest.approx(
            oracles.naive_map_at_r(v.tolist(), pairs), rel=1e-9
        )
        k = int(rng.integers(1, cols + 1))
        assert nn_recall(m, gt, ks=(k,))[k] == pytest.approx(
            oracles.naive_nn_recall(v.tolist(), pairs, k), abs=1e-9
        )

    elapsed = time.time() - started
    assert elapsed < 60.0
    print(f"\nPASS oracle equivalence: 200 instances per path, 1e-9 rel, {elapsed:.1f}s")


def test_similarity_symmetry_bitwise_all_methods():
    """Score of (a, b) equals score of (b, a) bit for bit, all three methods."""
    rng = np.random.default_rng(11)
    cfg = SimilarityConfig(scale_tags=(3, 4, 5), base_scale=4)
    checked = 0
    for block in range(10):
        side_a = [random_pyramid(rng, f"a{block}_{i}") for i in range(5)]
        side_b = [random_pyramid(rng, f"b{block}_{i}") for i in range(2)]
        ms_a = manuscript_from_pyramids("ma", side_a)
        ms_b = manuscript_from_pyramids("mb", side_b)
        for method in ("features", "matching", "trans"):
            fwd = similarity_matrix(ms_a, ms_b, method, cfg)
            bwd = similarity_matrix(ms_b, ms_a, method, cfg)
            assert fwd.values.tobytes() == bwd.values.T.copy().tobytes()
        checked += len(side_a) * len(side_b)
    assert checked == 100
    print(f"\nPASS symmetry: {checked} pyramid pairs x 3 methods, bitwise")


def test_ransac_affine_recovery():
    """Noise-free recovery below 1e-6 residual; outlier runs keep >=95% of the
    true transform's objective."""
    rng = np.random.default_rng(23)
    cfg = SimilarityConfig()

    def make_matchset(n, transform, outliers=0):
        src = rng.uniform(0, 1, size=(n, 2))
        tgt = transform.apply(src)
        which = rng.permutation(n)[:outliers]
        tgt[which] += rng.uniform(0.35, 0.9, size=(outliers, 2)) * rng.choice([-1.0, 1.0], size=(outliers, 2))
        matches = tuple(
            Match(i, (src[i, 0], src[i, 1]), (tgt[i, 0], tgt[i, 1]), 1.0, 3)
            for i in range(n)
        )
        return MatchSet("fwd", matches), src, tgt

    for trial in range(50):
        true = AffineTransform(
            a=1.0 + rng.uniform(-0.2, 0.2), b=rng.uniform(-0.2, 0.2),
            c=rng.uniform(-0.2, 0.2), d=1.0 + rng.uniform(-0.2, 0.2),
            e=rng.uniform(-0.3, 0.3), f=rng.uniform(-0.3, 0.3),
        )
        ms, src, tgt = make_matchset(12, true)
        got = ransac_affine(ms, cfg)
        residual = np.abs(got.apply(src) - tgt).max()
        assert residual < 1e-6

    for trial in range(10):
        true = AffineTransform(1.05, 0.08, -0.06, 0.97, 0.1, -0.1)
        ms, src, tgt = make_matchset(30, true, outliers=9)
        got = ransac_affine(ms, cfg)
        score_got = ransac_objective(ms, got, cfg)
        score_true = ransac_objective(ms, true, cfg)
        assert score_got >= 0.95 * score_true
    print("\nPASS ransac: 50 noise-free recoveries < 1e-6, outlier objective >= 0.95x truth")


def test_normalization_row_gain_exactness():
    """Row rescaling by positive gains leaves the row-part untouched exactly;
    the worked 2x2 example survives normalize to 1e-12."""
    rng = np.random.default_rng(37)
    for _ in range(100):
        rows, cols = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        v = rng.uniform(0.01, 1.0, size=(rows, cols))
        gains = np.exp2(rng.integers(-8, 9, size=(rows, 1))).astype(np.float64)
        gained = v * gains
        row_part = v / v.max(axis=1, keepdims=True)
        col_part = gained / gained.max(axis=0, keepdims=True)
        got = normalize(_mat(gained, "raw"), NormalizationScheme(kind="over_max", combine="sum"))
        assert got.values.tobytes() == (row_part + col_part).tobytes()

    hand = normalize(_mat([[2.0, 1.0], [1.0, 2.0]], "raw"))
    assert hand.values == pytest.approx(np.array([[2.0, 1.0], [1.0, 2.0]]), abs=1e-12)
    print("\nPASS normalization: row-gain exact equality 100 cases, hand example 1e-12")


def test_propagation_identity_and_seed_factor():
    rng = np.random.default_rng(41)
    for _ in range(100):
        rows, cols = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        v = rng.uniform(-1, 1, size=(rows, cols))
        seeds = SeedSet(
            frozenset({(int(rng.integers(rows)), int(rng.integers(cols)))}), "mixed"
        )
        still = propagate(_mat(v, "normalized"), seeds, PropagationConfig(alpha=0.0))
        assert still.values.tobytes() == v.tobytes()

        (seed,) = seeds.pairs
        boosted = propagate(_mat(v, "normalized"), seeds, PropagationConfig(alpha=0.25))
        assert boosted.values[seed] == pytest.approx(v[seed] * 1.25, rel=1e-12)
    print("\nPASS propagation: alpha=0 bitwise identity, single-seed factor 1+alpha at 1e-12")


def test_synthetic_end_to_end_pipeline_gains(e2e_fixture):
    """Raw matching lands mid-range on the noisy synth pair; normalization and
    seed propagation each help, jointly by double digits."""
    a, b, gt_set = e2e_fixture
    started = time.time()

    raw = similarity_matrix(a, b, "matching", E2E_CFG)
    raw_acc = evaluate(raw, gt_set, metrics=("acc",)).accuracy_avg
    norm = normalize(raw)
    norm_acc = evaluate(norm, gt_set, metrics=("acc",)).accuracy_avg
    prop = propagate(norm, two_cycle_seeds(norm))
    prop_acc = evaluate(prop, gt_set, metrics=("acc",)).accuracy_avg

    assert 60.0 <= raw_acc <= 80.0
    assert norm_acc >= raw_acc
    assert prop_acc >= norm_acc
    assert prop_acc - raw_acc >= 10.0

    again = similarity_matrix(a, b, "matching", E2E_CFG)
    assert again.values.tobytes() == raw.values.tobytes()

    elapsed = time.time() - started
    assert elapsed < 120.0
    print(
        f"\nPASS end-to-end: raw {raw_acc:.1f} -> normalized {norm_acc:.1f} -> "
        f"propagated {prop_acc:.1f} (gain {prop_acc - raw_acc:.1f}), {elapsed:.1f}s"
    )


def test_greedy_retrieval_guarantees():
    rng = np.random.default_rng(53)
    for _ in range(200):
        rows, cols = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        got = greedy_one_to_one(_mat(rng.uniform(0, 1, size=(rows, cols))))
        picked_rows = [e.i for e in got.entries]
        picked_cols = [e.j for e in got.entries]
        assert len(got) == min(rows, cols)
        assert len(set(picked_rows)) == len(picked_rows)
        assert len(set(picked_cols)) == len(picked_cols)

    for margin in (1e-12, 1e-6, 0.3):
        for _ in range(20):
            n = int(rng.integers(2, 10))
            perm = rng.permutation(n)
            v = rng.uniform(0, 1, size=(n, n))
            v[np.arange(n), perm] = v.max() + margin
            got = greedy_one_to_one(_mat(v))
            assert got.pairs() == {(i, int(perm[i])) for i in range(n)}
    print("\nPASS greedy: one-to-one and sized on 200 fuzzed matrices, planted "
          "permutations recovered at margins down to 1e-12")


def test_parallel_determinism(e2e_fixture):
    a, b, _ = e2e_fixture
    serial = similarity_matrix(a, b, "matching", E2E_CFG, parallelism=1)
    parallel = similarity_matrix(a, b, "matching", E2E_CFG, parallelism=8)
    assert serial.values.tobytes() == parallel.values.tobytes()
    print("\nPASS parallelism: 1 vs 8 workers bitwise identical on the synth fixture")
