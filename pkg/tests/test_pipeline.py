import numpy as np
import pytest

from shapecal import calib, pipeline
from shapecal.distortion import DistortionModel, shape_check
from shapecal.pipeline import (Camera, ExperimentConfig, ExperimentReport,
                               SceneConfig, add_noise, aso_loop, ba_full,
                               ba_refine, correspondences, generate_scene,
                               ideal_normalized, levenberg_marquardt,
                               perturb_cameras, project, reprojection_rms,
                               rodrigues, rodrigues_inverse, run_experiment,
                               scene_from_json, scene_to_json,
                               validation_points, validation_rms)

BARREL = pipeline.DEFAULT_TRUE_MODELS["barrel"]


def small_scene(seed=7, model=BARREL, cameras=3):
    cfg = SceneConfig(target_rows=8, target_cols=8, cameras=cameras)
    return generate_scene(cfg, model, seed)


def test_rodrigues_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(size=3)
        v = v / np.linalg.norm(v) * rng.uniform(0.01, 3.0)
        R = rodrigues(v)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(rodrigues_inverse(R), v, atol=1e-9)


def test_generate_scene_default_protocol():
    cfg = SceneConfig()
    scene = generate_scene(cfg, BARREL, 0)
    assert len(scene.target) == 256
    assert len(scene.cameras) == 9
    w, h = cfg.image_width, cfg.image_height
    for pix in scene.pixels:
        assert pix[:, 0].min() >= 0 and pix[:, 0].max() <= w
        assert pix[:, 1].min() >= 0 and pix[:, 1].max() <= h


def test_generate_scene_coverage():
    cfg = SceneConfig()
    scene = generate_scene(cfg, BARREL, 3)
    half_diag = np.hypot(320, 240)
    for cam, pix in zip(scene.cameras, scene.pixels):
        radius = np.hypot(*(pix - cam.principal).T).max()
        assert 0.35 * half_diag <= radius <= 0.65 * half_diag


def test_minimal_scene():
    cfg = SceneConfig(target_rows=2, target_cols=2, cameras=1)
    scene = generate_scene(cfg, DistortionModel.identity(), 1)
    assert len(scene.target) == 4
    assert len(scene.pixels) == 1
    assert scene.pixels[0].shape == (4, 2)


def test_scene_determinism():
    a = generate_scene(SceneConfig(), BARREL, 42)
    b = generate_scene(SceneConfig(), BARREL, 42)
    for pa, pb in zip(a.pixels, b.pixels):
        assert np.array_equal(pa, pb)


def test_project_on_axis_hits_principal_point():
    cfg = SceneConfig(target_rows=2, target_cols=2, cameras=1)
    scene = generate_scene(cfg, DistortionModel.identity(), 5)
    cam = scene.cameras[0]
    center = -cam.R.T @ cam.t
    axis_point = center + cam.R.T @ np.array([0.0, 0.0, 2.0])
    pix = project(cam, axis_point[None, :], DistortionModel.identity())
    assert np.allclose(pix[0], cam.principal, atol=1e-9)


def test_project_identity_K():
    cam = Camera(np.eye(3), np.array([0.0, 0.0, 2.0]), np.eye(3))
    X = np.array([[0.3, -0.2, 0.0]])
    pix = project(cam, X, DistortionModel.identity())
    assert np.allclose(pix[0], [0.15, -0.1], atol=1e-12)


def test_project_rejects_nonpositive_depth():
    cam = Camera(np.eye(3), np.zeros(3), np.eye(3))
    with pytest.raises(ValueError):
        ideal_normalized(cam, np.array([[0.0, 0.0, -1.0]]))


def test_barrel_pulls_points_inward():
    scene = small_scene(model=DistortionModel.identity())
    cam = scene.cameras[0]
    straight = project(cam, scene.target, DistortionModel.identity())
    curved = project(cam, scene.target, BARREL)
    r0 = np.hypot(*(straight - cam.principal).T)
    r1 = np.hypot(*(curved - cam.principal).T)
    off_axis = r0 > 1.0
    assert (r1[off_axis] < r0[off_axis]).all()


def test_add_noise_zero_sigma_identity():
    scene = small_scene()
    noisy = add_noise(scene, 0.0)
    for a, b in zip(scene.pixels, noisy.pixels):
        assert np.array_equal(a, b)


def test_add_noise_statistics():
    cfg = SceneConfig(target_rows=24, target_cols=24, cameras=9)
    scene = generate_scene(cfg, DistortionModel.identity(), 11)
    noisy = add_noise(scene, 1.0)
    deltas = np.concatenate([(a - b).ravel()
                             for a, b in zip(noisy.pixels, scene.pixels)])
    assert deltas.size >= 10000
    assert 0.95 <= deltas.std() <= 1.05


def test_add_noise_seeded_streams():
    scene = small_scene()
    n1 = add_noise(scene, 1.0)
    n2 = add_noise(scene, 1.0)
    assert np.array_equal(n1.pixels[0], n2.pixels[0])
    other = add_noise(generate_scene(scene.config, BARREL, scene.seed + 1),
                      1.0)
    assert not np.array_equal(n1.pixels[0], other.pixels[0])


def test_levenberg_marquardt_monotone_trace():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(20, 3))
    b = rng.normal(size=20)

    def fun(x):
        return A @ x - b + 0.1 * np.sin(x).sum()

    x, trace, status = levenberg_marquardt(fun, np.zeros(3))
    assert all(t2 <= t1 + 1e-12 for t1, t2 in zip(trace, trace[1:]))


def test_ba_refine_fixed_point_at_truth():
    scene = small_scene()
    cams, rms, statuses = ba_refine(scene, scene.cameras, BARREL)
    assert rms <= 1e-6
    for cam, ref in zip(scene.cameras, cams):
        assert np.abs(cam.R - ref.R).max() <= 1e-9
        assert np.abs(cam.t - ref.t).max() <= 1e-8
        assert abs(cam.focal - ref.focal) <= 1e-6


def test_ba_refine_recovers_perturbed_poses():
    scene = small_scene(seed=3)
    cams0 = perturb_cameras(scene.cameras, 3)
    cams, rms, statuses = ba_refine(scene, cams0, BARREL)
    assert rms <= 1e-6


def test_ba_refine_wrong_model_has_higher_rms():
    scene = small_scene(seed=4)
    cams0 = perturb_cameras(scene.cameras, 4)
    _, rms_true, _ = ba_refine(scene, cams0, BARREL)
    _, rms_wrong, _ = ba_refine(scene, cams0, DistortionModel.identity())
    assert rms_wrong > rms_true + 0.01


def test_ba_full_recovers_distortion():
    scene = small_scene(seed=5, cameras=4)
    cams0 = perturb_cameras(scene.cameras, 5)
    cams_init, _, _ = ba_refine(scene, cams0, DistortionModel.identity())
    cams, model, rms = ba_full(scene, cams_init, "polynomial")
    assert rms <= 1e-5
    assert np.abs(np.array(model.k) - BARREL.k).max() <= 1e-3


def test_correspondences_shapes_and_units():
    scene = small_scene()
    data = correspondences(scene, scene.cameras)
    assert data.shape == (3 * 64, 4)
    r_ideal = np.hypot(data[:, 0], data[:, 1])
    r_obs = np.hypot(data[:, 2], data[:, 3])
    # Barrel distortion shrinks radii.
    assert (r_obs <= r_ideal + 1e-12).all()


def test_validation_rms_zero_at_truth():
    scene = small_scene(seed=8)
    val = validation_points(scene, grid=15)
    assert validation_rms(val, scene.cameras, scene.true_model) <= 1e-9
    for X, pix in val:
        assert len(X) == len(pix)
        assert len(X) >= 0.9 * 15 * 15


def test_aso_loop_noiseless_trace_non_increasing():
    scene = small_scene(seed=9)
    cams0 = perturb_cameras(scene.cameras, 9)
    cams_init, _, _ = ba_refine(scene, cams0, DistortionModel.identity())
    cfg = calib.CalibConfig(rbar=1.0, shape="barrel")
    result, cams, trace = aso_loop(scene, cams_init, cfg, iterations=4)
    assert result.solver_status == "optimal"
    for a, b in zip(trace, trace[1:]):
        assert b <= a + 1e-9


def test_aso_after_full_ba_reaches_truth_on_noiseless_data():
    scene = small_scene(seed=9)
    cams0 = perturb_cameras(scene.cameras, 9)
    cams_init, _, _ = ba_refine(scene, cams0, DistortionModel.identity())
    cams_ba, _, _ = ba_full(scene, cams_init, "polynomial")
    cfg = calib.CalibConfig(rbar=1.0, shape="barrel")
    result, cams, trace = aso_loop(scene, cams_ba, cfg, iterations=3)
    assert trace[-1] <= 1e-4
    assert np.abs(np.array(result.model.k) - BARREL.k).max() <= 1e-3


def test_aso_single_iteration_is_so_composition():
    scene = small_scene(seed=10)
    cams0 = perturb_cameras(scene.cameras, 10)
    cfg = calib.CalibConfig(rbar=1.0, shape="barrel")
    result, cams, trace = aso_loop(scene, cams0, cfg, iterations=1)
    cost = calib.assemble_cost(correspondences(scene, cams0))
    direct = calib.solve_shape(cost, cfg)
    assert np.allclose(result.model.k, direct.model.k, atol=1e-12)
    assert len(trace) == 1


def test_run_experiment_noiseless_consistency():
    cfg = ExperimentConfig(shape="barrel", sigmas=(0.0,), trials=1, seed=1,
                           scene=SceneConfig(target_rows=8, target_cols=8,
                                             cameras=4))
    report = run_experiment(cfg)
    assert not report.config["errors"]
    methods = {r["method"] for r in report.records}
    assert methods == {"BA", "SO", "ASO"}
    for rec in report.records:
        assert rec["calib_rms"] <= 1e-3
        if rec["method"] in ("SO", "ASO"):
            assert rec["shape_violations"] == 0


def test_experiment_report_roundtrip_and_csv():
    cfg = ExperimentConfig(shape="barrel", sigmas=(0.0,), trials=1, seed=2,
                           scene=SceneConfig(target_rows=6, target_cols=6,
                                             cameras=3))
    report = run_experiment(cfg)
    text = report.to_json()
    back = ExperimentReport.from_json(text)
    assert back.to_json() == text
    csv = report.to_csv()
    assert csv.splitlines()[0] == \
        "method,sigma,trial,calib_rms,valid_rms,shape_violations"
    assert len(csv.splitlines()) == len(report.records) + 1


def test_scene_json_roundtrip():
    scene = small_scene(seed=12)
    text = scene_to_json(scene)
    back = scene_from_json(text)
    assert np.array_equal(back.target, scene.target)
    assert np.array_equal(back.pixels[0], scene.pixels[0])
    assert back.true_model == scene.true_model
    assert scene_to_json(back) == text


def test_positivity_aso_keeps_denominator_clear():
    model = pipeline.DEFAULT_TRUE_MODELS["positivity"]
    cfg = SceneConfig(target_rows=8, target_cols=8, cameras=3)
    scene = generate_scene(cfg, model, 13)
    noisy = add_noise(scene, 1.0)
    cams0 = perturb_cameras(scene.cameras, 13)
    cams_init, _, _ = ba_refine(noisy, cams0, DistortionModel.identity())
    ccfg = calib.CalibConfig(rbar=1.0, margin_p=0.1, shape="positivity")
    result, cams, trace = aso_loop(noisy, cams_init, ccfg, iterations=3)
    rs = np.linspace(0, 1.0, 2001)
    g = np.polyval(np.array(result.model.g_coeffs)[::-1], rs)
    assert g.min() >= 0.1 - 1e-6
