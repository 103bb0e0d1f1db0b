"""Uncertainty propagation, inverse-uncertainty fusion, and the loss."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from keyedge.geometry import BoxPose3D, CameraIntrinsics, normalize_angle, project_keyedges
from keyedge.indexing import RatioTuple, camera_centric_view, to_object_centric_tuples
from keyedge.recovery import (
    PoseEstimate,
    UnobservableDistortion,
    center_depth,
    solve_all,
    solve_tuple,
)
from keyedge.uncertainty import (
    EmptyInput,
    FusedEstimate,
    NonPositiveSigma,
    RatioWithSigma,
    depth_partials,
    fuse,
    propagate_sigma,
    uncertainty_loss,
)
from oracles import central_difference

INTR = CameraIntrinsics(focal_length=721.5377, principal_point=(609.5593, 172.854))

D_A = 10.0 + math.sqrt(3)
TUPLE_B = RatioTuple("b", D_A / 10.0, 1.2)


def d_obj_of(reference, r1, r2, length, width):
    t = RatioTuple(reference, r1, r2)
    theta, d_ref = solve_tuple(t, length, width)
    return center_depth(theta, d_ref, reference, length, width)


def fd_partials(t, length, width, step=1e-6):
    p1 = central_difference(lambda r: d_obj_of(t.reference, r, t.r2, length, width), t.r1, step)
    p2 = central_difference(lambda r: d_obj_of(t.reference, t.r1, r, length, width), t.r2, step)
    return p1, p2


@st.composite
def random_tuples(draw):
    reference = draw(st.sampled_from("abcd"))
    r1 = draw(st.floats(0.7, 1.4))
    r2 = draw(st.floats(0.7, 1.4))
    assume(max(abs(r1 - 1.0), abs(r2 - 1.0)) > 1e-3)
    length = draw(st.floats(2.5, 6.0))
    width = draw(st.floats(1.2, 2.5))
    return RatioTuple(reference, r1, r2), length, width


class TestDepthPartials:
    def test_worked_scene_matches_finite_differences(self):
        p1, p2 = depth_partials(TUPLE_B, length=4.0, width=2.0)
        f1, f2 = fd_partials(TUPLE_B, 4.0, 2.0)
        assert p1 == pytest.approx(f1, rel=1e-6)
        assert p2 == pytest.approx(f2, rel=1e-6)

    def test_symmetric_case(self):
        # square footprint with equal distortions: the two partials agree
        t = RatioTuple("b", 1.15, 1.15)
        p1, p2 = depth_partials(t, length=2.0, width=2.0)
        assert p1 == pytest.approx(p2, rel=1e-12)

    def test_degenerate_propagates(self):
        with pytest.raises(UnobservableDistortion):
            depth_partials(RatioTuple("b", 1.0, 1.0), length=4.0, width=2.0)

    @given(random_tuples())
    @settings(max_examples=200)
    def test_matches_finite_differences(self, case):
        t, length, width = case
        # keep the difference quotient well conditioned
        try:
            d = d_obj_of(t.reference, t.r1, t.r2, length, width)
        except Exception:
            assume(False)
        assume(d < 1e4)
        p1, p2 = depth_partials(t, length, width)
        f1, f2 = fd_partials(t, length, width, step=1e-6 * max(1.0, abs(t.r1)))
        scale = max(abs(p1), abs(p2), 1e-9)
        assert abs(p1 - f1) / scale < 1e-5
        assert abs(p2 - f2) / scale < 1e-5

    @given(random_tuples(), st.floats(0.3, 3.0))
    def test_distortion_scaling_identity(self, case, lam):
        # scaling both (r - 1) by lam scales d_ref by 1/lam; the partial
        # formula tracks it exactly
        t, length, width = case
        scaled = RatioTuple(t.reference, 1.0 + lam * (t.r1 - 1.0), 1.0 + lam * (t.r2 - 1.0))
        _, d_ref = solve_tuple(t, length, width)
        _, d_ref_scaled = solve_tuple(scaled, length, width)
        assert d_ref_scaled == pytest.approx(d_ref / lam, rel=1e-9)


class TestPropagateSigma:
    def test_zero_sigmas(self):
        assert propagate_sigma((-46.0, -9.8), 0.0, 0.0) == 0.0

    def test_linearity_in_common_sigma(self):
        p = (-3.0, 4.0)
        assert propagate_sigma(p, 0.5, 0.5) == pytest.approx((3.0 + 4.0) * 0.5)

    def test_worked_scene_hand_sum(self):
        p1, p2 = depth_partials(TUPLE_B, length=4.0, width=2.0)
        got = propagate_sigma((p1, p2), 0.01, 0.01)
        assert got == pytest.approx((abs(p1) + abs(p2)) * 0.01, rel=1e-12)

    def test_negative_sigma_rejected(self):
        with pytest.raises(NonPositiveSigma):
            propagate_sigma((1.0, 1.0), -0.1, 0.1)


class TestFuse:
    def estimates(self, depths, thetas=None):
        thetas = thetas or [0.1] * len(depths)
        return [
            PoseEstimate(theta=t, d_ref=d, d_obj=d, reference="abcd"[i % 4])
            for i, (d, t) in enumerate(zip(depths, thetas))
        ]

    def test_fixture(self):
        members = list(zip(self.estimates([10.0, 12.0]), [1.0, 2.0]))
        fused = fuse(members)
        assert fused.d_fusion == pytest.approx((10.0 / 1.0 + 12.0 / 2.0) / 1.5, abs=1e-12)
        assert fused.d_fusion == pytest.approx(10.6667, abs=1e-4)

    def test_equal_sigma_is_mean(self):
        members = list(zip(self.estimates([9.0, 10.0, 14.0]), [0.7, 0.7, 0.7]))
        assert fuse(members).d_fusion == pytest.approx(11.0, abs=1e-12)

    def test_dominant_member_limit(self):
        members = list(zip(self.estimates([10.0, 12.0]), [1e-9, 1.0]))
        assert fuse(members).d_fusion == pytest.approx(10.0, abs=1e-6)

    def test_weights_normalized_and_recorded(self):
        members = list(zip(self.estimates([10.0, 12.0]), [1.0, 2.0]))
        fused = fuse(members)
        weights = [w for _, _, w in fused.per_tuple]
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)
        assert weights[0] == pytest.approx(2.0 / 3.0)
        assert isinstance(fused, FusedEstimate)

    def test_circular_mean_yaw(self):
        # two yaws straddling the wrap line average to the wrap line
        members = list(
            zip(self.estimates([10.0, 10.0], thetas=[math.pi - 0.1, -math.pi + 0.1]), [1.0, 1.0])
        )
        fused = fuse(members)
        assert abs(normalize_angle(fused.theta_fusion - (-math.pi))) < 1e-9

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            fuse([])

    def test_non_positive_sigma(self):
        with pytest.raises(NonPositiveSigma):
            fuse(list(zip(self.estimates([10.0]), [0.0])))

    @given(
        st.lists(st.floats(5.0, 50.0), min_size=1, max_size=6),
        st.data(),
    )
    def test_hull_permutation_rescale(self, depths, data):
        sigmas = [data.draw(st.floats(0.1, 5.0)) for _ in depths]
        members = list(zip(self.estimates(depths), sigmas))
        fused = fuse(members)
        assert min(depths) - 1e-9 <= fused.d_fusion <= max(depths) + 1e-9
        rng = np.random.default_rng(0)
        perm = list(rng.permutation(len(members)))
        fused_perm = fuse([members[i] for i in perm])
        assert fused_perm.d_fusion == pytest.approx(fused.d_fusion, rel=1e-12)
        rescaled = fuse([(e, s * 7.5) for e, s in members])
        assert rescaled.d_fusion == pytest.approx(fused.d_fusion, rel=1e-12)


class TestUncertaintyLoss:
    def test_zero_residual_unit_sigma(self):
        assert uncertainty_loss(1.0, 1.0, 1.0) == 0.0

    def test_fixture(self):
        assert uncertainty_loss(1.2, 0.1, 1.0) == pytest.approx(-0.302585, abs=1e-6)

    def test_minimizer_at_residual(self):
        residual = 0.37
        grid = np.linspace(0.01, 2.0, 4000)
        values = [uncertainty_loss(1.0 + residual, s, 1.0) for s in grid]
        best = grid[int(np.argmin(values))]
        assert best == pytest.approx(residual, abs=grid[1] - grid[0])

    def test_non_positive_sigma(self):
        with pytest.raises(NonPositiveSigma):
            uncertainty_loss(1.2, 0.0, 1.0)

    @given(st.floats(0.05, 2.0), st.floats(0.05, 2.0))
    def test_convex_beyond_minimum(self, e, offset):
        # along sigma > |r - r*| the loss increases
        s1 = e + offset
        s2 = e + offset * 2.0
        l1 = uncertainty_loss(1.0 + e, s1, 1.0)
        l2 = uncertainty_loss(1.0 + e, s2, 1.0)
        assert l2 >= l1 - 1e-12


class TestEndToEnd:
    def test_noise_free_pipeline_recovers_truth(self):
        pose = BoxPose3D(center=(3.0, 0.9, 22.0), dims=(4.4, 1.8, 1.5), yaw=0.8)
        obs = project_keyedges(pose, INTR)
        tuples = to_object_centric_tuples(camera_centric_view(obs))
        estimates, skipped = solve_all(tuples, length=pose.length, width=pose.width)
        assert not skipped
        members = []
        for est, t in zip(estimates, tuples):
            partials = depth_partials(t, pose.length, pose.width)
            sigma_d = propagate_sigma(partials, 0.01, 0.01)
            members.append((est, sigma_d))
        fused = fuse(members)
        assert fused.d_fusion == pytest.approx(pose.z, rel=1e-9)
        assert abs(normalize_angle(fused.theta_fusion - pose.yaw)) < 1e-9

    def test_ratio_with_sigma_validation(self):
        with pytest.raises(NonPositiveSigma):
            RatioWithSigma(TUPLE_B, sigma1=0.0, sigma2=0.1)
