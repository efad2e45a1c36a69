import numpy as np
import pytest

from cograsp.embodiment import (
    GraspPose,
    GripperParams,
    default_hand_model,
    grasp_rotation,
    gripper_approach,
    hand_approach,
    hand_grasp_from_dict,
    pose_hand,
    render_gripper,
)
from cograsp.geometry import GRIPPER, HAND, RigidTransform
from cograsp.validation import ValidationError


@pytest.fixture(scope="module")
def hand():
    return default_hand_model()


def test_rotation_columns_right_handed():
    b, a = np.array([1.0, 0, 0]), np.array([0, 0, 1.0])
    R = grasp_rotation(b, a)
    assert np.array_equal(R[:, 0], b) and np.array_equal(R[:, 2], a)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_non_perpendicular_vectors_rejected():
    with pytest.raises(ValidationError):
        GraspPose.from_vectors([1.0, 0, 0], [0.6, 0, 0.8], np.zeros(3), 0.05)


def test_gripper_approach_is_third_column(random_transform):
    xf = random_transform()
    g = GraspPose(xf, 0.05)
    assert np.array_equal(gripper_approach(g), xf.rotation[:, 2])


class TestRenderGripper:
    def test_mask_and_count_independent_of_width(self):
        p = GripperParams()
        c1 = render_gripper(p, GraspPose(RigidTransform.identity(), 0.02))
        c2 = render_gripper(p, GraspPose(RigidTransform.identity(), 0.08))
        assert len(c1) == len(c2)
        assert np.all(c1.mask == GRIPPER)

    def test_finger_centres(self):
        p = GripperParams()
        w = 0.06
        pts = render_gripper(p, GraspPose(RigidTransform.identity(), w)).points
        fingers = pts[pts[:, 2] > -p.finger_length + 1e-9]
        left, right = fingers[fingers[:, 0] < 0], fingers[fingers[:, 0] > 0]
        assert left[:, 0].mean() == pytest.approx(-w / 2, abs=1e-9)
        assert right[:, 0].mean() == pytest.approx(w / 2, abs=1e-9)
        assert pts[:, 2].max() == pytest.approx(0.0, abs=1e-12)

    def test_width_over_max_rejected(self):
        with pytest.raises(ValidationError):
            render_gripper(GripperParams(), GraspPose(RigidTransform.identity(), 0.1))

    def test_pose_applied(self, random_transform):
        p = GripperParams()
        xf = random_transform()
        local = render_gripper(p, GraspPose(RigidTransform.identity(), 0.05)).points
        posed = render_gripper(p, GraspPose(xf, 0.05)).points
        assert np.allclose(posed, xf.apply(local), atol=1e-12)

    def test_spacing_must_be_below_thickness(self):
        with pytest.raises(ValidationError):
            GripperParams(sample_spacing=0.02)


class TestHand:
    def test_palm_normal_is_plus_z(self, hand):
        a = hand_approach(hand, RigidTransform.identity())
        assert np.allclose(a, [0, 0, 1.0], atol=1e-12)
        assert np.allclose(hand_approach(hand, RigidTransform.identity(), "area"), a, atol=1e-12)

    def test_approach_rotates_with_pose(self, hand, random_transform):
        xf = random_transform()
        assert np.allclose(hand_approach(hand, xf), xf.rotation[:, 2], atol=1e-12)

    def test_unknown_weighting(self, hand):
        with pytest.raises(ValidationError):
            hand_approach(hand, RigidTransform.identity(), "volume")

    def test_pose_hand(self, hand, random_transform):
        xf = random_transform()
        hg = pose_hand(hand, xf)
        assert np.all(hg.cloud.mask == HAND)
        assert np.allclose(hg.cloud.points, xf.apply(hand.surface_cloud.points), atol=1e-12)
        assert np.linalg.norm(hg.approach) == pytest.approx(1.0, abs=1e-12)

    def test_dict_round_trip(self, hand, random_transform):
        hg = pose_hand(hand, random_transform(), clearance=0.02)
        back = hand_grasp_from_dict(hg.to_dict(), hand)
        assert np.allclose(back.cloud.points, hg.cloud.points, atol=1e-12)
        assert back.clearance == 0.02

    def test_model_mismatch(self, hand):
        d = pose_hand(hand, RigidTransform.identity()).to_dict()
        d["model_id"] = "other"
        with pytest.raises(ValidationError):
            hand_grasp_from_dict(d, hand)

    def test_transformed_matches_pose_hand(self, hand, random_transform):
        a, b = random_transform(), random_transform()
        hg = pose_hand(hand, a).transformed(b)
        ref = pose_hand(hand, b.compose(a))
        assert np.allclose(hg.cloud.points, ref.cloud.points, atol=1e-12)
        assert np.allclose(hg.approach, ref.approach, atol=1e-12)


def test_grasp_pose_round_trip(random_transform):
    g = GraspPose(random_transform(), 0.05, (3, 7), np.arange(6.0).reshape(2, 3))
    back = GraspPose.from_dict(g.to_dict())
    assert np.array_equal(back.pose.rotation, g.pose.rotation)
    assert back.contact_indices == (3, 7)
    assert np.array_equal(back.contact_points, g.contact_points)


def test_approach_after_quarter_turn_about_x():
    Rx = np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
    assert np.allclose(gripper_approach(GraspPose(RigidTransform(Rx, np.zeros(3)), 0.05)), [0, -1.0, 0], atol=1e-12)


def test_finger_centroids_sixty_mm_apart():
    pts = render_gripper(GripperParams(), GraspPose(RigidTransform.identity(), 0.06)).points
    fingers = pts[pts[:, 2] > -GripperParams().finger_length + 1e-9]
    gap = fingers[fingers[:, 0] > 0, 0].mean() - fingers[fingers[:, 0] < 0, 0].mean()
    assert abs(gap - 0.06) <= 0.001


def test_palm_normal_average_of_two_faces():
    from cograsp.embodiment import HandModel
    from cograsp.geometry import PointCloud, TriangleMesh

    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1]], dtype=float)
    mesh = TriangleMesh(verts, np.array([[0, 1, 2], [0, 2, 4]]))
    assert np.allclose(mesh.face_normals(), [[0, 0, 1], [1, 0, 0]])
    model = HandModel(mesh, (0, 1), PointCloud(verts))
    s = 1 / np.sqrt(2)
    assert np.allclose(hand_approach(model, RigidTransform.identity()), [s, 0, s], atol=1e-9)
