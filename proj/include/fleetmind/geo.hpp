#pragma once

#include <utility>
#include <vector>

#include "fleetmind/transform.hpp"

namespace fleetmind::geo {

struct CameraIntrinsics {
    double fx = 500.0;
    double fy = 500.0;
    double cx = 320.0;
    double cy = 240.0;
};

struct Correspondence3D2D {
    Vec3 point;
    Vec2 pixel;
};

/// Top-down orthographic map projection: drop z, scale, offset.
struct MapProjection {
    double scale = 1.0;
    Vec2 offset;
};

Vec2 project_map(const MapProjection& proj, const Vec3& p);

/// Pinhole projection with perspective division. Throws BehindCamera for
/// non-positive depth.
Vec2 project_pinhole(const CameraIntrinsics& K, const Vec3& p_cam);

struct RigidFitResult {
    RigidTransform transform;
    double rms = 0.0;
};

/// Closed-form least-squares rigid fit (centroid + orthogonal Procrustes,
/// reflection-corrected). Needs >= 3 non-collinear pairs; maps first onto
/// second.
RigidFitResult solve_rigid_3d3d(const std::vector<std::pair<Vec3, Vec3>>& pairs);

struct MapAlignResult {
    RigidTransform transform;
    double cost = 0.0;
    int iterations = 0;
    bool z_unobservable = false;
};

/// Gauss-Newton over SE(3) for sum ||proj(T X_j) - y_j||^2 with axis-angle
/// increments and step halving; stops at step norm < 1e-10 or 100 iters.
/// The top-down projection leaves t_z in the nullspace; the flag reports it
/// and the minimum-norm step keeps t_z at its initial value.
MapAlignResult solve_map_alignment(const std::vector<Vec3>& points,
                                   const std::vector<Vec2>& targets, const MapProjection& proj,
                                   const RigidTransform& init);

struct PnpResult {
    RigidTransform pose;
    double rms = 0.0;  // pixels
    int iterations = 0;
};

/// Gauss-Newton pose refinement of the reprojection objective. Needs >= 6
/// correspondences in front of the initial camera.
PnpResult solve_pnp(const std::vector<Correspondence3D2D>& pairs, const CameraIntrinsics& K,
                    const RigidTransform& init);

struct ResidualReport {
    std::vector<Vec2> residuals;  // projected - observed
    double rms = 0.0;
};

ResidualReport reprojection_residual(const std::vector<Correspondence3D2D>& pairs,
                                     const CameraIntrinsics& K, const RigidTransform& pose);

ResidualReport map_alignment_residual(const std::vector<Vec3>& points,
                                      const std::vector<Vec2>& targets, const MapProjection& proj,
                                      const RigidTransform& pose);

/// exp(w^) composed onto pose (left action); used by the solvers and by the
/// finite-difference checks in tests.
RigidTransform apply_increment(const RigidTransform& pose, const Vec3& rot_vec,
                               const Vec3& trans_vec);

}  // namespace fleetmind::geo
