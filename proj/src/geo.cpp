#include "fleetmind/geo.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "fleetmind/errors.hpp"

namespace fleetmind::geo {

namespace {

Eigen::Matrix3d to_eigen(const RigidTransform& t) {
    Eigen::Matrix3d m;
    m << t.r[0], t.r[1], t.r[2], t.r[3], t.r[4], t.r[5], t.r[6], t.r[7], t.r[8];
    return m;
}

Eigen::Vector3d to_eigen(const Vec3& v) { return {v.x, v.y, v.z}; }

RigidTransform from_eigen(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    RigidTransform out;
    out.r = {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2)};
    out.t = {t.x(), t.y(), t.z()};
    return out;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
    double theta = w.norm();
    if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(w);
    Eigen::Matrix3d k = skew(w / theta);
    return Eigen::Matrix3d::Identity() + std::sin(theta) * k +
           (1.0 - std::cos(theta)) * k * k;
}

constexpr double kStepTol = 1e-10;
constexpr int kMaxIterations = 100;

}  // namespace

Vec2 project_map(const MapProjection& proj, const Vec3& p) {
    return {proj.scale * p.x + proj.offset.x, proj.scale * p.y + proj.offset.y};
}

Vec2 project_pinhole(const CameraIntrinsics& K, const Vec3& p) {
    if (p.z <= 0.0) throw Error(Err::BehindCamera, "point at non-positive depth");
    return {K.fx * p.x / p.z + K.cx, K.fy * p.y / p.z + K.cy};
}

RigidTransform apply_increment(const RigidTransform& pose, const Vec3& rot_vec,
                               const Vec3& trans_vec) {
    Eigen::Matrix3d r = exp_so3(to_eigen(rot_vec)) * to_eigen(pose);
    Eigen::Vector3d t = to_eigen(pose.t) + to_eigen(trans_vec);
    return from_eigen(r, t);
}

RigidFitResult solve_rigid_3d3d(const std::vector<std::pair<Vec3, Vec3>>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 3) throw Error(Err::DegenerateConfiguration, "need at least 3 pairs");

    Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
    for (const auto& [src, dst] : pairs) {
        src_mean += to_eigen(src);
        dst_mean += to_eigen(dst);
    }
    src_mean /= static_cast<double>(n);
    dst_mean /= static_cast<double>(n);

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (const auto& [src, dst] : pairs)
        h += (to_eigen(src) - src_mean) * (to_eigen(dst) - dst_mean).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // Rank < 2 means the points span at most a line.
    if (svd.singularValues()(1) < 1e-12 * std::max(1.0, svd.singularValues()(0)))
        throw Error(Err::DegenerateConfiguration, "collinear or coincident points");

    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
    Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    Eigen::Vector3d t = dst_mean - r * src_mean;

    double sq_sum = 0.0;
    for (const auto& [src, dst] : pairs)
        sq_sum += (r * to_eigen(src) + t - to_eigen(dst)).squaredNorm();

    RigidFitResult result;
    result.transform = from_eigen(r, t);
    result.rms = std::sqrt(sq_sum / static_cast<double>(n));
    return result;
}

ResidualReport map_alignment_residual(const std::vector<Vec3>& points,
                                      const std::vector<Vec2>& targets, const MapProjection& proj,
                                      const RigidTransform& pose) {
    ResidualReport report;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec2 projected = project_map(proj, pose.apply(points[i]));
        Vec2 r = projected - targets[i];
        sq_sum += r.x * r.x + r.y * r.y;
        report.residuals.push_back(r);
    }
    report.rms = points.empty() ? 0.0 : std::sqrt(sq_sum / static_cast<double>(points.size()));
    return report;
}

MapAlignResult solve_map_alignment(const std::vector<Vec3>& points,
                                   const std::vector<Vec2>& targets, const MapProjection& proj,
                                   const RigidTransform& init) {
    const std::size_t n = points.size();
    if (n < 4 || targets.size() != n)
        throw Error(Err::DegenerateConfiguration, "need at least 4 correspondences");

    Eigen::Matrix3d r = to_eigen(init);
    Eigen::Vector3d t = to_eigen(init.t);

    auto cost_of = [&](const Eigen::Matrix3d& rot, const Eigen::Vector3d& trans) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector3d p = rot * to_eigen(points[i]) + trans;
            double rx = proj.scale * p.x() + proj.offset.x - targets[i].x;
            double ry = proj.scale * p.y() + proj.offset.y - targets[i].y;
            c += rx * rx + ry * ry;
        }
        return c;
    };

    double cost = cost_of(r, t);
    MapAlignResult result;
    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        Eigen::MatrixXd jac(2 * n, 6);
        Eigen::VectorXd res(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector3d p = r * to_eigen(points[i]) + t;
            res(2 * i) = proj.scale * p.x() + proj.offset.x - targets[i].x;
            res(2 * i + 1) = proj.scale * p.y() + proj.offset.y - targets[i].y;
            // d(exp(w)p + dt)/dw = -[p]x ; d/dt = I ; projection keeps x,y rows.
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << proj.scale, 0, 0, 0, proj.scale, 0;
            Eigen::Matrix<double, 2, 3> jw = dproj * (-skew(p));
            jac.block<2, 3>(2 * i, 0) = jw;
            jac.block<2, 3>(2 * i, 3) = dproj;
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-9);
        Eigen::VectorXd step = svd.solve(-res);  // minimum-norm over the nullspace
        if (!step.allFinite()) throw Error(Err::NoConvergence, "non-finite step");
        if (step.norm() < kStepTol) break;

        double scale = 1.0;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            Eigen::Matrix3d r_try = exp_so3(scale * step.head<3>()) * r;
            Eigen::Vector3d t_try = t + scale * step.tail<3>();
            double cost_try = cost_of(r_try, t_try);
            if (cost_try <= cost) {
                r = r_try;
                t = t_try;
                cost = cost_try;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;  // converged to numerical floor
        if (scale * step.norm() < kStepTol) break;
    }
    if (iter >= kMaxIterations && cost > 1e-6 * static_cast<double>(n))
        throw Error(Err::NoConvergence, "iteration cap hit at cost " + std::to_string(cost));

    // Nullspace check at the solution: a singular direction aligned with t_z.
    {
        Eigen::MatrixXd jac(2 * n, 6);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector3d p = r * to_eigen(points[i]) + t;
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << proj.scale, 0, 0, 0, proj.scale, 0;
            jac.block<2, 3>(2 * i, 0) = dproj * (-skew(p));
            jac.block<2, 3>(2 * i, 3) = dproj;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv(5) < 1e-9 * std::max(1.0, sv(0))) {
            Eigen::VectorXd dir = svd.matrixV().col(5);
            if (std::fabs(dir(5)) > 0.99) result.z_unobservable = true;
        }
    }

    result.transform = from_eigen(r, t);
    result.cost = cost;
    result.iterations = iter;
    return result;
}

ResidualReport reprojection_residual(const std::vector<Correspondence3D2D>& pairs,
                                     const CameraIntrinsics& K, const RigidTransform& pose) {
    ResidualReport report;
    double sq_sum = 0.0;
    for (const auto& c : pairs) {
        Vec2 projected = project_pinhole(K, pose.apply(c.point));
        Vec2 r = projected - c.pixel;
        sq_sum += r.x * r.x + r.y * r.y;
        report.residuals.push_back(r);
    }
    report.rms = pairs.empty() ? 0.0 : std::sqrt(sq_sum / static_cast<double>(pairs.size()));
    return report;
}

PnpResult solve_pnp(const std::vector<Correspondence3D2D>& pairs, const CameraIntrinsics& K,
                    const RigidTransform& init) {
    const std::size_t n = pairs.size();
    if (n < 6) throw Error(Err::DegenerateConfiguration, "need at least 6 correspondences");

    Eigen::Matrix3d r = to_eigen(init);
    Eigen::Vector3d t = to_eigen(init.t);

    auto cost_of = [&](const Eigen::Matrix3d& rot, const Eigen::Vector3d& trans, bool* ok) {
        double c = 0.0;
        *ok = true;
        for (const auto& corr : pairs) {
            Eigen::Vector3d p = rot * to_eigen(corr.point) + trans;
            if (p.z() <= 0.0) {
                *ok = false;
                return 0.0;
            }
            double rx = K.fx * p.x() / p.z() + K.cx - corr.pixel.x;
            double ry = K.fy * p.y() / p.z() + K.cy - corr.pixel.y;
            c += rx * rx + ry * ry;
        }
        return c;
    };

    bool in_front = true;
    double cost = cost_of(r, t, &in_front);
    if (!in_front) throw Error(Err::BehindCamera, "a point starts behind the initial camera");

    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        Eigen::MatrixXd jac(2 * n, 6);
        Eigen::VectorXd res(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector3d p = r * to_eigen(pairs[i].point) + t;
            if (p.z() <= 0.0) throw Error(Err::BehindCamera, "point crossed the image plane");
            double inv_z = 1.0 / p.z();
            res(2 * i) = K.fx * p.x() * inv_z + K.cx - pairs[i].pixel.x;
            res(2 * i + 1) = K.fy * p.y() * inv_z + K.cy - pairs[i].pixel.y;
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << K.fx * inv_z, 0, -K.fx * p.x() * inv_z * inv_z, 0, K.fy * inv_z,
                -K.fy * p.y() * inv_z * inv_z;
            jac.block<2, 3>(2 * i, 0) = dproj * (-skew(p));
            jac.block<2, 3>(2 * i, 3) = dproj;
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-12);
        Eigen::VectorXd step = svd.solve(-res);
        if (!step.allFinite()) throw Error(Err::NoConvergence, "non-finite step");
        if (step.norm() < kStepTol) break;

        double scale = 1.0;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            Eigen::Matrix3d r_try = exp_so3(scale * step.head<3>()) * r;
            Eigen::Vector3d t_try = t + scale * step.tail<3>();
            bool ok = true;
            double cost_try = cost_of(r_try, t_try, &ok);
            if (ok && cost_try <= cost) {
                r = r_try;
                t = t_try;
                cost = cost_try;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
        if (scale * step.norm() < kStepTol) break;
    }
    if (iter >= kMaxIterations && cost > 1e-6 * static_cast<double>(n))
        throw Error(Err::NoConvergence, "iteration cap hit at cost " + std::to_string(cost));

    PnpResult result;
    result.pose = from_eigen(r, t);
    result.rms = std::sqrt(cost / static_cast<double>(n));
    result.iterations = iter;
    return result;
}

}  // namespace fleetmind::geo
