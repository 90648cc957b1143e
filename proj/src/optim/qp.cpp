#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "pdeop/optim.hpp"

namespace pdeop::optim {

double qp_kkt_residual(const Mat& h, const Vec& q, const Vec& x, const Box& box) {
    return projected_gradient_norm(x, h * x + q, box);
}

namespace {

// Solves on the coordinates strictly inside the box with the rest fixed; returns
// false when the candidate leaves the box.
bool free_set_solve(const Mat& h, const Vec& q, const Box& box, const Vec& x, Vec& out) {
    const auto n = x.size();
    std::vector<Eigen::Index> f;
    for (Eigen::Index i = 0; i < n; ++i)
        if (x[i] > box.lower[i] && x[i] < box.upper[i]) f.push_back(i);
    out = x;
    if (f.empty()) return true;
    const auto m = static_cast<Eigen::Index>(f.size());
    Mat hff(m, m);
    Vec rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        double r = -q[f[a]];
        for (Eigen::Index j = 0; j < n; ++j)
            if (!(x[j] > box.lower[j] && x[j] < box.upper[j])) r -= h(f[a], j) * x[j];
        rhs[a] = r;
        for (Eigen::Index b = 0; b < m; ++b) hff(a, b) = h(f[a], f[b]);
    }
    Eigen::LDLT<Mat> ldlt(hff);
    if (ldlt.info() != Eigen::Success) return false;
    Vec z = ldlt.solve(rhs);
    if (!z.allFinite()) return false;
    for (Eigen::Index a = 0; a < m; ++a) {
        if (z[a] < box.lower[f[a]] || z[a] > box.upper[f[a]]) return false;
        out[f[a]] = z[a];
    }
    return true;
}

}  // namespace

QpResult solve_box_qp(const Mat& h, const Vec& q, const Box& box, const QpOptions& opts) {
    const auto n = q.size();
    if (h.rows() != n || h.cols() != n) throw DimensionError("QP Hessian does not match q");
    box.validate(static_cast<int>(n));
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw ConfigError("QP Hessian is not symmetric");
    {
        Eigen::LLT<Mat> llt(h + 1e-10 * scale * Mat::Identity(n, n));
        if (llt.info() != Eigen::Success) throw ConfigError("QP Hessian is not positive semi-definite");
    }
    QpResult r;
    r.x = box.project(Vec::Zero(n));
    if (n == 0) return r;
    const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) {
        // H == 0: the minimizer sits at the bound opposite to q
        for (Eigen::Index i = 0; i < n; ++i)
            r.x[i] = q[i] > 0 ? box.lower[i] : (q[i] < 0 ? box.upper[i] : r.x[i]);
        r.kkt_residual = qp_kkt_residual(h, q, r.x, box);
        return r;
    }
    const double step = 1.0 / lmax;
    Vec x = r.x, y = x, x_prev = x;
    double t = 1.0;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        x_prev = x;
        x = box.project(y - step * (h * y + q));
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if ((y - x).dot(x - x_prev) > 0.0) {
            // momentum is fighting descent: restart
            t = 1.0;
            y = x;
        } else {
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
        }
        r.iterations = it;
        if (it % opts.polish_every == 0) {
            Vec cand;
            if (free_set_solve(h, q, box, x, cand) &&
                qp_kkt_residual(h, q, cand, box) <= opts.tolerance) {
                r.x = cand;
                r.kkt_residual = qp_kkt_residual(h, q, cand, box);
                return r;
            }
        }
        if (qp_kkt_residual(h, q, x, box) <= opts.tolerance) break;
    }
    r.x = x;
    r.kkt_residual = qp_kkt_residual(h, q, x, box);
    return r;
}

}  // namespace pdeop::optim
