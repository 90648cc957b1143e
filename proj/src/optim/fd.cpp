#include <cmath>

#include "pdeop/optim.hpp"

namespace pdeop::optim {

FdResult fd_gradient(const Objective& f, const Vec& x, const FdScheme& scheme) {
    if (!(scheme.eta > 0.0)) throw ConfigError("FD relative step must be positive");
    const auto n = x.size();
    FdResult r;
    r.gradient.resize(n);
    auto eval = [&](const Vec& p, Eigen::Index coord) {
        const double v = f(p);
        ++r.evaluations;
        if (!std::isfinite(v))
            throw NumericalError(coord < 0 ? "objective is not finite at the base point"
                                           : "objective is not finite when perturbing coordinate " +
                                                 std::to_string(coord));
        return v;
    };
    Vec p = x;
    if (scheme.kind == FdKind::Forward) {
        r.value = eval(x, -1);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double eps = scheme.eta * (1.0 + std::abs(x[j]));
            p[j] = x[j] + eps;
            r.gradient[j] = (eval(p, j) - r.value) / eps;
            p[j] = x[j];
        }
    } else {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double eps = scheme.eta * (1.0 + std::abs(x[j]));
            p[j] = x[j] + eps;
            const double fp = eval(p, j);
            p[j] = x[j] - eps;
            const double fm = eval(p, j);
            p[j] = x[j];
            r.gradient[j] = (fp - fm) / (2.0 * eps);
        }
    }
    return r;
}

}  // namespace pdeop::optim
