#include "nnls.hpp"

#include <cmath>
#include <vector>

namespace avarkit::detail {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<bool>& passive) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
    if (cols.empty()) return z;
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = s(static_cast<Eigen::Index>(c));
    return z;
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b, int max_iterations) {
    const Eigen::Index n = a_in.cols();
    Eigen::VectorXd scale(n);
    Eigen::MatrixXd a = a_in;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double norm = a.col(j).norm();
        scale(j) = norm > 0.0 ? norm : 1.0;
        a.col(j) /= scale(j);
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-13 * std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());

    for (int outer = 0; outer < max_iterations; ++outer) {
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        for (int inner = 0; inner < max_iterations; ++inner) {
            const Eigen::VectorXd z = solve_passive(a, b, passive);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            }
            if (feasible) {
                x = z;
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
                    const double denom = x(j) - z(j);
                    if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
                }
            }
            x += alpha * (z - x);
            const double floor = 1e-14 * x.cwiseAbs().maxCoeff();
            bool any_passive = false;
            for (Eigen::Index j = 0; j < n; ++j) {
                auto idx = static_cast<std::size_t>(j);
                if (passive[idx] && x(j) <= floor) {
                    passive[idx] = false;
                    x(j) = 0.0;
                }
                any_passive = any_passive || passive[idx];
            }
            if (!any_passive) break;
        }
    }
    return x.cwiseQuotient(scale);
}

}  // namespace avarkit::detail
