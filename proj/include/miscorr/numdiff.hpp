#ifndef MISCORR_NUMDIFF_HPP
#define MISCORR_NUMDIFF_HPP

#include "core.hpp"

namespace miscorr
{

/// Central finite-difference gradient of a scalar function.
template <class F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h = 1e-5)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double step = h * std::max(1.0, std::abs(x[k]));
        xp[k] = x[k] + step;
        const double fp = f(xp);
        xp[k] = x[k] - step;
        const double fm = f(xp);
        xp[k] = x[k];
        g[k] = (fp - fm) / (2.0 * step);
    }
    return g;
}

/// Hessian from central differences of an analytic gradient, symmetrized.
template <class G>
Eigen::MatrixXd fd_hessian_from_gradient(G&& grad, const Eigen::VectorXd& x, double h = 1e-5)
{
    const Eigen::Index d = x.size();
    Eigen::MatrixXd H(d, d);
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double step = h * std::max(1.0, std::abs(x[k]));
        xp[k] = x[k] + step;
        const Eigen::VectorXd gp = grad(xp);
        xp[k] = x[k] - step;
        const Eigen::VectorXd gm = grad(xp);
        xp[k] = x[k];
        H.col(k) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (H + H.transpose());
}

/// Standard errors from the observed information -H. Entries are NaN when
/// the information is not positive definite.
inline Eigen::VectorXd se_from_hessian(const Eigen::MatrixXd& H)
{
    const Eigen::Index d = H.rows();
    Eigen::VectorXd se = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    if (d == 0 || !H.allFinite()) return se;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) return se;
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
    for (Eigen::Index k = 0; k < d; ++k) se[k] = cov(k, k) > 0 ? std::sqrt(cov(k, k)) : se[k];
    return se;
}

} // namespace miscorr

#endif
