#ifndef MISCORR_GLM_HPP
#define MISCORR_GLM_HPP

// Weighted logistic, Poisson and linear regression. Every M-step in the
// package reduces to one of these fits.

#include "core.hpp"

#include <optional>

namespace miscorr
{

/// Regression design with a leading intercept column.
class DesignMatrix
{
public:
    DesignMatrix() = default;

    /// Takes a full design whose first column must be all ones.
    explicit DesignMatrix(Eigen::MatrixXd full) : m_(std::move(full)) { validate(); }

    /// Prepends the intercept column to a block of covariates (possibly zero columns).
    static DesignMatrix with_intercept(const Eigen::MatrixXd& covariates)
    {
        Eigen::MatrixXd full(covariates.rows(), covariates.cols() + 1);
        full.col(0).setOnes();
        full.rightCols(covariates.cols()) = covariates;
        return DesignMatrix(std::move(full));
    }

    static DesignMatrix intercept_only(Eigen::Index n)
    {
        return with_intercept(Eigen::MatrixXd(n, 0));
    }

    const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    Eigen::Index rows() const noexcept { return m_.rows(); }
    Eigen::Index cols() const noexcept { return m_.cols(); }
    auto row(Eigen::Index i) const { return m_.row(i); }

    /// Covariate columns without the intercept.
    Eigen::MatrixXd covariates() const { return m_.rightCols(m_.cols() - 1); }

    Eigen::VectorXd linear_predictor(const Eigen::VectorXd& coef) const
    {
        require_dims(coef.size() == m_.cols(),
                     "coefficient length " + std::to_string(coef.size()) + " does not match design with " +
                         std::to_string(m_.cols()) + " columns");
        return m_ * coef;
    }

    DesignMatrix select_rows(const std::vector<Eigen::Index>& idx) const
    {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m_.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m_.row(idx[r]);
        return DesignMatrix(std::move(out));
    }

private:
    void validate() const
    {
        require(m_.cols() >= 1, "design matrix needs an intercept column");
        require(m_.rows() >= m_.cols(), "design matrix has fewer rows (" + std::to_string(m_.rows()) +
                                            ") than columns (" + std::to_string(m_.cols()) + ")");
        require((m_.col(0).array() == 1.0).all(), "first design column must be all ones");
        require(m_.allFinite(), "design matrix contains non-finite entries");
    }

    Eigen::MatrixXd m_;
};

struct GlmFit
{
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd coef_covariance;
    double deviance = 0.0;
    bool converged = false;
    int iterations = 0;
    bool separated = false;  // a linear predictor hit the +/- kEtaCap bound
    double sigma = std::numeric_limits<double>::quiet_NaN();  // linear fits only

    Eigen::VectorXd se() const { return coef_covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

struct GlmControl
{
    int max_iter = 25;
    double tolerance = 1e-8;  // relative change in deviance
};

namespace detail
{

enum class Family { logistic, poisson };

inline void check_glm_inputs(const DesignMatrix& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w)
{
    require_dims(y.size() == X.rows(), "response length does not match design rows");
    require_dims(w.size() == X.rows(), "weight length does not match design rows");
    require(w.allFinite() && (w.array() >= 0.0).all(), "weights must be finite and nonnegative");
    require(w.sum() > 0.0, "all weights are zero");
    require(y.allFinite(), "response contains non-finite values");
}

inline double unit_deviance(Family f, double y, double mu)
{
    if (f == Family::logistic) {
        double d = 0.0;
        if (y > 0.0) d += y * std::log(y / mu);
        if (y < 1.0) d += (1.0 - y) * std::log((1.0 - y) / (1.0 - mu));
        return 2.0 * d;
    }
    double d = mu - y;
    if (y > 0.0) d += y * std::log(y / mu);
    return 2.0 * d;
}

inline double mean_from_eta(Family f, double eta)
{
    return f == Family::logistic ? expit(eta) : std::exp(clamp_eta(eta));
}

inline double deviance(Family f, const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& w)
{
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        dev += w[i] * unit_deviance(f, y[i], mean_from_eta(f, eta[i]));
    }
    return dev;
}

/// Solves min ||sqrt(W)(X b - z)|| through a rank-revealing QR of sqrt(W) X.
/// Returns nullopt when the weighted design is rank deficient.
inline std::optional<Eigen::VectorXd> weighted_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                                             const Eigen::VectorXd& W)
{
    const Eigen::VectorXd sw = W.cwiseSqrt();
    const Eigen::MatrixXd A = sw.asDiagonal() * X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < X.cols()) return std::nullopt;
    return Eigen::VectorXd(qr.solve(sw.cwiseProduct(z)));
}

inline Eigen::MatrixXd inverse_information(const Eigen::MatrixXd& X, const Eigen::VectorXd& W)
{
    const Eigen::MatrixXd info = X.transpose() * W.asDiagonal() * X;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(info);
    return cod.pseudoInverse();
}

// Largest t in [0, 1] keeping |eta_old + t (eta_new - eta_old)| <= kEtaCap.
inline double cap_step(const Eigen::VectorXd& eta_old, const Eigen::VectorXd& eta_new)
{
    double t = 1.0;
    for (Eigen::Index i = 0; i < eta_new.size(); ++i) {
        const double e = eta_new[i];
        if (std::abs(e) <= kEtaCap) continue;
        const double bound = e > 0 ? kEtaCap : -kEtaCap;
        const double step = e - eta_old[i];
        if (step != 0.0) t = std::min(t, std::max(0.0, (bound - eta_old[i]) / step));
    }
    return t;
}

inline GlmFit irls(Family family, const DesignMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   const std::optional<Eigen::VectorXd>& start, const GlmControl& ctl)
{
    const Eigen::MatrixXd& X = design.matrix();
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    auto working = [&](const Eigen::VectorXd& eta, Eigen::VectorXd& z, Eigen::VectorXd& W) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = mean_from_eta(family, eta[i]);
            const double dmu = family == Family::logistic ? mu * (1.0 - mu) : mu;
            const double d = std::max(dmu, 1e-300);
            z[i] = clamp_eta(eta[i]) + (y[i] - mu) / d;
            W[i] = w[i] * d;
        }
    };

    GlmFit fit;
    Eigen::VectorXd z(n), W(n);
    Eigen::VectorXd b;
    Eigen::VectorXd eta;

    // Responses all at the boundary of the mean space: the MLE is at infinity.
    const double wy = w.dot(y);
    const bool all_low = wy == 0.0;
    const bool all_high = family == Family::logistic && wy == w.sum();
    if (all_low || all_high) {
        fit.coefficients = Eigen::VectorXd::Zero(p);
        fit.coefficients[0] = all_low ? -kEtaCap : kEtaCap;
        eta = X * fit.coefficients;
        fit.deviance = deviance(family, eta, y, w);
        fit.separated = true;
        fit.converged = false;
        working(eta, z, W);
        fit.coef_covariance = inverse_information(X, W);
        return fit;
    }

    if (start) {
        require_dims(start->size() == p, "start vector length does not match design columns");
        b = *start;
        eta = X * b;
        const double m = eta.cwiseAbs().maxCoeff();
        if (!(m <= kEtaCap)) {
            b = std::isfinite(m) ? Eigen::VectorXd(b * (kEtaCap / m)) : Eigen::VectorXd::Zero(p);
            eta = X * b;
        }
    } else {
        // Initial working response from a shrunken mean, as in standard GLM software.
        Eigen::VectorXd eta0(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu0 = family == Family::logistic ? (w[i] * y[i] + 0.5) / (w[i] + 1.0) : y[i] + 0.1;
            eta0[i] = family == Family::logistic ? logit(mu0) : std::log(mu0);
        }
        working(eta0, z, W);
        auto sol = weighted_least_squares(X, z, W);
        b = sol ? *sol : Eigen::VectorXd::Zero(p);
        eta = X * b;
        const double m = eta.cwiseAbs().maxCoeff();
        if (m > kEtaCap) {
            b *= kEtaCap / m;
            eta = X * b;
        }
    }

    double dev = deviance(family, eta, y, w);
    bool rank_deficient = false;
    bool capped = false;
    int iter = 0;
    bool converged = false;
    for (iter = 1; iter <= ctl.max_iter; ++iter) {
        working(eta, z, W);
        auto sol = weighted_least_squares(X, z, W);
        if (!sol) {
            rank_deficient = true;
            break;
        }
        Eigen::VectorXd b_new = *sol;
        Eigen::VectorXd eta_new = X * b_new;
        const double t = cap_step(eta, eta_new);
        capped = t < 1.0;
        if (capped) {
            b_new = b + t * (b_new - b);
            eta_new = X * b_new;
        }
        double dev_new = deviance(family, eta_new, y, w);
        // Step halving keeps the deviance non-increasing.
        for (int h = 0; h < 30 && !(dev_new <= dev * (1.0 + 1e-14) + 1e-300); ++h) {
            b_new = 0.5 * (b_new + b);
            eta_new = X * b_new;
            dev_new = deviance(family, eta_new, y, w);
        }
        if (!(dev_new <= dev * (1.0 + 1e-14) + 1e-300)) {
            // no improving step exists along this direction
            converged = true;
            break;
        }
        const double change = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1);
        b = std::move(b_new);
        eta = std::move(eta_new);
        dev = dev_new;
        if (change < ctl.tolerance) {
            converged = true;
            break;
        }
    }

    fit.coefficients = b;
    fit.deviance = dev;
    fit.iterations = std::min(iter, ctl.max_iter);
    fit.separated = capped || (eta.cwiseAbs().maxCoeff() >= kEtaCap * (1.0 - 1e-9));
    fit.converged = converged && !rank_deficient && !fit.separated;
    working(eta, z, W);
    fit.coef_covariance = inverse_information(X, W);
    return fit;
}

} // namespace detail

/// Weighted logistic regression. Fractional responses in [0,1] are allowed.
inline GlmFit fit_weighted_logistic(const DesignMatrix& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                    const std::optional<Eigen::VectorXd>& start = std::nullopt,
                                    const GlmControl& ctl = {})
{
    detail::check_glm_inputs(X, y, w);
    require((y.array() >= 0.0).all() && (y.array() <= 1.0).all(), "logistic responses must lie in [0,1]");
    return detail::irls(detail::Family::logistic, X, y, w, start, ctl);
}

/// Weighted Poisson regression with log link.
inline GlmFit fit_weighted_poisson(const DesignMatrix& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                   const std::optional<Eigen::VectorXd>& start = std::nullopt,
                                   const GlmControl& ctl = {})
{
    detail::check_glm_inputs(X, y, w);
    require((y.array() >= 0.0).all(), "Poisson responses must be nonnegative");
    return detail::irls(detail::Family::poisson, X, y, w, start, ctl);
}

/// Weighted least squares. sigma is the weighted ML residual scale.
inline GlmFit fit_weighted_linear(const DesignMatrix& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w)
{
    detail::check_glm_inputs(X, y, w);
    auto sol = detail::weighted_least_squares(X.matrix(), y, w);
    if (!sol) throw Error("design matrix is collinear (rank deficient) in linear fit");
    GlmFit fit;
    fit.coefficients = *sol;
    const Eigen::VectorXd r = y - X.matrix() * fit.coefficients;
    const double rss = (w.array() * r.array().square()).sum();
    const double wsum = w.sum();
    fit.deviance = rss;
    fit.sigma = std::sqrt(rss / wsum);
    const double dof = wsum - static_cast<double>(X.cols());
    const double s2 = dof > 0 ? rss / dof : fit.sigma * fit.sigma;
    fit.coef_covariance = s2 * detail::inverse_information(X.matrix(), w);
    fit.converged = true;
    fit.iterations = 1;
    return fit;
}

} // namespace miscorr

#endif
