#ifndef MISCORR_TESTS_SUPPORT_HPP
#define MISCORR_TESTS_SUPPORT_HPP

// Shared scenarios and brute-force oracles for the test programs.

#include <miscorr/simulate.hpp>

namespace testsupport
{

using namespace miscorr;

inline Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline Eigen::MatrixXd gamma_from_rates(double sens, double fpr, Eigen::Index pz, double slope = 0.0)
{
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pz, 2);
    g(0, 0) = logit(sens);
    g(0, 1) = logit(fpr);
    for (Eigen::Index c = 1; c < pz; ++c) {
        g(c, 0) = slope;
        g(c, 1) = -slope;
    }
    return g;
}

/// beta = (1, -2), one normal X, one normal Z; sens ~ 0.9, spec ~ 0.85.
inline SingleOutcomeParams single_truth(double sens = 0.9, double spec = 0.85, double slope = 0.3)
{
    return {vec({1.0, -2.0}), gamma_from_rates(sens, 1.0 - spec, 2, slope)};
}

inline SingleSimulation single_scenario(Eigen::Index n, std::uint64_t seed, const SingleOutcomeParams& p = single_truth())
{
    return simulate_single(n, p, {CovariateSpec::normal()}, {CovariateSpec::normal()}, seed);
}

inline TwoStageParams twostage_truth()
{
    TwoStageParams p;
    p.beta = vec({1.0, -2.0});
    p.gamma1 = gamma_from_rates(0.9, 0.1, 2, 0.3);
    p.gamma2[0] = gamma_from_rates(0.92, 0.15, 2, 0.2);
    p.gamma2[1] = gamma_from_rates(0.7, 0.08, 2, 0.2);
    return p;
}

inline TwoStageSimulation twostage_scenario(Eigen::Index n, std::uint64_t seed, const TwoStageParams& p = twostage_truth())
{
    return simulate_twostage(n, p, {CovariateSpec::normal()}, {CovariateSpec::normal()}, {CovariateSpec::normal()},
                             seed);
}

/// Normal outcome, one exposure, one covariate, one Z; sens ~ 0.8, spec ~ 0.9.
inline MediationParams mediation_truth(OutcomeDist dist = OutcomeDist::normal, bool interaction = false,
                                       double sens = 0.8, double spec = 0.9)
{
    MediationParams p;
    p.dist = dist;
    p.interaction = interaction;
    p.beta = vec({-0.5, 1.0, 1.5});
    p.gamma = gamma_from_rates(sens, 1.0 - spec, 2, 0.3);
    p.theta = interaction ? vec({1.0, 0.5, 2.0, 0.3, 0.4}) : vec({1.0, 0.5, 2.0, 0.3});
    if (dist != OutcomeDist::normal) p.theta *= 0.5;
    p.sigma = 1.0;
    return p;
}

inline MediationSimulation mediation_scenario(Eigen::Index n, std::uint64_t seed, const MediationParams& p)
{
    return simulate_mediation(n, p, CovariateSpec::bernoulli(0.5), {CovariateSpec::normal()},
                              {CovariateSpec::normal()}, seed);
}

/// Random design with an intercept and p - 1 standard normal columns.
inline DesignMatrix random_design(Rng& rng, Eigen::Index n, Eigen::Index p)
{
    Eigen::MatrixXd m(n, p - 1);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < p - 1; ++c) m(i, c) = standard_normal(rng);
    return DesignMatrix::with_intercept(m);
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * standard_normal(rng);
    return v;
}

inline Categories random_categories(Rng& rng, std::size_t n)
{
    Categories c(n);
    for (auto& v : c) v = bernoulli_draw(rng, 0.5) ? 1 : 2;
    return c;
}

inline double sigmoid(double t)
{
    return 1.0 / (1.0 + std::exp(-t));
}

/// Brute force: sum_i log sum_j P(Y = j) P(Y* | Y = j), written from scratch.
inline double brute_single_loglik(const SingleOutcomeParams& p, const DesignMatrix& X, const DesignMatrix& Z,
                                  const Categories& ystar)
{
    double ll = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double total = 0.0;
        for (int j = 1; j <= 2; ++j) {
            const double py1 = sigmoid(X.matrix().row(i).dot(p.beta));
            const double py = j == 1 ? py1 : 1.0 - py1;
            const double ps1 = sigmoid(Z.matrix().row(i).dot(p.gamma.col(j - 1)));
            const double ps = ystar[static_cast<std::size_t>(i)] == 1 ? ps1 : 1.0 - ps1;
            total += py * ps;
        }
        ll += std::log(total);
    }
    return ll;
}

inline double brute_twostage_cell(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                  const DesignMatrix& Z2, Eigen::Index i, int k, int l)
{
    double total = 0.0;
    for (int j = 1; j <= 2; ++j) {
        const double py1 = sigmoid(X.matrix().row(i).dot(p.beta));
        const double py = j == 1 ? py1 : 1.0 - py1;
        const double a1 = sigmoid(Z1.matrix().row(i).dot(p.gamma1.col(j - 1)));
        const double pa = k == 1 ? a1 : 1.0 - a1;
        const double b1 = sigmoid(Z2.matrix().row(i).dot(p.gamma2[static_cast<std::size_t>(k - 1)].col(j - 1)));
        const double pb = l == 1 ? b1 : 1.0 - b1;
        total += py * pa * pb;
    }
    return total;
}

inline double brute_twostage_loglik(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                    const DesignMatrix& Z2, const Categories& y1, const Categories& y2)
{
    double ll = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        ll += std::log(brute_twostage_cell(p, X, Z1, Z2, i, y1[static_cast<std::size_t>(i)], y2[static_cast<std::size_t>(i)]));
    return ll;
}

inline TwoStageParams random_twostage(Rng& rng, Eigen::Index px, Eigen::Index pz1, Eigen::Index pz2)
{
    TwoStageParams p;
    p.beta = random_vector(rng, px);
    p.gamma1 = Eigen::MatrixXd(pz1, 2);
    p.gamma1 << random_vector(rng, pz1), random_vector(rng, pz1);
    for (auto& g : p.gamma2) {
        g.resize(pz2, 2);
        g << random_vector(rng, pz2), random_vector(rng, pz2);
    }
    return p;
}

/// True when the sequence never decreases by more than tol.
inline bool non_decreasing(const std::vector<double>& v, double tol)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1] - tol) return false;
    return true;
}

} // namespace testsupport

#endif
