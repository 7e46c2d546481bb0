#include <miscorr/glm.hpp>
#include <miscorr/random.hpp>

#include <catch_amalgamated.hpp>

using namespace miscorr;
using Catch::Approx;

namespace
{

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

struct LogisticCase
{
    DesignMatrix X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
};

LogisticCase random_logistic(std::uint64_t seed, Eigen::Index n = 400)
{
    Rng rng = make_rng(seed);
    Eigen::MatrixXd cov(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < 2; ++c) cov(i, c) = standard_normal(rng);
    DesignMatrix X = DesignMatrix::with_intercept(cov);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = bernoulli_draw(rng, expit(0.3 + 0.8 * cov(i, 0) - 0.5 * cov(i, 1))) ? 1.0 : 0.0;
        w[i] = 0.2 + uniform01(rng);
    }
    return {std::move(X), std::move(y), std::move(w)};
}

} // namespace

TEST_CASE("design matrix enforces its invariants")
{
    Eigen::MatrixXd bad(3, 2);
    bad << 1, 0, 2, 1, 1, 3;
    CHECK_THROWS_AS(DesignMatrix(bad), Error);
    Eigen::MatrixXd nan_m = Eigen::MatrixXd::Ones(3, 2);
    nan_m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(DesignMatrix(nan_m), Error);
    CHECK_THROWS_AS(DesignMatrix(Eigen::MatrixXd::Ones(1, 2)), Error);
    const DesignMatrix X = DesignMatrix::intercept_only(4);
    CHECK_THROWS_AS(X.linear_predictor(vec({1, 2})), DimensionError);
}

TEST_CASE("logistic intercept-only closed forms")
{
    const DesignMatrix X = DesignMatrix::intercept_only(4);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
    CHECK(fit_weighted_logistic(X, vec({1, 1, 0, 0}), w).coefficients[0] == Approx(0.0).margin(1e-10));
    CHECK(fit_weighted_logistic(X, vec({1, 1, 1, 0}), w).coefficients[0] == Approx(std::log(3.0)).epsilon(1e-10));
    CHECK(fit_weighted_logistic(X, vec({0.7, 0.7, 0.3, 0.3}), w).coefficients[0] == Approx(0.0).margin(1e-10));
}

TEST_CASE("logistic rejects bad inputs")
{
    const DesignMatrix X = DesignMatrix::intercept_only(3);
    CHECK_THROWS_AS(fit_weighted_logistic(X, vec({1, 0}), vec({1, 1, 1})), Error);
    CHECK_THROWS_AS(fit_weighted_logistic(X, vec({1, 0, 1}), vec({0, 0, 0})), Error);
    CHECK_THROWS_AS(fit_weighted_logistic(X, vec({1, 0, 1.5}), vec({1, 1, 1})), Error);
    CHECK_THROWS_AS(fit_weighted_logistic(X, vec({1, 0, 1}), vec({1, -1, 1})), Error);
}

TEST_CASE("logistic score vanishes at convergence")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = random_logistic(seed);
        const GlmFit f = fit_weighted_logistic(c.X, c.y, c.w);
        REQUIRE(f.converged);
        const Eigen::VectorXd mu = expit(c.X.linear_predictor(f.coefficients));
        const Eigen::VectorXd score = c.X.matrix().transpose() * c.w.cwiseProduct(c.y - mu);
        CHECK(score.cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(f.iterations <= 25);
        CHECK((f.coef_covariance - f.coef_covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.coef_covariance).eigenvalues().minCoeff() >= 0.0);
    }
}

TEST_CASE("logistic coefficients are invariant to weight scaling")
{
    const auto c = random_logistic(11);
    const GlmFit a = fit_weighted_logistic(c.X, c.y, c.w);
    const GlmFit b = fit_weighted_logistic(c.X, c.y, 7.5 * c.w);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("logistic warm start reaches the same optimum")
{
    const auto c = random_logistic(12);
    const GlmFit a = fit_weighted_logistic(c.X, c.y, c.w);
    const GlmFit b = fit_weighted_logistic(c.X, c.y, c.w, Eigen::VectorXd(a.coefficients + vec({0.5, -0.5, 0.2})));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("perfect separation is flagged and capped")
{
    Eigen::MatrixXd cov(6, 1);
    cov << -3, -2, -1, 1, 2, 3;
    const DesignMatrix X = DesignMatrix::with_intercept(cov);
    const GlmFit f = fit_weighted_logistic(X, vec({0, 0, 0, 1, 1, 1}), Eigen::VectorXd::Ones(6));
    CHECK_FALSE(f.converged);
    CHECK(f.separated);
    CHECK(f.coefficients.allFinite());
    CHECK(X.linear_predictor(f.coefficients).cwiseAbs().maxCoeff() <= kEtaCap + 1e-9);

    const GlmFit all0 = fit_weighted_logistic(DesignMatrix::intercept_only(3), vec({0, 0, 0}), Eigen::VectorXd::Ones(3));
    CHECK_FALSE(all0.converged);
    CHECK(all0.coefficients[0] == Approx(-kEtaCap));
}

TEST_CASE("weighted linear closed forms")
{
    const DesignMatrix X1 = DesignMatrix::intercept_only(3);
    const GlmFit a = fit_weighted_linear(X1, vec({1, 2, 3}), Eigen::VectorXd::Ones(3));
    CHECK(a.coefficients[0] == Approx(2.0).epsilon(1e-12));
    CHECK(a.sigma == Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    const GlmFit b = fit_weighted_linear(X1, vec({5, 9, 9}), vec({1, 0, 0}));
    CHECK(b.coefficients[0] == Approx(5.0).epsilon(1e-12));

    Eigen::MatrixXd cov(5, 1);
    cov << 0, 1, 2, 3, 4;
    const DesignMatrix X = DesignMatrix::with_intercept(cov);
    const Eigen::VectorXd y = X.linear_predictor(vec({1.5, -0.25}));
    const GlmFit c = fit_weighted_linear(X, y, Eigen::VectorXd::Ones(5));
    CHECK(c.coefficients[0] == Approx(1.5).epsilon(1e-12));
    CHECK(c.coefficients[1] == Approx(-0.25).epsilon(1e-12));
    CHECK(c.sigma == Approx(0.0).margin(1e-12));
}

TEST_CASE("weighted linear matches the normal equations")
{
    const auto c = random_logistic(21, 50);
    Rng rng = make_rng(99);
    Eigen::VectorXd y(50);
    for (Eigen::Index i = 0; i < 50; ++i) y[i] = standard_normal(rng);
    const GlmFit f = fit_weighted_linear(c.X, y, c.w);
    const Eigen::MatrixXd& A = c.X.matrix();
    const Eigen::VectorXd ne =
        (A.transpose() * c.w.asDiagonal() * A).ldlt().solve(A.transpose() * c.w.asDiagonal() * y);
    CHECK((f.coefficients - ne).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("weighted linear rejects collinear designs")
{
    Eigen::MatrixXd cov(4, 2);
    cov << 1, 2, 2, 4, 3, 6, 4, 8;
    CHECK_THROWS_AS(fit_weighted_linear(DesignMatrix::with_intercept(cov), vec({1, 2, 3, 4}), Eigen::VectorXd::Ones(4)),
                    Error);
}

TEST_CASE("poisson closed forms")
{
    const DesignMatrix X = DesignMatrix::intercept_only(3);
    CHECK(fit_weighted_poisson(X, vec({2, 2, 2}), Eigen::VectorXd::Ones(3)).coefficients[0] ==
          Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(fit_weighted_poisson(X, vec({1, 2, 3}), vec({1, 1, 2})).coefficients[0] ==
          Approx(std::log(9.0 / 4.0)).epsilon(1e-10));
    const GlmFit z = fit_weighted_poisson(X, vec({0, 0, 0}), Eigen::VectorXd::Ones(3));
    CHECK_FALSE(z.converged);
    CHECK(z.coefficients[0] == Approx(-kEtaCap));
    CHECK_THROWS_AS(fit_weighted_poisson(X, vec({1, -1, 0}), Eigen::VectorXd::Ones(3)), Error);
}
