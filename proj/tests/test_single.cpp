#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace miscorr;
using namespace testsupport;
using Catch::Approx;

TEST_CASE("response probabilities")
{
    const DesignMatrix X = DesignMatrix::with_intercept(Eigen::MatrixXd::Ones(3, 1));
    CHECK(compute_pi(Eigen::VectorXd::Zero(2), X).pi.col(0).isApproxToConstant(0.5));
    CHECK(compute_pi(vec({0.5, 1.0}), X).pi(0, 0) == Approx(0.8175744761936437).epsilon(1e-14));

    Rng rng = make_rng(3);
    const DesignMatrix Xr = random_design(rng, 30, 3);
    const ClassProbTable t = compute_pi(random_vector(rng, 3, 2.0), Xr);
    CHECK((t.pi.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(((t.pi.array() > 0.0) && (t.pi.array() < 1.0)).all());

    const ObservationProbTable z0 = compute_pistar(Eigen::MatrixXd::Zero(3, 2), Xr);
    CHECK(z0.event.isApproxToConstant(0.5));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 2);
    g(0, 0) = 30.0;
    CHECK(compute_pistar(g, Xr).sensitivity == Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(compute_pistar(Eigen::MatrixXd::Zero(2, 2), Xr), DimensionError);
    CHECK_THROWS_AS(compute_pistar(Eigen::MatrixXd::Zero(3, 3), Xr), DimensionError);
    CHECK_THROWS_AS(compute_pi(Eigen::VectorXd::Zero(2), Xr), DimensionError);
}

TEST_CASE("observed log-likelihood matches latent enumeration")
{
    Rng rng = make_rng(17);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rep % 9);
        const Eigen::Index px = 1 + rep % 3;
        const Eigen::Index pz = 1 + (rep + 1) % 3;
        const DesignMatrix X = random_design(rng, n + 3, px);
        const DesignMatrix Z = random_design(rng, n + 3, pz);
        SingleOutcomeParams p{random_vector(rng, px), Eigen::MatrixXd(pz, 2)};
        p.gamma << random_vector(rng, pz), random_vector(rng, pz);
        const Categories y = random_categories(rng, static_cast<std::size_t>(n + 3));
        const double ll = observed_loglik(p, X, Z, y);
        CHECK(std::abs(ll - brute_single_loglik(p, X, Z, y)) <= 1e-10);
        CHECK(std::abs(ll - observed_loglik(permute_labels(p), X, Z, y)) <= 1e-10);
    }
    const DesignMatrix one = DesignMatrix::intercept_only(1);
    CHECK(observed_loglik({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 2)}, one, one, {1}) ==
          Approx(std::log(0.5)).epsilon(1e-14));
    CHECK_THROWS_AS(observed_loglik({Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 2)}, one, one, {3}), Error);
}

TEST_CASE("E-step weights are the Bayes posterior")
{
    Rng rng = make_rng(5);
    const DesignMatrix X = random_design(rng, 12, 2);
    const DesignMatrix Z = random_design(rng, 12, 2);
    SingleOutcomeParams p{random_vector(rng, 2), Eigen::MatrixXd(2, 2)};
    p.gamma << random_vector(rng, 2), random_vector(rng, 2);
    const Categories y = random_categories(rng, 12);
    const Eigen::MatrixXd w = e_step_weights(p, X, Z, y);
    for (Eigen::Index i = 0; i < 12; ++i) {
        const double py1 = sigmoid(X.matrix().row(i).dot(p.beta));
        double joint[2];
        for (int j = 0; j < 2; ++j) {
            const double ps1 = sigmoid(Z.matrix().row(i).dot(p.gamma.col(j)));
            joint[j] = (j == 0 ? py1 : 1.0 - py1) * (y[static_cast<std::size_t>(i)] == 1 ? ps1 : 1.0 - ps1);
        }
        CHECK(std::abs(w(i, 0) - joint[0] / (joint[0] + joint[1])) <= 1e-12);
        CHECK(std::abs(w.row(i).sum() - 1.0) <= 1e-12);
    }

    SingleOutcomeParams perfect{p.beta, Eigen::MatrixXd::Zero(2, 2)};
    perfect.gamma(0, 0) = 30.0;
    perfect.gamma(0, 1) = -30.0;
    const Eigen::MatrixXd wp = e_step_weights(perfect, X, Z, y);
    for (Eigen::Index i = 0; i < 12; ++i) CHECK(std::abs(wp(i, 0) - (y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0)) <= 1e-9);

    SingleOutcomeParams flat{p.beta, Eigen::MatrixXd::Zero(2, 2)};
    CHECK((e_step_weights(flat, X, Z, y) - compute_pi(p.beta, X).pi).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("analytic score matches finite differences")
{
    Rng rng = make_rng(8);
    const DesignMatrix X = random_design(rng, 40, 3);
    const DesignMatrix Z = random_design(rng, 40, 2);
    SingleOutcomeParams p{random_vector(rng, 3), Eigen::MatrixXd(2, 2)};
    p.gamma << random_vector(rng, 2), random_vector(rng, 2);
    const Categories y = random_categories(rng, 40);
    const Eigen::VectorXd g = observed_score(p, X, Z, y);
    auto f = [&](const Eigen::VectorXd& v) {
        SingleOutcomeParams q{v.head(3), Eigen::MatrixXd(2, 2)};
        q.gamma.col(0) = v.segment(3, 2);
        q.gamma.col(1) = v.segment(5, 2);
        return observed_loglik(q, X, Z, y);
    };
    Eigen::VectorXd v(7);
    v << p.beta, p.gamma.col(0), p.gamma.col(1);
    CHECK((g - fd_gradient(f, v)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("label switching keeps the larger Youden's J")
{
    const DesignMatrix Z = DesignMatrix::intercept_only(5);
    SingleOutcomeParams good{vec({1.0, -2.0}), Eigen::MatrixXd(1, 2)};
    good.gamma << logit(0.9), logit(0.15);
    auto [kept, applied] = label_switch_correct(good, Z);
    CHECK_FALSE(applied);
    CHECK(kept.beta == good.beta);

    SingleOutcomeParams bad{vec({1.0, -2.0}), Eigen::MatrixXd(1, 2)};
    bad.gamma << logit(0.1), logit(0.85);
    auto [fixed, applied2] = label_switch_correct(bad, Z);
    CHECK(applied2);
    CHECK(compute_pistar(fixed.gamma, Z).youden() == Approx(0.75).epsilon(1e-12));
    CHECK(fixed.beta == -bad.beta);

    SingleOutcomeParams bar{vec({0.0}), Eigen::MatrixXd(1, 2)};
    bar.gamma << 30.0, logit(0.525);
    const auto bar_fix = label_switch_correct(bar, Z);
    CHECK_FALSE(bar_fix.second);
    CHECK(compute_pistar(bar.gamma, Z).youden() == Approx(0.475).epsilon(1e-9));
}

TEST_CASE("plain EM never decreases the observed log-likelihood")
{
    EmControl ctl;
    ctl.trace = true;
    ctl.max_iter = 300;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = single_scenario(500, 1000 + seed);
        const SingleFit f = em_fit(s.ystar, s.X(), s.Z(), ctl);
        CHECK(non_decreasing(f.trace, 1e-9));
    }
}

TEST_CASE("EM converges to a stationary point with a valid labeling")
{
    const auto s = single_scenario(3000, 42);
    const SingleFit f = em_fit(s.ystar, s.X(), s.Z());
    REQUIRE(f.report.converged);
    CHECK(f.report.sensitivity + f.report.specificity - 1.0 >= 0.0);
    auto ll = [&](const Eigen::VectorXd& v) {
        SingleOutcomeParams q{v.head(2), Eigen::MatrixXd(2, 2)};
        q.gamma.col(0) = v.segment(2, 2);
        q.gamma.col(1) = v.segment(4, 2);
        return observed_loglik(q, s.X(), s.Z(), s.ystar);
    };
    const Eigen::VectorXd grad = fd_gradient(ll, f.report.estimates);
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-3 * (1.0 + std::abs(f.report.loglik)));
    CHECK(f.report.names == std::vector<std::string>{"beta1", "beta2", "gamma11", "gamma21", "gamma12", "gamma22"});
    CHECK(f.report.se.allFinite());
    CHECK((f.report.se.array() > 0.0).all());
    CHECK(std::abs(f.report.at("beta2") + 2.0) <= 4.0 * f.report.se[1]);
}

TEST_CASE("EM output is invariant to label-permuted starts")
{
    const auto s = single_scenario(2000, 7);
    const SingleOutcomeParams start = default_single_start(s.ystar, s.X(), s.Z());
    const SingleFit a = em_fit(s.ystar, s.X(), s.Z(), start);
    const SingleFit b = em_fit(s.ystar, s.X(), s.Z(), permute_labels(start));
    CHECK((a.report.estimates - b.report.estimates).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(a.report.label_correction_applied != b.report.label_correction_applied);
}

TEST_CASE("SQUAREM reaches the plain EM optimum")
{
    const auto s = single_scenario(2000, 9);
    EmControl plain;
    EmControl sq;
    sq.accel = Accel::squarem;
    const SingleFit a = em_fit(s.ystar, s.X(), s.Z(), plain);
    const SingleFit b = em_fit(s.ystar, s.X(), s.Z(), sq);
    REQUIRE(b.report.converged);
    CHECK((a.report.estimates - b.report.estimates).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(b.report.iterations < a.report.iterations);
}

TEST_CASE("EM rejects invalid controls")
{
    const auto s = single_scenario(100, 1);
    EmControl bad;
    bad.tolerance = 0.0;
    CHECK_THROWS_AS(em_fit(s.ystar, s.X(), s.Z(), bad), Error);
    SingleOutcomeParams nan_start{vec({std::nan(""), 0.0}), Eigen::MatrixXd::Zero(2, 2)};
    CHECK_THROWS_AS(em_fit(s.ystar, s.X(), s.Z(), nan_start), Error);
    EmControl one;
    one.max_iter = 1;
    const SingleFit f = em_fit(s.ystar, s.X(), s.Z(), one);
    CHECK_FALSE(f.report.converged);
    CHECK(f.report.iterations == 1);
}

TEST_CASE("perfect classification reduces to logistic regression on the truth")
{
    SingleOutcomeParams truth = single_truth();
    truth.gamma << 30.0, -30.0, 0.0, 0.0;
    const auto s = single_scenario(3000, 77, truth);
    REQUIRE(s.y == s.ystar);
    const GlmFit oracle = naive_logistic(s.y, s.X());
    const SingleFit f = em_fit(s.ystar, s.X(), s.Z());
    for (Eigen::Index c = 0; c < 2; ++c)
        CHECK(std::abs(f.params.beta[c] - oracle.coefficients[c]) <= 3.0 * oracle.se()[c]);

    const ComparisonFits cmp = comparison_fits(s.ystar, s.X(), s.Z());
    for (const FitReport* r : {&cmp.naive, &cmp.perfect_specificity, &cmp.perfect_sensitivity})
        for (Eigen::Index c = 0; c < 2; ++c) CHECK(std::abs(r->estimates[c] - f.params.beta[c]) <= 3.0 * oracle.se()[c]);
}

TEST_CASE("comparison fits have the documented structure")
{
    const auto s = single_scenario(1500, 31);
    const ComparisonFits cmp = comparison_fits(s.ystar, s.X(), s.Z());
    CHECK(cmp.naive.names == std::vector<std::string>{"naive_beta1", "naive_beta2"});
    CHECK(cmp.perfect_specificity.names ==
          std::vector<std::string>{"SAMBA_beta1", "SAMBA_beta2", "SAMBA_gamma11", "SAMBA_gamma21"});
    CHECK(cmp.perfect_sensitivity.names ==
          std::vector<std::string>{"PSens_beta1", "PSens_beta2", "PSens_gamma12", "PSens_gamma22"});
    CHECK(cmp.perfect_specificity.specificity == 1.0);
    CHECK(cmp.perfect_sensitivity.sensitivity == 1.0);
    CHECK_THROWS_AS(comparison_fits(vec({1, 2, 1.5}), DesignMatrix::intercept_only(3), DesignMatrix::intercept_only(3)),
                    Error);
}

TEST_CASE("classification probability tables")
{
    Rng rng = make_rng(4);
    const DesignMatrix Z = random_design(rng, 20, 2);
    const auto flat = misclassification_prob(Eigen::MatrixXd::Zero(2, 2), Z);
    for (const auto& r : flat) CHECK(r.probability == 0.5);
    Eigen::MatrixXd g(2, 2);
    g << random_vector(rng, 2), random_vector(rng, 2);
    const auto means = group_means(misclassification_prob(g, Z));
    const ObservationProbTable ps = compute_pistar(g, Z);
    CHECK(std::abs(means.at({1, 1}) - ps.sensitivity) <= 1e-12);
    CHECK(std::abs(means.at({2, 2}) - ps.specificity) <= 1e-12);
    CHECK(std::abs(means.at({1, 1}) + means.at({1, 2}) - 1.0) <= 1e-12);
    const auto tc = true_classification_prob(vec({0.2, -0.4}), Z);
    REQUIRE(tc.size() == 40);
    CHECK(std::abs(tc[0].probability + tc[1].probability - 1.0) <= 1e-12);
}
