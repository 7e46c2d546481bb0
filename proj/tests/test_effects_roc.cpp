#include "support.hpp"

#include <miscorr/effects.hpp>
#include <miscorr/roc.hpp>

#include <catch_amalgamated.hpp>

using namespace miscorr;
using namespace testsupport;
using Catch::Approx;

namespace
{

// E[Y(x, M(x'))] at covariate profile c, enumerating the binary mediator.
double counterfactual_mean(const MediationParams& p, double x, double x_prime, const Eigen::VectorXd& c)
{
    const double pm = sigmoid(p.beta[0] + p.beta[1] * x_prime + p.beta.tail(c.size()).dot(c));
    double total = 0.0;
    for (int m = 0; m <= 1; ++m) {
        double eta = p.theta[0] + p.theta[1] * x + p.theta[2] * m + p.theta.segment(3, c.size()).dot(c);
        if (p.interaction) eta += p.theta[p.theta.size() - 1] * x * m;
        double mean = eta;
        if (p.dist == OutcomeDist::bernoulli) mean = sigmoid(eta);
        if (p.dist == OutcomeDist::poisson) mean = std::exp(eta);
        total += (m == 1 ? pm : 1.0 - pm) * mean;
    }
    return total;
}

MediationParams effect_params(OutcomeDist dist, bool interaction)
{
    MediationParams p = mediation_truth(dist, interaction);
    p.beta = vec({-0.3, 0.8, 0.5});
    return p;
}

double mann_whitney(const Eigen::VectorXd& risk, const Eigen::VectorXd& pos, const Eigen::VectorXd& neg)
{
    double num = 0.0;
    for (Eigen::Index i = 0; i < risk.size(); ++i)
        for (Eigen::Index j = 0; j < risk.size(); ++j) {
            const double s = risk[i] > risk[j] ? 1.0 : risk[i] == risk[j] ? 0.5 : 0.0;
            num += pos[i] * neg[j] * s;
        }
    return num / (pos.sum() * neg.sum());
}

// Every distinct score, plus one cutoff below them all.
std::vector<double> exhaustive_cutoffs(const Eigen::VectorXd& risk)
{
    std::vector<double> c(risk.data(), risk.data() + risk.size());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    c.insert(c.begin(), c.front() - 1.0);
    return c;
}

} // namespace

TEST_CASE("effects vanish without a mediated path")
{
    const Eigen::VectorXd c = vec({0.3});
    for (OutcomeDist dist : {OutcomeDist::normal, OutcomeDist::bernoulli, OutcomeDist::poisson}) {
        MediationParams p = effect_params(dist, false);
        p.theta[2] = 0.0;
        const EffectEstimates a = effect_estimates(p, c, {.x0 = 0, .x1 = 1, .m_level = 1.0});
        CHECK(a.nie == Approx(a.ratio_scale ? 1.0 : 0.0).margin(1e-14));
        CHECK(a.nde == Approx(a.cde).epsilon(1e-12));

        p = effect_params(dist, true);
        p.beta[1] = 0.0;  // the exposure does not move the mediator
        const EffectEstimates b = effect_estimates(p, c, {.x0 = 0, .x1 = 1, .m_level = 0.0});
        CHECK(b.nie == Approx(b.ratio_scale ? 1.0 : 0.0).margin(1e-14));
    }
}

TEST_CASE("effects match counterfactual enumeration")
{
    const Eigen::VectorXd c = vec({-0.4});
    for (bool interaction : {false, true}) {
        for (OutcomeDist dist : {OutcomeDist::normal, OutcomeDist::poisson}) {
            const MediationParams p = effect_params(dist, interaction);
            const EffectEstimates e = effect_estimates(p, c, {.x0 = 0.0, .x1 = 1.0, .m_level = 1.0});
            const double y11 = counterfactual_mean(p, 1, 1, c);
            const double y10 = counterfactual_mean(p, 1, 0, c);
            const double y00 = counterfactual_mean(p, 0, 0, c);
            if (dist == OutcomeDist::normal) {
                CHECK(e.nie == Approx(y11 - y10).epsilon(1e-12));
                CHECK(e.nde == Approx(y10 - y00).epsilon(1e-12));
                CHECK(e.cde == Approx(p.theta[1] + (interaction ? p.theta[4] : 0.0)).epsilon(1e-12));
            } else {
                CHECK(e.ratio_scale);
                CHECK(e.nie == Approx(y11 / y10).epsilon(1e-12));
                CHECK(e.nde == Approx(y10 / y00).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("continuous-outcome effects match a Monte Carlo counterfactual simulation")
{
    const MediationParams p = effect_params(OutcomeDist::normal, true);
    const Eigen::VectorXd c = vec({0.2});
    const EffectEstimates e = effect_estimates(p, c, {.x0 = 0.0, .x1 = 1.0, .m_level = 0.0});
    Rng rng = make_rng(10);
    const double h = p.beta[2] * c[0];
    auto draw_y = [&](double x, double m) {
        return p.theta[0] + p.theta[1] * x + p.theta[2] * m + p.theta[3] * c[0] + p.theta[4] * x * m +
               standard_normal(rng);
    };
    const int n = 200000;
    double nie = 0.0, nde = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m0 = bernoulli_draw(rng, sigmoid(p.beta[0] + h)) ? 1.0 : 0.0;
        const double m1 = bernoulli_draw(rng, sigmoid(p.beta[0] + p.beta[1] + h)) ? 1.0 : 0.0;
        nie += draw_y(1, m1) - draw_y(1, m0);
        nde += draw_y(1, m0) - draw_y(0, m0);
    }
    CHECK(e.nie == Approx(nie / n).margin(0.02));
    CHECK(e.nde == Approx(nde / n).margin(0.02));
}

TEST_CASE("odds-ratio effects approach risk ratios for a rare outcome")
{
    MediationParams p = effect_params(OutcomeDist::bernoulli, false);
    p.theta[0] = -8.0;
    const Eigen::VectorXd c = vec({0.0});
    const EffectEstimates e = effect_estimates(p, c, {.x0 = 0.0, .x1 = 1.0, .m_level = 1.0});
    const double y11 = counterfactual_mean(p, 1, 1, c);
    const double y10 = counterfactual_mean(p, 1, 0, c);
    const double y00 = counterfactual_mean(p, 0, 0, c);
    CHECK(e.nie == Approx(y11 / y10).epsilon(0.01));
    CHECK(e.nde == Approx(y10 / y00).epsilon(0.01));
    CHECK(e.cde == Approx(std::exp(p.theta[1])).epsilon(1e-14));
}

TEST_CASE("effect queries")
{
    const auto s = mediation_scenario(200, 1, mediation_truth());
    const MediationData d = s.data();
    const MediationParams p = effect_params(OutcomeDist::normal, false);
    const EffectEstimates by_data = effect_estimates(p, d, {.m_level = 1.0});
    const EffectEstimates by_profile = effect_estimates(p, d.C.colwise().mean().transpose(), {.m_level = 1.0});
    CHECK(by_data.nie == by_profile.nie);
    CHECK_THROWS_AS(effect_estimates(p, d, {}), Error);
    CHECK_THROWS_AS(effect_estimates(p, vec({0.0, 1.0}), {.m_level = 1.0}), DimensionError);
}

TEST_CASE("ROC reductions")
{
    Rng rng = make_rng(14);
    const Eigen::Index n = 200;
    Eigen::VectorXd risk(n), labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        labels[i] = bernoulli_draw(rng, 0.4) ? 1.0 : 0.0;
        risk[i] = uniform01(rng);
    }
    Eigen::MatrixXd w(n, 2);
    w.col(0) = labels;
    w.col(1) = (1.0 - labels.array()).matrix();
    const RocCurve a = adjusted_roc(risk, w);
    const RocCurve e = empirical_roc(risk, labels);
    CHECK(a.tpr == e.tpr);
    CHECK(a.fpr == e.fpr);
    CHECK(a.auc == e.auc);
    CHECK(a.cutoffs.size() == 101);

    Eigen::VectorXd separated(n);
    for (Eigen::Index i = 0; i < n; ++i) separated[i] = labels[i] == 1.0 ? 0.9 : 0.1;
    CHECK(empirical_roc(separated, labels).auc == 1.0);
    CHECK(adjusted_roc(separated, w).auc == 1.0);

    const Eigen::VectorXd constant = Eigen::VectorXd::Constant(n, 0.37);
    CHECK(std::abs(empirical_roc(constant, labels).auc - 0.5) <= 1e-12);
    Eigen::MatrixXd soft(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        soft(i, 0) = uniform01(rng);
        soft(i, 1) = 1.0 - soft(i, 0);
    }
    CHECK(std::abs(adjusted_roc(constant, soft).auc - 0.5) <= 1e-12);

    // curves run from (1, 1) at the lowest cutoff down to (0, 0)
    CHECK(e.tpr.front() == 1.0);
    CHECK(e.fpr.front() == 1.0);
    CHECK(e.tpr.back() == 0.0);
    for (std::size_t k = 1; k < e.tpr.size(); ++k) {
        CHECK(e.tpr[k] <= e.tpr[k - 1]);
        CHECK(e.fpr[k] <= e.fpr[k - 1]);
    }
}

TEST_CASE("adjusted AUC is the weighted rank statistic")
{
    Rng rng = make_rng(15);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index n = 10 + rep * 3;
        Eigen::VectorXd risk(n);
        Eigen::MatrixXd w(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            risk[i] = std::round(uniform01(rng) * 20.0) / 20.0;  // ties on purpose
            w(i, 0) = uniform01(rng);
            w(i, 1) = 1.0 - w(i, 0);
        }
        const RocCurve r = adjusted_roc(risk, w, exhaustive_cutoffs(risk));
        CHECK(r.auc == Approx(mann_whitney(risk, w.col(0), w.col(1))).margin(1e-6));
    }
}

TEST_CASE("ROC is invariant to monotone transforms of the score")
{
    Rng rng = make_rng(16);
    const Eigen::Index n = 150;
    Eigen::VectorXd risk(n);
    Eigen::MatrixXd w(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        risk[i] = uniform01(rng);
        w(i, 0) = sigmoid(3.0 * (risk[i] - 0.5) + standard_normal(rng));
        w(i, 1) = 1.0 - w(i, 0);
    }
    auto f = [](double v) { return std::exp(3.0 * v) - 2.0; };
    const std::vector<double> cut = default_cutoffs();
    std::vector<double> cut_t;
    for (double c : cut) cut_t.push_back(f(c));
    const RocCurve a = adjusted_roc(risk, w, cut);
    const RocCurve b = adjusted_roc(risk.unaryExpr(f), w, cut_t);
    CHECK(a.tpr == b.tpr);
    CHECK(a.fpr == b.fpr);
    CHECK(a.auc == b.auc);
}

TEST_CASE("binary classifier operating point")
{
    const Eigen::VectorXd labels = vec({1, 1, 1, 0, 0, 0, 0, 1});
    const Eigen::VectorXd rec = vec({1, 1, 0, 0, 1, 0, 0, 1});
    const RocPoint p = binary_classifier_point(rec, labels);
    CHECK(p.tpr == 0.75);
    CHECK(p.fpr == 0.25);
    CHECK(p.auc == Approx(0.75));
    // the point's AUC is the area under the three-point curve
    CHECK(p.auc == Approx(trapezoid_auc({0.0, p.fpr, 1.0}, {0.0, p.tpr, 1.0})).epsilon(1e-15));

    const SubsetRoc s = subset_roc(vec({0.9, 0.8, 0.2, 0.1, 0.6, 0.3, 0.05, 0.7}), labels, default_cutoffs(), rec);
    REQUIRE(s.classifier.has_value());
    CHECK(s.classifier->tpr == 0.75);
    CHECK(s.curve.auc > 0.8);
}

TEST_CASE("ROC input validation")
{
    const Eigen::VectorXd risk = vec({0.2, 0.4, 0.6});
    CHECK_THROWS_AS(empirical_roc(risk, vec({1, 1, 1})), Error);
    CHECK_THROWS_AS(empirical_roc(risk, vec({1, 0, 2})), Error);
    CHECK_THROWS_AS(empirical_roc(risk, vec({1, 0})), DimensionError);
    Eigen::MatrixXd bad(3, 2);
    bad << 0.5, 0.6, 1, 0, 0, 1;
    CHECK_THROWS_AS(adjusted_roc(risk, bad), Error);
    CHECK_THROWS_AS(empirical_roc(risk, vec({1, 0, 1}), {0.5, 0.2}), Error);
}
