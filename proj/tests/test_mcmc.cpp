#include "support.hpp"

#include <miscorr/mcmc.hpp>

#include <catch_amalgamated.hpp>

using namespace miscorr;
using namespace testsupport;
using Catch::Approx;

namespace
{

McmcModel gaussian_model(Eigen::Index d)
{
    McmcModel m;
    for (Eigen::Index k = 0; k < d; ++k) m.names.push_back("x" + std::to_string(k + 1));
    m.blocks = {{0, d}};
    m.loglik = [](const Eigen::VectorXd& v) { return -0.5 * v.squaredNorm(); };
    return m;
}

bool same_chains(const ChainSet& a, const ChainSet& b)
{
    if (a.chains.size() != b.chains.size()) return false;
    for (std::size_t c = 0; c < a.chains.size(); ++c)
        if (a.chains[c] != b.chains[c] || a.acceptance[c] != b.acceptance[c]) return false;
    return true;
}

} // namespace

TEST_CASE("log prior densities")
{
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    const double log_phi0 = -0.5 * std::log(2.0 * M_PI);
    CHECK(log_prior(zero, PriorSpec::make(PriorFamily::normal, 0, 1)) == Approx(4 * log_phi0).epsilon(1e-14));
    CHECK(log_prior(zero, PriorSpec::make(PriorFamily::normal, 0, 10)) ==
          Approx(4 * (log_phi0 - std::log(10.0))).epsilon(1e-14));
    CHECK(log_prior(vec({1.0}), PriorSpec::make(PriorFamily::normal, 0, 2)) ==
          Approx(log_phi0 - std::log(2.0) - 0.125).epsilon(1e-14));

    const PriorSpec u = PriorSpec::make(PriorFamily::uniform, -1, 3);
    CHECK(log_prior(vec({0.0, 2.9}), u) == Approx(-2 * std::log(4.0)));
    CHECK(log_prior(vec({0.0, 3.1}), u) == -std::numeric_limits<double>::infinity());

    const PriorSpec de = PriorSpec::make(PriorFamily::double_exponential, 1, 2);
    CHECK(log_prior(vec({1.0 + 0.7}), de) == Approx(log_prior(vec({1.0 - 0.7}), de)).epsilon(1e-15));
    CHECK(log_prior(vec({1.0}), de) == Approx(-std::log(4.0)));

    // a t prior with huge df is a normal prior
    const PriorSpec t = PriorSpec::make(PriorFamily::t, 0.5, 2, 1e7);
    CHECK(log_prior(vec({1.7, -0.4}), t) ==
          Approx(log_prior(vec({1.7, -0.4}), PriorSpec::make(PriorFamily::normal, 0.5, 2))).epsilon(1e-6));
    // Cauchy at its centre
    CHECK(log_prior(vec({0.0}), PriorSpec::make(PriorFamily::t, 0, 1, 1)) == Approx(-std::log(M_PI)));

    PriorSpec per = PriorSpec::make(PriorFamily::normal, 0, 1);
    per.a = vec({0.0, 5.0});
    CHECK(log_prior(vec({0.0, 5.0}), per) == Approx(2 * log_phi0));
    CHECK_THROWS_AS(log_prior(vec({0.0, 5.0, 1.0}), per), DimensionError);
    CHECK_THROWS_AS(log_prior(zero, PriorSpec::make(PriorFamily::normal, 0, -1)), Error);
    CHECK_THROWS_AS(log_prior(zero, PriorSpec::make(PriorFamily::uniform, 2, 1)), Error);
    CHECK(prior_family_from_string("double-exponential") == PriorFamily::double_exponential);
    CHECK_THROWS_AS(prior_family_from_string("gamma"), Error);
}

TEST_CASE("prior draws have the stated moments")
{
    Rng rng = make_rng(5);
    const int n = 40000;
    auto moments = [&](const PriorSpec& p) {
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = p.draw(rng, 0);
            s += x;
            s2 += x * x;
        }
        const double m = s / n;
        return std::pair{m, s2 / n - m * m};
    };
    auto [mn, vn] = moments(PriorSpec::make(PriorFamily::normal, 1, 2));
    CHECK(mn == Approx(1.0).margin(0.05));
    CHECK(vn == Approx(4.0).epsilon(0.05));
    auto [md, vd] = moments(PriorSpec::make(PriorFamily::double_exponential, -1, 1.5));
    CHECK(md == Approx(-1.0).margin(0.05));
    CHECK(vd == Approx(2 * 1.5 * 1.5).epsilon(0.05));
    auto [mu, vu] = moments(PriorSpec::make(PriorFamily::uniform, 2, 5));
    CHECK(mu == Approx(3.5).margin(0.02));
    CHECK(vu == Approx(0.75).epsilon(0.03));
}

TEST_CASE("chain diagnostics on independent draws")
{
    Rng rng = make_rng(8);
    std::vector<Eigen::VectorXd> iid(4, Eigen::VectorXd(2000));
    for (auto& c : iid)
        for (auto& x : c) x = standard_normal(rng);
    CHECK(detail::split_rhat(iid) == Approx(1.0).margin(0.01));
    CHECK(detail::batch_means_mcse(iid) == Approx(1.0 / std::sqrt(8000.0)).epsilon(0.3));

    std::vector<Eigen::VectorXd> apart = iid;
    apart[0].array() += 3.0;
    CHECK(detail::split_rhat(apart) > 1.5);
}

TEST_CASE("adaptive sampler targets a known posterior")
{
    // standard normal likelihood times a flat-ish prior
    McmcControl ctl;
    ctl.n_chains = 4;
    ctl.n_samples = 4000;
    ctl.burn_in = 1000;
    ctl.seed = 21;
    const ChainSet cs = run_mcmc(gaussian_model(3), PriorSpec::make(PriorFamily::normal, 0, 100), ctl);
    for (const auto& r : summarize(cs)) {
        CHECK(r.mean == Approx(0.0).margin(std::max(0.05, 4 * r.mcse)));
        CHECK(r.sd == Approx(1.0).epsilon(0.1));
        CHECK(r.rhat < 1.05);
    }
    for (double a : cs.acceptance) {
        CHECK(a >= 0.1);
        CHECK(a <= 0.6);
    }
}

TEST_CASE("MCMC is deterministic given the seed")
{
    McmcControl ctl;
    ctl.n_chains = 3;
    ctl.n_samples = 200;
    ctl.burn_in = 100;
    ctl.seed = 99;
    const PriorSpec prior = PriorSpec::make(PriorFamily::normal, 0, 10);
    const McmcModel m = gaussian_model(2);
    const ChainSet a = run_mcmc(m, prior, ctl);
    const ChainSet b = run_mcmc(m, prior, ctl);
    CHECK(same_chains(a, b));
    ctl.workers = 3;
    CHECK(same_chains(a, run_mcmc(m, prior, ctl)));
    ctl.seed = 100;
    CHECK_FALSE(same_chains(a, run_mcmc(m, prior, ctl)));
    CHECK(a.chain_seeds[0] != a.chain_seeds[1]);
}

TEST_CASE("uniform priors confine every draw")
{
    const auto s = single_scenario(400, 3);
    // support deliberately excludes the generating values
    const PriorSpec prior = PriorSpec::make(PriorFamily::uniform, -0.5, 0.5);
    McmcControl ctl;
    ctl.n_chains = 2;
    ctl.n_samples = 300;
    ctl.burn_in = 200;
    ctl.seed = 4;
    const McmcModel model = single_mcmc_model(s.ystar, s.X(), s.Z());
    const ChainSet cs = run_mcmc(model, prior, ctl);
    for (const auto& c : cs.chains) {
        CHECK(c.minCoeff() >= -0.5);
        CHECK(c.maxCoeff() <= 0.5);
    }
}

TEST_CASE("sampler errors")
{
    McmcModel flat = gaussian_model(2);
    McmcControl ctl;
    ctl.n_chains = 1;
    ctl.n_samples = 50;
    ctl.burn_in = 50;
    ctl.init = {vec({5.0, 0.0})};
    CHECK_THROWS_AS(run_mcmc(flat, PriorSpec::make(PriorFamily::uniform, -1, 1), ctl), Error);

    // only the initial point has finite likelihood, so nothing is ever accepted
    McmcModel spike = gaussian_model(1);
    spike.loglik = [](const Eigen::VectorXd& v) {
        return v[0] == 0.25 ? 0.0 : -std::numeric_limits<double>::infinity();
    };
    ctl.init = {vec({0.25})};
    CHECK_THROWS_AS(run_mcmc(spike, PriorSpec::make(PriorFamily::normal, 0, 1), ctl), Error);

    ctl.init = {vec({0.0, 0.0}), vec({0.0, 0.0})};
    CHECK_THROWS_AS(run_mcmc(flat, PriorSpec::make(PriorFamily::normal, 0, 1), ctl), Error);
    ctl.init.clear();
    ctl.n_samples = 0;
    CHECK_THROWS_AS(run_mcmc(flat, PriorSpec::make(PriorFamily::normal, 0, 1), ctl), Error);
}

TEST_CASE("chain-level label correction")
{
    const auto s = single_scenario(300, 6);
    const McmcModel model = single_mcmc_model(s.ystar, s.X(), s.Z());
    const detail::SingleLayout L{2, 2, ObservationConstraint::none};
    const Eigen::VectorXd truth = L.pack(single_truth());
    const Eigen::VectorXd flipped = model.permute(truth);
    REQUIRE(model.youden(flipped) < 0.0);

    Rng rng = make_rng(2);
    Eigen::MatrixXd chain(40, truth.size());
    for (Eigen::Index r = 0; r < chain.rows(); ++r)
        chain.row(r) = (flipped + 0.05 * random_vector(rng, truth.size(), 1.0)).transpose();
    const auto [fixed, applied] = chain_label_correct(chain, model);
    CHECK(applied);
    for (Eigen::Index r = 0; r < chain.rows(); ++r)
        CHECK((model.permute(fixed.row(r).transpose()) - chain.row(r).transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(model.youden(fixed.colwise().mean().transpose()) >= 0.0);
    const auto [again, applied_again] = chain_label_correct(fixed, model);
    CHECK_FALSE(applied_again);
    CHECK(again == fixed);
}

TEST_CASE("single-stage posterior on the simulation scenario")
{
    const auto s = single_scenario(3000, 12);
    McmcControl ctl;
    ctl.n_chains = 2;
    ctl.seed = 7;
    ctl.workers = 2;
    const PriorSpec prior = PriorSpec::make(PriorFamily::normal, 0, 10);
    const McmcFit fit = mcmc_fit(s.ystar, s.X(), s.Z(), prior, ctl);

    REQUIRE(fit.summary.size() == 6);
    CHECK(fit.summary[0].name == "beta[1,1]");
    CHECK(fit.summary[2].name == "gamma[1,1,1]");
    CHECK(fit.summary[5].name == "gamma[1,2,2]");
    CHECK(fit.naive_summary[1].name == "naive_beta[1,2]");
    for (double a : fit.chains.acceptance) {
        CHECK(a >= 0.1);
        CHECK(a <= 0.6);
    }

    const McmcModel model = single_mcmc_model(s.ystar, s.X(), s.Z());
    const Eigen::MatrixXd all = fit.chains.pooled();
    bool finite = true;
    for (Eigen::Index r = 0; r < all.rows(); ++r)
        finite = finite && std::isfinite(log_prior(all.row(r).transpose(), prior) + model.loglik(all.row(r).transpose()));
    CHECK(finite);

    // the naive model is well identified, so its posterior mean sits on the MLE
    const GlmFit g = naive_logistic(s.ystar, s.X());
    for (Eigen::Index k = 0; k < 2; ++k)
        CHECK(fit.naive_summary[static_cast<std::size_t>(k)].mean ==
              Approx(g.coefficients[k]).margin(std::max(0.03, 4 * fit.naive_summary[static_cast<std::size_t>(k)].mcse)));
}

TEST_CASE("posterior summaries do not depend on the labeling of the starts")
{
    const auto s = single_scenario(3000, 12);
    const SingleFit em = em_fit(s.ystar, s.X(), s.Z(), EmControl{.accel = Accel::squarem});
    const McmcModel model = single_mcmc_model(s.ystar, s.X(), s.Z());
    McmcControl ctl;
    ctl.n_chains = 2;
    ctl.n_samples = 3000;
    ctl.seed = 31;
    ctl.init = {em.report.estimates, em.report.estimates};
    const PriorSpec prior = PriorSpec::make(PriorFamily::normal, 0, 10);
    const auto plain = summarize(run_mcmc(model, prior, ctl));
    ctl.init = {model.permute(em.report.estimates), model.permute(em.report.estimates)};
    const ChainSet flipped_cs = run_mcmc(model, prior, ctl);
    CHECK(flipped_cs.label_correction_applied[0]);
    CHECK(flipped_cs.label_correction_applied[1]);
    const auto flipped = summarize(flipped_cs);
    for (std::size_t k = 0; k < plain.size(); ++k) {
        const double mc = std::hypot(plain[k].mcse, flipped[k].mcse);
        CHECK(flipped[k].mean == Approx(plain[k].mean).margin(std::max(0.05, 4 * mc)));
    }
}

TEST_CASE("two-stage posterior layout")
{
    const auto s = twostage_scenario(600, 2);
    McmcControl ctl;
    ctl.n_chains = 2;
    ctl.n_samples = 200;
    ctl.burn_in = 200;
    ctl.seed = 3;
    const McmcFit fit =
        mcmc_fit_2stage(s.ystar1, s.ystar2, s.X(), s.Z1(), s.Z2(), PriorSpec::make(PriorFamily::normal, 0, 10), ctl);
    REQUIRE(fit.summary.size() == 2 + 4 + 8);
    CHECK(fit.summary[2].name == "gamma1[1,1,1]");
    CHECK(fit.summary[6].name == "gamma2[1,1,1,1]");
    CHECK(fit.summary[7].name == "gamma2[1,2,1,1]");
    CHECK(fit.summary[8].name == "gamma2[1,1,2,1]");
    CHECK(fit.summary[13].name == "gamma2[1,2,2,2]");
    CHECK(fit.naive_summary.size() == 2);

    const McmcModel m = twostage_mcmc_model(s.ystar1, s.ystar2, s.X(), s.Z1(), s.Z2());
    CHECK(m.blocks.size() == 7);
    const detail::TwoStageLayout L{2, 2, 2};
    const TwoStageParams truth = twostage_truth();
    CHECK(m.loglik(L.pack(truth)) ==
          Approx(observed_loglik_2stage(truth, s.X(), s.Z1(), s.Z2(), s.ystar1, s.ystar2)).epsilon(1e-12));
}
