#ifndef MISCORR_MCMC_HPP
#define MISCORR_MCMC_HPP

// Bayesian estimation for the single-outcome and two-stage models with a
// component-blocked adaptive random-walk Metropolis sampler. Proposal
// covariances adapt during burn-in and are frozen afterwards. Label
// switching is resolved per chain at the chain's posterior-mean gamma.

#include "parallel.hpp"
#include "random.hpp"
#include "twostage.hpp"

#include <functional>
#include <memory>
#include <tuple>

namespace miscorr
{

enum class PriorFamily { uniform, normal, double_exponential, t };

inline std::string to_string(PriorFamily f)
{
    switch (f) {
    case PriorFamily::uniform: return "uniform";
    case PriorFamily::normal: return "normal";
    case PriorFamily::double_exponential: return "double-exponential";
    case PriorFamily::t: return "t";
    }
    return "normal";
}

inline PriorFamily prior_family_from_string(const std::string& s)
{
    if (s == "uniform") return PriorFamily::uniform;
    if (s == "normal") return PriorFamily::normal;
    if (s == "double-exponential" || s == "dexp" || s == "laplace") return PriorFamily::double_exponential;
    if (s == "t") return PriorFamily::t;
    throw Error("unknown prior family '" + s + "' (expected uniform, normal, double-exponential or t)");
}

/// Independent priors on every packed parameter. `a` is the location (or
/// lower bound) and `b` the scale (or upper bound); length-1 vectors
/// broadcast to all parameters.
struct PriorSpec
{
    PriorFamily family = PriorFamily::normal;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 10.0);
    double df = 3.0;

    static PriorSpec make(PriorFamily f, double a, double b, double df = 3.0)
    {
        PriorSpec p;
        p.family = f;
        p.a = Eigen::VectorXd::Constant(1, a);
        p.b = Eigen::VectorXd::Constant(1, b);
        p.df = df;
        return p;
    }

    double a_at(Eigen::Index k) const { return a.size() == 1 ? a[0] : a[k]; }
    double b_at(Eigen::Index k) const { return b.size() == 1 ? b[0] : b[k]; }

    void validate(Eigen::Index d) const
    {
        require_dims((a.size() == 1 || a.size() == d) && (b.size() == 1 || b.size() == d),
                     "prior hyperparameters must have length 1 or " + std::to_string(d));
        for (Eigen::Index k = 0; k < std::max(a.size(), b.size()); ++k) {
            require(std::isfinite(a_at(k)) && std::isfinite(b_at(k)), "prior hyperparameters must be finite");
            if (family == PriorFamily::uniform)
                require(a_at(k) < b_at(k), "uniform prior bounds must satisfy lower < upper");
            else
                require(b_at(k) > 0.0, "prior scales must be positive");
        }
        if (family == PriorFamily::t) require(df > 0.0, "t prior degrees of freedom must be positive");
    }

    /// Hyperparameters for the first `n` parameters only.
    PriorSpec head(Eigen::Index n) const
    {
        PriorSpec p = *this;
        if (a.size() != 1) p.a = a.head(n);
        if (b.size() != 1) p.b = b.head(n);
        return p;
    }

    double draw(Rng& rng, Eigen::Index k) const
    {
        const double loc = a_at(k);
        const double sc = b_at(k);
        switch (family) {
        case PriorFamily::uniform: return loc + (sc - loc) * uniform01(rng);
        case PriorFamily::normal: return loc + sc * standard_normal(rng);
        case PriorFamily::double_exponential: {
            const double u = uniform01(rng) - 0.5;
            return loc - sc * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
        }
        case PriorFamily::t: return loc + sc * std::student_t_distribution<double>(df)(rng);
        }
        return loc;
    }
};

inline double log_prior(const Eigen::VectorXd& theta, const PriorSpec& prior)
{
    prior.validate(theta.size());
    constexpr double log_sqrt_2pi = 0.91893853320467274178;
    double lp = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double a = prior.a_at(k);
        const double b = prior.b_at(k);
        const double x = theta[k];
        switch (prior.family) {
        case PriorFamily::uniform:
            if (x < a || x > b) return -std::numeric_limits<double>::infinity();
            lp -= std::log(b - a);
            break;
        case PriorFamily::normal: {
            const double z = (x - a) / b;
            lp += -log_sqrt_2pi - std::log(b) - 0.5 * z * z;
            break;
        }
        case PriorFamily::double_exponential: lp += -std::log(2.0 * b) - std::abs(x - a) / b; break;
        case PriorFamily::t: {
            const double z = (x - a) / b;
            const double v = prior.df;
            lp += std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0) - 0.5 * std::log(v * M_PI) - std::log(b) -
                  (v + 1.0) / 2.0 * std::log1p(z * z / v);
            break;
        }
        }
    }
    return lp;
}

struct McmcControl
{
    int n_chains = 4;
    int n_samples = 1000;  // kept draws per chain
    int burn_in = 500;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<Eigen::VectorXd> init;  // one per chain; empty means prior draws
    double target_acceptance = 0.3;
};

/// A model the sampler can target: packed parameters, blocks, likelihood,
/// and the label permutation with its Youden's J.
struct McmcModel
{
    std::vector<std::string> names;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;  // (offset, size)
    std::function<double(const Eigen::VectorXd&)> loglik;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> permute;  // empty: no label symmetry
    std::function<double(const Eigen::VectorXd&)> youden;

    Eigen::Index dim() const { return static_cast<Eigen::Index>(names.size()); }
};

struct ChainSet
{
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> chains;  // n_samples x dim each
    int n_samples = 0;
    int burn_in = 0;
    std::vector<double> acceptance;  // per chain, averaged over blocks, post burn-in
    std::vector<bool> label_correction_applied;
    std::vector<std::uint64_t> chain_seeds;

    Eigen::MatrixXd pooled() const
    {
        Eigen::MatrixXd all(static_cast<Eigen::Index>(chains.size()) * n_samples, static_cast<Eigen::Index>(names.size()));
        for (std::size_t c = 0; c < chains.size(); ++c)
            all.middleRows(static_cast<Eigen::Index>(c) * n_samples, n_samples) = chains[c];
        return all;
    }
};

struct PosteriorSummaryRow
{
    std::string name;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double mcse = 0.0;   // batch-means Monte Carlo standard error of the mean
    double rhat = 1.0;   // split R-hat
};

namespace detail
{

inline double median_of(std::vector<double> v)
{
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2)));
}

// Batch-means variance of the chain mean, averaged over chains.
inline double batch_means_mcse(const std::vector<Eigen::VectorXd>& chains)
{
    double var_sum = 0.0;
    std::size_t total = 0;
    for (const auto& c : chains) {
        const Eigen::Index n = c.size();
        const auto bs = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::sqrt(static_cast<double>(n))));
        const Eigen::Index nb = n / bs;
        if (nb < 2) continue;
        Eigen::VectorXd means(nb);
        for (Eigen::Index b = 0; b < nb; ++b) means[b] = c.segment(b * bs, bs).mean();
        const double m = means.mean();
        const double var_batch = (means.array() - m).square().sum() / static_cast<double>(nb - 1);
        var_sum += var_batch * static_cast<double>(bs) * static_cast<double>(n);
        total += static_cast<std::size_t>(n);
    }
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(var_sum / (static_cast<double>(total) * static_cast<double>(total)));
}

inline double split_rhat(const std::vector<Eigen::VectorXd>& chains)
{
    std::vector<Eigen::VectorXd> halves;
    for (const auto& c : chains) {
        const Eigen::Index h = c.size() / 2;
        if (h < 2) return std::numeric_limits<double>::quiet_NaN();
        halves.emplace_back(c.head(h));
        halves.emplace_back(c.segment(h, h));
    }
    const auto m = static_cast<double>(halves.size());
    const auto n = static_cast<double>(halves[0].size());
    Eigen::VectorXd means(static_cast<Eigen::Index>(halves.size()));
    double w = 0.0;
    for (std::size_t k = 0; k < halves.size(); ++k) {
        means[static_cast<Eigen::Index>(k)] = halves[k].mean();
        w += (halves[k].array() - halves[k].mean()).square().sum() / (n - 1.0);
    }
    w /= m;
    const double b = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
    if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

struct ChainResult
{
    Eigen::MatrixXd draws;
    double acceptance = 0.0;
    bool corrected = false;
};

// Running mean and covariance of one block over the current adaptation
// window; each window starts afresh so the transient from a distant start
// does not inflate the proposal.
struct BlockAdapter
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd m2;
    long count = 0;
    double log_scale = 0.0;
    Eigen::MatrixXd chol;  // Cholesky factor of the current proposal covariance
    bool empirical = false;

    explicit BlockAdapter(Eigen::Index d)
        : mean(Eigen::VectorXd::Zero(d)), m2(Eigen::MatrixXd::Zero(d, d)),
          log_scale(std::log(0.1)), chol(Eigen::MatrixXd::Identity(d, d))
    {
    }

    void observe(const Eigen::VectorXd& x)
    {
        ++count;
        const Eigen::VectorXd delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean).transpose();
    }

    void refresh_covariance()
    {
        const Eigen::Index d = mean.size();
        if (count < 2 * (d + 1)) return;
        const Eigen::MatrixXd cov = m2 / static_cast<double>(count - 1) + 1e-8 * Eigen::MatrixXd::Identity(d, d);
        Eigen::LLT<Eigen::MatrixXd> llt(cov * (2.38 * 2.38 / static_cast<double>(d)));
        if (llt.info() != Eigen::Success) return;
        chol = llt.matrixL();
        if (!empirical) log_scale = 0.0;
        empirical = true;
    }

    void reset_window()
    {
        mean.setZero();
        m2.setZero();
        count = 0;
    }
};

inline ChainResult run_chain(const McmcModel& model, const PriorSpec& prior, const Eigen::VectorXd& init,
                             const McmcControl& ctl, std::uint64_t chain_seed)
{
    Rng rng = make_rng(chain_seed, 1);
    const Eigen::Index d = model.dim();
    Eigen::VectorXd cur = init;
    auto log_post = [&](const Eigen::VectorXd& v) {
        const double lp = log_prior(v, prior);
        if (!std::isfinite(lp)) return lp;
        return lp + model.loglik(v);
    };
    double cur_lp = log_post(cur);
    if (!std::isfinite(cur_lp)) throw Error("log posterior is not finite at the initial values");

    std::vector<BlockAdapter> adapt;
    for (const auto& [off, size] : model.blocks) adapt.emplace_back(size);
    std::vector<long> accepted(model.blocks.size(), 0);

    // Burn-in schedule: covariance windows of 50, 100, 200, ... iterations
    // (the last one stretched to fill), then a 50-iteration buffer that only
    // tunes the scale. The scale's adaptation rate restarts with each window.
    const int cov_end = ctl.burn_in >= 150 ? ctl.burn_in - 50 : ctl.burn_in;
    int window = 50;
    int window_start = 0;
    int window_end = std::min(window, cov_end);
    auto next_window = [&] {
        window_start = window_end;
        window *= 2;
        window_end = window_start + window;
        if (cov_end - window_end < 2 * window) window_end = cov_end;
    };

    ChainResult out;
    out.draws.resize(ctl.n_samples, d);
    const int total = ctl.burn_in + ctl.n_samples;
    for (int it = 0; it < total; ++it) {
        const bool burning = it < ctl.burn_in;
        for (std::size_t b = 0; b < model.blocks.size(); ++b) {
            const auto [off, size] = model.blocks[b];
            BlockAdapter& ad = adapt[b];
            Eigen::VectorXd z(size);
            for (Eigen::Index k = 0; k < size; ++k) z[k] = standard_normal(rng);
            Eigen::VectorXd prop = cur;
            prop.segment(off, size) += std::exp(ad.log_scale) * (ad.chol * z);
            const double prop_lp = log_post(prop);
            const bool accept = std::isfinite(prop_lp) && std::log(uniform01(rng)) < prop_lp - cur_lp;
            if (accept) {
                cur = std::move(prop);
                cur_lp = prop_lp;
            }
            if (burning) {
                const double rate = std::pow(static_cast<double>(it + 1 - window_start), -0.6);
                ad.log_scale += rate * ((accept ? 1.0 : 0.0) - ctl.target_acceptance);
                ad.observe(cur.segment(off, size));
                if (it + 1 == window_end && it + 1 <= cov_end) {
                    ad.refresh_covariance();
                    ad.reset_window();
                }
            } else if (accept) {
                ++accepted[b];
            }
        }
        if (burning && it + 1 == window_end) next_window();
        if (!burning) out.draws.row(it - ctl.burn_in) = cur.transpose();
    }

    double acc = 0.0;
    for (std::size_t b = 0; b < accepted.size(); ++b) {
        if (accepted[b] == 0)
            throw Error("MCMC block " + std::to_string(b + 1) + " rejected every proposal after burn-in");
        acc += static_cast<double>(accepted[b]) / ctl.n_samples;
    }
    out.acceptance = acc / static_cast<double>(accepted.size());
    return out;
}

} // namespace detail

/// Applies the label permutation to every draw when the posterior-mean
/// labeling has negative Youden's J.
inline std::pair<Eigen::MatrixXd, bool> chain_label_correct(const Eigen::MatrixXd& chain, const McmcModel& model)
{
    require(chain.rows() > 0, "cannot label-correct an empty chain");
    if (!model.permute) return {chain, false};
    const Eigen::VectorXd mean = chain.colwise().mean().transpose();
    if (model.youden(mean) >= 0.0) return {chain, false};
    Eigen::MatrixXd out(chain.rows(), chain.cols());
    for (Eigen::Index r = 0; r < chain.rows(); ++r) out.row(r) = model.permute(chain.row(r).transpose()).transpose();
    return {out, true};
}

/// Seed of chain c given the master seed.
inline std::uint64_t chain_seed(std::uint64_t master, int chain)
{
    Rng r = make_rng(master, 0x636861696eULL + static_cast<std::uint64_t>(chain));
    return r();
}

inline ChainSet run_mcmc(const McmcModel& model, const PriorSpec& prior, const McmcControl& ctl)
{
    require(ctl.n_samples > 0, "n_samples must be positive");
    require(ctl.burn_in >= 0, "burn_in must be nonnegative");
    require(ctl.n_chains >= 1, "n_chains must be at least 1");
    require(ctl.init.empty() || static_cast<int>(ctl.init.size()) == ctl.n_chains,
            "supply one initial vector per chain or none");
    prior.validate(model.dim());

    ChainSet cs;
    cs.names = model.names;
    cs.n_samples = ctl.n_samples;
    cs.burn_in = ctl.burn_in;
    cs.chains.resize(static_cast<std::size_t>(ctl.n_chains));
    cs.acceptance.resize(static_cast<std::size_t>(ctl.n_chains));
    cs.label_correction_applied.resize(static_cast<std::size_t>(ctl.n_chains));
    for (int c = 0; c < ctl.n_chains; ++c) cs.chain_seeds.push_back(chain_seed(ctl.seed, c));

    std::vector<detail::ChainResult> results(static_cast<std::size_t>(ctl.n_chains));
    parallel_for(ctl.n_chains, ctl.workers, [&](int c) {
        const auto u = static_cast<std::size_t>(c);
        Eigen::VectorXd init(model.dim());
        if (ctl.init.empty()) {
            Rng rng = make_rng(cs.chain_seeds[u], 0);
            for (Eigen::Index k = 0; k < init.size(); ++k) init[k] = prior.draw(rng, k);
        } else {
            init = ctl.init[u];
            require_dims(init.size() == model.dim(), "initial vector has the wrong length");
        }
        results[u] = detail::run_chain(model, prior, init, ctl, cs.chain_seeds[u]);
    });
    for (std::size_t c = 0; c < results.size(); ++c) {
        auto [draws, applied] = chain_label_correct(results[c].draws, model);
        cs.chains[c] = std::move(draws);
        cs.acceptance[c] = results[c].acceptance;
        cs.label_correction_applied[c] = applied;
    }
    return cs;
}

inline std::vector<PosteriorSummaryRow> summarize(const ChainSet& cs)
{
    std::vector<PosteriorSummaryRow> rows;
    const Eigen::MatrixXd all = cs.pooled();
    for (Eigen::Index k = 0; k < all.cols(); ++k) {
        PosteriorSummaryRow r;
        r.name = cs.names[static_cast<std::size_t>(k)];
        const Eigen::VectorXd col = all.col(k);
        r.mean = col.mean();
        r.median = detail::median_of(std::vector<double>(col.data(), col.data() + col.size()));
        r.sd = col.size() > 1 ? std::sqrt((col.array() - r.mean).square().sum() / static_cast<double>(col.size() - 1)) : 0.0;
        std::vector<Eigen::VectorXd> per;
        for (const auto& c : cs.chains) per.emplace_back(c.col(k));
        r.mcse = detail::batch_means_mcse(per);
        r.rhat = detail::split_rhat(per);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace detail
{

inline std::string bracket(const std::string& stem, std::initializer_list<long> idx)
{
    std::string s = stem + "[";
    bool first = true;
    for (long i : idx) {
        s += (first ? "" : ",") + std::to_string(i);
        first = false;
    }
    return s + "]";
}

} // namespace detail

inline McmcModel single_mcmc_model(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z)
{
    detail::check_single_inputs(ystar, X, Z);
    const detail::SingleLayout L{X.cols(), Z.cols(), ObservationConstraint::none};
    McmcModel m;
    for (Eigen::Index c = 0; c < L.px; ++c) m.names.push_back(detail::bracket("beta", {1, c + 1}));
    for (int j = 1; j <= 2; ++j)
        for (Eigen::Index c = 0; c < L.pz; ++c) m.names.push_back(detail::bracket("gamma", {1, c + 1, j}));
    m.blocks = {{0, L.px}, {L.px, L.pz}, {L.px + L.pz, L.pz}};
    // the model owns its data so it can outlive the caller's temporaries
    auto data = std::make_shared<const std::tuple<Categories, DesignMatrix, DesignMatrix>>(ystar, X, Z);
    m.loglik = [L, data](const Eigen::VectorXd& v) {
        const auto& [y, XX, ZZ] = *data;
        const SingleOutcomeParams p = L.unpack(v);
        return detail::single_loglik(compute_pi(p.beta, XX), compute_pistar(p.gamma, ZZ), y);
    };
    m.permute = [L](const Eigen::VectorXd& v) { return L.pack(permute_labels(L.unpack(v))); };
    m.youden = [L, data](const Eigen::VectorXd& v) {
        return compute_pistar(L.unpack(v).gamma, std::get<2>(*data)).youden();
    };
    return m;
}

inline McmcModel twostage_mcmc_model(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                                     const DesignMatrix& Z1, const DesignMatrix& Z2)
{
    detail::check_twostage_inputs(ystar1, ystar2, X, Z1, Z2);
    const detail::TwoStageLayout L{X.cols(), Z1.cols(), Z2.cols()};
    McmcModel m;
    for (Eigen::Index c = 0; c < L.px; ++c) m.names.push_back(detail::bracket("beta", {1, c + 1}));
    for (int j = 1; j <= 2; ++j)
        for (Eigen::Index c = 0; c < L.pz1; ++c) m.names.push_back(detail::bracket("gamma1", {1, c + 1, j}));
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k)
            for (Eigen::Index c = 0; c < L.pz2; ++c) m.names.push_back(detail::bracket("gamma2", {1, c + 1, k, j}));
    m.blocks = {{0, L.px}, {L.px, L.pz1}, {L.px + L.pz1, L.pz1}};
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k) m.blocks.emplace_back(L.gamma2_offset(k, j), L.pz2);
    auto data = std::make_shared<const std::tuple<Categories, Categories, DesignMatrix, DesignMatrix, DesignMatrix>>(
        ystar1, ystar2, X, Z1, Z2);
    m.loglik = [L, data](const Eigen::VectorXd& v) {
        const auto& [y1, y2, XX, ZZ1, ZZ2] = *data;
        return detail::twostage_loglik(detail::bundle_unchecked(L.unpack(v), XX, ZZ1, ZZ2), y1, y2);
    };
    m.permute = [L](const Eigen::VectorXd& v) { return L.pack(permute_labels(L.unpack(v))); };
    m.youden = [L, data](const Eigen::VectorXd& v) {
        return compute_pistar(L.unpack(v).gamma1, std::get<3>(*data)).youden();
    };
    return m;
}

/// Logistic regression of 1[Y* = 1] on X, for the naive posterior rows.
inline McmcModel naive_mcmc_model(const Categories& ystar, const DesignMatrix& X)
{
    check_categories(ystar, "ystar");
    McmcModel m;
    for (Eigen::Index c = 0; c < X.cols(); ++c) m.names.push_back(detail::bracket("naive_beta", {1, c + 1}));
    m.blocks = {{0, X.cols()}};
    m.loglik = [e = event_indicator(ystar), XX = std::make_shared<const DesignMatrix>(X)](const Eigen::VectorXd& v) {
        const Eigen::VectorXd eta = XX->linear_predictor(v);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) ll += e[i] == 1.0 ? log_expit(eta[i]) : log1m_expit(eta[i]);
        return ll;
    };
    return m;
}

struct McmcFit
{
    ChainSet chains;
    std::vector<PosteriorSummaryRow> summary;
    ChainSet naive_chains;
    std::vector<PosteriorSummaryRow> naive_summary;
};

namespace detail
{

inline McmcControl naive_control(const McmcControl& ctl, Eigen::Index px)
{
    McmcControl n = ctl;
    n.seed = ctl.seed ^ 0x6e61697665ULL;
    for (auto& v : n.init) v = Eigen::VectorXd(v.head(px));
    return n;
}

} // namespace detail

inline McmcFit mcmc_fit(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z, const PriorSpec& prior,
                        const McmcControl& ctl)
{
    McmcFit f;
    const McmcModel model = single_mcmc_model(ystar, X, Z);
    f.chains = run_mcmc(model, prior, ctl);
    f.summary = summarize(f.chains);
    const McmcModel naive = naive_mcmc_model(ystar, X);
    f.naive_chains = run_mcmc(naive, prior.head(X.cols()), detail::naive_control(ctl, X.cols()));
    f.naive_summary = summarize(f.naive_chains);
    return f;
}

inline McmcFit mcmc_fit_2stage(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                               const DesignMatrix& Z1, const DesignMatrix& Z2, const PriorSpec& prior,
                               const McmcControl& ctl)
{
    McmcFit f;
    const McmcModel model = twostage_mcmc_model(ystar1, ystar2, X, Z1, Z2);
    f.chains = run_mcmc(model, prior, ctl);
    f.summary = summarize(f.chains);
    const McmcModel naive = naive_mcmc_model(ystar1, X);
    f.naive_chains = run_mcmc(naive, prior.head(X.cols()), detail::naive_control(ctl, X.cols()));
    f.naive_summary = summarize(f.naive_chains);
    return f;
}

} // namespace miscorr

#endif
