#ifndef MISCORR_MEDIATION_HPP
#define MISCORR_MEDIATION_HPP

// Mediation with a misclassified binary mediator M (observed as M*).
//
//   logit P(M = 1 | X, C)          = [1 X C] beta
//   logit P(M* = 1 | M = j, Z)     = Z gamma.col(j)
//   g(E[Y | X, M, C])              = theta_0 + theta_x X + theta_m M + theta_c C (+ theta_xm X M)
//
// M is category j in {1,2} in the latent-class algebra and the numeric
// value 1 (j = 1) or 0 (j = 2) inside the outcome mechanism.

#include "single.hpp"

namespace miscorr
{

enum class OutcomeDist { normal, bernoulli, poisson };

inline std::string to_string(OutcomeDist d)
{
    switch (d) {
    case OutcomeDist::normal: return "normal";
    case OutcomeDist::bernoulli: return "bernoulli";
    case OutcomeDist::poisson: return "poisson";
    }
    return "normal";
}

inline OutcomeDist outcome_dist_from_string(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "normal" || s == "gaussian") return OutcomeDist::normal;
    if (s == "bernoulli" || s == "binary" || s == "binomial") return OutcomeDist::bernoulli;
    if (s == "poisson") return OutcomeDist::poisson;
    throw Error("unknown outcome distribution '" + s + "' (expected normal, bernoulli or poisson)");
}

/// Observed data for one mediation analysis. C may have zero columns.
struct MediationData
{
    Categories mstar;
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Eigen::MatrixXd C;
    DesignMatrix Z;

    MediationData(Categories mstar_, Eigen::VectorXd y_, Eigen::VectorXd x_, Eigen::MatrixXd C_, DesignMatrix Z_)
        : mstar(std::move(mstar_)), y(std::move(y_)), x(std::move(x_)), C(std::move(C_)), Z(std::move(Z_))
    {
        const auto n = static_cast<Eigen::Index>(mstar.size());
        check_categories(mstar, "mstar");
        require_dims(y.size() == n && x.size() == n && Z.rows() == n, "mediation inputs have different lengths");
        require_dims(C.rows() == n || C.size() == 0, "C rows do not match the outcome length");
        if (C.size() == 0) C.resize(n, 0);
        require(y.allFinite() && x.allFinite() && C.allFinite(), "mediation inputs must be finite");
    }

    Eigen::Index rows() const { return y.size(); }
    Eigen::Index n_covariates() const { return C.cols(); }

    /// [1 X C], the design of the mediator mechanism.
    DesignMatrix mediator_design() const
    {
        Eigen::MatrixXd m(rows(), 1 + C.cols());
        m.col(0) = x;
        m.rightCols(C.cols()) = C;
        return DesignMatrix::with_intercept(m);
    }

    /// Outcome design [1 X m C (X m)] with the mediator fixed at m.
    Eigen::MatrixXd outcome_design(double m, bool interaction) const
    {
        Eigen::MatrixXd d(rows(), 3 + C.cols() + (interaction ? 1 : 0));
        d.col(0).setOnes();
        d.col(1) = x;
        d.col(2).setConstant(m);
        d.middleCols(3, C.cols()) = C;
        if (interaction) d.col(d.cols() - 1) = x * m;
        return d;
    }

    MediationData select_rows(const std::vector<Eigen::Index>& idx) const
    {
        Categories ms(idx.size());
        Eigen::VectorXd ys(static_cast<Eigen::Index>(idx.size()));
        Eigen::VectorXd xs(ys.size());
        Eigen::MatrixXd cs(ys.size(), C.cols());
        for (std::size_t s = 0; s < idx.size(); ++s) {
            const auto r = static_cast<Eigen::Index>(s);
            ms[s] = mstar[static_cast<std::size_t>(idx[s])];
            ys[r] = y[idx[s]];
            xs[r] = x[idx[s]];
            cs.row(r) = C.row(idx[s]);
        }
        return MediationData(std::move(ms), std::move(ys), std::move(xs), std::move(cs), Z.select_rows(idx));
    }
};

struct MediationParams
{
    Eigen::VectorXd beta;   // over [1 X C]
    Eigen::MatrixXd gamma;  // (p_z + 1) x 2
    Eigen::VectorXd theta;  // theta_0, theta_x, theta_m, theta_c..., (theta_xm)
    double sigma = 1.0;     // normal outcomes only
    OutcomeDist dist = OutcomeDist::normal;
    bool interaction = false;

    static Eigen::Index theta_size(Eigen::Index n_cov, bool interaction) { return 3 + n_cov + (interaction ? 1 : 0); }

    void validate(const MediationData& d) const
    {
        require_dims(beta.size() == 2 + d.n_covariates(), "beta must have 2 + (C columns) entries");
        require_dims(gamma.rows() == d.Z.cols() && gamma.cols() == 2, "gamma must be (Z columns) x 2");
        require_dims(theta.size() == theta_size(d.n_covariates(), interaction),
                     "theta length does not match the outcome mechanism");
        require(beta.allFinite() && gamma.allFinite() && theta.allFinite(), "parameters must be finite");
        if (dist == OutcomeDist::normal) require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
    }

    std::vector<std::string> names(Eigen::Index n_cov) const
    {
        std::vector<std::string> n;
        for (Eigen::Index c = 0; c < beta.size(); ++c) n.push_back("beta_" + std::to_string(c));
        for (int j = 1; j <= 2; ++j)
            for (Eigen::Index c = 0; c < gamma.rows(); ++c) n.push_back("gamma" + std::to_string(c + 1) + std::to_string(j));
        for (const auto& t : theta_names(n_cov, interaction)) n.push_back(t);
        if (dist == OutcomeDist::normal) n.emplace_back("sigma");
        return n;
    }

    static std::vector<std::string> theta_names(Eigen::Index n_cov, bool interaction)
    {
        std::vector<std::string> n{"theta_0", "theta_x", "theta_m"};
        for (Eigen::Index c = 0; c < n_cov; ++c) n.push_back("theta_c" + std::to_string(c + 1));
        if (interaction) n.emplace_back("theta_xm");
        return n;
    }
};

struct MediatorProbs
{
    ClassProbTable pi;
    ObservationProbTable pistar;
};

inline MediatorProbs mediator_probs(const Eigen::VectorXd& beta, const Eigen::MatrixXd& gamma, const MediationData& d)
{
    return {compute_pi(beta, d.mediator_design()), compute_pistar(gamma, d.Z)};
}

/// Log density (or pmf) of y under the outcome mechanism at linear predictor eta.
inline double outcome_logdensity(double y, double eta, double sigma, OutcomeDist dist)
{
    switch (dist) {
    case OutcomeDist::normal: {
        const double r = (y - eta) / sigma;
        return -0.5 * std::log(2.0 * M_PI) - std::log(sigma) - 0.5 * r * r;
    }
    case OutcomeDist::bernoulli:
        if (y != 0.0 && y != 1.0) throw Error("bernoulli outcome must be 0 or 1");
        return y == 1.0 ? log_expit(eta) : log1m_expit(eta);
    case OutcomeDist::poisson: {
        if (!(y >= 0.0)) throw Error("poisson outcome must be nonnegative");
        const double e = clamp_eta(eta);
        return y * e - std::exp(e) - std::lgamma(y + 1.0);
    }
    }
    return 0.0;
}

/// Per-subject outcome log-likelihood with the mediator fixed at category m (1 or 2).
inline double outcome_loglik_contrib(double y, double x, int m, const Eigen::VectorXd& c, const Eigen::VectorXd& theta,
                                     double sigma, OutcomeDist dist, bool interaction)
{
    require(m == 1 || m == 2, "mediator category must be 1 or 2");
    require_dims(theta.size() == MediationParams::theta_size(c.size(), interaction), "theta length mismatch");
    const double mv = m == 1 ? 1.0 : 0.0;
    double eta = theta[0] + theta[1] * x + theta[2] * mv + c.dot(theta.segment(3, c.size()));
    if (interaction) eta += theta[theta.size() - 1] * x * mv;
    return outcome_logdensity(y, eta, sigma, dist);
}

namespace detail
{

// Cached designs and indicators reused across EM iterations.
struct MediationCache
{
    DesignMatrix Xm;
    std::array<Eigen::MatrixXd, 2> D;  // outcome design with M = 1 (j = 1) and M = 0 (j = 2)
    Eigen::VectorXd e_mstar;

    MediationCache(const MediationData& d, bool interaction)
        : Xm(d.mediator_design()),
          D{d.outcome_design(1.0, interaction), d.outcome_design(0.0, interaction)},
          e_mstar(event_indicator(d.mstar))
    {
    }
};

inline Eigen::MatrixXd outcome_logf(const MediationParams& p, const MediationData& d, const MediationCache& cache)
{
    Eigen::MatrixXd lf(d.rows(), 2);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd eta = cache.D[static_cast<std::size_t>(j)] * p.theta;
        for (Eigen::Index i = 0; i < d.rows(); ++i) lf(i, j) = outcome_logdensity(d.y[i], eta[i], p.sigma, p.dist);
    }
    return lf;
}

// Log of the joint terms P(M = j) P(M* | j) f(y | M = j).
inline Eigen::MatrixXd mediation_logterms(const MediationParams& p, const MediationData& d,
                                          const MediationCache& cache)
{
    const ClassProbTable pi = compute_pi(p.beta, cache.Xm);
    const ObservationProbTable ps = compute_pistar(p.gamma, d.Z);
    Eigen::MatrixXd lt = outcome_logf(p, d, cache);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const int k = d.mstar[static_cast<std::size_t>(i)];
        for (int j = 1; j <= 2; ++j) lt(i, j - 1) += std::log(pi.pi(i, j - 1)) + std::log(ps.at(i, k, j));
    }
    return lt;
}

inline double log_sum_exp2(double a, double b)
{
    const double m = std::max(a, b);
    if (!std::isfinite(m)) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double mediation_loglik(const MediationParams& p, const MediationData& d, const MediationCache& cache)
{
    const Eigen::MatrixXd lt = mediation_logterms(p, d, cache);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < lt.rows(); ++i) ll += log_sum_exp2(lt(i, 0), lt(i, 1));
    return ll;
}

inline Eigen::MatrixXd mediation_weights(const MediationParams& p, const MediationData& d, const MediationCache& cache)
{
    const Eigen::MatrixXd lt = mediation_logterms(p, d, cache);
    Eigen::MatrixXd w(lt.rows(), 2);
    for (Eigen::Index i = 0; i < lt.rows(); ++i) {
        const double lse = log_sum_exp2(lt(i, 0), lt(i, 1));
        if (!std::isfinite(lse)) throw Error("E-step denominator underflow at subject " + std::to_string(i + 1));
        w(i, 0) = std::exp(lt(i, 0) - lse);
        w(i, 1) = std::exp(lt(i, 1) - lse);
    }
    return w;
}

struct MediationLayout
{
    Eigen::Index pb = 0;
    Eigen::Index pz = 0;
    Eigen::Index pt = 0;
    OutcomeDist dist = OutcomeDist::normal;
    bool interaction = false;

    Eigen::Index size() const { return pb + 2 * pz + pt + (dist == OutcomeDist::normal ? 1 : 0); }

    Eigen::VectorXd pack(const MediationParams& p) const
    {
        Eigen::VectorXd v(size());
        v.head(pb) = p.beta;
        v.segment(pb, pz) = p.gamma.col(0);
        v.segment(pb + pz, pz) = p.gamma.col(1);
        v.segment(pb + 2 * pz, pt) = p.theta;
        if (dist == OutcomeDist::normal) v[size() - 1] = p.sigma;
        return v;
    }

    MediationParams unpack(const Eigen::VectorXd& v) const
    {
        MediationParams p;
        p.dist = dist;
        p.interaction = interaction;
        p.beta = v.head(pb);
        p.gamma.resize(pz, 2);
        p.gamma.col(0) = v.segment(pb, pz);
        p.gamma.col(1) = v.segment(pb + pz, pz);
        p.theta = v.segment(pb + 2 * pz, pt);
        p.sigma = dist == OutcomeDist::normal ? v[size() - 1] : 1.0;
        return p;
    }
};

inline Eigen::VectorXd mediation_score(const MediationLayout& L, const Eigen::VectorXd& v, const MediationData& d,
                                       const MediationCache& cache)
{
    const MediationParams p = L.unpack(v);
    const Eigen::MatrixXd w = mediation_weights(p, d, cache);
    const ClassProbTable pi = compute_pi(p.beta, cache.Xm);
    const ObservationProbTable ps = compute_pistar(p.gamma, d.Z);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(L.size());
    g.head(L.pb) = cache.Xm.matrix().transpose() * (w.col(0) - pi.pi.col(0));
    for (int j = 0; j < 2; ++j)
        g.segment(L.pb + j * L.pz, L.pz) = d.Z.matrix().transpose() * w.col(j).cwiseProduct(cache.e_mstar - ps.event.col(j));
    const double s2 = p.sigma * p.sigma;
    for (int j = 0; j < 2; ++j) {
        const Eigen::MatrixXd& D = cache.D[static_cast<std::size_t>(j)];
        const Eigen::VectorXd eta = D * p.theta;
        Eigen::VectorXd r(d.rows());
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const double e = eta[i];
            switch (p.dist) {
            case OutcomeDist::normal: r[i] = (d.y[i] - e) / s2; break;
            case OutcomeDist::bernoulli: r[i] = e == clamp_eta(e) ? d.y[i] - expit(e) : 0.0; break;
            case OutcomeDist::poisson: r[i] = e == clamp_eta(e) ? d.y[i] - std::exp(e) : 0.0; break;
            }
        }
        g.segment(L.pb + 2 * L.pz, L.pt) += D.transpose() * w.col(j).cwiseProduct(r);
        if (p.dist == OutcomeDist::normal) {
            const Eigen::VectorXd res = d.y - eta;
            g[L.size() - 1] += (w.col(j).array() * (res.array().square() / (s2 * p.sigma) - 1.0 / p.sigma)).sum();
        }
    }
    return g;
}

} // namespace detail

/// Observed-data log-likelihood, enumerating the latent mediator.
inline double observed_loglik_mediation(const MediationParams& p, const MediationData& d)
{
    p.validate(d);
    return detail::mediation_loglik(p, d, detail::MediationCache(d, p.interaction));
}

/// Posterior P(M = j | M*, Y, X, C, Z).
inline Eigen::MatrixXd e_step_weights_mediation(const MediationParams& p, const MediationData& d)
{
    p.validate(d);
    return detail::mediation_weights(p, d, detail::MediationCache(d, p.interaction));
}

/// Gradient of observed_loglik_mediation over (beta, gamma by column, theta, sigma).
inline Eigen::VectorXd observed_score_mediation(const MediationParams& p, const MediationData& d)
{
    p.validate(d);
    const detail::MediationLayout L{p.beta.size(), p.gamma.rows(), p.theta.size(), p.dist, p.interaction};
    return detail::mediation_score(L, L.pack(p), d, detail::MediationCache(d, p.interaction));
}

/// Relabels the latent mediator (M -> 1 - M) keeping the likelihood fixed.
inline MediationParams permute_labels(const MediationParams& p)
{
    MediationParams q = p;
    q.beta = -p.beta;
    q.gamma = p.gamma.rowwise().reverse();
    q.theta[0] = p.theta[0] + p.theta[2];
    q.theta[2] = -p.theta[2];
    if (p.interaction) {
        const Eigen::Index xm = p.theta.size() - 1;
        q.theta[1] = p.theta[1] + p.theta[xm];
        q.theta[xm] = -p.theta[xm];
    }
    return q;
}

inline std::pair<MediationParams, bool> label_switch_correct(const MediationParams& p, const DesignMatrix& Z)
{
    const MediationParams q = permute_labels(p);
    if (compute_pistar(q.gamma, Z).youden() > compute_pistar(p.gamma, Z).youden()) return {q, true};
    return {p, false};
}

struct MediationFit
{
    MediationParams params;
    FitReport report;
    Eigen::MatrixXd weights;
    std::vector<double> trace;
};

namespace detail
{

inline GlmFit fit_outcome_glm(OutcomeDist dist, const DesignMatrix& D, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& w, std::optional<Eigen::VectorXd> start)
{
    switch (dist) {
    case OutcomeDist::normal: return fit_weighted_linear(D, y, w);
    case OutcomeDist::bernoulli: return fit_weighted_logistic(D, y, w, std::move(start));
    case OutcomeDist::poisson: return fit_weighted_poisson(D, y, w, std::move(start));
    }
    throw Error("unknown outcome distribution");
}

inline DesignMatrix stacked_design(const MediationCache& cache)
{
    Eigen::MatrixXd s(2 * cache.D[0].rows(), cache.D[0].cols());
    s << cache.D[0], cache.D[1];
    return DesignMatrix(std::move(s));
}

inline void check_outcome_domain(const Eigen::VectorXd& y, OutcomeDist dist)
{
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (dist == OutcomeDist::bernoulli && y[i] != 0.0 && y[i] != 1.0)
            throw Error("bernoulli outcome must be coded 0/1 (row " + std::to_string(i + 1) + ")");
        if (dist == OutcomeDist::poisson && y[i] < 0.0)
            throw Error("poisson outcome must be nonnegative (row " + std::to_string(i + 1) + ")");
    }
}

} // namespace detail

/// Naive starting values: mediator model on M*, outcome GLM with M* in place of M.
inline MediationParams default_mediation_start(const MediationData& d, OutcomeDist dist, bool interaction)
{
    detail::check_outcome_domain(d.y, dist);
    MediationParams p;
    p.dist = dist;
    p.interaction = interaction;
    p.beta = naive_logistic(d.mstar, d.mediator_design()).coefficients;
    p.gamma = Eigen::MatrixXd::Zero(d.Z.cols(), 2);
    Eigen::MatrixXd D = d.outcome_design(0.0, interaction);
    const Eigen::VectorXd ms = event_indicator(d.mstar);
    D.col(2) = ms;
    if (interaction) D.col(D.cols() - 1) = d.x.cwiseProduct(ms);
    const GlmFit g = detail::fit_outcome_glm(dist, DesignMatrix(D), d.y, Eigen::VectorXd::Ones(d.rows()), std::nullopt);
    p.theta = g.coefficients;
    p.sigma = dist == OutcomeDist::normal ? std::max(g.sigma, 1e-8) : 1.0;
    return p;
}

inline MediationFit em_fit_mediation(const MediationData& d, const MediationParams& start, const EmControl& ctl = {})
{
    start.validate(d);
    detail::check_outcome_domain(d.y, start.dist);
    const detail::MediationCache cache(d, start.interaction);
    const detail::MediationLayout L{start.beta.size(), start.gamma.rows(), start.theta.size(), start.dist,
                                    start.interaction};
    const DesignMatrix stacked = detail::stacked_design(cache);
    Eigen::VectorXd y2(2 * d.rows());
    y2 << d.y, d.y;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.rows());

    auto update = [&](const Eigen::VectorXd& v) {
        MediationParams p = L.unpack(v);
        const Eigen::MatrixXd w = detail::mediation_weights(p, d, cache);
        p.beta = fit_weighted_logistic(cache.Xm, w.col(0), ones, Eigen::VectorXd(p.beta)).coefficients;
        for (int j = 0; j < 2; ++j)
            if (w.col(j).sum() > 0.0)
                p.gamma.col(j) =
                    fit_weighted_logistic(d.Z, cache.e_mstar, w.col(j), Eigen::VectorXd(p.gamma.col(j))).coefficients;
        Eigen::VectorXd w2(2 * d.rows());
        w2 << w.col(0), w.col(1);
        const GlmFit g = detail::fit_outcome_glm(p.dist, stacked, y2, w2, Eigen::VectorXd(p.theta));
        p.theta = g.coefficients;
        if (p.dist == OutcomeDist::normal) p.sigma = std::max(g.sigma, 1e-10);
        return L.pack(p);
    };
    auto objective = [&](const Eigen::VectorXd& v) {
        const MediationParams p = L.unpack(v);
        if (p.dist == OutcomeDist::normal && !(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
        return detail::mediation_loglik(p, d, cache);
    };

    FixedPointResult fp = iterate_em(update, objective, L.pack(start), ctl);

    MediationFit out;
    auto [corrected, applied] = label_switch_correct(L.unpack(fp.params), d.Z);
    out.params = corrected;
    out.weights = detail::mediation_weights(out.params, d, cache);
    out.trace = std::move(fp.trace);
    const Eigen::VectorXd v = L.pack(out.params);
    const ObservationProbTable ps = compute_pistar(out.params.gamma, d.Z);

    FitReport& r = out.report;
    r.method = "EM";
    r.names = out.params.names(d.n_covariates());
    r.estimates = v;
    auto score = [&](const Eigen::VectorXd& t) { return detail::mediation_score(L, t, d, cache); };
    r.se = se_from_hessian(fd_hessian_from_gradient(score, v));
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    r.loglik = detail::mediation_loglik(out.params, d, cache);
    r.label_correction_applied = applied;
    r.sensitivity = ps.sensitivity;
    r.specificity = ps.specificity;
    if (!fp.converged) r.warnings.push_back("EM reached max_iter without meeting the tolerance");
    return out;
}

inline MediationFit em_fit_mediation(const MediationData& d, OutcomeDist dist, bool interaction,
                                     const EmControl& ctl = {})
{
    return em_fit_mediation(d, default_mediation_start(d, dist, interaction), ctl);
}

/// Subject-level predictive values and duplicated-row weights.
struct PvwWeights
{
    Eigen::VectorXd ppv;
    Eigen::VectorXd npv;
    Eigen::VectorXd weight_m1;  // weight of the copy with M = 1
    Eigen::VectorXd weight_m0;  // weight of the copy with M = 0
    int clamped = 0;
};

/// PPV and NPV from sensitivity, specificity and P(M* = 1 | Y, X, C).
inline std::pair<double, double> predictive_values(double sens, double spec, double p_obs)
{
    const double a = (spec - 1.0) * (p_obs - 1.0) / (spec * p_obs);
    const double b = (sens - 1.0) * p_obs / (sens * (p_obs - 1.0));
    const double den = b * a - 1.0;
    return {(a - 1.0) / den, (b - 1.0) / den};
}

inline PvwWeights pvw_weights(const Eigen::VectorXd& sens, const Eigen::VectorXd& spec, const Eigen::VectorXd& p_obs,
                              const Categories& mstar)
{
    const Eigen::Index n = sens.size();
    require_dims(spec.size() == n && p_obs.size() == n && static_cast<Eigen::Index>(mstar.size()) == n,
                 "predictive-value inputs have different lengths");
    constexpr double eps = 1e-12;
    PvwWeights w;
    w.ppv.resize(n);
    w.npv.resize(n);
    w.weight_m1.resize(n);
    w.weight_m0.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = std::clamp(p_obs[i], eps, 1.0 - eps);
        auto [ppv, npv] = predictive_values(std::clamp(sens[i], eps, 1.0), std::clamp(spec[i], eps, 1.0), p);
        if (!(ppv >= 0.0 && ppv <= 1.0) || !(npv >= 0.0 && npv <= 1.0)) ++w.clamped;
        ppv = std::isfinite(ppv) ? std::clamp(ppv, 0.0, 1.0) : 1.0;
        npv = std::isfinite(npv) ? std::clamp(npv, 0.0, 1.0) : 1.0;
        w.ppv[i] = ppv;
        w.npv[i] = npv;
        const bool pos = mstar[static_cast<std::size_t>(i)] == 1;
        w.weight_m1[i] = pos ? ppv : 1.0 - npv;
        w.weight_m0[i] = pos ? 1.0 - ppv : npv;
    }
    return w;
}

/// Design for the M* model: Y, X, each C column and all their pairwise products.
inline DesignMatrix observed_mediator_design(const MediationData& d)
{
    std::vector<Eigen::VectorXd> base{d.y, d.x};
    for (Eigen::Index c = 0; c < d.C.cols(); ++c) base.emplace_back(d.C.col(c));
    const auto nb = static_cast<Eigen::Index>(base.size());
    Eigen::MatrixXd m(d.rows(), nb + nb * (nb - 1) / 2);
    Eigen::Index col = 0;
    for (const auto& b : base) m.col(col++) = b;
    for (std::size_t a = 0; a < base.size(); ++a)
        for (std::size_t b = a + 1; b < base.size(); ++b) m.col(col++) = base[a].cwiseProduct(base[b]);
    return DesignMatrix::with_intercept(m);
}

namespace detail
{

// Shared first step of PVW and OLS: single-outcome EM of M* on [X C] and Z.
inline SingleFit mediator_stage(const MediationData& d, const std::optional<SingleOutcomeParams>& start,
                                const EmControl& ctl)
{
    const DesignMatrix Xm = d.mediator_design();
    const SingleOutcomeParams s = start ? *start : default_single_start(d.mstar, Xm, d.Z);
    return em_fit(d.mstar, Xm, d.Z, s, ctl);
}

inline void append_report(FitReport& r, const std::vector<std::string>& names, const Eigen::VectorXd& est,
                          const Eigen::VectorXd& se)
{
    const Eigen::Index old = r.estimates.size();
    r.names.insert(r.names.end(), names.begin(), names.end());
    r.estimates.conservativeResize(old + est.size());
    r.estimates.tail(est.size()) = est;
    r.se.conservativeResize(old + se.size());
    r.se.tail(se.size()) = se;
}

inline FitReport mediator_stage_report(const std::string& method, const SingleFit& f)
{
    FitReport r;
    r.method = method;
    const Eigen::Index pb = f.params.beta.size();
    const Eigen::Index pz = f.params.gamma.rows();
    std::vector<std::string> names;
    for (Eigen::Index c = 0; c < pb; ++c) names.push_back("beta_" + std::to_string(c));
    for (int j = 1; j <= 2; ++j)
        for (Eigen::Index c = 0; c < pz; ++c) names.push_back("gamma" + std::to_string(c + 1) + std::to_string(j));
    append_report(r, names, f.report.estimates, f.report.se);
    r.converged = f.report.converged;
    r.iterations = f.report.iterations;
    r.label_correction_applied = f.report.label_correction_applied;
    r.sensitivity = f.report.sensitivity;
    r.specificity = f.report.specificity;
    r.warnings = f.report.warnings;
    return r;
}

} // namespace detail

struct PvwFit
{
    MediationParams params;
    FitReport report;
    PvwWeights weights;
};

/// Predictive value weighting: EM for the mediator mechanisms, then a
/// weighted outcome GLM on the duplicated dataset.
inline PvwFit pvw_fit(const MediationData& d, OutcomeDist dist, bool interaction,
                      const std::optional<SingleOutcomeParams>& start = std::nullopt, const EmControl& ctl = {})
{
    detail::check_outcome_domain(d.y, dist);
    const SingleFit stage = detail::mediator_stage(d, start, ctl);
    const ObservationProbTable ps = compute_pistar(stage.params.gamma, d.Z);

    const DesignMatrix Dobs = observed_mediator_design(d);
    const GlmFit mfit = fit_weighted_logistic(Dobs, event_indicator(d.mstar), Eigen::VectorXd::Ones(d.rows()));
    const Eigen::VectorXd p_obs = expit(Dobs.linear_predictor(mfit.coefficients));

    PvwFit out;
    out.weights = pvw_weights(ps.event.col(0), (1.0 - ps.event.col(1).array()).matrix(), p_obs, d.mstar);

    const detail::MediationCache cache(d, interaction);
    Eigen::VectorXd y2(2 * d.rows());
    y2 << d.y, d.y;
    Eigen::VectorXd w2(2 * d.rows());
    w2 << out.weights.weight_m1, out.weights.weight_m0;
    const GlmFit g = detail::fit_outcome_glm(dist, detail::stacked_design(cache), y2, w2, std::nullopt);

    out.params.dist = dist;
    out.params.interaction = interaction;
    out.params.beta = stage.params.beta;
    out.params.gamma = stage.params.gamma;
    out.params.theta = g.coefficients;
    out.params.sigma = dist == OutcomeDist::normal ? g.sigma : 1.0;

    FitReport& r = out.report;
    r = detail::mediator_stage_report("PVW", stage);
    const Eigen::Index pt = g.coefficients.size();
    detail::append_report(r, MediationParams::theta_names(d.n_covariates(), interaction), g.coefficients,
                          Eigen::VectorXd::Constant(pt, std::numeric_limits<double>::quiet_NaN()));
    if (dist == OutcomeDist::normal)
        detail::append_report(r, {"sigma"}, Eigen::VectorXd::Constant(1, g.sigma),
                              Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()));
    r.converged = r.converged && (dist == OutcomeDist::normal || g.converged);
    if (!mfit.converged) r.warnings.push_back("observed-mediator model did not converge");
    if (out.weights.clamped > 0)
        r.warnings.push_back(std::to_string(out.weights.clamped) + " predictive values clamped to [0,1]");
    return out;
}

/// Bias factors of the OLS correction from average misclassification
/// rates p12 = P(M* = 1 | M = 0), p21 = P(M* = 0 | M = 1) and p1 = P(M* = 1).
inline std::pair<double, double> ols_bias_factors(double p12, double p21, double p1)
{
    const double denom = 1.0 - p12 - p21;
    require(std::abs(denom) > 1e-12, "misclassification rates leave no information (sensitivity + specificity = 1)");
    const double zeta = 1.0 - (p1 - p12) * (1.0 - p21 - p1) / (denom * (1.0 - p1) * p1);
    const double xi = (p21 + p12) / denom;
    return {zeta, xi};
}

struct OlsCorrection
{
    Eigen::VectorXd theta;  // theta_0, theta_x, theta_m, theta_c...
    double zeta = 0.0;
    double xi = 0.0;
};

/// Corrected OLS coefficients given average sensitivity and specificity.
inline OlsCorrection ols_from_rates(const Eigen::VectorXd& y, const Eigen::VectorXd& mstar01, const Eigen::MatrixXd& D,
                                    double sensitivity, double specificity)
{
    const Eigen::Index n = y.size();
    require_dims(mstar01.size() == n && D.rows() == n, "OLS inputs have different lengths");
    require(n >= 2, "OLS correction needs at least two observations");
    const double p21 = 1.0 - sensitivity;
    const double p12 = 1.0 - specificity;
    const double p1 = mstar01.mean();
    require(p1 > 0.0 && p1 < 1.0, "observed mediator has a single category");

    OlsCorrection out;
    std::tie(out.zeta, out.xi) = ols_bias_factors(p12, p21, p1);

    const Eigen::Index q = D.cols();
    Eigen::MatrixXd A(n, 1 + q);
    A.col(0) = mstar01;
    A.rightCols(q) = D;
    const Eigen::RowVectorXd means = A.colwise().mean();
    const Eigen::MatrixXd Ac = A.rowwise() - means;
    const Eigen::VectorXd yc = (y.array() - y.mean()).matrix();
    Eigen::MatrixXd S = Ac.transpose() * Ac / static_cast<double>(n);
    const Eigen::VectorXd rhs = Ac.transpose() * yc / static_cast<double>(n);
    S(0, 0) *= (1.0 - out.zeta);
    S.bottomLeftCorner(q, 1) *= (1.0 + out.xi);

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    require(lu.isInvertible(), "OLS correction system is singular");
    const Eigen::VectorXd sol = lu.solve(rhs);
    const double theta_m = sol[0];
    const Eigen::VectorXd theta_d = sol.tail(q);
    const double theta_0 =
        y.mean() - theta_m * (means[0] - p12) / (1.0 - p12 - p21) - means.tail(q).dot(theta_d);

    out.theta.resize(3 + q - 1);
    out.theta[0] = theta_0;
    out.theta[1] = theta_d[0];
    out.theta[2] = theta_m;
    out.theta.tail(q - 1) = theta_d.tail(q - 1);
    return out;
}

struct OlsFit
{
    MediationParams params;
    FitReport report;
    double zeta = 0.0;
    double xi = 0.0;
};

/// OLS correction for a continuous outcome; no X-M interaction.
inline OlsFit ols_correct(const MediationData& d, bool interaction = false,
                          const std::optional<SingleOutcomeParams>& start = std::nullopt, const EmControl& ctl = {})
{
    if (interaction) throw Error("the OLS correction does not support an X-M interaction term");
    const SingleFit stage = detail::mediator_stage(d, start, ctl);
    Eigen::MatrixXd D(d.rows(), 1 + d.C.cols());
    D.col(0) = d.x;
    D.rightCols(d.C.cols()) = d.C;
    const OlsCorrection c =
        ols_from_rates(d.y, event_indicator(d.mstar), D, stage.report.sensitivity, stage.report.specificity);

    OlsFit out;
    out.zeta = c.zeta;
    out.xi = c.xi;
    out.params.dist = OutcomeDist::normal;
    out.params.interaction = false;
    out.params.beta = stage.params.beta;
    out.params.gamma = stage.params.gamma;
    out.params.theta = c.theta;

    FitReport& r = out.report;
    r = detail::mediator_stage_report("OLS", stage);
    detail::append_report(r, MediationParams::theta_names(d.n_covariates(), false), c.theta,
                          Eigen::VectorXd::Constant(c.theta.size(), std::numeric_limits<double>::quiet_NaN()));
    return out;
}

} // namespace miscorr

#endif
