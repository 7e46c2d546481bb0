#ifndef MISCORR_TWOSTAGE_HPP
#define MISCORR_TWOSTAGE_HPP

// Two sequential misclassified measurements of one latent binary outcome.
//
//   logit P(Y = 1 | X)                       = X beta
//   logit P(Y*1 = 1 | Y = j, Z1)             = Z1 gamma1.col(j)
//   logit P(Y*2 = 1 | Y*1 = k, Y = j, Z2)    = Z2 gamma2[k].col(j)

#include "single.hpp"

namespace miscorr
{

struct TwoStageParams
{
    Eigen::VectorXd beta;
    Eigen::MatrixXd gamma1;                 // (p_z1 + 1) x 2
    std::array<Eigen::MatrixXd, 2> gamma2;  // gamma2[k-1] is (p_z2 + 1) x 2, column j-1

    void validate(const DesignMatrix& X, const DesignMatrix& Z1, const DesignMatrix& Z2) const
    {
        require_dims(beta.size() == X.cols(), "beta length does not match X columns");
        require_dims(gamma1.rows() == Z1.cols() && gamma1.cols() == 2, "gamma1 must be (Z1 columns) x 2");
        for (const auto& g : gamma2)
            require_dims(g.rows() == Z2.cols() && g.cols() == 2, "gamma2 slices must be (Z2 columns) x 2");
        require(beta.allFinite() && gamma1.allFinite() && gamma2[0].allFinite() && gamma2[1].allFinite(),
                "parameters must be finite");
    }

    static TwoStageParams zeros(Eigen::Index px, Eigen::Index pz1, Eigen::Index pz2)
    {
        TwoStageParams p;
        p.beta = Eigen::VectorXd::Zero(px);
        p.gamma1 = Eigen::MatrixXd::Zero(pz1, 2);
        p.gamma2 = {Eigen::MatrixXd::Zero(pz2, 2), Eigen::MatrixXd::Zero(pz2, 2)};
        return p;
    }
};

/// P(Y*2_i = l | Y*1_i = k, Y_i = j).
struct SecondStageProbTable
{
    std::array<Eigen::MatrixXd, 2> event;  // event[k-1](i, j-1) = P(Y*2 = 1 | k, j)

    double at(Eigen::Index i, int l, int k, int j) const
    {
        const double p = event[static_cast<std::size_t>(k - 1)](i, j - 1);
        return l == 1 ? p : 1.0 - p;
    }
};

struct TwoStageProbBundle
{
    ClassProbTable pi;
    ObservationProbTable first;
    SecondStageProbTable second;
    double second_sensitivity = 0.0;
    double second_specificity = 0.0;
};

inline SecondStageProbTable compute_pitilde(const std::array<Eigen::MatrixXd, 2>& gamma2, const DesignMatrix& Z2)
{
    SecondStageProbTable t;
    for (std::size_t k = 0; k < 2; ++k) {
        require_dims(gamma2[k].rows() == Z2.cols() && gamma2[k].cols() == 2,
                     "gamma2 slices must be (Z2 columns) x 2");
        t.event[k].resize(Z2.rows(), 2);
        for (int j = 0; j < 2; ++j) t.event[k].col(j) = expit(Eigen::VectorXd(Z2.matrix() * gamma2[k].col(j)));
    }
    return t;
}

namespace detail
{

inline std::pair<double, double> marginal_second_stage(const ObservationProbTable& first,
                                                       const SecondStageProbTable& second)
{
    const Eigen::Index n = first.event.rows();
    double sens = 0.0;
    double spec = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 1; k <= 2; ++k) {
            sens += second.at(i, 1, k, 1) * first.at(i, k, 1);
            spec += second.at(i, 2, k, 2) * first.at(i, k, 2);
        }
    return {sens / static_cast<double>(n), spec / static_cast<double>(n)};
}

} // namespace detail

inline TwoStageProbBundle compute_twostage_probs(const TwoStageParams& p, const DesignMatrix& X,
                                                 const DesignMatrix& Z1, const DesignMatrix& Z2)
{
    require_dims(X.rows() == Z1.rows() && X.rows() == Z2.rows(), "X, Z1 and Z2 row counts differ");
    p.validate(X, Z1, Z2);
    TwoStageProbBundle b;
    b.pi = compute_pi(p.beta, X);
    b.first = compute_pistar(p.gamma1, Z1);
    b.second = compute_pitilde(p.gamma2, Z2);
    std::tie(b.second_sensitivity, b.second_specificity) = detail::marginal_second_stage(b.first, b.second);
    return b;
}

/// Per-subject P(Y*1 = k, Y*2 = l); column 2(k-1) + (l-1).
inline Eigen::MatrixXd joint_obs_prob(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                      const DesignMatrix& Z2)
{
    const TwoStageProbBundle b = compute_twostage_probs(p, X, Z1, Z2);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), 4);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (int k = 1; k <= 2; ++k)
            for (int l = 1; l <= 2; ++l)
                for (int j = 1; j <= 2; ++j)
                    out(i, 2 * (k - 1) + (l - 1)) += b.second.at(i, l, k, j) * b.first.at(i, k, j) * b.pi.pi(i, j - 1);
    return out;
}

/// Marginal second-stage (sensitivity, specificity).
inline std::pair<double, double> second_stage_accuracy(const TwoStageParams& p, const DesignMatrix& X,
                                                       const DesignMatrix& Z1, const DesignMatrix& Z2)
{
    const TwoStageProbBundle b = compute_twostage_probs(p, X, Z1, Z2);
    return {b.second_sensitivity, b.second_specificity};
}

namespace detail
{

inline void check_twostage_inputs(const Categories& y1, const Categories& y2, const DesignMatrix& X,
                                  const DesignMatrix& Z1, const DesignMatrix& Z2)
{
    check_categories(y1, "ystar1");
    check_categories(y2, "ystar2");
    require_dims(y1.size() == y2.size(), "ystar1 and ystar2 lengths differ");
    require_dims(static_cast<Eigen::Index>(y1.size()) == X.rows(), "ystar length does not match X rows");
    require_dims(X.rows() == Z1.rows() && X.rows() == Z2.rows(), "X, Z1 and Z2 row counts differ");
}

// Unnormalized posterior terms a(i, j-1) = P(Y = j) P(Y*1 | j) P(Y*2 | Y*1, j).
inline Eigen::MatrixXd twostage_terms(const TwoStageProbBundle& b, const Categories& y1, const Categories& y2)
{
    Eigen::MatrixXd a(static_cast<Eigen::Index>(y1.size()), 2);
    for (std::size_t s = 0; s < y1.size(); ++s) {
        const auto i = static_cast<Eigen::Index>(s);
        for (int j = 1; j <= 2; ++j)
            a(i, j - 1) = b.pi.pi(i, j - 1) * b.first.at(i, y1[s], j) * b.second.at(i, y2[s], y1[s], j);
    }
    return a;
}

inline double twostage_loglik(const TwoStageProbBundle& b, const Categories& y1, const Categories& y2)
{
    return twostage_terms(b, y1, y2).rowwise().sum().array().log().sum();
}

inline Eigen::MatrixXd twostage_weights(const TwoStageProbBundle& b, const Categories& y1, const Categories& y2)
{
    Eigen::MatrixXd a = twostage_terms(b, y1, y2);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double den = a.row(i).sum();
        if (!(den > 0.0) || !std::isfinite(den))
            throw Error("E-step denominator underflow at subject " + std::to_string(i + 1));
        a.row(i) /= den;
    }
    return a;
}

inline TwoStageProbBundle bundle_unchecked(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                           const DesignMatrix& Z2)
{
    TwoStageProbBundle b;
    b.pi = compute_pi(p.beta, X);
    b.first = compute_pistar(p.gamma1, Z1);
    b.second = compute_pitilde(p.gamma2, Z2);
    return b;
}

} // namespace detail

inline double observed_loglik_2stage(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                     const DesignMatrix& Z2, const Categories& ystar1, const Categories& ystar2)
{
    detail::check_twostage_inputs(ystar1, ystar2, X, Z1, Z2);
    return detail::twostage_loglik(compute_twostage_probs(p, X, Z1, Z2), ystar1, ystar2);
}

inline Eigen::MatrixXd e_step_weights_2stage(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                             const DesignMatrix& Z2, const Categories& ystar1,
                                             const Categories& ystar2)
{
    detail::check_twostage_inputs(ystar1, ystar2, X, Z1, Z2);
    return detail::twostage_weights(compute_twostage_probs(p, X, Z1, Z2), ystar1, ystar2);
}

/// beta -> -beta; gamma1 columns and each gamma2 slice swapped over j.
inline TwoStageParams permute_labels(const TwoStageParams& p)
{
    TwoStageParams q;
    q.beta = -p.beta;
    q.gamma1 = p.gamma1.rowwise().reverse();
    for (std::size_t k = 0; k < 2; ++k) q.gamma2[k] = p.gamma2[k].rowwise().reverse();
    return q;
}

/// Keeps the labeling with the larger average first-stage Youden's J.
inline std::pair<TwoStageParams, bool> label_switch_correct_2stage(const TwoStageParams& p, const DesignMatrix& Z1,
                                                                   const DesignMatrix& /*Z2*/)
{
    const TwoStageParams q = permute_labels(p);
    if (compute_pistar(q.gamma1, Z1).youden() > compute_pistar(p.gamma1, Z1).youden()) return {q, true};
    return {p, false};
}

namespace detail
{

// Parameter vector: beta, gamma1 columns, then gamma2 with coefficient
// fastest, then first-stage category k, then latent class j.
struct TwoStageLayout
{
    Eigen::Index px = 0;
    Eigen::Index pz1 = 0;
    Eigen::Index pz2 = 0;

    Eigen::Index size() const { return px + 2 * pz1 + 4 * pz2; }

    Eigen::Index gamma2_offset(int k, int j) const { return px + 2 * pz1 + ((j - 1) * 2 + (k - 1)) * pz2; }

    Eigen::VectorXd pack(const TwoStageParams& p) const
    {
        Eigen::VectorXd v(size());
        v.head(px) = p.beta;
        v.segment(px, pz1) = p.gamma1.col(0);
        v.segment(px + pz1, pz1) = p.gamma1.col(1);
        for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k)
                v.segment(gamma2_offset(k, j), pz2) = p.gamma2[static_cast<std::size_t>(k - 1)].col(j - 1);
        return v;
    }

    TwoStageParams unpack(const Eigen::VectorXd& v) const
    {
        TwoStageParams p = TwoStageParams::zeros(px, pz1, pz2);
        p.beta = v.head(px);
        p.gamma1.col(0) = v.segment(px, pz1);
        p.gamma1.col(1) = v.segment(px + pz1, pz1);
        for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k)
                p.gamma2[static_cast<std::size_t>(k - 1)].col(j - 1) = v.segment(gamma2_offset(k, j), pz2);
        return p;
    }

    std::vector<std::string> names() const
    {
        std::vector<std::string> n;
        for (Eigen::Index c = 0; c < px; ++c) n.push_back("beta" + std::to_string(c + 1));
        for (int j = 1; j <= 2; ++j)
            for (Eigen::Index c = 0; c < pz1; ++c)
                n.push_back("gamma1_" + std::to_string(c + 1) + std::to_string(j));
        for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k)
                for (Eigen::Index c = 0; c < pz2; ++c)
                    n.push_back("gamma2_" + std::to_string(c + 1) + "1" + std::to_string(k) + std::to_string(j));
        return n;
    }
};

struct TwoStageData
{
    const Categories& y1;
    const Categories& y2;
    const DesignMatrix& X;
    const DesignMatrix& Z1;
    const DesignMatrix& Z2;
};

inline Eigen::VectorXd twostage_score(const TwoStageLayout& L, const Eigen::VectorXd& theta, const TwoStageData& d)
{
    const TwoStageParams p = L.unpack(theta);
    const TwoStageProbBundle b = bundle_unchecked(p, d.X, d.Z1, d.Z2);
    const Eigen::MatrixXd w = twostage_weights(b, d.y1, d.y2);
    const Eigen::VectorXd e1 = event_indicator(d.y1);
    const Eigen::VectorXd e2 = event_indicator(d.y2);
    Eigen::VectorXd g(L.size());
    g.head(L.px) = d.X.matrix().transpose() * (w.col(0) - b.pi.pi.col(0));
    for (int j = 0; j < 2; ++j)
        g.segment(L.px + j * L.pz1, L.pz1) =
            d.Z1.matrix().transpose() * w.col(j).cwiseProduct(e1 - b.first.event.col(j));
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k) {
            Eigen::VectorXd r(d.X.rows());
            for (Eigen::Index i = 0; i < r.size(); ++i)
                r[i] = d.y1[static_cast<std::size_t>(i)] == k
                           ? w(i, j - 1) * (e2[i] - b.second.event[static_cast<std::size_t>(k - 1)](i, j - 1))
                           : 0.0;
            g.segment(L.gamma2_offset(k, j), L.pz2) = d.Z2.matrix().transpose() * r;
        }
    return g;
}

} // namespace detail

/// Gradient of observed_loglik_2stage in the packed parameter order
/// (beta, gamma1 by column, gamma2 by (k, j) with k fastest).
inline Eigen::VectorXd observed_score_2stage(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                             const DesignMatrix& Z2, const Categories& ystar1,
                                             const Categories& ystar2)
{
    detail::check_twostage_inputs(ystar1, ystar2, X, Z1, Z2);
    p.validate(X, Z1, Z2);
    const detail::TwoStageLayout L{X.cols(), Z1.cols(), Z2.cols()};
    return detail::twostage_score(L, L.pack(p), {ystar1, ystar2, X, Z1, Z2});
}

struct TwoStageFit
{
    TwoStageParams params;
    FitReport report;
    FitReport naive;
    Eigen::MatrixXd weights;
    double second_sensitivity = 0.0;
    double second_specificity = 0.0;
    std::vector<double> trace;
};

/// Naive comparison: Y*1 on X, and Y*2 on Z2 within each Y*1 stratum.
inline FitReport naive_fit_2stage(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                                  const DesignMatrix& Z2)
{
    const GlmFit gb = naive_logistic(ystar1, X);
    FitReport r;
    r.method = "naive";
    r.converged = gb.converged;
    r.iterations = gb.iterations;
    std::vector<double> est(gb.coefficients.data(), gb.coefficients.data() + gb.coefficients.size());
    const Eigen::VectorXd gse = gb.se();
    std::vector<double> se(gse.data(), gse.data() + gse.size());
    for (Eigen::Index c = 0; c < gb.coefficients.size(); ++c) r.names.push_back("naive_beta" + std::to_string(c + 1));
    const Eigen::VectorXd e2 = event_indicator(ystar2);
    for (int k = 1; k <= 2; ++k) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < ystar1.size(); ++i)
            if (ystar1[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
        require(static_cast<Eigen::Index>(rows.size()) >= Z2.cols(),
                "too few subjects with ystar1 = " + std::to_string(k) + " for the naive second-stage fit");
        Eigen::VectorXd ysub(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t s = 0; s < rows.size(); ++s) ysub[static_cast<Eigen::Index>(s)] = e2[rows[s]];
        const GlmFit g = fit_weighted_logistic(Z2.select_rows(rows), ysub, Eigen::VectorXd::Ones(ysub.size()));
        r.converged = r.converged && g.converged;
        const Eigen::VectorXd s = g.se();
        for (Eigen::Index c = 0; c < g.coefficients.size(); ++c) {
            r.names.push_back("naive_gamma2_" + std::to_string(c + 1) + std::to_string(k));
            est.push_back(g.coefficients[c]);
            se.push_back(s[c]);
        }
    }
    r.estimates = Eigen::Map<Eigen::VectorXd>(est.data(), static_cast<Eigen::Index>(est.size()));
    r.se = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
    return r;
}

inline TwoStageParams default_twostage_start(const Categories& ystar1, const DesignMatrix& X, const DesignMatrix& Z1,
                                             const DesignMatrix& Z2)
{
    TwoStageParams p = TwoStageParams::zeros(X.cols(), Z1.cols(), Z2.cols());
    p.beta = naive_logistic(ystar1, X).coefficients;
    return p;
}

inline TwoStageFit em_fit_2stage(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                                 const DesignMatrix& Z1, const DesignMatrix& Z2, const TwoStageParams& start,
                                 const EmControl& ctl = {})
{
    detail::check_twostage_inputs(ystar1, ystar2, X, Z1, Z2);
    start.validate(X, Z1, Z2);
    const detail::TwoStageLayout L{X.cols(), Z1.cols(), Z2.cols()};
    const detail::TwoStageData data{ystar1, ystar2, X, Z1, Z2};
    const Eigen::VectorXd e1 = event_indicator(ystar1);
    const Eigen::VectorXd e2 = event_indicator(ystar2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());

    std::array<std::vector<Eigen::Index>, 2> strata;
    for (std::size_t i = 0; i < ystar1.size(); ++i)
        strata[static_cast<std::size_t>(ystar1[i] - 1)].push_back(static_cast<Eigen::Index>(i));
    std::array<std::optional<DesignMatrix>, 2> z2_strata;
    std::array<Eigen::VectorXd, 2> e2_strata;
    for (std::size_t k = 0; k < 2; ++k) {
        if (static_cast<Eigen::Index>(strata[k].size()) < Z2.cols()) continue;
        z2_strata[k] = Z2.select_rows(strata[k]);
        e2_strata[k].resize(static_cast<Eigen::Index>(strata[k].size()));
        for (std::size_t s = 0; s < strata[k].size(); ++s) e2_strata[k][static_cast<Eigen::Index>(s)] = e2[strata[k][s]];
    }

    auto update = [&](const Eigen::VectorXd& theta) {
        TwoStageParams p = L.unpack(theta);
        const Eigen::MatrixXd w = detail::twostage_weights(detail::bundle_unchecked(p, X, Z1, Z2), ystar1, ystar2);
        p.beta = fit_weighted_logistic(X, w.col(0), ones, Eigen::VectorXd(p.beta)).coefficients;
        for (int j = 0; j < 2; ++j) {
            if (w.col(j).sum() > 0.0)
                p.gamma1.col(j) =
                    fit_weighted_logistic(Z1, e1, w.col(j), Eigen::VectorXd(p.gamma1.col(j))).coefficients;
            for (std::size_t k = 0; k < 2; ++k) {
                if (!z2_strata[k]) continue;
                Eigen::VectorXd wk(static_cast<Eigen::Index>(strata[k].size()));
                for (std::size_t s = 0; s < strata[k].size(); ++s) wk[static_cast<Eigen::Index>(s)] = w(strata[k][s], j);
                if (!(wk.sum() > 0.0)) continue;
                p.gamma2[k].col(j) =
                    fit_weighted_logistic(*z2_strata[k], e2_strata[k], wk, Eigen::VectorXd(p.gamma2[k].col(j)))
                        .coefficients;
            }
        }
        return L.pack(p);
    };
    auto objective = [&](const Eigen::VectorXd& theta) {
        return detail::twostage_loglik(detail::bundle_unchecked(L.unpack(theta), X, Z1, Z2), ystar1, ystar2);
    };

    FixedPointResult fp = iterate_em(update, objective, L.pack(start), ctl);

    TwoStageFit out;
    auto [corrected, applied] = label_switch_correct_2stage(L.unpack(fp.params), Z1, Z2);
    out.params = corrected;
    const Eigen::VectorXd theta = L.pack(out.params);
    const TwoStageProbBundle b = compute_twostage_probs(out.params, X, Z1, Z2);
    out.weights = detail::twostage_weights(b, ystar1, ystar2);
    out.second_sensitivity = b.second_sensitivity;
    out.second_specificity = b.second_specificity;
    out.trace = std::move(fp.trace);

    FitReport& r = out.report;
    r.method = "EM-2stage";
    r.names = L.names();
    r.estimates = theta;
    auto score = [&](const Eigen::VectorXd& t) { return detail::twostage_score(L, t, data); };
    r.se = se_from_hessian(fd_hessian_from_gradient(score, theta));
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    r.loglik = detail::twostage_loglik(b, ystar1, ystar2);
    r.label_correction_applied = applied;
    r.sensitivity = b.first.sensitivity;
    r.specificity = b.first.specificity;
    if (!fp.converged) r.warnings.push_back("EM reached max_iter without meeting the tolerance");
    for (std::size_t k = 0; k < 2; ++k)
        if (!z2_strata[k])
            r.warnings.push_back("too few subjects with ystar1 = " + std::to_string(k + 1) +
                                 "; gamma2 slice held at its start");

    out.naive = naive_fit_2stage(ystar1, ystar2, X, Z2);
    return out;
}

inline TwoStageFit em_fit_2stage(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                                 const DesignMatrix& Z1, const DesignMatrix& Z2, const EmControl& ctl = {})
{
    return em_fit_2stage(ystar1, ystar2, X, Z1, Z2, default_twostage_start(ystar1, X, Z1, Z2), ctl);
}

/// Posterior class probabilities used as adjusted labels in ROC analysis.
inline Eigen::MatrixXd predictive_prob_2stage(const TwoStageParams& p, const DesignMatrix& X, const DesignMatrix& Z1,
                                              const DesignMatrix& Z2, const Categories& ystar1,
                                              const Categories& ystar2)
{
    return e_step_weights_2stage(p, X, Z1, Z2, ystar1, ystar2);
}

} // namespace miscorr

#endif
