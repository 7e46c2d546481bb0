#ifndef MISCORR_SINGLE_HPP
#define MISCORR_SINGLE_HPP

// Logistic regression with a single misclassified binary outcome.
//
//   true outcome:   logit P(Y = 1 | X)          = X beta
//   observation:    logit P(Y* = 1 | Y = j, Z)  = Z gamma.col(j)
//
// Latent and observed categories use the {1,2} convention with 1 the event.
// gamma is stored as a (p_z + 1) x 2 matrix; column j-1 holds the
// coefficients for true class j.

#include "glm.hpp"
#include "numdiff.hpp"
#include "squarem.hpp"

#include <array>
#include <map>
#include <utility>

namespace miscorr
{

struct SingleOutcomeParams
{
    Eigen::VectorXd beta;
    Eigen::MatrixXd gamma;

    void validate(const DesignMatrix& X, const DesignMatrix& Z) const
    {
        require_dims(beta.size() == X.cols(), "beta has " + std::to_string(beta.size()) + " entries, X has " +
                                                  std::to_string(X.cols()) + " columns");
        require_dims(gamma.cols() == 2, "gamma must have exactly 2 columns");
        require_dims(gamma.rows() == Z.cols(), "gamma has " + std::to_string(gamma.rows()) + " rows, Z has " +
                                                   std::to_string(Z.cols()) + " columns");
        require(beta.allFinite() && gamma.allFinite(), "parameters must be finite");
    }
};

/// pi(i, j-1) = P(Y_i = j | X_i).
struct ClassProbTable
{
    Eigen::MatrixXd pi;
};

/// P(Y*_i = k | Y_i = j, Z_i) for the two observed categories.
struct ObservationProbTable
{
    Eigen::MatrixXd event;  // event(i, j-1) = P(Y*_i = 1 | Y_i = j)
    double sensitivity = 0.0;  // mean over subjects of P(Y* = 1 | Y = 1)
    double specificity = 0.0;  // mean over subjects of P(Y* = 2 | Y = 2)

    double at(Eigen::Index i, int k, int j) const
    {
        const double p = event(i, j - 1);
        return k == 1 ? p : 1.0 - p;
    }

    double youden() const { return sensitivity + specificity - 1.0; }
};

/// Which observation mechanism, if any, is pinned to perfect accuracy.
enum class ObservationConstraint { none, perfect_specificity, perfect_sensitivity };

inline ClassProbTable compute_pi(const Eigen::VectorXd& beta, const DesignMatrix& X)
{
    const Eigen::VectorXd p1 = expit(X.linear_predictor(beta));
    ClassProbTable t;
    t.pi.resize(X.rows(), 2);
    t.pi.col(0) = p1;
    t.pi.col(1) = (1.0 - p1.array()).matrix();
    return t;
}

inline ObservationProbTable compute_pistar(const Eigen::MatrixXd& gamma, const DesignMatrix& Z)
{
    require_dims(gamma.cols() == 2, "gamma must have exactly 2 columns");
    require_dims(gamma.rows() == Z.cols(), "gamma rows do not match Z columns");
    ObservationProbTable t;
    t.event.resize(Z.rows(), 2);
    for (int j = 0; j < 2; ++j) t.event.col(j) = expit(Eigen::VectorXd(Z.matrix() * gamma.col(j)));
    t.sensitivity = t.event.col(0).mean();
    t.specificity = 1.0 - t.event.col(1).mean();
    return t;
}

namespace detail
{

inline ObservationProbTable constrained_pistar(const Eigen::MatrixXd& gamma, const DesignMatrix& Z,
                                               ObservationConstraint c)
{
    ObservationProbTable t = compute_pistar(gamma, Z);
    if (c == ObservationConstraint::perfect_specificity) {
        t.event.col(1).setZero();
        t.specificity = 1.0;
    } else if (c == ObservationConstraint::perfect_sensitivity) {
        t.event.col(0).setOnes();
        t.sensitivity = 1.0;
    }
    return t;
}

inline void check_single_inputs(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z)
{
    check_categories(ystar, "ystar");
    require_dims(static_cast<Eigen::Index>(ystar.size()) == X.rows(), "ystar length does not match X rows");
    require_dims(X.rows() == Z.rows(), "X and Z row counts differ");
}

inline double single_loglik(const ClassProbTable& pi, const ObservationProbTable& ps, const Categories& ystar)
{
    double ll = 0.0;
    for (std::size_t i = 0; i < ystar.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const int k = ystar[i];
        ll += std::log(ps.at(ii, k, 1) * pi.pi(ii, 0) + ps.at(ii, k, 2) * pi.pi(ii, 1));
    }
    return ll;
}

inline Eigen::MatrixXd single_weights(const ClassProbTable& pi, const ObservationProbTable& ps,
                                      const Categories& ystar)
{
    Eigen::MatrixXd w(static_cast<Eigen::Index>(ystar.size()), 2);
    for (std::size_t i = 0; i < ystar.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const int k = ystar[i];
        const double a = ps.at(ii, k, 1) * pi.pi(ii, 0);
        const double b = ps.at(ii, k, 2) * pi.pi(ii, 1);
        const double den = a + b;
        if (!(den > 0.0) || !std::isfinite(den))
            throw Error("E-step denominator underflow at subject " + std::to_string(i + 1));
        w(ii, 0) = a / den;
        w(ii, 1) = b / den;
    }
    return w;
}

} // namespace detail

/// Observed-data log-likelihood sum_i log sum_j P(Y*_i | Y_i = j) P(Y_i = j).
inline double observed_loglik(const SingleOutcomeParams& params, const DesignMatrix& X, const DesignMatrix& Z,
                              const Categories& ystar)
{
    detail::check_single_inputs(ystar, X, Z);
    params.validate(X, Z);
    return detail::single_loglik(compute_pi(params.beta, X), compute_pistar(params.gamma, Z), ystar);
}

/// Posterior class probabilities w(i, j-1) = P(Y_i = j | Y*_i, X_i, Z_i).
inline Eigen::MatrixXd e_step_weights(const SingleOutcomeParams& params, const DesignMatrix& X,
                                      const DesignMatrix& Z, const Categories& ystar)
{
    detail::check_single_inputs(ystar, X, Z);
    params.validate(X, Z);
    return detail::single_weights(compute_pi(params.beta, X), compute_pistar(params.gamma, Z), ystar);
}

/// Relabels the latent classes: beta -> -beta, gamma columns swapped.
inline SingleOutcomeParams permute_labels(const SingleOutcomeParams& p)
{
    SingleOutcomeParams q;
    q.beta = -p.beta;
    q.gamma.resize(p.gamma.rows(), 2);
    q.gamma.col(0) = p.gamma.col(1);
    q.gamma.col(1) = p.gamma.col(0);
    return q;
}

/// Keeps whichever labeling has the larger average Youden's J.
inline std::pair<SingleOutcomeParams, bool> label_switch_correct(const SingleOutcomeParams& params,
                                                                 const DesignMatrix& Z)
{
    const double j_identity = compute_pistar(params.gamma, Z).youden();
    const SingleOutcomeParams flipped = permute_labels(params);
    const double j_flipped = compute_pistar(flipped.gamma, Z).youden();
    if (j_flipped > j_identity) return {flipped, true};
    return {params, false};
}

struct SingleFit
{
    SingleOutcomeParams params;
    FitReport report;
    Eigen::MatrixXd weights;      // E-step weights at the reported estimate
    std::vector<double> trace;    // observed log-likelihood per iteration (EmControl::trace)
};

namespace detail
{

struct SingleLayout
{
    Eigen::Index px = 0;
    Eigen::Index pz = 0;
    ObservationConstraint constraint = ObservationConstraint::none;

    bool col_free(int j) const
    {
        if (constraint == ObservationConstraint::perfect_specificity) return j == 0;
        if (constraint == ObservationConstraint::perfect_sensitivity) return j == 1;
        return true;
    }

    Eigen::Index size() const { return px + pz * ((col_free(0) ? 1 : 0) + (col_free(1) ? 1 : 0)); }

    Eigen::VectorXd pack(const SingleOutcomeParams& p) const
    {
        Eigen::VectorXd v(size());
        v.head(px) = p.beta;
        Eigen::Index o = px;
        for (int j = 0; j < 2; ++j)
            if (col_free(j)) {
                v.segment(o, pz) = p.gamma.col(j);
                o += pz;
            }
        return v;
    }

    SingleOutcomeParams unpack(const Eigen::VectorXd& v) const
    {
        SingleOutcomeParams p;
        p.beta = v.head(px);
        p.gamma = Eigen::MatrixXd::Zero(pz, 2);
        Eigen::Index o = px;
        for (int j = 0; j < 2; ++j)
            if (col_free(j)) {
                p.gamma.col(j) = v.segment(o, pz);
                o += pz;
            }
        return p;
    }

    std::vector<std::string> names(const std::string& prefix) const
    {
        std::vector<std::string> n;
        for (Eigen::Index c = 0; c < px; ++c) n.push_back(prefix + "beta" + std::to_string(c + 1));
        for (int j = 0; j < 2; ++j)
            if (col_free(j))
                for (Eigen::Index c = 0; c < pz; ++c)
                    n.push_back(prefix + "gamma" + std::to_string(c + 1) + std::to_string(j + 1));
        return n;
    }
};

inline double single_loglik_constrained(const SingleOutcomeParams& p, const DesignMatrix& X, const DesignMatrix& Z,
                                        const Categories& ystar, ObservationConstraint c)
{
    return single_loglik(compute_pi(p.beta, X), constrained_pistar(p.gamma, Z, c), ystar);
}

// Gradient of the observed log-likelihood via Fisher's identity.
inline Eigen::VectorXd single_score(const SingleLayout& L, const Eigen::VectorXd& theta, const DesignMatrix& X,
                                    const DesignMatrix& Z, const Categories& ystar)
{
    const SingleOutcomeParams p = L.unpack(theta);
    const ClassProbTable pi = compute_pi(p.beta, X);
    const ObservationProbTable ps = constrained_pistar(p.gamma, Z, L.constraint);
    const Eigen::MatrixXd w = single_weights(pi, ps, ystar);
    const Eigen::VectorXd y1 = event_indicator(ystar);
    Eigen::VectorXd g(L.size());
    g.head(L.px) = X.matrix().transpose() * (w.col(0) - pi.pi.col(0));
    Eigen::Index o = L.px;
    for (int j = 0; j < 2; ++j)
        if (L.col_free(j)) {
            const Eigen::VectorXd r = w.col(j).cwiseProduct(y1 - ps.event.col(j));
            g.segment(o, L.pz) = Z.matrix().transpose() * r;
            o += L.pz;
        }
    return g;
}

} // namespace detail

/// Gradient of observed_loglik with respect to (beta, gamma.col(0), gamma.col(1)).
inline Eigen::VectorXd observed_score(const SingleOutcomeParams& params, const DesignMatrix& X,
                                      const DesignMatrix& Z, const Categories& ystar)
{
    detail::check_single_inputs(ystar, X, Z);
    params.validate(X, Z);
    const detail::SingleLayout L{X.cols(), Z.cols(), ObservationConstraint::none};
    return detail::single_score(L, L.pack(params), X, Z, ystar);
}

/// Naive logistic regression of 1[Y* = 1] on X.
inline GlmFit naive_logistic(const Categories& ystar, const DesignMatrix& X)
{
    check_categories(ystar, "ystar");
    require_dims(static_cast<Eigen::Index>(ystar.size()) == X.rows(), "ystar length does not match X rows");
    return fit_weighted_logistic(X, event_indicator(ystar), Eigen::VectorXd::Ones(X.rows()));
}

inline SingleOutcomeParams default_single_start(const Categories& ystar, const DesignMatrix& X,
                                                const DesignMatrix& Z)
{
    SingleOutcomeParams p;
    p.beta = naive_logistic(ystar, X).coefficients;
    p.gamma = Eigen::MatrixXd::Zero(Z.cols(), 2);
    return p;
}

namespace detail
{

inline SingleFit single_em(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                           const SingleOutcomeParams& start, const EmControl& ctl, ObservationConstraint constraint)
{
    check_single_inputs(ystar, X, Z);
    start.validate(X, Z);
    const SingleLayout L{X.cols(), Z.cols(), constraint};
    const Eigen::VectorXd y1 = event_indicator(ystar);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());

    auto update = [&](const Eigen::VectorXd& theta) {
        SingleOutcomeParams p = L.unpack(theta);
        const Eigen::MatrixXd w = single_weights(compute_pi(p.beta, X), constrained_pistar(p.gamma, Z, constraint), ystar);
        p.beta = fit_weighted_logistic(X, w.col(0), ones, Eigen::VectorXd(p.beta)).coefficients;
        for (int j = 0; j < 2; ++j) {
            if (!L.col_free(j) || !(w.col(j).sum() > 0.0)) continue;
            p.gamma.col(j) =
                fit_weighted_logistic(Z, y1, w.col(j), Eigen::VectorXd(p.gamma.col(j))).coefficients;
        }
        return L.pack(p);
    };
    auto objective = [&](const Eigen::VectorXd& theta) {
        return single_loglik_constrained(L.unpack(theta), X, Z, ystar, constraint);
    };

    FixedPointResult fp = iterate_em(update, objective, L.pack(start), ctl);

    SingleFit out;
    out.params = L.unpack(fp.params);
    if (constraint == ObservationConstraint::none) {
        auto [corrected, applied] = label_switch_correct(out.params, Z);
        out.params = corrected;
        out.report.label_correction_applied = applied;
    }
    const Eigen::VectorXd theta = L.pack(out.params);
    const ObservationProbTable ps = constrained_pistar(out.params.gamma, Z, constraint);
    out.weights = single_weights(compute_pi(out.params.beta, X), ps, ystar);
    out.trace = std::move(fp.trace);

    FitReport& r = out.report;
    r.method = constraint == ObservationConstraint::none                  ? "EM"
               : constraint == ObservationConstraint::perfect_specificity ? "SAMBA"
                                                                          : "PSens";
    r.names = L.names(constraint == ObservationConstraint::none ? "" : r.method + "_");
    r.estimates = theta;
    auto score = [&](const Eigen::VectorXd& t) { return single_score(L, t, X, Z, ystar); };
    r.se = se_from_hessian(fd_hessian_from_gradient(score, theta));
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    r.loglik = single_loglik_constrained(out.params, X, Z, ystar, constraint);
    r.sensitivity = ps.sensitivity;
    r.specificity = ps.specificity;
    if (!fp.converged) r.warnings.push_back("EM reached max_iter without meeting the tolerance");
    return out;
}

} // namespace detail

/// EM estimation of (beta, gamma), followed by the label-switching correction.
inline SingleFit em_fit(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                        const SingleOutcomeParams& start, const EmControl& ctl = {})
{
    return detail::single_em(ystar, X, Z, start, ctl, ObservationConstraint::none);
}

inline SingleFit em_fit(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                        const EmControl& ctl = {})
{
    return em_fit(ystar, X, Z, default_single_start(ystar, X, Z), ctl);
}

/// EM with one observation mechanism fixed at perfect accuracy. Only the
/// free gamma column is estimated and reported.
inline SingleFit constrained_em_fit(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                                    ObservationConstraint constraint, const SingleOutcomeParams& start,
                                    const EmControl& ctl = {})
{
    return detail::single_em(ystar, X, Z, start, ctl, constraint);
}

inline FitReport naive_report(const GlmFit& g, const std::string& prefix, const std::string& stem)
{
    FitReport r;
    r.method = "naive";
    for (Eigen::Index c = 0; c < g.coefficients.size(); ++c) r.names.push_back(prefix + stem + std::to_string(c + 1));
    r.estimates = g.coefficients;
    r.se = g.se();
    r.converged = g.converged;
    r.iterations = g.iterations;
    r.sensitivity = 1.0;
    r.specificity = 1.0;
    return r;
}

struct ComparisonFits
{
    FitReport naive;
    FitReport perfect_specificity;
    FitReport perfect_sensitivity;
};

/// Naive logistic fit plus the two perfect-accuracy EM variants.
inline ComparisonFits comparison_fits(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                                      const EmControl& ctl = {})
{
    const GlmFit naive = naive_logistic(ystar, X);
    SingleOutcomeParams start;
    start.beta = naive.coefficients;
    start.gamma = Eigen::MatrixXd::Zero(Z.cols(), 2);
    ComparisonFits out;
    out.naive = naive_report(naive, "naive_", "beta");
    out.perfect_specificity =
        constrained_em_fit(ystar, X, Z, ObservationConstraint::perfect_specificity, start, ctl).report;
    out.perfect_sensitivity =
        constrained_em_fit(ystar, X, Z, ObservationConstraint::perfect_sensitivity, start, ctl).report;
    return out;
}

inline ComparisonFits comparison_fits(const Eigen::VectorXd& ystar_codes, const DesignMatrix& X,
                                      const DesignMatrix& Z, const EmControl& ctl = {})
{
    return comparison_fits(categories_from_12(ystar_codes), X, Z, ctl);
}

/// One row of a long-format probability table. `observed` is 0 for
/// true_classification_prob rows.
struct ProbabilityRow
{
    int subject = 0;
    int latent = 0;
    int observed = 0;
    double probability = 0.0;
};

/// P(Y*_i = k | Y_i = j) for every subject, j and k.
inline std::vector<ProbabilityRow> misclassification_prob(const Eigen::MatrixXd& gamma, const DesignMatrix& Z)
{
    const ObservationProbTable ps = compute_pistar(gamma, Z);
    std::vector<ProbabilityRow> rows;
    rows.reserve(static_cast<std::size_t>(Z.rows()) * 4);
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
        for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k)
                rows.push_back({static_cast<int>(i + 1), j, k, ps.at(i, k, j)});
    return rows;
}

/// P(Y_i = j | X_i) for every subject and j.
inline std::vector<ProbabilityRow> true_classification_prob(const Eigen::VectorXd& beta, const DesignMatrix& X)
{
    const ClassProbTable pi = compute_pi(beta, X);
    std::vector<ProbabilityRow> rows;
    rows.reserve(static_cast<std::size_t>(X.rows()) * 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (int j = 1; j <= 2; ++j) rows.push_back({static_cast<int>(i + 1), j, 0, pi.pi(i, j - 1)});
    return rows;
}

/// Mean probability per (latent, observed) pair, e.g. the average
/// sensitivity sits at key {1, 1}.
inline std::map<std::pair<int, int>, double> group_means(const std::vector<ProbabilityRow>& rows)
{
    std::map<std::pair<int, int>, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        auto& a = acc[{r.latent, r.observed}];
        a.first += r.probability;
        a.second += 1;
    }
    std::map<std::pair<int, int>, double> out;
    for (const auto& [key, a] : acc) out[key] = a.first / a.second;
    return out;
}

} // namespace miscorr

#endif
