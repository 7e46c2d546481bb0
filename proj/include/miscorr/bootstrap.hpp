#ifndef MISCORR_BOOTSTRAP_HPP
#define MISCORR_BOOTSTRAP_HPP

// Nonparametric row bootstrap. Replicate b resamples with its own stream
// make_rng(seed, b), refits from the original estimate, and the refit's own
// label-switching correction aligns it before aggregation. Aggregation runs
// in replicate order, so the output never depends on the worker count.

#include "mediation.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "twostage.hpp"

#include <functional>
#include <optional>

namespace miscorr
{

enum class BootstrapMethod { combo_em, combo_em_2stage, comma_em, comma_pvw, comma_ols };

inline std::string to_string(BootstrapMethod m)
{
    switch (m) {
    case BootstrapMethod::combo_em: return "combo-em";
    case BootstrapMethod::combo_em_2stage: return "combo-em-2stage";
    case BootstrapMethod::comma_em: return "comma-em";
    case BootstrapMethod::comma_pvw: return "comma-pvw";
    case BootstrapMethod::comma_ols: return "comma-ols";
    }
    return "?";
}

inline BootstrapMethod bootstrap_method_from_string(const std::string& s)
{
    for (auto m : {BootstrapMethod::combo_em, BootstrapMethod::combo_em_2stage, BootstrapMethod::comma_em,
                   BootstrapMethod::comma_pvw, BootstrapMethod::comma_ols})
        if (to_string(m) == s) return m;
    throw Error("unknown bootstrap method '" + s + "'");
}

inline constexpr int kBootstrapWarnBelow = 500;

struct BootstrapControl
{
    int B = 1000;
    int workers = 1;
    std::uint64_t seed = 0;
    EmControl em;
};

struct BootstrapResult
{
    std::string method;
    std::vector<std::string> names;
    Eigen::VectorXd estimate;  // the original fit
    Eigen::VectorXd se;
    Eigen::VectorXd ci_lower;  // percentile 2.5%
    Eigen::VectorXd ci_upper;  // percentile 97.5%
    int B = 0;
    int n_converged = 0;
    std::vector<std::string> warnings;
};

/// Refits one resampled index set; nullopt marks a non-converged replicate.
using ReplicateFit = std::function<std::optional<Eigen::VectorXd>(const std::vector<Eigen::Index>&)>;

/// Indices of replicate b: N draws with replacement.
inline std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, std::uint64_t seed, int b)
{
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(b));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return idx;
}

namespace detail
{

// Linear interpolation between order statistics (the common "type 7" rule).
inline double sorted_quantile(const std::vector<double>& v, double q)
{
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace detail

inline BootstrapResult bootstrap(Eigen::Index n_rows, const FitReport& original, const ReplicateFit& refit,
                                 const BootstrapControl& ctl)
{
    require(ctl.B >= 2, "the bootstrap needs B >= 2 replicates");
    require(ctl.workers >= 1, "workers must be at least 1");
    require(n_rows >= 1, "cannot resample an empty dataset");

    std::vector<std::optional<Eigen::VectorXd>> reps(static_cast<std::size_t>(ctl.B));
    parallel_for(ctl.B, ctl.workers, [&](int b) {
        try {
            auto est = refit(bootstrap_indices(n_rows, ctl.seed, b));
            if (est && est->size() == original.size() && est->allFinite()) reps[static_cast<std::size_t>(b)] = est;
        } catch (const Error&) {
            // degenerate resample (e.g. a single observed category): counted as non-converged
        }
    });

    BootstrapResult out;
    out.method = original.method;
    out.names = original.names;
    out.estimate = original.estimates;
    out.B = ctl.B;
    std::vector<const Eigen::VectorXd*> ok;
    for (const auto& r : reps)
        if (r) ok.push_back(&*r);
    out.n_converged = static_cast<int>(ok.size());
    if (ok.empty()) throw Error("no bootstrap replicate converged");
    if (ctl.B < kBootstrapWarnBelow)
        out.warnings.push_back("B = " + std::to_string(ctl.B) + " is below " + std::to_string(kBootstrapWarnBelow) +
                               "; percentile intervals will be unstable");
    if (out.n_converged < ctl.B)
        out.warnings.push_back(std::to_string(ctl.B - out.n_converged) + " replicates did not converge and were dropped");

    const Eigen::Index p = original.size();
    out.se.resize(p);
    out.ci_lower.resize(p);
    out.ci_upper.resize(p);
    std::vector<double> col(ok.size());
    for (Eigen::Index k = 0; k < p; ++k) {
        for (std::size_t b = 0; b < ok.size(); ++b) col[b] = (*ok[b])[k];
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        out.se[k] = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1))
                                   : std::numeric_limits<double>::quiet_NaN();
        std::sort(col.begin(), col.end());
        out.ci_lower[k] = detail::sorted_quantile(col, 0.025);
        out.ci_upper[k] = detail::sorted_quantile(col, 0.975);
    }
    return out;
}

namespace detail
{

inline Categories select(const Categories& c, const std::vector<Eigen::Index>& idx)
{
    Categories out(idx.size());
    for (std::size_t s = 0; s < idx.size(); ++s) out[s] = c[static_cast<std::size_t>(idx[s])];
    return out;
}

inline std::optional<Eigen::VectorXd> if_converged(const FitReport& r)
{
    if (!r.converged) return std::nullopt;
    return r.estimates;
}

} // namespace detail

inline BootstrapResult bootstrap_se(const Categories& ystar, const DesignMatrix& X, const DesignMatrix& Z,
                                    const SingleFit& fit, const BootstrapControl& ctl)
{
    auto refit = [&](const std::vector<Eigen::Index>& idx) {
        return detail::if_converged(
            em_fit(detail::select(ystar, idx), X.select_rows(idx), Z.select_rows(idx), fit.params, ctl.em).report);
    };
    return bootstrap(X.rows(), fit.report, refit, ctl);
}

inline BootstrapResult bootstrap_se(const Categories& ystar1, const Categories& ystar2, const DesignMatrix& X,
                                    const DesignMatrix& Z1, const DesignMatrix& Z2, const TwoStageFit& fit,
                                    const BootstrapControl& ctl)
{
    auto refit = [&](const std::vector<Eigen::Index>& idx) {
        return detail::if_converged(em_fit_2stage(detail::select(ystar1, idx), detail::select(ystar2, idx),
                                                  X.select_rows(idx), Z1.select_rows(idx), Z2.select_rows(idx),
                                                  fit.params, ctl.em)
                                        .report);
    };
    return bootstrap(X.rows(), fit.report, refit, ctl);
}

inline BootstrapResult bootstrap_se(const MediationData& d, const MediationFit& fit, const BootstrapControl& ctl)
{
    auto refit = [&](const std::vector<Eigen::Index>& idx) {
        return detail::if_converged(em_fit_mediation(d.select_rows(idx), fit.params, ctl.em).report);
    };
    return bootstrap(d.rows(), fit.report, refit, ctl);
}

inline BootstrapResult bootstrap_se(const MediationData& d, const PvwFit& fit, const BootstrapControl& ctl)
{
    const SingleOutcomeParams start{fit.params.beta, fit.params.gamma};
    auto refit = [&](const std::vector<Eigen::Index>& idx) {
        return detail::if_converged(
            pvw_fit(d.select_rows(idx), fit.params.dist, fit.params.interaction, start, ctl.em).report);
    };
    return bootstrap(d.rows(), fit.report, refit, ctl);
}

inline BootstrapResult bootstrap_se(const MediationData& d, const OlsFit& fit, const BootstrapControl& ctl)
{
    const SingleOutcomeParams start{fit.params.beta, fit.params.gamma};
    auto refit = [&](const std::vector<Eigen::Index>& idx) {
        return detail::if_converged(ols_correct(d.select_rows(idx), false, start, ctl.em).report);
    };
    return bootstrap(d.rows(), fit.report, refit, ctl);
}

/// Copies bootstrap SEs into a report in place of its analytic ones.
inline FitReport with_bootstrap_se(FitReport r, const BootstrapResult& b)
{
    require_dims(b.se.size() == r.size(), "bootstrap result does not match the report");
    r.se = b.se;
    r.warnings.insert(r.warnings.end(), b.warnings.begin(), b.warnings.end());
    return r;
}

} // namespace miscorr

#endif
