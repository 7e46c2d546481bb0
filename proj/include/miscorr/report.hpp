#ifndef MISCORR_REPORT_HPP
#define MISCORR_REPORT_HPP

// Report serialization. Output bytes depend only on the values: numbers use
// the shortest round-trip decimal form, keys keep insertion order, and no
// clock or host information is written.

#include "bootstrap.hpp"
#include "config.hpp"
#include "effects.hpp"
#include "roc.hpp"

#include <json.hpp>

#include <ostream>

namespace miscorr
{

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

namespace detail
{

inline Json number(double v)
{
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline Json numbers(const Eigen::VectorXd& v)
{
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
    return a;
}

inline Json numbers(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double d : v) a.push_back(number(d));
    return a;
}

} // namespace detail

/// Parameter,Estimates,SE,Convergence rows for each report in turn.
inline void write_parameter_table(std::ostream& out, const std::vector<FitReport>& reports)
{
    out << "Parameter,Estimates,SE,Convergence\n";
    for (const auto& r : reports)
        for (Eigen::Index k = 0; k < r.size(); ++k) {
            const double se = k < r.se.size() ? r.se[k] : std::numeric_limits<double>::quiet_NaN();
            out << detail::quote_csv(r.names[static_cast<std::size_t>(k)]) << ',' << format_number(r.estimates[k]) << ','
                << format_number(se) << ',' << (r.converged ? "TRUE" : "FALSE") << '\n';
        }
}

inline Json to_json(const FitReport& r)
{
    Json j;
    j["method"] = r.method;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["loglik"] = detail::number(r.loglik);
    j["label_correction_applied"] = r.label_correction_applied;
    j["sensitivity"] = detail::number(r.sensitivity);
    j["specificity"] = detail::number(r.specificity);
    Json params = Json::array();
    for (Eigen::Index k = 0; k < r.size(); ++k)
        params.push_back({{"name", r.names[static_cast<std::size_t>(k)]},
                          {"estimate", detail::number(r.estimates[k])},
                          {"se", detail::number(k < r.se.size() ? r.se[k] : std::nan(""))}});
    j["parameters"] = std::move(params);
    j["warnings"] = r.warnings;
    return j;
}

inline Json to_json(const BootstrapResult& b)
{
    Json j;
    j["method"] = b.method;
    j["B"] = b.B;
    j["n_converged"] = b.n_converged;
    Json rows = Json::array();
    for (std::size_t k = 0; k < b.names.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        rows.push_back({{"name", b.names[k]},
                        {"estimate", detail::number(b.estimate[i])},
                        {"se", detail::number(b.se[i])},
                        {"ci_lower", detail::number(b.ci_lower[i])},
                        {"ci_upper", detail::number(b.ci_upper[i])}});
    }
    j["parameters"] = std::move(rows);
    j["warnings"] = b.warnings;
    return j;
}

inline Json to_json(const EffectEstimates& e)
{
    return {{"scale", e.ratio_scale ? "ratio" : "difference"},
            {"nie", detail::number(e.nie)},
            {"nde", detail::number(e.nde)},
            {"cde", detail::number(e.cde)}};
}

inline Json to_json(const RocCurve& c)
{
    return {{"auc", detail::number(c.auc)}, {"n_cutoffs", c.cutoffs.size()}};
}

inline Json to_json(const std::vector<PosteriorSummaryRow>& rows)
{
    Json a = Json::array();
    for (const auto& r : rows)
        a.push_back({{"name", r.name},
                     {"mean", detail::number(r.mean)},
                     {"median", detail::number(r.median)},
                     {"sd", detail::number(r.sd)},
                     {"mcse", detail::number(r.mcse)},
                     {"rhat", detail::number(r.rhat)}});
    return a;
}

inline Json to_json(const ChainSet& cs)
{
    Json j;
    j["chains"] = cs.chains.size();
    j["samples"] = cs.n_samples;
    j["burn_in"] = cs.burn_in;
    j["acceptance"] = detail::numbers(cs.acceptance);
    j["label_correction_applied"] = cs.label_correction_applied;
    j["chain_seeds"] = cs.chain_seeds;
    return j;
}

/// Posterior summary table: Parameter,Mean,Median,SD,MCSE,Rhat.
inline void write_posterior_table(std::ostream& out, const std::vector<std::vector<PosteriorSummaryRow>>& tables)
{
    out << "Parameter,Mean,Median,SD,MCSE,Rhat\n";
    for (const auto& t : tables)
        for (const auto& r : t)
            out << detail::quote_csv(r.name) << ',' << format_number(r.mean) << ',' << format_number(r.median) << ','
                << format_number(r.sd) << ',' << format_number(r.mcse) << ',' << format_number(r.rhat) << '\n';
}

inline void write_roc_table(std::ostream& out, const RocCurve& c)
{
    out << "cutoff,FPR,TPR\n";
    for (std::size_t k = 0; k < c.cutoffs.size(); ++k)
        out << format_number(c.cutoffs[k]) << ',' << format_number(c.fpr[k]) << ',' << format_number(c.tpr[k]) << '\n';
}

/// Skeleton shared by every command's JSON report.
inline Json report_header(const AnalysisConfig& cfg)
{
    Json j;
    j["tool"] = "miscorr";
    j["version"] = kVersion;
    j["command"] = cfg.command;
    j["config"] = cfg.to_json();
    return j;
}

inline std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

} // namespace miscorr

#endif
