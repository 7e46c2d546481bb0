#ifndef MISCORR_RUN_HPP
#define MISCORR_RUN_HPP

// Command dispatch: load the bound columns, fit, and write <out>.csv and
// <out>.json (plus <out>_roc.csv for roc). Returns the process exit code:
// 0 success, 2 when the primary fit did not converge. Configuration and
// data problems throw ConfigError, numerical failures throw Error.

#include "report.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace miscorr
{

inline constexpr double kRhatLimit = 1.1;

struct LoadedData
{
    Dataset data;
    Eigen::Index rows_read = 0;
    Eigen::Index rows_dropped = 0;
};

/// Reads the CSV and drops rows with a missing value in any bound column.
/// The labels column of roc is exempt: unlabelled rows are expected there.
inline LoadedData load_dataset(const std::string& path, const AnalysisConfig& cfg, std::ostream& log)
{
    LoadedData out;
    Dataset raw = [&] {
        try {
            return read_csv_file(path);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }();
    out.rows_read = raw.rows();
    std::vector<std::string> required;
    for (const auto& col : cfg.bound_columns()) {
        if (!raw.has(col)) throw ConfigError("unknown column '" + col + "'");
        if (col != cfg.labels) required.push_back(col);
    }
    auto [kept, dropped] = raw.drop_missing(required);
    out.data = std::move(kept);
    out.rows_dropped = dropped;
    if (dropped > 0) log << "dropped " << dropped << " rows with missing values in bound columns\n";
    if (out.data.rows() == 0) throw ConfigError("no rows left after removing missing values");
    return out;
}

namespace detail
{

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw Error("failed writing '" + path + "'");
}

inline DesignMatrix design(const Dataset& d, const std::vector<std::string>& cols)
{
    return DesignMatrix::with_intercept(d.columns(cols));
}

inline Categories categories(const Dataset& d, const std::string& col, Coding coding)
{
    try {
        return to_categories(d.column(col), coding);
    } catch (const Error& e) {
        throw ConfigError("column '" + col + "': " + e.what());
    }
}

inline MediationData mediation_data(const Dataset& d, const AnalysisConfig& cfg)
{
    return MediationData(categories(d, cfg.mstar, cfg.coding), d.column(cfg.outcome), d.column(cfg.x.front()),
                         d.columns(cfg.c), design(d, cfg.z));
}

inline Json data_json(const LoadedData& ld)
{
    return {{"rows_read", ld.rows_read}, {"rows_dropped", ld.rows_dropped}, {"rows_used", ld.data.rows()}};
}

inline std::string table_text(const std::vector<FitReport>& reports)
{
    std::ostringstream s;
    write_parameter_table(s, reports);
    return s.str();
}

inline Json effects_json(const MediationParams& p, const MediationData& d, const AnalysisConfig& cfg)
{
    Json j;
    j["x0"] = cfg.x0;
    j["x1"] = cfg.x1;
    j["covariate_profile"] = "sample means";
    if (cfg.m_level) {
        j["m_level"] = *cfg.m_level;
        j["effects"] = to_json(effect_estimates(p, d, {cfg.x0, cfg.x1, cfg.m_level, std::nullopt}));
    } else {
        // no level chosen: the controlled direct effect at both mediator values
        const EffectEstimates e0 = effect_estimates(p, d, {cfg.x0, cfg.x1, 0.0, std::nullopt});
        const EffectEstimates e1 = effect_estimates(p, d, {cfg.x0, cfg.x1, 1.0, std::nullopt});
        Json e = to_json(e0);
        e.erase("cde");
        e["cde_m0"] = number(e0.cde);
        e["cde_m1"] = number(e1.cde);
        j["effects"] = std::move(e);
    }
    return j;
}

struct Fitted
{
    std::vector<FitReport> reports;  // primary first
    Json extra = Json::object();
};

// One point fit of a bootstrappable method, keeping what its bootstrap needs.
struct MethodFit
{
    Fitted fitted;
    std::function<BootstrapResult(const BootstrapControl&)> bootstrap;
};

inline MethodFit fit_method(const std::string& method, const Dataset& d, const AnalysisConfig& cfg)
{
    const EmControl em = cfg.em_control();
    MethodFit m;
    if (method == "combo-em") {
        auto y = std::make_shared<Categories>(categories(d, cfg.ystar, cfg.coding));
        auto X = std::make_shared<DesignMatrix>(design(d, cfg.x));
        auto Z = std::make_shared<DesignMatrix>(design(d, cfg.z));
        auto fit = std::make_shared<SingleFit>(em_fit(*y, *X, *Z, em));
        const ComparisonFits cmp = comparison_fits(*y, *X, *Z, em);
        m.fitted.reports = {fit->report, cmp.perfect_specificity, cmp.perfect_sensitivity, cmp.naive};
        m.bootstrap = [=](const BootstrapControl& b) { return bootstrap_se(*y, *X, *Z, *fit, b); };
    } else if (method == "combo-em-2stage") {
        auto y1 = std::make_shared<Categories>(categories(d, cfg.ystar1, cfg.coding));
        auto y2 = std::make_shared<Categories>(categories(d, cfg.ystar2, cfg.coding));
        auto X = std::make_shared<DesignMatrix>(design(d, cfg.x));
        auto Z1 = std::make_shared<DesignMatrix>(design(d, cfg.z1));
        auto Z2 = std::make_shared<DesignMatrix>(design(d, cfg.z2));
        auto fit = std::make_shared<TwoStageFit>(em_fit_2stage(*y1, *y2, *X, *Z1, *Z2, em));
        m.fitted.reports = {fit->report, fit->naive};
        m.fitted.extra["second_stage_sensitivity"] = number(fit->second_sensitivity);
        m.fitted.extra["second_stage_specificity"] = number(fit->second_specificity);
        m.bootstrap = [=](const BootstrapControl& b) { return bootstrap_se(*y1, *y2, *X, *Z1, *Z2, *fit, b); };
    } else {
        auto md = std::make_shared<MediationData>(mediation_data(d, cfg));
        if (method == "comma-em") {
            auto fit = std::make_shared<MediationFit>(em_fit_mediation(*md, cfg.dist, cfg.interaction, em));
            m.fitted.reports = {fit->report};
            m.fitted.extra["mediation"] = effects_json(fit->params, *md, cfg);
            m.bootstrap = [=](const BootstrapControl& b) { return bootstrap_se(*md, *fit, b); };
        } else if (method == "comma-pvw") {
            auto fit = std::make_shared<PvwFit>(pvw_fit(*md, cfg.dist, cfg.interaction, std::nullopt, em));
            m.fitted.reports = {fit->report};
            m.fitted.extra["mediation"] = effects_json(fit->params, *md, cfg);
            m.fitted.extra["pvw_clamped"] = fit->weights.clamped;
            m.bootstrap = [=](const BootstrapControl& b) { return bootstrap_se(*md, *fit, b); };
        } else {
            auto fit = std::make_shared<OlsFit>(ols_correct(*md, false, std::nullopt, em));
            m.fitted.reports = {fit->report};
            m.fitted.extra["ols_bias_factors"] = {{"zeta", number(fit->zeta)}, {"xi", number(fit->xi)}};
            m.bootstrap = [=](const BootstrapControl& b) { return bootstrap_se(*md, *fit, b); };
        }
    }
    return m;
}

inline int write_fit(const AnalysisConfig& cfg, const LoadedData& ld, const Fitted& f)
{
    Json j = report_header(cfg);
    j["data"] = data_json(ld);
    Json fits = Json::array();
    for (const auto& r : f.reports) fits.push_back(to_json(r));
    j["fits"] = std::move(fits);
    for (const auto& [k, v] : f.extra.items()) j[k] = v;
    write_file(cfg.out + ".csv", table_text(f.reports));
    write_file(cfg.out + ".json", json_text(j));
    return f.reports.front().converged ? 0 : 2;
}

inline int run_mcmc_command(const AnalysisConfig& cfg, const LoadedData& ld)
{
    const Dataset& d = ld.data;
    McmcControl ctl;
    ctl.n_chains = cfg.chains;
    ctl.n_samples = cfg.samples;
    ctl.burn_in = cfg.burn_in;
    ctl.seed = cfg.seed;
    ctl.workers = cfg.n_parallel;
    const PriorSpec prior = cfg.prior_spec();
    const McmcFit f = cfg.command == "combo-mcmc"
                          ? mcmc_fit(categories(d, cfg.ystar, cfg.coding), design(d, cfg.x), design(d, cfg.z), prior, ctl)
                          : mcmc_fit_2stage(categories(d, cfg.ystar1, cfg.coding), categories(d, cfg.ystar2, cfg.coding),
                                            design(d, cfg.x), design(d, cfg.z1), design(d, cfg.z2), prior, ctl);
    double max_rhat = 0.0;
    for (const auto& r : f.summary)
        if (std::isfinite(r.rhat)) max_rhat = std::max(max_rhat, r.rhat);
    const bool converged = max_rhat <= kRhatLimit;

    Json j = report_header(cfg);
    j["data"] = data_json(ld);
    j["prior"] = {{"family", to_string(prior.family)},
                  {"a", numbers(cfg.prior_a)},
                  {"b", numbers(cfg.prior_b)},
                  {"df", cfg.prior_df}};
    j["converged"] = converged;
    j["max_rhat"] = number(max_rhat);
    j["sampler"] = to_json(f.chains);
    j["summary"] = to_json(f.summary);
    j["naive_summary"] = to_json(f.naive_summary);
    std::ostringstream table;
    write_posterior_table(table, {f.summary, f.naive_summary});
    write_file(cfg.out + ".csv", table.str());
    write_file(cfg.out + ".json", json_text(j));
    return converged ? 0 : 2;
}

inline int run_bootstrap_command(const AnalysisConfig& cfg, const LoadedData& ld, std::ostream& log)
{
    MethodFit m = fit_method(cfg.method, ld.data, cfg);
    BootstrapControl b;
    b.B = cfg.n_bootstrap;
    b.workers = cfg.n_parallel;
    b.seed = cfg.seed;
    b.em = cfg.em_control();
    const BootstrapResult boot = m.bootstrap(b);
    for (const auto& w : boot.warnings) log << "warning: " << w << '\n';
    const FitReport& primary = m.fitted.reports.front();
    Fitted f;
    f.reports = {with_bootstrap_se(primary, boot)};
    f.extra = m.fitted.extra;
    f.extra["bootstrap"] = to_json(boot);
    return write_fit(cfg, ld, f);
}

// Estimates of an earlier combo fit, read back from its JSON report.
inline Eigen::VectorXd estimates_from_report(const std::string& path, const std::vector<std::string>& names)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open fit report '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("fit report '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("fits") || j["fits"].empty()) throw ConfigError("fit report '" + path + "' has no fits");
    const Json& params = j["fits"][0]["parameters"];
    if (params.size() != names.size()) throw ConfigError("fit report '" + path + "' does not match the bound columns");
    Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (params[k]["name"] != names[k] || !params[k]["estimate"].is_number())
            throw ConfigError("fit report '" + path + "' parameter " + std::to_string(k + 1) + " is not " + names[k]);
        v[static_cast<Eigen::Index>(k)] = params[k]["estimate"].get<double>();
    }
    return v;
}

inline int run_roc_command(const AnalysisConfig& cfg, const LoadedData& ld)
{
    const Dataset& d = ld.data;
    const EmControl em = cfg.em_control();
    const DesignMatrix X = design(d, cfg.x);
    Eigen::MatrixXd w;
    FitReport fit_report;
    bool converged = true;
    if (cfg.method == "combo-em") {
        const Categories y = categories(d, cfg.ystar, cfg.coding);
        const DesignMatrix Z = design(d, cfg.z);
        const SingleLayout L{X.cols(), Z.cols()};
        SingleOutcomeParams p;
        if (!cfg.fit.empty()) {
            p = L.unpack(estimates_from_report(cfg.fit, L.names("")));
        } else {
            const SingleFit f = em_fit(y, X, Z, em);
            p = f.params;
            fit_report = f.report;
            converged = f.report.converged;
        }
        w = e_step_weights(p, X, Z, y);
    } else {
        const Categories y1 = categories(d, cfg.ystar1, cfg.coding);
        const Categories y2 = categories(d, cfg.ystar2, cfg.coding);
        const DesignMatrix Z1 = design(d, cfg.z1);
        const DesignMatrix Z2 = design(d, cfg.z2);
        const TwoStageLayout L{X.cols(), Z1.cols(), Z2.cols()};
        TwoStageParams p;
        if (!cfg.fit.empty()) {
            p = L.unpack(estimates_from_report(cfg.fit, L.names()));
        } else {
            const TwoStageFit f = em_fit_2stage(y1, y2, X, Z1, Z2, em);
            p = f.params;
            fit_report = f.report;
            converged = f.report.converged;
        }
        w = predictive_prob_2stage(p, X, Z1, Z2, y1, y2);
    }
    const std::vector<double> cut = cfg.cutoffs.empty() ? default_cutoffs() : cfg.cutoffs;
    const Eigen::VectorXd risk = d.column(cfg.risk);
    const RocCurve adjusted = adjusted_roc(risk, w, cut);

    Json j = report_header(cfg);
    j["data"] = data_json(ld);
    if (fit_report.size() > 0) j["fits"] = Json::array({to_json(fit_report)});
    j["adjusted_roc"] = to_json(adjusted);
    std::ostringstream table;
    write_roc_table(table, adjusted);
    write_file(cfg.out + "_roc.csv", table.str());

    if (!cfg.labels.empty()) {
        // ROC on the labelled subset, as observed ground truth allows
        const Eigen::VectorXd all_labels = d.column(cfg.labels);
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < all_labels.size(); ++i)
            if (!std::isnan(all_labels[i])) rows.push_back(i);
        const Dataset sub = d.select_rows(rows);
        std::optional<Eigen::VectorXd> rec;
        if (!cfg.recommendation.empty()) rec = sub.column(cfg.recommendation);
        const SubsetRoc s = subset_roc(sub.column(cfg.risk), sub.column(cfg.labels), cut, rec);
        Json sj = to_json(s.curve);
        sj["n_labelled"] = rows.size();
        if (s.classifier)
            sj["classifier_point"] = {{"fpr", number(s.classifier->fpr)},
                                      {"tpr", number(s.classifier->tpr)},
                                      {"auc", number(s.classifier->auc)}};
        j["subset_roc"] = std::move(sj);
        std::ostringstream st;
        write_roc_table(st, s.curve);
        write_file(cfg.out + "_subset_roc.csv", st.str());
    }
    write_file(cfg.out + ".json", json_text(j));
    return converged ? 0 : 2;
}

inline Eigen::MatrixXd gamma_matrix(const std::vector<double>& v, Eigen::Index rows, const char* what)
{
    if (static_cast<Eigen::Index>(v.size()) != 2 * rows)
        throw ConfigError(std::string(what) + " needs " + std::to_string(2 * rows) + " values (two columns)");
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, 2);
}

inline std::vector<CovariateSpec> specs(const std::vector<std::string>& text, std::size_t default_count,
                                        const CovariateSpec& fallback)
{
    std::vector<CovariateSpec> out;
    try {
        for (const auto& t : text) out.push_back(CovariateSpec::parse(t));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (text.empty()) out.assign(default_count, fallback);
    return out;
}

inline Json spec_json(const std::vector<CovariateSpec>& s)
{
    Json a = Json::array();
    for (const auto& c : s) a.push_back(c.str());
    return a;
}

inline Json matrix_json(const Eigen::MatrixXd& m)
{
    Json a = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(numbers(Eigen::VectorXd(m.col(c))));
    return a;
}

inline int run_simulate_command(const AnalysisConfig& cfg)
{
    const auto vec = [](const std::vector<double>& v) {
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    const CovariateSpec std_normal = CovariateSpec::normal();
    // covariate counts implied by parameter lengths when no specs are given
    const auto minus = [](std::size_t n, std::size_t k) { return n > k ? n - k : std::size_t{0}; };
    const auto cols = [&](const std::vector<double>& g, std::size_t blocks) { return minus(g.size() / blocks, 1); };
    Json truth;
    Dataset data;
    try {
        if (cfg.model == "single") {
            const auto xs = specs(cfg.x_dist, minus(cfg.beta.size(), 1), std_normal);
            const auto zs = specs(cfg.z_dist, cols(cfg.gamma, 2), std_normal);
            const SingleOutcomeParams p{vec(cfg.beta), gamma_matrix(cfg.gamma, static_cast<Eigen::Index>(zs.size()) + 1, "gamma")};
            data = simulate_single(cfg.n, p, xs, zs, cfg.seed).to_dataset();
            truth = {{"beta", numbers(p.beta)}, {"gamma", matrix_json(p.gamma)},
                     {"x_dist", spec_json(xs)}, {"z_dist", spec_json(zs)}};
        } else if (cfg.model == "twostage") {
            const auto xs = specs(cfg.x_dist, minus(cfg.beta.size(), 1), std_normal);
            const auto z1s = specs(cfg.z1_dist, cols(cfg.gamma1, 2), std_normal);
            const auto z2s = specs(cfg.z2_dist, cols(cfg.gamma2, 4), std_normal);
            const auto pz2 = static_cast<Eigen::Index>(z2s.size()) + 1;
            if (static_cast<Eigen::Index>(cfg.gamma2.size()) != 4 * pz2)
                throw ConfigError("gamma2 needs " + std::to_string(4 * pz2) + " values (k = 1, 2; two columns each)");
            TwoStageParams p;
            p.beta = vec(cfg.beta);
            p.gamma1 = gamma_matrix(cfg.gamma1, static_cast<Eigen::Index>(z1s.size()) + 1, "gamma1");
            const std::vector<double> g(cfg.gamma2.begin(), cfg.gamma2.end());
            for (std::size_t k = 0; k < 2; ++k)
                p.gamma2[k] = Eigen::Map<const Eigen::MatrixXd>(g.data() + static_cast<std::ptrdiff_t>(k) * 2 * pz2, pz2, 2);
            data = simulate_twostage(cfg.n, p, xs, z1s, z2s, cfg.seed).to_dataset();
            truth = {{"beta", numbers(p.beta)},
                     {"gamma1", matrix_json(p.gamma1)},
                     {"gamma2", Json::array({matrix_json(p.gamma2[0]), matrix_json(p.gamma2[1])})},
                     {"x_dist", spec_json(xs)},
                     {"z1_dist", spec_json(z1s)},
                     {"z2_dist", spec_json(z2s)}};
        } else {
            const auto xs = specs(cfg.x_dist, 1, CovariateSpec::bernoulli(0.5));
            if (xs.size() != 1) throw ConfigError("mediation simulation takes exactly one x_dist entry");
            const auto cs = specs(cfg.c_dist, minus(cfg.beta.size(), 2), std_normal);
            const auto zs = specs(cfg.z_dist, cols(cfg.gamma, 2), std_normal);
            MediationParams p;
            p.dist = cfg.dist;
            p.interaction = cfg.interaction;
            p.beta = vec(cfg.beta);
            p.gamma = gamma_matrix(cfg.gamma, static_cast<Eigen::Index>(zs.size()) + 1, "gamma");
            p.theta = vec(cfg.theta);
            p.sigma = cfg.sigma;
            data = simulate_mediation(cfg.n, p, xs.front(), cs, zs, cfg.seed).to_dataset();
            truth = {{"beta", numbers(p.beta)}, {"gamma", matrix_json(p.gamma)}, {"theta", numbers(p.theta)},
                     {"sigma", cfg.sigma},      {"dist", to_string(p.dist)},     {"interaction", p.interaction},
                     {"x_dist", spec_json(xs)}, {"c_dist", spec_json(cs)},       {"z_dist", spec_json(zs)}};
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        // parameter and spec mismatches are configuration problems here
        throw ConfigError(e.what());
    }
    std::ostringstream csv;
    write_csv(csv, data);
    Json j = report_header(cfg);
    j["model"] = cfg.model;
    j["n"] = cfg.n;
    j["seed"] = cfg.seed;
    j["truth"] = std::move(truth);
    j["columns"] = data.names();
    write_file(cfg.out + ".csv", csv.str());
    write_file(cfg.out + ".json", json_text(j));
    return 0;
}

} // namespace detail

inline int run(const AnalysisConfig& cfg, std::ostream& log)
{
    cfg.validate();
    if (cfg.command == "simulate") return detail::run_simulate_command(cfg);
    const LoadedData ld = load_dataset(cfg.data, cfg, log);
    if (cfg.command == "combo-mcmc" || cfg.command == "combo-mcmc-2stage") return detail::run_mcmc_command(cfg, ld);
    if (cfg.command == "bootstrap") return detail::run_bootstrap_command(cfg, ld, log);
    if (cfg.command == "roc") return detail::run_roc_command(cfg, ld);
    const detail::MethodFit m = detail::fit_method(cfg.command, ld.data, cfg);
    for (const auto& w : m.fitted.reports.front().warnings) log << "warning: " << w << '\n';
    return detail::write_fit(cfg, ld, m.fitted);
}

} // namespace miscorr

#endif
