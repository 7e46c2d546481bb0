#ifndef MISCORR_CONFIG_HPP
#define MISCORR_CONFIG_HPP

// Analysis configuration. The file format is flat `key = value` lines with
// `#` comments; lists are comma separated (commas inside parentheses do not
// split, so covariate specs like normal(0,1) survive). Every key can also
// be set from the command line, and later settings win.

#include "bootstrap.hpp"
#include "dataset.hpp"
#include "mcmc.hpp"
#include "simulate.hpp"

#include <json.hpp>

#include <charconv>
#include <istream>
#include <map>
#include <set>

namespace miscorr
{

class ConfigError : public Error
{
public:
    using Error::Error;
};

inline const std::vector<std::string>& known_commands()
{
    static const std::vector<std::string> c{"combo-em",  "combo-mcmc", "combo-em-2stage", "combo-mcmc-2stage",
                                            "comma-em",  "comma-pvw",  "comma-ols",       "bootstrap",
                                            "roc",       "simulate"};
    return c;
}

namespace detail
{

inline std::vector<std::string> split_top_level(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char ch : s) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (ch == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

inline std::string join(const std::vector<std::string>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

inline double parse_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v)
{
    Int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "TRUE" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "FALSE" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    for (const auto& s : split_top_level(v)) out.push_back(parse_double(key, s));
    return out;
}

inline std::string doubles_text(const std::vector<double>& v)
{
    std::vector<std::string> s;
    for (double d : v) s.push_back(format_number(d));
    return join(s);
}

} // namespace detail

struct AnalysisConfig
{
    std::string command;
    std::string data;             // input CSV
    std::string out = "miscorr";  // output prefix
    std::string fit;              // roc: JSON report of an earlier fit

    // column roles
    std::string ystar, ystar1, ystar2, mstar, outcome, risk, labels, recommendation;
    std::vector<std::string> x, z, z1, z2, c;
    Coding coding = Coding::one_two;

    // EM and mediation
    double tolerance = 1e-7;
    int max_iter = 1500;
    Accel accel = Accel::plain;
    OutcomeDist dist = OutcomeDist::normal;
    bool interaction = false;
    double x0 = 0.0;
    double x1 = 1.0;
    std::optional<double> m_level;

    // MCMC
    PriorFamily prior = PriorFamily::normal;
    std::vector<double> prior_a{0.0};
    std::vector<double> prior_b{10.0};
    double prior_df = 3.0;
    int chains = 4;
    int samples = 1000;
    int burn_in = 500;

    // bootstrap, roc
    std::string method = "combo-em";
    int n_bootstrap = 1000;
    std::vector<double> cutoffs;  // empty: the default 0.00..1.00 grid

    // execution
    int n_parallel = 1;
    std::uint64_t seed = 0;

    // simulate
    std::string model = "single";
    long n = 1000;
    std::vector<double> beta, gamma, gamma1, gamma2, theta;
    double sigma = 1.0;
    std::vector<std::string> x_dist, z_dist, z1_dist, z2_dist, c_dist;

    void set(const std::string& key, const std::string& raw)
    {
        using namespace detail;
        const std::string v = trim(raw);
        auto list = [&] { return v.empty() ? std::vector<std::string>{} : split_top_level(v); };
        static const std::map<std::string, std::string AnalysisConfig::*> strings{
            {"command", &AnalysisConfig::command}, {"data", &AnalysisConfig::data},
            {"out", &AnalysisConfig::out},         {"fit", &AnalysisConfig::fit},
            {"ystar", &AnalysisConfig::ystar},     {"ystar1", &AnalysisConfig::ystar1},
            {"ystar2", &AnalysisConfig::ystar2},   {"mstar", &AnalysisConfig::mstar},
            {"outcome", &AnalysisConfig::outcome}, {"risk", &AnalysisConfig::risk},
            {"labels", &AnalysisConfig::labels},   {"recommendation", &AnalysisConfig::recommendation},
            {"method", &AnalysisConfig::method},   {"model", &AnalysisConfig::model}};
        static const std::map<std::string, std::vector<std::string> AnalysisConfig::*> lists{
            {"x", &AnalysisConfig::x},           {"z", &AnalysisConfig::z},
            {"z1", &AnalysisConfig::z1},         {"z2", &AnalysisConfig::z2},
            {"c", &AnalysisConfig::c},           {"x_dist", &AnalysisConfig::x_dist},
            {"z_dist", &AnalysisConfig::z_dist}, {"z1_dist", &AnalysisConfig::z1_dist},
            {"z2_dist", &AnalysisConfig::z2_dist}, {"c_dist", &AnalysisConfig::c_dist}};
        static const std::map<std::string, std::vector<double> AnalysisConfig::*> vectors{
            {"beta", &AnalysisConfig::beta},       {"gamma", &AnalysisConfig::gamma},
            {"gamma1", &AnalysisConfig::gamma1},   {"gamma2", &AnalysisConfig::gamma2},
            {"theta", &AnalysisConfig::theta},     {"prior_a", &AnalysisConfig::prior_a},
            {"prior_b", &AnalysisConfig::prior_b}, {"cutoffs", &AnalysisConfig::cutoffs}};
        static const std::map<std::string, int AnalysisConfig::*> ints{
            {"max_iter", &AnalysisConfig::max_iter}, {"chains", &AnalysisConfig::chains},
            {"samples", &AnalysisConfig::samples},   {"burn_in", &AnalysisConfig::burn_in},
            {"n_bootstrap", &AnalysisConfig::n_bootstrap}, {"n_parallel", &AnalysisConfig::n_parallel}};
        static const std::map<std::string, double AnalysisConfig::*> doubles{
            {"tolerance", &AnalysisConfig::tolerance}, {"x0", &AnalysisConfig::x0},
            {"x1", &AnalysisConfig::x1},               {"prior_df", &AnalysisConfig::prior_df},
            {"sigma", &AnalysisConfig::sigma}};

        try {
            if (auto it = strings.find(key); it != strings.end()) this->*(it->second) = v;
            else if (auto it = lists.find(key); it != lists.end()) this->*(it->second) = list();
            else if (auto it = vectors.find(key); it != vectors.end()) this->*(it->second) = parse_doubles(key, v);
            else if (auto it = ints.find(key); it != ints.end()) this->*(it->second) = parse_int<int>(key, v);
            else if (auto it = doubles.find(key); it != doubles.end()) this->*(it->second) = parse_double(key, v);
            else if (key == "coding") {
                if (v == "12") coding = Coding::one_two;
                else if (v == "01") coding = Coding::zero_one;
                else throw ConfigError("'coding' expects 12 or 01, got '" + v + "'");
            } else if (key == "accel") accel = accel_from_string(v);
            else if (key == "dist") dist = outcome_dist_from_string(v);
            else if (key == "interaction") interaction = parse_bool(key, v);
            else if (key == "m_level") m_level = v.empty() ? std::nullopt : std::optional(parse_double(key, v));
            else if (key == "prior") prior = prior_family_from_string(v);
            else if (key == "seed") seed = parse_int<std::uint64_t>(key, v);
            else if (key == "n") n = parse_int<long>(key, v);
            else throw ConfigError("unknown configuration key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }

    /// Reads `key = value` lines.
    void read(std::istream& in, const std::string& origin = "config")
    {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            if (detail::trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
            std::string value = detail::trim(line.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            set(detail::trim(line.substr(0, eq)), value);
        }
    }

    void read_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        read(in, path);
    }

    /// The command whose fitting roles apply (bootstrap and roc delegate).
    std::string fit_command() const
    {
        if (command == "bootstrap" || command == "roc") return method;
        if (command == "combo-mcmc") return "combo-em";
        if (command == "combo-mcmc-2stage") return "combo-em-2stage";
        return command;
    }

    std::vector<std::string> outcome_columns() const
    {
        const std::string f = fit_command();
        if (f == "combo-em") return {ystar};
        if (f == "combo-em-2stage") return {ystar1, ystar2};
        return {mstar, outcome};
    }

    /// Every column the analysis reads, in a fixed order.
    std::vector<std::string> bound_columns() const
    {
        std::vector<std::string> cols = outcome_columns();
        const std::string f = fit_command();
        auto add = [&](const std::vector<std::string>& v) { cols.insert(cols.end(), v.begin(), v.end()); };
        add(x);
        if (f == "combo-em-2stage") {
            add(z1);
            add(z2);
        } else {
            add(z);
        }
        if (f.rfind("comma", 0) == 0) add(c);
        if (command == "roc") {
            cols.push_back(risk);
            if (!labels.empty()) cols.push_back(labels);
            if (!recommendation.empty()) cols.push_back(recommendation);
        }
        return cols;
    }

    void validate() const
    {
        const auto& cmds = known_commands();
        if (command.empty()) throw ConfigError("no command given");
        if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
            throw ConfigError("unknown command '" + command + "'");
        if (command == "simulate") {
            validate_simulate();
            return;
        }
        if (data.empty()) throw ConfigError("'data' (input CSV) is required");
        const std::string f = fit_command();
        static const std::set<std::string> fittable{"combo-em", "combo-em-2stage", "comma-em", "comma-pvw", "comma-ols"};
        if (!fittable.count(f)) throw ConfigError("unknown method '" + method + "'");
        if (command == "roc" && f.rfind("combo", 0) != 0)
            throw ConfigError("roc needs method combo-em or combo-em-2stage, got '" + method + "'");
        auto need = [](const std::string& v, const char* role) {
            if (v.empty()) throw ConfigError(std::string("column role '") + role + "' is required for this command");
        };
        if (f == "combo-em") need(ystar, "ystar");
        if (f == "combo-em-2stage") {
            need(ystar1, "ystar1");
            need(ystar2, "ystar2");
        }
        if (f.rfind("comma", 0) == 0) {
            need(mstar, "mstar");
            need(outcome, "outcome");
            if (x.size() != 1) throw ConfigError("mediation needs exactly one exposure column in 'x'");
            if (f == "comma-ols" && interaction) throw ConfigError("comma-ols does not support interaction");
            if (f == "comma-ols" && dist != OutcomeDist::normal) throw ConfigError("comma-ols needs dist = normal");
        }
        if (command == "roc") need(risk, "risk");
        const auto outs = outcome_columns();
        for (std::size_t i = 0; i < outs.size(); ++i)
            for (std::size_t j = i + 1; j < outs.size(); ++j)
                if (outs[i] == outs[j]) throw ConfigError("column '" + outs[i] + "' is bound to two outcome roles");
        for (const auto& o : outs)
            for (const auto* block : {&x, &z, &z1, &z2, &c})
                if (std::find(block->begin(), block->end(), o) != block->end())
                    throw ConfigError("outcome column '" + o + "' is also used as a covariate");
        if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
        if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
        if (n_parallel < 1) throw ConfigError("n_parallel must be at least 1");
        if (command == "bootstrap" && n_bootstrap < 2) throw ConfigError("n_bootstrap must be at least 2");
        if (command.find("mcmc") != std::string::npos) {
            if (chains < 1 || samples < 1 || burn_in < 0) throw ConfigError("chains and samples must be positive");
            if (prior_a.empty() || prior_b.empty())
                throw ConfigError("prior_a and prior_b need at least one value");
        }
    }

    void validate_simulate() const
    {
        if (model != "single" && model != "twostage" && model != "mediation")
            throw ConfigError("model must be single, twostage or mediation");
        if (n < 1) throw ConfigError("n must be at least 1");
        if (beta.empty()) throw ConfigError("simulate needs 'beta'");
        if (model == "single" && gamma.empty()) throw ConfigError("simulate needs 'gamma'");
        if (model == "twostage" && (gamma1.empty() || gamma2.empty()))
            throw ConfigError("two-stage simulation needs 'gamma1' and 'gamma2'");
        if (model == "mediation" && (gamma.empty() || theta.empty()))
            throw ConfigError("mediation simulation needs 'gamma' and 'theta'");
    }

    EmControl em_control() const { return {tolerance, max_iter, accel, false}; }

    PriorSpec prior_spec() const
    {
        PriorSpec p;
        p.family = prior;
        p.a = Eigen::Map<const Eigen::VectorXd>(prior_a.data(), static_cast<Eigen::Index>(prior_a.size()));
        p.b = Eigen::Map<const Eigen::VectorXd>(prior_b.data(), static_cast<Eigen::Index>(prior_b.size()));
        p.df = prior_df;
        return p;
    }

    /// Resolved settings in canonical text form. n_parallel is left out:
    /// it cannot change any result, and reports must not depend on it.
    std::vector<std::pair<std::string, std::string>> entries() const
    {
        using detail::doubles_text;
        using detail::join;
        std::vector<std::pair<std::string, std::string>> e{
            {"command", command},
            {"data", data},
            {"out", out},
            {"fit", fit},
            {"ystar", ystar},
            {"ystar1", ystar1},
            {"ystar2", ystar2},
            {"mstar", mstar},
            {"outcome", outcome},
            {"risk", risk},
            {"labels", labels},
            {"recommendation", recommendation},
            {"x", join(x)},
            {"z", join(z)},
            {"z1", join(z1)},
            {"z2", join(z2)},
            {"c", join(c)},
            {"coding", coding == Coding::one_two ? "12" : "01"},
            {"tolerance", format_number(tolerance)},
            {"max_iter", std::to_string(max_iter)},
            {"accel", to_string(accel)},
            {"dist", to_string(dist)},
            {"interaction", interaction ? "true" : "false"},
            {"x0", format_number(x0)},
            {"x1", format_number(x1)},
            {"m_level", m_level ? format_number(*m_level) : ""},
            {"prior", to_string(prior)},
            {"prior_a", doubles_text(prior_a)},
            {"prior_b", doubles_text(prior_b)},
            {"prior_df", format_number(prior_df)},
            {"chains", std::to_string(chains)},
            {"samples", std::to_string(samples)},
            {"burn_in", std::to_string(burn_in)},
            {"method", method},
            {"n_bootstrap", std::to_string(n_bootstrap)},
            {"cutoffs", doubles_text(cutoffs)},
            {"seed", std::to_string(seed)},
            {"model", model},
            {"n", std::to_string(n)},
            {"beta", doubles_text(beta)},
            {"gamma", doubles_text(gamma)},
            {"gamma1", doubles_text(gamma1)},
            {"gamma2", doubles_text(gamma2)},
            {"theta", doubles_text(theta)},
            {"sigma", format_number(sigma)},
            {"x_dist", join(x_dist)},
            {"z_dist", join(z_dist)},
            {"z1_dist", join(z1_dist)},
            {"z2_dist", join(z2_dist)},
            {"c_dist", join(c_dist)},
        };
        return e;
    }

    /// Config-file text that reads back to the same settings.
    std::string to_text() const
    {
        std::string s;
        for (const auto& [k, v] : entries()) s += k + " = " + v + "\n";
        return s;
    }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [k, v] : entries()) j[k] = v;
        return j;
    }
};

/// Every settable key, in canonical order (n_parallel included).
inline std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& [k, v] : AnalysisConfig{}.entries()) keys.push_back(k);
    keys.emplace_back("n_parallel");
    return keys;
}

} // namespace miscorr

#endif
