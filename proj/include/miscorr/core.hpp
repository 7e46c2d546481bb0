#ifndef MISCORR_CORE_HPP
#define MISCORR_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace miscorr
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Thrown for inconsistent shapes between parameters and design blocks.
class DimensionError : public Error
{
public:
    using Error::Error;
};

/// Linear predictors are clamped to +/- this value before expit/exp.
inline constexpr double kEtaCap = 30.0;

inline double clamp_eta(double eta) noexcept
{
    return std::clamp(eta, -kEtaCap, kEtaCap);
}

inline double expit(double eta) noexcept
{
    const double e = clamp_eta(eta);
    return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

inline Eigen::VectorXd expit(const Eigen::VectorXd& eta)
{
    return eta.unaryExpr([](double v) { return expit(v); });
}

// log(expit(eta)) and log(1 - expit(eta)) without cancellation.
inline double log_expit(double eta) noexcept
{
    const double e = clamp_eta(eta);
    return e >= 0 ? -std::log1p(std::exp(-e)) : e - std::log1p(std::exp(e));
}

inline double log1m_expit(double eta) noexcept { return log_expit(-eta); }

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw Error(msg);
}

inline void require_dims(bool cond, const std::string& msg)
{
    if (!cond) throw DimensionError(msg);
}

/// Binary category vector in the {1, 2} convention; 1 is the event.
using Categories = std::vector<int>;

/// Map {0,1}-coded data (1 = event) onto the internal {1,2} convention.
inline Categories categories_from_01(const Eigen::VectorXd& v)
{
    Categories out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] == 1.0)
            out[static_cast<std::size_t>(i)] = 1;
        else if (v[i] == 0.0)
            out[static_cast<std::size_t>(i)] = 2;
        else
            throw Error("value " + std::to_string(v[i]) + " is not a {0,1} category");
    }
    return out;
}

inline Categories categories_from_12(const Eigen::VectorXd& v)
{
    Categories out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 1.0 && v[i] != 2.0)
            throw Error("value " + std::to_string(v[i]) + " is not a {1,2} category");
        out[static_cast<std::size_t>(i)] = static_cast<int>(v[i]);
    }
    return out;
}

inline void check_categories(const Categories& c, const char* what)
{
    for (int v : c)
        if (v != 1 && v != 2) throw Error(std::string(what) + " must be coded {1,2}");
}

/// 1[c == 1] as a real vector.
inline Eigen::VectorXd event_indicator(const Categories& c)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) out[static_cast<Eigen::Index>(i)] = c[i] == 1 ? 1.0 : 0.0;
    return out;
}

/// Estimates and diagnostics from one fitting method.
struct FitReport
{
    std::string method;
    std::vector<std::string> names;
    Eigen::VectorXd estimates;
    Eigen::VectorXd se;
    bool converged = false;
    double loglik = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool label_correction_applied = false;
    double sensitivity = std::numeric_limits<double>::quiet_NaN();
    double specificity = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;

    Eigen::Index size() const { return estimates.size(); }

    double at(const std::string& name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return estimates[static_cast<Eigen::Index>(i)];
        throw Error("no parameter named " + name);
    }

    bool has(const std::string& name) const
    {
        return std::find(names.begin(), names.end(), name) != names.end();
    }
};

enum class Accel { plain, squarem };

inline std::string to_string(Accel a) { return a == Accel::plain ? "plain" : "squarem"; }

inline Accel accel_from_string(const std::string& s)
{
    if (s == "plain" || s == "em") return Accel::plain;
    if (s == "squarem") return Accel::squarem;
    throw Error("unknown EM acceleration '" + s + "' (expected plain or squarem)");
}

struct EmControl
{
    double tolerance = 1e-7;
    int max_iter = 1500;
    Accel accel = Accel::plain;
    bool trace = false;  // record the observed log-likelihood after every update
};

} // namespace miscorr

#endif
