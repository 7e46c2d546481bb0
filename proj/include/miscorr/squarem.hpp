#ifndef MISCORR_SQUAREM_HPP
#define MISCORR_SQUAREM_HPP

// Fixed-point drivers for EM maps: plain iteration and SQUAREM
// (squared extrapolation, step scheme 3, with a monotonicity fallback).

#include "core.hpp"

namespace miscorr
{

struct FixedPointResult
{
    Eigen::VectorXd params;
    int iterations = 0;
    bool converged = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> trace;  // objective after each accepted update (when requested)
};

template <class Map, class Objective>
FixedPointResult iterate_plain(Map&& update, Objective&& objective, Eigen::VectorXd p, const EmControl& ctl)
{
    FixedPointResult out;
    if (ctl.trace) out.trace.push_back(objective(p));
    for (int it = 1; it <= ctl.max_iter; ++it) {
        Eigen::VectorXd next = update(p);
        const double change = (next - p).cwiseAbs().maxCoeff();
        p = std::move(next);
        out.iterations = it;
        if (ctl.trace) out.trace.push_back(objective(p));
        if (change < ctl.tolerance) {
            out.converged = true;
            break;
        }
    }
    out.params = std::move(p);
    out.objective = objective(out.params);
    return out;
}

template <class Map, class Objective>
FixedPointResult iterate_squarem(Map&& update, Objective&& objective, Eigen::VectorXd p, const EmControl& ctl)
{
    constexpr double step_min = 1.0;
    constexpr double mstep = 4.0;
    double step_max = 1.0;

    FixedPointResult out;
    double ll = objective(p);
    if (ctl.trace) out.trace.push_back(ll);
    for (int it = 1; it <= ctl.max_iter; ++it) {
        out.iterations = it;
        Eigen::VectorXd p1 = update(p);
        const Eigen::VectorXd r = p1 - p;
        if (r.cwiseAbs().maxCoeff() < ctl.tolerance) {
            p = std::move(p1);
            ll = objective(p);
            if (ctl.trace) out.trace.push_back(ll);
            out.converged = true;
            break;
        }
        Eigen::VectorXd p2 = update(p1);
        const Eigen::VectorXd v = p2 - 2.0 * p1 + p;
        const double sv = v.norm();
        if (sv == 0.0) {
            p = std::move(p2);
            ll = objective(p);
            if (ctl.trace) out.trace.push_back(ll);
            continue;
        }
        const double ratio = std::clamp(r.norm() / sv, step_min, step_max);
        const double alpha = -ratio;
        Eigen::VectorXd pn = p - 2.0 * alpha * r + alpha * alpha * v;
        if (std::abs(alpha + 1.0) > 0.01) pn = update(pn);
        double lln = objective(pn);
        if (!std::isfinite(lln) || !pn.allFinite() || lln < ll) {
            pn = std::move(p2);
            lln = objective(pn);
        } else if (ratio == step_max) {
            step_max *= mstep;
        }
        p = std::move(pn);
        ll = lln;
        if (ctl.trace) out.trace.push_back(ll);
    }
    out.params = std::move(p);
    out.objective = ll;
    return out;
}

template <class Map, class Objective>
FixedPointResult iterate_em(Map&& update, Objective&& objective, Eigen::VectorXd p, const EmControl& ctl)
{
    require(ctl.tolerance > 0.0, "EM tolerance must be positive");
    require(ctl.max_iter >= 1, "EM max_iter must be at least 1");
    require(p.allFinite(), "EM starting values must be finite");
    if (ctl.accel == Accel::squarem) return iterate_squarem(update, objective, std::move(p), ctl);
    return iterate_plain(update, objective, std::move(p), ctl);
}

} // namespace miscorr

#endif
