#ifndef MISCORR_EFFECTS_HPP
#define MISCORR_EFFECTS_HPP

// Controlled direct, natural direct and natural indirect effects of a
// change in exposure from x0 to x1 with a binary mediator. Continuous
// outcomes give differences; logit- and log-link outcomes give ratios.

#include "mediation.hpp"

namespace miscorr
{

struct EffectEstimates
{
    double nie = 0.0;
    double nde = 0.0;
    double cde = 0.0;
    bool ratio_scale = false;  // odds ratios (bernoulli) or rate ratios (poisson)
};

struct EffectQuery
{
    double x0 = 0.0;
    double x1 = 1.0;
    std::optional<double> m_level;             // mediator value (0/1) for the CDE
    std::optional<Eigen::VectorXd> covariates;  // defaults to the sample means of C
};

inline EffectEstimates effect_estimates(const MediationParams& p, const Eigen::VectorXd& covariate_profile,
                                        const EffectQuery& q)
{
    require(q.m_level.has_value(), "a mediator level is required for the controlled direct effect");
    const Eigen::Index nc = covariate_profile.size();
    require_dims(p.beta.size() == 2 + nc, "beta does not match the covariate profile");
    require_dims(p.theta.size() == MediationParams::theta_size(nc, p.interaction), "theta does not match the profile");

    const double b_c = p.beta.tail(nc).dot(covariate_profile);
    auto eta_m = [&](double x) { return p.beta[0] + p.beta[1] * x + b_c; };
    const double tx = p.theta[1];
    const double tm = p.theta[2];
    const double txm = p.interaction ? p.theta[p.theta.size() - 1] : 0.0;
    const double dx = q.x1 - q.x0;
    const double m = *q.m_level;

    EffectEstimates e;
    if (p.dist == OutcomeDist::normal) {
        const double p0 = expit(eta_m(q.x0));
        const double p1 = expit(eta_m(q.x1));
        e.cde = (tx + txm * m) * dx;
        e.nde = (tx + txm * p0) * dx;
        e.nie = (tm + txm * q.x1) * (p1 - p0);
        return e;
    }
    e.ratio_scale = true;
    const double h0 = eta_m(q.x0);
    const double h1 = eta_m(q.x1);
    e.cde = std::exp((tx + txm * m) * dx);
    e.nde = std::exp(tx * dx) * (1.0 + std::exp(tm + txm * q.x1 + h0)) / (1.0 + std::exp(tm + txm * q.x0 + h0));
    e.nie = (1.0 + std::exp(h0)) * (1.0 + std::exp(tm + txm * q.x1 + h1)) /
            ((1.0 + std::exp(h1)) * (1.0 + std::exp(tm + txm * q.x1 + h0)));
    return e;
}

inline EffectEstimates effect_estimates(const MediationParams& p, const MediationData& d, const EffectQuery& q)
{
    const Eigen::VectorXd profile = q.covariates ? *q.covariates : Eigen::VectorXd(d.C.colwise().mean().transpose());
    return effect_estimates(p, profile, q);
}

} // namespace miscorr

#endif
