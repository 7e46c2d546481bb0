#ifndef MISCORR_SIMULATE_HPP
#define MISCORR_SIMULATE_HPP

// Generative simulators for the single-outcome, two-stage and mediation
// models. Covariates are independent columns drawn per CovariateSpec.

#include "dataset.hpp"
#include "mediation.hpp"
#include "random.hpp"
#include "twostage.hpp"

#include <regex>

namespace miscorr
{

struct CovariateSpec
{
    enum class Kind { normal, bernoulli };
    Kind kind = Kind::normal;
    double a = 0.0;  // mean, or success probability
    double b = 1.0;  // standard deviation (normal only)

    static CovariateSpec normal(double mean = 0.0, double sd = 1.0)
    {
        require(sd > 0.0, "normal covariate sd must be positive");
        return {Kind::normal, mean, sd};
    }

    static CovariateSpec bernoulli(double p)
    {
        require(p >= 0.0 && p <= 1.0, "bernoulli covariate probability must be in [0,1]");
        return {Kind::bernoulli, p, 0.0};
    }

    /// Parses "normal(mu,sd)" or "bernoulli(p)".
    static CovariateSpec parse(const std::string& text)
    {
        static const std::regex re(R"(\s*(normal|bernoulli)\s*\(\s*([^,\s)]+)\s*(?:,\s*([^,\s)]+)\s*)?\)\s*)");
        std::smatch m;
        if (!std::regex_match(text, m, re)) throw Error("invalid covariate spec '" + text + "'");
        auto num = [&](const std::string& s) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(s, &pos);
                if (pos != s.size()) throw Error("");
                return v;
            } catch (const std::exception&) {
                throw Error("invalid number '" + s + "' in covariate spec '" + text + "'");
            }
        };
        if (m[1] == "normal") {
            require(m[3].matched, "normal covariate spec needs (mean, sd): '" + text + "'");
            return normal(num(m[2]), num(m[3]));
        }
        require(!m[3].matched, "bernoulli covariate spec takes one argument: '" + text + "'");
        return bernoulli(num(m[2]));
    }

    std::string str() const
    {
        return kind == Kind::normal ? "normal(" + format_number(a) + "," + format_number(b) + ")"
                                    : "bernoulli(" + format_number(a) + ")";
    }

    double draw(Rng& rng) const
    {
        return kind == Kind::normal ? a + b * standard_normal(rng) : (bernoulli_draw(rng, a) ? 1.0 : 0.0);
    }
};

inline Eigen::MatrixXd draw_covariates(Eigen::Index n, const std::vector<CovariateSpec>& specs, Rng& rng)
{
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(specs.size()));
    for (std::size_t c = 0; c < specs.size(); ++c)
        for (Eigen::Index i = 0; i < n; ++i) m(i, static_cast<Eigen::Index>(c)) = specs[c].draw(rng);
    return m;
}

namespace detail
{

inline int draw_category(Rng& rng, double p_event)
{
    return bernoulli_draw(rng, p_event) ? 1 : 2;
}

inline void add_block(Dataset& d, const std::string& prefix, const Eigen::MatrixXd& m)
{
    for (Eigen::Index c = 0; c < m.cols(); ++c) d.add_column(prefix + std::to_string(c + 1), m.col(c));
}

} // namespace detail

struct SingleSimulation
{
    Eigen::MatrixXd x;  // covariates without intercept
    Eigen::MatrixXd z;
    Categories y;
    Categories ystar;

    DesignMatrix X() const { return DesignMatrix::with_intercept(x); }
    DesignMatrix Z() const { return DesignMatrix::with_intercept(z); }

    /// Columns x1.., z1.., y, ystar ({1,2} coding).
    Dataset to_dataset() const
    {
        Dataset d;
        detail::add_block(d, "x", x);
        detail::add_block(d, "z", z);
        d.add_column("y", categories_to_vector(y));
        d.add_column("ystar", categories_to_vector(ystar));
        return d;
    }
};

inline SingleSimulation simulate_single(Eigen::Index n, const SingleOutcomeParams& p,
                                        const std::vector<CovariateSpec>& x_specs,
                                        const std::vector<CovariateSpec>& z_specs, std::uint64_t seed)
{
    require(n >= 1, "simulation size must be at least 1");
    require_dims(p.beta.size() == static_cast<Eigen::Index>(x_specs.size()) + 1, "beta does not match x specs");
    require_dims(p.gamma.rows() == static_cast<Eigen::Index>(z_specs.size()) + 1 && p.gamma.cols() == 2,
                 "gamma does not match z specs");
    Rng rng = make_rng(seed, 0);
    SingleSimulation s;
    s.x = draw_covariates(n, x_specs, rng);
    s.z = draw_covariates(n, z_specs, rng);
    const ClassProbTable pi = compute_pi(p.beta, s.X());
    const ObservationProbTable ps = compute_pistar(p.gamma, s.Z());
    s.y.resize(static_cast<std::size_t>(n));
    s.ystar.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = detail::draw_category(rng, pi.pi(i, 0));
        s.y[static_cast<std::size_t>(i)] = y;
        s.ystar[static_cast<std::size_t>(i)] = detail::draw_category(rng, ps.event(i, y - 1));
    }
    return s;
}

struct TwoStageSimulation
{
    Eigen::MatrixXd x;
    Eigen::MatrixXd z1;
    Eigen::MatrixXd z2;
    Categories y;
    Categories ystar1;
    Categories ystar2;

    DesignMatrix X() const { return DesignMatrix::with_intercept(x); }
    DesignMatrix Z1() const { return DesignMatrix::with_intercept(z1); }
    DesignMatrix Z2() const { return DesignMatrix::with_intercept(z2); }

    /// Columns x1.., s1z1.., s2z1.., y, ystar1, ystar2.
    Dataset to_dataset() const
    {
        Dataset d;
        detail::add_block(d, "x", x);
        detail::add_block(d, "s1z", z1);
        detail::add_block(d, "s2z", z2);
        d.add_column("y", categories_to_vector(y));
        d.add_column("ystar1", categories_to_vector(ystar1));
        d.add_column("ystar2", categories_to_vector(ystar2));
        return d;
    }
};

inline TwoStageSimulation simulate_twostage(Eigen::Index n, const TwoStageParams& p,
                                            const std::vector<CovariateSpec>& x_specs,
                                            const std::vector<CovariateSpec>& z1_specs,
                                            const std::vector<CovariateSpec>& z2_specs, std::uint64_t seed)
{
    require(n >= 1, "simulation size must be at least 1");
    Rng rng = make_rng(seed, 0);
    TwoStageSimulation s;
    s.x = draw_covariates(n, x_specs, rng);
    s.z1 = draw_covariates(n, z1_specs, rng);
    s.z2 = draw_covariates(n, z2_specs, rng);
    const TwoStageProbBundle b = compute_twostage_probs(p, s.X(), s.Z1(), s.Z2());
    s.y.resize(static_cast<std::size_t>(n));
    s.ystar1.resize(static_cast<std::size_t>(n));
    s.ystar2.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const int y = detail::draw_category(rng, b.pi.pi(i, 0));
        const int k = detail::draw_category(rng, b.first.event(i, y - 1));
        s.y[u] = y;
        s.ystar1[u] = k;
        s.ystar2[u] = detail::draw_category(rng, b.second.at(i, 1, k, y));
    }
    return s;
}

struct MediationSimulation
{
    Eigen::VectorXd x;
    Eigen::MatrixXd c;
    Eigen::MatrixXd z;
    Categories m;
    Categories mstar;
    Eigen::VectorXd y;

    MediationData data() const
    {
        return MediationData(mstar, y, x, c, DesignMatrix::with_intercept(z));
    }

    /// Columns x, c1.., z1.., m, mstar ({1,2} coding), y.
    Dataset to_dataset() const
    {
        Dataset d;
        d.add_column("x", x);
        detail::add_block(d, "c", c);
        detail::add_block(d, "z", z);
        d.add_column("m", categories_to_vector(m));
        d.add_column("mstar", categories_to_vector(mstar));
        d.add_column("y", y);
        return d;
    }
};

inline MediationSimulation simulate_mediation(Eigen::Index n, const MediationParams& p, const CovariateSpec& x_spec,
                                              const std::vector<CovariateSpec>& c_specs,
                                              const std::vector<CovariateSpec>& z_specs, std::uint64_t seed)
{
    require(n >= 1, "simulation size must be at least 1");
    const auto nc = static_cast<Eigen::Index>(c_specs.size());
    require_dims(p.beta.size() == 2 + nc, "beta does not match the covariate specs");
    require_dims(p.gamma.rows() == static_cast<Eigen::Index>(z_specs.size()) + 1 && p.gamma.cols() == 2,
                 "gamma does not match z specs");
    require_dims(p.theta.size() == MediationParams::theta_size(nc, p.interaction), "theta length mismatch");
    if (p.dist == OutcomeDist::normal) require(p.sigma > 0.0, "sigma must be positive");

    Rng rng = make_rng(seed, 0);
    MediationSimulation s;
    s.x = draw_covariates(n, {x_spec}, rng).col(0);
    s.c = draw_covariates(n, c_specs, rng);
    s.z = draw_covariates(n, z_specs, rng);

    Eigen::MatrixXd xc(n, 1 + nc);
    xc.col(0) = s.x;
    xc.rightCols(nc) = s.c;
    const ClassProbTable pi = compute_pi(p.beta, DesignMatrix::with_intercept(xc));
    const ObservationProbTable ps = compute_pistar(p.gamma, DesignMatrix::with_intercept(s.z));

    s.m.resize(static_cast<std::size_t>(n));
    s.mstar.resize(static_cast<std::size_t>(n));
    s.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const int m = detail::draw_category(rng, pi.pi(i, 0));
        s.m[u] = m;
        s.mstar[u] = detail::draw_category(rng, ps.event(i, m - 1));
        const double mv = m == 1 ? 1.0 : 0.0;
        double eta = p.theta[0] + p.theta[1] * s.x[i] + p.theta[2] * mv + s.c.row(i).dot(p.theta.segment(3, nc));
        if (p.interaction) eta += p.theta[p.theta.size() - 1] * s.x[i] * mv;
        switch (p.dist) {
        case OutcomeDist::normal: s.y[i] = eta + p.sigma * standard_normal(rng); break;
        case OutcomeDist::bernoulli: s.y[i] = bernoulli_draw(rng, expit(eta)) ? 1.0 : 0.0; break;
        case OutcomeDist::poisson:
            s.y[i] = static_cast<double>(std::poisson_distribution<long>(std::exp(clamp_eta(eta)))(rng));
            break;
        }
    }
    return s;
}

} // namespace miscorr

#endif
