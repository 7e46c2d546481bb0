#ifndef MISCORR_ROC_HPP
#define MISCORR_ROC_HPP

// ROC curves where the true class is known only through posterior class
// probabilities, plus the ordinary empirical ROC for labelled subsets.

#include "core.hpp"

#include <numeric>
#include <optional>

namespace miscorr
{

struct RocCurve
{
    std::vector<double> cutoffs;  // ascending
    std::vector<double> tpr;
    std::vector<double> fpr;
    double auc = 0.0;
};

struct RocPoint
{
    double fpr = 0.0;
    double tpr = 0.0;
    double auc = 0.0;  // AUC of the point used as a 0/1 score
};

/// 0, 0.01, ..., 1.
inline std::vector<double> default_cutoffs()
{
    std::vector<double> c(101);
    for (int i = 0; i <= 100; ++i) c[static_cast<std::size_t>(i)] = i / 100.0;
    return c;
}

/// Trapezoid rule after ordering points by ascending FPR (ties keep TPR order).
inline double trapezoid_auc(const std::vector<double>& fpr, const std::vector<double>& tpr)
{
    std::vector<std::size_t> order(fpr.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return fpr[a] < fpr[b] || (fpr[a] == fpr[b] && tpr[a] < tpr[b]);
    });
    double auc = 0.0;
    for (std::size_t s = 1; s < order.size(); ++s) {
        const std::size_t a = order[s - 1];
        const std::size_t b = order[s];
        auc += (fpr[b] - fpr[a]) * (tpr[b] + tpr[a]) / 2.0;
    }
    return auc;
}

namespace detail
{

inline void check_cutoffs(const std::vector<double>& cutoffs)
{
    require(!cutoffs.empty(), "cutoff grid is empty");
    for (std::size_t i = 1; i < cutoffs.size(); ++i)
        require(cutoffs[i] > cutoffs[i - 1], "cutoffs must be strictly increasing");
}

// TPR(c) = sum pos_i 1[risk_i > c] / sum pos_i, FPR likewise with neg.
inline RocCurve weighted_roc(const Eigen::VectorXd& risk, const Eigen::VectorXd& pos, const Eigen::VectorXd& neg,
                             const std::vector<double>& cutoffs)
{
    check_cutoffs(cutoffs);
    const double sp = pos.sum();
    const double sn = neg.sum();
    require(sp > 0.0, "total weight of the positive class is zero");
    require(sn > 0.0, "total weight of the negative class is zero");
    RocCurve r;
    r.cutoffs = cutoffs;
    r.tpr.reserve(cutoffs.size());
    r.fpr.reserve(cutoffs.size());
    for (double c : cutoffs) {
        double tp = 0.0;
        double fp = 0.0;
        for (Eigen::Index i = 0; i < risk.size(); ++i)
            if (risk[i] > c) {
                tp += pos[i];
                fp += neg[i];
            }
        r.tpr.push_back(tp / sp);
        r.fpr.push_back(fp / sn);
    }
    r.auc = trapezoid_auc(r.fpr, r.tpr);
    return r;
}

} // namespace detail

/// ROC with true labels replaced by posterior weights w(i, 0) = P(Y = 1 | .)
/// and w(i, 1) = P(Y = 2 | .).
inline RocCurve adjusted_roc(const Eigen::VectorXd& risk, const Eigen::MatrixXd& w,
                             const std::vector<double>& cutoffs = default_cutoffs())
{
    require_dims(w.rows() == risk.size() && w.cols() == 2, "weights must be (subjects) x 2");
    require(risk.allFinite() && w.allFinite(), "risk scores and weights must be finite");
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        require(std::abs(w.row(i).sum() - 1.0) <= 1e-8 && w(i, 0) >= 0.0 && w(i, 1) >= 0.0,
                "weight rows must be probabilities summing to 1");
    return detail::weighted_roc(risk, w.col(0), w.col(1), cutoffs);
}

/// Empirical ROC on {0,1} labels (1 = event).
inline RocCurve empirical_roc(const Eigen::VectorXd& risk, const Eigen::VectorXd& labels,
                              const std::vector<double>& cutoffs = default_cutoffs())
{
    require_dims(labels.size() == risk.size(), "risk and labels lengths differ");
    bool has1 = false;
    bool has0 = false;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        require(labels[i] == 0.0 || labels[i] == 1.0, "labels must be coded 0/1");
        (labels[i] == 1.0 ? has1 : has0) = true;
    }
    require(has1 && has0, "labels contain a single class");
    return detail::weighted_roc(risk, labels, (1.0 - labels.array()).matrix(), cutoffs);
}

/// Operating point of a 0/1 recommendation; AUC of the three-point curve.
inline RocPoint binary_classifier_point(const Eigen::VectorXd& recommendation, const Eigen::VectorXd& labels)
{
    const RocCurve c = empirical_roc(recommendation, labels, {0.5});
    RocPoint p;
    p.tpr = c.tpr[0];
    p.fpr = c.fpr[0];
    p.auc = 0.5 * (1.0 + p.tpr - p.fpr);
    return p;
}

struct SubsetRoc
{
    RocCurve curve;
    std::optional<RocPoint> classifier;
};

/// ROC restricted to the labelled subset, with an optional 0/1 classifier overlay.
inline SubsetRoc subset_roc(const Eigen::VectorXd& risk, const Eigen::VectorXd& labels,
                            const std::vector<double>& cutoffs = default_cutoffs(),
                            const std::optional<Eigen::VectorXd>& recommendation = std::nullopt)
{
    SubsetRoc out;
    out.curve = empirical_roc(risk, labels, cutoffs);
    if (recommendation) out.classifier = binary_classifier_point(*recommendation, labels);
    return out;
}

} // namespace miscorr

#endif
